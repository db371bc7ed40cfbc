use anyhow::{bail, Context, Result};
use qudit_sim::analysis::{
    b_eff_from_fringes, fft_lorentzian, fft_magnitude, fit_decaying_sinusoid, invert_field_from_lines, FringeInput,
};
use qudit_sim::multipole::{build_rate_matrix, multipole_basis, RelaxationModel};
use qudit_sim::odmr::{
    field_map, locate_feature, lockin_difference, mode_frequencies, odmr_spectrum, DriveTone, OdmrSetup,
};
use qudit_sim::pulse::{ensemble_rabi_trace, ramsey_two_frequency, Pulse};
use qudit_sim::spin::{approx_levels, build_hamiltonian, exact_levels, transition_table, Level, LevelModel, Transition};
use qudit_sim::{FieldConfig, RMat4};

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table, Writer};

pub fn levels(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let lv = exact_levels(&build_hamiltonian(&cfg.params, &cfg.field, None))?;
    let ap = approx_levels(&cfg.params, &cfg.field, None);
    let mut t = Table::new(&["level", "energy_MHz", "energy_weak_field_MHz"]);
    println!("B = ({:.3}, {:.3}) uT", cfg.field.bz, cfg.field.bperp);
    for l in Level::ALL {
        println!("  E({:>5}) = {:+.6} MHz", l.label(), lv.energy(l));
        t.push(vec![l.label().into(), lv.energy(l).into(), ap.energy(l).into()]);
    }
    w.csv("levels", &t)?;
    let mut t = Table::new(&["transition", "freq_MHz", "strength_rel", "sx_element_sq"]);
    for line in transition_table(&lv) {
        println!("  {} = {:.6} MHz (rel. strength {:.3})", line.transition.name(), line.frequency, line.strength);
        t.push(vec![
            line.transition.name().into(),
            line.frequency.into(),
            line.strength.into(),
            line.element_sq.into(),
        ]);
    }
    w.csv("transitions", &t)
}

pub fn odmr(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let grid = cfg.odmr.grid.points("odmr.grid")?;
    let probe = DriveTone::new(grid[0], cfg.odmr.probe_dbm);
    let s = odmr_spectrum(&cfg.odmr_setup(), &grid, &probe, None)?;
    w.csv("odmr", &Table::from_spectrum(&s, "dpl_pl"))?;
    w.dat_spectrum("odmr", &s)
}

pub fn holeburn(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let setup = cfg.odmr_setup();
    let grid = cfg.odmr.grid.points("odmr.grid")?;
    let probe = DriveTone::new(grid[0], cfg.odmr.probe_dbm);
    let pump = DriveTone::new(cfg.odmr.pump_mhz, cfg.odmr.pump_dbm);
    let off = odmr_spectrum(&setup, &grid, &probe, None)?;
    let on = odmr_spectrum(&setup, &grid, &probe, Some(&pump))?;
    let diff = lockin_difference(&setup, &grid, &probe, &pump)?;
    let mut t = Table::new(&["freq_MHz", "pump_off_dpl_pl", "pump_on_dpl_pl", "lockin_dpl_pl"]);
    for i in 0..grid.len() {
        t.push(vec![grid[i].into(), off.values[i].into(), on.values[i].into(), diff.values[i].into()]);
    }
    w.csv("holeburn", &t)?;
    w.dat_spectrum("holeburn_lockin", &diff)?;
    let mut t = Table::new(&["s", "s_prime", "freq_MHz", "located_MHz"]);
    for m in mode_frequencies(cfg.odmr.pump_mhz, &cfg.field, cfg.params.gamma) {
        if let Some(x) = locate_feature(&diff, m.frequency, 0.15) {
            t.push(vec![f64::from(m.s).into(), f64::from(m.sp).into(), m.frequency.into(), x.into()]);
        }
    }
    w.csv("holeburn_modes", &t)
}

pub fn modemap(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let m = &cfg.modemap;
    let bz = m.bz.points("modemap.bz")?;
    let grid = m.grid.points("modemap.grid")?;
    let probe = DriveTone::new(grid[0], m.probe_dbm);
    let pump = DriveTone::new(m.pump_mhz, m.pump_dbm);
    let map = field_map(&cfg.modemap_setup(), &bz, &grid, &pump, &probe)?;
    let mut t = Table::new(&["bz_uT", "freq_MHz", "signal_norm"]);
    for (b, col) in map.bz.iter().zip(&map.values) {
        for (f, v) in map.freqs.iter().zip(col) {
            t.push(vec![(*b).into(), (*f).into(), (*v).into()]);
        }
    }
    w.csv("modemap", &t)?;
    w.dat_map("modemap", &map)?;
    let mut t = Table::new(&["bz_uT", "s", "s_prime", "freq_MHz"]);
    for &b in &bz {
        for l in mode_frequencies(m.pump_mhz, &FieldConfig::new(b, m.bperp), cfg.params.gamma) {
            t.push(vec![b.into(), f64::from(l.s).into(), f64::from(l.sp).into(), l.frequency.into()]);
        }
    }
    w.csv("modemap_lines", &t)
}

pub fn rabi(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let r = &cfg.rabi;
    let durations = r.durations.points("rabi.durations")?;
    let freq = match r.freq {
        Some(f) => f,
        None => exact_levels(&build_hamiltonian(&cfg.params, &cfg.field, Some(0.5 * r.dist.d_mean)))?
            .frequency(r.transition),
    };
    let drive = Pulse::new(freq, r.rabi, 0.0);
    let tr = ensemble_rabi_trace(&cfg.params, &r.dist, &cfg.field, &drive, r.transition, &cfg.pump, &durations)?;
    w.csv("rabi", &Table::from_trace(&tr, "duration_ns", "signal"))?;
    w.dat_trace("rabi", &tr, "duration_ns signal")
}

pub fn ramsey(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let taus = cfg.ramsey.tau.points("ramsey.tau")?;
    let tr = ramsey_two_frequency(&cfg.ramsey_setup(), &taus)?;
    w.csv("ramsey", &Table::from_trace(&tr, "tau_ns", "signal"))?;
    w.dat_trace("ramsey", &tr, "tau_ns signal")?;
    let spec = fft_magnitude(&tr)?;
    let mut t = Table::new(&["freq_MHz", "fft_magnitude"]);
    for (f, v) in spec.freqs.iter().zip(&spec.values) {
        t.push(vec![(*f).into(), (*v).into()]);
    }
    w.csv("ramsey_fft", &t)?;
    let pk = fft_lorentzian(&tr)?;
    let fit = fit_decaying_sinusoid(&tr)?;
    let theta = cfg.field.theta().to_degrees();
    let est = b_eff_from_fringes(&FringeInput::new(cfg.ramsey.nu_probe, pk.f_r, theta).with_errors(pk.err, 0.0), cfg.params.gamma);
    let mut t = Table::new(&["method", "kind", "f_r_MHz", "f_r_err_MHz", "width_MHz", "t2_ns", "t2_err_ns"]);
    let kind = |k| format!("{k:?}").to_lowercase();
    t.push(vec![
        "fft_lorentzian".into(),
        kind(pk.kind).into(),
        pk.f_r.into(),
        pk.err.into(),
        pk.width.into(),
        if pk.width > 0.0 { 1e3 / (2.0 * std::f64::consts::PI * pk.width) } else { 0.0 }.into(),
        0.0.into(),
    ]);
    t.push(vec![
        "time_fit".into(),
        kind(fit.kind).into(),
        fit.f_r.into(),
        fit.f_r_err.into(),
        0.0.into(),
        fit.t2_star.into(),
        fit.t2_err.into(),
    ]);
    w.csv("ramsey_fit", &t)?;
    println!("f_R (FFT) = {:.4} ± {:.4} MHz, T2* (fit) = {:.0} ± {:.0} ns", pk.f_r, pk.err, fit.t2_star, fit.t2_err);
    match est {
        Ok(e) => {
            println!("B_eff = {:.2} ± {:.2} uT at theta = {theta:.2} deg", e.b_eff, e.b_err);
            let mut t = Table::new(&["b_eff_uT", "b_err_uT", "theta_deg"]);
            t.push(vec![e.b_eff.into(), e.b_err.into(), e.theta.into()]);
            w.csv("ramsey_beff", &t)?;
        }
        Err(e) => println!("no field estimate: {e}"),
    }
    Ok(())
}

pub fn invert_field(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let lines: Vec<(Transition, f64)> = if cfg.invert.lines.is_empty() {
        let lv = exact_levels(&build_hamiltonian(&cfg.params, &cfg.field, None))?;
        Transition::INTER_DOUBLET.iter().map(|&t| (t, lv.frequency(t))).collect()
    } else {
        cfg.invert.lines.iter().map(|l| (l.transition, l.freq)).collect()
    };
    let inv = invert_field_from_lines(&cfg.params, &lines, cfg.invert.two_d_known).context("invert.lines")?;
    println!(
        "B_z = {:.3} uT, B_perp = {:.3} uT, |B| = {:.3} uT, theta = {:.3} deg, 2D = {:.4} MHz",
        inv.bz,
        inv.bperp,
        inv.field().magnitude(),
        inv.theta_deg(),
        inv.two_d
    );
    let mut t = Table::new(&["bz_uT", "bperp_uT", "b_uT", "theta_deg", "two_d_MHz", "residual_MHz"]);
    t.push(vec![
        inv.bz.into(),
        inv.bperp.into(),
        inv.field().magnitude().into(),
        inv.theta_deg().into(),
        inv.two_d.into(),
        inv.residual.into(),
    ]);
    w.csv("inversion", &t)
}

pub fn beff(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let e = b_eff_from_fringes(&cfg.beff, cfg.params.gamma)?;
    println!("B_eff = {:.1} ± {:.1} uT", e.b_eff, e.b_err);
    let mut t = Table::new(&["nu_probe_MHz", "f_r_MHz", "theta_deg", "b_eff_uT", "b_err_uT"]);
    t.push(vec![
        cfg.beff.nu_probe.into(),
        cfg.beff.f_r.into(),
        cfg.beff.theta.into(),
        e.b_eff.into(),
        e.b_err.into(),
    ]);
    w.csv("beff", &t)
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

fn rate_matrix_check() -> Result<f64> {
    let t_d = 100.0;
    let r: RMat4 = build_rate_matrix(&RelaxationModel::DeltaMOne { t_d })?;
    let b = multipole_basis();
    let mut worst = 0.0f64;
    for (v, lambda) in [(b.diag_p0(), 1.0 / (3.0 * t_d)), (b.diag_d0(), 1.0 / t_d), (b.diag_f0(), 2.0 / t_d)] {
        let v = v.normalize();
        worst = worst.max(((r * v) - v * lambda).amax() * t_d);
    }
    for j in 0..4 {
        worst = worst.max(r.column(j).sum().abs() * t_d);
    }
    Ok(worst)
}

fn weak_field_check(cfg: &ExperimentConfig) -> Result<f64> {
    let p = &cfg.params;
    let b_max = 0.05 * p.d() / p.gamma_per_ut();
    let mut worst = f64::MIN;
    for i in 0..20 {
        for j in 0..20 {
            let f = FieldConfig::new(b_max * i as f64 / 19.0, b_max * j as f64 / 19.0);
            if f.magnitude() > b_max {
                continue;
            }
            let ex = exact_levels(&build_hamiltonian(p, &f, None))?;
            let ap = approx_levels(p, &f, None);
            let err = Level::ALL.iter().map(|&l| (ex.energy(l) - ap.energy(l)).abs()).fold(0.0, f64::max);
            let bound = 4.0 * (p.gamma_per_ut() * f.bperp).powi(2) / p.two_d;
            worst = worst.max(err - bound);
        }
    }
    Ok(worst)
}

fn degenerate_mode_check(cfg: &ExperimentConfig) -> Result<f64> {
    let mut setup: OdmrSetup = cfg.modemap_setup();
    setup.field = FieldConfig::new(0.0, 0.0);
    setup.level_model = LevelModel::Exact;
    setup.dist.n_packets = 2001;
    let grid = qudit_sim::signal::uniform_grid(26.3, 27.3, 0.01)?;
    let pump = DriveTone::new(26.8, -30.0);
    let s = lockin_difference(&setup, &grid, &DriveTone::new(26.3, -30.0), &pump)?;
    let at = locate_feature(&s, 26.8, 0.3).context("no feature near the pump")?;
    Ok((at - 26.8).abs())
}

pub fn selftest(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let checks = [
        Check {
            name: "rate_matrix_eigensystem",
            value: rate_matrix_check()?,
            tolerance: 1e-12,
        },
        Check {
            name: "weak_field_levels_excess_over_bound_MHz",
            value: weak_field_check(cfg)?,
            tolerance: 0.0,
        },
        Check {
            name: "zero_field_mode_offset_MHz",
            value: degenerate_mode_check(cfg)?,
            tolerance: 0.0100001,
        },
    ];
    let mut t = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut failed = 0;
    for c in &checks {
        let ok = c.value <= c.tolerance;
        failed += usize::from(!ok);
        println!("{} {} (value {:.3e}, tolerance {:.1e})", if ok { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
        t.push(vec![c.name.into(), c.value.into(), c.tolerance.into(), Cell::from(if ok { "true" } else { "false" })]);
    }
    w.csv("selftest", &t)?;
    if failed > 0 {
        bail!("{failed} self-test check(s) failed");
    }
    Ok(())
}
