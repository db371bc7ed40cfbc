//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line (run with `--nocapture` to see them) and fails when the check fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qudit_sim::analysis::{b_eff_from_fringes, fft_lorentzian, fit_decaying_sinusoid, fringe_contrast, FringeInput};
use qudit_sim::ensemble::{InhomogeneousDistribution, Scheme};
use qudit_sim::multipole::{build_rate_matrix, multipole_basis, RelaxationModel};
use qudit_sim::odmr::{feature_strength, lockin_difference, mode_frequencies, mode_strengths, DriveTone, OdmrSetup};
use qudit_sim::pulse::{packet_selection_profile, ramsey_two_frequency, Pulse, RamseySetup};
use qudit_sim::signal::{fwhm, uniform_grid};
use qudit_sim::spin::{approx_levels, build_hamiltonian, exact_levels, Level, LevelModel, Transition};
use qudit_sim::{CenterParams, FieldConfig, Spectrum};

fn report(n: u32, pass: bool, detail: &str, elapsed: Duration, limit_s: f64) {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let ok = pass && in_time;
    println!(
        "criterion {n}: {} {detail} [{:.2} s, limit {limit_s} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(pass, "criterion {n}: {detail}");
    assert!(in_time, "criterion {n}: took {:.1} s", elapsed.as_secs_f64());
}

#[test]
fn criterion_01_rate_matrix_eigensystem() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for t_d in [1.0, 100.0] {
        let r = build_rate_matrix(&RelaxationModel::DeltaMOne { t_d }).unwrap();
        let mut ev: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().map(|l| l * t_d).collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 1.0 / 3.0, 1.0, 2.0]) {
            worst = worst.max((got - want).abs());
        }
        let b = multipole_basis();
        for (v, lambda) in [(b.diag_p0(), 1.0 / 3.0), (b.diag_d0(), 1.0), (b.diag_f0(), 2.0)] {
            let v = v.normalize();
            worst = worst.max((r * v * t_d - v * lambda).amax());
        }
        for j in 0..4 {
            worst = worst.max((r.column(j).sum() * t_d).abs());
        }
    }
    report(1, worst <= 1e-12, &format!("max eigen residual {worst:.2e} (T_d units)"), t0.elapsed(), 1.0);
}

#[test]
fn criterion_02_weak_field_levels() {
    let t0 = Instant::now();
    let p = CenterParams::default();
    let g = p.gamma_per_ut();
    let b_max = 0.05 * p.d() / g;
    let (mut checked, mut worst_ratio, mut violations) = (0, 0.0f64, 0);
    for i in 0..20 {
        for j in 0..20 {
            let f = FieldConfig::new(b_max * i as f64 / 19.0, b_max * j as f64 / 19.0);
            if f.magnitude() > b_max * (1.0 + 1e-12) {
                continue;
            }
            checked += 1;
            let ex = exact_levels(&build_hamiltonian(&p, &f, None)).unwrap();
            let ap = approx_levels(&p, &f, None);
            let err = Level::ALL.iter().map(|&l| (ex.energy(l) - ap.energy(l)).abs()).fold(0.0, f64::max);
            let bound = 4.0 * (g * f.bperp).powi(2) / (2.0 * p.d());
            if err > bound + 1e-12 {
                violations += 1;
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(err / bound);
            }
        }
    }
    report(
        2,
        violations == 0,
        &format!("{checked} fields, {violations} over bound, worst error/bound {worst_ratio:.3}"),
        t0.elapsed(),
        1.0,
    );
}

/// Wide inhomogeneous line with weak-field positions and a flat-ish
/// relaxation ratio, used for mode-position checks.
fn mode_setup(field: FieldConfig, relax: RelaxationModel) -> OdmrSetup {
    OdmrSetup {
        field,
        dist: InhomogeneousDistribution {
            d_sigma: 5.0,
            n_packets: 4001,
            scheme: Scheme::UniformGrid,
            ..Default::default()
        },
        relax: Some(relax),
        level_model: LevelModel::Perturbative,
        ..Default::default()
    }
}

const NU_PUMP: f64 = 26.8;

fn mode_spectrum(field: FieldConfig, relax: RelaxationModel) -> Spectrum {
    let g = CenterParams::default().gamma_per_ut();
    let reach = 3.0 * g * field.bz.abs() + g * field.doublet_field() + 1.0;
    let grid = uniform_grid(NU_PUMP - reach, NU_PUMP + reach, 0.01).unwrap();
    lockin_difference(
        &mode_setup(field, relax),
        &grid,
        &DriveTone::new(0.0, -30.0),
        &DriveTone::new(NU_PUMP, -30.0),
    )
    .unwrap()
}

/// Local maxima of |signal| above `frac` of the column maximum.
fn ridges(spec: &Spectrum, frac: f64) -> Vec<f64> {
    let v: Vec<f64> = spec.values.iter().map(|x| x.abs()).collect();
    let max = v.iter().cloned().fold(0.0, f64::max);
    (1..v.len() - 1)
        .filter(|&i| v[i] >= frac * max && v[i] > v[i - 1] && v[i] >= v[i + 1])
        .map(|i| spec.freqs[i])
        .collect()
}

#[derive(Default)]
struct RidgeCheck {
    ridges: usize,
    /// Ridges farther than one grid step from every predicted position.
    stray: Vec<(f64, f64)>,
    /// Ridges next to modes that coincide within 0.3 MHz; their summed
    /// lineshape has no single extremum, so position is not judged.
    unresolved: usize,
    /// Required modes (isolated, allowed by the relaxation model) without a
    /// ridge, as (B_z, s, s').
    missing: Vec<(f64, i8, i8)>,
    labels: BTreeSet<(i8, i8)>,
    worst: f64,
    curved: usize,
}

impl RidgeCheck {
    fn ok(&self) -> bool {
        self.stray.is_empty() && self.missing.is_empty()
    }

    /// Judges the local maxima above `floor` of the column maximum and
    /// returns the number of distinct modes seen. With `require`, every
    /// isolated mode passing the filter and allowed by the relaxation model
    /// must show a ridge.
    fn add(
        &mut self,
        spec: &Spectrum,
        field: &FieldConfig,
        floor: f64,
        require: Option<(&RelaxationModel, fn(i8, i8) -> bool)>,
    ) -> usize {
        let modes = mode_frequencies(NU_PUMP, field, CenterParams::default().gamma);
        let crowded = |k: usize| {
            modes
                .iter()
                .enumerate()
                .any(|(j, o)| j != k && (o.frequency - modes[k].frequency).abs() < 0.3)
        };
        let found = ridges(spec, floor);
        let mut here = BTreeSet::new();
        for &x in &found {
            let (d, k) = modes
                .iter()
                .enumerate()
                .map(|(k, m)| ((x - m.frequency).abs(), k))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            let m = modes[k];
            if crowded(k) && d <= 0.4 {
                self.unresolved += 1;
                continue;
            }
            if d > 0.01 + 1e-9 {
                self.stray.push((field.bz, x));
                continue;
            }
            if m.sp != 0 && field.bz < 2.0 * field.bperp {
                self.curved += 1;
            }
            here.insert((m.s, m.sp));
            self.worst = self.worst.max(d);
        }
        self.ridges += found.len();
        if let Some((relax, filter)) = require {
            let strengths = mode_strengths(relax).unwrap();
            let allowed = |s, sp| strengths.iter().any(|m| (m.s, m.sp) == (s, sp) && m.relative.abs() >= 0.05);
            for (k, m) in modes.iter().enumerate() {
                let seen = found.iter().any(|x| (x - m.frequency).abs() <= 0.01 + 1e-9);
                if filter(m.s, m.sp) && allowed(m.s, m.sp) && !crowded(k) && !seen {
                    self.missing.push((field.bz, m.s, m.sp));
                }
            }
        }
        let n = here.len();
        self.labels.extend(here);
        n
    }
}

#[test]
fn criterion_03_mode_positions() {
    let t0 = Instant::now();
    let relax = RelaxationModel::Multipole {
        t_p: 400.0,
        t_d: 100.0,
        t_f: 50.0,
    };
    let mut check = RidgeCheck::default();
    let mut per_field = Vec::new();
    for (bz, bperp) in [(200.0, 15.0), (150.0, 60.0), (60.0, 60.0), (100.0, 30.0)] {
        let field = FieldConfig::new(bz, bperp);
        per_field.push(check.add(&mode_spectrum(field, relax), &field, 1e-3, None));
    }
    // B = 0: every mode collapses onto the hole.
    let spec = mode_spectrum(FieldConfig::new(0.0, 0.0), relax);
    let at_zero = ridges(&spec, 1e-3);
    let single = at_zero.len() == 1 && (at_zero[0] - NU_PUMP).abs() <= 0.01 + 1e-9;
    report(
        3,
        check.ok() && check.unresolved == 0 && single && check.labels.len() == 9 && per_field.iter().all(|&n| n >= 5),
        &format!(
            "{} extrema over 4 fields, modes per field {per_field:?}, {} of 9 labels seen, worst offset {:.4} MHz, \
             stray {:?}; B = 0 extrema at {at_zero:?}",
            check.ridges,
            check.labels.len(),
            check.worst,
            check.stray
        ),
        t0.elapsed(),
        60.0,
    );
}

#[test]
fn criterion_04_mode_suppression() {
    let t0 = Instant::now();
    let field = FieldConfig::new(200.0, 15.0);
    let ratio = |relax| {
        let spec = mode_spectrum(field, relax);
        let (mut corner, mut any): (f64, f64) = (0.0, 0.0);
        for m in mode_frequencies(NU_PUMP, &field, CenterParams::default().gamma) {
            if m.s == 0 && m.sp == 0 {
                continue;
            }
            let w = feature_strength(&spec, m.frequency, 0.15);
            any = any.max(w);
            if m.s != 0 && m.sp != 0 {
                corner = corner.max(w);
            }
        }
        corner / any
    };
    let spherical = ratio(RelaxationModel::Multipole {
        t_p: 300.0,
        t_d: 100.0,
        t_f: 50.0,
    });
    let skewed = ratio(RelaxationModel::Multipole {
        t_p: 400.0,
        t_d: 100.0,
        t_f: 50.0,
    });
    report(
        4,
        spherical < 0.01 && skewed > 0.05,
        &format!(
            "(±1,±1) / strongest satellite: {:.3} % at T_p = 3T_d, {:.1} % at T_p = 4T_d",
            100.0 * spherical,
            100.0 * skewed
        ),
        t0.elapsed(),
        60.0,
    );
}

#[test]
fn criterion_05_field_map_ridges() {
    let t0 = Instant::now();
    let relax = RelaxationModel::DeltaMOne { t_d: 100.0 };
    let mut check = RidgeCheck::default();
    for k in 0..=60 {
        let field = FieldConfig::new(5.0 * k as f64, 60.0);
        // The curved s' != 0 branches of the hole (s = 0) must be traced.
        check.add(&mode_spectrum(field, relax), &field, 0.01, Some((&relax, |s, _| s == 0)));
    }
    report(
        5,
        check.ok() && check.curved > 0,
        &format!(
            "{} ridge points over 61 columns ({} at coincident modes), modes seen {:?}, {} on s' != 0 branches \
             at B_z < 2 B_perp, worst {:.4} MHz, stray {:?}, missing {:?}",
            check.ridges, check.unresolved, check.labels, check.curved, check.worst, check.stray, check.missing
        ),
        t0.elapsed(),
        300.0,
    );
}

fn ramsey_taus() -> Vec<f64> {
    uniform_grid(0.0, 1500.0, 10.0).unwrap()
}

#[test]
fn criterion_06_ramsey_closure() {
    let t0 = Instant::now();
    let setup = RamseySetup::default();
    let taus = ramsey_taus();
    let nu5 = exact_levels(&build_hamiltonian(&setup.params, &setup.field, None))
        .unwrap()
        .frequency(Transition::Nu5);
    let expect = setup.nu_probe - nu5;
    let bin = 1e3 / (taus.len() as f64 * 10.0);
    let theta = setup.field.theta().to_degrees();

    let closure = |setup: &RamseySetup| {
        let tr = ramsey_two_frequency(setup, &taus).unwrap();
        let pk = fft_lorentzian(&tr).unwrap();
        let fit = fit_decaying_sinusoid(&tr).unwrap();
        let b = b_eff_from_fringes(&FringeInput::new(setup.nu_probe, pk.f_r, theta).with_errors(pk.err, 0.0), setup.params.gamma)
            .unwrap();
        (pk, fit, b)
    };

    let single = RamseySetup {
        dist: InhomogeneousDistribution::single(setup.dist.d_mean),
        ..setup
    };
    let (pk, fit, b) = closure(&single);
    println!(
        "  single packet: f_R {:.4} ± {:.4} MHz (expected {expect:.4}), B_eff {:.1} uT, T2* {:.0} ± {:.0} ns",
        pk.f_r, pk.err, b.b_eff, fit.t2_star, fit.t2_err
    );

    let (pk, fit, b) = closure(&setup);
    let f_ok = (pk.f_r - expect).abs() <= bin;
    let b_ok = (b.b_eff - 223.0).abs() <= 0.01 * 223.0;
    let t_ok = (fit.t2_star - setup.params.t2_star).abs() <= fit.t2_err;
    report(
        6,
        f_ok && b_ok && t_ok,
        &format!(
            "ensemble ({} packets, dD {} MHz): f_R {:.4} ± {:.4} MHz vs {expect:.4} (bin {bin:.3}) {}; \
             B_eff {:.1} uT ({:+.2} %) {}; T2* {:.0} ± {:.0} ns vs {} {}",
            setup.dist.n_packets,
            setup.dist.d_sigma,
            pk.f_r,
            pk.err,
            if f_ok { "ok" } else { "off" },
            b.b_eff,
            100.0 * (b.b_eff / 223.0 - 1.0),
            if b_ok { "ok" } else { "off" },
            fit.t2_star,
            fit.t2_err,
            setup.params.t2_star,
            if t_ok { "ok" } else { "off" },
        ),
        t0.elapsed(),
        300.0,
    );
}

#[test]
fn criterion_07_selection_bandwidth() {
    let t0 = Instant::now();
    let s = RamseySetup::default();
    let dist = InhomogeneousDistribution {
        d_sigma: 0.5,
        n_packets: 2001,
        scheme: Scheme::UniformGrid,
        ..Default::default()
    };
    let pulse = Pulse::new(s.nu_pump, s.selection_rabi, 1200.0);
    let prof = packet_selection_profile(&s.params, &dist, &s.field, s.nu_pump, &pulse).unwrap();
    let mut rows: Vec<(f64, f64)> = prof.nu1.iter().cloned().zip(prof.excitation.iter().cloned()).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (x, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let w = fwhm(&x, &y).unwrap_or(f64::NAN);
    report(7, (0.4..=0.8).contains(&w), &format!("FWHM {w:.3} MHz"), t0.elapsed(), 10.0);
}

#[test]
fn criterion_08_no_selection_control() {
    let t0 = Instant::now();
    let selected = RamseySetup {
        dist: InhomogeneousDistribution {
            d_sigma: 1.0,
            n_packets: 241,
            scheme: Scheme::UniformGrid,
            ..Default::default()
        },
        ..RamseySetup::default()
    };
    let control = RamseySetup {
        select: false,
        ..selected
    };
    let taus = ramsey_taus();
    let c_sel = fringe_contrast(&ramsey_two_frequency(&selected, &taus).unwrap()).unwrap();
    let c_ctl = fringe_contrast(&ramsey_two_frequency(&control, &taus).unwrap()).unwrap();
    let ratio = c_ctl / c_sel;
    report(
        8,
        ratio < 0.1,
        &format!("dD 1 MHz: contrast {c_ctl:.3e} without selection vs {c_sel:.3e} selected ({:.1} %)", 100.0 * ratio),
        t0.elapsed(),
        300.0,
    );
}

#[test]
fn criterion_09_fringe_arithmetic() {
    let t0 = Instant::now();
    let g = CenterParams::default().gamma;
    let rows = [(4.51, 0.03, 223.0, 1.0), (3.92, 0.05, 242.0, 2.0), (4.51, 0.04, 223.0, 1.0)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (f_r, err, b, db) in rows {
        let e = b_eff_from_fringes(&FringeInput::new(11.70, f_r, 19.0).with_errors(err, 0.0), g).unwrap();
        ok &= (e.b_eff - b).abs() <= db && e.b_err.round() == db;
        detail.push(format!("{:.2} ± {:.2}", e.b_eff, e.b_err));
    }
    report(9, ok, &format!("B_eff = {} uT", detail.join(", ")), t0.elapsed(), 1.0);
}

const SMALL_CONFIG: &str = r#"
seed = 7

[odmr]
grid = { start = 18.0, stop = 36.0, step = 0.05 }
dist = { n_packets = 21, scheme = { monte_carlo = { seed = 1 } } }

[modemap]
bz = { start = 0.0, stop = 60.0, step = 20.0 }
grid = { start = 20.0, stop = 34.0, step = 0.05 }
dist = { d_sigma = 5.0, n_packets = 401, scheme = "uniform_grid" }

[rabi]
durations = { start = 0.0, stop = 1200.0, step = 40.0 }
dist = { d_sigma = 0.5, n_packets = 11 }

[ramsey]
tau = { start = 0.0, stop = 600.0, step = 20.0 }
dist = { d_sigma = 0.5, n_packets = 9, scheme = "uniform_grid" }
"#;

const SUBCOMMANDS: [&str; 9] = [
    "levels",
    "odmr",
    "holeburn",
    "modemap",
    "rabi",
    "ramsey",
    "invert-field",
    "beff",
    "selftest",
];

fn run_all(config: &Path, out: &Path, workers: &str) -> BTreeMap<String, Vec<u8>> {
    for sub in SUBCOMMANDS {
        let st = Command::new(env!("CARGO_BIN_EXE_qudit"))
            .args(["--config", config.to_str().unwrap(), "--workers", workers, "--out"])
            .arg(out)
            .arg(sub)
            .output()
            .unwrap();
        assert!(st.status.success(), "{sub}: {}", String::from_utf8_lossy(&st.stderr));
    }
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(out).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    files
}

#[test]
fn criterion_10_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let a = run_all(&cfg, &dir.path().join("a"), "1");
    let b = run_all(&cfg, &dir.path().join("b"), "1");
    let c = run_all(&cfg, &dir.path().join("c"), "8");
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k)).collect();
    let ok = !a.is_empty() && a.len() == b.len() && a.len() == c.len() && differing.is_empty();
    report(
        10,
        ok,
        &format!("{} CSV files from {} subcommands; differing: {differing:?}", a.len(), SUBCOMMANDS.len()),
        t0.elapsed(),
        300.0,
    );
}


