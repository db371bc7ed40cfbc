use num_complex::Complex64;
use proptest::prelude::*;
use qudit_sim::analysis::{b_eff_from_fringes, invert_field_from_lines, FringeInput};
use qudit_sim::ensemble::{enumerate_packets, InhomogeneousDistribution, Mechanism, Scheme};
use qudit_sim::multipole::{decompose, relax_diagonal, MultipoleState, MultipoleTimes};
use qudit_sim::pulse::{PacketPropagator, Pulse};
use qudit_sim::spin::{approx_levels, build_hamiltonian, exact_levels, Level, Transition};
use qudit_sim::{CMat4, CenterParams, FieldConfig};

fn density(entries: &[f64]) -> CMat4 {
    let a = CMat4::from_fn(|i, j| Complex64::new(entries[4 * i + j], entries[16 + 4 * i + j]));
    let rho = a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

fn max_level_error(p: &CenterParams, f: &FieldConfig) -> f64 {
    let ex = exact_levels(&build_hamiltonian(p, f, None)).unwrap();
    let ap = approx_levels(p, f, None);
    Level::ALL
        .iter()
        .map(|&l| (ex.energy(l) - ap.energy(l)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_reconstruct_round_trip(e in prop::collection::vec(-1.0f64..1.0, 32)) {
        prop_assume!(e.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let rho = density(&e);
        let back = decompose(&rho).unwrap().reconstruct();
        prop_assert!((back - rho).camax() < 1e-12);
    }

    #[test]
    fn relaxation_is_a_semigroup(
        e in prop::collection::vec(-1.0f64..1.0, 32),
        t1 in 0.0f64..5.0,
        t2 in 0.0f64..5.0,
        t_d in 0.5f64..3.0,
    ) {
        prop_assume!(e.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let s = decompose(&density(&e)).unwrap();
        let times = MultipoleTimes::delta_m_one(t_d);
        let two = relax_diagonal(&relax_diagonal(&s, t1, &times, 0.4), t2, &times, 0.4);
        let one = relax_diagonal(&s, t1 + t2, &times, 0.4);
        for k in 0..16 {
            prop_assert!((two.coeffs[k] - one.coeffs[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn populations_round_trip(n in prop::array::uniform4(0.0f64..1.0)) {
        let sum: f64 = n.iter().sum();
        prop_assume!(sum > 1e-3);
        let n = n.map(|x| x / sum);
        let back = MultipoleState::from_populations(&n).populations();
        for k in 0..4 {
            prop_assert!((back[k] - n[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn levels_invariant_under_bperp_sign(bz in -500.0f64..500.0, bp in 0.0f64..500.0) {
        let p = CenterParams::default();
        let a = exact_levels(&build_hamiltonian(&p, &FieldConfig::new(bz, bp), None)).unwrap();
        let b = exact_levels(&build_hamiltonian(&p, &FieldConfig::new(bz, -bp), None)).unwrap();
        let (mut ea, mut eb) = (a.energies, b.energies);
        ea.sort_by(f64::total_cmp);
        eb.sort_by(f64::total_cmp);
        for k in 0..4 {
            prop_assert!((ea[k] - eb[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn weak_field_levels_within_perturbative_bound(r in 0.0f64..1.0, th in 0.0f64..std::f64::consts::FRAC_PI_2) {
        let p = CenterParams::default();
        // γ|B|/D ≤ 0.05
        let b = r * 0.05 * p.d() / p.gamma_per_ut();
        let f = FieldConfig::from_polar(b, th);
        let g_perp = p.gamma_per_ut() * f.bperp;
        prop_assert!(max_level_error(&p, &f) <= 4.0 * g_perp * g_perp / p.two_d + 1e-12);
    }

    #[test]
    fn exact_levels_are_traceless(bz in -300.0f64..300.0, bp in 0.0f64..300.0) {
        let lv = exact_levels(&build_hamiltonian(&CenterParams::default(), &FieldConfig::new(bz, bp), None)).unwrap();
        prop_assert!(lv.sum().abs() < 1e-9);
    }

    #[test]
    fn packet_weights_sum_to_one(
        n in 1usize..60,
        sigma in 0.0f64..2.0,
        scheme in prop_oneof![Just(Scheme::GaussHermite), Just(Scheme::UniformGrid), any::<u64>().prop_map(|seed| Scheme::MonteCarlo { seed })],
        mechanism in prop_oneof![Just(Mechanism::ZfsSpread), Just(Mechanism::FieldSpread)],
    ) {
        let dist = InhomogeneousDistribution {
            mechanism,
            d_sigma: sigma,
            b_sigma: sigma * 10.0,
            n_packets: n,
            scheme,
            ..Default::default()
        };
        let packets = enumerate_packets(&dist, 125.0).unwrap();
        let w: f64 = packets.iter().map(|p| p.weight).sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
        prop_assert!(packets.iter().all(|p| p.weight > 0.0 && p.weight <= 1.0));
        prop_assert_eq!(packets, enumerate_packets(&dist, 125.0).unwrap());
    }

    #[test]
    fn pulses_preserve_density_matrix(
        e in prop::collection::vec(-1.0f64..1.0, 32),
        freq in 1.0f64..40.0,
        rabi in 0.0f64..5.0,
        duration in 0.0f64..300.0,
        phase in 0.0f64..6.3,
    ) {
        prop_assume!(e.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let p = CenterParams::default();
        let dist = InhomogeneousDistribution::single(26.8);
        let pk = enumerate_packets(&dist, 62.5).unwrap()[0];
        let relax = qudit_sim::multipole::RelaxationModel::DeltaMOne { t_d: 100.0 };
        let prop = PacketPropagator::new(&p, &pk, &FieldConfig::new(211.0, 73.0), &relax).unwrap();
        let rho = density(&e);
        let pulse = Pulse { phase, ..Pulse::new(freq, rabi, duration) };
        let out = prop.apply_pulse(&rho, &pulse, 17.0, None).unwrap();
        prop_assert!((out.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        prop_assert!((out - out.adjoint()).camax() < 1e-10);
        let ev = out.clone().symmetric_eigenvalues();
        prop_assert!(ev.iter().all(|&l| (-1e-8..=1.0 + 1e-8).contains(&l)));
    }

    #[test]
    fn b_eff_monotonic(nu in 5.0f64..20.0, f in 0.0f64..4.0, df in 0.001f64..1.0, th in 0.0f64..90.0) {
        let g = 28.0;
        let base = b_eff_from_fringes(&FringeInput::new(nu, f, th), g).unwrap().b_eff;
        let more_f = b_eff_from_fringes(&FringeInput::new(nu, f + df, th), g).unwrap().b_eff;
        let more_nu = b_eff_from_fringes(&FringeInput::new(nu + df, f, th), g).unwrap().b_eff;
        prop_assert!(more_f < base);
        prop_assert!(more_nu > base);
        prop_assert!(base >= 0.0);
    }
}

#[test]
fn inversion_is_identity_on_a_grid() {
    let p = CenterParams::default();
    // γ|B|/D ≤ 0.1
    let b_max = 0.1 * p.d() / p.gamma_per_ut();
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let b = b_max * (0.1 + 0.9 * i as f64 / 9.0);
            let th = 5f64.to_radians() + (80f64.to_radians()) * j as f64 / 9.0;
            let f = FieldConfig::from_polar(b, th);
            let lv = exact_levels(&build_hamiltonian(&p, &f, None)).unwrap();
            let lines: Vec<(Transition, f64)> = Transition::INTER_DOUBLET.iter().map(|&t| (t, lv.frequency(t))).collect();
            let inv = invert_field_from_lines(&p, &lines, None).unwrap();
            let err = ((inv.bz - f.bz) / b).abs().max(((inv.bperp - f.bperp) / b).abs()).max((inv.two_d / p.two_d - 1.0).abs());
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}
