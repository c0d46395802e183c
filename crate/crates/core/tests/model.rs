use std::sync::Arc;

use fbm_sfde::fbm::{FbmPath, VolterraSynth, WienerPath};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::model::*;
use fbm_sfde::solver::{solve_reference, SolutionPath};
use fbm_sfde::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn toy_path(seed: u64) -> SolutionPath {
    let grid = TimeGrid::new(0.5, 1.0, 8, 4).unwrap();
    let model = builtin_model("toy", 0.5).unwrap();
    let fbm: Arc<FbmPath> = Arc::new(
        VolterraSynth::new(grid, 0.75)
            .unwrap()
            .synthesize(WienerPath::sample(grid, seed, 0, 1).unwrap())
            .unwrap(),
    );
    solve_reference(&model, &fbm).unwrap()
}

fn toy_with(constants: impl FnOnce(&mut ModelConstants), b: VectorFn, z: SegmentFn) -> ModelSpec {
    let mut c = *builtin_model("toy", 0.5).unwrap().constants();
    constants(&mut c);
    ModelSpec::new(ModelParts {
        name: "probe".into(),
        sigma: DMatrix::from_element(1, 1, 0.5),
        tau: 0.5,
        b,
        z,
        xi: Arc::new(|u, out| out[0] = (3.0 * u).sin()),
        constants: c,
        shear: None,
    })
    .unwrap()
}

#[test]
fn registry_knows_builtins() {
    for (name, _) in BUILTIN_MODELS {
        let m = builtin_model(name, 0.5).unwrap();
        assert_eq!(m.name(), *name);
        assert!(assumption_probe(&m, 200, 3).pass(), "{name}");
    }
    assert_eq!(builtin_model("nope", 0.5).unwrap_err(), Error::UnknownModel("nope".into()));
}

#[test]
fn segment_at_zero_is_xi() {
    let y = toy_path(1);
    let s = segment_at(&y, 0.0).unwrap();
    assert!(s.values().iter().all(|&v| v == 0.1));
    assert_eq!(s.len(), y.grid().history_steps() + 1);
    assert!(segment_at(&y, 1.5).is_err());
    assert!(segment_at(&y, -0.1).is_err());
}

#[test]
fn truncated_segment_in_first_cell_reads_xi() {
    let y = toy_path(2);
    let g = y.grid();
    let t = 3.0 * g.step();
    let s = truncated_segment(&y, t, g.delta()).unwrap();
    // (t + u) ∧ 0 for every u: all of ξ, which is constant here.
    assert!(s.values().iter().all(|&v| v == 0.1));
}

#[test]
fn segment_sup_norm_matches_path_window() {
    let y = toy_path(3);
    let g = y.grid();
    for i in [0usize, 5, 17, 32, 40] {
        let s = segment_at(&y, g.time(i as isize)).unwrap();
        let hist = g.history_steps() as isize;
        let direct = (i as isize - hist..=i as isize)
            .map(|j| y.at(j)[0].abs())
            .fold(0.0, f64::max);
        assert_eq!(s.sup_norm(), direct);
    }
}

#[test]
fn constant_segment() {
    let s = Segment::constant(&[2.0, -1.0], 0.1, 6).unwrap();
    assert_eq!(s.len(), 6);
    assert!((s.tau() - 0.5).abs() < 1e-15);
    assert_eq!(s.view().at(-0.3), &[2.0, -1.0]);
    assert_eq!(s.sup_norm(), 5f64.sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn segment_matches_direct_indexing(seed in 0u64..1000, i in 0usize..=32) {
        let y = toy_path(seed);
        let g = y.grid();
        let s = segment_at(&y, g.time(i as isize)).unwrap();
        let hist = g.history_steps();
        for k in 0..=hist {
            prop_assert_eq!(s.node(k), y.at(i as isize - hist as isize + k as isize));
        }
    }

    #[test]
    fn truncation_brute_force(seed in 0u64..1000, i in 0usize..=32) {
        let y = toy_path(seed);
        let g = y.grid();
        let t = g.time(i as isize);
        let delta = g.delta();
        let s = truncated_segment(&y, t, delta).unwrap();
        let t_delta = (t / delta + 1e-9).floor() * delta;
        for k in 0..=g.history_steps() {
            let u = g.time(k as isize - g.history_steps() as isize);
            let want = y.value_at((t + u).min(t_delta)).unwrap();
            prop_assert_eq!(s.node(k), want);
        }
        if i % g.substeps() == 0 {
            prop_assert_eq!(s, segment_at(&y, t).unwrap());
        }
    }

    #[test]
    fn conditions_monotone_in_delta(m in 1usize..64, t_exp in -3.0f64..0.0, beta in 0.26f64..0.74) {
        let tau = 0.5;
        let model = builtin_model("toy", tau).unwrap();
        let t = 10f64.powf(t_exp);
        // The (T - δ) factor makes the sum non-monotone once δ is near T.
        let delta = (tau / m as f64).min(t / 4.0);
        let a = check_stepsize_conditions(&model, 0.75, t, delta, beta).unwrap();
        let b = check_stepsize_conditions(&model, 0.75, t, delta / 2.0, beta).unwrap();
        prop_assert_eq!(a.lhs_weight, b.lhs_weight);
        prop_assert_eq!(a.rhs_step, b.rhs_step);
        prop_assert!(!(a.pass() && !b.pass()));
    }

    #[test]
    fn structure_identities(entries in prop::collection::vec(-2.0f64..2.0, 6), rank_one in any::<bool>()) {
        let mut sigma = DMatrix::from_row_slice(3, 2, &entries);
        if rank_one {
            let c0 = sigma.column(0).clone_owned();
            sigma.set_column(1, &(c0 * 0.5));
        }
        prop_assume!(sigma.norm() > 1e-3);
        let b: VectorFn = Arc::new(|x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let full = sigma.clone().svd(false, false).singular_values.min() > 1e-6;
        prop_assume!(rank_one || full);
        // b(x) = x splits with A = I and b* = 0.
        let shear = ShearDecomposition { a: DMatrix::identity(3, 3), b_star: Arc::new(|_x: &[f64], _out: &mut [f64]| {}) };
        let s = build_degenerate_structure(&sigma, &b, Some(shear), 16).unwrap();
        let p = s.pi_star();
        let scale = 1.0 + s.pinv_norm() * sigma.norm();
        prop_assert!((p * p - p).norm() < 1e-12 * scale);
        prop_assert!((p - p.transpose()).norm() < 1e-12 * scale);
        prop_assert!((&sigma * s.sigma_pinv() - p).norm() < 1e-12 * scale);
        if !rank_one {
            prop_assert!((s.sigma_pinv() * &sigma - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12 * scale);
        }
        let q = s.complement();
        prop_assert!((s.sigma_pinv() * q).norm() < 1e-12 * scale);
    }
}

#[test]
fn identity_sigma_structure() {
    let m = ModelSpec::new(ModelParts {
        name: "id".into(),
        sigma: DMatrix::identity(2, 2),
        tau: 1.0,
        b: Arc::new(|x: &[f64], out: &mut [f64]| out.copy_from_slice(x)),
        z: Arc::new(|_e, out| out.fill(0.0)),
        xi: Arc::new(|_u, out| out.fill(0.0)),
        constants: *builtin_model("toy", 1.0).unwrap().constants(),
        shear: None,
    })
    .unwrap();
    let s = m.structure();
    assert!(s.full_rank());
    assert!((s.pi_star() - DMatrix::identity(2, 2)).norm() < 1e-12);
    assert!((s.sigma_pinv() - DMatrix::identity(2, 2)).norm() < 1e-12);
}

#[test]
fn hamiltonian_structure() {
    let m = builtin_model("hamiltonian", 0.5).unwrap();
    let s = m.structure();
    assert_eq!((m.d(), m.m()), (2, 1));
    assert!((s.pi_star() - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
    assert!((m.sigma() * s.sigma_pinv() - s.pi_star()).norm() < 1e-12);
    assert!((s.sigma_pinv() - DMatrix::from_row_slice(1, 2, &[0.0, 2.0])).norm() < 1e-12);
    assert!((s.pinv_norm() - 2.0).abs() < 1e-12);
    let sh = s.shear().unwrap();
    assert_eq!(sh.a, DMatrix::zeros(2, 2));
    let mut out = [9.0, 9.0];
    (sh.b_star)(&[0.0, 1.7], &mut out);
    assert_eq!(out, [1.7, 0.0]);
    assert!(s.decomposition_residual(m.drift_fn(), 100) < 1e-14);
}

#[test]
fn hamiltonian_pure_shear() {
    let m = hamiltonian_example(HamiltonianParts {
        name: "shear".into(),
        m: 1,
        b0: Arc::new(|_x: &[f64], out: &mut [f64]| out[0] = 0.0),
        z0: Arc::new(|_e, out| out[0] = 0.0),
        sigma0: DMatrix::from_element(1, 1, 1.0),
        tau: 0.5,
        xi: Arc::new(|_u, out| out.fill(0.0)),
        constants: *builtin_model("hamiltonian", 0.5).unwrap().constants(),
    })
    .unwrap();
    let mut out = [0.0; 2];
    m.drift(&[3.0, -2.0], &mut out);
    assert_eq!(out, [-2.0, 0.0]);
}

#[test]
fn hamiltonian_rejects_singular_sigma0() {
    let r = hamiltonian_example(HamiltonianParts {
        name: "bad".into(),
        m: 2,
        b0: Arc::new(|_x: &[f64], out: &mut [f64]| out.fill(0.0)),
        z0: Arc::new(|_e, out| out.fill(0.0)),
        sigma0: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
        tau: 0.5,
        xi: Arc::new(|_u, out| out.fill(0.0)),
        constants: *builtin_model("hamiltonian", 0.5).unwrap().constants(),
    });
    assert!(matches!(r, Err(Error::Validation(_))));
}

#[test]
fn probe_flags_wrong_lipschitz_constant() {
    let m = toy_with(
        |c| c.k1 = 2.0,
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = 2.0 * x[0]),
        Arc::new(|_e, out| out[0] = 0.0),
    );
    let r = assumption_probe(&m, 100, 1);
    let h1 = r.get("H1").unwrap();
    assert!(!h1.pass);
    assert!((h1.max_ratio - 2.0).abs() < 1e-9);
    assert!(h1.witness.is_some());
    assert!(r.get("A1").unwrap().pass);
}

#[test]
fn probe_accepts_decreasing_drift_and_sine_functional() {
    let m = toy_with(
        |c| {
            c.l3 = 3.0;
            c.segment_growth = None;
        },
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = -x[0]),
        Arc::new(|e, out| out[0] = e.current()[0].sin()),
    );
    let r = assumption_probe(&m, 500, 2);
    assert!(r.pass(), "{r:?}");
    assert!(r.get("A1").unwrap().max_ratio <= 0.0);
    assert!(r.get("H2").unwrap().max_ratio <= 1.0);
    assert!(r.get("H3").unwrap().max_ratio > 2.5);
}

#[test]
fn invariants_on_constants() {
    let m = builtin_model("toy", 0.5).unwrap();
    assert!(m.validate_for_hurst(0.75).is_ok());
    assert!(m.validate_for_hurst(0.4).is_err());
    let rough = toy_with(|c| c.alpha = 0.2, Arc::new(|x: &[f64], o: &mut [f64]| o[0] = -x[0]), Arc::new(|_e, o| o[0] = 0.0));
    assert!(rough.validate_for_hurst(0.75).is_err());
    let r = ModelSpec::new(ModelParts {
        name: "bad".into(),
        sigma: DMatrix::from_element(1, 2, 1.0),
        tau: 0.5,
        b: Arc::new(|_x: &[f64], o: &mut [f64]| o.fill(0.0)),
        z: Arc::new(|_e, o| o.fill(0.0)),
        xi: Arc::new(|_u, o| o.fill(0.0)),
        constants: *m.constants(),
        shear: None,
    });
    assert!(r.is_err());
}

// Toy parameter set, evaluated term by term in 30-digit arithmetic.
#[test]
fn toy_condition_report_golden() {
    let m = builtin_model("toy", 0.5).unwrap();
    let r = check_stepsize_conditions(&m, 0.75, 0.25, 0.03125, 0.7).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
    assert!(close(r.c0, 0.611_147_660_824_083_65));
    assert!(close(r.phi.phi, 0.532_940_350_027_788_27));
    assert!(close(r.lhs_weight, 0.681_481_372_397_413_47));
    assert!(close(r.rhs_weight, 0.851_097_831_419_646_23));
    assert!(close(r.step_drift, 32.676_251_768_490_906));
    assert!(close(r.step_segment, 47.399_437_023_416_789));
    assert!(close(r.lhs_step, 80.075_688_791_907_695));
    assert!(close(r.rhs_step, 0.008_373_230_176_064_790_3));
    assert!(r.pass_weight);
    assert!(!r.pass_step);
}

#[test]
fn alpha_below_one_drops_gated_terms() {
    let m = toy_with(|c| c.alpha = 0.9, Arc::new(|x: &[f64], o: &mut [f64]| o[0] = -x[0]), Arc::new(|_e, o| o[0] = 0.0));
    let r = check_stepsize_conditions(&m, 0.75, 0.25, 0.03125, 0.7).unwrap();
    assert_eq!(r.lhs_weight, 0.0);
    assert_eq!(r.step_segment, 0.0);
    assert_eq!(r.moment_exponent, f64::INFINITY);
}

#[test]
fn beta_window_enforced() {
    let m = builtin_model("toy", 0.5).unwrap();
    let e = check_stepsize_conditions(&m, 0.75, 0.25, 0.03125, 0.2).unwrap_err();
    assert!(e.to_string().contains("(0.25, 0.75)"), "{e}");
    assert!(check_stepsize_conditions(&m, 0.75, 0.25, 0.03125, 0.75).is_err());
}

#[test]
fn theoretical_order_of_toy() {
    assert!((theoretical_order(1.0, 0.7, 1.0, 0.75) - 0.45).abs() < 1e-15);
    assert!((theoretical_order(0.8, 0.7, 0.5, 0.75) - 0.15).abs() < 1e-15);
}
