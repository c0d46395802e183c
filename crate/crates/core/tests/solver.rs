use std::sync::Arc;

use fbm_sfde::fbm::{FbmPath, VolterraSynth, WienerPath};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::model::*;
use fbm_sfde::solver::*;
use fbm_sfde::Error;
use nalgebra::DMatrix;

const H: f64 = 0.75;

fn fbm(grid: TimeGrid, seed: u64, path: u64, dim: usize) -> Arc<FbmPath> {
    let w = WienerPath::sample(grid, seed, path, dim).unwrap();
    Arc::new(VolterraSynth::new(grid, H).unwrap().synthesize(w).unwrap())
}

fn constants() -> ModelConstants {
    *builtin_model("toy", 0.5).unwrap().constants()
}

fn one_dim(b: VectorFn, z: SegmentFn, sigma: f64, xi: InitialFn) -> ModelSpec {
    ModelSpec::new(ModelParts {
        name: "test".into(),
        sigma: DMatrix::from_element(1, 1, sigma),
        tau: 0.5,
        b,
        z,
        xi,
        constants: constants(),
        shear: None,
    })
    .unwrap()
}

fn wavy_xi() -> InitialFn {
    Arc::new(|u, out| out[0] = 0.3 + (5.0 * u).sin())
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn max_node_diff(a: &SolutionPath, b: &SolutionPath) -> f64 {
    // `b` lives on a grid whose fine step divides that of `a`.
    let r = a.grid().step() / b.grid().step();
    let r = r.round() as isize;
    (0..=a.grid().n_steps() as isize)
        .map(|i| (a.at(i)[0] - b.at(i * r)[0]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_drift_is_exact() {
    let m = one_dim(Arc::new(|_x: &[f64], o: &mut [f64]| o[0] = 0.0), Arc::new(|_e, o| o[0] = 0.0), 1.0, wavy_xi());
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let b = fbm(grid, 11, 0, 1);
    let y = solve_reference(&m, &b).unwrap();
    let x = solve_em_truncated(&m, &b, grid.delta()).unwrap();
    for i in 0..=grid.n_steps() {
        let want = 0.3 + b.at(i)[0];
        assert!((y.at(i as isize)[0] - want).abs() < 1e-14);
        assert!((x.at(i as isize)[0] - want).abs() < 1e-14);
    }
}

#[test]
fn both_solvers_glue_to_initial_segment() {
    let m = one_dim(Arc::new(|x: &[f64], o: &mut [f64]| o[0] = -x[0]), Arc::new(|e, o| o[0] = e.oldest()[0].cos()), 0.5, wavy_xi());
    let grid = TimeGrid::new(0.5, 1.0, 8, 4).unwrap();
    let b = fbm(grid, 12, 0, 1);
    let y = solve_reference(&m, &b).unwrap();
    let x = solve_em_truncated(&m, &b, grid.delta()).unwrap();
    assert_eq!(y.scheme(), Scheme::Reference);
    assert_eq!(x.scheme(), Scheme::TruncatedEm { delta: grid.delta() });
    for k in -(grid.history_steps() as isize)..=0 {
        let want = 0.3 + (5.0 * grid.time(k)).sin();
        assert_eq!(y.at(k)[0], want);
        assert_eq!(x.at(k)[0], want);
    }
    assert_eq!(y.positive_values()[0], y.at(0)[0]);
    assert_eq!(y.values().len(), grid.history_steps() + grid.n_steps() + 1);
}

#[test]
fn causality_under_spliced_increments() {
    let model = builtin_model("toy", 0.5).unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 4).unwrap();
    let synth = VolterraSynth::new(grid, H).unwrap();
    let a = WienerPath::sample(grid, 5, 0, 1).unwrap();
    let other = WienerPath::sample(grid, 6, 0, 1).unwrap();
    let cut = 21;
    let mut inc = a.increments().to_vec();
    inc[cut..].copy_from_slice(&other.increments()[cut..]);
    let spliced = WienerPath::from_increments(grid, 1, inc).unwrap();
    let fa = Arc::new(synth.synthesize(a).unwrap());
    let fb = Arc::new(synth.synthesize(spliced).unwrap());
    for i in 0..=cut {
        assert_eq!(fa.at(i), fb.at(i));
    }
    assert_ne!(fa.at(cut + 1), fb.at(cut + 1));
    let pairs = [
        (solve_reference(&model, &fa).unwrap(), solve_reference(&model, &fb).unwrap()),
        (solve_em_truncated(&model, &fa, 0.0625).unwrap(), solve_em_truncated(&model, &fb, 0.0625).unwrap()),
    ];
    for (p, q) in &pairs {
        for i in -(grid.history_steps() as isize)..=cut as isize {
            assert_eq!(p.at(i), q.at(i));
        }
        assert_ne!(p.terminal(), q.terminal());
    }
}

// e^{-λt}ξ(0) + σ Σ e^{-λ(t - s_mid)} ΔB^H on a grid 16 times finer than the
// finest Euler run.
fn ou_oracle(fine: &FbmPath, lambda: f64, sigma: f64, x0: f64) -> Vec<f64> {
    let g = fine.grid();
    let dt = g.step();
    let n = g.n_steps();
    let mut out = vec![x0; n + 1];
    let mut acc = 0.0;
    let decay = (-lambda * dt).exp();
    for i in 0..n {
        let db = fine.at(i + 1)[0] - fine.at(i)[0];
        acc = acc * decay + (-lambda * 0.5 * dt).exp() * db;
        out[i + 1] = (-lambda * g.time(i as isize + 1)).exp() * x0 + sigma * acc;
    }
    out
}

#[test]
fn fractional_ou_first_order_against_fine_oracle() {
    let lambda = 1.5;
    let m = one_dim(
        Arc::new(move |x: &[f64], o: &mut [f64]| o[0] = -lambda * x[0]),
        Arc::new(|_e, o| o[0] = 0.0),
        0.5,
        Arc::new(|_u, o| o[0] = 0.8),
    );
    let substeps = [4usize, 8, 16];
    let fine_grid = TimeGrid::new(0.5, 1.0, 8, 16 * 16).unwrap();
    let mut errs = vec![0.0; substeps.len()];
    let paths = 8;
    for p in 0..paths {
        let fine = fbm(fine_grid, 21, p, 1);
        let oracle = ou_oracle(&fine, lambda, 0.5, 0.8);
        for (e, &s) in errs.iter_mut().zip(&substeps) {
            let g = TimeGrid::new(0.5, 1.0, 8, s).unwrap();
            let r = fine_grid.n_steps() / g.n_steps();
            let y = solve_reference(&m, &Arc::new(fine.coarsen_to(g).unwrap())).unwrap();
            let err = (0..=g.n_steps())
                .map(|i| (y.at(i as isize)[0] - oracle[i * r]).abs())
                .fold(0.0, f64::max);
            *e += err / paths as f64;
        }
    }
    let steps: Vec<f64> = substeps.iter().map(|&s| 0.5 / (8 * s) as f64).collect();
    let slope = fit_slope(&steps, &errs);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!((0.85..1.2).contains(&slope), "slope {slope}, errors {errs:?}");
}

#[test]
fn refinement_consistency_of_truncated_scheme() {
    let model = builtin_model("toy", 0.5).unwrap();
    let top = TimeGrid::new(0.5, 1.0, 8, 64).unwrap();
    let levels = [4usize, 8, 16, 32];
    let mut diffs = vec![0.0; 3];
    for p in 0..8 {
        let fine = fbm(top, 31, p, 1);
        let sols: Vec<SolutionPath> = levels
            .iter()
            .map(|&s| {
                let g = TimeGrid::new(0.5, 1.0, 8, s).unwrap();
                solve_em_truncated(&model, &Arc::new(fine.coarsen_to(g).unwrap()), 0.0625).unwrap()
            })
            .collect();
        for k in 0..3 {
            diffs[k] += max_node_diff(&sols[k], &sols[k + 1]) / 8.0;
        }
    }
    let steps: Vec<f64> = levels[..3].iter().map(|&s| 0.5 / (8 * s) as f64).collect();
    let slope = fit_slope(&steps, &diffs);
    assert!(slope >= 0.8, "slope {slope}, diffs {diffs:?}");
}

#[test]
fn linear_scheme_difference_shrinks_with_delta() {
    let model = builtin_model("linear", 0.5).unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 64, 1).unwrap();
    let deltas = [0.125, 0.0625, 0.03125, 0.015625];
    let mut diffs = vec![0.0; 3];
    for p in 0..8 {
        let b = fbm(grid, 41, p, 1);
        let sols: Vec<SolutionPath> = deltas.iter().map(|&d| solve_em_truncated(&model, &b, d).unwrap()).collect();
        for k in 0..3 {
            diffs[k] += max_node_diff(&sols[k], &sols[k + 1]);
        }
    }
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
}

#[test]
fn full_rank_scheme_is_frozen_drift_euler() {
    let model = builtin_model("toy", 0.5).unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 4).unwrap();
    let b = fbm(grid, 3, 0, 1);
    let x = solve_em_truncated(&model, &b, 0.0625).unwrap();
    let dt = grid.step();
    let mut cur = 0.1;
    for i in 0..grid.n_steps() {
        let frozen = -x.at(grid.floor_delta(i) as isize)[0];
        let back = (i as isize - grid.history_steps() as isize).min(grid.floor_delta(i) as isize);
        let z = x.at(back)[0].cos();
        cur += frozen * dt + 0.5 * (z * dt + b.at(i + 1)[0] - b.at(i)[0]);
        assert!((x.at(i as isize + 1)[0] - cur).abs() < 1e-13);
    }
}

#[test]
fn hamiltonian_position_is_trapezoid_of_velocity() {
    let m = hamiltonian_example(HamiltonianParts {
        name: "free".into(),
        m: 1,
        b0: Arc::new(|_x: &[f64], o: &mut [f64]| o[0] = 0.0),
        z0: Arc::new(|_e, o| o[0] = 0.0),
        sigma0: DMatrix::from_element(1, 1, 0.5),
        tau: 0.5,
        xi: Arc::new(|u, o| {
            o[0] = 1.0 + u;
            o[1] = -0.4 + u * u;
        }),
        constants: *builtin_model("hamiltonian", 0.5).unwrap().constants(),
    })
    .unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let b = fbm(grid, 17, 0, 1);
    let x = solve_em_truncated(&m, &b, 0.0625).unwrap();
    let dt = grid.step();
    let mut pos = 1.0;
    for i in 0..=grid.n_steps() {
        let vel = -0.4 + 0.5 * b.at(i)[0];
        assert!((x.at(i as isize)[1] - vel).abs() < 1e-12);
        if i > 0 {
            pos += 0.5 * dt * (vel - 0.4 + 0.5 * b.at(i - 1)[0]);
        }
        assert!((x.at(i as isize)[0] - pos).abs() < 1e-10, "node {i}");
    }
}

#[test]
fn complement_block_is_pure_exponential() {
    let a = -0.7;
    let m = ModelSpec::new(ModelParts {
        name: "decay".into(),
        sigma: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        tau: 0.5,
        b: Arc::new(move |x: &[f64], o: &mut [f64]| {
            o[0] = a * x[0];
            o[1] = -x[1];
        }),
        z: Arc::new(|e, o| o[0] = e.oldest()[1].sin()),
        xi: Arc::new(|_u, o| {
            o[0] = 2.0;
            o[1] = 0.3;
        }),
        constants: constants(),
        shear: Some(ShearDecomposition {
            a: DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, 0.0]),
            b_star: Arc::new(|_x: &[f64], o: &mut [f64]| o.fill(0.0)),
        }),
    })
    .unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let b = fbm(grid, 19, 0, 1);
    let x = solve_em_truncated(&m, &b, 0.0625).unwrap();
    for i in 0..=grid.n_steps() {
        let t = grid.time(i as isize);
        assert!((x.at(i as isize)[0] - 2.0 * (a * t).exp()).abs() < 1e-10);
    }
}

#[test]
fn divergence_reports_step() {
    let m = one_dim(
        Arc::new(|x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0] * 1e3),
        Arc::new(|_e, o| o[0] = 0.0),
        0.5,
        Arc::new(|_u, o| o[0] = 5.0),
    );
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let b = fbm(grid, 1, 0, 1);
    match solve_reference(&m, &b) {
        Err(Error::Divergence { step, time }) => {
            assert!(step > 0 && step <= grid.n_steps());
            assert!((time - step as f64 * grid.step()).abs() < 1e-12);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn rejects_mismatched_inputs() {
    let model = builtin_model("toy", 0.5).unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    assert!(solve_reference(&model, &fbm(grid, 1, 0, 2)).is_err());
    let b = fbm(grid, 1, 0, 1);
    assert!(solve_em_truncated(&model, &b, 0.03).is_err());
    assert!(solve_em_truncated(&model, &b, 0.2).is_err());
    let other = TimeGrid::new(0.25, 1.0, 8, 8).unwrap();
    assert!(solve_reference(&model, &fbm(other, 1, 0, 1)).is_err());
}

#[test]
fn moment_bounds_hold_for_fou() {
    let model = builtin_model("fou-delay", 0.5).unwrap();
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let r = moment_bound_check(&builtin_model("linear", 0.5).unwrap(), grid, H, 1000, 77, 1e-2).unwrap();
    assert_eq!(r.pointwise_rate(), 0.0, "{r:?}");
    assert_eq!(r.uniform_rate(), 0.0, "{r:?}");
    let r = moment_bound_check(&model, grid, H, 200, 78, 1e-2).unwrap();
    assert_eq!(r.n_paths, 200);
    assert_eq!(r.pointwise_violations, 0, "{r:?}");
}

#[test]
fn zero_drift_bound_is_tight() {
    let m = one_dim(Arc::new(|_x: &[f64], o: &mut [f64]| o[0] = 0.0), Arc::new(|_e, o| o[0] = 0.0), 1.0, Arc::new(|_u, o| o[0] = 0.4));
    let grid = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
    let r = moment_bound_check(&m, grid, H, 100, 3, 1e-12).unwrap();
    assert_eq!(r.pointwise_violations, 0);
    // |ξ(0) + B| = |ξ(0)| + |B| whenever B >= 0 at the start, so the slack is tight.
    assert!(r.pointwise_max_excess <= 1e-12 && r.pointwise_max_excess > -1e-9);
}
