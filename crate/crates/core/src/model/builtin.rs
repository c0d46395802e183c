//! Named models for the command line and the tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    InitialFn, ModelConstants, ModelParts, ModelSpec, SegmentFn, SegmentGrowth, ShearDecomposition,
    VectorFn,
};
use crate::error::{Error, Result};

/// `(name, description)` of every builtin model.
pub const BUILTIN_MODELS: &[(&str, &str)] = &[
    ("toy", "1-D: b(x) = -x, Z(eta) = cos(eta(-tau)), sigma = 0.5, xi = 0.1"),
    ("fou-delay", "1-D fractional OU with delay drift: b(x) = -x, Z(eta) = 0.5 eta(-tau), sigma = 0.5, xi = 0.1"),
    ("linear", "1-D: b(x) = -x, Z = 0, sigma = 0.5, xi = 0.5"),
    ("hamiltonian", "2-D: dX1 = X2 dt, dX2 = (-X1 - 0.5 X2 + 0.5 sin X1(t-tau)) dt + 0.5 dB^H"),
];

/// Default delay of the builtin models.
pub const DEFAULT_TAU: f64 = 0.5;

fn constant_xi(v: Vec<f64>) -> InitialFn {
    Arc::new(move |_u: f64, out: &mut [f64]| out.copy_from_slice(&v))
}

fn scalar_drift(lambda: f64) -> VectorFn {
    Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = -lambda * x[0])
}

pub fn builtin_model(name: &str, tau: f64) -> Result<ModelSpec> {
    let scalar = |sigma: f64| DMatrix::from_element(1, 1, sigma);
    match name {
        "toy" => ModelSpec::new(ModelParts {
            name: name.into(),
            sigma: scalar(0.5),
            tau,
            b: scalar_drift(1.0),
            z: Arc::new(|eta, out| out[0] = eta.oldest()[0].cos()),
            xi: constant_xi(vec![0.1]),
            constants: ModelConstants {
                k1: 0.0,
                c1: 1.0,
                q0: 1.0,
                l1: 1.0,
                l2: 1.0,
                alpha: 1.0,
                l3: 0.0,
                theta: 1.0,
                segment_growth: Some(SegmentGrowth {
                    c2: 1.0,
                    p: 1.0,
                    c3: 0.5,
                    q1: 0.0,
                }),
            },
            shear: None,
        }),
        "fou-delay" => ModelSpec::new(ModelParts {
            name: name.into(),
            sigma: scalar(0.5),
            tau,
            b: scalar_drift(1.0),
            z: Arc::new(|eta, out| out[0] = 0.5 * eta.oldest()[0]),
            xi: constant_xi(vec![0.1]),
            constants: ModelConstants {
                k1: -1.0,
                c1: 1.0,
                q0: 1.0,
                l1: 1.0,
                l2: 0.5,
                alpha: 1.0,
                l3: 0.0,
                theta: 1.0,
                segment_growth: None,
            },
            shear: None,
        }),
        "linear" => ModelSpec::new(ModelParts {
            name: name.into(),
            sigma: scalar(0.5),
            tau,
            b: scalar_drift(1.0),
            z: Arc::new(|_eta, out| out[0] = 0.0),
            xi: constant_xi(vec![0.5]),
            constants: ModelConstants {
                k1: -1.0,
                c1: 1.0,
                q0: 1.0,
                l1: 1.0,
                l2: 0.0,
                alpha: 1.0,
                l3: 0.0,
                theta: 1.0,
                segment_growth: None,
            },
            shear: None,
        }),
        "hamiltonian" => hamiltonian_example(HamiltonianParts {
            name: name.into(),
            m: 1,
            b0: Arc::new(|x: &[f64], out: &mut [f64]| out[0] = -x[0] - 0.5 * x[1]),
            z0: Arc::new(|eta, out| out[0] = 0.5 * eta.oldest()[0].sin()),
            sigma0: scalar(0.5),
            tau,
            xi: constant_xi(vec![0.2, 0.0]),
            constants: ModelConstants {
                k1: 0.0,
                c1: 1.3,
                q0: 1.0,
                l1: 1.3,
                l2: 1.0,
                alpha: 1.0,
                l3: 0.0,
                theta: 1.0,
                segment_growth: None,
            },
        }),
        _ => Err(Error::UnknownModel(name.into())),
    }
}

pub struct HamiltonianParts {
    pub name: String,
    pub m: usize,
    /// `b0: ℝ^{2m} → ℝ^m`.
    pub b0: VectorFn,
    /// `Z0: 𝒞(ℝ^{2m}) → ℝ^m`.
    pub z0: SegmentFn,
    pub sigma0: DMatrix<f64>,
    pub tau: f64,
    pub xi: InitialFn,
    pub constants: ModelConstants,
}

/// `d = 2m`, `b(x) = (x2, b0(x))`, `Z = σ0⁻¹ Z0`, `σ = (0; σ0)`, `A = 0`,
/// `b*((0, x2)) = (x2, 0)`.
pub fn hamiltonian_example(parts: HamiltonianParts) -> Result<ModelSpec> {
    let m = parts.m;
    if m == 0 || parts.sigma0.shape() != (m, m) {
        return Err(Error::Validation(format!(
            "sigma0 must be {m}x{m}, got {:?}",
            parts.sigma0.shape()
        )));
    }
    let inv = parts
        .sigma0
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Validation("sigma0 is singular".into()))?;
    let cond = parts.sigma0.norm() * inv.norm();
    if !(cond < 1e12) {
        return Err(Error::Validation(format!("sigma0 is singular (condition ~ {cond:e})")));
    }
    let b0 = parts.b0;
    let b: VectorFn = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let (top, bottom) = out.split_at_mut(m);
        top.copy_from_slice(&x[m..]);
        b0(x, bottom);
    });
    let z0 = parts.z0;
    let z: SegmentFn = Arc::new(move |eta, out| {
        let mut raw = vec![0.0; m];
        z0(eta, &mut raw);
        let v = &inv * DVector::from_vec(raw);
        out.copy_from_slice(v.as_slice());
    });
    let mut sigma = DMatrix::zeros(2 * m, m);
    sigma.view_mut((m, 0), (m, m)).copy_from(&parts.sigma0);
    let shear = ShearDecomposition {
        a: DMatrix::zeros(2 * m, 2 * m),
        b_star: Arc::new(move |x: &[f64], out: &mut [f64]| {
            let (top, bottom) = out.split_at_mut(m);
            top.copy_from_slice(&x[m..]);
            bottom.iter_mut().for_each(|v| *v = 0.0);
        }),
    };
    ModelSpec::new(ModelParts {
        name: parts.name,
        sigma,
        tau: parts.tau,
        b,
        z,
        xi: parts.xi,
        constants: parts.constants,
        shear: Some(shear),
    })
}
