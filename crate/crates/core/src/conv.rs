//! Causal Toeplitz convolution `y[n] = Σ_{j<=n} w[n-j] x[j]`.
//!
//! Product-integration weights on a uniform grid depend only on the node
//! distance, so every operator sum in this crate reduces to this shape.
//! Long inputs go through a zero-padded FFT; short ones are summed directly.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const DIRECT_LIMIT: usize = 96;

#[derive(Clone)]
pub struct CausalConvolver {
    weights: Vec<f64>,
    fft: Option<FftPlan>,
}

#[derive(Clone)]
struct FftPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
    size: usize,
}

impl std::fmt::Debug for CausalConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CausalConvolver")
            .field("len", &self.weights.len())
            .field("fft", &self.fft.is_some())
            .finish()
    }
}

impl CausalConvolver {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let fft = (n > DIRECT_LIMIT).then(|| {
            let size = smooth_size(2 * n - 1);
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut spectrum: Vec<Complex64> = weights
                .iter()
                .map(|&w| Complex64::new(w, 0.0))
                .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                .take(size)
                .collect();
            forward.process(&mut spectrum);
            let scale = 1.0 / size as f64;
            for c in &mut spectrum {
                *c *= scale;
            }
            FftPlan {
                forward,
                inverse,
                spectrum,
                size,
            }
        });
        Self { weights, fft }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Convolves `x` (length at most `len()`); output has `x.len()` entries.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert!(x.len() <= self.weights.len(), "signal longer than kernel");
        match &self.fft {
            None => self.direct(x),
            Some(plan) => {
                let mut buf: Vec<Complex64> = x
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                    .take(plan.size)
                    .collect();
                self.spectral(plan, &mut buf);
                buf[..x.len()].iter().map(|c| c.re).collect()
            }
        }
    }

    /// Convolves two signals of equal length in one complex pass.
    pub fn apply_pair(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(x.len(), y.len());
        assert!(x.len() <= self.weights.len(), "signal longer than kernel");
        match &self.fft {
            None => (self.direct(x), self.direct(y)),
            Some(plan) => {
                let mut buf: Vec<Complex64> = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                    .take(plan.size)
                    .collect();
                self.spectral(plan, &mut buf);
                buf[..x.len()].iter().map(|c| (c.re, c.im)).unzip()
            }
        }
    }

    fn spectral(&self, plan: &FftPlan, buf: &mut [Complex64]) {
        plan.forward.process(buf);
        for (b, s) in buf.iter_mut().zip(&plan.spectrum) {
            *b *= s;
        }
        plan.inverse.process(buf);
    }

    fn direct(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| (0..=n).map(|j| self.weights[n - j] * x[j]).sum())
            .collect()
    }
}

/// Smallest `2^a 3^b 5^c >= n`.
fn smooth_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut s = p35;
            while s < n {
                s *= 2;
            }
            best = best.min(s);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}
