//! Random spot checks of the declared constants. Report-only: a pass means
//! no counterexample was found among the sampled points.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ModelSpec, Segment};
use crate::rng::{generator, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub declared: f64,
    pub max_ratio: f64,
    pub pass: bool,
    /// The sample that produced `max_ratio` when it exceeds the declared value.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub n_points: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const SEGMENT_NODES: usize = 33;
const SCALES: [f64; 4] = [0.01, 0.3, 1.0, 10.0];

struct Tracker {
    name: &'static str,
    declared: f64,
    best: f64,
    witness: String,
}

impl Tracker {
    fn new(name: &'static str, declared: f64) -> Self {
        Self {
            name,
            declared,
            best: f64::NEG_INFINITY,
            witness: String::new(),
        }
    }

    fn see(&mut self, ratio: f64, witness: impl FnOnce() -> String) {
        if ratio.is_finite() && ratio > self.best {
            self.best = ratio;
            if ratio > self.limit() {
                self.witness = witness();
            }
        }
    }

    fn limit(&self) -> f64 {
        self.declared + 1e-9 * self.declared.abs().max(1.0)
    }

    fn finish(self) -> AssumptionCheck {
        let best = if self.best == f64::NEG_INFINITY { 0.0 } else { self.best };
        let pass = best <= self.limit();
        AssumptionCheck {
            name: self.name,
            declared: self.declared,
            max_ratio: best,
            pass,
            witness: (!pass).then_some(self.witness),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn gauss(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_segment(rng: &mut ChaCha8Rng, d: usize, step: f64, scale: f64) -> Segment {
    let mut v = gauss(rng, d, scale);
    let mut values = v.clone();
    for _ in 1..SEGMENT_NODES {
        for x in v.iter_mut() {
            *x += scale * 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        values.extend_from_slice(&v);
    }
    Segment::new(d, step, values).expect("d >= 1")
}

fn perturbed(rng: &mut ChaCha8Rng, s: &Segment, scale: f64) -> Segment {
    let values = s
        .values()
        .iter()
        .map(|x| x + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Segment::new(s.dim(), s.tau() / (s.len() - 1) as f64, values).expect("same layout")
}

fn seg_diff(a: &Segment, b: &Segment) -> f64 {
    (0..a.len()).map(|k| norm(&diff(a.node(k), b.node(k)))).fold(0.0, f64::max)
}

/// Samples `n_points` pairs per assumption at mixed scales.
pub fn assumption_probe(model: &ModelSpec, n_points: usize, seed: u64) -> AssumptionReport {
    let n_points = n_points.max(1);
    let d = model.d();
    let m = model.m();
    let c = *model.constants();
    let mut rng = generator(seed, Purpose::Probe, 1, 0);
    let mut a1 = Tracker::new("A1", c.k1);
    let mut h1 = Tracker::new("H1", c.l1);
    let mut a2 = Tracker::new("A2", c.c1);
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    for i in 0..n_points {
        let scale = SCALES[i % SCALES.len()];
        let x = gauss(&mut rng, d, scale);
        let y = if i % 2 == 0 {
            gauss(&mut rng, d, scale)
        } else {
            let e = gauss(&mut rng, d, 1e-3 * scale);
            x.iter().zip(&e).map(|(p, q)| p + q).collect()
        };
        model.drift(&x, &mut bx);
        model.drift(&y, &mut by);
        let dx = diff(&x, &y);
        let db = diff(&bx, &by);
        let r2 = dx.iter().map(|v| v * v).sum::<f64>();
        if r2 > 0.0 {
            let inner: f64 = dx.iter().zip(&db).map(|(p, q)| p * q).sum();
            a1.see(inner / r2, || format!("x = {x:?}, y = {y:?}"));
            h1.see(norm(&db) / r2.sqrt(), || format!("x = {x:?}, y = {y:?}"));
        }
        a2.see(norm(&bx) / (1.0 + norm(&x).powf(c.q0)), || format!("x = {x:?}"));
    }

    let step = model.tau() / (SEGMENT_NODES - 1) as f64;
    let mut h2 = Tracker::new("H2", c.l2);
    let mut growth = c
        .segment_growth
        .map(|g| (Tracker::new("A3-increment", g.c2), Tracker::new("A3-growth", g.c3), g));
    let (mut zx, mut zy) = (vec![0.0; m], vec![0.0; m]);
    let mut sz = vec![0.0; d];
    for i in 0..n_points {
        let scale = SCALES[i % SCALES.len()];
        let s1 = random_segment(&mut rng, d, step, scale);
        let s2 = if i % 2 == 0 {
            random_segment(&mut rng, d, step, scale)
        } else {
            perturbed(&mut rng, &s1, 1e-3 * scale)
        };
        model.segment_drift(&s1.view(), &mut zx);
        model.segment_drift(&s2.view(), &mut zy);
        let dz = norm(&diff(&zx, &zy));
        let ds = seg_diff(&s1, &s2);
        if ds > 0.0 {
            h2.see(dz / ds.powf(c.alpha), || format!("segments differ by {ds:e}, |dZ| = {dz:e}"));
        }
        if let Some((inc, gr, g)) = growth.as_mut() {
            if ds > 0.0 {
                let denom = ds.powf(c.alpha) * (1.0 + s1.sup_norm().powf(g.p) + s2.sup_norm().powf(g.p));
                inc.see(dz / denom, || format!("segments differ by {ds:e}"));
            }
            let sum = Segment::new(
                d,
                step,
                s1.values().iter().zip(s2.values()).map(|(p, q)| p + q).collect(),
            )
            .expect("same layout");
            model.segment_drift(&sum.view(), &mut zx);
            for (r, out) in sz.iter_mut().enumerate() {
                *out = (0..m).map(|k| model.sigma()[(r, k)] * zx[k]).sum();
            }
            let eta0 = s1.node(SEGMENT_NODES - 1);
            let inner: f64 = sz.iter().zip(eta0).map(|(p, q)| p * q).sum();
            let denom = 1.0 + s2.sup_norm().powf(g.q1) + s1.sup_norm().powi(2);
            gr.see(inner / denom, || format!("|eta1(0)| = {:e}", norm(eta0)));
        }
    }

    let mut h3 = Tracker::new("H3", c.l3);
    let (mut xs, mut xt) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..n_points {
        let s = -model.tau() * rng.random::<f64>();
        let t = -model.tau() * rng.random::<f64>();
        if s == t {
            continue;
        }
        model.initial(s, &mut xs);
        model.initial(t, &mut xt);
        h3.see(norm(&diff(&xs, &xt)) / (s - t).abs().powf(c.theta), || format!("s = {s}, t = {t}"));
    }

    let mut checks = vec![a1.finish(), h1.finish(), a2.finish(), h2.finish(), h3.finish()];
    if let Some((inc, gr, _)) = growth {
        checks.push(inc.finish());
        checks.push(gr.finish());
    }
    AssumptionReport { n_points, checks }
}
