//! Volume integral of the product of two Neumann kernels over the ball.
//!
//! The integrand has integrable `1/|y - a|` and `1/|y - b|` singularities.
//! Two independent routes are provided:
//!
//! * `Mc`: Monte Carlo with a balanced mixture of two "radial" densities,
//!   one about each singular point. A radial density draws a uniform
//!   direction and a uniform distance along the ray to the boundary, so it
//!   behaves like `1/|y - c|^2` near its center and the weighted integrand
//!   stays bounded.
//! * `Product`: the integrand is split with a partition of unity
//!   `|y - b| / (|y - a| + |y - b|)` and each piece is integrated in
//!   spherical coordinates about its own singular point (Gauss-Legendre in
//!   the radius and the polar cosine, trapezoid in azimuth).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BallKernel, NeumannKernel};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    #[default]
    Mc,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    /// Monte Carlo sample count.
    pub samples: usize,
    /// Nodes per angular dimension (and per radial panel) for `Product`.
    pub nodes: usize,
    pub seed: u64,
    /// Target relative error; estimates above it are rejected.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadratureMethod::Mc,
            samples: 1 << 22,
            nodes: 48,
            seed: 0,
            tolerance: 1e-3,
        }
    }
}

impl QuadratureSpec {
    pub fn product(nodes: usize) -> Self {
        Self {
            method: QuadratureMethod::Product,
            nodes,
            ..Self::default()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: QuadratureMethod::Mc,
            samples,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        match self.method {
            QuadratureMethod::Mc if self.samples < 2 => Err(Error::InvalidQuadrature(
                "at least two samples are required".into(),
            )),
            QuadratureMethod::Product if self.nodes < 4 => Err(Error::InvalidQuadrature(
                "at least four nodes are required".into(),
            )),
            _ if !(self.tolerance > 0.0) => Err(Error::InvalidQuadrature(
                "tolerance must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Integral estimate with an absolute error bar: one standard error for
/// Monte Carlo, the difference to a half-resolution rule for `Product`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl QuadratureEstimate {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.error / self.value).abs()
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `integral over the ball of G(y, a) G(y, b) dy`.
///
/// Fails with `QuadratureNotConverged` when the relative error estimate
/// exceeds `spec.tolerance`.
pub fn green_product_integral(
    kernel: &BallKernel,
    a: &Vec3,
    b: &Vec3,
    spec: &QuadratureSpec,
) -> Result<QuadratureEstimate> {
    spec.validate()?;
    for p in [a, b] {
        if !kernel.contains(p) {
            return Err(Error::PointOutsideDomain([p.x, p.y, p.z]));
        }
    }
    let est = match spec.method {
        QuadratureMethod::Mc => mc_product(kernel, a, b, spec.samples, spec.seed),
        QuadratureMethod::Product => {
            let fine = product_rule(kernel, a, b, spec.nodes);
            let coarse = product_rule(kernel, a, b, (spec.nodes / 2).max(4));
            QuadratureEstimate {
                value: fine.value,
                error: (fine.value - coarse.value).abs(),
                evaluations: fine.evaluations + coarse.evaluations,
            }
        }
    };
    let rel = est.relative_error();
    if rel > spec.tolerance {
        return Err(Error::QuadratureNotConverged {
            achieved: rel,
            target: spec.tolerance,
        });
    }
    Ok(est)
}

/// Distance from `c` to the sphere `|y| = radius` along unit direction `w`.
pub(crate) fn ray_exit(c: &Vec3, w: &Vec3, radius: f64) -> f64 {
    let cw = c.dot(w);
    (-cw + (cw * cw + radius * radius - c.norm_squared())
        .max(0.0)
        .sqrt())
    .max(0.0)
}

/// Density of the radial sampler about `c`, evaluated at `y`.
pub(crate) fn radial_density(c: &Vec3, y: &Vec3, radius: f64) -> f64 {
    let d = y - c;
    let rho = d.norm();
    if rho == 0.0 {
        return f64::INFINITY;
    }
    let w = d / rho;
    1.0 / (4.0 * PI * rho * rho * ray_exit(c, &w, radius))
}

pub(crate) fn uniform_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Draw from the radial density about `c`.
pub(crate) fn radial_sample(rng: &mut ChaCha8Rng, c: &Vec3, radius: f64) -> Vec3 {
    let w = uniform_direction(rng);
    let t: f64 = rng.random();
    c + w * (t * ray_exit(c, &w, radius))
}

pub(crate) const CHUNK: usize = 1 << 16;

/// Deterministic parallel Monte Carlo driver: chunk `i` uses stream `i` of
/// a generator seeded with `seed`, and chunk sums are combined in order.
pub(crate) fn mc_sum<F>(samples: usize, seed: u64, f: F) -> (f64, f64)
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    partial
        .into_iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

pub(crate) fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// `G(y, a) G(y, b)`. A pole on the sphere can meet a node at rounding
/// distance, where the image distance underflows to zero; such a point has
/// no weight and is dropped.
fn green_product_value(kernel: &BallKernel, y: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let v = kernel.neumann_raw(y, a) * kernel.neumann_raw(y, b);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

pub(crate) fn mc_product(
    kernel: &BallKernel,
    a: &Vec3,
    b: &Vec3,
    samples: usize,
    seed: u64,
) -> QuadratureEstimate {
    let radius = kernel.radius();
    let (s, s2) = mc_sum(samples, seed, |rng| {
        let center = if rng.random::<bool>() { a } else { b };
        let y = radial_sample(rng, center, radius);
        let p = 0.5 * (radial_density(a, &y, radius) + radial_density(b, &y, radius));
        if !p.is_finite() {
            return 0.0;
        }
        green_product_value(kernel, &y, a, b) / p
    });
    let (value, error) = mean_and_stderr(s, s2, samples);
    QuadratureEstimate {
        value,
        error,
        evaluations: samples,
    }
}

fn product_rule(kernel: &BallKernel, a: &Vec3, b: &Vec3, n: usize) -> QuadratureEstimate {
    let coincident = (a - b).norm() < 1e-12 * kernel.radius();
    if coincident {
        let (v, e) = centered_rule(kernel, a, None, n, |y| green_product_value(kernel, y, a, a));
        return QuadratureEstimate {
            value: v,
            error: 0.0,
            evaluations: e,
        };
    }
    let integrand = |y: &Vec3| green_product_value(kernel, y, a, b);
    let (va, ea) = centered_rule(kernel, a, Some(b), n, |y| {
        let (da, db) = ((y - a).norm(), (y - b).norm());
        db / (da + db) * integrand(y)
    });
    let (vb, eb) = centered_rule(kernel, b, Some(a), n, |y| {
        let (da, db) = ((y - a).norm(), (y - b).norm());
        da / (da + db) * integrand(y)
    });
    QuadratureEstimate {
        value: va + vb,
        error: 0.0,
        evaluations: ea + eb,
    }
}

/// Ratio between consecutive graded radial panels.
const GRADING: f64 = 4.0;

/// Spherical-coordinate rule about `c` over the ball. The polar axis points
/// at `other` when given, and the radial integral is split where each ray
/// passes closest to it.
fn centered_rule<F>(
    kernel: &BallKernel,
    c: &Vec3,
    other: Option<&Vec3>,
    n: usize,
    f: F,
) -> (f64, usize)
where
    F: Fn(&Vec3) -> f64 + Sync,
{
    let radius = kernel.radius();
    let axis = other.map(|o| (o - c).normalize()).unwrap_or_else(Vec3::z);
    let helper = if axis.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = axis.cross(&helper).normalize();
    let e2 = axis.cross(&e1);

    let (t, w) = gauss_legendre(n);
    let nphi = 2 * n;
    let radial_panel = |lo: f64, hi: f64, dir: &Vec3| -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        t.iter()
            .zip(&w)
            .map(|(s, ws)| {
                let rho = mid + half * s;
                ws * half * rho * rho * f(&(c + dir * rho))
            })
            .sum()
    };

    // per-node terms are collected and summed in order so the result does not
    // depend on how rayon splits the work
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cos = t[i];
            let sin = (1.0 - cos * cos).sqrt();
            let mut acc = 0.0;
            for m in 0..nphi {
                let phi = 2.0 * PI * m as f64 / nphi as f64;
                let dir = axis * cos + (e1 * phi.cos() + e2 * phi.sin()) * sin;
                let exit = ray_exit(c, &dir, radius);
                let inner = match other {
                    Some(o) => {
                        let along = (o - c).dot(&dir);
                        let split = along.clamp(0.0, exit);
                        // panels graded geometrically away from the point of
                        // closest approach resolve the near-singular peak
                        let gap = (o - c - dir * along).norm().max(1e-12 * radius);
                        let mut breaks = vec![0.0, split, exit];
                        let mut step = gap;
                        while step < exit {
                            breaks.push(split - step);
                            breaks.push(split + step);
                            step *= GRADING;
                        }
                        breaks.retain(|b| (0.0..=exit).contains(b));
                        breaks.sort_by(f64::total_cmp);
                        breaks.dedup();
                        breaks
                            .windows(2)
                            .map(|p| radial_panel(p[0], p[1], &dir))
                            .sum()
                    }
                    None => radial_panel(0.0, exit, &dir),
                };
                acc += inner;
            }
            w[i] * acc * (2.0 * PI / nphi as f64)
        })
        .collect();
    let total = terms.iter().sum();
    let evals = n * nphi * n * if other.is_some() { 2 } else { 1 };
    (total, evals)
}
