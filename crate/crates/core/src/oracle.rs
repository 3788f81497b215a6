//! Independent reference values: the concentric-annulus eigenvalue, the
//! dilute-limit formulas and Monte Carlo volume integrals over the ball.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cluster, Vec3};
use crate::kernels::quadrature::{
    mc_product, mc_sum, mean_and_stderr, radial_density, radial_sample,
};
use crate::kernels::{BallKernel, NeumannKernel, QuadratureEstimate, SphereFields};

/// Concentric spheres: Dirichlet on `|x| = a`, Neumann on `|x| = big_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusProblem {
    pub a: f64,
    pub big_r: f64,
}

impl AnnulusProblem {
    pub fn new(a: f64, big_r: f64) -> Result<Self> {
        if !(a > 0.0 && a < big_r && big_r.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "need 0 < a < R, got a = {a}, R = {big_r}"
            )));
        }
        Ok(Self { a, big_r })
    }
}

/// Guard keeping `tan(kL)` finite at the top of the bracket.
const BRACKET_GUARD: f64 = 1e-9;

/// First eigenvalue `k^2` of the annulus. Radial eigenfunctions are
/// `sin(k(rho - a)) / rho`; the Neumann condition at `R` reduces to
/// `tan(kL) = kR` with `L = R - a`, solved by bisection on `kL` in
/// `(0, pi/2)`.
pub fn annulus_first_eigenvalue(problem: &AnnulusProblem, tol: f64) -> Result<f64> {
    let AnnulusProblem { a, big_r } = *problem;
    let len = big_r - a;
    // f(s) = tan(s) - s R / L with s = kL; f < 0 near 0 since R/L > 1
    let f = |s: f64| s.tan() - s * big_r / len;
    let mut lo = 0.0;
    let mut hi = FRAC_PI_2 - BRACKET_GUARD;
    if !(f(hi) > 0.0) {
        return Err(Error::RootNotBracketed(format!(
            "tan(kL) - kR does not change sign on (0, pi/2) for a = {a}, R = {big_r}"
        )));
    }
    // smallest positive root; f is negative on (0, root)
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let k = s / len;
    let scaled = (s.tan() - k * big_r).abs() / (k * big_r);
    if !(scaled < tol) {
        return Err(Error::RootNotBracketed(format!(
            "bisection residual {scaled:e} above {tol:e}"
        )));
    }
    Ok(k * k)
}

/// Least-squares slope of `ln e` against `ln a`.
pub fn loglog_slope(a: &[f64], e: &[f64]) -> f64 {
    let n = a.len() as f64;
    let xs: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `(1/|Omega|) sum cap_j`.
pub fn dilute_lambda(cluster: &Cluster) -> f64 {
    cluster.capacities().iter().sum::<f64>() / cluster.domain().volume()
}

/// `1 - sum Gamma_j cap_j - sum (P_j(x) - cap_j H(x, O_j))`.
pub fn dilute_field<K: NeumannKernel>(cluster: &Cluster, kernel: &K, x: &Vec3) -> Result<f64> {
    if !kernel.contains(x) {
        return Err(Error::PointOutsideDomain([x.x, x.y, x.z]));
    }
    if let Some(index) = cluster
        .inclusions()
        .iter()
        .position(|i| (x - i.center).norm() < i.radius)
    {
        return Err(Error::PointInsideInclusion {
            index,
            point: [x.x, x.y, x.z],
        });
    }
    let mut u = 1.0;
    for inc in cluster.inclusions() {
        let s = SphereFields::from(inc);
        let cap = s.capacity();
        u -= kernel.gamma(&inc.center)? * cap;
        u -= s.capacitary_potential(x)? - cap * kernel.regular_part(x, &inc.center)?;
    }
    Ok(u)
}

/// Integrands for [`mc_volume_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    One,
    /// `1 / (4 pi |z - center|)`
    InversePotential {
        center: Vec3,
    },
    /// Component `axis` of `-(z - center) / (4 pi |z - center|^3)`, whose
    /// integral is the volume gradient `gamma`.
    PotentialGradient {
        center: Vec3,
        axis: usize,
    },
    /// `G(y, a) G(y, b)`
    GreenProduct {
        a: Vec3,
        b: Vec3,
    },
}

/// Monte Carlo estimate over the ball with one standard error. Singular
/// integrands are drawn from a radial density about their pole; `One` uses
/// the radial density about the origin.
pub fn mc_volume_integral(
    kernel: &BallKernel,
    integrand: Integrand,
    seed: u64,
    samples: usize,
) -> Result<QuadratureEstimate> {
    if samples < 2 {
        return Err(Error::InvalidQuadrature(
            "at least two samples are required".into(),
        ));
    }
    let radius = kernel.radius();
    let centered = |center: Vec3, g: &(dyn Fn(&Vec3) -> f64 + Sync)| {
        let (s, s2) = mc_sum(samples, seed, |rng| {
            let y = radial_sample(rng, &center, radius);
            let p = radial_density(&center, &y, radius);
            if p.is_finite() {
                g(&y) / p
            } else {
                0.0
            }
        });
        mean_and_stderr(s, s2, samples)
    };
    let inside = |p: &Vec3| {
        if p.norm() < radius {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain([p.x, p.y, p.z]))
        }
    };
    let (value, error) = match integrand {
        Integrand::One => centered(Vec3::zeros(), &|_| 1.0),
        Integrand::InversePotential { center } => {
            inside(&center)?;
            centered(center, &|y| {
                1.0 / (4.0 * std::f64::consts::PI * (y - center).norm())
            })
        }
        Integrand::PotentialGradient { center, axis } => {
            inside(&center)?;
            if axis > 2 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    got: axis,
                });
            }
            centered(center, &|y| {
                let d = y - center;
                -d[axis] / (4.0 * std::f64::consts::PI * d.norm().powi(3))
            })
        }
        Integrand::GreenProduct { a, b } => {
            inside(&a)?;
            inside(&b)?;
            let est = mc_product(kernel, &a, &b, samples, seed);
            (est.value, est.error)
        }
    };
    Ok(QuadratureEstimate {
        value,
        error,
        evaluations: samples,
    })
}
