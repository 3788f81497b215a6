//! Effective-medium limit for a lattice of identical spheres filling a ball
//! `omega` of radius `r` inside the domain ball of radius `R`.
//!
//! The homogenized field solves
//!
//! ```text
//! Laplace u = mu (chi_omega u - 1) in Omega,   du/dn = 0 on |x| = R,
//! ```
//!
//! with value and flux continuous across `|x| = r`. The radial closed form
//! below is `mu * w`, where `w` is the classical unit-source profile with
//! `Laplace w = mu chi_omega w - 1`; the factor `mu` is what makes
//! `(1/|Omega|) integral over omega of u = 1` hold.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cluster, Vec3};
use crate::kernels::{BallKernel, NeumannKernel};
use crate::spectral::fibonacci_sphere;

/// `mu = cap / cell^3`.
pub fn effective_mu(cap: f64, cell: f64) -> Result<f64> {
    if !(cap > 0.0 && cell > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "capacity and cell must be positive, got {cap} and {cell}"
        )));
    }
    Ok(cap / cell.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogenizedBallSolution {
    pub big_r: f64,
    pub r: f64,
    pub mu: f64,
    /// Amplitude of `sinh(sqrt(mu) rho) / rho` in the unit-source profile.
    inner_amp: f64,
    /// Constant of the outer unit-source profile.
    outer_const: f64,
}

impl HomogenizedBallSolution {
    pub fn new(big_r: f64, r: f64, mu: f64) -> Result<Self> {
        if !(r > 0.0 && r < big_r && big_r.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "need 0 < r < R, got r = {r}, R = {big_r}"
            )));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "mu must be positive, got {mu}"
            )));
        }
        let s = mu.sqrt();
        let (ch, sh) = ((s * r).cosh(), (s * r).sinh());
        let den = s * r * ch - sh;
        let inner_amp = (big_r.powi(3) - r.powi(3)) / (3.0 * den);
        let outer_const = (((r.powi(3) + 2.0 * big_r.powi(3)) * mu + 6.0 * r) * s * ch
            - (3.0 * r * r * mu + 6.0) * sh)
            / (6.0 * mu * den);
        Ok(Self {
            big_r,
            r,
            mu,
            inner_amp,
            outer_const,
        })
    }

    pub fn volume(&self) -> f64 {
        4.0 * PI * self.big_r.powi(3) / 3.0
    }

    /// Profile `w(rho)` solving `Laplace w = mu chi_omega w - 1`.
    pub fn unit_source_value(&self, rho: f64) -> f64 {
        let s = self.mu.sqrt();
        if rho <= self.r {
            // sinh(s rho)/rho has the limit s at the origin
            let shape = if s * rho < 1e-6 {
                s * (1.0 + (s * rho).powi(2) / 6.0)
            } else {
                (s * rho).sinh() / rho
            };
            self.inner_amp * shape + 1.0 / self.mu
        } else {
            -rho * rho / 6.0 - self.big_r.powi(3) / (3.0 * rho) + self.outer_const
        }
    }

    fn unit_source_derivative(&self, rho: f64) -> f64 {
        let s = self.mu.sqrt();
        if rho <= self.r {
            if s * rho < 1e-6 {
                self.inner_amp * s.powi(3) * rho / 3.0
            } else {
                self.inner_amp * (s * rho * (s * rho).cosh() - (s * rho).sinh()) / (rho * rho)
            }
        } else {
            -rho / 3.0 + self.big_r.powi(3) / (3.0 * rho * rho)
        }
    }

    /// Homogenized field as a function of `|x|`.
    pub fn value(&self, rho: f64) -> f64 {
        self.mu * self.unit_source_value(rho)
    }

    pub fn radial_derivative(&self, rho: f64) -> f64 {
        self.mu * self.unit_source_derivative(rho)
    }

    pub fn value_at(&self, x: &Vec3) -> f64 {
        self.value(x.norm())
    }

    /// One-sided limits at `|x| = r`: `(inner, outer)` values and slopes.
    pub fn interface_limits(&self) -> ((f64, f64), (f64, f64)) {
        let s = self.mu.sqrt();
        let r = self.r;
        let inner = self.mu * (self.inner_amp * (s * r).sinh() / r + 1.0 / self.mu);
        let inner_d =
            self.mu * self.inner_amp * (s * r * (s * r).cosh() - (s * r).sinh()) / (r * r);
        let outer = self.mu * (-r * r / 6.0 - self.big_r.powi(3) / (3.0 * r) + self.outer_const);
        let outer_d = self.mu * (-r / 3.0 + self.big_r.powi(3) / (3.0 * r * r));
        ((inner, outer), (inner_d, outer_d))
    }

    /// Radial profile on `n` evenly spaced radii in `[0, R]`.
    pub fn profile(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let rho = if n == 1 {
                    0.0
                } else {
                    self.big_r * i as f64 / (n - 1) as f64
                };
                (rho, self.value(rho))
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `(1/|Omega|) integral over omega of u`, which should equal one.
pub fn normalization(sol: &HomogenizedBallSolution) -> f64 {
    let f = |rho: f64| 4.0 * PI * rho * rho * sol.value(rho);
    let scale = 4.0 * PI * sol.r.powi(3) / 3.0 * sol.value(0.0).abs().max(sol.value(sol.r).abs());
    adaptive_simpson(&f, 0.0, sol.r, 1e-10 * scale) / sol.volume()
}

/// Scale `K` such that `v = -u / K` solves the continuum limit of the
/// leading-order system,
///
/// ```text
/// 1 + v(x) + mu integral over omega of (G(x, y) + Gamma(y)) v(y) dy = 0.
/// ```
///
/// `u` and `mu G u` differ by a constant because both have Laplacian
/// `mu chi_omega u - mu` up to sign, so the equation reduces to `1 + m K = 0`
/// for `v = m u` with
/// `K = mean_Omega u + mu |Omega| mean_Omega G + mu integral over omega of Gamma u`.
pub fn lattice_limit_scale(sol: &HomogenizedBallSolution, kernel: &BallKernel) -> Result<f64> {
    let big_r = kernel.radius();
    if (big_r - sol.big_r).abs() > 1e-12 * big_r {
        return Err(Error::DegenerateGeometry(format!(
            "kernel radius {big_r} differs from the solution's {}",
            sol.big_r
        )));
    }
    let scale = sol.value(0.0).abs().max(sol.value(big_r).abs());
    let shell = |rho: f64| 4.0 * PI * rho * rho;
    let mass = adaptive_simpson(
        &|rho| shell(rho) * sol.value(rho),
        0.0,
        sol.r,
        1e-12 * scale,
    ) + adaptive_simpson(
        &|rho| shell(rho) * sol.value(rho),
        sol.r,
        big_r,
        1e-12 * scale * big_r.powi(3),
    );
    // omega lies inside the kernel's ball, so gamma cannot fail here
    let gamma_u = adaptive_simpson(
        &|rho| {
            let g = kernel.gamma(&Vec3::new(rho, 0.0, 0.0)).unwrap_or(f64::NAN);
            shell(rho) * g * sol.value(rho)
        },
        0.0,
        sol.r,
        1e-12 * scale,
    );
    let mean_g = 7.0 / (10.0 * PI * big_r) - kernel.shift();
    let volume = sol.volume();
    Ok(mass / volume + sol.mu * volume * mean_g + sol.mu * gamma_u)
}

/// Finite-difference stencil for the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Seven-point, `O(h^2)`.
    Second,
    /// Thirteen-point, `O(h^4)`.
    Fourth,
}

fn laplacian(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, h: f64, stencil: Stencil) -> f64 {
    let u0 = f(x);
    [Vec3::x(), Vec3::y(), Vec3::z()]
        .iter()
        .map(|e| match stencil {
            Stencil::Second => (f(&(x + e * h)) + f(&(x - e * h)) - 2.0 * u0) / (h * h),
            Stencil::Fourth => {
                (-f(&(x + e * (2.0 * h))) + 16.0 * f(&(x + e * h)) - 30.0 * u0
                    + 16.0 * f(&(x - e * h))
                    - f(&(x - e * (2.0 * h))))
                    / (12.0 * h * h)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogenizedResiduals {
    /// `max |Laplace u - mu (u - 1)|` at sampled points of `omega`.
    pub inner_pde: f64,
    /// `max |Laplace u + mu|` at sampled points of `Omega \ omega`.
    pub outer_pde: f64,
    /// `|du/dn|` at `|x| = R` by a one-sided second-order difference.
    pub neumann: f64,
    /// `|u_inner(r) - u_outer(r)| / |u(r)|`
    pub value_jump: f64,
    /// `|u_inner'(r) - u_outer'(r)| / |u'(r)|`
    pub flux_jump: f64,
    pub normalization: f64,
}

/// Finite-difference checks of the transmission problem. `n_samples` points
/// are placed in each region, clear of the interface by three steps.
pub fn homogenized_residuals(
    sol: &HomogenizedBallSolution,
    n_samples: usize,
    step: f64,
    stencil: Stencil,
) -> HomogenizedResiduals {
    let f = |x: &Vec3| sol.value_at(x);
    let dirs = fibonacci_sphere(n_samples.max(1));
    let clear = 3.0 * step;
    let mut inner_pde: f64 = 0.0;
    let mut outer_pde: f64 = 0.0;
    for (i, n) in dirs.iter().enumerate() {
        let t = (i as f64 + 0.5) / dirs.len() as f64;
        let xi = n * ((sol.r - clear) * t);
        inner_pde = inner_pde
            .max((laplacian(&f, &xi, step, stencil) - sol.mu * (sol.value_at(&xi) - 1.0)).abs());
        let xo = n * (sol.r + clear + (sol.big_r - sol.r - 2.0 * clear) * t);
        outer_pde = outer_pde.max((laplacian(&f, &xo, step, stencil) + sol.mu).abs());
    }

    let h = 1e-4 * sol.big_r;
    let big_r = sol.big_r;
    let neumann = dirs
        .iter()
        .map(|n| {
            let u = |t: f64| f(&(n * (big_r - t)));
            ((3.0 * u(0.0) - 4.0 * u(h) + u(2.0 * h)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max);

    let ((vi, vo), (di, do_)) = sol.interface_limits();
    HomogenizedResiduals {
        inner_pde,
        outer_pde,
        neumann,
        value_jump: (vi - vo).abs() / vi.abs(),
        flux_jump: (di - do_).abs() / di.abs(),
        normalization: normalization(sol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub rms: f64,
}

impl MismatchStats {
    fn from_values(v: &[f64]) -> Self {
        let n = v.len().max(1) as f64;
        Self {
            max_abs: v.iter().map(|x| x.abs()).fold(0.0, f64::max),
            mean_abs: v.iter().map(|x| x.abs()).sum::<f64>() / n,
            rms: (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeComparison {
    pub n: usize,
    pub cell: f64,
    pub sphere_radius: f64,
    /// `cap / cell^3` of the lattice itself.
    pub lattice_mu: f64,
    pub solution_mu: f64,
    pub lambda1: f64,
    /// `Lambda1 / mu` of the solution.
    pub lambda_ratio: f64,
    /// Statistics of `C_j - u(O_j)`.
    pub minus: MismatchStats,
    /// Statistics of `C_j + u(O_j)`.
    pub plus: MismatchStats,
    /// `K` from [`lattice_limit_scale`].
    pub limit_scale: f64,
    /// Statistics of `C_j + u(O_j) / K`.
    pub limit: MismatchStats,
}

/// Lattice spacing of an identical-sphere cubic lattice, or an error.
pub fn lattice_cell(cluster: &Cluster) -> Result<f64> {
    let inc = cluster.inclusions();
    let first = inc
        .first()
        .ok_or_else(|| Error::GeometryNotLattice("no inclusions".into()))?;
    if inc
        .iter()
        .any(|i| (i.radius - first.radius).abs() > 1e-12 * first.radius)
    {
        return Err(Error::GeometryNotLattice("radii differ".into()));
    }
    if inc.len() == 1 {
        return Err(Error::GeometryNotLattice(
            "a single inclusion has no spacing".into(),
        ));
    }
    let cell = 2.0 * cluster.d_half();
    for (index, i) in inc.iter().enumerate() {
        let off = (i.center - first.center) / cell;
        if off.iter().any(|v| (v - v.round()).abs() > 1e-6) {
            return Err(Error::GeometryNotLattice(format!(
                "inclusion {index} is off the lattice"
            )));
        }
    }
    Ok(cell)
}

/// Compare `C_j` with the homogenized field at the centers under both sign
/// conventions and with the rescaled continuum limit, and `Lambda1` with `mu`.
pub fn compare_lattice_to_homogenized(
    kernel: &BallKernel,
    cluster: &Cluster,
    c: &[f64],
    lambda1: f64,
    sol: &HomogenizedBallSolution,
) -> Result<LatticeComparison> {
    if c.len() != cluster.len() {
        return Err(Error::DimensionMismatch {
            expected: cluster.len(),
            got: c.len(),
        });
    }
    let cell = lattice_cell(cluster)?;
    let radius = cluster.inclusions()[0].radius;
    let u: Vec<f64> = cluster
        .inclusions()
        .iter()
        .map(|i| sol.value_at(&i.center))
        .collect();
    let minus: Vec<f64> = c.iter().zip(&u).map(|(c, u)| c - u).collect();
    let plus: Vec<f64> = c.iter().zip(&u).map(|(c, u)| c + u).collect();
    let k = lattice_limit_scale(sol, kernel)?;
    let limit: Vec<f64> = c.iter().zip(&u).map(|(c, u)| c + u / k).collect();
    Ok(LatticeComparison {
        n: cluster.len(),
        cell,
        sphere_radius: radius,
        lattice_mu: effective_mu(4.0 * PI * radius, cell)?,
        solution_mu: sol.mu,
        lambda1,
        lambda_ratio: lambda1 / sol.mu,
        minus: MismatchStats::from_values(&minus),
        plus: MismatchStats::from_values(&plus),
        limit_scale: k,
        limit: MismatchStats::from_values(&limit),
    })
}
