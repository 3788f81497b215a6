//! Eigenvalue approximations and the explicit eigenfunction sums.
//!
//! Remainder terms are never evaluated; results carry the order of the
//! theoretical remainder as a tag.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    assemble_higher, assemble_leading, attach_higher, compute_b_vectors, green_product_table,
    solve_higher, solve_leading, CoefficientSet, InteractionSystem,
};
use crate::error::{Error, Result};
use crate::geometry::{Cluster, ConstraintReport, Vec3};
use crate::kernels::{
    green_product_integral, BallKernel, NeumannKernel, QuadratureSpec, SphereFields,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorOrder {
    /// `O(eps^2 d^-6)`
    Leading,
    /// `O(eps^(5/2) d^(-15/2))`
    Higher,
}

impl ErrorOrder {
    pub fn describe(&self) -> &'static str {
        match self {
            ErrorOrder::Leading => "O(eps^2 d^-6)",
            ErrorOrder::Higher => "O(eps^(5/2) d^(-15/2))",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub lambda: f64,
    pub error_order: ErrorOrder,
    pub constraint: ConstraintReport,
}

/// `Lambda1 = -(1/|Omega|) sum C_j cap_j`.
pub fn lambda_leading(cluster: &Cluster, c: &[f64]) -> f64 {
    let caps = cluster.capacities();
    -c.iter().zip(&caps).map(|(c, cap)| c * cap).sum::<f64>() / cluster.domain().volume()
}

/// `Lambda2 = -(1/|Omega|) sum cap_j A_j - Lambda1 sum C_j cap_j Gamma_j`.
///
/// `Gamma_j` is the volume-averaged potential, so the second sum carries no
/// further `1/|Omega|`.
pub fn lambda_second<K: NeumannKernel>(
    cluster: &Cluster,
    kernel: &K,
    c: &[f64],
    a: &[f64],
    lambda1: f64,
) -> Result<f64> {
    let caps = cluster.capacities();
    let mut sum_a = 0.0;
    let mut sum_g = 0.0;
    for (j, inc) in cluster.inclusions().iter().enumerate() {
        sum_a += caps[j] * a[j];
        sum_g += c[j] * caps[j] * kernel.gamma(&inc.center)?;
    }
    Ok(-sum_a / cluster.domain().volume() - lambda1 * sum_g)
}

pub fn lambda_higher<K: NeumannKernel>(
    cluster: &Cluster,
    coeffs: &CoefficientSet,
    kernel: &K,
    c_threshold: f64,
) -> Result<SpectralResult> {
    let a = coeffs.a.as_ref().ok_or_else(|| Error::DimensionMismatch {
        expected: cluster.len(),
        got: 0,
    })?;
    let lambda1 = lambda_leading(cluster, &coeffs.c);
    let lambda2 = lambda_second(cluster, kernel, &coeffs.c, a, lambda1)?;
    Ok(SpectralResult {
        lambda1,
        lambda2: Some(lambda2),
        lambda: lambda1 + lambda2,
        error_order: ErrorOrder::Higher,
        constraint: cluster.check_constraint(c_threshold),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub c_threshold: f64,
    /// Enables the `A`, `B`, `Lambda2` pipeline with this quadrature.
    pub higher: Option<QuadratureSpec>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            c_threshold: 1.0,
            higher: None,
        }
    }
}

/// Everything computed for one cluster.
#[derive(Debug, Clone)]
pub struct Solution {
    pub cluster: Cluster,
    pub kernel: BallKernel,
    pub system: InteractionSystem,
    pub coefficients: CoefficientSet,
    pub spectral: SpectralResult,
    pub quadrature: Option<QuadratureSpec>,
}

/// Assemble, solve and evaluate the eigenvalue approximation.
pub fn solve(cluster: Cluster, kernel: BallKernel, options: &SolveOptions) -> Result<Solution> {
    if (cluster.domain().radius() - kernel.radius()).abs() > 0.0 {
        return Err(Error::DegenerateGeometry(
            "kernel and cluster use different domains".into(),
        ));
    }
    let system = assemble_leading(&cluster, &kernel)?;
    let (mut coefficients, factored) = solve_leading(&cluster, &system, options.c_threshold)?;
    let lambda1 = lambda_leading(&cluster, &coefficients.c);

    let spectral = match options.higher {
        None => SpectralResult {
            lambda1,
            lambda2: None,
            lambda: lambda1,
            error_order: ErrorOrder::Leading,
            constraint: cluster.check_constraint(options.c_threshold),
        },
        Some(quad) => {
            let products = green_product_table(&cluster, &kernel, &quad)?;
            let higher = assemble_higher(&cluster, &system, &coefficients.c, lambda1, &products)?;
            let (a, residual) = solve_higher(&factored, &higher)?;
            let b = compute_b_vectors(&cluster, &kernel, &coefficients.c)?;
            attach_higher(&mut coefficients, &cluster, a, residual, b);
            lambda_higher(&cluster, &coefficients, &kernel, options.c_threshold)?
        }
    };
    if spectral.lambda1 <= 0.0 && !cluster.is_empty() {
        warn!("Lambda1 = {:e} is not positive", spectral.lambda1);
    }
    Ok(Solution {
        cluster,
        kernel,
        system,
        coefficients,
        spectral,
        quadrature: options.higher,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    /// Inside (or on) inclusion `j`.
    Inclusion(usize),
    OutsideDomain,
}

impl Region {
    pub fn label(&self) -> String {
        match self {
            Region::Interior => "interior".into(),
            Region::Inclusion(j) => format!("inclusion_{j}"),
            Region::OutsideDomain => "outside_domain".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub point: [f64; 3],
    pub value: Option<f64>,
    pub region: Region,
}

/// Relative tolerance for points sampled on the outer boundary.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Tolerance for points sampled on an inclusion boundary.
const SURFACE_SLACK: f64 = 1e-12;

fn classify(cluster: &Cluster, x: &Vec3) -> Region {
    if !(x.norm() <= cluster.domain().radius() * (1.0 + BOUNDARY_SLACK)) {
        return Region::OutsideDomain;
    }
    match cluster
        .inclusions()
        .iter()
        .position(|inc| (x - inc.center).norm() < inc.radius * (1.0 - SURFACE_SLACK))
    {
        Some(j) => Region::Inclusion(j),
        None => Region::Interior,
    }
}

fn admissible(cluster: &Cluster, x: &Vec3) -> Result<()> {
    match classify(cluster, x) {
        Region::Interior => Ok(()),
        Region::OutsideDomain => Err(Error::PointOutsideDomain([x.x, x.y, x.z])),
        Region::Inclusion(index) => Err(Error::PointInsideInclusion {
            index,
            point: [x.x, x.y, x.z],
        }),
    }
}

/// `1 + sum C_j Gamma_j cap_j + sum C_j (P_j(x) - cap_j H(x, O_j))`.
pub fn eigenfield_leading<K: NeumannKernel>(
    cluster: &Cluster,
    kernel: &K,
    c: &[f64],
    x: &Vec3,
) -> Result<f64> {
    admissible(cluster, x)?;
    if c.len() != cluster.len() {
        return Err(Error::DimensionMismatch {
            expected: cluster.len(),
            got: c.len(),
        });
    }
    let mut u = 1.0;
    for (inc, cj) in cluster.inclusions().iter().zip(c) {
        let s = SphereFields::from(inc);
        let cap = s.capacity();
        u += cj
            * (cap * kernel.gamma(&inc.center)? + s.capacitary_potential(x)?
                - cap * kernel.regular_part(x, &inc.center)?);
    }
    Ok(u)
}

/// Higher-order explicit sum:
///
/// ```text
/// 1 + sum (C_j + A_j) {P_j - cap_j (H(x, O_j) - Gamma_j)} + sum B_j . D_j(x)
///   + Lambda1 sum C_j cap_j integral G(y, x) G(y, O_j) dy
/// ```
///
/// The dipole-coefficient group vanishes for spheres. The product integral
/// is skipped when `quadrature` is `None`.
pub fn eigenfield_higher<K: NeumannKernel>(
    cluster: &Cluster,
    kernel: &K,
    ball: &BallKernel,
    coeffs: &CoefficientSet,
    lambda1: f64,
    quadrature: Option<&QuadratureSpec>,
    x: &Vec3,
) -> Result<f64> {
    admissible(cluster, x)?;
    let n = cluster.len();
    let zeros = vec![0.0; n];
    let a = coeffs.a.as_deref().unwrap_or(&zeros);
    let b = coeffs.b_vectors().unwrap_or_else(|| vec![Vec3::zeros(); n]);
    if coeffs.c.len() != n || a.len() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: coeffs.c.len(),
        });
    }
    let mut u = 1.0;
    for (j, inc) in cluster.inclusions().iter().enumerate() {
        let s = SphereFields::from(inc);
        let cap = s.capacity();
        let mono = s.capacitary_potential(x)?
            - cap * (kernel.regular_part(x, &inc.center)? - kernel.gamma(&inc.center)?);
        u += (coeffs.c[j] + a[j]) * mono + b[j].dot(&s.dipole_field(x)?);
        if let Some(spec) = quadrature {
            let est = green_product_integral(ball, x, &inc.center, spec)?;
            u += lambda1 * coeffs.c[j] * cap * est.value;
        }
    }
    Ok(u)
}

/// Which explicit sum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldOrder {
    Leading,
    Higher,
}

impl Solution {
    /// Single-point evaluation. Points inside an inclusion or outside the
    /// domain are errors.
    pub fn field(&self, x: &Vec3, order: FieldOrder) -> Result<f64> {
        match order {
            FieldOrder::Leading => {
                eigenfield_leading(&self.cluster, &self.kernel, &self.coefficients.c, x)
            }
            FieldOrder::Higher => eigenfield_higher(
                &self.cluster,
                &self.kernel,
                &self.kernel,
                &self.coefficients,
                self.spectral.lambda1,
                self.quadrature.as_ref(),
                x,
            ),
        }
    }

    /// Tagged evaluation for grids: inadmissible points carry no value.
    pub fn sample(&self, x: &Vec3, order: FieldOrder) -> Result<FieldSample> {
        let region = classify(&self.cluster, x);
        let value = match region {
            Region::Interior => Some(self.field(x, order)?),
            _ => None,
        };
        Ok(FieldSample {
            point: [x.x, x.y, x.z],
            value,
            region,
        })
    }

    pub fn field_grid(&self, grid: &GridSpec, order: FieldOrder) -> Result<Vec<FieldSample>> {
        grid.points()?
            .par_iter()
            .map(|x| self.sample(x, order))
            .collect()
    }

    pub fn boundary_residuals(
        &self,
        samples_per_inclusion: usize,
        boundary_samples: usize,
    ) -> Result<BoundaryReport> {
        boundary_residuals(
            self,
            samples_per_inclusion,
            boundary_samples,
            FieldOrder::Leading,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Sampling grid. Plane extents are `[[lo, hi], [lo, hi]]` over the two
/// remaining axes in increasing order. Points are row-major: the first
/// in-plane axis (or x for boxes) varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridSpec {
    Plane {
        axis: Axis,
        offset: f64,
        nx: usize,
        ny: usize,
        extent: [[f64; 2]; 2],
    },
    Box {
        nx: usize,
        ny: usize,
        nz: usize,
        bounds: [[f64; 2]; 3],
    },
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<Vec3>> {
        match *self {
            GridSpec::Plane {
                axis,
                offset,
                nx,
                ny,
                extent,
            } => {
                if nx == 0 || ny == 0 {
                    return Err(Error::InvalidLattice(
                        "grid needs at least one point per side".into(),
                    ));
                }
                let fixed = axis.index();
                let free: Vec<usize> = (0..3).filter(|&i| i != fixed).collect();
                let mut pts = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let mut p = Vec3::zeros();
                        p[fixed] = offset;
                        p[free[0]] = linspace(extent[0][0], extent[0][1], nx, i);
                        p[free[1]] = linspace(extent[1][0], extent[1][1], ny, j);
                        pts.push(p);
                    }
                }
                Ok(pts)
            }
            GridSpec::Box { nx, ny, nz, bounds } => {
                if nx == 0 || ny == 0 || nz == 0 {
                    return Err(Error::InvalidLattice(
                        "grid needs at least one point per side".into(),
                    ));
                }
                let mut pts = Vec::with_capacity(nx * ny * nz);
                for k in 0..nz {
                    for j in 0..ny {
                        for i in 0..nx {
                            pts.push(Vec3::new(
                                linspace(bounds[0][0], bounds[0][1], nx, i),
                                linspace(bounds[1][0], bounds[1][1], ny, j),
                                linspace(bounds[2][0], bounds[2][1], nz, k),
                            ));
                        }
                    }
                }
                Ok(pts)
            }
        }
    }
}

/// Near-uniform points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// `max |u|` over sampled inclusion boundaries.
    pub max_inclusion: f64,
    pub max_inclusion_index: Option<usize>,
    /// `max |u| / (eps^2 (d^-3 + max_k sum_j |C_j| / |O_k - O_j|^2))`;
    /// `None` when the bound shape vanishes.
    pub inclusion_ratio: Option<f64>,
    /// `max |du/dn|` over sampled points of the outer boundary.
    pub max_neumann: f64,
    /// `max |du/dn| / max_x (eps^2 sum_j |C_j| / |x - O_j|^3)`.
    pub neumann_ratio: Option<f64>,
}

/// Boundary discrepancies of the explicit field: `|u|` on every inclusion
/// surface and `du/dn` on the outer sphere by a one-sided second-order
/// difference with step `1e-4 R`.
pub fn boundary_residuals(
    solution: &Solution,
    samples_per_inclusion: usize,
    boundary_samples: usize,
    order: FieldOrder,
) -> Result<BoundaryReport> {
    let cluster = &solution.cluster;
    let inc = cluster.inclusions();
    let c = &solution.coefficients.c;
    let dirs = fibonacci_sphere(samples_per_inclusion);

    let per_inclusion = (0..inc.len())
        .into_par_iter()
        .map(|k| {
            dirs.iter()
                .map(|n| {
                    solution
                        .field(&(inc[k].center + n * inc[k].radius), order)
                        .map(f64::abs)
                })
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (max_inclusion_index, max_inclusion) =
        per_inclusion
            .iter()
            .copied()
            .enumerate()
            .fold(
                (None, 0.0),
                |(bi, bv), (i, v)| if v > bv { (Some(i), v) } else { (bi, bv) },
            );

    let eps = cluster.eps();
    let d = cluster.d_norm();
    let cross = (0..inc.len())
        .map(|k| {
            (0..inc.len())
                .filter(|&j| j != k)
                .map(|j| c[j].abs() / (inc[k].center - inc[j].center).norm_squared())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let shape = eps * eps * (if d.is_finite() { d.powi(-3) } else { 0.0 } + cross);
    let inclusion_ratio = (shape > 0.0).then(|| max_inclusion / shape);

    let radius = cluster.domain().radius();
    let h = 1e-4 * radius;
    let outer = fibonacci_sphere(boundary_samples);
    let neumann = outer
        .par_iter()
        .map(|n| {
            let u = |t: f64| solution.field(&(n * (radius - t)), order);
            let du = (3.0 * u(0.0)? - 4.0 * u(h)? + u(2.0 * h)?) / (2.0 * h);
            let x = n * radius;
            let shape: f64 = inc
                .iter()
                .zip(c)
                .map(|(i, cj)| eps * eps * cj.abs() / (x - i.center).norm().powi(3))
                .sum();
            Ok((du.abs(), shape))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let max_neumann = neumann.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_shape = neumann.iter().map(|p| p.1).fold(0.0, f64::max);

    Ok(BoundaryReport {
        max_inclusion,
        max_inclusion_index,
        inclusion_ratio,
        max_neumann,
        neumann_ratio: (max_shape > 0.0).then(|| max_neumann / max_shape),
    })
}

/// The same coefficients with `A` and `B` cleared, for comparisons.
pub fn leading_only(coeffs: &CoefficientSet) -> CoefficientSet {
    CoefficientSet {
        c: coeffs.c.clone(),
        a: None,
        b: None,
        diagnostics: coeffs.diagnostics.clone(),
    }
}

/// Symmetric table of product integrals, exposed for callers that evaluate
/// many higher-order quantities on one cluster.
pub fn product_table(solution: &Solution, quadrature: &QuadratureSpec) -> Result<DMatrix<f64>> {
    green_product_table(&solution.cluster, &solution.kernel, quadrature)
}
