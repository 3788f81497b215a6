//! Interaction systems for the coefficients `C_j` (leading order) and `A_j`
//! (higher order), and the dipole weights `B^(k)`.
//!
//! Both systems share one matrix:
//!
//! ```text
//! M_kk = 1 - cap_k (H(O_k, O_k) - Gamma_k)
//! M_kj = cap_j (G(O_k, O_j) + Gamma_j)        j != k
//! ```
//!
//! with right-hand side `-1` for `C` and `-v_k` for `A`.

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cluster, Vec3};
use crate::kernels::{green_product_integral, BallKernel, NeumannKernel, QuadratureSpec};

/// Smallest acceptable `|U_kk| / max |M_ij|` in the LU factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Largest acceptable `||M x - b||_inf / ||b||_inf` after refinement.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Dense system `matrix * x = rhs`. Row and column `k` belong to inclusion
/// `index_map[k]` of the cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub index_map: Vec<usize>,
}

impl InteractionSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// CSV dump: a `# index_map` comment line, then one row per equation with
    /// the matrix entries followed by the right-hand side.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let map: Vec<String> = self.index_map.iter().map(ToString::to_string).collect();
        writeln!(out, "# index_map {}", map.join(" "))?;
        for k in 0..self.len() {
            let mut row: Vec<String> = self
                .matrix
                .row(k)
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect();
            row.push(format!("{:.16e}", self.rhs[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Leading-order system with `rhs = -1`.
pub fn assemble_leading<K: NeumannKernel>(
    cluster: &Cluster,
    kernel: &K,
) -> Result<InteractionSystem> {
    let n = cluster.len();
    let inc = cluster.inclusions();
    let caps = cluster.capacities();
    let gammas = inc
        .iter()
        .map(|i| kernel.gamma(&i.center))
        .collect::<Result<Vec<_>>>()?;

    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            let ok = inc[k].center;
            (0..n)
                .map(|j| {
                    if j == k {
                        Ok(1.0 - caps[k] * (kernel.regular_part(&ok, &ok)? - gammas[k]))
                    } else {
                        Ok(caps[j] * (kernel.neumann(&ok, &inc[j].center)? + gammas[j]))
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let matrix = DMatrix::from_fn(n, n, |k, j| rows[k][j]);
    Ok(InteractionSystem {
        matrix,
        rhs: DVector::from_element(n, -1.0),
        index_map: (0..n).collect(),
    })
}

/// LU factorization of an interaction matrix, kept for reuse between the
/// leading and higher-order solves.
#[derive(Debug, Clone)]
pub struct FactoredSystem {
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    pivot_ratio: f64,
}

impl FactoredSystem {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = matrix.amax();
        let lu = matrix.clone().lu();
        let pivot_ratio = if matrix.is_empty() {
            1.0
        } else {
            let min_pivot = lu
                .u()
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            min_pivot / scale
        };
        if !(pivot_ratio >= PIVOT_TOLERANCE) {
            return Err(Error::SingularSystem(pivot_ratio));
        }
        Ok(Self {
            matrix: matrix.clone(),
            lu,
            pivot_ratio,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    /// Solve with one step of iterative refinement. Returns the solution and
    /// its relative residual `||M x - b||_inf / ||b||_inf` (absolute when
    /// `b = 0`).
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        if rhs.len() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                got: rhs.len(),
            });
        }
        if rhs.is_empty() {
            return Ok((DVector::zeros(0), 0.0));
        }
        let singular = || Error::SingularSystem(self.pivot_ratio);
        let mut x = self.lu.solve(rhs).ok_or_else(singular)?;
        let r = rhs - &self.matrix * &x;
        x += self.lu.solve(&r).ok_or_else(singular)?;

        let res = (rhs - &self.matrix * &x).amax();
        let norm = rhs.amax();
        let rel = if norm > 0.0 { res / norm } else { res };
        if !(rel < RESIDUAL_TOLERANCE) {
            return Err(Error::ResidualTooLarge(rel));
        }
        Ok((x, rel))
    }
}

/// Solver diagnostics and bound-shape ratios. The ratios divide a sum by the
/// shape of its theoretical bound, whose constant is unknown, so they are
/// reported and never gated on. They are `None` when `d` is infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub residual: f64,
    pub pivot_ratio: f64,
    pub sum_c2: f64,
    /// `sum C_j^2 * d^3`
    pub sum_c2_ratio: Option<f64>,
    pub higher_residual: Option<f64>,
    pub sum_a2: Option<f64>,
    /// `sum A_j^2 * d^12 / eps^4`
    pub sum_a2_ratio: Option<f64>,
    pub sum_b2: Option<f64>,
    /// `sum |B_j|^2 * d^9 / eps^2`
    pub sum_b2_ratio: Option<f64>,
    pub constraint_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    pub c: Vec<f64>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<[f64; 3]>>,
    pub diagnostics: Diagnostics,
}

impl CoefficientSet {
    pub fn b_vectors(&self) -> Option<Vec<Vec3>> {
        self.b
            .as_ref()
            .map(|b| b.iter().map(|v| Vec3::new(v[0], v[1], v[2])).collect())
    }
}

fn finite_ratio(d: f64, f: impl FnOnce(f64) -> f64) -> Option<f64> {
    d.is_finite().then(|| f(d))
}

/// Factor and solve the leading system. Emits a warning (never an error)
/// when the cluster violates `eps < c d^3`.
pub fn solve_leading(
    cluster: &Cluster,
    system: &InteractionSystem,
    c_threshold: f64,
) -> Result<(CoefficientSet, FactoredSystem)> {
    let report = cluster.check_constraint(c_threshold);
    if !report.satisfied {
        warn!(
            "mesoscale constraint violated: eps/d^3 = {:.4e} >= c = {}",
            report.ratio, c_threshold
        );
    }
    let factored = FactoredSystem::new(&system.matrix)?;
    let (c, residual) = factored.solve(&system.rhs)?;
    let c: Vec<f64> = c.iter().copied().collect();
    let sum_c2 = c.iter().map(|v| v * v).sum::<f64>();
    let diagnostics = Diagnostics {
        residual,
        pivot_ratio: factored.pivot_ratio(),
        sum_c2,
        sum_c2_ratio: finite_ratio(cluster.d_norm(), |d| sum_c2 * d.powi(3)),
        higher_residual: None,
        sum_a2: None,
        sum_a2_ratio: None,
        sum_b2: None,
        sum_b2_ratio: None,
        constraint_satisfied: report.satisfied,
    };
    Ok((
        CoefficientSet {
            c,
            a: None,
            b: None,
            diagnostics,
        },
        factored,
    ))
}

/// `B^(k) = C_k cap_k grad_x H(O_k, O_k) - sum_{j != k} C_j cap_j grad_x G(O_k, O_j)`.
pub fn compute_b_vectors<K: NeumannKernel>(
    cluster: &Cluster,
    kernel: &K,
    c: &[f64],
) -> Result<Vec<Vec3>> {
    let n = cluster.len();
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let inc = cluster.inclusions();
    let caps = cluster.capacities();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let ok = inc[k].center;
            let mut b = c[k] * caps[k] * kernel.regular_part_grad_x(&ok, &ok)?;
            for j in (0..n).filter(|&j| j != k) {
                b -= c[j] * caps[j] * kernel.neumann_grad_x(&ok, &inc[j].center)?;
            }
            Ok(b)
        })
        .collect()
}

/// Deterministic per-pair seed for Monte Carlo product integrals.
fn pair_seed(base: u64, k: usize, j: usize) -> u64 {
    let (lo, hi) = if k <= j { (k, j) } else { (j, k) };
    base ^ (((hi as u64) << 32 | lo as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Symmetric table of `integral G(y, O_k) G(y, O_j) dy` over all pairs.
pub fn green_product_table(
    cluster: &Cluster,
    kernel: &BallKernel,
    quadrature: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    let n = cluster.len();
    let inc = cluster.inclusions();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| (k..n).map(move |j| (k, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(k, j)| {
            let spec = QuadratureSpec {
                seed: pair_seed(quadrature.seed, k, j),
                ..*quadrature
            };
            green_product_integral(kernel, &inc[k].center, &inc[j].center, &spec).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut table = DMatrix::zeros(n, n);
    for (&(k, j), v) in pairs.iter().zip(values) {
        table[(k, j)] = v;
        table[(j, k)] = v;
    }
    Ok(table)
}

/// Higher-order system: the leading matrix with `rhs_k = -v_k`, where for
/// spheres `v_k = Lambda1 sum_j C_j cap_j integral G(y, O_k) G(y, O_j) dy`.
/// The dipole-coefficient terms vanish identically for spheres.
pub fn assemble_higher(
    cluster: &Cluster,
    leading: &InteractionSystem,
    c: &[f64],
    lambda1: f64,
    products: &DMatrix<f64>,
) -> Result<InteractionSystem> {
    let n = cluster.len();
    if c.len() != n || leading.len() != n || products.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len().min(leading.len()).min(products.nrows()),
        });
    }
    let weights = DVector::from_iterator(
        n,
        cluster.capacities().iter().zip(c).map(|(cap, c)| cap * c),
    );
    let v = products * weights * lambda1;
    Ok(InteractionSystem {
        matrix: leading.matrix.clone(),
        rhs: -v,
        index_map: leading.index_map.clone(),
    })
}

/// Solve the higher-order system with the leading factorization.
pub fn solve_higher(
    factored: &FactoredSystem,
    system: &InteractionSystem,
) -> Result<(Vec<f64>, f64)> {
    if factored.matrix() != &system.matrix {
        return Err(Error::DimensionMismatch {
            expected: factored.matrix().nrows(),
            got: system.matrix.nrows(),
        });
    }
    let (a, residual) = factored.solve(&system.rhs)?;
    Ok((a.iter().copied().collect(), residual))
}

/// Fill in the higher-order entries of a leading coefficient set.
pub fn attach_higher(
    coeffs: &mut CoefficientSet,
    cluster: &Cluster,
    a: Vec<f64>,
    a_residual: f64,
    b: Vec<Vec3>,
) {
    let (eps, d) = (cluster.eps(), cluster.d_norm());
    let sum_a2 = a.iter().map(|v| v * v).sum::<f64>();
    let sum_b2 = b.iter().map(|v| v.norm_squared()).sum::<f64>();
    let diag = &mut coeffs.diagnostics;
    diag.higher_residual = Some(a_residual);
    diag.sum_a2 = Some(sum_a2);
    diag.sum_b2 = Some(sum_b2);
    if eps > 0.0 {
        diag.sum_a2_ratio = finite_ratio(d, |d| sum_a2 * d.powi(12) / eps.powi(4));
        diag.sum_b2_ratio = finite_ratio(d, |d| sum_b2 * d.powi(9) / eps.powi(2));
    }
    coeffs.a = Some(a);
    coeffs.b = Some(b.iter().map(|v| [v.x, v.y, v.z]).collect());
}
