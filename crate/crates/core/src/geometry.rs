//! Ball domain, spherical inclusions and the separation parameters of a cloud.
//!
//! Two separation conventions are carried side by side: `d_half` is half the
//! minimum center distance (a length), `d_norm` is the minimum center distance
//! divided by the domain radius. Constraint checks use `d_norm`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Ball of radius `radius` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    radius: f64,
}

impl Domain {
    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidDomain(radius));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn volume(&self) -> f64 {
        4.0 * PI * self.radius.powi(3) / 3.0
    }

    /// Strict interior test.
    pub fn contains(&self, x: &Vec3) -> bool {
        x.norm() < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: Vec3,
    pub radius: f64,
}

impl Inclusion {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::NonPositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn capacity(&self) -> f64 {
        4.0 * PI * self.radius
    }
}

/// A validated cloud of non-overlapping spheres inside a ball.
///
/// `eps` and the separations are always derived from the inclusions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    domain: Domain,
    inclusions: Vec<Inclusion>,
    eps: f64,
    d_norm: f64,
    d_half: f64,
    boundary_gap: f64,
}

impl Cluster {
    /// Validates the inclusions and derives `eps`, `d_norm` and `d_half`.
    ///
    /// With fewer than two inclusions there are no pairs and both separations
    /// are `f64::INFINITY`. An empty list gives the unperturbed ball.
    pub fn build(inclusions: Vec<Inclusion>, domain: Domain) -> Result<Self> {
        let radius = domain.radius();
        let mut boundary_gap = f64::INFINITY;
        for (index, inc) in inclusions.iter().enumerate() {
            if !(inc.radius.is_finite() && inc.radius > 0.0) {
                return Err(Error::NonPositiveRadius(inc.radius));
            }
            let reach = inc.center.norm() + inc.radius;
            if !(reach < radius) {
                return Err(Error::InclusionOutsideDomain {
                    index,
                    reach,
                    domain_radius: radius,
                });
            }
            boundary_gap = boundary_gap.min(radius - reach);
        }

        let min_dist = sweep_min_distance(&inclusions)?;
        let max_r = inclusions.iter().map(|i| i.radius).fold(0.0, f64::max);

        Ok(Self {
            domain,
            eps: max_r / radius,
            d_norm: min_dist / radius,
            d_half: 0.5 * min_dist,
            boundary_gap,
            inclusions,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn inclusions(&self) -> &[Inclusion] {
        &self.inclusions
    }

    pub fn len(&self) -> usize {
        self.inclusions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inclusions.is_empty()
    }

    /// Largest inclusion radius over the domain radius.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Minimum center distance over the domain radius.
    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    /// Half the minimum center distance.
    pub fn d_half(&self) -> f64 {
        self.d_half
    }

    /// Distance from the cloud to the outer boundary. Reported only.
    pub fn boundary_gap(&self) -> f64 {
        self.boundary_gap
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.inclusions.iter().map(Inclusion::capacity).collect()
    }

    pub fn check_constraint(&self, c_threshold: f64) -> ConstraintReport {
        ConstraintReport::from_params(self.eps, self.d_norm, c_threshold)
    }

    /// Index of the inclusion whose closed ball contains `x`, if any.
    pub fn inclusion_containing(&self, x: &Vec3) -> Option<usize> {
        self.inclusions
            .iter()
            .position(|inc| (x - inc.center).norm() <= inc.radius)
    }
}

/// Minimum center distance via a sort-and-sweep along x, with an overlap
/// check on every pair the sweep visits.
fn sweep_min_distance(inclusions: &[Inclusion]) -> Result<f64> {
    let n = inclusions.len();
    if n < 2 {
        return Ok(f64::INFINITY);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| inclusions[a].center.x.total_cmp(&inclusions[b].center.x));
    let max_r = inclusions.iter().map(|i| i.radius).fold(0.0, f64::max);

    let mut best = f64::INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let ci = inclusions[i].center;
        for &j in &order[pos + 1..] {
            let cj = inclusions[j].center;
            if cj.x - ci.x > best.max(2.0 * max_r) {
                break;
            }
            let dist = (cj - ci).norm();
            let touch = inclusions[i].radius + inclusions[j].radius;
            if dist <= touch {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                return Err(Error::OverlappingInclusions(a, b, dist, touch));
            }
            best = best.min(dist);
        }
    }
    Ok(best)
}

/// Diagnostic for the mesoscale constraint `eps < c d^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub eps: f64,
    pub d: f64,
    pub c_threshold: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

impl ConstraintReport {
    pub fn from_params(eps: f64, d: f64, c_threshold: f64) -> Self {
        let ratio = if eps == 0.0 || d.is_infinite() {
            0.0
        } else {
            eps / d.powi(3)
        };
        Self {
            eps,
            d,
            c_threshold,
            ratio,
            satisfied: ratio < c_threshold,
        }
    }
}

/// Radii assignment for generated lattices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSpec {
    Constant(f64),
    List(Vec<f64>),
}

/// `n^3` inclusions at `origin + cell * (i, j, k)`, `0 <= i, j, k < n`.
///
/// Sites are ordered plane by plane: `k` (the x3 index) is slowest and `i`
/// fastest, so a radius list is consumed in that order.
pub fn generate_cubic_lattice(
    n_per_side: usize,
    cell: f64,
    origin: Vec3,
    radius_spec: &RadiusSpec,
) -> Result<Vec<Inclusion>> {
    if n_per_side == 0 {
        return Err(Error::InvalidLattice(
            "n_per_side must be at least 1".into(),
        ));
    }
    if !(cell.is_finite() && cell > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "cell must be positive, got {cell}"
        )));
    }
    let total = n_per_side.pow(3);
    if let RadiusSpec::List(list) = radius_spec {
        if list.len() != total {
            return Err(Error::RadiusListLengthMismatch {
                expected: total,
                got: list.len(),
            });
        }
    }

    let mut out = Vec::with_capacity(total);
    for k in 0..n_per_side {
        for j in 0..n_per_side {
            for i in 0..n_per_side {
                let idx = out.len();
                let center = origin + cell * Vec3::new(i as f64, j as f64, k as f64);
                let radius = match radius_spec {
                    RadiusSpec::Constant(r) => *r,
                    RadiusSpec::List(list) => list[idx],
                };
                out.push(Inclusion::new(center, radius)?);
            }
        }
    }
    Ok(out)
}

/// Identical spheres on the cubic lattice `cell * Z^3` restricted to the open
/// ball of radius `cloud_radius` about the origin.
pub fn generate_ball_lattice(cell: f64, cloud_radius: f64, radius: f64) -> Result<Vec<Inclusion>> {
    if !(cell.is_finite() && cell > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "cell must be positive, got {cell}"
        )));
    }
    if !(cloud_radius.is_finite() && cloud_radius > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "cloud radius must be positive, got {cloud_radius}"
        )));
    }
    let m = (cloud_radius / cell).ceil() as i64;
    let mut out = Vec::new();
    for k in -m..=m {
        for j in -m..=m {
            for i in -m..=m {
                let p = cell * Vec3::new(i as f64, j as f64, k as f64);
                if p.norm() < cloud_radius {
                    out.push(Inclusion::new(p, radius)?);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_min(incs: &[Inclusion]) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..incs.len() {
            for b in a + 1..incs.len() {
                best = best.min((incs[a].center - incs[b].center).norm());
            }
        }
        best
    }

    #[test]
    fn single_inclusion_has_infinite_separation() {
        let dom = Domain::ball(7.0).unwrap();
        let c = Cluster::build(vec![Inclusion::new(Vec3::zeros(), 0.01).unwrap()], dom).unwrap();
        assert_relative_eq!(c.eps(), 0.01 / 7.0);
        assert!(c.d_norm().is_infinite());
        assert!(c.d_half().is_infinite());
        assert!(c.check_constraint(1.0).satisfied);
    }

    #[test]
    fn pair_separations() {
        let dom = Domain::ball(7.0).unwrap();
        let incs = vec![
            Inclusion::new(Vec3::new(-0.25, 0.0, 0.0), 0.02).unwrap(),
            Inclusion::new(Vec3::new(0.25, 0.0, 0.0), 0.015).unwrap(),
        ];
        let c = Cluster::build(incs, dom).unwrap();
        assert_relative_eq!(c.d_half(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(c.d_norm(), 0.5 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(c.eps(), 0.02 / 7.0);
    }

    #[test]
    fn overlap_is_rejected_with_indices() {
        let dom = Domain::ball(7.0).unwrap();
        let incs = vec![
            Inclusion::new(Vec3::zeros(), 0.1).unwrap(),
            Inclusion::new(Vec3::new(0.05, 0.0, 0.0), 0.1).unwrap(),
        ];
        match Cluster::build(incs, dom) {
            Err(Error::OverlappingInclusions(0, 1, _, _)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let dom = Domain::ball(1.0).unwrap();
        let incs = vec![Inclusion::new(Vec3::new(0.95, 0.0, 0.0), 0.05).unwrap()];
        assert!(matches!(
            Cluster::build(incs, dom),
            Err(Error::InclusionOutsideDomain { index: 0, .. })
        ));
    }

    #[test]
    fn constraint_examples() {
        let r = ConstraintReport::from_params(1.7369e-6, 0.0238, 1.0);
        assert_relative_eq!(r.ratio, 1.7369e-6 / 0.0238f64.powi(3));
        assert!((r.ratio - 0.1288).abs() < 1e-4);
        assert!(r.satisfied);
        let r = ConstraintReport::from_params(0.0, 0.3, 1.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.satisfied);
        let r = ConstraintReport::from_params(1e-3, 0.01, 1.0);
        assert_relative_eq!(r.ratio, 1000.0, max_relative = 1e-12);
        assert!(!r.satisfied);
    }

    #[test]
    fn lattice_counts_and_spacing() {
        let incs = generate_cubic_lattice(4, 0.5, Vec3::repeat(0.25), &RadiusSpec::Constant(0.01))
            .unwrap();
        assert_eq!(incs.len(), 64);
        assert_relative_eq!(brute_min(&incs), 0.5, epsilon = 1e-14);
        let one =
            generate_cubic_lattice(1, 1.0, Vec3::zeros(), &RadiusSpec::Constant(0.1)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].center, Vec3::zeros());
    }

    #[test]
    fn lattice_radius_list_length_is_checked() {
        let err = generate_cubic_lattice(2, 1.0, Vec3::zeros(), &RadiusSpec::List(vec![0.1; 7]));
        assert_eq!(
            err,
            Err(Error::RadiusListLengthMismatch {
                expected: 8,
                got: 7
            })
        );
    }

    #[test]
    fn ball_lattice_is_inside_cloud() {
        let incs = generate_ball_lattice(0.25, 1.0, 0.001).unwrap();
        assert!(incs.iter().all(|i| i.center.norm() < 1.0));
        assert!(incs.len() > 200);
        assert_relative_eq!(brute_min(&incs), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn sweep_matches_brute_force_on_random_clouds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dom = Domain::ball(10.0).unwrap();
        for n in [2usize, 3, 10, 57, 100] {
            let incs: Vec<_> = (0..n)
                .map(|_| {
                    let c = Vec3::new(
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                    );
                    Inclusion::new(c, 1e-4).unwrap()
                })
                .collect();
            let cl = Cluster::build(incs.clone(), dom).unwrap();
            assert_eq!(cl.d_half(), 0.5 * brute_min(&incs));
        }
    }
}
