//! Geometries from the numerical examples: the three eight-to-ten sphere
//! clouds, the 1728-sphere lattice and the 64-sphere cube cloud.

use crate::error::Result;
use crate::geometry::{generate_cubic_lattice, Cluster, Domain, Inclusion, RadiusSpec, Vec3};

pub const DOMAIN_RADIUS: f64 = 7.0;

/// Radii `r_ijk` in lattice order (`i` fastest, `k` slowest).
pub const CORNER_RADII: [f64; 8] = [0.0125, 0.01, 0.0075, 0.0125, 0.015, 0.02, 0.03, 0.01725];

/// Published leading-order eigenvalues for the three rows.
pub const TABLE1_LAMBDA: [f64; 3] = [0.96588e-3, 1.08686e-3, 1.17062e-3];

fn corners() -> Result<Vec<Inclusion>> {
    generate_cubic_lattice(
        2,
        1.0,
        Vec3::new(-0.5, -0.5, -0.5),
        &RadiusSpec::List(CORNER_RADII.to_vec()),
    )
}

/// Row 1: the eight corners. Row 2 adds a sphere of radius 0.02 at
/// `(-0.25, 0, 0)`. Row 3 also adds one of radius 0.015 at `(0.25, 0, 0)`.
pub fn table1(row: usize) -> Result<Cluster> {
    let mut inc = corners()?;
    if row >= 2 {
        inc.push(Inclusion::new(Vec3::new(-0.25, 0.0, 0.0), 0.02)?);
    }
    if row >= 3 {
        inc.push(Inclusion::new(Vec3::new(0.25, 0.0, 0.0), 0.015)?);
    }
    Cluster::build(inc, Domain::ball(DOMAIN_RADIUS)?)
}

/// `12^3` identical spheres with spacing `1/6`, radius `1.7369e-6 R`.
pub fn lattice_1728() -> Result<Cluster> {
    let cell = 1.0 / 6.0;
    let inc = generate_cubic_lattice(
        12,
        cell,
        Vec3::new(cell / 2.0, cell / 2.0, cell / 2.0),
        &RadiusSpec::Constant(1.7369e-6 * DOMAIN_RADIUS),
    )?;
    Cluster::build(inc, Domain::ball(DOMAIN_RADIUS)?)
}

/// `4^3` spheres of radius `radius` at cell centers of `(0, 2)^3`.
pub fn cube_cloud_64(radius: f64) -> Result<Cluster> {
    let inc = generate_cubic_lattice(
        4,
        0.5,
        Vec3::new(0.25, 0.25, 0.25),
        &RadiusSpec::Constant(radius),
    )?;
    Cluster::build(inc, Domain::ball(DOMAIN_RADIUS)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_radii_follow_the_index_map() {
        let c = table1(1).unwrap();
        let at = |x: f64, y: f64, z: f64| {
            c.inclusions()
                .iter()
                .find(|i| (i.center - Vec3::new(x, y, z)).norm() < 1e-12)
                .unwrap()
                .radius
        };
        assert_eq!(at(-0.5, -0.5, -0.5), 0.0125);
        assert_eq!(at(-0.5, -0.5, 0.5), 0.015);
        assert_eq!(at(-0.5, 0.5, -0.5), 0.0075);
        assert_eq!(at(0.5, -0.5, -0.5), 0.01);
        assert_eq!(at(0.5, -0.5, 0.5), 0.02);
        assert_eq!(at(0.5, 0.5, -0.5), 0.0125);
        assert_eq!(at(-0.5, 0.5, 0.5), 0.03);
        assert_eq!(at(0.5, 0.5, 0.5), 0.01725);
        assert_eq!(table1(2).unwrap().len(), 9);
        assert_eq!(table1(3).unwrap().len(), 10);
    }

    #[test]
    fn lattice_parameters() {
        let c = lattice_1728().unwrap();
        assert_eq!(c.len(), 1728);
        assert!((c.eps() - 1.7369e-6).abs() < 1e-15);
        assert!((c.d_norm() - 0.0238).abs() < 1e-4);
        let cube = cube_cloud_64(0.01).unwrap();
        assert_eq!(cube.len(), 64);
    }
}
