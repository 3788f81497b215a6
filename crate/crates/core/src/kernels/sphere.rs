use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Inclusion, Vec3};

/// Capacity of a sphere, `4 pi r`.
pub fn cap_sphere(radius: f64) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    Ok(4.0 * PI * radius)
}

/// Exterior fields of a single sphere at physical scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFields {
    center: Vec3,
    radius: f64,
}

impl SphereFields {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::NonPositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn capacity(&self) -> f64 {
        4.0 * PI * self.radius
    }

    /// `r / |x - O|`; equal to one on the sphere and exactly monopolar.
    pub fn capacitary_potential(&self, x: &Vec3) -> Result<f64> {
        let dist = (x - self.center).norm();
        if dist == 0.0 {
            return Err(Error::EvaluationAtCenter);
        }
        Ok(self.radius / dist)
    }

    /// Harmonic exterior extension of `x - O` off the sphere:
    /// `r^3 (x - O) / |x - O|^3`.
    pub fn dipole_field(&self, x: &Vec3) -> Result<Vec3> {
        let d = x - self.center;
        let dist = d.norm();
        // small slack so sampled boundary points are accepted
        if dist < self.radius * (1.0 - 1e-12) {
            return Err(Error::PointInsideInclusion {
                index: 0,
                point: [x.x, x.y, x.z],
            });
        }
        Ok(d * (self.radius.powi(3) / dist.powi(3)))
    }

    /// Far-field matrix of the dipole field: volume plus exterior Dirichlet
    /// energy. For a sphere this is `4 pi r^3 I`.
    pub fn dipole_matrix(&self) -> Matrix3<f64> {
        Matrix3::identity() * (4.0 * PI * self.radius.powi(3))
    }

    /// Dipole moment of the capacitary potential; zero for a sphere.
    pub fn dipole_coefficient_beta(&self) -> Vec3 {
        Vec3::zeros()
    }
}

impl From<&Inclusion> for SphereFields {
    fn from(inc: &Inclusion) -> Self {
        Self {
            center: inc.center,
            radius: inc.radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn capacities() {
        assert_relative_eq!(cap_sphere(0.0125).unwrap(), 0.157079632679, epsilon = 1e-12);
        assert_relative_eq!(cap_sphere(1.0).unwrap(), 4.0 * PI);
        assert_relative_eq!(cap_sphere(0.03).unwrap(), 0.376991118431, epsilon = 1e-12);
        assert_eq!(cap_sphere(0.0), Err(Error::NonPositiveRadius(0.0)));
        assert!(cap_sphere(-1.0).is_err());
    }

    #[test]
    fn capacitary_potential_values() {
        let s = SphereFields::new(Vec3::new(1.0, 2.0, 3.0), 0.01).unwrap();
        let on = s.center() + Vec3::new(0.0, 0.01, 0.0);
        assert_relative_eq!(
            s.capacitary_potential(&on).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        let far = s.center() + Vec3::new(0.0, 0.0, 1.0);
        assert_relative_eq!(s.capacitary_potential(&far).unwrap(), 0.01);
        // monopole far field is exact
        let x = s.center() + Vec3::new(3.0, -4.0, 12.0);
        assert_relative_eq!(
            s.capacitary_potential(&x).unwrap(),
            s.capacity() / (4.0 * PI * 13.0),
            max_relative = 1e-15
        );
        assert_eq!(
            s.capacitary_potential(&s.center()),
            Err(Error::EvaluationAtCenter)
        );
    }

    #[test]
    fn dipole_field_boundary_and_decay() {
        let s = SphereFields::new(Vec3::new(0.5, 0.0, -0.5), 0.2).unwrap();
        let dir = Vec3::new(1.0, -2.0, 2.0).normalize();
        let on = s.center() + dir * 0.2;
        assert_relative_eq!(s.dipole_field(&on).unwrap(), dir * 0.2, epsilon = 1e-15);
        let a = s.dipole_field(&(s.center() + dir * 10.0)).unwrap().norm();
        let b = s.dipole_field(&(s.center() + dir * 20.0)).unwrap().norm();
        assert_relative_eq!(a / b, 4.0, max_relative = 1e-12);
        // far field equals T xi / (4 pi |xi|^3)
        let x = s.center() + dir * 7.0;
        let t = s.dipole_matrix();
        let ff = t * (x - s.center()) / (4.0 * PI * 343.0);
        assert_relative_eq!(s.dipole_field(&x).unwrap(), ff, epsilon = 1e-15);
        assert!(s.dipole_field(&s.center()).is_err());
    }

    #[test]
    fn dipole_field_is_harmonic() {
        let s = SphereFields::new(Vec3::zeros(), 0.3).unwrap();
        let x = Vec3::new(0.4, 0.5, -0.2);
        let h = 1e-3;
        let mut lap = Vec3::zeros();
        for e in [Vec3::x(), Vec3::y(), Vec3::z()] {
            lap += s.dipole_field(&(x + h * e)).unwrap() + s.dipole_field(&(x - h * e)).unwrap()
                - 2.0 * s.dipole_field(&x).unwrap();
        }
        lap /= h * h;
        assert!(lap.norm() < 1e-4 * s.dipole_field(&x).unwrap().norm() / (x.norm_squared()));
    }

    #[test]
    fn dipole_matrix_from_energy_quadrature() {
        // volume + exterior energy of D_i = xi_i/|xi|^3 for the unit sphere,
        // integrated in spherical shells with an algebraic radial map
        let (t, w) = crate::kernels::gauss_legendre(64);
        let (ct, cw) = crate::kernels::gauss_legendre(32);
        let nphi = 64;
        let mut energy = Matrix3::zeros();
        for (s, ws) in t.iter().zip(&w) {
            // rho = 1/u, u in (0, 1]; d rho = du / u^2
            let u = 0.5 * (s + 1.0);
            let rho = 1.0 / u;
            let jac = 0.5 * ws / (u * u) * rho * rho;
            for (c, wc) in ct.iter().zip(&cw) {
                let sin = (1.0 - c * c).sqrt();
                for m in 0..nphi {
                    let phi = 2.0 * PI * (m as f64 + 0.5) / nphi as f64;
                    let n = Vec3::new(sin * phi.cos(), sin * phi.sin(), *c);
                    // grad D_i = (e_i - 3 n n_i) / rho^3
                    let g = (Matrix3::identity() - 3.0 * n * n.transpose()) / rho.powi(3);
                    energy += g * g.transpose() * (jac * wc * 2.0 * PI / nphi as f64);
                }
            }
        }
        let t_num = energy + Matrix3::identity() * (4.0 * PI / 3.0);
        let unit = SphereFields::new(Vec3::zeros(), 1.0)
            .unwrap()
            .dipole_matrix();
        assert!((t_num - unit).norm() < 1e-8 * unit.norm(), "{t_num}");
    }

    #[test]
    fn dipole_matrix_scaling_and_definiteness() {
        let a = SphereFields::new(Vec3::zeros(), 0.37)
            .unwrap()
            .dipole_matrix();
        let b = SphereFields::new(Vec3::zeros(), 0.74)
            .unwrap()
            .dipole_matrix();
        assert_relative_eq!(b, a * 8.0, max_relative = 1e-14);
        assert_eq!(a, a.transpose());
        let eig = a.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn beta_vanishes() {
        let s = SphereFields::new(Vec3::new(0.1, 0.2, 0.3), 0.05).unwrap();
        assert_eq!(s.dipole_coefficient_beta(), Vec3::zeros());
    }
}
