//! Model-problem fields: the Neumann function of the outer domain, volume
//! potentials, and the exterior fields of a single sphere.

mod ball;
pub(crate) mod quadrature;
mod sphere;

pub use ball::{BallKernel, Normalization};
pub use quadrature::{
    gauss_legendre, green_product_integral, QuadratureEstimate, QuadratureMethod, QuadratureSpec,
};
pub use sphere::{cap_sphere, SphereFields};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Neumann kernel of an outer domain.
///
/// `neumann(x, y) = 1/(4 pi |x - y|) - regular_part(x, y)`, with
/// `Laplace_x G + delta - 1/|Omega| = 0` and zero normal derivative on the
/// boundary. Only the ball backend ships.
pub trait NeumannKernel: Sync {
    fn volume(&self) -> f64;

    /// Closed-domain membership; evaluators reject points failing this.
    fn contains(&self, x: &Vec3) -> bool;

    fn regular_part(&self, x: &Vec3, y: &Vec3) -> Result<f64>;

    /// Gradient of the regular part in its first argument.
    fn regular_part_grad_x(&self, x: &Vec3, y: &Vec3) -> Result<Vec3>;

    /// Mean of `1/(4 pi |z - y|)` over the domain.
    fn gamma(&self, y: &Vec3) -> Result<f64>;

    /// `-integral over Omega of grad_z (1/(4 pi |x - z|)) at z = y, dx`.
    fn gamma_gradient(&self, y: &Vec3) -> Result<Vec3>;

    fn neumann(&self, x: &Vec3, y: &Vec3) -> Result<f64> {
        let r = (x - y).norm();
        if r == 0.0 {
            return Err(Error::CoincidentPoints([x.x, x.y, x.z]));
        }
        Ok(1.0 / (4.0 * PI * r) - self.regular_part(x, y)?)
    }

    fn neumann_grad_x(&self, x: &Vec3, y: &Vec3) -> Result<Vec3> {
        let d = x - y;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::CoincidentPoints([x.x, x.y, x.z]));
        }
        Ok(-d / (4.0 * PI * r.powi(3)) - self.regular_part_grad_x(x, y)?)
    }
}
