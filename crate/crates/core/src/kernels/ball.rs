use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::NeumannKernel;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Vec3};

/// Additive constant convention for the ball Neumann function.
///
/// `ClosedForm` is the image-plus-logarithm expression as is. It has mean
/// `7/(10 pi R)` over the ball in either argument. `ZeroMean` subtracts that
/// constant so that `integral of G(x, y) dx = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    ClosedForm,
    ZeroMean,
}

/// Neumann kernel and volume potentials of the ball `|x| < R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallKernel {
    domain: Domain,
    normalization: Normalization,
}

impl BallKernel {
    pub fn new(domain: Domain) -> Self {
        Self::with_normalization(domain, Normalization::ClosedForm)
    }

    pub fn with_normalization(domain: Domain, normalization: Normalization) -> Self {
        Self {
            domain,
            normalization,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn radius(&self) -> f64 {
        self.domain.radius()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `|y|` below which the regular part switches to its small-`y` expansion.
    pub fn origin_threshold(&self) -> f64 {
        1e-8 * self.radius()
    }

    /// Constant added to the closed-form regular part.
    pub fn shift(&self) -> f64 {
        match self.normalization {
            Normalization::ClosedForm => 0.0,
            Normalization::ZeroMean => 7.0 / (10.0 * PI * self.radius()),
        }
    }

    fn check(&self, x: &Vec3) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain([x.x, x.y, x.z]))
        }
    }

    /// Regular part without the domain check. The expression stays analytic
    /// slightly outside the ball, which finite-difference checks rely on.
    pub fn regular_part_raw(&self, x: &Vec3, y: &Vec3) -> f64 {
        let r = self.radius();
        let r3 = r * r * r;
        let ny = y.norm();
        let xy = x.dot(y);
        let quad = -(x.norm_squared() + y.norm_squared()) / (8.0 * PI * r3);
        let value = if ny < self.origin_threshold() {
            // |y| |x - ybar| = R^2 - x.y + O(|y|^2)
            quad - 1.0 / (4.0 * PI * r) - xy / (2.0 * PI * r3)
        } else {
            let t = image_distance(x, y, ny, r);
            let denom = log_argument(x, y, xy, t, r);
            quad - r / (4.0 * PI * t) - (2.0 * r * r / denom).ln() / (4.0 * PI * r)
        };
        value + self.shift()
    }

    pub fn regular_part_grad_x_raw(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        let r = self.radius();
        let r3 = r * r * r;
        let ny = y.norm();
        let quad = -x / (4.0 * PI * r3);
        if ny < self.origin_threshold() {
            return quad - y / (2.0 * PI * r3);
        }
        let t = image_distance(x, y, ny, r);
        // t = | |y| x - R^2 y/|y| |
        let grad_t = (ny * ny * x - r * r * y) / t;
        let denom = log_argument(x, y, x.dot(y), t, r);
        quad + grad_t * (r / (4.0 * PI * t * t)) + (grad_t - y) / (4.0 * PI * r * denom)
    }

    pub fn neumann_raw(&self, x: &Vec3, y: &Vec3) -> f64 {
        1.0 / (4.0 * PI * (x - y).norm()) - self.regular_part_raw(x, y)
    }
}

/// `R^2 - x.y + t`. Since `t >= |R^2 - x.y|` the sum cancels when `x.y > R^2`,
/// where the equivalent `|x cross y|^2 / (t - (R^2 - x.y))` is used instead.
fn log_argument(x: &Vec3, y: &Vec3, xy: f64, t: f64, r: f64) -> f64 {
    let a = r * r - xy;
    if a >= 0.0 {
        a + t
    } else {
        x.cross(y).norm_squared() / (t - a)
    }
}

/// `|y| |x - R^2 y / |y|^2|`, written without the division by `|y|^2`.
fn image_distance(x: &Vec3, y: &Vec3, ny: f64, r: f64) -> f64 {
    (ny * x - (r * r / ny) * y).norm()
}

impl NeumannKernel for BallKernel {
    fn volume(&self) -> f64 {
        self.domain.volume()
    }

    /// Closed ball, with a relative slack of `1e-12` for sampled boundary
    /// points.
    fn contains(&self, x: &Vec3) -> bool {
        x.norm() <= self.radius() * (1.0 + 1e-12)
    }

    fn regular_part(&self, x: &Vec3, y: &Vec3) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.regular_part_raw(x, y))
    }

    fn regular_part_grad_x(&self, x: &Vec3, y: &Vec3) -> Result<Vec3> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.regular_part_grad_x_raw(x, y))
    }

    fn gamma(&self, y: &Vec3) -> Result<f64> {
        self.check(y)?;
        let r = self.radius();
        Ok(3.0 / (8.0 * PI * r) - y.norm_squared() / (8.0 * PI * r.powi(3)))
    }

    fn gamma_gradient(&self, y: &Vec3) -> Result<Vec3> {
        self.check(y)?;
        Ok(y / 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(r: f64) -> BallKernel {
        BallKernel::new(Domain::ball(r).unwrap())
    }

    fn random_interior(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        loop {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if p.norm() < 0.98 {
                return p * r;
            }
        }
    }

    #[test]
    fn regular_part_at_origin() {
        let k = kernel(7.0);
        let h = k.regular_part(&Vec3::zeros(), &Vec3::zeros()).unwrap();
        assert_relative_eq!(h, -1.0 / (28.0 * PI), max_relative = 1e-14);
        assert!((h + 0.0113682).abs() < 1e-7);
    }

    #[test]
    fn origin_branch_matches_richardson_limit() {
        // closed form at |y| = s and s/2, extrapolated to s -> 0
        let k = kernel(7.0);
        let x = Vec3::new(0.3, -1.2, 2.0);
        let dir = Vec3::new(1.0, 2.0, -0.5).normalize();
        let s = 1e-3;
        let f1 = k.regular_part_raw(&x, &(dir * s));
        let f2 = k.regular_part_raw(&x, &(dir * (s / 2.0)));
        // first-order error in s is absorbed by the branch, so compare the
        // linear extrapolation to the branch value at the same direction
        let limit = 2.0 * f2 - f1;
        let branch = k.regular_part_raw(&x, &Vec3::zeros());
        assert!((limit - branch).abs() < 1e-9, "{limit} vs {branch}");
        // continuity across the switch point
        let eps = k.origin_threshold();
        let a = k.regular_part_raw(&x, &(dir * eps * 0.999));
        let b = k.regular_part_raw(&x, &(dir * eps * 1.001));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn symmetry_over_random_pairs() {
        let k = kernel(7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = random_interior(&mut rng, 7.0);
            let y = random_interior(&mut rng, 7.0);
            let g1 = k.neumann(&x, &y).unwrap();
            let g2 = k.neumann(&y, &x).unwrap();
            assert!((g1 - g2).abs() < 1e-12 * g1.abs());
        }
    }

    #[test]
    fn singularity_strength() {
        let k = kernel(7.0);
        let y = Vec3::new(1.0, 0.5, -0.25);
        let x = y + Vec3::new(1e-7, 0.0, 0.0);
        let g = k.neumann(&x, &y).unwrap();
        assert_relative_eq!(g * 4.0 * PI * 1e-7, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for norm in [Normalization::ClosedForm, Normalization::ZeroMean] {
            let k = BallKernel::with_normalization(Domain::ball(7.0).unwrap(), norm);
            for _ in 0..50 {
                let x = random_interior(&mut rng, 6.0);
                let y = random_interior(&mut rng, 6.0);
                let g = k.regular_part_grad_x_raw(&x, &y);
                let h = 1e-5;
                for (axis, e) in [Vec3::x(), Vec3::y(), Vec3::z()].into_iter().enumerate() {
                    let fd = (k.regular_part_raw(&(x + h * e), &y)
                        - k.regular_part_raw(&(x - h * e), &y))
                        / (2.0 * h);
                    assert!((fd - g[axis]).abs() < 1e-9, "{fd} vs {}", g[axis]);
                }
            }
            let x = Vec3::new(0.5, 0.2, -1.0);
            let g = k.regular_part_grad_x_raw(&x, &Vec3::zeros());
            assert!((g + x / (4.0 * PI * 343.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_mean_shift_is_the_mean_of_closed_form() {
        // radial quadrature of G(., 0) over the ball
        let r = 3.0;
        let k = kernel(r);
        let (nodes, weights) = crate::kernels::gauss_legendre(40);
        let mut acc = 0.0;
        for (t, w) in nodes.iter().zip(&weights) {
            let rho = 0.5 * r * (t + 1.0);
            let g = k
                .neumann(&Vec3::new(rho, 0.0, 0.0), &Vec3::zeros())
                .unwrap();
            acc += 0.5 * r * w * 4.0 * PI * rho * rho * g;
        }
        assert_relative_eq!(
            acc / k.volume(),
            7.0 / (10.0 * PI * r),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gamma_closed_forms() {
        let k = kernel(7.0);
        assert_relative_eq!(k.gamma(&Vec3::zeros()).unwrap(), 3.0 / (56.0 * PI));
        assert!((k.gamma(&Vec3::zeros()).unwrap() - 0.0170523).abs() < 1e-7);
        let edge = Vec3::new(0.0, 7.0, 0.0);
        assert_relative_eq!(
            k.gamma(&edge).unwrap(),
            1.0 / (28.0 * PI),
            max_relative = 1e-14
        );
        assert_eq!(k.gamma_gradient(&Vec3::zeros()).unwrap(), Vec3::zeros());
        assert_relative_eq!(
            k.gamma_gradient(&Vec3::new(1.0, 0.0, 0.0)).unwrap(),
            Vec3::new(1.0 / 3.0, 0.0, 0.0)
        );
    }

    #[test]
    fn outside_points_are_rejected() {
        let k = kernel(1.0);
        let out = Vec3::new(1.5, 0.0, 0.0);
        assert!(matches!(
            k.regular_part(&out, &Vec3::zeros()),
            Err(Error::PointOutsideDomain(_))
        ));
        assert!(matches!(k.gamma(&out), Err(Error::PointOutsideDomain(_))));
        assert!(matches!(
            k.neumann(&Vec3::zeros(), &Vec3::zeros()),
            Err(Error::CoincidentPoints(_))
        ));
    }
}
