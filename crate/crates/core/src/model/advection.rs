//! Scalar linear advection, used to back the integrator and Jacobian oracles
//! with a model whose implicit systems are exactly linear.

use super::Model;
use crate::Vec2;
use nalgebra::{SMatrix, Vector1};

/// `u_t + a·grad(u) = rate * u`. The optional linear source turns a one-cell
/// periodic mesh into a scalar ODE, which pins down the integrator's stability
/// function exactly.
#[derive(Debug, Clone, Copy)]
pub struct Advection {
    pub speed: Vec2,
    pub rate: f64,
}

impl Advection {
    pub fn new(speed: Vec2) -> Self {
        Self { speed, rate: 0.0 }
    }

    pub fn with_rate(speed: Vec2, rate: f64) -> Self {
        Self { speed, rate }
    }
}

impl Model<1> for Advection {
    fn flux(&self, u: &Vector1<f64>) -> [Vector1<f64>; 2] {
        [*u * self.speed.x, *u * self.speed.y]
    }

    fn normal_flux_jacobian(&self, _u: &Vector1<f64>, n: Vec2) -> SMatrix<f64, 1, 1> {
        SMatrix::<f64, 1, 1>::new(self.speed.dot(&n))
    }

    fn max_wavespeed(&self, _u: &Vector1<f64>, n: Vec2) -> f64 {
        self.speed.dot(&n).abs()
    }

    fn material_speed(&self, _u: &Vector1<f64>, n: Vec2) -> f64 {
        self.speed.dot(&n).abs()
    }

    fn is_valid(&self, u: &Vector1<f64>) -> bool {
        u[0].is_finite()
    }

    fn entropy(&self, u: &Vector1<f64>) -> f64 {
        0.5 * u[0] * u[0]
    }

    fn entropy_flux(&self, u: &Vector1<f64>) -> Vec2 {
        self.speed * (0.5 * u[0] * u[0])
    }

    fn source(&self, _x: Vec2, u: &Vector1<f64>) -> Vector1<f64> {
        *u * self.rate
    }

    fn source_jacobian(&self, _x: Vec2, _u: &Vector1<f64>) -> SMatrix<f64, 1, 1> {
        SMatrix::<f64, 1, 1>::new(self.rate)
    }

    fn has_source(&self) -> bool {
        self.rate != 0.0
    }
}
