//! 2D Euler equations of gas dynamics, in dimensional or low-Mach
//! nondimensional form.
//!
//! The conserved vector is `(rho, rho u, rho v, E)` with the state law
//! `E = p/(gamma-1) + eps^2/2 rho |u|^2` and momentum flux
//! `rho u (x) u + p/eps^2 I`. `eps = 1` recovers the dimensional equations;
//! `eps = sqrt(gamma) M` is the Mach scaling of the nondimensionalized system,
//! whose acoustic speed is `c/eps` with `c = sqrt(gamma p / rho)`.

use super::Model;
use crate::Vec2;
use nalgebra::{Matrix4, Vector4};

#[derive(Debug, Clone, Copy)]
pub struct EulerModel {
    pub gamma: f64,
    pub epsilon: f64,
}

impl EulerModel {
    pub fn new(gamma: f64, epsilon: f64) -> Self {
        assert!(gamma > 1.0, "adiabatic exponent must exceed 1");
        assert!(epsilon > 0.0, "Mach scaling must be positive");
        Self { gamma, epsilon }
    }

    /// Conserved state from primitive variables (density, velocity, pressure).
    pub fn conserved(&self, rho: f64, vel: Vec2, p: f64) -> Vector4<f64> {
        let e = p / (self.gamma - 1.0) + 0.5 * self.epsilon * self.epsilon * rho * vel.norm_squared();
        Vector4::new(rho, rho * vel.x, rho * vel.y, e)
    }

    /// Primitive variables (density, velocity, pressure) of a conserved state.
    pub fn primitive(&self, u: &Vector4<f64>) -> (f64, Vec2, f64) {
        let rho = u[0];
        let vel = Vec2::new(u[1] / rho, u[2] / rho);
        (rho, vel, self.pressure(u))
    }

    pub fn pressure(&self, u: &Vector4<f64>) -> f64 {
        let eps2 = self.epsilon * self.epsilon;
        (self.gamma - 1.0) * (u[3] - 0.5 * eps2 * (u[1] * u[1] + u[2] * u[2]) / u[0])
    }

    pub fn sound_speed(&self, u: &Vector4<f64>) -> f64 {
        (self.gamma * self.pressure(u) / u[0]).sqrt()
    }

    /// Specific physical entropy `s = log(p rho^-gamma)`.
    pub fn physical_entropy(&self, u: &Vector4<f64>) -> f64 {
        self.pressure(u).ln() - self.gamma * u[0].ln()
    }
}

impl Model<4> for EulerModel {
    fn flux(&self, u: &Vector4<f64>) -> [Vector4<f64>; 2] {
        let (rho, vel, p) = self.primitive(u);
        let p_eps = p / (self.epsilon * self.epsilon);
        let e = u[3];
        let fx = Vector4::new(
            rho * vel.x,
            u[1] * vel.x + p_eps,
            u[2] * vel.x,
            vel.x * (e + p),
        );
        let fy = Vector4::new(
            rho * vel.y,
            u[1] * vel.y,
            u[2] * vel.y + p_eps,
            vel.y * (e + p),
        );
        [fx, fy]
    }

    fn normal_flux_jacobian(&self, q: &Vector4<f64>, n: Vec2) -> Matrix4<f64> {
        let g1 = self.gamma - 1.0;
        let eps2 = self.epsilon * self.epsilon;
        let rho = q[0];
        let u = q[1] / rho;
        let v = q[2] / rho;
        let un = u * n.x + v * n.y;
        let k = 0.5 * (u * u + v * v);
        let p = self.pressure(q);
        let h = (q[3] + p) / rho;
        // dp/dq scaled by 1/eps^2 where it multiplies the momentum flux
        Matrix4::new(
            0.0,
            n.x,
            n.y,
            0.0,
            -u * un + g1 * k * n.x,
            un + u * n.x - g1 * u * n.x,
            u * n.y - g1 * v * n.x,
            g1 * n.x / eps2,
            -v * un + g1 * k * n.y,
            v * n.x - g1 * u * n.y,
            un + v * n.y - g1 * v * n.y,
            g1 * n.y / eps2,
            un * (g1 * eps2 * k - h),
            n.x * h - g1 * eps2 * u * un,
            n.y * h - g1 * eps2 * v * un,
            self.gamma * un,
        )
    }

    fn max_wavespeed(&self, u: &Vector4<f64>, n: Vec2) -> f64 {
        let un = (u[1] * n.x + u[2] * n.y) / u[0];
        un.abs() + self.sound_speed(u) / self.epsilon
    }

    fn material_speed(&self, u: &Vector4<f64>, n: Vec2) -> f64 {
        ((u[1] * n.x + u[2] * n.y) / u[0]).abs()
    }

    fn is_valid(&self, u: &Vector4<f64>) -> bool {
        u.iter().all(|x| x.is_finite()) && u[0] > 0.0 && self.pressure(u) > 0.0
    }

    /// Convex entropy `eta = -rho s / (gamma - 1)` with `s = log(p rho^-gamma)`.
    fn entropy(&self, u: &Vector4<f64>) -> f64 {
        -u[0] * self.physical_entropy(u) / (self.gamma - 1.0)
    }

    fn entropy_flux(&self, u: &Vector4<f64>) -> Vec2 {
        let eta = self.entropy(u);
        Vec2::new(u[1] / u[0] * eta, u[2] / u[0] * eta)
    }

    /// Wall ghost state: normal momentum reflected, density and energy kept.
    fn mirror(&self, u: &Vector4<f64>, n: Vec2) -> Vector4<f64> {
        let mn = u[1] * n.x + u[2] * n.y;
        Vector4::new(u[0], u[1] - 2.0 * mn * n.x, u[2] - 2.0 * mn * n.y, u[3])
    }

    fn mirror_jacobian(&self, n: Vec2) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t[(1, 1)] -= 2.0 * n.x * n.x;
        t[(1, 2)] -= 2.0 * n.x * n.y;
        t[(2, 1)] -= 2.0 * n.y * n.x;
        t[(2, 2)] -= 2.0 * n.y * n.y;
        t
    }
}
