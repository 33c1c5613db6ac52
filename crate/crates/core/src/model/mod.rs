//! Conservation-law interface and numerical flux machinery.
//!
//! A [`Model`] provides the physical flux, its directional Jacobian, wave
//! speeds, an entropy pair and boundary-state helpers for a system of `M`
//! conservation laws. The solver is generic in `M`, so small scalar models can
//! back the integrator oracles while production runs use the Euler equations.

mod advection;
mod euler;

pub use advection::Advection;
pub use euler::EulerModel;

use crate::Vec2;
use nalgebra::{SMatrix, SVector};

pub trait Model<const M: usize>: Sync {
    /// Physical flux tensor: `[f_x(u), f_y(u)]`.
    fn flux(&self, u: &SVector<f64, M>) -> [SVector<f64, M>; 2];

    /// Exact Jacobian of `f(u)·n` with respect to the conserved variables.
    fn normal_flux_jacobian(&self, u: &SVector<f64, M>, n: Vec2) -> SMatrix<f64, M, M>;

    /// Spectral radius of the directional flux Jacobian, `|u·n| + c/eps` for Euler.
    fn max_wavespeed(&self, u: &SVector<f64, M>, n: Vec2) -> f64;

    /// Speed of the material wave `|u·n|`; drives the accuracy time step.
    fn material_speed(&self, u: &SVector<f64, M>, n: Vec2) -> f64;

    /// Admissibility of a state (positive density and internal energy for Euler).
    fn is_valid(&self, u: &SVector<f64, M>) -> bool;

    /// Convex entropy `eta(u)`.
    fn entropy(&self, u: &SVector<f64, M>) -> f64;

    /// Entropy flux `psi(u)` compatible with `eta`.
    fn entropy_flux(&self, u: &SVector<f64, M>) -> Vec2;

    /// `f(u)·n`.
    fn normal_flux(&self, u: &SVector<f64, M>, n: Vec2) -> SVector<f64, M> {
        let f = self.flux(u);
        f[0] * n.x + f[1] * n.y
    }

    /// Ghost state seen across a wall with outward normal `n`.
    fn mirror(&self, u: &SVector<f64, M>, _n: Vec2) -> SVector<f64, M> {
        *u
    }

    /// Jacobian of [`Model::mirror`] with respect to the interior state.
    fn mirror_jacobian(&self, _n: Vec2) -> SMatrix<f64, M, M> {
        SMatrix::identity()
    }

    /// Source term `S(x, u)`; zero unless a model opts in.
    fn source(&self, _x: Vec2, _u: &SVector<f64, M>) -> SVector<f64, M> {
        SVector::zeros()
    }

    fn source_jacobian(&self, _x: Vec2, _u: &SVector<f64, M>) -> SMatrix<f64, M, M> {
        SMatrix::zeros()
    }

    /// Lets the assembly skip source quadrature entirely for source-free models.
    fn has_source(&self) -> bool {
        false
    }
}

/// Numerical viscosity of the Rusanov flux: largest spectral radius of the two
/// states in direction `n`.
pub fn rusanov_alpha<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
) -> f64 {
    model.max_wavespeed(v, n).max(model.max_wavespeed(w, n))
}

/// Rusanov (local Lax-Friedrichs) flux `F(n,v,w) = 1/2 (f(v)+f(w))·n - 1/2 alpha (w-v)`.
pub fn rusanov_flux<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
) -> SVector<f64, M> {
    let alpha = rusanov_alpha(model, n, v, w);
    rusanov_flux_with_alpha(model, n, v, w, alpha)
}

/// Rusanov flux with an externally supplied viscosity parameter.
pub fn rusanov_flux_with_alpha<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
    alpha: f64,
) -> SVector<f64, M> {
    (model.normal_flux(v, n) + model.normal_flux(w, n) - (w - v) * alpha) * 0.5
}

/// Approximate Jacobian blocks `(dF/dv, dF/dw)` of the Rusanov flux with the
/// viscosity parameter held constant:
/// `dF/dv = 1/2 J_f(v)·n + 1/2 alpha I`, `dF/dw = 1/2 J_f(w)·n - 1/2 alpha I`.
pub fn rusanov_jacobian_approx<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
) -> (SMatrix<f64, M, M>, SMatrix<f64, M, M>) {
    let alpha = rusanov_alpha(model, n, v, w);
    let half_alpha = SMatrix::<f64, M, M>::identity() * (0.5 * alpha);
    let jv = model.normal_flux_jacobian(v, n) * 0.5 + half_alpha;
    let jw = model.normal_flux_jacobian(w, n) * 0.5 - half_alpha;
    (jv, jw)
}

/// Rusanov-form numerical entropy flux, sharing its viscosity with the
/// conservative flux so both dissipate consistently:
/// `Psi(n,v,w) = 1/2 (psi(v)+psi(w))·n - 1/2 alpha (eta(w)-eta(v))`.
pub fn numerical_entropy_flux<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
) -> f64 {
    let alpha = rusanov_alpha(model, n, v, w);
    numerical_entropy_flux_with_alpha(model, n, v, w, alpha)
}

pub fn numerical_entropy_flux_with_alpha<const M: usize>(
    model: &impl Model<M>,
    n: Vec2,
    v: &SVector<f64, M>,
    w: &SVector<f64, M>,
    alpha: f64,
) -> f64 {
    0.5 * ((model.entropy_flux(v) + model.entropy_flux(w)).dot(&n)
        - alpha * (model.entropy(w) - model.entropy(v)))
}
