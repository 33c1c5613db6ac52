//! Implicit third-order finite-volume solver for 2D hyperbolic conservation laws.
//!
//! The scheme combines a third-order CWENOZ reconstruction on structured and
//! unstructured polygonal meshes with a stiffly accurate DIRK3 time integrator.
//! A composite implicit-Euler predictor freezes the nonlinear reconstruction
//! weights so that each corrector stage only carries the flux nonlinearity
//! through its Newton solve (the "Quinpi" strategy). Spurious oscillations
//! produced by large implicit time steps are removed a posteriori by a
//! MOOD-style cascade (DIRK3 -> embedded DIRK2 -> composite IE) driven by the
//! numerical entropy production of each cell.
//!
//! Crate layout:
//! - [`mesh`]: Cartesian and triangle meshes, connectivity, stencils,
//!   quadrature rules and zero-mean basis moments,
//! - [`model`]: the conservation-law interface, 2D Euler (including the
//!   low-Mach nondimensional form) and the Rusanov flux machinery,
//! - [`recon`]: the CWENOZ reconstruction expressed as a frozen-weight linear
//!   operator with analytic derivatives,
//! - [`linalg`]: block-sparse matrices, GMRES and block ILU(0),
//! - [`time`]: Butcher tableaux, Newton solves, the composite-IE predictor and
//!   the DIRK3 corrector, time-step control,
//! - [`limiter`]: numerical entropy production and the time-limiting cascade,
//! - [`sim`]: configuration, test-case presets, the driver loop, error norms
//!   and CSV/VTK output.

pub mod limiter;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod recon;
pub mod sim;
pub mod time;

use nalgebra::SVector;

/// Cell-average field: one vector of `M` conserved quantities per cell.
pub type Field<const M: usize> = Vec<SVector<f64, M>>;

/// 2D point / vector in physical space.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Iterate in parallel when the `parallel` feature is on, serially otherwise.
#[cfg(feature = "parallel")]
#[macro_export]
macro_rules! maybe_par_iter {
    ($e:expr) => {{
        use rayon::prelude::*;
        $e.par_iter()
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
macro_rules! maybe_par_iter {
    ($e:expr) => {
        $e.iter()
    };
}

/// Map over an index range, in parallel when available, collecting into a Vec.
/// The output order is by index, so results are deterministic either way.
pub fn par_map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
