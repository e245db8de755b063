//! Nyström discretization and spectral analysis of the Neumann–Poincaré operator
//! on closed curves and surfaces of prescribed Hölder regularity.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dd;
pub mod discretize;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod spectral;

pub use num_complex::Complex64;

pub use analysis::{critical_exponent, fit_decay, DecayFit, ProbeReport};
pub use discretize::{assemble, assemble_composed, make_grid, DiagonalRule, OperatorMatrix, QuadratureGrid};
pub use error::{Error, Result};
pub use geometry::{
    make_circle, make_ellipse, make_perturbed_sphere, make_weierstrass_curve, make_weierstrass_sphere,
    seeded_phases, BoundaryGeometry, GeometrySpec, Param, RegularityClass,
};
pub use kernel::{KernelIdentity, KernelKind};
pub use spectral::{eigen_spectrum, full_spectrum, singular_spectrum, Spectrum};

/// Caps rayon and dense linear algebra parallelism. `0` means one thread per core.
pub fn set_thread_limit(threads: usize) {
    let n = if threads == 0 { rayon::current_num_threads() } else { threads };
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if n <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(n));
    }
}
