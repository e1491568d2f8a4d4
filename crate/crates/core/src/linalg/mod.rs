mod eigen;
mod sparse;

pub use eigen::{
    dense_top, lanczos_top, rayleigh, residual, top_generalized, EigenEstimate, EigenMethod, EigenOptions, SpdSolver,
};
pub use sparse::SymCsr;
