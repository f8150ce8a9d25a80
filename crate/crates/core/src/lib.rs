//! Exact finite certificates for Daugavet-, Delta- and relative
//! Daugavet-points.
//!
//! * [`metric`]: pointed finite metric spaces and the two grid example spaces.
//! * [`freespace`]: Lipschitz-free norms by exact optimal transport, slices,
//!   McShane extensions and distance-to-denting reports.
//! * [`rtree`]: finite R-trees, segment retractions and the functions built
//!   on them.
//! * [`absnorm`]: absolute normalized norms on the plane, duals, v-points and
//!   supporting slices.
//! * [`dyadic`]: the span of `f_t`, `h_t` in `L1[0,1]` with exact norms.
//! * [`cli`]: batch commands and verification suites behind the binary.

pub mod absnorm;
pub mod cli;
pub mod dyadic;
pub mod error;
pub mod freespace;
pub mod metric;
pub mod rational;
pub mod rtree;

pub use error::{Error, Result};
pub use rational::Q;
