//! Dense linear-algebra kernels: Riccati and Lyapunov solvers, realizations,
//! system norms and stabilizability tests.

pub mod dense;
pub mod lyapunov;
pub mod norms;
pub mod pbh;
pub mod riccati;
pub mod statespace;

pub use dense::{CMat, Mat};
pub use lyapunov::{lyap_residual, solve_dlyap, solve_dlyap_with, LyapSolution};
pub use norms::{h2_norm_sq, hinf_norm, hinf_norm_with};
pub use pbh::{is_detectable, is_stabilizable, pbh_tests, PbhReport};
pub use riccati::{dare_residual, riccati_gain, solve_dare, solve_dare_with, DareSolution};
pub use statespace::StateSpaceTF;
