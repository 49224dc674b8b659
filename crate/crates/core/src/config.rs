//! Numerical tolerances shared by the solvers.

/// Central tolerance record. Every solver reads its thresholds from here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative symmetry check for symmetric inputs.
    pub symmetry: f64,
    /// Relative increment at which structure-preserving doubling stops.
    pub dare_doubling: f64,
    pub dare_max_iterations: usize,
    /// Newton refinement steps applied after doubling.
    pub dare_newton_steps: usize,
    /// Schur stability margin: rho(A) must be below `1 - stability_margin`.
    pub stability_margin: f64,
    /// Largest order solved by Kronecker factorization; larger use squared doubling.
    pub dlyap_kron_max_order: usize,
    pub dlyap_max_iterations: usize,
    /// Rank tolerance (relative to the largest singular value) for PBH tests.
    pub pbh_rank: f64,
    /// Relative tolerance of the H-infinity bisection.
    pub hinf: f64,
    pub hinf_max_iterations: usize,
    pub hinf_grid_points: usize,
    /// Relative tolerance for controllability/observability rank decisions.
    pub minreal_rank: f64,
    /// Hankel singular value cutoff for balanced truncation.
    pub hankel_cutoff: f64,
    /// FI is singular when lambda_min <= fisher_rel * lambda_max.
    pub fisher_rel: f64,
    /// FI is singular when lambda_min <= fisher_abs.
    pub fisher_abs: f64,
    /// Condition number above which a report carries a warning.
    pub fisher_condition_warning: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            dare_doubling: 1e-12,
            dare_max_iterations: 100,
            dare_newton_steps: 1,
            stability_margin: 1e-9,
            dlyap_kron_max_order: 40,
            dlyap_max_iterations: 200,
            pbh_rank: 1e-9,
            hinf: 1e-9,
            hinf_max_iterations: 200,
            hinf_grid_points: 1024,
            minreal_rank: 1e-9,
            hankel_cutoff: 1e-10,
            fisher_rel: 1e-10,
            fisher_abs: 1e-10,
            fisher_condition_warning: 1e8,
        }
    }
}
