//! Acceptance thresholds. Suites, manifests and tests all read them from
//! here so a reported threshold always matches the one that was applied.

/// Pointwise Hodge / interior / wedge identities.
pub const IDENTITY_TOL: f64 = 1e-12;
pub const IDENTITY_TRIALS: usize = 100;
pub const IDENTITY_DIMS: [usize; 4] = [2, 3, 4, 5];

/// Principal symbol audit.
pub const SYMBOL_SYMMETRY_TOL: f64 = 1e-13;
pub const SYMBOL_COVECTORS: usize = 1000;
pub const ADMISSIBILITY_TOL: f64 = 1e-10;
pub const BOUNDARY_SAMPLES_PER_FACE: usize = 8;

/// Manufactured-solution convergence of the split system.
pub const LEMMA_ORDER: f64 = 2.0;
pub const LEMMA_ORDER_TOL: f64 = 0.3;
pub const LEMMA_GRIDS: [usize; 3] = [16, 32, 64];

/// Constraint preservation over an evolution run.
pub const CONSTRAINT_DRIFT_TOL: f64 = 1e-6;
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-6;
pub const EVOLVE_STEPS: usize = 100;
pub const EVOLVE_CFL: f64 = 0.4;

/// Density outside the light cone relative to the peak density.
pub const CONE_LEAK_TOL: f64 = 1e-7;

/// Green identities.
pub const RIGHT_INVERSE_TOL: f64 = 5e-3;
/// Largest accepted defect ratio under one grid refinement ("halves, ±30%").
pub const REFINEMENT_RATIO_MAX: f64 = 0.65;
pub const EXACT_SEQUENCE_TOL: f64 = 5e-3;

/// Pre-symplectic structure.
pub const SKEW_TOL: f64 = 1e-9;
pub const CHI_INDEPENDENCE_TOL: f64 = 1e-9;
pub const SOURCE_FORM_TOL: f64 = 5e-3;
pub const DEGENERACY_TOL: f64 = 5e-3;
pub const SYMPLECTIC_PAIRS: usize = 10;
pub const DEGENERACY_PROBES: usize = 10;
