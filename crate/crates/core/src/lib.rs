//! Cochain discretization of Maxwell's equations for the degree-`k` Faraday
//! form on `ℝ × Σ` with metric `-β² dt² + a(t)² δ` and a timelike boundary.
//!
//! Modules, bottom up: `exterior` (fiber algebra), `complex` (staggered
//! cubical complex on Σ), `maxwell` (split system, constraints, symbol),
//! `evolution` (RK4 and diagnostics), `green` (G±, exact sequence,
//! pre-symplectic form). `io` and `tolerances` are shared plumbing.

pub mod complex;
pub mod error;
pub mod evolution;
pub mod exterior;
pub mod green;
pub mod io;
pub mod manufactured;
pub mod maxwell;
pub mod metric;
pub mod tolerances;

pub use complex::{BoundaryCochain, Cochain, Face, Grid, GridSpec, Kind, Side};
pub use error::{Error, Result};
pub use evolution::{
    BoundaryMode, Bump, Check, EvolveConfig, MonitorSample, MonitorSeries, Solver, SupportVerdict, ValidationReport,
};
pub use exterior::{AlgebraForm, FiberMetric, FiberVector, MultiIndex};
pub use green::{Bundle, CutoffProfile, Green, GreenBundle, History, SourceBundle, SourceHistory, SourcePair, TimeGrid};
pub use maxwell::{FieldState, Maxwell, SourceData, SourceSlice};
pub use metric::MetricField;
