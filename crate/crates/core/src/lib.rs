//! Discrete exterior calculus on staggered cubical grids.
//!
//! The crate assembles one space/time block operator acting on an
//! eight-slot field of spatial forms and instantiates Maxwell, Schrödinger and
//! small-strain elasticity solvers from it through slot-binding tables. Time
//! integration is a staggered leapfrog in which the metric-free equations hold
//! exactly and only the Hodge operators approximate the constitutive laws.

#![allow(clippy::needless_range_loop)]

pub mod cochain;
pub mod conservation;
pub mod error;
pub mod grid;
pub mod hodge;
pub mod io;
pub mod models;
pub mod sparse;
pub mod stepper;

pub use cochain::{
    project_function, project_proxy, zero_field, Cochain, FieldSlot, GeneralField, Placement, SlotField, SlotKind,
    SourceField, SourceSlot,
};
pub use conservation::{
    assemble_block_operator, check_pattern, compare_patterns, evaluate_residual, exactness_defects, golden_pattern,
    infer_pattern, parse_pattern, verify_4d_decomposition, BlockEntry, BlockKind, BlockOperator, DecompositionReport,
    PatternMismatch, Residual, RowNorm, SlotRates, TimeDerivative,
};
pub use error::{Error, Result};
pub use grid::{Cell, CubicalComplex, SpacetimeSplit, SplitCell};
pub use hodge::{
    build_elastic_hodge, build_hodge, double_hodge_sign, energy, vacuum_hodge, HodgeMap, LameField, MaterialField,
    MaterialTag, SlotHodges,
};
pub use models::{
    elasticity_spec, maxwell_spec, row_map, schrodinger_spec, vector_proxy_table, yang_mills_spec, ElasticityParams,
    MaxwellParams, ModelKind, ModelSpec, SchrodingerParams, ScalarFn, VectorFn,
};
pub use sparse::{Incidence, SparseMatrix};
pub use stepper::{cfl_bound, estimate_frequency, peak_position, InitialLevels, Probe, Sample, Simulation, StepResidual};
