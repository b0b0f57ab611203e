//! Branching random walk simulation, exact Galton–Watson laws and walk
//! deviation oracles.

mod brw;
mod cramer;
mod gw;
mod slope;

pub use brw::{
    lattice_final_count, residual_lower_bound, run_brw, BrwConfig, Cohort, GenerationRecord, Mode, Particles,
    RecordMode, Threshold,
};
pub use cramer::{cramer_is_estimate, heavy_tail_sum_check, HeavyTailReport, TailCheckPoint, WalkOracleResult};
pub use gw::{gw_pgf_iterate, pgf_iterates, pgf_ratios, GwDistribution};
pub use slope::biggins_slope;
