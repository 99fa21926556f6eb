//! KPIs of evaluation runs, the scalar objective, and reward convergence.

mod convergence;
mod report;

pub use convergence::{convergence_detector, moving_average};
pub use report::{
    average_rows, compute_kpis, objective, percentile, DelaySummary, KpiReport, KpiRow,
    ObjectiveParams, TypeViolations,
};
pub mod csv_out;
