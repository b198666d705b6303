//! Institutional clustering, the crisis calendar and the two-cluster
//! replication pipeline.

mod cluster;
mod crisis;
mod replicate;

pub use cluster::{
    median, median_cluster, subindicator_drift, ClusterAssignment, DriftCategory, DriftReport,
    Replacement, ScoreRow, ScoreTable, MAX_SCORE, MIN_SCORE,
};
pub use crisis::{
    add_dummy, crisis_dummy, CrisisCalendar, CrisisCategory, CrisisInterval, IntervalEnd,
};
pub use replicate::{
    diagnostics_battery, replicate, ClusterKind, ClusterReport, ReplicationConfig, ReportBundle,
};
