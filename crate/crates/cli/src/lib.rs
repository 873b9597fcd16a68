pub mod bench;
pub mod metrics;
pub mod report;
pub mod run;
