pub mod agree;
pub mod annotate;
pub mod merge;
pub mod predict;
pub mod report;
