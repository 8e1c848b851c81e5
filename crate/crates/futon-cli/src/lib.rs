//! Task orchestration for the signal-fitting and inverse-problem pipelines:
//! configuration resolution, file I/O, synthetic inputs, the shared training
//! loop, and the per-task run functions the CLI dispatches to.

pub mod config;
pub mod imageio;
pub mod pipelines;
pub mod synthetic;
pub mod train;
