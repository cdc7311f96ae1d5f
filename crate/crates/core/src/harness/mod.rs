//! Benchmark tasks, experiment drivers, MNIST ingestion and report output.

pub mod experiments;
pub mod mnist;
pub mod report;
pub mod tasks;

pub use experiments::*;
pub use mnist::load_mnist_idx;
pub use report::{write_report, Table, Tabular};
pub use tasks::{gen_20bit, gen_5bit, MemoryTask, TaskKind};
