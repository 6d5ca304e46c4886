//! Publisher-facing command-line tool and the experiment sweep harness.

pub mod app;
pub mod sweep;
