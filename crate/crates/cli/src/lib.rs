//! Library half of the `actdet` command-line harness: JSONL interchange
//! formats and the command implementations, kept callable so the integration
//! suite can drive them in-process with explicit thread counts.

pub mod commands;
pub mod error;
pub mod formats;

pub use commands::{cmd_eval, cmd_generate, cmd_link, cmd_refine, cmd_report, cmd_run, EvalLevel};
pub use error::CmdError;

/// Worker-thread override, read from `ACTDET_THREADS` by the binary.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("ACTDET_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
}
