//! Host-side companion to `peh-core`: file formats, dataset manifests, the
//! six-device sweep with its report, and the external CNN hand-off.

pub mod cnn;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "PEH_WORKERS";

/// Install a global thread pool honoring [`WORKERS_ENV`]; later calls are no-ops.
pub fn init_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
