//! `gcalc` binary. `GCALC_THREADS` sizes the global rayon pool.

use std::process::ExitCode;

use anyhow::{Context, Result};

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GCALC_THREADS") {
        let n: usize = v.parse().with_context(|| format!("GCALC_THREADS='{v}' is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(gcalc_cli::run(std::env::args_os()))
}
