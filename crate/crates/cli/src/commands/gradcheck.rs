//! `pcsod gradcheck`: finite-difference verification of every block's
//! gradients, one table row per block, nonzero exit on failure.

use clap::Args;
use pcsod_core::gradcheck::{check_blocks, Block, FaultInjection, DEFAULT_STEP, DEFAULT_TOLERANCE};

use crate::error::CliError;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Which block to check: all | encoder | fab | ppb | spb | loss.
    #[arg(long, default_value = "all")]
    pub block: String,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Corrupt one analytic gradient (test hook; the check must then fail).
    #[arg(long, hide = true, default_value_t = false)]
    pub inject_fault: bool,
}

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    let blocks = Block::select(&args.block)
        .ok_or_else(|| CliError::usage(format!("unknown block {}", args.block)))?;
    let reports = check_blocks(
        &blocks,
        args.tolerance,
        args.step,
        FaultInjection(args.inject_fault),
    );
    println!(
        "{:<16} {:>9} {:>14} {:>7}",
        "block", "elements", "max rel error", "status"
    );
    let mut failed = Vec::new();
    for r in &reports {
        println!(
            "{:<16} {:>9} {:>14.3e} {:>7}",
            r.block.name(),
            r.elements_checked,
            r.max_rel_error,
            if r.pass() { "pass" } else { "FAIL" }
        );
        if !r.pass() {
            failed.push(r.block.name());
        }
    }
    if !failed.is_empty() {
        return Err(CliError::Numeric(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
