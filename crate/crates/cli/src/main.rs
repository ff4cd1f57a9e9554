//! Command-line front end for the multi-cause toolkit.
//!
//! Workflows: `simulate` a structural model and dataset, `fit` the
//! latent-class factor model, `gate` the conditional-independence check,
//! then `identify` observable-only estimands or compute `sensitivity`
//! regions; `demo-nonid` builds the identical-observables witness pair.
//!
//! Exit codes: 0 success (gate PASS), 1 input error, 2 gate FAIL,
//! 3 identification refusal.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "multicause", version, about = "Exact multi-cause causal inference toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load) a structural model, sample a dataset, and write
    /// the exact observed joint and ground-truth potential outcomes.
    Simulate(SimulateArgs),
    /// Fit the latent-class factor model by EM; optionally a BIC table over
    /// a class range.
    Fit(FitArgs),
    /// Test mutual independence of the causes given zhat; exit 0 on PASS,
    /// 2 on FAIL.
    Gate(GateArgs),
    /// Evaluate an identification estimand (adjust, thm7, thm8); exits 3
    /// when the query is not identified.
    Identify(IdentifyArgs),
    /// Ignorance regions per dependence budget, plus the calibration anchor.
    Sensitivity(SensitivityArgs),
    /// Build two models with identical observables and different causal
    /// truths.
    DemoNonid(DemoArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Load this model instead of generating one.
    #[arg(long)]
    pub scm: Option<String>,
    #[arg(long)]
    pub z_card: Option<usize>,
    /// 0 or absent: no covariate.
    #[arg(long)]
    pub x_card: Option<usize>,
    #[arg(long)]
    pub y_card: Option<usize>,
    /// Comma-separated cause cardinalities, e.g. `2,2,3`.
    #[arg(long)]
    pub cause_cards: Option<String>,
    /// Dirichlet concentration for random tables.
    #[arg(long)]
    pub concentration: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cause assignment for ground truth, e.g. `--a 1,0`; repeatable.
    /// Default: every assignment (when there are at most 64).
    #[arg(long)]
    pub a: Vec<String>,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    /// Comma-separated cause columns; default: columns starting with `a`.
    #[arg(long)]
    pub causes: Option<String>,
    #[arg(long)]
    pub covariate: Option<String>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Fit every class count in `lo..hi` and write a BIC table.
    #[arg(long)]
    pub classes_range: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct GateArgs {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub causes: Option<String>,
    /// Fitted model supplying zhat (MAP class per row).
    #[arg(long)]
    pub model: Option<String>,
    /// Alternative zhat source: single-column CSV aligned with the data.
    #[arg(long)]
    pub zhat: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub bonferroni: bool,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub power_trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// One of `adjust`, `thm7`, `thm8`.
    #[arg(long)]
    pub estimand: Option<String>,
    /// Dataset whose empirical joint is used (no smoothing).
    #[arg(long)]
    pub data: Option<String>,
    /// Exact joint table JSON (alternative to --data).
    #[arg(long)]
    pub joint: Option<String>,
    #[arg(long)]
    pub causes: Option<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Latent column name for `adjust` (the joint must include it).
    #[arg(long)]
    pub latent: Option<String>,
    /// Focal cause indices for `thm7`, e.g. `0,2`.
    #[arg(long)]
    pub focal: Option<String>,
    #[arg(long)]
    pub a_focal: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub a_prime: Option<String>,
    /// Fitted cause-only model supplying zhat for `thm8`.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Structural-model route: exact margins and ground truth.
    #[arg(long)]
    pub scm: Option<String>,
    /// Data route (requires --model): empirical outcome margin, fitted
    /// posterior confounder margin.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub causes: Option<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    /// Comma-separated dependence budgets (L1 distance from independence).
    #[arg(long)]
    pub budgets: Option<String>,
    /// `mean` or `p:<level>`; default `p:1`.
    #[arg(long)]
    pub estimand: Option<String>,
    /// Report format: `json`, `csv`, or `both` (default).
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Confounded template; default: the shipped binary-confounder model.
    #[arg(long)]
    pub scm: Option<String>,
    #[arg(long)]
    pub a_star: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Usage problems are input errors (exit 1); --help/--version are
            // not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Gate(args) => commands::cmd_gate(args),
        Command::Identify(args) => commands::cmd_identify(args),
        Command::Sensitivity(args) => commands::cmd_sensitivity(args),
        Command::DemoNonid(args) => commands::cmd_demo_nonid(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
