use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "depkit",
    version,
    about = "Coverage, verification, monitoring and robustness analyses for small ReLU networks"
)]
pub struct Cli {
    /// Report path (for `monitor build`: the monitor file). Defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for data-parallel engines (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Fail (exit 1) when the coverage ratio is below this value.
    #[arg(long, global = true, value_name = "F")]
    pub min_coverage: Option<f64>,

    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scenario k-projection coverage.
    Coverage {
        #[command(subcommand)]
        command: CoverageCommand,
    },
    /// Decide whether a risk region is reachable from an input region.
    Verify(VerifyArgs),
    /// Build or query an activation-pattern monitor.
    Monitor {
        #[command(subcommand)]
        command: MonitorCommand,
    },
    /// Probability drop under image perturbations.
    Perturb(PerturbArgs),
    /// Probability drop as a patch slides over an image.
    Occlusion(OcclusionArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Denominator {
    /// Every k-tuple counts.
    All,
    /// Only k-tuples some feasible scenario can exhibit.
    Attainable,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long, value_name = "PATH")]
    pub catalog: PathBuf,

    /// Extra items from the `tags` of a JSON-lines dataset.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,

    #[arg(long, default_value_t = 2)]
    pub k: usize,

    #[arg(long, value_enum, default_value_t = Denominator::All)]
    pub denominator: Denominator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Exact,
    Greedy,
}

#[derive(Debug, Subcommand)]
pub enum CoverageCommand {
    /// Coverage ratio of the catalog's items.
    Compute(CatalogArgs),
    /// Feasible scenarios that add the most uncovered tuples.
    Propose {
        #[command(flatten)]
        catalog: CatalogArgs,

        #[arg(long, default_value_t = 1)]
        count: usize,

        #[arg(long, value_enum, default_value_t = Strategy::Exact)]
        strategy: Strategy,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Interval,
    Octagon,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    pub problem: PathBuf,

    #[arg(long, value_enum, default_value_t = Domain::Interval)]
    pub domain: Domain,

    /// Maximum number of ReLU splits per risk case.
    #[arg(long, default_value_t = 4096)]
    pub budget: usize,

    /// Falsification attempts before the search (0 disables it).
    #[arg(long, default_value_t = 256)]
    pub attempts: usize,
}

#[derive(Debug, Subcommand)]
pub enum MonitorCommand {
    /// Record training patterns; writes the monitor to `--out`.
    Build {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,

        #[arg(long, value_name = "PATH")]
        data: PathBuf,

        /// Layer index; negative counts ReLU layers from the end.
        #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
        layer: i64,

        #[arg(long, default_value_t = 0)]
        gamma: usize,

        /// A neuron is on when its value exceeds this.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        threshold: f64,

        /// Where to write the report (default: stdout).
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Check inputs against a monitor.
    Check {
        #[arg(long, value_name = "PATH")]
        monitor: PathBuf,

        /// Model file (default: the one recorded in the monitor).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,

        /// One input vector.
        #[arg(long, value_name = "PATH", required_unless_present = "data", conflicts_with = "data")]
        input: Option<PathBuf>,

        /// JSON-lines inputs.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,

    /// Comma-separated `name[:p1[:p2]]` (default: all seven kinds).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,

    /// Image shape `HxWxC` (default: guessed from the input size).
    #[arg(long)]
    pub shape: Option<String>,
}

#[derive(Debug, Args)]
pub struct OcclusionArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Class to track (default: the input file's label, else the prediction).
    #[arg(long)]
    pub label: Option<usize>,

    #[arg(long)]
    pub patch: Option<usize>,

    #[arg(long)]
    pub stride: Option<usize>,

    #[arg(long)]
    pub patch_value: Option<f64>,

    #[arg(long)]
    pub shape: Option<String>,

    /// Also write the heatmap as a binary PGM image.
    #[arg(long, value_name = "PATH")]
    pub pgm: Option<PathBuf>,
}
