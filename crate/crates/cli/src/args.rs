use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gstat", version, about = "Statistical convergence diagnostics in g-metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the g-metric axioms and the basic inequalities.
    Axioms(AxiomsArgs),
    /// Statistical convergence report against a candidate limit.
    Analyze(AnalyzeArgs),
    /// Statistical Cauchy report with a pivot search.
    Cauchy(CauchyArgs),
    /// l-dimensional density of an index set.
    Density(DensityArgs),
    /// Build the modified sequence that converges classically.
    Extract(ExtractArgs),
    /// Randomized finite-prefix checks of the limit theorems.
    Falsify(FalsifyArgs),
    /// Render a density trace as CSV and SVG.
    TracePlot(TracePlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    MaxPairwise,
    SumPairwise,
    Discrete,
    /// Distance between the first two arguments only; breaks symmetry.
    FirstPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    Abs,
    Euclid,
    Maxcoord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Auto,
    Exact,
    Factorized,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    #[value(name = "T2.1")]
    T21,
    #[value(name = "T2.2")]
    T22,
    #[value(name = "T2.3")]
    T23,
    #[value(name = "T2.4")]
    T24,
    #[value(name = "C2.1")]
    C21,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[arg(long, value_enum, default_value = "max-pairwise")]
    pub metric: MetricArg,
    /// Base metric; defaults to `abs` in dimension 1 and `euclid` otherwise.
    #[arg(long, value_enum)]
    pub base: Option<BaseArg>,
    #[arg(long = "order", short = 'l', default_value_t = 2)]
    pub order: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Root seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here; `-` writes it to stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct InputArgs {
    /// Sequence file, one comma-separated point per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generator spec such as `square-spike:n=10000`.
    #[arg(long)]
    pub generator: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.1, 0.05, 0.01])]
    pub eps: Vec<f64>,
    /// Horizon grid: `start:stop:log`, `start:stop:logK` or a comma list.
    #[arg(long)]
    pub ngrid: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub estimator: EstimatorArg,
    /// Largest tuple count enumerated exactly; accepts `1e8`.
    #[arg(long, default_value = "1e8")]
    pub budget: String,
    /// Monte Carlo samples per horizon; accepts `1e5`.
    #[arg(long, default_value = "1e5")]
    pub samples: String,
}

#[derive(Debug, Args)]
pub struct AxiomsArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Dimension of the sampled points.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Candidate limit as comma-separated coordinates, or `auto`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub limit: String,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CauchyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Pivot candidates chosen by the median heuristic.
    #[arg(long, default_value_t = 16)]
    pub heuristic_pivots: usize,
    /// Uniform random pivot candidates.
    #[arg(long, default_value_t = 16)]
    pub random_pivots: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct IndexSource {
    /// Named set: all, evens, odds, squares, cubes, powers-of-two.
    #[arg(long)]
    pub set: Option<String>,
    /// Index file, one positive integer per line.
    #[arg(long)]
    pub index_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub source: IndexSource,
    /// Horizon of the reported density.
    #[arg(long, short = 'n')]
    pub n: usize,
    #[arg(long = "order", short = 'l', default_value_t = 2)]
    pub order: usize,
    /// Also report a trace over this grid.
    #[arg(long)]
    pub ngrid: Option<String>,
    #[arg(long, value_enum, default_value = "factorized")]
    pub estimator: EstimatorArg,
    #[arg(long, default_value = "1e8")]
    pub budget: String,
    #[arg(long, default_value = "1e5")]
    pub samples: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Limit as comma-separated coordinates, or `auto`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub limit: String,
    /// Radii of the block schedule are powers of this base.
    #[arg(long, default_value_t = 0.5)]
    pub schedule_base: f64,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Write the modified sequence here.
    #[arg(long)]
    pub out_sequence: Option<PathBuf>,
    /// Write the agreement index set here.
    #[arg(long)]
    pub out_indices: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FalsifyArgs {
    #[arg(long, value_enum)]
    pub theorem: TheoremArg,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Prefix length of the generated sequences.
    #[arg(long, default_value_t = 8192)]
    pub len: usize,
    /// Orders sampled per trial.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub orders: Vec<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TracePlotArgs {
    /// A density trace, or any report holding one.
    #[arg(long)]
    pub trace: PathBuf,
    /// JSON pointer to the trace inside the file, e.g. `/payload/per_eps/0/trace`.
    #[arg(long)]
    pub pointer: Option<String>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub svg: PathBuf,
}
