use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gpi", version, about = "Exact product-moment inequalities for Gaussian and multivariate gamma vectors")]
pub struct Cli {
    /// key=value file with defaults for tol, N, seed, ci_level, workers.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact mixed moments.
    #[command(subcommand)]
    Moment(MomentCmd),
    /// Weak or strong product-inequality gap, optionally certified over all exponents.
    Gap(GapArgs),
    /// Covariance structure and PSD checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Monte Carlo estimators and dependence screens.
    #[command(subcommand)]
    Mc(McCmd),
    /// Search a covariance family for negative gaps.
    Scan(ScanArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Gaussian,
    Gamma,
}

#[derive(Debug, Subcommand)]
pub enum MomentCmd {
    /// E ∏ X_j^{n_j} for X ~ N_d(0, Σ).
    Gaussian {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t)]
        backend: BackendArg,
        /// Also evaluate by perfect-matching enumeration (total degree ≤ 12).
        #[arg(long)]
        matchings: bool,
    },
    /// E ∏ X_j^{n_j} for X ~ Gamma_d(α, Σ).
    Gamma {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t)]
        backend: BackendArg,
    },
    /// Moment of a sum of independent gamma vectors; repeat --alpha/--sigma per component.
    GammaSum {
        #[arg(long, required = true)]
        alpha: Vec<String>,
        #[arg(long, required = true)]
        sigma: Vec<String>,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t)]
        backend: BackendArg,
    },
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long, value_enum)]
    pub dist: Dist,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub sigma: String,
    #[arg(long)]
    pub n: Option<String>,
    /// One-based members of the first block, e.g. 1,2.
    #[arg(long)]
    pub partition: Option<String>,
    /// Compare against the product of all univariate marginals.
    #[arg(long)]
    pub weak: bool,
    /// Check the sign-balance hypothesis and every exponent up to --max-total, every split.
    #[arg(long)]
    pub certify: bool,
    #[arg(long, default_value_t = 6)]
    pub max_total: u32,
    #[arg(long, value_enum, default_value_t)]
    pub backend: BackendArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StructureMode {
    Sign,
    Mtp2,
    Ell,
}

#[derive(Debug, Subcommand)]
pub enum CheckCmd {
    Structure {
        #[arg(long, alias = "input")]
        sigma: String,
        #[arg(long, value_enum)]
        mode: StructureMode,
        /// Entries at or below this magnitude count as zero.
        #[arg(long)]
        tol: Option<String>,
        /// Exit with status 3 when the structure is absent.
        #[arg(long)]
        require: bool,
        #[arg(long, value_enum, default_value_t)]
        backend: BackendArg,
    },
    Psd {
        #[arg(long, alias = "input")]
        sigma: String,
        /// Relative eigenvalue tolerance on the float backend (default 1e-10).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t)]
        backend: BackendArg,
    },
}

#[derive(Debug, Args, Clone)]
pub struct McCommon {
    #[arg(long = "N")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confidence level in (0,1).
    #[arg(long)]
    pub ci: Option<f64>,
    #[arg(long)]
    pub antithetic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Gaussian,
    Abs,
    Gamma,
}

#[derive(Debug, Subcommand)]
pub enum McCmd {
    /// P(V_1 ≥ t_1, …, V_d ≥ t_d).
    Orthant {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        t: String,
        #[arg(long, value_enum, default_value_t = SamplerArg::Abs)]
        sampler: SamplerArg,
        #[arg(long)]
        alpha: Option<String>,
        #[command(flatten)]
        common: McCommon,
    },
    /// Upper-orthant dependence screen of |X| against the product of marginals.
    Puod {
        #[arg(long)]
        sigma: String,
        #[arg(long, default_value = "5")]
        grid: String,
        /// Even exponents for the exact cross-check after a rejection.
        #[arg(long)]
        n: Option<String>,
        #[command(flatten)]
        common: McCommon,
    },
    /// Strong upper-orthant dependence screen over every two-block split.
    Spuod {
        #[arg(long)]
        sigma: String,
        #[arg(long, default_value = "5")]
        grid: String,
        #[command(flatten)]
        common: McCommon,
    },
    /// Direct vs survival-integral estimate of E ∏ V_j^{n_j}.
    Survival {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t = SamplerArg::Abs)]
        sampler: SamplerArg,
        #[arg(long)]
        alpha: Option<String>,
        #[command(flatten)]
        common: McCommon,
    },
    /// Strong gap for negative exponents E ∏|X_j|^{−n_j}, n_j ∈ (0,1).
    NegGpi {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        n: String,
        #[arg(long)]
        partition: String,
        #[command(flatten)]
        common: McCommon,
    },
    /// Lower-orthant (correlation-inequality) screen; repeat --partition or omit for all.
    CorrIneq {
        #[arg(long)]
        sigma: String,
        #[arg(long, default_value = "5")]
        grid: String,
        #[arg(long)]
        partition: Vec<String>,
        #[command(flatten)]
        common: McCommon,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Counterexample,
    RandomPsd,
    RandomSignedNonneg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// start:end:steps (counterexample family).
    #[arg(long, default_value = "-9/10:9/10:19", allow_hyphen_values = true)]
    pub rho: String,
    /// start:end:steps (counterexample family).
    #[arg(long, default_value = "-9/10:9/10:19", allow_hyphen_values = true)]
    pub sigma12: String,
    /// Number of random matrices.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub min_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub max_dim: usize,
    #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
    pub dist: Dist,
    #[arg(long)]
    pub alpha: Option<String>,
    /// Fixed exponent vector; otherwise every exponent up to --max-total.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub max_total: u32,
    /// One-based first block; repeat for several, omit for all splits.
    #[arg(long)]
    pub partition: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    pub backend: BackendArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}
