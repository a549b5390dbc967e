//! `heegner`: command-line frontend for Gross lattices, Heegner measures and
//! the effective-surjectivity search.

mod cache;
mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "heegner", version, about = "Exact arithmetic for Gross lattices and Heegner points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Theta cache directory.
    #[arg(long, env = "HEEGNER_CACHE_DIR", global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Run without data parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gross genus of discriminant 4ℓ² and its classes.
    Genus {
        #[arg(long)]
        ell: u64,
        #[arg(long = "N", default_value_t = 1)]
        n: u64,
    },
    /// Class number of the order of discriminant D·c².
    Classnum {
        #[arg(long = "D", allow_negative_numbers = true)]
        d: i64,
        #[arg(long, default_value_t = 1)]
        c: u64,
    },
    /// Theta coefficients r(Q, n) for 0 <= n <= bound.
    Theta {
        /// Gross-genus class index (with --ell).
        #[arg(long, requires = "ell", conflicts_with = "gram")]
        class: Option<usize>,
        #[arg(long)]
        ell: Option<u64>,
        /// Six entries a11,a22,a33,a23,a13,a12 of a Gram matrix.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        gram: Option<Vec<i64>>,
        #[arg(long)]
        bound: u64,
    },
    /// Heegner measure μ_{D,c} on the supersingular classes.
    Measure {
        #[arg(long)]
        ell: u64,
        #[arg(long = "N", default_value_t = 1)]
        n: u64,
        #[arg(long = "D", allow_negative_numbers = true)]
        d: i64,
        #[arg(long, default_value_t = 1)]
        c: u64,
    },
    /// Total-variation distance to μ_can along a family of conductors.
    Converge {
        #[arg(long)]
        ell: u64,
        #[arg(long = "D", allow_negative_numbers = true)]
        d: i64,
        /// All conductors 1..=c-max prime to ℓ.
        #[arg(long, conflicts_with_all = ["prime", "k_max"])]
        c_max: Option<u64>,
        /// Prime powers p^k, k = 0..=k-max.
        #[arg(long, requires = "k_max")]
        prime: Option<u64>,
        #[arg(long)]
        k_max: Option<u32>,
    },
    /// Hecke eigenvalues a(p) of the level-ℓ newform.
    Eigen {
        #[arg(long)]
        ell: u64,
        #[arg(long, default_value_t = 50)]
        p_max: u64,
        #[arg(long, value_enum, default_value_t = EigenSource::Theta)]
        source: EigenSource,
    },
    /// Conductors c for which surjectivity of reduction is not certified.
    Surject {
        #[arg(long)]
        ell: u64,
        #[arg(long = "N", default_value_t = 1)]
        n: u64,
        /// Replace every m_s by this rational (e.g. 2 or 3/2).
        #[arg(long)]
        threshold: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EigenSource {
    Theta,
    Curve,
    Both,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
