//! Command-line arguments. Every problem-file key is also a `--key value` flag;
//! flags override the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

macro_rules! problem_args {
    ($($field:ident => $key:literal),* $(,)?) => {
        #[derive(Debug, Clone, Default, Args)]
        pub struct ProblemArgs {
            /// Problem file with `key = value` lines.
            #[arg(long)]
            pub problem: Option<PathBuf>,
            $(
                #[arg(long = $key, value_name = "VALUE", allow_hyphen_values = true)]
                pub $field: Option<String>,
            )*
        }

        impl ProblemArgs {
            /// Flags given on the command line, as problem-file pairs.
            pub fn overrides(&self) -> Vec<(String, String)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push(($key.to_string(), x.clone()));
                    }
                )*
                v
            }
        }
    };
}

problem_args! {
    dim => "dim",
    lx => "Lx",
    ly => "Ly",
    lz => "Lz",
    k0_re => "k0_re",
    k0_im => "k0_im",
    kx0_re => "kx0_re",
    kx0_im => "kx0_im",
    ky0_re => "ky0_re",
    ky0_im => "ky0_im",
    kz0_re => "kz0_re",
    kz0_im => "kz0_im",
    regime => "regime",
    dx => "Dx",
    dy => "Dy",
    dz => "Dz",
    i_d => "i_d",
    far_order => "far_order",
    far_grid => "far_grid",
    near_order => "near_order",
    near_grid => "near_grid",
    series_tol => "series_tol",
    er_range_boxes => "er_range_boxes",
    neutrality_tol => "neutrality_tol",
    sources_path => "sources_path",
    observers_path => "observers_path",
    output_path => "output_path",
    kernel_cache => "kernel_cache",
}

#[derive(Debug, Parser)]
#[command(name = "pim", version, about = "Periodic superposition sums by grid interpolation and FFT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Potential at the observers (observers default to the source points).
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output CSV; overrides output_path. Default stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Partial-sum relative error of the periodic Green's function series.
    Convergence {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        z: f64,
        /// Number of series shells after the leading term.
        #[arg(long, default_value_t = 30)]
        shells: usize,
        /// Tolerance of the reference evaluation.
        #[arg(long, default_value_t = 1e-15)]
        reference_tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fast path against the direct sum over a sweep of far-zone settings.
    ErrorStudy {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build and evaluation times against the same cloud without periodicity.
    Bench {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',', default_value = "10000,20000,40000,80000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sources CSV for two coaxial charged shells along x.
    GenCoax {
        #[command(flatten)]
        coax: CoaxArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,3,6")]
    pub orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub grids: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub ids: Vec<usize>,
    /// Random neutral sources, used when no sources_path is given.
    #[arg(long, default_value_t = 7000)]
    pub sources: usize,
    /// Random observers, used when no observers_path is given.
    #[arg(long, default_value_t = 189)]
    pub observers: usize,
    #[arg(long, default_value_t = 41)]
    pub seed: u64,
    /// Largest source count accepted for the direct reference.
    #[arg(long, default_value_t = 20000)]
    pub max_sources: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CoaxArgs {
    #[arg(long, default_value_t = 1.0)]
    pub inner_radius: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub inner_density: f64,
    #[arg(long, default_value_t = 2.0)]
    pub outer_radius: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub outer_density: f64,
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 200)]
    pub inner_angular: usize,
    #[arg(long, default_value_t = 400)]
    pub outer_angular: usize,
    #[arg(long, default_value_t = 50)]
    pub axial: usize,
    /// Also write this many on-axis observers to the given file.
    #[arg(long)]
    pub axis_observers: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    pub axis_count: usize,
}
