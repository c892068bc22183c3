use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use utube_core::geom::Aabb;

#[derive(Debug, Parser)]
#[command(
    name = "utube",
    version,
    about = "Uncertainty tubes for neural flow-map trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace pathlines through an analytic field and write a flow-map dataset (.utfm).
    GenData(GenDataArgs),
    /// Train flow-map models (optionally a deep ensemble and a SWAG posterior).
    Train(TrainArgs),
    /// Sample trajectory ensembles from trained models.
    Uq(UqArgs),
    /// Build colored uncertainty tubes and write a mesh document.
    Tube(TubeArgs),
    /// Serve the query loop over HTTP.
    Serve(ServeArgs),
    /// Time tube meshing on synthetic ensembles.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Synth,
    Tornado,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Sobol,
    UniformGrid,
    PseudoRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RescaleArg {
    BoundingBox,
    SpatiallyUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DropoutArg {
    None,
    AllLayers,
    LastLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ensemble,
    Dropout,
    Swag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeanArg {
    Base,
    MemberAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadiusArg {
    Stddev,
    Eigenvalue,
}

/// Parses `x0,y0,z0,x1,y1,z1`.
pub fn parse_box(s: &str) -> Result<Aabb, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 6 {
        return Err(format!(
            "expected 6 comma-separated numbers, got {}",
            v.len()
        ));
    }
    let b = Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]]);
    b.validate().map_err(|e| e.to_string())?;
    Ok(b)
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "synth")]
    pub field: FieldArg,
    /// Number of seeds.
    #[arg(long, default_value_t = 4096)]
    pub seeds: usize,
    /// Seeding box `x0,y0,z0,x1,y1,z1` in domain units [default: per field].
    #[arg(long = "box", value_parser = parse_box)]
    pub seed_box: Option<Aabb>,
    #[arg(long, value_enum, default_value = "sobol")]
    pub generator: GeneratorArg,
    /// Sobol indices skipped before the first seed.
    #[arg(long, default_value_t = 1)]
    pub skip: u32,
    /// Saved file cycles per seed, including the start.
    #[arg(long, default_value_t = 50)]
    pub cycles: usize,
    /// Time between file cycles [default: per field].
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value = "bounding-box")]
    pub rescale: RescaleArg,
    /// Seed for the pseudo-random generator.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset (.utfm).
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out dataset for the reported error [default: the training set].
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Output model file, or directory of members when `--members` exceeds 1.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: PresetArg,
    #[arg(long)]
    pub encoder_layers: Option<usize>,
    #[arg(long)]
    pub decoder_layers: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub encoder_width: Option<usize>,
    #[arg(long)]
    pub decoder_width: Option<usize>,
    /// Sine frequency factor.
    #[arg(long)]
    pub omega0: Option<f32>,
    #[arg(long, value_enum, default_value = "none")]
    pub dropout: DropoutArg,
    #[arg(long, default_value_t = 0.001)]
    pub dropout_rate: f32,
    #[arg(long, default_value_t = 4000)]
    pub iters: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// Adam base learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f32,
    /// Cosine schedule floor as a fraction of `--lr`.
    #[arg(long, default_value_t = 0.05)]
    pub final_lr_fraction: f32,
    /// Seed for initialization and batching; member k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independently initialized models to train.
    #[arg(long, default_value_t = 1)]
    pub members: usize,
    /// Also fit a SWAG posterior and write it next to the model as .utsw.
    #[arg(long)]
    pub swag: bool,
    #[arg(long, default_value_t = 1000)]
    pub swag_samples: usize,
    #[arg(long, default_value_t = 100)]
    pub swag_rank: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub swag_lr: f32,
    #[arg(long, default_value_t = 0.9)]
    pub swag_momentum: f32,
    #[arg(long, default_value_t = 1e-8)]
    pub swag_weight_decay: f32,
    #[arg(long, default_value_t = 256)]
    pub swag_batch: usize,
    /// Rayon workers [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Seeding box `x0,y0,z0,x1,y1,z1` in domain units.
    #[arg(long = "box", value_parser = parse_box)]
    pub seed_box: Aabb,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    #[arg(long, value_enum, default_value = "sobol")]
    pub generator: GeneratorArg,
}

#[derive(Debug, Args)]
pub struct UqArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Model file (.utnn, with a sibling .utsw for SWAG) or ensemble member directory.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Ensemble members K.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Steps after the seed; N+1 positions per member.
    #[arg(long, default_value_t = 49)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long, value_enum, default_value = "base")]
    pub mean: MeanArg,
    #[arg(long, default_value_t = 1.0)]
    pub swag_scale: f64,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output ensemble file; `.uten` writes binary, anything else JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TubeArgs {
    /// Stored trajectory ensembles (.json or .uten).
    #[arg(long, required_unless_present = "query", conflicts_with = "query")]
    pub ensemble: Option<PathBuf>,
    /// TubeQuery JSON file, resolved against `--models`.
    #[arg(long, requires = "models")]
    pub query: Option<PathBuf>,
    /// Model directory for `--query`.
    #[arg(long, env = "UT_MODELS")]
    pub models: Option<PathBuf>,
    #[arg(long, default_value_t = 4.0, conflicts_with = "query")]
    pub tau: f64,
    #[arg(long, default_value_t = 32, conflicts_with = "query")]
    pub m: usize,
    #[arg(long, value_enum, default_value = "stddev", conflicts_with = "query")]
    pub radius: RadiusArg,
    /// Palette name (viridis, grays) or JSON file of RGB stops.
    #[arg(long, default_value = "viridis", conflicts_with = "query")]
    pub palette: String,
    /// Magnitude percentile mapped to full saturation.
    #[arg(long, default_value_t = 98.0, conflicts_with = "query")]
    pub percentile: f64,
    /// Fixed magnitude ceiling instead of the percentile.
    #[arg(long, conflicts_with = "query")]
    pub ceiling: Option<f64>,
    #[arg(long, default_value = "#d3d3d3", conflicts_with = "query")]
    pub suppress_color: String,
    /// Use only the first K stored members [default: all].
    #[arg(long, conflicts_with = "query")]
    pub samples: Option<usize>,
    /// Use only the first N stored steps [default: all].
    #[arg(long, conflicts_with = "query")]
    pub steps: Option<usize>,
    #[arg(long, env = "UT_THREADS")]
    pub threads: Option<usize>,
    /// Mesh document (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a vertex-colored OBJ.
    #[arg(long)]
    pub obj: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "UT_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "UT_BIND", default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
    /// Directory of models, posteriors and stored ensembles.
    #[arg(long, env = "UT_MODELS")]
    pub models: PathBuf,
    /// Rayon workers per query [default: all cores].
    #[arg(long, env = "UT_THREADS")]
    pub threads: Option<usize>,
    /// Queries computed concurrently.
    #[arg(long, env = "UT_MAX_CONCURRENT", default_value_t = 2)]
    pub max_concurrent: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 300)]
    pub seeds: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 4.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    /// Worker counts to time, comma separated [default: all cores].
    #[arg(long, value_delimiter = ',')]
    pub threads: Vec<usize>,
    /// Timed runs per worker count; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}
