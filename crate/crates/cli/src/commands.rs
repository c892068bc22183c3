use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use utube_core::flowmap::{
    train, Adam, DropoutConfig, DropoutMode, FlowMapModel, LrSchedule, ModelConfig, Normalization,
    OptimizerConfig, TrainConfig,
};
use utube_core::geom::Aabb;
use utube_core::io;
use utube_core::tube::{build_tubes_parallel, RadiusConvention, TubeParams};
use utube_core::uq::{random_walk_ensembles, swag_fit, MeanMode, SwagConfig};
use utube_core::vecfield::{
    build_dataset, pseudo_random_seeds, sobol_seeds, uniform_grid_seeds, Integrator, RescaleMode,
    SeedGenerator, VectorField,
};
use utube_core::ColormapConfig;

use crate::cli::*;
use crate::query::{
    run_query, sample_ensembles, QueryColormap, QueryMethod, RunOptions, SeedSpec, TubeQuery,
};
use crate::registry::{Entry, Registry};

fn workers(threads: Option<usize>) -> usize {
    threads
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn generator(g: GeneratorArg) -> SeedGenerator {
    match g {
        GeneratorArg::Sobol => SeedGenerator::Sobol,
        GeneratorArg::UniformGrid => SeedGenerator::UniformGrid,
        GeneratorArg::PseudoRandom => SeedGenerator::PseudoRandom,
    }
}

/// Seeding box and file-cycle spacing used when `gen-data` is not told otherwise.
pub fn field_defaults(field: FieldArg) -> (VectorField, Aabb, f64) {
    match field {
        FieldArg::Synth => (
            VectorField::synth(),
            Aabb::new([-0.5, -0.5, -1.0], [0.5, 0.5, -0.9]),
            0.035,
        ),
        FieldArg::Tornado => (
            VectorField::tornado(),
            Aabb::new([-4.0, -4.0, -9.5], [4.0, 4.0, -8.0]),
            0.1,
        ),
    }
}

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let (field, default_box, default_delta) = field_defaults(a.field);
    let bounds = a.seed_box.unwrap_or(default_box);
    let seeds = match a.generator {
        GeneratorArg::Sobol => sobol_seeds(bounds, a.seeds, a.skip)?,
        GeneratorArg::UniformGrid => uniform_grid_seeds(bounds, a.seeds)?,
        GeneratorArg::PseudoRandom => pseudo_random_seeds(bounds, a.seeds, a.rng_seed)?,
    };
    let rescale = match a.rescale {
        RescaleArg::BoundingBox => RescaleMode::BoundingBox,
        RescaleArg::SpatiallyUniform => RescaleMode::SpatiallyUniform,
    };
    let d = build_dataset(
        &field,
        &seeds,
        a.cycles,
        a.delta.unwrap_or(default_delta),
        rescale,
        Integrator::Rk4,
    )?;
    io::save_dataset(&d, &a.out)?;
    let invalid = d.len() - d.valid_indices().len();
    eprintln!(
        "wrote {} ({} seeds x {} cycles, {invalid} samples outside the domain)",
        a.out.display(),
        d.n_seeds,
        d.n_cycles
    );
    Ok(())
}

pub fn model_config(a: &TrainArgs) -> ModelConfig {
    let mut c = match a.preset {
        PresetArg::Desk => ModelConfig::desk(),
        PresetArg::Reference => ModelConfig::reference(),
    };
    if let Some(v) = a.latent {
        c.latent_dim = v;
    }
    if let Some(v) = a.encoder_layers {
        c.encoder_layers = v;
    }
    if let Some(v) = a.decoder_layers {
        c.decoder_layers = v;
    }
    if let Some(v) = a.encoder_width {
        c.encoder_width = v;
    }
    if let Some(v) = a.decoder_width {
        c.decoder_width = v;
    }
    if let Some(v) = a.omega0 {
        c.omega0 = v;
    }
    let mode = match a.dropout {
        DropoutArg::None => DropoutMode::None,
        DropoutArg::AllLayers => DropoutMode::AllLayers,
        DropoutArg::LastLayer => DropoutMode::LastLayer,
    };
    c.with_dropout(DropoutConfig::new(mode, a.dropout_rate))
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    if a.members == 0 {
        bail!("--members must be at least 1");
    }
    if a.swag && a.members > 1 {
        bail!("--swag needs a single model; drop --members");
    }
    let data = io::load_dataset(&a.data)?;
    let eval = a.eval.as_ref().map(io::load_dataset).transpose()?;
    let config = model_config(a);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(a.threads))
        .build()?;
    if a.members > 1 {
        std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    }
    for k in 0..a.members {
        let seed = a.seed + k as u64;
        let tc = TrainConfig {
            iters: a.iters,
            batch_size: a.batch,
            optimizer: OptimizerConfig::Adam(Adam {
                lr: a.lr,
                ..Adam::default()
            }),
            schedule: LrSchedule::Cosine {
                final_fraction: a.final_lr_fraction,
            },
            rng_seed: seed,
            ..TrainConfig::default()
        };
        let mut model = FlowMapModel::init(config, Normalization::of_dataset(&data), seed)?;
        let report = pool.install(|| train(&mut model, &data, &tc, eval.as_ref()))?;
        let path = if a.members > 1 {
            a.out.join(format!("member-{k:03}.utnn"))
        } else {
            a.out.clone()
        };
        io::save_model(&model, &path)?;
        println!("{}", serde_json::to_string(&report)?);
        if a.swag {
            let sc = SwagConfig {
                swag_lr: a.swag_lr,
                n_swag_samples: a.swag_samples,
                rank: a.swag_rank,
                sgd_weight_decay: a.swag_weight_decay,
                sgd_momentum: a.swag_momentum,
                batch_size: a.swag_batch,
            };
            let post = pool.install(|| swag_fit(&model, &data, &sc, seed))?;
            let p = path.with_extension("utsw");
            io::save_posterior(&post, &p)?;
            eprintln!("wrote {}", p.display());
        }
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn uq_cmd(a: &UqArgs) -> Result<()> {
    let method = match a.method {
        MethodArg::Ensemble => QueryMethod::Ensemble,
        MethodArg::Dropout => QueryMethod::Dropout,
        MethodArg::Swag => QueryMethod::Swag,
    };
    let mut reg = Registry::new();
    reg.insert("model", Entry::from_path(&a.model)?);
    let q = TubeQuery {
        seeds: Some(SeedSpec::Generated {
            bounds: a.seeds.seed_box,
            count: a.seeds.count,
            generator: generator(a.seeds.generator),
        }),
        method,
        model: "model".into(),
        n_samples: a.samples,
        n_steps: a.steps,
        tau: 4.0,
        m: 32,
        radius_convention: RadiusConvention::Stddev,
        colormap: QueryColormap::default(),
        rng_seed: a.rng_seed,
        mean: match a.mean {
            MeanArg::Base => MeanMode::Base,
            MeanArg::MemberAverage => MeanMode::MemberAverage,
        },
        swag_scale: a.swag_scale,
    };
    let es = sample_ensembles(&reg, &q, workers(a.threads))?;
    if a.out.extension().is_some_and(|e| e == "uten") {
        io::save_ensembles_binary(&es, true, &a.out)?;
    } else {
        io::save_ensembles_json(&es, true, &a.out)?;
    }
    eprintln!(
        "wrote {} ({} seeds x {} members)",
        a.out.display(),
        es.len(),
        a.samples
    );
    Ok(())
}

fn read_query(path: &Path) -> Result<TubeQuery> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing query {}", path.display()))
}

pub fn tube_cmd(a: &TubeArgs) -> Result<()> {
    let (registry, q) = if let Some(qp) = &a.query {
        let dir = a.models.as_ref().expect("clap requires --models");
        (Registry::load_dir(dir)?, read_query(qp)?)
    } else {
        let path = a.ensemble.as_ref().expect("clap requires --ensemble");
        let entry = Entry::from_path(path)?;
        let Some(stored) = entry.trajectories.as_ref().and_then(|t| t.first()) else {
            bail!("{} holds no trajectory ensembles", path.display());
        };
        let q = TubeQuery {
            seeds: None,
            method: QueryMethod::External,
            model: "ensemble".into(),
            n_samples: a.samples.unwrap_or(stored.member_count()),
            n_steps: a.steps.unwrap_or(stored.n_steps()),
            tau: a.tau,
            m: a.m,
            radius_convention: match a.radius {
                RadiusArg::Stddev => RadiusConvention::Stddev,
                RadiusArg::Eigenvalue => RadiusConvention::Eigenvalue,
            },
            colormap: QueryColormap {
                palette: a.palette.clone(),
                suppress_color: a.suppress_color.clone(),
                percentile: a.percentile,
                ceiling: a.ceiling,
            },
            rng_seed: 0,
            mean: MeanMode::Base,
            swag_scale: 1.0,
        };
        let mut reg = Registry::new();
        reg.insert("ensemble", entry);
        (reg, q)
    };
    let options = RunOptions {
        workers: workers(a.threads),
        allow_palette_files: true,
    };
    let out = run_query(&registry, &q, options)?;
    io::export_mesh_json(&out.document, &a.out)?;
    if let Some(obj) = &a.obj {
        io::export_obj(&out.document, obj)?;
    }
    eprintln!(
        "wrote {} ({} tubes)",
        a.out.display(),
        out.document.meshes.len()
    );
    Ok(())
}

pub fn serve_cmd(a: &ServeArgs) -> Result<()> {
    let registry = Registry::load_dir(&a.models)?;
    eprintln!(
        "loaded {} registry entries from {}",
        registry.len(),
        a.models.display()
    );
    let config = crate::service::ServiceConfig {
        threads: workers(a.threads),
        max_concurrent: a.max_concurrent.max(1),
    };
    let addr = std::net::SocketAddr::new(a.bind, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::service::serve(addr, registry, config))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub seeds: usize,
    pub steps: usize,
    pub samples: usize,
    pub threads: usize,
    pub ms: f64,
}

/// Median wall time of meshing `seeds` synthetic ensembles with `threads` workers.
pub fn bench_meshing(
    seeds: usize,
    steps: usize,
    samples: usize,
    params: &TubeParams,
    threads: usize,
    repeat: usize,
    rng_seed: u64,
) -> Result<BenchRow> {
    let ensembles = random_walk_ensembles(seeds, steps, samples, rng_seed);
    let cm = ColormapConfig::default();
    let mut times = Vec::with_capacity(repeat.max(1));
    for _ in 0..repeat.max(1) {
        let t = Instant::now();
        let meshes = build_tubes_parallel(&ensembles, params, &cm, threads)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(meshes);
    }
    times.sort_by(f64::total_cmp);
    Ok(BenchRow {
        seeds,
        steps,
        samples,
        threads,
        ms: times[times.len() / 2],
    })
}

pub fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let params = TubeParams {
        tau: a.tau,
        m: a.m,
        ..TubeParams::default()
    };
    params.validate()?;
    let threads = if a.threads.is_empty() {
        vec![workers(None)]
    } else {
        a.threads.clone()
    };
    println!(
        "{:>6} {:>6} {:>8} {:>8} {:>10}",
        "seeds", "steps", "samples", "threads", "ms"
    );
    for &t in &threads {
        if t == 0 {
            bail!("--threads entries must be positive");
        }
        let r = bench_meshing(
            a.seeds, a.steps, a.samples, &params, t, a.repeat, a.rng_seed,
        )?;
        println!(
            "{:>6} {:>6} {:>8} {:>8} {:>10.1}",
            r.seeds, r.steps, r.samples, r.threads, r.ms
        );
    }
    Ok(())
}
