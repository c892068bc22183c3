#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use utube_core::flowmap::{DropoutConfig, DropoutMode, FlowMapModel, ModelConfig, Normalization};
use utube_core::io;
use utube_core::uq::{random_walk_ensembles, SwagPosterior};

fn small_config() -> ModelConfig {
    let mut c = ModelConfig::new(2, 2, 16);
    c.encoder_width = 12;
    c.decoder_width = 16;
    c
}

fn model(config: ModelConfig, seed: u64) -> FlowMapModel {
    FlowMapModel::init(config, Normalization::identity(50, 0.035), seed).unwrap()
}

/// Untrained models, a posterior and stored trajectories:
/// `de/` (8 members), `mc.utnn` (dropout), `sw.utnn` + `sw.utsw`, `walk.json`.
pub fn write_fixture(dir: &Path) {
    std::fs::create_dir_all(dir.join("de")).unwrap();
    for k in 0..8 {
        io::save_model(
            &model(small_config(), 100 + k),
            dir.join(format!("de/member-{k:03}.utnn")),
        )
        .unwrap();
    }
    let mc = small_config().with_dropout(DropoutConfig::new(DropoutMode::AllLayers, 0.05));
    io::save_model(&model(mc, 7), dir.join("mc.utnn")).unwrap();

    let sw = model(small_config(), 9);
    let theta: Vec<f64> = sw.network.flatten().iter().map(|&p| p as f64).collect();
    let mut post = SwagPosterior::new(theta.len(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..8 {
        let snap: Vec<f64> = theta
            .iter()
            .map(|t| t + 1e-3 * rng.random_range(-1.0..1.0))
            .collect();
        post.collect(&snap);
    }
    io::save_model(&sw, dir.join("sw.utnn")).unwrap();
    io::save_posterior(&post, dir.join("sw.utsw")).unwrap();

    io::save_ensembles_json(
        &random_walk_ensembles(4, 12, 6, 1),
        true,
        dir.join("walk.json"),
    )
    .unwrap();
}

pub fn query(method: &str, model: &str, extra: &str) -> String {
    format!(
        r#"{{"method":"{method}","model":"{model}","n_samples":8,"n_steps":12,"rng_seed":5,
            "seeds":{{"box":{{"min":[-0.3,-0.3,-0.9],"max":[0.3,0.3,-0.8]}},"count":6}}{extra}}}"#
    )
}
