use glam::DVec3;
use utube_core::color::ColormapConfig;
use utube_core::flowmap::{DropoutConfig, DropoutMode, FlowMapModel, ModelConfig, Normalization};
use utube_core::geom::Aabb;
use utube_core::io::{self, MeshDocument, MeshMeta};
use utube_core::tube::{build_tubes_parallel, RadiusConvention, TubeParams};
use utube_core::uq::{SwagPosterior, TrajectoryEnsemble, UqMethod};
use utube_core::vecfield::{build_dataset, sobol_seeds, Integrator, RescaleMode, VectorField};
use utube_core::Error;

fn dataset() -> utube_core::FlowMapDataset {
    let f = VectorField::tornado();
    let seeds = sobol_seeds(Aabb::new([-4.5, -4.5, -9.0], [4.5, 4.5, 9.0]), 16, 1).unwrap();
    build_dataset(
        &f,
        &seeds,
        12,
        0.1,
        RescaleMode::SpatiallyUniform,
        Integrator::Rk4,
    )
    .unwrap()
}

fn ensembles(n_seeds: usize, k: usize, n: usize) -> Vec<TrajectoryEnsemble> {
    (0..n_seeds)
        .map(|i| {
            let seed = DVec3::new(i as f64 * 0.1, -0.2, -0.95);
            let members = (0..k)
                .map(|j| {
                    (0..=n)
                        .map(|t| {
                            let s = t as f64 * 0.01;
                            seed + DVec3::new(
                                s * (j as f64 * 1.3).sin() * 0.3,
                                s * (j as f64 * 0.7).cos() * 0.1,
                                t as f64 * 0.03,
                            ) / 3.0
                        })
                        .collect()
                })
                .collect();
            TrajectoryEnsemble::from_members(seed, 0.035, UqMethod::External, members).unwrap()
        })
        .collect()
}

fn doc() -> MeshDocument {
    let es = ensembles(3, 5, 6);
    let params = TubeParams {
        m: 8,
        ..TubeParams::default()
    };
    let cm = ColormapConfig::default();
    let meshes = build_tubes_parallel(&es, &params, &cm, 1).unwrap();
    let meta = MeshMeta {
        method: UqMethod::External,
        tau: params.tau,
        m: params.m,
        radius_convention: RadiusConvention::Stddev,
        colormap: cm,
        magnitude_ceiling: 1.0,
        n_samples: 5,
        n_steps: 6,
        rng_seed: 0,
        frame: "original".into(),
        generated_at: None,
    };
    MeshDocument::new(meta, &meshes)
}

#[test]
fn dataset_round_trip() {
    let d = dataset();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.utfm");
    io::save_dataset(&d, &p).unwrap();
    let back = io::load_dataset(&p).unwrap();
    assert_eq!(back, d);
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..4], b"UTFM");
    assert_eq!(bytes.len(), 121 + 16 * 12 * 28);
}

#[test]
fn truncated_dataset_names_lengths() {
    let bytes = io::encode_dataset(&dataset()).unwrap();
    let cut = &bytes[..bytes.len() - 5];
    let err = io::decode_dataset(cut).unwrap_err().to_string();
    assert!(err.contains(&format!("expected {}", bytes.len())), "{err}");
    assert!(err.contains(&format!("found {}", cut.len())), "{err}");
    let err = io::decode_dataset(&bytes[..10]).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
}

#[test]
fn magic_and_version_checked() {
    let mut bytes = io::encode_dataset(&dataset()).unwrap();
    bytes[0] = b'X';
    assert!(io::decode_dataset(&bytes)
        .unwrap_err()
        .to_string()
        .contains("magic"));
    let mut bytes = io::encode_dataset(&dataset()).unwrap();
    bytes[4] = 2;
    let err = io::decode_dataset(&bytes).unwrap_err().to_string();
    assert!(err.contains("version 2"), "{err}");
}

#[test]
fn model_round_trip_preserves_outputs() {
    let c =
        ModelConfig::new(2, 3, 16).with_dropout(DropoutConfig::new(DropoutMode::LastLayer, 0.1));
    let m = FlowMapModel::init(c, Normalization::of_dataset(&dataset()), 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.utnn");
    io::save_model(&m, &p).unwrap();
    let back = io::load_model(&p).unwrap();
    assert_eq!(back, m);
    let starts = [[0.1, -0.3, 0.5], [-0.9, 0.9, 0.0], [0.0, 0.0, -1.0]];
    let cycles = [-1.0, 0.2, 1.0];
    let a = m.forward_batch(&starts, &cycles, None);
    let b = back.forward_batch(&starts, &cycles, None);
    assert_eq!(a, b);

    let bytes = std::fs::read(&p).unwrap();
    assert!(io::decode_model(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(io::decode_model(&extra)
        .unwrap_err()
        .to_string()
        .contains("trailing"));
}

#[test]
fn ensemble_json_round_trip_is_exact() {
    let es = ensembles(4, 3, 5);
    let dir = tempfile::tempdir().unwrap();
    for with_means in [false, true] {
        let p = dir.path().join("e.json");
        io::save_ensembles_json(&es, with_means, &p).unwrap();
        let back = utube_core::uq::load_external_ensemble(&p).unwrap();
        assert_eq!(back, es);
    }
}

#[test]
fn ensemble_binary_round_trip_at_f32() {
    let es = ensembles(4, 3, 5);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.uten");
    io::save_ensembles_binary(&es, true, &p).unwrap();
    let back = io::load_ensembles(&p).unwrap();
    for (a, b) in back.iter().zip(&es) {
        for (pa, pb) in a.members.iter().flatten().zip(b.members.iter().flatten()) {
            assert_eq!(pa.as_vec3(), pb.as_vec3());
        }
    }
    let again = io::encode_ensembles(&back, true).unwrap();
    assert_eq!(again, std::fs::read(&p).unwrap());
}

#[test]
fn bad_member_length_is_named() {
    let es = ensembles(2, 3, 4);
    let mut f = io::EnsembleFile::from_ensembles(&es, false).unwrap();
    f.paths[1][2].pop();
    let text = serde_json::to_string(&f).unwrap();
    let err = io::ensembles_from_json(&text).unwrap_err().to_string();
    assert!(err.contains("seed 1 member 2"), "{err}");
}

#[test]
fn posterior_round_trip() {
    let mut p = SwagPosterior::new(4, 2);
    for s in [
        [1.0, 2.0, 3.0, 4.0],
        [0.5, 2.5, 3.0, -1.0],
        [2.0, 0.0, 1.0, 0.0],
    ] {
        p.collect(&s);
    }
    let bytes = io::encode_posterior(&p).unwrap();
    assert_eq!(io::decode_posterior(&bytes).unwrap(), p);
    assert!(io::decode_posterior(&bytes[..bytes.len() - 8]).is_err());
}

#[test]
fn mesh_json_is_canonical() {
    let d = doc();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    io::export_mesh_json(&d, &a).unwrap();
    let back = io::load_mesh_json(&a).unwrap();
    assert_eq!(back, d);
    io::export_mesh_json(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let m0 = &v["meshes"][0];
    let nv = 8 * 6 + 2;
    assert_eq!(m0["vertices"].as_array().unwrap().len(), 3 * nv);
    assert_eq!(m0["colors"].as_array().unwrap().len(), 4 * nv);
    assert!(v["meta"].get("generated_at").is_none());
}

#[test]
fn empty_mesh_document() {
    let mut d = doc();
    d.meshes.clear();
    let text = d.to_json().unwrap();
    assert!(text.contains("\"meshes\":[]"));
    assert_eq!(MeshDocument::from_json(&text).unwrap(), d);
}

#[test]
fn obj_layout() {
    let d = doc();
    let text = io::obj_string(&d);
    let v_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("v ")).collect();
    assert_eq!(v_lines.len(), 3 * (8 * 6 + 2));
    assert!(v_lines.iter().all(|l| l.split_whitespace().count() == 7));
    let first_face = text.lines().find(|l| l.starts_with("f ")).unwrap();
    assert_eq!(first_face, "f 1/1/1 3/3/3 2/2/2");
    assert_eq!(text.lines().filter(|l| l.starts_with("o ")).count(), 3);
}

/// Minimal OBJ reader: resolves `v/vt/vn` triplets into flat per-object arrays.
struct ObjObject {
    positions: Vec<f32>,
    colors: Vec<f32>,
    normals: Vec<f32>,
    faces: Vec<[(usize, usize, usize); 3]>,
}

fn parse_obj(text: &str) -> Vec<ObjObject> {
    let mut objs: Vec<ObjObject> = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap_or("");
        let nums = |it: std::str::SplitWhitespace| -> Vec<f32> {
            it.map(|t| t.parse().unwrap()).collect()
        };
        match tag {
            "o" => objs.push(ObjObject {
                positions: vec![],
                colors: vec![],
                normals: vec![],
                faces: vec![],
            }),
            "v" => {
                let n = nums(it);
                let o = objs.last_mut().unwrap();
                o.positions.extend_from_slice(&n[..3]);
                o.colors.extend_from_slice(&n[3..]);
            }
            "vn" => {
                let n = nums(it);
                objs.last_mut().unwrap().normals.extend_from_slice(&n);
            }
            "f" => {
                let corners: Vec<(usize, usize, usize)> = it
                    .map(|c| {
                        let p: Vec<usize> = c.split('/').map(|x| x.parse().unwrap()).collect();
                        (p[0], p[1], p[2])
                    })
                    .collect();
                objs.last_mut()
                    .unwrap()
                    .faces
                    .push([corners[0], corners[1], corners[2]]);
            }
            _ => {}
        }
    }
    objs
}

#[test]
fn obj_reimport_matches_document() {
    let d = doc();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.obj");
    io::export_obj(&d, &p).unwrap();
    let objs = parse_obj(&std::fs::read_to_string(&p).unwrap());
    assert_eq!(objs.len(), d.meshes.len());
    let mut base = 1;
    for (obj, rec) in objs.iter().zip(&d.meshes) {
        assert_eq!(obj.positions, rec.vertices);
        assert_eq!(obj.normals, rec.normals);
        let colors: Vec<f32> = rec
            .colors
            .chunks(4)
            .flat_map(|c| [c[0], c[1], c[2]])
            .collect();
        assert_eq!(obj.colors, colors);
        let idx: Vec<u32> = obj
            .faces
            .iter()
            .flatten()
            .map(|&(v, t, n)| {
                assert!(v == t && t == n);
                (v - base) as u32
            })
            .collect();
        assert_eq!(idx, rec.indices);
        base += rec.vertex_count();
    }
}
