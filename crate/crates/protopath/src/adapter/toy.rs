//! A small trainable convnet so the whole pipeline runs offline without
//! external pretrained weights: two conv blocks, a hidden linear layer and a
//! classification head at 32x32 input.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array4};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::dataset::{read_dataset_manifest, DatasetManifest};
use crate::adapter::{ModelHandle, Preprocess};
use crate::error::{Error, Result};
use crate::imageio::load_image_tensor;
use crate::io;
use crate::nn::{
    softmax_cross_entropy, AdamHyper, Block, Conv2d, GradStore, Image, Layer, Linear, MaxPool2d,
    Network, NetworkAdam,
};

pub const TOY_ARCH_ID: &str = "toy-cnn";
pub const TOY_INPUT_SIDE: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Fraction of each class held out for validation.
    pub holdout_frac: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            seed: 7,
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            holdout_frac: 0.2,
        }
    }
}

/// JSON sidecar persisted next to the toy weight file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyMetadata {
    pub arch_id: String,
    pub seed: u64,
    pub accuracy: f64,
    pub class_names: Vec<String>,
    /// Relative paths of the held-out images, so the validation accuracy can
    /// be recomputed later.
    pub holdout_paths: Vec<String>,
    pub dataset_dir: String,
}

fn uniform_init(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let bound = (1.0 / fan_in as f32).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Fixed toy architecture; weights drawn from `seed`.
pub fn build_toy(num_classes: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = |rng: &mut ChaCha8Rng, ic: usize, oc: usize| {
        let fan_in = ic * 9;
        Layer::Conv2d(Conv2d {
            weight: Array4::from_shape_vec(
                (oc, ic, 3, 3),
                uniform_init(rng, fan_in, oc * ic * 9),
            )
            .unwrap(),
            bias: Array1::zeros(oc),
            stride: 1,
            padding: 1,
            has_bias: true,
        })
    };
    let pool = || {
        Layer::MaxPool2d(MaxPool2d {
            kernel: 2,
            stride: 2,
            padding: 0,
            ceil_mode: false,
        })
    };
    let linear = |rng: &mut ChaCha8Rng, inf: usize, outf: usize| {
        Layer::Linear(Linear {
            weight: Array2::from_shape_vec((outf, inf), uniform_init(rng, inf, outf * inf))
                .unwrap(),
            bias: Array1::zeros(outf),
        })
    };
    let flat_dim = 32 * (TOY_INPUT_SIDE / 4) * (TOY_INPUT_SIDE / 4);
    let layers = vec![
        conv(&mut rng, 3, 16),
        Layer::Relu,
        pool(),
        conv(&mut rng, 16, 32),
        Layer::Relu,
        pool(),
        Layer::Flatten,
        linear(&mut rng, flat_dim, 64),
        Layer::Relu,
        linear(&mut rng, 64, num_classes),
    ];
    let names = [
        "conv1", "relu1", "pool1", "conv2", "relu2", "pool2", "flatten", "fc1", "relu3", "fc2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let root = Block::Seq((0..layers.len()).map(Block::Leaf).collect());
    Network {
        layers,
        names,
        root,
    }
}

fn toy_preprocess() -> Preprocess {
    Preprocess {
        mean: vec![0.5; 3],
        std: vec![0.5; 3],
    }
}

struct Loaded {
    images: Vec<Image>,
    labels: Vec<usize>,
    paths: Vec<String>,
    manifest: DatasetManifest,
}

fn load_dataset(dir: &Path) -> Result<Loaded> {
    let manifest = read_dataset_manifest(dir)?;
    let shape = (3, TOY_INPUT_SIDE, TOY_INPUT_SIDE);
    let mut images = Vec::with_capacity(manifest.entries.len());
    let mut labels = Vec::with_capacity(manifest.entries.len());
    let mut paths = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        images.push(load_image_tensor(&dir.join(&e.path), shape)?);
        labels.push(e.label);
        paths.push(e.path.clone());
    }
    Ok(Loaded {
        images,
        labels,
        paths,
        manifest,
    })
}

/// Deterministic stratified split: per class, a seeded shuffle, then the tail
/// goes to the holdout set.
fn split_holdout(labels: &[usize], num_classes: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5711);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in 0..num_classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        let n_hold = ((idx.len() as f64 * frac).round() as usize).clamp(1, idx.len().saturating_sub(1).max(1));
        let cut = idx.len() - n_hold;
        train.extend_from_slice(&idx[..cut]);
        holdout.extend_from_slice(&idx[cut..]);
    }
    (train, holdout)
}

fn accuracy_on(net: &Network, pre: &Preprocess, images: &[Image], labels: &[usize], idx: &[usize]) -> f64 {
    let mut correct = 0usize;
    for &i in idx {
        let x = preprocess_with(pre, &images[i]);
        let logits = net.forward(x, false, false).logits;
        let mut best = 0usize;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / idx.len() as f64
}

fn preprocess_with(pre: &Preprocess, image: &Image) -> Image {
    let mut x = image.clone();
    for (ci, mut plane) in x.axis_iter_mut(ndarray::Axis(0)).enumerate() {
        let (m, s) = (pre.mean[ci], pre.std[ci]);
        plane.mapv_inplace(|v| (v - m) / s);
    }
    x
}

/// Trains the toy model on a labeled image directory and persists it as
/// `<out>.ppwt` + `<out>.json`. Deterministic given the seed.
pub fn train_toy_model(dataset_dir: &Path, config: &TrainingConfig, out_base: &Path) -> Result<ModelHandle> {
    let data = load_dataset(dataset_dir)?;
    let num_classes = data.manifest.class_names.len();
    let (train_idx, holdout_idx) =
        split_holdout(&data.labels, num_classes, config.holdout_frac, config.seed);
    if train_idx.is_empty() || holdout_idx.is_empty() {
        return Err(Error::Ingestion(
            "dataset too small to split into train and holdout".into(),
        ));
    }

    let mut net = build_toy(num_classes, config.seed);
    let pre = toy_preprocess();
    let mut opt = NetworkAdam::new(&net, AdamHyper::with_lr(config.learning_rate));
    let mut grads = GradStore::zeros_like(&net);
    let mut order = train_idx.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &i in batch {
                let x = preprocess_with(&pre, &data.images[i]);
                let res = net.forward(x, true, false);
                let (_, mut dlogits) =
                    softmax_cross_entropy(res.logits.as_slice().unwrap(), data.labels[i]);
                let scale = 1.0 / batch.len() as f32;
                for g in dlogits.iter_mut() {
                    *g *= scale;
                }
                net.backward(Array1::from_vec(dlogits), res.tape, Some(&mut grads));
            }
            opt.step(&mut net, &grads);
        }
    }

    let accuracy = accuracy_on(&net, &pre, &data.images, &data.labels, &holdout_idx);
    let metadata = ToyMetadata {
        arch_id: TOY_ARCH_ID.to_string(),
        seed: config.seed,
        accuracy,
        class_names: data.manifest.class_names.clone(),
        holdout_paths: holdout_idx.iter().map(|&i| data.paths[i].clone()).collect(),
        dataset_dir: dataset_dir.display().to_string(),
    };
    let base = strip_model_ext(out_base);
    io::write_named(&base.with_extension("ppwt"), &net.named_parameters())?;
    io::atomic_write(
        &base.with_extension("json"),
        serde_json::to_string_pretty(&metadata)?.as_bytes(),
    )?;
    load_toy_model(&base)
}

fn strip_model_ext(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("ppwt") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

/// Loads a persisted toy model from its base path (or either sidecar file).
pub fn load_toy_model(path: &Path) -> Result<ModelHandle> {
    let base = strip_model_ext(path);
    let meta_path = base.with_extension("json");
    let weight_path = base.with_extension("ppwt");
    let bytes = std::fs::read(&meta_path).map_err(|e| Error::Load {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    let metadata: ToyMetadata = serde_json::from_slice(&bytes).map_err(|e| Error::Load {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    if metadata.arch_id != TOY_ARCH_ID {
        return Err(Error::Load {
            path: meta_path,
            reason: format!("unsupported arch_id '{}'", metadata.arch_id),
        });
    }
    let params = io::read_named(&weight_path).map_err(|e| Error::Load {
        path: weight_path.clone(),
        reason: e.to_string(),
    })?;
    let mut net = build_toy(metadata.class_names.len(), metadata.seed);
    net.load_named_parameters(&params).map_err(|e| Error::Load {
        path: weight_path.clone(),
        reason: e.to_string(),
    })?;
    let weight_hash = io::sha256_file(&weight_path)?;
    let mut handle = ModelHandle::from_network(
        TOY_ARCH_ID,
        net,
        metadata.class_names.len(),
        (3, TOY_INPUT_SIDE, TOY_INPUT_SIDE),
        toy_preprocess(),
        metadata.class_names.clone(),
        weight_hash,
    )?;
    handle.metadata = Some(metadata);
    Ok(handle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::dataset::synthesize_shapes_dataset;

    #[test]
    fn toy_layer_enumeration() {
        let net = build_toy(10, 0);
        // every leaf except the reshape-only flatten
        assert_eq!(
            net.capture_names(),
            vec!["conv1", "relu1", "pool1", "conv2", "relu2", "pool2", "fc1", "relu3", "fc2"]
        );
    }

    #[test]
    fn training_is_deterministic_and_reloads() {
        let data_dir = tempfile::tempdir().unwrap();
        synthesize_shapes_dataset(data_dir.path(), 4, 11).unwrap();
        let out = tempfile::tempdir().unwrap();
        let cfg = TrainingConfig {
            epochs: 2,
            ..Default::default()
        };
        let m1 = train_toy_model(data_dir.path(), &cfg, &out.path().join("a/toy")).unwrap();
        let m2 = train_toy_model(data_dir.path(), &cfg, &out.path().join("b/toy")).unwrap();
        assert_eq!(m1.weight_hash, m2.weight_hash);
        assert_eq!(m1.num_classes, 10);
        let reloaded = load_toy_model(&out.path().join("a/toy.json")).unwrap();
        assert_eq!(reloaded.weight_hash, m1.weight_hash);
        assert_eq!(reloaded.layers.len(), 9);
    }

    #[test]
    fn missing_dataset_is_ingestion_error() {
        let out = tempfile::tempdir().unwrap();
        let missing = out.path().join("absent");
        assert!(matches!(
            train_toy_model(&missing, &TrainingConfig::default(), &out.path().join("toy")),
            Err(Error::Ingestion(_))
        ));
    }
}
