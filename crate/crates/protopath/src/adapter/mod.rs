//! Wraps a differentiable classifier behind a uniform handle: prediction,
//! ordered layer enumeration, and per-layer activation capture.

pub mod dataset;
mod googlenet;
mod resnet;
pub mod toy;

use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Image, Network};

pub use dataset::{read_dataset_manifest, synthesize_shapes_dataset, DatasetManifest};
pub use toy::{train_toy_model, ToyMetadata, TrainingConfig};

/// Per-channel normalization applied before every forward pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocess {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Preprocess {
    fn validate(&self, channels: usize) -> Result<()> {
        if self.mean.len() != channels || self.std.len() != channels {
            return Err(Error::Config(format!(
                "preprocess mean/std must have {channels} entries"
            )));
        }
        if self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("preprocess std entries must be positive".into()));
        }
        Ok(())
    }
}

/// A position in the model's fixed layer enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerId {
    pub index: usize,
    pub name: String,
}

/// Per-layer flattened activations for one input.
#[derive(Debug, Clone)]
pub struct ActivationRecord {
    pub entries: Vec<Vec<f32>>,
    pub class_label: Option<usize>,
}

impl ActivationRecord {
    pub fn layer_vectors(&self) -> &[Vec<f32>] {
        &self.entries
    }
}

/// A wrapped classifier. Read-only after construction; forward passes keep all
/// mutable state on a per-call tape, so concurrent inference is safe.
pub struct ModelHandle {
    pub arch_id: String,
    pub num_classes: usize,
    /// (channels, height, width)
    pub input_shape: (usize, usize, usize),
    pub preprocess: Preprocess,
    pub layers: Vec<LayerId>,
    pub class_names: Vec<String>,
    /// SHA-256 of the weight file backing this handle.
    pub weight_hash: String,
    pub metadata: Option<ToyMetadata>,
    pub(crate) net: Network,
}

impl ModelHandle {
    pub(crate) fn from_network(
        arch_id: &str,
        net: Network,
        num_classes: usize,
        input_shape: (usize, usize, usize),
        preprocess: Preprocess,
        class_names: Vec<String>,
        weight_hash: String,
    ) -> Result<Self> {
        preprocess.validate(input_shape.0)?;
        let layers: Vec<LayerId> = net
            .capture_names()
            .into_iter()
            .enumerate()
            .map(|(index, name)| LayerId { index, name })
            .collect();
        if layers.is_empty() {
            return Err(Error::Config("model has no enumerable layers".into()));
        }
        Ok(ModelHandle {
            arch_id: arch_id.to_string(),
            num_classes,
            input_shape,
            preprocess,
            layers,
            class_names,
            weight_hash,
            metadata: None,
            net,
        })
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        if image.dim() != self.input_shape {
            return Err(Error::Input(format!(
                "image shape {:?} does not match model input {:?}",
                image.dim(),
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Normalization shift applied inside every forward operation.
    pub fn apply_preprocess(&self, image: &Image) -> Image {
        let mut x = image.clone();
        for (ci, mut plane) in x.axis_iter_mut(ndarray::Axis(0)).enumerate() {
            let (m, s) = (self.preprocess.mean[ci], self.preprocess.std[ci]);
            plane.mapv_inplace(|v| (v - m) / s);
        }
        x
    }

    /// One deterministic inference-mode forward pass capturing every layer.
    pub fn forward_with_activations(&self, image: &Image) -> Result<(Array1<f32>, ActivationRecord)> {
        self.check_image(image)?;
        let res = self.net.forward(self.apply_preprocess(image), false, true);
        debug_assert_eq!(res.captured.len(), self.layers.len());
        Ok((
            res.logits,
            ActivationRecord {
                entries: res.captured,
                class_label: None,
            },
        ))
    }

    /// Logits only, skipping activation capture.
    pub fn forward_logits(&self, image: &Image) -> Result<Array1<f32>> {
        self.check_image(image)?;
        Ok(self.net.forward(self.apply_preprocess(image), false, false).logits)
    }

    /// Argmax prediction (lowest index wins ties) with softmax probabilities.
    pub fn predict(&self, image: &Image) -> Result<(usize, Vec<f32>)> {
        let logits = self.forward_logits(image)?;
        let probs = crate::nn::softmax(logits.as_slice().unwrap());
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((best, probs))
    }

    pub(crate) fn net(&self) -> &Network {
        &self.net
    }
}

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// Directory holding pretrained weight files, from the
/// `PROTOPATH_WEIGHTS_DIR` environment variable.
pub fn default_weights_dir() -> Option<PathBuf> {
    std::env::var_os("PROTOPATH_WEIGHTS_DIR").map(PathBuf::from)
}

/// Loads a model from a spec string: a built-in architecture
/// (`resnet18-imagenet`, `inceptionv1-imagenet`) or a path to a saved toy
/// model. Pretrained weights are resolved from `PROTOPATH_WEIGHTS_DIR`.
pub fn load_model(spec: &str) -> Result<ModelHandle> {
    load_model_with(spec, default_weights_dir().as_deref())
}

/// As [`load_model`], with an explicit weights directory.
pub fn load_model_with(spec: &str, weights_dir: Option<&Path>) -> Result<ModelHandle> {
    match spec {
        "resnet18-imagenet" => {
            load_pretrained(spec, resnet::build_resnet18(), weights_dir)
        }
        "inceptionv1-imagenet" => {
            load_pretrained(spec, googlenet::build_googlenet(), weights_dir)
        }
        "toy-cnn" => Err(Error::Config(
            "'toy-cnn' must be trained first; pass the path of a trained toy model \
             (see the train-toy command)"
                .into(),
        )),
        other => {
            let path = Path::new(other);
            // a trained toy model may be referenced by its extensionless base
            if path.exists() || path.with_extension("json").exists() {
                toy::load_toy_model(path)
            } else {
                Err(Error::UnknownSpec(other.to_string()))
            }
        }
    }
}

fn load_pretrained(spec: &str, mut net: Network, weights_dir: Option<&Path>) -> Result<ModelHandle> {
    let dir = weights_dir.ok_or_else(|| {
        Error::Config(format!(
            "loading '{spec}' requires a weights directory (set PROTOPATH_WEIGHTS_DIR \
             or pass --weights-dir)"
        ))
    })?;
    let path = dir.join(format!("{spec}.ppwt"));
    if !path.is_file() {
        return Err(Error::Load {
            path,
            reason: "weight file not found (export it with tools/export_weights.py)".into(),
        });
    }
    let params = crate::io::read_named(&path).map_err(|e| Error::Load {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    net.load_named_parameters(&params).map_err(|e| Error::Load {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let weight_hash = crate::io::sha256_file(&path)?;
    let preprocess = match spec {
        // torchvision's GoogLeNet re-normalizes internally (transform_input);
        // composed with the standard ImageNet shift that is exactly (x-0.5)/0.5
        "inceptionv1-imagenet" => Preprocess {
            mean: vec![0.5; 3],
            std: vec![0.5; 3],
        },
        _ => Preprocess {
            mean: IMAGENET_MEAN.to_vec(),
            std: IMAGENET_STD.to_vec(),
        },
    };
    ModelHandle::from_network(
        spec,
        net,
        1000,
        (3, 224, 224),
        preprocess,
        (0..1000).map(|i| format!("class_{i}")).collect(),
        weight_hash,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_spec_is_config_or_unknown_error() {
        assert!(matches!(load_model("no-such-arch"), Err(Error::UnknownSpec(_))));
        assert!(matches!(load_model("toy-cnn"), Err(Error::Config(_))));
    }

    #[test]
    fn pretrained_without_weights_dir_is_config_error() {
        assert!(matches!(
            load_model_with("resnet18-imagenet", None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pretrained_with_missing_file_is_load_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_model_with("resnet18-imagenet", Some(dir.path())),
            Err(Error::Load { .. })
        ));
    }

    #[test]
    fn resnet18_layer_enumeration_is_deterministic() {
        let a = resnet::build_resnet18().capture_names();
        let b = resnet::build_resnet18().capture_names();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        assert_eq!(a[0], "conv1");
        assert_eq!(a[a.len() - 1], "fc");
    }

    #[test]
    fn googlenet_layer_enumeration_is_deterministic() {
        let a = googlenet::build_googlenet().capture_names();
        let b = googlenet::build_googlenet().capture_names();
        assert_eq!(a, b);
        assert_eq!(a[a.len() - 1], "fc");
        // unique names
        let set: std::collections::HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), a.len());
    }
}
