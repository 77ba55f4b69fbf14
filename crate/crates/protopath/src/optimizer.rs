//! Class prototype generation by direct input-space optimization.
//!
//! Two phases: a warm-up that minimizes the variance of the softmax output
//! (driving the image toward a decision-balanced baseline), then class-logit
//! maximization with a high-frequency penalty, where every step sees the
//! image through a freshly sampled random affine transform.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::ModelHandle;
use crate::error::{Error, Result};
use crate::imageio::save_image_tensor;
use crate::nn::{AdamHyper, AdamState, Image, softmax};

/// Default high-frequency penalty weight; pinned by a calibration sweep on
/// the toy model (see `reg_sweep`).
pub const DEFAULT_HF_WEIGHT: f64 = 0.05;

/// Per-step random affine sampling ranges. `None` disables a component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConfig {
    /// Uniform isotropic scale multipliers (low, high).
    pub scale_range: Option<(f32, f32)>,
    /// Rotation sampled uniformly in `±rotation_max_deg`.
    pub rotation_max_deg: Option<f32>,
    /// Translation sampled uniformly in `±frac` of width and height.
    pub translate_frac: Option<(f32, f32)>,
}

impl AffineConfig {
    pub fn identity() -> Self {
        AffineConfig {
            scale_range: None,
            rotation_max_deg: None,
            translate_frac: None,
        }
    }

    /// The best-performing protocol from the affine grid search. Intended
    /// for large natural-image models; on small models its heavy rotations
    /// and shifts can leave the un-transformed image ambiguous.
    pub fn tuned() -> Self {
        AffineConfig {
            scale_range: Some((0.7, 1.3)),
            rotation_max_deg: Some(180.0),
            translate_frac: Some((0.5, 0.5)),
        }
    }

    /// Gentle jitter that keeps the un-transformed image decisive. This is
    /// the library default.
    pub fn mild() -> Self {
        AffineConfig {
            scale_range: Some((0.8, 1.2)),
            rotation_max_deg: Some(30.0),
            translate_frac: Some((0.15, 0.15)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.scale_range {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("bad scale_range ({lo}, {hi})")));
            }
        }
        if let Some(r) = self.rotation_max_deg {
            if !(0.0..=180.0).contains(&r) {
                return Err(Error::Config(format!("rotation_max_deg {r} out of [0, 180]")));
            }
        }
        if let Some((fx, fy)) = self.translate_frac {
            if !(0.0..=1.0).contains(&fx) || !(0.0..=1.0).contains(&fy) {
                return Err(Error::Config(format!("translate_frac ({fx}, {fy}) out of [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f32,
    pub steps: usize,
    pub pv_steps: usize,
    pub hf_weight: f64,
    pub affine: AffineConfig,
    pub seed: u64,
    pub clamp_pixels: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.05,
            steps: 512,
            pv_steps: 128,
            hf_weight: DEFAULT_HF_WEIGHT,
            affine: AffineConfig::mild(),
            seed: 0,
            clamp_pixels: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        // steps == 0 is allowed: it returns the baseline unchanged
        if !(self.hf_weight.is_finite() && self.hf_weight >= 0.0) {
            return Err(Error::Config("hf_weight must be non-negative".into()));
        }
        self.affine.validate()
    }
}

/// Result of one generation run, with per-step `(L_c, L_hf)` history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prototype {
    #[serde(skip)]
    pub image: Image,
    pub class_id: usize,
    pub final_logit: f32,
    pub final_probability: f32,
    pub config: OptimConfig,
    pub loss_history: Vec<(f64, f64)>,
}

/// Population variance of the softmax distribution over classes.
pub fn loss_pv(logits: &[f64]) -> f64 {
    let k = logits.len() as f64;
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mean = 1.0 / k;
    exps.iter().map(|e| (e / z - mean).powi(2)).sum::<f64>() / k
}

/// Analytic gradient of [`loss_pv`]: `dV/dz_j = (2/K) p_j (p_j - Σ p_i²)`.
pub fn loss_pv_grad(logits: &[f64]) -> Vec<f64> {
    let k = logits.len() as f64;
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let s: f64 = probs.iter().map(|p| p * p).sum();
    probs.iter().map(|&p| 2.0 / k * p * (p - s)).collect()
}

fn hf_pair_count(dim: (usize, usize, usize)) -> usize {
    let (c, h, w) = dim;
    c * ((h - 1) * w + h * (w - 1))
}

/// Anisotropic total variation: mean absolute difference over all vertically
/// and horizontally adjacent pixel pairs, across channels.
pub fn loss_hf(image: &Image) -> f64 {
    let (c, h, w) = image.dim();
    let mut sum = 0.0f64;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let v = image[(ch, i, j)] as f64;
                if i + 1 < h {
                    sum += (v - image[(ch, i + 1, j)] as f64).abs();
                }
                if j + 1 < w {
                    sum += (v - image[(ch, i, j + 1)] as f64).abs();
                }
            }
        }
    }
    sum / hf_pair_count(image.dim()) as f64
}

/// Subgradient of [`loss_hf`]: `±sign(diff)/N` per pair endpoint.
pub fn loss_hf_grad(image: &Image) -> Array3<f32> {
    let (c, h, w) = image.dim();
    let n = hf_pair_count(image.dim()) as f64;
    let mut g = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let v = image[(ch, i, j)] as f64;
                if i + 1 < h {
                    let s = (v - image[(ch, i + 1, j)] as f64).signum_or_zero();
                    g[(ch, i, j)] += s / n;
                    g[(ch, i + 1, j)] -= s / n;
                }
                if j + 1 < w {
                    let s = (v - image[(ch, i, j + 1)] as f64).signum_or_zero();
                    g[(ch, i, j)] += s / n;
                    g[(ch, i, j + 1)] -= s / n;
                }
            }
        }
    }
    g.mapv(|v| v as f32)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Negative logit of the target class.
pub fn loss_class(logits: &Array1<f32>, c: usize) -> Result<f64> {
    if c >= logits.len() {
        return Err(Error::Input(format!(
            "class {c} out of range for {} logits",
            logits.len()
        )));
    }
    Ok(-(logits[c] as f64))
}

/// One concrete sampled transform: scale, then rotate, then translate, all
/// about the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSample {
    pub scale: f32,
    pub rotation_deg: f32,
    /// Translation in pixels (x = columns, y = rows).
    pub translate: (f32, f32),
}

impl AffineSample {
    pub fn identity() -> Self {
        AffineSample {
            scale: 1.0,
            rotation_deg: 0.0,
            translate: (0.0, 0.0),
        }
    }
}

pub fn sample_affine(cfg: &AffineConfig, rng: &mut ChaCha8Rng, dim: (usize, usize)) -> AffineSample {
    let (h, w) = dim;
    let scale = match cfg.scale_range {
        Some((lo, hi)) if lo < hi => rng.gen_range(lo..hi),
        Some((lo, _)) => lo,
        None => 1.0,
    };
    let rotation_deg = match cfg.rotation_max_deg {
        Some(r) if r > 0.0 => rng.gen_range(-r..r),
        _ => 0.0,
    };
    let translate = match cfg.translate_frac {
        Some((fx, fy)) => {
            let mx = fx * w as f32;
            let my = fy * h as f32;
            (
                if mx > 0.0 { rng.gen_range(-mx..mx) } else { 0.0 },
                if my > 0.0 { rng.gen_range(-my..my) } else { 0.0 },
            )
        }
        None => (0.0, 0.0),
    };
    AffineSample {
        scale,
        rotation_deg,
        translate,
    }
}

/// Bilinear-sampling plan for one transform: for each output pixel, up to
/// four (flat spatial source index, weight) taps shared across channels.
pub struct AffineTape {
    taps: Vec<[(usize, f32); 4]>,
    dim: (usize, usize, usize),
}

const NO_TAP: (usize, f32) = (usize::MAX, 0.0);

/// Applies `sample` with bilinear interpolation and zero padding, returning
/// the transformed image and the tap plan for the backward pass. Output
/// shape equals input shape.
pub fn apply_affine_with_tape(image: &Image, sample: &AffineSample) -> (Image, AffineTape) {
    let (c, h, w) = image.dim();
    let cx = (w as f32 - 1.0) / 2.0;
    let cy = (h as f32 - 1.0) / 2.0;
    let theta = sample.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let inv_scale = 1.0 / sample.scale;
    let (tx, ty) = sample.translate;

    let mut taps = vec![[NO_TAP; 4]; h * w];
    let mut out = Array3::<f32>::zeros((c, h, w));
    for i in 0..h {
        for j in 0..w {
            // invert translate, rotate, scale to find the source point
            let dx = j as f32 - cx - tx;
            let dy = i as f32 - cy - ty;
            let sx = (cos * dx + sin * dy) * inv_scale + cx;
            let sy = (-sin * dx + cos * dy) * inv_scale + cy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let mut tap = [NO_TAP; 4];
            let mut k = 0;
            for (oy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                for (ox, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    let yy = y0 as i64 + oy;
                    let xx = x0 as i64 + ox;
                    let weight = wy * wx;
                    if weight == 0.0 || yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
                        continue;
                    }
                    tap[k] = (yy as usize * w + xx as usize, weight);
                    k += 1;
                }
            }
            taps[i * w + j] = tap;
            for ch in 0..c {
                let mut v = 0.0;
                for &(idx, weight) in &tap {
                    if idx != usize::MAX {
                        v += image[(ch, idx / w, idx % w)] * weight;
                    }
                }
                out[(ch, i, j)] = v;
            }
        }
    }
    (out, AffineTape { taps, dim: (c, h, w) })
}

pub fn apply_affine(image: &Image, sample: &AffineSample) -> Image {
    apply_affine_with_tape(image, sample).0
}

/// Scatters output-pixel gradients back onto the source pixels (the
/// transform is linear in the input, so this is an exact transpose).
pub fn affine_backward(tape: &AffineTape, d_out: &Image) -> Image {
    let (c, h, w) = tape.dim;
    assert_eq!(d_out.dim(), tape.dim);
    let mut d_in = Array3::<f32>::zeros((c, h, w));
    for i in 0..h {
        for j in 0..w {
            let tap = &tape.taps[i * w + j];
            for ch in 0..c {
                let g = d_out[(ch, i, j)];
                if g == 0.0 {
                    continue;
                }
                for &(idx, weight) in tap {
                    if idx != usize::MAX {
                        d_in[(ch, idx / w, idx % w)] += g * weight;
                    }
                }
            }
        }
    }
    d_in
}

/// Samples one transform and applies it. The `rng_state` makes reruns exact.
pub fn random_affine(image: &Image, cfg: &AffineConfig, rng: &mut ChaCha8Rng) -> Image {
    let (_, h, w) = image.dim();
    apply_affine(image, &sample_affine(cfg, rng, (h, w)))
}

/// Chain rule through `(x - mean) / std`.
fn preprocess_backward(model: &ModelHandle, mut d_pre: Image) -> Image {
    for (ci, mut plane) in d_pre.axis_iter_mut(ndarray::Axis(0)).enumerate() {
        let s = model.preprocess.std[ci];
        plane.mapv_inplace(|v| v / s);
    }
    d_pre
}

fn clamp_unit(image: &mut Image) {
    image.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

/// Random unit-interval init followed by `pv_steps` Adam steps minimizing the
/// softmax-variance loss, producing the decision-balanced baseline. No affine
/// transforms are applied in this phase.
pub fn init_baseline(model: &ModelHandle, config: &OptimConfig) -> Result<Image> {
    config.validate()?;
    let shape = model.input_shape;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut image = Array3::from_shape_fn(shape, |_| rng.gen::<f32>());
    let hyper = AdamHyper::with_lr(config.learning_rate);
    let mut adam = AdamState::new(image.len());
    for t in 1..=config.pv_steps as u64 {
        let pre = model.apply_preprocess(&image);
        let res = model.net().forward(pre, true, false);
        let logits64: Vec<f64> = res.logits.iter().map(|&v| v as f64).collect();
        let dlogits: Array1<f32> = loss_pv_grad(&logits64).iter().map(|&g| g as f32).collect();
        let d_pre = model.net().backward(dlogits, res.tape, None);
        let grad = preprocess_backward(model, d_pre);
        adam.step(&hyper, t, image.as_slice_mut().unwrap(), grad.as_slice().unwrap());
        if config.clamp_pixels {
            clamp_unit(&mut image);
        }
    }
    Ok(image)
}

/// Full generation run. Each step samples a fresh affine, pushes the
/// transformed image through the model, and takes one Adam step on the
/// un-transformed pixels; the high-frequency penalty is evaluated on the
/// un-transformed image. Final statistics come from a plain forward pass.
pub fn generate_prototype(model: &ModelHandle, c: usize, config: &OptimConfig) -> Result<Prototype> {
    config.validate()?;
    if c >= model.num_classes {
        return Err(Error::Input(format!(
            "class {c} out of range for {} classes",
            model.num_classes
        )));
    }
    let mut image = init_baseline(model, config)?;
    let (_, h, w) = model.input_shape;
    // separate stream so affine draws never depend on pv_steps
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let hyper = AdamHyper::with_lr(config.learning_rate);
    let mut adam = AdamState::new(image.len());
    let baseline_logit = model.forward_logits(&image)?[c];
    let mut best_logit = baseline_logit;
    let mut loss_history = Vec::with_capacity(config.steps);
    for t in 1..=config.steps as u64 {
        let sample = sample_affine(&config.affine, &mut rng, (h, w));
        let (transformed, affine_tape) = apply_affine_with_tape(&image, &sample);
        let pre = model.apply_preprocess(&transformed);
        let res = model.net().forward(pre, true, false);
        let l_c = loss_class(&res.logits, c)?;
        let l_hf = loss_hf(&image);
        loss_history.push((l_c, l_hf));
        best_logit = best_logit.max(res.logits[c]);

        let mut dlogits = Array1::<f32>::zeros(res.logits.len());
        dlogits[c] = -1.0;
        let d_pre = model.net().backward(dlogits, res.tape, None);
        let d_transformed = preprocess_backward(model, d_pre);
        let mut grad = affine_backward(&affine_tape, &d_transformed);
        if config.hf_weight > 0.0 {
            grad = grad + loss_hf_grad(&image).mapv(|v| v * config.hf_weight as f32);
        }
        adam.step(&hyper, t, image.as_slice_mut().unwrap(), grad.as_slice().unwrap());
        if config.clamp_pixels {
            clamp_unit(&mut image);
        }
    }
    let logits = model.forward_logits(&image)?;
    let probs = softmax(logits.as_slice().unwrap());
    debug_assert!(best_logit >= baseline_logit);
    Ok(Prototype {
        final_logit: logits[c],
        final_probability: probs[c],
        image,
        class_id: c,
        config: config.clone(),
        loss_history,
    })
}

#[derive(Serialize, Deserialize)]
struct PrototypeSidecar {
    class_id: usize,
    config: OptimConfig,
    final_logit: f32,
    final_probability: f32,
    image_shape: (usize, usize, usize),
    loss_history: Vec<(f64, f64)>,
}

/// Persists `<base>.png` (8-bit preview), `<base>.ppaf` (lossless floats)
/// and `<base>.json` (run metadata).
pub fn save_prototype(base: &Path, proto: &Prototype) -> Result<()> {
    save_image_tensor(&with_ext(base, "png"), &proto.image)?;
    crate::io::write_arrays(
        &with_ext(base, "ppaf"),
        &[proto.image.as_slice().unwrap().to_vec()],
    )?;
    let sidecar = PrototypeSidecar {
        class_id: proto.class_id,
        config: proto.config.clone(),
        final_logit: proto.final_logit,
        final_probability: proto.final_probability,
        image_shape: proto.image.dim(),
        loss_history: proto.loss_history.clone(),
    };
    crate::io::atomic_write(
        &with_ext(base, "json"),
        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
    )
}

/// Reads a prototype saved by [`save_prototype`] from its lossless form.
pub fn load_prototype(base: &Path) -> Result<Prototype> {
    let json_path = with_ext(base, "json");
    let bytes = std::fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: PrototypeSidecar = serde_json::from_slice(&bytes)?;
    let arrays = crate::io::read_arrays(&with_ext(base, "ppaf"))?;
    let data = arrays
        .into_iter()
        .next()
        .ok_or_else(|| Error::Input("empty prototype array file".into()))?;
    let image = Array3::from_shape_vec(sidecar.image_shape, data)
        .map_err(|_| Error::Input("prototype array does not match recorded shape".into()))?;
    Ok(Prototype {
        image,
        class_id: sidecar.class_id,
        final_logit: sidecar.final_logit,
        final_probability: sidecar.final_probability,
        config: sidecar.config,
        loss_history: sidecar.loss_history,
    })
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut p = base.to_path_buf();
    p.set_extension(ext);
    p
}
