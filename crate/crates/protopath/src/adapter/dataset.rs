//! Procedurally generated labeled image set for fully offline runs: ten shape
//! and texture classes at 32x32, with per-image color, position and noise
//! jitter so the class signal is the pattern, not any single pixel.

use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::save_image_tensor;

pub const SHAPE_CLASS_NAMES: [&str; 10] = [
    "circle", "square", "triangle", "cross", "hstripes", "vstripes", "diagonal", "ring",
    "checker", "dots",
];

pub const SHAPE_IMAGE_SIDE: usize = 32;

/// On-disk dataset manifest: class names plus (relative path, label) entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub entries: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: String,
    pub label: usize,
}

fn shape_mask(class: usize, i: usize, j: usize, p: &[i32; 4]) -> bool {
    let (i, j) = (i as i32, j as i32);
    let [a, b, c, d] = *p;
    match class {
        // a=cy b=cx c=radius/half-size d=period/phase
        0 => (i - a).pow(2) + (j - b).pow(2) <= c * c,
        1 => (i - a).abs() <= c && (j - b).abs() <= c,
        2 => i >= a && i <= a + 2 * c && (j - b).abs() * 2 <= i - a,
        3 => ((i - a).abs() <= 2 && (j - b).abs() <= c) || ((j - b).abs() <= 2 && (i - a).abs() <= c),
        4 => (i + d).rem_euclid(c) * 2 < c,
        5 => (j + d).rem_euclid(c) * 2 < c,
        6 => (i + j + d).rem_euclid(c) * 2 < c,
        7 => {
            let r2 = (i - a).pow(2) + (j - b).pow(2);
            r2 <= c * c && r2 >= (c - 3) * (c - 3)
        }
        8 => ((i / c) + (j / c)) % 2 == 0,
        9 => {
            let (ri, rj) = ((i + d).rem_euclid(c) - c / 2, (j + d).rem_euclid(c) - c / 2);
            ri * ri + rj * rj <= 4
        }
        _ => unreachable!("only 10 shape classes"),
    }
}

fn sample_params(class: usize, rng: &mut ChaCha8Rng) -> [i32; 4] {
    let cy = rng.gen_range(12..21);
    let cx = rng.gen_range(12..21);
    match class {
        0 => [cy, cx, rng.gen_range(6..11), 0],
        1 => [cy, cx, rng.gen_range(5..10), 0],
        2 => [rng.gen_range(4..10), cx, rng.gen_range(8..12), 0],
        3 => [cy, cx, rng.gen_range(8..13), 0],
        4 | 5 | 6 => [0, 0, rng.gen_range(4..8), rng.gen_range(0..8)],
        7 => [cy, cx, rng.gen_range(8..12), 0],
        8 => [0, 0, rng.gen_range(4..7), 0],
        9 => [0, 0, rng.gen_range(6..9), rng.gen_range(0..6)],
        _ => unreachable!(),
    }
}

fn render(class: usize, rng: &mut ChaCha8Rng) -> Array3<f32> {
    let n = SHAPE_IMAGE_SIDE;
    let bg: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.05..0.30));
    let fg: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.60..1.0));
    let params = sample_params(class, rng);
    let mut img = Array3::<f32>::zeros((3, n, n));
    for i in 0..n {
        for j in 0..n {
            let color = if shape_mask(class, i, j, &params) { &fg } else { &bg };
            for ch in 0..3 {
                let noise = rng.gen_range(-0.04..0.04f32);
                img[(ch, i, j)] = (color[ch] + noise).clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Generates `per_class` images for each of the ten classes under `dir`,
/// writing PNGs and a `manifest.json`. Deterministic given the seed.
pub fn synthesize_shapes_dataset(dir: &Path, per_class: usize, seed: u64) -> Result<PathBuf> {
    if per_class == 0 {
        return Err(Error::Input("per_class must be at least 1".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (class, name) in SHAPE_CLASS_NAMES.iter().enumerate() {
        for idx in 0..per_class {
            let img = render(class, &mut rng);
            let rel = format!("{name}/{idx:04}.png");
            save_image_tensor(&dir.join(&rel), &img)?;
            entries.push(DatasetEntry {
                path: rel,
                label: class,
            });
        }
    }
    let manifest = DatasetManifest {
        class_names: SHAPE_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        entries,
    };
    let path = dir.join("manifest.json");
    crate::io::atomic_write(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}

pub fn read_dataset_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    if !path.is_file() {
        return Err(Error::Ingestion(format!(
            "no manifest.json under '{}'",
            dir.display()
        )));
    }
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)?;
    if manifest.entries.is_empty() {
        return Err(Error::Ingestion("dataset manifest has no entries".into()));
    }
    for e in &manifest.entries {
        if e.label >= manifest.class_names.len() {
            return Err(Error::Ingestion(format!(
                "entry '{}' has label {} but only {} classes are named",
                e.path,
                e.label,
                manifest.class_names.len()
            )));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        synthesize_shapes_dataset(d1.path(), 2, 5).unwrap();
        synthesize_shapes_dataset(d2.path(), 2, 5).unwrap();
        let a = std::fs::read(d1.path().join("circle/0000.png")).unwrap();
        let b = std::fs::read(d2.path().join("circle/0000.png")).unwrap();
        assert_eq!(a, b);
        let m = read_dataset_manifest(d1.path()).unwrap();
        assert_eq!(m.entries.len(), 20);
        assert_eq!(m.class_names.len(), 10);
    }

    #[test]
    fn missing_dataset_is_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_dataset_manifest(&dir.path().join("nope")),
            Err(Error::Ingestion(_))
        ));
    }
}
