//! Grid search over affine-transform regularization parameters, scored by
//! average raw Spearman path similarity between a generated prototype and the
//! class's natural activation profile.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::ModelHandle;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::optimizer::{generate_prototype, AffineConfig, OptimConfig};
use crate::parallel::map_ordered;
use crate::profiles::{compare_image_to_profile_cached, ActivationCache, ActivationProfile};

/// One value list per affine axis.
#[derive(Debug, Clone)]
pub struct SweepAxes {
    pub scale: Vec<Option<(f32, f32)>>,
    pub rotation: Vec<Option<f32>>,
    pub translate: Vec<Option<(f32, f32)>>,
}

/// The 5x5x5 grid evaluated in the source experiments.
pub fn paper_axes() -> SweepAxes {
    SweepAxes {
        scale: vec![
            None,
            Some((0.9, 1.1)),
            Some((0.8, 1.2)),
            Some((0.7, 1.3)),
            Some((0.5, 1.5)),
        ],
        rotation: vec![None, Some(30.0), Some(60.0), Some(90.0), Some(180.0)],
        translate: vec![
            None,
            Some((0.05, 0.05)),
            Some((0.1, 0.1)),
            Some((0.2, 0.2)),
            Some((0.5, 0.5)),
        ],
    }
}

/// Full Cartesian product, ordered lexicographically by
/// (scale, rotation, translate) axis positions.
pub fn build_grid(axes: &SweepAxes) -> Result<Vec<AffineConfig>> {
    if axes.scale.is_empty() || axes.rotation.is_empty() || axes.translate.is_empty() {
        return Err(Error::Input("every sweep axis needs at least one value".into()));
    }
    let mut grid = Vec::with_capacity(axes.scale.len() * axes.rotation.len() * axes.translate.len());
    for &scale in &axes.scale {
        for &rotation in &axes.rotation {
            for &translate in &axes.translate {
                grid.push(AffineConfig {
                    scale_range: scale,
                    rotation_max_deg: rotation,
                    translate_frac: translate,
                });
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: AffineConfig,
    pub avg_similarity: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Row indices sorted by similarity descending; ties and failed rows
    /// fall back to grid order.
    pub ranking: Vec<usize>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&SweepRow> {
        self.ranking.first().map(|&i| &self.rows[i])
    }
}

/// Generates one prototype with `base` overridden by `cfg` and returns its
/// raw Spearman curve against the profile, averaged over defined layers.
pub fn evaluate_config(
    model: &ModelHandle,
    class_id: usize,
    cfg: &AffineConfig,
    profile: &ActivationProfile,
    base: &OptimConfig,
    cache: Option<&ActivationCache>,
) -> Result<f64> {
    let config = OptimConfig {
        affine: cfg.clone(),
        ..base.clone()
    };
    let proto = generate_prototype(model, class_id, &config)?;
    let curve =
        compare_image_to_profile_cached(model, &proto.image, profile, Metric::Spearman, cache)?;
    curve
        .mean_defined()
        .ok_or_else(|| Error::Input("similarity undefined on every layer".into()))
}

fn row_cache_key(model: &ModelHandle, class_id: usize, cfg: &AffineConfig, base: &OptimConfig) -> String {
    let blob = serde_json::to_vec(&(cfg, base, class_id, &model.weight_hash)).expect("serializable");
    crate::io::sha256_hex(&blob)
}

fn row_cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

/// Evaluates every grid config and ranks the rows. Failures are recorded per
/// row and do not stop the sweep. With `row_cache_dir`, completed rows are
/// persisted by config hash and reused, so an interrupted sweep resumes.
pub fn run_sweep(
    model: &ModelHandle,
    class_id: usize,
    grid: &[AffineConfig],
    profile: &ActivationProfile,
    base: &OptimConfig,
    row_cache_dir: Option<&Path>,
    activation_cache: Option<&ActivationCache>,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Input("empty sweep grid".into()));
    }
    if let Some(dir) = row_cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let rows: Vec<SweepRow> = map_ordered(grid, |cfg| {
        if let Some(dir) = row_cache_dir {
            let path = row_cache_path(dir, &row_cache_key(model, class_id, cfg, base));
            if let Ok(bytes) = std::fs::read(&path) {
                if let Ok(row) = serde_json::from_slice::<SweepRow>(&bytes) {
                    return row;
                }
            }
        }
        let row = match evaluate_config(model, class_id, cfg, profile, base, activation_cache) {
            Ok(v) => SweepRow {
                config: cfg.clone(),
                avg_similarity: Some(v),
                error: None,
            },
            Err(e) => SweepRow {
                config: cfg.clone(),
                avg_similarity: None,
                error: Some(e.to_string()),
            },
        };
        if let Some(dir) = row_cache_dir {
            let path = row_cache_path(dir, &row_cache_key(model, class_id, cfg, base));
            if let Ok(json) = serde_json::to_string_pretty(&row) {
                let _ = crate::io::atomic_write(&path, json.as_bytes());
            }
        }
        row
    });
    let mut ranking: Vec<usize> = (0..rows.len()).collect();
    ranking.sort_by(|&a, &b| {
        let sa = rows[a].avg_similarity.unwrap_or(f64::NEG_INFINITY);
        let sb = rows[b].avg_similarity.unwrap_or(f64::NEG_INFINITY);
        sb.partial_cmp(&sa).unwrap().then(a.cmp(&b))
    });
    Ok(SweepResult { rows, ranking })
}

fn fmt_scale(v: &Option<(f32, f32)>) -> (String, String) {
    match v {
        Some((lo, hi)) => (lo.to_string(), hi.to_string()),
        None => (String::new(), String::new()),
    }
}

/// CSV with one row per config:
/// `scale_low,scale_high,rotation,translate_x,translate_y,avg_similarity`.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut out = String::from("scale_low,scale_high,rotation,translate_x,translate_y,avg_similarity\n");
    for row in &result.rows {
        let (slo, shi) = fmt_scale(&row.config.scale_range);
        let rot = row
            .config
            .rotation_max_deg
            .map(|r| r.to_string())
            .unwrap_or_default();
        let (tx, ty) = fmt_scale(&row.config.translate_frac);
        let sim = row
            .avg_similarity
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!("{slo},{shi},{rot},{tx},{ty},{sim}\n"));
    }
    crate::io::atomic_write(path, out.as_bytes())
}

pub fn write_sweep_json(path: &Path, result: &SweepResult) -> Result<()> {
    crate::io::atomic_write(path, serde_json::to_string_pretty(result)?.as_bytes())
}

fn fmt_affine(cfg: &AffineConfig) -> String {
    let scale = match cfg.scale_range {
        Some((lo, hi)) => format!("({lo}, {hi})"),
        None => "-".into(),
    };
    let rot = match cfg.rotation_max_deg {
        Some(r) => format!("{r}"),
        None => "-".into(),
    };
    let tr = match cfg.translate_frac {
        Some((x, y)) => format!("({x}, {y})"),
        None => "-".into(),
    };
    format!("{scale:>12} {rot:>8} {tr:>12}")
}

/// Renders the top-`n` rows in the protocol-table layout.
pub fn format_top_table(result: &SweepResult, n: usize) -> String {
    let mut out = String::from("rank        scale rotation  translation  avg_spearman\n");
    for (rank, &i) in result.ranking.iter().take(n).enumerate() {
        let row = &result.rows[i];
        let sim = row
            .avg_similarity
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "failed".into());
        out.push_str(&format!("{:>4} {}  {sim}\n", rank + 1, fmt_affine(&row.config)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{load_model, synthesize_shapes_dataset, train_toy_model, TrainingConfig};
    use crate::imageio::load_image_tensor;
    use crate::profiles::mean_profile;

    #[test]
    fn paper_grid_has_125_configs() {
        let grid = build_grid(&paper_axes()).unwrap();
        assert_eq!(grid.len(), 125);
        // lexicographic: first config is fully disabled, translate varies fastest
        assert_eq!(grid[0], AffineConfig::identity());
        assert_eq!(grid[1].translate_frac, Some((0.05, 0.05)));
        assert_eq!(grid[1].scale_range, None);
        assert_eq!(grid[5].rotation_max_deg, Some(30.0));
        assert!(grid.contains(&AffineConfig::tuned()));
    }

    #[test]
    fn reduced_and_degenerate_grids() {
        let axes = SweepAxes {
            scale: vec![None, Some((0.8, 1.2)), Some((0.5, 1.5))],
            rotation: vec![None, Some(30.0), Some(90.0)],
            translate: vec![None, Some((0.1, 0.1)), Some((0.5, 0.5))],
        };
        assert_eq!(build_grid(&axes).unwrap().len(), 27);

        let single = SweepAxes {
            scale: vec![Some((0.7, 1.3))],
            rotation: vec![Some(180.0)],
            translate: vec![Some((0.5, 0.5))],
        };
        let grid = build_grid(&single).unwrap();
        assert_eq!(grid, vec![AffineConfig::tuned()]);

        let empty = SweepAxes {
            scale: vec![],
            rotation: vec![None],
            translate: vec![None],
        };
        assert!(matches!(build_grid(&empty), Err(Error::Input(_))));
    }

    fn toy_fixture() -> (tempfile::TempDir, ModelHandle, ActivationProfile) {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        synthesize_shapes_dataset(&data, 3, 4).unwrap();
        let cfg = TrainingConfig {
            epochs: 1,
            ..TrainingConfig::default()
        };
        let base = dir.path().join("model");
        train_toy_model(&data, &cfg, &base).unwrap();
        let model = load_model(base.to_str().unwrap()).unwrap();
        let images: Vec<_> = (0..3)
            .map(|i| {
                load_image_tensor(&data.join(format!("circle/{i:04}.png")), model.input_shape)
                    .unwrap()
            })
            .collect();
        let profile = mean_profile(&model, &images).unwrap();
        (dir, model, profile)
    }

    fn fast_base() -> OptimConfig {
        OptimConfig {
            steps: 2,
            pv_steps: 1,
            seed: 11,
            ..OptimConfig::default()
        }
    }

    #[test]
    fn evaluate_config_is_deterministic() {
        let (_dir, model, profile) = toy_fixture();
        let cfg = AffineConfig::tuned();
        let a = evaluate_config(&model, 0, &cfg, &profile, &fast_base(), None).unwrap();
        let b = evaluate_config(&model, 0, &cfg, &profile, &fast_base(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_ranks_and_resumes() {
        let (dir, model, profile) = toy_fixture();
        let axes = SweepAxes {
            scale: vec![None, Some((0.7, 1.3))],
            rotation: vec![None, Some(90.0)],
            translate: vec![None],
        };
        let grid = build_grid(&axes).unwrap();
        let base = fast_base();
        let cache = dir.path().join("rows");
        let full = run_sweep(&model, 0, &grid, &profile, &base, Some(&cache), None).unwrap();
        assert_eq!(full.rows.len(), 4);
        assert_eq!(full.ranking.len(), 4);
        let mut sorted = full.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        // best >= every other score
        let best = full.best().unwrap().avg_similarity.unwrap();
        for row in &full.rows {
            assert!(best >= row.avg_similarity.unwrap());
        }

        // resumed run must reproduce the uninterrupted result exactly
        let resumed = run_sweep(&model, 0, &grid, &profile, &base, Some(&cache), None).unwrap();
        assert_eq!(
            serde_json::to_string(&resumed).unwrap(),
            serde_json::to_string(&full).unwrap()
        );

        // partially warmed cache also matches
        let cache2 = dir.path().join("rows2");
        let _ = run_sweep(&model, 0, &grid[..2], &profile, &base, Some(&cache2), None).unwrap();
        let after = run_sweep(&model, 0, &grid, &profile, &base, Some(&cache2), None).unwrap();
        assert_eq!(
            serde_json::to_string(&after).unwrap(),
            serde_json::to_string(&full).unwrap()
        );
    }

    #[test]
    fn singleton_grid_ranking() {
        let (_dir, model, profile) = toy_fixture();
        let grid = vec![AffineConfig::identity()];
        let res = run_sweep(&model, 0, &grid, &profile, &fast_base(), None, None).unwrap();
        assert_eq!(res.ranking, vec![0]);
    }

    #[test]
    fn sweep_csv_layout() {
        let result = SweepResult {
            rows: vec![
                SweepRow {
                    config: AffineConfig::tuned(),
                    avg_similarity: Some(0.564),
                    error: None,
                },
                SweepRow {
                    config: AffineConfig::identity(),
                    avg_similarity: None,
                    error: Some("boom".into()),
                },
            ],
            ranking: vec![0, 1],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &result).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scale_low,scale_high,rotation,translate_x,translate_y,avg_similarity"
        );
        assert_eq!(lines[1], "0.7,1.3,180,0.5,0.5,0.564");
        assert_eq!(lines[2], ",,,,,");
        let table = format_top_table(&result, 5);
        assert!(table.contains("0.564"));
        assert!(table.contains("failed"));
    }
}
