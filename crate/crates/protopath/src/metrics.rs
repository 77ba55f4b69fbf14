//! Pure metric layer: per-layer Spearman and L1 comparisons, normalization
//! against same-class/different-class anchors, smoothing, and layer-fraction
//! statistics. Everything here is a pure function over immutable inputs.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Spearman,
    L1,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Spearman => write!(f, "spearman"),
            Metric::L1 => write!(f, "l1"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" => Ok(Metric::Spearman),
            "l1" => Ok(Metric::L1),
            other => Err(Error::Input(format!("unknown metric '{other}'"))),
        }
    }
}

/// Relation tested layer-wise by [`layer_fraction_satisfying`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `p <= r` — the L1 assertion direction.
    Le,
    /// `p >= r` — the Spearman assertion direction.
    Ge,
}

/// Per-layer scalar series. `None` marks layers where the metric is undefined
/// (constant activations under Spearman, degenerate anchors after
/// normalization); they are carried, never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCurve {
    pub metric: Metric,
    pub values: Vec<Option<f64>>,
    pub std: Option<Vec<Option<f64>>>,
    pub normalized: bool,
    pub smoothed: bool,
    pub window_mean: Option<usize>,
    pub window_std: Option<usize>,
    /// Anchors used for normalization, recorded alongside the curve.
    pub anchors: Option<NormalizationAnchors>,
}

impl SimilarityCurve {
    pub fn raw(metric: Metric, values: Vec<Option<f64>>) -> Self {
        SimilarityCurve {
            metric,
            values,
            std: None,
            normalized: false,
            smoothed: false,
            window_mean: None,
            window_std: None,
            anchors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean over defined layers; `None` when every layer is undefined.
    pub fn mean_defined(&self) -> Option<f64> {
        let defined: Vec<f64> = self.values.iter().filter_map(|v| *v).collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

/// Per-layer same-class and different-class baseline values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationAnchors {
    pub metric: Metric,
    pub same_class: Vec<Option<f64>>,
    pub diff_class: Vec<Option<f64>>,
}

/// Fractional (average) ranks, 1-based; exact ties share the mean of the
/// positions they occupy.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("non-finite value in rank input"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero rank variance (constant vector)".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank order correlation with average ranks for ties.
pub fn spearman(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} vs {}",
            v1.len(),
            v2.len()
        )));
    }
    if v1.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "need at least 2 entries".into(),
        ));
    }
    pearson(&average_ranks(v1), &average_ranks(v2))
}

/// Sum of absolute differences (Manhattan distance).
pub fn l1_distance(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} vs {}",
            v1.len(),
            v2.len()
        )));
    }
    Ok(v1.iter().zip(v2.iter()).map(|(a, b)| (a - b).abs()).sum())
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Applies the scalar metric layer-wise to two same-provenance activation
/// stacks, producing a raw curve. Undefined Spearman layers become `None`.
pub fn path_similarity(a: &[Vec<f32>], b: &[Vec<f32>], metric: Metric) -> Result<SimilarityCurve> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "layer count mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut values = Vec::with_capacity(a.len());
    for (la, lb) in a.iter().zip(b.iter()) {
        if la.len() != lb.len() {
            return Err(Error::Input(format!(
                "layer vector length mismatch: {} vs {}",
                la.len(),
                lb.len()
            )));
        }
        let (fa, fb) = (to_f64(la), to_f64(lb));
        values.push(match metric {
            Metric::L1 => Some(l1_distance(&fa, &fb)?),
            Metric::Spearman => match spearman(&fa, &fb) {
                Ok(v) => Some(v),
                Err(Error::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            },
        });
    }
    Ok(SimilarityCurve::raw(metric, values))
}

const ANCHOR_TOL: f64 = 1e-12;

/// Maps a raw curve onto the 0-1 anchor scale. Spearman: 1 at the same-class
/// anchor, 0 at the different-class anchor. L1: 0 at same-class, 1 at
/// different-class. Layers with coincident anchors become undefined.
pub fn normalize_curve(curve: &SimilarityCurve, anchors: &NormalizationAnchors) -> Result<SimilarityCurve> {
    if curve.metric != anchors.metric {
        return Err(Error::Input(format!(
            "curve metric {} does not match anchors metric {}",
            curve.metric, anchors.metric
        )));
    }
    if curve.len() != anchors.same_class.len() || curve.len() != anchors.diff_class.len() {
        return Err(Error::Input("anchor length mismatch".into()));
    }
    let map = |i: usize, v: Option<f64>, is_std: bool| -> Option<f64> {
        let v = v?;
        let same = anchors.same_class[i]?;
        let diff = anchors.diff_class[i]?;
        if (same - diff).abs() < ANCHOR_TOL {
            return None;
        }
        Some(match (curve.metric, is_std) {
            (Metric::Spearman, false) => (v - diff) / (same - diff),
            (Metric::L1, false) => (v - same) / (diff - same),
            // std series is scale-only
            (Metric::Spearman, true) => v / (same - diff).abs(),
            (Metric::L1, true) => v / (diff - same).abs(),
        })
    };
    let values = curve
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| map(i, *v, false))
        .collect();
    let std = curve.std.as_ref().map(|s| {
        s.iter()
            .enumerate()
            .map(|(i, v)| map(i, *v, true))
            .collect()
    });
    Ok(SimilarityCurve {
        metric: curve.metric,
        values,
        std,
        normalized: true,
        smoothed: curve.smoothed,
        window_mean: curve.window_mean,
        window_std: curve.window_std,
        anchors: Some(anchors.clone()),
    })
}

/// Inverse of [`normalize_curve`] on layers that stayed defined.
pub fn denormalize_curve(curve: &SimilarityCurve) -> Result<SimilarityCurve> {
    let anchors = curve
        .anchors
        .as_ref()
        .ok_or_else(|| Error::Input("curve has no recorded anchors".into()))?;
    let values = curve
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let v = (*v)?;
            let same = anchors.same_class[i]?;
            let diff = anchors.diff_class[i]?;
            Some(match curve.metric {
                Metric::Spearman => v * (same - diff) + diff,
                Metric::L1 => v * (diff - same) + same,
            })
        })
        .collect();
    Ok(SimilarityCurve {
        metric: curve.metric,
        values,
        std: None,
        normalized: false,
        smoothed: curve.smoothed,
        window_mean: curve.window_mean,
        window_std: curve.window_std,
        anchors: None,
    })
}

fn smooth_series(series: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    if window <= 1 {
        return series.to_vec();
    }
    let n = series.len() as isize;
    let lo = -((window as isize - 1) / 2);
    let hi = window as isize / 2;
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for off in lo..=hi {
                // nearest-edge replication at the boundaries
                let j = (i + off).clamp(0, n - 1) as usize;
                if let Some(v) = series[j] {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                None
            } else {
                Some(sum / count as f64)
            }
        })
        .collect()
}

/// Uniform moving-average smoothing: `window_mean` for the value series,
/// `window_std` for the std series. A window of 1 is the identity.
pub fn smooth_curve(curve: &SimilarityCurve, window_mean: usize, window_std: usize) -> Result<SimilarityCurve> {
    if window_mean == 0 || window_std == 0 {
        return Err(Error::Input("smoothing window must be at least 1".into()));
    }
    Ok(SimilarityCurve {
        metric: curve.metric,
        values: smooth_series(&curve.values, window_mean),
        std: curve.std.as_ref().map(|s| smooth_series(s, window_std)),
        normalized: curve.normalized,
        smoothed: true,
        window_mean: Some(window_mean),
        window_std: Some(window_std),
        anchors: curve.anchors.clone(),
    })
}

/// Fraction of layers where `p relation r` holds. Layers undefined in either
/// curve are excluded from numerator and denominator.
pub fn layer_fraction_satisfying(
    curve_p: &SimilarityCurve,
    curve_ref: &SimilarityCurve,
    relation: Relation,
) -> Result<f64> {
    if curve_p.len() != curve_ref.len() {
        return Err(Error::Input("curve length mismatch".into()));
    }
    let mut total = 0usize;
    let mut hit = 0usize;
    for (p, r) in curve_p.values.iter().zip(curve_ref.values.iter()) {
        let (Some(p), Some(r)) = (p, r) else { continue };
        total += 1;
        let ok = match relation {
            Relation::Le => p <= r,
            Relation::Ge => p >= r,
        };
        if ok {
            hit += 1;
        }
    }
    if total == 0 {
        return Err(Error::Input("all layers undefined".into()));
    }
    Ok(hit as f64 / total as f64)
}

fn fmt_opt(v: &Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Writes a curve as CSV with a metadata comment line and a defined-flag
/// column. Layer names must match the curve length.
pub fn write_curve_csv(path: &Path, curve: &SimilarityCurve, layer_names: &[String]) -> Result<()> {
    if layer_names.len() != curve.len() {
        return Err(Error::Input("layer name count mismatch".into()));
    }
    let mut out = String::new();
    out.push_str(&format!(
        "# metric={},normalized={},smoothed={},window_mean={},window_std={}\n",
        curve.metric,
        curve.normalized,
        curve.smoothed,
        curve.window_mean.map(|w| w.to_string()).unwrap_or_default(),
        curve.window_std.map(|w| w.to_string()).unwrap_or_default(),
    ));
    out.push_str("layer_index,layer_name,value,std,defined\n");
    for (i, name) in layer_names.iter().enumerate() {
        let std = curve
            .std
            .as_ref()
            .map(|s| fmt_opt(&s[i]))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            name,
            fmt_opt(&curve.values[i]),
            std,
            curve.values[i].is_some()
        ));
    }
    crate::io::atomic_write(path, out.as_bytes())
}

/// Reads a curve CSV written by [`write_curve_csv`]. Anchors are not part of
/// the CSV form and come back as `None`.
pub fn read_curve_csv(path: &Path) -> Result<(SimilarityCurve, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .ok_or_else(|| Error::Input("empty curve csv".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| Error::Input("missing metadata header".into()))?;
    let mut metric = None;
    let mut normalized = false;
    let mut smoothed = false;
    let mut window_mean = None;
    let mut window_std = None;
    for kv in meta.split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("bad metadata field '{kv}'")))?;
        match k {
            "metric" => metric = Some(v.parse::<Metric>()?),
            "normalized" => normalized = v == "true",
            "smoothed" => smoothed = v == "true",
            "window_mean" if !v.is_empty() => {
                window_mean = Some(v.parse().map_err(|_| Error::Input("bad window".into()))?)
            }
            "window_std" if !v.is_empty() => {
                window_std = Some(v.parse().map_err(|_| Error::Input("bad window".into()))?)
            }
            _ => {}
        }
    }
    let metric = metric.ok_or_else(|| Error::Input("metadata missing metric".into()))?;
    let header = lines.next();
    if header != Some("layer_index,layer_name,value,std,defined") {
        return Err(Error::Input("unexpected curve csv header".into()));
    }
    let mut values = Vec::new();
    let mut stds = Vec::new();
    let mut names = Vec::new();
    let mut any_std = false;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Input(format!("bad curve csv row '{line}'")));
        }
        names.push(cols[1].to_string());
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Input(format!("bad float '{s}'")))
            }
        };
        values.push(parse(cols[2])?);
        let std = parse(cols[3])?;
        any_std |= std.is_some();
        stds.push(std);
    }
    Ok((
        SimilarityCurve {
            metric,
            values,
            std: if any_std { Some(stds) } else { None },
            normalized,
            smoothed,
            window_mean,
            window_std,
            anchors: None,
        },
        names,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_identity_and_reversal() {
        let v: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_hand_computed_half() {
        // 1 - 6*2/(3*8) = 0.5
        let r = spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1.0], &[2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(spearman(&[1.0], &[1.0, 2.0]), Err(Error::Input(_))));
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn l1_hand_computed() {
        assert_eq!(l1_distance(&[1.0, 2.0], &[2.0, 0.0]).unwrap(), 3.0);
        assert_eq!(l1_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn path_similarity_self_comparison() {
        let rec = vec![vec![1.0f32, 2.0, 3.0], vec![0.5, 0.25, 0.75, 1.0]];
        let sp = path_similarity(&rec, &rec, Metric::Spearman).unwrap();
        for v in &sp.values {
            assert!((v.unwrap() - 1.0).abs() < 1e-12);
        }
        let l1 = path_similarity(&rec, &rec, Metric::L1).unwrap();
        assert_eq!(l1.values, vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn path_similarity_marks_undefined_layers() {
        let a = vec![vec![1.0f32, 1.0, 1.0], vec![1.0, 2.0, 3.0]];
        let b = vec![vec![1.0f32, 2.0, 3.0], vec![1.0, 3.0, 2.0]];
        let c = path_similarity(&a, &b, Metric::Spearman).unwrap();
        assert_eq!(c.values[0], None);
        assert!((c.values[1].unwrap() - 0.5).abs() < 1e-15);
    }

    fn anchors_for_test() -> NormalizationAnchors {
        NormalizationAnchors {
            metric: Metric::Spearman,
            same_class: vec![Some(0.8), Some(0.6), Some(0.9)],
            diff_class: vec![Some(0.3), Some(0.2), Some(0.4)],
        }
    }

    #[test]
    fn normalize_anchor_conventions() {
        let anchors = anchors_for_test();
        let same = SimilarityCurve::raw(Metric::Spearman, anchors.same_class.clone());
        let diff = SimilarityCurve::raw(Metric::Spearman, anchors.diff_class.clone());
        for v in normalize_curve(&same, &anchors).unwrap().values {
            assert!((v.unwrap() - 1.0).abs() < 1e-12);
        }
        for v in normalize_curve(&diff, &anchors).unwrap().values {
            assert!(v.unwrap().abs() < 1e-12);
        }

        let l1_anchors = NormalizationAnchors {
            metric: Metric::L1,
            same_class: vec![Some(2.0), Some(4.0)],
            diff_class: vec![Some(6.0), Some(10.0)],
        };
        let same = SimilarityCurve::raw(Metric::L1, l1_anchors.same_class.clone());
        let diff = SimilarityCurve::raw(Metric::L1, l1_anchors.diff_class.clone());
        for v in normalize_curve(&same, &l1_anchors).unwrap().values {
            assert!(v.unwrap().abs() < 1e-12);
        }
        for v in normalize_curve(&diff, &l1_anchors).unwrap().values {
            assert!((v.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_degenerate_anchor_is_undefined() {
        let anchors = NormalizationAnchors {
            metric: Metric::Spearman,
            same_class: vec![Some(0.5)],
            diff_class: vec![Some(0.5)],
        };
        let c = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.7)]);
        assert_eq!(normalize_curve(&c, &anchors).unwrap().values, vec![None]);
    }

    #[test]
    fn normalize_then_denormalize_recovers_raw() {
        let anchors = anchors_for_test();
        let raw = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.55), Some(0.41), Some(0.77)]);
        let norm = normalize_curve(&raw, &anchors).unwrap();
        let back = denormalize_curve(&norm).unwrap();
        for (a, b) in raw.values.iter().zip(back.values.iter()) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_window_one_is_identity() {
        let c = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.1), Some(0.9), Some(0.4)]);
        assert_eq!(smooth_curve(&c, 1, 1).unwrap().values, c.values);
    }

    #[test]
    fn smoothing_hand_convolution() {
        let c = SimilarityCurve::raw(
            Metric::Spearman,
            vec![Some(0.0), Some(0.0), Some(3.0), Some(0.0), Some(0.0)],
        );
        let s = smooth_curve(&c, 3, 3).unwrap();
        let got: Vec<f64> = s.values.iter().map(|v| v.unwrap()).collect();
        assert_eq!(got, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn layer_fraction_examples() {
        let ones = SimilarityCurve::raw(Metric::L1, (0..67).map(|i| Some(if i < 55 { 0.0 } else { 2.0 })).collect());
        let refc = SimilarityCurve::raw(Metric::L1, vec![Some(1.0); 67]);
        let f = layer_fraction_satisfying(&ones, &refc, Relation::Le).unwrap();
        assert!((f - 55.0 / 67.0).abs() < 1e-12);

        let p = SimilarityCurve::raw(Metric::Spearman, (0..224).map(|i| Some(if i < 147 { 1.0 } else { -1.0 })).collect());
        let r = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.0); 224]);
        let f = layer_fraction_satisfying(&p, &r, Relation::Ge).unwrap();
        assert!((f - 0.65625).abs() < 1e-12);

        let same = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.5); 4]);
        assert_eq!(layer_fraction_satisfying(&same, &same, Relation::Ge).unwrap(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let curve = SimilarityCurve {
            metric: Metric::Spearman,
            values: vec![Some(0.123456789012345), None, Some(-0.5)],
            std: Some(vec![Some(0.01), None, Some(0.2)]),
            normalized: true,
            smoothed: true,
            window_mean: Some(10),
            window_std: Some(5),
            anchors: None,
        };
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        write_curve_csv(&path, &curve, &names).unwrap();
        let (back, back_names) = read_curve_csv(&path).unwrap();
        assert_eq!(back, curve);
        assert_eq!(back_names, names);
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_transform(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        ) {
            let (v1, v2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = spearman(&v1, &v2);
            prop_assume!(base.is_ok());
            let base = base.unwrap();
            // strictly increasing transform of either argument
            let t1: Vec<f64> = v1.iter().map(|&x| x.exp() + 3.0 * x).collect();
            let t2: Vec<f64> = v2.iter().map(|&x| x.powi(3) + x).collect();
            let r = spearman(&t1, &t2).unwrap();
            prop_assert!((r - base).abs() < 1e-9);
        }

        #[test]
        fn l1_metric_properties(
            a in proptest::collection::vec(-50.0f64..50.0, 1..20),
            b in proptest::collection::vec(-50.0f64..50.0, 1..20),
            c in proptest::collection::vec(-50.0f64..50.0, 1..20),
        ) {
            let n = a.len().min(b.len()).min(c.len());
            let (a, b, c) = (&a[..n], &b[..n], &c[..n]);
            let dab = l1_distance(a, b).unwrap();
            let dba = l1_distance(b, a).unwrap();
            let dac = l1_distance(a, c).unwrap();
            let dcb = l1_distance(c, b).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-9);
            prop_assert_eq!(l1_distance(a, a).unwrap(), 0.0);
            prop_assert!(dab <= dac + dcb + 1e-9);
        }
    }
}
