//! Per-layer curve figures: up to a handful of labeled series with shaded
//! std bands, rendered to PNG. Rendering is deterministic, so replotting the
//! same curves yields a byte-identical file.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::SimilarityCurve;

const SIZE: (u32, u32) = (960, 540);

/// Candidate system fonts for axis labels; overridable via `PROTOPATH_FONT`.
const FONT_CANDIDATES: [&str; 3] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/Library/Fonts/Arial Unicode.ttf",
];

fn ensure_font() -> Result<()> {
    use std::sync::OnceLock;
    static FONT: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    FONT.get_or_init(|| {
        let explicit = std::env::var("PROTOPATH_FONT").ok();
        let candidates = explicit
            .iter()
            .map(|s| s.as_str())
            .chain(FONT_CANDIDATES.iter().copied());
        for path in candidates {
            if let Ok(bytes) = std::fs::read(path) {
                let leaked: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                for style in [
                    plotters::style::FontStyle::Normal,
                    plotters::style::FontStyle::Bold,
                    plotters::style::FontStyle::Italic,
                ] {
                    plotters::style::register_font("sans-serif", style, leaked)
                        .map_err(|_| "font registration failed".to_string())?;
                }
                return Ok(());
            }
        }
        Err("no usable TTF font found; set PROTOPATH_FONT".into())
    })
    .clone()
    .map_err(Error::Plot)
}

/// Fixed series palette: prototype, same-class, diff-class, then extras.
const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
];

fn defined_points(curve: &SimilarityCurve) -> Vec<(usize, f64)> {
    curve
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect()
}

/// Renders labeled curves over layer index. Layers where a curve is
/// undefined are skipped, splitting the line.
pub fn plot_curves(path: &Path, title: &str, series: &[(&str, &SimilarityCurve)]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Input("nothing to plot".into()));
    }
    ensure_font()?;
    let n_layers = series[0].1.len();
    if series.iter().any(|(_, c)| c.len() != n_layers) {
        return Err(Error::Input("curve lengths differ".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, c) in series {
        for (i, v) in defined_points(c) {
            let s = c
                .std
                .as_ref()
                .and_then(|s| s[i])
                .unwrap_or(0.0);
            lo = lo.min(v - s);
            hi = hi.max(v + s);
        }
    }
    if !lo.is_finite() {
        return Err(Error::Input("every layer is undefined in every curve".into()));
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    let (lo, hi) = (lo - pad, hi + pad);

    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0f64..(n_layers.max(2) - 1) as f64, lo..hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("layer index")
        .y_desc("similarity")
        .draw()
        .map_err(plot_err)?;

    for (si, (label, curve)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if let Some(std) = &curve.std {
            // shaded band: one polygon per contiguous defined segment
            let mut segment: Vec<(usize, f64, f64)> = Vec::new();
            let mut flush = |seg: &mut Vec<(usize, f64, f64)>| -> Result<()> {
                if seg.len() >= 2 {
                    let mut poly: Vec<(f64, f64)> =
                        seg.iter().map(|&(i, v, s)| (i as f64, v + s)).collect();
                    poly.extend(seg.iter().rev().map(|&(i, v, s)| (i as f64, v - s)));
                    chart
                        .draw_series(std::iter::once(Polygon::new(poly, color.mix(0.2))))
                        .map_err(plot_err)?;
                }
                seg.clear();
                Ok(())
            };
            for i in 0..curve.len() {
                match (curve.values[i], std[i]) {
                    (Some(v), Some(s)) => segment.push((i, v, s)),
                    _ => flush(&mut segment)?,
                }
            }
            flush(&mut segment)?;
        }
        let points = defined_points(curve);
        // break the line across undefined layers
        let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
        for &(i, v) in &points {
            match runs.last_mut() {
                Some(run) if run.last().map(|&(x, _)| x as usize + 1 == i).unwrap_or(false)
                    || run.last().map(|&(x, _)| x as usize == i).unwrap_or(false) =>
                {
                    run.push((i as f64, v))
                }
                _ => runs.push(vec![(i as f64, v)]),
            }
        }
        for (ri, run) in runs.iter().enumerate() {
            let s = chart
                .draw_series(LineSeries::new(run.clone(), color.stroke_width(2)))
                .map_err(plot_err)?;
            if ri == 0 {
                s.label(*label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            }
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;

    fn demo_curve(shift: f64, with_std: bool, gap: bool) -> SimilarityCurve {
        let values: Vec<Option<f64>> = (0..40)
            .map(|i| {
                if gap && (15..18).contains(&i) {
                    None
                } else {
                    Some(shift + (i as f64 / 40.0).sin() * 0.3)
                }
            })
            .collect();
        let mut c = SimilarityCurve::raw(Metric::Spearman, values);
        if with_std {
            c.std = Some(
                c.values
                    .iter()
                    .map(|v| v.map(|_| 0.05))
                    .collect(),
            );
        }
        c
    }

    #[test]
    fn rendering_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = demo_curve(0.5, true, false);
        let b = demo_curve(0.3, true, true);
        let c = demo_curve(0.1, false, false);
        let series: Vec<(&str, &SimilarityCurve)> =
            vec![("prototype", &a), ("same class", &b), ("different class", &c)];
        let p1 = dir.path().join("one.png");
        let p2 = dir.path().join("two.png");
        plot_curves(&p1, "spearman", &series).unwrap();
        plot_curves(&p2, "spearman", &series).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn rejects_degenerate_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        assert!(matches!(plot_curves(&p, "t", &[]), Err(Error::Input(_))));
        let empty = SimilarityCurve::raw(Metric::Spearman, vec![None; 5]);
        assert!(matches!(
            plot_curves(&p, "t", &[("a", &empty)]),
            Err(Error::Input(_))
        ));
        let a = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.0); 5]);
        let b = SimilarityCurve::raw(Metric::Spearman, vec![Some(0.0); 6]);
        assert!(matches!(
            plot_curves(&p, "t", &[("a", &a), ("b", &b)]),
            Err(Error::Input(_))
        ));
    }
}
