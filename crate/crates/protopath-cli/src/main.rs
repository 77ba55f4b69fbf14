//! Command-line orchestrator: toy training, prototype generation, profile
//! computation, evaluation (curves, plots, tables), affine sweeps, and bias
//! probes. Every artifact directory receives a `run.json` with the seed,
//! model weight hash, and config hash so figures are regenerable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use protopath::adapter::{
    self, load_model_with, read_dataset_manifest, synthesize_shapes_dataset, train_toy_model,
    ModelHandle, TrainingConfig,
};
use protopath::imageio::load_image_tensor;
use protopath::metrics::{
    layer_fraction_satisfying, normalize_curve, read_curve_csv, smooth_curve, write_curve_csv,
    Metric, Relation, SimilarityCurve,
};
use protopath::nn::Image;
use protopath::optimizer::{
    generate_prototype, load_prototype, save_prototype, AffineConfig, OptimConfig,
};
use protopath::plot::plot_curves;
use protopath::probe::{compare_sets, evaluate_set, format_contrast_markdown, write_report_json};
use protopath::profiles::{
    compare_image_to_profile_cached, compare_set_to_profile, compute_anchors_with_cache,
    mean_profile_with_cache, read_image_set_manifest, save_profile, ActivationCache,
    ActivationProfile,
};
use protopath::sweep::{
    build_grid, format_top_table, paper_axes, run_sweep, write_sweep_csv, write_sweep_json,
    SweepAxes,
};

#[derive(Parser)]
#[command(name = "protopath", about = "Class prototypes and activation path analysis")]
struct Cli {
    /// Model spec: a built-in id or the path of a trained toy model.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Root seed for all randomized stages.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Activation/row cache directory (speeds up repeated runs).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker thread cap for data-parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory holding pretrained weight files (overrides PROTOPATH_WEIGHTS_DIR).
    #[arg(long, global = true)]
    weights_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the bundled toy CNN on the synthetic shapes dataset.
    TrainToy(TrainToyArgs),
    /// Generate a class prototype image.
    Generate(GenerateArgs),
    /// Compute per-class mean activation profiles.
    Profile(ProfileArgs),
    /// Full evaluation: curves, normalization, smoothing, plots, tables.
    Evaluate(EvaluateArgs),
    /// Affine-regularization grid search.
    Sweep(SweepArgs),
    /// Bias probe over curated image sets.
    Probe(ProbeArgs),
    /// Re-render plots and summary from previously emitted curve CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainToyArgs {
    /// Dataset directory (created with --synthesize if missing).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthesize the shapes dataset if the directory has no manifest.
    #[arg(long)]
    synthesize: bool,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
}

#[derive(Args)]
struct GenerateArgs {
    /// Target class index.
    #[arg(long)]
    class: usize,
    #[arg(long, default_value_t = 512)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f32,
    #[arg(long, default_value_t = 128)]
    pv_steps: usize,
    #[arg(long)]
    hf_weight: Option<f64>,
    /// Disable random affine transforms.
    #[arg(long)]
    no_affine: bool,
}

#[derive(Args)]
struct ProfileArgs {
    /// Labeled dataset directory (manifest.json): one profile per class.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Single image-set manifest: one profile.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Cap on images per class.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labeled dataset directory providing natural images for every class.
    #[arg(long)]
    data: PathBuf,
    /// Prototype base path (as written by `generate`).
    #[arg(long)]
    prototype: PathBuf,
    /// Emit only raw (unnormalized, unsmoothed) curves.
    #[arg(long)]
    raw: bool,
    /// Cap on images per class.
    #[arg(long)]
    limit: Option<usize>,
    /// Smoothing window for mean curves.
    #[arg(long, default_value_t = 10)]
    window_mean: usize,
    /// Smoothing window for std curves.
    #[arg(long, default_value_t = 5)]
    window_std: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Target class index.
    #[arg(long)]
    class: usize,
    /// Labeled dataset directory for the class profile.
    #[arg(long)]
    data: PathBuf,
    /// Grid: the full 5x5x5 protocol set or a reduced 3x3x3 set.
    #[arg(long, value_parser = ["full", "reduced"], default_value = "full")]
    axes: String,
    #[arg(long, default_value_t = 512)]
    steps: usize,
    #[arg(long, default_value_t = 128)]
    pv_steps: usize,
    #[arg(long)]
    hf_weight: Option<f64>,
    /// Cap on images per class.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Image-set manifest to evaluate.
    #[arg(long)]
    manifest: PathBuf,
    /// Second manifest for a side-by-side contrast.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Target class index.
    #[arg(long)]
    target: usize,
    /// Watched class ids.
    #[arg(long, value_delimiter = ',')]
    watch: Vec<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding curve CSVs from a previous `evaluate` run
    /// (defaults to --out).
    #[arg(long)]
    from: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        protopath::parallel::set_workers(n);
    }
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    match &cli.cmd {
        Cmd::TrainToy(args) => cmd_train_toy(&cli, args),
        Cmd::Generate(args) => cmd_generate(&cli, args),
        Cmd::Profile(args) => cmd_profile(&cli, args),
        Cmd::Evaluate(args) => cmd_evaluate(&cli, args),
        Cmd::Sweep(args) => cmd_sweep(&cli, args),
        Cmd::Probe(args) => cmd_probe(&cli, args),
        Cmd::Report(args) => cmd_report(&cli, args),
    }
}

fn load_model_arg(cli: &Cli) -> Result<ModelHandle> {
    let spec = cli
        .model
        .as_deref()
        .context("--model is required for this command")?;
    let dir = cli
        .weights_dir
        .clone()
        .or_else(adapter::default_weights_dir);
    Ok(load_model_with(spec, dir.as_deref())?)
}

fn activation_cache(cli: &Cli) -> Option<ActivationCache> {
    cli.cache_dir
        .as_ref()
        .map(|d| ActivationCache::new(&d.join("activations")))
}

fn config_hash(value: &impl serde::Serialize) -> String {
    protopath::io::sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

/// Provenance stamp written next to every command's artifacts.
fn write_run_meta(cli: &Cli, command: &str, model_hash: Option<&str>, cfg_hash: &str) -> Result<()> {
    let meta = serde_json::json!({
        "command": command,
        "seed": cli.seed,
        "model_weight_hash": model_hash,
        "config_hash": cfg_hash,
    });
    protopath::io::atomic_write(
        &cli.out.join(format!("run_{command}.json")),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;
    Ok(())
}

fn cmd_train_toy(cli: &Cli, args: &TrainToyArgs) -> Result<()> {
    let data = args.data.clone().unwrap_or_else(|| cli.out.join("toy-data"));
    if !data.join("manifest.json").is_file() {
        if args.synthesize {
            synthesize_shapes_dataset(&data, args.per_class, cli.seed)?;
            println!("synthesized shapes dataset at {}", data.display());
        } else {
            bail!(
                "no dataset at {} (pass --synthesize to create one)",
                data.display()
            );
        }
    }
    let config = TrainingConfig {
        seed: cli.seed,
        epochs: args.epochs,
        ..TrainingConfig::default()
    };
    let base = cli.out.join("toy-cnn");
    let model = train_toy_model(&data, &config, &base)?;
    write_run_meta(cli, "train-toy", Some(&model.weight_hash), &config_hash(&config))?;
    let acc = model.metadata.as_ref().map(|m| m.accuracy).unwrap_or(0.0);
    println!("trained toy-cnn: holdout accuracy {acc:.3}");
    println!("model: {}", base.display());
    println!("weight hash: {}", model.weight_hash);
    Ok(())
}

fn optim_config(cli: &Cli, steps: usize, lr: f32, pv_steps: usize, hf_weight: Option<f64>, no_affine: bool) -> OptimConfig {
    OptimConfig {
        learning_rate: lr,
        steps,
        pv_steps,
        hf_weight: hf_weight.unwrap_or(protopath::optimizer::DEFAULT_HF_WEIGHT),
        affine: if no_affine {
            AffineConfig::identity()
        } else {
            AffineConfig::tuned()
        },
        seed: cli.seed,
        clamp_pixels: true,
    }
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let model = load_model_arg(cli)?;
    if args.class >= model.num_classes {
        bail!(
            "class {} out of range: model has {} classes",
            args.class,
            model.num_classes
        );
    }
    let config = optim_config(cli, args.steps, args.lr, args.pv_steps, args.hf_weight, args.no_affine);
    let proto = generate_prototype(&model, args.class, &config)?;
    let base = cli.out.join(format!("prototype_{:03}", args.class));
    save_prototype(&base, &proto)?;
    write_run_meta(cli, "generate", Some(&model.weight_hash), &config_hash(&config))?;
    println!(
        "prototype for class {} ({}): logit {:.3}, probability {:.4}",
        args.class,
        model
            .class_names
            .get(args.class)
            .map(String::as_str)
            .unwrap_or("?"),
        proto.final_logit,
        proto.final_probability
    );
    println!("written: {}.png / .ppaf / .json", base.display());
    Ok(())
}

/// Loads dataset images grouped by class label, in manifest order.
fn load_class_sets(
    model: &ModelHandle,
    data: &Path,
    limit: Option<usize>,
) -> Result<Vec<(usize, Vec<Image>)>> {
    let manifest = read_dataset_manifest(data)?;
    let mut by_class: BTreeMap<usize, Vec<Image>> = BTreeMap::new();
    for e in &manifest.entries {
        let bucket = by_class.entry(e.label).or_default();
        if let Some(cap) = limit {
            if bucket.len() >= cap {
                continue;
            }
        }
        bucket.push(load_image_tensor(&data.join(&e.path), model.input_shape)?);
    }
    Ok(by_class.into_iter().collect())
}

fn cmd_profile(cli: &Cli, args: &ProfileArgs) -> Result<()> {
    let model = load_model_arg(cli)?;
    let cache = activation_cache(cli);
    let profiles_dir = cli.out.join("profiles");
    std::fs::create_dir_all(&profiles_dir)?;
    match (&args.data, &args.manifest) {
        (Some(data), None) => {
            let sets = load_class_sets(&model, data, args.limit)?;
            for (class, images) in &sets {
                let profile =
                    mean_profile_with_cache(&model, images, Some(*class), cache.as_ref())?;
                let base = profiles_dir.join(format!("class_{class:03}"));
                save_profile(&base, &profile)?;
                println!(
                    "class {class}: profile over {} images -> {}",
                    images.len(),
                    base.display()
                );
            }
        }
        (None, Some(manifest_path)) => {
            let manifest = read_image_set_manifest(manifest_path)?;
            let images = protopath::profiles::load_image_set(&manifest, &model)?;
            let profile =
                mean_profile_with_cache(&model, &images, manifest.class_id, cache.as_ref())?;
            let base = profiles_dir.join(&manifest.set_id);
            save_profile(&base, &profile)?;
            println!(
                "set '{}': profile over {} images -> {}",
                manifest.set_id,
                images.len(),
                base.display()
            );
        }
        _ => bail!("pass exactly one of --data or --manifest"),
    }
    write_run_meta(cli, "profile", Some(&model.weight_hash), &config_hash(&cli.seed))?;
    Ok(())
}

struct EvaluationCurves {
    prototype: SimilarityCurve,
    same_class: SimilarityCurve,
    diff_class: SimilarityCurve,
}

fn diff_pool(
    class_sets: &[(usize, Vec<Image>)],
    target: usize,
    count: usize,
    seed: u64,
) -> Vec<Image> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<(usize, usize)> = class_sets
        .iter()
        .enumerate()
        .filter(|(_, (c, _))| *c != target)
        .flat_map(|(i, (_, imgs))| (0..imgs.len()).map(move |k| (i, k)))
        .collect();
    (0..count)
        .map(|_| {
            let (i, k) = pool[rng.gen_range(0..pool.len())];
            class_sets[i].1[k].clone()
        })
        .collect()
}

fn compute_curves(
    model: &ModelHandle,
    class_sets: &[(usize, Vec<Image>)],
    profile: &ActivationProfile,
    proto_image: &Image,
    target: usize,
    metric: Metric,
    seed: u64,
    cache: Option<&ActivationCache>,
) -> Result<EvaluationCurves> {
    let same_images = &class_sets
        .iter()
        .find(|(c, _)| *c == target)
        .context("prototype class missing from dataset")?
        .1;
    let diff_images = diff_pool(class_sets, target, same_images.len(), seed);
    Ok(EvaluationCurves {
        prototype: compare_image_to_profile_cached(model, proto_image, profile, metric, cache)?,
        same_class: compare_set_to_profile(model, same_images, profile, metric, cache)?,
        diff_class: compare_set_to_profile(model, &diff_images, profile, metric, cache)?,
    })
}

fn curve_stats(curve: &SimilarityCurve) -> Option<(f64, f64)> {
    let defined: Vec<f64> = curve.values.iter().filter_map(|v| *v).collect();
    if defined.is_empty() {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn metric_tag(metric: Metric) -> &'static str {
    match metric {
        Metric::Spearman => "spearman",
        Metric::L1 => "l1",
    }
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let model = load_model_arg(cli)?;
    let cache = activation_cache(cli);
    let proto = load_prototype(&args.prototype)?;
    let target = proto.class_id;
    let class_sets = load_class_sets(&model, &args.data, args.limit)?;
    if class_sets.len() < 2 {
        bail!("evaluation needs at least 2 classes in the dataset");
    }
    let target_images = &class_sets
        .iter()
        .find(|(c, _)| *c == target)
        .with_context(|| format!("dataset has no images for prototype class {target}"))?
        .1;
    let profile = mean_profile_with_cache(&model, target_images, Some(target), cache.as_ref())?;
    let layer_names: Vec<String> = model.layers.iter().map(|l| l.name.clone()).collect();

    let mut summary = serde_json::Map::new();
    for metric in [Metric::Spearman, Metric::L1] {
        let tag = metric_tag(metric);
        let curves = compute_curves(
            &model,
            &class_sets,
            &profile,
            &proto.image,
            target,
            metric,
            cli.seed,
            cache.as_ref(),
        )?;
        for (kind, curve) in [
            ("prototype", &curves.prototype),
            ("same", &curves.same_class),
            ("diff", &curves.diff_class),
        ] {
            write_curve_csv(
                &cli.out.join(format!("{tag}_{kind}_raw.csv")),
                curve,
                &layer_names,
            )?;
        }
        if metric == Metric::Spearman {
            println!("Average {tag} similarity vs class-{target} profile:");
            for (label, curve) in [
                ("Prototype", &curves.prototype),
                ("Same class", &curves.same_class),
                ("Different class", &curves.diff_class),
            ] {
                if let Some((mean, std)) = curve_stats(curve) {
                    println!("  {label:<16} {mean:.2} \u{b1} {std:.2}");
                    summary.insert(
                        format!("{tag}_{}_mean", label.to_lowercase().replace(' ', "_")),
                        serde_json::json!({ "mean": mean, "std": std }),
                    );
                }
            }
        }
        // layer fractions in the assertion direction of each metric
        let relation = match metric {
            Metric::Spearman => Relation::Ge,
            Metric::L1 => Relation::Le,
        };
        let frac = layer_fraction_satisfying(&curves.prototype, &curves.diff_class, relation)?;
        let cmp = match metric {
            Metric::Spearman => ">=",
            Metric::L1 => "<=",
        };
        println!("{tag}: prototype {cmp} different-class baseline on {:.1}% of layers", frac * 100.0);
        summary.insert(format!("{tag}_fraction_vs_diff"), serde_json::json!(frac));

        if !args.raw {
            let anchors = compute_anchors_with_cache(
                &model,
                &class_sets,
                metric,
                cli.seed,
                cache.as_ref(),
            )?;
            for (kind, curve) in [
                ("prototype", &curves.prototype),
                ("same", &curves.same_class),
                ("diff", &curves.diff_class),
            ] {
                let normalized = normalize_curve(curve, &anchors)?;
                write_curve_csv(
                    &cli.out.join(format!("{tag}_{kind}_normalized.csv")),
                    &normalized,
                    &layer_names,
                )?;
                let smoothed = smooth_curve(&normalized, args.window_mean, args.window_std)?;
                write_curve_csv(
                    &cli.out.join(format!("{tag}_{kind}_smoothed.csv")),
                    &smoothed,
                    &layer_names,
                )?;
                if kind == "prototype" {
                    if let Some((mean, _)) = curve_stats(&normalized) {
                        summary.insert(
                            format!("{tag}_prototype_normalized_mean"),
                            serde_json::json!(mean),
                        );
                    }
                }
            }
            let smoothed: Vec<SimilarityCurve> = [
                &curves.prototype,
                &curves.same_class,
                &curves.diff_class,
            ]
            .iter()
            .map(|c| {
                let n = normalize_curve(c, &anchors)?;
                smooth_curve(&n, args.window_mean, args.window_std)
            })
            .collect::<protopath::Result<_>>()?;
            plot_curves(
                &cli.out.join(format!("{tag}_curves.png")),
                &format!("{tag} path similarity, class {target}"),
                &[
                    ("prototype", &smoothed[0]),
                    ("same class", &smoothed[1]),
                    ("different class", &smoothed[2]),
                ],
            )?;
        }
    }
    summary.insert("class_id".into(), serde_json::json!(target));
    summary.insert("seed".into(), serde_json::json!(cli.seed));
    summary.insert("model_weight_hash".into(), serde_json::json!(model.weight_hash));
    summary.insert(
        "prototype_config_hash".into(),
        serde_json::json!(config_hash(&proto.config)),
    );
    protopath::io::atomic_write(
        &cli.out.join("evaluate_summary.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(summary))?.as_bytes(),
    )?;
    write_run_meta(cli, "evaluate", Some(&model.weight_hash), &config_hash(&proto.config))?;
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let model = load_model_arg(cli)?;
    let cache = activation_cache(cli);
    let class_sets = load_class_sets(&model, &args.data, args.limit)?;
    let images = &class_sets
        .iter()
        .find(|(c, _)| *c == args.class)
        .with_context(|| format!("dataset has no images for class {}", args.class))?
        .1;
    let profile = mean_profile_with_cache(&model, images, Some(args.class), cache.as_ref())?;
    let axes = match args.axes.as_str() {
        "full" => paper_axes(),
        _ => SweepAxes {
            scale: vec![None, Some((0.8, 1.2)), Some((0.5, 1.5))],
            rotation: vec![None, Some(30.0), Some(90.0)],
            translate: vec![None, Some((0.1, 0.1)), Some((0.5, 0.5))],
        },
    };
    let grid = build_grid(&axes)?;
    let base = OptimConfig {
        learning_rate: 0.05,
        steps: args.steps,
        pv_steps: args.pv_steps,
        hf_weight: args
            .hf_weight
            .unwrap_or(protopath::optimizer::DEFAULT_HF_WEIGHT),
        affine: AffineConfig::identity(),
        seed: cli.seed,
        clamp_pixels: true,
    };
    let row_cache = cli.cache_dir.as_ref().map(|d| d.join("sweep_rows"));
    let result = run_sweep(
        &model,
        args.class,
        &grid,
        &profile,
        &base,
        row_cache.as_deref(),
        cache.as_ref(),
    )?;
    write_sweep_csv(&cli.out.join("sweep.csv"), &result)?;
    write_sweep_json(&cli.out.join("sweep.json"), &result)?;
    write_run_meta(cli, "sweep", Some(&model.weight_hash), &config_hash(&base))?;
    println!("{}", format_top_table(&result, 5));
    println!("{} configs evaluated -> {}", result.rows.len(), cli.out.join("sweep.csv").display());
    Ok(())
}

fn cmd_probe(cli: &Cli, args: &ProbeArgs) -> Result<()> {
    let model = load_model_arg(cli)?;
    let manifest = read_image_set_manifest(&args.manifest)?;
    let report = evaluate_set(&model, &manifest, args.target, &args.watch)?;
    write_report_json(&cli.out.join(format!("probe_{}.json", report.set_id)), &report)?;
    println!(
        "set '{}': accuracy {:.1}% over {} images",
        report.set_id,
        report.accuracy * 100.0,
        report.n_images
    );
    for (c, p) in &report.watched {
        println!("  mean P(class {c}) = {p:.3}");
    }
    if let Some(against) = &args.against {
        let manifest_b = read_image_set_manifest(against)?;
        let report_b = evaluate_set(&model, &manifest_b, args.target, &args.watch)?;
        write_report_json(
            &cli.out.join(format!("probe_{}.json", report_b.set_id)),
            &report_b,
        )?;
        let contrast = compare_sets(&report, &report_b)?;
        let md = format_contrast_markdown(&contrast, Some(&model));
        protopath::io::atomic_write(&cli.out.join("probe_contrast.md"), md.as_bytes())?;
        println!("\n{md}");
    }
    write_run_meta(cli, "probe", Some(&model.weight_hash), &config_hash(&args.target))?;
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let dir = args.from.clone().unwrap_or_else(|| cli.out.clone());
    let mut found = false;
    for tag in ["spearman", "l1"] {
        let mut series = Vec::new();
        for kind in ["prototype", "same", "diff"] {
            let path = dir.join(format!("{tag}_{kind}_smoothed.csv"));
            if path.is_file() {
                series.push((kind, read_curve_csv(&path)?));
            }
        }
        if series.is_empty() {
            continue;
        }
        found = true;
        println!("{tag} curves:");
        for (kind, (curve, _)) in &series {
            if let Some((mean, std)) = curve_stats(curve) {
                println!("  {kind:<10} {mean:.3} \u{b1} {std:.3}");
            }
        }
        let labeled: Vec<(&str, &SimilarityCurve)> = series
            .iter()
            .map(|(kind, (curve, _))| {
                (
                    match *kind {
                        "prototype" => "prototype",
                        "same" => "same class",
                        _ => "different class",
                    },
                    curve,
                )
            })
            .collect();
        plot_curves(
            &cli.out.join(format!("report_{tag}_curves.png")),
            &format!("{tag} path similarity"),
            &labeled,
        )?;
        println!("  plot: {}", cli.out.join(format!("report_{tag}_curves.png")).display());
    }
    if !found {
        bail!("no curve CSVs found under {}", dir.display());
    }
    Ok(())
}
