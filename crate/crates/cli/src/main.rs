//! `forestseg` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O
//! errors. Every run writes a `<output>.manifest.txt` next to its output.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use forestseg::features::{
    assemble_feature_table, geometric_features, FeatureMask, FeatureTable, GeometricFeature,
    Scenario, DEFAULT_RADIUS_M,
};
use forestseg::forest::{
    load_model, save_model, train_forest, ClassWeightMode, ForestParams, MaxFeatures,
};
use forestseg::io::{
    read_channel_cloud, read_cloud_header, read_feature_table, read_multispectral_cloud,
    read_predictions, split_into_plots, split_train_test, write_channel_cloud, write_feature_table,
    write_multispectral_cloud, write_predictions, CloudFormat, SplitSpec, SplitUnit, BINARY_MAGIC,
};
use forestseg::metrics::{
    metrics, run_ablation, AblationParams, AblationReport, AblationRow, AblationScenario,
    ConfusionMatrix, WiouWeights,
};
use forestseg::preprocess::{
    merge_channels, normalize_height, sor_filter, HeightNormParams, MergeParams, SorParams,
};
use forestseg::spectral::{vi_separability, VegetationIndexKind};
use forestseg::synthetic::{generate_scene, SceneSpec};
use forestseg::{Channel, Error, MultispectralCloud, Result, SemanticClass};
use log::info;

use crate::manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "forestseg",
    version,
    about = "Multispectral LiDAR forest segmentation pipeline"
)]
struct Cli {
    /// Worker threads (default: FORESTSEG_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Statistical outlier removal on one cloud.
    Sor(SorArgs),
    /// Fuse SWIR, NIR and Green clouds into one multispectral cloud.
    Merge(MergeArgs),
    /// Add height above the local terrain minimum.
    Normalize(NormalizeArgs),
    /// Build the feature table of one cloud.
    Features(FeaturesArgs),
    /// Train a random forest on labeled feature tables.
    Train(TrainArgs),
    /// Predict classes for feature tables.
    Predict(PredictArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Train and score one forest per feature scenario.
    Ablate(AblateArgs),
    /// Generate a labeled synthetic scene.
    Synth(SynthArgs),
    /// Per-class vegetation index statistics and separability.
    ViReport(ViReportArgs),
    /// Cut clouds into plots and split them into training and test sets.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
struct OutputFormat {
    /// Cloud encoding of the output: binary or text.
    #[arg(long, default_value = "binary", value_parser = parse_via::<CloudFormat>)]
    format: CloudFormat,
}

#[derive(Args, Debug)]
struct SorArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Neighbors in the mean distance.
    #[arg(long, default_value_t = SorParams::default().k_neighbors)]
    k_neighbors: usize,
    /// Standard deviations above the mean a point may lie.
    #[arg(long, default_value_t = SorParams::default().sigma_multiplier)]
    sigma_multiplier: f64,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct MergeArgs {
    #[arg(long)]
    swir: PathBuf,
    #[arg(long)]
    nir: PathBuf,
    #[arg(long)]
    green: PathBuf,
    #[arg(long, alias = "radius", default_value_t = MergeParams::default().radius_m)]
    radius_m: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = HeightNormParams::default().cell_size_m)]
    cell_size_m: f64,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Args, Debug, Clone)]
struct FeatureSelection {
    /// Geometric columns: all, none, or a comma-separated list of names.
    #[arg(long, default_value = "all")]
    geometric: String,
    /// Neighborhood radius of the geometric features.
    #[arg(long, alias = "radius", default_value_t = DEFAULT_RADIUS_M)]
    radius_m: f64,
}

impl FeatureSelection {
    fn features(&self) -> Result<Vec<GeometricFeature>> {
        match self.geometric.trim() {
            "all" => Ok(GeometricFeature::ALL.to_vec()),
            "none" | "" => Ok(Vec::new()),
            list => list.split(',').map(str::parse).collect(),
        }
    }
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Feature scenario key, e.g. coordinates, swir+nir, swir+nir+green+vi.
    #[arg(long, default_value = "swir+nir+green", value_parser = parse_via::<Scenario>)]
    scenario: Scenario,
    #[command(flatten)]
    selection: FeatureSelection,
}

#[derive(Args, Debug, Clone)]
struct ForestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ForestParams::default().n_estimators)]
    n_estimators: usize,
    #[arg(long, default_value_t = ForestParams::default().max_depth)]
    max_depth: usize,
    /// log2, sqrt or all.
    #[arg(long, default_value = "log2", value_parser = parse_via::<MaxFeatures>)]
    max_features: MaxFeatures,
    #[arg(long, default_value_t = ForestParams::default().min_samples_split)]
    min_samples_split: usize,
    #[arg(long, default_value_t = ForestParams::default().min_samples_leaf)]
    min_samples_leaf: usize,
    /// balanced or uniform.
    #[arg(long, default_value = "balanced", value_parser = parse_via::<ClassWeightMode>)]
    class_weight: ClassWeightMode,
    /// Bootstrap draws per tree (default: one per training row).
    #[arg(long)]
    max_samples: Option<usize>,
}

impl ForestArgs {
    fn params(&self) -> ForestParams {
        ForestParams {
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            max_features: self.max_features,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            class_weight: self.class_weight,
            seed: self.seed,
            max_samples: self.max_samples,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labeled feature tables; rows are concatenated.
    #[arg(long, required = true, num_args = 1..)]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Labeled feature tables or clouds, in prediction order.
    #[arg(long, required = true, num_args = 1..)]
    truth: Vec<PathBuf>,
    /// Row label in the report.
    #[arg(long, default_value = "evaluation")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// Labeled, height-normalized training clouds.
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    test: Vec<PathBuf>,
    /// `all` or a comma-separated list of scenario keys.
    #[arg(long, default_value = "all")]
    scenarios: String,
    #[command(flatten)]
    selection: FeatureSelection,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Scene description (key = value lines); defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config point count.
    #[arg(long)]
    points: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct ViReportArgs {
    #[arg(long)]
    input: PathBuf,
    /// `all` or one index name, e.g. NDVI_NIR-SWIR.
    #[arg(long, default_value = "all")]
    index: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Cut each input into a grid of plots, e.g. 5x1.
    #[arg(long, default_value = "1x1")]
    tiles: String,
    /// Training share, e.g. 4/5.
    #[arg(long, default_value = "4/5")]
    ratio: String,
    /// per_plot or per_point.
    #[arg(long, default_value = "per_plot", value_parser = parse_via::<SplitUnit>)]
    unit: SplitUnit,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives train_<i> and test_<i> clouds.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    format: OutputFormat,
}

fn parse_via<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str, sep: char, what: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidInput(format!("{what} '{s}' is not of the form a{sep}b"));
    let (a, b) = s.split_once(sep).ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn extension(format: CloudFormat) -> &'static str {
    match format {
        CloudFormat::Binary => "bin",
        CloudFormat::Text => "txt",
    }
}

fn is_cloud_file(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut head = [0u8; 16];
    let mut file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let n = file.read(&mut head).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(&head[..n] == BINARY_MAGIC.as_slice() || head[..n].starts_with(b"#"))
}

fn read_clouds(paths: &[PathBuf]) -> Result<Vec<MultispectralCloud>> {
    paths.iter().map(|p| read_multispectral_cloud(p)).collect()
}

fn read_tables(paths: &[PathBuf]) -> Result<(FeatureTable, Option<Vec<SemanticClass>>)> {
    let mut tables = Vec::new();
    let mut labels = Some(Vec::new());
    for p in paths {
        let (t, l) = read_feature_table(p)?;
        tables.push(t);
        labels = match (labels, l) {
            (Some(mut acc), Some(l)) => {
                acc.extend(l);
                Some(acc)
            }
            _ => None,
        };
    }
    Ok((FeatureTable::concat(&tables)?, labels))
}

fn run(command: &Command, m: &mut RunManifest) -> Result<()> {
    match command {
        Command::Sor(a) => {
            let params = SorParams {
                k_neighbors: a.k_neighbors,
                sigma_multiplier: a.sigma_multiplier,
            };
            params.validate()?;
            m.input(&a.input);
            m.output(&a.out);
            let header = read_cloud_header(&a.input)?;
            if header.channels.len() == 1 {
                let cloud = read_channel_cloud(&a.input, header.channels[0])?;
                let out = sor_filter(&cloud, &params)?;
                info!(
                    "sor: kept {} of {} {} points",
                    out.cloud.len(),
                    cloud.len(),
                    cloud.channel()
                );
                write_channel_cloud(&out.cloud, &a.out, a.format.format)
            } else {
                let cloud = read_multispectral_cloud(&a.input)?;
                let out = sor_filter(&cloud, &params)?;
                info!("sor: kept {} of {} points", out.cloud.len(), cloud.len());
                write_multispectral_cloud(&out.cloud, &a.out, a.format.format)
            }
        }
        Command::Merge(a) => {
            let params = MergeParams {
                radius_m: a.radius_m,
            };
            params.validate()?;
            for p in [&a.swir, &a.nir, &a.green] {
                m.input(p);
            }
            m.output(&a.out);
            let swir = read_channel_cloud(&a.swir, Channel::Swir)?;
            let nir = read_channel_cloud(&a.nir, Channel::Nir)?;
            let green = read_channel_cloud(&a.green, Channel::Green)?;
            let fused = merge_channels(&swir, &nir, &green, &params)?;
            info!("merge: {} fused points", fused.len());
            write_multispectral_cloud(&fused, &a.out, a.format.format)
        }
        Command::Normalize(a) => {
            let params = HeightNormParams {
                cell_size_m: a.cell_size_m,
            };
            params.validate()?;
            m.input(&a.input);
            m.output(&a.out);
            let cloud = read_multispectral_cloud(&a.input)?;
            let out = normalize_height(&cloud, &params)?;
            info!("normalize: {} points", out.len());
            write_multispectral_cloud(&out, &a.out, a.format.format)
        }
        Command::Features(a) => {
            let mask = a.scenario.mask().with_geometric(&a.selection.features()?);
            m.input(&a.input);
            m.output(&a.out);
            let cloud = read_multispectral_cloud(&a.input)?;
            let table = features_of(&cloud, &mask, a.selection.radius_m)?;
            let labels = if cloud.has_labels() {
                Some(cloud.labels()?)
            } else {
                None
            };
            info!(
                "features: {} rows x {} columns",
                table.n_rows(),
                table.n_cols()
            );
            write_feature_table(&table, labels.as_deref(), &a.out)
        }
        Command::Train(a) => {
            let params = a.forest.params();
            params.validate()?;
            m.seed = Some(params.seed);
            a.features.iter().for_each(|p| m.input(p));
            m.output(&a.out);
            let (table, labels) = read_tables(&a.features)?;
            let labels = labels.ok_or_else(|| {
                Error::InvalidInput("training feature tables need a label column".into())
            })?;
            let model = train_forest(&table, &labels, &params)?;
            info!(
                "train: {} trees, {} nodes",
                model.trees.len(),
                model.node_count()
            );
            save_model(&model, &a.out)
        }
        Command::Predict(a) => {
            m.input(&a.model);
            a.features.iter().for_each(|p| m.input(p));
            m.output(&a.out);
            let model = load_model(&a.model)?;
            let (table, _) = read_tables(&a.features)?;
            let prediction = model.predict(&table)?;
            info!("predict: {} rows", prediction.labels.len());
            write_predictions(&a.out, &prediction.labels, &prediction.scores)
        }
        Command::Evaluate(a) => {
            m.input(&a.predictions);
            a.truth.iter().for_each(|p| m.input(p));
            m.output(&a.out);
            let predicted = read_predictions(&a.predictions)?;
            let mut truth = Vec::new();
            for p in &a.truth {
                if is_cloud_file(p)? {
                    truth.extend(read_multispectral_cloud(p)?.labels()?);
                } else {
                    let (_, labels) = read_feature_table(p)?;
                    truth.extend(labels.ok_or_else(|| {
                        Error::InvalidInput(format!("{} has no label column", p.display()))
                    })?);
                }
            }
            let confusion = ConfusionMatrix::from_labels(&truth, &predicted)?;
            let report = AblationReport {
                rows: vec![AblationRow {
                    scenario: a.name.clone(),
                    report: metrics(&confusion, &WiouWeights::default())?,
                    confusion,
                }],
            };
            write_report(&report, &a.out)
        }
        Command::Ablate(a) => {
            let forest = a.forest.params();
            forest.validate()?;
            m.seed = Some(forest.seed);
            let geometric = a.selection.features()?;
            let scenarios: Vec<AblationScenario> = if a.scenarios.trim() == "all" {
                Scenario::ALL.to_vec()
            } else {
                a.scenarios
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            .into_iter()
            .map(|s| AblationScenario::from_scenario(s, &geometric))
            .collect();
            a.train.iter().chain(&a.test).for_each(|p| m.input(p));
            m.output(&a.out);
            let train = read_clouds(&a.train)?;
            let test = read_clouds(&a.test)?;
            let params = AblationParams {
                forest,
                radius_m: a.selection.radius_m,
                weights: WiouWeights::default(),
            };
            let report = run_ablation(&train, &test, &scenarios, &params)?;
            print!("{}", report.to_table());
            write_report(&report, &a.out)
        }
        Command::Synth(a) => {
            let mut spec = match &a.config {
                Some(path) => {
                    m.input(path);
                    SceneSpec::from_config_file(path)?
                }
                None => SceneSpec::default(),
            };
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            if let Some(points) = a.points {
                spec.n_points = points;
            }
            m.seed = Some(spec.seed);
            let scene = generate_scene(&spec)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let ext = extension(a.format.format);
            for cloud in &scene.channels {
                let path = a.out.join(format!("{}.{ext}", cloud.channel().name()));
                write_channel_cloud(cloud, &path, a.format.format)?;
                m.output(&path);
            }
            let path = a.out.join(format!("reference.{ext}"));
            write_multispectral_cloud(&scene.reference, &path, a.format.format)?;
            m.output(&path);
            info!("synth: {} reference points", scene.reference.len());
            Ok(())
        }
        Command::ViReport(a) => {
            let kinds: Vec<VegetationIndexKind> = if a.index.trim() == "all" {
                VegetationIndexKind::ALL.to_vec()
            } else {
                a.index.split(',').map(str::parse).collect::<Result<_>>()?
            };
            m.input(&a.input);
            m.output(&a.out);
            let cloud = read_multispectral_cloud(&a.input)?;
            let mut text = String::new();
            for kind in kinds {
                text.push_str(&vi_separability(&cloud, kind)?.to_text());
                text.push('\n');
            }
            print!("{text}");
            std::fs::write(&a.out, text).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })
        }
        Command::Split(a) => {
            let (nx, ny) = parse_pair(&a.tiles, 'x', "tile grid")?;
            let (num, den) = parse_pair(&a.ratio, '/', "ratio")?;
            let spec = SplitSpec {
                ratio_train: (num as u32, den as u32),
                seed: a.seed,
                unit: a.unit,
            };
            spec.validate()?;
            m.seed = Some(a.seed);
            a.input.iter().for_each(|p| m.input(p));
            let mut plots = Vec::new();
            for cloud in read_clouds(&a.input)? {
                plots.extend(split_into_plots(&cloud, nx, ny)?);
            }
            let split = split_train_test(&plots, &spec)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let ext = extension(a.format.format);
            for (side, clouds) in [("train", &split.train), ("test", &split.test)] {
                for (i, cloud) in clouds.iter().enumerate() {
                    let path = a.out.join(format!("{side}_{i}.{ext}"));
                    write_multispectral_cloud(cloud, &path, a.format.format)?;
                    m.output(&path);
                }
            }
            info!(
                "split: {} training and {} test clouds",
                split.train.len(),
                split.test.len()
            );
            Ok(())
        }
    }
}

/// Same per-cloud feature construction as the ablation runner.
fn features_of(
    cloud: &MultispectralCloud,
    mask: &FeatureMask,
    radius_m: f64,
) -> Result<FeatureTable> {
    let geometry = if mask.geometric.is_empty() {
        None
    } else {
        Some(geometric_features(&cloud.positions(), radius_m)?)
    };
    assemble_feature_table(cloud, mask, geometry.as_deref())
}

fn write_report(report: &AblationReport, path: &Path) -> Result<()> {
    let text = format!("{}\n{}", report.to_table(), report.to_key_value());
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sor(_) => "sor",
        Command::Merge(_) => "merge",
        Command::Normalize(_) => "normalize",
        Command::Features(_) => "features",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Evaluate(_) => "evaluate",
        Command::Ablate(_) => "ablate",
        Command::Synth(_) => "synth",
        Command::ViReport(_) => "vi-report",
        Command::Split(_) => "split",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("FORESTSEG_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let start = Instant::now();
    let mut manifest = RunManifest::new(command_name(&cli.command), format!("{:?}", cli.command));
    match run(&cli.command, &mut manifest) {
        Ok(()) => {
            manifest.duration = start.elapsed();
            if let Err(e) = manifest.write() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
