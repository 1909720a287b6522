//! Command-line driver: argument parsing, run configuration, dataset
//! loading and the artifacts each subcommand writes.

pub mod config;
mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fogsense::characterize::TTestBand;
use fogsense::evaluate::{
    compare_systems, leakage_probe, loso_cv, replay_feed, select_features, CausalExtractor, LosoParams, LosoReport,
    SelectionMode, StreamDetector,
};
use fogsense::model::{train_rusboost, DetectorModel, EpochDataset};
use fogsense::pipeline::{
    characterize, extract_features, list_subjects, load_subject, read_footswitch_config, recording_epochs,
    to_common_rate, Characterization,
};
use fogsense::signalio::{recording_paths, AnnotationTrack, Sidecar};
use fogsense::synth::generate_to_dir;
use rayon::prelude::*;

pub use config::{ConfigError, RunConfig, DEFAULT_CONFIG};
pub use manifest::{Manifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "fogsense", version, about = "Multi-modal freezing-of-gait characterization and detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML), or `default` for the built-in defaults.
    #[arg(long, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Output directory; overrides `paths.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WithData {
    #[command(flatten)]
    common: Common,
    /// Dataset directory; overrides `paths.data_dir`.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset into the output directory.
    Synth(Common),
    /// Write the labeled epoch feature table.
    Features(WithData),
    /// Pointwise freezing-vs-turning bands for every feature.
    Characterize(WithData),
    /// Symmetrical uncertainty and FCBF over all subjects.
    Select(WithData),
    /// Train a detector on all subjects.
    Train(WithData),
    /// Leave-one-subject-out evaluation.
    Evaluate(WithData),
    /// Run the streaming detector over newline-delimited JSON samples.
    Stream(StreamArgs),
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Trained model (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory holding the subject's sidecar and footswitch setup.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Subject whose channel layout the feed follows.
    #[arg(long)]
    subject: String,
    /// Read samples from this file instead of stdin.
    #[arg(long, conflicts_with = "replay")]
    input: Option<PathBuf>,
    /// Feed the subject's own recording instead of reading samples.
    #[arg(long)]
    replay: bool,
    /// Write events and a manifest here instead of printing events.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures, split by exit status: usage and configuration problems exit 2,
/// everything else 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] fogsense::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path).map_err(|e| match e {
        e @ (ConfigError::Read { .. } | ConfigError::Parse { .. }) => e,
        other => ConfigError::Parse { path: path.into(), reason: other.to_string() },
    })?)
}

fn existing_dir(path: &Path, what: &str) -> Result<PathBuf> {
    if path.is_dir() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Usage(format!("{what} directory {} does not exist", path.display())))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| fogsense::Error::Io { path: path.into(), source: e }.into())
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    data: Option<PathBuf>,
}

impl Ctx {
    fn new(common: &Common, data: Option<&Option<PathBuf>>) -> Result<Self> {
        let cfg = load_config(&common.config)?;
        let out = common.out.clone().unwrap_or_else(|| cfg.paths.out_dir.clone());
        let data = match data {
            Some(flag) => {
                Some(existing_dir(flag.as_ref().unwrap_or(&cfg.paths.data_dir), "data")?)
            }
            None => None,
        };
        create_dir(&out)?;
        Ok(Ctx { cfg, out, data })
    }

    fn data(&self) -> &Path {
        self.data.as_deref().expect("data directory resolved for this command")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, command: &str, outputs: &[String]) -> Result<()> {
        Manifest::build(command, &self.cfg, self.data.as_deref(), &self.out, outputs)?.write(&self.out)?;
        Ok(())
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(c) => synth(Ctx::new(&c, None)?),
        Command::Features(a) => features(Ctx::new(&a.common, Some(&a.data))?),
        Command::Characterize(a) => characterize_cmd(Ctx::new(&a.common, Some(&a.data))?),
        Command::Select(a) => select(Ctx::new(&a.common, Some(&a.data))?),
        Command::Train(a) => train(Ctx::new(&a.common, Some(&a.data))?),
        Command::Evaluate(a) => evaluate(Ctx::new(&a.common, Some(&a.data))?),
        Command::Stream(a) => stream(a),
    }
}

fn synth(ctx: Ctx) -> Result<()> {
    let cfg = ctx.cfg.synth_config();
    generate_to_dir(&ctx.out, &cfg)?;
    println!("wrote {} subjects to {}", cfg.n_subjects, ctx.out.display());
    ctx.finish("synth", &[])
}

/// Labeled epochs and reference annotations of every subject in a dataset.
pub fn dataset_epochs(cfg: &RunConfig, data: &Path) -> fogsense::Result<(EpochDataset, BTreeMap<String, AnnotationTrack>)> {
    let footswitch = read_footswitch_config(data)?;
    let ids = list_subjects(data)?;
    let params = cfg.feature_params();
    let e = &cfg.evaluation;
    let per_subject = ids
        .par_iter()
        .map(|id| {
            let s = load_subject(data, id, &footswitch)?;
            let ds = recording_epochs(
                &s.recording,
                &s.switches,
                &s.reference,
                &params,
                cfg.features.mode,
                e.window_s,
                e.overlap,
                e.buffer_s,
            )?;
            Ok((ds, s.reference))
        })
        .collect::<fogsense::Result<Vec<_>>>()?;
    let mut all = EpochDataset::new(CausalExtractor::feature_names(), e.window_s);
    let mut anns = BTreeMap::new();
    for (id, (ds, ann)) in ids.into_iter().zip(per_subject) {
        all.extend(ds)?;
        anns.insert(id, ann);
    }
    Ok((all, anns))
}

fn features(ctx: Ctx) -> Result<()> {
    let (ds, _) = dataset_epochs(&ctx.cfg, ctx.data())?;
    ds.write_csv(&ctx.path("epochs.csv"))?;
    println!("{} epochs of {} subjects", ds.len(), ds.subjects().len());
    ctx.finish("features", &["epochs.csv".into()])
}

/// Freezing-vs-turning bands over every subject of a dataset, from the
/// zero-phase features.
pub fn dataset_characterization(cfg: &RunConfig, data: &Path) -> fogsense::Result<Vec<Characterization>> {
    let footswitch = read_footswitch_config(data)?;
    let ids = list_subjects(data)?;
    let params = cfg.feature_params();
    let loaded = ids
        .par_iter()
        .map(|id| {
            let s = load_subject(data, id, &footswitch)?;
            let f = extract_features(&to_common_rate(&s.recording)?, &s.switches, &params)?;
            Ok((f, s.reference))
        })
        .collect::<fogsense::Result<Vec<_>>>()?;
    let (features, anns): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    let anns = ids.into_iter().zip(anns).collect();
    characterize(&features, &anns)
}

/// Fraction of relative-time samples with disjoint bands, before onset and
/// during the first three seconds of freezing.
fn band_summary(band: &TTestBand) -> [f64; 2] {
    [band.separated_fraction(-10.0, 0.0), band.separated_fraction(0.0, 3.0)]
}

fn characterize_cmd(ctx: Ctx) -> Result<()> {
    let results = dataset_characterization(&ctx.cfg, ctx.data())?;
    create_dir(&ctx.path("bands"))?;
    let mut outputs = vec!["characterization.csv".to_string()];
    let summary = ctx.path("characterization.csv");
    let mut w = csv::Writer::from_path(&summary).map_err(fogsense::Error::from)?;
    w.write_record(["feature", "n_freezing", "n_control", "unmatched", "separated_before_onset", "separated_after_onset"])
        .map_err(fogsense::Error::from)?;
    for c in &results {
        let name = c.kind.name();
        let rel = format!("bands/{name}.csv");
        c.band.write_csv(&ctx.path(&rel))?;
        outputs.push(rel);
        let [pre, post] = band_summary(&c.band);
        w.write_record([
            name,
            c.n_freezing.to_string(),
            c.n_control.to_string(),
            c.unmatched.to_string(),
            format!("{pre:?}"),
            format!("{post:?}"),
        ])
        .map_err(fogsense::Error::from)?;
    }
    w.flush().map_err(|e| fogsense::Error::Io { path: summary, source: e })?;
    ctx.finish("characterize", &outputs)
}

fn select(ctx: Ctx) -> Result<()> {
    let (ds, _) = dataset_epochs(&ctx.cfg, ctx.data())?;
    let s = &ctx.cfg.selection;
    let report = select_features(&ds, s.discretizer, s.su_threshold)?;
    report.write_csv(&ctx.path("selection.csv"))?;
    println!("selected: {}", report.selected_names().join(", "));
    ctx.finish("select", &["selection.csv".into()])
}

fn train(ctx: Ctx) -> Result<()> {
    let (ds, _) = dataset_epochs(&ctx.cfg, ctx.data())?;
    let mut outputs = vec!["model.json".to_string()];
    let selected = match ctx.cfg.selection_mode() {
        SelectionMode::Fixed(names) => names
            .iter()
            .map(|n| ds.feature_index(n).expect("names checked by config validation"))
            .collect(),
        SelectionMode::PerFold | SelectionMode::Global => {
            let s = &ctx.cfg.selection;
            let report = select_features(&ds, s.discretizer, s.su_threshold)?;
            report.write_csv(&ctx.path("selection.csv"))?;
            outputs.push("selection.csv".into());
            report.selected
        }
    };
    if selected.is_empty() {
        return Err(fogsense::Error::Validation("no feature carries information about the class".into()).into());
    }
    let model = train_rusboost(&ds, &selected, &ctx.cfg.boost_params(), ctx.cfg.features.mode)?;
    model.write(&ctx.path("model.json"))?;
    println!("trained on {} epochs with {}", ds.len(), model.selected_names().join(", "));
    ctx.finish("train", &outputs)
}

fn write_folds(ctx: &Ctx, report: &LosoReport, outputs: &mut Vec<String>) -> Result<()> {
    create_dir(&ctx.path("folds"))?;
    for f in &report.folds {
        let pr = format!("folds/{}.pr.csv", f.subject_id);
        f.pr.write_csv(&ctx.path(&pr))?;
        let model = format!("folds/{}.model.json", f.subject_id);
        f.model.write(&ctx.path(&model))?;
        outputs.extend([pr, model]);
    }
    let sel = ctx.path("selected_features.csv");
    let mut w = csv::Writer::from_path(&sel).map_err(fogsense::Error::from)?;
    w.write_record(["subject_id", "features"]).map_err(fogsense::Error::from)?;
    for f in &report.folds {
        w.write_record([f.subject_id.as_str(), &f.selected.join(";")]).map_err(fogsense::Error::from)?;
    }
    w.flush().map_err(|e| fogsense::Error::Io { path: sel, source: e })?;
    outputs.push("selected_features.csv".into());
    Ok(())
}

fn evaluate(ctx: Ctx) -> Result<()> {
    let (ds, anns) = dataset_epochs(&ctx.cfg, ctx.data())?;
    let params = ctx.cfg.loso_params();
    let report = loso_cv(&ds, &anns, &params)?;
    report.report.write_csv(&ctx.path("metrics.csv"))?;
    let mut outputs = vec!["metrics.csv".to_string()];
    write_folds(&ctx, &report, &mut outputs)?;

    let compare = &ctx.cfg.evaluation.compare_features;
    if !compare.is_empty() {
        let multi: Vec<f64> = report.folds.iter().map(|f| f.metrics.mcc).collect();
        let singles = compare
            .iter()
            .map(|name| {
                let p = LosoParams { selection: SelectionMode::Fixed(vec![name.clone()]), ..params.clone() };
                let r = loso_cv(&ds, &anns, &p)?;
                Ok((name.clone(), r.folds.iter().map(|f| f.metrics.mcc).collect()))
            })
            .collect::<fogsense::Result<Vec<(String, Vec<f64>)>>>()?;
        let rows = compare_systems(&multi, &singles)?;
        let path = ctx.path("comparisons.csv");
        let mut w = csv::Writer::from_path(&path).map_err(fogsense::Error::from)?;
        w.write_record(["system", "n_nonzero", "p", "p_bonferroni"]).map_err(fogsense::Error::from)?;
        let na = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:?}"));
        for c in rows {
            w.write_record([c.name, c.n_nonzero.to_string(), na(c.p), na(c.p_bonferroni)])
                .map_err(fogsense::Error::from)?;
        }
        w.flush().map_err(|e| fogsense::Error::Io { path, source: e })?;
        outputs.push("comparisons.csv".into());
    }

    if ctx.cfg.evaluation.leakage_probe {
        let probe = leakage_probe(&ds, &params)?;
        let path = ctx.path("leakage.csv");
        let mut w = csv::Writer::from_path(&path).map_err(fogsense::Error::from)?;
        w.write_record(["subject_id", "model_unchanged"]).map_err(fogsense::Error::from)?;
        for (s, same) in &probe {
            w.write_record([s.as_str(), &same.to_string()]).map_err(fogsense::Error::from)?;
        }
        w.flush().map_err(|e| fogsense::Error::Io { path, source: e })?;
        outputs.push("leakage.csv".into());
        if let Some((s, _)) = probe.iter().find(|(_, same)| !same) {
            return Err(fogsense::Error::Validation(format!("held-out data of {s} influenced its fold")).into());
        }
    }

    let m = &report.report;
    println!(
        "{} folds: sensitivity {:.3} ± {:.3}, specificity {:.3} ± {:.3}, precision {:.3} ± {:.3}, MCC {:.3} ± {:.3}, PR-AUC {:.3} ± {:.3}",
        report.folds.len(),
        m.sensitivity.mean,
        m.sensitivity.std,
        m.specificity.mean,
        m.specificity.std,
        m.precision.mean,
        m.precision.std,
        m.mcc.mean,
        m.mcc.std,
        m.pr_auc.mean,
        m.pr_auc.std,
    );
    ctx.finish("evaluate", &outputs)
}

fn stream(a: StreamArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let data = existing_dir(a.data.as_ref().unwrap_or(&cfg.paths.data_dir), "data")?;
    if !a.model.is_file() {
        return Err(CliError::Usage(format!("model file {} does not exist", a.model.display())));
    }
    let model = DetectorModel::read(&a.model)?;
    let (_, sidecar_path) = recording_paths(&data, &a.subject);
    let sidecar = Sidecar::read(&sidecar_path)?;
    let footswitch = read_footswitch_config(&data)?;
    let e = &cfg.evaluation;
    let extractor = CausalExtractor::new(
        &sidecar.channels,
        footswitch.subject(&a.subject)?,
        &cfg.feature_params(),
        e.window_s,
        e.overlap,
    )?;
    let mut det = StreamDetector::new(model, extractor, e.tau)?;

    let sink: Box<dyn Write> = match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("events.ndjson");
            Box::new(std::fs::File::create(&path).map_err(|e| fogsense::Error::Io { path, source: e })?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    if a.replay {
        let rec = fogsense::signalio::load_recording_pair(&data, &a.subject)?;
        let mut line = Vec::new();
        for sample in replay_feed(&rec) {
            for event in det.push(&sample)? {
                line.clear();
                serde_json::to_writer(&mut line, &event).map_err(fogsense::Error::from)?;
                line.push(b'\n');
                sink.write_all(&line).map_err(|e| fogsense::Error::Io { path: "<events>".into(), source: e })?;
            }
        }
    } else if let Some(path) = &a.input {
        let file = std::fs::File::open(path).map_err(|e| fogsense::Error::Io { path: path.clone(), source: e })?;
        det.run(BufReader::new(file), &mut sink)?;
    } else {
        det.run(std::io::stdin().lock(), &mut sink)?;
    }
    sink.flush().map_err(|e| fogsense::Error::Io { path: "<events>".into(), source: e })?;
    let stats = det.stats();
    log::info!(
        "{} samples, {} epochs, {} detections, {} gaps, worst epoch latency {:.1} ms",
        stats.samples,
        stats.epochs,
        stats.detections,
        stats.gaps,
        stats.max_latency_s * 1e3
    );
    if let Some(dir) = &a.out {
        let ctx = Ctx { cfg, out: dir.clone(), data: Some(data) };
        ctx.finish("stream", &["events.ndjson".into()])?;
    }
    Ok(())
}
