//! Command-line runner: `spatial-refer <command> --config run.json [--set a.b=value]...`
//!
//! Exit codes: 0 success, 2 config error, 3 missing input artifact, 4 runtime
//! failure. Failures print one JSON line to stderr:
//! `{"error":"config","exit":2,"message":"..."}`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Dataset, LabelSource};
use crate::encoding::{build_vocab, Vocab};
use crate::error::{Error, Result};
use crate::eval::ablation::{run_ablation, write_csv, AblationSpec};
use crate::eval::{evaluate, EvalConfig, MetricsFile};
use crate::model::{init_model, Checkpoint, ModelConfig};
use crate::perception::{read_predictions, write_predictions, DEFAULT_TOP1_ACCURACY};
use crate::seed;
use crate::synth::{generate_corpus, resolve_reference, template_lexicon, Corpus, CorpusConfig, GenConfig};
use crate::training::{check_problem, grad_check, train, write_log, LossWeights, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "spatial-refer", about = "Synthetic 3D referring-expression benchmark and model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a scalar field, e.g. `--set train.total_steps=200`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate scenes, utterances, vocabulary and (optionally) predicted labels.
    GenData(Common),
    /// Train a model on the training scenes.
    Train(Common),
    /// Evaluate a checkpoint on the held-out scenes.
    Eval(Common),
    /// Run the ablation grids.
    Ablate(Common),
    /// Re-resolve every utterance with the geometric oracle.
    OracleCheck(Common),
    /// Compare analytic and finite-difference gradients on the tiny config.
    GradCheck(Common),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Holds scenes.jsonl, utterances.jsonl, vocab.json, predictions.jsonl, manifest.json.
    pub data_dir: PathBuf,
    /// Checkpoint written by `train`, read by `eval`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Destination of logs, metrics and tables.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub perception: u64,
    pub init: u64,
    pub order: u64,
    pub eval: u64,
}

/// Architecture fields; vocabulary size and class count come from the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub use_sequence_positions: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::desk(6, 2);
        ModelSection {
            d_model: d.d_model,
            n_layers: d.n_layers,
            n_heads: d.n_heads,
            ff_dim: d.ff_dim,
            dropout: d.dropout,
            max_len: d.max_len,
            use_sequence_positions: d.use_sequence_positions,
        }
    }
}

impl ModelSection {
    pub fn resolve(&self, vocab_size: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            ff_dim: self.ff_dim,
            dropout: self.dropout,
            vocab_size,
            max_len: self.max_len,
            n_classes,
            use_sequence_positions: self.use_sequence_positions,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionSection {
    pub top1_accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub seeds: Vec<u64>,
    pub loss_rows: bool,
    pub label_cells: bool,
    pub orientation_cells: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            seeds: vec![0, 1, 2],
            loss_rows: true,
            label_cells: true,
            orientation_cells: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    /// `64` or `32`.
    pub bits: u32,
    pub epsilon: f64,
    pub coordinates: usize,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        GradCheckSection {
            bits: 64,
            epsilon: 1e-5,
            coordinates: 200,
        }
    }
}

/// Full run configuration. Seeds are required; every other section has defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    #[serde(default)]
    pub gen: GenConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    /// When present, gen-data also simulates predicted labels.
    #[serde(default)]
    pub perception: Option<PerceptionSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub ablation: AblationSection,
    #[serde(default)]
    pub grad_check: GradCheckSection,
}

impl RunConfig {
    /// Parses `text`, applies `--set` overrides, and checks every section.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::config(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if let Some(p) = self.perception {
            LabelSource::Noisy { p: p.top1_accuracy }.validate()?;
        }
        if self.corpus.scenes == 0 || self.corpus.utterances_per_scene == 0 {
            return Err(Error::config("corpus needs scenes and utterances"));
        }
        if !matches!(self.grad_check.bits, 32 | 64) {
            return Err(Error::config("grad_check.bits must be 32 or 64"));
        }
        Ok(())
    }

    /// Hash of the canonical JSON form without `paths`, so relocated runs agree.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("serializable");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("paths");
        }
        seed::fingerprint(value.to_string().as_bytes())
    }

    fn output_dir(&self) -> Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| Error::config("paths.output_dir is required for this command"))
    }

    fn checkpoint(&self) -> Result<&Path> {
        self.paths
            .checkpoint
            .as_deref()
            .ok_or_else(|| Error::config("paths.checkpoint is required for this command"))
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            init_seed: self.seeds.init,
            order_seed: self.seeds.order,
            ..self.train.clone()
        }
    }

    fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            seed: self.seeds.eval,
            ..self.eval
        }
    }
}

fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{spec}` must look like section.field=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(format!("override path `{path}` crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::config(format!("empty override path in `{spec}`")))
}

/// File layout of a data directory.
pub struct DataFiles {
    pub scenes: PathBuf,
    pub utterances: PathBuf,
    pub vocab: PathBuf,
    pub predictions: PathBuf,
    pub manifest: PathBuf,
}

impl DataFiles {
    pub fn in_dir(dir: &Path) -> DataFiles {
        DataFiles {
            scenes: dir.join("scenes.jsonl"),
            utterances: dir.join("utterances.jsonl"),
            vocab: dir.join("vocab.json"),
            predictions: dir.join("predictions.jsonl"),
            manifest: dir.join("manifest.json"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataManifest {
    pub fingerprint: String,
    pub vocab_fingerprint: String,
    pub scenes: usize,
    pub utterances: usize,
    pub predictions_top1_accuracy: Option<f64>,
    pub gen: GenConfig,
    pub corpus: CorpusConfig,
    pub data_seed: u64,
    pub perception_seed: u64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn vocab_for(gen: &GenConfig) -> Vocab {
    let labels = gen.class_labels();
    let lexicon = template_lexicon();
    build_vocab(labels.iter().map(String::as_str), lexicon.iter().map(String::as_str))
}

pub fn gen_data(cfg: &RunConfig) -> Result<DataManifest> {
    let dir = &cfg.paths.data_dir;
    std::fs::create_dir_all(dir)?;
    let files = DataFiles::in_dir(dir);
    let corpus = generate_corpus(&cfg.gen, &cfg.corpus, cfg.seeds.data)?;
    corpus.write_jsonl(&files.scenes, &files.utterances)?;
    let vocab = vocab_for(&cfg.gen);
    vocab.save(&files.vocab)?;
    let (n_scenes, n_utts) = (corpus.scenes.len(), corpus.records.len());
    let p = cfg.perception.map(|p| p.top1_accuracy);
    if let Some(p) = p {
        let mut ds = Dataset::new(corpus, cfg.gen.class_labels(), vocab.clone())?;
        ds.simulate_predictions(p, cfg.seeds.perception)?;
        write_predictions(&files.predictions, ds.predictions(p).expect("just simulated"))?;
    }
    let mut manifest = DataManifest {
        fingerprint: String::new(),
        vocab_fingerprint: vocab.fingerprint(),
        scenes: n_scenes,
        utterances: n_utts,
        predictions_top1_accuracy: p,
        gen: cfg.gen.clone(),
        corpus: cfg.corpus.clone(),
        data_seed: cfg.seeds.data,
        perception_seed: cfg.seeds.perception,
    };
    manifest.fingerprint = seed::fingerprint(serde_json::to_string(&manifest)?.as_bytes());
    write_json(&files.manifest, &manifest)?;
    Ok(manifest)
}

/// Loads a data directory written by `gen-data`, with predictions when present.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, DataManifest)> {
    let files = DataFiles::in_dir(dir);
    let manifest_text = std::fs::read_to_string(&files.manifest).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(files.manifest.clone()),
        _ => e.into(),
    })?;
    let manifest: DataManifest = serde_json::from_str(&manifest_text)?;
    let corpus = Corpus::read_jsonl(&files.scenes, &files.utterances)?;
    let vocab = Vocab::load(&files.vocab)?;
    if vocab.fingerprint() != manifest.vocab_fingerprint {
        return Err(Error::data("vocab.json does not match manifest.json"));
    }
    let mut ds = Dataset::new(corpus, manifest.gen.class_labels(), vocab)?;
    if let Some(p) = manifest.predictions_top1_accuracy {
        ds.set_predictions(p, read_predictions(&files.predictions)?)?;
    }
    Ok((ds, manifest))
}

fn check_label_source(ds: &Dataset, source: LabelSource, what: &str) -> Result<()> {
    if let LabelSource::Noisy { p } = source {
        if ds.predictions(p).is_none() {
            return Err(Error::config(format!(
                "{what} uses predicted labels with p = {p}, but the data directory has none for that accuracy \
                 (set perception.top1_accuracy and rerun gen-data)"
            )));
        }
    }
    Ok(())
}

pub fn train_command(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    let ckpt = cfg.checkpoint()?;
    let (ds, _) = load_dataset(&cfg.paths.data_dir)?;
    let tc = cfg.train_config();
    check_label_source(&ds, tc.label_source, "train")?;
    let (train_set, _) = ds.split_by_scene(cfg.corpus.test_every);
    let model = cfg.model.resolve(ds.vocab.size(), ds.catalog.len());
    std::fs::create_dir_all(out)?;
    let interval_dir = tc.checkpoint_every.map(|_| out.join("checkpoints"));
    let (params, log) = train(&train_set, &tc, &model, interval_dir.as_deref())?;
    write_log(&out.join("train-log.jsonl"), &log)?;
    if let Some(parent) = ckpt.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Checkpoint {
        params,
        vocab_fingerprint: ds.vocab.fingerprint(),
        step: tc.total_steps as u64,
    }
    .save(ckpt)?;
    write_json(
        &out.join("train-manifest.json"),
        &serde_json::json!({ "fingerprint": cfg.fingerprint(), "train": tc, "model": model }),
    )
}

pub fn eval_command(cfg: &RunConfig) -> Result<MetricsFile> {
    let out = cfg.output_dir()?;
    let (ds, _) = load_dataset(&cfg.paths.data_dir)?;
    let ckpt = Checkpoint::<f32>::load(cfg.checkpoint()?)?;
    if ckpt.vocab_fingerprint != ds.vocab.fingerprint() {
        return Err(Error::config(format!(
            "checkpoint vocab fingerprint {} does not match data vocab {}",
            ckpt.vocab_fingerprint,
            ds.vocab.fingerprint()
        )));
    }
    let ec = cfg.eval_config();
    check_label_source(&ds, ec.label_source, "eval")?;
    let (_, test_set) = ds.split_by_scene(cfg.corpus.test_every);
    let metrics = evaluate(&ckpt.params, &test_set, &ec)?;
    std::fs::create_dir_all(out)?;
    let file = MetricsFile {
        config: serde_json::json!({ "eval": ec, "checkpoint_step": ckpt.step, "model": ckpt.params.config }),
        fingerprint: cfg.fingerprint(),
        metrics,
    };
    file.save(&out.join("metrics.json"))?;
    Ok(file)
}

pub fn ablate_command(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    let (ds, manifest) = load_dataset(&cfg.paths.data_dir)?;
    let noisy_p = manifest.predictions_top1_accuracy.unwrap_or(DEFAULT_TOP1_ACCURACY);
    if cfg.ablation.label_cells {
        check_label_source(&ds, LabelSource::Noisy { p: noisy_p }, "ablation label grid")?;
    }
    let (train_set, test_set) = ds.split_by_scene(cfg.corpus.test_every);
    let model = cfg.model.resolve(ds.vocab.size(), ds.catalog.len());
    let spec = AblationSpec {
        seeds: cfg.ablation.seeds.clone(),
        loss_rows: cfg.ablation.loss_rows,
        label_cells: cfg.ablation.label_cells,
        orientation_cells: cfg.ablation.orientation_cells,
        noisy_p,
        train: cfg.train.clone(),
        eval: cfg.eval,
    };
    let results = run_ablation(&train_set, &test_set, &spec, &model, |cell, s, outcome| match outcome {
        Ok(m) => eprintln!("{} {} seed {s}: overall {:.4}", cell.group, cell.weights.label(), m.overall.acc),
        Err(e) => eprintln!("{} {} seed {s}: failed: {e}", cell.group, cell.weights.label()),
    })?;
    std::fs::create_dir_all(out)?;
    write_csv(&out.join("ablation.csv"), &results)
}

/// Fraction of utterances whose stored target the oracle reproduces.
pub fn oracle_agreement(corpus: &Corpus) -> Result<(usize, usize)> {
    let mut agree = 0;
    for r in &corpus.records {
        let scene = corpus.scene_of(r)?;
        if resolve_reference(scene, &r.relation, r.oracle_orientation()).ok() == Some(r.target_id) {
            agree += 1;
        }
    }
    Ok((agree, corpus.records.len()))
}

pub fn grad_check_command(cfg: &RunConfig) -> Result<f64> {
    let corpus = generate_corpus(
        &cfg.gen,
        &CorpusConfig {
            scenes: 1,
            utterances_per_scene: 4,
            ..cfg.corpus.clone()
        },
        cfg.seeds.data,
    )?;
    let ds = Dataset::new(corpus, cfg.gen.class_labels(), vocab_for(&cfg.gen))?;
    let model = ModelConfig::tiny(ds.vocab.size(), ds.catalog.len());
    let gc = cfg.grad_check;
    let weights = LossWeights::default();
    let report = if gc.bits == 64 {
        let params = init_model::<f64>(&model, cfg.seeds.init)?;
        let (seq, spatial, targets) = check_problem::<f64>(&ds, &model, 0, cfg.seeds.order)?;
        grad_check(&params, &seq, &spatial, &targets, &weights, gc.epsilon, gc.coordinates, cfg.seeds.eval)?
    } else {
        let params = init_model::<f32>(&model, cfg.seeds.init)?;
        let (seq, spatial, targets) = check_problem::<f32>(&ds, &model, 0, cfg.seeds.order)?;
        grad_check(&params, &seq, &spatial, &targets, &weights, gc.epsilon, gc.coordinates, cfg.seeds.eval)?
    };
    println!(
        "{}",
        serde_json::json!({
            "bits": gc.bits,
            "epsilon": gc.epsilon,
            "coordinates": report.coordinates,
            "max_rel_error": report.max_rel_error,
        })
    );
    Ok(report.max_rel_error)
}

fn dispatch(command: &Command) -> Result<()> {
    let common = match command {
        Command::GenData(c)
        | Command::Train(c)
        | Command::Eval(c)
        | Command::Ablate(c)
        | Command::OracleCheck(c)
        | Command::GradCheck(c) => c,
    };
    let cfg = RunConfig::load(&common.config, &common.overrides)?;
    match command {
        Command::GenData(_) => {
            let m = gen_data(&cfg)?;
            println!(
                "{}",
                serde_json::json!({ "scenes": m.scenes, "utterances": m.utterances, "fingerprint": m.fingerprint })
            );
        }
        Command::Train(_) => train_command(&cfg)?,
        Command::Eval(_) => {
            let m = eval_command(&cfg)?;
            println!("{}", serde_json::to_string(&m.metrics)?);
        }
        Command::Ablate(_) => ablate_command(&cfg)?,
        Command::OracleCheck(_) => {
            let files = DataFiles::in_dir(&cfg.paths.data_dir);
            let corpus = Corpus::read_jsonl(&files.scenes, &files.utterances)?;
            let (agree, total) = oracle_agreement(&corpus)?;
            let rate = if total == 0 { 0.0 } else { agree as f64 / total as f64 };
            println!("{}", serde_json::json!({ "agreement": rate, "agree": agree, "total": total }));
        }
        Command::GradCheck(_) => {
            grad_check_command(&cfg)?;
        }
    }
    Ok(())
}

/// Maps an error to its exit code and single-line report.
pub fn error_report(err: &Error) -> (i32, String) {
    let (kind, code) = match err {
        Error::Config(_) => ("config", 2),
        Error::MissingInput(_) => ("missing_input", 3),
        _ => ("runtime", 4),
    };
    let line = serde_json::json!({ "error": kind, "exit": code, "message": err.to_string() });
    (code, line.to_string())
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", serde_json::json!({ "error": "usage", "exit": 2, "message": first }));
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let (code, line) = error_report(&e);
            eprintln!("{line}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"paths": {"data_dir": "d"}, "seeds": {"data": 1, "perception": 2, "init": 3, "order": 4, "eval": 5}}"#;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::from_json(MINIMAL, &["train.total_steps=7".into(), "eval.top_k=3".into()]).unwrap();
        assert_eq!(cfg.train.total_steps, 7);
        assert_eq!(cfg.eval.top_k, 3);
    }

    #[test]
    fn seeds_are_required() {
        let err = RunConfig::from_json(r#"{"paths": {"data_dir": "d"}}"#, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("seeds"), "{err}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = RunConfig::from_json(MINIMAL, &["eval.top_k=0".into()]).unwrap_err();
        assert_eq!(error_report(&err).0, 2);
        let err = RunConfig::from_json(MINIMAL, &["nonsense=1".into()]).unwrap_err();
        assert_eq!(error_report(&err).0, 2);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = RunConfig::from_json(MINIMAL, &[]).unwrap();
        let b = RunConfig::from_json(MINIMAL, &["train.lr=0.001".into()]).unwrap();
        assert_eq!(a.fingerprint(), RunConfig::from_json(MINIMAL, &[]).unwrap().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
