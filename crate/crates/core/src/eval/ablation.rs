use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics, SPLITS};
use super::orientation::OrientationMode;
use super::predict::EvalConfig;
use crate::dataset::{Dataset, LabelSource};
use crate::error::Result;
use crate::model::{ModelConfig, ModelParams};
use crate::seed;
use crate::training::{train, LossWeights, TrainConfig};

/// The seven loss-term rows, each with the reference term on:
/// none, Clf, Mask, Text, Clf+Mask, Clf+Text, all.
pub fn loss_grid() -> Vec<LossWeights> {
    [
        (false, false, false),
        (true, false, false),
        (false, true, false),
        (false, false, true),
        (true, true, false),
        (true, false, true),
        (true, true, true),
    ]
    .into_iter()
    .map(|(clf, mask, text)| LossWeights::with_toggles(clf, mask, text))
    .collect()
}

/// (train, eval) label sources over {predicted, ground truth}².
pub fn label_grid(p: f64) -> Vec<(LabelSource, LabelSource)> {
    let pred = LabelSource::Noisy { p };
    vec![
        (pred, pred),
        (pred, LabelSource::Gt),
        (LabelSource::Gt, pred),
        (LabelSource::Gt, LabelSource::Gt),
    ]
}

/// (train, eval) orientation modes over {none, corrected}².
pub fn orientation_grid() -> Vec<(OrientationMode, OrientationMode)> {
    use OrientationMode::{Corrected, None};
    vec![(None, None), (None, Corrected), (Corrected, None), (Corrected, Corrected)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub seeds: Vec<u64>,
    pub loss_rows: bool,
    pub label_cells: bool,
    pub orientation_cells: bool,
    /// Top-1 accuracy of the predicted-label source.
    pub noisy_p: f64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub group: String,
    pub weights: LossWeights,
    pub train_labels: LabelSource,
    pub eval_labels: LabelSource,
    pub train_orientation: OrientationMode,
    pub eval_orientation: OrientationMode,
}

/// Every cell the spec asks for. Cells not varied by a group use the base
/// configuration's settings.
pub fn enumerate_cells(spec: &AblationSpec) -> Vec<AblationCell> {
    let base = AblationCell {
        group: String::new(),
        weights: spec.train.weights,
        train_labels: spec.train.label_source,
        eval_labels: spec.eval.label_source,
        train_orientation: spec.train.orientation_mode,
        eval_orientation: spec.eval.orientation_mode,
    };
    let mut cells = vec![];
    if spec.loss_rows {
        cells.extend(loss_grid().into_iter().map(|weights| AblationCell {
            group: "loss".into(),
            weights,
            ..base.clone()
        }));
    }
    if spec.label_cells {
        cells.extend(label_grid(spec.noisy_p).into_iter().map(|(tr, ev)| AblationCell {
            group: "labels".into(),
            train_labels: tr,
            eval_labels: ev,
            ..base.clone()
        }));
    }
    if spec.orientation_cells {
        cells.extend(orientation_grid().into_iter().map(|(tr, ev)| AblationCell {
            group: "orientation".into(),
            train_orientation: tr,
            eval_orientation: ev,
            ..base.clone()
        }));
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: AblationCell,
    pub seeds: Vec<u64>,
    /// Per seed: metrics or the error message.
    pub runs: Vec<std::result::Result<Metrics, String>>,
}

impl CellResult {
    pub fn ok_runs(&self) -> Vec<&Metrics> {
        self.runs.iter().filter_map(|r| r.as_ref().ok()).collect()
    }

    /// Mean and sample standard deviation of one split's accuracy.
    pub fn summary(&self, split: &str) -> Option<(f64, f64)> {
        let values: Vec<f64> = self
            .ok_runs()
            .iter()
            .map(|m| m.splits().iter().find(|(n, _)| *n == split).expect("known split").1.acc)
            .collect();
        mean_std(&values)
    }
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

/// Seeds a run from one ablation seed: init, data order and evaluation all
/// derive from it, so every cell sees the same streams.
pub fn seeded_configs(base: &TrainConfig, eval: &EvalConfig, s: u64) -> (TrainConfig, EvalConfig) {
    (
        TrainConfig {
            init_seed: s,
            order_seed: seed::derive(s, &[1]),
            ..base.clone()
        },
        EvalConfig { seed: s, ..*eval },
    )
}

/// Trains and evaluates every cell for every seed. Identical training
/// settings are trained once and shared between cells. A failing run is
/// recorded in its cell and does not stop the others.
pub fn run_ablation(
    train_set: &Dataset,
    test_set: &Dataset,
    spec: &AblationSpec,
    model: &ModelConfig,
    mut progress: impl FnMut(&AblationCell, u64, &std::result::Result<Metrics, String>),
) -> Result<Vec<CellResult>> {
    spec.train.validate()?;
    spec.eval.validate()?;
    let mut trained: BTreeMap<String, std::result::Result<ModelParams<f32>, String>> = BTreeMap::new();
    let mut results = vec![];
    for cell in enumerate_cells(spec) {
        let mut runs = vec![];
        for &s in &spec.seeds {
            let (base_train, base_eval) = seeded_configs(&spec.train, &spec.eval, s);
            let train_cfg = TrainConfig {
                weights: cell.weights,
                label_source: cell.train_labels,
                orientation_mode: cell.train_orientation,
                ..base_train
            };
            let eval_cfg = EvalConfig {
                label_source: cell.eval_labels,
                orientation_mode: cell.eval_orientation,
                filter: base_eval.filter && cell.weights.enable_text,
                ..base_eval
            };
            let key = serde_json::to_string(&train_cfg)?;
            let params = trained
                .entry(key)
                .or_insert_with(|| train(train_set, &train_cfg, model, None).map(|(p, _)| p).map_err(|e| e.to_string()));
            let outcome = match params {
                Ok(p) => evaluate(p, test_set, &eval_cfg).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            progress(&cell, s, &outcome);
            runs.push(outcome);
        }
        results.push(CellResult {
            cell,
            seeds: spec.seeds.clone(),
            runs,
        });
    }
    Ok(results)
}

fn label_name(l: &LabelSource) -> &'static str {
    l.short_name()
}

fn orientation_name(o: &OrientationMode) -> &'static str {
    match o {
        OrientationMode::Corrected => "corrected",
        OrientationMode::None => "none",
    }
}

/// One row per cell: configuration columns, then mean and standard deviation
/// of every split over the successful seeds.
pub fn to_csv(results: &[CellResult]) -> String {
    let mut out = String::from("group,losses,train_labels,eval_labels,train_orientation,eval_orientation,seeds_ok,seeds_failed");
    for split in SPLITS {
        write!(out, ",{split}_mean,{split}_std").unwrap();
    }
    out.push_str(",errors\n");
    for r in results {
        let ok = r.ok_runs().len();
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.cell.group,
            r.cell.weights.label(),
            label_name(&r.cell.train_labels),
            label_name(&r.cell.eval_labels),
            orientation_name(&r.cell.train_orientation),
            orientation_name(&r.cell.eval_orientation),
            ok,
            r.runs.len() - ok
        )
        .unwrap();
        for split in SPLITS {
            match r.summary(split) {
                Some((m, s)) => write!(out, ",{m:.4},{s:.4}").unwrap(),
                None => out.push_str(",,"),
            }
        }
        let errors: Vec<String> = r
            .runs
            .iter()
            .filter_map(|x| x.as_ref().err())
            .map(|e| e.replace([',', '\n', '"'], " "))
            .collect();
        writeln!(out, ",{}", errors.join(" | ")).unwrap();
    }
    out
}

pub fn write_csv(path: &Path, results: &[CellResult]) -> Result<()> {
    std::fs::write(path, to_csv(results))?;
    Ok(())
}
