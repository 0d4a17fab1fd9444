use std::path::Path;

use serde::{Deserialize, Serialize};

use super::predict::{predict_target, EvalConfig, Prediction};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::model::{Float, ModelParams};
use crate::synth::{Difficulty, UtteranceRecord, ViewClass};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub acc: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall: SplitScore,
    pub easy: SplitScore,
    pub hard: SplitScore,
    pub view_dep: SplitScore,
    pub view_indep: SplitScore,
    pub vd_explicit: SplitScore,
    pub vd_implicit: SplitScore,
}

pub const SPLITS: [&str; 7] = ["overall", "easy", "hard", "view_dep", "view_indep", "vd_explicit", "vd_implicit"];

impl Metrics {
    /// Tallies exact-match outcomes over the partitions given by record metadata.
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = (&'a UtteranceRecord, bool)>) -> Metrics {
        let mut tally = [(0usize, 0usize); 7];
        for (r, correct) in outcomes {
            let mut hit = |i: usize| {
                tally[i].0 += correct as usize;
                tally[i].1 += 1;
            };
            hit(0);
            hit(if r.difficulty == Difficulty::Easy { 1 } else { 2 });
            match r.view_class {
                ViewClass::Independent => hit(4),
                ViewClass::Explicit => {
                    hit(3);
                    hit(5)
                }
                ViewClass::Implicit => {
                    hit(3);
                    hit(6)
                }
            }
        }
        let s = |i: usize| SplitScore {
            acc: if tally[i].1 == 0 { 0.0 } else { tally[i].0 as f64 / tally[i].1 as f64 },
            n: tally[i].1,
        };
        Metrics {
            overall: s(0),
            easy: s(1),
            hard: s(2),
            view_dep: s(3),
            view_indep: s(4),
            vd_explicit: s(5),
            vd_implicit: s(6),
        }
    }

    pub fn splits(&self) -> [(&'static str, SplitScore); 7] {
        [
            (SPLITS[0], self.overall),
            (SPLITS[1], self.easy),
            (SPLITS[2], self.hard),
            (SPLITS[3], self.view_dep),
            (SPLITS[4], self.view_indep),
            (SPLITS[5], self.vd_explicit),
            (SPLITS[6], self.vd_implicit),
        ]
    }

    /// Partition counts are exhaustive and disjoint.
    pub fn counts_consistent(&self) -> bool {
        self.easy.n + self.hard.n == self.overall.n
            && self.view_dep.n + self.view_indep.n == self.overall.n
            && self.vd_explicit.n + self.vd_implicit.n == self.view_dep.n
    }
}

pub fn evaluate_detailed<F: Float>(
    params: &ModelParams<F>,
    dataset: &Dataset,
    cfg: &EvalConfig,
) -> Result<(Metrics, Vec<Prediction>)> {
    cfg.validate()?;
    let preds = (0..dataset.records.len())
        .map(|i| predict_target(params, dataset, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let metrics = Metrics::from_outcomes(
        dataset
            .records
            .iter()
            .zip(&preds)
            .map(|(r, p)| (r, p.predicted_id == r.target_id)),
    );
    Ok((metrics, preds))
}

pub fn evaluate<F: Float>(params: &ModelParams<F>, dataset: &Dataset, cfg: &EvalConfig) -> Result<Metrics> {
    evaluate_detailed(params, dataset, cfg).map(|(m, _)| m)
}

/// `metrics.json` layout: the seven splits plus the producing configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub config: serde_json::Value,
    pub fingerprint: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl MetricsFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::small_dataset;

    #[test]
    fn counting_and_partitions() {
        let ds = small_dataset(2, 4, 3);
        let outcomes: Vec<_> = ds.records.iter().enumerate().map(|(i, r)| (r, i % 2 == 0)).collect();
        let m = Metrics::from_outcomes(outcomes);
        assert_eq!(m.overall.n, 8);
        assert_eq!(m.overall.acc, 0.5);
        assert!(m.counts_consistent());
    }

    #[test]
    fn empty_split_reports_zero() {
        let m = Metrics::from_outcomes(std::iter::empty());
        assert_eq!(m.overall, SplitScore { acc: 0.0, n: 0 });
    }
}
