//! Whole-benchmark generation and the `scenes.jsonl` / `utterances.jsonl` files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::scene::{generate_scene, GenConfig, Scene};
use super::utterance::{draw_view, generate_utterance_as, UtteranceRecord};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub scenes: usize,
    pub utterances_per_scene: usize,
    /// Every `test_every`-th scene (by index) is held out for evaluation.
    pub test_every: usize,
    /// Fresh seeds tried per utterance slot before giving up on it.
    pub max_skips: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scenes: 200,
            utterances_per_scene: 50,
            test_every: 5,
            max_skips: 20,
        }
    }
}

/// Scenes keyed by id plus the utterances referring into them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub scenes: BTreeMap<String, Scene>,
    pub records: Vec<UtteranceRecord>,
}

pub fn scene_id(index: usize) -> String {
    format!("scene{index:04}")
}

/// Generates the benchmark. Scene `i` and utterance slot `j` draw from seeds
/// derived from `(seed, i)` and `(seed, i, j, retry)`, so any subset can be
/// regenerated independently. A slot's view class and speaker are drawn once
/// and kept across retries, so skips do not bias the view-dependent share.
pub fn generate_corpus(gen: &GenConfig, cfg: &CorpusConfig, seed: u64) -> Result<Corpus> {
    gen.validate()?;
    if cfg.scenes == 0 {
        return Err(Error::config("corpus needs at least one scene"));
    }
    let mut corpus = Corpus::default();
    for i in 0..cfg.scenes {
        let id = scene_id(i);
        let scene = generate_scene(gen, seed::derive(seed, &[1, i as u64]), &id)?;
        for j in 0..cfg.utterances_per_scene {
            let view = draw_view(gen, seed::derive(seed, &[3, i as u64, j as u64]));
            for retry in 0..cfg.max_skips.max(1) {
                let s = seed::derive(seed, &[2, i as u64, j as u64, retry as u64]);
                match generate_utterance_as(&scene, gen, view, s) {
                    Ok(rec) => {
                        corpus.records.push(rec);
                        break;
                    }
                    Err(Error::GenerationSkip(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
        corpus.scenes.insert(id, scene);
    }
    Ok(corpus)
}

impl Corpus {
    pub fn scene_of(&self, record: &UtteranceRecord) -> Result<&Scene> {
        self.scenes
            .get(&record.scene_id)
            .ok_or_else(|| Error::data(format!("unknown scene_id `{}`", record.scene_id)))
    }

    /// Splits by scene: scenes whose numeric index is `test_every - 1` modulo
    /// `test_every` go to the test side.
    pub fn split(&self, test_every: usize) -> (Corpus, Corpus) {
        let is_test = |id: &str| {
            let idx: usize = id.trim_start_matches(|c: char| !c.is_ascii_digit()).parse().unwrap_or(0);
            test_every > 0 && idx % test_every == test_every - 1
        };
        let mut train = Corpus::default();
        let mut test = Corpus::default();
        for (id, scene) in &self.scenes {
            let side = if is_test(id) { &mut test } else { &mut train };
            side.scenes.insert(id.clone(), scene.clone());
        }
        for rec in &self.records {
            let side = if is_test(&rec.scene_id) { &mut test } else { &mut train };
            side.records.push(rec.clone());
        }
        (train, test)
    }

    pub fn write_jsonl(&self, scenes_path: &Path, utterances_path: &Path) -> Result<()> {
        write_jsonl(scenes_path, self.scenes.values())?;
        write_jsonl(utterances_path, self.records.iter())
    }

    pub fn read_jsonl(scenes_path: &Path, utterances_path: &Path) -> Result<Corpus> {
        let scenes: Vec<Scene> = read_jsonl(scenes_path)?;
        let records: Vec<UtteranceRecord> = read_jsonl(utterances_path)?;
        let mut map = BTreeMap::new();
        for s in scenes {
            s.validate()?;
            map.insert(s.scene_id.clone(), s);
        }
        let corpus = Corpus { scenes: map, records };
        for r in &corpus.records {
            corpus.scene_of(r)?;
        }
        Ok(corpus)
    }
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            scenes: 10,
            utterances_per_scene: 5,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn split_holds_out_whole_scenes() {
        let c = generate_corpus(&GenConfig::default(), &small(), 3).unwrap();
        let (train, test) = c.split(5);
        assert_eq!(train.scenes.len(), 8);
        assert_eq!(test.scenes.len(), 2);
        assert!(test.records.iter().all(|r| test.scenes.contains_key(&r.scene_id)));
        assert!(train.records.iter().all(|r| !test.scenes.contains_key(&r.scene_id)));
        assert_eq!(train.records.len() + test.records.len(), c.records.len());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = generate_corpus(&GenConfig::default(), &small(), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (s, u) = (dir.path().join("scenes.jsonl"), dir.path().join("utterances.jsonl"));
        c.write_jsonl(&s, &u).unwrap();
        assert_eq!(Corpus::read_jsonl(&s, &u).unwrap(), c);
        let first: serde_json::Value =
            serde_json::from_str(std::fs::read_to_string(&s).unwrap().lines().next().unwrap()).unwrap();
        for key in ["scene_id", "room_extent", "stored_orientation", "objects"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        let obj = &first["objects"][0];
        for key in ["object_id", "class_label", "center", "extent", "is_landmark"] {
            assert!(obj.get(key).is_some(), "missing object.{key}");
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_jsonl::<Scene>(Path::new("/nonexistent/scenes.jsonl")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(p) if p.ends_with("scenes.jsonl")));
    }
}
