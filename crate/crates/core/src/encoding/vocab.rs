use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const CLS: u32 = 0;
pub const SEP: u32 = 1;
pub const MASK: u32 = 2;
pub const PAD: u32 = 3;
pub const UNK: u32 = 4;
pub const SPECIALS: [&str; 5] = ["[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"];
pub const FIRST_WORD_ID: u32 = SPECIALS.len() as u32;

/// Word-level vocabulary: the five special tokens at ids 0..5, then every
/// distinct word in sorted order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    ids: BTreeMap<String, u32>,
    words: Vec<String>,
}

pub fn build_vocab<'a>(
    class_catalog: impl IntoIterator<Item = &'a str>,
    template_lexicon: impl IntoIterator<Item = &'a str>,
) -> Vocab {
    let distinct: BTreeSet<&str> = class_catalog
        .into_iter()
        .chain(template_lexicon)
        .flat_map(str::split_whitespace)
        .filter(|w| !SPECIALS.contains(w))
        .collect();
    Vocab::from_words(distinct.into_iter().map(str::to_owned))
}

impl Vocab {
    fn from_words(words: impl IntoIterator<Item = String>) -> Vocab {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(words);
        let ids = all.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocab { ids, words: all }
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn is_special(id: u32) -> bool {
        id < FIRST_WORD_ID
    }

    pub fn encode_words<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Vec<u32> {
        words.into_iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.word(i).unwrap_or(SPECIALS[UNK as usize]).to_string())
            .collect()
    }

    /// Content hash of the id assignment; checkpoints carry it to detect mismatches.
    pub fn fingerprint(&self) -> String {
        seed::fingerprint(self.words.join("\n").as_bytes())
    }

    pub fn to_file(&self) -> VocabFile {
        VocabFile {
            words: self.ids.iter().filter(|(_, &i)| i >= FIRST_WORD_ID).map(|(w, &i)| (w.clone(), i)).collect(),
            specials: SPECIALS.iter().enumerate().map(|(i, s)| (s.to_string(), i as u32)).collect(),
            size: self.size(),
            fingerprint: self.fingerprint(),
        }
    }

    pub fn from_file(file: VocabFile) -> Result<Vocab> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if file.specials.get(*s) != Some(&(i as u32)) {
                return Err(Error::data(format!("vocab special {s} must have id {i}")));
            }
        }
        let mut by_id: Vec<(u32, String)> = file.words.into_iter().map(|(w, i)| (i, w)).collect();
        by_id.sort();
        let dense = by_id
            .iter()
            .enumerate()
            .all(|(n, (i, _))| *i == FIRST_WORD_ID + n as u32);
        if !dense || by_id.len() + SPECIALS.len() != file.size {
            return Err(Error::data("vocab ids must be dense in [0, size)"));
        }
        let vocab = Vocab::from_words(by_id.into_iter().map(|(_, w)| w));
        if vocab.fingerprint() != file.fingerprint {
            return Err(Error::data("vocab fingerprint does not match its contents"));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => e.into(),
        })?;
        Vocab::from_file(serde_json::from_str(&text)?)
    }
}

/// On-disk form of a [`Vocab`] (`vocab.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabFile {
    pub words: BTreeMap<String, u32>,
    pub specials: BTreeMap<String, u32>,
    pub size: usize,
    pub fingerprint: String,
}
