//! Caption codec for hetero-associative storage: whitespace tokens mapped to
//! vocabulary indices, scaled into `[0, 1]` and zero-padded to a fixed length.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const MAX_VOCABULARY: usize = 1000;
pub const DEFAULT_CAPTION_LEN: usize = 25;

/// Ordered token list; index 0 is always [`PAD_TOKEN`], so the padding code 0
/// decodes to padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary from an explicit token list whose first entry must be the pad token.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(Error::InvalidInput(format!("vocabulary must start with {PAD_TOKEN}")));
        }
        if tokens.len() > MAX_VOCABULARY {
            return Err(Error::InvalidInput(format!(
                "vocabulary has {} tokens, limit is {MAX_VOCABULARY}",
                tokens.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidInput(format!("bad token {t:?} at index {i}")));
            }
            if lookup.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, lookup })
    }

    /// Pad token followed by every distinct word in order of first appearance.
    pub fn from_captions<'a>(captions: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut tokens = vec![PAD_TOKEN.to_string()];
        let mut seen = std::collections::HashSet::new();
        for caption in captions {
            for word in caption.split_whitespace() {
                if word != PAD_TOKEN && seen.insert(word.to_string()) {
                    tokens.push(word.to_string());
                }
            }
        }
        Self::new(tokens)
    }

    /// One token per line; the line number is the index.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.lines().map(|l| l.trim().to_string()).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Caption as padded codes `k / V`.
    pub fn encode(&self, text: &str, pad_to: usize) -> Result<Vec<f64>> {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() > pad_to {
            return Err(Error::CaptionTooLong {
                len: words.len(),
                max: pad_to,
            });
        }
        let v = self.len() as f64;
        let mut out = vec![0.0; pad_to];
        for (slot, word) in out.iter_mut().zip(&words) {
            let k = match self.index_of(word) {
                Some(k) if k != 0 => k,
                _ => return Err(Error::OutOfVocabulary(word.to_string())),
            };
            *slot = k as f64 / v;
        }
        Ok(out)
    }

    /// Nearest vocabulary index for every entry, `round(entry · V)` clamped to `0..V`.
    pub fn decode_indices(&self, codes: &[f64]) -> Vec<usize> {
        let v = self.len() as f64;
        let top = self.len() - 1;
        codes
            .iter()
            .map(|&c| {
                let k = (c * v).round();
                if k.is_nan() || k <= 0.0 {
                    0
                } else {
                    (k as usize).min(top)
                }
            })
            .collect()
    }

    /// Decoded caption with trailing padding dropped. Interior padding is kept
    /// as the literal pad token so that a damaged caption never decodes equal
    /// to an intact one.
    pub fn decode(&self, codes: &[f64]) -> String {
        let mut idx = self.decode_indices(codes);
        while idx.last() == Some(&0) {
            idx.pop();
        }
        idx.iter()
            .map(|&k| self.tokens[k].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// One caption per line.
pub fn read_captions(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect())
}
