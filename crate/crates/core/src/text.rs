//! Tokenization, the token vocabulary, part-of-speech tags and examples.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::logic::{FlatLogicalForm, Span};
use crate::worlds::{Domain, WorldState};

/// Lowercases and splits on whitespace and punctuation. Hyphens and
/// apostrophes inside words are kept.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '-' && c != '\''))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Largest token id that fits in a packed n-gram.
pub const MAX_TOKEN_ID: u32 = (1 << 20) - 1;

/// Interns tokens; ids start at 1.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    ids: BTreeMap<String, u32>,
    words: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if more than `MAX_TOKEN_ID` distinct tokens are interned.
    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32 + 1;
        assert!(id <= MAX_TOKEN_ID, "vocabulary overflow");
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words
            .get((id as usize).checked_sub(1)?)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Coarse part-of-speech tags used by templates and the alignment constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosTag {
    Verb,
    Noun,
    Adjective,
    Number,
    Determiner,
    Preposition,
    Pronoun,
    Adverb,
    Other,
}

impl PosTag {
    pub fn name(self) -> &'static str {
        match self {
            PosTag::Verb => "VB",
            PosTag::Noun => "NN",
            PosTag::Adjective => "JJ",
            PosTag::Number => "CD",
            PosTag::Determiner => "DT",
            PosTag::Preposition => "IN",
            PosTag::Pronoun => "PRP",
            PosTag::Adverb => "RB",
            PosTag::Other => "X",
        }
    }

    /// Accepts the Penn-style prefixes (`VBZ` is a verb, `NNS` a noun, ...).
    pub fn from_name(s: &str) -> PosTag {
        const TABLE: [(&str, PosTag); 8] = [
            ("PRP", PosTag::Pronoun),
            ("VB", PosTag::Verb),
            ("NN", PosTag::Noun),
            ("JJ", PosTag::Adjective),
            ("CD", PosTag::Number),
            ("DT", PosTag::Determiner),
            ("IN", PosTag::Preposition),
            ("RB", PosTag::Adverb),
        ];
        TABLE
            .iter()
            .find(|(p, _)| s.starts_with(p))
            .map_or(PosTag::Other, |&(_, t)| t)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Packed n-gram of up to three token ids; `EMPTY_LEX` is the empty conjunct.
pub type Lex = u64;

pub const EMPTY_LEX: Lex = 0;

pub fn pack_ngram(tokens: &[u32]) -> Lex {
    debug_assert!(!tokens.is_empty() && tokens.len() <= 3);
    let mut lex = (tokens.len() as u64) << 60;
    for (k, &t) in tokens.iter().enumerate() {
        lex |= u64::from(t & MAX_TOKEN_ID) << (20 * k);
    }
    lex
}

pub fn unpack_ngram(lex: Lex) -> Vec<u32> {
    let n = (lex >> 60) as usize;
    (0..n)
        .map(|k| ((lex >> (20 * k)) & u64::from(MAX_TOKEN_ID)) as u32)
        .collect()
}

/// Distinct 1..3-grams fully inside `tokens[span]`, in order of first occurrence.
pub fn ngrams_in(tokens: &[u32], start: usize, end: usize, out: &mut Vec<Lex>) {
    for n in 1..=3 {
        for s in start..end {
            if s + n > end {
                break;
            }
            let g = pack_ngram(&tokens[s..s + n]);
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
}

/// A tokenized utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub text: String,
    pub tokens: Vec<u32>,
    /// One tag per token when available.
    pub tags: Option<Vec<PosTag>>,
}

impl Utterance {
    pub fn new(text: &str, vocab: &mut Vocab) -> Self {
        let tokens = tokenize(text).iter().map(|t| vocab.intern(t)).collect();
        Utterance {
            text: text.to_string(),
            tokens,
            tags: None,
        }
    }

    /// Attaches tags; returns `None` when their count does not match the tokens.
    pub fn with_tags(mut self, tags: Vec<PosTag>) -> Option<Self> {
        (tags.len() == self.tokens.len()).then(|| {
            self.tags = Some(tags);
            self
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct n-grams of the whole utterance.
    pub fn ngrams(&self) -> Vec<Lex> {
        let mut out = Vec::new();
        ngrams_in(&self.tokens, 0, self.tokens.len(), &mut out);
        out
    }

    /// True when every token in `span` carries one of `tags`.
    pub fn span_has_tag(&self, span: Span, tags: &[PosTag]) -> bool {
        match &self.tags {
            None => false,
            Some(t) => t[usize::from(span.start)..usize::from(span.end)]
                .iter()
                .all(|x| tags.contains(x)),
        }
    }
}

/// A training or test example: an initial world, `L` utterances and the
/// world after each of them. Only the final world is guaranteed; intermediate
/// worlds are present for generated data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub domain: Domain,
    pub initial: Arc<WorldState>,
    pub utterances: Vec<Utterance>,
    /// `targets[i]` is the world after utterance `i + 1`; the last is always set.
    pub targets: Vec<Option<WorldState>>,
    pub gold: Option<Vec<FlatLogicalForm>>,
}

impl Example {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn final_state(&self) -> &WorldState {
        self.targets
            .last()
            .and_then(Option::as_ref)
            .expect("examples always carry their final world")
    }

    /// Target after the first `l` utterances, if known.
    pub fn target(&self, l: usize) -> Option<&WorldState> {
        self.targets.get(l.checked_sub(1)?)?.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tokenizes_running_example() {
        assert_eq!(
            tokenize("Pour the last green beaker into beaker 2."),
            vec!["pour", "the", "last", "green", "beaker", "into", "beaker", "2"]
        );
        assert_eq!(
            tokenize("  Then, into the first-beaker!"),
            vec!["then", "into", "the", "first-beaker"]
        );
        assert!(tokenize(" .. ").is_empty());
    }

    #[test]
    fn vocab_interns_from_one() {
        let mut v = Vocab::new();
        assert_eq!(v.intern("a"), 1);
        assert_eq!(v.intern("b"), 2);
        assert_eq!(v.intern("a"), 1);
        assert_eq!(v.word(2), Some("b"));
        assert_eq!(v.word(0), None);
    }

    #[test]
    fn ngram_packing() {
        let g = pack_ngram(&[5, 7, 9]);
        assert_eq!(unpack_ngram(g), vec![5, 7, 9]);
        assert_ne!(pack_ngram(&[5]), pack_ngram(&[5, 0]));
        let mut v = Vocab::new();
        let u = Utterance::new("the green the green", &mut v);
        // the, green, the green, green the, the green the, green the green
        assert_eq!(u.ngrams().len(), 6);
    }

    #[test]
    fn tag_names() {
        assert_eq!(PosTag::from_name("VBZ"), PosTag::Verb);
        assert_eq!(PosTag::from_name("PRP$"), PosTag::Pronoun);
        assert_eq!(PosTag::from_name("NNS"), PosTag::Noun);
        assert_eq!(PosTag::from_name("?"), PosTag::Other);
    }
}
