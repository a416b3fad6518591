use std::collections::HashMap;
use std::path::Path;

use crate::error::{PtsError, Result};

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const PLH: TokenId = 2;
pub const UNK: TokenId = 3;
pub const PAD: TokenId = 4;

/// Surface forms of the reserved symbols, in id order.
pub const RESERVED: [&str; 5] = ["<bos>", "<eos>", "<plh>", "<unk>", "<pad>"];

/// Token/id bijection with five reserved symbols at fixed ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        Self { tokens, index }
    }

    /// Builds a vocabulary keeping the most frequent tokens (frequency
    /// descending, then lexicographic) after the reserved symbols.
    pub fn build<I, S>(tokens: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < RESERVED.len() {
            return Err(PtsError::VocabTooSmall {
                max_size,
                reserved: RESERVED.len(),
            });
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut seen_any = false;
        for tok in tokens {
            seen_any = true;
            let tok = tok.as_ref();
            if RESERVED.contains(&tok) {
                continue;
            }
            *counts.entry(tok.to_owned()).or_insert(0) += 1;
        }
        if !seen_any {
            return Err(PtsError::EmptyCorpus);
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().take(max_size - RESERVED.len()).map(|(t, _)| t));
        Ok(Self::from_tokens(tokens))
    }

    /// A vocabulary holding only the reserved symbols.
    pub fn reserved_only() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`] when absent.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(RESERVED[UNK as usize])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < RESERVED.len()
    }

    /// Rebuilds a vocabulary from its token list (reserved symbols first).
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()].iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(PtsError::InvalidVocab("reserved symbols missing or out of order".into()));
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(PtsError::InvalidVocab("duplicate tokens".into()));
        }
        Ok(vocab)
    }

    /// One token per line, id = line number.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(PtsError::MissingFile(path.to_owned()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_list(text.lines().map(str::to_owned).collect())
    }
}

/// Shorthand for [`Vocab::build`].
pub fn build_vocab<I, S>(tokens: I, max_size: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    Vocab::build(tokens, max_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tokens_fit() {
        let v = build_vocab("a a b".split_whitespace(), 7).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.tokens()[..5], RESERVED.map(String::from));
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("b"), 6);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab("zeta alpha mid".split_whitespace(), 10).unwrap();
        assert_eq!(v.id("alpha"), 5);
        assert_eq!(v.id("mid"), 6);
        assert_eq!(v.id("zeta"), 7);
    }

    #[test]
    fn truncation_keeps_most_frequent() {
        // token i occurs i+1 times, so the oracle ranking is t9, t8, t7, ...
        let mut corpus = Vec::new();
        for i in 0..10 {
            for _ in 0..=i {
                corpus.push(format!("t{i}"));
            }
        }
        let mut counts: Vec<(String, usize)> = (0..10).map(|i| (format!("t{i}"), i + 1)).collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let expected: Vec<&str> = counts.iter().take(3).map(|(t, _)| t.as_str()).collect();

        let v = build_vocab(&corpus, 8).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(&v.tokens()[5..], expected);
        assert_eq!(v.id("t0"), UNK);
    }

    #[test]
    fn too_small_and_empty() {
        assert!(matches!(
            build_vocab(["a"], 4),
            Err(PtsError::VocabTooSmall { .. })
        ));
        assert!(matches!(build_vocab(Vec::<String>::new(), 10), Err(PtsError::EmptyCorpus)));
    }

    #[test]
    fn save_load_round_trip() {
        let v = build_vocab("x y y z".split_whitespace(), 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        assert_eq!(Vocab::load(&path).unwrap(), v);
    }
}
