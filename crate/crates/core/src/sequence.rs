//! Bounded token sequences edited by insertion, replacement and deletion.

use crate::corpus::vocab::{TokenId, BOS, EOS, PLH};

/// Where a word came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Copied from the record with this index.
    Copied(usize),
    /// Predicted from the vocabulary.
    Generated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Symbol {
    Bos,
    Eos,
    Placeholder,
    Word { text: String, id: TokenId, origin: Origin },
}

impl Symbol {
    pub fn id(&self) -> TokenId {
        match self {
            Symbol::Bos => BOS,
            Symbol::Eos => EOS,
            Symbol::Placeholder => PLH,
            Symbol::Word { id, .. } => *id,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Symbol::Bos | Symbol::Eos)
    }
}

/// A `[BOS] ... [EOS]` sequence holding at most `capacity` symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EditSequence {
    symbols: Vec<Symbol>,
    capacity: usize,
}

impl EditSequence {
    /// `[BOS] [EOS]`.
    pub fn empty(capacity: usize) -> Self {
        assert!(capacity >= 2, "capacity must fit BOS and EOS");
        Self {
            symbols: vec![Symbol::Bos, Symbol::Eos],
            capacity,
        }
    }

    /// Frames `words` with BOS/EOS, truncating to capacity.
    pub fn from_words(words: impl IntoIterator<Item = Symbol>, capacity: usize) -> Self {
        let mut seq = Self::empty(capacity);
        let body: Vec<Symbol> = words.into_iter().take(capacity - 2).collect();
        seq.symbols.splice(1..1, body);
        seq
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// True when only BOS and EOS remain.
    pub fn is_empty(&self) -> bool {
        self.symbols.len() == 2
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn ids(&self) -> Vec<TokenId> {
        self.symbols.iter().map(Symbol::id).collect()
    }

    /// Surface words between the boundaries; placeholders are skipped.
    pub fn words(&self) -> Vec<String> {
        self.symbols
            .iter()
            .filter_map(|s| match s {
                Symbol::Word { text, .. } => Some(text.clone()),
                _ => None,
            })
            .collect()
    }

    /// Record index per word copied from the table.
    pub fn copied_from(&self) -> Vec<Option<usize>> {
        self.symbols
            .iter()
            .filter_map(|s| match s {
                Symbol::Word { origin, .. } => Some(match origin {
                    Origin::Copied(i) => Some(*i),
                    Origin::Generated => None,
                }),
                _ => None,
            })
            .collect()
    }

    pub fn placeholder_positions(&self) -> Vec<usize> {
        (0..self.symbols.len())
            .filter(|&i| self.symbols[i] == Symbol::Placeholder)
            .collect()
    }

    /// Inserts `counts[i]` placeholders after position `i`, one count per
    /// gap. Insertions beyond capacity are dropped, leftmost gaps first
    /// served. Returns the number actually inserted.
    pub fn insert_placeholders(&mut self, counts: &[usize]) -> usize {
        assert_eq!(counts.len(), self.symbols.len() - 1, "one count per gap");
        let mut room = self.capacity - self.symbols.len();
        let mut out = Vec::with_capacity(self.capacity);
        let mut inserted = 0;
        for (i, sym) in self.symbols.drain(..).enumerate() {
            out.push(sym);
            if let Some(&c) = counts.get(i) {
                let c = c.min(room);
                room -= c;
                inserted += c;
                out.extend(std::iter::repeat_n(Symbol::Placeholder, c));
            }
        }
        self.symbols = out;
        inserted
    }

    /// Replaces the symbol at `pos`; boundaries cannot be replaced.
    pub fn replace(&mut self, pos: usize, sym: Symbol) {
        assert!(!self.symbols[pos].is_boundary(), "cannot replace a boundary");
        self.symbols[pos] = sym;
    }

    /// Removes the flagged positions; boundary flags are ignored.
    pub fn delete(&mut self, flags: &[bool]) -> usize {
        assert_eq!(flags.len(), self.symbols.len());
        let before = self.symbols.len();
        let mut i = 0;
        self.symbols.retain(|s| {
            let keep = s.is_boundary() || !flags[i];
            i += 1;
            keep
        });
        before - self.symbols.len()
    }
}
