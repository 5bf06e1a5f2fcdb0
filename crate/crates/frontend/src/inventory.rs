use crate::error::{FrontendError, Result};

pub type PhonemeId = usize;

pub const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
pub const CONSONANTS: [&str; 35] = [
    "b", "by", "ch", "d", "dy", "f", "fy", "g", "gw", "gy", "h", "hy", "j", "k", "kw", "ky", "m", "my", "n", "N", "ng",
    "ny", "p", "py", "r", "ry", "s", "sh", "t", "ts", "ty", "v", "w", "y", "z",
];
pub const GEMINATE: &str = "cl";
/// Comma, sentence boundary, question mark.
pub const PAUSES: [&str; 3] = ["pau", "sil", "qsil"];

pub const NUM_SYMBOLS: usize = 44;
pub const PAU: PhonemeId = 41;
pub const SIL: PhonemeId = 42;
pub const QSIL: PhonemeId = 43;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhonemeClass {
    Vowel,
    Consonant,
    Geminate,
    Pause,
}

/// The fixed symbol set. IDs follow the order vowels, consonants, `cl`, pauses.
#[derive(Debug, Clone)]
pub struct PhonemeInventory {
    symbols: Vec<&'static str>,
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::standard()
    }
}

impl PhonemeInventory {
    pub fn standard() -> Self {
        let mut symbols = Vec::with_capacity(NUM_SYMBOLS);
        symbols.extend(VOWELS);
        symbols.extend(CONSONANTS);
        symbols.push(GEMINATE);
        symbols.extend(PAUSES);
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[&'static str] {
        &self.symbols
    }

    pub fn id(&self, symbol: &str) -> Option<PhonemeId> {
        self.symbols.iter().position(|s| *s == symbol)
    }

    pub fn symbol(&self, id: PhonemeId) -> Option<&'static str> {
        self.symbols.get(id).copied()
    }

    pub fn class(&self, id: PhonemeId) -> Option<PhonemeClass> {
        match id {
            0..=4 => Some(PhonemeClass::Vowel),
            5..=39 => Some(PhonemeClass::Consonant),
            40 => Some(PhonemeClass::Geminate),
            41..=43 => Some(PhonemeClass::Pause),
            _ => None,
        }
    }

    pub fn render(&self, ids: &[PhonemeId]) -> String {
        ids.iter().map(|&i| self.symbol(i).unwrap_or("?")).collect::<Vec<_>>().join(" ")
    }
}

/// Splits on whitespace and maps each token to its ID.
pub fn tokenize_transcript(text: &str) -> Result<Vec<PhonemeId>> {
    let inv = PhonemeInventory::standard();
    text.split_whitespace()
        .enumerate()
        .map(|(position, tok)| {
            inv.id(tok).ok_or_else(|| FrontendError::UnknownSymbol { symbol: tok.to_string(), position })
        })
        .collect()
}
