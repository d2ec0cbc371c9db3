//! Password alphabets: the bijection between printable symbols and residues.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet needs at least 2 symbols, got {0}")]
    TooSmall(usize),
    #[error("symbol {0:?} appears more than once")]
    DuplicateSymbol(char),
    #[error("symbol {0:?} is not printable")]
    NotPrintable(char),
    #[error("character {symbol:?} at position {position} is not in the alphabet")]
    NotInAlphabet { position: usize, symbol: char },
    #[error("residue {value} at position {position} is outside [0, {size})")]
    ResidueOutOfRange { position: usize, value: u32, size: u32 },
    #[error("unknown alphabet id {0:?}")]
    UnknownId(String),
}

/// Ordered set of `Z` distinct printable symbols; symbol `i` stands for residue `i`.
#[derive(Debug, Clone)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, u32>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for Alphabet {}

pub const DECIMAL: &str = "decimal";
pub const LOWER_ALNUM: &str = "alnum36";
pub const PRINTABLE: &str = "printable95";

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self, AlphabetError> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.len() < 2 {
            return Err(AlphabetError::TooSmall(symbols.len()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &ch) in symbols.iter().enumerate() {
            if ch.is_control() {
                return Err(AlphabetError::NotPrintable(ch));
            }
            if index.insert(ch, i as u32).is_some() {
                return Err(AlphabetError::DuplicateSymbol(ch));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// `0`..`9`, Z = 10.
    pub fn decimal() -> Self {
        Self::new("0123456789").expect("static alphabet")
    }

    /// `0`..`9` then `a`..`z`, Z = 36.
    pub fn lower_alnum() -> Self {
        Self::new("0123456789abcdefghijklmnopqrstuvwxyz").expect("static alphabet")
    }

    /// Printable ASCII from space (0x20) through `~` (0x7e), Z = 95.
    pub fn printable() -> Self {
        let s: String = (0x20u8..=0x7e).map(char::from).collect();
        Self::new(&s).expect("static alphabet")
    }

    /// Looks up one of the shipped alphabets by id.
    pub fn builtin(id: &str) -> Result<Self, AlphabetError> {
        match id {
            DECIMAL => Ok(Self::decimal()),
            LOWER_ALNUM => Ok(Self::lower_alnum()),
            PRINTABLE => Ok(Self::printable()),
            other => Err(AlphabetError::UnknownId(other.to_string())),
        }
    }

    pub fn builtin_ids() -> [&'static str; 3] {
        [DECIMAL, LOWER_ALNUM, PRINTABLE]
    }

    /// The ring size `Z`.
    pub fn size(&self) -> u32 {
        self.symbols.len() as u32
    }

    pub fn symbols(&self) -> String {
        self.symbols.iter().collect()
    }

    pub fn residue_of(&self, symbol: char) -> Option<u32> {
        self.index.get(&symbol).copied()
    }

    pub fn symbol_of(&self, residue: u32) -> Option<char> {
        self.symbols.get(residue as usize).copied()
    }

    /// Maps a password string to residues. Positions in errors are 1-based.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>, AlphabetError> {
        text.chars()
            .enumerate()
            .map(|(i, ch)| {
                self.residue_of(ch).ok_or(AlphabetError::NotInAlphabet {
                    position: i + 1,
                    symbol: ch,
                })
            })
            .collect()
    }

    pub fn decode(&self, digits: &[u32]) -> Result<String, AlphabetError> {
        digits
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                self.symbol_of(d).ok_or(AlphabetError::ResidueOutOfRange {
                    position: i + 1,
                    value: d,
                    size: self.size(),
                })
            })
            .collect()
    }
}
