use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage width of a likelihood code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum BitWidth {
    W8,
    W16,
}

impl BitWidth {
    pub fn bits(self) -> u32 {
        match self {
            BitWidth::W8 => 8,
            BitWidth::W16 => 16,
        }
    }

    /// Largest storable code, `2^w - 1`.
    pub fn max_code(self) -> u16 {
        match self {
            BitWidth::W8 => u8::MAX as u16,
            BitWidth::W16 => u16::MAX,
        }
    }

    /// Number of distinct codes, `2^w`.
    pub fn levels(self) -> u32 {
        1 << self.bits()
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitWidth::W8),
            16 => Ok(BitWidth::W16),
            other => Err(Error::Config(format!(
                "unsupported bit width {other} (expected 8 or 16)"
            ))),
        }
    }
}

impl TryFrom<u32> for BitWidth {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        BitWidth::from_bits(bits)
    }
}

impl From<BitWidth> for u32 {
    fn from(w: BitWidth) -> u32 {
        w.bits()
    }
}

impl fmt::Display for BitWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}
