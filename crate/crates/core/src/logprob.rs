//! Logarithmic probability codes.
//!
//! A probability `p` is stored as an unsigned integer `n` with
//! `p ≈ (1/2)^(n/m)`. With 8-bit codes `m = 8`, so codes 0..=8 cover
//! probabilities between 1 and 1/2 and code 255 is the smallest
//! representable probability, `(1/2)^(255/8) ≈ 2.5e-10`. 16-bit codes use
//! `m = 2048`, which reaches the same minimum probability with finer steps.
//!
//! Multiplying probabilities becomes integer addition. The near-memory
//! adders saturate: any sum that would exceed the largest code yields the
//! largest code.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::width::BitWidth;

/// How `-m·log2(p)` is rounded to an integer code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    HalfAwayFromZero,
    HalfToEven,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::HalfAwayFromZero => x.round(),
            Rounding::HalfToEven => x.round_ties_even(),
        }
    }
}

/// Codes per halving of probability.
pub fn steps_per_octave(width: BitWidth) -> f64 {
    match width {
        BitWidth::W8 => 8.0,
        BitWidth::W16 => 2048.0,
    }
}

/// Smallest probability an 8-bit code can represent, `(1/2)^(255/8)`.
pub fn min_probability() -> f64 {
    (-255.0f64 / 8.0).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogCode {
    n: u16,
    width: BitWidth,
}

impl LogCode {
    /// Wraps a raw code. Fails when `n` does not fit `width`.
    pub fn new(n: u16, width: BitWidth) -> Result<Self> {
        if n > width.max_code() {
            return Err(Error::Domain(format!(
                "log code {n} exceeds {}-bit range",
                width.bits()
            )));
        }
        Ok(LogCode { n, width })
    }

    pub fn new8(n: u8) -> Self {
        LogCode {
            n: n as u16,
            width: BitWidth::W8,
        }
    }

    /// Probability one.
    pub fn one(width: BitWidth) -> Self {
        LogCode { n: 0, width }
    }

    /// The saturated code, i.e. the smallest representable probability.
    pub fn floor(width: BitWidth) -> Self {
        LogCode {
            n: width.max_code(),
            width,
        }
    }

    pub fn n(self) -> u16 {
        self.n
    }

    pub fn width(self) -> BitWidth {
        self.width
    }

    pub fn is_saturated(self) -> bool {
        self.n == self.width.max_code()
    }

    pub fn encode(p: f64, width: BitWidth) -> Result<Self> {
        Self::encode_with(p, width, Rounding::default())
    }

    /// `n = clamp(round(-m·log2 p), 0, 2^w - 1)`. Zero maps to the floor code.
    pub fn encode_with(p: f64, width: BitWidth, rounding: Rounding) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let max = width.max_code();
        if p == 0.0 {
            return Ok(LogCode { n: max, width });
        }
        let exact = -steps_per_octave(width) * p.log2();
        let n = rounding.apply(exact).clamp(0.0, max as f64) as u16;
        Ok(LogCode { n, width })
    }

    pub fn decode(self) -> f64 {
        (-(self.n as f64) / steps_per_octave(self.width)).exp2()
    }

    /// Log-domain product: `min(a + b, 2^w - 1)`.
    ///
    /// Panics if the widths differ.
    pub fn sat_add(self, other: LogCode) -> LogCode {
        assert_eq!(
            self.width, other.width,
            "sat_add on log codes of different widths"
        );
        let sum = self.n as u32 + other.n as u32;
        LogCode {
            n: sum.min(self.width.max_code() as u32) as u16,
            width: self.width,
        }
    }

    /// Orders by represented probability: `Greater` means `self` is the more
    /// probable code, which is the case iff `self.n < other.n`.
    pub fn compare(self, other: LogCode) -> Ordering {
        assert_eq!(
            self.width, other.width,
            "compare on log codes of different widths"
        );
        other.n.cmp(&self.n)
    }
}

impl fmt::Display for LogCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n)
    }
}
