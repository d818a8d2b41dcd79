//! Memory images: the quantized likelihood tables loaded into the blocks.
//!
//! Binary container, little-endian:
//!
//! ```text
//! magic   b"BYSM"
//! version u16 (= 1)
//! rows    u16
//! columns u16
//! V[c]    u16 × columns
//! width   u8  (8 | 16)
//! mode    u8  (0 = logarithmic, 1 = stochastic/linear)
//! codes   row-major: for r, for c, for v in 0..V[c]; u8 (w = 8) or u16 (w = 16)
//! crc32   u32 over every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::LogCode;
use crate::machine::Mode;
use crate::stochastic::LinearCode;
use crate::width::BitWidth;

pub const IMAGE_MAGIC: &[u8; 4] = b"BYSM";
pub const IMAGE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryImage {
    mode: Mode,
    width: BitWidth,
    rows: usize,
    values: Vec<usize>,
    offsets: Vec<usize>,
    // blocks[c][r][v] at offsets[c] + r * V[c] + v
    codes: Vec<u16>,
}

impl MemoryImage {
    /// Image with every entry set to `fill`.
    pub fn filled(
        mode: Mode,
        width: BitWidth,
        rows: usize,
        values: Vec<usize>,
        fill: u16,
    ) -> Result<Self> {
        if rows == 0 || values.is_empty() || values.contains(&0) {
            return Err(Error::Config(
                "image needs at least one row, one column and one value per column".into(),
            ));
        }
        if rows > u16::MAX as usize || values.len() > u16::MAX as usize {
            return Err(Error::Config("image dimensions exceed 16 bits".into()));
        }
        if values.iter().any(|&v| v > u16::MAX as usize) {
            return Err(Error::Config("values per column exceed 16 bits".into()));
        }
        if fill > width.max_code() {
            return Err(Error::Domain(format!(
                "fill code {fill} exceeds width {width}"
            )));
        }
        let mut offsets = Vec::with_capacity(values.len());
        let mut total = 0;
        for &v in &values {
            offsets.push(total);
            total += rows * v;
        }
        Ok(MemoryImage {
            mode,
            width,
            rows,
            values,
            offsets,
            codes: vec![fill; total],
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn width(&self) -> BitWidth {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.values.len()
    }

    pub fn values_per_column(&self) -> &[usize] {
        &self.values
    }

    #[inline]
    fn index(&self, column: usize, row: usize, value: usize) -> usize {
        self.offsets[column] + row * self.values[column] + value
    }

    #[inline]
    pub fn code(&self, column: usize, row: usize, value: usize) -> u16 {
        self.codes[self.index(column, row, value)]
    }

    pub fn set_code(&mut self, column: usize, row: usize, value: usize, code: u16) -> Result<()> {
        if column >= self.columns() || row >= self.rows || value >= self.values[column] {
            return Err(Error::Input(format!(
                "block address ({column}, {row}, {value}) out of range"
            )));
        }
        if code > self.width.max_code() {
            return Err(Error::Domain(format!(
                "code {code} exceeds width {}",
                self.width
            )));
        }
        let i = self.index(column, row, value);
        self.codes[i] = code;
        Ok(())
    }

    pub fn log_code(&self, column: usize, row: usize, value: usize) -> LogCode {
        debug_assert_eq!(self.mode, Mode::Logarithmic);
        LogCode::new(self.code(column, row, value), self.width).expect("stored code in range")
    }

    pub fn linear_code(&self, column: usize, row: usize, value: usize) -> LinearCode {
        debug_assert_eq!(self.mode, Mode::Stochastic);
        LinearCode::new(self.code(column, row, value), self.width).expect("stored code in range")
    }

    /// Raw codes in storage order (column blocks, then rows, then values).
    pub fn raw_codes(&self) -> &[u16] {
        &self.codes
    }

    pub(crate) fn raw_codes_mut(&mut self) -> &mut [u16] {
        &mut self.codes
    }

    /// Total stored logical bits.
    pub fn bit_count(&self) -> usize {
        self.codes.len() * self.width.bits() as usize
    }

    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&self.body_bytes())
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 2 * self.codes.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u16).to_le_bytes());
        out.extend_from_slice(&(self.columns() as u16).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        out.push(self.width.bits() as u8);
        out.push(match self.mode {
            Mode::Logarithmic => 0,
            Mode::Stochastic => 1,
        });
        for r in 0..self.rows {
            for c in 0..self.columns() {
                for v in 0..self.values[c] {
                    let code = self.code(c, r, v);
                    match self.width {
                        BitWidth::W8 => out.push(code as u8),
                        BitWidth::W16 => out.extend_from_slice(&code.to_le_bytes()),
                    }
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != IMAGE_MAGIC {
            return Err(Error::Format("not a memory image (bad magic)".into()));
        }
        let version = rd.u16()?;
        if version != IMAGE_VERSION {
            return Err(Error::Format(format!(
                "unsupported image version {version}"
            )));
        }
        let rows = rd.u16()? as usize;
        let columns = rd.u16()? as usize;
        let values = (0..columns)
            .map(|_| rd.u16().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let width =
            BitWidth::from_bits(rd.u8()? as u32).map_err(|e| Error::Format(e.to_string()))?;
        let mode = match rd.u8()? {
            0 => Mode::Logarithmic,
            1 => Mode::Stochastic,
            m => return Err(Error::Format(format!("unknown image mode {m}"))),
        };
        let mut image = MemoryImage::filled(mode, width, rows, values, 0)
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in 0..rows {
            for c in 0..columns {
                for v in 0..image.values[c] {
                    let code = match width {
                        BitWidth::W8 => rd.u8()? as u16,
                        BitWidth::W16 => rd.u16()?,
                    };
                    let i = image.index(c, r, v);
                    image.codes[i] = code;
                }
            }
        }
        let body_len = rd.pos;
        let stored = u32::from_le_bytes(rd.take(4)?.try_into().unwrap());
        if rd.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checksum".into()));
        }
        let actual = crc32fast::hash(&bytes[..body_len]);
        if stored != actual {
            return Err(Error::Format(format!(
                "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        Ok(image)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable JSON dump, `blocks[c][r][v]`.
    pub fn to_text(&self) -> String {
        let blocks = (0..self.columns())
            .map(|c| {
                (0..self.rows)
                    .map(|r| (0..self.values[c]).map(|v| self.code(c, r, v)).collect())
                    .collect()
            })
            .collect();
        let dump = ImageText {
            version: IMAGE_VERSION,
            mode: self.mode,
            width: self.width,
            rows: self.rows,
            values_per_column: self.values.clone(),
            checksum: format!("{:08x}", self.checksum()),
            blocks,
        };
        serde_json::to_string_pretty(&dump).expect("image text serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let dump: ImageText =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("image text: {e}")))?;
        let mut image = MemoryImage::filled(
            dump.mode,
            dump.width,
            dump.rows,
            dump.values_per_column.clone(),
            0,
        )?;
        if dump.blocks.len() != image.columns() {
            return Err(Error::Format("block column count mismatch".into()));
        }
        for (c, col) in dump.blocks.iter().enumerate() {
            if col.len() != image.rows {
                return Err(Error::Format(format!("column {c}: row count mismatch")));
            }
            for (r, table) in col.iter().enumerate() {
                if table.len() != image.values[c] {
                    return Err(Error::Format(format!("block ({c}, {r}): length mismatch")));
                }
                for (v, &code) in table.iter().enumerate() {
                    image.set_code(c, r, v, code)?;
                }
            }
        }
        Ok(image)
    }
}

#[derive(Serialize, Deserialize)]
struct ImageText {
    version: u16,
    mode: Mode,
    width: BitWidth,
    rows: usize,
    values_per_column: Vec<usize>,
    checksum: String,
    blocks: Vec<Vec<Vec<u16>>>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("truncated image".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
}
