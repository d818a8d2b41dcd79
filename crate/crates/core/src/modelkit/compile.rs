use crate::error::{Error, Result};
use crate::logprob::LogCode;
use crate::machine::{MachineConfig, MemoryImage, Mode};
use crate::stochastic::quantize_linear;
use crate::width::BitWidth;

use super::BayesModel;

fn quantize(p: f64, config: &MachineConfig) -> Result<u16> {
    match config.mode {
        Mode::Logarithmic => Ok(LogCode::encode_with(p, BitWidth::W8, config.rounding)?.n()),
        Mode::Stochastic => Ok(quantize_linear(p, config.likelihood_width)?.v()),
    }
}

/// Quantizes `model` into a memory image for `config`.
///
/// Naive models map feature `f` to column `f`. Filter models put the
/// transition table in column 0: block row `r` at address `prev` holds
/// `p(r | prev)`, address `R` holds the uniform prior `1/R` used for the
/// first step, and any further addresses hold the floor code.
pub fn compile(model: &BayesModel, config: &MachineConfig) -> Result<MemoryImage> {
    config.validate()?;
    model.validate()?;
    if model.classes != config.rows {
        return Err(Error::Compile(format!(
            "model has {} classes, machine has {} rows",
            model.classes, config.rows
        )));
    }
    let offset = usize::from(model.is_filter());
    if model.features + offset != config.columns {
        return Err(Error::Compile(format!(
            "model needs {} columns, machine has {}",
            model.features + offset,
            config.columns
        )));
    }
    for f in 0..model.features {
        if model.bins[f] != config.values_per_column[f + offset] {
            return Err(Error::Compile(format!(
                "feature {f}: {} bins but column {} holds {} values",
                model.bins[f],
                f + offset,
                config.values_per_column[f + offset]
            )));
        }
    }
    let rows = config.rows;
    if model.is_filter() && config.values_per_column[0] < rows + 1 {
        return Err(Error::Compile(format!(
            "filter column needs at least {} values, has {}",
            rows + 1,
            config.values_per_column[0]
        )));
    }

    let floor = quantize(0.0, config)?;
    let mut image = MemoryImage::filled(
        config.mode,
        config.likelihood_width,
        rows,
        config.values_per_column.clone(),
        floor,
    )?;
    if let Some(transition) = &model.transition {
        let uniform = quantize(1.0 / rows as f64, config)?;
        for r in 0..rows {
            for (prev, row) in transition.iter().enumerate() {
                image.set_code(0, r, prev, quantize(row[r], config)?)?;
            }
            image.set_code(0, r, rows, uniform)?;
        }
    }
    for f in 0..model.features {
        for r in 0..rows {
            for (v, &p) in model.likelihood[f][r].iter().enumerate() {
                image.set_code(f + offset, r, v, quantize(p, config)?)?;
            }
        }
    }
    Ok(image)
}
