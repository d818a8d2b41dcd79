//! Exact float-domain inference used as the reference for both machines.

use crate::error::{Error, Result};

use super::BayesModel;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePosterior {
    pub posterior: Vec<f64>,
    pub argmax: usize,
    /// Every class product was zero; the posterior is reported as uniform.
    pub degenerate: bool,
}

impl OraclePosterior {
    /// `log2(p_best / p_second)`, infinite with a single class.
    pub fn top_two_log2_ratio(&self) -> f64 {
        let mut sorted = self.posterior.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        match sorted.as_slice() {
            [_] => f64::INFINITY,
            [a, b, ..] => (a / b).log2(),
            [] => 0.0,
        }
    }
}

pub fn oracle_infer(model: &BayesModel, obs: &[usize]) -> Result<OraclePosterior> {
    oracle_infer_with_prior(model, obs, &model.prior)
}

/// Normalized `prior[r] · Π_f likelihood[f][r][obs[f]]`; ties go to the
/// lowest class index.
pub fn oracle_infer_with_prior(
    model: &BayesModel,
    obs: &[usize],
    prior: &[f64],
) -> Result<OraclePosterior> {
    if obs.len() != model.features {
        return Err(Error::Input(format!(
            "{} observations for {} features",
            obs.len(),
            model.features
        )));
    }
    for (f, &o) in obs.iter().enumerate() {
        if o >= model.bins[f] {
            return Err(Error::Input(format!("feature {f}: bin {o} out of range")));
        }
    }
    let products: Vec<f64> = (0..model.classes)
        .map(|r| {
            obs.iter()
                .enumerate()
                .fold(prior[r], |acc, (f, &o)| acc * model.likelihood[f][r][o])
        })
        .collect();
    let total: f64 = products.iter().sum();
    if !(total > 0.0) {
        return Ok(OraclePosterior {
            posterior: vec![1.0 / model.classes as f64; model.classes],
            argmax: 0,
            degenerate: true,
        });
    }
    let mut argmax = 0;
    for r in 1..products.len() {
        if products[r] > products[argmax] {
            argmax = r;
        }
    }
    Ok(OraclePosterior {
        posterior: products.iter().map(|p| p / total).collect(),
        argmax,
        degenerate: false,
    })
}

/// Hard-decision filter: step 0 uses a uniform prior, step `t` uses the
/// transition row of the previous winner.
pub fn oracle_filter(model: &BayesModel, steps: &[Vec<usize>]) -> Result<Vec<usize>> {
    let transition = model
        .transition
        .as_ref()
        .ok_or_else(|| Error::Config("oracle_filter needs a transition matrix".into()))?;
    let uniform = vec![1.0 / model.classes as f64; model.classes];
    let mut winners = Vec::with_capacity(steps.len());
    for step in steps {
        let prior = match winners.last() {
            None => &uniform,
            Some(&prev) => &transition[prev],
        };
        winners.push(oracle_infer_with_prior(model, step, prior)?.argmax);
    }
    Ok(winners)
}
