//! Per-class distribution fitting and discretization onto address bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::min_probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Gaussian,
    /// Gaussian in the log of the feature.
    Lognormal,
}

/// `location`/`scale` are the mean and standard deviation in the fitting
/// domain: the feature itself for Gaussian, its natural log for lognormal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedDistribution {
    pub kind: DistKind,
    pub location: f64,
    pub scale: f64,
}

/// Floor applied to fitted scales when no dynamic range is known.
pub const DEFAULT_SCALE_FLOOR: f64 = 1e-6;

/// Fraction of a feature's dynamic range used as its scale floor.
pub const SCALE_FLOOR_FRACTION: f64 = 1e-6;

impl FittedDistribution {
    /// Maps a raw feature value into the fitting domain.
    pub fn transform(kind: DistKind, x: f64) -> Result<f64> {
        match kind {
            DistKind::Gaussian => Ok(x),
            DistKind::Lognormal if x > 0.0 => Ok(x.ln()),
            DistKind::Lognormal => Err(Error::Training(format!(
                "lognormal feature needs strictly positive samples, got {x}"
            ))),
        }
    }

    /// Normal density in the fitting domain.
    pub fn density(&self, z: f64) -> f64 {
        let u = (z - self.location) / self.scale;
        (-0.5 * u * u).exp() / (self.scale * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Fits with the default scale floor.
pub fn fit(kind: DistKind, samples: &[f64]) -> Result<FittedDistribution> {
    fit_with_floor(kind, samples, DEFAULT_SCALE_FLOOR)
}

/// Sample mean and sample (n - 1) standard deviation in the fitting domain,
/// the latter floored at `scale_floor`.
pub fn fit_with_floor(
    kind: DistKind,
    samples: &[f64],
    scale_floor: f64,
) -> Result<FittedDistribution> {
    if samples.len() < 2 {
        return Err(Error::Training(format!(
            "fitting needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let z = samples
        .iter()
        .map(|&x| FittedDistribution::transform(kind, x))
        .collect::<Result<Vec<_>>>()?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite training sample".into()));
    }
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(FittedDistribution {
        kind,
        location: mean,
        scale: var.sqrt().max(scale_floor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangePolicy {
    /// `location ± 4·scale` of the distribution being discretized.
    OwnSpread,
    /// A shared grid, in the fitting domain.
    Fixed { lo: f64, hi: f64 },
}

pub const SPREAD_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    /// One value per bin, in `[min_probability, 1]`.
    pub likelihood: Vec<f64>,
    /// `bins + 1` ascending edges in the fitting domain.
    pub edges: Vec<f64>,
}

pub fn grid(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let step = (hi - lo) / bins as f64;
    (0..=bins).map(|i| lo + step * i as f64).collect()
}

/// Evaluates the density at every bin center times the bin width (midpoint
/// mass), capped at 1 and floored at the smallest log-code probability.
/// Values outside the grid are clamped into the edge bins when addressed,
/// so the edge bins stand for the tails.
pub fn discretize(
    dist: &FittedDistribution,
    bins: usize,
    policy: RangePolicy,
) -> Result<Discretized> {
    if bins < 2 {
        return Err(Error::Training(format!("need at least 2 bins, got {bins}")));
    }
    let (lo, hi) = match policy {
        RangePolicy::OwnSpread => (
            dist.location - SPREAD_SIGMAS * dist.scale,
            dist.location + SPREAD_SIGMAS * dist.scale,
        ),
        RangePolicy::Fixed { lo, hi } => (lo, hi),
    };
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Training(format!(
            "empty discretization range [{lo}, {hi}]"
        )));
    }
    let edges = grid(lo, hi, bins);
    let width = (hi - lo) / bins as f64;
    let floor = min_probability();
    let likelihood = edges
        .windows(2)
        .map(|e| (dist.density(0.5 * (e[0] + e[1])) * width).clamp(floor, 1.0))
        .collect();
    Ok(Discretized { likelihood, edges })
}

/// Bin of `z` on an ascending edge grid; out-of-range values land in the
/// edge bins.
pub fn bin_of(edges: &[f64], z: f64) -> usize {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    if !(z > lo) {
        return 0;
    }
    if z >= hi {
        return bins - 1;
    }
    let i = ((z - lo) / (hi - lo) * bins as f64).floor() as usize;
    i.min(bins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_examples() {
        let d = fit(DistKind::Gaussian, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.location, 1.0);
        assert_eq!(d.scale, DEFAULT_SCALE_FLOOR);

        let d = fit(DistKind::Gaussian, &[0.0, 2.0]).unwrap();
        assert_eq!(d.location, 1.0);
        assert!((d.scale - 2f64.sqrt()).abs() < 1e-15);

        let e2 = 2f64.exp();
        let d = fit(DistKind::Lognormal, &[1.0, e2]).unwrap();
        assert!((d.location - 1.0).abs() < 1e-15);
        assert!((d.scale - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit(DistKind::Gaussian, &[1.0]),
            Err(Error::Training(_))
        ));
        assert!(fit(DistKind::Lognormal, &[1.0, 0.0]).is_err());
        assert!(fit(DistKind::Lognormal, &[1.0, -2.0]).is_err());
    }

    fn standard() -> FittedDistribution {
        FittedDistribution {
            kind: DistKind::Gaussian,
            location: 0.0,
            scale: 1.0,
        }
    }

    #[test]
    fn two_bins_symmetric() {
        let d = discretize(&standard(), 2, RangePolicy::OwnSpread).unwrap();
        assert_eq!(d.edges, vec![-4.0, 0.0, 4.0]);
        assert_eq!(d.likelihood[0], d.likelihood[1]);
    }

    #[test]
    fn bin_ratio_matches_density_ratio() {
        let d = discretize(&standard(), 64, RangePolicy::OwnSpread).unwrap();
        // closed-form standard normal density at the centers
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let step = 8.0 / 64.0;
        let center = |i: usize| -4.0 + step * (i as f64 + 0.5);
        let ratio = d.likelihood[32] / d.likelihood[0];
        let expect = phi(center(32)) / phi(center(0));
        assert!((ratio / expect - 1.0).abs() < 1e-12, "{ratio} vs {expect}");
    }

    #[test]
    fn floor_applies() {
        let narrow = FittedDistribution {
            kind: DistKind::Gaussian,
            location: 0.0,
            scale: 1e-3,
        };
        for dist in [standard(), narrow] {
            let d = discretize(
                &dist,
                16,
                RangePolicy::Fixed {
                    lo: -50.0,
                    hi: 50.0,
                },
            )
            .unwrap();
            assert!(d
                .likelihood
                .iter()
                .all(|&p| p >= min_probability() && p <= 1.0));
        }
        assert!(discretize(&standard(), 1, RangePolicy::OwnSpread).is_err());
    }

    #[test]
    fn bins_clamp_tails() {
        let edges = grid(0.0, 4.0, 4);
        assert_eq!(bin_of(&edges, -10.0), 0);
        assert_eq!(bin_of(&edges, 0.5), 0);
        assert_eq!(bin_of(&edges, 1.0), 1);
        assert_eq!(bin_of(&edges, 3.99), 3);
        assert_eq!(bin_of(&edges, 100.0), 3);
        assert_eq!(bin_of(&edges, f64::NAN), 0);
    }
}
