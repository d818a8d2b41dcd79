//! Feature extraction from raw sleep (EEG/EMG) and gesture (accelerometer)
//! segments.

use crate::error::{Error, Result};

/// Index of the DFT bin nearest `f0` for `n` samples at `fs`.
pub fn nearest_bin(n: usize, fs: f64, f0: f64) -> usize {
    (f0 * n as f64 / fs).round() as usize
}

/// Single-bin power `|X_k|² / N²` at the DFT bin nearest `f0`, computed with
/// the Goertzel recurrence over a rectangular window.
pub fn psd_at(signal: &[f64], fs: f64, f0: f64) -> Result<f64> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "psd needs at least 2 samples, got {n}"
        )));
    }
    if !(fs > 0.0) || !(f0 > 0.0) || f0 >= fs / 2.0 {
        return Err(Error::Domain(format!(
            "frequency {f0} Hz outside (0, fs/2) for fs = {fs} Hz"
        )));
    }
    let k = nearest_bin(n, fs, f0);
    let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    let coeff = 2.0 * w.cos();
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for &x in signal {
        let s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    let power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    Ok(power.max(0.0) / (n as f64 * n as f64))
}

/// Mean of squared samples.
pub fn signal_power(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::Domain("signal power of an empty signal".into()));
    }
    Ok(signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64)
}

pub const SLEEP_DELTA_HZ: f64 = 1.5;
pub const SLEEP_ALPHA_HZ: f64 = 9.35;

/// `[EEG power at 1.5 Hz, EEG power at 9.35 Hz, EMG power]`.
pub fn sleep_features(eeg: &[f64], emg: &[f64], fs: f64) -> Result<[f64; 3]> {
    Ok([
        psd_at(eeg, fs, SLEEP_DELTA_HZ)?,
        psd_at(eeg, fs, SLEEP_ALPHA_HZ)?,
        signal_power(emg)?,
    ])
}

pub const GESTURE_FEATURE_NAMES: [&str; 10] = [
    "mean_x",
    "mean_y",
    "mean_z",
    "max_x",
    "max_y",
    "max_z",
    "mean_magnitude",
    "var_magnitude",
    "mean_jerk",
    "max_jerk",
];

/// Ten gesture features, in [`GESTURE_FEATURE_NAMES`] order. Jerk is the
/// absolute finite difference of the acceleration magnitude over `dt`.
pub fn gesture_features(accel: &[[f64; 3]], dt: f64) -> Result<[f64; 10]> {
    let n = accel.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "gesture features need at least 2 samples, got {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "sample period {dt} must be positive"
        )));
    }
    let nf = n as f64;
    let mut out = [0.0; 10];
    for axis in 0..3 {
        out[axis] = accel.iter().map(|a| a[axis]).sum::<f64>() / nf;
        out[3 + axis] = accel
            .iter()
            .map(|a| a[axis])
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let mag: Vec<f64> = accel
        .iter()
        .map(|a| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt())
        .collect();
    let mean_mag = mag.iter().sum::<f64>() / nf;
    out[6] = mean_mag;
    out[7] = mag.iter().map(|m| (m - mean_mag).powi(2)).sum::<f64>() / nf;
    let jerk: Vec<f64> = mag.windows(2).map(|w| (w[1] - w[0]).abs() / dt).collect();
    out[8] = jerk.iter().sum::<f64>() / jerk.len() as f64;
    out[9] = jerk.iter().copied().fold(0.0, f64::max);
    Ok(out)
}
