//! CSV dataset files.
//!
//! The first line is a header of `key=value` fields:
//!
//! ```text
//! #bayesim-dataset,version=1,task=sleep_like,classes=4,content=features
//! ```
//!
//! Signal files add `content=signals,channels=N` and `fs=` or `dt=`. Every
//! following line is `label,value,value,...`.

use std::io::Write;
use std::path::Path;

use super::features::{gesture_features, sleep_features};
use super::{Content, Dataset, FeatureVector, TaskKind};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "#bayesim-dataset";
pub const DATASET_VERSION: u32 = 1;

impl Dataset {
    pub fn to_csv_string(&self) -> String {
        let mut header = format!(
            "{DATASET_MAGIC},version={DATASET_VERSION},task={},classes={}",
            self.task, self.classes
        );
        match self.content {
            Content::Features => header.push_str(",content=features"),
            Content::Signals { channels } => {
                header.push_str(&format!(",content=signals,channels={channels}"))
            }
        }
        if let Some(fs) = self.fs {
            header.push_str(&format!(",fs={fs}"));
        }
        if let Some(dt) = self.dt {
            header.push_str(&format!(",dt={dt}"));
        }
        let mut out = header;
        out.push('\n');
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        for s in &self.samples {
            let mut record = Vec::with_capacity(s.values.len() + 1);
            record.push(s.label.to_string());
            record.extend(s.values.iter().map(|v| v.to_string()));
            w.write_record(&record).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("utf8"));
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let err = |line: usize, m: String| Error::Input(format!("line {line}: {m}"));
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let mut fields = first.trim_end_matches('\r').split(',');
        if fields.next() != Some(DATASET_MAGIC) {
            return Err(err(
                1,
                format!("expected header starting with `{DATASET_MAGIC}`"),
            ));
        }
        let (mut version, mut task, mut classes, mut content, mut channels, mut fs, mut dt) =
            (None, None, None, None, None, None, None);
        for field in fields {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| err(1, format!("header field `{field}` is not key=value")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x > 0.0)
                    .ok_or_else(|| err(1, format!("`{k}` must be a positive number, got `{v}`")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| err(1, format!("`{k}` must be an integer, got `{v}`")))
            };
            match k {
                "version" => version = Some(int(v)?),
                "task" => task = Some(v.parse::<TaskKind>().map_err(|e| err(1, e.to_string()))?),
                "classes" => classes = Some(int(v)?),
                "content" => content = Some(v.to_string()),
                "channels" => channels = Some(int(v)?),
                "fs" => fs = Some(num(v)?),
                "dt" => dt = Some(num(v)?),
                "manifest" => {}
                _ => return Err(err(1, format!("unknown header field `{k}`"))),
            }
        }
        if version != Some(DATASET_VERSION as usize) {
            return Err(err(1, format!("unsupported dataset version {version:?}")));
        }
        let task = task.ok_or_else(|| err(1, "missing `task`".into()))?;
        let classes = classes
            .filter(|&c| c > 0)
            .ok_or_else(|| err(1, "missing or zero `classes`".into()))?;
        let content = match content.as_deref() {
            Some("features") | None => Content::Features,
            Some("signals") => Content::Signals {
                channels: channels
                    .filter(|&c| c > 0)
                    .ok_or_else(|| err(1, "signal files need `channels`".into()))?,
            },
            Some(other) => return Err(err(1, format!("unknown content `{other}`"))),
        };

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() + 1);
                err(line as usize, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() + 1) as usize;
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            let label: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| err(line, format!("label `{}` is not an integer", &record[0])))?;
            if label >= classes {
                return Err(err(line, format!("label {label} outside 0..{classes}")));
            }
            let values = record
                .iter()
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(line, format!("value `{f}` is not a finite number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.is_empty() {
                return Err(err(line, "row has no values".into()));
            }
            if let Some(first) = samples.first().map(|s: &FeatureVector| s.values.len()) {
                if values.len() != first {
                    return Err(err(
                        line,
                        format!("expected {first} values, got {}", values.len()),
                    ));
                }
            }
            if let Content::Signals { channels } = content {
                if values.len() % channels != 0 {
                    return Err(err(
                        line,
                        format!(
                            "{} samples do not split into {channels} channels",
                            values.len()
                        ),
                    ));
                }
            }
            samples.push(FeatureVector { label, values });
        }
        if samples.is_empty() {
            return Err(err(2, "dataset has no rows".into()));
        }
        Ok(Dataset {
            task,
            classes,
            content,
            fs,
            dt,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text).map_err(|e| match e {
            Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Turns a signal dataset into features: sleep rows are `EEG ++ EMG`
/// (2 channels, needs `fs`), gesture rows are `x ++ y ++ z` (3 channels,
/// needs `dt`). Feature datasets pass through unchanged.
pub fn extract_features(ds: &Dataset) -> Result<Dataset> {
    let channels = match ds.content {
        Content::Features => return Ok(ds.clone()),
        Content::Signals { channels } => channels,
    };
    let samples = match ds.task {
        TaskKind::SleepLike => {
            if channels != 2 {
                return Err(Error::Input(format!(
                    "sleep signals need 2 channels, got {channels}"
                )));
            }
            let fs = ds
                .fs
                .ok_or_else(|| Error::Input("sleep signals need `fs`".into()))?;
            ds.samples
                .iter()
                .map(|s| {
                    let (eeg, emg) = s.values.split_at(s.values.len() / 2);
                    Ok(FeatureVector {
                        label: s.label,
                        values: sleep_features(eeg, emg, fs)?.to_vec(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        TaskKind::GestureLike => {
            if channels != 3 {
                return Err(Error::Input(format!(
                    "gesture signals need 3 channels, got {channels}"
                )));
            }
            let dt = ds
                .dt
                .ok_or_else(|| Error::Input("gesture signals need `dt`".into()))?;
            ds.samples
                .iter()
                .map(|s| {
                    let n = s.values.len() / 3;
                    let accel: Vec<[f64; 3]> = (0..n)
                        .map(|i| [s.values[i], s.values[n + i], s.values[2 * n + i]])
                        .collect();
                    Ok(FeatureVector {
                        label: s.label,
                        values: gesture_features(&accel, dt)?.to_vec(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Dataset {
        content: Content::Features,
        samples,
        ..ds.clone()
    })
}
