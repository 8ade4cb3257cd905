//! Evaluation protocols over a [`Dataset`].

use std::fmt;
use std::str::FromStr;

use evofuzz::{EngineConfig, Model};

use crate::data::Dataset;
use crate::error::CliError;
use crate::metrics::{ModelSummary, Phase, SampleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Predict every sample, then learn it.
    TestThenTrain,
    /// Alternate `train` learned samples with `test` frozen predictions.
    Holdout { train: usize, test: usize },
    /// Contiguous folds; each is predicted by a model trained on the rest.
    KFold { k: usize },
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::TestThenTrain => write!(f, "test-then-train"),
            Protocol::Holdout { train, test } => write!(f, "holdout:{train}:{test}"),
            Protocol::KFold { k } => write!(f, "kfold:{k}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    /// `test-then-train`, `holdout:TRAIN:TEST` or `kfold:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| v.parse::<usize>().map_err(|_| format!("bad number {v:?} in protocol {s:?}"));
        match parts.as_slice() {
            ["test-then-train"] | ["prequential"] => Ok(Protocol::TestThenTrain),
            ["holdout", a, b] => {
                let (train, test) = (num(a)?, num(b)?);
                if train == 0 || test == 0 {
                    return Err("holdout windows must be non-empty".into());
                }
                Ok(Protocol::Holdout { train, test })
            }
            ["kfold", k] => {
                let k = num(k)?;
                if k < 2 {
                    return Err("kfold needs k >= 2".into());
                }
                Ok(Protocol::KFold { k })
            }
            _ => Err(format!("unknown protocol {s:?}, expected test-then-train, holdout:TRAIN:TEST or kfold:K")),
        }
    }
}

/// Everything a protocol run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<SampleRecord>,
    /// Final models with labels (`model`, or `fold-1` ... for cross validation).
    pub models: Vec<(String, Model)>,
}

impl RunOutput {
    pub fn model_summaries(&self) -> Vec<ModelSummary> {
        self.models.iter().map(|(l, m)| ModelSummary::of(l, m)).collect()
    }
}

fn new_model(cfg: &EngineConfig, data: &Dataset) -> Result<Model, CliError> {
    Ok(Model::new(cfg.clone(), data.p(), data.m())?)
}

pub fn test_then_train(cfg: &EngineConfig, data: &Dataset) -> Result<RunOutput, CliError> {
    let mut model = new_model(cfg, data)?;
    let mut records = Vec::with_capacity(data.len());
    for (i, (x, t)) in data.x.iter().zip(&data.t).enumerate() {
        let tr = model.process_sample(x, t)?;
        records.push(SampleRecord::from_trace(i, Phase::Prequential, None, t, tr));
    }
    Ok(RunOutput { records, models: vec![("model".into(), model)] })
}

pub fn holdout(cfg: &EngineConfig, data: &Dataset, train: usize, test: usize) -> Result<RunOutput, CliError> {
    let mut model = new_model(cfg, data)?;
    let mut records = Vec::with_capacity(data.len());
    let period = train + test;
    for (i, (x, t)) in data.x.iter().zip(&data.t).enumerate() {
        if i % period < train || model.rules.is_empty() {
            let tr = model.process_sample(x, t)?;
            records.push(SampleRecord::from_trace(i, Phase::Train, None, t, tr));
        } else {
            let y = model.predict(x)?;
            records.push(SampleRecord::from_prediction(i, None, t, Some(y), &model));
        }
    }
    Ok(RunOutput { records, models: vec![("model".into(), model)] })
}

/// Fold `f` of `k` covers `[f n / k, (f + 1) n / k)`.
pub fn fold_bounds(n: usize, k: usize, f: usize) -> (usize, usize) {
    (f * n / k, (f + 1) * n / k)
}

pub fn kfold(cfg: &EngineConfig, data: &Dataset, k: usize) -> Result<RunOutput, CliError> {
    if data.len() < k {
        return Err(CliError::Config(format!("kfold:{k} needs at least {k} samples, have {}", data.len())));
    }
    let results: Vec<Result<(Vec<SampleRecord>, Model), CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|f| {
                s.spawn(move || {
                    let (lo, hi) = fold_bounds(data.len(), k, f);
                    let mut model = new_model(cfg, data)?;
                    for i in (0..lo).chain(hi..data.len()) {
                        model.process_sample(&data.x[i], &data.t[i])?;
                    }
                    let recs = (lo..hi)
                        .map(|i| {
                            let y = model.predict(&data.x[i])?;
                            Ok(SampleRecord::from_prediction(i, Some(f + 1), &data.t[i], Some(y), &model))
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Ok((recs, model))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
    });
    let mut out = RunOutput { records: Vec::with_capacity(data.len()), models: Vec::with_capacity(k) };
    for (f, r) in results.into_iter().enumerate() {
        let (recs, model) = r?;
        out.records.extend(recs);
        out.models.push((format!("fold-{}", f + 1), model));
    }
    Ok(out)
}

pub fn run_protocol(cfg: &EngineConfig, data: &Dataset, protocol: Protocol) -> Result<RunOutput, CliError> {
    if data.is_empty() {
        return Err(CliError::Data("no usable samples".into()));
    }
    match protocol {
        Protocol::TestThenTrain => test_then_train(cfg, data),
        Protocol::Holdout { train, test } => holdout(cfg, data, train, test),
        Protocol::KFold { k } => kfold(cfg, data, k),
    }
}
