//! End-to-end orchestration: preprocessing, windowing, features, per-subject
//! train/test split, standardize + PCA + multiclass SVM, evaluation,
//! recording-level identification and model persistence.

mod model_file;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::dsp::{
    preprocess, segment_windows, DspError, PreprocessConfig, Window, HOP_S, WINDOW_S,
};
use crate::features::{extract_all, FeatureError, FeatureVector, FEATURE_CONTRACT_VERSION};
use crate::reduction::{fit_pca, fit_standardizer, PcaModel, ReductionError, Standardizer};
use crate::signal_io::{LabeledDataset, Recording, SignalIoError};
use crate::svm::{KernelSpec, MulticlassSvm, SolverOptions, SvmError};

pub use model_file::{
    load_model, parse_model, render_model, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_PCA_TARGET: f64 = 0.95;
pub const MIN_WINDOWS_PER_SUBJECT: usize = 5;

/// Errors carry the stage that produced them in their message.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[io] {0}")]
    SignalIo(#[from] SignalIoError),
    #[error("[preprocess] {0}")]
    Dsp(#[from] DspError),
    #[error("[features] {0}")]
    Feature(#[from] FeatureError),
    #[error("[reduction] {0}")]
    Reduction(#[from] ReductionError),
    #[error("[svm] {0}")]
    Svm(#[from] SvmError),
    #[error(
        "[split] subject {subject} has {windows} windows, need at least {MIN_WINDOWS_PER_SUBJECT}"
    )]
    SubjectTooSmall { subject: u32, windows: usize },
    #[error("[split] {0}")]
    InvalidSplit(String),
    #[error("[fit] training data covers {0} subject(s), need at least 2")]
    TooFewSubjects(usize),
    #[error("[evaluate] label {0} was not seen in training")]
    UnknownLabel(u32),
    #[error("[{stage}] no {what} to process")]
    EmptyInput {
        stage: &'static str,
        what: &'static str,
    },
    #[error("[identify] channel layout {found:?} does not match training layout {expected:?}")]
    ChannelMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("[identify] sampling rate {found} Hz does not match training rate {expected} Hz")]
    SamplingRateMismatch { expected: f64, found: f64 },
    #[error("[model] version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("[model] corrupt model file: {0}")]
    CorruptModel(String),
    #[error("[model] {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// First windows of each subject train, the rest test.
    Chronological,
    /// Seeded shuffle per subject, then the same counts.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            mode: SplitMode::Chronological,
        }
    }
}

impl SplitSpec {
    pub fn describe(&self) -> String {
        match self.mode {
            SplitMode::Chronological => format!(
                "chronological per subject, train fraction {}",
                self.train_fraction
            ),
            SplitMode::Random { seed } => {
                format!(
                    "random per subject (seed {seed}), train fraction {}",
                    self.train_fraction
                )
            }
        }
    }
}

/// Anything that belongs to a subject and sits at a position in its recording.
pub trait Labeled {
    fn subject_id(&self) -> u32;
    fn start_index(&self) -> usize;
}

impl Labeled for Window {
    fn subject_id(&self) -> u32 {
        self.subject_id
    }
    fn start_index(&self) -> usize {
        self.start_index
    }
}

impl Labeled for FeatureVector {
    fn subject_id(&self) -> u32 {
        self.subject_id
    }
    fn start_index(&self) -> usize {
        self.start_index
    }
}

/// Per-subject split: `ceil(f * n)` windows of each subject go to training.
pub fn split_dataset<T: Labeled + Clone>(
    items: &[T],
    spec: &SplitSpec,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(PipelineError::InvalidSplit(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if items.is_empty() {
        return Err(PipelineError::EmptyInput {
            stage: "split",
            what: "windows",
        });
    }
    let mut by_subject: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        by_subject.entry(it.subject_id()).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (subject, mut idx) in by_subject {
        if idx.len() < MIN_WINDOWS_PER_SUBJECT {
            return Err(PipelineError::SubjectTooSmall {
                subject,
                windows: idx.len(),
            });
        }
        idx.sort_by_key(|&i| items[i].start_index());
        if let SplitMode::Random { seed } = spec.mode {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(
                seed ^ u64::from(subject).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            idx.shuffle(&mut rng);
        }
        let n_train = ((spec.train_fraction * idx.len() as f64).ceil() as usize).min(idx.len());
        train.extend(idx[..n_train].iter().map(|&i| items[i].clone()));
        test.extend(idx[n_train..].iter().map(|&i| items[i].clone()));
    }
    Ok((train, test))
}

/// Preprocesses every recording and cuts it into windows. Recordings of the
/// same subject are laid end to end, so `start_index` keeps increasing across
/// sessions in dataset order.
pub fn dataset_windows(ds: &LabeledDataset, cfg: &PreprocessConfig) -> Result<Vec<Window>> {
    let mut offset: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &ds.entries {
        let clean = preprocess(&e.recording, cfg)?;
        let base = offset.entry(e.subject_id).or_insert(0);
        for mut w in segment_windows(&clean, e.subject_id, WINDOW_S, HOP_S)? {
            w.start_index += *base;
            out.push(w);
        }
        *base += clean.n_samples();
    }
    Ok(out)
}

pub fn dataset_features(ds: &LabeledDataset, cfg: &PreprocessConfig) -> Result<Vec<FeatureVector>> {
    Ok(extract_all(&dataset_windows(ds, cfg)?)?)
}

/// Everything needed to classify a raw recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub feature_version: u32,
    pub fs: f64,
    pub channels: Vec<String>,
    pub preprocess: PreprocessConfig,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub svm: MulticlassSvm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub kernel: KernelSpec,
    pub pca_target: f64,
    pub solver: SolverOptions,
    pub preprocess: PreprocessConfig,
    pub fs: f64,
    pub channels: Vec<String>,
}

impl FitConfig {
    /// RBF with C = 100, gamma = 0.01 and 95% retained variance.
    pub fn new(fs: f64, channels: Vec<String>) -> Self {
        Self {
            kernel: KernelSpec::rbf(100.0, 0.01),
            pca_target: DEFAULT_PCA_TARGET,
            solver: SolverOptions::default(),
            preprocess: PreprocessConfig::default(),
            fs,
            channels,
        }
    }
}

/// Standardizer and PCA fitted on `train`, and the projected rows.
pub fn fit_reduction(
    train: &[FeatureVector],
    pca_target: f64,
) -> Result<(Standardizer, PcaModel, Vec<Vec<f64>>)> {
    let rows: Vec<Vec<f64>> = train.iter().map(|f| f.values.clone()).collect();
    let standardizer = fit_standardizer(&rows)?;
    let z = standardizer.transform_rows(&rows)?;
    let pca = fit_pca(&z, pca_target)?;
    let projected = z
        .iter()
        .map(|r| pca.project(r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((standardizer, pca, projected))
}

/// Fits every stage on the training windows only.
pub fn fit_pipeline(train: &[FeatureVector], cfg: &FitConfig) -> Result<TrainedPipeline> {
    if train.is_empty() {
        return Err(PipelineError::EmptyInput {
            stage: "fit",
            what: "training windows",
        });
    }
    let subjects: BTreeSet<u32> = train.iter().map(|f| f.subject_id).collect();
    if subjects.len() < 2 {
        return Err(PipelineError::TooFewSubjects(subjects.len()));
    }
    let (standardizer, pca, projected) = fit_reduction(train, cfg.pca_target)?;
    let labels: Vec<u32> = train.iter().map(|f| f.subject_id).collect();
    let svm = MulticlassSvm::train(&projected, &labels, &cfg.kernel, cfg.solver)?;
    Ok(TrainedPipeline {
        feature_version: FEATURE_CONTRACT_VERSION,
        fs: cfg.fs,
        channels: cfg.channels.clone(),
        preprocess: cfg.preprocess,
        standardizer,
        pca,
        svm,
    })
}

impl TrainedPipeline {
    /// Standardize, project, classify one feature vector.
    pub fn predict_features(&self, values: &[f64]) -> Result<u32> {
        let z = self.standardizer.transform(values)?;
        Ok(self.svm.predict(&self.pca.project(&z)?)?)
    }

    pub fn predict_batch(&self, rows: &[FeatureVector]) -> Result<Vec<u32>> {
        use rayon::prelude::*;
        rows.par_iter()
            .map(|f| self.predict_features(&f.values))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Row = true class, column = predicted, both in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<u32>,
    /// 0 for a class that was never predicted.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub split: String,
    pub kernel: KernelSpec,
}

impl EvalReport {
    pub fn from_predictions(
        classes: &[u32],
        truth: &[u32],
        predicted: &[u32],
        split: String,
        kernel: KernelSpec,
    ) -> Result<Self> {
        let k = classes.len();
        let pos = |label: u32| {
            classes
                .binary_search(&label)
                .map_err(|_| PipelineError::UnknownLabel(label))
        };
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[pos(t)?][pos(p)?] += 1;
        }
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = (0..k)
            .map(|j| ratio(confusion[j][j], (0..k).map(|i| confusion[i][j]).sum()))
            .collect();
        let recall = (0..k)
            .map(|i| ratio(confusion[i][i], confusion[i].iter().sum()))
            .collect();
        Ok(Self {
            accuracy: ratio(trace, truth.len()),
            confusion,
            classes: classes.to_vec(),
            precision,
            recall,
            split,
            kernel,
        })
    }
}

/// Window-level accuracy, confusion matrix and per-class metrics on `test`.
pub fn evaluate(p: &TrainedPipeline, test: &[FeatureVector], split: &str) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(PipelineError::EmptyInput {
            stage: "evaluate",
            what: "test windows",
        });
    }
    if let Some(bad) = test
        .iter()
        .find(|f| p.svm.classes.binary_search(&f.subject_id).is_err())
    {
        return Err(PipelineError::UnknownLabel(bad.subject_id));
    }
    let predicted = p.predict_batch(test)?;
    let truth: Vec<u32> = test.iter().map(|f| f.subject_id).collect();
    EvalReport::from_predictions(
        &p.svm.classes,
        &truth,
        &predicted,
        split.to_string(),
        p.svm.kernel,
    )
}

/// Recording-level decision by majority over its windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub label: u32,
    pub window_predictions: Vec<u32>,
    /// Fraction of windows voting for each predicted label, ascending by label.
    pub shares: Vec<(u32, f64)>,
    /// Share of the winning label.
    pub majority_fraction: f64,
}

/// Preprocesses with the training flags, windows, classifies every window and
/// takes the most frequent label (lowest label on ties).
pub fn identify(p: &TrainedPipeline, r: &Recording) -> Result<Identification> {
    if r.channels() != p.channels.as_slice() {
        return Err(PipelineError::ChannelMismatch {
            expected: p.channels.clone(),
            found: r.channels().to_vec(),
        });
    }
    if r.fs() != p.fs {
        return Err(PipelineError::SamplingRateMismatch {
            expected: p.fs,
            found: r.fs(),
        });
    }
    let clean = preprocess(r, &p.preprocess)?;
    let windows = segment_windows(&clean, 0, WINDOW_S, HOP_S)?;
    let window_predictions = p.predict_batch(&extract_all(&windows)?)?;
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &window_predictions {
        *counts.entry(l).or_default() += 1;
    }
    let n = window_predictions.len() as f64;
    let (label, top) = counts.iter().fold(
        (0, 0),
        |(bl, bc), (&l, &c)| if c > bc { (l, c) } else { (bl, bc) },
    );
    Ok(Identification {
        label,
        shares: counts.iter().map(|(&l, &c)| (l, c as f64 / n)).collect(),
        majority_fraction: top as f64 / n,
        window_predictions,
    })
}
