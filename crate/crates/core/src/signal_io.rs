//! EEG recordings on disk and synthetic multi-subject EEG.
//!
//! Recording CSV layout:
//!
//! ```text
//! # fs=250
//! ch:FP2,ch:FP1,...
//! 12.5,-3.25,...
//! ```
//!
//! One row per sample, one column per channel, values in microvolts written
//! with shortest round-trip decimal text so that a save/load cycle is exact.
//! The `# fs=` line is optional inside a dataset directory, where
//! `meta.txt` carries the sampling rate.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

/// Default montage of the 8-channel headset, in recording order.
pub const CHANNEL_NAMES: [&str; 8] = ["FP2", "FP1", "C4", "C3", "P8", "P7", "O1", "O2"];

/// Sampling rate of the source hardware.
pub const DEFAULT_FS: f64 = 250.0;

/// Name written to `meta.txt` for the generator backing synthetic data.
pub const GENERATOR_NAME: &str = "xoshiro256++";

const META_FILE: &str = "meta.txt";
const TONES_PER_COMPONENT: usize = 8;

#[derive(Debug, Error)]
pub enum SignalIoError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("non-numeric sample at row {row}, column {col}")]
    NonNumericSample { row: usize, col: usize },
    #[error("ragged rows: row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("dataset at {0} contains no recordings")]
    EmptyDataset(PathBuf),
    #[error("inconsistent sampling rate: expected {expected} Hz, {path} has {found} Hz")]
    InconsistentSamplingRate {
        path: PathBuf,
        expected: f64,
        found: f64,
    },
    #[error("inconsistent channels in {path}: expected {expected:?}, found {found:?}")]
    InconsistentChannels {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("invalid synthesis profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("metadata error in {path}: {reason}")]
    Metadata { path: PathBuf, reason: String },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SignalIoError>;

/// Multi-channel EEG in microvolts, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: Vec<String>,
    fs: f64,
    data: Vec<Vec<f64>>,
}

impl Recording {
    /// Validates and builds a recording. Rows are per-channel sample sequences.
    pub fn new(channels: Vec<String>, fs: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(SignalIoError::InvalidRecording("no channels".into()));
        }
        if channels.len() != data.len() {
            return Err(SignalIoError::InvalidRecording(format!(
                "{} channel names for {} data rows",
                channels.len(),
                data.len()
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(SignalIoError::InvalidRecording(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        let n = data[0].len();
        if n == 0 {
            return Err(SignalIoError::InvalidRecording("zero samples".into()));
        }
        for (ch, row) in data.iter().enumerate() {
            if row.len() != n {
                return Err(SignalIoError::InvalidRecording(format!(
                    "channel {ch} has {} samples, expected {n}",
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(SignalIoError::InvalidRecording(format!(
                    "non-finite sample at channel {ch}, index {i}"
                )));
            }
        }
        Ok(Self { channels, fs, data })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    /// Same channels and rate, new sample rows. Validated like [`Recording::new`].
    pub fn with_data(&self, data: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.channels.clone(), self.fs, data)
    }
}

/// One subject's recordings, tagged with a small integer label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub subject_id: u32,
    pub name: String,
    pub recording: Recording,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub fs: f64,
    pub channels: Vec<String>,
    pub entries: Vec<LabeledRecording>,
    /// Present when the dataset came from the synthetic generator.
    pub generator_seed: Option<u64>,
}

impl LabeledDataset {
    pub fn subject_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.entries.iter().map(|e| e.subject_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// One band-limited oscillation in a synthetic subject's spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralComponent {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Mean power of the component in µV².
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub components: Vec<SpectralComponent>,
    /// White-noise power in µV².
    pub noise_floor: f64,
    pub seed: u64,
}

impl SynthProfile {
    fn validate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        if self.components.is_empty() {
            return Err(SignalIoError::InvalidProfile(
                "no spectral components".into(),
            ));
        }
        for c in &self.components {
            let lo = c.center_hz - c.bandwidth_hz / 2.0;
            let hi = c.center_hz + c.bandwidth_hz / 2.0;
            if !(c.bandwidth_hz >= 0.0 && lo > 0.0 && hi < nyquist) {
                return Err(SignalIoError::InvalidProfile(format!(
                    "component at {} Hz (bandwidth {} Hz) outside (0, {nyquist}) Hz",
                    c.center_hz, c.bandwidth_hz
                )));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(SignalIoError::InvalidProfile(format!(
                    "negative or non-finite weight {}",
                    c.weight
                )));
            }
        }
        if self.components.iter().all(|c| c.weight == 0.0) {
            return Err(SignalIoError::InvalidProfile(
                "all power weights are zero".into(),
            ));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(SignalIoError::InvalidProfile(format!(
                "noise floor must be nonnegative, got {}",
                self.noise_floor
            )));
        }
        Ok(())
    }
}

fn parse_header(path: &Path, line: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (i, cell) in line.split(',').enumerate() {
        let name =
            cell.trim()
                .strip_prefix("ch:")
                .ok_or_else(|| SignalIoError::MalformedHeader {
                    path: path.to_path_buf(),
                    reason: format!("column {i} lacks the `ch:` prefix"),
                })?;
        if name.is_empty() {
            return Err(SignalIoError::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("column {i} has an empty channel name"),
            });
        }
        names.push(name.to_string());
    }
    Ok(names)
}

fn parse_fs_comment(path: &Path, line: &str) -> Result<Option<f64>> {
    let body = line.trim_start_matches('#').trim();
    match body.strip_prefix("fs=") {
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| SignalIoError::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("unparsable sampling rate `{v}`"),
            }),
        None => Ok(None),
    }
}

/// Reads a recording CSV. `default_fs` is used when the file has no `# fs=` line.
pub fn read_recording_csv(path: &Path, default_fs: Option<f64>) -> Result<(Recording, bool)> {
    if !path.is_file() {
        return Err(SignalIoError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let mut file_fs = None;
    while let Some((_, line)) = lines.peek() {
        if line.starts_with('#') {
            if let Some(v) = parse_fs_comment(path, line)? {
                file_fs = Some(v);
            }
            lines.next();
        } else {
            break;
        }
    }
    let (_, header) = lines.next().ok_or_else(|| SignalIoError::MalformedHeader {
        path: path.to_path_buf(),
        reason: "missing header row".into(),
    })?;
    let channels = parse_header(path, header)?;

    let body: Vec<&str> = lines.map(|(_, l)| l).collect();
    let body = body.join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());

    let mut data = vec![Vec::new(); channels.len()];
    let mut row = 0usize;
    for rec in reader.records() {
        let rec = rec.map_err(|e| SignalIoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != channels.len() {
            return Err(SignalIoError::RaggedRows {
                row,
                found: rec.len(),
                expected: channels.len(),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| SignalIoError::NonNumericSample { row, col })?;
            if !v.is_finite() {
                return Err(SignalIoError::NonNumericSample { row, col });
            }
            data[col].push(v);
        }
        row += 1;
    }
    let had_fs = file_fs.is_some();
    let fs = file_fs
        .or(default_fs)
        .ok_or_else(|| SignalIoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: "no `# fs=` line and no dataset metadata".into(),
        })?;
    Ok((Recording::new(channels, fs, data)?, had_fs))
}

/// Loads a standalone recording CSV; the file must carry its `# fs=` line.
pub fn load_recording_csv(path: impl AsRef<Path>) -> Result<Recording> {
    read_recording_csv(path.as_ref(), None).map(|(r, _)| r)
}

pub fn save_recording_csv(recording: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if recording.channels.is_empty() || recording.data.is_empty() || recording.data[0].is_empty() {
        return Err(SignalIoError::InvalidRecording("nothing to write".into()));
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# fs={}", recording.fs)?;
    let header: Vec<String> = recording
        .channels
        .iter()
        .map(|c| format!("ch:{c}"))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..recording.n_samples() {
        line.clear();
        for (ch, row) in recording.data.iter().enumerate() {
            if ch > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", row[i]));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_subject_dir(name: &str) -> Option<u32> {
    name.strip_prefix("subject_")?.parse().ok()
}

fn read_meta(root: &Path) -> Result<BTreeMap<String, String>> {
    let path = root.join(META_FILE);
    if !path.is_file() {
        return Err(SignalIoError::MissingFile(path));
    }
    let mut map = BTreeMap::new();
    for line in fs::read_to_string(&path)?.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SignalIoError::Metadata {
                path: path.clone(),
                reason: format!("expected key=value, got `{line}`"),
            })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Loads `<root>/meta.txt` plus every `<root>/subject_<k>/*.csv`, sorted by
/// subject then file name.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<LabeledDataset> {
    let root = root.as_ref();
    let meta = read_meta(root)?;
    let meta_path = root.join(META_FILE);
    let fs: f64 = meta
        .get("fs")
        .ok_or_else(|| SignalIoError::Metadata {
            path: meta_path.clone(),
            reason: "missing `fs`".into(),
        })?
        .parse()
        .map_err(|_| SignalIoError::Metadata {
            path: meta_path.clone(),
            reason: "unparsable `fs`".into(),
        })?;
    let channels: Vec<String> = meta
        .get("channels")
        .ok_or_else(|| SignalIoError::Metadata {
            path: meta_path.clone(),
            reason: "missing `channels`".into(),
        })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let generator_seed = meta.get("seed").and_then(|s| s.parse().ok());

    let mut subjects: Vec<(u32, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        if let Some(id) = entry.file_name().to_str().and_then(parse_subject_dir) {
            subjects.push((id, entry.path()));
        }
    }
    subjects.sort();

    let mut entries = Vec::new();
    for (id, dir) in subjects {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for path in files {
            let (recording, had_fs) = read_recording_csv(&path, Some(fs))?;
            if had_fs && recording.fs() != fs {
                return Err(SignalIoError::InconsistentSamplingRate {
                    path,
                    expected: fs,
                    found: recording.fs(),
                });
            }
            if recording.channels() != channels.as_slice() {
                return Err(SignalIoError::InconsistentChannels {
                    path,
                    expected: channels.clone(),
                    found: recording.channels().to_vec(),
                });
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            entries.push(LabeledRecording {
                subject_id: id,
                name,
                recording,
            });
        }
    }
    if entries.is_empty() {
        return Err(SignalIoError::EmptyDataset(root.to_path_buf()));
    }
    Ok(LabeledDataset {
        fs,
        channels,
        entries,
        generator_seed,
    })
}

/// Writes `meta.txt` and one CSV per entry under `subject_<k>/`.
pub fn save_dataset(dataset: &LabeledDataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root)?;
    let mut meta = String::new();
    meta.push_str(&format!("fs={}\n", dataset.fs));
    meta.push_str(&format!("channels={}\n", dataset.channels.join(",")));
    if let Some(seed) = dataset.generator_seed {
        meta.push_str(&format!("generator={GENERATOR_NAME}\n"));
        meta.push_str(&format!("seed={seed}\n"));
    }
    fs::write(root.join(META_FILE), meta)?;
    for e in &dataset.entries {
        let dir = root.join(format!("subject_{}", e.subject_id));
        fs::create_dir_all(&dir)?;
        save_recording_csv(&e.recording, dir.join(format!("{}.csv", e.name)))?;
    }
    Ok(())
}

/// Sum of band-limited oscillations plus white noise, 8 channels.
///
/// Each component is a comb of equally spaced tones spanning its band, with
/// independent uniform phases per channel and tone. Channels carry a gain in
/// `[0.6, 1.4]`, drawn once from the profile seed. Noise is Gaussian with
/// variance `noise_floor`.
pub fn generate_synthetic_subject(
    profile: &SynthProfile,
    duration_s: f64,
    fs: f64,
) -> Result<Recording> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SignalIoError::InvalidArgument(format!(
            "sampling rate {fs}"
        )));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) || (duration_s * fs).round() < 1.0 {
        return Err(SignalIoError::InvalidArgument(format!(
            "duration {duration_s} s at {fs} Hz yields no samples"
        )));
    }
    profile.validate(fs)?;
    let n = (duration_s * fs).round() as usize;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(profile.seed);
    let gains: Vec<f64> = (0..CHANNEL_NAMES.len())
        .map(|_| rng.random_range(0.6..1.4))
        .collect();
    let noise_sd = profile.noise_floor.sqrt();

    let mut data = Vec::with_capacity(CHANNEL_NAMES.len());
    for &gain in &gains {
        let mut tones = Vec::new();
        for c in &profile.components {
            let amp = (2.0 * c.weight / TONES_PER_COMPONENT as f64).sqrt();
            for m in 0..TONES_PER_COMPONENT {
                let offset = if TONES_PER_COMPONENT > 1 {
                    m as f64 / (TONES_PER_COMPONENT - 1) as f64 - 0.5
                } else {
                    0.0
                };
                let f = c.center_hz + offset * c.bandwidth_hz;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                tones.push((amp, std::f64::consts::TAU * f / fs, phase));
            }
        }
        let row: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64;
                let osc: f64 = tones.iter().map(|&(a, w, p)| a * (w * t + p).sin()).sum();
                let noise: f64 = StandardNormal.sample(&mut rng);
                gain * osc + noise_sd * noise
            })
            .collect();
        data.push(row);
    }
    Recording::new(
        CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        fs,
        data,
    )
}

fn subject_seed(master_seed: u64, subject: u64) -> u64 {
    // splitmix64 finalizer over (seed, subject)
    let mut z = master_seed ^ (subject.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-subject profiles for a synthetic cohort.
///
/// Every subject gets theta, alpha and beta components. Alpha centers are
/// assigned to shuffled, evenly spaced slots across 8–12.5 Hz so no two
/// subjects share a center-frequency set.
pub fn synthetic_profiles(
    n_subjects: usize,
    fs: f64,
    master_seed: u64,
) -> Result<Vec<SynthProfile>> {
    if n_subjects < 2 {
        return Err(SignalIoError::InvalidArgument(format!(
            "need at least 2 subjects, got {n_subjects}"
        )));
    }
    if fs <= 60.0 {
        return Err(SignalIoError::InvalidArgument(format!(
            "sampling rate {fs} Hz too low for the EEG bands generated"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(master_seed);
    let mut slots: Vec<usize> = (0..n_subjects).collect();
    rand::seq::SliceRandom::shuffle(slots.as_mut_slice(), &mut rng);
    let alpha_span = 4.5 / n_subjects as f64;

    let profiles = (0..n_subjects)
        .map(|k| {
            let alpha = 8.0 + alpha_span * (slots[k] as f64 + rng.random_range(0.25..0.75));
            let theta = rng.random_range(4.5..7.0);
            let beta = rng.random_range(15.0..28.0);
            SynthProfile {
                components: vec![
                    SpectralComponent {
                        center_hz: theta,
                        bandwidth_hz: rng.random_range(1.0..2.0),
                        weight: rng.random_range(10.0..50.0),
                    },
                    SpectralComponent {
                        center_hz: alpha,
                        bandwidth_hz: rng.random_range(1.0..2.0),
                        weight: rng.random_range(20.0..100.0),
                    },
                    SpectralComponent {
                        center_hz: beta,
                        bandwidth_hz: rng.random_range(2.0..6.0),
                        weight: rng.random_range(5.0..25.0),
                    },
                ],
                noise_floor: rng.random_range(4.0..16.0),
                seed: subject_seed(master_seed, k as u64),
            }
        })
        .collect();
    Ok(profiles)
}

/// `n_subjects` synthetic recordings labelled `0..n_subjects`, one per subject.
pub fn generate_synthetic_dataset(
    n_subjects: usize,
    duration_s: f64,
    fs: f64,
    master_seed: u64,
) -> Result<LabeledDataset> {
    let profiles = synthetic_profiles(n_subjects, fs, master_seed)?;
    let entries = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            Ok(LabeledRecording {
                subject_id: k as u32,
                name: "session_0".to_string(),
                recording: generate_synthetic_subject(p, duration_s, fs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        fs,
        channels: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        entries,
        generator_seed: Some(master_seed),
    })
}
