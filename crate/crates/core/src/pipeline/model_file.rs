//! Single-file text container for a [`TrainedPipeline`].
//!
//! ```text
//! eegid-model 1
//! checksum sha256=<hex digest of every byte after this line>
//! kernel kind=rbf c=1e2 gamma=1e-2 degree=1 coef0=0e0
//! dims features=80 components=27 support_vectors=812 classes=12 pairs=66
//! ...named blocks of whitespace-separated decimal numbers...
//! end
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so a loaded model
//! reproduces every prediction bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{PipelineError, Result, TrainedPipeline};
use crate::dsp::PreprocessConfig;
use crate::reduction::{PcaModel, Standardizer};
use crate::svm::{KernelKind, KernelSpec, MulticlassSvm, PairMachine};

pub const MODEL_MAGIC: &str = "eegid-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn ints<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn digest(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

fn render_body(p: &TrainedPipeline) -> Result<String> {
    if let Some(bad) = p
        .channels
        .iter()
        .find(|c| c.is_empty() || c.contains(',') || c.contains(char::is_whitespace))
    {
        return Err(PipelineError::CorruptModel(format!(
            "channel name {bad:?} cannot be stored"
        )));
    }
    let k = &p.svm.kernel;
    let pre = &p.preprocess;
    let mut s = String::new();
    let w = &mut s;
    // writing to a String cannot fail
    let _ = writeln!(
        w,
        "kernel kind={} c={:e} gamma={:e} degree={} coef0={:e}",
        k.kind.name(),
        k.c,
        k.gamma,
        k.degree,
        k.coef0
    );
    let _ = writeln!(
        w,
        "dims features={} components={} support_vectors={} classes={} pairs={}",
        p.standardizer.dim(),
        p.pca.n_components(),
        p.svm.support_vectors.len(),
        p.svm.classes.len(),
        p.svm.pairs.len()
    );
    let _ = writeln!(w, "feature_version {}", p.feature_version);
    let _ = writeln!(w, "fs {:e}", p.fs);
    let _ = writeln!(w, "channels {}", p.channels.join(","));
    let _ = writeln!(
        w,
        "preprocess notch_hz={:e} notch_q={:e} bandpass_order={} bandpass_lo_hz={:e} bandpass_hi_hz={:e} asr_k={} asr_window_s={:e}",
        pre.notch_hz,
        pre.notch_q,
        pre.bandpass_order,
        pre.bandpass_lo_hz,
        pre.bandpass_hi_hz,
        pre.asr_k.map_or("off".to_string(), |v| format!("{v:e}")),
        pre.asr_window_s
    );
    let _ = writeln!(w, "standardizer.mean {}", floats(&p.standardizer.mean));
    let _ = writeln!(w, "standardizer.std {}", floats(&p.standardizer.std));
    let _ = writeln!(w, "pca.target_ratio {:e}", p.pca.target_ratio);
    let _ = writeln!(w, "pca.center {}", floats(&p.pca.center));
    let _ = writeln!(
        w,
        "pca.explained_variance {}",
        floats(&p.pca.explained_variance)
    );
    let _ = writeln!(
        w,
        "pca.explained_variance_ratio {}",
        floats(&p.pca.explained_variance_ratio)
    );
    let _ = writeln!(w, "pca.components");
    for r in p.pca.components.row_iter() {
        let _ = writeln!(w, "{}", floats(&r.iter().copied().collect::<Vec<_>>()));
    }
    let _ = writeln!(w, "svm.classes {}", ints(&p.svm.classes));
    let _ = writeln!(w, "svm.support_vectors");
    for sv in &p.svm.support_vectors {
        let _ = writeln!(w, "{}", floats(sv));
    }
    for m in &p.svm.pairs {
        let _ = writeln!(
            w,
            "pair pos={} neg={} bias={:e} size={}",
            m.pos,
            m.neg,
            m.bias,
            m.support.len()
        );
        let _ = writeln!(w, "{}", ints(&m.support));
        let _ = writeln!(w, "{}", floats(&m.dual_coef));
    }
    let _ = writeln!(w, "end");
    Ok(s)
}

/// Full file contents.
pub fn render_model(p: &TrainedPipeline) -> Result<String> {
    let body = render_body(p)?;
    Ok(format!(
        "{MODEL_MAGIC} {MODEL_FORMAT_VERSION}\nchecksum sha256={}\n{body}",
        digest(&body)
    ))
}

pub fn save_model(p: &TrainedPipeline, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_model(p)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedPipeline> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| corrupt("file is not UTF-8 text"))?;
    parse_model(&text)
}

fn corrupt(msg: impl Into<String>) -> PipelineError {
    PipelineError::CorruptModel(msg.into())
}

/// Checks the version tag first, then the checksum, then the structure.
pub fn parse_model(text: &str) -> Result<TrainedPipeline> {
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| corrupt("missing header"))?;
    let version = first
        .strip_prefix(MODEL_MAGIC)
        .map(str::trim)
        .ok_or_else(|| corrupt("missing magic line"))?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(PipelineError::VersionMismatch {
            found: version.to_string(),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let (check, body) = rest
        .split_once('\n')
        .ok_or_else(|| corrupt("missing checksum line"))?;
    let expected = check
        .strip_prefix("checksum sha256=")
        .ok_or_else(|| corrupt("missing checksum line"))?;
    if digest(body) != expected.trim() {
        return Err(corrupt("checksum mismatch"));
    }
    Parser {
        lines: body.lines(),
        line_no: 2,
    }
    .model()
}

struct Parser<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| corrupt(format!("unexpected end of file at line {}", self.line_no)))
    }

    fn err(&self, msg: &str) -> PipelineError {
        corrupt(format!("line {}: {msg}", self.line_no))
    }

    /// Line `<key> <rest>`; returns `rest`.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            None if line == key => Ok(""),
            _ => Err(self.err(&format!("expected `{key}`"))),
        }
    }

    /// Parses `name=value` pairs in the given order.
    fn fields(&self, rest: &'a str, names: &[&str]) -> Result<Vec<&'a str>> {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != names.len() {
            return Err(self.err("wrong field count"));
        }
        parts
            .iter()
            .zip(names)
            .map(|(p, n)| {
                p.strip_prefix(n)
                    .and_then(|v| v.strip_prefix('='))
                    .ok_or_else(|| self.err(&format!("expected field `{n}`")))
            })
            .collect()
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(&format!("bad number {s:?}")))
    }

    fn float_list(&self, s: &str, len: usize) -> Result<Vec<f64>> {
        let v = s
            .split_whitespace()
            .map(|t| self.num(t))
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != len {
            return Err(self.err(&format!("expected {len} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn float_line(&mut self, len: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        self.float_list(line, len)
    }

    fn floats_keyed(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let rest = self.keyed(key)?;
        self.float_list(rest, len)
    }

    fn model(mut self) -> Result<TrainedPipeline> {
        let rest = self.keyed("kernel")?;
        let f = self.fields(rest, &["kind", "c", "gamma", "degree", "coef0"])?;
        let kernel = KernelSpec {
            kind: KernelKind::parse(f[0]).ok_or_else(|| self.err("unknown kernel kind"))?,
            c: self.num(f[1])?,
            gamma: self.num(f[2])?,
            degree: self.num(f[3])?,
            coef0: self.num(f[4])?,
        };
        kernel.validate().map_err(|e| self.err(&e.to_string()))?;

        let rest = self.keyed("dims")?;
        let f = self.fields(
            rest,
            &[
                "features",
                "components",
                "support_vectors",
                "classes",
                "pairs",
            ],
        )?;
        let d: usize = self.num(f[0])?;
        let m: usize = self.num(f[1])?;
        let n_sv: usize = self.num(f[2])?;
        let k: usize = self.num(f[3])?;
        let n_pairs: usize = self.num(f[4])?;
        if n_pairs != k * k.saturating_sub(1) / 2 {
            return Err(self.err("pair count does not match class count"));
        }

        let rest = self.keyed("feature_version")?;
        let feature_version = self.num(rest)?;
        let rest = self.keyed("fs")?;
        let fs = self.num(rest)?;
        let channels: Vec<String> = self
            .keyed("channels")?
            .split(',')
            .map(str::to_string)
            .collect();

        let rest = self.keyed("preprocess")?;
        let f = self.fields(
            rest,
            &[
                "notch_hz",
                "notch_q",
                "bandpass_order",
                "bandpass_lo_hz",
                "bandpass_hi_hz",
                "asr_k",
                "asr_window_s",
            ],
        )?;
        let preprocess = PreprocessConfig {
            notch_hz: self.num(f[0])?,
            notch_q: self.num(f[1])?,
            bandpass_order: self.num(f[2])?,
            bandpass_lo_hz: self.num(f[3])?,
            bandpass_hi_hz: self.num(f[4])?,
            asr_k: if f[5] == "off" {
                None
            } else {
                Some(self.num(f[5])?)
            },
            asr_window_s: self.num(f[6])?,
        };

        let standardizer = Standardizer {
            mean: self.floats_keyed("standardizer.mean", d)?,
            std: self.floats_keyed("standardizer.std", d)?,
        };
        let rest = self.keyed("pca.target_ratio")?;
        let target_ratio = self.num(rest)?;
        let center = self.floats_keyed("pca.center", d)?;
        let explained_variance = self.floats_keyed("pca.explained_variance", m)?;
        let explained_variance_ratio = self.floats_keyed("pca.explained_variance_ratio", m)?;
        self.keyed("pca.components")?;
        let mut comp = Vec::with_capacity(m * d);
        for _ in 0..m {
            comp.extend(self.float_line(d)?);
        }
        let pca = PcaModel {
            components: DMatrix::from_row_slice(m, d, &comp),
            center,
            explained_variance,
            explained_variance_ratio,
            target_ratio,
        };

        let rest = self.keyed("svm.classes")?;
        let classes = rest
            .split_whitespace()
            .map(|t| self.num(t))
            .collect::<Result<Vec<u32>>>()?;
        if classes.len() != k || classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(self.err("class list must hold `classes` strictly increasing labels"));
        }
        self.keyed("svm.support_vectors")?;
        let support_vectors = (0..n_sv)
            .map(|_| self.float_line(m))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let rest = self.keyed("pair")?;
            let f = self.fields(rest, &["pos", "neg", "bias", "size"])?;
            let size: usize = self.num(f[3])?;
            let line = self.next()?;
            let support = line
                .split_whitespace()
                .map(|t| self.num(t))
                .collect::<Result<Vec<usize>>>()?;
            if support.len() != size || support.iter().any(|&s| s >= n_sv) {
                return Err(self.err("bad support index list"));
            }
            pairs.push(PairMachine {
                pos: self.num(f[0])?,
                neg: self.num(f[1])?,
                bias: self.num(f[2])?,
                support,
                dual_coef: self.float_line(size)?,
            });
        }
        self.keyed("end")?;
        if self.lines.any(|l| !l.trim().is_empty()) {
            return Err(corrupt("trailing data after `end`"));
        }
        Ok(TrainedPipeline {
            feature_version,
            fs,
            channels,
            preprocess,
            standardizer,
            pca,
            svm: MulticlassSvm {
                kernel,
                classes,
                support_vectors,
                pairs,
            },
        })
    }
}
