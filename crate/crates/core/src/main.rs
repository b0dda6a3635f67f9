//! `eegid` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eegid::dsp::{preprocess, PreprocessConfig, DEFAULT_K};
use eegid::features::{read_features_csv, write_features_csv, FeatureVector};
use eegid::pipeline::{
    dataset_features, evaluate, fit_pipeline, fit_reduction, identify, load_model, save_model,
    split_dataset, EvalReport, FitConfig, PipelineError, SplitMode, SplitSpec, DEFAULT_PCA_TARGET,
    DEFAULT_TRAIN_FRACTION,
};
use eegid::signal_io::{
    generate_synthetic_dataset, load_dataset, load_recording_csv, save_dataset, LabeledDataset,
    DEFAULT_FS,
};
use eegid::svm::{grid_search, write_grid_csv, KernelKind, KernelSpec, ParamGrid, SolverOptions};

#[derive(Parser)]
#[command(name = "eegid", version, about = "EEG person identification")]
struct Cli {
    /// Seed for synthetic data and random splits.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-subject dataset.
    Synth {
        #[arg(long, default_value_t = 12)]
        subjects: usize,
        /// Seconds per subject.
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        #[arg(long, default_value_t = DEFAULT_FS)]
        fs: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter (and clean) every recording of a dataset.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pre: PreArgs,
    },
    /// Write one feature row per window.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pre: PreArgs,
    },
    /// Fit the full pipeline on the training split and report held-out accuracy.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = DEFAULT_PCA_TARGET)]
        pca: f64,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        pre: PreArgs,
    },
    /// Score a saved model on a dataset's test split (or all windows).
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        /// Score every window instead of the test split.
        #[arg(long)]
        all: bool,
    },
    /// Train and score a kernel parameter grid on a features table.
    Grid {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "linear,poly,rbf")]
        kernels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Override the C ladder for every kernel.
        #[arg(long, value_delimiter = ',')]
        c: Option<Vec<f64>>,
        /// Override the gamma ladder.
        #[arg(long, value_delimiter = ',')]
        gamma: Option<Vec<f64>>,
        /// Override the polynomial degrees.
        #[arg(long, value_delimiter = ',')]
        degree: Option<Vec<u32>>,
        #[arg(long, default_value_t = 0.0)]
        coef0: f64,
        #[arg(long, default_value_t = DEFAULT_PCA_TARGET)]
        pca: f64,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Identify the subject of a single recording.
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct PreArgs {
    /// Skip artifact subspace reconstruction.
    #[arg(long)]
    no_asr: bool,
    /// ASR cutoff in standard deviations.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: f64,
}

impl PreArgs {
    fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            asr_k: (!self.no_asr).then_some(self.k),
            ..PreprocessConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Poly,
    Rbf,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KindArg,
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 3)]
    degree: u32,
    #[arg(long, default_value_t = 0.0)]
    coef0: f64,
}

impl KernelArgs {
    fn spec(&self) -> KernelSpec {
        match self.kernel {
            KindArg::Linear => KernelSpec::linear(self.c),
            KindArg::Poly => KernelSpec::polynomial(self.c, self.gamma, self.degree, self.coef0),
            KindArg::Rbf => KernelSpec::rbf(self.c, self.gamma),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Chronological,
    Random,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, value_enum, default_value = "chronological")]
    split: SplitArg,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
}

impl SplitArgs {
    fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            mode: match self.split {
                SplitArg::Chronological => SplitMode::Chronological,
                SplitArg::Random => SplitMode::Random { seed },
            },
        }
    }
}

fn print_report(r: &EvalReport) {
    println!("kernel: {}", r.kernel);
    println!("split: {}", r.split);
    println!("accuracy: {:.4}", r.accuracy);
    println!("class  precision  recall  confusion");
    for (i, c) in r.classes.iter().enumerate() {
        let row: Vec<String> = r.confusion[i].iter().map(|v| format!("{v:4}")).collect();
        println!(
            "{c:5}  {:9.4}  {:6.4}  {}",
            r.precision[i],
            r.recall[i],
            row.join("")
        );
    }
}

fn preprocess_dataset(
    ds: &LabeledDataset,
    cfg: &PreprocessConfig,
) -> Result<LabeledDataset, PipelineError> {
    let mut out = ds.clone();
    for e in &mut out.entries {
        e.recording = preprocess(&e.recording, cfg)?;
    }
    Ok(out)
}

fn rows(fv: &[FeatureVector]) -> (Vec<Vec<f64>>, Vec<u32>) {
    (
        fv.iter().map(|f| f.values.clone()).collect(),
        fv.iter().map(|f| f.subject_id).collect(),
    )
}

fn grid_cells(
    kinds: &[KernelKind],
    c: Option<&[f64]>,
    gamma: Option<&[f64]>,
    degree: Option<&[u32]>,
    coef0: f64,
) -> ParamGrid {
    let ladder = ParamGrid::default_ladder();
    let mut cells = Vec::new();
    for &kind in kinds {
        let base = ladder.only(&[kind]);
        let pick_f = |get: fn(&KernelSpec) -> f64| {
            let mut v: Vec<f64> = Vec::new();
            for k in &base.cells {
                if !v.contains(&get(k)) {
                    v.push(get(k));
                }
            }
            v
        };
        let cs = c.map_or_else(|| pick_f(|k| k.c), <[f64]>::to_vec);
        let gs = gamma.map_or_else(|| pick_f(|k| k.gamma), <[f64]>::to_vec);
        let ds = degree.map_or_else(|| vec![2, 3, 4], <[u32]>::to_vec);
        cells.extend(ParamGrid::product(&[kind], &cs, &gs, &ds, coef0).cells);
    }
    ParamGrid::new(cells)
}

fn run(cli: Cli) -> Result<(), String> {
    let e = |err: PipelineError| err.to_string();
    match cli.command {
        Command::Synth {
            subjects,
            duration,
            fs,
            out,
        } => {
            let ds = generate_synthetic_dataset(subjects, duration, fs, cli.seed)
                .map_err(|x| e(x.into()))?;
            save_dataset(&ds, &out).map_err(|x| e(x.into()))?;
            println!(
                "wrote {subjects} subjects x {duration} s at {fs} Hz to {}",
                out.display()
            );
        }
        Command::Preprocess { input, out, pre } => {
            let ds = load_dataset(&input).map_err(|x| e(x.into()))?;
            let clean = preprocess_dataset(&ds, &pre.config()).map_err(e)?;
            save_dataset(&clean, &out).map_err(|x| e(x.into()))?;
            println!(
                "preprocessed {} recordings into {}",
                clean.entries.len(),
                out.display()
            );
        }
        Command::Extract { input, out, pre } => {
            let ds = load_dataset(&input).map_err(|x| e(x.into()))?;
            let fv = dataset_features(&ds, &pre.config()).map_err(e)?;
            write_features_csv(&out, &fv).map_err(|x| e(x.into()))?;
            println!("wrote {} windows to {}", fv.len(), out.display());
        }
        Command::Train {
            input,
            model,
            kernel,
            pca,
            split,
            pre,
        } => {
            let ds = load_dataset(&input).map_err(|x| e(x.into()))?;
            let cfg = FitConfig {
                kernel: kernel.spec(),
                pca_target: pca,
                preprocess: pre.config(),
                ..FitConfig::new(ds.fs, ds.channels.clone())
            };
            let fv = dataset_features(&ds, &cfg.preprocess).map_err(e)?;
            let spec = split.spec(cli.seed);
            let (train, test) = split_dataset(&fv, &spec).map_err(e)?;
            let p = fit_pipeline(&train, &cfg).map_err(e)?;
            save_model(&p, &model).map_err(e)?;
            println!(
                "trained on {} windows, {} principal components, {} support vectors",
                train.len(),
                p.pca.n_components(),
                p.svm.support_vectors.len()
            );
            if !test.is_empty() {
                print_report(&evaluate(&p, &test, &spec.describe()).map_err(e)?);
            }
            println!("model written to {}", model.display());
        }
        Command::Evaluate {
            model,
            input,
            split,
            all,
        } => {
            let p = load_model(&model).map_err(e)?;
            let ds = load_dataset(&input).map_err(|x| e(x.into()))?;
            let fv = dataset_features(&ds, &p.preprocess).map_err(e)?;
            let spec = split.spec(cli.seed);
            let (test, what) = if all {
                (fv, "all windows".to_string())
            } else {
                (split_dataset(&fv, &spec).map_err(e)?.1, spec.describe())
            };
            print_report(&evaluate(&p, &test, &what).map_err(e)?);
        }
        Command::Grid {
            features,
            kernels,
            out,
            c,
            gamma,
            degree,
            coef0,
            pca,
            split,
        } => {
            let kinds = kernels
                .iter()
                .map(|k| KernelKind::parse(k).ok_or_else(|| format!("[grid] unknown kernel `{k}`")))
                .collect::<Result<Vec<_>, _>>()?;
            let grid = grid_cells(
                &kinds,
                c.as_deref(),
                gamma.as_deref(),
                degree.as_deref(),
                coef0,
            );
            let fv = read_features_csv(&features).map_err(|x| e(x.into()))?;
            let (train, test) = split_dataset(&fv, &split.spec(cli.seed)).map_err(e)?;
            let (s, p, train_x) = fit_reduction(&train, pca).map_err(e)?;
            let test_x = test
                .iter()
                .map(|f| s.transform(&f.values).and_then(|z| p.project(&z)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|x| e(x.into()))?;
            let (_, train_y) = rows(&train);
            let (_, test_y) = rows(&test);
            let report = grid_search(
                &train_x,
                &train_y,
                &test_x,
                &test_y,
                &grid,
                SolverOptions::default(),
            )
            .map_err(|x| e(x.into()))?;
            write_grid_csv(&out, &report).map_err(|x| e(x.into()))?;
            for kind in &kinds {
                match report.best_of(*kind) {
                    Some(r) => println!(
                        "best {}: {} accuracy {:.4}",
                        kind.name(),
                        r.kernel,
                        r.accuracy.as_ref().unwrap()
                    ),
                    None => println!("best {}: no cell trained", kind.name()),
                }
            }
            println!(
                "{} components; results written to {}",
                p.n_components(),
                out.display()
            );
        }
        Command::Identify { model, input } => {
            let p = load_model(&model).map_err(e)?;
            let r = load_recording_csv(&input).map_err(|x| e(x.into()))?;
            let id = identify(&p, &r).map_err(e)?;
            println!("subject: {}", id.label);
            println!(
                "majority fraction: {:.4} over {} windows",
                id.majority_fraction,
                id.window_predictions.len()
            );
            for (label, share) in &id.shares {
                println!("  {label}: {share:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
