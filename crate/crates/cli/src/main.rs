use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use occlufall::config::ExperimentConfig;
use occlufall::corpus::{load_corpus, load_manifest, write_manifest, Origin, VideoDescriptor};
use occlufall::eval::{benchmark, evaluate, improvement, pca_project_2d};
use occlufall::experiment::{prepare, segment_videos, PreparedData};
use occlufall::haar::{write_segment_meta, FeatureSet};
use occlufall::occlusion::{augment_video, augment_video_constant};
use occlufall::segmentation::{assign_splits, write_splits, Split};
use occlufall::synth::generate_synth_corpus;
use occlufall::trainer::{feature_sweep, lambda_sweep, train_pipeline, TrainedPipeline};
use occlufall::{Error, Execution};

#[derive(Parser)]
#[command(name = "occlufall", version, about = "Occlusion-robust fall detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key = value experiment file; its values override command-line flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory of timestamped run directories
    #[arg(long, global = true)]
    runs_dir: Option<PathBuf>,
    /// Run every stage on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Args, Clone, Default)]
struct SegmentFlags {
    #[arg(long)]
    segment_len: Option<usize>,
    #[arg(long)]
    sampling_rate: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    lambda: Option<f64>,
    /// Boosting rounds K
    #[arg(long)]
    features: Option<usize>,
    /// Fixed SVM C; without it C is picked on the validation set
    #[arg(long)]
    svm_c: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (frames, keypoints, manifest)
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        videos: Option<usize>,
        /// WIDTHxHEIGHT
        #[arg(long)]
        resolution: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        fps: Option<f32>,
        #[arg(long)]
        fall_fraction: Option<f64>,
        #[arg(long)]
        noise: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Add occluded versions of every normal video to a corpus
    Augment {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest; new lines are appended to it
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// dynamic | constant
        #[arg(long, default_value = "dynamic")]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the new videos (default: next to the manifest)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a corpus and cut labeled windows
    Segment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        seg: SegmentFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split, augment, segment and extract Haar features for every slice
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Working grid, WIDTHxHEIGHT
        #[arg(long)]
        resolution: Option<String>,
        #[arg(long)]
        pos_step: Option<usize>,
        /// Comma-separated square filter sides
        #[arg(long)]
        scales: Option<String>,
        /// dynamic | constant | none
        #[arg(long)]
        augment: Option<String>,
        #[arg(long)]
        eval_variants: Option<usize>,
        #[command(flatten)]
        seg: SegmentFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted AdaBoost feature selection followed by the weighted SVM
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory written by `extract`
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy, recall and precision of a trained pipeline
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Pipeline to compare against on the same slice
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value = "test_included")]
        slice: String,
    },
    /// Validation accuracy over a grid of lambda values
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        grid: String,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Test accuracy and training time over a grid of feature counts
    SweepFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "10,100,200,300,400")]
        grid: String,
        #[arg(long, default_value = "test_included")]
        slice: String,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Per-frame extraction + classification time on one core
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Segments to time (at least 100)
        #[arg(long, default_value_t = 200)]
        segments: usize,
    },
    /// 2-D PCA projection of segment features as CSV
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Project only the pipeline's selected features
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test_included")]
        slice: String,
    },
}

/// A timestamped directory holding the config copy and reports of one run.
struct Run {
    dir: PathBuf,
    config: ExperimentConfig,
    exec: Execution,
    report: String,
}

impl Run {
    fn start(name: &str, common: &Common, flags: &[(&str, Option<String>)]) -> Result<Run> {
        let mut config = ExperimentConfig::default();
        if let Some(d) = &common.runs_dir {
            config.runs_dir = d.clone();
        }
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if let Some(path) = &common.config {
            config.apply_file(path)?;
        }
        config.validate()?;
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        let mut dir = config.runs_dir.join(format!("{stamp}-{name}"));
        let mut n = 1;
        while dir.exists() {
            n += 1;
            dir = config.runs_dir.join(format!("{stamp}-{name}-{n}"));
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("config.txt"), config.to_text())?;
        let exec = if common.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok(Run {
            dir,
            config,
            exec,
            report: String::new(),
        })
    }

    fn say(&mut self, line: impl AsRef<str>) {
        println!("{}", line.as_ref());
        self.report.push_str(line.as_ref());
        self.report.push('\n');
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    fn finish(self) -> Result<()> {
        self.write("report.txt", &self.report)?;
        println!("run directory: {}", self.dir.display());
        Ok(())
    }

    fn corpus_manifest(&self) -> Result<PathBuf> {
        match &self.config.corpus {
            Some(p) => Ok(p.clone()),
            None => Err(Error::Config("no corpus manifest (pass --corpus or set corpus = …)".into()).into()),
        }
    }
}

fn some<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|v| v.to_string())
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

fn segment_flags(s: &SegmentFlags) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("segment_len", some(&s.segment_len)),
        ("sampling_rate", some(&s.sampling_rate)),
        ("stride", some(&s.stride)),
        ("split_seed", some(&s.split_seed)),
    ]
}

fn train_flags(t: &TrainFlags) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("lambda", some(&t.lambda)),
        ("features", some(&t.features)),
        ("svm_c", some(&t.svm_c)),
    ]
}

fn parse_grid<T: std::str::FromStr>(text: &str) -> Result<Vec<T>> {
    let v = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::InvalidInput(format!("bad grid value {s:?}"))))
        .collect::<std::result::Result<Vec<T>, Error>>()?;
    if v.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()).into());
    }
    Ok(v)
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(e) if e.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            common,
            out,
            videos,
            resolution,
            frames,
            fps,
            fall_fraction,
            noise,
            seed,
        } => {
            let mut run = Run::start(
                "synth",
                &common,
                &[
                    ("synth_videos", some(&videos)),
                    ("synth_resolution", resolution),
                    ("synth_frames", some(&frames)),
                    ("synth_fps", some(&fps)),
                    ("synth_fall_fraction", some(&fall_fraction)),
                    ("synth_noise", some(&noise)),
                    ("synth_seed", some(&seed)),
                ],
            )?;
            let videos = generate_synth_corpus(&run.config.synth)?;
            let descriptors = videos
                .iter()
                .map(|v| v.write_to(&out))
                .collect::<occlufall::Result<Vec<_>>>()?;
            let manifest = out.join("manifest.tsv");
            write_manifest(&manifest, &descriptors)?;
            let falls = videos.iter().filter(|v| v.annotation.interval().is_some()).count();
            run.say(format!("videos,{}\nfall_videos,{falls}\nmanifest,{}", videos.len(), manifest.display()));
            run.finish()
        }
        Command::Augment {
            common,
            corpus,
            mode,
            seed,
            out,
        } => {
            let mut run = Run::start(
                "augment",
                &common,
                &[("corpus", path(&corpus)), ("augment", Some(mode.clone())), ("augment_seed", some(&seed))],
            )?;
            let manifest = run.corpus_manifest()?;
            let mut descriptors = load_manifest(&manifest)?;
            let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
            let normal: Vec<VideoDescriptor> =
                descriptors.iter().filter(|d| d.origin == Origin::Normal).cloned().collect();
            let seed = run.config.dataset.augment_seed;
            let mode = run.config.dataset.augment;
            let mut added = 0usize;
            let mut skipped = Vec::new();
            for d in &normal {
                let video = d.load()?;
                let vseed = occlufall::experiment::video_seed(seed, video.id());
                let children = match mode {
                    occlufall::experiment::AugmentMode::Dynamic => {
                        let a = augment_video(&video, vseed)?;
                        skipped.extend(a.omitted.iter().map(|(p, why)| format!("{} {p}: {why}", video.id())));
                        a.videos
                    }
                    occlufall::experiment::AugmentMode::Constant => {
                        let n = augment_video(&video, vseed)?.videos.len();
                        augment_video_constant(&video, vseed, n)?
                    }
                    occlufall::experiment::AugmentMode::None => Vec::new(),
                };
                for c in children {
                    descriptors.push(c.write_to(&out)?);
                    added += 1;
                }
            }
            write_manifest(&manifest, &descriptors)?;
            run.say(format!("mode,{mode}\nparents,{}\nadded,{added}", normal.len()));
            for s in skipped {
                run.say(format!("skipped,{s}"));
            }
            run.finish()
        }
        Command::Segment { common, corpus, seg, out } => {
            let mut flags = segment_flags(&seg);
            flags.push(("corpus", path(&corpus)));
            let mut run = Run::start("segment", &common, &flags)?;
            let manifest = run.corpus_manifest()?;
            let videos = load_corpus(&load_manifest(&manifest)?, run.exec)?;
            let splits = assign_splits(
                videos.iter().map(|v| (v.id(), v.parent_id.as_deref())),
                run.config.dataset.split_seed,
            )?;
            let out = out.unwrap_or_else(|| run.dir.clone());
            fs::create_dir_all(&out)?;
            write_splits(&out.join("splits.tsv"), &splits)?;
            run.say("split,videos,segments,fall,nonfall");
            for split in [Split::Train, Split::Val, Split::Test] {
                let vs: Vec<_> = videos.iter().filter(|v| splits[v.id()] == split).cloned().collect();
                let segs = segment_videos(&vs, &run.config.segment(), split);
                write_segment_meta(&out.join(format!("{split}.segments.tsv")), &segs)?;
                let fall = segs.iter().filter(|s| s.label.sign() == Some(1)).count();
                let nonfall = segs.iter().filter(|s| s.label.sign() == Some(-1)).count();
                run.say(format!("{split},{},{},{fall},{nonfall}", vs.len(), segs.len()));
            }
            run.finish()
        }
        Command::Extract {
            common,
            corpus,
            resolution,
            pos_step,
            scales,
            augment,
            eval_variants,
            seg,
            out,
        } => {
            let mut flags = segment_flags(&seg);
            flags.extend([
                ("corpus", path(&corpus)),
                ("resolution", resolution),
                ("pos_step", some(&pos_step)),
                ("scales", scales),
                ("augment", augment),
                ("eval_variants", some(&eval_variants)),
            ]);
            let mut run = Run::start("extract", &common, &flags)?;
            let manifest = run.corpus_manifest()?;
            let videos = load_corpus(&load_manifest(&manifest)?, run.exec)?;
            let data = prepare(&videos, &run.config.dataset, run.exec)?;
            let out = out.unwrap_or_else(|| run.dir.join("data"));
            data.write(&out)?;
            run.say(format!("bank_filters,{}\nbank_checksum,{}", data.bank.len(), data.bank.checksum()));
            run.say("slice,segments,fall,occluded");
            for name in ["train", "val_clean", "val_occluded", "test_clean", "test_occluded"] {
                let s = data.slice(name)?;
                let fall = s.labels().iter().filter(|l| **l > 0).count();
                let occ = s.origins().iter().filter(|o| o.is_occluded()).count();
                run.say(format!("{name},{},{fall},{occ}", s.len()));
            }
            run.say(format!("data,{}", out.display()));
            run.finish()
        }
        Command::Train {
            common,
            data,
            train,
            out,
        } => {
            let mut run = Run::start("train", &common, &train_flags(&train))?;
            let d = PreparedData::read(&data)?;
            let val = d.val_included()?;
            let (pipeline, report) = train_pipeline(
                &d.train,
                Some(&val),
                Some(&d.provenance),
                &d.bank.checksum(),
                &run.config.train,
                run.exec,
            )?;
            let out = out.unwrap_or_else(|| run.dir.join("model"));
            pipeline.write(&out)?;
            let val_acc = evaluate(&pipeline, &val)?.accuracy();
            run.say(format!(
                "lambda,{}\nrounds,{}\ndistinct_features,{}\nsvm_c,{}\nsvm_converged,{}\nval_included_accuracy,{val_acc:.4}\nboost_seconds,{:.3}\nsvm_seconds,{:.3}",
                pipeline.policy.lambda,
                report.rounds,
                report.distinct_features,
                report.c,
                report.svm_converged,
                report.boost_seconds,
                report.svm_seconds
            ));
            if let Some(why) = &report.early_stop {
                run.say(format!("early_stop,{why}"));
            }
            let mut eps = String::from("round,epsilon\n");
            for (i, e) in report.epsilons.iter().enumerate() {
                let _ = writeln!(eps, "{},{e}", i + 1);
            }
            run.write("epsilons.csv", &eps)?;
            let mut obj = String::from("epoch,dual_objective\n");
            for (i, o) in report.svm_objective.iter().enumerate() {
                let _ = writeln!(obj, "{},{o}", i + 1);
            }
            run.write("svm_objective.csv", &obj)?;
            run.say(format!("model,{}", out.display()));
            run.finish()
        }
        Command::Eval {
            common,
            data,
            model,
            baseline,
            slice,
        } => {
            let mut run = Run::start("eval", &common, &[])?;
            let d = PreparedData::read(&data)?;
            let set = d.slice(&slice)?;
            let pipeline = read_pipeline(&model, &d)?;
            let report = evaluate(&pipeline, &set)?;
            run.say(format!("slice: {slice}"));
            run.say(report.to_table().trim_end());
            run.write("metrics.csv", &report.to_csv())?;
            if let Some(b) = baseline {
                let base = evaluate(&read_pipeline(&b, &d)?, &set)?;
                let imp = improvement(base.accuracy(), report.accuracy());
                run.say(format!(
                    "baseline accuracy {}, model accuracy {}, improvement {imp}",
                    pct(base.accuracy()),
                    pct(report.accuracy())
                ));
                run.write(
                    "improvement.csv",
                    &format!(
                        "baseline_accuracy,accuracy,points,relative_percent\n{},{},{},{}\n",
                        base.accuracy(),
                        report.accuracy(),
                        imp.points,
                        imp.relative_percent.map_or("n/a".into(), |r| r.to_string())
                    ),
                )?;
            }
            run.finish()
        }
        Command::SweepLambda {
            common,
            data,
            grid,
            train,
        } => {
            let mut run = Run::start("sweep-lambda", &common, &train_flags(&train))?;
            let grid: Vec<f64> = parse_grid(&grid)?;
            let d = PreparedData::read(&data)?;
            let val = d.val_included()?;
            let rows = lambda_sweep(
                &d.train,
                &val,
                Some(&d.provenance),
                &d.bank.checksum(),
                &grid,
                &run.config.train,
                run.exec,
            )?;
            let mut csv = String::from("lambda,val_accuracy,svm_c,distinct_features,seconds\n");
            run.say(format!("{:>7} {:>13} {:>7} {:>9} {:>9}", "lambda", "val accuracy", "C", "features", "seconds"));
            for r in &rows {
                run.say(format!(
                    "{:>7.2} {:>13} {:>7} {:>9} {:>9.2}",
                    r.lambda,
                    pct(r.accuracy),
                    r.report.c,
                    r.report.distinct_features,
                    r.report.seconds()
                ));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.lambda,
                    r.accuracy,
                    r.report.c,
                    r.report.distinct_features,
                    r.report.seconds()
                );
            }
            run.write("sweep_lambda.csv", &csv)?;
            run.finish()
        }
        Command::SweepFeatures {
            common,
            data,
            grid,
            slice,
            train,
        } => {
            let mut run = Run::start("sweep-features", &common, &train_flags(&train))?;
            let grid: Vec<usize> = parse_grid(&grid)?;
            if grid.contains(&0) {
                return Err(Error::InvalidInput("feature counts must be >= 1".into()).into());
            }
            let d = PreparedData::read(&data)?;
            let val = d.val_included()?;
            let eval = d.slice(&slice)?;
            let rows = feature_sweep(
                &d.train,
                Some(&val),
                &eval,
                Some(&d.provenance),
                &d.bank.checksum(),
                &grid,
                &run.config.train,
                run.exec,
            )?;
            let mut csv = String::from("features,distinct_features,accuracy,seconds\n");
            run.say(format!("slice: {slice}"));
            run.say(format!("{:>8} {:>9} {:>10} {:>9}", "K", "distinct", "accuracy", "seconds"));
            for r in &rows {
                run.say(format!(
                    "{:>8} {:>9} {:>10} {:>9.2}",
                    r.features,
                    r.report.distinct_features,
                    pct(r.accuracy),
                    r.report.seconds()
                ));
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    r.features,
                    r.report.distinct_features,
                    r.accuracy,
                    r.report.seconds()
                );
            }
            run.write("sweep_features.csv", &csv)?;
            run.finish()
        }
        Command::Bench {
            common,
            corpus,
            data,
            model,
            segments,
        } => {
            let mut run = Run::start("bench", &common, &[("corpus", path(&corpus))])?;
            let manifest = run.corpus_manifest()?;
            let d = PreparedData::read(&data)?;
            let pipeline = read_pipeline(&model, &d)?;
            let descriptors: Vec<VideoDescriptor> = load_manifest(&manifest)?
                .into_iter()
                .filter(|v| v.origin == Origin::Normal)
                .collect();
            let videos = load_corpus(&descriptors, run.exec)?;
            let mut segs = segment_videos(&videos, &run.config.segment(), Split::Test);
            segs.truncate(segments);
            let stats = benchmark(&pipeline, &d.bank, &videos, &segs)?;
            run.say(format!(
                "filters,{}\nsegments,{}\nframes_per_segment,{:.1}\nmedian_ms_per_frame,{:.4}\np95_ms_per_frame,{:.4}\nmean_ms_per_frame,{:.4}",
                pipeline.selected.len(),
                stats.segments,
                stats.frames_per_segment,
                stats.median_ms,
                stats.p95_ms,
                stats.mean_ms
            ));
            run.finish()
        }
        Command::Pca {
            common,
            data,
            model,
            slice,
        } => {
            let mut run = Run::start("pca", &common, &[])?;
            let d = PreparedData::read(&data)?;
            let set = d.slice(&slice)?;
            let set = match &model {
                Some(m) => {
                    let p = read_pipeline(m, &d)?;
                    FeatureSet {
                        matrix: set.matrix.select_columns(&p.selected)?,
                        segments: set.segments,
                    }
                }
                None => set,
            };
            let pca = pca_project_2d(&set.matrix)?;
            let p = run.write("pca.csv", &pca.to_csv(&set.segments)?)?;
            run.say(format!(
                "samples,{}\ndims,{}\nexplained_pc1,{:.4}\nexplained_pc2,{:.4}\ncsv,{}",
                set.len(),
                set.matrix.cols(),
                pca.explained[0],
                pca.explained[1],
                p.display()
            ));
            run.finish()
        }
    }
}

fn read_pipeline(dir: &Path, data: &PreparedData) -> Result<TrainedPipeline> {
    let p = TrainedPipeline::read(dir)?;
    if p.bank_checksum != data.bank.checksum() {
        bail!(Error::ChecksumMismatch {
            expected: p.bank_checksum,
            found: data.bank.checksum(),
        });
    }
    Ok(p)
}
