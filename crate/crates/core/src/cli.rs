//! Command-line front end: `track`, `eval`, `synth` and `decimate`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Parser, Subcommand, ValueEnum};

use crate::appearance::{
    CosineRootScorer, EmbeddingScorer, HistogramScorer, OracleScorer, SyntheticPairFeature,
};
use crate::assoc::AppearanceModel;
use crate::config::{LikelihoodMode, ScorerFamily, TrackerConfig};
use crate::engine::run_sequence;
use crate::eval::{clear_mot, decimate_rows, generate_scenario, id_scores, nms, GroundTruth, ScenarioSpec};
use crate::formats::{
    load_patch, parse_mot_rows, read_detections, rows_to_results, to_detections, write_mot_rows, write_results,
    FeatureTable, FormatError, MotRow,
};
use crate::tama::LstmWeights;
use crate::types::{AppearanceDescriptor, ResultRow};

#[derive(Debug, Parser)]
#[command(name = "tamatrack", version, about = "Online multi-target tracker and evaluation tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    Ctama,
    DeepTama,
    BaselineLinear,
    BaselineSelect,
    IouOnly,
}

impl From<ModeArg> for LikelihoodMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ctama => Self::Ctama,
            ModeArg::DeepTama => Self::DeepTama,
            ModeArg::BaselineLinear => Self::BaselineLinear,
            ModeArg::BaselineSelect => Self::BaselineSelect,
            ModeArg::IouOnly => Self::IouOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    /// Colour histograms from PPM patches or 48-value feature rows.
    Histogram,
    /// `exp(-|a - b|^2)` on feature rows.
    Embedding,
    /// Identity tags: feature rows of dimension 1 holding the identity.
    Oracle,
    /// Square-rooted cosine similarity of arbitrary feature rows.
    File,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections and write MOT result rows.
    Track {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        scorer: ScorerArg,
        /// LSTM weight file, required by deep_tama.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Per-detection vectors keyed by frame and detection index.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Directory of `<frame>_<index>.ppm` patches.
        #[arg(long)]
        patches: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Stamp spacing between processed frames.
        #[arg(long, default_value_t = 1)]
        frame_step: u32,
    },
    /// Score results against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        res: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Generate a synthetic scenario from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Writes `<p>.det`, `<p>.gt`, `<p>.tags` and `<p>.emb`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Keep the rows of frames surviving a frame-rate reduction.
    Decimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        fps_orig: u32,
        #[arg(long)]
        fps_new: u32,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Malformed(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Malformed(_) => 2,
            Self::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Malformed(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(_) => Self::Runtime(e.to_string()),
            _ => Self::Malformed(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Track {
            det,
            config,
            mode,
            scorer,
            weights,
            features,
            patches,
            out: out_path,
            frame_step,
        } => {
            let mut cfg = TrackerConfig::parse(&read_text(&config)?)
                .map_err(|e| CliError::Malformed(format!("{}: {e}", config.display())))?;
            cfg.likelihood_mode = mode.into();
            let cfg = cfg.validate().map_err(|e| CliError::Malformed(e.to_string()))?;
            let rows = track(
                &cfg,
                &det,
                scorer,
                weights.as_deref(),
                features.as_deref(),
                patches.as_deref(),
                frame_step,
            )?;
            write_results(&rows, &out_path)?;
            Ok(())
        }
        Command::Eval { gt, res, iou } => {
            let gt_rows = rows_to_results(&parse_mot_rows(&read_text(&gt)?)?);
            let gt = GroundTruth::new(gt_rows).map_err(|e| CliError::Malformed(e.to_string()))?;
            let res = rows_to_results(&parse_mot_rows(&read_text(&res)?)?);
            let m = clear_mot(&gt, &res, iou);
            let ids = id_scores(&gt, &res, iou);
            let report = format!(
                "MOTA={:.4}\nMOTP={:.4}\nIDF1={:.4}\nFP={}\nFN={}\nIDSW={}\nFRAG={}\nMT={}\nML={}\nGT={}\nIDTP={}\nIDFP={}\nIDFN={}\n",
                m.mota,
                m.motp,
                ids.idf1,
                m.false_positives,
                m.false_negatives,
                m.id_switches,
                m.fragmentations,
                m.mostly_tracked,
                m.mostly_lost,
                m.gt_count,
                ids.idtp,
                ids.idfp,
                ids.idfn
            );
            out.write_all(report.as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))
        }
        Command::Synth { spec, seed, out_prefix } => {
            let mut spec = ScenarioSpec::from_toml(&read_text(&spec)?).map_err(|e| CliError::Malformed(e.to_string()))?;
            spec.seed = seed;
            let scenario = generate_scenario(&spec);
            write_file(&with_ext(&out_prefix, "det"), write_mot_rows(&scenario.detection_rows()))?;
            let gt: Vec<MotRow> = scenario.gt.rows().iter().map(MotRow::from_result).collect();
            write_file(&with_ext(&out_prefix, "gt"), write_mot_rows(&gt))?;
            let mut tags = FeatureTable::new();
            let mut emb = FeatureTable::new();
            for (&frame, dets) in &scenario.detections {
                for (k, d) in dets.iter().enumerate() {
                    tags.insert(0, frame, k, vec![d.identity as f64])?;
                    emb.insert(0, frame, k, d.embedding.clone())?;
                }
            }
            write_file(&with_ext(&out_prefix, "tags"), tags.to_text())?;
            write_file(&with_ext(&out_prefix, "emb"), emb.to_text())?;
            Ok(())
        }
        Command::Decimate {
            input,
            fps_orig,
            fps_new,
            out: out_path,
        } => {
            let rows = parse_mot_rows(&read_text(&input)?)?;
            let kept = decimate_rows(&rows, fps_orig, fps_new).map_err(|e| CliError::Usage(e.to_string()))?;
            let text = write_mot_rows(&kept);
            match out_path {
                Some(p) => write_file(&p, text),
                None => out.write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
            }
        }
    }
}

fn require<'a>(path: Option<&'a Path>, what: &str) -> Result<&'a Path, CliError> {
    path.ok_or_else(|| CliError::Usage(format!("{what} is required for this scorer or mode")))
}

/// Runs the tracker on a detection file with descriptors built for `scorer`.
pub fn track(
    cfg: &TrackerConfig,
    det_path: &Path,
    scorer: ScorerArg,
    weights: Option<&Path>,
    features: Option<&Path>,
    patches: Option<&Path>,
    frame_step: u32,
) -> Result<Vec<ResultRow>, CliError> {
    let rows = read_detections(det_path)?;
    let table = match (scorer, patches) {
        (ScorerArg::Histogram, Some(_)) => None,
        _ => Some(FeatureTable::load(require(features, "--features")?)?),
    };
    let missing = |frame: u32, k: usize| FormatError::MissingDescriptor {
        frame,
        index: k,
        reason: "feature file has no such row".into(),
    };
    let instance = AtomicU64::new(0);
    let dets = to_detections(&rows, |frame, k, _| {
        if let (ScorerArg::Histogram, Some(dir)) = (scorer, patches) {
            return Ok(AppearanceDescriptor::Patch(load_patch(dir, frame, k)?.into()));
        }
        let v = table.as_ref().and_then(|t| t.get(frame, k)).ok_or_else(|| missing(frame, k))?;
        match scorer {
            ScorerArg::Oracle => {
                if v.len() != 1 || v[0] < 0.0 || v[0].fract() != 0.0 {
                    return Err(FormatError::MissingDescriptor {
                        frame,
                        index: k,
                        reason: "oracle tags are single non-negative integers".into(),
                    });
                }
                Ok(AppearanceDescriptor::Tag {
                    identity: v[0] as u64,
                    instance: instance.fetch_add(1, Ordering::Relaxed) + 1,
                })
            }
            _ => Ok(AppearanceDescriptor::vector(v.to_vec())),
        }
    })?;
    let dets = dets
        .into_iter()
        .map(|(f, d)| (f, nms(&d, cfg.nms_iou, cfg.conf_min)))
        .collect();

    let mut model = match scorer {
        ScorerArg::Histogram => AppearanceModel::with_scorer(HistogramScorer).with_family(ScorerFamily::Histogram),
        ScorerArg::Embedding => AppearanceModel::with_scorer(EmbeddingScorer).with_family(ScorerFamily::Embedding),
        ScorerArg::File => AppearanceModel::with_scorer(CosineRootScorer),
        ScorerArg::Oracle => AppearanceModel::with_scorer(OracleScorer {
            same: cfg.oracle_same,
            diff: cfg.oracle_diff,
            noise: cfg.oracle_noise,
            seed: 0,
        }),
    };
    if cfg.likelihood_mode == LikelihoodMode::DeepTama {
        let path = require(weights, "--weights")?;
        let w = LstmWeights::load(path).map_err(|e| match e {
            crate::tama::TamaError::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
            other => CliError::Malformed(format!("{}: {other}", path.display())),
        })?;
        model = model.with_deep(SyntheticPairFeature, w);
    }
    run_sequence(&dets, cfg, &model, frame_step).map_err(|e| CliError::Runtime(e.to_string()))
}
