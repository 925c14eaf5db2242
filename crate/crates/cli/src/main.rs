use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mtpose_core::adapter::{AdapterConfig, DegraderConfig, FailureModel, DEFAULT_TIMEOUT_MS};
use mtpose_core::dataset::{load_manifest, DEFAULT_CROP_SCALE};
use mtpose_core::metrics::Thresholds;
use mtpose_core::pipeline::{self, read_predictions, RunConfig, RunRecord};
use mtpose_core::report::{
    emit_reports, read_metrics_csv, write_metrics_csv, write_series, write_verdicts_json,
    METRICS_FILE, SERIES_DIR, VERDICTS_FILE,
};
use mtpose_core::testgen::{materialize_suite, MaterializedSuite, MrId, Preprocess, SuiteConfig, TcId};
use mtpose_core::transforms::OcclusionArtifact;
use mtpose_core::verify::{any_violated, verify_all, MrVerdict, VerifyConfig};

const EXIT_VIOLATED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mtpose", version, about = "Metamorphic robustness testing for hand pose estimation models")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Segmentation is a true positive when IoU is strictly above this.
    #[arg(long, global = true, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Localisation is a true positive when mean keypoint distance is strictly below this.
    #[arg(long, global = true, default_value_t = 10.0)]
    ed_threshold: f64,
    /// Largest tolerated relative F1 drop for MR2-MR4.
    #[arg(long, global = true, default_value_t = 0.05)]
    epsilon: f64,
    /// Minimum |Spearman rho| (negative sign required) for MR1.
    #[arg(long, global = true, default_value_t = 0.8)]
    rho: f64,
    /// Occlusion disc radius in pixels.
    #[arg(long, global = true, default_value_t = 10.0)]
    radius: f64,
    /// Motion blur kernel size.
    #[arg(long, global = true, default_value_t = 20)]
    kernel_size: usize,
    /// Side of the normalised square input images.
    #[arg(long, global = true, default_value_t = 244)]
    image_side: usize,
    /// Input normalisation applied before any transform.
    #[arg(long, global = true, value_enum, default_value_t = PreprocessArg::Resize)]
    preprocess: PreprocessArg,
    /// Also derive follow-ups from with-object samples.
    #[arg(long, global = true)]
    followups_all: bool,
    /// Seed for the degrader adapter.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Parallel workers for generation and adapter instances.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Comma-separated relations to generate, e.g. MR1,MR3.
    #[arg(long, global = true, value_delimiter = ',', default_value = "MR1,MR2,MR3,MR4")]
    mrs: Vec<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PreprocessArg {
    /// Use images as they are.
    None,
    /// Resize to the image side.
    Resize,
    /// Crop a square patch around the hand, then resize.
    Crop,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AdapterKind {
    Oracle,
    Degrader,
    External,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a test suite directory from a manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, predict, score, verify and write every report.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, env = "MTPOSE_OUT", default_value = "mtpose-out")]
        out: PathBuf,
        #[command(flatten)]
        adapter: AdapterOpts,
    },
    /// Score recorded predictions against a suite.
    Score {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Model name written into the metric rows.
        #[arg(long, default_value = "model")]
        model: String,
        #[arg(long, env = "MTPOSE_OUT", default_value = "mtpose-out")]
        out: PathBuf,
    },
    /// Decide every relation from a metrics file.
    Verify {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, env = "MTPOSE_OUT", default_value = "mtpose-out")]
        out: PathBuf,
    },
    /// Rewrite all report files from a stored run record.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, env = "MTPOSE_OUT", default_value = "mtpose-out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct AdapterOpts {
    #[arg(long, value_enum, default_value_t = AdapterKind::Oracle)]
    adapter: AdapterKind,
    /// JSON adapter configuration; overrides the other adapter flags.
    #[arg(long)]
    adapter_config: Option<PathBuf>,
    /// External model command and arguments.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    adapter_cmd: Vec<String>,
    #[arg(long)]
    adapter_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Degrader keypoint noise in pixels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Degrader failure probability per TC1 occlusion level.
    #[arg(long, default_value_t = 0.0)]
    occlusion_coefficient: f64,
    /// Degrader failure probability for a test case, e.g. TC13=1.0.
    #[arg(long = "fail", value_parser = parse_failure)]
    failures: Vec<(TcId, f64)>,
}

fn parse_failure(s: &str) -> Result<(TcId, f64), String> {
    let (tc, p) = s.split_once('=').ok_or("expected TC=PROBABILITY")?;
    let tc: TcId = tc.trim().parse().map_err(|e: mtpose_core::Error| e.to_string())?;
    let p: f64 = p.trim().parse().map_err(|_| format!("bad probability `{p}`"))?;
    Ok((tc, p))
}

impl GlobalOpts {
    fn suite_config(&self) -> Result<SuiteConfig> {
        let mrs = self
            .mrs
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<MrId>())
            .collect::<Result<BTreeSet<_>, _>>()?;
        let config = SuiteConfig {
            mrs,
            occlusion: OcclusionArtifact::new(self.radius, 0)?,
            kernel_size: self.kernel_size,
            preprocess: match self.preprocess {
                PreprocessArg::None => Preprocess::None,
                PreprocessArg::Resize => Preprocess::Resize {
                    side: self.image_side,
                },
                PreprocessArg::Crop => Preprocess::CropResize {
                    scale: DEFAULT_CROP_SCALE,
                    side: self.image_side,
                },
            },
            followups_for_all_categories: self.followups_all,
        };
        config.validate()?;
        Ok(config)
    }

    fn thresholds(&self) -> Thresholds {
        Thresholds {
            iou: self.iou_threshold,
            ed: self.ed_threshold,
        }
    }

    fn verify_config(&self) -> VerifyConfig {
        VerifyConfig::uniform(self.rho, self.epsilon)
    }
}

impl AdapterOpts {
    fn config(&self, seed: u64) -> Result<AdapterConfig> {
        if let Some(path) = &self.adapter_config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing adapter config {}", path.display()));
        }
        Ok(match self.adapter {
            AdapterKind::Oracle => AdapterConfig::Oracle,
            AdapterKind::Degrader => AdapterConfig::Degrader(DegraderConfig {
                failure: FailureModel {
                    occlusion_coefficient: self.occlusion_coefficient,
                    per_tc: self.failures.iter().copied().collect(),
                },
                noise_px: self.noise,
                seed,
                ..DegraderConfig::default()
            }),
            AdapterKind::External => {
                if self.adapter_cmd.is_empty() {
                    bail!("--adapter external requires --adapter-cmd");
                }
                AdapterConfig::External {
                    command: self.adapter_cmd.clone(),
                    working_dir: self.adapter_dir.clone(),
                    timeout_ms: self.timeout_ms,
                }
            }
        })
    }
}

fn print_verdicts(verdicts: &[MrVerdict]) {
    for v in verdicts.iter().filter(|v| v.is_primary()) {
        println!(
            "{} {} {}: {}{} (statistic {:.6}, threshold {})",
            v.model,
            v.mr,
            v.task,
            v.verdict,
            if v.vacuous { " (vacuous)" } else { "" },
            v.statistic,
            v.threshold
        );
    }
}

fn verdict_exit(verdicts: &[MrVerdict]) -> ExitCode {
    if any_violated(verdicts) {
        ExitCode::from(EXIT_VIOLATED)
    } else {
        ExitCode::SUCCESS
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::Generate { manifest, out } => {
            let manifest = load_manifest(&manifest)?;
            let config = g.suite_config()?;
            let pool = rayon_pool(g.workers)?;
            let suite = pool.install(|| materialize_suite(&manifest, &config, &out))?;
            println!("{} cases written to {}", suite.cases().len(), suite.root.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            manifest,
            out,
            adapter,
        } => {
            let manifest = load_manifest(&manifest)?;
            let config = RunConfig {
                suite: g.suite_config()?,
                adapter: adapter.config(g.seed)?,
                thresholds: g.thresholds(),
                verify: g.verify_config(),
                workers: g.workers.max(1),
            };
            let record = pipeline::run(&manifest, &config, &out)?;
            println!(
                "run {}: {} cases scored for model {} ({} timeouts)",
                record.run_id,
                record.cases.len(),
                record.model,
                record.timeouts.len()
            );
            print_verdicts(&record.verdicts);
            Ok(verdict_exit(&record.verdicts))
        }
        Command::Score {
            suite,
            predictions,
            model,
            out,
        } => {
            let suite = MaterializedSuite::open(&suite)?;
            let predictions = read_predictions(&predictions)?;
            let (_, metrics) = pipeline::score(&model, suite.cases(), &predictions, &g.thresholds())?;
            create_dir(&out)?;
            write_metrics_csv(&out.join(METRICS_FILE), &metrics)?;
            write_series(&out.join(SERIES_DIR), &metrics)?;
            println!("{} metric rows written to {}", metrics.len(), out.join(METRICS_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { metrics, out } => {
            let records = read_metrics_csv(&metrics)?;
            let verdicts = verify_all(&records, &g.verify_config())?;
            create_dir(&out)?;
            write_verdicts_json(&out.join(VERDICTS_FILE), &verdicts)?;
            print_verdicts(&verdicts);
            Ok(verdict_exit(&verdicts))
        }
        Command::Report { run, out } => {
            let record = RunRecord::load(&run)?;
            emit_reports(&record, &out)?;
            println!("reports for run {} written to {}", record.run_id, out.display());
            Ok(verdict_exit(&record.verdicts))
        }
    }
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
