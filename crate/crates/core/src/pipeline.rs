//! End-to-end runs: generate, predict, score, verify.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapter::{spawn_adapter, AdapterConfig, AdapterError, Prediction};
use crate::dataset::{BoundingBox, DatasetManifest, HandLandmarks};
use crate::error::{Error, Result};
use crate::metrics::{classify, derive, ConfusionCounts, MetricRecord, Outcome, Task, Thresholds};
use crate::report::emit_reports;
use crate::testgen::{materialize_or_reuse, MaterializedSuite, SuiteConfig, TcId, TestCaseDescriptor};
use crate::verify::{verify_all, MrVerdict, VerifyConfig};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const SUITE_DIR: &str = "suite";

/// Raw adapter result for one case, as persisted before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CaseOutcome {
    Detection {
        bbox: BoundingBox,
        keypoints: HandLandmarks,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
    },
    NoDetection,
    /// The adapter did not answer in time. Excluded from confusion counts.
    Timeout,
}

impl CaseOutcome {
    pub fn prediction(&self) -> Option<Prediction> {
        match self {
            CaseOutcome::Detection {
                bbox,
                keypoints,
                confidence,
            } => Some(Prediction::Detection {
                bbox: *bbox,
                keypoints: *keypoints,
                confidence: *confidence,
            }),
            CaseOutcome::NoDetection => Some(Prediction::NoDetection),
            CaseOutcome::Timeout => None,
        }
    }
}

impl From<Prediction> for CaseOutcome {
    fn from(p: Prediction) -> Self {
        match p {
            Prediction::Detection {
                bbox,
                keypoints,
                confidence,
            } => CaseOutcome::Detection {
                bbox,
                keypoints,
                confidence,
            },
            Prediction::NoDetection => CaseOutcome::NoDetection,
        }
    }
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    #[serde(flatten)]
    pub outcome: CaseOutcome,
}

pub fn write_predictions(path: &Path, lines: &[PredictionLine]) -> Result<()> {
    let mut buf = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut buf, l).expect("prediction serializes");
        buf.push(b'\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionLine>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            entry: Some(format!("line {}", i + 1)),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCase {
    pub id: String,
    pub tc_id: TcId,
    pub source_id: String,
    #[serde(flatten)]
    pub outcome: CaseOutcome,
    /// Absent for timeouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localisation: Option<Outcome>,
}

/// Scores every case that has a recorded outcome and builds one metric
/// record per (test case, task) present in the suite, in canonical order.
pub fn score(
    model: &str,
    cases: &[TestCaseDescriptor],
    predictions: &[PredictionLine],
    thresholds: &Thresholds,
) -> Result<(Vec<ScoredCase>, Vec<MetricRecord>)> {
    let by_id: BTreeMap<&str, &CaseOutcome> =
        predictions.iter().map(|p| (p.id.as_str(), &p.outcome)).collect();
    let mut counts: BTreeMap<(TcId, Task), ConfusionCounts> = BTreeMap::new();
    let mut scored = Vec::with_capacity(cases.len());
    for case in cases {
        let outcome = by_id.get(case.id.as_str()).ok_or_else(|| Error::Validation {
            id: case.id.clone(),
            message: "no recorded prediction for this case".into(),
        })?;
        for task in Task::ALL {
            counts.entry((case.tc_id, task)).or_default();
        }
        let (seg, loc) = match outcome.prediction() {
            Some(p) => {
                let (s, l) = classify(&p, &case.keypoints, thresholds);
                counts.get_mut(&(case.tc_id, Task::Segmentation)).unwrap().record(s);
                counts.get_mut(&(case.tc_id, Task::Localisation)).unwrap().record(l);
                (Some(s), Some(l))
            }
            None => (None, None),
        };
        scored.push(ScoredCase {
            id: case.id.clone(),
            tc_id: case.tc_id,
            source_id: case.source_id.clone(),
            outcome: (*outcome).clone(),
            segmentation: seg,
            localisation: loc,
        });
    }
    let metrics = counts
        .into_iter()
        .map(|((tc, task), c)| derive(model, tc, task, c))
        .collect();
    Ok((scored, metrics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub suite: SuiteConfig,
    pub adapter: AdapterConfig,
    pub thresholds: Thresholds,
    pub verify: VerifyConfig,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: SuiteConfig::default(),
            adapter: AdapterConfig::Oracle,
            thresholds: Thresholds::default(),
            verify: VerifyConfig::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRef {
    pub dir: PathBuf,
    pub manifest_digest: String,
    pub cases: usize,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub generate_ms: u128,
    pub predict_ms: u128,
    pub total_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub model: String,
    pub complete: bool,
    pub config: RunConfig,
    pub suite: SuiteRef,
    pub timeouts: Vec<String>,
    pub cases: Vec<ScoredCase>,
    pub metrics: Vec<MetricRecord>,
    pub verdicts: Vec<MrVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timing: Timing,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            entry: None,
            message: e.to_string(),
        })
    }

    /// Recomputes verdicts from the stored metric records.
    pub fn reverify(&self) -> Result<Vec<MrVerdict>> {
        verify_all(&self.metrics, &self.config.verify)
    }
}

/// Deterministic id from the configuration and the manifest contents.
pub fn run_id(config: &RunConfig, manifest_digest: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(manifest_digest.as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

struct PredictOutput {
    model: String,
    outcomes: Vec<Option<CaseOutcome>>,
    error: Option<AdapterError>,
}

/// Fans the cases out over `workers` adapter instances. Each instance
/// serves one request at a time; results are stored by case index.
fn predict_all(suite: &MaterializedSuite, adapter: &AdapterConfig, workers: usize) -> PredictOutput {
    let cases = suite.cases();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let outcomes = Mutex::new(vec![None; cases.len()]);
    let first_error = Mutex::new(None);
    let models = Mutex::new(BTreeMap::new());
    let workers = workers.clamp(1, cases.len().max(1));

    std::thread::scope(|s| {
        for w in 0..workers {
            let (next, abort, outcomes, first_error, models) =
                (&next, &abort, &outcomes, &first_error, &models);
            s.spawn(move || {
                let fail = |e: AdapterError| {
                    abort.store(true, Ordering::SeqCst);
                    first_error.lock().unwrap().get_or_insert(e);
                };
                let mut handle = match spawn_adapter(adapter) {
                    Ok(h) => h,
                    Err(e) => return fail(e),
                };
                models.lock().unwrap().insert(w, handle.model_id().to_string());
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(case) = cases.get(i) else { break };
                    let outcome = match handle.predict(case, &suite.image_path(case)) {
                        Ok(p) => CaseOutcome::from(p),
                        Err(AdapterError::Timeout { .. }) => CaseOutcome::Timeout,
                        Err(e) => return fail(e),
                    };
                    outcomes.lock().unwrap()[i] = Some(outcome);
                }
            });
        }
    });

    PredictOutput {
        model: models
            .into_inner()
            .unwrap()
            .into_values()
            .next()
            .unwrap_or_else(|| "unknown".into()),
        outcomes: outcomes.into_inner().unwrap(),
        error: first_error.into_inner().unwrap(),
    }
}

fn elapsed_ms(since: Instant) -> u128 {
    since.elapsed().as_millis()
}

/// Full pipeline into `out_dir`: the suite lives in `out_dir/suite` and is
/// reused when it matches the manifest and configuration. On adapter
/// failure an incomplete `run.json` is written before the error returns.
pub fn run(manifest: &DatasetManifest, config: &RunConfig, out_dir: &Path) -> Result<RunRecord> {
    config.adapter.validate()?;
    let started = Instant::now();
    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let suite_dir = out_dir.join(SUITE_DIR);
    let (suite, reused) =
        pool.install(|| materialize_or_reuse(manifest, &config.suite, &suite_dir))?;
    let generate_ms = elapsed_ms(started);

    let predict_start = Instant::now();
    let predicted = predict_all(&suite, &config.adapter, config.workers);
    let predict_ms = elapsed_ms(predict_start);

    let lines: Vec<PredictionLine> = suite
        .cases()
        .iter()
        .zip(&predicted.outcomes)
        .filter_map(|(c, o)| {
            o.clone().map(|outcome| PredictionLine {
                id: c.id.clone(),
                outcome,
            })
        })
        .collect();
    write_predictions(&out_dir.join(PREDICTIONS_FILE), &lines)?;

    let total = suite.cases().len();
    let mut record = RunRecord {
        run_id: run_id(config, &manifest.digest),
        model: predicted.model.clone(),
        complete: predicted.error.is_none(),
        config: config.clone(),
        suite: SuiteRef {
            dir: suite.root.clone(),
            manifest_digest: manifest.digest.clone(),
            cases: total,
            reused,
        },
        timeouts: lines
            .iter()
            .filter(|l| l.outcome == CaseOutcome::Timeout)
            .map(|l| l.id.clone())
            .collect(),
        cases: Vec::new(),
        metrics: Vec::new(),
        verdicts: Vec::new(),
        error: None,
        timing: Timing {
            started_unix_ms,
            generate_ms,
            predict_ms,
            total_ms: 0,
        },
    };

    if let Some(err) = predicted.error {
        let done: Vec<TestCaseDescriptor> = suite
            .cases()
            .iter()
            .zip(&predicted.outcomes)
            .filter(|(_, o)| o.is_some())
            .map(|(c, _)| c.clone())
            .collect();
        let (scored, metrics) = score(&record.model, &done, &lines, &config.thresholds)?;
        record.cases = scored;
        record.metrics = metrics;
        record.error = Some(err.to_string());
        record.timing.total_ms = elapsed_ms(started);
        write_run_json(&record, out_dir)?;
        return Err(Error::RunAborted {
            completed: done.len(),
            total,
            cause: Box::new(err.into()),
        });
    }

    let (scored, metrics) = score(&record.model, suite.cases(), &lines, &config.thresholds)?;
    record.cases = scored;
    record.verdicts = verify_all(&metrics, &config.verify)?;
    record.metrics = metrics;
    record.timing.total_ms = elapsed_ms(started);
    emit_reports(&record, out_dir)?;
    Ok(record)
}

pub(crate) fn write_run_json(record: &RunRecord, out_dir: &Path) -> Result<()> {
    let path = out_dir.join(crate::report::RUN_FILE);
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, record).expect("run record serializes");
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))
}
