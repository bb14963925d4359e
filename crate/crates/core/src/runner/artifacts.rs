//! Run inputs, the on-disk results layout, and replay from a manifest.
//!
//! ```text
//! results/<run_id>/
//!   manifest.json      config + input hashes + excluded pairs
//!   predictions.jsonl  one Prediction per line, sorted by pair id
//!   metrics.json
//!   transcript.jsonl   one entry per request, sorted by request id
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    run_experiment, PairFailure, RunConfig, RunOutcome, RunnerError, ShotMode, ShotsSource, TranscriptMode,
};
use crate::corpus::ClaimPair;
use crate::digest::sha256_hex;
use crate::jsonl;
use crate::provider::{write_transcript, ChatProvider, ReplayProvider};
use crate::templates::{FewShotSet, TemplateRegistry};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

/// Content hash of a pair list, independent of its order on disk.
pub fn dataset_sha256(pairs: &[ClaimPair]) -> String {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    sha256_hex(jsonl::to_string(&sorted))
}

/// A shot file as loaded, before seeded ordering.
#[derive(Debug, Clone, Default)]
pub struct ShotFile {
    pub pairs: Vec<ClaimPair>,
    pub path: Option<PathBuf>,
}

impl ShotFile {
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        Ok(Self {
            pairs: jsonl::read(path)?,
            path: Some(path.to_path_buf()),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ShotPool {
    pub domain_independent: Option<ShotFile>,
    pub in_domain: Option<ShotFile>,
}

#[derive(Debug, Clone)]
pub struct RunInputs {
    pub dataset: Vec<ClaimPair>,
    pub dataset_path: Option<PathBuf>,
    pub shots: ShotPool,
}

impl RunInputs {
    pub fn new(dataset: Vec<ClaimPair>) -> Self {
        Self {
            dataset,
            dataset_path: None,
            shots: ShotPool::default(),
        }
    }

    pub fn load(
        dataset: &Path,
        shots: Option<&Path>,
        in_domain_shots: Option<&Path>,
    ) -> Result<Self, RunnerError> {
        Ok(Self {
            dataset: jsonl::read(dataset)?,
            dataset_path: Some(dataset.to_path_buf()),
            shots: ShotPool {
                domain_independent: shots.map(ShotFile::load).transpose()?,
                in_domain: in_domain_shots.map(ShotFile::load).transpose()?,
            },
        })
    }

    /// The shot file a config asks for, if it is a few-shot run.
    pub fn shot_file(&self, cfg: &RunConfig) -> Result<Option<&ShotFile>, RunnerError> {
        if cfg.shot_mode == ShotMode::Zero {
            return Ok(None);
        }
        let (file, name) = match cfg.shots_source {
            ShotsSource::DomainIndependent => (&self.shots.domain_independent, "domain-independent"),
            ShotsSource::InDomain => (&self.shots.in_domain, "in-domain"),
        };
        file.as_ref()
            .map(Some)
            .ok_or_else(|| RunnerError::Config(format!("few-shot run needs {name} shot examples")))
    }

    pub fn shot_set(&self, cfg: &RunConfig) -> Result<FewShotSet, RunnerError> {
        match self.shot_file(cfg)? {
            Some(file) => Ok(FewShotSet::new(file.pairs.clone(), cfg.seed)?),
            None => Ok(FewShotSet::empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: RunConfig,
    pub dataset: InputRef,
    pub shots: Option<InputRef>,
    /// Few-shot pair ids in prompt order.
    pub shot_order: Vec<String>,
    pub template_manifest_sha256: String,
    pub transcript: String,
    pub excluded: Vec<PairFailure>,
    pub tool_version: String,
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunnerError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_error(path))
}

pub fn build_manifest(
    cfg: &RunConfig,
    inputs: &RunInputs,
    shots: &FewShotSet,
    registry: &TemplateRegistry,
    outcome: &RunOutcome,
) -> Result<RunManifest, RunnerError> {
    let shot_ref = inputs.shot_file(cfg)?.map(|f| InputRef {
        path: f.path.as_deref().map(absolute),
        sha256: dataset_sha256(&f.pairs),
        n_pairs: f.pairs.len(),
    });
    Ok(RunManifest {
        run_id: cfg.run_id.clone(),
        config: cfg.clone(),
        dataset: InputRef {
            path: inputs.dataset_path.as_deref().map(absolute),
            sha256: dataset_sha256(&inputs.dataset),
            n_pairs: inputs.dataset.len(),
        },
        shots: shot_ref,
        shot_order: shots.examples().iter().map(|p| p.pair_id.clone()).collect(),
        template_manifest_sha256: registry.manifest_sha256().to_owned(),
        transcript: TRANSCRIPT_FILE.to_owned(),
        excluded: outcome.excluded.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
    })
}

/// Writes the four result files into `dir`, creating it.
pub fn write_run(dir: &Path, manifest: &RunManifest, outcome: &RunOutcome) -> Result<(), RunnerError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    jsonl::write(&dir.join(PREDICTIONS_FILE), &outcome.predictions)?;
    write_json(&dir.join(METRICS_FILE), &outcome.metrics)?;
    write_transcript(&dir.join(TRANSCRIPT_FILE), &outcome.transcript)?;
    Ok(())
}

/// Runs `cfg` and persists it under `results_root/<run_id>/`.
pub fn execute_run(
    cfg: &RunConfig,
    inputs: &RunInputs,
    registry: &TemplateRegistry,
    provider: &dyn ChatProvider,
    results_root: &Path,
) -> Result<(RunOutcome, PathBuf), RunnerError> {
    let shots = inputs.shot_set(cfg)?;
    let outcome = run_experiment(cfg, &inputs.dataset, &shots, registry, provider)?;
    let manifest = build_manifest(cfg, inputs, &shots, registry, &outcome)?;
    let dir = results_root.join(&cfg.run_id);
    write_run(&dir, &manifest, &outcome)?;
    tracing::info!(dir = %dir.display(), "results written");
    Ok((outcome, dir))
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| RunnerError::Manifest(format!("{}: {e}", path.display())))
}

fn load_checked(input: &InputRef, what: &str) -> Result<ShotFile, RunnerError> {
    let path = input
        .path
        .as_deref()
        .ok_or_else(|| RunnerError::Manifest(format!("{what} path not recorded")))?;
    let file = ShotFile::load(path)?;
    let actual = dataset_sha256(&file.pairs);
    if actual != input.sha256 {
        return Err(RunnerError::Manifest(format!(
            "{what} {} changed since the run (sha256 {actual}, recorded {})",
            path.display(),
            input.sha256
        )));
    }
    Ok(file)
}

/// Re-runs a persisted run from its manifest against its own transcript.
/// Inputs are reloaded and checked against the recorded hashes. When
/// `out_dir` is given the replayed results are written there.
pub fn replay_from_manifest(
    manifest_path: &Path,
    registry: &TemplateRegistry,
    out_dir: Option<&Path>,
) -> Result<RunOutcome, RunnerError> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.template_manifest_sha256 != registry.manifest_sha256() {
        return Err(RunnerError::Manifest(
            "template manifest differs from the one the run used".into(),
        ));
    }
    let dataset = load_checked(&manifest.dataset, "dataset")?;
    let mut shots = ShotPool::default();
    if let Some(s) = &manifest.shots {
        let file = Some(load_checked(s, "shot file")?);
        match manifest.config.shots_source {
            ShotsSource::DomainIndependent => shots.domain_independent = file,
            ShotsSource::InDomain => shots.in_domain = file,
        }
    }
    let inputs = RunInputs {
        dataset: dataset.pairs,
        dataset_path: dataset.path,
        shots,
    };
    let run_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let transcript = run_dir.join(&manifest.transcript);
    let mut cfg = manifest.config.clone();
    cfg.record_or_replay = TranscriptMode::Replay;
    cfg.transcript = Some(absolute(&transcript));
    let provider = ReplayProvider::load(&transcript)?;
    let shot_set = inputs.shot_set(&cfg)?;
    let outcome = run_experiment(&cfg, &inputs.dataset, &shot_set, registry, &provider)?;
    if let Some(dir) = out_dir {
        let manifest = build_manifest(&cfg, &inputs, &shot_set, registry, &outcome)?;
        write_run(dir, &manifest, &outcome)?;
    }
    Ok(outcome)
}
