use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{execute_run, run_experiment, RunConfig, RunInputs, RunOutcome, RunnerError, ShotMode};
use crate::metrics::{compare_runs, render_table, ComparisonRow, MetricsReport, RunLabel};
use crate::provider::ChatProvider;
use crate::templates::{TemplateId, TemplateRegistry};

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub template_user: TemplateId,
    pub template_system: Option<TemplateId>,
    pub shot_mode: ShotMode,
}

/// Cartesian product, user templates outermost.
pub fn sweep_grid(
    users: &[TemplateId],
    systems: &[Option<TemplateId>],
    shot_modes: &[ShotMode],
) -> Vec<SweepCell> {
    let mut cells = Vec::with_capacity(users.len() * systems.len() * shot_modes.len());
    for &template_user in users {
        for &template_system in systems {
            for &shot_mode in shot_modes {
                cells.push(SweepCell {
                    template_user,
                    template_system,
                    shot_mode,
                });
            }
        }
    }
    cells
}

impl SweepCell {
    /// The base config specialised to this cell, with a derived run id.
    pub fn config(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        cfg.template_user = self.template_user;
        cfg.template_system = self.template_system;
        cfg.shot_mode = self.shot_mode;
        let system = self.template_system.map(|s| format!("+{s}")).unwrap_or_default();
        cfg.run_id = format!(
            "{}-{}{}-{}",
            base.run_id,
            self.template_user,
            system,
            self.shot_mode.as_str()
        );
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub run_id: String,
    pub template: String,
    pub mode: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Successful runs, best first.
    pub rows: Vec<ComparisonRow>,
    pub failures: Vec<SweepFailure>,
    pub reports: Vec<(RunLabel, MetricsReport)>,
}

impl SweepOutcome {
    /// The comparison table followed by one line per failed run.
    pub fn table(&self) -> String {
        let mut out = render_table(&self.rows);
        for f in &self.failures {
            out.push_str(&format!(
                "FAILED {} ({} {}): {}\n",
                f.run_id, f.template, f.mode, f.error
            ));
        }
        out
    }
}

pub type ProviderFactory<'a> = dyn Fn(&RunConfig) -> Result<Box<dyn ChatProvider>, RunnerError> + 'a;

/// Runs every cell in turn. A failing run is recorded and the sweep moves
/// on. With `results_root`, each run is persisted like a single run.
pub fn sweep(
    base: &RunConfig,
    cells: &[SweepCell],
    inputs: &RunInputs,
    registry: &TemplateRegistry,
    factory: &ProviderFactory<'_>,
    results_root: Option<&Path>,
) -> SweepOutcome {
    let mut reports = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for cell in cells {
        let cfg = cell.config(base);
        let label = RunLabel {
            run_id: cfg.run_id.clone(),
            model: cfg.provider.clone(),
            template: cfg.template_label(),
            mode: cfg.mode_label(),
        };
        let result = factory(&cfg).and_then(|provider| match results_root {
            Some(root) => execute_run(&cfg, inputs, registry, provider.as_ref(), root).map(|(o, _)| o),
            None => {
                let shots = inputs.shot_set(&cfg)?;
                run_experiment(&cfg, &inputs.dataset, &shots, registry, provider.as_ref())
            }
        });
        match result {
            Ok(outcome) => reports.push((label, outcome.metrics)),
            Err(e) => {
                tracing::error!(run_id = %cfg.run_id, error = %e, "sweep run failed");
                failures.push(SweepFailure {
                    run_id: label.run_id,
                    template: label.template,
                    mode: label.mode,
                    error: e.to_string(),
                });
            }
        }
    }
    SweepOutcome {
        rows: compare_runs(&reports),
        failures,
        reports,
    }
}

/// Long-text evaluation: whole texts in one prompt (no chunking), with shots
/// taken from the source named in `cfg.shots_source`. Prompts that exceed the
/// provider's declared context fail with `ContextOverflow`.
pub fn long_text_pipeline(
    cfg: &RunConfig,
    inputs: &RunInputs,
    registry: &TemplateRegistry,
    provider: &dyn ChatProvider,
    results_root: Option<&Path>,
) -> Result<RunOutcome, RunnerError> {
    tracing::info!(shots_source = ?cfg.shots_source, pairs = inputs.dataset.len(), "long-text run");
    match results_root {
        Some(root) => execute_run(cfg, inputs, registry, provider, root).map(|(o, _)| o),
        None => {
            let shots = inputs.shot_set(cfg)?;
            run_experiment(cfg, &inputs.dataset, &shots, registry, provider)
        }
    }
}
