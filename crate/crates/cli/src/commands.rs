use std::collections::HashSet;
use std::path::{Path, PathBuf};

use claimmatch::baseline::{calibrate_threshold, run_baseline, Threshold};
use claimmatch::corpus::{build_dataset, corpus_stats, load_raw_claims, DatasetOptions, GoldLink, Split};
use claimmatch::jsonl;
use claimmatch::metrics::{aggregate, compare_runs, compute_metrics, render_table, MetricsReport, RunLabel};
use claimmatch::provider::config::DEFAULT_HASH_DIM;
use claimmatch::provider::mock::{EchoGoldProvider, HashEmbedder};
use claimmatch::provider::{
    build_chat_provider, build_embedder, write_transcript, ChatProvider, ConfigFile, Embedder,
    EmbedderConfig, EmbedderKind, GenerationParams, ParamsPreset, ReplayProvider,
};
use claimmatch::runner::{
    execute_run, load_manifest, replay_from_manifest, sweep, sweep_grid, RunConfig, RunInputs, RunManifest,
    ShotMode, TranscriptMode, METRICS_FILE, PREDICTIONS_FILE, TRANSCRIPT_FILE,
};
use claimmatch::templates::{TemplateId, TemplateRegistry};
use claimmatch::{ClaimPair, Prediction};

use crate::failure::Failure;
use crate::{
    AggregateArgs, BaselineArgs, BuildDatasetArgs, CalibrateArgs, Cli, Command, EvaluateArgs, ExperimentOpts,
    GlobalOpts, ReportArgs, RunArgs, SweepArgs,
};

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::BuildDataset(a) => build_dataset_cmd(g, a),
        Command::Calibrate(a) => calibrate_cmd(g, a),
        Command::Run(a) => run_cmd(g, a),
        Command::Sweep(a) => sweep_cmd(g, a),
        Command::Baseline(a) => baseline_cmd(g, a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Report(a) => report_cmd(g, a),
    }
}

fn load_config(g: &GlobalOpts) -> Result<ConfigFile, Failure> {
    match &g.config {
        Some(path) => Ok(ConfigFile::load(path)?),
        None => Ok(ConfigFile::default()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn build_dataset_cmd(g: &GlobalOpts, a: &BuildDatasetArgs) -> Result<(), Failure> {
    let claims = load_raw_claims(&a.pool)?;
    let links: Vec<GoldLink> = jsonl::read(&a.positives)?;
    let mut exclude_ids = HashSet::new();
    for path in &a.exclude {
        let pairs: Vec<ClaimPair> = jsonl::read(path)?;
        for p in pairs {
            exclude_ids.insert(p.source_ids.0);
            exclude_ids.insert(p.source_ids.1);
        }
    }
    let opts = DatasetOptions {
        seed: g.seed,
        split: a.split.parse::<Split>()?,
        pre_sample: a.pre_sample,
        dedup_ratio: a.dedup_ratio,
        n_positives: a.n_positives,
        exclude_ids,
    };
    let pairs = build_dataset(&claims, &links, &opts)?;
    jsonl::write(&a.out, &pairs)?;
    let stats = corpus_stats(&pairs)?;
    tracing::info!(pairs = stats.n_pairs, positives = stats.n_positive, out = %a.out.display(), "dataset written");
    if let Some(path) = &a.stats_out {
        write_json(path, &stats)?;
    }
    Ok(())
}

/// Resolves an embedder by model name: the config's `[embedder]` table if
/// present, the offline hash mock for `hash*`, otherwise OpenAI embeddings.
fn resolve_embedder(g: &GlobalOpts, name: &str) -> Result<Box<dyn Embedder>, Failure> {
    if name == "hash" || name.starts_with("hash-") {
        return Ok(Box::new(HashEmbedder::new(name, DEFAULT_HASH_DIM)));
    }
    let cfg = match load_config(g)?.embedder {
        Some(mut e) => {
            e.model_name = name.to_owned();
            e
        }
        None => EmbedderConfig {
            kind: EmbedderKind::Openai,
            model_name: name.to_owned(),
            endpoint: None,
            api_key_env: None,
            dim: None,
        },
    };
    Ok(build_embedder(&cfg)?)
}

fn calibrate_cmd(g: &GlobalOpts, a: &CalibrateArgs) -> Result<(), Failure> {
    let validation: Vec<ClaimPair> = jsonl::read(&a.validation)?;
    let embedder = resolve_embedder(g, &a.embedder)?;
    let threshold = calibrate_threshold(&validation, embedder.as_ref())?;
    threshold.save(&a.out)?;
    println!("{}", serde_json::to_string(&threshold).expect("serializable"));
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn baseline_cmd(g: &GlobalOpts, a: &BaselineArgs) -> Result<(), Failure> {
    let threshold = Threshold::load(&a.threshold)?;
    let pairs: Vec<ClaimPair> = jsonl::read(&a.dataset)?;
    let name = a.embedder.clone().unwrap_or_else(|| threshold.model_name.clone());
    let embedder = resolve_embedder(g, &name)?;
    let mut preds = run_baseline(&pairs, &threshold, embedder.as_ref())?;
    preds.sort_by(|x, y| x.pair_id.cmp(&y.pair_id));
    let report = compute_metrics(&preds, &pairs)?;
    let run_id = a
        .run_id
        .clone()
        .unwrap_or_else(|| format!("baseline-{}", sanitize(&name)));
    let dir = g.results_dir.join(&run_id);
    jsonl::write(&dir.join(PREDICTIONS_FILE), &preds)?;
    write_json(&dir.join(METRICS_FILE), &report)?;
    write_json(&dir.join("threshold.json"), &threshold)?;
    print_report(&run_id, &name, "baseline", "similarity", &report);
    Ok(())
}

fn print_report(run_id: &str, model: &str, template: &str, mode: &str, report: &MetricsReport) {
    let label = RunLabel {
        run_id: run_id.to_owned(),
        model: model.to_owned(),
        template: template.to_owned(),
        mode: mode.to_owned(),
    };
    print!("{}", render_table(&compare_runs(&[(label, report.clone())])));
}

fn params_for(cfg: &ConfigFile, exp: &ExperimentOpts) -> Result<GenerationParams, Failure> {
    if let Some(p) = &cfg.provider {
        return Ok(p.params());
    }
    let preset: ParamsPreset = serde_json::from_value(serde_json::Value::String(exp.preset.clone()))
        .map_err(|_| {
            Failure::config(format!(
                "unknown preset {:?} (llama, mistral, api-default)",
                exp.preset
            ))
        })?;
    match &exp.model {
        Some(model) => Ok(GenerationParams::preset(preset, model)),
        None if exp.echo_gold => Ok(GenerationParams::preset(preset, "echo-gold")),
        None => Err(Failure::config("no [provider] in --config and no --model given")),
    }
}

fn inputs_for(exp: &ExperimentOpts) -> Result<RunInputs, Failure> {
    let dataset = exp
        .dataset
        .as_deref()
        .ok_or_else(|| Failure::config("--dataset is required"))?;
    Ok(RunInputs::load(
        dataset,
        exp.shots.as_deref(),
        exp.in_domain_shots.as_deref(),
    )?)
}

fn base_config(
    g: &GlobalOpts,
    cfg_file: &ConfigFile,
    exp: &ExperimentOpts,
    run_id: &str,
    template: TemplateId,
) -> Result<RunConfig, Failure> {
    let params = params_for(cfg_file, exp)?;
    let mut cfg = RunConfig::new(run_id, template, params);
    if exp.echo_gold {
        cfg.provider = "echo-gold".into();
    }
    cfg.seed = g.seed;
    cfg.concurrency = g.concurrency;
    cfg.relabel = g.relabel_same_event;
    cfg.lenient = exp.lenient;
    cfg.shots_source = exp.shots_source;
    cfg.question_position = exp.position;
    cfg.record_or_replay = match (&g.record, &g.replay) {
        (_, Some(_)) => TranscriptMode::Replay,
        (Some(_), None) => TranscriptMode::Record,
        (None, None) => TranscriptMode::Live,
    };
    cfg.transcript = g.replay.clone().or_else(|| g.record.clone());
    Ok(cfg)
}

fn context_tokens(cfg_file: &ConfigFile) -> Option<usize> {
    cfg_file.provider.as_ref().and_then(|p| p.context_tokens)
}

fn live_provider(cfg_file: &ConfigFile) -> Result<Box<dyn ChatProvider>, Failure> {
    let p = cfg_file
        .provider
        .as_ref()
        .ok_or_else(|| Failure::config("live runs need a [provider] table in --config"))?;
    Ok(build_chat_provider(p)?)
}

fn copy_transcript(g: &GlobalOpts, run_dir: &Path) -> Result<(), Failure> {
    if let Some(path) = &g.record {
        let entries = claimmatch::provider::read_transcript(&run_dir.join(TRANSCRIPT_FILE))?;
        write_transcript(path, &entries)?;
    }
    Ok(())
}

fn run_cmd(g: &GlobalOpts, a: &RunArgs) -> Result<(), Failure> {
    let registry = TemplateRegistry::builtin();
    if let Some(manifest) = &a.manifest {
        let m: RunManifest = load_manifest(manifest)?;
        let out = g.results_dir.join(format!("{}-replay", m.run_id));
        let outcome = replay_from_manifest(manifest, &registry, Some(&out))?;
        print_report(
            &m.run_id,
            &m.config.provider,
            &m.config.template_label(),
            &m.config.mode_label(),
            &outcome.metrics,
        );
        return Ok(());
    }
    let cfg_file = load_config(g)?;
    let template: TemplateId = a.template.parse()?;
    let run_id = a
        .run_id
        .clone()
        .unwrap_or_else(|| format!("{}-{}", template, a.shot_mode.as_str()));
    let mut cfg = base_config(g, &cfg_file, &a.exp, &run_id, template)?;
    cfg.template_system = a.system_template.as_deref().map(str::parse).transpose()?;
    cfg.shot_mode = a.shot_mode;
    let inputs = inputs_for(&a.exp)?;
    let provider: Box<dyn ChatProvider> = if a.exp.echo_gold {
        let words = registry.get(template)?.label_words.clone();
        Box::new(EchoGoldProvider::new(&inputs.dataset, words))
    } else if let Some(path) = &g.replay {
        Box::new(ReplayProvider::load(path)?.with_context_window(context_tokens(&cfg_file)))
    } else {
        live_provider(&cfg_file)?
    };
    let (outcome, dir) = execute_run(&cfg, &inputs, &registry, provider.as_ref(), &g.results_dir)?;
    copy_transcript(g, &dir)?;
    if !outcome.excluded.is_empty() {
        tracing::warn!(
            excluded = outcome.excluded.len(),
            "pairs skipped after provider failures"
        );
    }
    print_report(
        &cfg.run_id,
        &cfg.provider,
        &cfg.template_label(),
        &cfg.mode_label(),
        &outcome.metrics,
    );
    Ok(())
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T, Failure>) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(parse)
        .collect()
}

fn sweep_cmd(g: &GlobalOpts, a: &SweepArgs) -> Result<(), Failure> {
    let registry = TemplateRegistry::builtin();
    let cfg_file = load_config(g)?;
    let users = if a.templates.eq_ignore_ascii_case("all") {
        TemplateId::ALL.to_vec()
    } else {
        parse_list(&a.templates, |s| Ok(s.parse::<TemplateId>()?))?
    };
    let systems = parse_list(&a.system_templates, |s| {
        if s.eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            Ok(Some(s.parse::<TemplateId>()?))
        }
    })?;
    let modes = parse_list(&a.shot_modes, |s| s.parse::<ShotMode>().map_err(Failure::config))?;
    let cells = sweep_grid(&users, &systems, &modes);
    let base = base_config(g, &cfg_file, &a.exp, &a.run_id, users[0])?;
    let inputs = inputs_for(&a.exp)?;
    if g.replay.is_none() && !a.exp.echo_gold {
        // fail fast on missing credentials rather than once per cell
        live_provider(&cfg_file)?;
    }
    let factory = |cfg: &RunConfig| -> Result<Box<dyn ChatProvider>, claimmatch::runner::RunnerError> {
        if a.exp.echo_gold {
            let words = registry.get(cfg.template_user)?.label_words.clone();
            return Ok(Box::new(EchoGoldProvider::new(&inputs.dataset, words)));
        }
        if let Some(dir) = &g.replay {
            let path = dir.join(&cfg.run_id).join(TRANSCRIPT_FILE);
            return Ok(Box::new(
                ReplayProvider::load(&path)?.with_context_window(context_tokens(&cfg_file)),
            ));
        }
        let p = cfg_file.provider.as_ref().expect("checked above");
        Ok(build_chat_provider(p)?)
    };
    let outcome = sweep(&base, &cells, &inputs, &registry, &factory, Some(&g.results_dir));
    let table = outcome.table();
    print!("{table}");
    std::fs::create_dir_all(&g.results_dir)?;
    std::fs::write(g.results_dir.join(format!("{}-sweep.txt", a.run_id)), &table)?;
    write_json(
        &g.results_dir.join(format!("{}-sweep.json", a.run_id)),
        &serde_json::json!({ "rows": outcome.rows, "failures": outcome.failures }),
    )?;
    if outcome.rows.is_empty() {
        return Err(Failure::provider(format!(
            "all {} sweep runs failed",
            cells.len()
        )));
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<(), Failure> {
    let preds: Vec<Prediction> = jsonl::read(&a.preds)?;
    let gold: Vec<ClaimPair> = jsonl::read(&a.gold)?;
    let report = compute_metrics(&preds, &gold)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    let name = a.preds.display().to_string();
    print_report(&name, "-", "-", "-", &report);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn read_metrics(path: &Path) -> Result<MetricsReport, Failure> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn aggregate_cmd(a: &AggregateArgs) -> Result<(), Failure> {
    let reports = a
        .metrics
        .iter()
        .map(|p| read_metrics(p))
        .collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate(&reports)?;
    println!("{}", serde_json::to_string_pretty(&agg).expect("serializable"));
    Ok(())
}

/// Collects `<results>/*/manifest.json` + `metrics.json` into one table.
fn report_cmd(g: &GlobalOpts, a: &ReportArgs) -> Result<(), Failure> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&g.results_dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(METRICS_FILE).is_file())
        .collect();
    dirs.sort();
    let mut reports = Vec::new();
    for dir in dirs {
        let metrics = read_metrics(&dir.join(METRICS_FILE))?;
        let run_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label = match load_manifest(&dir.join(claimmatch::runner::MANIFEST_FILE)) {
            Ok(m) => RunLabel {
                run_id,
                model: m.config.provider.clone(),
                template: m.config.template_label(),
                mode: m.config.mode_label(),
            },
            Err(_) => RunLabel {
                run_id,
                model: "-".into(),
                template: "-".into(),
                mode: "-".into(),
            },
        };
        reports.push((label, metrics));
    }
    if reports.is_empty() {
        return Err(Failure::data(format!(
            "no runs under {}",
            g.results_dir.display()
        )));
    }
    let table = render_table(&compare_runs(&reports));
    print!("{table}");
    if let Some(out) = &a.out {
        std::fs::write(out, &table)?;
    }
    Ok(())
}
