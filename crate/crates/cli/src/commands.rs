//! Command implementations: thin glue from resolved options to the library
//! operations and the documented artifact formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use textsentry::artifact::{check_format_version, FORMAT_VERSION};
use textsentry::attack::{
    greedy_attack, AdaptiveConstraint, AttackConfig, AttackGoal, AttackKind, AttackResult,
    SynonymLexicon,
};
use textsentry::classifier::{
    LinearTextModel, RemoteClassifier, RemoteConfig, TextClassifier, TrainConfig,
};
use textsentry::dataset::LabeledDataset;
use textsentry::detection::{
    calibrate as calibrate_stats, calibrate_with_grid, detect as detect_text, CalibrationReport,
    DetectorConfig,
};
use textsentry::evaluation::{
    run_detection_experiment, run_transfer_experiment, ExperimentOptions, ExperimentReport,
};
use textsentry::scoring::MetricKind;
use textsentry::seeding::mix_seed;
use textsentry::synth::{synth_dataset as generate_synth, SynthConfig, SynthProfile};
use textsentry::text::TokenizedText;

use crate::config::{resolve, resolve_metric, resolve_sample_size, FileConfig, SampleSize};
use crate::{AttackOpts, ClassifierOpts, CommonOpts, DetectorOpts};

fn load_file_config(common: &CommonOpts) -> Result<FileConfig> {
    FileConfig::load(common.config.as_deref())
}

fn resolve_seed(common: &CommonOpts, file: &FileConfig) -> u64 {
    resolve(common.seed, file.seed, 0)
}

fn resolve_jobs(common: &CommonOpts, file: &FileConfig) -> usize {
    resolve(common.jobs, file.jobs, 1).max(1)
}

enum Classifier {
    Local(LinearTextModel),
    Remote(RemoteClassifier),
}

impl Classifier {
    fn as_dyn(&self) -> &dyn TextClassifier {
        match self {
            Classifier::Local(m) => m,
            Classifier::Remote(r) => r,
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            Classifier::Local(_) => json!({"kind": "local"}),
            Classifier::Remote(r) => json!({
                "kind": "remote",
                "endpoint": r.config().base_url,
                "timeout_ms": r.config().timeout_ms,
                "retries": r.config().retries,
            }),
        }
    }

    fn is_remote(&self) -> bool {
        matches!(self, Classifier::Remote(_))
    }
}

fn resolve_classifier(opts: &ClassifierOpts, file: &FileConfig) -> Result<Classifier> {
    let endpoint = opts.endpoint.clone().or_else(|| file.endpoint.clone());
    match (&opts.model, endpoint) {
        (Some(_), Some(_)) => bail!("pass either --model or --endpoint, not both"),
        (Some(path), None) => {
            let model = LinearTextModel::load(path)
                .with_context(|| format!("loading model {}", path.display()))?;
            Ok(Classifier::Local(model))
        }
        (None, Some(url)) => {
            let mut config = RemoteConfig::new(url);
            config.timeout_ms = resolve(opts.timeout_ms, file.timeout_ms, config.timeout_ms);
            config.retries = resolve(opts.retries, file.retries, config.retries);
            Ok(Classifier::Remote(RemoteClassifier::new(config)?))
        }
        (None, None) => bail!("a classifier is required: pass --model or --endpoint"),
    }
}

fn resolve_lexicon(opts: &AttackOpts, file: &FileConfig) -> Result<SynonymLexicon> {
    let path = opts.lexicon.clone().or_else(|| file.lexicon.clone());
    match path {
        Some(path) => SynonymLexicon::from_path(&path)
            .with_context(|| format!("loading lexicon {}", path.display())),
        None => Ok(SynonymLexicon::bundled().clone()),
    }
}

fn resolve_attack_config(
    opts: &AttackOpts,
    file: &FileConfig,
    seed: u64,
    adaptive_threshold: Option<(f64, MetricKind)>,
) -> Result<AttackConfig> {
    let kind_raw = resolve(
        opts.attack.clone(),
        file.attack.clone(),
        "word".to_owned(),
    );
    let kind = match kind_raw.as_str() {
        "word" | "word_level" => AttackKind::WordLevel,
        "char" | "char_level" => AttackKind::CharLevel,
        other => bail!("unknown attack kind {other:?} (word|char)"),
    };
    let goal_raw = resolve(opts.goal.clone(), file.goal.clone(), "flip".to_owned());
    let goal = match goal_raw.as_str() {
        "flip" => AttackGoal::Flip,
        "target-score" | "target_score" => {
            let t = opts
                .target_score
                .or(file.target_score)
                .context("--goal target-score requires --target-score")?;
            AttackGoal::TargetScore(t)
        }
        other => bail!("unknown goal {other:?} (flip|target-score)"),
    };
    let mut config = AttackConfig::new(kind, goal);
    config.max_perturb_fraction = resolve(opts.budget, file.budget, 1.0);
    config.seed = seed;
    if let Some(cap) = opts.max_candidates {
        config.max_candidates_per_word = cap;
    }
    if opts.adaptive {
        let (threshold, metric) = adaptive_threshold
            .context("--adaptive requires a threshold (--threshold or --calibration)")?;
        config.adaptive = Some(AdaptiveConstraint { threshold, metric });
    }
    config.validate()?;
    Ok(config)
}

/// Persisted calibration artifact: the spec'd report fields plus version and
/// resolved config.
#[derive(Serialize, Deserialize)]
struct CalibrationArtifact {
    format_version: String,
    metric: MetricKind,
    seed: u64,
    rows: Vec<textsentry::detection::ThresholdRow>,
    chosen: f64,
    n_clean: usize,
    n_adv: usize,
    config: serde_json::Value,
}

fn load_calibration(path: &Path) -> Result<CalibrationArtifact> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("reading calibration {}", path.display()))?;
    let artifact: CalibrationArtifact = serde_json::from_str(&raw)
        .with_context(|| format!("parsing calibration {}", path.display()))?;
    check_format_version(&artifact.format_version)?;
    Ok(artifact)
}

/// Threshold and metric from flags and/or a calibration artifact. The flag
/// threshold wins; a metric mismatch against the calibration is an error.
fn resolve_detector(
    opts: &DetectorOpts,
    file: &FileConfig,
    seed: u64,
) -> Result<(DetectorConfig, SampleSize)> {
    let sample_size = resolve_sample_size(opts.sample_size.as_deref(), file)?;
    let calibration = opts
        .calibration
        .as_deref()
        .map(load_calibration)
        .transpose()?;
    let metric = match (opts.metric, &calibration) {
        (Some(m), Some(c)) if m != c.metric => {
            bail!(
                "calibration {} was computed with metric {}, but --metric {} given",
                opts.calibration.as_ref().expect("present").display(),
                c.metric,
                m
            )
        }
        (Some(m), _) => m,
        (None, Some(c)) => c.metric,
        (None, None) => resolve_metric(None, file)?,
    };
    let threshold = opts
        .threshold
        .or(calibration.as_ref().map(|c| c.chosen))
        .context("a threshold is required: pass --threshold or --calibration")?;
    let config = DetectorConfig::new(metric, sample_size.sampler(seed), threshold)?;
    Ok((config, sample_size))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let rendered = serde_json::to_string_pretty(value)?;
    fs::write(path, rendered + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn synth_dataset(common: &CommonOpts, size: usize, profile: &str, out: &Path) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let profile: SynthProfile = profile.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let data = generate_synth(&SynthConfig {
        size,
        seed,
        profile,
    })?;
    data.save_jsonl(out)?;
    eprintln!(
        "{}",
        json!({"written": out.display().to_string(), "texts": data.len(), "seed": seed})
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    common: &CommonOpts,
    dataset: &Path,
    l2: Option<f64>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    labels: Option<String>,
    out: &Path,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let data = LabeledDataset::load(dataset)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        l2: l2.unwrap_or(defaults.l2),
        learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
        max_epochs: epochs.unwrap_or(defaults.max_epochs),
        seed,
    };
    let label_names = labels.map(|raw| raw.split(',').map(|s| s.trim().to_owned()).collect());
    let model = LinearTextModel::train(&data, config, label_names)?;
    model.save(out)?;
    eprintln!(
        "{}",
        json!({
            "written": out.display().to_string(),
            "examples": data.len(),
            "labels": model.labels(),
            "vocabulary": model.vocabulary_size(),
        })
    );
    Ok(())
}

/// First line of an attack-results file; the remaining lines are one
/// [`AttackResult`] each.
#[derive(Serialize, Deserialize)]
struct AttackResultsHeader {
    format_version: String,
    config: serde_json::Value,
}

pub fn attack(
    common: &CommonOpts,
    classifier_opts: &ClassifierOpts,
    attack_opts: &AttackOpts,
    detector_opts: &DetectorOpts,
    dataset: &Path,
    out: &Path,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let jobs = resolve_jobs(common, &file);
    let classifier = resolve_classifier(classifier_opts, &file)?;
    let lexicon = resolve_lexicon(attack_opts, &file)?;
    let adaptive_threshold = if attack_opts.adaptive {
        let (config, _) = resolve_detector(detector_opts, &file, seed)?;
        Some((config.threshold, config.metric))
    } else {
        None
    };
    let attack_config = resolve_attack_config(attack_opts, &file, seed, adaptive_threshold)?;
    let data = LabeledDataset::load(dataset)?;

    let texts: Vec<(TokenizedText, usize)> = data
        .examples()
        .iter()
        .map(|ex| (TokenizedText::tokenize(&ex.text), ex.label))
        .collect();
    let clf = classifier.as_dyn();
    let run_one = |i: usize, text: &TokenizedText, label: usize| -> Result<AttackResult> {
        let mut config = attack_config.clone();
        config.seed = mix_seed(seed, 2 * i as u64);
        Ok(greedy_attack(clf, text, label, &config, Some(&lexicon))?)
    };
    let results: Vec<AttackResult> = if jobs <= 1 {
        texts
            .iter()
            .enumerate()
            .map(|(i, (t, l))| run_one(i, t, *l))
            .collect::<Result<_>>()?
    } else {
        let mut collected: Vec<Option<Result<AttackResult>>> = Vec::new();
        collected.resize_with(texts.len(), || None);
        for (chunk_start, chunk) in texts.chunks(jobs).enumerate().map(|(c, ch)| (c * jobs, ch)) {
            let outputs = std::thread::scope(|scope| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(offset, (t, l))| {
                        let run = &run_one;
                        scope.spawn(move || run(chunk_start + offset, t, *l))
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .map(|h| h.join().expect("attack worker panicked"))
                    .collect::<Vec<_>>()
            });
            for (offset, result) in outputs.into_iter().enumerate() {
                collected[chunk_start + offset] = Some(result);
            }
        }
        collected
            .into_iter()
            .map(|r| r.expect("all slots filled"))
            .collect::<Result<_>>()?
    };

    let header = AttackResultsHeader {
        format_version: FORMAT_VERSION.to_owned(),
        config: json!({
            "command": "attack",
            "dataset": dataset.display().to_string(),
            "seed": seed,
            "jobs": jobs,
            "classifier": classifier.describe(),
            "attack": attack_config,
        }),
    };
    let mut out_file = fs::File::create(out)?;
    serde_json::to_writer(&mut out_file, &header)?;
    writeln!(out_file)?;
    for result in &results {
        serde_json::to_writer(&mut out_file, result)?;
        writeln!(out_file)?;
    }
    let successes = results.iter().filter(|r| r.success).count();
    eprintln!(
        "{}",
        json!({"written": out.display().to_string(), "attacked": results.len(), "successes": successes})
    );
    Ok(())
}

fn load_attack_results(path: &Path) -> Result<Vec<AttackResult>> {
    let raw =
        fs::read_to_string(path).with_context(|| format!("reading attacks {}", path.display()))?;
    let mut lines = raw.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines.next().context("attack results file is empty")?;
    let header: AttackResultsHeader =
        serde_json::from_str(header_line).context("attack results header")?;
    check_format_version(&header.format_version)?;
    lines
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .with_context(|| format!("attack result on line {}", i + 2))
        })
        .collect()
}

pub fn calibrate(
    common: &CommonOpts,
    classifier_opts: &ClassifierOpts,
    attacks: &Path,
    metric: Option<MetricKind>,
    sample_size: Option<&str>,
    grid_step: Option<f64>,
    out: &Path,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let classifier = resolve_classifier(classifier_opts, &file)?;
    let metric = resolve_metric(metric, &file)?;
    let sample_size = resolve_sample_size(sample_size, &file)?;
    let results = load_attack_results(attacks)?;
    if results.is_empty() {
        bail!("no attack results in {}", attacks.display());
    }

    let max_in_flight = if classifier.is_remote() { 8 } else { 1 };
    let clf = classifier.as_dyn();
    let mut clean = Vec::new();
    let mut adversarial = Vec::new();
    for (i, result) in results.iter().enumerate() {
        let sampler = sample_size.sampler(mix_seed(seed, i as u64));
        let (stat, _, _) = textsentry::detection::detection_statistic(
            clf,
            &result.original,
            metric,
            &sampler,
            max_in_flight,
        )?;
        clean.push(stat);
        if result.success {
            let (stat, _, _) = textsentry::detection::detection_statistic(
                clf,
                &result.adversarial,
                metric,
                &sampler,
                max_in_flight,
            )?;
            adversarial.push(stat);
        }
    }
    let report: CalibrationReport = match grid_step {
        Some(step) => calibrate_with_grid(&clean, &adversarial, step)?,
        None => calibrate_stats(&clean, &adversarial)?,
    };
    let artifact = CalibrationArtifact {
        format_version: FORMAT_VERSION.to_owned(),
        metric,
        seed,
        chosen: report.chosen,
        n_clean: report.n_clean,
        n_adv: report.n_adv,
        rows: report.rows,
        config: json!({
            "command": "calibrate",
            "attacks": attacks.display().to_string(),
            "metric": metric,
            "sample_size": sample_size,
            "grid_step": grid_step,
            "seed": seed,
            "classifier": classifier.describe(),
        }),
    };
    write_json(out, &artifact)?;
    eprintln!(
        "{}",
        json!({"written": out.display().to_string(), "chosen": artifact.chosen})
    );
    Ok(())
}

pub fn detect(
    common: &CommonOpts,
    classifier_opts: &ClassifierOpts,
    detector_opts: &DetectorOpts,
    text: Option<&str>,
    input: Option<&Path>,
    max_in_flight: Option<usize>,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let classifier = resolve_classifier(classifier_opts, &file)?;
    let (mut detector, sample_size) = resolve_detector(detector_opts, &file, seed)?;
    detector.max_in_flight =
        max_in_flight.unwrap_or(if classifier.is_remote() { 8 } else { 1 });

    #[derive(Deserialize)]
    struct TextLine {
        text: String,
    }
    let texts: Vec<String> = match (text, input) {
        (Some(t), None) => vec![t.to_owned()],
        (None, Some(path)) => {
            let raw = fs::read_to_string(path)
                .with_context(|| format!("reading input {}", path.display()))?;
            raw.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    serde_json::from_str::<TextLine>(l)
                        .map(|t| t.text)
                        .with_context(|| format!("input line {l:?}"))
                })
                .collect::<Result<_>>()?
        }
        (Some(_), Some(_)) => bail!("pass either --text or --input, not both"),
        (None, None) => bail!("nothing to score: pass --text or --input"),
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let header = json!({
        "format_version": FORMAT_VERSION,
        "config": {
            "command": "detect",
            "metric": detector.metric,
            "sample_size": sample_size,
            "threshold": detector.threshold,
            "seed": seed,
            "max_in_flight": detector.max_in_flight,
            "classifier": classifier.describe(),
        },
    });
    writeln!(out, "{header}")?;
    for (i, raw) in texts.iter().enumerate() {
        let tokenized = TokenizedText::tokenize(raw);
        let mut config = detector.clone();
        config.sampler = sample_size.sampler(mix_seed(seed, i as u64));
        let verdict = detect_text(classifier.as_dyn(), &tokenized, &config)?;
        let line = json!({
            "index": i,
            "text": raw,
            "label": if verdict.is_adversarial { "adversarial" } else { "clean" },
            "verdict": verdict,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn report_csv(report: &ExperimentReport) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut csv = String::from(
        "attack,n_texts,n_attacked,n_successes,asr,mean_pw,auc,threshold,tpr,fpr,f1,queries_total,queries_mean,seed\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        report.attack,
        report.n_texts,
        report.n_attacked,
        report.n_successes,
        opt(report.asr),
        opt(report.mean_pw),
        opt(report.auc),
        report.threshold,
        opt(report.tpr),
        opt(report.fpr),
        opt(report.f1),
        report.attack_queries_total,
        opt(report.attack_queries_mean),
        report.seed,
    ));
    csv
}

fn write_report(
    out: &Path,
    csv: bool,
    command: &str,
    config: serde_json::Value,
    report: &ExperimentReport,
) -> Result<()> {
    let artifact = json!({
        "format_version": FORMAT_VERSION,
        "config": config,
        "report": report,
    });
    write_json(out, &artifact)?;
    if csv {
        let csv_path = out.with_extension("csv");
        fs::write(&csv_path, report_csv(report))
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    eprintln!(
        "{}",
        json!({
            "written": out.display().to_string(),
            "command": command,
            "asr": report.asr,
            "auc": report.auc,
        })
    );
    Ok(())
}

pub fn evaluate(
    common: &CommonOpts,
    classifier_opts: &ClassifierOpts,
    attack_opts: &AttackOpts,
    detector_opts: &DetectorOpts,
    dataset: &Path,
    out: &Path,
    csv: bool,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let jobs = resolve_jobs(common, &file);
    let classifier = resolve_classifier(classifier_opts, &file)?;
    let lexicon = resolve_lexicon(attack_opts, &file)?;
    let (mut detector, sample_size) = resolve_detector(detector_opts, &file, seed)?;
    if classifier.is_remote() {
        detector.max_in_flight = 8;
    }
    let adaptive = attack_opts
        .adaptive
        .then_some((detector.threshold, detector.metric));
    let attack_config = resolve_attack_config(attack_opts, &file, seed, adaptive)?;
    let data = LabeledDataset::load(dataset)?;
    let texts: Vec<(String, usize)> = data
        .examples()
        .iter()
        .map(|ex| (ex.text.clone(), ex.label))
        .collect();

    let report = run_detection_experiment(
        classifier.as_dyn(),
        &texts,
        &attack_config,
        &detector,
        Some(&lexicon),
        ExperimentOptions { seed, jobs },
    )?;
    let config = json!({
        "command": "evaluate",
        "dataset": dataset.display().to_string(),
        "seed": seed,
        "jobs": jobs,
        "sample_size": sample_size,
        "classifier": classifier.describe(),
        "attack": attack_config,
        "detector": detector,
    });
    write_report(out, csv, "evaluate", config, &report)
}

#[allow(clippy::too_many_arguments)]
pub fn transfer_evaluate(
    common: &CommonOpts,
    attack_opts: &AttackOpts,
    detector_opts: &DetectorOpts,
    model: &Path,
    surrogate: &Path,
    dataset: &Path,
    out: &Path,
    csv: bool,
) -> Result<()> {
    let file = load_file_config(common)?;
    let seed = resolve_seed(common, &file);
    let jobs = resolve_jobs(common, &file);
    let target = LinearTextModel::load(model)
        .with_context(|| format!("loading target model {}", model.display()))?;
    let surrogate_model = LinearTextModel::load(surrogate)
        .with_context(|| format!("loading surrogate model {}", surrogate.display()))?;
    let lexicon = resolve_lexicon(attack_opts, &file)?;
    let (detector, sample_size) = resolve_detector(detector_opts, &file, seed)?;
    let adaptive = attack_opts
        .adaptive
        .then_some((detector.threshold, detector.metric));
    let attack_config = resolve_attack_config(attack_opts, &file, seed, adaptive)?;
    let data = LabeledDataset::load(dataset)?;
    let texts: Vec<(String, usize)> = data
        .examples()
        .iter()
        .map(|ex| (ex.text.clone(), ex.label))
        .collect();

    let report = run_transfer_experiment(
        &target,
        &surrogate_model,
        &texts,
        &attack_config,
        &detector,
        Some(&lexicon),
        ExperimentOptions { seed, jobs },
    )?;
    let config = json!({
        "command": "transfer-evaluate",
        "dataset": dataset.display().to_string(),
        "target": model.display().to_string(),
        "surrogate": surrogate.display().to_string(),
        "seed": seed,
        "jobs": jobs,
        "sample_size": sample_size,
        "attack": attack_config,
        "detector": detector,
    });
    write_report(out, csv, "transfer-evaluate", config, &report)
}
