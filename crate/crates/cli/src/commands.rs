use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use harnessjudge::corpus::{self, BuggySelectionPolicy};
use harnessjudge::metrics::{self, aggregate_metrics, difficulty_bucket, render_table};
use harnessjudge::selection::{self, DiversityReport, SelectionResult};
use harnessjudge::{
    par, shim_judge, Corpus, CorpusEntry, ExecLimits, Judge, JudgeConfig, JudgeJob, JudgeRecord,
    ResponseKind, Role, TestResponse,
};
use harnessjudge_gateway::{
    classify_strategies, parse_or_unparsed, render_prompt, GatewayError, HttpSampler, PromptKind,
    RecordingSampler, ReplaySampler, ResponseIds, Sampler, SamplingConfig, StrategyLabels,
};

use crate::error::{CliError, ResultExt};
use crate::io::{self, RunManifest};
use crate::settings::{JudgeArgs, ModelArgs, Settings};
use crate::{Cli, Command, CorpusCommand, SweepMode};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::load(&cli.common)?;
    match cli.command {
        Command::Judge {
            corpus,
            responses,
            out,
            judge,
        } => cmd_judge(&settings, &corpus, &responses, out.as_deref(), &judge),
        Command::Eval {
            records,
            by_difficulty,
            corpus,
            out,
        } => cmd_eval(
            &settings,
            &records,
            settings.by_difficulty(by_difficulty),
            corpus.as_deref(),
            out.as_deref(),
        ),
        Command::Select {
            corpus,
            responses,
            out,
            judge,
        } => cmd_select(&settings, &corpus, &responses, out.as_deref(), &judge),
        Command::Diversity {
            responses,
            compare,
            downsample_seed,
            out,
            judge,
        } => cmd_diversity(
            &settings,
            &responses,
            compare.as_deref(),
            downsample_seed.unwrap_or_else(|| settings.seed()),
            out.as_deref(),
            &judge,
        ),
        Command::Sweep {
            corpus,
            responses,
            mode,
            values,
            out,
            judge,
        } => cmd_sweep(
            &settings,
            &corpus,
            &responses,
            mode,
            &values,
            out.as_deref(),
            &judge,
        ),
        Command::Corpus(sub) => cmd_corpus(&settings, sub),
        Command::Gen {
            corpus,
            kind,
            out,
            model,
        } => cmd_gen(&settings, &corpus, kind.into(), out.as_deref(), &model),
        Command::Classify {
            responses,
            out,
            model,
        } => cmd_classify(&settings, &responses, out.as_deref(), &model),
    }
}

fn judge_from(settings: &Settings) -> Result<Judge, CliError> {
    Ok(shim_judge(settings.runtime()?))
}

/// A response that could not be paired with its programs.
#[derive(Debug, Serialize)]
struct ItemError {
    response_id: String,
    error: String,
}

/// Splits responses into runnable jobs and per-response pairing errors.
fn pair_jobs<'a>(
    corpus: &'a Corpus,
    responses: &'a [TestResponse],
) -> (Vec<JudgeJob<'a>>, Vec<ItemError>) {
    let mut jobs = Vec::new();
    let mut errors = Vec::new();
    for response in responses {
        let fail = |why: String| ItemError {
            response_id: response.response_id.clone(),
            error: why,
        };
        let Some(entry) = corpus.get(&response.problem_id) else {
            errors.push(fail(format!(
                "problem {:?} not in corpus",
                response.problem_id
            )));
            continue;
        };
        let Some(g) = entry.ground_truth() else {
            errors.push(fail(format!(
                "problem {:?} has no ground truth",
                response.problem_id
            )));
            continue;
        };
        let Some(f) = entry.program(&response.target_program_id) else {
            errors.push(fail(format!(
                "program {:?} not found for problem {:?}",
                response.target_program_id, response.problem_id
            )));
            continue;
        };
        jobs.push(JudgeJob {
            response,
            problem: &entry.problem,
            f,
            g,
        });
    }
    (jobs, errors)
}

fn report_item_errors(errors: &[ItemError], out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    if errors.is_empty() {
        return Ok(Vec::new());
    }
    for e in errors {
        tracing::error!(response = %e.response_id, "{}", e.error);
    }
    match out {
        Some(out) => {
            let path = io::errors_path(out);
            io::write_jsonl(Some(&path), errors)?;
            Ok(vec![path])
        }
        None => Ok(Vec::new()),
    }
}

fn cmd_judge(
    settings: &Settings,
    corpus_path: &Path,
    responses_path: &Path,
    out: Option<&Path>,
    args: &JudgeArgs,
) -> Result<(), CliError> {
    let config = settings.judge_config(args)?;
    let corpus = io::read_corpus(corpus_path)?;
    let responses = io::read_responses(responses_path)?;
    let judge = judge_from(settings)?;
    let manifest = RunManifest::start("judge", settings.seed())
        .config(json!({ "judge": config, "parallelism": settings.parallelism() }))
        .input(corpus_path)
        .input(responses_path);

    let (jobs, errors) = pair_jobs(&corpus, &responses);
    let records = judge.judge_batch(&jobs, &config, settings.parallelism());
    io::write_jsonl(out, &records)?;
    let extra = report_item_errors(&errors, out)?;
    manifest.finish(out, &extra)?;

    let mean = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.reward).sum::<f64>() / records.len() as f64
    };
    eprintln!(
        "judged {} responses, mean reward {mean:.4}, {} errors",
        records.len(),
        errors.len()
    );
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{} responses could not be judged",
            errors.len()
        )))
    }
}

fn cmd_eval(
    settings: &Settings,
    records_path: &Path,
    by_difficulty: bool,
    corpus_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let records: Vec<JudgeRecord> = io::read_jsonl(records_path)?;
    if records.is_empty() {
        return Err(CliError::validation(format!(
            "{} holds no records",
            records_path.display()
        )));
    }
    let mut manifest = RunManifest::start("eval", settings.seed())
        .config(json!({ "by_difficulty": by_difficulty }))
        .input(records_path);
    let reports = if by_difficulty {
        let path =
            corpus_path.ok_or_else(|| CliError::validation("--by-difficulty needs --corpus"))?;
        let corpus = io::read_corpus(path)?;
        manifest = manifest.input(path);
        aggregate_metrics(&records, |r| {
            difficulty_bucket(
                corpus
                    .get(&r.problem_id)
                    .and_then(|e| e.problem.difficulty.as_ref()),
            )
        })
    } else {
        aggregate_metrics(&records, |_| "all".to_string())
    };
    print!("{}", render_table(&reports));
    if out.is_some() {
        io::write_jsonl(out, &reports)?;
        manifest.finish(out, &[])?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SelectionLine {
    #[serde(flatten)]
    result: SelectionResult,
    candidate_ids: Vec<String>,
    selected_program_id: String,
}

fn cmd_select(
    settings: &Settings,
    corpus_path: &Path,
    responses_path: &Path,
    out: Option<&Path>,
    args: &JudgeArgs,
) -> Result<(), CliError> {
    let config = settings.judge_config(args)?;
    let corpus = io::read_corpus(corpus_path)?;
    let responses = io::read_responses(responses_path)?;
    let judge = judge_from(settings)?;
    let manifest = RunManifest::start("select", settings.seed())
        .config(json!({ "judge": config }))
        .input(corpus_path)
        .input(responses_path);

    let mut by_problem: BTreeMap<&str, Vec<TestResponse>> = BTreeMap::new();
    for r in &responses {
        by_problem
            .entry(r.problem_id.as_str())
            .or_default()
            .push(r.clone());
    }
    let mut lines = Vec::new();
    for entry in corpus.entries() {
        let candidates: Vec<_> = entry.with_role(Role::Candidate).cloned().collect();
        if candidates.is_empty() {
            continue;
        }
        let pool = by_problem
            .get(entry.problem.id.as_str())
            .map(Vec::as_slice)
            .unwrap_or_default();
        let result = selection::select_best_of_n(
            &judge,
            &entry.problem,
            &candidates,
            pool,
            &config,
            settings.parallelism(),
        )
        .validation()?;
        lines.push(SelectionLine {
            selected_program_id: candidates[result.selected_index].program_id.clone(),
            candidate_ids: candidates.iter().map(|c| c.program_id.clone()).collect(),
            result,
        });
    }
    if lines.is_empty() {
        return Err(CliError::validation(
            "no problem in the corpus has candidate programs",
        ));
    }
    io::write_jsonl(out, &lines)?;
    manifest.finish(out, &[])
}

#[derive(Debug, Serialize)]
struct DiversityLine {
    problem_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<DiversityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<DiversityReport>,
}

fn input_pools(
    judge: &Judge,
    responses: &[TestResponse],
    config: &JudgeConfig,
) -> BTreeMap<String, Vec<String>> {
    let mut by_problem: BTreeMap<String, Vec<TestResponse>> = BTreeMap::new();
    for r in responses {
        by_problem
            .entry(r.problem_id.clone())
            .or_default()
            .push(r.clone());
    }
    by_problem
        .into_iter()
        .map(|(id, rs)| {
            let inputs = selection::build_pool(judge, &rs, config)
                .into_iter()
                .map(|t| t.input)
                .collect();
            (id, inputs)
        })
        .collect()
}

fn cmd_diversity(
    settings: &Settings,
    responses_path: &Path,
    compare: Option<&Path>,
    downsample_seed: u64,
    out: Option<&Path>,
    args: &JudgeArgs,
) -> Result<(), CliError> {
    let config = settings.judge_config(args)?;
    let judge = judge_from(settings)?;
    let mut manifest = RunManifest::start("diversity", settings.seed())
        .config(json!({ "judge": config, "downsample_seed": downsample_seed }))
        .input(responses_path);
    let pools_a = input_pools(&judge, &io::read_responses(responses_path)?, &config);
    let pools_b = match compare {
        Some(path) => {
            manifest = manifest.input(path);
            Some(input_pools(&judge, &io::read_responses(path)?, &config))
        }
        None => None,
    };

    let mut lines = Vec::new();
    for (problem_id, a) in &pools_a {
        let line = match &pools_b {
            None => match selection::diversity_report(a) {
                Ok(report) => DiversityLine {
                    problem_id: problem_id.clone(),
                    a: Some(report),
                    b: None,
                },
                Err(_) => {
                    tracing::warn!(problem = %problem_id, "no inputs; skipped");
                    continue;
                }
            },
            Some(pools_b) => {
                let Some(b) = pools_b.get(problem_id) else {
                    continue;
                };
                match selection::compare_diversity(a, b, downsample_seed) {
                    Ok((ra, rb)) => DiversityLine {
                        problem_id: problem_id.clone(),
                        a: Some(ra),
                        b: Some(rb),
                    },
                    Err(_) => {
                        tracing::warn!(problem = %problem_id, "an input pool is empty; skipped");
                        continue;
                    }
                }
            }
        };
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(CliError::validation("no problem produced any inputs"));
    }
    let avg = |pick: fn(&DiversityLine) -> Option<&DiversityReport>| {
        let reports: Vec<DiversityReport> = lines.iter().filter_map(|l| pick(l).cloned()).collect();
        selection::average_reports(&reports)
    };
    let summary = DiversityLine {
        problem_id: "average".into(),
        a: avg(|l| l.a.as_ref()),
        b: avg(|l| l.b.as_ref()),
    };
    for (name, report) in [("a", &summary.a), ("b", &summary.b)] {
        if let Some(r) = report {
            eprintln!(
                "{name}: unique_ratio {:.4}  length_range {:.4}  length_std {:.4}  inputs {}",
                r.unique_ratio, r.length_range, r.length_std, r.n_inputs
            );
        }
    }
    lines.push(summary);
    io::write_jsonl(out, &lines)?;
    manifest.finish(out, &[])
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    settings: &Settings,
    corpus_path: &Path,
    responses_path: &Path,
    mode: SweepMode,
    values: &[usize],
    out: Option<&Path>,
    args: &JudgeArgs,
) -> Result<(), CliError> {
    let config = settings.judge_config(args)?;
    let corpus = io::read_corpus(corpus_path)?;
    let responses = io::read_responses(responses_path)?;
    let judge = judge_from(settings)?;
    let manifest = RunManifest::start("sweep", settings.seed())
        .config(json!({ "judge": config, "mode": format!("{mode:?}"), "values": values }))
        .input(corpus_path)
        .input(responses_path);
    let (jobs, errors) = pair_jobs(&corpus, &responses);
    if !errors.is_empty() {
        report_item_errors(&errors, None)?;
        return Err(CliError::validation(format!(
            "{} responses could not be paired",
            errors.len()
        )));
    }
    let rows = match mode {
        SweepMode::FirstK => {
            metrics::sweep_first_k(&judge, &jobs, values, &config, settings.parallelism())
        }
        SweepMode::Scaling => {
            metrics::sweep_scaling(&judge, &jobs, values, &config, settings.parallelism())
        }
    }
    .validation()?;
    let reports: Vec<_> = rows.iter().map(|r| r.report.clone()).collect();
    print!("{}", render_table(&reports));
    if out.is_some() {
        io::write_jsonl(out, &rows)?;
    }
    manifest.finish(out, &[])
}

fn limits_from(settings: &Settings, timeout: Option<f64>) -> Result<ExecLimits, CliError> {
    let args = JudgeArgs {
        timeout,
        ..JudgeArgs::default()
    };
    Ok(settings.judge_config(&args)?.limits)
}

fn entry_lines(entries: &[CorpusEntry]) -> Vec<String> {
    entries.iter().map(CorpusEntry::to_json_line).collect()
}

fn cmd_corpus(settings: &Settings, sub: CorpusCommand) -> Result<(), CliError> {
    match sub {
        CorpusCommand::FilterGt {
            corpus,
            out,
            timeout,
        } => {
            let limits = limits_from(settings, timeout)?;
            let judge = judge_from(settings)?;
            let entries = io::read_corpus(&corpus)?.into_entries();
            let total = entries.len();
            let mut kept = Vec::new();
            for entry in entries {
                let Some(g) = entry.ground_truth() else {
                    tracing::warn!(problem = %entry.problem.id, "no ground truth; dropped");
                    continue;
                };
                match corpus::filter_ground_truth(
                    &judge,
                    &entry.problem,
                    g,
                    &limits,
                    settings.parallelism(),
                ) {
                    Ok(true) => kept.push(entry),
                    Ok(false) => {
                        tracing::info!(problem = %entry.problem.id, "ground truth fails official tests; dropped")
                    }
                    Err(e) => tracing::warn!("{e}; dropped"),
                }
            }
            eprintln!("kept {} of {total} problems", kept.len());
            io::write_lines(out.as_deref(), &entry_lines(&kept))?;
            RunManifest::start("corpus filter-gt", settings.seed())
                .config(json!({ "limits": limits }))
                .input(&corpus)
                .finish(out.as_deref(), &[])
        }
        CorpusCommand::PickBuggy {
            corpus,
            policy,
            keep_top,
            out,
            timeout,
        } => {
            let limits = limits_from(settings, timeout)?;
            let policy = BuggySelectionPolicy {
                mode: settings.policy(policy.map(Into::into)),
                keep_top: settings.keep_top(keep_top),
            };
            policy.validate().validation()?;
            let judge = judge_from(settings)?;
            let mut entries = io::read_corpus(&corpus)?.into_entries();
            for entry in &mut entries {
                let candidates: Vec<_> = entry.with_role(Role::Candidate).cloned().collect();
                let picked = if candidates.is_empty() || entry.problem.official_tests.is_empty() {
                    Vec::new()
                } else {
                    corpus::select_buggy(
                        &judge,
                        &entry.problem,
                        &candidates,
                        &policy,
                        &limits,
                        settings.parallelism(),
                    )
                    .validation()?
                };
                entry.programs.retain(|p| p.role != Role::Candidate);
                entry.programs.extend(picked.into_iter().map(|mut p| {
                    p.role = Role::Buggy;
                    p
                }));
            }
            io::write_lines(out.as_deref(), &entry_lines(&entries))?;
            RunManifest::start("corpus pick-buggy", settings.seed())
                .config(json!({ "policy": policy, "limits": limits }))
                .input(&corpus)
                .finish(out.as_deref(), &[])
        }
        CorpusCommand::Decontaminate {
            corpus,
            eval,
            threshold,
            out,
        } => {
            let threshold = settings.threshold(threshold);
            let train = io::read_corpus(&corpus)?.into_entries();
            let eval_problems: Vec<_> = io::read_corpus(&eval)?
                .into_entries()
                .into_iter()
                .map(|e| e.problem)
                .collect();
            let train_problems: Vec<_> = train.iter().map(|e| e.problem.clone()).collect();
            let kept_ids: std::collections::HashSet<String> =
                corpus::decontaminate(&train_problems, &eval_problems, threshold)
                    .validation()?
                    .into_iter()
                    .map(|p| p.id)
                    .collect();
            let kept: Vec<CorpusEntry> = train
                .into_iter()
                .filter(|e| kept_ids.contains(&e.problem.id))
                .collect();
            eprintln!("kept {} of {} problems", kept.len(), train_problems.len());
            io::write_lines(out.as_deref(), &entry_lines(&kept))?;
            RunManifest::start("corpus decontaminate", settings.seed())
                .config(json!({ "threshold": threshold }))
                .input(&corpus)
                .input(&eval)
                .finish(out.as_deref(), &[])
        }
        CorpusCommand::SftFilter {
            records,
            responses,
            out,
        } => {
            let recs: Vec<JudgeRecord> = io::read_jsonl(&records)?;
            let resps = io::read_responses(&responses)?;
            let kept = corpus::sft_filter(&recs, &resps);
            eprintln!("kept {} of {} responses", kept.len(), resps.len());
            io::write_jsonl(out.as_deref(), &kept)?;
            RunManifest::start("corpus sft-filter", settings.seed())
                .input(&records)
                .input(&responses)
                .finish(out.as_deref(), &[])
        }
        CorpusCommand::Variants { corpus, out } => {
            let mut entries = Vec::new();
            for entry in io::read_corpus(&corpus)?.into_entries() {
                let variants = match entry.problem.io_mode {
                    harnessjudge::IoMode::Functional => {
                        corpus::make_functional_variants(&entry.problem).validation()?
                    }
                    harnessjudge::IoMode::Stdin => vec![entry.problem.clone()],
                };
                for problem in variants {
                    let programs = entry
                        .programs
                        .iter()
                        .cloned()
                        .map(|mut p| {
                            p.problem_id = problem.id.clone();
                            p
                        })
                        .collect();
                    entries.push(CorpusEntry { problem, programs });
                }
            }
            let entries = Corpus::from_entries(entries).validation()?.into_entries();
            io::write_lines(out.as_deref(), &entry_lines(&entries))?;
            RunManifest::start("corpus variants", settings.seed())
                .input(&corpus)
                .finish(out.as_deref(), &[])
        }
    }
}

fn sampler_from(model: &ModelArgs, cfg: &SamplingConfig) -> Result<Box<dyn Sampler>, CliError> {
    if let Some(path) = &model.replay_transcript {
        return Ok(Box::new(ReplaySampler::load(path).validation()?));
    }
    let http = HttpSampler::new(cfg).validation()?;
    match &model.record {
        Some(path) => Ok(Box::new(RecordingSampler::new(http, path).internal()?)),
        None => Ok(Box::new(http)),
    }
}

fn cmd_gen(
    settings: &Settings,
    corpus_path: &Path,
    kind: ResponseKind,
    out: Option<&Path>,
    model: &ModelArgs,
) -> Result<(), CliError> {
    let cfg = settings.sampling(model)?;
    let corpus = io::read_corpus(corpus_path)?;
    let sampler = sampler_from(model, &cfg)?;
    let prompt_kind = match kind {
        ResponseKind::Harness => PromptKind::Harness,
        ResponseKind::IoPairs => PromptKind::IoPairs,
    };
    let mut manifest = RunManifest::start("gen", settings.seed())
        .config(json!({ "sampling": cfg, "kind": kind }))
        .input(corpus_path);
    if let Some(t) = &model.replay_transcript {
        manifest = manifest.input(t);
    }

    let targets: Vec<_> = corpus
        .entries()
        .iter()
        .flat_map(|e| e.with_role(Role::Buggy).map(move |f| (e, f)))
        .collect();
    let sampled = par::map(&targets, settings.parallelism(), |(entry, f)| {
        let prompt = render_prompt(prompt_kind, &entry.problem, Some(f))?;
        sampler.sample(&prompt, &cfg)
    });

    let mut responses = Vec::new();
    for ((entry, f), result) in targets.iter().zip(sampled) {
        let context = || format!("sampling for {}/{}", entry.problem.id, f.program_id);
        let raws = match result {
            Err(
                e @ (GatewayError::ReplayMiss { .. }
                | GatewayError::Config(_)
                | GatewayError::MissingPlaceholder { .. }),
            ) => return Err(e).with_validation(context),
            other => other.with_internal(context)?,
        };
        for (i, raw) in raws.iter().enumerate() {
            let ids = ResponseIds {
                response_id: format!("{}:{}:{i}", entry.problem.id, f.program_id),
                problem_id: entry.problem.id.clone(),
                target_program_id: f.program_id.clone(),
            };
            responses.push(parse_or_unparsed(kind, raw, &ids));
        }
    }
    let unparsed = responses.iter().filter(|r| r.parse_error.is_some()).count();
    eprintln!(
        "sampled {} responses, {unparsed} unparseable",
        responses.len()
    );
    io::write_jsonl(out, &responses)?;
    let extra: Vec<PathBuf> = model.record.iter().cloned().collect();
    manifest.finish(out, &extra)
}

#[derive(Debug, Serialize)]
struct ClassifyLine {
    response_id: String,
    problem_id: String,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    labels: Option<StrategyLabels>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_classify(
    settings: &Settings,
    responses_path: &Path,
    out: Option<&Path>,
    model: &ModelArgs,
) -> Result<(), CliError> {
    let cfg = settings.sampling(model)?;
    let responses = io::read_responses(responses_path)?;
    let sampler = sampler_from(model, &cfg)?;
    let mut manifest = RunManifest::start("classify", settings.seed())
        .config(json!({ "sampling": cfg }))
        .input(responses_path);
    if let Some(t) = &model.replay_transcript {
        manifest = manifest.input(t);
    }
    let harnesses: Vec<&TestResponse> = responses
        .iter()
        .filter(|r| r.kind == ResponseKind::Harness && r.harness_code.is_some())
        .collect();
    let results = par::map(&harnesses, settings.parallelism(), |r| {
        classify_strategies(r, sampler.as_ref(), &cfg)
    });
    let mut failures = 0;
    let lines: Vec<ClassifyLine> = harnesses
        .iter()
        .zip(results)
        .map(|(r, result)| {
            let (labels, error) = match result {
                Ok(l) => (Some(l), None),
                Err(e) => {
                    failures += 1;
                    (None, Some(e.to_string()))
                }
            };
            ClassifyLine {
                response_id: r.response_id.clone(),
                problem_id: r.problem_id.clone(),
                labels,
                error,
            }
        })
        .collect();
    eprintln!("classified {} harnesses, {failures} failed", lines.len());
    io::write_jsonl(out, &lines)?;
    manifest.finish(out, &[])
}
