//! Best-of-N program selection with pooled generated tests, and diversity
//! statistics over generated inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{check_expected, Judge, JudgeConfig};
use crate::error::PipelineError;
use crate::model::{InputSource, Problem, ProgramSource, ResponseKind, TestResponse};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub problem_id: String,
    pub pass_counts: Vec<usize>,
    pub selected_index: usize,
    pub total_tests: usize,
}

/// One test in the pool, remembering which response produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledTest {
    pub response_index: usize,
    pub input: String,
    pub source: InputSource,
}

/// Index of the first maximum; 0 for an empty slice.
pub fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// All tests from all responses, in response order, duplicates kept.
pub fn build_pool(
    judge: &Judge,
    responses: &[TestResponse],
    config: &JudgeConfig,
) -> Vec<PooledTest> {
    responses
        .iter()
        .enumerate()
        .flat_map(|(response_index, r)| {
            judge
                .collect_inputs(r, config)
                .inputs
                .into_iter()
                .map(move |(input, source)| PooledTest {
                    response_index,
                    input,
                    source,
                })
        })
        .collect()
}

/// Picks the candidate passing the most pooled tests, ties to the lowest index.
///
/// A candidate passes an input-output test when its normalized output matches
/// the expected output, and a harness test when it runs cleanly and the
/// originating harness's `check_output` accepts its output.
pub fn select_best_of_n(
    judge: &Judge,
    problem: &Problem,
    candidates: &[ProgramSource],
    responses: &[TestResponse],
    config: &JudgeConfig,
    parallelism: usize,
) -> Result<SelectionResult, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Precondition {
            problem: problem.id.clone(),
            reason: "no candidate programs".into(),
        });
    }
    let pool = build_pool(judge, responses, config);
    if pool.is_empty() {
        tracing::warn!(problem = %problem.id, "empty test pool; selecting candidate 0");
    }
    let grid: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..pool.len()).map(move |t| (c, t)))
        .collect();
    let passed = par::map(&grid, parallelism, |&(c, t)| {
        let test = &pool[t];
        let response = &responses[test.response_index];
        let outcome = judge.run_target(problem, &candidates[c], &test.input, &config.limits);
        if !outcome.is_success() {
            return false;
        }
        match response.kind {
            ResponseKind::IoPairs => match test.source {
                InputSource::HardcodedPair { index } => response
                    .io_pairs
                    .as_ref()
                    .and_then(|p| p.get(index))
                    .is_some_and(|pair| {
                        check_expected(&outcome.stdout, &pair.expected_output).passed()
                    }),
                InputSource::Generator { .. } => false,
            },
            ResponseKind::Harness => judge
                .check_output(response, test.source, &test.input, &outcome.stdout, config)
                .passed(),
        }
    });
    let mut pass_counts = vec![0usize; candidates.len()];
    for (&(c, _), ok) in grid.iter().zip(passed) {
        if ok {
            pass_counts[c] += 1;
        }
    }
    Ok(SelectionResult {
        problem_id: problem.id.clone(),
        selected_index: argmax_first(&pass_counts),
        pass_counts,
        total_tests: pool.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub unique_ratio: f64,
    pub length_range: f64,
    pub length_std: f64,
    pub n_inputs: usize,
}

/// Distinct inputs (exact string equality) over total inputs.
pub fn unique_ratio(inputs: &[String]) -> Result<f64, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::EmptyInputs);
    }
    let distinct: std::collections::HashSet<&str> = inputs.iter().map(String::as_str).collect();
    Ok(distinct.len() as f64 / inputs.len() as f64)
}

/// `(ln(max_len + 1) - ln(min_len + 1), population std of ln(len + 1))`,
/// lengths counted in characters. Empty input gives `(0, 0)`.
pub fn length_stats(inputs: &[String]) -> (f64, f64) {
    let mut min = usize::MAX;
    let mut max = 0usize;
    // Welford's online mean/variance
    let mut n = 0usize;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for s in inputs {
        let len = s.chars().count();
        min = min.min(len);
        max = max.max(len);
        let x = ((len + 1) as f64).ln();
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let range = ((max + 1) as f64).ln() - ((min + 1) as f64).ln();
    (range, (m2 / n as f64).max(0.0).sqrt())
}

pub fn diversity_report(inputs: &[String]) -> Result<DiversityReport, PipelineError> {
    let unique_ratio = unique_ratio(inputs)?;
    let (length_range, length_std) = length_stats(inputs);
    Ok(DiversityReport {
        unique_ratio,
        length_range,
        length_std,
        n_inputs: inputs.len(),
    })
}

/// Uniform sample of `size` items without replacement, kept in original order.
pub fn downsample(inputs: &[String], size: usize, seed: u64) -> Vec<String> {
    if size >= inputs.len() {
        return inputs.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, inputs.len(), size).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| inputs[i].clone()).collect()
}

/// Reports for two pools after downsampling the larger to the smaller's size.
pub fn compare_diversity(
    pool_a: &[String],
    pool_b: &[String],
    seed: u64,
) -> Result<(DiversityReport, DiversityReport), PipelineError> {
    if pool_a.is_empty() || pool_b.is_empty() {
        return Err(PipelineError::EmptyInputs);
    }
    let size = pool_a.len().min(pool_b.len());
    let a = downsample(pool_a, size, seed);
    let b = downsample(pool_b, size, seed);
    Ok((diversity_report(&a)?, diversity_report(&b)?))
}

/// Field-wise mean of per-problem reports; `n_inputs` is summed.
pub fn average_reports(reports: &[DiversityReport]) -> Option<DiversityReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    Some(DiversityReport {
        unique_ratio: reports.iter().map(|r| r.unique_ratio).sum::<f64>() / n,
        length_range: reports.iter().map(|r| r.length_range).sum::<f64>() / n,
        length_std: reports.iter().map(|r| r.length_std).sum::<f64>() / n,
        n_inputs: reports.iter().map(|r| r.n_inputs).sum(),
    })
}
