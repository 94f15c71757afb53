use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::condition::{condition_number, density, CONDITION_LABEL};
use crate::error::{Error, Result};
use crate::fem::ProblemSample;
use crate::model::{standard_normal, Gcvae};
use crate::rng::derive_indexed;
use crate::solvers::{ic_droptol, jacobi_precond, pcg, spai_precond, Preconditioner, DEFAULT_TOL};

/// Preconditioning method under comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Jacobi,
    IcDroptol(f64),
    /// Incomplete Cholesky with the drop tolerance bisected to match the
    /// generated preconditioner's mean iteration count.
    IcMatched,
    Gcvae,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Jacobi => f.write_str("jacobi"),
            Method::IcDroptol(t) => write!(f, "ic_droptol({t})"),
            Method::IcMatched => f.write_str("ic_matched"),
            Method::Gcvae => f.write_str("gcvae"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "jacobi" => return Ok(Self::Jacobi),
            "gcvae" => return Ok(Self::Gcvae),
            "ic_matched" | "ic-matched" | "matched" => return Ok(Self::IcMatched),
            _ => {}
        }
        for prefix in ["ic_droptol(", "ic("] {
            if let Some(rest) = s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')) {
                let t: f64 = rest
                    .parse()
                    .map_err(|_| Error::Config(format!("bad drop tolerance in '{s}'")))?;
                if !(t >= 0.0) {
                    return Err(Error::Config(format!("drop tolerance must be >= 0 in '{s}'")));
                }
                return Ok(Self::IcDroptol(t));
            }
        }
        Err(Error::Config(format!(
            "unknown method '{s}' (expected jacobi, ic(<droptol>), ic_matched or gcvae)"
        )))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in list.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(list[start..i].parse()?);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !list[start..].trim().is_empty() {
        out.push(list[start..].parse()?);
    }
    if out.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub n: usize,
    pub mean_iterations: f64,
    pub mean_condition: f64,
    pub mean_density: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub method: String,
    pub sample_id: usize,
    /// `max_iter` when the solve did not converge.
    pub iterations: usize,
    pub converged: bool,
    /// The preconditioner could not be built (incomplete factorization breakdown).
    #[serde(default)]
    pub setup_failed: bool,
    pub condition: Option<f64>,
    pub density: f64,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSearch {
    pub droptol: f64,
    pub mean_iterations: f64,
    pub target_iterations: f64,
    /// `|mean - target| / target`.
    pub relative_gap: f64,
    pub within_tolerance: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub tol: f64,
    pub max_iter: usize,
    pub condition_label: String,
    pub rows: Vec<BenchmarkRow>,
    pub samples: Vec<SampleResult>,
    pub matched: Option<MatchedSearch>,
}

impl BenchmarkReport {
    pub fn row(&self, method: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the latent draws used by the generated preconditioner.
    pub z_seed: u64,
    pub compute_condition: bool,
    /// Relative window for the matched search.
    pub match_tolerance: f64,
    pub match_max_steps: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 10_000,
            z_seed: 0,
            compute_condition: true,
            match_tolerance: 0.05,
            match_max_steps: 20,
        }
    }
}

/// Drop-tolerance search interval of the matched mode.
pub const MATCH_DROPTOL_RANGE: (f64, f64) = (1e-8, 1.0);

/// Latent draw for the generated preconditioner of `sample_id`.
pub fn benchmark_latent(z_seed: u64, sample_id: usize, latent_dim: usize) -> Vec<f64> {
    standard_normal(latent_dim, derive_indexed(z_seed, &[sample_id as u64]))
}

fn build(method: Method, s: &ProblemSample, model: Option<&Gcvae>, opts: &BenchOptions) -> Result<Preconditioner> {
    match method {
        Method::Jacobi => jacobi_precond(&s.a),
        Method::IcDroptol(t) => ic_droptol(&s.a, t),
        Method::Gcvae => {
            let model = model.ok_or_else(|| Error::Config("method gcvae requires a trained checkpoint".into()))?;
            let z = benchmark_latent(opts.z_seed, s.id, model.config().latent_dim);
            spai_precond(&model.infer(&s.a, &s.mask, &z)?)
        }
        Method::IcMatched => unreachable!("resolved before building"),
    }
}

fn evaluate(
    method: Method,
    label: &str,
    samples: &[ProblemSample],
    model: Option<&Gcvae>,
    opts: &BenchOptions,
    with_condition: bool,
) -> Result<(BenchmarkRow, Vec<SampleResult>)> {
    let mut results = Vec::with_capacity(samples.len());
    for s in samples {
        let p = match build(method, s, model, opts) {
            Ok(p) => p,
            // Incomplete factorizations can break down even after shifting;
            // such a sample is scored like a solve that never converged.
            Err(Error::NotPositiveDefinite(msg)) => {
                log::warn!("{label}: sample {} preconditioner setup failed: {msg}", s.id);
                results.push(SampleResult {
                    method: label.to_string(),
                    sample_id: s.id,
                    iterations: opts.max_iter,
                    converged: false,
                    setup_failed: true,
                    condition: None,
                    density: 0.0,
                    nnz: 0,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let (_, rep) = pcg(&s.a, &s.b, &p, opts.tol, opts.max_iter)?;
        let iterations = if rep.converged { rep.iterations } else { opts.max_iter };
        if !rep.converged {
            log::warn!(
                "{label}: sample {} did not converge in {} iterations",
                s.id,
                opts.max_iter
            );
        }
        let condition = if with_condition && rep.converged {
            Some(condition_number(&s.a, Some(&p))?)
        } else {
            None
        };
        results.push(SampleResult {
            method: label.to_string(),
            sample_id: s.id,
            iterations,
            converged: rep.converged,
            setup_failed: false,
            condition,
            density: density(&p),
            nnz: p.nnz_cost(),
        });
    }
    let m = results.len() as f64;
    let conds: Vec<f64> = results.iter().filter_map(|r| r.condition).collect();
    let row = BenchmarkRow {
        method: label.to_string(),
        n: samples[0].dim(),
        mean_iterations: results.iter().map(|r| r.iterations as f64).sum::<f64>() / m,
        mean_condition: mean(conds.iter().copied()),
        mean_density: mean(results.iter().filter(|r| !r.setup_failed).map(|r| r.density)),
        sample_count: results.len(),
    };
    Ok((row, results))
}

/// NaN for an empty sequence.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn mean_iterations(t: f64, samples: &[ProblemSample], opts: &BenchOptions) -> Result<f64> {
    let (row, _) = evaluate(Method::IcDroptol(t), "ic_search", samples, None, opts, false)?;
    Ok(row.mean_iterations)
}

/// Log-scale bisection of the drop tolerance until the mean IC iteration count
/// is within `match_tolerance` of `target`.
pub fn match_droptol(samples: &[ProblemSample], target: f64, opts: &BenchOptions) -> Result<MatchedSearch> {
    let gap = |it: f64| (it - target).abs() / target;
    let (mut lo, mut hi) = MATCH_DROPTOL_RANGE;
    let mut best = (hi, mean_iterations(hi, samples, opts)?);
    let mut steps = 0;
    // Smaller drop tolerances keep more fill and take fewer iterations.
    while steps < opts.match_max_steps && gap(best.1) > opts.match_tolerance {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let it = mean_iterations(mid, samples, opts)?;
        if gap(it) < gap(best.1) {
            best = (mid, it);
        }
        if it > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let within = gap(best.1) <= opts.match_tolerance;
    if !within {
        log::warn!(
            "matched search stopped at droptol {:e} with {:.3} iterations against target {target:.3}",
            best.0,
            best.1
        );
    }
    Ok(MatchedSearch {
        droptol: best.0,
        mean_iterations: best.1,
        target_iterations: target,
        relative_gap: gap(best.1),
        within_tolerance: within,
        steps,
    })
}

/// Solves every sample with each method and averages iterations, two-sided
/// condition numbers and densities.
pub fn run_benchmark(
    samples: &[ProblemSample],
    methods: &[Method],
    model: Option<&Gcvae>,
    opts: &BenchOptions,
) -> Result<BenchmarkReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("benchmark needs at least one sample".into()))?;
    if samples.iter().any(|s| s.dim() != first.dim()) {
        return Err(Error::InvalidInput("benchmark samples must share one dimension".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config("tol must be positive and max_iter >= 1".into()));
    }
    let needs_model = methods.iter().any(|m| matches!(m, Method::Gcvae | Method::IcMatched));
    if needs_model && model.is_none() {
        return Err(Error::Config(
            "methods gcvae and ic_matched require a trained checkpoint".into(),
        ));
    }
    let mut report = BenchmarkReport {
        tol: opts.tol,
        max_iter: opts.max_iter,
        condition_label: CONDITION_LABEL.to_string(),
        rows: Vec::new(),
        samples: Vec::new(),
        matched: None,
    };
    let mut gcvae_row: Option<BenchmarkRow> = None;
    for &method in methods {
        let (row, results) = match method {
            Method::IcMatched => {
                let target = match &gcvae_row {
                    Some(r) => r.mean_iterations,
                    None => {
                        let (r, _) = evaluate(Method::Gcvae, "gcvae", samples, model, opts, false)?;
                        r.mean_iterations
                    }
                };
                let search = match_droptol(samples, target, opts)?;
                let out = evaluate(
                    Method::IcDroptol(search.droptol),
                    "ic_matched",
                    samples,
                    None,
                    opts,
                    opts.compute_condition,
                )?;
                report.matched = Some(search);
                out
            }
            m => evaluate(m, &m.to_string(), samples, model, opts, opts.compute_condition)?,
        };
        if method == Method::Gcvae {
            gcvae_row = Some(row.clone());
        }
        report.rows.push(row);
        report.samples.extend(results);
    }
    Ok(report)
}

pub fn write_rows_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

pub fn write_report_json(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
