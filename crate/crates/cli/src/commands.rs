//! The three subcommands.

use std::path::{Path, PathBuf};

use etdist_core::checks::{run_criterion, run_suite, CheckOptions, CheckOutcome, Suite, CRITERIA};
use etdist_core::et::EtOptions;
use etdist_core::sturm::{brute_force_sturm, sturm_distance, SturmOptions, SturmProblem};
use etdist_core::{et_distance, MetricMeasureSpace, Preset};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::json::{self, Ext};
use crate::record::{Mode, ResultRecord};
use crate::space_file;

/// Solver settings collected from the flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub tol: Option<f64>,
    pub seeds: Option<usize>,
    pub max_iter: Option<usize>,
    pub epsilon_schedule: Option<Vec<f64>>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub oracle_step: Option<f64>,
}

impl Settings {
    pub fn et(&self) -> EtOptions {
        let mut o = EtOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let Some(s) = &self.epsilon_schedule {
            o.epsilon_schedule = s.clone();
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        o
    }

    pub fn sturm(&self) -> SturmOptions {
        let mut o = SturmOptions { et: self.et(), ..SturmOptions::default() };
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(n) = self.seeds {
            o.restarts = n;
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        o
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if let Some(t) = self.tol {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("--tol must lie in (0, 1), got {t}"));
            }
        }
        if self.max_iter == Some(0) {
            return bad("--max-iter must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("--jobs must be positive".into());
        }
        if let Some(s) = &self.epsilon_schedule {
            if s.is_empty() || s.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return bad("--epsilon-schedule needs positive finite values".into());
            }
        }
        if let Some(h) = self.oracle_step {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("--oracle-step must be positive, got {h}"));
            }
        }
        Ok(())
    }

    /// Runs `f` on a pool of `--jobs` threads (all cores by default).
    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        let pool = b.build().map_err(|e| CliError::Solver(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

fn same_space(a: &MetricMeasureSpace, b: &MetricMeasureSpace) -> Result<(), CliError> {
    if a.dist() != b.dist() {
        return Err(CliError::Validation("measure mode needs both files to carry the same distance matrix".into()));
    }
    Ok(())
}

fn solve(a: &MetricMeasureSpace, b: &MetricMeasureSpace, preset: Preset, mode: Mode, s: &Settings) -> Result<ResultRecord, CliError> {
    match mode {
        Mode::Measure => {
            same_space(a, b)?;
            Ok(ResultRecord::measure(&et_distance(a.dist(), a.mass(), b.mass(), preset, &s.et())?))
        }
        Mode::Sturm => {
            let options = s.sturm();
            let problem = SturmProblem::new(a.clone(), b.clone(), preset)?;
            let solution = sturm_distance(&problem, &options)?;
            let mut record = ResultRecord::sturm(&solution);
            if let Some(step) = s.oracle_step {
                if a.len() <= 2 && b.len() <= 2 {
                    let oracle = brute_force_sturm(&problem, step, &options)?;
                    let (v, o) = (solution.value.value(), oracle.value.value());
                    record.diagnostics["oracle_value"] = serde_json::to_value(Ext(o)).expect("number");
                    record.diagnostics["oracle_gap"] = if v.is_finite() && o.is_finite() { (v - o).into() } else { 0.0.into() };
                } else {
                    log::warn!("--oracle-step ignored: the grid oracle needs at most two points per space");
                }
            }
            Ok(record)
        }
    }
}

pub fn dist(a: &Path, b: &Path, preset: Preset, mode: Mode, verify: bool, s: &Settings) -> Result<String, CliError> {
    let (sa, sb) = (space_file::load(a)?, space_file::load(b)?);
    let record = s.in_pool(|| solve(&sa, &sb, preset, mode, s))??;
    if verify {
        record.verify(&sa, &sb)?;
        log::info!("record verified");
    }
    Ok(json::to_string(&record))
}

#[derive(Debug, Serialize)]
pub struct PairError {
    pub i: usize,
    pub j: usize,
    pub a: String,
    pub b: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct GramMatrix {
    pub preset: String,
    pub mode: Mode,
    pub labels: Vec<String>,
    /// `null` where the pair failed; see the error list.
    pub matrix: Vec<Vec<Option<Ext>>>,
    pub version: String,
}

/// `*.json` files of `dir`, sorted by file name.
pub fn corpus(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort_by(|x, y| x.file_name().cmp(&y.file_name()));
    if files.len() < 2 {
        return Err(CliError::Validation(format!("{} holds {} space files, need at least 2", dir.display(), files.len())));
    }
    Ok(files)
}

pub fn gram(dir: &Path, preset: Preset, mode: Mode, s: &Settings) -> Result<(GramMatrix, Vec<PairError>), CliError> {
    let files = corpus(dir)?;
    let spaces: Vec<MetricMeasureSpace> = files.iter().map(|f| space_file::load(f)).collect::<Result<_, _>>()?;
    if mode == Mode::Measure {
        for (f, sp) in files.iter().zip(&spaces).skip(1) {
            same_space(&spaces[0], sp).map_err(|e| e.context(&f.display().to_string()))?;
        }
    }
    let labels: Vec<String> =
        files.iter().map(|f| f.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    let n = files.len();
    let jobs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let results: Vec<Result<f64, CliError>> = s.in_pool(|| {
        jobs.par_iter().map(|&(i, j)| solve(&spaces[i], &spaces[j], preset, mode, s).map(|r| r.value.0)).collect()
    })?;

    let mut matrix = vec![vec![None; n]; n];
    let mut errors = Vec::new();
    for (&(i, j), r) in jobs.iter().zip(results) {
        match r {
            Ok(v) => {
                matrix[i][j] = Some(Ext(v));
                matrix[j][i] = Some(Ext(v));
            }
            Err(e) => {
                log::warn!("{} vs {}: {e}", labels[i], labels[j]);
                errors.push(PairError { i, j, a: labels[i].clone(), b: labels[j].clone(), error: e.to_string() });
            }
        }
    }
    let out = GramMatrix { preset: preset.name(), mode, labels, matrix, version: env!("CARGO_PKG_VERSION").to_string() };
    Ok((out, errors))
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

/// `suite` is a suite name, `all`, or a battery id.
pub fn check(suite: &str, s: &Settings) -> Result<CheckReport, CliError> {
    let mut options = CheckOptions { sturm: s.sturm(), ..CheckOptions::default() };
    if let Some(h) = s.oracle_step {
        options.oracle_step = h;
    }
    if let Some(seed) = s.seed {
        options.seed = seed;
    }
    let checks = s.in_pool(|| -> Result<Vec<CheckOutcome>, CliError> {
        if suite == "all" {
            return Ok(CRITERIA.iter().map(|c| run_criterion(c.0, &options).expect("listed ids are valid")).collect());
        }
        if let Ok(id) = suite.parse::<u32>() {
            return Ok(vec![run_criterion(id, &options)?]);
        }
        Ok(run_suite(suite.parse::<Suite>()?, &options))
    })??;
    for c in &checks {
        log::info!("{c}");
    }
    Ok(CheckReport { suite: suite.to_string(), passed: checks.iter().all(|c| c.passed), checks })
}
