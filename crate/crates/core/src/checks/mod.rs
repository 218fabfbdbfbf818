//! Property batteries with per-check margins, grouped into suites.
//!
//! Every check records a slack `allowed - observed`; a battery passes when
//! no slack is negative and no solve failed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::et::EtOptions;
use crate::sturm::SturmOptions;

mod measure;
mod spaces;

/// Named groups of batteries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Axioms,
    Bounds,
    Limits,
    Conic,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Axioms, Suite::Bounds, Suite::Limits, Suite::Conic, Suite::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Axioms => "axioms",
            Suite::Bounds => "bounds",
            Suite::Limits => "limits",
            Suite::Conic => "conic",
            Suite::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown suite {s:?}; expected axioms, bounds, limits, conic or oracle")))
    }
}

/// `(id, name, suite)` of every battery.
pub const CRITERIA: [(u32, &str, Suite); 13] = [
    (1, "closed-form H0 agrees with numeric minimization", Suite::Oracle),
    (2, "Dirac pairs under hk", Suite::Oracle),
    (3, "mass homogeneity", Suite::Axioms),
    (4, "bounds chain hk / ghk / qpl", Suite::Bounds),
    (5, "permuted copies vanish", Suite::Axioms),
    (6, "alternating minimization vs grid oracle", Suite::Oracle),
    (7, "triangle inequality on oracle values", Suite::Axioms),
    (8, "bounded-Lipschitz duality", Suite::Oracle),
    (9, "pure-entropy limit of n d costs", Suite::Limits),
    (10, "balanced limit of n U_1 entropies", Suite::Limits),
    (11, "conic lift bound", Suite::Conic),
    (12, "delta-configuration and rescaling bounds", Suite::Bounds),
    (13, "scaling vs barrier on KL problems", Suite::Oracle),
];

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub sturm: SturmOptions,
    /// Grid step of the brute-force oracle.
    pub oracle_step: f64,
    /// Seed for the random instances.
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { sturm: SturmOptions::default(), oracle_step: 1.0 / 128.0, seed: 0x5eed }
    }
}

impl CheckOptions {
    pub(crate) fn et(&self) -> &EtOptions {
        &self.sturm.et
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    /// Smallest `allowed - observed` over all cases.
    pub worst_margin: f64,
    pub worst_case: String,
    /// Failing cases and solver errors, at most [`MAX_FAILURES`] of them.
    pub failures: Vec<String>,
    pub seconds: f64,
}

pub const MAX_FAILURES: usize = 12;

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<48} cases {:>4}  worst margin {:+.3e}  ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.cases,
            self.worst_margin,
            self.seconds
        )
    }
}

/// Accumulates slacks for one battery.
pub(crate) struct Tally {
    cases: usize,
    worst: f64,
    worst_case: String,
    failures: Vec<String>,
    failed: bool,
}

impl Tally {
    pub fn new() -> Self {
        Self { cases: 0, worst: f64::INFINITY, worst_case: String::new(), failures: Vec::new(), failed: false }
    }

    /// Records `allowed - observed` for one case.
    pub fn slack(&mut self, case: impl FnOnce() -> String, slack: f64) {
        self.cases += 1;
        let bad = !(slack >= 0.0);
        if bad || slack < self.worst {
            let label = case();
            if bad {
                self.failed = true;
                if self.failures.len() < MAX_FAILURES {
                    self.failures.push(format!("{label}: margin {slack:+.3e}"));
                }
            }
            if !(slack >= self.worst) {
                self.worst = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
                self.worst_case = label;
            }
        }
    }

    /// Records `observed <= allowed`.
    pub fn at_most(&mut self, case: impl FnOnce() -> String, observed: f64, allowed: f64) {
        self.slack(case, allowed - observed);
    }

    pub fn error(&mut self, case: impl FnOnce() -> String, err: &Error) {
        self.cases += 1;
        self.failed = true;
        if self.failures.len() < MAX_FAILURES {
            self.failures.push(format!("{}: {err}", case()));
        }
    }

    /// Unwraps `r`, recording the error on failure.
    pub fn ok<T>(&mut self, case: impl FnOnce() -> String, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(case, &e);
                None
            }
        }
    }

    fn finish(self, id: u32, seconds: f64) -> CheckOutcome {
        let (_, name, suite) = CRITERIA[id as usize - 1];
        CheckOutcome {
            id,
            name: name.to_string(),
            suite,
            passed: !self.failed && self.cases > 0,
            cases: self.cases,
            worst_margin: self.worst,
            worst_case: self.worst_case,
            failures: self.failures,
            seconds,
        }
    }
}

/// Runs battery `id` (1 to 13).
pub fn run_criterion(id: u32, options: &CheckOptions) -> Result<CheckOutcome> {
    let start = std::time::Instant::now();
    let mut t = Tally::new();
    match id {
        1 => measure::closed_form_h0(&mut t, options),
        2 => measure::dirac_hk(&mut t, options),
        3 => {
            measure::homogeneity(&mut t, options);
            spaces::homogeneity(&mut t, options);
        }
        4 => {
            measure::bounds_chain(&mut t, options);
            spaces::bounds_chain(&mut t, options);
        }
        5 => spaces::permuted_copies(&mut t, options),
        6 => spaces::oracle_gap(&mut t, options),
        7 => spaces::triangle(&mut t, options),
        8 => measure::bl_duality(&mut t, options),
        9 => spaces::pure_entropy_limit(&mut t, options),
        10 => spaces::balanced_limit(&mut t, options),
        11 => spaces::conic_bound(&mut t, options),
        12 => spaces::a_priori_bounds(&mut t, options),
        13 => measure::scaling_vs_barrier(&mut t, options),
        _ => return Err(Error::Domain(format!("no battery with id {id}; ids run from 1 to {}", CRITERIA.len()))),
    }
    Ok(t.finish(id, start.elapsed().as_secs_f64()))
}

/// Runs every battery of `suite`, in id order.
pub fn run_suite(suite: Suite, options: &CheckOptions) -> Vec<CheckOutcome> {
    CRITERIA
        .iter()
        .filter(|c| c.2 == suite)
        .map(|c| run_criterion(c.0, options).expect("listed ids are valid"))
        .collect()
}
