//! Closed-form bound calculators and the two counting processes that
//! drive the adversarial analysis: the adversary advantage N(t) and the
//! coalescing-opportunity walk J(m).
//!
//! Every calculator is a pure function. Asymptotic constants are never
//! invented here: the envelopes that need one take it from a calibration
//! artifact measured against the walk oracle (see [`Calibration`]).

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("corrupt count {b} must be below node count {n}")]
    BadCorruptCount { n: u64, b: u64 },
    #[error("p = {0} is degenerate for the conditional transition formulas")]
    DegenerateP(f64),
    #[error("opportunity walk updated on an empty round")]
    EmptyRoundUpdate,
}

/// Adversary advantage N(t): a reflected counter over rounds.
/// +1 when only corrupt nodes mined, down one (floored at 0) when only
/// honest nodes mined, unchanged otherwise. Bounds how far the adversary's
/// best chain can run ahead of the honest best.
#[derive(Debug, Clone, Default)]
pub struct AdvantageProcess {
    value: u32,
}

impl AdvantageProcess {
    pub fn new() -> Self {
        AdvantageProcess { value: 0 }
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    /// Feed one round's honest and corrupt block counts.
    pub fn update(&mut self, nb: u32, ab: u32) -> u32 {
        if ab > 0 && nb == 0 {
            self.value += 1;
        } else if nb > 0 && ab == 0 {
            self.value = self.value.saturating_sub(1);
        }
        self.value
    }
}

/// Coalescing-opportunity walk J(m), indexed by nonempty rounds only:
/// +1 on honest-only rounds, -1 on corrupt-only rounds, flat on mixed
/// ones. May go negative.
#[derive(Debug, Clone, Default)]
pub struct OpportunityWalk {
    value: i64,
    nonempty_rounds: u64,
}

impl OpportunityWalk {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn nonempty_rounds(&self) -> u64 {
        self.nonempty_rounds
    }

    /// Feed one nonempty round. Calling this on an empty round is a
    /// contract violation.
    pub fn update(&mut self, nb: u32, ab: u32) -> Result<i64, BoundsError> {
        if nb == 0 && ab == 0 {
            return Err(BoundsError::EmptyRoundUpdate);
        }
        self.nonempty_rounds += 1;
        if ab == 0 {
            self.value += 1;
        } else if nb == 0 {
            self.value -= 1;
        }
        Ok(self.value)
    }
}

/// Exact rational (n-2b) / (2(n-b)^2): the necessary upper bound on p
/// under the honest-majority assumption. Negative when b > n/2, which
/// signals infeasibility.
pub fn honest_majority_p_bound(n: u64, b: u64) -> Result<Ratio<i128>, BoundsError> {
    if b >= n {
        return Err(BoundsError::BadCorruptCount { n, b });
    }
    let n = n as i128;
    let b = b as i128;
    Ok(Ratio::new(n - 2 * b, 2 * (n - b) * (n - b)))
}

/// Conditional step probabilities of the opportunity walk on nonempty
/// rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionProbs {
    /// P(J steps up): only honest mined, given someone mined.
    pub p_plus: f64,
    /// P(J steps down): only corrupt mined, given someone mined.
    pub p_minus: f64,
    /// P(J moves at all) = p_plus + p_minus.
    pub p_star: f64,
}

/// Evaluates p_{+1} = (1-p)^b (1-(1-p)^{n-b}) / (1-(1-p)^n) and its mirror.
pub fn transition_probs(n: u64, b: u64, p: f64) -> Result<TransitionProbs, BoundsError> {
    if b >= n {
        return Err(BoundsError::BadCorruptCount { n, b });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::DegenerateP(p));
    }
    let q = 1.0 - p;
    let nonempty = 1.0 - q.powi(n as i32);
    let p_plus = q.powi(b as i32) * (1.0 - q.powi((n - b) as i32)) / nonempty;
    let p_minus = (1.0 - q.powi(b as i32)) * q.powi((n - b) as i32) / nonempty;
    Ok(TransitionProbs { p_plus, p_minus, p_star: p_plus + p_minus })
}

/// Outcome of a bound whose hypotheses may fail: the value is still
/// reported, but flagged vacuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged<T> {
    pub value: T,
    pub vacuous: bool,
}

/// High-probability lower bound on J(M) over M nonempty rounds:
/// J(M) >= (p_plus - p_minus) M / 4 with the stated failure terms.
/// Vacuous when p_plus <= p_minus (corrupt majority direction).
pub fn opportunity_lower_bound(tp: TransitionProbs, m: u64) -> Flagged<(f64, f64)> {
    let delta = tp.p_plus - tp.p_minus;
    let m = m as f64;
    let threshold = delta * m / 4.0;
    let success = 1.0
        - (-delta * delta * m / (16.0 * tp.p_star)).exp()
        - (-tp.p_star * tp.p_star * m / 2.0).exp();
    Flagged { value: (threshold, success.clamp(0.0, 1.0)), vacuous: delta <= 0.0 }
}

/// All the retained quantities of the adversarial inconsistency theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub n: u64,
    pub b: u64,
    pub p: f64,
    pub probs: TransitionProbs,
    /// beta = (n-b) p / (2 (3np)^2).
    pub beta: f64,
    /// Smallest M covered by the theorem at failure probability epsilon.
    pub m_star: f64,
    pub epsilon: f64,
    /// Violated side condition n >= 2 ln(4 / (epsilon beta)) makes the
    /// theorem vacuous at these parameters.
    pub side_condition_ok: bool,
}

/// beta = (n-b)p / (2(3np)^2).
pub fn beta(n: u64, b: u64, p: f64) -> f64 {
    let np = n as f64 * p;
    (n - b) as f64 * p / (2.0 * (3.0 * np) * (3.0 * np))
}

/// Computes beta and M* = max{ 4 ln(1/eps)/(p*)^2, 4/(beta (p+ - p-)),
/// (16 p*/(p+ - p-)^2) ln(4/eps) }, plus the side condition.
pub fn inconsistency_theorem_params(
    n: u64,
    b: u64,
    p: f64,
    epsilon: f64,
) -> Result<Flagged<BoundParams>, BoundsError> {
    let probs = transition_probs(n, b, p)?;
    let beta = beta(n, b, p);
    let delta = probs.p_plus - probs.p_minus;
    let vacuous = delta <= 0.0 || beta <= 0.0;
    let m_star = if vacuous {
        f64::INFINITY
    } else {
        let a = 4.0 * (1.0 / epsilon).ln() / (probs.p_star * probs.p_star);
        let b_term = 4.0 / (beta * delta);
        let c = 16.0 * probs.p_star / (delta * delta) * (4.0 / epsilon).ln();
        a.max(b_term).max(c)
    };
    let side_condition_ok = !vacuous && n as f64 >= 2.0 * (4.0 / (epsilon * beta)).ln();
    Ok(Flagged {
        value: BoundParams { n, b, p, probs, beta, m_star, epsilon, side_condition_ok },
        vacuous: vacuous || !side_condition_ok,
    })
}

/// The theorem's success probability at window M:
/// 1 - exp(-(p*)^2 M/2) - exp(-(p+ - p-)^2 M/(16 p*)) - (2/beta) exp(-(n-b)/2),
/// clamped to [0, 1] and flagged vacuous when the raw value is negative.
pub fn theorem_success_probability(params: &BoundParams, m: u64) -> Flagged<f64> {
    let tp = params.probs;
    let delta = tp.p_plus - tp.p_minus;
    let m = m as f64;
    let raw = 1.0
        - (-tp.p_star * tp.p_star * m / 2.0).exp()
        - (-delta * delta * m / (16.0 * tp.p_star)).exp()
        - (2.0 / params.beta) * (-((params.n - params.b) as f64) / 2.0).exp();
    Flagged { value: raw.clamp(0.0, 1.0), vacuous: raw <= 0.0 || delta <= 0.0 }
}

/// Calibrated asymptotic constants, measured once against the walk oracle
/// and protocol Monte Carlo and stored as a versioned artifact. Acceptance
/// envelopes use these; no absolute constants are invented.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Calibration {
    pub schema_version: u32,
    /// Least-squares through-origin slope of mean inconsistency vs n at
    /// p = 1 (protocol runs).
    pub p1_slope: f64,
    /// Envelope constant for the low-p inconsistency term 1/(np e^{-np}).
    pub lowp_slack: f64,
    /// Envelope constant for the high-p term 2np/(1 - 2 e^{-np/3}).
    pub highp_slack: f64,
    /// Exact expected absorption time of the 4-walker partition chain.
    pub walker4_exact_mean: f64,
    /// Measured mean walk coalescence times keyed by n (as strings for
    /// JSON friendliness).
    pub walk_means: std::collections::BTreeMap<String, f64>,
}

impl Calibration {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }
}

/// Expected common-prefix envelope at p = 1: (t+1 - c n, t+1) with the
/// calibrated slope c. For n = 1 the chain never forks and the envelope
/// collapses to the point t+1.
pub fn expected_prefix_p1(cal: &Calibration, n: u64, t: u64) -> (f64, f64) {
    let upper = (t + 1) as f64;
    if n <= 1 {
        return (upper, upper);
    }
    (upper - cal.p1_slope * n as f64, upper)
}

/// Expected-growth decomposition for general p: the exact growth term
/// 1 + (1-(1-p)^n) t and the regime-appropriate calibrated slack, with the
/// regime cut at p = 4 ln 2 / n.
pub fn expected_growth_general_p(cal: &Calibration, n: u64, p: f64, t: u64) -> (f64, f64) {
    let q = 1.0 - p;
    let growth = 1.0 + (1.0 - q.powi(n as i32)) * t as f64;
    let np = n as f64 * p;
    let slack = if p < 4.0 * std::f64::consts::LN_2 / n as f64 {
        cal.lowp_slack / (np * (-np).exp())
    } else {
        cal.highp_slack * 2.0 * np / (1.0 - 2.0 * (-np / 3.0).exp())
    };
    (growth, slack)
}
