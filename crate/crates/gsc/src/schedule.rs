//! Graded parameter schedules and their validity conditions.
//!
//! A schedule carries per-stage constants (ε_n, μ_n, ρ_n, σ_n). The
//! validator checks the grading conditions Q₂/Q₃ together with the
//! inequality ledger items (i), (ii), (vi), (vii) and reports every
//! violation instead of short-circuiting. All comparisons are exact
//! rational arithmetic; thresholds like 10⁻⁸ leave no room for
//! floating-point slop.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::GscError;
use crate::words::SymmetrizedSet;

pub type Rat = BigRational;

/// Parses a rational literal: integers (`42`), fractions (`3/200`),
/// decimals (`0.01`), and scientific integers (`2e10`, `1.6e18`).
pub fn parse_rational(s: &str) -> Result<Rat, GscError> {
    let s = s.trim();
    let bad = || GscError::BadRational(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, i64::from_str(e).map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!(
        "{}{}",
        if int_part.is_empty() { "0" } else { int_part },
        frac_part
    );
    let n = BigInt::from_str(&digits).map_err(|_| bad())?;
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10u8);
    Ok(if shift >= 0 {
        Rat::from_integer(n * ten.pow(shift as u32))
    } else {
        Rat::new(n, ten.pow((-shift) as u32))
    })
}

pub fn rat_from_u64(v: u64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// Renders a rational as `p/q` (or just `p` when integral) for artifacts.
pub fn rational_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Per-stage constants. `sigma` is the max relator length of the stage;
/// for symbolic (paper-scale) schedules it is supplied rather than derived
/// from materialized relators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    #[serde(with = "rat_serde")]
    pub epsilon: Rat,
    #[serde(with = "rat_serde")]
    pub mu: Rat,
    #[serde(with = "rat_serde")]
    pub rho: Rat,
    #[serde(with = "rat_serde")]
    pub sigma: Rat,
}

/// serde helper: rationals as strings so artifacts stay exact and stable.
pub mod rat_serde {
    use super::*;
    use serde::de::Error;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedSchedule {
    #[serde(with = "rat_serde")]
    pub alpha: Rat,
    #[serde(with = "rat_serde", rename = "K")]
    pub k: Rat,
    pub stages: Vec<StageParams>,
}

/// Validation mode. Paper mode hard-codes α = 0.01, K = 10⁶ and the
/// paper-scale thresholds; scaled mode takes the schedule's own α and K
/// and configurable thresholds so desk-scale instances can be checked.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Paper,
    Scaled {
        /// upper bound for ε_i/ρ_i (paper: 10⁻⁸)
        eps_rho_bound: Rat,
        /// growth factor g in ρ_{i+1} > g·8·σ_i (paper: 10⁸)
        rho_growth: Rat,
    },
}

impl Mode {
    pub fn paper_alpha() -> Rat {
        parse_rational("0.01").unwrap()
    }

    pub fn paper_k() -> Rat {
        rat_from_u64(1_000_000)
    }
}

/// Identifies which rule a violation comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleId {
    /// ε_n ≥ 1 (definition of a graded sequence)
    EpsMin,
    /// μ_n ∈ (0, 1), ρ_n > 0, σ_n > 0
    ParamRange,
    /// Q₂: μ_n ≤ α
    Q2Alpha,
    /// Q₂: μ_n ρ_n > K ε_n (strict)
    Q2MuRho,
    /// finite proxy for μ_n = o(1): μ strictly decreasing
    MuMonotone,
    /// Q₃: ε_{n+1} > 8 σ_n
    Q3,
    /// (i) ε_i / ρ_i below threshold
    P9I,
    /// (ii) ρ_{i+1} > g·8·σ_i
    P9II,
    /// (vi) μ_n ρ_n > K ε_n > K
    P9VI,
    /// (vii) σ_n > K / μ_n
    P9VII,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::EpsMin => "EPS_MIN",
            RuleId::ParamRange => "PARAM_RANGE",
            RuleId::Q2Alpha => "Q2_ALPHA",
            RuleId::Q2MuRho => "Q2_MU_RHO",
            RuleId::MuMonotone => "MU_MONOTONE",
            RuleId::Q3 => "Q3",
            RuleId::P9I => "P9_I",
            RuleId::P9II => "P9_II",
            RuleId::P9VI => "P9_VI",
            RuleId::P9VII => "P9_VII",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    pub stage: usize,
    pub lhs: String,
    pub rhs: String,
    pub message: String,
}

pub type ViolationList = Vec<Violation>;

fn violation(rule: RuleId, stage: usize, lhs: &Rat, rhs: &Rat, message: impl Into<String>) -> Violation {
    Violation {
        rule,
        stage,
        lhs: rational_to_string(lhs),
        rhs: rational_to_string(rhs),
        message: message.into(),
    }
}

/// Checks every stage against the grading conditions; collects all
/// violations in deterministic order (by stage, then rule).
pub fn validate_schedule(s: &GradedSchedule, mode: &Mode) -> Result<ViolationList, GscError> {
    if s.stages.is_empty() {
        return Err(GscError::EmptySchedule);
    }
    let (alpha, k) = match mode {
        Mode::Paper => (Mode::paper_alpha(), Mode::paper_k()),
        Mode::Scaled { .. } => (s.alpha.clone(), s.k.clone()),
    };
    let (eps_rho_bound, rho_growth) = match mode {
        Mode::Paper => (
            Rat::new(BigInt::one(), BigInt::from(100_000_000u64)),
            rat_from_u64(100_000_000),
        ),
        Mode::Scaled {
            eps_rho_bound,
            rho_growth,
        } => (eps_rho_bound.clone(), rho_growth.clone()),
    };

    let mut out = Vec::new();
    let one = Rat::one();
    let eight = rat_from_u64(8);

    for (i, st) in s.stages.iter().enumerate() {
        if st.epsilon < one {
            out.push(violation(RuleId::EpsMin, i, &st.epsilon, &one, "epsilon_n >= 1 required"));
        }
        if !st.mu.is_positive() || st.mu >= one {
            out.push(violation(RuleId::ParamRange, i, &st.mu, &one, "mu_n must lie in (0,1)"));
        }
        if !st.rho.is_positive() {
            out.push(violation(RuleId::ParamRange, i, &st.rho, &Rat::zero(), "rho_n must be positive"));
        }
        if !st.sigma.is_positive() {
            out.push(violation(RuleId::ParamRange, i, &st.sigma, &Rat::zero(), "sigma_n must be positive"));
        }

        // Q2: mu_n <= alpha and mu_n rho_n > K eps_n (strict)
        if st.mu > alpha {
            out.push(violation(RuleId::Q2Alpha, i, &st.mu, &alpha, "Q2: mu_n <= alpha required"));
        }
        let mu_rho = &st.mu * &st.rho;
        let k_eps = &k * &st.epsilon;
        if mu_rho <= k_eps {
            out.push(violation(RuleId::Q2MuRho, i, &mu_rho, &k_eps, "Q2: mu_n*rho_n > K*eps_n must be strict"));
        }

        // (i): eps_i / rho_i < bound
        if st.rho.is_positive() {
            let ratio = &st.epsilon / &st.rho;
            if ratio >= eps_rho_bound {
                out.push(violation(RuleId::P9I, i, &ratio, &eps_rho_bound, "(i): eps_i/rho_i below threshold required"));
            }
        }

        // (vi): mu_n rho_n > K eps_n > K (first half coincides with Q2; the
        // K eps_n > K half is the extra content and needs eps_n > 1... only
        // when K > 0; recorded as one rule)
        if !(mu_rho > k_eps && k_eps > k) {
            out.push(violation(RuleId::P9VI, i, &k_eps, &k, "(vi): mu_n*rho_n > K*eps_n > K required"));
        }

        // (vii): sigma_n > K / mu_n
        if st.mu.is_positive() {
            let k_over_mu = &k / &st.mu;
            if st.sigma <= k_over_mu {
                out.push(violation(RuleId::P9VII, i, &st.sigma, &k_over_mu, "(vii): sigma_n > K/mu_n required"));
            }
        }

        if i + 1 < s.stages.len() {
            let next = &s.stages[i + 1];
            // mu strictly decreasing (finite proxy for mu_n = o(1))
            if next.mu >= st.mu {
                out.push(violation(RuleId::MuMonotone, i + 1, &next.mu, &st.mu, "mu must be strictly decreasing across stages (o(1) proxy)"));
            }
            // Q3: eps_{n+1} > 8 sigma_n
            let rhs = &eight * &st.sigma;
            if next.epsilon <= rhs {
                out.push(violation(RuleId::Q3, i + 1, &next.epsilon, &rhs, "Q3: eps_{n+1} > 8*sigma_n required"));
            }
            // (ii): rho_{i+1} > g * 8 * sigma_i
            let rhs = &rho_growth * &eight * &st.sigma;
            if next.rho <= rhs {
                out.push(violation(RuleId::P9II, i + 1, &next.rho, &rhs, "(ii): rho_{i+1} > g*8*sigma_i required"));
            }
        }
    }
    Ok(out)
}

/// σ_n = max relator length of the stage.
pub fn sigma_of(relators: &SymmetrizedSet) -> Result<usize, GscError> {
    if relators.is_empty() {
        return Err(GscError::Config("sigma_of: empty relator set".into()));
    }
    Ok(relators.max_len())
}

/// Certified hyperbolicity constant for a stage quotient: δ ≤ 4σ.
pub fn hyperbolicity_bound(sigma: usize) -> usize {
    4 * sigma
}

/// Radius below which the quotient map is injective on balls:
/// any nontrivial kernel element has length > ρ/2, so every word of
/// length ≤ ⌈ρ/2⌉ − 1 maps injectively and geodesically.
pub fn injectivity_lower_bound(rho: &Rat) -> usize {
    let half = rho / rat_from_u64(2);
    let ceil = half.ceil().to_integer();
    let v: i64 = i64::try_from(&ceil).unwrap_or(i64::MAX);
    (v - 1).max(0) as usize
}
