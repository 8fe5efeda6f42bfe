//! Forbidden-subword extraction and census bounds.
//!
//! From each stage's symmetrized relators whose length lies strictly in
//! the band (ρ, σ), the forbidden set collects every factor of length
//! k = ⌊√μ·σ⌋. The census checks that relator counts and piece-set sizes
//! stay under the exponential bounds 8^{μσ}, σ·8^{μσ} and 8^{k/2}; all
//! comparisons are exact (cross-powering for rational exponents,
//! bit-length pruning when exponents are astronomically large).

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::{One, Signed};
use serde::Serialize;

use crate::error::GscError;
use crate::schedule::{rational_to_string, GradedSchedule, Rat};
use crate::words::{ReducedWord, SymmetrizedSet};

/// Stage data as consumed by the forbidden/census operations.
pub struct StageRelators {
    pub relators: SymmetrizedSet,
    pub mu: Rat,
    pub rho: Rat,
    pub sigma: usize,
}

/// k = ⌊√μ · σ⌋ computed exactly: with μ = p/q in lowest terms,
/// ⌊√(p/q)·σ⌋ = ⌊√(p·q·σ²)⌋ div q.
pub fn piece_length(mu: &Rat, sigma: usize) -> usize {
    assert!(!mu.is_negative(), "mu must be nonnegative");
    let p = mu.numer();
    let q = mu.denom();
    let s = BigInt::from(sigma);
    let n: BigInt = p * q * &s * &s;
    let root = n.sqrt();
    let k = root / q;
    usize::try_from(&k).expect("piece length fits usize")
}

/// Where a forbidden word came from.
#[derive(Clone, Debug, Serialize)]
pub struct SourceRef {
    pub stage: usize,
    pub relator: String,
    pub offset: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ForbiddenSet {
    /// sorted, deduplicated forbidden words
    pub words: Vec<ReducedWordSer>,
    pub by_length: BTreeMap<usize, usize>,
    /// per-stage contribution counts (distinct words first seen at that stage)
    pub per_stage: BTreeMap<usize, usize>,
    /// per-stage piece length k_i
    pub stage_piece_len: BTreeMap<usize, usize>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    source: BTreeMap<ReducedWord, SourceRef>,
}

/// Letter-syntax wrapper so artifacts serialize words as plain strings.
#[derive(Clone, Debug, Serialize)]
pub struct ReducedWordSer(pub String);

impl ForbiddenSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter_words(&self) -> impl Iterator<Item = ReducedWord> + '_ {
        self.source.keys().cloned()
    }

    pub fn word_list(&self) -> Vec<ReducedWord> {
        self.source.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source_of(&self, w: &ReducedWord) -> Option<&SourceRef> {
        self.source.get(w)
    }
}

/// Builds the union over stages of all length-k_i factors of stage-i
/// relators whose length is strictly inside the stage band (ρ_i, σ_i).
pub fn build_forbidden_set(stages: &[StageRelators]) -> Result<ForbiddenSet, GscError> {
    let mut fs = ForbiddenSet::empty();
    for (i, st) in stages.iter().enumerate() {
        let k = piece_length(&st.mu, st.sigma);
        fs.stage_piece_len.insert(i, k);
        if k == 0 {
            fs.warnings
                .push(format!("stage {i}: piece length floor(sqrt(mu)*sigma) = 0, stage contributes nothing"));
            continue;
        }
        let mut contributed = 0usize;
        let mut any_long_enough = false;
        for r in st.relators.words() {
            let len_rat = Rat::from_integer(BigInt::from(r.len()));
            if !(len_rat > st.rho && r.len() < st.sigma) {
                continue;
            }
            if r.len() < k {
                continue;
            }
            any_long_enough = true;
            for off in 0..=r.len() - k {
                let w = r.factor(off, k);
                if let std::collections::btree_map::Entry::Vacant(e) = fs.source.entry(w) {
                    e.insert(SourceRef {
                        stage: i,
                        relator: r.to_string(),
                        offset: off,
                    });
                    contributed += 1;
                }
            }
        }
        if !any_long_enough && !st.relators.is_empty() {
            fs.warnings
                .push(format!("stage {i}: piece length {k} exceeds every in-band relator length"));
        }
        fs.per_stage.insert(i, contributed);
    }
    fs.words = fs.source.keys().map(|w| ReducedWordSer(w.to_string())).collect();
    fs.by_length = BTreeMap::new();
    for w in fs.source.keys() {
        *fs.by_length.entry(w.len()).or_insert(0) += 1;
    }
    Ok(fs)
}

/// Exact comparison count^q ≤ base^p without materializing huge powers:
/// bit-length bounds first, exact big-integer powers only when they are
/// small enough to matter.
fn pow_le(count: u64, q: &BigInt, base: u64, p: &BigInt) -> bool {
    if p.is_negative() {
        return count == 0;
    }
    if count <= 1 {
        return true;
    }
    let bits_hi = BigInt::from(64 - count.leading_zeros()); // ceil bits
    let bits_lo = &bits_hi - 1; // 2^{bits_lo} <= count
    let base_bits = BigInt::from(63 - (base as u64).leading_zeros()); // exact for powers of two
    debug_assert!(base.is_power_of_two());
    // count^q <= 2^{q*bits_hi};  count^q >= 2^{q*bits_lo}
    let rhs_bits = p * base_bits;
    if q * bits_hi <= rhs_bits {
        return true;
    }
    if q * bits_lo > rhs_bits {
        return false;
    }
    // borderline: exponents are necessarily moderate here
    let qe = u32::try_from(q).expect("borderline exponent fits u32");
    let pe = u32::try_from(p).expect("borderline exponent fits u32");
    BigInt::from(count).pow(qe) <= BigInt::from(base).pow(pe)
}

#[derive(Clone, Debug, Serialize)]
pub struct BandCensus {
    pub stage: usize,
    pub band_lo: String,
    pub band_hi: usize,
    /// distinct relator cores (up to rotation and inversion) strictly in band
    pub core_count: usize,
    /// cores sitting exactly on a band endpoint, reported separately
    pub boundary_count: usize,
    /// the exponent μσ of the bound 8^{μσ}, as a rational string
    pub mu_sigma: String,
    pub bound_ok: bool,
}

/// Lemma-3.1-style census: at most 8^{μσ} relator cores strictly inside
/// the band (ρ, σ).
pub fn count_relations_band(stage: usize, st: &StageRelators) -> BandCensus {
    let mut core_count = 0usize;
    let mut boundary_count = 0usize;
    let sigma_rat = Rat::from_integer(BigInt::from(st.sigma));
    for core in st.relators.cores() {
        let l = Rat::from_integer(BigInt::from(core.len()));
        if l > st.rho && l < sigma_rat {
            core_count += 1;
        } else if l == st.rho || l == sigma_rat {
            boundary_count += 1;
        }
    }
    let mu_sigma = &st.mu * &sigma_rat;
    let bound_ok = pow_le(core_count as u64, mu_sigma.denom(), 8, mu_sigma.numer());
    BandCensus {
        stage,
        band_lo: rational_to_string(&st.rho),
        band_hi: st.sigma,
        core_count,
        boundary_count,
        mu_sigma: rational_to_string(&mu_sigma),
        bound_ok,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PieceBoundCheck {
    pub stage: usize,
    pub piece_len: usize,
    pub piece_count: usize,
    /// |ℬ| ≤ σ·8^{μσ}
    pub sigma_bound_ok: bool,
    /// |ℬ| ≤ 8^{k/2}
    pub half_bound_ok: bool,
}

/// Lemma-3.2-style piece census for one stage's contribution to the
/// forbidden set.
pub fn check_piece_bound(fs: &ForbiddenSet, stage: usize, st: &StageRelators) -> PieceBoundCheck {
    let piece_count = fs.per_stage.get(&stage).copied().unwrap_or(0);
    let k = fs
        .stage_piece_len
        .get(&stage)
        .copied()
        .unwrap_or_else(|| piece_length(&st.mu, st.sigma));
    let sigma_rat = Rat::from_integer(BigInt::from(st.sigma));
    let mu_sigma = &st.mu * &sigma_rat;
    // count <= sigma * 8^{mu*sigma}  <=>  count^q <= sigma^q * 8^p; checked
    // via (count/sigma rounded up)^q <= 8^p when count > sigma, else trivially
    let sigma_bound_ok = if piece_count <= st.sigma {
        // 8^{mu*sigma} >= 1, so count <= sigma suffices
        true
    } else {
        // count <= sigma * 8^{p/q}  <=>  count^q <= sigma^q * 8^p
        let q = mu_sigma.denom();
        let p = mu_sigma.numer();
        match (u32::try_from(q), u32::try_from(p)) {
            (Ok(qe), Ok(pe)) if pe <= 4096 && qe <= 64 => {
                BigInt::from(piece_count).pow(qe)
                    <= BigInt::from(st.sigma).pow(qe) * BigInt::from(8u8).pow(pe)
            }
            // enormous exponents: a sufficient coarse check on count/sigma
            _ => pow_le(piece_count.div_ceil(st.sigma) as u64, q, 8, p),
        }
    };
    // count <= 8^{k/2}  <=>  count^2 <= 8^k
    let half_bound_ok = pow_le(piece_count as u64, &BigInt::from(2), 8, &BigInt::from(k));
    PieceBoundCheck {
        stage,
        piece_len: k,
        piece_count,
        sigma_bound_ok,
        half_bound_ok,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub bands: Vec<BandCensus>,
    pub pieces: Vec<PieceBoundCheck>,
    pub passed: bool,
}

pub fn census(stages: &[StageRelators], fs: &ForbiddenSet) -> CensusReport {
    let bands: Vec<BandCensus> = stages
        .iter()
        .enumerate()
        .map(|(i, st)| count_relations_band(i, st))
        .collect();
    let pieces: Vec<PieceBoundCheck> = stages
        .iter()
        .enumerate()
        .map(|(i, st)| check_piece_bound(fs, i, st))
        .collect();
    let passed = bands.iter().all(|b| b.bound_ok)
        && pieces.iter().all(|p| p.sigma_bound_ok && p.half_bound_ok);
    CensusReport { bands, pieces, passed }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub min_len_ok: bool,
    pub min_len_found: Option<usize>,
    pub count_ok: bool,
    pub count_violations: Vec<(usize, usize)>,
    pub gap_ok: bool,
    pub gap_violations: Vec<(usize, usize)>,
    pub passed: bool,
}

/// Verifies the hypotheses a forbidden set must satisfy to feed the
/// avoidance counting machinery: (a) every length ≥ min_len, (b) per-length
/// count ≤ base^{n/2}, (c) distinct lengths differ by more than gap.
pub fn check_n_axioms(fs: &ForbiddenSet, min_len: usize, count_base: u64, gap: usize) -> AxiomReport {
    let min_len_found = fs.by_length.keys().next().copied();
    let min_len_ok = min_len_found.map_or(true, |m| m >= min_len);
    let mut count_violations = Vec::new();
    for (&n, &c) in &fs.by_length {
        if !pow_le(c as u64 * c as u64, &BigInt::one(), count_base, &BigInt::from(n)) {
            count_violations.push((n, c));
        }
    }
    let lengths: Vec<usize> = fs.by_length.keys().copied().collect();
    let mut gap_violations = Vec::new();
    for pair in lengths.windows(2) {
        if pair[1] - pair[0] <= gap {
            gap_violations.push((pair[0], pair[1]));
        }
    }
    let count_ok = count_violations.is_empty();
    let gap_ok = gap_violations.is_empty();
    AxiomReport {
        min_len_ok,
        min_len_found,
        count_ok,
        count_violations,
        gap_ok,
        gap_violations,
        passed: min_len_ok && count_ok && gap_ok,
    }
}

/// Symbolic form of the axioms for paper-scale schedules where relators are
/// never materialized: checks ⌊√μ_i⌋σ_i-derived piece lengths against the
/// min-length and gap requirements directly from the stage constants.
pub fn check_n_axioms_symbolic(s: &GradedSchedule, min_len: &BigInt, gap: &BigInt) -> Vec<String> {
    let mut issues = Vec::new();
    let mut ks: Vec<BigInt> = Vec::new();
    for (i, st) in s.stages.iter().enumerate() {
        // k_i = floor(sqrt(mu_i) * sigma_i) over exact rationals
        let num = st.mu.numer() * st.mu.denom() * st.sigma.numer() * st.sigma.numer();
        let den = st.mu.denom() * st.sigma.denom();
        if num.is_negative() {
            issues.push(format!("stage {i}: negative mu*sigma^2"));
            continue;
        }
        let k = num.sqrt() / den;
        if &k < min_len {
            issues.push(format!("stage {i}: piece length {k} below {min_len}"));
        }
        ks.push(k);
    }
    ks.sort();
    ks.dedup();
    for pair in ks.windows(2) {
        if &pair[1] - &pair[0] <= *gap {
            issues.push(format!("piece lengths {} and {} differ by <= {gap}", pair[0], pair[1]));
        }
    }
    issues
}

/// Scans the source map and confirms every forbidden word really occurs in
/// its recorded relator at the recorded offset. Used by tests and the
/// pipeline's self-check.
pub fn verify_sources(fs: &ForbiddenSet) -> Result<(), GscError> {
    for (w, src) in &fs.source {
        let r = ReducedWord::parse(&src.relator, false)
            .map_err(|e| GscError::Config(format!("bad source relator: {e}")))?;
        if src.offset + w.len() > r.len()
            || r.letters()[src.offset..src.offset + w.len()] != *w.letters()
        {
            return Err(GscError::Config(format!(
                "forbidden word {w} does not occur in {r} at offset {}",
                src.offset
            )));
        }
    }
    Ok(())
}
