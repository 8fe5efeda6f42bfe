//! ε-piece detection and the C(ε, μ, ρ) condition.
//!
//! A piece is a prefix U of a relator R (R ≡ UV) such that some relator R′
//! has a prefix U′ (R′ ≡ U′V′) with U′ = Y·U·Z in the base group for words
//! |Y|, |Z| ≤ ε, and Y·R·Y⁻¹ ≠ R′. Because relator sets are symmetrized,
//! prefixes of members range over all cyclic occurrences, so at ε = 0 this
//! coincides with the classical notion of a piece (common prefix of two
//! distinct symmetrized relators).
//!
//! Equality in the base group is a pluggable decider: free equality at
//! stage 0, a Dehn normal-form decider at stage 1. The stage-0 path runs
//! on rolling hashes over an index of all relator prefixes so the scan
//! stays near-linear in total relator length for fixed ε.

use std::collections::HashMap;

use num::BigRational;
use num::{BigInt, Zero};
use serde::Serialize;

use crate::error::GscError;
use crate::words::{free_reduce, Letter, ReducedWord, SymmetrizedSet};

/// Equality/geodesity decider for the base group a stage quotients.
pub trait GroupOracle {
    fn equal(&self, a: &ReducedWord, b: &ReducedWord) -> bool;

    /// Whether the reduced word is geodesic in the base group.
    fn is_geodesic(&self, w: &ReducedWord) -> bool;

    /// Free-group deciders enable the exact hashed fast path.
    fn is_free(&self) -> bool {
        false
    }
}

/// Stage-0 base group: F₄ itself. Reduced words are normal forms.
pub struct FreeOracle;

impl GroupOracle for FreeOracle {
    fn equal(&self, a: &ReducedWord, b: &ReducedWord) -> bool {
        a == b
    }

    fn is_geodesic(&self, _w: &ReducedWord) -> bool {
        true
    }

    fn is_free(&self) -> bool {
        true
    }
}

/// Default bound on ε for witness enumeration: candidate conjugating words
/// grow as 8·7^{ε−1} per side.
pub const DEFAULT_EPS_CAP: usize = 3;

#[derive(Clone, Debug, Serialize)]
pub struct PieceWitness {
    /// relator carrying the piece as a prefix
    pub r: String,
    /// partner relator
    pub r_prime: String,
    /// the piece U (prefix of r)
    pub u: String,
    /// prefix U′ of r_prime with U′ = Y·U·Z
    pub u_prime: String,
    pub y: String,
    pub z: String,
    pub u_len: usize,
    pub epsilon: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub geodesic_check: bool,
    pub relator_length_min: usize,
    pub min_length_ok: bool,
    pub pieces_ok: bool,
    /// max |U|/|R| over per-relator maximal witnesses, as "p/q"
    pub max_piece_ratio: String,
    pub worst_witness: Option<PieceWitness>,
}

/// All reduced words of length ≤ eps, empty word first.
fn conjugator_candidates(eps: usize) -> Vec<ReducedWord> {
    let mut out = vec![ReducedWord::empty()];
    for n in 1..=eps {
        out.extend(crate::words::enumerate_reduced_words(n));
    }
    out
}

/// Finds, for every relator R in the set, a witness for the longest prefix
/// of R that is an ε-piece (if any). Witness completeness is exact when the
/// decider is exact. Results are ordered by relator.
pub fn find_epsilon_pieces(
    set: &SymmetrizedSet,
    epsilon: usize,
    oracle: &dyn GroupOracle,
    eps_cap: usize,
) -> Result<Vec<PieceWitness>, GscError> {
    if epsilon > eps_cap {
        return Err(GscError::Config(format!(
            "epsilon {epsilon} above enumeration cap {eps_cap}: candidate conjugators grow as 8*7^(eps-1) per side"
        )));
    }
    if set.is_empty() {
        return Ok(Vec::new());
    }
    let best = if oracle.is_free() {
        best_pieces_free(set, epsilon)
    } else {
        best_pieces_generic(set, epsilon, oracle)
    };
    Ok(best
        .into_iter()
        .enumerate()
        .filter_map(|(r_idx, hit)| {
            hit.map(|h| {
                let r = &set.words()[r_idx];
                let rp = &set.words()[h.partner];
                PieceWitness {
                    r: r.to_string(),
                    r_prime: rp.to_string(),
                    u: r.factor(0, h.u_len).to_string(),
                    u_prime: rp.factor(0, h.up_len).to_string(),
                    y: h.y.to_string(),
                    z: h.z.to_string(),
                    u_len: h.u_len,
                    epsilon,
                }
            })
        })
        .collect())
}

struct Hit {
    u_len: usize,
    partner: usize,
    up_len: usize,
    y: ReducedWord,
    z: ReducedWord,
}

const HASH_BASE: u64 = 0x9E37_79B9_7F4A_7C15 | 1;

fn letter_val(l: Letter) -> u64 {
    l.code() as u64 + 1
}

fn hash_letters(ls: &[Letter]) -> u64 {
    ls.iter()
        .fold(0u64, |h, &l| h.wrapping_mul(HASH_BASE).wrapping_add(letter_val(l)))
}

/// Exact stage-0 scan. For each partner R′, prefix U′ and conjugators Y, Z,
/// the piece candidate is U = reduce(Y⁻¹·U′·Z⁻¹); free equality makes
/// "U′ = YUZ in the group" the same as literal equality of reduced words,
/// so U just has to be a literal prefix of some R. Candidates are hashed
/// and matched against a prefix index; hash hits are verified letterwise.
fn best_pieces_free(set: &SymmetrizedSet, epsilon: usize) -> Vec<Option<Hit>> {
    let words = set.words();
    let n = words.len();
    let max_len = set.max_len();
    let conj = conjugator_candidates(epsilon);

    // pow[i] = HASH_BASE^i
    let mut pow = vec![1u64; max_len + 2 * epsilon + 2];
    for i in 1..pow.len() {
        pow[i] = pow[i - 1].wrapping_mul(HASH_BASE);
    }

    // prefix hashes per word
    let pref: Vec<Vec<u64>> = words
        .iter()
        .map(|w| {
            let mut v = Vec::with_capacity(w.len() + 1);
            v.push(0u64);
            for &l in w.letters() {
                let h = v.last().unwrap().wrapping_mul(HASH_BASE).wrapping_add(letter_val(l));
                v.push(h);
            }
            v
        })
        .collect();

    // index of every nonempty prefix: (len, hash) -> word indices
    let mut index: HashMap<(u32, u64), Vec<u32>> = HashMap::new();
    for (i, w) in words.iter().enumerate() {
        for m in 1..=w.len() {
            index.entry((m as u32, pref[i][m])).or_default().push(i as u32);
        }
    }

    // condition 3 exclusions: for carrier r and conjugator Y, the partner
    // equal to Y·R·Y⁻¹ is not allowed
    let excluded: Vec<Vec<Option<u32>>> = words
        .iter()
        .map(|r| {
            conj.iter()
                .map(|y| {
                    let conj_r = y.concat(r).concat(&y.inverse());
                    set.index_of(&conj_r).map(|i| i as u32)
                })
                .collect()
        })
        .collect();

    let mut best: Vec<Option<Hit>> = (0..n).map(|_| None).collect();
    let mut best_len = vec![0usize; n];

    let mut scratch: Vec<Letter> = Vec::new();
    for rp_idx in 0..n {
        let rp = &words[rp_idx];
        let rp_letters = rp.letters();
        for (y_idx, y) in conj.iter().enumerate() {
            let y_inv = y.inverse();
            // cancellation between Y⁻¹ and the front of R′
            let mut c_left = 0usize;
            while c_left < y_inv.len()
                && c_left < rp_letters.len()
                && y_inv.letters()[y_inv.len() - 1 - c_left] == rp_letters[c_left].inverse()
            {
                c_left += 1;
            }
            for z in &conj {
                let z_inv = z.inverse();
                for m in 1..=rp_letters.len() {
                    // U = reduce(Y⁻¹ · R′[..m] · Z⁻¹)
                    let (u_len, u_hash) = if m <= 2 * epsilon + 2 {
                        scratch.clear();
                        scratch.extend_from_slice(y_inv.letters());
                        scratch.extend_from_slice(&rp_letters[..m]);
                        scratch.extend_from_slice(z_inv.letters());
                        let u = free_reduce(scratch.iter().copied());
                        (u.len(), hash_letters(u.letters()))
                    } else {
                        let cl = c_left.min(m);
                        // cancellation between the back of R′[..m] and Z⁻¹
                        let mut cr = 0usize;
                        while cr < z_inv.len()
                            && cr < m - cl
                            && rp_letters[m - 1 - cr] == z_inv.letters()[cr].inverse()
                        {
                            cr += 1;
                        }
                        let y_rem = &y_inv.letters()[..y_inv.len() - cl];
                        let z_rem = &z_inv.letters()[cr..];
                        let mid = m - cl - cr;
                        let mid_hash = pref[rp_idx][m - cr]
                            .wrapping_sub(pref[rp_idx][cl].wrapping_mul(pow[mid]));
                        let mut h = hash_letters(y_rem);
                        h = h.wrapping_mul(pow[mid]).wrapping_add(mid_hash);
                        h = h
                            .wrapping_mul(pow[z_rem.len()])
                            .wrapping_add(hash_letters(z_rem));
                        (y_rem.len() + mid + z_rem.len(), h)
                    };
                    if u_len == 0 || u_len > max_len {
                        continue;
                    }
                    let Some(bucket) = index.get(&(u_len as u32, u_hash)) else {
                        continue;
                    };
                    let mut u_letters: Option<ReducedWord> = None;
                    for &cand in bucket {
                        let r_idx = cand as usize;
                        if u_len <= best_len[r_idx] {
                            continue;
                        }
                        if excluded[r_idx][y_idx] == Some(rp_idx as u32) {
                            continue;
                        }
                        // verify the hash hit letterwise
                        let u = u_letters.get_or_insert_with(|| {
                            free_reduce(
                                y_inv
                                    .letters()
                                    .iter()
                                    .chain(&rp_letters[..m])
                                    .chain(z_inv.letters())
                                    .copied(),
                            )
                        });
                        if words[r_idx].letters()[..u_len] != *u.letters() {
                            continue;
                        }
                        best_len[r_idx] = u_len;
                        best[r_idx] = Some(Hit {
                            u_len,
                            partner: rp_idx,
                            up_len: m,
                            y: y.clone(),
                            z: z.clone(),
                        });
                    }
                }
            }
        }
    }
    best
}

/// Generic decider path: honest loop over (R, |U|, R′, |U′|, Y, Z) with
/// group equality. Quadratic-and-worse; intended for small stage-1 sets.
fn best_pieces_generic(
    set: &SymmetrizedSet,
    epsilon: usize,
    oracle: &dyn GroupOracle,
) -> Vec<Option<Hit>> {
    let words = set.words();
    let conj = conjugator_candidates(epsilon);
    let mut best: Vec<Option<Hit>> = (0..words.len()).map(|_| None).collect();
    for (r_idx, r) in words.iter().enumerate() {
        'ulen: for u_len in (1..=r.len()).rev() {
            let u = r.factor(0, u_len);
            for (rp_idx, rp) in words.iter().enumerate() {
                for y in &conj {
                    let conj_r = y.concat(r).concat(&y.inverse());
                    if oracle.equal(&conj_r, rp) {
                        continue;
                    }
                    for z in &conj {
                        let yuz = y.concat(&u).concat(z);
                        for up_len in 1..=rp.len() {
                            if oracle.equal(&rp.factor(0, up_len), &yuz) {
                                best[r_idx] = Some(Hit {
                                    u_len,
                                    partner: rp_idx,
                                    up_len,
                                    y: y.clone(),
                                    z: z.clone(),
                                });
                                break 'ulen;
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Checks the three clauses of C(ε, μ, ρ): relators geodesic, |R| ≥ ρ,
/// every ε-piece of R shorter than μ·|R|.
pub fn check_condition_c(
    set: &SymmetrizedSet,
    epsilon: usize,
    mu: &BigRational,
    rho: usize,
    oracle: &dyn GroupOracle,
    eps_cap: usize,
) -> Result<ConditionReport, GscError> {
    let witnesses = find_epsilon_pieces(set, epsilon, oracle, eps_cap)?;
    let geodesic_check = set.words().iter().all(|w| oracle.is_geodesic(w));
    let relator_length_min = set.min_len();
    let min_length_ok = !set.is_empty() && relator_length_min >= rho;

    let mut max_ratio = BigRational::zero();
    let mut worst: Option<PieceWitness> = None;
    let mut pieces_ok = true;
    for w in witnesses {
        let r_len = w.r.len();
        let this = ratio(w.u_len, r_len);
        if ratio(w.u_len, 1) >= mu * ratio(r_len, 1) {
            pieces_ok = false;
        }
        if this > max_ratio {
            max_ratio = this;
            worst = Some(w);
        }
    }
    Ok(ConditionReport {
        passed: geodesic_check && min_length_ok && pieces_ok,
        geodesic_check,
        relator_length_min,
        min_length_ok,
        pieces_ok,
        max_piece_ratio: crate::schedule::rational_to_string(&max_ratio),
        worst_witness: worst,
    })
}

/// Classical C′(λ): the ε = 0, ρ = 0 specialization over the free group.
pub fn check_classical_metric(
    set: &SymmetrizedSet,
    lambda: &BigRational,
) -> Result<ConditionReport, GscError> {
    check_condition_c(set, 0, lambda, 0, &FreeOracle, DEFAULT_EPS_CAP)
}
