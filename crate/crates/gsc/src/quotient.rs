//! Working in a quotient stage: Dehn reduction, triviality and geodesity
//! deciders, and the tree-side verification passes (convexity, relator
//! overlap, thinness survey).
//!
//! Everything here is exact only when the presentation satisfies the
//! classical metric condition C′(1/6); otherwise the deciders degrade to
//! certified one-sided answers or an explicit `Unknown`.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num::rational::BigRational;
use num::{BigInt, ToPrimitive, Zero};
use serde::Serialize;

use crate::cancellation::{check_classical_metric, GroupOracle};
use crate::error::GscError;
use crate::schedule::{self, rational_to_string, Rat};
use crate::tree::{dense_choices, reach_depths, segment_words, PrunedTree};
use crate::words::{free_reduce, seeded_rng, ReducedWord, SymmetrizedSet};

/// A stage presentation ⟨a,b,c,d | relators⟩ together with the parameters
/// it was built under and the verified strength of the deciders it admits.
#[derive(Clone, Debug)]
pub struct StagePresentation {
    pub relators: SymmetrizedSet,
    pub epsilon: usize,
    pub mu: Rat,
    pub rho: Rat,
    /// classical metric bound verified at construction (1/6 when the
    /// Dehn algorithm is an exact triviality decider)
    pub metric_lambda: Option<Rat>,
    /// true iff C′(1/6) was verified, making `is_trivial` exact
    pub dehn_exact: bool,
}

impl StagePresentation {
    /// Builds the presentation and verifies C′(1/6) for it, recording
    /// whether Dehn's algorithm is an exact triviality decider.
    pub fn new(relators: SymmetrizedSet, epsilon: usize, mu: Rat, rho: Rat) -> Self {
        let sixth = BigRational::new(BigInt::from(1), BigInt::from(6));
        let dehn_exact = if relators.is_empty() {
            true // free group: free reduction alone decides
        } else {
            check_classical_metric(&relators, &sixth)
                .map(|r| r.passed)
                .unwrap_or(false)
        };
        let metric_lambda = if dehn_exact { Some(sixth) } else { None };
        StagePresentation {
            relators,
            epsilon,
            mu,
            rho,
            metric_lambda,
            dehn_exact,
        }
    }

    pub fn min_relator_len(&self) -> usize {
        if self.relators.is_empty() {
            0
        } else {
            self.relators.min_len()
        }
    }

    /// Radius of the ball on which short words are certified geodesic by
    /// the half-relator length bound on nontrivial kernel elements.
    pub fn injectivity_lower_bound(&self) -> usize {
        schedule::injectivity_lower_bound(&self.rho)
    }

    /// Radius r with 4r ≤ min |R|: inside it, every reduced word is
    /// geodesic and is the unique geodesic for its element (any equation
    /// between two such words would be a kernel element of length
    /// ≤ min |R| / 2, impossible under C′(1/6)).
    pub fn greendlinger_ball(&self) -> usize {
        self.min_relator_len() / 4
    }
}

/// One replayable Dehn step: at `pos` in the current word, the factor `u`
/// (a prefix of a relator R = u·v with 2|u| > |R|) was replaced by `v⁻¹`.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DehnStep {
    pub pos: usize,
    pub u: String,
    pub replacement: String,
    pub len_before: usize,
    pub len_after: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DehnTrace {
    pub steps: Vec<DehnStep>,
}

/// Longest match of `w[i..]` against a prefix of `r`.
fn prefix_match(w: &ReducedWord, i: usize, r: &ReducedWord) -> usize {
    let wl = w.letters();
    let rl = r.letters();
    let mut m = 0;
    while i + m < wl.len() && m < rl.len() && wl[i + m] == rl[m] {
        m += 1;
    }
    m
}

/// One Dehn step on `w` if any relator factor longer than half its relator
/// occurs; picks the longest such factor, leftmost on ties, then the least
/// relator. Returns the new word and the step taken.
fn dehn_step(w: &ReducedWord, set: &SymmetrizedSet) -> Option<(ReducedWord, DehnStep)> {
    // best = (u_len, pos, relator index)
    let mut best: Option<(usize, usize, usize)> = None;
    for (ri, r) in set.words().iter().enumerate() {
        for i in 0..w.len() {
            let m = prefix_match(w, i, r);
            if 2 * m > r.len() {
                let cand = (m, i, ri);
                best = match best {
                    None => Some(cand),
                    Some((bm, bi, bri)) => {
                        if (m, std::cmp::Reverse(i), std::cmp::Reverse(ri))
                            > (bm, std::cmp::Reverse(bi), std::cmp::Reverse(bri))
                        {
                            Some(cand)
                        } else {
                            Some((bm, bi, bri))
                        }
                    }
                };
            }
        }
    }
    let (m, i, ri) = best?;
    let r = &set.words()[ri];
    let v_inv = r.factor(m, r.len() - m).inverse();
    let next = splice(w, i, m, &v_inv);
    let step = DehnStep {
        pos: i,
        u: w.factor(i, m).to_string(),
        replacement: v_inv.to_string(),
        len_before: w.len(),
        len_after: next.len(),
    };
    Some((next, step))
}

fn splice(w: &ReducedWord, pos: usize, cut: usize, insert: &ReducedWord) -> ReducedWord {
    let letters = w.letters();
    free_reduce(
        letters[..pos]
            .iter()
            .copied()
            .chain(insert.letters().iter().copied())
            .chain(letters[pos + cut..].iter().copied()),
    )
}

/// Dehn's algorithm: repeatedly replace a more-than-half relator factor by
/// the inverse of the remainder until none is left. The length strictly
/// decreases at every step, so this terminates. Exact triviality decider
/// when the presentation satisfies C′(1/6).
pub fn dehn_reduce(w: &ReducedWord, p: &StagePresentation) -> (ReducedWord, DehnTrace) {
    let mut cur = w.clone();
    let mut trace = DehnTrace::default();
    while let Some((next, step)) = dehn_step(&cur, &p.relators) {
        debug_assert!(next.len() < cur.len());
        trace.steps.push(step);
        cur = next;
    }
    (cur, trace)
}

/// Replays a trace against `w`, verifying at each step that the replaced
/// factor occurs where the trace claims, that factor·replacement⁻¹ is a
/// relator, and that the recorded lengths match. Returns the final word.
pub fn replay_trace(
    w: &ReducedWord,
    trace: &DehnTrace,
    set: &SymmetrizedSet,
) -> Result<ReducedWord, GscError> {
    let mut cur = w.clone();
    for (k, step) in trace.steps.iter().enumerate() {
        let fail = |msg: String| GscError::Generation(format!("trace step {k}: {msg}"));
        let u = ReducedWord::parse(&step.u, false)?;
        let v_inv = ReducedWord::parse(&step.replacement, false)?;
        if cur.len() != step.len_before {
            return Err(fail(format!(
                "length {} does not match recorded {}",
                cur.len(),
                step.len_before
            )));
        }
        if step.pos + u.len() > cur.len() || cur.factor(step.pos, u.len()) != u {
            return Err(fail(format!("factor {} not found at {}", step.u, step.pos)));
        }
        let relator = u.concat(&v_inv.inverse());
        if !set.contains(&relator) {
            return Err(fail(format!("{relator} is not a relator")));
        }
        if 2 * u.len() <= relator.len() {
            return Err(fail("replaced factor is not more than half a relator".into()));
        }
        cur = splice(&cur, step.pos, u.len(), &v_inv);
        if cur.len() != step.len_after {
            return Err(fail(format!(
                "length {} does not match recorded {}",
                cur.len(),
                step.len_after
            )));
        }
    }
    Ok(cur)
}

/// Does `w` represent the identity of the stage quotient? Exact iff
/// `p.dehn_exact`; otherwise `true` answers are still certified (the trace
/// replays to the empty word) while `false` may be inconclusive.
pub fn is_trivial(w: &ReducedWord, p: &StagePresentation) -> bool {
    dehn_reduce(w, p).0.is_empty()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SearchVerdict {
    Trivial,
    Nontrivial {
        /// true when the verdict is certified: either the closure under
        /// the length cap was complete (no rewrite was truncated), or the
        /// presentation is C′(1/6) and the cap covers |w|, in which case a
        /// trivial word admits a strictly length-decreasing path to the
        /// empty word that the search would have found.
        conclusive: bool,
    },
    Unknown,
}

/// Breadth-first closure of `w` under relator rewrites u ↦ v⁻¹ (R = u·v,
/// u any prefix of a symmetrized relator, including the empty prefix),
/// shortest words first, discarding words longer than `length_cap` and
/// giving up after `node_budget` expansions.
pub fn bounded_search_oracle(
    w: &ReducedWord,
    p: &StagePresentation,
    length_cap: usize,
    node_budget: usize,
) -> SearchVerdict {
    if w.is_empty() {
        return SearchVerdict::Trivial;
    }
    if w.len() > length_cap {
        return SearchVerdict::Unknown;
    }
    let mut visited: HashSet<ReducedWord> = HashSet::new();
    // bucket queue by length: always expand a currently-shortest word
    let mut buckets: Vec<VecDeque<ReducedWord>> = vec![VecDeque::new(); length_cap + 1];
    visited.insert(w.clone());
    buckets[w.len()].push_back(w.clone());
    let mut pending = 1usize;
    let mut truncated = false;
    let mut expanded = 0usize;
    while pending > 0 {
        let len = (0..buckets.len()).find(|&l| !buckets[l].is_empty()).unwrap();
        let cur = buckets[len].pop_front().unwrap();
        pending -= 1;
        expanded += 1;
        if expanded > node_budget {
            return SearchVerdict::Unknown;
        }
        for r in p.relators.words() {
            for u_len in 0..=r.len() {
                let v_inv = r.factor(u_len, r.len() - u_len).inverse();
                let positions: Vec<usize> = if u_len == 0 {
                    (0..=cur.len()).collect()
                } else {
                    cur.occurrences(r.factor(0, u_len).letters())
                };
                for i in positions {
                    let next = splice(&cur, i, u_len, &v_inv);
                    if next.len() > length_cap {
                        truncated = true;
                        continue;
                    }
                    if next.is_empty() {
                        return SearchVerdict::Trivial;
                    }
                    if visited.insert(next.clone()) {
                        buckets[next.len()].push_back(next);
                        pending += 1;
                    }
                }
            }
        }
    }
    let conclusive = !truncated || (p.dehn_exact && length_cap >= w.len());
    SearchVerdict::Nontrivial { conclusive }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GeodesicVerdict {
    Geodesic { method: String },
    NotGeodesic { witness: String },
    Unknown { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeodesicMode {
    /// cheap one-sided tests only; never enumerates
    Filter,
    /// full decision by enumeration of shorter words, refused when the
    /// count 8·7^(|w|−2) exceeds the cap
    Exact { cap: u64 },
}

/// Number of reduced words of length n, 8·7^(n−1).
fn reduced_word_count(n: usize) -> Option<u64> {
    if n == 0 {
        return Some(1);
    }
    let mut c: u64 = 8;
    for _ in 1..n {
        c = c.checked_mul(7)?;
    }
    Some(c)
}

/// If `w` contains a factor that is more than half of some relator, return
/// a strictly shorter word equal to `w` in the quotient, with its equality
/// certified by Dehn-reducing the difference to the empty word.
fn half_relator_witness(w: &ReducedWord, p: &StagePresentation) -> Option<ReducedWord> {
    let (next, step) = dehn_step(w, &p.relators)?;
    debug_assert!(step.len_after < step.len_before);
    debug_assert!(is_trivial(&w.concat(&next.inverse()), p));
    Some(next)
}

/// Is `w` geodesic (shortest in its quotient class)?
///
/// Filter mode applies the injectivity-radius bound and the half-relator
/// shortening test and otherwise answers `Unknown`. Exact mode decides by
/// enumeration of all shorter reduced words unless a certified fast path
/// applies first; it errors if the enumeration would exceed the cap, and
/// answers `Unknown` when the triviality decider itself is inexact.
pub fn is_geodesic(
    w: &ReducedWord,
    p: &StagePresentation,
    mode: GeodesicMode,
) -> Result<GeodesicVerdict, GscError> {
    if w.is_empty() {
        return Ok(GeodesicVerdict::Geodesic {
            method: "empty".into(),
        });
    }
    match mode {
        GeodesicMode::Filter => {
            if w.len() <= p.injectivity_lower_bound() {
                return Ok(GeodesicVerdict::Geodesic {
                    method: "injectivity_radius".into(),
                });
            }
            if let Some(shorter) = half_relator_witness(w, p) {
                return Ok(GeodesicVerdict::NotGeodesic {
                    witness: shorter.to_string(),
                });
            }
            Ok(GeodesicVerdict::Unknown {
                reason: "no cheap certificate applies".into(),
            })
        }
        GeodesicMode::Exact { cap } => {
            if p.dehn_exact && w.len() <= p.greendlinger_ball() {
                return Ok(GeodesicVerdict::Geodesic {
                    method: "greendlinger_ball".into(),
                });
            }
            if let Some(shorter) = half_relator_witness(w, p) {
                return Ok(GeodesicVerdict::NotGeodesic {
                    witness: shorter.to_string(),
                });
            }
            let worst = reduced_word_count(w.len().saturating_sub(1));
            match worst {
                Some(c) if c <= cap => {}
                _ => {
                    return Err(GscError::BudgetExhausted(format!(
                        "exact geodesic check for |w| = {} needs {} candidate words, cap is {cap}",
                        w.len(),
                        worst.map_or("overflow".into(), |c| c.to_string()),
                    )));
                }
            }
            if !p.dehn_exact {
                return Ok(GeodesicVerdict::Unknown {
                    reason: "triviality decider is not exact for this presentation".into(),
                });
            }
            for n in (0..w.len()).rev() {
                for v in crate::words::enumerate_reduced_words(n) {
                    if is_trivial(&w.concat(&v.inverse()), p) {
                        return Ok(GeodesicVerdict::NotGeodesic {
                            witness: v.to_string(),
                        });
                    }
                }
            }
            Ok(GeodesicVerdict::Geodesic {
                method: "enumeration".into(),
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SegmentFailure {
    pub segment: String,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub max_len: usize,
    pub segments_checked: usize,
    pub geodesic: usize,
    pub unique: usize,
    pub unknown: usize,
    pub geodesic_failures: Vec<SegmentFailure>,
    pub uniqueness_failures: Vec<SegmentFailure>,
    /// segments certified per method name
    pub methods: BTreeMap<String, usize>,
    /// true iff no failure was found (Unknown segments do not fail)
    pub passed: bool,
}

/// Checks every tree path segment of length ≤ `max_len` for geodesity and
/// geodesic uniqueness in the quotient. Cap exhaustion downgrades a
/// segment to `unknown` rather than failing it.
pub fn verify_tree_convexity(
    t: &PrunedTree<'_>,
    p: &StagePresentation,
    max_len: usize,
    cap: u64,
) -> ConvexityReport {
    let segments = segment_words(t, max_len);
    let mut report = ConvexityReport {
        max_len,
        segments_checked: segments.len(),
        geodesic: 0,
        unique: 0,
        unknown: 0,
        geodesic_failures: Vec::new(),
        uniqueness_failures: Vec::new(),
        methods: BTreeMap::new(),
        passed: true,
    };
    for q in &segments {
        let mut known = true;
        match is_geodesic(q, p, GeodesicMode::Exact { cap }) {
            Ok(GeodesicVerdict::Geodesic { method }) => {
                report.geodesic += 1;
                *report.methods.entry(method).or_insert(0) += 1;
            }
            Ok(GeodesicVerdict::NotGeodesic { witness }) => {
                report.passed = false;
                report.geodesic_failures.push(SegmentFailure {
                    segment: q.to_string(),
                    witness,
                });
                continue;
            }
            Ok(GeodesicVerdict::Unknown { .. }) | Err(_) => {
                // fall back to the filter; a half-relator factor is still
                // a hard failure, anything else stays unknown
                match is_geodesic(q, p, GeodesicMode::Filter) {
                    Ok(GeodesicVerdict::Geodesic { method }) => {
                        report.geodesic += 1;
                        *report.methods.entry(method).or_insert(0) += 1;
                    }
                    Ok(GeodesicVerdict::NotGeodesic { witness }) => {
                        report.passed = false;
                        report.geodesic_failures.push(SegmentFailure {
                            segment: q.to_string(),
                            witness,
                        });
                        continue;
                    }
                    _ => known = false,
                }
            }
        }
        match unique_geodesic(q, p, cap) {
            Some(true) => report.unique += 1,
            Some(false) => {
                report.passed = false;
                report.uniqueness_failures.push(SegmentFailure {
                    segment: q.to_string(),
                    witness: "equal word of the same length exists".into(),
                });
                continue;
            }
            None => known = false,
        }
        if !known {
            report.unknown += 1;
        }
    }
    // locate witnesses for uniqueness failures precisely
    for f in &mut report.uniqueness_failures {
        let q = ReducedWord::parse(&f.segment, false).expect("segment roundtrip");
        for v in crate::words::enumerate_reduced_words(q.len()) {
            if v != q && is_trivial(&q.concat(&v.inverse()), p) {
                f.witness = v.to_string();
                break;
            }
        }
    }
    report
}

/// Is `q` the unique word of its length in its quotient class? `None` when
/// undecidable within the cap.
fn unique_geodesic(q: &ReducedWord, p: &StagePresentation, cap: u64) -> Option<bool> {
    if p.dehn_exact && q.len() <= p.greendlinger_ball() {
        return Some(true);
    }
    if !p.dehn_exact {
        return None;
    }
    match reduced_word_count(q.len()) {
        Some(c) if c <= cap => {}
        _ => return None,
    }
    for v in crate::words::enumerate_reduced_words(q.len()) {
        if v != *q && is_trivial(&q.concat(&v.inverse()), p) {
            return Some(false);
        }
    }
    Some(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    /// longest factor common to a relator and a descending tree path
    pub max_common_len: usize,
    /// length of the relator carrying the maximum
    pub relator_len: usize,
    /// max over relators of common length / |R|, as "p/q"
    pub max_ratio: String,
    /// true iff the max ratio is < 1/8
    pub passed: bool,
}

/// Longest common factor between any symmetrized relator and any
/// descending path of the tree, computed exactly per relator class by a
/// product walk over (tree choice state × position in the doubled core).
pub fn check_tree_relator_overlap(t: &PrunedTree<'_>, p: &StagePresentation) -> OverlapReport {
    let depth_of = reach_depths(t);
    let dense = dense_choices(t);
    // compact state indexing for the DP columns
    let ids: HashMap<u32, usize> = depth_of.keys().enumerate().map(|(i, &s)| (s, i)).collect();
    let budget: Vec<usize> = depth_of.values().map(|&d| t.depth - d).collect();
    let states: Vec<u32> = depth_of.keys().copied().collect();

    let mut best_ratio = BigRational::zero();
    let mut best_len = 0usize;
    let mut best_relator_len = 0usize;
    for core in p.relators.cores() {
        let n = core.len();
        if n == 0 {
            continue;
        }
        // factors of all rotations of the core and of their inverses are
        // exactly the ≤ n-length factors of these two doubled strings
        let doubled = core.as_word().letters().to_vec();
        let mut fwd = doubled.clone();
        fwd.extend_from_slice(&doubled);
        let rev: Vec<_> = fwd.iter().rev().map(|l| l.inverse()).collect();
        let mut core_best = 0usize;
        for d in [&fwd, &rev] {
            // two-column DP: match[s] = longest walk from s matching d[i..]
            let mut next_col = vec![0usize; states.len()];
            let mut col = vec![0usize; states.len()];
            for i in (0..d.len()).rev() {
                let lc = d[i].code() as usize;
                for (si, &s) in states.iter().enumerate() {
                    // a kept child outside the depth horizon cannot extend
                    // any match that stays inside the tree
                    col[si] = match dense[&s][lc].and_then(|ns| ids.get(&ns)) {
                        Some(&ni) => 1 + next_col[ni],
                        None => 0,
                    };
                    let usable = col[si].min(budget[si]).min(n);
                    core_best = core_best.max(usable);
                }
                std::mem::swap(&mut col, &mut next_col);
            }
        }
        let ratio = BigRational::new(BigInt::from(core_best), BigInt::from(n));
        if ratio > best_ratio {
            best_ratio = ratio;
            best_len = core_best;
            best_relator_len = n;
        }
    }
    let eighth = BigRational::new(BigInt::from(1), BigInt::from(8));
    OverlapReport {
        max_common_len: best_len,
        relator_len: best_relator_len,
        max_ratio: rational_to_string(&best_ratio),
        passed: best_ratio < eighth,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SurveyReport {
    pub samples_requested: usize,
    pub samples_done: usize,
    /// max over samples of |p| / (|a| + |b|), as "p/q"
    pub max_side_ratio: String,
    /// histogram of that ratio in tenths: bucket i counts ratios in
    /// [i/10, (i+1)/10)
    pub histogram: Vec<usize>,
    /// samples whose ratio met or exceeded μ (recorded, never asserted)
    pub flagged: usize,
}

/// Samples geodesic triangles with one side along a tree path and measures
/// how the tree side compares to the two connecting sides after Dehn
/// reduction. Pure measurement: nothing here asserts thinness.
pub fn thinness_survey(
    t: &PrunedTree<'_>,
    p: &StagePresentation,
    samples: usize,
    seed: u64,
    apex_len: usize,
) -> SurveyReport {
    use rand::Rng;
    let mut rng = seeded_rng(seed);
    let mut max_ratio = BigRational::zero();
    let mut histogram = vec![0usize; 11];
    let mut flagged = 0usize;
    let mut done = 0usize;
    for _ in 0..samples {
        // tree side: a random root path of random positive length
        let len = rng.gen_range(1..=t.depth.max(1));
        let mut state = t.automaton().root();
        let mut side = Vec::new();
        for _ in 0..len {
            let choice = &t.choices[&state];
            let i = rng.gen_range(0..choice.letters.len());
            side.push(crate::words::Letter::new(choice.letters[i]));
            state = choice.next[i];
        }
        let tree_side = ReducedWord::from_reduced(side);
        // apex: offset from the midpoint of the tree side by a short word
        let mid = tree_side.factor(0, tree_side.len() / 2);
        let g = crate::words::random_reduced_word(apex_len.max(1), &mut rng);
        // connecting sides, normalized by Dehn reduction
        let a = dehn_reduce(&mid.concat(&g), p).0;
        let b = dehn_reduce(&g.inverse().concat(&mid.inverse()).concat(&tree_side), p).0;
        let denom = a.len() + b.len();
        if denom == 0 {
            continue;
        }
        done += 1;
        let ratio = BigRational::new(BigInt::from(tree_side.len()), BigInt::from(denom));
        if ratio >= p.mu {
            flagged += 1;
        }
        let bucket = (ratio.to_f64().unwrap_or(1.0) * 10.0).floor() as usize;
        histogram[bucket.min(10)] += 1;
        if ratio > max_ratio {
            max_ratio = ratio;
        }
    }
    SurveyReport {
        samples_requested: samples,
        samples_done: done,
        max_side_ratio: rational_to_string(&max_ratio),
        histogram,
        flagged,
    }
}

/// Group oracle backed by Dehn's algorithm on a stage presentation; exact
/// for equality iff the presentation is C′(1/6). Geodesity answers are
/// conservative: `Unknown` is reported as not geodesic.
pub struct DehnOracle<'a> {
    pub presentation: &'a StagePresentation,
    pub cap: u64,
}

impl GroupOracle for DehnOracle<'_> {
    fn equal(&self, a: &ReducedWord, b: &ReducedWord) -> bool {
        is_trivial(&a.concat(&b.inverse()), self.presentation)
    }

    fn is_geodesic(&self, w: &ReducedWord) -> bool {
        matches!(
            is_geodesic(w, self.presentation, GeodesicMode::Exact { cap: self.cap }),
            Ok(GeodesicVerdict::Geodesic { .. })
        )
    }
}
