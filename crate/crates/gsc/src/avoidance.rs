//! Exact counting of reduced words avoiding forbidden factors.
//!
//! The automaton composes an Aho–Corasick factor matcher with the
//! no-backtracking constraint of reduced words: every state of depth ≥ 1
//! knows its last letter (the root's 8 children are always materialized,
//! so the suffix tracked by a state is never empty), and the transition on
//! the inverse of that letter is disallowed rather than dead. Counting is
//! an iterated transfer over the state vector with unbounded integers.

use std::collections::{BTreeMap, VecDeque};

use num::bigint::{BigInt, BigUint};
use num::{One, Signed, Zero};
use serde::Serialize;

use crate::error::GscError;
use crate::schedule::{rat_from_u64, rational_to_string, Rat};
use crate::words::{Letter, ReducedWord};

const NO_LAST: u8 = 8;
const DEAD: u32 = u32::MAX;

pub struct AvoidanceAutomaton {
    /// resolved total transition map; DEAD marks a completed forbidden word
    delta: Vec<[u32; 8]>,
    /// last letter code of the state's suffix, NO_LAST at the root
    last: Vec<u8>,
    safe: Vec<bool>,
    forbidden: Vec<ReducedWord>,
}

impl AvoidanceAutomaton {
    pub fn root(&self) -> u32 {
        0
    }

    pub fn state_count(&self) -> usize {
        self.delta.len()
    }

    pub fn forbidden(&self) -> &[ReducedWord] {
        &self.forbidden
    }

    pub fn is_safe(&self, s: u32) -> bool {
        self.safe[s as usize]
    }

    /// The letter may follow in a reduced word (no backtracking).
    pub fn letter_allowed(&self, s: u32, l: Letter) -> bool {
        self.last[s as usize] != l.inverse().code()
    }

    /// Next state if the letter is allowed and does not complete a
    /// forbidden word.
    pub fn step(&self, s: u32, l: Letter) -> Option<u32> {
        if !self.letter_allowed(s, l) {
            return None;
        }
        match self.delta[s as usize][l.code() as usize] {
            DEAD => None,
            t => Some(t),
        }
    }

    /// Runs the automaton over a reduced word from the root.
    pub fn accepts(&self, w: &ReducedWord) -> bool {
        let mut s = self.root();
        for &l in w.letters() {
            match self.step(s, l) {
                Some(t) => s = t,
                None => return false,
            }
        }
        true
    }

    /// Safe allowed successors of a state, in letter order.
    pub fn safe_successors(&self, s: u32) -> Vec<(Letter, u32)> {
        Letter::all()
            .filter_map(|l| self.step(s, l).filter(|&t| self.safe[t as usize]).map(|t| (l, t)))
            .collect()
    }
}

/// Builds the avoidance automaton for a set of reduced forbidden words.
/// Accepts exactly the reduced words containing no forbidden factor.
pub fn build_automaton(forbidden: &[ReducedWord]) -> AvoidanceAutomaton {
    assert!(forbidden.iter().all(|w| !w.is_empty()), "forbidden words must be nonempty");
    struct Node {
        children: [Option<u32>; 8],
        terminal: bool,
        last: u8,
        fail: u32,
    }
    let mut nodes = vec![Node {
        children: [None; 8],
        terminal: false,
        last: NO_LAST,
        fail: 0,
    }];
    // force all 8 root children so depth >= 1 states always exist
    for l in Letter::all() {
        let id = nodes.len() as u32;
        nodes[0].children[l.code() as usize] = Some(id);
        nodes.push(Node {
            children: [None; 8],
            terminal: false,
            last: l.code(),
            fail: 0,
        });
    }
    for w in forbidden {
        let mut cur = 0u32;
        for &l in w.letters() {
            let c = l.code() as usize;
            cur = match nodes[cur as usize].children[c] {
                Some(t) => t,
                None => {
                    let id = nodes.len() as u32;
                    nodes[cur as usize].children[c] = Some(id);
                    nodes.push(Node {
                        children: [None; 8],
                        terminal: false,
                        last: l.code(),
                        fail: 0,
                    });
                    id
                }
            };
        }
        nodes[cur as usize].terminal = true;
    }

    // BFS: failure links, terminal propagation, resolved transitions
    let n = nodes.len();
    let mut delta: Vec<[u32; 8]> = vec![[0; 8]; n];
    let mut queue = VecDeque::new();
    for c in 0..8 {
        let child = nodes[0].children[c].unwrap();
        delta[0][c] = child;
        queue.push_back(child);
    }
    while let Some(s) = queue.pop_front() {
        let fail = nodes[s as usize].fail;
        if nodes[fail as usize].terminal {
            nodes[s as usize].terminal = true;
        }
        for c in 0..8 {
            match nodes[s as usize].children[c] {
                Some(t) => {
                    nodes[t as usize].fail = delta[fail as usize][c];
                    delta[s as usize][c] = t;
                    queue.push_back(t);
                }
                None => {
                    delta[s as usize][c] = delta[fail as usize][c];
                }
            }
        }
    }
    // redirect transitions into terminal states to DEAD and drop the
    // terminal states' own rows from play
    for s in 0..n {
        for c in 0..8 {
            let t = delta[s][c];
            if t != DEAD && nodes[t as usize].terminal {
                delta[s][c] = DEAD;
            }
        }
    }
    if nodes[0].terminal {
        // cannot happen with nonempty forbidden words
        unreachable!();
    }
    let last: Vec<u8> = nodes.iter().map(|nd| nd.last).collect();
    let mut a = AvoidanceAutomaton {
        delta,
        last,
        safe: vec![false; n],
        forbidden: forbidden.to_vec(),
    };
    mark_safe_states(&mut a);
    a
}

/// safe(s) ⇔ s lies on or reaches a cycle of non-dead states in the
/// allowed-transition graph. Equivalently, the unsafe states are exactly
/// those from which every walk dead-ends, so they can be peeled off
/// iteratively: a state becomes unsafe once all its successors are unsafe
/// (dead states count as already peeled). Whatever survives reaches a
/// cycle. Fully iterative, so deep tries cannot overflow the stack.
pub fn mark_safe_states(a: &mut AvoidanceAutomaton) {
    let n = a.state_count();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut live_succ = vec![0usize; n];
    for s in 0..n as u32 {
        for l in Letter::all() {
            if let Some(t) = a.step(s, l) {
                live_succ[s as usize] += 1;
                preds[t as usize].push(s);
            }
        }
    }
    let mut unsafe_queue: Vec<u32> = (0..n as u32).filter(|&s| live_succ[s as usize] == 0).collect();
    let mut safe = vec![true; n];
    while let Some(s) = unsafe_queue.pop() {
        if !safe[s as usize] {
            continue; // multi-edges can enqueue a state more than once
        }
        safe[s as usize] = false;
        for &p in &preds[s as usize] {
            live_succ[p as usize] -= 1;
            if live_succ[p as usize] == 0 {
                unsafe_queue.push(p);
            }
        }
    }
    a.safe = safe;
}

#[derive(Clone, Debug, Default)]
pub struct CountTable {
    pub f: BTreeMap<usize, BigUint>,
}

impl CountTable {
    pub fn get(&self, n: usize) -> Option<&BigUint> {
        self.f.get(&n)
    }

    pub fn max_n(&self) -> usize {
        self.f.keys().last().copied().unwrap_or(0)
    }
}

/// f(n) for n = 0..=max_n by iterated transfer over the state vector.
pub fn count_table(a: &AvoidanceAutomaton, max_n: usize) -> CountTable {
    let n_states = a.state_count();
    let mut v: Vec<BigUint> = vec![BigUint::zero(); n_states];
    v[a.root() as usize] = BigUint::one();
    let mut table = BTreeMap::new();
    table.insert(0usize, BigUint::one());
    for n in 1..=max_n {
        let mut next: Vec<BigUint> = vec![BigUint::zero(); n_states];
        for s in 0..n_states as u32 {
            if v[s as usize].is_zero() {
                continue;
            }
            for l in Letter::all() {
                if let Some(t) = a.step(s, l) {
                    next[t as usize] += &v[s as usize];
                }
            }
        }
        v = next;
        table.insert(n, v.iter().sum());
    }
    CountTable { f: table }
}

/// Exact |F(n)| for a single length.
pub fn count_avoiding(a: &AvoidanceAutomaton, n: usize) -> BigUint {
    count_table(a, n).f.remove(&n).unwrap()
}

/// Depth-first enumeration with on-the-fly factor checking; the oracle for
/// `count_avoiding`. Refuses when the visited-node budget is exhausted.
pub fn brute_force_count(
    forbidden: &[ReducedWord],
    n: usize,
    budget: u64,
) -> Result<BigUint, GscError> {
    Ok(brute_force_counts(forbidden, n, budget)?.pop().unwrap())
}

/// Longest forbidden word that gets a packed-suffix bitmap; longer words fall
/// back to direct slice comparison. 3 bits per letter keeps the largest
/// bitmap at 2^21 bits = 256 KiB.
const BITMAP_MAX_LEN: usize = 7;

/// All of `brute_force_count(forbidden, 0..=max_n)` from a single traversal.
///
/// The walk visits every reduced word of length at most `max_n` and tests
/// whether its suffix lies in the forbidden set, so it shares nothing with
/// the automaton-based dynamic program it cross-checks. The suffix test uses
/// a bitmap keyed by the packed last letters (3 bits each) for short
/// forbidden words and literal slice comparison for the rest.
pub fn brute_force_counts(
    forbidden: &[ReducedWord],
    max_n: usize,
    budget: u64,
) -> Result<Vec<BigUint>, GscError> {
    // Window length: the longest bitmapped forbidden word.
    let w_len = forbidden
        .iter()
        .map(|w| w.len())
        .filter(|&k| k <= BITMAP_MAX_LEN)
        .max()
        .unwrap_or(0);
    // Per-length exact bitmaps, used while the word is still shorter than the
    // window.
    let mut by_len: Vec<(usize, u64, Vec<u64>)> = Vec::new();
    // Combined suffix-closed bitmap over the full window: a bit is set when
    // any short forbidden word is a suffix of the window it encodes. Deep in
    // the walk this replaces the per-length loop with a single test.
    let mut combined = vec![0u64; ((1usize << (3 * w_len)) + 63) / 64];
    let mut long: Vec<&[Letter]> = Vec::new();
    for w in forbidden {
        let k = w.len();
        if k == 0 {
            continue; // handled below: an empty forbidden word kills everything
        }
        if k > BITMAP_MAX_LEN {
            long.push(w.letters());
            continue;
        }
        let mut packed = 0u64;
        for &l in w.letters() {
            packed = (packed << 3) | l.code() as u64;
        }
        let mask = (1u64 << (3 * k)) - 1;
        let entry = match by_len.iter_mut().find(|(bk, _, _)| *bk == k) {
            Some(e) => e,
            None => {
                by_len.push((k, mask, vec![0u64; ((1usize << (3 * k)) + 63) / 64]));
                by_len.last_mut().unwrap()
            }
        };
        entry.2[(packed / 64) as usize] |= 1u64 << (packed % 64);
        for high in 0..1u64 << (3 * (w_len - k)) {
            let key = ((high << (3 * k)) | packed) as usize;
            combined[key / 64] |= 1u64 << (key % 64);
        }
    }
    by_len.sort_unstable_by_key(|(k, _, _)| *k);
    let w_mask = if w_len == 0 { 0 } else { (1u64 << (3 * w_len)) - 1 };
    // One row per previous letter: the 7 letters that keep the word reduced.
    let mut next_letters = [[0u8; 7]; 8];
    for (p, row) in next_letters.iter_mut().enumerate() {
        let mut j = 0;
        for l in 0..8u8 {
            if l != p as u8 ^ 1 {
                row[j] = l;
                j += 1;
            }
        }
    }

    struct Ctx<'a> {
        w_len: usize,
        w_mask: u64,
        combined: Vec<u64>,
        by_len: Vec<(usize, u64, Vec<u64>)>,
        long: Vec<&'a [Letter]>,
        next_letters: [[u8; 7]; 8],
        budget: u64,
        max_n: usize,
    }
    fn rec(
        ctx: &Ctx<'_>,
        depth: usize,
        packed: u64,
        last: u8,
        stack: &mut Vec<Letter>,
        counts: &mut [u64],
        visited: &mut u64,
    ) -> Result<(), GscError> {
        if depth == ctx.max_n {
            return Ok(());
        }
        let d = depth + 1;
        let deep = ctx.w_len > 0 && d >= ctx.w_len;
        let first = depth == 0;
        for i in 0..if first { 8 } else { 7 } {
            let l = if first {
                i as u8
            } else {
                ctx.next_letters[last as usize][i]
            };
            *visited += 1;
            if *visited > ctx.budget {
                return Err(GscError::BudgetExhausted(format!(
                    "brute_force_count: more than {} nodes at n = {}",
                    ctx.budget, ctx.max_n
                )));
            }
            let np = (packed << 3) | l as u64;
            let mut hit = if deep {
                let key = (np & ctx.w_mask) as usize;
                ctx.combined[key / 64] & (1u64 << (key % 64)) != 0
            } else {
                ctx.by_len.iter().any(|(k, mask, bm)| {
                    *k <= d && {
                        let key = (np & mask) as usize;
                        bm[key / 64] & (1u64 << (key % 64)) != 0
                    }
                })
            };
            if !hit && !ctx.long.is_empty() {
                stack.push(Letter::new(l));
                hit = ctx
                    .long
                    .iter()
                    .any(|w| d >= w.len() && stack[d - w.len()..] == **w);
                stack.pop();
            }
            if !hit {
                counts[d] += 1;
                if ctx.long.is_empty() {
                    rec(ctx, d, np & 0x00FF_FFFF_FFFF_FFFF, l, stack, counts, visited)?;
                } else {
                    stack.push(Letter::new(l));
                    rec(ctx, d, np & 0x00FF_FFFF_FFFF_FFFF, l, stack, counts, visited)?;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    let ctx = Ctx {
        w_len,
        w_mask,
        combined,
        by_len,
        long,
        next_letters,
        budget,
        max_n,
    };
    let mut counts = vec![0u64; max_n + 1];
    counts[0] = 1; // the empty word avoids everything
    let mut visited = 0u64;
    let mut stack: Vec<Letter> = Vec::with_capacity(max_n);
    rec(&ctx, 0, 0, 0, &mut stack, &mut counts, &mut visited)?;
    // A forbidden empty word kills everything, including the empty word.
    if forbidden.iter().any(|w| w.is_empty()) {
        counts.fill(0);
    }
    Ok(counts.into_iter().map(BigUint::from).collect())
}

pub const DEFAULT_BRUTE_BUDGET: u64 = 8 * 7u64.pow(11) + 1_000_000;

/// Checks f(n) ≥ 7·f(n−1) − Σ_{|w| ≤ n} f(n − |w|), the counting recursion
/// underlying the growth bound, over every n in the table. Returns the
/// first violating n, if any.
pub fn verify_recursion(ct: &CountTable, forbidden: &[ReducedWord]) -> Option<usize> {
    let mut counts_by_len: BTreeMap<usize, u64> = BTreeMap::new();
    for w in forbidden {
        *counts_by_len.entry(w.len()).or_insert(0) += 1;
    }
    for (&n, fv) in &ct.f {
        if n == 0 {
            continue;
        }
        let Some(prev) = ct.f.get(&(n - 1)) else { continue };
        let mut rhs = BigInt::from(7u8) * BigInt::from(prev.clone());
        for (&m, &c) in &counts_by_len {
            if m > n {
                break;
            }
            if let Some(fm) = ct.f.get(&(n - m)) {
                rhs -= BigInt::from(c) * BigInt::from(fm.clone());
            }
        }
        if BigInt::from(fv.clone()) < rhs {
            return Some(n);
        }
    }
    None
}

/// First n in the table with f(n) ≤ λ·f(n−1) and f(n−1) > 0, if any.
pub fn check_ratio_transfer(ct: &CountTable, lambda: &Rat) -> Option<usize> {
    for (&n, fv) in &ct.f {
        if n == 0 {
            continue;
        }
        let Some(prev) = ct.f.get(&(n - 1)) else { continue };
        if prev.is_zero() {
            continue;
        }
        let fv = Rat::from_integer(BigInt::from(fv.clone()));
        let prev = Rat::from_integer(BigInt::from(prev.clone()));
        if fv <= lambda * prev {
            return Some(n);
        }
    }
    None
}

/// Per-length upper bounds c(m) on forbidden-word counts.
pub enum Profile {
    Explicit(BTreeMap<usize, BigUint>),
    /// c(m) = beta^{m/2}
    Exponential { beta: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthCertificate {
    pub b: u64,
    pub lambda: String,
    pub min_len: usize,
    pub margin: String,
    pub tail: String,
    pub certified: bool,
    pub reason: Option<String>,
    #[serde(skip)]
    pub margin_rat: Rat,
    #[serde(skip)]
    pub tail_rat: Rat,
}

/// Upper bound on r^exp for r > 0: binary exponentiation with every
/// intermediate rounded up to 128 fractional bits, so component sizes stay
/// bounded regardless of the exponent. All factors are positive, hence
/// rounding up is monotone and the result dominates the exact power.
fn pow_round_up(r: &Rat, exp: usize) -> Rat {
    const PREC: u32 = 128;
    fn round_up(x: Rat) -> Rat {
        let scale = BigInt::one() << PREC;
        let n = (x * Rat::from_integer(scale.clone())).ceil().to_integer();
        Rat::new(n, scale)
    }
    let mut base = round_up(r.clone());
    let mut acc = Rat::one();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc = round_up(acc * &base);
        }
        base = round_up(&base * &base);
        e >>= 1;
    }
    acc
}

/// Least rational s with s ≥ √x at denominator `scale`.
fn sqrt_upper(x: u64, scale: u64) -> Rat {
    let n = BigInt::from(x) * BigInt::from(scale).pow(2);
    let mut r = n.sqrt();
    if &r * &r < n {
        r += 1;
    }
    Rat::new(r, BigInt::from(scale))
}

/// Certifies the growth ratio: if the per-length forbidden counts are
/// bounded by the profile with min length L, then
/// margin = (b − λ) − Σ_{m ≥ L} c(m)·λ^{1−m} > 0 implies every exact count
/// table over such a set satisfies f(n) > λ·f(n−1).
pub fn certify_growth(b: u64, lambda: &Rat, profile: &Profile, min_len: usize) -> GrowthCertificate {
    let b_rat = rat_from_u64(b);
    let fail = |reason: String| GrowthCertificate {
        b,
        lambda: rational_to_string(lambda),
        min_len,
        margin: "0".into(),
        tail: "0".into(),
        certified: false,
        reason: Some(reason),
        margin_rat: Rat::zero(),
        tail_rat: Rat::zero(),
    };
    if lambda >= &b_rat {
        return fail(format!("lambda {} not below branching {b}", rational_to_string(lambda)));
    }
    if !lambda.is_positive() {
        return fail("lambda must be positive".into());
    }
    let tail: Rat = match profile {
        Profile::Explicit(c) => {
            // sum c(m) * lambda^{1-m}
            let mut sum = Rat::zero();
            for (&m, cm) in c {
                if m < min_len {
                    return fail(format!("profile entry at length {m} below min length {min_len}"));
                }
                let lm = num::pow::pow(lambda.clone(), m - 1);
                sum += Rat::from_integer(BigInt::from(cm.clone())) * lambda / lm / lambda;
            }
            sum
        }
        Profile::Exponential { beta } => {
            // sum_{m >= L} beta^{m/2} lambda^{1-m} <= lambda * r^L / (1 - r)
            // with the rational upper bound r = s/lambda, s >= sqrt(beta);
            // r^L itself is bounded above at fixed precision so large L
            // cannot blow the rational up to astronomical size
            let s = sqrt_upper(*beta, 1_000_000_000_000);
            if &s >= lambda {
                return fail(format!(
                    "divergent tail: sqrt(beta) bound {} >= lambda {}",
                    rational_to_string(&s),
                    rational_to_string(lambda)
                ));
            }
            let r = &s / lambda;
            let r_l = pow_round_up(&r, min_len);
            lambda * r_l / (Rat::one() - r)
        }
    };
    let margin = &b_rat - lambda - &tail;
    GrowthCertificate {
        b,
        lambda: rational_to_string(lambda),
        min_len,
        margin: rational_to_string(&margin),
        tail: rational_to_string(&tail),
        certified: margin.is_positive(),
        reason: None,
        margin_rat: margin,
        tail_rat: tail,
    }
}

/// CSV with exact counts and consecutive ratios; byte-stable.
pub fn export_counts(ct: &CountTable) -> String {
    let mut out = String::from("n,f,ratio\n");
    for (&n, fv) in &ct.f {
        let ratio = if n == 0 {
            String::new()
        } else {
            match ct.f.get(&(n - 1)) {
                Some(prev) if !prev.is_zero() => {
                    let r = Rat::new(BigInt::from(fv.clone()), BigInt::from(prev.clone()));
                    rational_to_string(&r)
                }
                _ => String::new(),
            }
        };
        out.push_str(&format!("{n},{fv},{ratio}\n"));
    }
    out
}
