//! The pruned 6-ary choice tree of avoiding words.
//!
//! Among the (up to 7) safe continuations available at every safe
//! automaton state, a policy keeps exactly 6; unfolding those choices from
//! the root gives a rooted tree in which every root-to-node path is a
//! reduced word avoiding the forbidden set. The tree is stored compactly
//! as a per-state choice map (children depend only on the automaton
//! state), so depth-d unfolding never materializes 6^d nodes except in the
//! exhaustive path scan, which walks them iteratively.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::avoidance::AvoidanceAutomaton;
use crate::error::GscError;
use crate::words::{Letter, ReducedWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildPolicy {
    /// keep the 6 lexicographically least safe letters
    Lex,
    /// drop the letters whose successor states have the fewest safe
    /// continuations (most constrained first), ties broken lexicographically
    DropMostConstrained,
    /// seeded random choice, deterministic per (seed, state)
    Seeded(u64),
}

#[derive(Clone, Debug, Serialize)]
pub struct StateChoice {
    pub letters: Vec<u8>,
    pub next: Vec<u32>,
    pub excluded: Vec<u8>,
}

pub struct PrunedTree<'a> {
    automaton: &'a AvoidanceAutomaton,
    pub depth: usize,
    /// choice per safe state reachable through kept children
    pub choices: BTreeMap<u32, StateChoice>,
}

impl<'a> PrunedTree<'a> {
    pub fn automaton(&self) -> &'a AvoidanceAutomaton {
        self.automaton
    }
}

impl std::fmt::Debug for PrunedTree<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrunedTree")
            .field("depth", &self.depth)
            .field("states", &self.choices.len())
            .finish()
    }
}

/// Builds the pruned tree: verifies the root is safe and that every safe
/// state reachable through kept children has at least 6 safe successors,
/// then records the policy's 6 choices per state.
pub fn build_pruned_tree<'a>(
    a: &'a AvoidanceAutomaton,
    depth: usize,
    policy: ChildPolicy,
) -> Result<PrunedTree<'a>, GscError> {
    if !a.is_safe(a.root()) {
        return Err(GscError::Tree("root state is not safe".into()));
    }
    // precondition over every safe state, not just reachable ones
    for s in 0..a.state_count() as u32 {
        if a.is_safe(s) && a.safe_successors(s).len() < 6 {
            return Err(GscError::Tree(format!(
                "safe state {s} has only {} safe successors; the forbidden set is too dense",
                a.safe_successors(s).len()
            )));
        }
    }
    let mut choices: BTreeMap<u32, StateChoice> = BTreeMap::new();
    let mut stack = vec![a.root()];
    while let Some(s) = stack.pop() {
        if choices.contains_key(&s) {
            continue;
        }
        let succ = a.safe_successors(s);
        let kept = select(a, &succ, policy, s);
        let excluded: Vec<u8> = succ
            .iter()
            .filter(|(l, _)| !kept.iter().any(|(kl, _)| kl == l))
            .map(|(l, _)| l.code())
            .collect();
        for &(_, t) in &kept {
            stack.push(t);
        }
        choices.insert(
            s,
            StateChoice {
                letters: kept.iter().map(|(l, _)| l.code()).collect(),
                next: kept.iter().map(|&(_, t)| t).collect(),
                excluded,
            },
        );
    }
    Ok(PrunedTree {
        automaton: a,
        depth,
        choices,
    })
}

fn select(
    a: &AvoidanceAutomaton,
    succ: &[(Letter, u32)],
    policy: ChildPolicy,
    state: u32,
) -> Vec<(Letter, u32)> {
    debug_assert!(succ.len() >= 6);
    match policy {
        ChildPolicy::Lex => succ[..6].to_vec(),
        ChildPolicy::DropMostConstrained => {
            let mut order: Vec<usize> = (0..succ.len()).collect();
            // drop from the front of this ordering: fewest safe successors
            // first, lexicographic tie-break
            order.sort_by_key(|&i| (a.safe_successors(succ[i].1).len(), succ[i].0.code()));
            let mut keep: Vec<usize> = order[succ.len() - 6..].to_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| succ[i]).collect()
        }
        ChildPolicy::Seeded(seed) => {
            let mut rng = crate::words::seeded_rng(seed ^ (state as u64).wrapping_mul(0x9E3779B97F4A7C15));
            let mut idx: Vec<usize> = (0..succ.len()).collect();
            idx.shuffle(&mut rng);
            let mut keep: Vec<usize> = idx[..6].to_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| succ[i]).collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub depth: usize,
    pub nodes: u64,
    pub leaves: u64,
    pub max_depth_seen: usize,
    pub all_paths_avoid: bool,
    pub all_reduced: bool,
    pub all_states_safe: bool,
    pub child_count_ok: bool,
}

/// Exhaustively walks every root-to-leaf path of the depth-d unfolding,
/// re-checking independently of the automaton that each path word is
/// reduced and avoids every forbidden factor (windowed suffix scan), that
/// every internal node has exactly 6 children, and that states are safe.
pub fn scan_paths(t: &PrunedTree<'_>, depth: usize) -> ScanReport {
    let a = t.automaton;
    let forbidden = a.forbidden();
    // suffix checks grouped by forbidden length, shortest first
    let mut by_len: BTreeMap<usize, Vec<&[Letter]>> = BTreeMap::new();
    for w in forbidden {
        by_len.entry(w.len()).or_default().push(w.letters());
    }
    let suffix_groups: Vec<(usize, Vec<&[Letter]>)> = by_len.into_iter().collect();

    // compact dense tables so the hot loop avoids map lookups
    let ids: HashMap<u32, u32> = t.choices.keys().enumerate().map(|(i, &s)| (s, i as u32)).collect();
    let n = t.choices.len();
    let mut kept_letters = vec![[0u8; 6]; n];
    let mut kept_next = vec![[u32::MAX; 6]; n];
    let mut kept_count = vec![0u8; n];
    let mut safe = vec![false; n];
    for (&s, choice) in &t.choices {
        let i = ids[&s] as usize;
        safe[i] = a.is_safe(s);
        kept_count[i] = choice.letters.len().min(6) as u8;
        for (j, (&l, &ns)) in choice.letters.iter().zip(&choice.next).take(6).enumerate() {
            kept_letters[i][j] = l;
            // children of kept states are kept states by construction
            kept_next[i][j] = ids[&ns];
        }
    }

    let mut nodes: u64 = 1;
    let mut leaves: u64 = 0;
    let mut all_paths_avoid = true;
    let mut all_reduced = true;
    let mut all_states_safe = safe[ids[&a.root()] as usize];
    let child_count_ok = t.choices.values().all(|c| c.letters.len() == 6);
    let mut max_depth_seen = 0usize;

    // iterative DFS: slot[i] = child index currently explored at depth i
    let mut path_letters: Vec<Letter> = Vec::with_capacity(depth);
    let mut path_states: Vec<u32> = vec![ids[&a.root()]];
    let mut slot: Vec<u8> = vec![0];

    while let Some(&ci) = slot.last() {
        let d = slot.len() - 1;
        let state = *path_states.last().unwrap() as usize;
        if d == depth || ci >= kept_count[state] {
            if d == depth {
                leaves += 1;
            }
            slot.pop();
            path_states.pop();
            path_letters.pop();
            if let Some(last) = slot.last_mut() {
                *last += 1;
            }
            continue;
        }
        let ci = ci as usize;
        let l = Letter::new(kept_letters[state][ci]);
        let next = kept_next[state][ci];
        // independent reducedness check
        if path_letters.last().is_some_and(|&p| p == l.inverse()) {
            all_reduced = false;
        }
        path_letters.push(l);
        // independent forbidden-suffix check
        let plen = path_letters.len();
        for (k, group) in &suffix_groups {
            if plen < *k {
                break;
            }
            let suffix = &path_letters[plen - k..];
            if group.iter().any(|f| *f == suffix) {
                all_paths_avoid = false;
            }
        }
        if !safe[next as usize] {
            all_states_safe = false;
        }
        max_depth_seen = max_depth_seen.max(plen);
        nodes += 1;
        path_states.push(next);
        slot.push(0);
    }

    ScanReport {
        depth,
        nodes,
        leaves,
        max_depth_seen,
        all_paths_avoid,
        all_reduced,
        all_states_safe,
        child_count_ok,
    }
}

/// Enumerates all depth-`depth` path words (for small depths / tests).
pub fn path_words(t: &PrunedTree<'_>, depth: usize) -> Vec<ReducedWord> {
    let mut out = Vec::new();
    let mut letters = Vec::with_capacity(depth);
    fn rec(
        t: &PrunedTree<'_>,
        state: u32,
        depth: usize,
        letters: &mut Vec<Letter>,
        out: &mut Vec<ReducedWord>,
    ) {
        if letters.len() == depth {
            out.push(crate::words::free_reduce(letters.iter().copied()));
            return;
        }
        let choice = &t.choices[&state];
        for (i, &lc) in choice.letters.iter().enumerate() {
            letters.push(Letter::new(lc));
            rec(t, choice.next[i], depth, letters, out);
            letters.pop();
        }
    }
    rec(t, t.automaton.root(), depth, &mut letters, &mut out);
    out
}

/// Earliest depth at which each choice state occurs in the unfolding.
pub fn reach_depths(t: &PrunedTree<'_>) -> BTreeMap<u32, usize> {
    let mut depth_of: BTreeMap<u32, usize> = BTreeMap::new();
    let mut frontier = vec![t.automaton.root()];
    depth_of.insert(t.automaton.root(), 0);
    for d in 1..=t.depth {
        let mut next = Vec::new();
        for s in frontier {
            for &ns in &t.choices[&s].next {
                if let std::collections::btree_map::Entry::Vacant(e) = depth_of.entry(ns) {
                    e.insert(d);
                    next.push(ns);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    depth_of
}

/// All distinct words of length 1..=max_len readable along descending tree
/// edges (segments of root-to-leaf paths), deduplicated across states.
/// A segment starting at a state first seen at depth d must fit: d + |w| ≤
/// tree depth.
pub fn segment_words(t: &PrunedTree<'_>, max_len: usize) -> Vec<ReducedWord> {
    let max_len = max_len.min(t.depth).min(21); // 21 letters pack into 63 bits
    let depth_of = reach_depths(t);
    let mut out: Vec<ReducedWord> = Vec::new();
    // frontier: packed word -> (end state -> min start depth)
    let mut frontier: HashMap<u64, HashMap<u32, usize>> = HashMap::new();
    frontier.insert(0, depth_of.iter().map(|(&s, &d)| (s, d)).collect());
    let mut seen: Vec<std::collections::HashSet<u64>> = vec![Default::default(); max_len + 1];
    for len in 1..=max_len {
        let mut next: HashMap<u64, HashMap<u32, usize>> = HashMap::new();
        for (word, states) in frontier {
            for (s, start) in states {
                if start + len > t.depth {
                    continue;
                }
                let choice = &t.choices[&s];
                for (i, &lc) in choice.letters.iter().enumerate() {
                    let nw = (word << 3) | lc as u64;
                    let entry = next.entry(nw).or_default();
                    let slot = entry.entry(choice.next[i]).or_insert(usize::MAX);
                    *slot = (*slot).min(start);
                }
            }
        }
        for (&word, _) in &next {
            if seen[len].insert(word) {
                let letters: Vec<Letter> = (0..len)
                    .rev()
                    .map(|sh| Letter::new(((word >> (3 * sh)) & 7) as u8))
                    .collect();
                out.push(ReducedWord::from_reduced(letters));
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Dense per-state transition view of the kept children: letter -> next
/// state, for states in the choice map.
pub fn dense_choices(t: &PrunedTree<'_>) -> HashMap<u32, [Option<u32>; 8]> {
    t.choices
        .iter()
        .map(|(&s, c)| {
            let mut row = [None; 8];
            for (i, &lc) in c.letters.iter().enumerate() {
                row[lc as usize] = Some(c.next[i]);
            }
            (s, row)
        })
        .collect()
}

/// DOT export of the unfolding truncated at `export_depth`; edges are
/// labeled by letters. Byte-stable for fixed inputs.
pub fn export_dot(t: &PrunedTree<'_>, export_depth: usize) -> String {
    let mut out = String::from("digraph pruned_tree {\n  node [shape=point];\n");
    let mut counter = 0u64;
    let mut stack: Vec<(u64, u32, usize)> = vec![(0, t.automaton.root(), 0)];
    writeln!(out, "  n0 [shape=circle, label=\"root\"];").unwrap();
    while let Some((id, state, d)) = stack.pop() {
        if d == export_depth {
            continue;
        }
        let choice = &t.choices[&state];
        // push in reverse so output order is letter-ascending
        let mut children = Vec::new();
        for (i, &lc) in choice.letters.iter().enumerate() {
            counter += 1;
            let cid = counter;
            writeln!(
                out,
                "  n{id} -> n{cid} [label=\"{}\"];",
                Letter::new(lc).to_char()
            )
            .unwrap();
            children.push((cid, choice.next[i], d + 1));
        }
        for c in children.into_iter().rev() {
            stack.push(c);
        }
    }
    out.push_str("}\n");
    out
}
