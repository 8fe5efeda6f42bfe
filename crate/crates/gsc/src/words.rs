//! Free-group word arithmetic over the rank-4 free group.
//!
//! Words are sequences over the 8-letter alphabet `{a,b,c,d,A,B,C,D}` where
//! uppercase denotes the inverse generator. Letters are encoded as integers
//! `0..8` with `inverse(l) == l ^ 1`, so inversion is branch-free.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::GscError;

/// One generator or inverse generator of F4.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

pub const ALPHABET_SIZE: usize = 8;
const LETTER_CHARS: [char; 8] = ['a', 'A', 'b', 'B', 'c', 'C', 'd', 'D'];

impl Letter {
    pub fn new(code: u8) -> Self {
        assert!(code < 8, "letter code out of range: {code}");
        Letter(code)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Generator index in 0..4.
    pub fn generator(self) -> u8 {
        self.0 >> 1
    }

    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    pub fn all() -> impl Iterator<Item = Letter> {
        (0..8).map(Letter)
    }

    pub fn to_char(self) -> char {
        LETTER_CHARS[self.0 as usize]
    }

    pub fn from_char(c: char) -> Result<Letter, GscError> {
        LETTER_CHARS
            .iter()
            .position(|&l| l == c)
            .map(|i| Letter(i as u8))
            .ok_or(GscError::BadLetter(c))
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word: no adjacent `l, l⁻¹` pair.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

impl ReducedWord {
    pub fn empty() -> Self {
        ReducedWord { letters: Vec::new() }
    }

    /// Wraps a letter sequence that is already known to be reduced.
    /// Debug-asserts the invariant.
    pub(crate) fn from_reduced(letters: Vec<Letter>) -> Self {
        debug_assert!(is_reduced(&letters));
        ReducedWord { letters }
    }

    pub fn single(l: Letter) -> Self {
        ReducedWord { letters: vec![l] }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn inverse(&self) -> ReducedWord {
        ReducedWord {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// Product in F4, freely reduced.
    pub fn concat(&self, other: &ReducedWord) -> ReducedWord {
        free_reduce(self.letters.iter().chain(other.letters.iter()).copied())
    }

    /// Contiguous factor `self[start..start+len]`.
    pub fn factor(&self, start: usize, len: usize) -> ReducedWord {
        ReducedWord::from_reduced(self.letters[start..start + len].to_vec())
    }

    pub fn starts_with(&self, prefix: &ReducedWord) -> bool {
        self.letters.len() >= prefix.len() && self.letters[..prefix.len()] == prefix.letters[..]
    }

    /// All contiguous length-`k` factors.
    pub fn subwords(&self, k: usize) -> BTreeSet<ReducedWord> {
        if k > self.len() {
            return BTreeSet::new();
        }
        (0..=self.len() - k).map(|i| self.factor(i, k)).collect()
    }

    /// Positions where `pattern` occurs as a contiguous factor.
    pub fn occurrences(&self, pattern: &[Letter]) -> Vec<usize> {
        if pattern.is_empty() || pattern.len() > self.len() {
            return Vec::new();
        }
        (0..=self.len() - pattern.len())
            .filter(|&i| &self.letters[i..i + pattern.len()] == pattern)
            .collect()
    }

    pub fn contains_factor(&self, pattern: &[Letter]) -> bool {
        !pattern.is_empty() && !self.occurrences(pattern).is_empty()
    }

    /// Parses letter syntax (`abAc`); rejects non-reduced input unless `reduce` is set.
    pub fn parse(s: &str, reduce: bool) -> Result<ReducedWord, GscError> {
        let letters = s
            .chars()
            .map(Letter::from_char)
            .collect::<Result<Vec<_>, _>>()?;
        if is_reduced(&letters) {
            Ok(ReducedWord { letters })
        } else if reduce {
            Ok(free_reduce(letters))
        } else {
            Err(GscError::NotReduced(s.to_string()))
        }
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn is_reduced(letters: &[Letter]) -> bool {
    letters.windows(2).all(|w| w[0] != w[1].inverse())
}

/// Free reduction: cancels adjacent inverse pairs until none remain.
/// Idempotent; output length has the same parity as the input.
pub fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> ReducedWord {
    let mut stack: Vec<Letter> = Vec::new();
    for l in letters {
        if stack.last() == Some(&l.inverse()) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    ReducedWord { letters: stack }
}

/// A cyclically reduced word considered up to rotation; stored in the
/// lexicographically least rotation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CyclicWord {
    letters: Vec<Letter>,
}

impl CyclicWord {
    fn canonical(mut letters: Vec<Letter>) -> Self {
        debug_assert!(is_cyclically_reduced(&letters));
        if letters.len() > 1 {
            let best = (0..letters.len())
                .min_by_key(|&r| RotationKey(&letters, r))
                .unwrap();
            letters.rotate_left(best);
        }
        CyclicWord { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// All rotations as linear reduced words.
    pub fn rotations(&self) -> Vec<ReducedWord> {
        if self.letters.is_empty() {
            return vec![ReducedWord::empty()];
        }
        (0..self.letters.len())
            .map(|r| {
                let mut v = self.letters.clone();
                v.rotate_left(r);
                ReducedWord::from_reduced(v)
            })
            .collect()
    }

    pub fn inverse(&self) -> CyclicWord {
        CyclicWord::canonical(self.letters.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn as_word(&self) -> ReducedWord {
        ReducedWord::from_reduced(self.letters.clone())
    }

    /// Canonical representative of the unordered class {w, w⁻¹}.
    pub fn class_key(&self) -> CyclicWord {
        let inv = self.inverse();
        if inv < *self {
            inv
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_word())
    }
}

impl fmt::Debug for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.as_word())
    }
}

struct RotationKey<'a>(&'a [Letter], usize);

impl Ord for RotationKey<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let n = self.0.len();
        for i in 0..n {
            let a = self.0[(self.1 + i) % n];
            let b = other.0[(other.1 + i) % n];
            match a.cmp(&b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl PartialOrd for RotationKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for RotationKey<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for RotationKey<'_> {}

fn is_cyclically_reduced(letters: &[Letter]) -> bool {
    is_reduced(letters)
        && (letters.len() < 2 || letters[0] != letters[letters.len() - 1].inverse())
}

/// Splits `w = conjugator · core · conjugator⁻¹` with `core` cyclically reduced.
pub fn cyclic_reduce(w: &ReducedWord) -> (CyclicWord, ReducedWord) {
    let mut letters = w.letters().to_vec();
    let mut conjugator = Vec::new();
    while letters.len() >= 2 && letters[0] == letters[letters.len() - 1].inverse() {
        conjugator.push(letters[0]);
        letters.remove(0);
        letters.pop();
    }
    (
        CyclicWord::canonical(letters),
        ReducedWord::from_reduced(conjugator),
    )
}

/// A relator set closed under inversion and cyclic permutation, with every
/// member cyclically reduced and no duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetrizedSet {
    words: Vec<ReducedWord>,
    cores: Vec<CyclicWord>,
}

impl SymmetrizedSet {
    pub fn words(&self) -> &[ReducedWord] {
        &self.words
    }

    /// Distinct cyclic classes {core, core⁻¹} of the inputs.
    pub fn cores(&self) -> &[CyclicWord] {
        &self.cores
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, w: &ReducedWord) -> bool {
        self.words.binary_search(w).is_ok()
    }

    pub fn index_of(&self, w: &ReducedWord) -> Option<usize> {
        self.words.binary_search(w).ok()
    }

    pub fn max_len(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn min_len(&self) -> usize {
        self.words.iter().map(|w| w.len()).min().unwrap_or(0)
    }
}

/// Closes a relator set under cyclic reduction, cyclic permutation and inversion.
pub fn symmetrize(relators: &[ReducedWord]) -> Result<SymmetrizedSet, GscError> {
    let mut words = BTreeSet::new();
    let mut cores = BTreeSet::new();
    for r in relators {
        if r.is_empty() {
            return Err(GscError::EmptyRelator);
        }
        let (core, _) = cyclic_reduce(r);
        if core.is_empty() {
            return Err(GscError::EmptyRelator);
        }
        cores.insert(core.class_key());
        for rot in core.rotations() {
            words.insert(rot.inverse());
            words.insert(rot);
        }
    }
    Ok(SymmetrizedSet {
        words: words.into_iter().collect(),
        cores: cores.into_iter().collect(),
    })
}

/// Uniform random reduced word of exactly the requested length:
/// first letter uniform over 8, each following letter uniform over the
/// 7 non-cancelling choices.
pub fn random_reduced_word<R: Rng>(length: usize, rng: &mut R) -> ReducedWord {
    let mut letters = Vec::with_capacity(length);
    for _ in 0..length {
        let l = match letters.last().copied() {
            None => Letter(rng.gen_range(0..8u8)),
            Some(prev) => pick_non_inverse(prev, rng),
        };
        letters.push(l);
    }
    ReducedWord::from_reduced(letters)
}

fn pick_non_inverse<R: Rng>(prev: Letter, rng: &mut R) -> Letter {
    let forbidden = prev.inverse().code();
    let k = rng.gen_range(0..7u8);
    Letter(if k >= forbidden { k + 1 } else { k })
}

/// Seeded deterministic variant of [`random_reduced_word`].
pub fn seeded_reduced_word(length: usize, seed: u64) -> ReducedWord {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_reduced_word(length, &mut rng)
}

/// Seeded RNG used throughout for reproducible sampling.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// All reduced words of exactly length `n`, in lexicographic order.
/// Intended for small `n` (8·7^{n−1} words).
pub fn enumerate_reduced_words(n: usize) -> Vec<ReducedWord> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(n: usize, current: &mut Vec<Letter>, out: &mut Vec<ReducedWord>) {
        if current.len() == n {
            out.push(ReducedWord::from_reduced(current.clone()));
            return;
        }
        for l in Letter::all() {
            if current.last().map_or(true, |&p| p != l.inverse()) {
                current.push(l);
                rec(n, current, out);
                current.pop();
            }
        }
    }
    rec(n, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, false).unwrap()
    }

    #[test]
    fn inverse_pair_cancels() {
        let word = free_reduce(vec![Letter::new(0), Letter::new(1)]);
        assert!(word.is_empty());
    }

    #[test]
    fn inner_cancellation() {
        // a b B c -> a c
        let letters = "abBc"
            .chars()
            .map(|c| Letter::from_char(c).unwrap())
            .collect::<Vec<_>>();
        assert_eq!(free_reduce(letters), w("ac"));
    }

    #[test]
    fn parse_rejects_unreduced() {
        assert!(ReducedWord::parse("aA", false).is_err());
        assert!(ReducedWord::parse("aA", true).unwrap().is_empty());
    }

    #[test]
    fn cyclic_reduce_conjugate_of_generator() {
        let (core, conj) = cyclic_reduce(&w("abA"));
        assert_eq!(core.as_word(), w("b"));
        assert_eq!(conj, w("a"));
    }

    #[test]
    fn cyclic_reduce_already_reduced() {
        let (core, conj) = cyclic_reduce(&w("ab"));
        assert_eq!(core.len(), 2);
        assert!(conj.is_empty());
    }

    #[test]
    fn symmetrize_single_generator() {
        let set = symmetrize(&[w("a")]).unwrap();
        assert_eq!(set.words(), &[w("a"), w("A")]);
    }

    #[test]
    fn symmetrize_two_letter_relator() {
        let set = symmetrize(&[w("ab")]).unwrap();
        let expect: BTreeSet<_> = ["ab", "ba", "BA", "AB"].iter().map(|s| w(s)).collect();
        assert_eq!(set.words().iter().cloned().collect::<BTreeSet<_>>(), expect);
    }

    #[test]
    fn symmetrize_rejects_empty() {
        assert!(symmetrize(&[ReducedWord::empty()]).is_err());
    }

    #[test]
    fn symmetrize_length12_gives_24_when_all_shifts_distinct() {
        // brute-force dedup oracle over several seeds
        let mut hits = 0;
        for seed in 0..10u64 {
            let cand = seeded_reduced_word(12, seed * 911 + 17);
            let (core, _) = cyclic_reduce(&cand);
            if core.len() != 12 {
                continue;
            }
            let set = symmetrize(&[core.as_word()]).unwrap();
            let mut naive = BTreeSet::new();
            for rot in core.rotations() {
                naive.insert(rot.inverse());
                naive.insert(rot);
            }
            assert_eq!(set.len(), naive.len());
            if set.len() == 24 {
                hits += 1;
            }
        }
        assert!(hits > 0, "expected at least one fully distinct sample");
    }

    #[test]
    fn subwords_basic() {
        let word = w("abc");
        let subs = word.subwords(2);
        let expect: BTreeSet<_> = [w("ab"), w("bc")].into_iter().collect();
        assert_eq!(subs, expect);
        assert_eq!(word.subwords(3).len(), 1);
        assert!(word.subwords(4).is_empty());
    }

    #[test]
    fn subword_counts_match_sliding_window() {
        for seed in 0..20 {
            let word = seeded_reduced_word(17, seed);
            for k in 1..=17 {
                let naive: BTreeSet<ReducedWord> = (0..=(17 - k))
                    .map(|i| ReducedWord::from_reduced(word.letters()[i..i + k].to_vec()))
                    .collect();
                assert_eq!(word.subwords(k), naive);
            }
        }
    }

    #[test]
    fn random_word_deterministic_and_reduced() {
        assert!(seeded_reduced_word(0, 5).is_empty());
        let a = seeded_reduced_word(64, 42);
        let b = seeded_reduced_word(64, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn reduced_word_counts_match_growth_formula() {
        // 8·7^{n-1} reduced words of length n, exhaustively for n <= 6
        let mut expect = 8u64;
        for n in 1..=6 {
            assert_eq!(enumerate_reduced_words(n).len() as u64, expect);
            expect *= 7;
        }
    }

    #[test]
    fn first_letter_distribution_uniform() {
        let mut rng = seeded_rng(7);
        let mut counts = [0u64; 8];
        let n = 100_000;
        for _ in 0..n {
            let word = random_reduced_word(1, &mut rng);
            counts[word.letters()[0].code() as usize] += 1;
        }
        // expectation n/8, sd = sqrt(n·p(1-p)) ≈ 104.6; allow 5 sigma
        let expect = n as f64 / 8.0;
        let sd = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 5.0 * sd, "counts: {counts:?}");
        }
    }

    #[test]
    fn symmetrize_is_fixed_point() {
        let set = symmetrize(&[w("abcd"), w("acbd")]).unwrap();
        let again = symmetrize(set.words()).unwrap();
        assert_eq!(set.words(), again.words());
    }
}
