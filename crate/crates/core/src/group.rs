//! The free group `F_n` as the vertex set of the `2n`-valent tree.
//!
//! Letters are small integers `0..2n`: generator `x_{j+1}` is `2j` and its
//! inverse is `2j + 1`, so inversion is `l ^ 1`. As strings, `x_{j+1}` is the
//! `j`-th lowercase letter and its inverse the matching uppercase letter; the
//! identity prints as `"1"`.
//!
//! Words are ordered length-first, then lexicographically by letter code
//! (`a < A < b < B < ...`). Every enumeration in the crate uses this order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Letter = u8;

/// Hard cap on enumerated group elements unless a caller supplies another.
pub const DEFAULT_ELEMENT_CAP: u128 = 10_000_000;

#[inline]
pub const fn inverse_letter(l: Letter) -> Letter {
    l ^ 1
}

pub fn letter_char(l: Letter) -> char {
    let base = if l & 1 == 0 { b'a' } else { b'A' };
    (base + l / 2) as char
}

pub fn char_letter(c: char) -> Option<Letter> {
    match c {
        'a'..='z' => Some((c as u8 - b'a') * 2),
        'A'..='Z' => Some((c as u8 - b'A') * 2 + 1),
        _ => None,
    }
}

/// Rank of the free group, `n ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GroupParams {
    rank: usize,
}

impl TryFrom<usize> for GroupParams {
    type Error = Error;
    fn try_from(rank: usize) -> Result<Self> {
        GroupParams::new(rank)
    }
}

impl From<GroupParams> for usize {
    fn from(p: GroupParams) -> usize {
        p.rank
    }
}

impl GroupParams {
    pub fn new(rank: usize) -> Result<Self> {
        if rank < 2 {
            return Err(Error::domain(format!(
                "rank {rank}: the free group must be non-elementary (n >= 2)"
            )));
        }
        if rank > 26 {
            return Err(Error::domain(format!("rank {rank}: at most 26 generators are printable")));
        }
        Ok(GroupParams { rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `2n`.
    pub fn alphabet_size(&self) -> usize {
        2 * self.rank
    }

    /// `2n − 1`, the number of reduced one-letter extensions of a nonempty word.
    pub fn branching(&self) -> usize {
        2 * self.rank - 1
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        0..self.alphabet_size() as Letter
    }

    pub fn check_letter(&self, l: Letter) -> Result<()> {
        if (l as usize) < self.alphabet_size() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "letter {l} outside the alphabet of F_{} (size {})",
                self.rank,
                self.alphabet_size()
            )))
        }
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(&self, letters: &[Letter]) -> Result<ReducedWord> {
        let mut stack: Vec<Letter> = Vec::with_capacity(letters.len());
        for &l in letters {
            self.check_letter(l)?;
            if stack.last() == Some(&inverse_letter(l)) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Ok(ReducedWord { letters: stack })
    }

    pub fn check_word(&self, w: &ReducedWord) -> Result<()> {
        w.letters.iter().try_for_each(|&l| self.check_letter(l))
    }

    /// Parses and reduces a word string such as `"aB"` or `"1"`.
    pub fn parse_word(&self, s: &str) -> Result<ReducedWord> {
        let letters = parse_letters(s)?;
        self.reduce(&letters)
    }

    /// The generator `x_{index+1}` or its inverse.
    pub fn generator(&self, index: usize, inverse: bool) -> ReducedWord {
        assert!(index < self.rank, "generator index out of range");
        ReducedWord { letters: vec![(2 * index) as Letter + inverse as Letter] }
    }

    /// `|S_m|`: 1 for `m = 0`, otherwise `2n(2n−1)^{m−1}`.
    pub fn sphere_count(&self, m: usize) -> u128 {
        if m == 0 {
            1
        } else {
            self.alphabet_size() as u128 * (self.branching() as u128).pow(m as u32 - 1)
        }
    }

    /// `|B_R| = 1 + 2n((2n−1)^R − 1)/(2n−2)`, by closed form.
    pub fn growth_count(&self, radius: usize) -> u128 {
        let b = self.branching() as u128;
        1 + self.alphabet_size() as u128 * (b.pow(radius as u32) - 1) / (b - 1)
    }

    pub fn ball(&self, radius: usize) -> Result<Vec<ReducedWord>> {
        self.ball_with_cap(radius, DEFAULT_ELEMENT_CAP)
    }

    pub fn ball_with_cap(&self, radius: usize, cap: u128) -> Result<Vec<ReducedWord>> {
        let requested = self.growth_count(radius);
        if requested > cap {
            return Err(Error::Budget { what: "ball", requested, cap });
        }
        let mut out = Vec::with_capacity(requested as usize);
        for m in 0..=radius {
            self.push_sphere(m, &mut out);
        }
        Ok(out)
    }

    pub fn sphere(&self, m: usize) -> Result<Vec<ReducedWord>> {
        self.sphere_with_cap(m, DEFAULT_ELEMENT_CAP)
    }

    pub fn sphere_with_cap(&self, m: usize, cap: u128) -> Result<Vec<ReducedWord>> {
        let requested = self.sphere_count(m);
        if requested > cap {
            return Err(Error::Budget { what: "sphere", requested, cap });
        }
        let mut out = Vec::with_capacity(requested as usize);
        self.push_sphere(m, &mut out);
        Ok(out)
    }

    fn push_sphere(&self, m: usize, out: &mut Vec<ReducedWord>) {
        let mut buf = Vec::with_capacity(m);
        self.extend_words(&mut buf, m, out);
    }

    fn extend_words(&self, buf: &mut Vec<Letter>, m: usize, out: &mut Vec<ReducedWord>) {
        if buf.len() == m {
            out.push(ReducedWord { letters: buf.clone() });
            return;
        }
        let forbidden = buf.last().map(|&l| inverse_letter(l));
        for l in self.letters() {
            if Some(l) == forbidden {
                continue;
            }
            buf.push(l);
            self.extend_words(buf, m, out);
            buf.pop();
        }
    }

    /// Position of `w` among the reduced words of length `|w|` in canonical order.
    pub fn word_index(&self, w: &ReducedWord) -> usize {
        let mut letters = w.letters.iter();
        let Some(&first) = letters.next() else {
            return 0;
        };
        let mut idx = first as usize;
        let mut prev = first;
        for &l in letters {
            idx = idx * self.branching() + child_rank(l, prev);
            prev = l;
        }
        idx
    }

    /// Inverse of [`GroupParams::word_index`].
    pub fn word_at(&self, length: usize, index: usize) -> ReducedWord {
        if length == 0 {
            return ReducedWord::identity();
        }
        let b = self.branching();
        let mut digits = vec![0usize; length];
        let mut rest = index;
        for d in digits.iter_mut().skip(1).rev() {
            *d = rest % b;
            rest /= b;
        }
        digits[0] = rest;
        let mut letters = Vec::with_capacity(length);
        let mut prev = digits[0] as Letter;
        letters.push(prev);
        for &d in &digits[1..] {
            let forbidden = inverse_letter(prev) as usize;
            let l = if d < forbidden { d } else { d + 1 } as Letter;
            letters.push(l);
            prev = l;
        }
        ReducedWord { letters }
    }
}

/// Rank of `l` among the `2n − 1` letters allowed after `prev`.
#[inline]
fn child_rank(l: Letter, prev: Letter) -> usize {
    let forbidden = inverse_letter(prev);
    if l < forbidden {
        l as usize
    } else {
        l as usize - 1
    }
}

fn parse_letters(s: &str) -> Result<Vec<Letter>> {
    let t = s.trim();
    if t == "1" || t.is_empty() {
        return Ok(Vec::new());
    }
    t.chars()
        .map(|c| char_letter(c).ok_or_else(|| Error::input(format!("invalid letter {c:?} in word {s:?}"))))
        .collect()
}

/// A freely reduced word: a group element and a vertex of the tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

impl ReducedWord {
    pub fn identity() -> Self {
        ReducedWord::default()
    }

    /// Wraps letters that are already known to be reduced.
    pub fn from_reduced(letters: Vec<Letter>) -> Result<Self> {
        if letters.windows(2).any(|p| p[1] == inverse_letter(p[0])) {
            return Err(Error::input("letter sequence is not freely reduced"));
        }
        Ok(ReducedWord { letters })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Word length, i.e. `d(o, g·o)` with `o` the identity vertex.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn inverse(&self) -> ReducedWord {
        ReducedWord {
            letters: self.letters.iter().rev().map(|&l| inverse_letter(l)).collect(),
        }
    }

    pub fn mul(&self, other: &ReducedWord) -> ReducedWord {
        let cancel = self.cancellation_with(other);
        let mut letters = Vec::with_capacity(self.len() + other.len() - 2 * cancel);
        letters.extend_from_slice(&self.letters[..self.len() - cancel]);
        letters.extend_from_slice(&other.letters[cancel..]);
        ReducedWord { letters }
    }

    /// Number of letters cancelled when `self` is followed by `other`.
    pub fn cancellation_with(&self, other: &ReducedWord) -> usize {
        self.letters
            .iter()
            .rev()
            .zip(other.letters.iter())
            .take_while(|(&a, &b)| b == inverse_letter(a))
            .count()
    }

    /// Appends one letter, reducing.
    pub fn push(&self, l: Letter) -> ReducedWord {
        let mut letters = self.letters.clone();
        if letters.last() == Some(&inverse_letter(l)) {
            letters.pop();
        } else {
            letters.push(l);
        }
        ReducedWord { letters }
    }

    pub fn pow(&self, exp: usize) -> ReducedWord {
        (0..exp).fold(ReducedWord::identity(), |acc, _| acc.mul(self))
    }

    pub fn prefix(&self, k: usize) -> ReducedWord {
        ReducedWord { letters: self.letters[..k.min(self.len())].to_vec() }
    }

    pub fn starts_with(&self, other: &ReducedWord) -> bool {
        self.letters.starts_with(&other.letters)
    }

    pub fn common_prefix_len(&self, other: &ReducedWord) -> usize {
        self.letters.iter().zip(&other.letters).take_while(|(a, b)| a == b).count()
    }
}

/// Gromov product `(g, h)_o = ½(|g| + |h| − |g⁻¹h|)` at the identity vertex.
pub fn gromov_product(g: &ReducedWord, h: &ReducedWord) -> usize {
    let twice = g.len() + h.len() - g.inverse().mul(h).len();
    debug_assert!(twice.is_multiple_of(2));
    twice / 2
}

impl Ord for ReducedWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for ReducedWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for &l in &self.letters {
            write!(f, "{}", letter_char(l))?;
        }
        Ok(())
    }
}

impl FromStr for ReducedWord {
    type Err = Error;

    /// Parses and freely reduces; the rank is not checked here.
    fn from_str(s: &str) -> Result<Self> {
        let mut stack = Vec::new();
        for l in parse_letters(s)? {
            if stack.last() == Some(&inverse_letter(l)) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Ok(ReducedWord { letters: stack })
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReducedWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
