//! Exact finite unions of closed rational intervals inside `[0, 1]`.
//!
//! Every set is kept in a canonical form: intervals sorted by their left
//! endpoint, pairwise disjoint, overlapping or touching neighbours merged,
//! and zero-length pieces dropped. Two sets are therefore equal as Lebesgue
//! classes exactly when their canonical forms are equal.
//!
//! No floating point is used anywhere in this module.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{fmt_fraction, is_probability, parse_rational, Rational};

/// A closed interval `[lo, hi]` with `0 <= lo <= hi <= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if !is_probability(&lo) || !is_probability(&hi) || lo > hi {
            return Err(Error::invalid(format!(
                "interval [{}, {}] is not inside [0, 1] or has lo > hi",
                fmt_fraction(&lo),
                fmt_fraction(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval {
            lo: Rational::zero(),
            hi: Rational::one(),
        }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// A finite union of closed intervals in `[0, 1]`, in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn unit() -> Self {
        IntervalSet {
            intervals: vec![Interval::unit()],
        }
    }

    /// Builds the canonical form of an arbitrary collection of intervals.
    pub fn from_intervals(intervals: impl IntoIterator<Item = Interval>) -> Self {
        let mut items: Vec<Interval> = intervals
            .into_iter()
            .filter(|iv| iv.lo < iv.hi)
            .collect();
        items.sort_by(|a, b| a.lo.cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(items.len());
        for iv in items {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        IntervalSet { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.hi < *x);
        self.intervals.get(idx).is_some_and(|iv| iv.contains(x))
    }

    /// Lebesgue measure, exactly.
    pub fn measure(&self) -> Rational {
        self.intervals
            .iter()
            .fold(Rational::zero(), |acc, iv| acc + iv.length())
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        // Both inputs are sorted; a merge keeps this linear.
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let take_left = match (self.intervals.get(i), other.intervals.get(j)) {
                (Some(a), Some(b)) => a.lo <= b.lo,
                (Some(_), None) => true,
                _ => false,
            };
            let next = if take_left {
                i += 1;
                &self.intervals[i - 1]
            } else {
                j += 1;
                &other.intervals[j - 1]
            };
            match out.last_mut() {
                Some(Interval { hi, .. }) if next.lo <= *hi => {
                    if next.hi > *hi {
                        *hi = next.hi.clone();
                    }
                }
                _ => out.push(next.clone()),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.len() && j < other.len() {
            let a = &self.intervals[i];
            let b = &other.intervals[j];
            let lo = if a.lo >= b.lo { &a.lo } else { &b.lo };
            let hi = if a.hi <= b.hi { &a.hi } else { &b.hi };
            // Single points are dropped by the canonical form.
            if lo < hi {
                out.push(Interval {
                    lo: lo.clone(),
                    hi: hi.clone(),
                });
            }
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }

    /// `[0, 1]` minus the set. Open gaps are represented by their closures,
    /// which changes nothing measure-theoretically.
    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut cursor = Rational::zero();
        for iv in &self.intervals {
            if cursor < iv.lo {
                out.push(Interval {
                    lo: cursor.clone(),
                    hi: iv.lo.clone(),
                });
            }
            cursor = iv.hi.clone();
        }
        if cursor < Rational::one() {
            out.push(Interval {
                lo: cursor,
                hi: Rational::one(),
            });
        }
        IntervalSet { intervals: out }
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        self.intersect(&other.complement())
    }

    /// Parses the text format written by [`IntervalSet::to_text`]: one
    /// interval per line as `lo hi`, each a fraction `num/den`; blank lines
    /// and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<IntervalSet> {
        let mut intervals = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(lo), Some(hi), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(line_no, "expected two endpoints `lo hi`"));
            };
            let lo = parse_rational(lo).map_err(|e| Error::parse(line_no, e))?;
            let hi = parse_rational(hi).map_err(|e| Error::parse(line_no, e))?;
            let iv = Interval::new(lo, hi).map_err(|e| Error::parse(line_no, e.to_string()))?;
            intervals.push(iv);
        }
        Ok(IntervalSet::from_intervals(intervals))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for iv in &self.intervals {
            s.push_str(&fmt_fraction(&iv.lo));
            s.push(' ');
            s.push_str(&fmt_fraction(&iv.hi));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {}]", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

/// The Bohr set `{α ∈ [0,1] : ‖dα‖ ≤ δ}`.
///
/// It is the union over `k = 0..=|d|` of `[(k − δ)/|d|, (k + δ)/|d|]`
/// clipped to `[0, 1]`, so its measure is `min(1, 2δ)`.
pub fn bohr_set(d: &BigInt, delta: &Rational) -> Result<IntervalSet> {
    if d.is_zero() {
        return Err(Error::invalid("Bohr set frequency d must be nonzero"));
    }
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    if delta.is_negative() || *delta > half {
        return Err(Error::invalid(format!(
            "Bohr set radius must lie in [0, 1/2], got {}",
            fmt_fraction(delta)
        )));
    }
    if delta.is_zero() {
        return Ok(IntervalSet::empty());
    }
    let n = d.abs();
    let width = delta / Rational::from_integer(n.clone());
    let zero = Rational::zero();
    let one = Rational::one();
    let mut intervals = Vec::new();
    let mut k = BigInt::zero();
    while k <= n {
        let centre = Rational::new(k.clone(), n.clone());
        let lo = (&centre - &width).max(zero.clone());
        let hi = (&centre + &width).min(one.clone());
        intervals.push(Interval { lo, hi });
        k += 1;
    }
    Ok(IntervalSet::from_intervals(intervals))
}

/// `{α : min over nonzero d ∈ B − B of ‖dα‖ ≤ ε / #(B − B)}`.
///
/// The strict inequality of the classical statement is replaced by a closed
/// one; the two sets differ by finitely many points. The measure is at most
/// `2ε`.
pub fn small_denominator_set(set: &[BigInt], epsilon: &Rational) -> Result<IntervalSet> {
    let distinct: BTreeSet<&BigInt> = set.iter().collect();
    if distinct.len() < 2 {
        return Err(Error::invalid(
            "need at least two distinct elements to form a nonzero difference",
        ));
    }
    if !epsilon.is_positive() || *epsilon >= Rational::one() {
        return Err(Error::invalid("epsilon must lie in (0, 1)"));
    }
    let elems: Vec<&BigInt> = distinct.into_iter().collect();
    let mut diff_set: BTreeSet<BigInt> = BTreeSet::new();
    for a in &elems {
        for b in &elems {
            diff_set.insert(*a - *b);
        }
    }
    let radius = epsilon / Rational::from_integer(BigInt::from(diff_set.len()));
    // B(d, δ) = B(−d, δ), so positive differences suffice.
    let mut out = IntervalSet::empty();
    for d in diff_set.iter().filter(|d| d.is_positive()) {
        out = out.union(&bohr_set(d, &radius)?);
    }
    Ok(out)
}

/// `(Σ λ(A_n))² / Σ_{m,n} λ(A_n ∩ A_m)`, the finite-N quantity in the
/// Erdős–Rényi form of the Borel–Cantelli lemma.
pub fn borel_cantelli_ratio(sets: &[IntervalSet]) -> Result<Rational> {
    if sets.is_empty() {
        return Err(Error::invalid("borel_cantelli_ratio needs at least one set"));
    }
    let measures: Vec<Rational> = sets.iter().map(IntervalSet::measure).collect();
    let total = measures.iter().fold(Rational::zero(), |acc, m| acc + m);
    if total.is_zero() {
        return Err(Error::invalid(
            "all sets have measure zero; the ratio is undefined",
        ));
    }
    let mut denom = measures.iter().fold(Rational::zero(), |acc, m| acc + m);
    for (n, a) in sets.iter().enumerate() {
        for b in &sets[n + 1..] {
            denom += a.intersect(b).measure() * Rational::from_integer(BigInt::from(2));
        }
    }
    Ok(&total * &total / denom)
}
