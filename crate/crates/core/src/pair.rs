//! Pair correlation statistics of `(⟨α a_n⟩)_n`.
//!
//! `R([−s, s], α, N) = (1/N) #{1 ≤ i ≠ j ≤ N : ‖θ_i − θ_j‖ ≤ s/N}` with the
//! closed threshold.
//!
//! For a rational `α = P/Q` every fractional part is `r_i / Q` with the
//! integer residue `r_i = P a_i mod Q`, so the whole statistic reduces to
//! integer comparisons: the circular distance `D` of two residues satisfies
//! `D / Q ≤ s / N` iff `D ≤ W := ⌊s Q / N⌋`. The fast counter sorts the
//! residues and sweeps two pointers, once for `D ≤ W` and once for the
//! wrap-around `D ≥ Q − W`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::rep_counts;
use crate::error::{Error, Result};
use crate::growth::{psi, GrowthFunction, ThetaFunction};
use crate::numeric::{fmt_fraction, from_f64, parse_bigint, parse_rational, to_f64, Rational};
use crate::sequence::{BlockKind, BlockSequence};

/// Guard bits required by fixed-point evaluation.
pub const DEFAULT_GUARD_BITS: u64 = 64;

/// A binary fraction `k / 2^L` standing for an unknown real in
/// `[k / 2^L, (k + 1) / 2^L)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPoint {
    numerator: BigUint,
    width: u64,
    guard: u64,
}

impl FixedPoint {
    pub fn new(numerator: BigUint, width: u64) -> Result<Self> {
        if width == 0 || numerator.bits() > width {
            return Err(Error::invalid(format!(
                "fixed-point numerator must be below 2^{width}"
            )));
        }
        Ok(FixedPoint {
            numerator,
            width,
            guard: DEFAULT_GUARD_BITS,
        })
    }

    pub fn with_guard(mut self, guard: u64) -> Self {
        self.guard = guard;
        self
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn guard(&self) -> u64 {
        self.guard
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }
}

/// The dilation factor `α ∈ [0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Alpha {
    Rational(Rational),
    FixedPoint(FixedPoint),
}

impl Alpha {
    /// `p / q` reduced modulo 1 into `[0, 1)`.
    pub fn rational(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let q = q.into();
        if q.is_zero() {
            return Err(Error::invalid("alpha denominator must be nonzero"));
        }
        Ok(Self::from_rational(&Rational::new(p.into(), q)))
    }

    pub fn from_rational(r: &Rational) -> Self {
        Alpha::Rational(r - r.floor())
    }

    pub fn zero() -> Self {
        Alpha::Rational(Rational::zero())
    }

    /// The exact value for rational mode; the lower end of the bracket for
    /// fixed point.
    pub fn value(&self) -> Rational {
        match self {
            Alpha::Rational(r) => r.clone(),
            Alpha::FixedPoint(fx) => Rational::new(
                BigInt::from(fx.numerator.clone()),
                BigInt::one() << fx.width as usize,
            ),
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Alpha::Rational(r) => Some(r),
            Alpha::FixedPoint(_) => None,
        }
    }

    /// `1 − α`, reduced into `[0, 1)`.
    pub fn reflect(&self) -> Result<Self> {
        match self {
            Alpha::Rational(r) => Ok(Self::from_rational(&(Rational::one() - r))),
            Alpha::FixedPoint(_) => Err(Error::invalid("reflection is only defined in rational mode")),
        }
    }

    /// Parses `p/q`, a decimal, or `fixed(k, L)` for `k / 2^L` in fixed-point
    /// mode.
    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        if let Some(inner) = t.strip_prefix("fixed(").and_then(|s| s.strip_suffix(')')) {
            let (k, width) = inner
                .split_once(',')
                .ok_or_else(|| format!("expected fixed(k, L), got `{t}`"))?;
            let k = parse_bigint(k)?
                .to_biguint()
                .ok_or_else(|| "fixed-point numerator must be nonnegative".to_string())?;
            let width: u64 = width
                .trim()
                .parse()
                .map_err(|_| format!("bad fixed-point width in `{t}`"))?;
            if width > 1 << 24 {
                return Err(format!("fixed-point width {width} is unreasonably large"));
            }
            return FixedPoint::new(k, width)
                .map(Alpha::FixedPoint)
                .map_err(|e| e.to_string());
        }
        parse_rational(t).map(|r| Self::from_rational(&r))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Rational(r) => write!(f, "{}", fmt_fraction(r)),
            Alpha::FixedPoint(fx) => write!(f, "fixed({}, {})", fx.numerator, fx.width),
        }
    }
}

/// A fractional part `⟨α a⟩`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FracValue {
    Exact(Rational),
    /// The true value lies in `[value, value + 2^{-certified_bits})` modulo 1.
    Approx { value: Rational, certified_bits: u64 },
}

impl FracValue {
    pub fn value(&self) -> &Rational {
        match self {
            FracValue::Exact(v) | FracValue::Approx { value: v, .. } => v,
        }
    }
}

/// `⟨α a⟩`. Rational mode returns `(p a mod q) / q` exactly; fixed-point mode
/// needs `bits(a) + guard ≤ L` and certifies an error below `2^{-guard}`.
pub fn frac_mult(alpha: &Alpha, a: &BigInt) -> Result<FracValue> {
    match alpha {
        Alpha::Rational(r) => {
            let q = r.denom();
            let rem = (r.numer() * a).mod_floor(q);
            Ok(FracValue::Exact(Rational::new(rem, q.clone())))
        }
        Alpha::FixedPoint(fx) => {
            check_fixed_precision(fx, a.bits())?;
            let modulus = BigInt::one() << fx.width as usize;
            let rem = (BigInt::from(fx.numerator.clone()) * a).mod_floor(&modulus);
            Ok(FracValue::Approx {
                value: Rational::new(rem, modulus),
                certified_bits: fx.width - a.bits(),
            })
        }
    }
}

fn check_fixed_precision(fx: &FixedPoint, bits: u64) -> Result<()> {
    let required = bits.saturating_add(fx.guard);
    if required > fx.width {
        return Err(Error::PrecisionExhausted {
            required_width: required,
            width: fx.width,
        });
    }
    Ok(())
}

/// An exact pair count and the statistic derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCorrelation {
    pub n: usize,
    /// Ordered pairs `(i, j)`, `i ≠ j`, within the threshold.
    pub ordered_pairs: u128,
}

impl PairCorrelation {
    pub fn r(&self) -> f64 {
        self.ordered_pairs as f64 / self.n as f64
    }

    pub fn r_exact(&self) -> Rational {
        Rational::new(BigInt::from(self.ordered_pairs), BigInt::from(self.n))
    }
}

fn check_args(elements: &[BigInt], s: &Rational) -> Result<()> {
    if elements.len() < 2 {
        return Err(Error::invalid("pair correlation needs N >= 2"));
    }
    if s.is_negative() {
        return Err(Error::invalid("s must be nonnegative"));
    }
    Ok(())
}

trait Residue: Ord + Clone + Send + Sync {
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
}

impl Residue for u128 {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
}

impl Residue for BigUint {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
}

/// Unordered pairs of sorted residues modulo `q` at circular distance at
/// most `w`; `w = None` counts nothing.
fn count_close_sorted<T: Residue>(sorted: &[T], q: &T, w: Option<&T>, zero: &T) -> u128 {
    let n = sorted.len();
    let all = (n as u128) * (n as u128).saturating_sub(1) / 2;
    let Some(w) = w else { return 0 };
    // 2w ≥ q: every distance in [0, q) is within w on one side of the circle.
    if w.plus(w) >= *q {
        return all;
    }
    // D = r_j − r_i ≤ w.
    let mut near: u128 = 0;
    let mut left = 0;
    for right in 0..n {
        while sorted[right] > sorted[left].plus(w) {
            left += 1;
        }
        near += (right - left) as u128;
    }
    // q − D ≤ w, i.e. r_j ≥ r_i + (q − w). Disjoint from the first case
    // because w < q/2.
    let mut wrap: u128 = 0;
    if w > zero {
        let gap = q.minus(w);
        let mut j = 0;
        for i in 0..n {
            let target = sorted[i].plus(&gap);
            while j < n && sorted[j] < target {
                j += 1;
            }
            wrap += (n - j) as u128;
        }
    }
    near + wrap
}

/// Residues of `a_i` modulo `q` scaled by `p`, and the modulus, in the
/// narrowest representation that fits.
enum ResidueSet {
    Small { r: Vec<u128>, q: u128 },
    Big { r: Vec<BigUint>, q: BigUint },
}

impl ResidueSet {
    fn new(p: &BigInt, q: &BigInt, elements: &[BigInt]) -> Self {
        let residues: Vec<BigUint> = elements
            .par_iter()
            .map(|a| {
                (p * a)
                    .mod_floor(q)
                    .to_biguint()
                    .expect("mod_floor by a positive modulus is nonnegative")
            })
            .collect();
        let qu = q.to_biguint().expect("positive modulus");
        if qu.bits() <= 126 {
            let mut r: Vec<u128> = residues.iter().map(|v| v.to_u128().unwrap()).collect();
            r.sort_unstable();
            ResidueSet::Small {
                r,
                q: qu.to_u128().unwrap(),
            }
        } else {
            let mut r = residues;
            r.par_sort_unstable();
            ResidueSet::Big { r, q: qu }
        }
    }

    fn modulus(&self) -> BigUint {
        match self {
            ResidueSet::Small { q, .. } => BigUint::from(*q),
            ResidueSet::Big { q, .. } => q.clone(),
        }
    }

    fn count(&self, w: Option<&BigUint>) -> u128 {
        match self {
            ResidueSet::Small { r, q } => {
                let w = w.map(|w| w.to_u128().unwrap_or(u128::MAX / 4).min(*q));
                count_close_sorted(r, q, w.as_ref(), &0u128)
            }
            ResidueSet::Big { r, q } => count_close_sorted(r, q, w, &BigUint::zero()),
        }
    }
}

/// `⌊s Q / N⌋`.
fn threshold(s: &Rational, q: &BigUint, n: usize) -> BigUint {
    let num = BigInt::from(q.clone()) * s.numer();
    let den = s.denom() * BigInt::from(n);
    num.div_floor(&den).to_biguint().expect("s >= 0")
}

/// The fast `O(N log N)` counter.
pub fn pair_correlation(elements: &[BigInt], alpha: &Alpha, s: &Rational) -> Result<PairCorrelation> {
    check_args(elements, s)?;
    let n = elements.len();
    let unordered = match alpha {
        Alpha::Rational(r) => {
            let set = ResidueSet::new(r.numer(), r.denom(), elements);
            let w = threshold(s, &set.modulus(), n);
            set.count(Some(&w))
        }
        Alpha::FixedPoint(fx) => {
            let max_bits = elements.iter().map(BigInt::bits).max().unwrap_or(0);
            check_fixed_precision(fx, max_bits)?;
            let q = BigInt::one() << fx.width as usize;
            let set = ResidueSet::new(&BigInt::from(fx.numerator.clone()), &q, elements);
            let w = threshold(s, &set.modulus(), n);
            // Each computed residue undershoots the true one by less than
            // a_i ≤ 2^max_bits, so a pairwise distance moves by less than
            // 2^(max_bits + 1). The count is certified only when shifting
            // the threshold by that margin changes nothing.
            let margin = BigUint::one() << (max_bits as usize + 1);
            let lower = (w >= margin).then(|| &w - &margin);
            let upper = &w + &margin + 1u32;
            let lo = set.count(lower.as_ref());
            let hi = set.count(Some(&upper));
            if lo != hi {
                return Err(Error::UndecidableTie);
            }
            lo
        }
    };
    Ok(PairCorrelation {
        n,
        ordered_pairs: unordered * 2,
    })
}

/// `‖x‖` for rational `x`.
fn dist_to_nearest_integer(x: &Rational) -> Rational {
    let frac = x - x.floor();
    let other = Rational::one() - &frac;
    if frac <= other {
        frac
    } else {
        other
    }
}

fn rational_alpha(alpha: &Alpha) -> Result<&Rational> {
    alpha
        .as_rational()
        .ok_or_else(|| Error::invalid("this counter only supports rational alpha"))
}

/// The `O(N²)` oracle. Every `θ_i` is `u_i / q` for the denominator `q` of
/// `α`, so `‖θ_i − θ_j‖ ≤ s/N` is tested as the cleared integer inequality
/// `min(|u_i − u_j|, q − |u_i − u_j|) · N · den(s) ≤ num(s) · q`.
pub fn pair_correlation_naive(elements: &[BigInt], alpha: &Alpha, s: &Rational) -> Result<PairCorrelation> {
    check_args(elements, s)?;
    let a = rational_alpha(alpha)?;
    let n = elements.len();
    let q = a.denom();
    let u: Vec<BigInt> = elements
        .iter()
        .map(|x| {
            let v = a * Rational::from_integer(x.clone());
            ((&v - v.floor()) * Rational::from_integer(q.clone())).to_integer()
        })
        .collect();
    let scale = BigInt::from(n) * s.denom();
    let rhs = s.numer() * q;
    let count = match (
        u.iter().map(ToPrimitive::to_i128).collect::<Option<Vec<i128>>>(),
        q.to_i128(),
        scale.to_i128(),
        rhs.to_i128(),
    ) {
        // q < 2^62 and N · den(s) < 2^62 keep every product below 2^124.
        (Some(u), Some(q), Some(scale), Some(rhs)) if q < 1 << 62 && scale < 1 << 62 => {
            naive_count(n, |i, j| {
                let d = (u[i] - u[j]).abs();
                d.min(q - d) * scale <= rhs
            })
        }
        _ => naive_count(n, |i, j| {
            let d = (&u[i] - &u[j]).abs();
            let other = q - &d;
            d.min(other) * &scale <= rhs
        }),
    };
    Ok(PairCorrelation { n, ordered_pairs: count })
}

fn naive_count(n: usize, close: impl Fn(usize, usize) -> bool + Sync) -> u128 {
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i && close(i, j)).count() as u128)
        .sum()
}

/// `R = (1/N) Σ_{d≠0} rep_{A_N,A_N}(d) 1[‖α d‖ ≤ s/N]`.
pub fn pair_correlation_via_reps(elements: &[BigInt], alpha: &Alpha, s: &Rational) -> Result<PairCorrelation> {
    check_args(elements, s)?;
    let a = rational_alpha(alpha)?;
    let n = elements.len();
    let reps = rep_counts(elements, elements)?;
    let bound = s / Rational::from_integer(BigInt::from(n));
    let mut count: u128 = 0;
    for (d, c) in reps.iter() {
        if d.is_zero() {
            continue;
        }
        if dist_to_nearest_integer(&(a * Rational::from_integer(d.clone()))) <= bound {
            count += c as u128;
        }
    }
    Ok(PairCorrelation { n, ordered_pairs: count })
}

/// The rational system with denominators in `⋃_j [b_j, B_j]`,
/// `B_j = 2^j / (f(2^j) √ϑ(2^j))`, `b_j = (2/3) B_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularSystemParams {
    pub f: GrowthFunction,
    pub theta: ThetaFunction,
}

impl RegularSystemParams {
    pub fn new(f: GrowthFunction, theta: ThetaFunction) -> Self {
        RegularSystemParams { f, theta }
    }

    pub fn upper(&self, j: u32) -> f64 {
        2f64.powi(j as i32) / (self.f.at_dyadic(j) * self.theta.at_dyadic(j).sqrt())
    }

    pub fn lower(&self, j: u32) -> f64 {
        2.0 / 3.0 * self.upper(j)
    }

    /// Integer denominators in `[b_j, B_j]`, or `None` if there are none.
    pub fn denominator_range(&self, j: u32) -> Option<(u64, u64)> {
        let lo = self.lower(j).ceil().max(1.0);
        let hi = self.upper(j).floor();
        (lo <= hi && hi < 2f64.powi(62)).then_some((lo as u64, hi as u64))
    }
}

/// Reduced `p/q` with `q ∈ [q_lo, q_hi]`, `0 < p < q`, by increasing `q` then
/// `p`, at most `limit` of them.
pub fn candidates_in_range(q_lo: u64, q_hi: u64, limit: usize) -> Vec<Rational> {
    let mut out = Vec::new();
    for q in q_lo.max(2)..=q_hi {
        for p in 1..q {
            if out.len() >= limit {
                return out;
            }
            if p.gcd(&q) == 1 {
                out.push(Rational::new(BigInt::from(p), BigInt::from(q)));
            }
        }
    }
    out
}

pub fn exceptional_alpha_candidates(params: &RegularSystemParams, j: u32, limit: usize) -> Result<Vec<Alpha>> {
    let (lo, hi) = params.denominator_range(j).ok_or_else(|| {
        Error::invalid(format!(
            "level {j} has no integer denominators in [b_j, B_j] = [{:.4}, {:.4}]",
            params.lower(j),
            params.upper(j)
        ))
    })?;
    Ok(candidates_in_range(lo, hi, limit)
        .into_iter()
        .map(Alpha::Rational)
        .collect())
}

/// Conservative position of `p/q` in the height-ordered system:
/// `⌈q² / (25π²)⌉`, at least 1.
pub fn rank_proxy(q: &BigInt) -> u64 {
    let q = q.to_f64().unwrap_or(f64::MAX);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    ((q * q) / (25.0 * pi2)).ceil().max(1.0).min(u64::MAX as f64) as u64
}

/// `p/q + η` with `η = scale · ψ(rank)`, `0 ≤ scale ≤ 1`, computed exactly
/// from the double value of `ψ`.
pub fn perturbed_alpha(
    candidate: &Alpha,
    params: &RegularSystemParams,
    rank: u64,
    scale: &Rational,
) -> Result<Alpha> {
    let base = rational_alpha(candidate)?;
    if scale.is_negative() || *scale > Rational::one() {
        return Err(Error::invalid("perturbation scale must lie in [0, 1]"));
    }
    let psi_value = from_f64(psi(&params.f, &params.theta, rank.max(1)))
        .ok_or_else(|| Error::invalid("psi is not finite"))?;
    let eta = scale * psi_value;
    Ok(Alpha::from_rational(&(base + eta)))
}

/// The largest `2^{-k}`, `k ≥ 0`, such that `2^{-k} ψ(rank) · max_abs ≤ s / (2N)`.
///
/// With this scale every difference `d` of the truncation that is a multiple
/// of `q` has `‖α d‖ ≤ s/(2N)`, so the perturbed point resolves like its
/// rational centre at that truncation.
pub fn resolving_scale(
    params: &RegularSystemParams,
    rank: u64,
    max_abs: &BigInt,
    n: usize,
    s: &Rational,
) -> Result<Rational> {
    if !s.is_positive() || n == 0 {
        return Err(Error::invalid("resolving scale needs s > 0 and N >= 1"));
    }
    let psi_value = from_f64(psi(&params.f, &params.theta, rank.max(1)))
        .ok_or_else(|| Error::invalid("psi is not finite"))?;
    let lhs = psi_value * Rational::from_integer(max_abs.abs());
    let rhs = s / Rational::from_integer(BigInt::from(2 * n));
    if lhs <= rhs {
        return Ok(Rational::one());
    }
    let ratio = &lhs / &rhs;
    // 2^k ≥ ratio; start from the bit-length estimate and correct.
    let mut k = ratio.ceil().to_integer().bits();
    let pow = |k: u64| Rational::from_integer(BigInt::one() << k as usize);
    while k > 0 && pow(k - 1) >= ratio {
        k -= 1;
    }
    while pow(k) < ratio {
        k += 1;
    }
    Ok(Rational::new(BigInt::one(), BigInt::one() << k as usize))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbePoint {
    pub level: u32,
    /// `N = T_j`.
    pub n: usize,
    pub r: f64,
    pub ordered_pairs: u128,
    /// `f(2^j)^{2γ−β} ϑ(2^j)^{1/3}`, the growth the lower bound predicts up
    /// to an unspecified constant.
    pub predicted: f64,
}

impl ProbePoint {
    pub fn ratio_to_prediction(&self) -> f64 {
        self.r / self.predicted
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub s: Rational,
    pub points: Vec<ProbePoint>,
}

pub fn divergence_probe(
    seq: &BlockSequence,
    alpha: &Alpha,
    s: &Rational,
    levels: &[u32],
    theta: &ThetaFunction,
) -> Result<Trajectory> {
    if !s.is_positive() {
        return Err(Error::invalid("the divergence probe needs s > 0"));
    }
    let p = seq.params();
    let mut points = Vec::with_capacity(levels.len());
    let mut last_n = 0;
    for &j in levels {
        let n = seq.checkpoint(j).ok_or_else(|| {
            Error::invalid(format!("level {j} is outside the built range 1..={}", p.j_max))
        })?;
        if n <= last_n {
            return Err(Error::invalid("probe levels must be strictly increasing"));
        }
        last_n = n;
        let pc = pair_correlation(seq.truncate(n)?, alpha, s)?;
        let predicted = p.f.at_dyadic(j).powf(2.0 * p.gamma - p.beta) * theta.at_dyadic(j).cbrt();
        points.push(ProbePoint {
            level: j,
            n,
            r: pc.r(),
            ordered_pairs: pc.ordered_pairs,
            predicted,
        });
    }
    Ok(Trajectory { s: s.clone(), points })
}

/// Chooses the exceptional candidate `index` at level `j` and perturbs it so
/// that it resolves like its centre at `T_{j_target}`.
pub fn targeted_alpha(
    seq: &BlockSequence,
    params: &RegularSystemParams,
    j: u32,
    index: usize,
    s: &Rational,
) -> Result<(Alpha, Rational)> {
    let candidates = exceptional_alpha_candidates(params, j, index + 1)?;
    let centre = candidates.get(index).cloned().ok_or_else(|| {
        Error::invalid(format!("level {j} has only {} candidates", candidates.len()))
    })?;
    let q = rational_alpha(&centre)?.denom().clone();
    let rank = rank_proxy(&q);
    let n = seq.checkpoint(j).ok_or_else(|| Error::invalid(format!("level {j} is not built")))?;
    let max_abs = seq.truncate(n)?.iter().map(|e| e.abs()).max().expect("nonempty");
    let scale = resolving_scale(params, rank, &max_abs, n, s)?;
    Ok((perturbed_alpha(&centre, params, rank, &scale)?, scale))
}

/// Number of elements in the arithmetic block of level `j`, if any.
pub fn arithmetic_block_len(seq: &BlockSequence, j: u32) -> usize {
    seq.block(j, BlockKind::Arithmetic).map_or(0, |b| b.len)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub s: Rational,
    pub r: f64,
    pub ordered_pairs: u128,
    /// `α = k / 2^width`.
    pub alpha: Alpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub s: Rational,
    pub mean_r: f64,
    /// Fraction of trials with `R > (1 + δ) 2s`.
    pub frac_exceeding: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub summary: Vec<McSummary>,
}

/// Smallest random-α denominator exponent.
pub const MC_MIN_WIDTH: u64 = 64;

/// Denominator exponent for random `α` on `elements`: `max(64, bits + 64)`.
///
/// With `α = k / 2^L` every element above `2^L` has `α a ≡ α (a mod 2^L)`,
/// so a fixed 64-bit denominator collapses whole geometric blocks onto one
/// point. Keeping 64 bits beyond the largest element avoids that.
pub fn mc_width(elements: &[BigInt]) -> u64 {
    let bits = elements.iter().map(BigInt::bits).max().unwrap_or(0);
    MC_MIN_WIDTH.max(bits + MC_MIN_WIDTH)
}

/// `k / 2^width` with `k` odd and uniform, from ChaCha8 stream `trial` of the
/// generator seeded with `seed`. Words are consumed little-endian; for
/// `width = 64` this is `(next_u64() | 1) / 2^64`.
pub fn random_dyadic_alpha(seed: u64, trial: usize, width: u64) -> Alpha {
    assert!(width >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let words = width.div_ceil(64) as usize;
    let digits: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
    let mut k = BigUint::from_slice(&digits.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect::<Vec<_>>());
    k &= (BigUint::one() << width as usize) - 1u32;
    k |= BigUint::one();
    Alpha::Rational(Rational::new(BigInt::from(k), BigInt::one() << width as usize))
}

pub fn monte_carlo_ppc(
    elements: &[BigInt],
    seed: u64,
    trials: usize,
    schedule: &[usize],
    s_values: &[Rational],
    delta: f64,
) -> Result<McReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if schedule.is_empty() || s_values.is_empty() {
        return Err(Error::invalid("schedule and s list must be nonempty"));
    }
    for &n in schedule {
        if n < 2 || n > elements.len() {
            return Err(Error::invalid(format!(
                "schedule entry {n} outside 2..={}",
                elements.len()
            )));
        }
    }
    if let Some(bad) = s_values.iter().find(|s| s.is_negative()) {
        return Err(Error::invalid(format!("s must be nonnegative, got {}", fmt_fraction(bad))));
    }
    let width = mc_width(elements);
    let per_trial: Vec<Result<Vec<McRow>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let alpha = random_dyadic_alpha(seed, trial, width);
            let mut rows = Vec::with_capacity(schedule.len() * s_values.len());
            for &n in schedule {
                for s in s_values {
                    let pc = pair_correlation(&elements[..n], &alpha, s)?;
                    rows.push(McRow {
                        trial,
                        seed,
                        n,
                        s: s.clone(),
                        r: pc.r(),
                        ordered_pairs: pc.ordered_pairs,
                        alpha: alpha.clone(),
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    let mut summary = Vec::new();
    for &n in schedule {
        for s in s_values {
            let sel: Vec<&McRow> = rows.iter().filter(|r| r.n == n && &r.s == s).collect();
            let mean_r = sel.iter().map(|r| r.r).sum::<f64>() / sel.len() as f64;
            let cut = (1.0 + delta) * 2.0 * to_f64(s);
            let frac_exceeding = sel.iter().filter(|r| r.r > cut).count() as f64 / sel.len() as f64;
            summary.push(McSummary {
                n,
                s: s.clone(),
                mean_r,
                frac_exceeding,
            });
        }
    }
    Ok(McReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, rat_int};
    use crate::sequence::{BlockParams, ClassicFamily, ClassicSequence};

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn identity(n: usize) -> Vec<BigInt> {
        ClassicSequence::new(ClassicFamily::Identity, n).unwrap().elements().to_vec()
    }

    fn all_counters(el: &[BigInt], alpha: &Alpha, s: &Rational) -> [u128; 3] {
        [
            pair_correlation(el, alpha, s).unwrap().ordered_pairs,
            pair_correlation_naive(el, alpha, s).unwrap().ordered_pairs,
            pair_correlation_via_reps(el, alpha, s).unwrap().ordered_pairs,
        ]
    }

    #[test]
    fn frac_mult_examples() {
        let a = Alpha::rational(3, 7).unwrap();
        assert_eq!(frac_mult(&a, &BigInt::from(10)).unwrap(), FracValue::Exact(rat(2, 7)));
        let h = Alpha::rational(1, 2).unwrap();
        assert_eq!(frac_mult(&h, &BigInt::from(3)).unwrap().value(), &rat(1, 2));
        let p = Alpha::rational(5, 11).unwrap();
        assert_eq!(frac_mult(&p, &BigInt::from(11)).unwrap().value(), &rat_int(0));
    }

    #[test]
    fn fixed_point_precision_guard() {
        let fx = FixedPoint::new(BigUint::from(3u32) << 60usize, 64).unwrap().with_guard(8);
        let alpha = Alpha::FixedPoint(fx);
        // bits(a) + 8 ≤ 64 for a < 2^56.
        let ok = frac_mult(&alpha, &BigInt::from(1u64 << 50)).unwrap();
        assert!(matches!(ok, FracValue::Approx { certified_bits: 13, .. }));
        let err = frac_mult(&alpha, &(BigInt::one() << 60usize)).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { required_width: 69, width: 64 }), "{err}");
    }

    #[test]
    fn fixed_point_agrees_with_rational_away_from_ties() {
        let width = 200u64;
        let k = BigUint::parse_bytes(b"1234567890123456789012345678901234567890123456789", 10).unwrap();
        let fx = Alpha::FixedPoint(FixedPoint::new(k.clone(), width).unwrap());
        let exact = Alpha::from_rational(&fx.value());
        let el = identity(300);
        for s in [rat(1, 2), rat_int(1), rat_int(2)] {
            let a = pair_correlation(&el, &fx, &s);
            let b = pair_correlation(&el, &exact, &s).unwrap();
            match a {
                Ok(a) => assert_eq!(a, b),
                Err(Error::UndecidableTie) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn fixed_point_reports_undecidable_ties() {
        // α ≈ 1/4 at 80 bits with N = 4 and s = 1: distances of exactly 1/4
        // sit on the threshold.
        let k = BigUint::one() << 78usize;
        let fx = Alpha::FixedPoint(FixedPoint::new(k, 80).unwrap().with_guard(8));
        let err = pair_correlation(&identity(4), &fx, &rat_int(1)).unwrap_err();
        assert!(matches!(err, Error::UndecidableTie));
    }

    #[test]
    fn alpha_zero_gives_n_minus_one() {
        for n in [2usize, 3, 10, 57] {
            for s in [rat_int(0), rat(1, 3), rat_int(5)] {
                let el = identity(n);
                let c = all_counters(&el, &Alpha::zero(), &s);
                assert_eq!(c, [(n * (n - 1)) as u128; 3]);
                assert_eq!(pair_correlation(&el, &Alpha::zero(), &s).unwrap().r_exact(), rat_int(n as i64 - 1));
            }
        }
    }

    #[test]
    fn half_on_identity() {
        let el = identity(4);
        let a = Alpha::rational(1, 2).unwrap();
        let pc = pair_correlation(&el, &a, &rat_int(1)).unwrap();
        assert_eq!(pc.r_exact(), rat_int(1));
        assert_eq!(all_counters(&el, &a, &rat_int(1)), [4; 3]);
    }

    #[test]
    fn closed_boundary_third() {
        let el = identity(3);
        let a = Alpha::rational(1, 3).unwrap();
        assert_eq!(pair_correlation(&el, &a, &rat_int(1)).unwrap().r_exact(), rat_int(2));
        assert_eq!(pair_correlation_via_reps(&el, &a, &rat_int(1)).unwrap().r_exact(), rat_int(2));
        // Just below the boundary nothing counts.
        assert_eq!(pair_correlation(&el, &a, &rat(99, 100)).unwrap().ordered_pairs, 0);
    }

    #[test]
    fn shift_and_reflection_invariance() {
        let el: Vec<BigInt> = (1..=40).map(|n: i64| BigInt::from(n * n + 3 * n)).collect();
        let a = Alpha::rational(17, 101).unwrap();
        let shifted = Alpha::rational(17 + 101, 101).unwrap();
        assert_eq!(a, shifted);
        let s = rat(3, 2);
        let base = pair_correlation(&el, &a, &s).unwrap();
        assert_eq!(pair_correlation(&el, &a.reflect().unwrap(), &s).unwrap(), base);
    }

    #[test]
    fn wrap_around_pairs_are_counted() {
        // θ = 0.01 and 0.99 are at circular distance 0.02.
        let el = ints(&[1, 99]);
        let a = Alpha::rational(1, 100).unwrap();
        assert_eq!(all_counters(&el, &a, &rat(1, 25)), [2; 3]);
        assert_eq!(all_counters(&el, &a, &rat(1, 26)), [0; 3]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = Alpha::rational(1, 3).unwrap();
        assert!(pair_correlation(&ints(&[1]), &a, &rat_int(1)).is_err());
        assert!(pair_correlation(&ints(&[1, 2]), &a, &rat_int(-1)).is_err());
        assert!(Alpha::rational(1, 0).is_err());
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(Alpha::parse("3/7").unwrap(), Alpha::rational(3, 7).unwrap());
        assert_eq!(Alpha::parse("1.25").unwrap(), Alpha::rational(1, 4).unwrap());
        let fx = Alpha::parse("fixed(5, 16)").unwrap();
        assert_eq!(fx.value(), rat(5, 65536));
        assert_eq!(Alpha::parse(&fx.to_string()).unwrap(), fx);
        for bad in ["", "fixed(5)", "fixed(-1, 8)", "fixed(300, 8)", "fixed(1, x)", "a/b"] {
            assert!(Alpha::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn candidates_range_examples() {
        assert_eq!(candidates_in_range(3, 3, 10), vec![rat(1, 3), rat(2, 3)]);
        assert_eq!(candidates_in_range(4, 6, 100).len(), 2 + 4 + 2);
        assert_eq!(candidates_in_range(4, 6, 3), vec![rat(1, 4), rat(3, 4), rat(1, 5)]);
    }

    #[test]
    fn regular_system_bounds_match_formula() {
        let f = GrowthFunction::ilog(1).unwrap();
        let params = RegularSystemParams::new(f, ThetaFunction::OnePlusLog);
        let x = 1024f64;
        let upper = x / (x.ln() * (1.0 + x.ln()).sqrt());
        assert!((params.upper(10) - upper).abs() < 1e-12 * upper);
        assert!((params.lower(10) - 2.0 / 3.0 * upper).abs() < 1e-12 * upper);
        let cands = exceptional_alpha_candidates(&params, 10, 10_000).unwrap();
        let (lo, hi) = params.denominator_range(10).unwrap();
        assert!(!cands.is_empty());
        for c in &cands {
            let r = c.as_rational().unwrap();
            let q = r.denom().to_u64().unwrap();
            assert!(q >= lo && q <= hi);
            assert!(r.numer().gcd(r.denom()).is_one());
            assert!(*r > rat_int(0) && *r < rat_int(1));
        }
        // Level 1: B_1 = 2 / (f(2) √ϑ(2)) < 1, no denominators.
        assert!(exceptional_alpha_candidates(&params, 1, 10).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let f = GrowthFunction::ilog(1).unwrap();
        let params = RegularSystemParams::new(f, ThetaFunction::OnePlusLog);
        let c = Alpha::rational(2, 7).unwrap();
        assert_eq!(perturbed_alpha(&c, &params, 5, &rat_int(0)).unwrap(), c);

        assert_eq!(rank_proxy(&BigInt::from(7)), 1);
        assert_eq!(rank_proxy(&BigInt::from(100)), 41);
        let rank = 1000;
        let half = perturbed_alpha(&c, &params, rank, &rat(1, 2)).unwrap();
        let eta = half.value() - c.value();
        let psi_r = from_f64(psi(&f, &ThetaFunction::OnePlusLog, rank)).unwrap();
        assert!(eta.is_positive() && eta <= psi_r);
        // ‖qα‖ = q η ≤ q ψ(i).
        let q_alpha = half.value() * rat_int(7);
        let dist = dist_to_nearest_integer(&q_alpha);
        assert_eq!(dist, &eta * rat_int(7));
        assert!(dist <= psi_r * rat_int(7));
        assert!(perturbed_alpha(&c, &params, rank, &rat(3, 2)).is_err());
    }

    #[test]
    fn resolving_scale_is_tight() {
        let f = GrowthFunction::ilog(1).unwrap();
        let params = RegularSystemParams::new(f, ThetaFunction::OnePlusLog);
        let max = BigInt::one() << 300usize;
        let s = rat_int(1);
        let scale = resolving_scale(&params, 3, &max, 1000, &s).unwrap();
        let psi_r = from_f64(psi(&f, &ThetaFunction::OnePlusLog, 3)).unwrap();
        let bound = rat(1, 2000);
        let eff = |sc: &Rational| sc * &psi_r * Rational::from_integer(max.clone());
        assert!(eff(&scale) <= bound);
        assert!(eff(&(&scale * rat_int(2))) > bound);
        assert_eq!(resolving_scale(&params, 3, &BigInt::from(1), 1, &rat_int(1)).unwrap(), rat_int(1));
    }

    #[test]
    fn probe_alpha_zero_diverges_trivially() {
        let f = GrowthFunction::ilog(1).unwrap();
        let seq = BlockSequence::build(BlockParams::balanced(f, 7)).unwrap();
        let t = divergence_probe(&seq, &Alpha::zero(), &rat_int(1), &[3, 5, 7], &ThetaFunction::OnePlusLog)
            .unwrap();
        for p in &t.points {
            assert_eq!(p.r, (p.n - 1) as f64);
            assert_eq!(Some(p.n), seq.checkpoint(p.level));
        }
        assert!(divergence_probe(&seq, &Alpha::zero(), &rat_int(1), &[5, 3], &ThetaFunction::OnePlusLog).is_err());
        assert!(divergence_probe(&seq, &Alpha::zero(), &rat_int(0), &[3], &ThetaFunction::OnePlusLog).is_err());
    }

    #[test]
    fn monte_carlo_is_deterministic_and_zero_s_is_empty() {
        let el = ClassicSequence::new(ClassicFamily::Power { d: 2 }, 400).unwrap().elements().to_vec();
        let run = || monte_carlo_ppc(&el, 42, 3, &[100, 400], &[rat_int(0), rat_int(1)], 0.5).unwrap();
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.rows.len(), 3 * 2 * 2);
        for row in a.rows.iter().filter(|r| r.s.is_zero()) {
            assert_eq!(row.r, 0.0);
        }
        assert_ne!(random_dyadic_alpha(42, 0, 64), random_dyadic_alpha(42, 1, 64));
        assert_eq!(mc_width(&el), 64 + 18);
        for width in [1u64, 64, 65, 300] {
            let v = random_dyadic_alpha(7, 3, width).value();
            assert_eq!(v.denom(), &(BigInt::one() << width as usize));
            assert!(v.numer().is_odd());
        }
        assert!(monte_carlo_ppc(&el, 1, 0, &[10], &[rat_int(1)], 0.5).is_err());
        assert!(monte_carlo_ppc(&el, 1, 1, &[401], &[rat_int(1)], 0.5).is_err());
    }
}
