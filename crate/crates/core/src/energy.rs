//! Representation counts and additive energy.
//!
//! `E(A) = #{(a, b, c, d) ∈ A⁴ : a + b = c + d} = Σ_d rep_{A,A}(d)²`.
//!
//! Elements of the block sequences reach thousands of bits and geometric
//! blocks make almost every difference distinct, so the counting kernels are
//! pair based. Three exact routes are provided:
//!
//! * [`EnergyMethod::HashMap`] keys a map by the exact big-integer
//!   difference. Memory is `O(#distinct differences)`.
//! * [`EnergyMethod::Fingerprint`] reduces every element modulo two 64-bit
//!   primes once, so a difference is fingerprinted in `O(1)`. Pairs are
//!   bucketed by fingerprint in several passes to bound memory, and every
//!   bucket holding more than one pair is re-checked with exact differences,
//!   which makes the count exact regardless of fingerprint collisions.
//! * [`EnergyMethod::SortedMerge`] streams the positive differences in
//!   increasing order through a heap of one cursor per element: `O(N)`
//!   memory, `O(N² log N)` time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::growth::GrowthFunction;
use crate::sequence::{BlockKind, BlockSequence};

/// Largest input accepted by the quadruple-enumeration oracle.
pub const BRUTE_FORCE_CAP: usize = 64;

/// `d ↦ rep_{X,Y}(d) = #{(x, y) ∈ X × Y : x − y = d}`, only nonzero counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepCounts {
    counts: HashMap<BigInt, u64>,
}

impl RepCounts {
    pub fn get(&self, d: &BigInt) -> u64 {
        self.counts.get(d).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BigInt, u64)> {
        self.counts.iter().map(|(d, &c)| (d, c))
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u128 {
        self.counts.values().map(|&c| c as u128).sum()
    }

    /// `Σ_d rep(d)²`.
    pub fn sum_of_squares(&self) -> BigInt {
        let s: u128 = self.counts.values().map(|&c| (c as u128) * (c as u128)).sum();
        BigInt::from(s)
    }

    /// Entries sorted by difference, for stable output.
    pub fn sorted(&self) -> Vec<(BigInt, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(d, &c)| (d.clone(), c)).collect();
        v.sort();
        v
    }
}

fn ensure_distinct(name: &str, set: &[BigInt]) -> Result<()> {
    let mut sorted: Vec<&BigInt> = set.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("{name} contains the duplicate element {}", w[0])));
    }
    Ok(())
}

pub fn rep_counts(x: &[BigInt], y: &[BigInt]) -> Result<RepCounts> {
    ensure_distinct("X", x)?;
    ensure_distinct("Y", y)?;
    let mut counts: HashMap<BigInt, u64> = HashMap::with_capacity(x.len().saturating_mul(y.len()).min(1 << 24));
    for a in x {
        for b in y {
            *counts.entry(a - b).or_insert(0) += 1;
        }
    }
    Ok(RepCounts { counts })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnergyMethod {
    HashMap,
    #[default]
    Fingerprint,
    SortedMerge,
}

/// Additive energy with the default exact kernel.
pub fn additive_energy(set: &[BigInt]) -> Result<BigInt> {
    additive_energy_with(set, EnergyMethod::default())
}

pub fn additive_energy_with(set: &[BigInt], method: EnergyMethod) -> Result<BigInt> {
    ensure_distinct("A", set)?;
    if set.is_empty() {
        return Ok(BigInt::zero());
    }
    let mut sorted = set.to_vec();
    sorted.sort();
    let n = sorted.len() as u128;
    // E = rep(0)² + 2 Σ_{d>0} rep(d)², rep(0) = #A.
    let positive = match method {
        EnergyMethod::HashMap => positive_squares_hashmap(&sorted),
        EnergyMethod::Fingerprint => positive_squares_fingerprint(&sorted),
        EnergyMethod::SortedMerge => positive_squares_merge(&sorted),
    };
    Ok(BigInt::from(n * n) + BigInt::from(positive) * 2u32)
}

/// Literal count of ordered quadruples with `a + b = c + d`, for `#A ≤ 64`.
pub fn additive_energy_bruteforce(set: &[BigInt]) -> Result<BigInt> {
    if set.len() > BRUTE_FORCE_CAP {
        return Err(Error::invalid(format!(
            "brute-force energy is capped at {BRUTE_FORCE_CAP} elements, got {}",
            set.len()
        )));
    }
    ensure_distinct("A", set)?;
    let mut count: u64 = 0;
    for a in set {
        for b in set {
            let s = a + b;
            for c in set {
                for d in set {
                    if c + d == s {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(BigInt::from(count))
}

fn positive_squares_hashmap(sorted: &[BigInt]) -> u128 {
    let mut counts: HashMap<BigInt, u64> = HashMap::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            *counts.entry(b - a).or_insert(0) += 1;
        }
    }
    counts.values().map(|&c| (c as u128) * (c as u128)).sum()
}

fn positive_squares_merge(sorted: &[BigInt]) -> u128 {
    // One cursor per left element i, pointing at the next right element j > i;
    // a_j − a_i grows with j so the heap yields differences in order.
    let mut heap: BinaryHeap<Reverse<(BigInt, usize, usize)>> = sorted
        .iter()
        .enumerate()
        .take(sorted.len().saturating_sub(1))
        .map(|(i, a)| Reverse((&sorted[i + 1] - a, i, i + 1)))
        .collect();
    let mut total: u128 = 0;
    let mut current: Option<BigInt> = None;
    let mut run: u128 = 0;
    while let Some(Reverse((d, i, j))) = heap.pop() {
        if current.as_ref() == Some(&d) {
            run += 1;
        } else {
            total += run * run;
            run = 1;
            current = Some(d);
        }
        if j + 1 < sorted.len() {
            heap.push(Reverse((&sorted[j + 1] - &sorted[i], i, j + 1)));
        }
    }
    total + run * run
}

const FP_PRIME_1: u64 = 0xFFFF_FFFF_FFFF_FFC5; // 2^64 − 59
const FP_PRIME_2: u64 = 0x1FFF_FFFF_FFFF_FFFF; // 2^61 − 1

/// Pairs buffered per pass before sorting.
const FINGERPRINT_PASS_PAIRS: u128 = 1 << 22;

#[derive(Clone, Copy)]
struct Residues {
    r1: u64,
    r2: u64,
}

fn residues(a: &BigInt) -> Residues {
    let r = |p: u64| a.mod_floor(&BigInt::from(p)).to_u64().expect("residue fits");
    Residues {
        r1: r(FP_PRIME_1),
        r2: r(FP_PRIME_2),
    }
}

#[inline]
fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a.wrapping_sub(b).wrapping_add(p)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct PairKey {
    k1: u64,
    k2: u64,
    i: u32,
    j: u32,
}

fn positive_squares_fingerprint(sorted: &[BigInt]) -> u128 {
    let n = sorted.len();
    if n < 2 {
        return 0;
    }
    let res: Vec<Residues> = sorted.par_iter().map(residues).collect();
    let pairs = (n as u128) * (n as u128 - 1) / 2;
    let passes = pairs.div_ceil(FINGERPRINT_PASS_PAIRS).max(1) as u64;

    (0..passes)
        .map(|pass| {
            let mut keys: Vec<PairKey> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let ri = res[i];
                    let res = &res;
                    (i + 1..n).filter_map(move |j| {
                        let k2 = sub_mod(res[j].r2, ri.r2, FP_PRIME_2);
                        (k2 % passes == pass).then(|| PairKey {
                            k1: sub_mod(res[j].r1, ri.r1, FP_PRIME_1),
                            k2,
                            i: i as u32,
                            j: j as u32,
                        })
                    })
                })
                .collect();
            keys.par_sort_unstable_by_key(|k| (k.k1, k.k2));
            sum_verified_runs(sorted, &keys)
        })
        .sum()
}

/// Sums `count²` over groups of pairs with equal exact difference, given
/// pairs sorted by fingerprint.
fn sum_verified_runs(sorted: &[BigInt], keys: &[PairKey]) -> u128 {
    let mut runs: Vec<&[PairKey]> = Vec::new();
    let mut total: u128 = 0;
    let mut start = 0;
    while start < keys.len() {
        let k = (keys[start].k1, keys[start].k2);
        let mut end = start + 1;
        while end < keys.len() && (keys[end].k1, keys[end].k2) == k {
            end += 1;
        }
        if end - start == 1 {
            total += 1;
        } else {
            runs.push(&keys[start..end]);
        }
        start = end;
    }
    total
        + runs
            .par_iter()
            .map(|run| {
                let mut diffs: Vec<BigInt> = run
                    .iter()
                    .map(|p| &sorted[p.j as usize] - &sorted[p.i as usize])
                    .collect();
                let first = &diffs[0];
                if diffs.iter().all(|d| d == first) {
                    let c = diffs.len() as u128;
                    return c * c;
                }
                diffs.sort_unstable();
                diffs
                    .chunk_by(|a, b| a == b)
                    .map(|g| (g.len() as u128) * (g.len() as u128))
                    .sum::<u128>()
            })
            .sum::<u128>()
}

/// Energy at one checkpoint of a block sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub level: u32,
    /// `N = T_j`.
    pub n: usize,
    pub energy: BigInt,
    /// `f(N)`.
    pub f_n: f64,
    /// `E(A_N) · f(N)^{3(β−γ)} / N³`.
    pub normalized: f64,
}

impl EnergyReport {
    pub fn new(level: u32, n: usize, energy: BigInt, f: &GrowthFunction, beta: f64, gamma: f64) -> Self {
        let f_n = f.eval(n as f64);
        let nf = n as f64;
        let normalized = energy.to_f64().unwrap_or(f64::INFINITY) * f_n.powf(3.0 * (beta - gamma))
            / (nf * nf * nf);
        EnergyReport {
            level,
            n,
            energy,
            f_n,
            normalized,
        }
    }

    /// `(#A)² ≤ E ≤ (#A)³`.
    pub fn within_trivial_bounds(&self) -> bool {
        let n = BigInt::from(self.n);
        let sq = &n * &n;
        self.energy >= sq && self.energy <= sq * n
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSummary {
    pub reports: Vec<EnergyReport>,
    pub min_normalized: f64,
    pub max_normalized: f64,
}

impl ScalingSummary {
    pub fn spread(&self) -> f64 {
        self.max_normalized / self.min_normalized
    }
}

/// Energy of `A_{T_j}` for each requested level, with the normalized ratio.
///
/// Levels whose arithmetic block is empty are rejected, since the ratio is
/// only meaningful once the arithmetic part has started.
pub fn energy_scaling(seq: &BlockSequence, levels: &[u32]) -> Result<ScalingSummary> {
    energy_scaling_with(seq, levels, EnergyMethod::default())
}

pub fn energy_scaling_with(
    seq: &BlockSequence,
    levels: &[u32],
    method: EnergyMethod,
) -> Result<ScalingSummary> {
    if levels.is_empty() {
        return Err(Error::invalid("no levels requested"));
    }
    let p = *seq.params();
    let mut reports = Vec::with_capacity(levels.len());
    for &j in levels {
        let n = seq.checkpoint(j).ok_or_else(|| {
            Error::invalid(format!("level {j} is outside the built range 1..={}", p.j_max))
        })?;
        let empty = seq.block(j, BlockKind::Arithmetic).is_none_or(|b| b.len == 0);
        if empty {
            return Err(Error::invalid(format!(
                "level {j} has an empty arithmetic block; its checkpoint is not comparable"
            )));
        }
        let energy = additive_energy_with(seq.truncate(n)?, method)?;
        reports.push(EnergyReport::new(j, n, energy, &p.f, p.beta, p.gamma));
    }
    let min_normalized = reports.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
    let max_normalized = reports.iter().map(|r| r.normalized).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingSummary {
        reports,
        min_normalized,
        max_normalized,
    })
}

/// Levels `2..=j_max` whose arithmetic block is nonempty.
pub fn levels_with_arithmetic_blocks(seq: &BlockSequence) -> Vec<u32> {
    seq.blocks()
        .iter()
        .filter(|b| b.kind == BlockKind::Arithmetic && b.len > 0)
        .map(|b| b.level)
        .collect()
}

/// Dense-range cross-check for polynomially growing sets: with the elements
/// in `[0, M)`, `E = Σ_s r(s)²` where `r` is the self-convolution of the
/// indicator. `O(M + N²)` time, `O(M)` memory.
pub fn additive_energy_dense(set: &[u64]) -> Result<u128> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("A contains a duplicate element"));
    }
    let Some(&max) = sorted.last() else {
        return Ok(0);
    };
    if max > (1 << 28) {
        return Err(Error::invalid("dense energy needs elements below 2^28"));
    }
    let mut sums = vec![0u32; 2 * max as usize + 1];
    for &a in &sorted {
        for &b in &sorted {
            sums[(a + b) as usize] += 1;
        }
    }
    Ok(sums.iter().map(|&c| (c as u128) * (c as u128)).sum())
}
