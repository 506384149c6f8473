//! Integer sequences: the interleaved arithmetic/geometric block
//! construction, classic comparison families, and the sequence file format.
//!
//! Level 1 is `P_A = ∅`, `P_G = {1, 2}`. For `j ≥ 2` the arithmetic block is
//! `⌊2^j f(2^j)^{-β}⌋` consecutive integers starting at `C_j`, followed by the
//! geometric block `2 C_j + 2^i` for `1 ≤ i ≤ ⌊f(2^j)^{-γ} 2^j (1 − f(2^j)^{γ−β})⌋`.
//! `C_j` is twice the largest element built so far, which is
//! `2 max P_G^(j−1)` whenever that block is nonempty.

use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::growth::{parse_growth, GrowthFunction};
use crate::numeric::{parse_bigint, parse_real};

/// Floors closer than this (relative) to an integer are flagged.
pub const FLOOR_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Arithmetic,
    Geometric,
}

impl BlockKind {
    pub fn tag(self) -> char {
        match self {
            BlockKind::Arithmetic => 'A',
            BlockKind::Geometric => 'G',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub level: u32,
    pub kind: BlockKind,
    /// Zero-based index of the first element of the block.
    pub start_index: usize,
    pub len: usize,
    /// Distance of the real block length from the nearest integer, before
    /// flooring. Zero for the fixed first level.
    pub floor_margin: f64,
    /// The real-valued length before flooring.
    pub raw_len: f64,
}

impl Block {
    pub fn near_floor_boundary(&self) -> bool {
        self.level > 1 && self.floor_margin <= FLOOR_SLACK * self.raw_len.abs().max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockParams {
    pub f: GrowthFunction,
    pub beta: f64,
    pub gamma: f64,
    pub j_max: u32,
}

impl BlockParams {
    /// The balanced choice `β = 2/3 = 2γ`.
    pub fn balanced(f: GrowthFunction, j_max: u32) -> Self {
        BlockParams {
            f,
            beta: 2.0 / 3.0,
            gamma: 1.0 / 3.0,
            j_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.gamma && self.gamma < self.beta && self.beta < 0.75) {
            return Err(Error::invalid(format!(
                "block parameters need 0 < gamma < beta < 3/4, got beta = {}, gamma = {}",
                self.beta, self.gamma
            )));
        }
        if self.j_max < 1 {
            return Err(Error::invalid("j_max must be at least 1"));
        }
        // 2^j is evaluated in f64 and geometric blocks hold 2^(~2^j) bits.
        if self.j_max > 40 {
            return Err(Error::invalid(format!("j_max = {} is beyond any feasible build", self.j_max)));
        }
        Ok(())
    }

    /// `T_{j_max}` from the block lengths alone, without building.
    pub fn expected_len(&self) -> usize {
        (2..=self.j_max).fold(2usize, |acc, j| {
            let a = floor_with_margin(arithmetic_len_raw(&self.f, self.beta, j)).0;
            let g = floor_with_margin(geometric_len_raw(&self.f, self.beta, self.gamma, j)).0;
            acc.saturating_add(a).saturating_add(g)
        })
    }
}

/// Real-valued arithmetic block length `2^j f(2^j)^{-β}`.
pub fn arithmetic_len_raw(f: &GrowthFunction, beta: f64, j: u32) -> f64 {
    2f64.powi(j as i32) * f.at_dyadic(j).powf(-beta)
}

/// Real-valued geometric block length `f(2^j)^{-γ} 2^j (1 − f(2^j)^{γ−β})`.
pub fn geometric_len_raw(f: &GrowthFunction, beta: f64, gamma: f64, j: u32) -> f64 {
    let fj = f.at_dyadic(j);
    fj.powf(-gamma) * 2f64.powi(j as i32) * (1.0 - fj.powf(gamma - beta))
}

fn floor_with_margin(x: f64) -> (usize, f64) {
    let fl = x.floor();
    let frac = x - fl;
    (fl.max(0.0) as usize, frac.min(1.0 - frac))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSequence {
    elements: Vec<BigInt>,
    blocks: Vec<Block>,
    params: BlockParams,
    /// `checkpoints[j - 1] = T_j`.
    checkpoints: Vec<usize>,
    /// `starts[j - 2] = C_j` for `j ≥ 2`.
    starts: Vec<BigInt>,
}

impl BlockSequence {
    pub fn build(params: BlockParams) -> Result<Self> {
        params.validate()?;
        let BlockParams { f, beta, gamma, j_max } = params;
        let mut elements: Vec<BigInt> = vec![BigInt::from(1), BigInt::from(2)];
        let mut blocks = vec![
            Block {
                level: 1,
                kind: BlockKind::Arithmetic,
                start_index: 0,
                len: 0,
                floor_margin: 0.0,
                raw_len: 0.0,
            },
            Block {
                level: 1,
                kind: BlockKind::Geometric,
                start_index: 0,
                len: 2,
                floor_margin: 0.0,
                raw_len: 2.0,
            },
        ];
        let mut checkpoints = vec![2];
        let mut starts = Vec::new();

        for j in 2..=j_max {
            let c_j: BigInt = elements.last().expect("level 1 is nonempty") * 2u32;

            let raw_a = arithmetic_len_raw(&f, beta, j);
            let (len_a, margin_a) = floor_with_margin(raw_a);
            blocks.push(Block {
                level: j,
                kind: BlockKind::Arithmetic,
                start_index: elements.len(),
                len: len_a,
                floor_margin: margin_a,
                raw_len: raw_a,
            });
            elements.reserve(len_a);
            for k in 0..len_a {
                elements.push(&c_j + k);
            }

            let raw_g = geometric_len_raw(&f, beta, gamma, j);
            let (len_g, margin_g) = floor_with_margin(raw_g);
            let base: BigInt = &c_j * 2u32;
            if len_a > 0 && len_g > 0 {
                let max_a = elements.last().unwrap();
                let min_g = &base + 2u32;
                if *max_a >= min_g {
                    return Err(Error::invalid(format!(
                        "level {j}: arithmetic block reaches {max_a}, not below the geometric block start {min_g}"
                    )));
                }
            }
            blocks.push(Block {
                level: j,
                kind: BlockKind::Geometric,
                start_index: elements.len(),
                len: len_g,
                floor_margin: margin_g,
                raw_len: raw_g,
            });
            elements.reserve(len_g);
            for i in 1..=len_g {
                elements.push(&base + (BigInt::one() << i));
            }
            checkpoints.push(elements.len());
            starts.push(c_j);
        }

        Ok(BlockSequence {
            elements,
            blocks,
            params,
            checkpoints,
            starts,
        })
    }

    pub fn elements(&self) -> &[BigInt] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn params(&self) -> &BlockParams {
        &self.params
    }

    /// `T_j`, the number of elements through level `j`.
    pub fn checkpoint(&self, j: u32) -> Option<usize> {
        (j >= 1).then(|| self.checkpoints.get(j as usize - 1).copied()).flatten()
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    /// `C_j` for `j ≥ 2`.
    pub fn block_start(&self, j: u32) -> Option<&BigInt> {
        (j >= 2).then(|| self.starts.get(j as usize - 2)).flatten()
    }

    pub fn block(&self, j: u32, kind: BlockKind) -> Option<&Block> {
        self.blocks.iter().find(|b| b.level == j && b.kind == kind)
    }

    pub fn block_elements(&self, block: &Block) -> &[BigInt] {
        &self.elements[block.start_index..block.start_index + block.len]
    }

    pub fn truncate(&self, n: usize) -> Result<&[BigInt]> {
        truncate(&self.elements, n)
    }

    /// Writes the sequence file: a comment header naming the parameters,
    /// informational block and checkpoint comments, then one decimal element
    /// per line.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        s.push_str("# ppclab block sequence\n");
        let _ = writeln!(s, "# param f = {}", p.f);
        let _ = writeln!(s, "# param beta = {:?}", p.beta);
        let _ = writeln!(s, "# param gamma = {:?}", p.gamma);
        let _ = writeln!(s, "# param jmax = {}", p.j_max);
        for b in &self.blocks {
            let _ = writeln!(
                s,
                "# block level={} kind={} start={} len={}",
                b.level,
                b.kind.tag(),
                b.start_index,
                b.len
            );
        }
        for (j, t) in self.checkpoints.iter().enumerate() {
            let _ = writeln!(s, "# checkpoint j={} T={}", j + 1, t);
        }
        for e in &self.elements {
            let _ = writeln!(s, "{e}");
        }
        s
    }
}

pub fn truncate(elements: &[BigInt], n: usize) -> Result<&[BigInt]> {
    if n == 0 || n > elements.len() {
        return Err(Error::invalid(format!(
            "truncation length {n} outside 1..={}",
            elements.len()
        )));
    }
    Ok(&elements[..n])
}

/// Bit length of `a_N`, the largest element of the truncation `A_N`.
pub fn max_element_bits(elements: &[BigInt], n: usize) -> Result<u64> {
    let trunc = truncate(elements, n)?;
    Ok(trunc.iter().map(|e| e.bits()).max().unwrap_or(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicFamily {
    Identity,
    /// `n^d`, `d ≥ 2`.
    Power { d: u32 },
    Primes,
    /// `q^n`, `q ≥ 2`.
    Lacunary { q: u32 },
}

impl fmt::Display for ClassicFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicFamily::Identity => write!(f, "identity"),
            ClassicFamily::Power { d } => write!(f, "power({d})"),
            ClassicFamily::Primes => write!(f, "primes"),
            ClassicFamily::Lacunary { q } => write!(f, "lacunary({q})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicSequence {
    family: ClassicFamily,
    elements: Vec<BigInt>,
}

impl ClassicSequence {
    pub fn new(family: ClassicFamily, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("classic sequence needs N >= 1"));
        }
        let elements: Vec<BigInt> = match family {
            ClassicFamily::Identity => (1..=count as u64).map(BigInt::from).collect(),
            ClassicFamily::Power { d } => {
                if d < 2 {
                    return Err(Error::invalid(format!("power family needs d >= 2, got {d}")));
                }
                (1..=count as u64).map(|n| BigInt::from(n).pow(d)).collect()
            }
            ClassicFamily::Primes => first_primes(count).into_iter().map(BigInt::from).collect(),
            ClassicFamily::Lacunary { q } => {
                if q < 2 {
                    return Err(Error::invalid(format!("lacunary family needs q >= 2, got {q}")));
                }
                let q = BigInt::from(q);
                let mut cur = q.clone();
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    out.push(cur.clone());
                    cur *= &q;
                }
                out
            }
        };
        Ok(ClassicSequence { family, elements })
    }

    pub fn family(&self) -> ClassicFamily {
        self.family
    }

    pub fn elements(&self) -> &[BigInt] {
        &self.elements
    }

    pub fn truncate(&self, n: usize) -> Result<&[BigInt]> {
        truncate(&self.elements, n)
    }
}

/// The first `count` primes by a sieve of Eratosthenes, with the bound
/// `p_n < n (ln n + ln ln n)` for `n ≥ 6`.
pub fn first_primes(count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    let n = count as f64;
    let bound = if count < 6 {
        15
    } else {
        (n * (n.ln() + n.ln().ln())).ceil() as usize + 1
    };
    let mut composite = vec![false; bound + 1];
    let mut primes = Vec::with_capacity(count);
    for i in 2..=bound {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        if primes.len() == count {
            break;
        }
        let mut m = i * i;
        while m <= bound {
            composite[m] = true;
            m += i;
        }
    }
    primes
}

/// Parses a classic family name: `identity`, `power(d)`, `primes`,
/// `lacunary(q)`.
pub fn parse_classic_family(text: &str) -> Result<ClassicFamily, String> {
    let t = text.trim();
    let arg = |prefix: &str| -> Option<Result<u32, String>> {
        let inner = t.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
        Some(inner.trim().parse::<u32>().map_err(|_| format!("bad parameter in `{t}`")))
    };
    match t {
        "identity" => Ok(ClassicFamily::Identity),
        "primes" => Ok(ClassicFamily::Primes),
        _ => {
            if let Some(d) = arg("power") {
                Ok(ClassicFamily::Power { d: d? })
            } else if let Some(q) = arg("lacunary") {
                Ok(ClassicFamily::Lacunary { q: q? })
            } else {
                Err(format!(
                    "unknown sequence family `{t}` (expected identity, power(d), primes, lacunary(q))"
                ))
            }
        }
    }
}

/// Contents of a sequence file.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFile {
    pub elements: Vec<BigInt>,
    /// Present when the file was written by [`BlockSequence::to_text`]; the
    /// block structure is rebuilt from these parameters and checked against
    /// the listed elements.
    pub blocks: Option<BlockSequence>,
}

impl SequenceFile {
    /// Parses one decimal integer per line; `#` lines are comments, except
    /// `# param key = value` lines which carry block parameters. Elements must
    /// be strictly increasing.
    pub fn parse(text: &str) -> Result<SequenceFile> {
        let mut elements: Vec<BigInt> = Vec::new();
        let mut f = None;
        let mut beta = None;
        let mut gamma = None;
        let mut jmax = None;
        let mut param_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(kv) = comment.trim().strip_prefix("param ") {
                    let (key, value) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::parse(line_no, "expected `# param key = value`"))?;
                    let value = value.trim();
                    let bad = |e: String| Error::parse(line_no, e);
                    match key.trim() {
                        "f" => f = Some(parse_growth(value).map_err(bad)?),
                        "beta" => beta = Some(parse_real(value).map_err(bad)?),
                        "gamma" => gamma = Some(parse_real(value).map_err(bad)?),
                        "jmax" => {
                            jmax = Some(value.parse::<u32>().map_err(|_| {
                                Error::parse(line_no, format!("jmax must be a positive integer, got `{value}`"))
                            })?)
                        }
                        other => {
                            return Err(Error::parse(line_no, format!("unknown parameter `{other}`")))
                        }
                    }
                    param_line = line_no;
                }
                continue;
            }
            let value = parse_bigint(line).map_err(|e| Error::parse(line_no, e))?;
            if let Some(prev) = elements.last() {
                if value <= *prev {
                    return Err(Error::parse(
                        line_no,
                        format!("elements must be strictly increasing ({value} after {prev})"),
                    ));
                }
            }
            elements.push(value);
        }
        if elements.is_empty() {
            return Err(Error::parse(text.lines().count().max(1), "sequence file has no elements"));
        }
        let blocks = match (f, beta, gamma, jmax) {
            (None, None, None, None) => None,
            (Some(f), Some(beta), Some(gamma), Some(j_max)) => {
                let params = BlockParams { f, beta, gamma, j_max };
                params.validate().map_err(|e| Error::parse(param_line, e.to_string()))?;
                // Cheap length check first; a header alone must not trigger
                // a large build.
                if params.expected_len() != elements.len() {
                    return Err(Error::parse(
                        param_line,
                        format!(
                            "block header implies {} elements, file lists {}",
                            params.expected_len(),
                            elements.len()
                        ),
                    ));
                }
                let built = BlockSequence::build(params)
                    .map_err(|e| Error::parse(param_line, e.to_string()))?;
                if built.elements() != elements.as_slice() {
                    return Err(Error::parse(
                        param_line,
                        "listed elements differ from the block construction named in the header",
                    ));
                }
                Some(built)
            }
            _ => {
                return Err(Error::parse(
                    param_line,
                    "block header needs all of f, beta, gamma and jmax",
                ))
            }
        };
        Ok(SequenceFile { elements, blocks })
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<SequenceFile> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }
}

/// Writes a plain element list (no block header).
pub fn elements_to_text(elements: &[BigInt]) -> String {
    let mut s = String::new();
    for e in elements {
        let _ = writeln!(s, "{e}");
    }
    s
}

pub fn is_strictly_increasing(elements: &[BigInt]) -> bool {
    elements.windows(2).all(|w| w[0] < w[1])
}

pub fn all_positive(elements: &[BigInt]) -> bool {
    elements.iter().all(|e| e.is_positive())
}

/// Length of the arithmetic block at `j` as an integer, for callers that
/// only need the count.
pub fn arithmetic_len(params: &BlockParams, j: u32) -> usize {
    if j < 2 {
        return 0;
    }
    arithmetic_len_raw(&params.f, params.beta, j).floor().to_usize().unwrap_or(0)
}
