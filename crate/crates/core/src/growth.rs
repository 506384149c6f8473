//! Preset growth functions `f` and companions `ϑ`, `ψ`.
//!
//! Every preset is clamped below a cutoff `x_min`, the smallest power of two
//! at which the preset exceeds [`CLAMP_LEVEL`]; below the cutoff the value
//! at `x_min` is returned. Above the cutoff each preset is increasing.
//!
//! Evaluation is in `f64`. Block lengths derived from these values are
//! floored, so a one-ulp error right at an integer boundary can shift a
//! length by one; the block builder records how close each floor was.

use std::fmt;
use std::ops::RangeInclusive;

use crate::numeric::{parse_rational, parse_real, to_f64};

/// Presets are clamped below the first dyadic point where they exceed this.
pub const CLAMP_LEVEL: f64 = 2.05;

/// Dyadic exponents scanned for `x_min`; `2^1023` is the largest finite
/// power of two in `f64`.
const MAX_DYADIC_EXPONENT: i32 = 1023;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthFamily {
    /// `log x · log log x · … · log_r x`.
    IteratedLog { r: u32 },
    /// `log x · … · log_r x · (log_r x)^eps`.
    IteratedLogEps { r: u32, eps: f64 },
    /// `x^a` with `0 < a <= 1/3`.
    Power { a: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFunction {
    family: GrowthFamily,
    x_min: f64,
}

/// `log` applied `k` times; `None` as soon as the argument leaves `(0, ∞)`.
fn iterated_log(x: f64, k: u32) -> Option<f64> {
    let mut v = x;
    for _ in 0..k {
        if v.is_nan() || v <= 0.0 {
            return None;
        }
        v = v.ln();
    }
    Some(v)
}

impl GrowthFamily {
    /// Unclamped value, or `None` where some factor is not positive.
    fn raw(&self, x: f64) -> Option<f64> {
        match *self {
            GrowthFamily::IteratedLog { r } => ilog_product(x, r),
            GrowthFamily::IteratedLogEps { r, eps } => {
                let base = ilog_product(x, r)?;
                let last = iterated_log(x, r)?;
                Some(base * last.powf(eps))
            }
            GrowthFamily::Power { a } => (x > 0.0).then(|| x.powf(a)),
        }
    }
}

fn ilog_product(x: f64, r: u32) -> Option<f64> {
    let mut product = 1.0;
    for k in 1..=r {
        let factor = iterated_log(x, k)?;
        if factor.is_nan() || factor <= 0.0 {
            return None;
        }
        product *= factor;
    }
    Some(product)
}

impl GrowthFunction {
    pub fn new(family: GrowthFamily) -> Result<Self, String> {
        match family {
            GrowthFamily::IteratedLog { r } | GrowthFamily::IteratedLogEps { r, .. } if r == 0 => {
                return Err("iterated-log depth r must be at least 1".into());
            }
            GrowthFamily::IteratedLogEps { eps, .. } if !(eps > 0.0 && eps.is_finite()) => {
                return Err(format!("ilog_eps needs eps > 0, got {eps}"));
            }
            GrowthFamily::Power { a } if !(a > 0.0 && a <= 1.0 / 3.0) => {
                return Err(format!("pow(a) needs 0 < a <= 1/3, got {a}"));
            }
            _ => {}
        }
        let x_min = (0..=MAX_DYADIC_EXPONENT)
            .map(|k| 2f64.powi(k))
            .find(|&x| family.raw(x).is_some_and(|v| v > CLAMP_LEVEL))
            .ok_or_else(|| {
                format!("{family:?} does not exceed {CLAMP_LEVEL} anywhere below 2^{MAX_DYADIC_EXPONENT}")
            })?;
        Ok(GrowthFunction { family, x_min })
    }

    pub fn ilog(r: u32) -> Result<Self, String> {
        Self::new(GrowthFamily::IteratedLog { r })
    }

    pub fn ilog_eps(r: u32, eps: f64) -> Result<Self, String> {
        Self::new(GrowthFamily::IteratedLogEps { r, eps })
    }

    pub fn power(a: f64) -> Result<Self, String> {
        Self::new(GrowthFamily::Power { a })
    }

    pub fn family(&self) -> GrowthFamily {
        self.family
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = if x >= self.x_min { x } else { self.x_min };
        self.family
            .raw(x)
            .expect("presets are positive above x_min")
    }

    /// Value at `2^j`, the form used by the block construction.
    pub fn at_dyadic(&self, j: u32) -> f64 {
        self.eval(2f64.powi(j as i32))
    }

    /// Lower order of infinity, `liminf log f(x) / log x`, from the family.
    pub fn lower_order(&self) -> f64 {
        match self.family {
            GrowthFamily::IteratedLog { .. } | GrowthFamily::IteratedLogEps { .. } => 0.0,
            GrowthFamily::Power { a } => a,
        }
    }

    /// `min log f(2^k) / log 2^k` over the given dyadic exponents.
    pub fn lower_order_estimate(&self, exponents: RangeInclusive<i32>) -> f64 {
        exponents
            .map(|k| {
                let x = 2f64.powi(k);
                self.eval(x).ln() / x.ln()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Analytic lower order together with the numerical estimate over
    /// `2^10 ..= 2^1000`.
    pub fn lower_order_report(&self) -> LowerOrder {
        LowerOrder {
            analytic: self.lower_order(),
            estimate: self.lower_order_estimate(LOWER_ORDER_GRID),
        }
    }

    /// `(1 + λ)^{-1}` for the lower order `λ`; the dimension bound for the
    /// exceptional set in the convergent case.
    pub fn predicted_hausdorff_dim(&self) -> f64 {
        1.0 / (1.0 + self.lower_order())
    }

    /// `max f(2x) / f(x)` over dyadic `x = 2^k`, `k` in the range.
    pub fn doubling_ratio_sup(&self, exponents: RangeInclusive<i32>) -> f64 {
        exponents
            .map(|k| {
                let x = 2f64.powi(k);
                self.eval(2.0 * x) / self.eval(x)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dyadic exponents used for the numerical lower-order estimate.
pub const LOWER_ORDER_GRID: RangeInclusive<i32> = 10..=1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerOrder {
    pub analytic: f64,
    pub estimate: f64,
}

impl LowerOrder {
    pub fn agrees(&self, tolerance: f64) -> bool {
        (self.analytic - self.estimate).abs() <= tolerance
    }
}

impl fmt::Display for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            GrowthFamily::IteratedLog { r } => write!(f, "ilog({r})"),
            GrowthFamily::IteratedLogEps { r, eps } => write!(f, "ilog_eps({r}, {eps})"),
            GrowthFamily::Power { a } => write!(f, "pow({a})"),
        }
    }
}

/// The companion `ϑ` used in the approximation function `ψ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ThetaFunction {
    /// `1 + log x`.
    #[default]
    OnePlusLog,
    /// `x^b` with `0 < b <= 1/4`.
    Power { b: f64 },
}

impl ThetaFunction {
    pub fn power(b: f64) -> Result<Self, String> {
        if b > 0.0 && b <= 0.25 {
            Ok(ThetaFunction::Power { b })
        } else {
            Err(format!("theta pow(b) needs 0 < b <= 1/4, got {b}"))
        }
    }

    /// Arguments below 2 are clamped to 2 so the value stays above 1.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(2.0);
        match *self {
            ThetaFunction::OnePlusLog => 1.0 + x.ln(),
            ThetaFunction::Power { b } => x.powf(b),
        }
    }

    pub fn at_dyadic(&self, j: u32) -> f64 {
        self.eval(2f64.powi(j as i32))
    }
}

impl fmt::Display for ThetaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaFunction::OnePlusLog => write!(f, "one_plus_log"),
            ThetaFunction::Power { b } => write!(f, "pow({b})"),
        }
    }
}

/// `ψ(n) = 1 / (n · f(n) · ϑ(n))`.
pub fn psi(f: &GrowthFunction, theta: &ThetaFunction, n: u64) -> f64 {
    let x = n as f64;
    1.0 / (x * f.eval(x) * theta.eval(x))
}

/// `Σ_{n ≤ N} 1 / (n f(n))`.
pub fn series_partial_sum(f: &GrowthFunction, n_max: u64) -> f64 {
    (1..=n_max)
        .map(|n| {
            let x = n as f64;
            1.0 / (x * f.eval(x))
        })
        .sum()
}

fn split_call(text: &str) -> Option<(&str, Vec<&str>)> {
    let text = text.trim();
    let open = text.find('(')?;
    let inner = text.strip_suffix(')')?.get(open + 1..)?;
    let name = text[..open].trim();
    let args = inner.split(',').map(str::trim).collect();
    Some((name, args))
}

/// Parses `ilog(r)`, `ilog_eps(r, eps)` or `pow(a)`. Exponents may be
/// written as fractions (`1/3`) or decimals.
pub fn parse_growth(text: &str) -> Result<GrowthFunction, String> {
    let (name, args) =
        split_call(text).ok_or_else(|| format!("expected ilog(r), ilog_eps(r, eps) or pow(a), got `{}`", text.trim()))?;
    let depth = |s: &str| -> Result<u32, String> {
        s.parse::<u32>()
            .map_err(|_| format!("iterated-log depth must be a positive integer, got `{s}`"))
    };
    match (name, args.as_slice()) {
        ("ilog", [r]) => GrowthFunction::ilog(depth(r)?),
        ("ilog_eps", [r, eps]) => GrowthFunction::ilog_eps(depth(r)?, parse_real(eps)?),
        ("pow", [a]) => {
            let exact = parse_rational(a)?;
            if exact > crate::numeric::rat(1, 3) {
                return Err(format!("pow(a) needs a <= 1/3, got {a}"));
            }
            GrowthFunction::power(to_f64(&exact).min(1.0 / 3.0))
        }
        _ => Err(format!("unknown growth function `{}`", text.trim())),
    }
}

/// Parses `one_plus_log` or `pow(b)`.
pub fn parse_theta(text: &str) -> Result<ThetaFunction, String> {
    let text = text.trim();
    if text == "one_plus_log" {
        return Ok(ThetaFunction::OnePlusLog);
    }
    match split_call(text) {
        Some(("pow", args)) if args.len() == 1 => ThetaFunction::power(parse_real(args[0])?),
        _ => Err(format!("expected one_plus_log or pow(b), got `{text}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    #[test]
    fn cutoffs_are_first_dyadic_above_clamp_level() {
        assert_eq!(GrowthFunction::ilog(1).unwrap().x_min(), 8.0);
        assert_eq!(GrowthFunction::ilog(2).unwrap().x_min(), 16.0);
        assert_eq!(GrowthFunction::power(1.0 / 3.0).unwrap().x_min(), 16.0);
        for f in [
            GrowthFunction::ilog(1).unwrap(),
            GrowthFunction::ilog(3).unwrap(),
            GrowthFunction::ilog_eps(2, 0.5).unwrap(),
            GrowthFunction::power(0.25).unwrap(),
        ] {
            let x = f.x_min();
            assert!(f.eval(x) > CLAMP_LEVEL);
            if x > 1.0 {
                assert!(f.family.raw(x / 2.0).is_none_or(|v| v <= CLAMP_LEVEL));
            }
        }
    }

    #[test]
    fn eval_examples() {
        let f1 = GrowthFunction::ilog(1).unwrap();
        assert!(close(f1.eval(E.powf(E)), E, 1e-12));

        let p = GrowthFunction::power(1.0 / 3.0).unwrap();
        // 8^(1/3) = 2 is below the clamp level, so f(8) = f(16).
        assert_eq!(p.eval(8.0), p.eval(16.0));
        assert!(p.eval(8.0) > 2.0);

        let f2 = GrowthFunction::ilog(2).unwrap();
        assert!(close(f2.eval(E.powf(E.powf(E))), E.powf(E) * E, 1e-12));
    }

    #[test]
    fn ilog4_needs_a_large_cutoff_and_ilog5_is_rejected() {
        let f = GrowthFunction::ilog(4).unwrap();
        assert!(f.x_min() > E.powf(E.powf(E)));
        assert!(GrowthFunction::ilog(5).is_err());
    }

    #[test]
    fn rejects_invalid_families() {
        assert!(GrowthFunction::ilog(0).is_err());
        assert!(GrowthFunction::power(0.5).is_err());
        assert!(GrowthFunction::power(0.0).is_err());
        assert!(GrowthFunction::ilog_eps(1, 0.0).is_err());
        assert!(ThetaFunction::power(0.3).is_err());
    }

    #[test]
    fn psi_examples() {
        let f = GrowthFunction::ilog(1).unwrap();
        let theta = ThetaFunction::OnePlusLog;
        let f0 = f.eval(1.0);
        let t0 = theta.eval(1.0);
        assert!(close(psi(&f, &theta, 1), 1.0 / (f0 * t0), 1e-15));
        for n in [1u64, 7, 100, 12345, 1 << 40] {
            let x = n as f64;
            assert!(close(psi(&f, &theta, n) * x * f.eval(x) * theta.eval(x), 1.0, 1e-12));
        }
    }

    #[test]
    fn psi_sum_converges_for_quarter_power() {
        // Σ 1/(n^{5/4} (1 + log n)) ≤ Σ n^{-5/4} ≤ 1 + ∫_1^∞ x^{-5/4} dx = 5
        // for n past the clamp, plus the clamped head.
        let f = GrowthFunction::power(0.25).unwrap();
        let theta = ThetaFunction::OnePlusLog;
        let partial = |n: u64| (1..=n).map(|k| psi(&f, &theta, k)).sum::<f64>();
        let head: f64 = (1..(f.x_min() as u64)).map(|k| psi(&f, &theta, k)).sum();
        let bound = head + 5.0;
        let (a, b) = (partial(10_000), partial(1_000_000));
        assert!(a <= b && b <= bound, "{a} {b} {bound}");
    }

    #[test]
    fn partial_sum_examples() {
        let f = GrowthFunction::ilog(1).unwrap();
        assert_eq!(series_partial_sum(&f, 1), 1.0 / f.eval(1.0));

        // ∫ dx/(x log x) = log log x, and the summand is decreasing past the
        // cutoff, so the sum over (10^3, 10^6] is at least the integral over
        // (10^3 + 1, 10^6 + 1).
        let small = series_partial_sum(&f, 1_000);
        let large = series_partial_sum(&f, 1_000_000);
        let integral = (1_000_001f64).ln().ln() - (1_001f64).ln().ln();
        assert!(large - small >= integral - 1e-9, "{} {}", large - small, integral);

        // pow(1/3): head + 16^{-4/3} + ∫_16^∞ x^{-4/3} dx = head + 16^{-4/3} + 3·16^{-1/3}.
        let p = GrowthFunction::power(1.0 / 3.0).unwrap();
        let head: f64 = (1..16u64).map(|n| 1.0 / (n as f64 * p.eval(n as f64))).sum();
        let bound = head + 16f64.powf(-4.0 / 3.0) + 3.0 * 16f64.powf(-1.0 / 3.0);
        let mut prev = 0.0;
        for n in [10u64, 1_000, 100_000, 2_000_000] {
            let s = series_partial_sum(&p, n);
            assert!(s >= prev && s <= bound, "{s} {bound}");
            prev = s;
        }
    }

    #[test]
    fn lower_order_and_dimension() {
        for r in 1..=3 {
            let f = GrowthFunction::ilog(r).unwrap();
            let lo = f.lower_order_report();
            assert_eq!(lo.analytic, 0.0);
            assert!(lo.agrees(0.05), "{lo:?}");
            assert_eq!(f.predicted_hausdorff_dim(), 1.0);
        }
        let eps = GrowthFunction::ilog_eps(1, 0.5).unwrap();
        assert_eq!(eps.lower_order(), 0.0);
        assert!(eps.lower_order_report().agrees(0.05));
        assert_eq!(eps.predicted_hausdorff_dim(), 1.0);

        let p3 = GrowthFunction::power(1.0 / 3.0).unwrap();
        assert!(p3.lower_order_report().agrees(0.05));
        assert!(close(p3.predicted_hausdorff_dim(), 0.75, 1e-15));
        let p4 = GrowthFunction::power(0.25).unwrap();
        assert!(close(p4.predicted_hausdorff_dim(), 0.8, 1e-15));
    }

    #[test]
    fn monotone_above_two_and_ratio_trend() {
        let presets = [
            GrowthFunction::ilog(1).unwrap(),
            GrowthFunction::ilog(2).unwrap(),
            GrowthFunction::ilog(3).unwrap(),
            GrowthFunction::ilog_eps(1, 0.5).unwrap(),
            GrowthFunction::ilog_eps(2, 0.1).unwrap(),
            GrowthFunction::power(1.0 / 3.0).unwrap(),
            GrowthFunction::power(0.1).unwrap(),
        ];
        for f in presets {
            let mut prev = 0.0;
            for k in 0..=200 {
                let v = f.eval(2f64.powf(k as f64 * 0.5));
                assert!(v > 2.0 && v >= prev, "{f} at 2^{}", k as f64 * 0.5);
                prev = v;
            }
            assert!(f.doubling_ratio_sup(0..=200) < 2.0, "{f}");
            if f.lower_order() == 0.0 {
                let ratio = |j: u32| f.at_dyadic(j + 1) / f.at_dyadic(j);
                assert!(ratio(30) - 1.0 < ratio(10) - 1.0, "{f}");
            }
        }
    }

    #[test]
    fn theta_behaviour() {
        let t = ThetaFunction::OnePlusLog;
        assert!(t.eval(0.5) > 1.0);
        let ratio = |j: u32| t.at_dyadic(j + 1) / t.at_dyadic(j);
        assert!(ratio(30) < ratio(10));
        let p = ThetaFunction::power(0.25).unwrap();
        assert!(close(p.eval(16.0), 2.0, 1e-15));
    }

    #[test]
    fn parse_config_syntax() {
        assert_eq!(parse_growth("ilog(1)").unwrap(), GrowthFunction::ilog(1).unwrap());
        assert_eq!(
            parse_growth(" ilog_eps(2, 0.5) ").unwrap(),
            GrowthFunction::ilog_eps(2, 0.5).unwrap()
        );
        assert_eq!(parse_growth("pow(1/3)").unwrap(), GrowthFunction::power(1.0 / 3.0).unwrap());
        assert_eq!(parse_growth("pow(0.25)").unwrap(), GrowthFunction::power(0.25).unwrap());
        for bad in ["", "ilog", "ilog()", "ilog(-1)", "pow(1/2)", "exp(1)", "ilog(1", "pow(1,2)"] {
            assert!(parse_growth(bad).is_err(), "{bad:?}");
        }
        assert_eq!(parse_theta("one_plus_log").unwrap(), ThetaFunction::OnePlusLog);
        assert_eq!(parse_theta("pow(1/4)").unwrap(), ThetaFunction::Power { b: 0.25 });
        assert!(parse_theta("pow(1/2)").is_err());
        assert!(parse_theta("log").is_err());
    }

    #[test]
    fn display_round_trips_through_parser() {
        for f in [
            GrowthFunction::ilog(2).unwrap(),
            GrowthFunction::ilog_eps(1, 0.5).unwrap(),
            GrowthFunction::power(0.25).unwrap(),
        ] {
            assert_eq!(parse_growth(&f.to_string()).unwrap(), f);
        }
    }
}
