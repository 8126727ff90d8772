//! Dual sides of the Voronoi identities for Riesz means of twisted GL(3)
//! sums, and harnesses comparing them with the direct side.

use crate::coeffs::{CoefficientTable, SourceKind};
use crate::error::{Error, Result};
use crate::numtheory::{divisor_count, divisors, KloostermanModulus, Twist};
use crate::riesz::{a_tilde, LValueSet, TwistedSeries, Variant};
use crate::special::{meijer, meijer_asymptotic, AsymptoticConfig};
use crate::sum::ComplexSum;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Exponent slack in the error budgets.
pub const EPSILON: f64 = 0.01;

/// y above which `TermMethod::Hybrid` switches to the main term by default.
pub const HYBRID_THRESHOLD: f64 = 1e6;

/// How each J_{a,j}(y) in a dual series is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum TermMethod {
    /// Exact contour integral.
    #[default]
    Contour,
    /// Leading cosine term only.
    Asymptotic,
    /// Contour below the threshold, leading term above.
    Hybrid { threshold: f64 },
}

/// Multipliers of the implicit constants in the error budgets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub leading: f64,
    pub a1: f64,
    pub a1_averaged: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            leading: 1.0,
            a1: 1.0,
            a1_averaged: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DualValue {
    pub value: Complex64,
    /// Sum of the |J| envelope over the discarded terms.
    pub tail_estimate: f64,
    pub terms: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BudgetedValue {
    pub value: Complex64,
    pub budget: f64,
    pub terms: usize,
}

fn j_values(variant: Variant) -> &'static [u32] {
    match variant {
        Variant::Even => &[0],
        Variant::Odd => &[1],
        Variant::Averaged => &[0, 1],
    }
}

fn variant_weight(variant: Variant) -> f64 {
    if variant == Variant::Averaged {
        0.5
    } else {
        1.0
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::RangeViolation(format!("x must be finite and >= 1, got {x}")));
    }
    Ok(())
}

fn check_small_modulus(k: u64, x: f64) -> Result<()> {
    let k3 = (k as f64).powi(3);
    if k3 > x {
        return Err(Error::RangeViolation(format!("k^3 <= x required, got k^3 = {k3}, x = {x}")));
    }
    Ok(())
}

/// i^{-j} pi^{-3/2} k x^a (-1)^{a+1} 2^{-a}.
fn dual_prefactor(a: u32, j: u32, k: u64, x: f64) -> Complex64 {
    let i_pow = if j == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, -1.0) };
    let sign = if a % 2 == 1 { 1.0 } else { -1.0 };
    i_pow * (sign * PI.powf(-1.5) * k as f64 * x.powi(a as i32) * 0.5f64.powi(a as i32))
}

/// One divisor's share of the dual series: S(h_bar, m; k/d) + (-1)^j S(h_bar, -m; k/d)
/// over a period, per j.
struct DivisorBlock {
    d: u64,
    c: u64,
    kl: Vec<Vec<f64>>,
    kmax: f64,
    rms: f64,
}

fn divisor_blocks(variant: Variant, twist: &Twist, table: &CoefficientTable, m_max: usize) -> Result<Vec<DivisorBlock>> {
    if m_max > table.m_max {
        return Err(Error::OutOfRange {
            index: m_max as u64,
            max: table.m_max as u64,
        });
    }
    let mut blocks = Vec::new();
    for d in divisors(twist.k) {
        if d as usize > table.m_max {
            return Err(Error::OutOfRange {
                index: d,
                max: table.m_max as u64,
            });
        }
        let c = twist.k / d;
        let km = KloostermanModulus::new(c);
        let mut kl = Vec::new();
        let mut kmax = 0.0f64;
        for &j in j_values(variant) {
            let sign = if j == 0 { 1.0 } else { -1.0 };
            let row = (0..c as i64)
                .map(|m| Ok(km.sum(twist.h_bar as i64, m)? + sign * km.sum(twist.h_bar as i64, -m)?))
                .collect::<Result<Vec<f64>>>()?;
            kmax = row.iter().fold(kmax, |acc, v| acc.max(v.abs()));
            kl.push(row);
        }
        if kmax == 0.0 {
            continue;
        }
        if d > 1 && table.spec.source_kind == SourceKind::D3 {
            return Err(Error::UnsupportedSource("d3 tables only support k = 1 dual series".into()));
        }
        let mut sq = 0.0;
        for m in 1..=table.m_max {
            sq += table.coefficient(d, m as u64)?.norm_sqr();
        }
        blocks.push(DivisorBlock {
            d,
            c,
            kl,
            kmax,
            rms: (sq / table.m_max.max(1) as f64).sqrt(),
        });
    }
    Ok(blocks)
}

fn j_term(a: u32, j: u32, y: f64, table: &CoefficientTable, method: TermMethod) -> Result<f64> {
    let cfg = AsymptoticConfig {
        threshold: 0.0,
        ..AsymptoticConfig::default()
    };
    let use_main = match method {
        TermMethod::Contour => false,
        TermMethod::Asymptotic => true,
        TermMethod::Hybrid { threshold } => y >= threshold,
    };
    let v = if use_main { meijer_asymptotic(a, j, y, &cfg)? } else { meijer(a, j, y, &table.spec)? };
    Ok(v.value.re)
}

/// Per-term contributions of the dual series at several points x, kept
/// separately so that partial sums at any truncation can be read off.
#[derive(Clone, Debug)]
pub struct DualExpansion {
    pub a: u32,
    pub variant: Variant,
    pub xs: Vec<f64>,
    /// terms[m - 1][i] is the contribution of m at xs[i], summed over d | k.
    pub terms: Vec<Vec<Complex64>>,
    /// Per x, the constant E with tail(M) = E * M^{-(a-1)/3} * 3/(a-1).
    envelope: Vec<f64>,
    k: u64,
}

impl DualExpansion {
    pub fn m_max(&self) -> usize {
        self.terms.len()
    }

    /// The dual series at every x, truncated after m_max terms.
    pub fn partial(&self, m_max: usize) -> Vec<Complex64> {
        (0..self.xs.len())
            .map(|i| {
                let mut acc = ComplexSum::new();
                for row in self.terms.iter().take(m_max) {
                    acc.add(row[i]);
                }
                acc.sum()
            })
            .collect()
    }

    /// Partial sums at each checkpoint, in one pass.
    pub fn partials_at(&self, checkpoints: &[usize]) -> Vec<Vec<Complex64>> {
        let mut accs: Vec<ComplexSum> = vec![ComplexSum::new(); self.xs.len()];
        let mut sorted: Vec<(usize, usize)> = checkpoints.iter().copied().enumerate().map(|(i, c)| (c, i)).collect();
        sorted.sort();
        let mut slots = vec![Vec::new(); checkpoints.len()];
        let mut done = 0;
        for (c, idx) in sorted {
            let c = c.min(self.terms.len());
            while done < c {
                for (acc, t) in accs.iter_mut().zip(&self.terms[done]) {
                    acc.add(*t);
                }
                done += 1;
            }
            slots[idx] = accs.iter().map(|a| a.sum()).collect();
        }
        slots
    }

    /// Envelope bound for the terms beyond m_max at xs[i]. For a = 1 the
    /// series is not absolutely convergent and the truncated-identity budget
    /// is returned instead.
    pub fn tail_estimate(&self, i: usize, m_max: usize) -> f64 {
        if self.a == 1 {
            return budget_a1(self.k, self.xs[i], m_max.max(1) as f64, &Calibration::default());
        }
        let s = (self.a - 1) as f64 / 3.0;
        self.envelope[i] * (m_max.max(1) as f64).powf(-s) / s
    }
}

/// Dual-series terms for m = 1..=m_max at every x in xs, evaluated in
/// parallel over m and stored in m order.
pub fn dual_expansion(
    a: u32,
    variant: Variant,
    xs: &[f64],
    twist: &Twist,
    table: &CoefficientTable,
    m_max: usize,
    method: TermMethod,
) -> Result<DualExpansion> {
    if a == 0 {
        return Err(Error::RangeViolation("the dual series needs a >= 1".into()));
    }
    for &x in xs {
        check_x(x)?;
    }
    let blocks = divisor_blocks(variant, twist, table, m_max)?;
    let k = twist.k;
    let kf = k as f64;
    let weight = variant_weight(variant);
    let js = j_values(variant);
    let prefactors: Vec<Vec<Complex64>> =
        js.iter().map(|&j| xs.iter().map(|&x| dual_prefactor(a, j, k, x) * weight).collect()).collect();
    let y_scale: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| xs.iter().map(|&x| PI.powi(6) * (b.d as f64).powi(4) * x * x / kf.powi(6)).collect())
        .collect();

    let terms = (1..=m_max)
        .into_par_iter()
        .map(|m| -> Result<Vec<Complex64>> {
            let mut row = vec![C0; xs.len()];
            let mf = m as f64;
            for (bi, b) in blocks.iter().enumerate() {
                let a_dm = table.coefficient(b.d, m as u64)?;
                if a_dm == C0 {
                    continue;
                }
                for (ji, &j) in js.iter().enumerate() {
                    let kv = b.kl[ji][m % b.c as usize];
                    if kv == 0.0 {
                        continue;
                    }
                    let base = a_dm * (kv / (b.d as f64 * mf));
                    for (xi, r) in row.iter_mut().enumerate() {
                        let y = y_scale[bi][xi] * mf * mf;
                        *r += prefactors[ji][xi] * base * j_term(a, j, y, table, method)?;
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let env_amp = 1.0 / (3.0 * PI).sqrt();
    let envelope = xs
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let pre = dual_prefactor(a, 0, k, x).norm();
            blocks
                .iter()
                .enumerate()
                .map(|(bi, b)| {
                    let y1 = y_scale[bi][xi];
                    let bound = env_amp * y1.powf((1.0 - a as f64) / 6.0) + y1.powf(-(a as f64) / 6.0);
                    pre * b.kmax * b.rms / b.d as f64 * bound
                })
                .sum()
        })
        .collect();

    Ok(DualExpansion {
        a,
        variant,
        xs: xs.to_vec(),
        terms,
        envelope,
        k,
    })
}

/// The full dual series for A~_{a,j}(x), truncated after m_max terms.
pub fn dual_full(
    a: u32,
    j: u32,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    m_max: usize,
    method: TermMethod,
) -> Result<DualValue> {
    dual_full_variant(a, Variant::from_j(j)?, x, twist, table, m_max, method)
}

/// As `dual_full`, for any phase variant; Averaged is the mean over j.
pub fn dual_full_variant(
    a: u32,
    variant: Variant,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    m_max: usize,
    method: TermMethod,
) -> Result<DualValue> {
    if a < 2 {
        return Err(Error::RangeViolation(format!("the full dual series needs a >= 2, got {a}")));
    }
    let e = dual_expansion(a, variant, &[x], twist, table, m_max, method)?;
    Ok(DualValue {
        value: e.partial(m_max)[0],
        tail_estimate: e.tail_estimate(0, m_max),
        terms: m_max,
    })
}

/// 3 d^{2/3} m^{1/3} x^{1/3} / k, the frequency of the leading phases.
pub fn leading_phase(d: u64, m: u64, x: f64, k: u64) -> f64 {
    3.0 * (d as f64).powf(2.0 / 3.0) * (m as f64).cbrt() * x.cbrt() / k as f64
}

/// Sum over d | k and m <= m_max of A(d,m) d^{-(2a+1)/3} m^{-(a+2)/3}
/// sum_{+-} i^{+-a} S(h_bar, +-m; k/d) e(+-phase), with the overall
/// constant (-1)^a k^a x^{(2a+1)/3} / ((2 pi)^{a+1} sqrt 3).
fn leading_sum(a: u32, x: f64, twist: &Twist, table: &CoefficientTable, m_max: usize) -> Result<Complex64> {
    if m_max > table.m_max {
        return Err(Error::OutOfRange {
            index: m_max as u64,
            max: table.m_max as u64,
        });
    }
    let k = twist.k;
    let af = a as f64;
    let i_pow = Complex64::new(0.0, 1.0).powu(a);
    let mut total = ComplexSum::new();
    for d in divisors(k) {
        let c = k / d;
        let km = KloostermanModulus::new(c);
        let plus = km.period(twist.h_bar as i64)?;
        let dpow = (d as f64).powf(-(2.0 * af + 1.0) / 3.0);
        let rows = (1..=m_max)
            .into_par_iter()
            .map(|m| -> Result<Complex64> {
                let s_plus = plus[m % c as usize];
                let s_minus = plus[(c as usize - m % c as usize) % c as usize];
                if s_plus == 0.0 && s_minus == 0.0 {
                    return Ok(C0);
                }
                let coef = table.coefficient(d, m as u64)?;
                let phase = Complex64::from_polar(1.0, 2.0 * PI * leading_phase(d, m as u64, x, k));
                let pm = i_pow * phase * s_plus + i_pow.conj() * phase.conj() * s_minus;
                Ok(coef * pm * (dpow * (m as f64).powf(-(af + 2.0) / 3.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        for r in rows {
            total.add(r);
        }
    }
    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
    let scale = sign * (k as f64).powi(a as i32) * x.powf((2.0 * af + 1.0) / 3.0)
        / ((2.0 * PI).powi(a as i32 + 1) * 3f64.sqrt());
    Ok(total.sum() * scale)
}

/// C k^{(2a+3)/2} d(k) x^{2a/3}.
pub fn budget_leading(a: u32, k: u64, x: f64, cal: &Calibration) -> f64 {
    let af = a as f64;
    cal.leading * (k as f64).powf((2.0 * af + 3.0) / 2.0) * divisor_count(k) as f64 * x.powf(2.0 * af / 3.0)
}

/// C (k^{2+eps} x N^{eps-1/4} + k^{3/2+eps} x^{5/3} N^{eps-1/3}).
pub fn budget_a1(k: u64, x: f64, n: f64, cal: &Calibration) -> f64 {
    let kf = k as f64;
    cal.a1
        * (kf.powf(2.0 + EPSILON) * x * n.powf(EPSILON - 0.25)
            + kf.powf(1.5 + EPSILON) * x.powf(5.0 / 3.0) * n.powf(EPSILON - 1.0 / 3.0))
}

/// C k^{3/2+eps} x^{5/3+eps} N^{eps-1/3}.
pub fn budget_a1_averaged(k: u64, x: f64, n: f64, cal: &Calibration) -> f64 {
    cal.a1_averaged * (k as f64).powf(1.5 + EPSILON) * x.powf(5.0 / 3.0 + EPSILON) * n.powf(EPSILON - 1.0 / 3.0)
}

/// The cosine-phase leading form of the averaged A~_a(x), a >= 2.
pub fn dual_leading(
    a: u32,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    m_max: usize,
    cal: &Calibration,
) -> Result<BudgetedValue> {
    if a < 2 {
        return Err(Error::RangeViolation(format!("the leading form needs a >= 2, got {a}")));
    }
    check_x(x)?;
    check_small_modulus(twist.k, x)?;
    Ok(BudgetedValue {
        value: leading_sum(a, x, twist, table, m_max)?,
        budget: budget_leading(a, twist.k, x, cal),
        terms: m_max,
    })
}

/// The a = 1 dual series truncated at m <= N. For one parity the exact
/// J_{1,j} series is used; the averaged variant uses the cosine form.
pub fn dual_a1(
    x: f64,
    variant: Variant,
    twist: &Twist,
    table: &CoefficientTable,
    n: f64,
    cal: &Calibration,
) -> Result<BudgetedValue> {
    check_x(x)?;
    check_small_modulus(twist.k, x)?;
    let k3 = (twist.k as f64).powi(3);
    if !(n >= 1.0) || n < k3 {
        return Err(Error::RangeViolation(format!("N >= k^3 required, got N = {n}, k^3 = {k3}")));
    }
    let terms = n.floor() as usize;
    if variant == Variant::Averaged {
        if n > x.powi(3) / k3 {
            return Err(Error::RangeViolation(format!("N <= x^3/k^3 required, got N = {n}")));
        }
        return Ok(BudgetedValue {
            value: leading_sum(1, x, twist, table, terms)?,
            budget: budget_a1_averaged(twist.k, x, n, cal),
            terms,
        });
    }
    let e = dual_expansion(1, variant, &[x], twist, table, terms, TermMethod::Contour)?;
    Ok(BudgetedValue {
        value: e.partial(terms)[0],
        budget: budget_a1(twist.k, x, n, cal),
        terms,
    })
}

/// max(1, x / 1000).
pub fn default_delta(x: f64) -> f64 {
    (x / 1e3).max(1.0)
}

/// The forward difference of order values.len() - 1 with unit step.
pub fn forward_difference(values: &[Complex64]) -> Complex64 {
    let n = values.len().saturating_sub(1);
    let mut acc = ComplexSum::new();
    let mut binom = 1.0;
    for (i, &v) in values.iter().enumerate() {
        let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(v * (sign * binom));
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    acc.sum()
}

#[derive(Clone, Copy, Debug)]
pub enum ResidualMode<'a> {
    /// Compare A~_a(x) itself; needs L-values for the residue polynomial.
    Direct(&'a LValueSet),
    /// Compare (a+1)-th forward differences of the raw sum and the dual series.
    FiniteDifference { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    pub m_max: usize,
    pub residual: f64,
    /// Magnitude of the direct side.
    pub reference: f64,
    pub tail_estimate: f64,
}

impl ResidualReport {
    pub fn relative(&self) -> f64 {
        self.residual / self.reference.max(f64::MIN_POSITIVE)
    }
}

/// Residuals of the Voronoi identity at each dual truncation in checkpoints.
#[allow(clippy::too_many_arguments)]
pub fn voronoi_residual_scan(
    a: u32,
    variant: Variant,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    checkpoints: &[usize],
    mode: ResidualMode,
    method: TermMethod,
) -> Result<Vec<ResidualReport>> {
    check_x(x)?;
    let m_top = checkpoints.iter().copied().max().unwrap_or(0);
    if m_top == 0 {
        return Err(Error::RangeViolation("need at least one positive m_max".into()));
    }
    let (xs, direct) = match mode {
        ResidualMode::Direct(lv) => {
            let v = a_tilde(a, variant, x, twist, table, lv)?.value;
            (vec![x], v)
        }
        ResidualMode::FiniteDifference { delta } => {
            if !(delta > 0.0) {
                return Err(Error::RangeViolation(format!("delta must be > 0, got {delta}")));
            }
            let xs: Vec<f64> = (0..=a + 1).map(|i| x + i as f64 * delta).collect();
            let top = xs[xs.len() - 1];
            if top > table.m_max as f64 {
                return Err(Error::RangeViolation(format!(
                    "x + (a+1) delta = {top} exceeds the table size {}",
                    table.m_max
                )));
            }
            let series = TwistedSeries::new(variant, *twist, table, top.floor() as usize)?;
            let raw = xs.iter().map(|&u| series.raw(a, u)).collect::<Result<Vec<_>>>()?;
            let v = forward_difference(&raw);
            (xs, v)
        }
    };
    let e = dual_expansion(a, variant, &xs, twist, table, m_top, method)?;
    let partials = e.partials_at(checkpoints);
    Ok(checkpoints
        .iter()
        .zip(partials)
        .map(|(&m, p)| {
            let (dual, tail) = if p.len() == 1 {
                (p[0], e.tail_estimate(0, m))
            } else {
                let n = p.len() - 1;
                let mut binom = 1.0;
                let mut tail = 0.0;
                for i in 0..=n {
                    tail += binom * e.tail_estimate(i, m);
                    binom = binom * (n - i) as f64 / (i + 1) as f64;
                }
                (forward_difference(&p), tail)
            };
            ResidualReport {
                m_max: m,
                residual: (direct - dual).norm(),
                reference: direct.norm(),
                tail_estimate: tail,
            }
        })
        .collect())
}

/// The residual of the Voronoi identity with the dual series truncated at m_max.
#[allow(clippy::too_many_arguments)]
pub fn voronoi_residual(
    a: u32,
    variant: Variant,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    m_max: usize,
    mode: ResidualMode,
    method: TermMethod,
) -> Result<ResidualReport> {
    Ok(voronoi_residual_scan(a, variant, x, twist, table, &[m_max], mode, method)?[0])
}
