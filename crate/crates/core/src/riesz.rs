//! Riesz-weighted sums of A(m,1) twisted by e(mh/k), the twisted L-values
//! feeding their residue polynomials, and exact integrals of both.

use crate::coeffs::CoefficientTable;
use crate::error::{Error, Result};
use crate::numtheory::{divisors, e_frac, KloostermanModulus, Twist};
use crate::special::{g_factor, CheckResult};
use crate::sum::ComplexSum;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Which phase combination multiplies A(m,1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// e(mh/k) + e(-mh/k)
    Even,
    /// e(mh/k) - e(-mh/k)
    Odd,
    /// e(mh/k) alone, the mean of the two parities.
    Averaged,
}

impl Variant {
    pub fn from_j(j: u32) -> Result<Self> {
        match j {
            0 => Ok(Variant::Even),
            1 => Ok(Variant::Odd),
            _ => Err(Error::RangeViolation(format!("j must be 0 or 1, got {j}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Even => "j0",
            Variant::Odd => "j1",
            Variant::Averaged => "avg",
        }
    }

    pub fn phase(&self, m: u64, twist: &Twist) -> Complex64 {
        let r = ((m % twist.k) as u128 * twist.h as u128 % twist.k as u128) as i64;
        let e = e_frac(r, twist.k);
        match self {
            Variant::Even => e + e.conj(),
            Variant::Odd => e - e.conj(),
            Variant::Averaged => e,
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn check_x(x: f64, n_max: usize) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::RangeViolation(format!("x must be finite and >= 0, got {x}")));
    }
    if x.floor() as u64 > n_max as u64 {
        return Err(Error::OutOfRange {
            index: x.floor() as u64,
            max: n_max as u64,
        });
    }
    Ok(())
}

/// c(m) = A(m,1) times the variant's phase, for m <= n_max.
#[derive(Clone, Debug)]
pub struct TwistedSeries {
    pub variant: Variant,
    pub twist: Twist,
    pub coeffs: Vec<Complex64>,
}

impl TwistedSeries {
    pub fn new(variant: Variant, twist: Twist, table: &CoefficientTable, n_max: usize) -> Result<Self> {
        if n_max > table.m_max {
            return Err(Error::OutOfRange {
                index: n_max as u64,
                max: table.m_max as u64,
            });
        }
        let mut coeffs = vec![C0; n_max + 1];
        for (m, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c = table.a_m1[m] * variant.phase(m as u64, &twist);
        }
        Ok(TwistedSeries {
            variant,
            twist,
            coeffs,
        })
    }

    /// A series with arbitrary coefficients; index 0 is ignored.
    pub fn from_coeffs(variant: Variant, twist: Twist, coeffs: Vec<Complex64>) -> Self {
        TwistedSeries {
            variant,
            twist,
            coeffs,
        }
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// (1/a!) sum'_{m <= x} c(m) (x - m)^a, the last term halved at integer x.
    pub fn raw(&self, a: u32, x: f64) -> Result<Complex64> {
        check_x(x, self.n_max())?;
        let top = x.floor() as usize;
        let mut acc = ComplexSum::new();
        for m in 1..=top {
            let w = (x - m as f64).powi(a as i32);
            let w = if m as f64 == x { 0.5 * w } else { w };
            acc.add(self.coeffs[m] * w);
        }
        Ok(acc.sum() / factorial(a))
    }

    /// (1/a!) sum_{m <= x} |c(m)| (x - m)^a, the scale rounding errors are measured against.
    pub fn raw_scale(&self, a: u32, x: f64) -> Result<f64> {
        check_x(x, self.n_max())?;
        let top = x.floor() as usize;
        let s: f64 = (1..=top)
            .map(|m| self.coeffs[m].norm() * (x - m as f64).powi(a as i32))
            .sum();
        Ok(s / factorial(a))
    }

    /// int_lo^hi (hi - u)^w raw_a(u) du, each term integrated in closed form
    /// in the variables B = max(lo, m) - m and D = hi - max(lo, m), so that
    /// every summand is positive and short intervals lose no precision.
    pub fn raw_integral(&self, a: u32, lo: f64, hi: f64, w: u32) -> Result<Complex64> {
        self.raw_integral_len(a, lo, hi - lo, w)
    }

    /// As `raw_integral` over [lo, lo + len], with the length given exactly.
    pub fn raw_integral_len(&self, a: u32, lo: f64, len: f64, w: u32) -> Result<Complex64> {
        if !(len >= 0.0) {
            return Err(Error::RangeViolation(format!("integration length must be >= 0, got {len}")));
        }
        let hi = lo + len;
        check_x(lo, self.n_max())?;
        check_x(hi, self.n_max())?;
        let top = hi.floor() as usize;
        let wf = factorial(w);
        let mut acc = ComplexSum::new();
        for m in 1..=top {
            let mf = m as f64;
            let (b, d) = if mf <= lo { (lo - mf, len) } else { (0.0, (lo - mf) + len) };
            if d <= 0.0 {
                continue;
            }
            let mut j = 0.0;
            for q in 0..=a {
                j += binomial(a, q) * b.powi((a - q) as i32) * d.powi((q + w + 1) as i32) * factorial(q) * wf
                    / factorial(q + w + 1);
            }
            acc.add(self.coeffs[m] * j);
        }
        Ok(acc.sum() / factorial(a))
    }

    /// Visit the raw part on each unit interval [n, n+1), n0 <= n < n1, as
    /// polynomial coefficients in u = x - n. Power sums are advanced by the
    /// binomial shift and recomputed directly every `REANCHOR` intervals.
    pub fn for_each_interval<F>(&self, a: u32, n0: usize, n1: usize, mut f: F) -> Result<()>
    where
        F: FnMut(usize, &[Complex64]),
    {
        const REANCHOR: usize = 64;
        if n1 > self.n_max() + 1 {
            return Err(Error::OutOfRange {
                index: n1 as u64,
                max: self.n_max() as u64 + 1,
            });
        }
        let deg = a as usize;
        let mut t = vec![C0; deg + 1];
        let mut poly = vec![C0; deg + 1];
        let inv_fact = 1.0 / factorial(a);
        let binom: Vec<Vec<f64>> = (0..=a).map(|l| (0..=a).map(|q| binomial(l, q)).collect()).collect();
        let mut next = t.clone();
        for n in n0..n1 {
            if (n - n0) % REANCHOR == 0 {
                for (l, tl) in t.iter_mut().enumerate() {
                    let mut acc = ComplexSum::new();
                    for m in 1..=n.min(self.n_max()) {
                        acc.add(self.coeffs[m] * ((n - m) as f64).powi(l as i32));
                    }
                    *tl = acc.sum();
                }
            } else {
                for l in 0..=deg {
                    let mut acc = ComplexSum::new();
                    for q in 0..=l {
                        acc.add(t[q] * binom[l][q]);
                    }
                    next[l] = acc.sum();
                }
                next[0] += self.coeffs[n];
                t.copy_from_slice(&next);
            }
            for i in 0..=deg {
                poly[i] = t[deg - i] * (binom[deg][i] * inv_fact);
            }
            f(n, &poly);
        }
        Ok(())
    }
}

/// L_j(-nu + j, h/k) obtained from the dual series through the functional equation.
#[derive(Clone, Copy, Debug)]
pub struct TwistedLValue {
    pub nu: u32,
    pub j: u32,
    pub twist: Twist,
    pub value: Complex64,
    pub est_error: f64,
    pub terms: usize,
}

/// G_j(-nu + j), with a surviving numerator pole reported as GammaPole.
fn g_at(nu: u32, j: u32, table: &CoefficientTable) -> Result<Complex64> {
    g_factor(Complex64::new(-(nu as f64), 0.0), j, &table.spec).map_err(|e| match e {
        Error::Pole(msg) => Error::GammaPole(msg),
        other => other,
    })
}

/// i^{-j} k^{3 nu + 1} pi^{-3 nu - 3/2} G_j(-nu + j).
fn fe_prefactor(nu: u32, j: u32, k: u64, g: Complex64) -> Complex64 {
    let i_pow = if j == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, -1.0) };
    let kf = k as f64;
    i_pow * g * kf.powf(3.0 * nu as f64 + 1.0) * PI.powf(-3.0 * nu as f64 - 1.5)
}

/// S(h_bar, m; c) + (-1)^j S(h_bar, -m; c) over one period of m.
fn kloosterman_combination(h_bar: u64, c: u64, j: u32) -> Result<Vec<f64>> {
    let km = KloostermanModulus::new(c);
    let sign = if j == 0 { 1.0 } else { -1.0 };
    (0..c as i64)
        .map(|m| Ok(km.sum(h_bar as i64, m)? + sign * km.sum(h_bar as i64, -m)?))
        .collect()
}

/// Dual-series terms A(d,m) K_d(m) / (d^{1+2 nu} m^{1+nu}) summed over d | k,
/// for m = 1..=n_terms, as one value per m.
fn dual_terms(nu: u32, j: u32, twist: &Twist, table: &CoefficientTable, n_terms: usize) -> Result<(Vec<Complex64>, f64)> {
    let k = twist.k;
    let mut terms = vec![C0; n_terms + 1];
    let mut tail_rate = 0.0;
    for d in divisors(k) {
        let c = k / d;
        let kl = kloosterman_combination(twist.h_bar, c, j)?;
        let kmax = kl.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if kmax == 0.0 {
            continue;
        }
        let dpow = (d as f64).powi(1 + 2 * nu as i32);
        let mut sq = 0.0;
        for m in 1..=n_terms {
            let kv = kl[m % c as usize];
            let a = table.coefficient(d, m as u64)?;
            sq += a.norm_sqr();
            if kv != 0.0 {
                terms[m] += a * (kv / (dpow * (m as f64).powi(1 + nu as i32)));
            }
        }
        let rms = (sq / n_terms.max(1) as f64).sqrt();
        tail_rate += kmax * rms / dpow;
    }
    Ok((terms, tail_rate))
}

fn smoothed_sum(terms: &[Complex64], n: usize) -> Complex64 {
    let mut acc = ComplexSum::new();
    let len = (n + 1) as f64;
    for (m, t) in terms.iter().enumerate().take(n + 1).skip(1) {
        let w = 1.0 - m as f64 / len;
        acc.add(t * (w * w * w));
    }
    acc.sum()
}

/// The L-value from the first `n_terms` dual terms.
///
/// For nu >= 1 the series converges absolutely and the error is a tail
/// estimate from the root mean square of A(d, m). For nu = 0 the series is
/// summed with the weight (1 - m/(N+1))^3 and the error is the change from
/// N/2 to N terms.
pub fn twisted_l_value_truncated(
    nu: u32,
    j: u32,
    twist: &Twist,
    table: &CoefficientTable,
    n_terms: usize,
) -> Result<TwistedLValue> {
    if j > 1 {
        return Err(Error::RangeViolation(format!("j must be 0 or 1, got {j}")));
    }
    let g = g_at(nu, j, table)?;
    let mut out = TwistedLValue {
        nu,
        j,
        twist: *twist,
        value: C0,
        est_error: 0.0,
        terms: n_terms,
    };
    if g == C0 {
        return Ok(out);
    }
    if n_terms < 2 || n_terms > table.m_max {
        return Err(Error::OutOfRange {
            index: n_terms as u64,
            max: table.m_max as u64,
        });
    }
    let pre = fe_prefactor(nu, j, twist.k, g);
    let (terms, tail_rate) = dual_terms(nu, j, twist, table, n_terms)?;
    let (dual, err) = if nu == 0 {
        let full = smoothed_sum(&terms, n_terms);
        let half = smoothed_sum(&terms, n_terms / 2);
        (full, (full - half).norm())
    } else {
        let s: Vec<Complex64> = terms[1..].to_vec();
        let v = crate::sum::csum(&s);
        (v, tail_rate * (n_terms as f64).powi(-(nu as i32)) / nu as f64)
    };
    out.value = pre * dual;
    out.est_error = pre.norm() * err + 1e-14 * out.value.norm();
    Ok(out)
}

/// The L-value using the whole table; SlowConvergence if the error estimate exceeds tol.
pub fn twisted_l_value(nu: u32, j: u32, twist: &Twist, table: &CoefficientTable, tol: f64) -> Result<TwistedLValue> {
    let v = twisted_l_value_truncated(nu, j, twist, table, table.m_max)?;
    if v.est_error > tol {
        return Err(Error::SlowConvergence {
            est_error: v.est_error,
            tol,
        });
    }
    Ok(v)
}

/// L_j(-nu + j, h/k) for nu = 0..=nu_max and j = 0, 1.
#[derive(Clone, Debug)]
pub struct LValueSet {
    pub twist: Twist,
    pub values: Vec<[Complex64; 2]>,
    pub est_error: Vec<[f64; 2]>,
}

impl LValueSet {
    pub fn compute(nu_max: u32, twist: &Twist, table: &CoefficientTable, tol: f64) -> Result<Self> {
        let mut values = Vec::new();
        let mut est_error = Vec::new();
        for nu in 0..=nu_max {
            let l0 = twisted_l_value(nu, 0, twist, table, tol)?;
            let l1 = twisted_l_value(nu, 1, twist, table, tol)?;
            values.push([l0.value, l1.value]);
            est_error.push([l0.est_error, l1.est_error]);
        }
        Ok(LValueSet {
            twist: *twist,
            values,
            est_error,
        })
    }

    pub fn zero(nu_max: u32, twist: &Twist) -> Self {
        let n = nu_max as usize + 1;
        LValueSet {
            twist: *twist,
            values: vec![[C0; 2]; n],
            est_error: vec![[0.0; 2]; n],
        }
    }

    /// Arbitrary seeded values, for identities that hold whatever the L-values are.
    pub fn placeholder(nu_max: u32, twist: &Twist, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = LValueSet::zero(nu_max, twist);
        for v in set.values.iter_mut() {
            for z in v.iter_mut() {
                *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        set
    }

    pub fn nu_max(&self) -> u32 {
        self.values.len() as u32 - 1
    }

    pub fn get(&self, nu: u32, variant: Variant) -> Result<Complex64> {
        let v = self.values.get(nu as usize).ok_or_else(|| {
            Error::RangeViolation(format!("L-values computed up to nu = {}, need {nu}", self.nu_max()))
        })?;
        Ok(match variant {
            Variant::Even => v[0],
            Variant::Odd => v[1],
            Variant::Averaged => 0.5 * (v[0] + v[1]),
        })
    }

    pub fn error(&self, nu: u32, variant: Variant) -> f64 {
        self.est_error.get(nu as usize).map_or(f64::INFINITY, |e| match variant {
            Variant::Even => e[0],
            Variant::Odd => e[1],
            Variant::Averaged => 0.5 * (e[0] + e[1]),
        })
    }
}

/// Coefficients r_p of x^p, p = 0..=a, in
/// sum_{nu <= a} (-1)^nu x^{a-nu} / (nu! (a-nu)!) L_nu.
pub fn residue_coefficients(a: u32, variant: Variant, lv: &LValueSet) -> Result<Vec<Complex64>> {
    (0..=a)
        .map(|p| {
            let nu = a - p;
            let sign = if nu % 2 == 0 { 1.0 } else { -1.0 };
            Ok(lv.get(nu, variant)? * (sign / (factorial(nu) * factorial(p))))
        })
        .collect()
}

fn horner(coeffs: &[Complex64], x: f64) -> Complex64 {
    coeffs.iter().rev().fold(C0, |acc, &c| acc * x + c)
}

pub fn residue_polynomial(a: u32, variant: Variant, x: f64, lv: &LValueSet) -> Result<Complex64> {
    Ok(horner(&residue_coefficients(a, variant, lv)?, x))
}

/// Taylor coefficients of a polynomial (ascending powers) about x0.
pub fn shift_polynomial(coeffs: &[Complex64], x0: f64) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut out = vec![C0; n];
    for (q, o) in out.iter_mut().enumerate() {
        let mut acc = ComplexSum::new();
        for (p, &c) in coeffs.iter().enumerate().skip(q) {
            acc.add(c * (binomial(p as u32, q as u32) * x0.powi((p - q) as i32)));
        }
        *o = acc.sum();
    }
    out
}

/// int_lo^{lo+d} (lo + d - u)^w P(u) du, expanded about lo.
fn polynomial_integral(coeffs: &[Complex64], lo: f64, d: f64, w: u32) -> Complex64 {
    let shifted = shift_polynomial(coeffs, lo);
    let wf = factorial(w);
    let mut acc = ComplexSum::new();
    for (q, &c) in shifted.iter().enumerate() {
        let q = q as u32;
        acc.add(c * (d.powi((q + w + 1) as i32) * factorial(q) * wf / factorial(q + w + 1)));
    }
    acc.sum()
}

/// A Riesz mean split into its raw sum and residue polynomial.
#[derive(Clone, Copy, Debug)]
pub struct RieszSum {
    pub a: u32,
    pub variant: Variant,
    pub x: f64,
    pub twist: Twist,
    pub raw: Complex64,
    pub residue: Complex64,
    pub value: Complex64,
}

/// Riesz means of one twisted series with one set of L-values.
#[derive(Clone, Debug)]
pub struct RieszMeans {
    pub series: TwistedSeries,
    pub lvalues: LValueSet,
}

impl RieszMeans {
    pub fn new(series: TwistedSeries, lvalues: LValueSet) -> Result<Self> {
        if series.twist != lvalues.twist {
            return Err(Error::RangeViolation("series and L-values belong to different twists".into()));
        }
        Ok(RieszMeans { series, lvalues })
    }

    pub fn variant(&self) -> Variant {
        self.series.variant
    }

    pub fn a_tilde(&self, a: u32, x: f64) -> Result<RieszSum> {
        let raw = self.series.raw(a, x)?;
        let residue = residue_polynomial(a, self.variant(), x, &self.lvalues)?;
        Ok(RieszSum {
            a,
            variant: self.variant(),
            x,
            twist: self.series.twist,
            raw,
            residue,
            value: raw - residue,
        })
    }

    /// int_lo^{lo+len} (lo + len - u)^w A~_a(u) du.
    pub fn integral(&self, a: u32, lo: f64, len: f64, w: u32) -> Result<Complex64> {
        let raw = self.series.raw_integral_len(a, lo, len, w)?;
        let res = residue_coefficients(a, self.variant(), &self.lvalues)?;
        Ok(raw - polynomial_integral(&res, lo, len, w))
    }

    /// int_x^t A~_a(u) du.
    pub fn integrate_a_tilde(&self, a: u32, x: f64, t: f64) -> Result<Complex64> {
        if t < x {
            return Err(Error::RangeViolation(format!("need x <= t, got x = {x}, t = {t}")));
        }
        self.integral(a, x, t - x, 0)
    }

    /// Compares int_x^t A~_a with A~_{a+1}(t) - A~_{a+1}(x).
    pub fn key_property(&self, a: u32, x: f64, t: f64) -> Result<CheckResult> {
        let lhs = self.integrate_a_tilde(a, x, t)?;
        let at = self.a_tilde(a + 1, t)?.value;
        let ax = self.a_tilde(a + 1, x)?.value;
        Ok(CheckResult {
            residual: (lhs - (at - ax)).norm(),
            reference: at.norm().max(ax.norm()).max(lhs.norm()),
        })
    }

    /// Compares A~_{a+1}(x) with
    /// (1/H) int_x^{x+H} (A~_{a+1}(t) - int_x^t A~_a(u) du) dt,
    /// the double integral being int_x^{x+H} (x + H - u) A~_a(u) du.
    pub fn h_average(&self, a: u32, x: f64, h: f64) -> Result<CheckResult> {
        if !(h >= 0.0) {
            return Err(Error::RangeViolation(format!("H must be >= 0, got {h}")));
        }
        let lhs = self.a_tilde(a + 1, x)?.value;
        if h == 0.0 {
            return Ok(CheckResult {
                residual: 0.0,
                reference: lhs.norm(),
            });
        }
        let first = self.integral(a + 1, x, h, 0)? / h;
        let second = self.integral(a, x, h, 1)? / h;
        Ok(CheckResult {
            residual: (lhs - (first - second)).norm(),
            reference: lhs.norm().max(first.norm()).max(second.norm()),
        })
    }
}

/// Sum'_{m <= x} A(m,1) e(mh/k).
pub fn sharp_sum(x: f64, twist: &Twist, table: &CoefficientTable) -> Result<Complex64> {
    check_x(x, table.m_max)?;
    TwistedSeries::new(Variant::Averaged, *twist, table, x.floor() as usize)?.raw(0, x)
}

/// (1/a!) sum'_{m <= x} A(m,1) (phase) (x - m)^a for one variant.
pub fn riesz_raw(a: u32, variant: Variant, x: f64, twist: &Twist, table: &CoefficientTable) -> Result<Complex64> {
    check_x(x, table.m_max)?;
    TwistedSeries::new(variant, *twist, table, x.floor() as usize)?.raw(a, x)
}

/// A~_{a} for one variant with the given L-values.
pub fn a_tilde(
    a: u32,
    variant: Variant,
    x: f64,
    twist: &Twist,
    table: &CoefficientTable,
    lv: &LValueSet,
) -> Result<RieszSum> {
    check_x(x, table.m_max)?;
    let series = TwistedSeries::new(variant, *twist, table, x.floor() as usize)?;
    RieszMeans::new(series, lv.clone())?.a_tilde(a, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_polynomial_agrees() {
        let p = [Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5), Complex64::new(0.25, 0.0)];
        let s = shift_polynomial(&p, 2.5);
        for u in [0.0, 0.3, 1.0] {
            assert!((horner(&s, u) - horner(&p, 2.5 + u)).norm() < 1e-12);
        }
    }

    #[test]
    fn weighted_polynomial_integral() {
        // int_1^3 (3 - u) u^2 du = [u^3 - u^4/4]_1^3 = 6
        let p = [C0, C0, Complex64::new(1.0, 0.0)];
        let v = polynomial_integral(&p, 1.0, 2.0, 1);
        assert!((v.re - 6.0).abs() < 1e-13);
    }
}
