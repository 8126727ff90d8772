//! Desk-scale moment, Omega and upper-bound experiments on twisted sums.

use crate::coeffs::{CoefficientTable, THETA_PROVED};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::numtheory::{is_prime, Twist};
use crate::riesz::{residue_coefficients, shift_polynomial, LValueSet, TwistedSeries, Variant};
use crate::sum::NeumaierSum;
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Slack in every theorem window constraint.
pub const WINDOW_DELTA: f64 = 0.05;
/// Exponent slack in the upper-bound envelopes.
pub const EPSILON: f64 = 0.01;

/// OLS slope of log(value) on log(scale) with its standard error.
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 samples, got {}", samples.len())));
    }
    loglog_slope(samples)
}

fn check_modulus(k: u64) -> Result<()> {
    if k != 1 && !is_prime(k) {
        return Err(Error::NotPrime(k));
    }
    Ok(())
}

fn check_small_modulus(k: u64, x: f64) -> Result<()> {
    let k3 = (k as f64).powi(3);
    if k3 > x {
        return Err(Error::RangeViolation(format!("k^3 <= X required, got k^3 = {k3}, X = {x}")));
    }
    Ok(())
}

fn check_table_range(hi: f64, table: &CoefficientTable) -> Result<()> {
    if hi.ceil() > table.m_max as f64 {
        return Err(Error::RangeViolation(format!(
            "window end {hi} exceeds the table size {}",
            table.m_max
        )));
    }
    Ok(())
}

/// int_{u0}^{u1} |p(u)|^2 du for a polynomial in ascending powers.
fn abs_sq_integral(p: &[Complex64], u0: f64, u1: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for (i, a) in p.iter().enumerate() {
        for (j, b) in p.iter().enumerate() {
            let e = (i + j + 1) as i32;
            acc.add((a * b.conj()).re * (u1.powi(e) - u0.powi(e)) / e as f64);
        }
    }
    acc.sum()
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Per-twist data: the averaged series and its residue polynomial.
struct TwistData {
    series: TwistedSeries,
    residue: Vec<Complex64>,
}

fn twist_data<L>(a: u32, twist: Twist, table: &CoefficientTable, n_max: usize, lvalues: &L) -> Result<TwistData>
where
    L: Fn(&Twist) -> Result<LValueSet>,
{
    let lv = lvalues(&twist)?;
    Ok(TwistData {
        series: TwistedSeries::new(Variant::Averaged, twist, table, n_max)?,
        residue: residue_coefficients(a, Variant::Averaged, &lv)?,
    })
}

/// int_lo^hi |A~_a(x)|^2 dx, exactly, one unit interval at a time.
fn window_abs_sq(a: u32, data: &TwistData, lo: f64, hi: f64) -> Result<f64> {
    let n0 = lo.floor() as usize;
    let n1 = hi.ceil() as usize;
    let mut acc = NeumaierSum::new();
    data.series.for_each_interval(a, n0, n1, |n, raw| {
        let nf = n as f64;
        let u0 = (lo - nf).max(0.0);
        let u1 = (hi - nf).min(1.0);
        if u1 > u0 {
            let d = sub(raw, &shift_polynomial(&data.residue, nf));
            acc.add(abs_sq_integral(&d, u0, u1));
        }
    })?;
    Ok(acc.sum())
}

/// One row of a moment experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow {
    pub x: f64,
    pub delta: f64,
    pub xi: f64,
    pub value: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Averaged moments over a grid, with the exponent fitted against `scale_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub k: u64,
    pub a: u32,
    pub scale_axis: &'static str,
    pub rows: Vec<MomentRow>,
    pub fitted_exponent: f64,
    pub fit_stderr: f64,
}

impl MomentReport {
    pub const CSV_HEADER: &'static str = "k,a,x,delta,xi,value,predicted,ratio,fitted_exponent,fit_stderr";

    /// Builds the report and fits an exponent when there are at least 3 rows.
    pub fn new(k: u64, a: u32, scale_axis: &'static str, rows: Vec<MomentRow>) -> Result<Self> {
        let samples: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (if scale_axis == "delta" { r.delta } else { r.x }, r.value))
            .collect();
        let (fitted_exponent, fit_stderr) = if samples.len() >= 3 { fit_exponent(&samples)? } else { (f64::NAN, f64::NAN) };
        Ok(MomentReport {
            k,
            a,
            scale_axis,
            rows,
            fitted_exponent,
            fit_stderr,
        })
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.k, self.a, r.x, r.delta, r.xi, r.value, r.predicted, r.ratio, self.fitted_exponent, self.fit_stderr
            )
            .unwrap();
        }
        out
    }
}

fn predicted_long(a: u32, k: u64, x: f64) -> f64 {
    let kf = k as f64;
    match a {
        1 => kf.powi(3) * x.powi(3),
        _ => kf.powi(5) * x.powf(13.0 / 3.0),
    }
}

fn mean_over_twists<F>(k: u64, f: F) -> Result<f64>
where
    F: Fn(Twist) -> Result<f64> + Sync,
{
    let twists = Twist::all(k);
    let parts = twists.par_iter().map(|&t| f(t)).collect::<Result<Vec<f64>>>()?;
    let mut acc = NeumaierSum::new();
    for p in &parts {
        acc.add(*p);
    }
    Ok(acc.sum() / parts.len() as f64)
}

/// E_h int_X^{wX} |A~_a(x; h/k)|^2 dx with L-values computed from the table.
pub fn mean_square(a: u32, x: f64, window_factor: f64, k: u64, table: &CoefficientTable, tol: f64) -> Result<MomentRow> {
    mean_square_with(a, x, window_factor, k, table, |t: &Twist| LValueSet::compute(a, t, table, tol))
}

/// As `mean_square` with the residue built from caller-supplied L-values.
pub fn mean_square_with<L>(
    a: u32,
    x: f64,
    window_factor: f64,
    k: u64,
    table: &CoefficientTable,
    lvalues: L,
) -> Result<MomentRow>
where
    L: Fn(&Twist) -> Result<LValueSet> + Sync,
{
    if !(a == 1 || a == 2) {
        return Err(Error::RangeViolation(format!("mean_square needs a in {{1, 2}}, got {a}")));
    }
    check_modulus(k)?;
    check_small_modulus(k, x)?;
    if !(window_factor > 1.0) {
        return Err(Error::RangeViolation(format!("window factor must exceed 1, got {window_factor}")));
    }
    let hi = window_factor * x;
    check_table_range(hi, table)?;
    let n_max = (hi.ceil() as usize).min(table.m_max);
    let value = mean_over_twists(k, |t| window_abs_sq(a, &twist_data(a, t, table, n_max, &lvalues)?, x, hi))?;
    let predicted = predicted_long(a, k, x);
    Ok(MomentRow {
        x,
        delta: 0.0,
        xi: hi - x,
        value,
        predicted,
        ratio: value / predicted,
    })
}

/// mean_square over a grid of X, with the fitted X-exponent.
pub fn mean_square_report(
    a: u32,
    x_grid: &[f64],
    window_factor: f64,
    k: u64,
    table: &CoefficientTable,
    tol: f64,
) -> Result<MomentReport> {
    let rows = x_grid
        .iter()
        .map(|&x| mean_square(a, x, window_factor, k, table, tol))
        .collect::<Result<Vec<_>>>()?;
    MomentReport::new(k, a, "x", rows)
}

/// Checks k^{3/2} X^{1/2+d} <= Delta <= k X^{2/3-d} and X^{2+d} k^3 <= Xi Delta^2.
pub fn check_short_window(x: f64, delta: f64, xi: f64, k: u64) -> Result<()> {
    let kf = k as f64;
    let d = WINDOW_DELTA;
    let lower = kf.powf(1.5) * x.powf(0.5 + d);
    let upper = kf * x.powf(2.0 / 3.0 - d);
    if delta < lower {
        return Err(Error::RangeViolation(format!(
            "Delta >= k^(3/2) X^(1/2+delta) = {lower:.4} required, got {delta}"
        )));
    }
    if delta > upper {
        return Err(Error::RangeViolation(format!(
            "Delta <= k X^(2/3-delta) = {upper:.4} required, got {delta}"
        )));
    }
    let need = x.powf(2.0 + d) * kf.powi(3);
    if xi * delta * delta < need {
        return Err(Error::RangeViolation(format!(
            "Xi Delta^2 >= X^(2+delta) k^3 = {need:.4e} required, got {:.4e}",
            xi * delta * delta
        )));
    }
    Ok(())
}

fn predicted_short(a: u32, k: u64, x: f64, delta: f64, xi: f64) -> f64 {
    let kf = k as f64;
    match a {
        2 => xi * delta * delta * x * x * kf.powi(3),
        _ => xi * delta * delta * x.powf(10.0 / 3.0) * kf.powi(5),
    }
}

/// int_X^{X+Xi} |A~_a(x+Delta) - A~_a(x)|^2 dx, exactly. The integrand is a
/// polynomial between consecutive points of Z and Z - Delta.
fn short_window_abs_sq(a: u32, data: &TwistData, x: f64, delta: f64, xi: f64) -> Result<f64> {
    let end = x + xi;
    let n0 = x.floor() as usize;
    let n1 = (end + delta).floor() as usize + 1;
    let mut polys: Vec<Vec<Complex64>> = Vec::with_capacity(n1 - n0);
    data.series.for_each_interval(a, n0, n1, |_, p| polys.push(p.to_vec()))?;
    let step = sub(&shift_polynomial(&data.residue, delta), &data.residue);

    let mut cuts = vec![x, end];
    let mut n = x.floor() + 1.0;
    while n < end {
        cuts.push(n);
        n += 1.0;
    }
    let mut n = (x + delta).floor() + 1.0;
    while n - delta < end {
        if n - delta > x {
            cuts.push(n - delta);
        }
        n += 1.0;
    }
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup();

    let mut acc = NeumaierSum::new();
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1]);
        if e <= s {
            continue;
        }
        let mid = 0.5 * (s + e);
        let i1 = mid.floor() as usize;
        let i2 = (mid + delta).floor() as usize;
        let p1 = shift_polynomial(&polys[i1 - n0], s - i1 as f64);
        let p2 = shift_polynomial(&polys[i2 - n0], s + delta - i2 as f64);
        let r = shift_polynomial(&step, s);
        let d: Vec<Complex64> = (0..p1.len()).map(|q| p2[q] - p1[q] - r[q]).collect();
        acc.add(abs_sq_integral(&d, 0.0, e - s));
    }
    Ok(acc.sum())
}

/// E_h int_X^{X+Xi} |A~_a(x+Delta; h/k) - A~_a(x; h/k)|^2 dx inside the theorem window.
pub fn short_mean_square(
    a: u32,
    x: f64,
    delta: f64,
    xi: f64,
    k: u64,
    table: &CoefficientTable,
    tol: f64,
) -> Result<MomentRow> {
    check_modulus(k)?;
    check_short_window(x, delta, xi, k)?;
    short_mean_square_with(a, x, delta, xi, k, table, |t: &Twist| LValueSet::compute(a, t, table, tol))
}

/// `short_mean_square` without the theorem-window check, for scans that
/// deliberately leave the window.
pub fn short_mean_square_unchecked(
    a: u32,
    x: f64,
    delta: f64,
    xi: f64,
    k: u64,
    table: &CoefficientTable,
    tol: f64,
) -> Result<MomentRow> {
    short_mean_square_with(a, x, delta, xi, k, table, |t: &Twist| LValueSet::compute(a, t, table, tol))
}

/// Unchecked short moment with caller-supplied L-values.
pub fn short_mean_square_with<L>(
    a: u32,
    x: f64,
    delta: f64,
    xi: f64,
    k: u64,
    table: &CoefficientTable,
    lvalues: L,
) -> Result<MomentRow>
where
    L: Fn(&Twist) -> Result<LValueSet> + Sync,
{
    if !(a == 2 || a == 3) {
        return Err(Error::RangeViolation(format!("short_mean_square needs a in {{2, 3}}, got {a}")));
    }
    check_modulus(k)?;
    if !(x >= 1.0 && delta >= 0.0 && xi > 0.0) {
        return Err(Error::RangeViolation(format!("need X >= 1, Delta >= 0, Xi > 0; got {x}, {delta}, {xi}")));
    }
    let predicted = predicted_short(a, k, x, delta, xi);
    if delta == 0.0 {
        return Ok(MomentRow {
            x,
            delta,
            xi,
            value: 0.0,
            predicted,
            ratio: 0.0,
        });
    }
    let hi = x + xi + delta;
    check_table_range(hi + 1.0, table)?;
    let n_max = (hi.floor() as usize + 1).min(table.m_max);
    let value = mean_over_twists(k, |t| short_window_abs_sq(a, &twist_data(a, t, table, n_max, &lvalues)?, x, delta, xi))?;
    Ok(MomentRow {
        x,
        delta,
        xi,
        value,
        predicted,
        ratio: value / predicted,
    })
}

/// Prefix sums of A(m,1) e(mh/k), index n holding the sum over m <= n.
fn prefix_sums(twist: &Twist, table: &CoefficientTable, n_max: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let series = TwistedSeries::new(Variant::Averaged, *twist, table, n_max)?;
    let mut prefix = vec![C0; n_max + 1];
    let mut acc = crate::sum::ComplexSum::new();
    for m in 1..=n_max {
        acc.add(series.coeffs[m]);
        prefix[m] = acc.sum();
    }
    Ok((prefix, series.coeffs))
}

fn primed_upto(prefix: &[Complex64], coeffs: &[Complex64], x: f64) -> Complex64 {
    let n = x.floor() as usize;
    let mut s = prefix[n];
    if x == n as f64 && n >= 1 {
        s -= 0.5 * coeffs[n];
    }
    s
}

/// Sum' over x <= m <= x + Delta, endpoint terms halved. The difference of
/// the two primed prefix sums already halves both ends.
fn primed_between(prefix: &[Complex64], coeffs: &[Complex64], x: f64, delta: f64) -> Complex64 {
    primed_upto(prefix, coeffs, x + delta) - primed_upto(prefix, coeffs, x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaMode {
    Long,
    Short { delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaRow {
    pub k: u64,
    pub x: f64,
    pub max_abs: f64,
    pub benchmark: f64,
    pub ratio: f64,
    /// Largest ratio over the window (x/2, x].
    pub window_ratio: f64,
    /// Minimum window ratio over this k and every x up to this one.
    pub running_min: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaReport {
    pub mode: OmegaMode,
    pub rows: Vec<OmegaRow>,
    /// Minimum window ratio over the whole grid.
    pub min_ratio: f64,
}

impl OmegaReport {
    pub const CSV_HEADER: &'static str = "mode,k,x,delta,max_abs,benchmark,ratio,window_ratio,running_min";

    pub fn csv(&self) -> String {
        let (mode, delta) = match self.mode {
            OmegaMode::Long => ("long", 0.0),
            OmegaMode::Short { delta } => ("short", delta),
        };
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{mode},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.k, r.x, delta, r.max_abs, r.benchmark, r.ratio, r.window_ratio, r.running_min
            )
            .unwrap();
        }
        out
    }
}

fn benchmark(mode: OmegaMode, x: f64, k: u64) -> f64 {
    let kf = k as f64;
    match mode {
        OmegaMode::Long => kf.sqrt() * x.cbrt(),
        OmegaMode::Short { delta } => delta / (x.cbrt() * kf.sqrt()),
    }
}

/// Points of (x/2, x] at which the sum takes each of its values. The long
/// sum is constant on [n, n+1); the short one changes at n and n - Delta.
fn window_points(mode: OmegaMode, x: f64) -> Vec<f64> {
    let lo = (x / 2.0).floor() as usize;
    let hi = x.floor() as usize;
    let mut out = Vec::new();
    for n in lo..=hi {
        let n = n as f64;
        match mode {
            OmegaMode::Long => out.push(n.max(x / 2.0 + 1e-9)),
            OmegaMode::Short { delta } => {
                let f = delta.fract();
                if f == 0.0 {
                    out.push(n + 0.5);
                } else {
                    out.push(n + (1.0 - f) / 2.0);
                    out.push(n + 1.0 - f / 2.0);
                }
            }
        }
    }
    out.push(x);
    out.retain(|&y| y > x / 2.0 && y <= x);
    out
}

/// Per x: max over h of |sum'| at x, and max over h and the window
/// (x/2, x] of |sum| divided by the benchmark.
fn omega_maxima(mode: OmegaMode, xs: &[f64], k: u64, table: &CoefficientTable) -> Result<Vec<(f64, f64)>> {
    let top = xs.iter().fold(0.0f64, |m, &x| m.max(x));
    let top = match mode {
        OmegaMode::Long => top,
        OmegaMode::Short { delta } => top + delta,
    };
    check_table_range(top, table)?;
    let n_max = top.floor() as usize;
    let points: Vec<Vec<f64>> = xs.iter().map(|&x| window_points(mode, x)).collect();
    let per_twist = Twist::all(k)
        .par_iter()
        .map(|t| -> Result<Vec<(f64, f64)>> {
            let (prefix, coeffs) = prefix_sums(t, table, n_max)?;
            // Right-continuous sum over m <= y, which is the value just after y.
            let upto = |y: f64| prefix[y.floor() as usize];
            Ok(xs
                .iter()
                .zip(&points)
                .map(|(&x, pts)| {
                    let at_x = match mode {
                        OmegaMode::Long => primed_upto(&prefix, &coeffs, x).norm(),
                        OmegaMode::Short { delta } => primed_between(&prefix, &coeffs, x, delta).norm(),
                    };
                    let window = pts.iter().fold(0.0f64, |m, &y| {
                        let v = match mode {
                            OmegaMode::Long if y == x => primed_upto(&prefix, &coeffs, x),
                            OmegaMode::Long => upto(y),
                            OmegaMode::Short { delta } if y == x => primed_between(&prefix, &coeffs, x, delta),
                            OmegaMode::Short { delta } => upto(y + delta) - upto(y),
                        };
                        m.max(v.norm() / benchmark(mode, y, k))
                    });
                    (at_x, window)
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..xs.len())
        .map(|i| per_twist.iter().fold((0.0f64, 0.0f64), |m, v| (m.0.max(v[i].0), m.1.max(v[i].1))))
        .collect())
}

/// Ratios of max_h |sum'| to k^{1/2} x^{1/3} (long) or Delta x^{-1/3} k^{-1/2}
/// (short), pointwise and as the maximum over the window (x/2, x].
pub fn omega_scan(mode: OmegaMode, x_grid: &[f64], k_set: &[u64], table: &CoefficientTable) -> Result<OmegaReport> {
    for &k in k_set {
        check_modulus(k)?;
        for &x in x_grid {
            if !(x >= 2.0) {
                return Err(Error::RangeViolation(format!("x must be >= 2, got {x}")));
            }
            match mode {
                OmegaMode::Long => check_small_modulus(k, x / 2.0)?,
                OmegaMode::Short { delta } => {
                    check_short_omega_window(x / 2.0, delta, k)?;
                    check_short_omega_window(x, delta, k)?;
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for &k in k_set {
        let maxima = omega_maxima(mode, x_grid, k, table)?;
        let mut running = f64::INFINITY;
        for (&x, &(max_abs, window_ratio)) in x_grid.iter().zip(&maxima) {
            let benchmark = benchmark(mode, x, k);
            running = running.min(window_ratio);
            min_ratio = min_ratio.min(window_ratio);
            rows.push(OmegaRow {
                k,
                x,
                max_abs,
                benchmark,
                ratio: max_abs / benchmark,
                window_ratio,
                running_min: running,
            });
        }
    }
    Ok(OmegaReport {
        mode,
        rows,
        min_ratio,
    })
}

/// Checks k^{3/2} x^{1/2+d} <= Delta <= k x^{2/3-d}.
pub fn check_short_omega_window(x: f64, delta: f64, k: u64) -> Result<()> {
    let kf = k as f64;
    let lower = kf.powf(1.5) * x.powf(0.5 + WINDOW_DELTA);
    let upper = kf * x.powf(2.0 / 3.0 - WINDOW_DELTA);
    if delta < lower || delta > upper {
        return Err(Error::RangeViolation(format!(
            "k^(3/2) x^(1/2+delta) <= Delta <= k x^(2/3-delta) required: {lower:.4} <= {delta} <= {upper:.4} fails"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperBoundRow {
    pub k: u64,
    pub x: f64,
    pub max_abs: f64,
    /// Against k^{3/4} x^{1/2 + theta/2 + eps}.
    pub ratio_main: f64,
    /// Against x^{3/4 + eps}.
    pub ratio_baseline: f64,
    /// Against k^{1/2+eps} x^{2/3} + k x^{1/3 + theta + eps}.
    pub ratio_small_modulus: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperBoundReport {
    pub theta: f64,
    pub rows: Vec<UpperBoundRow>,
    /// Sup of each ratio column over the grid.
    pub sups: [f64; 3],
    /// Log-log slope in x of the per-x maximum (over k) of each ratio column.
    pub trend: [f64; 3],
    /// No significant growth: slope below twice its standard error.
    pub bounded: [bool; 3],
    /// Log-log slope of max_h |sum'| against x at k = 1, when k = 1 is scanned.
    pub slope_k1: Option<f64>,
}

impl UpperBoundReport {
    pub const CSV_HEADER: &'static str = "k,x,max_abs,ratio_main,ratio_baseline,ratio_small_modulus";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.k, r.x, r.max_abs, r.ratio_main, r.ratio_baseline, r.ratio_small_modulus
            )
            .unwrap();
        }
        out
    }
}

/// max_h |sum'_{m <= x}| against the improved bound and two comparison envelopes.
pub fn upper_bound_scan(x_grid: &[f64], k_set: &[u64], table: &CoefficientTable) -> Result<UpperBoundReport> {
    let theta = THETA_PROVED;
    for &k in k_set {
        if k == 0 {
            return Err(Error::RangeViolation("k must be positive".into()));
        }
        for &x in x_grid {
            check_small_modulus(k, x)?;
        }
    }
    let mut rows = Vec::new();
    for &k in k_set {
        let maxima: Vec<f64> = omega_maxima(OmegaMode::Long, x_grid, k, table)?.into_iter().map(|m| m.0).collect();
        let kf = k as f64;
        for (&x, &max_abs) in x_grid.iter().zip(&maxima) {
            let main = kf.powf(0.75) * x.powf(0.5 + theta / 2.0 + EPSILON);
            let baseline = x.powf(0.75 + EPSILON);
            let small = kf.powf(0.5 + EPSILON) * x.powf(2.0 / 3.0) + kf * x.powf(1.0 / 3.0 + theta + EPSILON);
            rows.push(UpperBoundRow {
                k,
                x,
                max_abs,
                ratio_main: max_abs / main,
                ratio_baseline: max_abs / baseline,
                ratio_small_modulus: max_abs / small,
            });
        }
    }
    let column = |r: &UpperBoundRow, c: usize| match c {
        0 => r.ratio_main,
        1 => r.ratio_baseline,
        _ => r.ratio_small_modulus,
    };
    let mut sups = [0.0; 3];
    let mut trend = [f64::NAN; 3];
    let mut bounded = [true; 3];
    for c in 0..3 {
        sups[c] = rows.iter().fold(0.0f64, |m, r| m.max(column(r, c)));
        let per_x: Vec<(f64, f64)> = x_grid
            .iter()
            .map(|&x| (x, rows.iter().filter(|r| r.x == x).fold(0.0f64, |m, r| m.max(column(r, c)))))
            .collect();
        if let Ok((slope, stderr)) = fit_exponent(&per_x) {
            trend[c] = slope;
            bounded[c] = slope <= 2.0 * stderr;
        }
    }
    let slope_k1 = if k_set.contains(&1) {
        let samples: Vec<(f64, f64)> = rows.iter().filter(|r| r.k == 1).map(|r| (r.x, r.max_abs)).collect();
        fit_exponent(&samples).ok().map(|s| s.0)
    } else {
        None
    };
    Ok(UpperBoundReport {
        theta,
        rows,
        sups,
        trend,
        bounded,
        slope_k1,
    })
}
