//! Gamma quotients and the Meijer function J_{a,j}(y) = (1/2 pi i) int Q(s) y^s ds.

use super::gamma::{digamma, is_nonpositive_integer, log_gamma};
use super::quad::{integrate_path, GeometricRay, Line, PathPiece, Reversed};
use crate::coeffs::CuspFormSpec;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeijerMethod {
    Contour,
    Asymptotic,
}

#[derive(Clone, Copy, Debug)]
pub struct MeijerValue {
    pub value: Complex64,
    pub est_error: f64,
    pub method: MeijerMethod,
}

/// The polygon sigma0 - i inf, sigma0 - i Lambda, sigma1 - i Lambda,
/// sigma1 + i Lambda, sigma0 + i Lambda, sigma0 + i inf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub sigma0: f64,
    pub sigma1: f64,
    pub lambda: f64,
    pub t_max: f64,
    /// Initial panel length; panels are then bisected until the rtol test passes.
    pub step: f64,
    pub rtol: f64,
}

impl ContourSpec {
    /// An admissible contour scaled to y: the horizontal legs sit just above
    /// the saddle height y^{1/6}, so the integrand stays of the size of the result.
    pub fn for_order(a: u32, y: f64, spec: &CuspFormSpec) -> Self {
        let t = y.powf(1.0 / 6.0);
        let lambda = (1.1 * t).max(spec.max_half_imag() + 1.0).max(1.0);
        let sigma0 = 2.0;
        let decay = 6.0 * sigma0 + a as f64 - 1.5;
        ContourSpec {
            sigma0,
            sigma1: -(a as f64) / 2.0 - 0.5,
            lambda,
            t_max: lambda * 10f64.powf(13.0 / decay),
            step: 0.25,
            rtol: 1e-10,
        }
    }

    pub fn doubled(&self) -> Self {
        ContourSpec {
            sigma0: 2.0 * self.sigma0,
            sigma1: 2.0 * self.sigma1,
            lambda: 2.0 * self.lambda,
            t_max: 2.0 * self.t_max,
            step: 2.0 * self.step,
            rtol: self.rtol,
        }
    }

    pub fn validate(&self, a: u32, spec: &CuspFormSpec) -> Result<()> {
        let a = a as f64;
        if !(self.sigma0 > 0.25 - a / 6.0) {
            return Err(Error::ContourViolation(format!(
                "sigma0 = {} must exceed 1/4 - a/6 = {}",
                self.sigma0,
                0.25 - a / 6.0
            )));
        }
        if !(self.sigma1 < -a / 2.0) {
            return Err(Error::ContourViolation(format!(
                "sigma1 = {} must be below -a/2 = {}",
                self.sigma1,
                -a / 2.0
            )));
        }
        if !(self.lambda > spec.max_half_imag()) {
            return Err(Error::ContourViolation(format!(
                "Lambda = {} must exceed the parameter heights {}",
                self.lambda,
                spec.max_half_imag()
            )));
        }
        if !(self.t_max > self.lambda) || !(self.step > 0.0) || !(self.rtol > 0.0) {
            return Err(Error::ContourViolation(
                "need t_max > Lambda, step > 0 and rtol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Sum of log Gamma over numerator arguments minus denominator arguments.
/// `None` when a denominator argument sits on a pole, i.e. the quotient is 0.
fn log_quotient(num: &[(Complex64, &str)], den: &[Complex64]) -> Result<Option<Complex64>> {
    if den.iter().any(|&z| is_nonpositive_integer(z)) {
        return Ok(None);
    }
    let mut acc = C0;
    for &(z, label) in num {
        if is_nonpositive_integer(z) {
            return Err(Error::Pole(format!("numerator factor {label} at argument {}", z.re)));
        }
        acc += log_gamma(z)?;
    }
    for &z in den {
        acc -= log_gamma(z)?;
    }
    Ok(Some(acc))
}

/// Q(s) for fixed (a, j, spec), with the shifts precomputed.
#[derive(Clone, Debug)]
pub struct QKernel {
    pub a: u32,
    pub j: u32,
    num: Vec<(Complex64, &'static str)>,
    den: [Complex64; 3],
    /// Shifts c of the denominator factors Gamma(c - s) left after cancelling
    /// against identical numerator factors.
    den_reflected: Vec<Complex64>,
    conj_closed: bool,
    max_half_imag: f64,
}

const NUM_LABELS: [&str; 5] = [
    "Gamma((1+j+alpha)/2 - s)",
    "Gamma((1+j+beta)/2 - s)",
    "Gamma((1+j+gamma)/2 - s)",
    "Gamma(-a/2 - s)",
    "Gamma(1/2 - a/2 - s)",
];

impl QKernel {
    pub fn new(a: u32, j: u32, spec: &CuspFormSpec) -> Self {
        let p = spec.params();
        let jf = j as f64;
        let af = a as f64;
        let all = [
            (1.0 + jf + p[0]) / 2.0,
            (1.0 + jf + p[1]) / 2.0,
            (1.0 + jf + p[2]) / 2.0,
            Complex64::new(-af / 2.0, 0.0),
            Complex64::new(0.5 - af / 2.0, 0.0),
        ];
        let mut num: Vec<(Complex64, &'static str)> = all.into_iter().zip(NUM_LABELS).collect();
        let mut den_reflected = Vec::new();
        for c in [Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)] {
            match num.iter().position(|&(n, _)| n == c) {
                Some(i) => {
                    num.remove(i);
                }
                None => den_reflected.push(c),
            }
        }
        let den = [(jf - p[0]) / 2.0, (jf - p[1]) / 2.0, (jf - p[2]) / 2.0];
        QKernel {
            a,
            j,
            num,
            den,
            den_reflected,
            conj_closed: spec.is_conjugation_closed(),
            max_half_imag: spec.max_half_imag(),
        }
    }

    pub fn log_q(&self, s: Complex64) -> Result<Option<Complex64>> {
        let num: Vec<(Complex64, &str)> = self.num.iter().map(|&(c, l)| (c - s, l)).collect();
        let mut den: Vec<Complex64> = self.den.iter().map(|&d| s + d).collect();
        den.extend(self.den_reflected.iter().map(|&c| c - s));
        log_quotient(&num, &den)
    }

    pub fn q(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.log_q(s)?.map_or(C0, |l| l.exp()))
    }

    /// d/ds log Q(s).
    fn dlog_q(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = C0;
        for &(c, _) in &self.num {
            acc -= digamma(c - s)?;
        }
        for &d in &self.den {
            acc -= digamma(s + d)?;
        }
        for &c in &self.den_reflected {
            acc += digamma(c - s)?;
        }
        Ok(acc)
    }

    /// Q(s) y^s / (2 pi i), computed in log space.
    fn integrand(&self, s: Complex64, ln_y: f64) -> Result<Complex64> {
        Ok(match self.log_q(s)? {
            Some(l) => (l + s * ln_y).exp() / Complex64::new(0.0, 2.0 * PI),
            None => C0,
        })
    }
}

pub fn gamma_quotient_q(s: Complex64, a: u32, j: u32, spec: &CuspFormSpec) -> Result<Complex64> {
    QKernel::new(a, j, spec).q(s)
}

/// log G_j(s + j); `None` when G_j(s + j) = 0.
pub fn log_g_factor(s: Complex64, j: u32, spec: &CuspFormSpec) -> Result<Option<Complex64>> {
    let p = spec.params();
    let jf = j as f64;
    let labels = [
        "Gamma((1-s+j+alpha)/2)",
        "Gamma((1-s+j+beta)/2)",
        "Gamma((1-s+j+gamma)/2)",
    ];
    let num: Vec<(Complex64, &str)> = p
        .iter()
        .zip(labels)
        .map(|(&q, l)| ((1.0 - s + jf + q) / 2.0, l))
        .collect();
    let den: Vec<Complex64> = p.iter().map(|&q| (s + jf - q) / 2.0).collect();
    log_quotient(&num, &den)
}

/// G_j(s + j), the three-over-three Gamma quotient of the functional equation.
pub fn g_factor(s: Complex64, j: u32, spec: &CuspFormSpec) -> Result<Complex64> {
    Ok(log_g_factor(s, j, spec)?.map_or(C0, |l| l.exp()))
}

struct PolygonResult {
    value: Complex64,
    error: f64,
    tail: f64,
}

/// (1/2 pi i) int f over the polygon, with the power-law tail beyond t_max
/// estimated from |f(sigma0 +- i t_max)| and the decay exponent `decay`.
fn polygon_integral<F>(f: &F, c: &ContourSpec, decay: f64) -> Result<PolygonResult>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let (s0, s1, l) = (c.sigma0, c.sigma1, c.lambda);
    let z = |x: f64, y: f64| Complex64::new(x, y);
    let u_max = (c.t_max / l).ln();
    let down = Reversed(GeometricRay {
        start: z(s0, -l),
        dir: z(0.0, -1.0),
        len0: l,
        u_max,
    });
    let up = GeometricRay {
        start: z(s0, l),
        dir: z(0.0, 1.0),
        len0: l,
        u_max,
    };
    let bottom = Line { p0: z(s0, -l), p1: z(s1, -l) };
    let left = Line { p0: z(s1, -l), p1: z(s1, l) };
    let top = Line { p0: z(s1, l), p1: z(s0, l) };
    let panels = |len: f64| ((len / c.step).ceil() as usize).clamp(1, 4000);
    let ray_panels = panels(u_max * l);
    let pieces: [(&dyn PathPiece, usize); 5] = [
        (&down, ray_panels),
        (&bottom, panels(s0 - s1)),
        (&left, panels(2.0 * l)),
        (&top, panels(s0 - s1)),
        (&up, ray_panels),
    ];
    let r = integrate_path(f, &pieces, c.rtol)?;
    let tail = (f(z(s0, c.t_max))?.norm() + f(z(s0, -c.t_max))?.norm()) * c.t_max / decay;
    Ok(PolygonResult {
        value: r.value,
        error: r.error + 1e-14 * r.l1,
        tail,
    })
}

const MAX_LEG_FACTOR: f64 = 20.0;

/// J_{a,j}(y) by quadrature along the polygonal contour.
///
/// If the tail beyond t_max exceeds 1e-10 |value| the legs are lengthened
/// (up to 20 t_max); a remaining tail above 1e-3 |value| is NonConvergent.
pub fn meijer_contour(a: u32, j: u32, y: f64, spec: &CuspFormSpec, contour: &ContourSpec) -> Result<MeijerValue> {
    if !(y > 0.0) || a == 0 || j > 1 {
        return Err(Error::RangeViolation(format!("need y > 0, a >= 1, j in {{0,1}}; got y={y}, a={a}, j={j}")));
    }
    contour.validate(a, spec)?;
    let kernel = QKernel::new(a, j, spec);
    let ln_y = y.ln();
    let f = |s: Complex64| kernel.integrand(s, ln_y);
    let decay = 6.0 * contour.sigma0 + a as f64 - 1.5;
    let tail_at = |t: f64| -> Result<f64> {
        let s0 = contour.sigma0;
        Ok((f(Complex64::new(s0, t))?.norm() + f(Complex64::new(s0, -t))?.norm()) * t / decay)
    };
    let mut c = *contour;
    let first = polygon_integral(&f, &c, decay)?;
    let scale = first.value.norm();
    if first.tail <= 1e-10 * scale {
        return Ok(MeijerValue {
            value: first.value,
            est_error: first.error + first.tail,
            method: MeijerMethod::Contour,
        });
    }
    let cap = MAX_LEG_FACTOR * c.lambda.max(c.t_max);
    while c.t_max < cap && tail_at(c.t_max)? > 1e-10 * scale {
        c.t_max = (2.0 * c.t_max).min(cap);
    }
    let tail = tail_at(c.t_max)?;
    if tail > 1e-3 * scale {
        return Err(Error::NonConvergent { tail, value: scale });
    }
    let r = polygon_integral(&f, &c, decay)?;
    Ok(MeijerValue {
        value: r.value,
        est_error: r.error + r.tail,
        method: MeijerMethod::Contour,
    })
}

const SADDLE_MIN_HEIGHT: f64 = 12.0;
const NEGLIGIBLE: f64 = 1e-17;

impl QKernel {
    fn saddle(&self, ln_y: f64, guess: Complex64) -> Result<Complex64> {
        let g = |s: Complex64| -> Result<Complex64> { Ok(self.dlog_q(s)? + ln_y) };
        let mut s = guess;
        for _ in 0..60 {
            let h = 1e-5 * s.norm().max(1.0);
            let d = (g(s + h)? - g(s - h)?) / (2.0 * h);
            let step = g(s)? / d;
            s -= step;
            if step.norm() < 1e-13 * s.norm().max(1.0) {
                return Ok(s);
            }
        }
        Err(Error::ContourViolation(format!("saddle search from {guess} did not converge")))
    }

    fn second_log_derivative(&self, s: Complex64) -> Result<Complex64> {
        let h = 1e-5 * s.norm().max(1.0);
        Ok((self.dlog_q(s + h)? - self.dlog_q(s - h)?) / (2.0 * h))
    }

    /// Integral of Q(s) y^s (no 1/2 pi i) along the line through the saddle
    /// in its steepest-descent direction, from the real axis outward.
    /// Returns (integral, error estimate, crossing point on the real axis).
    fn saddle_line(&self, ln_y: f64, saddle: Complex64, rtol: f64) -> Result<(Complex64, f64, f64)> {
        let f2 = self.second_log_derivative(saddle)?;
        let mut theta = (PI - f2.arg()) / 2.0;
        if theta.cos() < 0.0 {
            theta -= PI;
        }
        if theta > PI {
            theta -= 2.0 * PI;
        }
        let dir = Complex64::from_polar(1.0, theta);
        let u_cross = -saddle.im / theta.sin();
        let crossing = saddle.re + u_cross * theta.cos();
        // Every numerator pole row on this side must stay strictly right of the line.
        for &(c, _) in &self.num {
            if c.im * saddle.im >= 0.0 {
                let x_line = saddle.re + (c.im - saddle.im) / theta.tan();
                if x_line > c.re - 0.5 {
                    return Err(Error::ContourViolation(format!(
                        "steepest-descent line passes right of the pole at {c}"
                    )));
                }
            }
        }
        let sigma = 1.0 / f2.norm().sqrt();
        let log_at = |u: f64| -> Result<Option<Complex64>> {
            let s = saddle + dir * u;
            Ok(self.log_q(s)?.map(|l| l + s * ln_y))
        };
        let peak = log_at(0.0)?.ok_or_else(|| Error::ContourViolation("saddle at a zero of Q".into()))?;
        let value_at = |u: f64| -> Result<Complex64> {
            Ok(log_at(u)?.map_or(C0, |l| (l - peak.re).exp()))
        };
        let cutoff = NEGLIGIBLE;
        let mut h = 0.7 * sigma;
        let mut nodes: Vec<(f64, Complex64)> = vec![(0.0, value_at(0.0)?)];
        let mut k = 1;
        loop {
            let u = k as f64 * h;
            let v = value_at(u)?;
            nodes.push((u, v));
            if v.norm() < cutoff && u > 3.0 * sigma {
                break;
            }
            k += 1;
            if k > 10_000 {
                return Err(Error::ContourViolation("upper tail did not decay".into()));
            }
        }
        let u_hi = k as f64 * h;
        let mut k = -1;
        let mut u_lo = 0.0;
        loop {
            let u = k as f64 * h;
            if u <= u_cross {
                let v = value_at(u_cross)?;
                if v.norm() > 1e-15 {
                    return Err(Error::ContourViolation(format!(
                        "integrand not negligible at the real-axis crossing ({:.3e})",
                        v.norm()
                    )));
                }
                break;
            }
            let v = value_at(u)?;
            nodes.push((u, v));
            u_lo = u;
            if v.norm() < cutoff && u < -3.0 * sigma {
                break;
            }
            k -= 1;
        }
        let mut sum: Complex64 = nodes.iter().map(|x| x.1).sum::<Complex64>() * h;
        let mut err = f64::INFINITY;
        for _ in 0..4 {
            let mut mids = C0;
            let n = ((u_hi - u_lo) / h).round() as i64;
            for i in 0..n {
                mids += value_at(u_lo + (i as f64 + 0.5) * h)?;
            }
            let refined = 0.5 * sum + mids * (0.5 * h);
            err = (refined - sum).norm();
            sum = refined;
            h *= 0.5;
            if err <= rtol * sum.norm() {
                break;
            }
        }
        let scale = peak.re.exp();
        Ok((sum * dir * scale, err * scale, crossing))
    }
}

/// J_{a,j}(y) along a steepest-descent path through the two saddles near
/// +-i y^{1/6}. Exact like the polygon, but with far fewer evaluations at
/// large y. Errors with ContourViolation where the path is not admissible.
pub fn meijer_saddle(a: u32, j: u32, y: f64, spec: &CuspFormSpec, rtol: f64) -> Result<MeijerValue> {
    let t = y.powf(1.0 / 6.0);
    if !(y > 0.0) || a == 0 || j > 1 {
        return Err(Error::RangeViolation(format!("need y > 0, a >= 1, j in {{0,1}}; got y={y}, a={a}, j={j}")));
    }
    let kernel = QKernel::new(a, j, spec);
    if t < SADDLE_MIN_HEIGHT || t < kernel.max_half_imag + 2.0 || t < a as f64 {
        return Err(Error::ContourViolation(format!("y^(1/6) = {t:.3} too small for the saddle path")));
    }
    let ln_y = y.ln();
    let s_up = kernel.saddle(ln_y, Complex64::new(0.0, t))?;
    let (i_up, e_up, c_up) = kernel.saddle_line(ln_y, s_up, rtol)?;
    if kernel.conj_closed {
        return Ok(MeijerValue {
            value: Complex64::new(i_up.im / PI, 0.0),
            est_error: e_up / PI,
            method: MeijerMethod::Contour,
        });
    }
    let s_down = kernel.saddle(ln_y, Complex64::new(0.0, -t))?;
    let (i_down, e_down, c_down) = kernel.saddle_line(ln_y, s_down, rtol)?;
    let mut bridge = C0;
    let mut bridge_err = 0.0;
    if c_up != c_down {
        let line = Line {
            p0: Complex64::new(c_down, 0.0),
            p1: Complex64::new(c_up, 0.0),
        };
        let f = |s: Complex64| kernel.integrand(s, ln_y);
        let r = integrate_path(&f, &[(&line, 1)], rtol)?;
        bridge = r.value;
        bridge_err = r.error;
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    Ok(MeijerValue {
        value: (i_up - i_down) / two_pi_i + bridge,
        est_error: (e_up + e_down) / (2.0 * PI) + bridge_err,
        method: MeijerMethod::Contour,
    })
}

/// J_{a,j}(y) by whichever exact path suits y: the steepest-descent path
/// when admissible, the polygon otherwise.
pub fn meijer(a: u32, j: u32, y: f64, spec: &CuspFormSpec) -> Result<MeijerValue> {
    match meijer_saddle(a, j, y, spec, 1e-12) {
        Ok(v) => Ok(v),
        Err(Error::ContourViolation(_)) => meijer_contour(a, j, y, spec, &ContourSpec::for_order(a, y, spec)),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticConfig {
    pub threshold: f64,
    pub error_constant: f64,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        AsymptoticConfig {
            threshold: 1e2,
            error_constant: 1.0,
        }
    }
}

/// Phase 6 y^{1/6} + (pi/2)(a + j) of the leading cosine.
pub fn meijer_phase(a: u32, j: u32, y: f64) -> f64 {
    6.0 * y.powf(1.0 / 6.0) + PI / 2.0 * (a + j) as f64
}

/// Leading term -(3 pi)^{-1/2} y^{(1-a)/6} cos(phase), error envelope C y^{-a/6}.
pub fn meijer_asymptotic(a: u32, j: u32, y: f64, cfg: &AsymptoticConfig) -> Result<MeijerValue> {
    if y < cfg.threshold {
        return Err(Error::BelowThreshold {
            y,
            threshold: cfg.threshold,
        });
    }
    let amp = y.powf((1.0 - a as f64) / 6.0) / (3.0 * PI).sqrt();
    Ok(MeijerValue {
        value: Complex64::new(-amp * meijer_phase(a, j, y).cos(), 0.0),
        est_error: cfg.error_constant * y.powf(-(a as f64) / 6.0),
        method: MeijerMethod::Asymptotic,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CheckResult {
    pub residual: f64,
    /// Magnitude of the side the residual is measured against.
    pub reference: f64,
}

impl CheckResult {
    pub fn relative(&self) -> f64 {
        self.residual / self.reference.max(f64::MIN_POSITIVE)
    }
}

/// Compares (1/2 pi i) int_{C(2 sigma0, 2 sigma1, 2 Lambda)} G_j(s+j) y^s / (s(s+1)...(s+a)) ds
/// with -(-2)^{-a} J_{a,j}(y^2), each side by its own quadrature.
pub fn check_perron_meijer(a: u32, j: u32, y: f64, spec: &CuspFormSpec, contour: &ContourSpec) -> Result<CheckResult> {
    contour.validate(a, spec)?;
    let doubled = contour.doubled();
    let ln_y = y.ln();
    let f = |s: Complex64| -> Result<Complex64> {
        let mut kernel = s;
        for i in 1..=a {
            kernel *= s + i as f64;
        }
        Ok(match log_g_factor(s, j, spec)? {
            Some(l) => (l + s * ln_y).exp() / (kernel * Complex64::new(0.0, 2.0 * PI)),
            None => C0,
        })
    };
    let decay = 3.0 * doubled.sigma0 + a as f64 - 1.5;
    let lhs = polygon_integral(&f, &doubled, decay)?;
    let y2 = y * y;
    let rhs = meijer_contour(a, j, y2, spec, &ContourSpec::for_order(a, y2, spec))?.value
        * (-(-2f64).powi(-(a as i32)));
    Ok(CheckResult {
        residual: (lhs.value - rhs).norm(),
        reference: rhs.norm(),
    })
}

fn derivative_sides(a: u32, j: u32, y: f64, spec: &CuspFormSpec, eta: f64) -> Result<(f64, f64, f64)> {
    if !(y > eta) || !(eta > 0.0) {
        return Err(Error::RangeViolation(format!("need 0 < eta < y; got eta={eta}, y={y}")));
    }
    let g = |t: f64| -> Result<f64> {
        Ok(t.powi(a as i32 + 1) * meijer(a + 1, j, t * t, spec)?.value.re)
    };
    let central = |h: f64| -> Result<f64> { Ok((g(y + h)? - g(y - h)?) / (2.0 * h)) };
    let rhs = -2.0 * y.powi(a as i32) * meijer(a, j, y * y, spec)?.value.re;
    Ok((central(eta)?, central(eta / 2.0)?, rhs))
}

/// Compares d/dY (Y^{a+1} J_{a+1,j}(Y^2)) against -2 Y^a J_{a,j}(Y^2), the
/// derivative taken by Richardson-extrapolated central differences at steps
/// eta and eta/2.
pub fn check_derivative_relation(a: u32, j: u32, y: f64, spec: &CuspFormSpec, eta: f64) -> Result<CheckResult> {
    let (d1, d2, rhs) = derivative_sides(a, j, y, spec, eta)?;
    let lhs = (4.0 * d2 - d1) / 3.0;
    Ok(CheckResult {
        residual: (lhs - rhs).abs(),
        reference: rhs.abs(),
    })
}

/// The same comparison with a single central difference at step eta.
pub fn check_derivative_relation_central(a: u32, j: u32, y: f64, spec: &CuspFormSpec, eta: f64) -> Result<CheckResult> {
    let (d1, _, rhs) = derivative_sides(a, j, y, spec, eta)?;
    Ok(CheckResult {
        residual: (d1 - rhs).abs(),
        reference: rhs.abs(),
    })
}
