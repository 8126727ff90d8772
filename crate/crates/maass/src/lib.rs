//! Hecke eigenvalues of odd Maass cusp forms on SL(2,Z), computed with
//! Hejhal's collocation method.
//!
//! The form is f(z) = sum_n c(n) sqrt(y) K~(2 pi n y) sin(2 pi n x) with
//! c(1) = 1, where K~(x) = e^{pi r / 2} K_{ir}(x).

use gl3lab::numtheory::gcd;
use gl3lab::special::log_gamma;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// e^{pi r/2} K_{ir}(x) for x > 0.
#[derive(Clone, Debug)]
pub struct KBessel {
    pub r: f64,
    inv_gamma: Complex64,
    switch: f64,
}

impl KBessel {
    pub fn new(r: f64) -> Self {
        let lg = log_gamma(Complex64::new(1.0, r)).expect("Gamma(1 + ir) has no pole");
        KBessel {
            r,
            inv_gamma: (-lg).exp(),
            switch: PI * r / 4.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!(x > 0.0, "K-Bessel argument must be positive");
        if x < self.switch {
            self.series(x)
        } else {
            self.integral(x)
        }
    }

    /// -pi e^{pi r/2} Im I_{ir}(x) / sinh(pi r) from the power series of I.
    fn series(&self, x: f64) -> f64 {
        let r = self.r;
        let q = x * x / 4.0;
        let mut term = self.inv_gamma;
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * Complex64::new(k, r));
            sum += term;
            if k > x && term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        let lead = Complex64::from_polar(1.0, r * (x / 2.0).ln());
        let im = (lead * sum).im;
        -2.0 * PI * im * (-PI * r / 2.0).exp() / (1.0 - (-2.0 * PI * r).exp())
    }

    /// e^{pi r/2} int_0^inf e^{-x cosh t} cos(rt) dt by the trapezoid rule,
    /// which converges geometrically for this entire integrand.
    fn integral(&self, x: f64) -> f64 {
        let h = 0.05;
        let t_max = (1.0 + 60.0 / x).acosh();
        let shift = PI * self.r / 2.0 - x;
        let n = (t_max / h).ceil() as usize;
        let mut sum = 0.5 * shift.exp();
        for i in 1..=n {
            let t = i as f64 * h;
            sum += (shift - x * (t.cosh() - 1.0)).exp() * (self.r * t).cos();
        }
        sum * h
    }
}

/// The SL(2,Z) matrix (a, b, c, d) moving x + iy to y >= sqrt(3)/2 approximately.
pub fn reduction_matrix(mut x: f64, mut y: f64) -> [i64; 4] {
    let mut g = [1i64, 0, 0, 1];
    for _ in 0..10_000 {
        let n = x.round();
        x -= n;
        let n = n as i64;
        g = [g[0] - n * g[2], g[1] - n * g[3], g[2], g[3]];
        let norm = x * x + y * y;
        if norm >= 1.0 - 1e-12 {
            break;
        }
        x = -x / norm;
        y /= norm;
        g = [-g[2], -g[3], g[0], g[1]];
    }
    g
}

/// gamma z for z = p/den + iy, with the entries of gamma times den kept as exact integers.
pub fn apply_exact(g: [i64; 4], p: i64, den: i64, y: f64) -> (f64, f64) {
    let [a, b, c, d] = g.map(|v| v as i128);
    let (p, den) = (p as i128, den as i128);
    let num_a = a * p + b * den;
    let num_c = c * p + d * den;
    let denf = den as f64;
    let cz_re = num_c as f64 / denf;
    let norm = cz_re * cz_re + (c as f64 * y).powi(2);
    let re = ((num_a * num_c) as f64 / (denf * denf) + (a * c) as f64 * y * y) / norm;
    (re, y / norm)
}

/// Pullback of p/den + iy into the fundamental domain.
pub fn pullback(p: i64, den: i64, y: f64) -> (f64, f64) {
    let g = reduction_matrix(p as f64 / den as f64, y);
    apply_exact(g, p, den, y)
}

/// f(x + iy) from the first coefficients, for y large enough that they suffice.
pub fn eval_form(kb: &KBessel, coeffs: &[f64], x: f64, y: f64) -> f64 {
    let sy = y.sqrt();
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, c)| c * sy * kb.eval(2.0 * PI * l as f64 * y) * (2.0 * PI * l as f64 * x).sin())
        .sum()
}

/// c(1..=m0) from the collocation system on the horocycle at height y
/// with q points in (0, 1/2), normalised by c(1) = 1.
pub fn solve_collocation(kb: &KBessel, m0: usize, q: usize, y: f64) -> Vec<f64> {
    assert!(m0 >= 2 && q > m0, "need q > m0 >= 2");
    let den = 4 * q as i64;
    let points: Vec<(f64, f64, f64)> = (1..=q as i64)
        .map(|m| {
            let p = 2 * m - 1;
            let (xs, ys) = pullback(p, den, y);
            (p as f64 / den as f64, xs, ys)
        })
        .collect();
    let mut v = DMatrix::<f64>::zeros(m0, m0);
    for &(x, xs, ys) in &points {
        let basis: Vec<f64> = (1..=m0)
            .map(|l| ys.sqrt() * kb.eval(2.0 * PI * l as f64 * ys) * (2.0 * PI * l as f64 * xs).sin())
            .collect();
        for n in 1..=m0 {
            let s = (2.0 * PI * n as f64 * x).sin() * 2.0 / q as f64;
            for l in 1..=m0 {
                v[(n - 1, l - 1)] += s * basis[l - 1];
            }
        }
    }
    let mut w = -v;
    for n in 1..=m0 {
        w[(n - 1, n - 1)] += y.sqrt() * kb.eval(2.0 * PI * n as f64 * y);
    }
    let a = w.view((1, 1), (m0 - 1, m0 - 1)).into_owned();
    let rhs: DVector<f64> = -w.view((1, 0), (m0 - 1, 1)).column(0).into_owned();
    let sol = a.lu().solve(&rhs).expect("collocation matrix is singular");
    let mut out = vec![0.0; m0 + 1];
    out[1] = 1.0;
    for l in 2..=m0 {
        out[l] = sol[l - 2];
    }
    out
}

/// sum_n c(n) sqrt(y) K~(2 pi n y) sin(2 pi n x) sampled at x = (2m+1)/(2P)
/// and transformed back: entry n is the sine coefficient c(n) sqrt(y) K~(2 pi n y).
pub fn horocycle_coefficients(kb: &KBessel, coeffs: &[f64], log2_points: u32, y: f64) -> Vec<f64> {
    let n_pts = 1usize << log2_points;
    let den = 2 * n_pts as i64;
    let half: Vec<f64> = (0..n_pts / 2)
        .into_par_iter()
        .map(|m| {
            let (xs, ys) = pullback(2 * m as i64 + 1, den, y);
            eval_form(kb, coeffs, xs, ys)
        })
        .collect();
    let mut buf: Vec<Complex64> = Vec::with_capacity(n_pts);
    buf.extend(half.iter().map(|&v| Complex64::new(v, 0.0)));
    buf.extend(half.iter().rev().map(|&v| Complex64::new(-v, 0.0)));
    FftPlanner::new().plan_fft_forward(n_pts).process(&mut buf);
    buf.iter()
        .take(n_pts / 2)
        .enumerate()
        .map(|(n, z)| {
            let shift = Complex64::from_polar(1.0, -PI * n as f64 / n_pts as f64);
            -(shift * z).im * 2.0 / n_pts as f64
        })
        .collect()
}

/// Settings for the two-height horocycle pass.
#[derive(Clone, Copy, Debug)]
pub struct HorocyclePlan {
    pub n_max: usize,
    pub log2_points: u32,
    /// Height such that 2 pi n_max y equals this multiple of r.
    pub turning_fraction: f64,
    pub second_height_ratio: f64,
}

impl HorocyclePlan {
    pub fn for_range(n_max: usize) -> Self {
        let mut log2_points = 10;
        while (1usize << log2_points) < 10 * n_max {
            log2_points += 1;
        }
        HorocyclePlan {
            n_max,
            log2_points,
            turning_fraction: 0.9,
            second_height_ratio: 0.93,
        }
    }
}

/// c(n) for n <= n_max, each read from whichever of two horocycles has the
/// larger K-Bessel factor at n.
pub fn coefficients(kb: &KBessel, seed: &[f64], plan: &HorocyclePlan) -> Vec<f64> {
    let y1 = plan.turning_fraction * kb.r / (2.0 * PI * plan.n_max as f64);
    let y2 = y1 * plan.second_height_ratio;
    let b1 = horocycle_coefficients(kb, seed, plan.log2_points, y1);
    let b2 = horocycle_coefficients(kb, seed, plan.log2_points, y2);
    let mut out = vec![0.0; plan.n_max + 1];
    for n in 1..=plan.n_max {
        let k1 = y1.sqrt() * kb.eval(2.0 * PI * n as f64 * y1);
        let k2 = y2.sqrt() * kb.eval(2.0 * PI * n as f64 * y2);
        out[n] = if k1.abs() >= k2.abs() { b1[n] / k1 } else { b2[n] / k2 };
    }
    out
}

/// Largest violation of c(p^2) = c(p)^2 - 1 and c(mn) = c(m) c(n) over small arguments.
pub fn hecke_defect(c: &[f64], limit: usize) -> f64 {
    let n = c.len() - 1;
    let mut worst = 0.0f64;
    for p in [2usize, 3, 5, 7, 11, 13] {
        if p * p <= n.min(limit * limit) {
            worst = worst.max((c[p * p] - (c[p] * c[p] - 1.0)).abs());
        }
    }
    for m in 2..=limit {
        for k in 2..=limit {
            if m * k <= n && gcd(m as u64, k as u64) == 1 {
                worst = worst.max((c[m * k] - c[m] * c[k]).abs());
            }
        }
    }
    worst
}
