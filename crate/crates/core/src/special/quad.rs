//! Adaptive Gauss-Legendre quadrature of complex integrands along paths.

use crate::error::Result;
use num_complex::Complex64;
use std::sync::OnceLock;

const ORDER: usize = 10;

/// Nodes and weights of the ORDER-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// A parametrised path piece s(u), u in [u0, u1], with derivative s'(u).
pub trait PathPiece {
    fn point(&self, u: f64) -> (Complex64, Complex64);
    fn range(&self) -> (f64, f64);
}

/// Straight segment from p0 to p1, u in [0, 1].
pub struct Line {
    pub p0: Complex64,
    pub p1: Complex64,
}

impl PathPiece for Line {
    fn point(&self, u: f64) -> (Complex64, Complex64) {
        (self.p0 + (self.p1 - self.p0) * u, self.p1 - self.p0)
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Ray start + dir * len0 * (e^u - 1), u in [0, u_max]; turns power-law
/// decay along the ray into exponential decay in u.
pub struct GeometricRay {
    pub start: Complex64,
    pub dir: Complex64,
    pub len0: f64,
    pub u_max: f64,
}

impl PathPiece for GeometricRay {
    fn point(&self, u: f64) -> (Complex64, Complex64) {
        let e = u.exp();
        (
            self.start + self.dir * (self.len0 * (e - 1.0)),
            self.dir * (self.len0 * e),
        )
    }
    fn range(&self) -> (f64, f64) {
        (0.0, self.u_max)
    }
}

/// The same piece traversed in the opposite direction.
pub struct Reversed<P>(pub P);

impl<P: PathPiece> PathPiece for Reversed<P> {
    fn point(&self, u: f64) -> (Complex64, Complex64) {
        let (u0, u1) = self.0.range();
        let (s, ds) = self.0.point(u0 + u1 - u);
        (s, -ds)
    }
    fn range(&self) -> (f64, f64) {
        self.0.range()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    /// Integral of |f| |ds|, the scale against which cancellation is judged.
    pub l1: f64,
    pub evals: usize,
}

fn panel<F>(f: &F, piece: &dyn PathPiece, a: f64, b: f64, evals: &mut usize) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let (s, ds) = piece.point(mid + half * xi);
        let v = f(s)? * ds;
        acc += v * (wi * half);
        l1 += v.norm() * wi * half;
    }
    *evals += x.len();
    Ok((acc, l1))
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &F,
    piece: &dyn PathPiece,
    a: f64,
    b: f64,
    whole: (Complex64, f64),
    tol_density: f64,
    depth: u32,
    out: &mut QuadResult,
) -> Result<()>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let m = 0.5 * (a + b);
    let left = panel(f, piece, a, m, &mut out.evals)?;
    let right = panel(f, piece, m, b, &mut out.evals)?;
    let sum = left.0 + right.0;
    let diff = (sum - whole.0).norm();
    // Rounding in the integrand puts a floor under the attainable agreement.
    let floor = 1e-12 * (left.1 + right.1);
    if diff <= (tol_density * (b - a)).max(floor) || depth == 0 {
        out.value += sum;
        out.error += diff;
        out.l1 += left.1 + right.1;
        return Ok(());
    }
    adapt(f, piece, a, m, left, tol_density, depth - 1, out)?;
    adapt(f, piece, m, b, right, tol_density, depth - 1, out)
}

/// Integrate f along each piece, each first split into its given number of
/// panels and then bisected adaptively.
///
/// The absolute tolerance is `rtol` times the L1 norm of a first pass, so
/// the reported error is relative to the cancellation scale rather than to
/// the (possibly tiny) value.
pub fn integrate_path<F>(f: &F, pieces: &[(&dyn PathPiece, usize)], rtol: f64) -> Result<QuadResult>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut coarse = Vec::new();
    let mut scale = 0.0;
    let mut evals = 0;
    for &(piece, n) in pieces {
        let (u0, u1) = piece.range();
        let n = n.max(1);
        let mut panels = Vec::with_capacity(n);
        for i in 0..n {
            let a = u0 + (u1 - u0) * i as f64 / n as f64;
            let b = u0 + (u1 - u0) * (i + 1) as f64 / n as f64;
            let p = panel(f, piece, a, b, &mut evals)?;
            scale += p.1;
            panels.push((a, b, p));
        }
        coarse.push(panels);
    }
    let mut out = QuadResult {
        evals,
        ..Default::default()
    };
    let total_len: f64 = pieces
        .iter()
        .map(|(p, _)| {
            let (a, b) = p.range();
            b - a
        })
        .sum();
    let tol_density = rtol * scale.max(f64::MIN_POSITIVE) / total_len;
    for (&(piece, _), panels) in pieces.iter().zip(coarse) {
        for (a, b, p) in panels {
            adapt(f, piece, a, b, p, tol_density, 24, &mut out)?;
        }
    }
    Ok(out)
}
