//! Complex log-gamma and digamma.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

// B_{2n} / (2n (2n-1))
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2n} / (2n)
const DIGAMMA: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_8;
const STIRLING_MIN: f64 = 10.0;

pub fn is_nonpositive_integer(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

fn stirling(z: Complex64) -> Complex64 {
    let zi = z.inv();
    let zi2 = zi * zi;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = zi;
    for c in STIRLING {
        series += pow * c;
        pow *= zi2;
    }
    (z - 0.5) * z.ln() - z + LN_2PI_HALF + series
}

fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_2PI_HALF + (z + 0.5) * t.ln() - t + x.ln()
}

/// log sin(w) without overflow for large |Im w|, up to multiples of 2 pi i.
fn ln_sin(w: Complex64) -> Complex64 {
    let i = Complex64::i();
    if w.im > 1.0 {
        let q = (2.0 * i * w).exp();
        -i * w + (1.0 - q).ln() + Complex64::new(0.5, 0.0).ln() + i * (PI / 2.0)
    } else if w.im < -1.0 {
        let q = (-2.0 * i * w).exp();
        i * w + (1.0 - q).ln() + Complex64::new(0.5, 0.0).ln() - i * (PI / 2.0)
    } else {
        w.sin().ln()
    }
}

fn ln_gamma_right(z: Complex64) -> Complex64 {
    if z.norm() >= STIRLING_MIN {
        stirling(z)
    } else {
        lanczos(z)
    }
}

/// log Gamma(z). On Re z >= 1/2 this is the branch continuous from the
/// positive reals; elsewhere it is correct modulo 2 pi i.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if is_nonpositive_integer(z) {
        return Err(Error::Pole(format!("Gamma at {}", z.re)));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z))
    } else {
        let w = PI * z;
        Ok(PI.ln() - ln_sin(w) - ln_gamma_right(1.0 - z))
    }
}

/// pi cot(pi z), stable for large |Im z|.
fn pi_cot_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let w = PI * z;
    if w.im > 0.0 {
        let q = (2.0 * i * w).exp();
        -i * PI * (1.0 + q) / (1.0 - q)
    } else {
        let q = (-2.0 * i * w).exp();
        i * PI * (1.0 + q) / (1.0 - q)
    }
}

pub fn digamma(z: Complex64) -> Result<Complex64> {
    if is_nonpositive_integer(z) {
        return Err(Error::Pole(format!("digamma at {}", z.re)));
    }
    if z.re < 0.5 {
        return Ok(digamma(1.0 - z)? - pi_cot_pi(z));
    }
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.norm() < STIRLING_MIN {
        shift += z.inv();
        z += 1.0;
    }
    let zi = z.inv();
    let zi2 = zi * zi;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = zi2;
    for c in DIGAMMA {
        series += pow * c;
        pow *= zi2;
    }
    Ok(z.ln() - 0.5 * zi - series - shift)
}
