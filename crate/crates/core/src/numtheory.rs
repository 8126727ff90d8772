//! Modular arithmetic, arithmetic-function tables and Kloosterman sums.

use crate::error::{Error, Result};
use crate::sum::{ComplexSum, NeumaierSum};
use num_complex::Complex64;
use std::f64::consts::PI;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i(a: i64, b: i64) -> u64 {
    gcd(a.unsigned_abs(), b.unsigned_abs())
}

/// Least non-negative residue of `a` modulo `k`.
pub fn reduce(a: i64, k: u64) -> u64 {
    (a as i128).rem_euclid(k as i128) as u64
}

/// Inverse of `a` modulo `k` as a residue in `[0, k)`.
///
/// Modulo 1 every integer is invertible and the unique residue is 0.
pub fn mod_inverse(a: i64, k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::NonInvertible { a, k });
    }
    if k == 1 {
        return Ok(0);
    }
    let (mut r0, mut r1) = (k as i128, reduce(a, k) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return Err(Error::NonInvertible { a, k });
    }
    Ok(t0.rem_euclid(k as i128) as u64)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn primes_up_to(n: usize) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            out.push(p as u64);
            let mut q = p * p;
            while q <= n {
                composite[q] = true;
                q += p;
            }
        }
    }
    out
}

/// Positive divisors of `n` in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Prime factorisation as (prime, exponent) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn totient(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn divisor_count(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Reduced residues modulo `k`; modulo 1 this is `{0}`.
pub fn units(k: u64) -> Vec<u64> {
    if k == 1 {
        return vec![0];
    }
    (1..k).filter(|&x| gcd(x, k) == 1).collect()
}

/// e(r/k) = exp(2 pi i r / k) with `r` reduced exactly modulo `k` first.
pub fn e_frac(r: i64, k: u64) -> Complex64 {
    let r = reduce(r, k);
    let (s, c) = (2.0 * PI * r as f64 / k as f64).sin_cos();
    Complex64::new(c, s)
}

/// A reduced fraction h/k with the inverse of h modulo k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Twist {
    pub h: u64,
    pub k: u64,
    pub h_bar: u64,
}

impl Twist {
    pub fn new(h: i64, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonInvertible { a: h, k });
        }
        let h_bar = mod_inverse(h, k)?;
        Ok(Twist {
            h: reduce(h, k),
            k,
            h_bar,
        })
    }

    /// All twists h/k with h running over the reduced residues.
    pub fn all(k: u64) -> Vec<Twist> {
        units(k)
            .into_iter()
            .map(|h| Twist::new(h as i64, k).expect("unit"))
            .collect()
    }
}

/// Sieved tables of d(n), mu(n), phi(n) and d_3(n) for n <= n_max.
#[derive(Clone, Debug)]
pub struct ArithTables {
    pub n_max: usize,
    pub divisor_count: Vec<u64>,
    pub mobius: Vec<i8>,
    pub totient: Vec<u64>,
    pub d3: Vec<u64>,
}

impl ArithTables {
    pub fn new(n_max: usize) -> Self {
        let n = n_max.max(1);
        let mut dc = vec![0u64; n + 1];
        for d in 1..=n {
            let mut m = d;
            while m <= n {
                dc[m] += 1;
                m += d;
            }
        }
        let mut d3 = vec![0u64; n + 1];
        for d in 1..=n {
            let mut m = d;
            while m <= n {
                d3[m] += dc[d];
                m += d;
            }
        }
        let mut mu = vec![1i8; n + 1];
        let mut phi: Vec<u64> = (0..=n as u64).collect();
        let mut composite = vec![false; n + 1];
        mu[0] = 0;
        for p in 2..=n {
            if composite[p] {
                continue;
            }
            let mut m = p;
            while m <= n {
                if m > p {
                    composite[m] = true;
                }
                mu[m] = -mu[m];
                phi[m] = phi[m] / p as u64 * (p as u64 - 1);
                m += p;
            }
            let pp = p.saturating_mul(p);
            let mut m = pp;
            while m <= n {
                mu[m] = 0;
                m += pp;
            }
        }
        ArithTables {
            n_max: n,
            divisor_count: dc,
            mobius: mu,
            totient: phi,
            d3,
        }
    }
}

/// Unit/inverse pairs modulo `c`, computed once and reused for every
/// Kloosterman sum with that modulus.
#[derive(Clone, Debug)]
pub struct KloostermanModulus {
    pub c: u64,
    pairs: Vec<(u64, u64)>,
}

impl KloostermanModulus {
    pub fn new(c: u64) -> Self {
        assert!(c >= 1, "modulus must be positive");
        let pairs = units(c)
            .into_iter()
            .map(|x| (x, mod_inverse(x as i64, c).expect("unit")))
            .collect();
        KloostermanModulus { c, pairs }
    }

    pub fn phi(&self) -> usize {
        self.pairs.len()
    }

    /// S(a, b; c) as a real number.
    pub fn sum(&self, a: i64, b: i64) -> Result<f64> {
        let c = self.c;
        let (ar, br) = (reduce(a, c) as u128, reduce(b, c) as u128);
        let mut acc = ComplexSum::new();
        for &(x, xb) in &self.pairs {
            let r = (ar * x as u128 + br * xb as u128) % c as u128;
            acc.add(e_frac(r as i64, c));
        }
        let z = acc.sum();
        if z.im.abs() > 1e-9 * self.pairs.len() as f64 {
            return Err(Error::ImaginaryResidue {
                a,
                b,
                c,
                residue: z.im,
            });
        }
        Ok(z.re)
    }

    /// S(a, m; c) for m = 0..c-1, i.e. one full period in the second slot.
    pub fn period(&self, a: i64) -> Result<Vec<f64>> {
        (0..self.c as i64).map(|m| self.sum(a, m)).collect()
    }
}

/// The Kloosterman sum S(a, b; c).
pub fn kloosterman(a: i64, b: i64, c: u64) -> Result<f64> {
    KloostermanModulus::new(c).sum(a, b)
}

/// Discrete Fourier transform of l -> S(h, l; k), indexed by xi = 1..=k.
///
/// The transform is complex in general: it equals e(h xi_bar / k) on units
/// xi and vanishes elsewhere.
pub fn kloosterman_dft(h: i64, k: u64) -> Result<Vec<Complex64>> {
    mod_inverse(h, k)?;
    let km = KloostermanModulus::new(k);
    let s: Vec<f64> = (1..=k as i64).map(|l| km.sum(h, l)).collect::<Result<_>>()?;
    let out = (1..=k as i64)
        .map(|xi| {
            let mut acc = ComplexSum::new();
            for (idx, &sl) in s.iter().enumerate() {
                let l = idx as i64 + 1;
                acc.add(e_frac(-l * xi, k) * sl);
            }
            acc.sum() / k as f64
        })
        .collect();
    Ok(out)
}

/// Reconstruct S(h, m; k) from its transform.
pub fn kloosterman_inverse_dft(hat: &[Complex64], m: i64) -> Complex64 {
    let k = hat.len() as u64;
    let mut acc = ComplexSum::new();
    for (idx, &v) in hat.iter().enumerate() {
        acc.add(v * e_frac(m * (idx as i64 + 1), k));
    }
    acc.sum()
}

fn require_prime(k: u64) -> Result<()> {
    if is_prime(k) {
        Ok(())
    } else {
        Err(Error::NotPrime(k))
    }
}

/// Sum of S(a, m; k) over units a, by the closed form for prime k.
pub fn kloosterman_first_moment(m: i64, k: u64) -> Result<i64> {
    require_prime(k)?;
    Ok(if reduce(m, k) != 0 { 1 } else { 1 - k as i64 })
}

/// Sum of S(a, m; k) S(a, n; k) over units a, by the closed form for prime k.
pub fn kloosterman_correlation(m: i64, n: i64, k: u64) -> Result<i64> {
    require_prime(k)?;
    let k = k as i64;
    let (mz, nz) = (m.rem_euclid(k) == 0, n.rem_euclid(k) == 0);
    let same = (m - n).rem_euclid(k) == 0;
    Ok(match (mz, nz) {
        (true, true) => k - 1,
        (false, false) if same => k * k - k - 1,
        (false, false) => -k - 1,
        _ => -1,
    })
}

/// Brute-force first moment, rounded to the nearest integer, with the
/// unrounded residual.
pub fn kloosterman_first_moment_brute(m: i64, k: u64) -> Result<(i64, f64)> {
    require_prime(k)?;
    let km = KloostermanModulus::new(k);
    let mut acc = NeumaierSum::new();
    for a in units(k) {
        acc.add(km.sum(a as i64, m)?);
    }
    let v = acc.sum();
    Ok((v.round() as i64, (v - v.round()).abs()))
}

/// Brute-force correlation, rounded to the nearest integer, with the
/// unrounded residual.
pub fn kloosterman_correlation_brute(m: i64, n: i64, k: u64) -> Result<(i64, f64)> {
    require_prime(k)?;
    let km = KloostermanModulus::new(k);
    let mut acc = NeumaierSum::new();
    for a in units(k) {
        acc.add(km.sum(a as i64, m)? * km.sum(a as i64, n)?);
    }
    let v = acc.sum();
    Ok((v.round() as i64, (v - v.round()).abs()))
}

/// Right-hand side of the Weil bound d(c) c^{1/2} gcd(a, b, c)^{1/2}.
pub fn weil_bound(a: i64, b: i64, c: u64) -> f64 {
    let g = gcd(gcd_i(a, b), c).max(1);
    divisor_count(c) as f64 * (c as f64).sqrt() * (g as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(1, 1), Ok(0));
        assert_eq!(mod_inverse(3, 7), Ok(5));
        assert_eq!(
            mod_inverse(2, 4),
            Err(Error::NonInvertible { a: 2, k: 4 })
        );
        assert_eq!(mod_inverse(-3, 7), Ok(2));
    }

    #[test]
    fn small_kloosterman_values() {
        assert_eq!(kloosterman(1, 1, 1).unwrap(), 1.0);
        assert!((kloosterman(1, 1, 3).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn divisor_lists() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
    }
}
