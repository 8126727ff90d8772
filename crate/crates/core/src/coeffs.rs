//! Fourier coefficients A(m, n): Hecke recursion from prime seeds, the
//! symmetric-square source, the d_3 sieve, synthetic tables and caching.

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::numtheory::{gcd, is_prime, mobius, primes_up_to};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Proved Ramanujan exponent, kept for bound checks.
pub const THETA_PROVED: f64 = 5.0 / 14.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Sym2Maass,
    D3,
    Synthetic,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Sym2Maass => "sym2_maass",
            SourceKind::D3 => "d3",
            SourceKind::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sym2_maass" => Some(SourceKind::Sym2Maass),
            "d3" => Some(SourceKind::D3),
            "synthetic" => Some(SourceKind::Synthetic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CuspFormSpec {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub theta: f64,
    pub label: String,
    pub source_kind: SourceKind,
}

impl CuspFormSpec {
    pub fn new(
        params: [Complex64; 3],
        theta: f64,
        label: impl Into<String>,
        source_kind: SourceKind,
    ) -> Result<Self> {
        let spec = CuspFormSpec {
            alpha: params[0],
            beta: params[1],
            gamma: params[2],
            theta,
            label: label.into(),
            source_kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric-square lift of a GL(2) form with spectral parameter r.
    pub fn sym2(r: f64) -> Self {
        let a = Complex64::new(0.0, 2.0 * r);
        CuspFormSpec {
            alpha: a,
            beta: Complex64::new(0.0, 0.0),
            gamma: -a,
            theta: 0.0,
            label: format!("sym2-maass-r{r}"),
            source_kind: SourceKind::Sym2Maass,
        }
    }

    /// All three Langlands parameters zero.
    pub fn trivial(label: impl Into<String>, source_kind: SourceKind) -> Self {
        let z = Complex64::new(0.0, 0.0);
        CuspFormSpec {
            alpha: z,
            beta: z,
            gamma: z,
            theta: 0.0,
            label: label.into(),
            source_kind,
        }
    }

    pub fn params(&self) -> [Complex64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.alpha + self.beta + self.gamma;
        if s.norm() > 1e-12 {
            return Err(Error::DegenerateInput(format!(
                "Langlands parameters sum to {s}, not 0"
            )));
        }
        if self.params().iter().any(|p| p.re.abs() > 0.5) {
            return Err(Error::DegenerateInput(
                "a Langlands parameter has |Re| > 1/2".into(),
            ));
        }
        if !(0.0..=THETA_PROVED).contains(&self.theta) {
            return Err(Error::DegenerateInput(format!(
                "theta = {} outside [0, 5/14]",
                self.theta
            )));
        }
        Ok(())
    }

    /// Largest |Im| among the halved parameters.
    pub fn max_half_imag(&self) -> f64 {
        self.params()
            .iter()
            .map(|p| (p.im / 2.0).abs())
            .fold(0.0, f64::max)
    }

    /// True if the parameter multiset is closed under conjugation, which
    /// makes every Gamma quotient real on the real axis.
    pub fn is_conjugation_closed(&self) -> bool {
        let p = self.params();
        let mut used = [false; 3];
        for z in p {
            let c = z.conj();
            match (0..3).find(|&i| !used[i] && (p[i] - c).norm() < 1e-13) {
                Some(i) => used[i] = true,
                None => return false,
            }
        }
        true
    }
}

/// A(m, 1) and A(1, m) for 1 <= m <= m_max. Index 0 is unused.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    pub m_max: usize,
    pub a_m1: Vec<Complex64>,
    pub a_1m: Vec<Complex64>,
    pub spec: CuspFormSpec,
}

/// Smallest-prime-factor sieve.
fn spf_sieve(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Coefficients of (1 - a t + b t^2 - t^3)^{-1} up to t^n.
pub fn euler_series(a: Complex64, b: Complex64, n: usize) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut c = vec![zero; n + 1];
    c[0] = one;
    for e in 1..=n {
        let mut v = a * c[e - 1];
        if e >= 2 {
            v -= b * c[e - 2];
        }
        if e >= 3 {
            v += c[e - 3];
        }
        c[e] = v;
    }
    c
}

/// Extend prime seeds (A(p,1), A(1,p)) to A(m,1), A(1,m) for m <= m_max.
pub fn hecke_extend(
    seeds: &BTreeMap<u64, (Complex64, Complex64)>,
    m_max: usize,
    spec: CuspFormSpec,
) -> Result<CoefficientTable> {
    let n = m_max.max(1);
    for p in primes_up_to(n) {
        if !seeds.contains_key(&p) {
            return Err(Error::MissingSeed(p));
        }
    }
    let spf = spf_sieve(n);
    let zero = Complex64::new(0.0, 0.0);
    let mut a_m1 = vec![zero; n + 1];
    let mut a_1m = vec![zero; n + 1];
    a_m1[1] = Complex64::new(1.0, 0.0);
    a_1m[1] = Complex64::new(1.0, 0.0);
    for m in 2..=n {
        let p = spf[m] as usize;
        let mut pe = p;
        let mut e = 1;
        while (m / pe) % p == 0 {
            pe *= p;
            e += 1;
        }
        if pe == m {
            let (a, b) = seeds[&(p as u64)];
            a_m1[m] = euler_series(a, b, e)[e];
            a_1m[m] = euler_series(b, a, e)[e];
        } else {
            let rest = m / pe;
            a_m1[m] = a_m1[pe] * a_m1[rest];
            a_1m[m] = a_1m[pe] * a_1m[rest];
        }
    }
    Ok(CoefficientTable {
        m_max: n,
        a_m1,
        a_1m,
        spec,
    })
}

impl CoefficientTable {
    fn check(&self, idx: u64) -> Result<usize> {
        if idx == 0 || idx as usize > self.m_max {
            Err(Error::OutOfRange {
                index: idx,
                max: self.m_max as u64,
            })
        } else {
            Ok(idx as usize)
        }
    }

    /// A(m, d) via the sum over l | (d, m) of mu(l) A(1, d/l) A(m/l, 1).
    pub fn coefficient(&self, m: u64, d: u64) -> Result<Complex64> {
        let mi = self.check(m)?;
        let di = self.check(d)?;
        if d == 1 {
            return Ok(self.a_m1[mi]);
        }
        if m == 1 {
            return Ok(self.a_1m[di]);
        }
        if self.spec.source_kind == SourceKind::D3 {
            return Err(Error::UnsupportedSource(
                "d3 tables do not define A(m,d) for m, d > 1".into(),
            ));
        }
        let g = gcd(m, d);
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 1..=g {
            if g % l != 0 {
                continue;
            }
            let mu = mobius(l);
            if mu == 0 {
                continue;
            }
            let term = self.a_1m[(d / l) as usize] * self.a_m1[(m / l) as usize];
            acc += term * mu as f64;
        }
        Ok(acc)
    }

    /// A(d, m) for m = 1..=m_max (index 0 is zero).
    pub fn dual_row(&self, d: u64, m_max: usize) -> Result<Vec<Complex64>> {
        self.check(m_max as u64)?;
        let mut row = vec![Complex64::new(0.0, 0.0); m_max + 1];
        for m in 1..=m_max {
            row[m] = self.coefficient(d, m as u64)?;
        }
        Ok(row)
    }

    /// A copy restricted to m <= m_max.
    pub fn truncated(&self, m_max: usize) -> Result<CoefficientTable> {
        self.check(m_max as u64)?;
        Ok(CoefficientTable {
            m_max,
            a_m1: self.a_m1[..=m_max].to_vec(),
            a_1m: self.a_1m[..=m_max].to_vec(),
            spec: self.spec.clone(),
        })
    }

    /// A table with A(1,1) = 1 and every other coefficient zero.
    pub fn unit(m_max: usize) -> CoefficientTable {
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![zero; m_max + 1];
        a[1] = Complex64::new(1.0, 0.0);
        CoefficientTable {
            m_max,
            a_m1: a.clone(),
            a_1m: a,
            spec: CuspFormSpec::trivial("unit", SourceKind::Synthetic),
        }
    }

    /// A table with every coefficient equal to `value` (A(1,1) = value too).
    pub fn constant(m_max: usize, value: f64) -> CoefficientTable {
        let mut a = vec![Complex64::new(value, 0.0); m_max + 1];
        a[0] = Complex64::new(0.0, 0.0);
        CoefficientTable {
            m_max,
            a_m1: a.clone(),
            a_1m: a,
            spec: CuspFormSpec::trivial("constant", SourceKind::Synthetic),
        }
    }

    pub fn zero(m_max: usize) -> CoefficientTable {
        let mut t = CoefficientTable::constant(m_max, 0.0);
        t.spec.label = "zero".into();
        t
    }
}

/// GL(2) Hecke eigenvalues read from the line-oriented text format.
#[derive(Clone, Debug, PartialEq)]
pub struct Gl2Eigenvalues {
    pub r: f64,
    pub lambda: BTreeMap<u64, f64>,
}

pub fn parse_gl2_eigenvalues(text: &str) -> Result<Gl2Eigenvalues> {
    let mut r = None;
    let mut lambda = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or("");
        let val = it.next().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected two fields, got `{line}`"),
        })?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("trailing fields in `{line}`"),
            });
        }
        let value: f64 = val.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad number `{val}`"),
        })?;
        if r.is_none() {
            if key != "r" {
                return Err(Error::MissingParameter("r"));
            }
            r = Some(value);
            continue;
        }
        let p: u64 = key.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad prime `{key}`"),
        })?;
        if !is_prime(p) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("{p} is not prime"),
            });
        }
        lambda.insert(p, value);
    }
    Ok(Gl2Eigenvalues {
        r: r.ok_or(Error::MissingParameter("r"))?,
        lambda,
    })
}

pub fn load_gl2_eigenvalues(path: &Path) -> Result<Gl2Eigenvalues> {
    let text = std::fs::read_to_string(path)?;
    parse_gl2_eigenvalues(&text)
}

impl Gl2Eigenvalues {
    /// Symmetric-square seeds A(p,1) = A(1,p) = lambda(p)^2 - 1.
    pub fn sym2_seeds(&self) -> BTreeMap<u64, (Complex64, Complex64)> {
        self.lambda
            .iter()
            .map(|(&p, &l)| {
                let a = Complex64::new(l * l - 1.0, 0.0);
                (p, (a, a))
            })
            .collect()
    }

    pub fn sym2_table(&self, m_max: usize) -> Result<CoefficientTable> {
        hecke_extend(&self.sym2_seeds(), m_max, CuspFormSpec::sym2(self.r))
    }
}

/// A(m,1) = d_3(m), the coefficients of zeta(s)^3.
pub fn d3_sieve(m_max: usize) -> CoefficientTable {
    let n = m_max.max(1);
    let mut d = vec![0u64; n + 1];
    for a in 1..=n {
        let mut m = a;
        while m <= n {
            d[m] += 1;
            m += a;
        }
    }
    let mut d3 = vec![0u64; n + 1];
    for a in 1..=n {
        let mut m = a;
        while m <= n {
            d3[m] += d[a];
            m += a;
        }
    }
    let a: Vec<Complex64> = d3.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    CoefficientTable {
        m_max: n,
        a_m1: a.clone(),
        a_1m: a,
        spec: CuspFormSpec::trivial("d3", SourceKind::D3),
    }
}

/// Hecke-consistent table from random Satake parameters on the unit
/// circle, so that |A(p,1)| <= 3.
pub fn synthetic_table(m_max: usize, seed: u64) -> CoefficientTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = BTreeMap::new();
    for p in primes_up_to(m_max.max(1)) {
        let t1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let t2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a = Complex64::from_polar(1.0, t1)
            + Complex64::from_polar(1.0, t2)
            + Complex64::from_polar(1.0, -t1 - t2);
        seeds.insert(p, (a, a.conj()));
    }
    let spec = CuspFormSpec::trivial(format!("synthetic-{seed}"), SourceKind::Synthetic);
    hecke_extend(&seeds, m_max, spec).expect("seeds cover all primes")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthReport {
    pub first_moment_slope: f64,
    pub second_moment_slope: f64,
}

/// Log-log slopes of the partial sums of |A(d,m)| and |A(d,m)|^2.
pub fn rankin_selberg_check(table: &CoefficientTable, d: u64) -> Result<GrowthReport> {
    if table.m_max < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            got: table.m_max,
        });
    }
    let row = table.dual_row(d, table.m_max)?;
    let xs: Vec<usize> = {
        let mut v = Vec::new();
        let steps = 16;
        let lo = (10.0f64).ln();
        let hi = (table.m_max as f64).ln();
        for i in 0..=steps {
            let x = (lo + (hi - lo) * i as f64 / steps as f64).exp().floor() as usize;
            if v.last() != Some(&x) {
                v.push(x);
            }
        }
        v
    };
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut next = 0;
    for (m, a) in row.iter().enumerate().skip(1) {
        s1 += a.norm();
        s2 += a.norm_sqr();
        while next < xs.len() && xs[next] == m {
            p1.push((m as f64, s1));
            p2.push((m as f64, s2));
            next += 1;
        }
    }
    Ok(GrowthReport {
        first_moment_slope: loglog_slope(&p1)?.0,
        second_moment_slope: loglog_slope(&p2)?.0,
    })
}

const CACHE_MAGIC: &str = "gl3lab-cache v1";

/// Serialise A(m,1) with a parameter line and a trailing SHA-256 line.
pub fn cache_to_string(table: &CoefficientTable) -> String {
    let mut body = String::new();
    let label = table.spec.label.replace(char::is_whitespace, "_");
    writeln!(body, "{CACHE_MAGIC} {label} {}", table.m_max).unwrap();
    let p = table.spec.params();
    writeln!(
        body,
        "# params {} {} {} {} {} {} {} {}",
        p[0].re,
        p[0].im,
        p[1].re,
        p[1].im,
        p[2].re,
        p[2].im,
        table.spec.theta,
        table.spec.source_kind.as_str()
    )
    .unwrap();
    for m in 1..=table.m_max {
        let a = table.a_m1[m];
        writeln!(body, "{m} {:?} {:?}", a.re, a.im).unwrap();
    }
    let digest = Sha256::digest(body.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    writeln!(body, "# sha256 {hex}").unwrap();
    body
}

pub fn cache_from_str(text: &str) -> Result<CoefficientTable> {
    let cut = text
        .rfind("# sha256 ")
        .ok_or_else(|| Error::Cache("missing checksum line".into()))?;
    let (body, trailer) = text.split_at(cut);
    let want = trailer.trim_start_matches("# sha256 ").trim();
    let digest = Sha256::digest(body.as_bytes());
    let got: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    if got != want {
        return Err(Error::Cache(format!("checksum mismatch: {got} != {want}")));
    }
    let mut lines = body.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Cache("empty cache".into()))?;
    let rest = header
        .strip_prefix(CACHE_MAGIC)
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "bad cache header".into(),
        })?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "expected `<label> <M>`".into(),
        });
    }
    let label = fields[0].to_string();
    let m_max: usize = fields[1].parse().map_err(|_| Error::Parse {
        line: 1,
        msg: "bad M".into(),
    })?;
    let mut spec = None;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; m_max + 1];
    let mut seen = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let bad = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        if let Some(p) = line.strip_prefix("# params ") {
            let f: Vec<&str> = p.split_whitespace().collect();
            if f.len() != 8 {
                return Err(bad("expected 8 parameter fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let params = [
                Complex64::new(num(f[0])?, num(f[1])?),
                Complex64::new(num(f[2])?, num(f[3])?),
                Complex64::new(num(f[4])?, num(f[5])?),
            ];
            let kind = SourceKind::parse(f[7]).ok_or_else(|| bad("bad source kind"))?;
            spec = Some(CuspFormSpec::new(params, num(f[6])?, label.clone(), kind)?);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad("expected `m re im`"));
        }
        let m: usize = f[0].parse().map_err(|_| bad("bad index"))?;
        if m == 0 || m > m_max {
            return Err(bad("index out of range"));
        }
        let re: f64 = f[1].parse().map_err(|_| bad("bad number"))?;
        let im: f64 = f[2].parse().map_err(|_| bad("bad number"))?;
        a[m] = Complex64::new(re, im);
        seen += 1;
    }
    if seen != m_max {
        return Err(Error::Cache(format!("expected {m_max} rows, found {seen}")));
    }
    let spec = spec.ok_or(Error::MissingParameter("params"))?;
    let a_1m = a.iter().map(|z| z.conj()).collect();
    Ok(CoefficientTable {
        m_max,
        a_m1: a,
        a_1m,
        spec,
    })
}

pub fn write_cache(path: &Path, table: &CoefficientTable) -> Result<()> {
    std::fs::write(path, cache_to_string(table))?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<CoefficientTable> {
    cache_from_str(&std::fs::read_to_string(path)?)
}
