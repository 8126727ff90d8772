//! Command-line front end: table loading and caching, argument validation,
//! experiment dispatch and CSV emission.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gl3lab::coeffs::{d3_sieve, load_gl2_eigenvalues, read_cache, synthetic_table, write_cache, CoefficientTable};
use gl3lab::experiments::{
    check_short_omega_window, check_short_window, mean_square_report, omega_scan, short_mean_square, upper_bound_scan,
    MomentReport, MomentRow, OmegaMode, OmegaReport, UpperBoundReport,
};
use gl3lab::numtheory::{
    is_prime, kloosterman_correlation, kloosterman_correlation_brute, kloosterman_first_moment,
    kloosterman_first_moment_brute, primes_up_to, Twist,
};
use gl3lab::riesz::{twisted_l_value, LValueSet, Variant};
use gl3lab::special::{
    check_derivative_relation, check_perron_meijer, meijer, meijer_asymptotic, meijer_phase, AsymptoticConfig,
    ContourSpec,
};
use gl3lab::voronoi::{default_delta, voronoi_residual_scan, ResidualMode, TermMethod};
use gl3lab::Error;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const CACHE_ENV: &str = "GL3LAB_CACHE_DIR";

pub const KLOOSTERMAN_HEADER: &str = "k,pairs,mismatches,max_rounding_residual";
pub const MEIJER_HEADER: &str = "a,j,y,exact,main_term,main_bound,main_checked,perron_rel,derivative_rel";
pub const LVALUE_HEADER: &str = "k,h,nu,j,re,im,est_error,terms";
pub const VORONOI_HEADER: &str = "a,variant,k,h,x,mode,delta,m_max,residual,reference,relative,tail_estimate";
pub const CACHE_HEADER: &str = "label,m_max,path,sha256";

#[derive(Parser, Debug)]
#[command(name = "gl3lab", version, about = "Twisted GL(3) sums: identities, Voronoi checks and moment experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Source {
    /// Symmetric square lift of the GL(2) eigenvalues in --data.
    Sym2,
    /// The ternary divisor function.
    D3,
    /// Hecke-consistent random Satake parameters, seeded by --seed.
    Synthetic,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` file; keys are long flag names, flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "sym2")]
    pub source: Source,
    /// GL(2) eigenvalue file for the sym2 source.
    #[arg(long, global = true, default_value = "data/maass_r9.5337.txt")]
    pub data: PathBuf,
    /// Coefficient table size M.
    #[arg(long = "M", global = true, default_value_t = 100_000)]
    pub m: usize,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Coefficient cache directory; defaults to $GL3LAB_CACHE_DIR.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance for twisted L-values.
    #[arg(long, global = true, default_value_t = 1e-2)]
    pub tol: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Brute-force Kloosterman first moments and correlations against their
    /// closed forms for every prime k <= kmax.
    /// CSV columns: k,pairs,mismatches,max_rounding_residual
    KloostermanCheck {
        #[arg(long, default_value_t = 101)]
        kmax: u64,
    },
    /// Exact J_{a,j}(y) against its main term, with the Perron-kernel and
    /// derivative identities, on a decade grid of y.
    /// CSV columns: a,j,y,exact,main_term,main_bound,main_checked,perron_rel,derivative_rel
    MeijerCheck {
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3])]
        a: Vec<u32>,
        #[arg(long, default_value_t = 2)]
        y_min_exp: i32,
        #[arg(long, default_value_t = 8)]
        y_max_exp: i32,
    },
    /// Twisted L-values L_j(-nu, h/k) for every unit h.
    /// CSV columns: k,h,nu,j,re,im,est_error,terms
    Lvalues {
        #[arg(long)]
        k: u64,
        #[arg(long, default_value_t = 3)]
        nu_max: u32,
    },
    /// Residual of the Voronoi identity against dual truncations.
    /// CSV columns: a,variant,k,h,x,mode,delta,m_max,residual,reference,relative,tail_estimate
    VoronoiCheck {
        #[arg(long, default_value_t = 2)]
        a: u32,
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, default_value_t = 1)]
        h: i64,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// Dual truncation points.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10000])]
        m_max: Vec<usize>,
        #[arg(long, value_enum, default_value = "fd")]
        mode: VoronoiMode,
        /// Finite-difference step; max(1, x/1000) when absent.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value = "averaged")]
        variant: VariantArg,
    },
    /// Averaged mean squares of A~_a over consecutive windows [X, wX].
    /// CSV columns: k,a,x,delta,xi,value,predicted,ratio,fitted_exponent,fit_stderr
    Moments {
        #[arg(long)]
        a: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long = "X")]
        x: f64,
        #[arg(long, default_value_t = 1)]
        windows: usize,
        #[arg(long, default_value_t = 2.0)]
        window_factor: f64,
    },
    /// Averaged short-interval moments of A~_a(x + Delta) - A~_a(x).
    /// CSV columns: k,a,x,delta,xi,value,predicted,ratio,fitted_exponent,fit_stderr
    ShortMoments {
        #[arg(long)]
        a: u32,
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long = "X")]
        x: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        /// Integration length; X when absent.
        #[arg(long)]
        xi: Option<f64>,
    },
    /// max_h |sum'| against the long or short benchmark scale.
    /// CSV columns: mode,k,x,delta,max_abs,benchmark,ratio,window_ratio,running_min
    OmegaScan {
        #[arg(long, value_enum, default_value = "long")]
        mode: OmegaArg,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long, default_value_t = 1e3)]
        x_min: f64,
        #[arg(long, default_value_t = 1e5)]
        x_max: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Short-mode interval length.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// max_h |sum'| against the improved bound and two comparison envelopes.
    /// CSV columns: k,x,max_abs,ratio_main,ratio_baseline,ratio_small_modulus
    UpperScan {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long, default_value_t = 1e3)]
        x_min: f64,
        #[arg(long, default_value_t = 1e5)]
        x_max: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Build the selected table and store it in the cache directory.
    /// CSV columns: label,m_max,path,sha256
    CacheBuild,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VoronoiMode {
    /// Compare (a+1)-th differences of raw sums; no L-values needed.
    Fd,
    /// Compare A~_a(x) itself, with computed L-values.
    Direct,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Even,
    Odd,
    Averaged,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Even => Variant::Even,
            VariantArg::Odd => Variant::Odd,
            VariantArg::Averaged => Variant::Averaged,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OmegaArg {
    Long,
    Short,
}

const SUBCOMMANDS: [&str; 9] = [
    "kloosterman-check",
    "meijer-check",
    "lvalues",
    "voronoi-check",
    "moments",
    "short-moments",
    "omega-scan",
    "upper-scan",
    "cache-build",
];

/// Parses a `key = value` file into flag arguments. `true` turns a key into
/// a bare flag and `false` drops it.
pub fn config_args(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Inserts config-file arguments right after the subcommand, so that flags
/// typed on the command line, which come later, override them.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let path = argv
        .iter()
        .position(|a| a == "--config")
        .and_then(|i| argv.get(i + 1).cloned())
        .or_else(|| argv.iter().find_map(|a| a.strip_prefix("--config=").map(str::to_string)));
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("--config {path}: {e}"))?;
    let extra = config_args(&text)?;
    let Some(at) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut merged = argv[..=at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[at + 1..]);
    Ok(merged)
}

fn cache_dir(common: &Common) -> Option<PathBuf> {
    common
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
}

fn cache_name(common: &Common) -> String {
    match common.source {
        Source::Sym2 => format!("sym2-{}.cache", common.m),
        Source::D3 => format!("d3-{}.cache", common.m),
        Source::Synthetic => format!("synthetic{}-{}.cache", common.seed, common.m),
    }
}

fn build_table(common: &Common) -> gl3lab::Result<CoefficientTable> {
    match common.source {
        Source::Sym2 => load_gl2_eigenvalues(&common.data)?.sym2_table(common.m),
        Source::D3 => Ok(d3_sieve(common.m)),
        Source::Synthetic => Ok(synthetic_table(common.m, common.seed)),
    }
}

/// The table from the cache when present there, built from the source otherwise.
pub fn load_table(common: &Common) -> gl3lab::Result<CoefficientTable> {
    if let Some(dir) = cache_dir(common) {
        let path = dir.join(cache_name(common));
        if path.exists() {
            return read_cache(&path);
        }
    }
    build_table(common)
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64).exp().round())
        .collect()
}

fn moment_grid(x: f64, windows: usize, factor: f64) -> Vec<f64> {
    (0..windows).map(|i| x * factor.powi(i as i32)).collect()
}

fn check_prime(k: u64, problems: &mut Vec<String>) {
    if k != 1 && !is_prime(k) {
        problems.push(format!("--k {k}: k must be prime"));
    }
}

fn check_cube(k: u64, x: f64, what: &str, problems: &mut Vec<String>) {
    let k3 = (k as f64).powi(3);
    if k3 > x {
        problems.push(format!("--k {k}: k^3 ≤ X required by the {what} window (k^3 = {k3}, X = {x})"));
    }
}

fn check_fits(top: f64, m: usize, problems: &mut Vec<String>) {
    if top > m as f64 {
        problems.push(format!("--M {m}: the experiment reaches {top}, beyond the table"));
    }
}

/// Every constraint the selected experiment imposes, checked before any work.
pub fn validate(cli: &Cli) -> Vec<String> {
    let mut p = Vec::new();
    let m = cli.common.m;
    if cli.common.workers == 0 {
        p.push("--workers 0: at least one worker is required".into());
    }
    if m == 0 {
        p.push("--M 0: the table needs at least one coefficient".into());
    }
    match &cli.command {
        Command::KloostermanCheck { kmax } => {
            if *kmax < 2 {
                p.push(format!("--kmax {kmax}: no primes to check"));
            }
        }
        Command::MeijerCheck { a, y_min_exp, y_max_exp } => {
            if a.iter().any(|&a| !(1..=3).contains(&a)) {
                p.push(format!("--a {a:?}: orders must lie in 1..=3"));
            }
            if y_min_exp > y_max_exp {
                p.push(format!("--y-min-exp {y_min_exp}: exceeds --y-max-exp {y_max_exp}"));
            }
        }
        Command::Lvalues { k, .. } => {
            if *k == 0 {
                p.push("--k 0: the modulus must be positive".into());
            }
        }
        Command::VoronoiCheck {
            a, k, h, x, m_max, mode, delta, ..
        } => {
            if *a < 2 {
                p.push(format!("--a {a}: the full dual series needs a >= 2"));
            }
            if *k == 0 || Twist::new(*h, *k).is_err() {
                p.push(format!("--h {h}: h must be a unit modulo k = {k}"));
            }
            if m_max.is_empty() || m_max.contains(&0) {
                p.push("--m-max: truncation points must be positive".into());
            }
            for &x in x {
                if !(x >= 1.0) {
                    p.push(format!("--x {x}: x must be >= 1"));
                }
                let d = delta.unwrap_or_else(|| default_delta(x));
                match mode {
                    VoronoiMode::Fd => {
                        if !(d > 0.0) {
                            p.push(format!("--delta {d}: the step must be positive"));
                        }
                        check_fits(x + (*a as f64 + 1.0) * d, m, &mut p);
                    }
                    VoronoiMode::Direct => check_fits(x, m, &mut p),
                }
            }
        }
        Command::Moments {
            a,
            k,
            x,
            windows,
            window_factor,
        } => {
            if !(*a == 1 || *a == 2) {
                p.push(format!("--a {a}: mean squares are defined for a = 1 or 2"));
            }
            if *windows == 0 {
                p.push("--windows 0: at least one window is required".into());
            }
            if !(*window_factor > 1.0) {
                p.push(format!("--window-factor {window_factor}: must exceed 1"));
            }
            for &k in k {
                check_prime(k, &mut p);
                check_cube(k, *x, "mean-square", &mut p);
            }
            let grid = moment_grid(*x, *windows, *window_factor);
            check_fits(grid.last().copied().unwrap_or(*x) * window_factor, m, &mut p);
        }
        Command::ShortMoments { a, k, x, delta, xi } => {
            if !(*a == 2 || *a == 3) {
                p.push(format!("--a {a}: short moments are defined for a = 2 or 3"));
            }
            check_prime(*k, &mut p);
            let xi = xi.unwrap_or(*x);
            for &d in delta {
                if let Err(Error::RangeViolation(msg)) = check_short_window(*x, d, xi, *k) {
                    p.push(format!("--delta {d}: {msg}"));
                }
                check_fits(x + xi + d + 1.0, m, &mut p);
            }
        }
        Command::OmegaScan {
            mode,
            k,
            x_min,
            x_max,
            points,
            delta,
        } => {
            if !(*x_min >= 2.0 && x_max >= x_min) || *points == 0 {
                p.push(format!("--x-min {x_min} --x-max {x_max} --points {points}: need 2 <= x-min <= x-max and points >= 1"));
            }
            let d = delta.unwrap_or(0.0);
            for &k in k {
                check_prime(k, &mut p);
                match mode {
                    OmegaArg::Long => check_cube(k, x_min / 2.0, "long Omega", &mut p),
                    OmegaArg::Short => {
                        if delta.is_none() {
                            p.push("--delta: short mode needs an interval length".into());
                        }
                        for x in [x_min / 2.0, *x_max] {
                            if let Err(Error::RangeViolation(msg)) = check_short_omega_window(x, d, k) {
                                p.push(format!("--delta {d}: at x = {x}: {msg}"));
                            }
                        }
                    }
                }
            }
            check_fits(x_max + d, m, &mut p);
        }
        Command::UpperScan { k, x_min, x_max, points } => {
            if !(*x_min >= 1.0 && x_max >= x_min) || *points == 0 {
                p.push(format!("--x-min {x_min} --x-max {x_max} --points {points}: need 1 <= x-min <= x-max and points >= 1"));
            }
            for &k in k {
                if k == 0 {
                    p.push("--k 0: the modulus must be positive".into());
                }
                check_cube(k, *x_min, "upper-bound", &mut p);
            }
            check_fits(*x_max, m, &mut p);
        }
        Command::CacheBuild => {
            if cache_dir(&cli.common).is_none() {
                p.push(format!("--cache-dir: no cache directory (set the flag or {CACHE_ENV})"));
            }
        }
    }
    p
}

/// CSV body plus a one-paragraph summary.
struct Output {
    header: &'static str,
    rows: String,
    summary: String,
}

/// Drops the header line of a report's CSV.
fn body(csv: &str) -> String {
    csv.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default()
}

fn kloosterman_check(kmax: u64) -> gl3lab::Result<Output> {
    let mut rows = String::new();
    let mut verified = Vec::new();
    let mut total_bad = 0;
    for k in primes_up_to(kmax as usize) {
        let mut bad = 0;
        let mut pairs = 0;
        let mut worst = 0.0f64;
        for m in 0..=k as i64 {
            let (v, r) = kloosterman_first_moment_brute(m, k)?;
            bad += (v != kloosterman_first_moment(m, k)?) as usize;
            worst = worst.max(r);
            for n in 0..=k as i64 {
                let (v, r) = kloosterman_correlation_brute(m, n, k)?;
                bad += (v != kloosterman_correlation(m, n, k)?) as usize;
                worst = worst.max(r);
                pairs += 1;
            }
        }
        writeln!(rows, "{k},{pairs},{bad},{worst:e}").unwrap();
        total_bad += bad;
        if bad == 0 && worst < 1e-6 {
            verified.push(k.to_string());
        }
    }
    Ok(Output {
        header: KLOOSTERMAN_HEADER,
        rows,
        summary: format!("verified primes: {}; mismatches: {total_bad}", verified.join(" ")),
    })
}

fn meijer_check(table: &CoefficientTable, orders: &[u32], lo: i32, hi: i32) -> gl3lab::Result<Output> {
    let spec = &table.spec;
    let cfg = AsymptoticConfig::default();
    let mut rows = String::new();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for &a in orders {
        for j in 0..=1 {
            for e in lo..=hi {
                let y = 10f64.powi(e);
                let exact = meijer(a, j, y, spec)?.value.re;
                let main = meijer_asymptotic(a, j, y, &cfg)?.value.re;
                let bound = 3.0 * y.powf(-(a as f64) / 6.0);
                let checked = meijer_phase(a, j, y).cos().abs() >= 0.1;
                if checked {
                    worst.0 = worst.0.max((exact - main).abs() / bound);
                }
                let big_y = y.sqrt();
                let perron = check_perron_meijer(a, j, big_y, spec, &ContourSpec::for_order(a, y, spec))?.relative();
                let deriv = check_derivative_relation(a, j, big_y, spec, 1e-3 * big_y)?.relative();
                worst.1 = worst.1.max(perron);
                worst.2 = worst.2.max(deriv);
                writeln!(rows, "{a},{j},{y:e},{exact:e},{main:e},{bound:e},{checked},{perron:e},{deriv:e}").unwrap();
            }
        }
    }
    Ok(Output {
        header: MEIJER_HEADER,
        rows,
        summary: format!(
            "{}: max |exact - main| / bound = {:.3}, Perron-kernel rel {:.2e}, derivative rel {:.2e}",
            spec.label, worst.0, worst.1, worst.2
        ),
    })
}

fn lvalues(table: &CoefficientTable, k: u64, nu_max: u32, tol: f64) -> gl3lab::Result<Output> {
    let mut rows = String::new();
    let twists = Twist::all(k);
    for t in &twists {
        for nu in 0..=nu_max {
            for j in 0..=1 {
                let v = twisted_l_value(nu, j, t, table, tol)?;
                writeln!(
                    rows,
                    "{k},{},{nu},{j},{:e},{:e},{:e},{}",
                    t.h, v.value.re, v.value.im, v.est_error, v.terms
                )
                .unwrap();
            }
        }
    }
    Ok(Output {
        header: LVALUE_HEADER,
        rows,
        summary: format!("{} twists, nu <= {nu_max}", twists.len()),
    })
}

#[allow(clippy::too_many_arguments)]
fn voronoi_check(
    table: &CoefficientTable,
    a: u32,
    k: u64,
    h: i64,
    xs: &[f64],
    m_max: &[usize],
    mode: VoronoiMode,
    delta: Option<f64>,
    variant: Variant,
    tol: f64,
) -> gl3lab::Result<Output> {
    let twist = Twist::new(h, k)?;
    let mut rows = String::new();
    let mut last = Vec::new();
    let lv = match mode {
        VoronoiMode::Direct => Some(LValueSet::compute(a, &twist, table, tol)?),
        VoronoiMode::Fd => None,
    };
    for &x in xs {
        let (rmode, d, label) = match &lv {
            Some(lv) => (ResidualMode::Direct(lv), 0.0, "direct"),
            None => {
                let d = delta.unwrap_or_else(|| default_delta(x));
                (ResidualMode::FiniteDifference { delta: d }, d, "fd")
            }
        };
        let reports = voronoi_residual_scan(a, variant, x, &twist, table, m_max, rmode, TermMethod::Contour)?;
        for r in &reports {
            writeln!(
                rows,
                "{a},{},{k},{},{x:e},{label},{d:e},{},{:e},{:e},{:e},{:e}",
                variant.label(),
                twist.h,
                r.m_max,
                r.residual,
                r.reference,
                r.relative(),
                r.tail_estimate
            )
            .unwrap();
        }
        if let Some(r) = reports.last() {
            last.push(format!("x={x}: {:.2e}", r.relative()));
        }
    }
    Ok(Output {
        header: VORONOI_HEADER,
        rows,
        summary: format!("relative residual at the largest truncation: {}", last.join(", ")),
    })
}

fn moments(table: &CoefficientTable, a: u32, ks: &[u64], x: f64, windows: usize, factor: f64, tol: f64) -> gl3lab::Result<Output> {
    let grid = moment_grid(x, windows, factor);
    let mut rows = String::new();
    let mut fits = Vec::new();
    for &k in ks {
        let r = mean_square_report(a, &grid, factor, k, table, tol)?;
        rows.push_str(&body(&r.csv()));
        fits.push(format!("k={k}: {:.3} +- {:.3}", r.fitted_exponent, r.fit_stderr));
    }
    Ok(Output {
        header: MomentReport::CSV_HEADER,
        rows,
        summary: format!("fitted X-exponent {}", fits.join(", ")),
    })
}

fn short_moments(table: &CoefficientTable, a: u32, k: u64, x: f64, deltas: &[f64], xi: f64, tol: f64) -> gl3lab::Result<Output> {
    let rows: Vec<MomentRow> = deltas
        .iter()
        .map(|&d| short_mean_square(a, x, d, xi, k, table, tol))
        .collect::<gl3lab::Result<_>>()?;
    let r = MomentReport::new(k, a, "delta", rows)?;
    Ok(Output {
        header: MomentReport::CSV_HEADER,
        rows: body(&r.csv()),
        summary: format!("fitted Delta-exponent {:.3} +- {:.3}", r.fitted_exponent, r.fit_stderr),
    })
}

fn omega(table: &CoefficientTable, mode: OmegaMode, ks: &[u64], grid: &[f64]) -> gl3lab::Result<Output> {
    let r = omega_scan(mode, grid, ks, table)?;
    Ok(Output {
        header: OmegaReport::CSV_HEADER,
        rows: body(&r.csv()),
        summary: format!("minimum window ratio {:.4}", r.min_ratio),
    })
}

fn upper(table: &CoefficientTable, ks: &[u64], grid: &[f64]) -> gl3lab::Result<Output> {
    let r = upper_bound_scan(grid, ks, table)?;
    let slope = r.slope_k1.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into());
    Ok(Output {
        header: UpperBoundReport::CSV_HEADER,
        rows: body(&r.csv()),
        summary: format!(
            "sups {:.3e} {:.3e} {:.3e}; bounded {:?}; slope at k = 1: {slope}",
            r.sups[0], r.sups[1], r.sups[2], r.bounded
        ),
    })
}

fn cache_build(common: &Common) -> gl3lab::Result<Output> {
    let dir = cache_dir(common).ok_or(Error::MissingParameter("cache-dir"))?;
    std::fs::create_dir_all(&dir)?;
    let table = build_table(common)?;
    let path = dir.join(cache_name(common));
    write_cache(&path, &table)?;
    let back = read_cache(&path)?;
    if back.a_m1 != table.a_m1 {
        return Err(Error::Cache(format!("{} does not reproduce the table", path.display())));
    }
    let text = std::fs::read_to_string(&path)?;
    let sha = text
        .rsplit_once("# sha256 ")
        .map(|(_, s)| s.trim().to_string())
        .unwrap_or_default();
    Ok(Output {
        header: CACHE_HEADER,
        rows: format!("{},{},{},{sha}\n", table.spec.label, table.m_max, path.display()),
        summary: format!("wrote {} ({} coefficients)", path.display(), table.m_max),
    })
}

fn execute(cli: &Cli) -> gl3lab::Result<(Output, String)> {
    let c = &cli.common;
    if let Command::KloostermanCheck { kmax } = &cli.command {
        return Ok((kloosterman_check(*kmax)?, "none".into()));
    }
    if let Command::CacheBuild = &cli.command {
        let out = cache_build(c)?;
        return Ok((out, cache_name(c)));
    }
    let table = load_table(c)?;
    let label = format!("{} M={}", table.spec.label, table.m_max);
    let out = match &cli.command {
        Command::MeijerCheck { a, y_min_exp, y_max_exp } => meijer_check(&table, a, *y_min_exp, *y_max_exp)?,
        Command::Lvalues { k, nu_max } => lvalues(&table, *k, *nu_max, c.tol)?,
        Command::VoronoiCheck {
            a,
            k,
            h,
            x,
            m_max,
            mode,
            delta,
            variant,
        } => voronoi_check(&table, *a, *k, *h, x, m_max, *mode, *delta, (*variant).into(), c.tol)?,
        Command::Moments {
            a,
            k,
            x,
            windows,
            window_factor,
        } => moments(&table, *a, k, *x, *windows, *window_factor, c.tol)?,
        Command::ShortMoments { a, k, x, delta, xi } => short_moments(&table, *a, *k, *x, delta, xi.unwrap_or(*x), c.tol)?,
        Command::OmegaScan {
            mode,
            k,
            x_min,
            x_max,
            points,
            delta,
        } => {
            let mode = match mode {
                OmegaArg::Long => OmegaMode::Long,
                OmegaArg::Short => OmegaMode::Short {
                    delta: delta.unwrap_or(0.0),
                },
            };
            omega(&table, mode, k, &geometric_grid(*x_min, *x_max, *points))?
        }
        Command::UpperScan { k, x_min, x_max, points } => upper(&table, k, &geometric_grid(*x_min, *x_max, *points))?,
        Command::KloostermanCheck { .. } | Command::CacheBuild => unreachable!(),
    };
    Ok((out, label))
}

fn write_csv(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// Runs one invocation; argv[0] is the program name. Returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let problems = validate(&cli);
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("error: {p}");
        }
        return EXIT_VALIDATION;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.common.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: worker pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let (out, label) = match pool.install(|| execute(&cli)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL };
        }
    };
    let mut text = String::new();
    writeln!(text, "# gl3lab {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(text, "# args {}", argv[1..].join(" ")).unwrap();
    writeln!(text, "# table {label}").unwrap();
    writeln!(text, "# workers {}", cli.common.workers).unwrap();
    writeln!(text, "{}", out.header).unwrap();
    text.push_str(&out.rows);
    if let Err(e) = write_csv(cli.common.out.as_deref(), &text) {
        eprintln!("error: writing CSV: {e}");
        return EXIT_VALIDATION;
    }
    eprintln!("{}", out.summary);
    EXIT_OK
}
