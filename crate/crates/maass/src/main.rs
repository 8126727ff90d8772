use clap::Parser;
use gl3lab::numtheory::primes_up_to;
use maass::{coefficients, hecke_defect, solve_collocation, HorocyclePlan, KBessel};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Writes Hecke eigenvalues lambda(p) of an odd level-one Maass form in the
/// `r <value>` / `p lambda` text format.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Spectral parameter, copied verbatim into the header.
    #[arg(long, default_value = "9.53369526135355755434423523592877")]
    r: String,
    /// Largest prime to emit.
    #[arg(long, default_value_t = 100_000)]
    n_max: usize,
    /// Number of coefficients solved for by collocation.
    #[arg(long, default_value_t = 20)]
    m0: usize,
    #[arg(long, default_value_t = 0.5)]
    collocation_height: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let args = Args::parse();
    let r: f64 = match args.r.parse() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("bad --r: {e}");
            std::process::exit(2);
        }
    };
    let kb = KBessel::new(r);
    let seed = solve_collocation(&kb, args.m0, 3 * args.m0, args.collocation_height);
    let seed: Vec<f64> = seed[..=args.m0.min(14)].to_vec();
    let plan = HorocyclePlan::for_range(args.n_max);
    let c = coefficients(&kb, &seed, &plan);
    let defect = hecke_defect(&c, 300);

    let mut text = String::new();
    writeln!(text, "# odd Maass cusp form for SL(2,Z), Hecke eigenvalues at primes").unwrap();
    writeln!(
        text,
        "# collocation m0={} height={}, horocycles 2^{} points, |c(1) - 1| = {:.1e}",
        args.m0,
        args.collocation_height,
        plan.log2_points,
        (c[1] - 1.0).abs()
    )
    .unwrap();
    writeln!(text, "# max Hecke relation defect below 300: {defect:.1e}").unwrap();
    writeln!(text, "r {}", args.r).unwrap();
    for p in primes_up_to(args.n_max) {
        writeln!(text, "{p} {:.17e}", c[p as usize]).unwrap();
    }
    if let Err(e) = std::fs::write(&args.out, text) {
        eprintln!("cannot write {}: {e}", args.out.display());
        std::process::exit(3);
    }
    eprintln!("wrote {} (Hecke defect {defect:.1e})", args.out.display());
}
