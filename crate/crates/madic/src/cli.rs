//! Batch command-line front end. Every run is deterministic: identical
//! argv (seeds included) produces byte-identical output.
//!
//! Exit codes: 0 success / all checks pass, 1 check failure (with a
//! machine-readable `FAIL <reason>` line), 2 usage or parse error,
//! 3 I/O or measure-validation error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{self, DEFAULT_SIG_DIGITS};
use crate::error::Error;
use crate::measure::{self, RandomParams, TreeMeasure, UniformCheck};
use crate::space::{AlphaParam, Prefix, WScaled};
use crate::theory::{self, format_rational};

pub const DEFAULT_I_MAX: u32 = 32;

#[derive(Parser)]
#[command(name = "madic", version, about = "m-adic tree measures and density oscillation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a measure and write it to a file.
    Construct {
        #[arg(long = "type", value_enum)]
        kind: ConstructKind,
        #[arg(long)]
        m: u64,
        /// Exponent as a rational p/q (decimals are rejected).
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value = "1")]
        x0: String,
        /// Comma-separated branching counts, e.g. 2,3,2 (uniform only).
        #[arg(long = "s-seq")]
        s_seq: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Read a measure file and report on it.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// Run an exact check; exit 0 iff it passes.
    Verify {
        #[command(subcommand)]
        what: VerifyCmd,
    },
    /// Re-read a measure over base m^d by grouping d levels per digit.
    Lift {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        d: u32,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Print seeded support paths distributed by the measure.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    Uniform,
    Greedy,
    Random,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Density profile along one path.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        path: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Windowed oscillation statistics over all support paths.
    Oscillation {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 0)]
        n0: usize,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Lower bound vs upper bound at a finite search cap.
    Bounds {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        alpha: String,
        #[arg(long = "I-max", default_value_t = DEFAULT_I_MAX)]
        i_max: u32,
    },
    /// Randomized pigeonhole-selection suite.
    Dirichlet {
        #[arg(long)]
        w: String,
        #[arg(long)]
        u: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Mark every level, check the mass hypothesis and avoidance decay.
    Marked {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long = "d-consec", default_value_t = 1)]
        d_consec: u32,
    },
    /// Decide uniformity; print the branching data or a witness.
    Uniform {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Runs the CLI on the given argv tail (no program name), writing all
/// output to `out`. Returns the process exit code.
pub fn run<W: Write>(args: &[String], out: &mut W) -> i32 {
    let mut argv: Vec<String> = vec!["madic".into()];
    argv.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            // clap reserves 0 for --help/--version renders
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidAlpha(_)
        | Error::InvalidParam(_)
        | Error::InvalidSpec(_)
        | Error::EmptyWindow { .. } => 2,
        _ => 3,
    }
}

fn dispatch<W: Write>(cli: Cli, out: &mut W) -> crate::Result<i32> {
    match cli.cmd {
        Cmd::Construct { kind, m, alpha, depth, x0, s_seq, seed, out: path } => {
            construct(kind, m, alpha, depth, &x0, s_seq, seed, &path, out)
        }
        Cmd::Analyze { what } => match what {
            AnalyzeCmd::Profile { input, alpha, path, csv } => {
                analyze_profile(&input, &alpha, &path, csv.as_deref(), out)
            }
            AnalyzeCmd::Oscillation { input, alpha, n0 } => {
                analyze_oscillation(&input, &alpha, n0, out)
            }
        },
        Cmd::Verify { what } => match what {
            VerifyCmd::Bounds { m, alpha, i_max } => verify_bounds(m, &alpha, i_max, out),
            VerifyCmd::Dirichlet { w, u, delta, trials, seed } => {
                verify_dirichlet(&w, &u, &delta, trials, seed, out)
            }
            VerifyCmd::Marked { input, alpha, delta, d_consec } => {
                verify_marked(&input, &alpha, delta.as_deref(), d_consec, out)
            }
            VerifyCmd::Uniform { input } => verify_uniform(&input, out),
        },
        Cmd::Lift { input, d, out: path } => lift(&input, d, &path, out),
        Cmd::Sample { input, count, seed } => sample(&input, count, seed, out),
    }
}

/// Parses "num/den" or a bare integer as an exact rational.
fn parse_rational(s: &str) -> crate::Result<BigRational> {
    let bad = || Error::InvalidParam(format!("expected a rational like 3/7, got {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den == BigInt::from(0) {
            return Err(bad());
        }
        Ok(BigRational::new(num, den))
    } else {
        let num: BigInt = s.trim().parse().map_err(|_| bad())?;
        Ok(BigRational::from_integer(num))
    }
}

fn parse_positive_rational(s: &str, what: &str) -> crate::Result<BigRational> {
    let r = parse_rational(s)?;
    if !r.is_positive() {
        return Err(Error::InvalidParam(format!("{what} must be positive, got {s}")));
    }
    Ok(r)
}

fn load_measure(path: &std::path::Path) -> crate::Result<TreeMeasure> {
    let text = std::fs::read_to_string(path)?;
    measure::deserialize(&text)
}

#[allow(clippy::too_many_arguments)]
fn construct<W: Write>(
    kind: ConstructKind,
    m: u64,
    alpha: Option<String>,
    depth: usize,
    x0: &str,
    s_seq: Option<String>,
    seed: u64,
    path: &std::path::Path,
    out: &mut W,
) -> crate::Result<i32> {
    let x0 = parse_positive_rational(x0, "x0")?;
    let alpha = alpha.map(|s| AlphaParam::parse(m, &s)).transpose()?;
    let mu = match kind {
        ConstructKind::Greedy => {
            let alpha = alpha
                .as_ref()
                .ok_or_else(|| Error::InvalidAlpha("greedy construction needs --alpha".into()))?;
            let res = measure::build_greedy(alpha, &x0, depth)?;
            writeln!(
                out,
                "type=greedy m={m} alpha={}/{} x0={} depth={depth}",
                alpha.p(),
                alpha.q(),
                format_rational(&x0)
            )?;
            let s_strs: Vec<String> = res.spec.s_seq.iter().map(|s| s.to_string()).collect();
            writeln!(out, "s=[{}]", s_strs.join(","))?;
            if res.degenerate {
                writeln!(out, "degenerate=true")?;
            }
            let hi = upper_times(alpha, &x0);
            let lo_scaled = WScaled::from_rational(x0.clone());
            let hi_scaled = WScaled::from_rational(hi.clone());
            let inside = res.profile.entries.iter().all(|e| {
                let f = e.f_value();
                !alpha.cmp_scaled(&f, &lo_scaled).is_lt() && !alpha.cmp_scaled(&f, &hi_scaled).is_gt()
            });
            writeln!(
                out,
                "f in [{}, {}]: {}",
                format_rational(&x0),
                format_rational(&hi),
                if inside { "OK" } else { "FAIL" }
            )?;
            if !inside {
                writeln!(out, "FAIL greedy-containment")?;
                return Ok(1);
            }
            res.measure
        }
        ConstructKind::Uniform => {
            let s_seq = s_seq
                .ok_or_else(|| Error::InvalidSpec("uniform construction needs --s-seq".into()))?;
            let s_seq: Vec<u32> = s_seq
                .split(',')
                .map(|p| {
                    p.trim().parse::<u32>().map_err(|_| {
                        Error::InvalidSpec(format!("bad branching count {p:?} in --s-seq"))
                    })
                })
                .collect::<crate::Result<_>>()?;
            let spec = measure::BranchingSpec::new(x0.clone(), s_seq.clone())?;
            let mut mu = measure::build_uniform(m, &spec, depth)?;
            mu.set_alpha_hint(alpha.as_ref().map(|a| (a.p(), a.q())));
            let s_strs: Vec<String> = s_seq.iter().map(|s| s.to_string()).collect();
            writeln!(
                out,
                "type=uniform m={m} x0={} depth={depth} s=[{}]",
                format_rational(&x0),
                s_strs.join(",")
            )?;
            mu
        }
        ConstructKind::Random => {
            let mut mu = measure::build_random(m, depth, seed, &RandomParams::for_base(m))?;
            mu.set_alpha_hint(alpha.as_ref().map(|a| (a.p(), a.q())));
            writeln!(out, "type=random m={m} depth={depth} seed={seed}")?;
            mu
        }
    };
    std::fs::write(path, mu.serialize())?;
    writeln!(out, "nodes={}", mu.node_count())?;
    writeln!(out, "wrote={}", path.display())?;
    Ok(0)
}

fn upper_times(alpha: &AlphaParam, x0: &BigRational) -> BigRational {
    theory::upper_bound(alpha) * x0
}

fn analyze_profile<W: Write>(
    input: &std::path::Path,
    alpha: &str,
    path: &str,
    csv: Option<&std::path::Path>,
    out: &mut W,
) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    let alpha = AlphaParam::parse(mu.base(), alpha)?;
    let path = Prefix::parse(mu.base(), path)?;
    let profile = density::f_profile(&mu, &alpha, &path)?;
    writeln!(
        out,
        "in={} m={} alpha={}/{} path={}",
        input.display(),
        mu.base(),
        alpha.p(),
        alpha.q(),
        path
    )?;
    for e in &profile.entries {
        writeln!(
            out,
            "n={} prefix={} mass={}/{} f~{}",
            e.level,
            path.truncate(e.level),
            e.mass.numer(),
            e.mass.denom(),
            profile.f_approx(e, DEFAULT_SIG_DIGITS)
        )?;
    }
    if let Some(csv_path) = csv {
        std::fs::write(csv_path, profile.to_csv(DEFAULT_SIG_DIGITS))?;
        writeln!(out, "csv={}", csv_path.display())?;
    }
    Ok(0)
}

fn analyze_oscillation<W: Write>(
    input: &std::path::Path,
    alpha: &str,
    n0: usize,
    out: &mut W,
) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    let alpha = AlphaParam::parse(mu.base(), alpha)?;
    let report = density::oscillation_report(&mu, &alpha, n0)?;
    write!(out, "{}", report.export())?;
    let upper = theory::upper_bound(&alpha);
    let within = !alpha
        .cmp_scaled(&report.c_hat.value(), &WScaled::from_rational(upper.clone()))
        .is_gt();
    writeln!(
        out,
        "c_loc_hat≈{} c_hat≈{} {} upper={}",
        alpha.approx_fixed(&report.c_loc_hat.value(), 6),
        alpha.approx_fixed(&report.c_hat.value(), 6),
        if within { "≤" } else { ">" },
        format_rational(&upper)
    )?;
    Ok(0)
}

fn verify_bounds<W: Write>(m: u64, alpha: &str, i_max: u32, out: &mut W) -> crate::Result<i32> {
    if i_max < 1 {
        return Err(Error::InvalidParam("I-max must be at least 1".into()));
    }
    let alpha = AlphaParam::parse(m, alpha)?;
    let report = theory::cross_check_bounds(&alpha, i_max);
    write!(out, "{}", report.export())?;
    let ok = report.lower_le_upper();
    writeln!(
        out,
        "lower≈{} ({}={}) upper={} {}",
        alpha.approx_fixed(&report.lower.value, 6),
        report.lower.kind.as_str(),
        report.lower.index,
        format_rational(&report.upper),
        if ok { "OK" } else { "FAIL" }
    )?;
    if !ok {
        writeln!(out, "FAIL bound-consistency lower>upper")?;
        return Ok(1);
    }
    Ok(0)
}

fn verify_dirichlet<W: Write>(
    w: &str,
    u: &str,
    delta: &str,
    trials: u64,
    seed: u64,
    out: &mut W,
) -> crate::Result<i32> {
    let w = parse_positive_rational(w, "w")?;
    let u = parse_positive_rational(u, "u")?;
    let delta = parse_positive_rational(delta, "delta")?;
    let tau = theory::dirichlet_tau(&w, &u, &delta)?;
    writeln!(
        out,
        "w={} u={} delta={} trials={trials} seed={seed}",
        format_rational(&w),
        format_rational(&u),
        format_rational(&delta)
    )?;
    writeln!(out, "tau={}", format_rational(&tau))?;
    // largest admissible tuple length: the biggest integer strictly below u
    let n_max = {
        let fl = u.floor();
        let fl_int = fl.to_integer();
        let max = if u.is_integer() { fl_int - 1 } else { fl_int };
        u64::try_from(max).map_err(|_| Error::InvalidParam("u too small".into()))?
    };
    if n_max < 1 {
        return Err(Error::InvalidParam("u admits no tuple length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = 0u64;
    let floor_w = w.floor();
    let ceil_w = w.ceil();
    for _ in 0..trials {
        let n = rng.gen_range(1..=n_max) as usize;
        let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=1000)).collect();
        let total: u64 = weights.iter().sum();
        let zs: Vec<BigRational> = weights
            .iter()
            .map(|&g| &w * BigRational::new(BigInt::from(g), BigInt::from(total)))
            .collect();
        let idx = theory::dirichlet_select(&zs, &w, &u, &delta)?;
        let z = &zs[idx - 1];
        let little = *z >= tau && *z <= &w / &ceil_w;
        let big = *z >= &w / &floor_w - &delta && *z <= w;
        if little || big {
            selected += 1;
        } else {
            writeln!(out, "FAIL dirichlet-selection trial-membership z={z}")?;
            return Ok(1);
        }
    }
    writeln!(out, "selected={selected}/{trials}")?;
    writeln!(out, "OK")?;
    Ok(0)
}

fn verify_marked<W: Write>(
    input: &std::path::Path,
    alpha: &str,
    delta: Option<&str>,
    d_consec: u32,
    out: &mut W,
) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    let alpha = AlphaParam::parse(mu.base(), alpha)?;
    let delta = delta.map(|s| parse_positive_rational(s, "delta")).transpose()?;
    let table = theory::build_marked_sets(&mu, &alpha, None, delta)?;
    writeln!(
        out,
        "in={} m={} depth={} alpha={}/{}",
        input.display(),
        mu.base(),
        mu.depth(),
        alpha.p(),
        alpha.q()
    )?;
    writeln!(
        out,
        "delta={} tau={} u={} K_lo={}",
        format_rational(&table.delta),
        format_rational(&table.tau),
        table.u,
        format_rational(&table.k_lo)
    )?;
    writeln!(out, "marked={} violations={}", table.total_marked(), table.violations.len())?;
    for v in &table.violations {
        writeln!(out, "FAIL mark-hypothesis {v}")?;
    }
    if !table.violations.is_empty() {
        return Ok(1);
    }
    let n_max = mu.depth() / d_consec as usize;
    if n_max == 0 {
        return Err(Error::InvalidParam(format!(
            "depth {} insufficient for d-consec={d_consec}",
            mu.depth()
        )));
    }
    let report = theory::avoidance_decay_check(&mu, &table, d_consec, n_max)?;
    write!(out, "{}", report.export())?;
    if !report.all_ok {
        writeln!(out, "FAIL avoidance-decay")?;
        return Ok(1);
    }
    writeln!(out, "OK")?;
    Ok(0)
}

fn verify_uniform<W: Write>(input: &std::path::Path, out: &mut W) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    writeln!(out, "in={} m={} depth={}", input.display(), mu.base(), mu.depth())?;
    match measure::is_uniform(&mu) {
        UniformCheck::Uniform(spec) => {
            let s_strs: Vec<String> = spec.s_seq.iter().map(|s| s.to_string()).collect();
            writeln!(out, "uniform x0={} s=[{}]", format_rational(&spec.x0), s_strs.join(","))?;
            Ok(0)
        }
        UniformCheck::NotUniform { witness, reason } => {
            writeln!(out, "FAIL not-uniform witness={},{} reason={reason}", witness.0, witness.1)?;
            Ok(1)
        }
    }
}

fn lift<W: Write>(
    input: &std::path::Path,
    d: u32,
    path: &std::path::Path,
    out: &mut W,
) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    let lifted = mu.block_lift(d)?;
    std::fs::write(path, lifted.serialize())?;
    writeln!(out, "lifted m={} depth={} d={d}", lifted.base(), lifted.depth())?;
    writeln!(out, "wrote={}", path.display())?;
    Ok(0)
}

fn sample<W: Write>(
    input: &std::path::Path,
    count: u64,
    seed: u64,
    out: &mut W,
) -> crate::Result<i32> {
    let mu = load_measure(input)?;
    writeln!(out, "in={} count={count} seed={seed}", input.display())?;
    for i in 0..count {
        writeln!(out, "{}", mu.sample_path(seed.wrapping_add(i)))?;
    }
    Ok(0)
}
