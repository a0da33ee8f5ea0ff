//! `defk`: scriptable access to strata, K-group tables, flat representations
//! and lattice holonomy. Data goes to stdout (or `--output`), progress and
//! diagnostics to stderr.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use defk_core::hn_strata::{
    codim_complex, enumerate_admissible, min_codim_formula, min_nonsemistable_codim,
    verify_codim_inequalities,
};
use defk_core::kcalc::{
    bott_les_report, excision_counterexample, k_topological, kdef_groups, kgroups_table,
    moduli_homotopy,
};
use defk_core::lattice::{build_complex, flat_from_rep, holonomy_rep, max_plaquette_defect};
use defk_core::presentation::make_presentation;
use defk_core::rep_variety::{
    connect_flat_with, default_probe_words, fingerprint, flow_to_flat_with, obstruction,
    sample_flat_with, ConnectOptions,
};
use defk_core::{Error, FlowOptions, Representation, SurfaceKind, SurfacePresentation, Word};

use output::{Format, Records};

const EXIT_USAGE: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;
const EXIT_IO: u8 = 1;

/// Progress lines are written every this many flow iterations.
const PROGRESS_EVERY: usize = 25;

#[derive(Parser)]
#[command(name = "defk", version, about = "Flat unitary connections on surfaces and their K-theory")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Numerics {
    /// Residual tolerance of the flow.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
}

impl Numerics {
    fn flow(&self) -> FlowOptions {
        FlowOptions::new(self.tol, self.max_iter)
    }
}

#[derive(Args, Clone)]
struct RepSource {
    #[arg(long, value_parser = parse_surface, default_value = "genus2")]
    surface: SurfaceKind,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force minimum codimension of non-semi-stable strata.
    StrataMin {
        /// Ranks (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<i64>,
        /// Genera (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        genus: Vec<i64>,
    },
    /// Admissible types up to a complex codimension, with the inequality check.
    StrataEnum {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        genus: i64,
        #[arg(long, default_value_t = 30)]
        max_codim: i64,
    },
    /// Deformation K-groups of one surface, or the whole table.
    Kgroups {
        #[arg(long, value_parser = parse_surface)]
        surface: Option<SurfaceKind>,
        #[arg(long)]
        degree: Option<u32>,
        /// Table mode: largest genus.
        #[arg(long, default_value_t = 5)]
        max_g: u32,
        #[arg(long, default_value_t = 7)]
        max_degree: u32,
    },
    /// Homotopy groups of the stable moduli space of flat connections.
    Moduli {
        #[arg(long, value_parser = parse_surface)]
        surface: SurfaceKind,
        /// Homotopy degree; all of 0..=3 when omitted.
        #[arg(long)]
        i: Option<u32>,
    },
    /// Bott long exact sequence in low degrees.
    BottLes {
        #[arg(long, value_parser = parse_surface)]
        surface: SurfaceKind,
    },
    /// Excision failure for connected sums of orientable surfaces.
    Excision {
        #[arg(long, requires = "g2")]
        g1: Option<u32>,
        #[arg(long, requires = "g1")]
        g2: Option<u32>,
        /// Without --g1/--g2, draw this many random pairs from --seed.
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gradient flow of a Haar-random start toward a flat representation.
    Flow {
        #[command(flatten)]
        source: RepSource,
        #[command(flatten)]
        num: Numerics,
        /// Include the final representation.
        #[arg(long)]
        include_rep: bool,
    },
    /// Flat representations from consecutive seeds.
    Sample {
        #[command(flatten)]
        source: RepSource,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[command(flatten)]
        num: Numerics,
        #[arg(long)]
        include_rep: bool,
    },
    /// Path of flat representations between two samples.
    Connect {
        #[command(flatten)]
        source: RepSource,
        /// Seed of the end point (default: --seed + 1).
        #[arg(long)]
        seed_end: Option<u64>,
        /// Start representation as JSON (overrides the seeds).
        #[arg(long, requires = "to")]
        from: Option<PathBuf>,
        #[arg(long, requires = "from")]
        to: Option<PathBuf>,
        #[arg(long, default_value_t = 9)]
        waypoints: usize,
        #[arg(long, default_value_t = 0.5)]
        step_limit: f64,
        #[arg(long, default_value_t = 512)]
        max_insertions: usize,
        #[command(flatten)]
        num: Numerics,
        #[arg(long)]
        include_path: bool,
    },
    /// Component obstruction of a flat representation of a nonorientable surface.
    Obstruction {
        #[command(flatten)]
        source: RepSource,
        /// Representation as JSON (overrides sampling).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        num: Numerics,
    },
    /// Holonomy of the flat lattice connection built from a sample.
    HolonomyRoundtrip {
        #[command(flatten)]
        source: RepSource,
        #[arg(long, default_value_t = 0)]
        level: u32,
        #[command(flatten)]
        num: Numerics,
    },
    /// Sorted eigenvalues of probe words.
    Fingerprint {
        #[command(flatten)]
        source: RepSource,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        num: Numerics,
    },
}

fn parse_surface(s: &str) -> Result<SurfaceKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Command failure with its exit code. A failed command may still carry an
/// artifact describing how far it got.
struct Failure {
    code: u8,
    message: String,
    partial: Option<Records>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_non_convergence() {
            EXIT_NON_CONVERGENCE
        } else {
            EXIT_PRECONDITION
        };
        Failure {
            code,
            message: e.to_string(),
            partial: None,
        }
    }
}

impl Failure {
    fn io(what: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", what.display()),
            partial: None,
        }
    }

    fn precondition(message: String) -> Self {
        Failure {
            code: EXIT_PRECONDITION,
            message,
            partial: None,
        }
    }
}

type Outcome = Result<Records, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (records, code) = match run(&cli.command) {
        Ok(r) => (Some(r), 0),
        Err(f) => {
            eprintln!("defk: {}", f.message);
            (f.partial, f.code)
        }
    };
    if let Some(records) = records {
        if let Err(e) = records.write(cli.format, cli.output.as_deref()) {
            eprintln!("defk: cannot write output: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    ExitCode::from(code)
}

fn run(command: &Command) -> Outcome {
    match command {
        Command::StrataMin { n, genus } => strata_min(n, genus),
        Command::StrataEnum { n, genus, max_codim } => strata_enum(*n, *genus, *max_codim),
        Command::Kgroups {
            surface,
            degree,
            max_g,
            max_degree,
        } => kgroups(*surface, *degree, *max_g, *max_degree),
        Command::Moduli { surface, i } => moduli(*surface, *i),
        Command::BottLes { surface } => Ok(Records::one(to_value(&bott_les_report(*surface)?))),
        Command::Excision { g1, g2, count, seed } => excision(g1.zip(*g2), *count, *seed),
        Command::Flow {
            source,
            num,
            include_rep,
        } => flow(source, num, *include_rep),
        Command::Sample {
            source,
            count,
            num,
            include_rep,
        } => sample(source, *count, num, *include_rep),
        Command::Connect {
            source,
            seed_end,
            from,
            to,
            waypoints,
            step_limit,
            max_insertions,
            num,
            include_path,
        } => {
            let (start, end) = match (from, to) {
                (Some(f), Some(t)) => (read_rep(f)?, read_rep(t)?),
                _ => (
                    sample_rep(source, source.seed, num)?,
                    sample_rep(source, seed_end.unwrap_or(source.seed + 1), num)?,
                ),
            };
            let mut opts = ConnectOptions::new(num.tol);
            opts.flow.max_iter = num.max_iter;
            opts.step_limit = *step_limit;
            opts.max_insertions = *max_insertions;
            connect(&start, &end, *waypoints, &opts, *include_path)
        }
        Command::Obstruction { source, input, num } => {
            let rho = load_or_sample(source, input.as_deref(), num)?;
            Ok(Records::one(json!({
                "surface": rho.presentation().kind().to_string(),
                "n": rho.rank(),
                "residual": rho.residual(),
                "obstruction": obstruction(&rho)?,
            })))
        }
        Command::HolonomyRoundtrip { source, level, num } => holonomy_roundtrip(source, *level, num),
        Command::Fingerprint { source, input, num } => {
            let rho = load_or_sample(source, input.as_deref(), num)?;
            let probes = default_probe_words(rho.presentation());
            let spectra = fingerprint(&rho, &probes)?;
            let rows: Vec<Value> = probes
                .iter()
                .zip(spectra)
                .map(|(w, eig)| {
                    json!({
                        "word": word_name(rho.presentation(), w),
                        "eigenvalues": eig.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok(Records::one(json!({
                "surface": rho.presentation().kind().to_string(),
                "n": rho.rank(),
                "probes": rows,
            })))
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("core types serialize to JSON")
}

fn strata_min(ns: &[i64], gs: &[i64]) -> Outcome {
    let cells: Vec<(i64, i64)> = ns.iter().flat_map(|&n| gs.iter().map(move |&g| (n, g))).collect();
    let rows: Vec<Result<Value, Error>> = cells
        .par_iter()
        .map(|&(n, g)| {
            let m = min_nonsemistable_codim(n, g)?;
            let formula = min_codim_formula(n, g);
            Ok(json!({
                "real_codim": m.real_codim,
                "formula": formula,
                "match": m.real_codim == formula,
                "n": n,
                "genus": g,
                "argmins": m.argmins.iter().map(ToString::to_string).collect::<Vec<_>>(),
            }))
        })
        .collect();
    Ok(Records(rows.into_iter().collect::<Result<_, _>>()?))
}

fn strata_enum(n: i64, g: i64, max_codim: i64) -> Outcome {
    let mut rows = Vec::new();
    for mu in enumerate_admissible(n, g, max_codim)? {
        let c = codim_complex(&mu, g)?;
        let ineq = (mu.len() >= 2).then(|| verify_codim_inequalities(&mu)).transpose()?;
        rows.push(json!({
            "type": mu.to_string(),
            "length": mu.len(),
            "codim": c,
            "real_codim": 2 * c,
            "degree_term": ineq.as_ref().map(|r| r.degree_term),
            "rank_term": ineq.as_ref().map(|r| r.rank_term),
            "inequalities_hold": ineq.as_ref().map(|r| r.holds()),
        }));
    }
    Ok(Records(rows))
}

fn kgroups(surface: Option<SurfaceKind>, degree: Option<u32>, max_g: u32, max_degree: u32) -> Outcome {
    let Some(surface) = surface else {
        if degree.is_some() {
            return Err(Failure::precondition("--degree needs --surface".into()));
        }
        let rows = kgroups_table(max_g, 0..=max_degree)?;
        return Ok(Records(rows.iter().map(to_value).collect()));
    };
    let degrees: Vec<u32> = match degree {
        Some(d) => vec![d],
        None => (0..=max_degree).collect(),
    };
    let mut rows = Vec::new();
    for d in degrees {
        let kdef = kdef_groups(surface, d)?;
        let ktop = k_topological(surface, d)?;
        rows.push(json!({
            "group": kdef.to_string(),
            "surface": surface.to_string(),
            "degree": d,
            "ktop": ktop.to_string(),
            "agree": kdef == ktop,
        }));
    }
    Ok(Records(rows))
}

fn moduli(surface: SurfaceKind, i: Option<u32>) -> Outcome {
    let degrees: Vec<u32> = i.map_or_else(|| (0..=3).collect(), |i| vec![i]);
    let mut rows = Vec::new();
    for i in degrees {
        let v = moduli_homotopy(surface, i)?;
        rows.push(json!({
            "surface": surface.to_string(),
            "i": i,
            "display": v.to_string(),
            "value": to_value(&v),
        }));
    }
    Ok(Records(rows))
}

/// Genera of random excision pairs are drawn from this range.
const EXCISION_GENUS_RANGE: std::ops::RangeInclusive<u32> = 1..=8;

fn excision(pair: Option<(u32, u32)>, count: usize, seed: u64) -> Outcome {
    let pairs: Vec<(u32, u32)> = match pair {
        Some(p) => vec![p],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    (
                        rng.random_range(EXCISION_GENUS_RANGE),
                        rng.random_range(EXCISION_GENUS_RANGE),
                    )
                })
                .collect()
        }
    };
    let rows = pairs
        .iter()
        .map(|&(g1, g2)| excision_counterexample(g1, g2).map(|r| to_value(&r)))
        .collect::<Result<_, _>>()?;
    Ok(Records(rows))
}

fn presentation(source: &RepSource) -> Result<SurfacePresentation, Failure> {
    Ok(make_presentation(source.surface)?)
}

fn sample_rep(source: &RepSource, seed: u64, num: &Numerics) -> Result<Representation, Failure> {
    Ok(sample_flat_with(&presentation(source)?, source.n, seed, &num.flow())?)
}

fn read_rep(path: &Path) -> Result<Representation, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::precondition(format!("{}: not a representation: {e}", path.display())))
}

fn load_or_sample(source: &RepSource, input: Option<&Path>, num: &Numerics) -> Result<Representation, Failure> {
    match input {
        Some(p) => read_rep(p),
        None => sample_rep(source, source.seed, num),
    }
}

fn obstruction_value(rho: &Representation) -> Value {
    if rho.presentation().is_orientable() {
        return Value::Null;
    }
    obstruction(rho).map_or(Value::Null, Value::from)
}

fn flow(source: &RepSource, num: &Numerics, include_rep: bool) -> Outcome {
    let start = Representation::haar(presentation(source)?, source.n, source.seed);
    let mut progress = |it: usize, e: f64| {
        if it.is_multiple_of(PROGRESS_EVERY) {
            eprintln!("flow: iteration {it} energy {e:.6e}");
        }
    };
    let record = |rho: &Representation, report: &defk_core::FlowReport, converged: bool| {
        let mut v = json!({
            "surface": source.surface.to_string(),
            "n": source.n,
            "seed": source.seed,
            "converged": converged,
            "iterations": report.iterations,
            "initial_energy": report.energy_trace[0],
            "final_residual": report.final_residual,
            "monotone": report.is_monotone(),
            "obstruction": obstruction_value(rho),
        });
        if include_rep {
            v["representation"] = to_value(rho);
        }
        v
    };
    match flow_to_flat_with(&start, &num.flow(), Some(&mut progress)) {
        Ok((rho, report)) => Ok(Records::one(record(&rho, &report, true))),
        Err(Error::RepNotConverged(f)) => Err(Failure {
            code: EXIT_NON_CONVERGENCE,
            message: format!(
                "flow did not converge: residual {:e} after {} iterations",
                f.report.final_residual, f.report.iterations
            ),
            partial: Some(Records::one(record(&f.best, &f.report, false))),
        }),
        Err(e) => Err(e.into()),
    }
}

fn sample(source: &RepSource, count: u64, num: &Numerics, include_rep: bool) -> Outcome {
    let p = presentation(source)?;
    let opts = num.flow();
    let seeds: Vec<u64> = (0..count).map(|i| source.seed + i).collect();
    let results: Vec<Result<Representation, Error>> = seeds
        .par_iter()
        .map(|&s| sample_flat_with(&p, source.n, s, &opts))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (seed, r) in seeds.iter().zip(results) {
        let rho = r?;
        let mut v = json!({
            "surface": source.surface.to_string(),
            "n": source.n,
            "seed": seed,
            "residual": rho.residual(),
            "obstruction": obstruction_value(&rho),
        });
        if include_rep {
            v["representation"] = to_value(&rho);
        }
        rows.push(v);
    }
    Ok(Records(rows))
}

fn connect(
    start: &Representation,
    end: &Representation,
    waypoints: usize,
    opts: &ConnectOptions,
    include_path: bool,
) -> Outcome {
    let record = |path: &defk_core::RepPath, connected: bool| {
        let signs: Vec<Value> = path.waypoints.iter().map(obstruction_value).collect();
        let constant = if start.presentation().is_orientable() {
            Value::Null
        } else {
            Value::from(signs.windows(2).all(|w| w[0] == w[1]) && !signs[0].is_null())
        };
        let mut v = json!({
            "surface": start.presentation().kind().to_string(),
            "n": start.rank(),
            "connected": connected,
            "waypoints": path.waypoints.len(),
            "max_residual": path.max_residual,
            "max_step": path.max_step,
            "obstruction_constant": constant,
            "residuals": path.residuals,
            "steps": path.steps,
        });
        if include_path {
            v["path"] = to_value(&path.waypoints);
        }
        v
    };
    match connect_flat_with(start, end, waypoints, opts) {
        Ok(path) => Ok(Records::one(record(&path, true))),
        Err(Error::RefinementExhausted(path)) => Err(Failure {
            code: EXIT_NON_CONVERGENCE,
            message: format!(
                "path refinement exhausted (max residual {:e}, max step {:e})",
                path.max_residual, path.max_step
            ),
            partial: Some(Records::one(record(&path, false))),
        }),
        Err(e) => Err(e.into()),
    }
}

fn holonomy_roundtrip(source: &RepSource, level: u32, num: &Numerics) -> Outcome {
    let rho = sample_rep(source, source.seed, num)?;
    let complex = Arc::new(build_complex(rho.presentation(), level));
    let a = flat_from_rep(&rho, complex.clone())?;
    let back = holonomy_rep(&a);
    Ok(Records::one(json!({
        "max_entry_error": back.max_entry_diff(&rho),
        "surface": source.surface.to_string(),
        "n": source.n,
        "seed": source.seed,
        "level": level,
        "vertices": complex.vertex_count(),
        "edges": complex.edge_count(),
        "faces": complex.face_count(),
        "sample_residual": rho.residual(),
        "plaquette_defect": max_plaquette_defect(&a),
    })))
}

fn word_name(p: &SurfacePresentation, w: &Word) -> String {
    let parts: Vec<String> = w
        .letters()
        .iter()
        .map(|l| {
            let name = p.generator_name(l.generator);
            if l.inverted {
                format!("{name}^-1")
            } else {
                name
            }
        })
        .collect();
    parts.join(" ")
}
