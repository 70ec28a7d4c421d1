use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ldsforge_core::codebook::{self, CodebookSet, Constellation, LdsMatrix};
use ldsforge_core::detector::{Combine, DetectionProblem, MapDetector, MpaDetector};
use ldsforge_core::eisenstein::list_rings;
use ldsforge_core::io::{self, Loaded};
use ldsforge_core::metrics::{self, Tolerances};
use ldsforge_core::search::{SearchConfig, Searcher};
use ldsforge_core::sim::{self, SimConfig};
use ldsforge_core::{FactorGraph, LdsError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Command, Output, Source};

/// 1 for bad input, 2 for environment failures.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<LdsError>() {
            return if err.is_validation() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Rings { max_radius_sq } => rings(max_radius_sq),
        Command::Builtin { name, output } => builtin(&name, &output),
        Command::Construct {
            graph,
            rings_sq,
            budget,
            seed,
            constellation,
            refine_rounds,
            cap,
            output,
        } => {
            let graph = load_graph(&graph)?;
            let mut cfg =
                SearchConfig::new(graph, rings_sq, Constellation::by_name(&constellation)?);
            cfg.budget = budget;
            cfg.seed = seed;
            cfg.refine_rounds = refine_rounds;
            cfg.cap = cap;
            construct(cfg, &constellation, &output)
        }
        Command::Analyze {
            source,
            constellation,
            eps,
            cap,
            output,
        } => analyze(&source, &constellation, tolerances(eps)?, cap, &output),
        Command::Bound {
            source,
            constellation,
            ebno,
            eps,
            cap,
            output,
        } => bound(
            &source,
            &constellation,
            &ebno,
            tolerances(eps)?,
            cap,
            &output,
        ),
        Command::Simulate {
            source,
            constellation,
            channel,
            ebno,
            iters,
            max_log,
            min_errors,
            max_blocks,
            seed,
            output,
        } => {
            let c = Constellation::by_name(&constellation)?;
            let books = load_books(&source, &c)?;
            let mut cfg = SimConfig::new(books, &c, channel.parse()?, parse_grid(&ebno)?);
            cfg.mpa_iters = iters;
            cfg.combine = combine(max_log);
            cfg.min_errors = min_errors;
            cfg.max_blocks = max_blocks;
            cfg.seed = seed;
            simulate(&source, &constellation, cfg, &output)
        }
        Command::Detect {
            source,
            constellation,
            problem,
            iters,
            max_log,
            cap,
            output,
        } => detect(
            &source,
            &constellation,
            &problem,
            iters,
            combine(max_log),
            cap,
            &output,
        ),
    }
}

fn combine(max_log: bool) -> Combine {
    if max_log {
        Combine::MaxLog
    } else {
        Combine::Exact
    }
}

fn tolerances(eps: Option<f64>) -> Result<Tolerances> {
    let mut t = Tolerances::default();
    if let Some(eps) = eps {
        if eps.is_nan() || eps <= 0.0 {
            return Err(LdsError::Config(format!("--eps must be positive, got {eps}")).into());
        }
        t.coord_eps = eps;
    }
    Ok(t)
}

/// Parses `start:stop:step` (inclusive) or a single value, in dB.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| LdsError::Config(format!("bad Eb/N0 grid `{text}`")))?;
    let grid = match parts[..] {
        [x] if x.is_finite() => vec![x],
        [a, b, step] if a.is_finite() && b >= a && step > 0.0 && b.is_finite() => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n)
                .map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9)
                .collect()
        }
        _ => {
            return Err(LdsError::Config(format!(
                "bad Eb/N0 grid `{text}` (expected start:stop:step with stop ≥ start, step > 0)"
            ))
            .into())
        }
    };
    Ok(grid)
}

fn load_graph(name: &str) -> Result<FactorGraph> {
    let g = if name == "paper" {
        FactorGraph::standard_4x6()
    } else {
        io::load_graph(Path::new(name))?
    };
    Ok(g)
}

enum Input {
    Lds(LdsMatrix),
    Books(CodebookSet),
}

fn load_source(source: &Source) -> Result<Input> {
    if let Some(p) = &source.lds {
        Ok(Input::Lds(io::load_lds(p)?))
    } else if let Some(p) = &source.codebooks {
        match io::load(p)? {
            Loaded::Codebooks(b) => Ok(Input::Books(b)),
            Loaded::Lds(_) => bail!(LdsError::Config(format!(
                "{} is an LDS file; pass it with --lds",
                p.display()
            ))),
        }
    } else {
        unreachable!("clap requires one source")
    }
}

fn load_books(source: &Source, c: &Constellation) -> Result<CodebookSet> {
    let books = match load_source(source)? {
        Input::Lds(s) => codebook::expand(&s, c),
        Input::Books(b) => {
            if b.order() != c.order() {
                bail!(LdsError::Dimension(format!(
                    "codebooks have M = {}, constellation has {} points",
                    b.order(),
                    c.order()
                )));
            }
            b
        }
    };
    Ok(books)
}

fn source_json(source: &Source) -> serde_json::Value {
    json!({
        "lds": source.lds.as_ref().map(|p| p.display().to_string()),
        "codebooks": source.codebooks.as_ref().map(|p| p.display().to_string()),
    })
}

/// Writes to `--out`, or standard output when no file is given.
fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => io::write(path, text, output.force)?,
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing to standard output")?,
    }
    Ok(())
}

fn required_out(output: &Output) -> Result<&Path> {
    output
        .out
        .as_deref()
        .ok_or_else(|| LdsError::Config("--out is required for this command".into()).into())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(Default::default, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn check_free(paths: &[&Path], force: bool) -> Result<()> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            bail!(LdsError::Config(format!(
                "{} already exists (use --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn rings(max_radius_sq: u64) -> Result<()> {
    if max_radius_sq == 0 {
        bail!(LdsError::Config(
            "--max-radius-sq must be at least 1".into()
        ));
    }
    let mut out = String::from("radius_sq\tradius\tcount\tpoints\n");
    for ring in list_rings(max_radius_sq) {
        let points: Vec<String> = ring
            .points
            .iter()
            .map(|p| {
                let z = p.to_complex();
                format!("({},{})={:+.6}{:+.6}i", p.a, p.b, z.re, z.im)
            })
            .collect();
        writeln!(
            out,
            "{}\t{:.6}\t{}\t{}",
            ring.radius_sq,
            ring.radius(),
            ring.len(),
            points.join(" ")
        )?;
    }
    emit(
        &Output {
            out: None,
            force: false,
        },
        &out,
    )
}

fn builtin(name: &str, output: &Output) -> Result<()> {
    let s = codebook::builtin(name)?;
    emit(output, &io::lds_to_json(&s))
}

fn construct(cfg: SearchConfig, constellation: &str, output: &Output) -> Result<()> {
    let out = required_out(output)?;
    let trace_path = sibling(out, ".trace.csv");
    let config_path = sibling(out, ".config.json");
    check_free(&[out, &trace_path, &config_path], output.force)?;

    let searcher = Searcher::new(cfg)?;
    let result = searcher.run();

    let mut trace = String::from("candidate,mpds\n");
    for t in &result.trace {
        writeln!(trace, "{},{}", t.candidate, t.mpds)?;
    }
    let sidecar = json!({
        "command": "construct",
        "graph": searcher.config().graph,
        "constellation": constellation,
        "search": searcher.config(),
        "best_index": result.best_index,
        "best_mpds": result.best_mpds,
    });
    io::write(out, &io::lds_to_json(&result.best.matrix), true)?;
    io::write(&trace_path, &trace, true)?;
    io::write(&config_path, &pretty(&sidecar), true)?;
    eprintln!(
        "best MPDS {:.6} (candidate {}), wrote {}",
        result.best_mpds,
        result.best_index,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    #[serde(flatten)]
    metrics: metrics::MetricsReport,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "J")]
    j: usize,
    #[serde(rename = "M")]
    m: usize,
    d_v: usize,
    /// Per-user energy: `‖s_j‖²` for LDS input, mean codeword energy for
    /// external codebooks.
    energy_distribution: Vec<f64>,
    energy_total: f64,
    power_balanced: bool,
    rows_power_imbalanced: bool,
    violations: Vec<String>,
    tolerances: Tolerances,
}

fn analyze(
    source: &Source,
    constellation: &str,
    tol: Tolerances,
    cap: u64,
    output: &Output,
) -> Result<()> {
    let c = Constellation::by_name(constellation)?;
    let (books, graph, energy, balanced, imbalanced) = match load_source(source)? {
        Input::Lds(s) => (
            codebook::expand(&s, &c),
            s.graph().clone(),
            s.energy_distribution(),
            s.is_power_balanced(1e-9),
            s.rows_power_imbalanced(1e-6),
        ),
        Input::Books(b) => {
            let g = b.factor_graph();
            let e: Vec<f64> = b.books().iter().map(|x| x.average_energy()).collect();
            let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = e.iter().copied().fold(0.0, f64::max);
            (b, g, e, hi - lo <= 1e-9 * hi, false)
        }
    };
    let set = metrics::enumerate_superimposed(&books, cap)?;
    let report = AnalyzeReport {
        metrics: metrics::mpds_with(&set, tol),
        k: books.resources(),
        j: books.users(),
        m: books.order(),
        d_v: graph.d_v,
        energy_total: energy.iter().sum(),
        energy_distribution: energy,
        power_balanced: balanced,
        rows_power_imbalanced: imbalanced,
        violations: graph.validate().iter().map(ToString::to_string).collect(),
        tolerances: tol,
    };
    emit(output, &pretty(&report))
}

fn bound(
    source: &Source,
    constellation: &str,
    ebno: &str,
    tol: Tolerances,
    cap: u64,
    output: &Output,
) -> Result<()> {
    let c = Constellation::by_name(constellation)?;
    let grid = parse_grid(ebno)?;
    let books = load_books(source, &c)?;
    let eb = books.energy_per_bit();
    let n0s: Vec<f64> = grid.iter().map(|&db| sim::n0_from_ebno(db, eb)).collect();
    let set = metrics::enumerate_superimposed(&books, cap)?;
    let values = metrics::aber_union_bound_curve(&set, c.labels(), &n0s, tol.coord_eps)?;
    let mut csv = String::from("ebno_db,bound\n");
    for (db, v) in grid.iter().zip(&values) {
        writeln!(csv, "{db},{v}")?;
    }
    emit(output, &csv)
}

fn simulate(source: &Source, constellation: &str, cfg: SimConfig, output: &Output) -> Result<()> {
    let out = required_out(output)?;
    let config_path = sibling(out, ".config.json");
    check_free(&[out, &config_path], output.force)?;
    let curve = sim::simulate(&cfg)?;
    let sidecar = json!({
        "command": "simulate",
        "source": source_json(source),
        "constellation": constellation,
        "channel": cfg.channel,
        "ebno_grid_db": cfg.ebno_grid_db,
        "energy_per_bit": cfg.energy_per_bit,
        "mpa_iters": cfg.mpa_iters,
        "combine": cfg.combine,
        "min_errors": cfg.min_errors,
        "max_blocks": cfg.max_blocks,
        "seed": cfg.seed,
    });
    io::write(out, &curve.to_csv(), true)?;
    io::write(&config_path, &pretty(&sidecar), true)?;
    Ok(())
}

#[derive(Deserialize)]
struct ProblemFile {
    y: Vec<[f64; 2]>,
    h: Vec<[f64; 2]>,
    n0: f64,
}

fn detect(
    source: &Source,
    constellation: &str,
    problem: &Path,
    iters: usize,
    combine: Combine,
    cap: u64,
    output: &Output,
) -> Result<()> {
    let c = Constellation::by_name(constellation)?;
    let books = load_books(source, &c)?;
    let text = std::fs::read_to_string(problem).map_err(|source| LdsError::Io {
        path: problem.to_owned(),
        source,
    })?;
    let file: ProblemFile = serde_json::from_str(&text).map_err(|source| LdsError::Json {
        path: problem.to_owned(),
        source,
    })?;
    let to_c = |v: &[[f64; 2]]| v.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let p = DetectionProblem {
        y: to_c(&file.y),
        h: to_c(&file.h),
        n0: file.n0,
    };
    let post = MpaDetector::with_combine(&books, combine)?.detect(&p, iters)?;
    let map = MapDetector::new(&books, cap)?.detect(&p)?;
    let report = json!({
        "posteriors": post.probs,
        "decisions": post.decisions,
        "bits": post.bits(c.labels()),
        "map_decisions": map,
        "iters": iters,
        "combine": combine,
    });
    emit(output, &pretty(&report))
}
