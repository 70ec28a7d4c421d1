//! Acceptance suite. Runs the `ldsforge` binary end to end and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ldsforge_core::codebook::{builtin_s1, expand, Constellation, LdsMatrix};
use ldsforge_core::detector::{DetectionProblem, MapDetector, MpaDetector, MpaWorkspace};
use ldsforge_core::eisenstein::{enumerate_ring, list_rings};
use ldsforge_core::metrics::{aber_union_bound, DEFAULT_CAP};
use ldsforge_core::sim::{complex_normal, n0_from_ebno};
use ldsforge_core::FactorGraph;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const MPDS_S1: f64 = 0.0144;
const MPDS_S2: f64 = 0.0091;
const MPDS_TOL: f64 = 5e-4;
const S1_ENERGIES: [f64; 6] = [2.1818, 1.6364, 1.0909, 2.1818, 2.7273, 2.1818];
const ENERGY_TOL: f64 = 1e-3;
const ENERGY_SUM_TOL: f64 = 1e-6;
const ANALYZE_LIMIT: Duration = Duration::from_secs(60);
const REL_TOL: f64 = 1e-12;
const GAP_RANGE: (f64, f64) = (0.25, 1.75);
const TARGET_BER: f64 = 1e-4;
const MARGINAL_TOL: f64 = 1e-9;
const AGREEMENT: f64 = 0.99;
const SEED: &str = "2024";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Ctx) -> Outcome);

struct Ctx {
    dir: tempfile::TempDir,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> std::process::Output {
        Command::new(env!("CARGO_BIN_EXE_ldsforge"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("LDSFORGE_WORKERS")
            .output()
            .expect("binary runs")
    }

    /// Runs and returns standard output, failing on a non-zero exit.
    fn ok(&self, args: &[&str]) -> Result<String, String> {
        let out = self.run(args);
        if !out.status.success() {
            return Err(format!(
                "`ldsforge {}` exited {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(String::from_utf8(out.stdout).expect("utf-8 output"))
    }

    fn builtin(&self, name: &str) -> String {
        let file = format!("{name}.json");
        if !self.path(&file).exists() {
            self.ok(&["builtin", name, "--out", &file])
                .expect("builtin writes");
        }
        file
    }
}

fn analyze(ctx: &Ctx, name: &str) -> Result<(Value, Duration), String> {
    let file = ctx.builtin(name);
    let start = Instant::now();
    let text = ctx.ok(&["analyze", "--lds", &file])?;
    let took = start.elapsed();
    let json = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((json, took))
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("`{key}` is numeric"))
}

#[derive(Debug, Clone, Copy)]
struct Row {
    ebno_db: f64,
    ber: f64,
    ci95: f64,
}

fn read_ber_csv(path: &Path) -> Vec<Row> {
    let text = fs::read_to_string(path).expect("curve written");
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("ebno_db,blocks,bits,bit_errors,ber,ci95")
    );
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            Row {
                ebno_db: f[0],
                ber: f[4],
                ci95: f[5],
            }
        })
        .collect()
}

fn read_bound_csv(text: &str) -> Vec<(f64, f64)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ebno_db,bound"));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

/// Eb/N0 where the curve first crosses `target`, interpolating log10(BER)
/// linearly in dB between neighbouring grid points.
fn crossing(rows: &[Row], target: f64) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.ber >= target && b.ber <= target && b.ber > 0.0 {
            if a.ber == b.ber {
                return Some(a.ebno_db);
            }
            let t = (a.ber.log10() - target.log10()) / (a.ber.log10() - b.ber.log10());
            Some(a.ebno_db + t * (b.ebno_db - a.ebno_db))
        } else {
            None
        }
    })
}

fn simulate(ctx: &Ctx, name: &str, channel: &str, grid: &str) -> Result<Vec<Row>, String> {
    let out = format!("{name}-{channel}-{}.csv", grid.replace(':', "_"));
    if !ctx.path(&out).exists() {
        let file = ctx.builtin(name);
        ctx.ok(&[
            "simulate",
            "--lds",
            &file,
            "--channel",
            channel,
            "--ebno",
            grid,
            "--iters",
            "8",
            "--seed",
            SEED,
            "--out",
            &out,
        ])?;
    }
    Ok(read_ber_csv(&ctx.path(&out)))
}

fn mpds_reproduction(ctx: &Ctx) -> Outcome {
    let mut notes = Vec::new();
    for (name, want) in [("s1", MPDS_S1), ("s2", MPDS_S2)] {
        let (report, took) = analyze(ctx, name)?;
        let got = num(&report, "mpds");
        if (got - want).abs() > MPDS_TOL {
            return Err(format!(
                "{name}: MPDS {got:.6}, expected {want} ± {MPDS_TOL}"
            ));
        }
        if took > ANALYZE_LIMIT {
            return Err(format!("{name}: analyze took {took:.1?}"));
        }
        notes.push(format!("{name} {got:.6} in {took:.2?}"));
    }
    Ok(notes.join(", "))
}

fn energy_distribution(ctx: &Ctx) -> Outcome {
    let (report, _) = analyze(ctx, "s1")?;
    let energies: Vec<f64> = report["energy_distribution"]
        .as_array()
        .ok_or("missing energy_distribution")?
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (j, (got, want)) in energies.iter().zip(S1_ENERGIES).enumerate() {
        if (got - want).abs() > ENERGY_TOL {
            return Err(format!("user {j}: energy {got:.5}, expected {want}"));
        }
    }
    let total: f64 = energies.iter().sum();
    if energies.len() != 6 || (total - 12.0).abs() > ENERGY_SUM_TOL {
        return Err(format!("{} users, total energy {total}", energies.len()));
    }
    Ok(format!("total {total:.9}"))
}

fn diversity_bound(ctx: &Ctx) -> Outcome {
    // values pinned by the exhaustive scan
    let mut notes = Vec::new();
    for (name, frozen) in [("s1", 2), ("s2", 1)] {
        let (report, _) = analyze(ctx, name)?;
        let d = report["diversity_order"]
            .as_u64()
            .ok_or("missing diversity_order")?;
        let d_v = report["d_v"].as_u64().ok_or("missing d_v")?;
        if d > d_v || d != frozen {
            return Err(format!(
                "{name}: diversity {d}, d_v {d_v}, frozen value {frozen}"
            ));
        }
        notes.push(format!("{name} {d}"));
    }
    Ok(notes.join(", "))
}

fn ring_enumeration(_: &Ctx) -> Outcome {
    let mut brute: BTreeMap<u64, Vec<(i64, i64)>> = BTreeMap::new();
    for a in -16i64..=16 {
        for b in -16i64..=16 {
            let n = (a * a - a * b + b * b) as u64;
            if (1..=49).contains(&n) {
                brute.entry(n).or_default().push((a, b));
            }
        }
    }
    for r in 1..=49 {
        let mut got: Vec<_> = enumerate_ring(r)
            .points
            .iter()
            .map(|p| (p.a, p.b))
            .collect();
        got.sort_unstable();
        let want = brute.get(&r).cloned().unwrap_or_default();
        if got != want {
            return Err(format!(
                "radius² {r}: {} points, brute force {}",
                got.len(),
                want.len()
            ));
        }
    }
    let radii: Vec<u64> = list_rings(49).iter().map(|r| r.radius_sq).collect();
    if radii[..4] != [1, 3, 4, 7] {
        return Err(format!("radii begin {:?}", &radii[..4]));
    }
    Ok(format!("{} non-empty rings up to 49", radii.len()))
}

fn double_loop_bound(s: &LdsMatrix, n0: f64) -> f64 {
    let q = Constellation::qpsk();
    let (k, j) = (s.graph().k, s.graph().j);
    let n = 1usize << (2 * j);
    let digit = |i: usize, u: usize| (i >> (2 * (j - 1 - u))) & 3;
    let words: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..k)
                .map(|r| {
                    (0..j)
                        .map(|u| s.entry(r, u) * q.points()[digit(i, u)])
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut parts = vec![0.0f64; n];
    for (x, part) in parts.iter_mut().enumerate() {
        for y in (0..n).filter(|&y| y != x) {
            let bits: u32 = (0..j)
                .map(|u| (q.labels()[digit(x, u)] ^ q.labels()[digit(y, u)]).count_ones())
                .sum();
            let pep = words[x].iter().zip(&words[y]).fold(0.5, |p, (a, b)| {
                let d = (a - b).norm_sqr();
                if d > 1e-6 {
                    p / (1.0 + d / (8.0 * n0))
                } else {
                    p
                }
            });
            *part += bits as f64 * pep;
        }
    }
    // pairwise reduction keeps the rounding error far below the tolerance
    while parts.len() > 1 {
        parts = parts.chunks(2).map(|c| c.iter().sum()).collect();
    }
    parts[0] / (n as f64 * 2.0 * j as f64)
}

fn union_bound(ctx: &Ctx) -> Outcome {
    let g = FactorGraph::new(vec![vec![1]], 1, 1).map_err(|e| e.to_string())?;
    let s = LdsMatrix::new(g, vec![vec![Complex64::new(1.0, 0.0)]]).map_err(|e| e.to_string())?;
    let b = Constellation::bpsk();
    for n0 in [0.1, 0.5, 1.0, 2.0] {
        let got =
            aber_union_bound(&expand(&s, &b), &b, n0, DEFAULT_CAP).map_err(|e| e.to_string())?;
        let want = 0.5 / (1.0 + 1.0 / (2.0 * n0));
        if ((got - want) / want).abs() > REL_TOL {
            return Err(format!("BPSK at N0 = {n0}: {got} vs closed form {want}"));
        }
    }

    let file = ctx.builtin("s1");
    let curve = read_bound_csv(&ctx.ok(&["bound", "--lds", &file, "--ebno", "0:20:5"])?);
    let s1 = builtin_s1();
    let eb = expand(&s1, &Constellation::qpsk()).energy_per_bit();
    let mut worst: f64 = 0.0;
    for (db, got) in curve {
        let want = double_loop_bound(&s1, n0_from_ebno(db, eb));
        worst = worst.max(((got - want) / want).abs());
    }
    if worst > REL_TOL {
        return Err(format!(
            "S1 bound differs from the double-loop oracle by {worst:e} relative"
        ));
    }
    Ok(format!("closed form exact, S1 oracle within {worst:.1e}"))
}

fn rayleigh_gap(ctx: &Ctx) -> Outcome {
    let start = Instant::now();
    let s1 = simulate(ctx, "s1", "rayleigh", "0:20:2")?;
    let s2 = simulate(ctx, "s2", "rayleigh", "0:20:2")?;
    let took = start.elapsed();
    let tail = |r: &[Row]| r.last().map_or(f64::NAN, |r| r.ber);
    match (crossing(&s1, TARGET_BER), crossing(&s2, TARGET_BER)) {
        (Some(a), Some(b)) => {
            let gap = b - a;
            if (GAP_RANGE.0..=GAP_RANGE.1).contains(&gap) {
                Ok(format!("gap {gap:.2} dB ({a:.2} vs {b:.2}) in {took:.0?}"))
            } else {
                Err(format!(
                    "gap {gap:.2} dB ({a:.2} vs {b:.2}), expected {GAP_RANGE:?}"
                ))
            }
        }
        _ => Err(format!(
            "BER {TARGET_BER:e} not reached on 0:20:2 (BER at 20 dB: S1 {:.3e}, S2 {:.3e})",
            tail(&s1),
            tail(&s2)
        )),
    }
}

fn awgn_ordering(ctx: &Ctx) -> Outcome {
    let s1 = simulate(ctx, "s1", "awgn", "0:16:2")?;
    let s2 = simulate(ctx, "s2", "awgn", "0:16:2")?;
    let mut notes = Vec::new();
    for i in s1.len() - 2..s1.len() {
        let (a, b) = (s1[i], s2[i]);
        let separated = a.ber + a.ci95 < b.ber - b.ci95;
        notes.push(format!(
            "{} dB: {:.3e}±{:.1e} vs {:.3e}±{:.1e}",
            a.ebno_db, a.ber, a.ci95, b.ber, b.ci95
        ));
        if !separated {
            return Err(format!(
                "S1 not below S2 beyond the 95% intervals; {}",
                notes.join("; ")
            ));
        }
    }
    Ok(notes.join("; "))
}

fn bound_dominates(ctx: &Ctx) -> Outcome {
    let mut checked = 0;
    for name in ["s1", "s2"] {
        let rows = simulate(ctx, name, "rayleigh", "0:20:2")?;
        let file = ctx.builtin(name);
        let bound = read_bound_csv(&ctx.ok(&["bound", "--lds", &file, "--ebno", "0:20:2"])?);
        for (r, (db, b)) in rows.iter().zip(bound) {
            assert_eq!(r.ebno_db, db);
            if db >= 8.0 {
                if r.ber > b + r.ci95 {
                    return Err(format!(
                        "{name} at {db} dB: BER {:.3e} above bound {b:.3e}",
                        r.ber
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} points at ≥ 8 dB"))
}

/// Exact per-user marginals by summing the likelihood over every tuple.
fn brute_marginals(books: &[Vec<Complex64>], y: Complex64, h: Complex64, n0: f64) -> Vec<Vec<f64>> {
    let (j, m) = (books.len(), books[0].len());
    let mut post = vec![vec![0.0; m]; j];
    for idx in 0..m.pow(j as u32) {
        let digits: Vec<usize> = (0..j).map(|u| idx / m.pow(u as u32) % m).collect();
        let x: Complex64 = digits.iter().enumerate().map(|(u, &d)| books[u][d]).sum();
        let w = (-(y - h * x).norm_sqr() / n0).exp();
        for (u, &d) in digits.iter().enumerate() {
            post[u][d] += w;
        }
    }
    for row in &mut post {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    post
}

fn detector_correctness(ctx: &Ctx) -> Outcome {
    // K = 1 with three users: a single factor node, so the graph is a tree
    let s = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.3, 0.6),
        Complex64::new(-0.5, 0.2),
    ];
    let lds = serde_json::json!({
        "K": 1, "J": 3, "d_v": 1, "d_c": 3, "incidence": [[1, 1, 1]],
        "S": [s.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()],
    });
    fs::write(ctx.path("tree.json"), lds.to_string()).map_err(|e| e.to_string())?;
    let (y, h, n0) = (Complex64::new(0.4, -0.9), Complex64::new(0.8, 0.3), 0.7);
    let problem = serde_json::json!({ "y": [[y.re, y.im]], "h": [[h.re, h.im]], "n0": n0 });
    fs::write(ctx.path("tree-problem.json"), problem.to_string()).map_err(|e| e.to_string())?;
    let out: Value = serde_json::from_str(&ctx.ok(&[
        "detect",
        "--lds",
        "tree.json",
        "--problem",
        "tree-problem.json",
        "--iters",
        "4",
    ])?)
    .map_err(|e| e.to_string())?;

    let q = Constellation::qpsk();
    let books: Vec<Vec<Complex64>> = s
        .iter()
        .map(|&e| q.points().iter().map(|p| e * p).collect())
        .collect();
    let want = brute_marginals(&books, y, h, n0);
    let got = out["posteriors"].as_array().ok_or("missing posteriors")?;
    let mut worst: f64 = 0.0;
    for (g, w) in got.iter().zip(&want) {
        for (g, w) in g.as_array().unwrap().iter().zip(w) {
            worst = worst.max((g.as_f64().unwrap() - w).abs());
        }
    }
    if worst >= MARGINAL_TOL {
        return Err(format!("tree posteriors off by {worst:e}"));
    }

    let books = expand(&builtin_s1(), &q);
    let map = MapDetector::new(&books, DEFAULT_CAP).map_err(|e| e.to_string())?;
    let mpa = MpaDetector::new(&books).map_err(|e| e.to_string())?;
    let n0 = n0_from_ebno(12.0, books.energy_per_bit());
    let ones = vec![Complex64::new(1.0, 0.0); 4];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ws = MpaWorkspace::default();
    let blocks = 10_000;
    let mut agree = 0;
    for _ in 0..blocks {
        let tx: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
        let y: Vec<Complex64> = (0..4)
            .map(|k| {
                let x: Complex64 = books
                    .books()
                    .iter()
                    .zip(&tx)
                    .map(|(b, &m)| b.chip(k, m))
                    .sum();
                x + complex_normal(&mut rng, n0)
            })
            .collect();
        let p = DetectionProblem {
            y,
            h: ones.clone(),
            n0,
        };
        let joint = map.detect(&p).map_err(|e| e.to_string())?;
        if mpa.run(&p.y, &p.h, n0, 8, &mut ws) == joint.as_slice() {
            agree += 1;
        }
    }
    let rate = agree as f64 / blocks as f64;
    if rate < AGREEMENT {
        return Err(format!(
            "MPA agrees with MAP on {:.2}% of blocks",
            100.0 * rate
        ));
    }
    Ok(format!(
        "tree error {worst:.1e}, MPA/MAP agreement {:.2}%",
        100.0 * rate
    ))
}

fn determinism(ctx: &Ctx) -> Outcome {
    ctx.builtin("s1");
    fs::write(
        ctx.path("det-problem.json"),
        r#"{"y":[[0.3,-1.2],[1.1,0.4],[-0.7,0.9],[0.2,0.2]],"h":[[1,0],[0.6,-0.8],[0.1,1.3],[-0.9,0.4]],"n0":0.2}"#,
    )
    .map_err(|e| e.to_string())?;

    // (arguments, files written besides standard output)
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["rings", "--max-radius-sq", "49"], vec![]),
        (vec!["builtin", "s2", "--out", "OUT.json"], vec!["OUT.json"]),
        (
            vec![
                "construct",
                "--budget",
                "400",
                "--seed",
                "7",
                "--refine-rounds",
                "1",
                "--out",
                "OUT.json",
            ],
            vec!["OUT.json", "OUT.trace.csv", "OUT.config.json"],
        ),
        (
            vec!["analyze", "--lds", "s1.json", "--out", "OUT.json"],
            vec!["OUT.json"],
        ),
        (
            vec![
                "bound", "--lds", "s1.json", "--ebno", "0:20:2", "--out", "OUT.csv",
            ],
            vec!["OUT.csv"],
        ),
        (
            vec![
                "simulate",
                "--lds",
                "s1.json",
                "--channel",
                "rayleigh",
                "--ebno",
                "0:8:4",
                "--min-errors",
                "100",
                "--seed",
                "5",
                "--out",
                "OUT.csv",
            ],
            vec!["OUT.csv", "OUT.config.json"],
        ),
        (
            vec![
                "detect",
                "--lds",
                "s1.json",
                "--problem",
                "det-problem.json",
            ],
            vec![],
        ),
    ];

    for (c, (args, files)) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for (workers, rep) in [("1", 0), ("8", 0), ("8", 1)] {
            let tag = format!("c{c}w{workers}r{rep}");
            let rename = |s: &str| s.replace("OUT", &tag);
            let mut argv: Vec<String> = vec!["--workers".into(), workers.into()];
            argv.extend(args.iter().map(|a| rename(a)));
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            let mut bytes = vec![ctx.ok(&argv)?.into_bytes()];
            for f in files {
                bytes.push(fs::read(ctx.path(&rename(f))).map_err(|e| e.to_string())?);
            }
            runs.push(bytes);
        }
        if runs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("`{}` output differs between runs", args[0]));
        }
    }
    Ok(format!(
        "{} commands byte-identical at 1 and 8 workers",
        commands.len()
    ))
}

fn main() {
    let ctx = Ctx {
        dir: tempfile::tempdir().expect("temp dir"),
    };
    let criteria: [Criterion; 10] = [
        ("MPDS reproduction", mpds_reproduction),
        ("S1 energy distribution", energy_distribution),
        ("diversity order", diversity_bound),
        ("ring enumeration", ring_enumeration),
        ("union bound", union_bound),
        ("Rayleigh S1/S2 gap at BER 1e-4", rayleigh_gap),
        ("AWGN high-SNR ordering", awgn_ordering),
        ("bound dominates Rayleigh simulation", bound_dominates),
        ("detector correctness", detector_correctness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check(&ctx);
        let took = start.elapsed();
        match outcome {
            Ok(note) => println!("criterion {:>2} PASS  {name}: {note} [{took:.1?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{took:.1?}]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
