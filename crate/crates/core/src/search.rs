//! Randomized construction of power-imbalanced LDS.
//!
//! 1. Pick `d_c` lattice rings with strictly increasing radii.
//! 2. In every row, give each active user a different ring and a point of
//!    that ring, so the users sharing a resource all get distinct powers.
//! 3. Normalize to `‖S‖²_F = d_v·J`.
//!
//! Candidates are scored by MPDS under the chosen constellation and the best
//! one is kept. Candidate `i` is generated from its own ChaCha stream keyed
//! by `(seed, i)`, so the result does not depend on evaluation order or on
//! the number of threads. Per-user energy is left unconstrained.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codebook::{Constellation, LdsMatrix};
use crate::eisenstein::{enumerate_ring, EisensteinInt, Ring};
use crate::error::{LdsError, Result};
use crate::graph::FactorGraph;
use crate::metrics::{check_cap, MpdsScorer, Tolerances, DEFAULT_CAP};
use crate::par;

/// Upper bound on difference tuples per scored candidate.
const MAX_SCORER_WORK: u128 = 1 << 28;

#[derive(Clone, Debug, Serialize)]
pub struct SearchConfig {
    #[serde(skip)]
    pub graph: FactorGraph,
    /// Squared ring radii, one per active user of a resource, ascending.
    pub ring_radii_sq: Vec<u64>,
    #[serde(skip)]
    pub constellation: Constellation,
    /// Number of random candidates.
    pub budget: u64,
    pub seed: u64,
    pub cap: u64,
    /// Rounds of best-improvement single-entry refinement after the random
    /// phase; 0 disables it.
    pub refine_rounds: u32,
    pub coord_eps: f64,
}

impl SearchConfig {
    pub fn new(graph: FactorGraph, ring_radii_sq: Vec<u64>, constellation: Constellation) -> Self {
        Self {
            graph,
            ring_radii_sq,
            constellation,
            budget: 10_000,
            seed: 0,
            cap: DEFAULT_CAP,
            refine_rounds: 0,
            coord_eps: Tolerances::default().coord_eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// Pre-normalization lattice points, `None` off the support.
    pub lattice: Vec<Vec<Option<EisensteinInt>>>,
    /// Normalized signature matrix.
    pub matrix: LdsMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub candidate: u64,
    pub mpds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best: Candidate,
    pub best_mpds: f64,
    pub best_index: u64,
    /// Every strict improvement of the best-so-far, in candidate order.
    pub trace: Vec<TraceEntry>,
}

/// Validated search state: rings and the MPDS scorer.
#[derive(Debug)]
pub struct Searcher {
    cfg: SearchConfig,
    rings: Vec<Ring>,
    scorer: MpdsScorer,
}

impl Searcher {
    pub fn new(cfg: SearchConfig) -> Result<Self> {
        cfg.graph.check_shape()?;
        cfg.graph.require_regular()?;
        let d_c = cfg.graph.d_c;
        if cfg.ring_radii_sq.len() != d_c {
            return Err(LdsError::Config(format!(
                "{} ring radii given, d_c = {d_c}",
                cfg.ring_radii_sq.len()
            )));
        }
        if cfg.ring_radii_sq.windows(2).any(|w| w[0] >= w[1]) || cfg.ring_radii_sq[0] == 0 {
            return Err(LdsError::Config(
                "ring radii must be positive and strictly ascending".into(),
            ));
        }
        if cfg.budget == 0 {
            return Err(LdsError::Config("budget must be at least 1".into()));
        }
        check_cap(cfg.constellation.order(), cfg.graph.j, cfg.cap)?;
        let rings = cfg
            .ring_radii_sq
            .iter()
            .map(|&r| {
                let ring = enumerate_ring(r);
                if ring.is_empty() {
                    Err(LdsError::EmptyRing(r))
                } else {
                    Ok(ring)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let scorer = MpdsScorer::new(&cfg.graph, &cfg.constellation, cfg.coord_eps);
        if scorer.work() > MAX_SCORER_WORK {
            return Err(LdsError::Config(format!(
                "{} difference tuples per candidate is too many to search",
                scorer.work()
            )));
        }
        Ok(Self { cfg, rings, scorer })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        rng
    }

    /// Candidate number `index`: per row, a uniformly random assignment of
    /// active users to rings, then a uniform point from each ring.
    pub fn candidate(&self, index: u64) -> Candidate {
        let g = &self.cfg.graph;
        let mut rng = self.rng(index);
        let mut lattice = vec![vec![None; g.j]; g.k];
        let mut order: Vec<usize> = (0..g.d_c).collect();
        for (k, row) in lattice.iter_mut().enumerate() {
            order.shuffle(&mut rng);
            let users = g.active_users(k).expect("k in range");
            for (&u, &r) in users.iter().zip(&order) {
                let ring = &self.rings[r];
                row[u] = Some(ring.points[rng.random_range(0..ring.len())]);
            }
        }
        self.materialize(lattice)
    }

    fn materialize(&self, lattice: Vec<Vec<Option<EisensteinInt>>>) -> Candidate {
        let entries = lattice
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| p.map_or(num_complex::Complex64::ZERO, EisensteinInt::to_complex))
                    .collect()
            })
            .collect();
        let matrix = LdsMatrix::new(self.cfg.graph.clone(), entries)
            .and_then(|s| s.normalize())
            .expect("candidate matches the graph support");
        Candidate { lattice, matrix }
    }

    /// MPDS of a matrix under the configured constellation.
    pub fn score(&self, s: &LdsMatrix) -> f64 {
        self.scorer.score(s).0
    }

    /// Candidates differing from `c` in one entry, replaced by another point
    /// of the same ring; row-major over entries, ring order within.
    fn neighbours(&self, c: &Candidate) -> Vec<Vec<Vec<Option<EisensteinInt>>>> {
        let mut out = Vec::new();
        for (k, row) in c.lattice.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                let Some(p) = *p else { continue };
                let ring = self
                    .rings
                    .iter()
                    .find(|r| r.radius_sq == p.norm())
                    .expect("entry lies on a configured ring");
                for &q in ring.points.iter().filter(|&&q| q != p) {
                    let mut l = c.lattice.clone();
                    l[k][j] = Some(q);
                    out.push(l);
                }
            }
        }
        out
    }

    pub fn run(&self) -> SearchResult {
        let budget = self.cfg.budget;
        let scores: Vec<f64> = par::map_range(budget as usize, |i| {
            self.score(&self.candidate(i as u64).matrix)
        });

        let mut trace = Vec::new();
        let mut best_index = 0;
        let mut best_mpds = f64::NEG_INFINITY;
        for (i, &s) in scores.iter().enumerate() {
            if s > best_mpds {
                best_mpds = s;
                best_index = i as u64;
                trace.push(TraceEntry {
                    candidate: i as u64,
                    mpds: s,
                });
            }
        }
        let mut best = self.candidate(best_index);

        let mut next_index = budget;
        for _ in 0..self.cfg.refine_rounds {
            let moves = self.neighbours(&best);
            let scores = par::map_range(moves.len(), |n| {
                self.score(&self.materialize(moves[n].clone()).matrix)
            });
            let (arg, &top) =
                scores
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |acc, (i, s)| {
                        if *s > *acc.1 {
                            (i, s)
                        } else {
                            acc
                        }
                    });
            if top <= best_mpds || top.is_nan() {
                break;
            }
            best_mpds = top;
            best_index = next_index + arg as u64;
            best = self.materialize(moves[arg].clone());
            trace.push(TraceEntry {
                candidate: best_index,
                mpds: top,
            });
            next_index += moves.len() as u64;
        }

        SearchResult {
            best,
            best_mpds,
            best_index,
            trace,
        }
    }
}

/// Candidate `index` of the configured search.
pub fn random_candidate(cfg: &SearchConfig, index: u64) -> Result<Candidate> {
    Ok(Searcher::new(cfg.clone())?.candidate(index))
}

pub fn search(cfg: &SearchConfig) -> Result<SearchResult> {
    Ok(Searcher::new(cfg.clone())?.run())
}
