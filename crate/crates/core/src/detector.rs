//! Multiuser detection for `y = Σ_j diag(h)·x_j + n`.
//!
//! [`MapDetector`] is the exhaustive joint minimum-distance detector.
//! [`MpaDetector`] runs sum-product message passing on the factor graph in
//! the log domain with a flooding schedule. Both assume perfect knowledge
//! of `h` and `N0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::codebook::CodebookSet;
use crate::error::{LdsError, Result};
use crate::metrics::{enumerate_superimposed, SuperimposedSet};

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionProblem {
    pub y: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub n0: f64,
}

impl DetectionProblem {
    pub fn check(&self, k: usize) -> Result<()> {
        if self.y.len() != k || self.h.len() != k {
            return Err(LdsError::Dimension(format!(
                "y has {} and h has {} entries, K = {k}",
                self.y.len(),
                self.h.len()
            )));
        }
        if self.n0.is_nan() || self.n0 <= 0.0 {
            return Err(LdsError::Config(format!(
                "N0 must be positive, got {}",
                self.n0
            )));
        }
        Ok(())
    }
}

/// How messages over several symbols are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    /// `log Σ exp`
    #[default]
    Exact,
    /// `max`
    MaxLog,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Posteriors {
    /// `probs[j][m]`, each row sums to 1.
    pub probs: Vec<Vec<f64>>,
    /// Per-user argmax symbol.
    pub decisions: Vec<usize>,
}

impl Posteriors {
    /// Concatenated label bits of the decisions, MSB first per user.
    pub fn bits(&self, labels: &[u32]) -> Vec<u8> {
        let width = labels.len().trailing_zeros();
        self.decisions
            .iter()
            .flat_map(|&m| (0..width).rev().map(move |b| ((labels[m] >> b) & 1) as u8))
            .collect()
    }
}

/// Exhaustive detector over all `M^J` superimposed codewords.
#[derive(Clone, Debug)]
pub struct MapDetector {
    set: SuperimposedSet,
}

impl MapDetector {
    pub fn new(books: &CodebookSet, cap: u64) -> Result<Self> {
        Ok(Self {
            set: enumerate_superimposed(books, cap)?,
        })
    }

    pub fn set(&self) -> &SuperimposedSet {
        &self.set
    }

    /// Index of the codeword minimizing `‖y − diag(h)·x‖²`; the lowest index
    /// wins ties.
    pub fn detect_index(&self, y: &[Complex64], h: &[Complex64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.set.len() {
            let d: f64 = self
                .set
                .vector(i)
                .iter()
                .zip(h)
                .zip(y)
                .map(|((x, h), y)| (y - h * x).norm_sqr())
                .sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn detect(&self, p: &DetectionProblem) -> Result<Vec<usize>> {
        p.check(self.set.resources())?;
        Ok(self.set.tuple(self.detect_index(&p.y, &p.h)))
    }
}

/// Convenience wrapper around [`MapDetector`].
pub fn map_detect(books: &CodebookSet, p: &DetectionProblem, cap: u64) -> Result<Vec<usize>> {
    MapDetector::new(books, cap)?.detect(p)
}

/// Message-passing detector for a regular sparse codebook set.
#[derive(Clone, Debug)]
pub struct MpaDetector {
    k: usize,
    j: usize,
    m: usize,
    d_c: usize,
    /// `edges[j]`: edge ids (`k·d_c + position`) touching user `j`.
    edges: Vec<Vec<usize>>,
    /// `sums[k][c]`: sum of the active users' chips for combination `c`
    /// (position `q` contributes digit `(c / M^q) % M`).
    sums: Vec<Vec<Complex64>>,
    /// `digits[c·d_c + q]`
    digits: Vec<usize>,
    combine: Combine,
}

/// Scratch buffers for [`MpaDetector`].
#[derive(Clone, Debug, Default)]
pub struct MpaWorkspace {
    llh: Vec<f64>,
    r2u: Vec<f64>,
    u2r: Vec<f64>,
    post: Vec<f64>,
    acc_max: Vec<f64>,
    acc_sum: Vec<f64>,
    decisions: Vec<usize>,
}

fn log_normalize(v: &mut [f64], combine: Combine) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = match combine {
        Combine::Exact => max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln(),
        Combine::MaxLog => max,
    };
    v.iter_mut().for_each(|x| *x -= shift);
}

impl MpaDetector {
    pub fn new(books: &CodebookSet) -> Result<Self> {
        Self::with_combine(books, Combine::Exact)
    }

    pub fn with_combine(books: &CodebookSet, combine: Combine) -> Result<Self> {
        let graph = books.factor_graph();
        graph.require_regular()?;
        let (k, j, m, d_c) = (graph.k, graph.j, books.order(), graph.d_c);
        if d_c == 0 {
            return Err(LdsError::Irregular("resources carry no users".into()));
        }
        let users: Vec<Vec<usize>> = (0..k)
            .map(|r| graph.active_users(r).expect("r in range"))
            .collect();
        let mut edges = vec![Vec::new(); j];
        for (r, us) in users.iter().enumerate() {
            for (q, &u) in us.iter().enumerate() {
                edges[u].push(r * d_c + q);
            }
        }
        let combos = m.pow(d_c as u32);
        let digits: Vec<usize> = (0..combos)
            .flat_map(|c| (0..d_c).map(move |q| (c / m.pow(q as u32)) % m))
            .collect();
        let sums = users
            .iter()
            .enumerate()
            .map(|(r, us)| {
                (0..combos)
                    .map(|c| {
                        us.iter()
                            .enumerate()
                            .map(|(q, &u)| books.books()[u].chip(r, digits[c * d_c + q]))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            j,
            m,
            d_c,
            edges,
            sums,
            digits,
            combine,
        })
    }

    pub fn users(&self) -> usize {
        self.j
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// Runs `iters` flooding rounds and leaves per-user log posteriors in
    /// `ws.post` and hard decisions in `ws.decisions`.
    pub fn run<'w>(
        &self,
        y: &[Complex64],
        h: &[Complex64],
        n0: f64,
        iters: usize,
        ws: &'w mut MpaWorkspace,
    ) -> &'w [usize] {
        let (m, d_c) = (self.m, self.d_c);
        let combos = self.sums[0].len();
        let n_edges = self.k * d_c;
        ws.llh.resize(self.k * combos, 0.0);
        ws.r2u.clear();
        ws.r2u.resize(n_edges * m, 0.0);
        ws.u2r.clear();
        ws.u2r.resize(n_edges * m, 0.0);
        ws.acc_max.resize(d_c * m, 0.0);
        ws.acc_sum.resize(d_c * m, 0.0);

        let inv_n0 = 1.0 / n0;
        for r in 0..self.k {
            for (c, s) in self.sums[r].iter().enumerate() {
                ws.llh[r * combos + c] = -(y[r] - h[r] * s).norm_sqr() * inv_n0;
            }
        }

        for _ in 0..iters {
            // resource → user
            for r in 0..self.k {
                let base = r * d_c;
                ws.acc_max.fill(f64::NEG_INFINITY);
                ws.acc_sum.fill(0.0);
                for c in 0..combos {
                    let dig = &self.digits[c * d_c..(c + 1) * d_c];
                    let llh = ws.llh[r * combos + c];
                    for q in 0..d_c {
                        let mut v = llh;
                        for (p, &d) in dig.iter().enumerate() {
                            if p != q {
                                v += ws.u2r[(base + p) * m + d];
                            }
                        }
                        let slot = q * m + dig[q];
                        let mx = ws.acc_max[slot];
                        match self.combine {
                            Combine::MaxLog => ws.acc_max[slot] = mx.max(v),
                            Combine::Exact => {
                                if v > mx {
                                    ws.acc_sum[slot] = ws.acc_sum[slot] * (mx - v).exp() + 1.0;
                                    ws.acc_max[slot] = v;
                                } else {
                                    ws.acc_sum[slot] += (v - mx).exp();
                                }
                            }
                        }
                    }
                }
                for q in 0..d_c {
                    let out = &mut ws.r2u[(base + q) * m..(base + q + 1) * m];
                    for (sym, o) in out.iter_mut().enumerate() {
                        let slot = q * m + sym;
                        *o = match self.combine {
                            Combine::MaxLog => ws.acc_max[slot],
                            Combine::Exact => ws.acc_max[slot] + ws.acc_sum[slot].ln(),
                        };
                    }
                    log_normalize(out, self.combine);
                }
            }
            // user → resource
            for edges in &self.edges {
                for &e in edges {
                    for sym in 0..m {
                        ws.u2r[e * m + sym] = edges
                            .iter()
                            .filter(|&&f| f != e)
                            .map(|&f| ws.r2u[f * m + sym])
                            .sum();
                    }
                    log_normalize(&mut ws.u2r[e * m..(e + 1) * m], self.combine);
                }
            }
        }

        ws.post.clear();
        ws.post.resize(self.j * m, 0.0);
        ws.decisions.clear();
        for (u, edges) in self.edges.iter().enumerate() {
            let post = &mut ws.post[u * m..(u + 1) * m];
            for &e in edges {
                for (sym, p) in post.iter_mut().enumerate() {
                    *p += ws.r2u[e * m + sym];
                }
            }
            log_normalize(post, Combine::Exact);
            let best = post
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
            ws.decisions.push(best.0);
        }
        &ws.decisions
    }

    pub fn detect(&self, p: &DetectionProblem, iters: usize) -> Result<Posteriors> {
        p.check(self.k)?;
        if iters == 0 {
            return Err(LdsError::Config("MPA needs at least one iteration".into()));
        }
        let mut ws = MpaWorkspace::default();
        self.run(&p.y, &p.h, p.n0, iters, &mut ws);
        let probs = ws
            .post
            .chunks_exact(self.m)
            .map(|row| row.iter().map(|v| v.exp()).collect())
            .collect();
        Ok(Posteriors {
            probs,
            decisions: ws.decisions,
        })
    }
}

/// Convenience wrapper around [`MpaDetector`] with exact combining.
pub fn mpa_detect(books: &CodebookSet, p: &DetectionProblem, iters: usize) -> Result<Posteriors> {
    MpaDetector::new(books)?.detect(p, iters)
}
