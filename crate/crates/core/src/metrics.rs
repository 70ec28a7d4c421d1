//! Figures of merit of the superimposed-codeword constellation: minimum
//! product distance (MPDS), diversity order, kissing number, the Rayleigh
//! pairwise-error bound and the average-BER union bound.
//!
//! All pair scans are exhaustive. Work is split into fixed chunks of outer
//! indices and reduced in chunk order, so results do not depend on the
//! number of worker threads.

use num_complex::Complex64;
use serde::Serialize;

use crate::codebook::{CodebookSet, Constellation, LdsMatrix};
use crate::error::{LdsError, Result};
use crate::graph::FactorGraph;
use crate::par;

/// Default limit on `M^J` for anything that enumerates superimposed codewords.
pub const DEFAULT_CAP: u64 = 1 << 20;

const ROWS_PER_CHUNK: usize = 32;

/// Thresholds used when comparing superimposed codewords.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Coordinates with `|x_k − y_k| ≤ coord_eps` count as equal.
    pub coord_eps: f64,
    /// Pairs within this relative distance of the minimum count as kissing.
    pub kiss_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        // Matrices published to 4 decimals leave residues up to ~2e-4 on
        // coordinates that coincide exactly; genuine differences of the
        // built-in sets start near 0.2.
        Self {
            coord_eps: 1e-3,
            kiss_rel: 1e-9,
        }
    }
}

/// Every superimposed codeword `x = Σ_j X_j[:, m_j]`, indexed by the message
/// tuple read as a base-M number with user 0 most significant.
#[derive(Clone, Debug)]
pub struct SuperimposedSet {
    k: usize,
    j: usize,
    m: usize,
    points: Vec<Complex64>,
}

/// `M^J` as a wide integer, checked against `cap`.
pub fn check_cap(m: usize, j: usize, cap: u64) -> Result<usize> {
    let size = (m as u128).checked_pow(j as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(LdsError::CapExceeded { size, cap });
    }
    Ok(size as usize)
}

pub fn enumerate_superimposed(books: &CodebookSet, cap: u64) -> Result<SuperimposedSet> {
    let (k, j, m) = (books.resources(), books.users(), books.order());
    let size = check_cap(m, j, cap)?;
    let mut points = vec![Complex64::ZERO; k];
    for book in books.books() {
        let mut next = Vec::with_capacity(points.len() * m);
        for prefix in points.chunks_exact(k) {
            for sym in 0..m {
                next.extend(
                    prefix
                        .iter()
                        .enumerate()
                        .map(|(r, z)| z + book.chip(r, sym)),
                );
            }
        }
        points = next;
    }
    debug_assert_eq!(points.len(), size * k);
    Ok(SuperimposedSet { k, j, m, points })
}

impl SuperimposedSet {
    pub fn len(&self) -> usize {
        self.points.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resources(&self) -> usize {
        self.k
    }

    pub fn users(&self) -> usize {
        self.j
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn vector(&self, index: usize) -> &[Complex64] {
        &self.points[index * self.k..(index + 1) * self.k]
    }

    /// Message tuple of entry `index`.
    pub fn tuple(&self, index: usize) -> Vec<usize> {
        let mut t = vec![0; self.j];
        let mut rest = index;
        for slot in t.iter_mut().rev() {
            *slot = rest % self.m;
            rest /= self.m;
        }
        t
    }

    pub fn index_of(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &s| acc * self.m + s)
    }

    fn digits(&self) -> Vec<u8> {
        (0..self.len())
            .flat_map(|i| self.tuple(i).into_iter().map(|d| d as u8))
            .collect()
    }
}

/// Product of `|x_k − y_k|²` over coordinates differing by more than `eps`,
/// and the number of such coordinates. Equal vectors give `(1.0, 0)`.
pub fn product_distance_sq(x: &[Complex64], y: &[Complex64], eps: f64) -> (f64, usize) {
    debug_assert_eq!(x.len(), y.len());
    let eps_sq = eps * eps;
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .filter(|&d| d > eps_sq)
        .fold((1.0, 0), |(p, n), d| (p * d, n + 1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mpds: f64,
    pub diversity_order: usize,
    pub kissing_number: u64,
    pub injective: bool,
    pub minimizing_pair: (Vec<usize>, Vec<usize>),
}

#[derive(Clone, Copy)]
struct ScanMin {
    value: f64,
    pair: (usize, usize),
    diversity: usize,
}

impl ScanMin {
    const EMPTY: ScanMin = ScanMin {
        value: f64::INFINITY,
        pair: (0, 0),
        diversity: usize::MAX,
    };

    fn merge(self, other: ScanMin) -> ScanMin {
        let mut out = if other.value < self.value {
            other
        } else {
            self
        };
        out.diversity = self.diversity.min(other.diversity);
        out
    }
}

/// MPDS over all unordered pairs of distinct message tuples, using default
/// tolerances.
pub fn mpds(set: &SuperimposedSet) -> MetricsReport {
    mpds_with(set, Tolerances::default())
}

pub fn mpds_with(set: &SuperimposedSet, tol: Tolerances) -> MetricsReport {
    let n = set.len();
    let pair_value = |a: usize, b: usize| {
        let (p, d) = product_distance_sq(set.vector(a), set.vector(b), tol.coord_eps);
        // coinciding codewords for different messages are undecodable
        (if d == 0 { 0.0 } else { p }, d)
    };

    let chunks: Vec<_> = par::chunks(n, ROWS_PER_CHUNK).collect();
    let best = par::map_range(chunks.len(), |c| {
        let mut best = ScanMin::EMPTY;
        for a in chunks[c].clone() {
            for b in a + 1..n {
                let (value, diversity) = pair_value(a, b);
                best = best.merge(ScanMin {
                    value,
                    pair: (a, b),
                    diversity,
                });
            }
        }
        best
    })
    .into_iter()
    .fold(ScanMin::EMPTY, ScanMin::merge);

    if n < 2 {
        return MetricsReport {
            mpds: f64::INFINITY,
            diversity_order: set.resources(),
            kissing_number: 0,
            injective: true,
            minimizing_pair: (set.tuple(0), set.tuple(0)),
        };
    }

    let limit = best.value * (1.0 + tol.kiss_rel);
    let kissing_number = par::map_range(chunks.len(), |c| {
        let mut count = 0u64;
        for a in chunks[c].clone() {
            for b in a + 1..n {
                if pair_value(a, b).0 <= limit {
                    count += 1;
                }
            }
        }
        count
    })
    .into_iter()
    .sum();

    MetricsReport {
        mpds: best.value,
        diversity_order: best.diversity,
        kissing_number,
        injective: best.diversity > 0,
        minimizing_pair: (set.tuple(best.pair.0), set.tuple(best.pair.1)),
    }
}

/// Rayleigh-fading PEP upper bound `½·∏ 1/(1 + |x_k − y_k|²/(8·N0))` over
/// differing coordinates.
pub fn pep_bound(x: &[Complex64], y: &[Complex64], n0: f64, eps: f64) -> Result<f64> {
    if n0.is_nan() || n0 <= 0.0 {
        return Err(LdsError::Config(format!("N0 must be positive, got {n0}")));
    }
    let eps_sq = eps * eps;
    let mut differs = false;
    let mut bound = 0.5;
    for (a, b) in x.iter().zip(y) {
        let d = (a - b).norm_sqr();
        if d > eps_sq {
            differs = true;
            bound /= 1.0 + d / (8.0 * n0);
        }
    }
    if differs {
        Ok(bound)
    } else {
        Err(LdsError::DegeneratePair)
    }
}

/// Bits in which the concatenated labels of two message tuples differ.
pub fn hamming_bits(m1: &[usize], m2: &[usize], labels: &[u32]) -> u32 {
    debug_assert_eq!(m1.len(), m2.len());
    m1.iter()
        .zip(m2)
        .map(|(&a, &b)| (labels[a] ^ labels[b]).count_ones())
        .sum()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Average-BER union bound at a single `N0`.
pub fn aber_union_bound(
    books: &CodebookSet,
    constellation: &Constellation,
    n0: f64,
    cap: u64,
) -> Result<f64> {
    let set = enumerate_superimposed(books, cap)?;
    Ok(aber_union_bound_curve(
        &set,
        constellation.labels(),
        &[n0],
        Tolerances::default().coord_eps,
    )?[0])
}

/// Average-BER union bound for each `N0` in `n0s`:
///
/// `P ≤ (1/M^J)·Σ_x Σ_{y≠x} d_H(x, y)/(J·log2 M)·PEP(x → y)`
///
/// over ordered pairs of distinct message tuples. Pairs whose codewords
/// coincide contribute a PEP of ½.
pub fn aber_union_bound_curve(
    set: &SuperimposedSet,
    labels: &[u32],
    n0s: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    if let Some(bad) = n0s.iter().find(|&&n0| n0.is_nan() || n0 <= 0.0) {
        return Err(LdsError::Config(format!("N0 must be positive, got {bad}")));
    }
    if labels.len() != set.order() {
        return Err(LdsError::Dimension(format!(
            "{} labels for M = {}",
            labels.len(),
            set.order()
        )));
    }
    let (n, j, k) = (set.len(), set.users(), set.resources());
    let m = set.order();
    let bits = m.trailing_zeros() as f64;
    let eps_sq = eps * eps;
    let digits = set.digits();
    let mut ham = vec![0u32; m * m];
    for a in 0..m {
        for b in 0..m {
            ham[a * m + b] = (labels[a] ^ labels[b]).count_ones();
        }
    }
    let inv_8n0: Vec<f64> = n0s.iter().map(|n0| 1.0 / (8.0 * n0)).collect();

    let chunks: Vec<_> = par::chunks(n, ROWS_PER_CHUNK).collect();
    let partial = par::map_range(chunks.len(), |c| {
        let mut acc = vec![CompensatedSum::default(); n0s.len()];
        let mut diffs = Vec::with_capacity(k);
        for a in chunks[c].clone() {
            let (xa, da) = (set.vector(a), &digits[a * j..(a + 1) * j]);
            for b in a + 1..n {
                let (xb, db) = (set.vector(b), &digits[b * j..(b + 1) * j]);
                let dh: u32 = da
                    .iter()
                    .zip(db)
                    .map(|(&p, &q)| ham[p as usize * m + q as usize])
                    .sum();
                diffs.clear();
                diffs.extend(
                    xa.iter()
                        .zip(xb)
                        .map(|(p, q)| (p - q).norm_sqr())
                        .filter(|&d| d > eps_sq),
                );
                for (slot, s) in acc.iter_mut().zip(&inv_8n0) {
                    let pep = diffs.iter().fold(0.5, |pep, d| pep / (1.0 + d * s));
                    slot.add(dh as f64 * pep);
                }
            }
        }
        acc
    });

    let scale = 2.0 / (n as f64 * j as f64 * bits);
    Ok((0..n0s.len())
        .map(|g| {
            let mut total = CompensatedSum::default();
            for chunk in &partial {
                total.add(chunk[g].value());
            }
            total.value() * scale
        })
        .collect())
}

/// MPDS and diversity order computed from difference vectors instead of
/// codeword pairs.
///
/// Every pair of distinct message tuples has difference
/// `Σ_j s_j·(α_a − α_b)` with at least one nonzero factor, and every such
/// combination comes from some pair, so minimizing over nonzero tuples of
/// constellation differences gives the same minimum as the pair scan. Each
/// coordinate only involves the users active on that resource, which lets
/// the per-resource terms be tabulated once per matrix.
#[derive(Clone, Debug)]
pub struct MpdsScorer {
    graph: FactorGraph,
    /// Distinct values of `α_a − α_b`; index 0 is zero.
    diffs: Vec<Complex64>,
    rows: Vec<Vec<usize>>,
    eps_sq: f64,
}

impl MpdsScorer {
    pub fn new(graph: &FactorGraph, c: &Constellation, eps: f64) -> Self {
        let mut diffs = vec![Complex64::ZERO];
        for a in c.points() {
            for b in c.points() {
                let d = a - b;
                if !diffs.iter().any(|e| (e - d).norm() < 1e-12) {
                    diffs.push(d);
                }
            }
        }
        let rows = (0..graph.k)
            .map(|k| graph.active_users(k).expect("k in range"))
            .collect();
        Self {
            graph: graph.clone(),
            diffs,
            rows,
            eps_sq: eps * eps,
        }
    }

    /// Number of difference tuples visited by [`MpdsScorer::score`].
    pub fn work(&self) -> u128 {
        (self.diffs.len() as u128).pow(self.graph.j as u32)
    }

    /// `(mpds, diversity_order)`; mpds is 0 when two messages collide.
    pub fn score(&self, s: &LdsMatrix) -> (f64, usize) {
        let nd = self.diffs.len();
        let j = self.graph.j;
        if j == 0 {
            return (f64::INFINITY, 0);
        }
        // tables[k][code] = |Σ_q s_{u_q,k}·diff[digit_q]|², code base nd
        let tables: Vec<Vec<f64>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(k, users)| {
                let size = nd.pow(users.len() as u32);
                (0..size)
                    .map(|code| {
                        let mut rest = code;
                        let mut z = Complex64::ZERO;
                        for &u in users {
                            z += s.entry(k, u) * self.diffs[rest % nd];
                            rest /= nd;
                        }
                        let d = z.norm_sqr();
                        if d > self.eps_sq {
                            d
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        // depth-first over users; a resource's factor is applied as soon as
        // its last active user has a digit
        let mut done_at: Vec<Vec<usize>> = vec![Vec::new(); j];
        let mut strides = vec![Vec::new(); j];
        for (r, users) in self.rows.iter().enumerate() {
            if let Some(&last) = users.last() {
                done_at[last].push(r);
            }
            for (q, &u) in users.iter().enumerate() {
                strides[u].push((r, nd.pow(q as u32)));
            }
        }
        let neg: Vec<usize> = self
            .diffs
            .iter()
            .map(|d| {
                self.diffs
                    .iter()
                    .position(|e| (e + d).norm() < 1e-12)
                    .expect("difference set is closed under negation")
            })
            .collect();
        let mut walk = Walk {
            nd,
            neg: &neg,
            tables: &tables,
            done_at: &done_at,
            strides: &strides,
            codes: vec![0; self.rows.len()],
            best: f64::INFINITY,
            diversity: usize::MAX,
        };
        walk.visit(0, 1.0, 0, true);
        (walk.best, walk.diversity)
    }
}

struct Walk<'a> {
    nd: usize,
    neg: &'a [usize],
    tables: &'a [Vec<f64>],
    done_at: &'a [Vec<usize>],
    strides: &'a [Vec<(usize, usize)>],
    codes: Vec<usize>,
    best: f64,
    diversity: usize,
}

impl Walk<'_> {
    fn visit(&mut self, user: usize, product: f64, count: usize, all_zero: bool) {
        let last = user + 1 == self.done_at.len();
        for d in 0..self.nd {
            // δ and −δ give the same product; keep the tuple whose first
            // nonzero difference has the smaller index
            if all_zero && d != 0 && self.neg[d] < d {
                continue;
            }
            for &(r, stride) in &self.strides[user] {
                self.codes[r] += d * stride;
            }
            let (mut p, mut n) = (product, count);
            for &r in &self.done_at[user] {
                let v = self.tables[r][self.codes[r]];
                if v > 0.0 {
                    p *= v;
                    n += 1;
                }
            }
            if !last {
                self.visit(user + 1, p, n, all_zero && d == 0);
            } else if !(all_zero && d == 0) {
                self.best = self.best.min(if n == 0 { 0.0 } else { p });
                self.diversity = self.diversity.min(n);
            }
            for &(r, stride) in &self.strides[user] {
                self.codes[r] -= d * stride;
            }
        }
    }
}
