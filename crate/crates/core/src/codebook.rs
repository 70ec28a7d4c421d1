//! LDS signature matrices, constellations and the per-user sparse codebooks
//! obtained by spreading each constellation point with a signature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{LdsError, Result};
use crate::graph::FactorGraph;

/// K×J complex signature matrix whose support matches a factor graph.
#[derive(Clone, Debug, PartialEq)]
pub struct LdsMatrix {
    graph: FactorGraph,
    /// Row-major, `entries[k][j]` is chip `k` of user `j`.
    entries: Vec<Vec<Complex64>>,
}

impl LdsMatrix {
    /// Checks dimensions and that the support equals the incidence pattern.
    pub fn new(graph: FactorGraph, entries: Vec<Vec<Complex64>>) -> Result<Self> {
        graph.check_shape()?;
        if entries.len() != graph.k {
            return Err(LdsError::Dimension(format!(
                "S has {} rows, K = {}",
                entries.len(),
                graph.k
            )));
        }
        for (k, row) in entries.iter().enumerate() {
            if row.len() != graph.j {
                return Err(LdsError::Dimension(format!(
                    "S row {k} has {} columns, J = {}",
                    row.len(),
                    graph.j
                )));
            }
            for (j, z) in row.iter().enumerate() {
                let nonzero = *z != Complex64::ZERO;
                if nonzero && !graph.is_edge(k, j) {
                    return Err(LdsError::Sparsity { k, j });
                }
                if !nonzero && graph.is_edge(k, j) {
                    return Err(LdsError::MissingEntry { k, j });
                }
            }
        }
        Ok(Self { graph, entries })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn entries(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn entry(&self, k: usize, j: usize) -> Complex64 {
        self.entries[k][j]
    }

    /// Signature `s_j` (column `j`).
    pub fn signature(&self, j: usize) -> Vec<Complex64> {
        self.entries.iter().map(|row| row[j]).collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies every entry by `c` (support must survive, so `c ≠ 0`).
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        if c == Complex64::ZERO {
            return Err(LdsError::Config("scale factor must be nonzero".into()));
        }
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|z| z * c).collect())
            .collect();
        Ok(Self {
            graph: self.graph.clone(),
            entries,
        })
    }

    /// Scales by a positive real so that `‖S‖²_F = d_v·J`.
    pub fn normalize(&self) -> Result<Self> {
        let energy = self.frobenius_sq();
        if energy == 0.0 {
            return Err(LdsError::AllZero);
        }
        let target = (self.graph.d_v * self.graph.j) as f64;
        self.scaled(Complex64::new((target / energy).sqrt(), 0.0))
    }

    /// `‖s_j‖²` for every user.
    pub fn energy_distribution(&self) -> Vec<f64> {
        (0..self.graph.j)
            .map(|j| self.entries.iter().map(|row| row[j].norm_sqr()).sum())
            .collect()
    }

    /// True when every nonzero entry has the same magnitude (relative `tol`).
    pub fn is_power_balanced(&self, tol: f64) -> bool {
        let mags: Vec<f64> = self
            .entries
            .iter()
            .flatten()
            .filter(|z| **z != Complex64::ZERO)
            .map(|z| z.norm())
            .collect();
        let (lo, hi) = mags.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });
        mags.is_empty() || hi - lo <= tol * hi
    }

    /// True when within every row the nonzero magnitudes are pairwise
    /// separated by more than `gap`.
    pub fn rows_power_imbalanced(&self, gap: f64) -> bool {
        self.entries.iter().all(|row| {
            let mut mags: Vec<f64> = row
                .iter()
                .filter(|z| **z != Complex64::ZERO)
                .map(|z| z.norm())
                .collect();
            mags.sort_by(f64::total_cmp);
            mags.windows(2).all(|w| w[1] - w[0] > gap)
        })
    }
}

/// Labeled constellation; `labels[m]` holds the `bits_per_symbol()` bits
/// of point `m`, most significant bit first.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

impl Constellation {
    pub fn new(points: Vec<Complex64>, labels: Vec<u32>) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(LdsError::Config(format!(
                "constellation size {m} is not a power of two ≥ 2"
            )));
        }
        if labels.len() != m {
            return Err(LdsError::Dimension(format!(
                "{} labels for {m} points",
                labels.len()
            )));
        }
        let mut seen = vec![false; m];
        for &l in &labels {
            let l = l as usize;
            if l >= m || std::mem::replace(&mut seen[l], true) {
                return Err(LdsError::Config(format!(
                    "labels must be a permutation of 0..{m}"
                )));
            }
        }
        Ok(Self { points, labels })
    }

    /// π/4-rotated unit-energy QPSK, Gray labeled:
    /// `00 → (1+i)/√2`, `01 → (−1+i)/√2`, `11 → (−1−i)/√2`, `10 → (1−i)/√2`.
    pub fn qpsk() -> Self {
        let a = FRAC_1_SQRT_2;
        Self {
            points: vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(-a, -a),
                Complex64::new(a, -a),
            ],
            labels: vec![0b00, 0b01, 0b11, 0b10],
        }
    }

    /// Axis-aligned QPSK `{1, i, −1, −i}`, Gray labeled.
    pub fn qpsk_axis() -> Self {
        Self {
            points: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0),
            ],
            labels: vec![0b00, 0b01, 0b11, 0b10],
        }
    }

    pub fn bpsk() -> Self {
        Self {
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            labels: vec![0, 1],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "qpsk" => Ok(Self::qpsk()),
            "qpsk-axis" => Ok(Self::qpsk_axis()),
            "bpsk" => Ok(Self::bpsk()),
            other => Err(LdsError::Config(format!("unknown constellation `{other}`"))),
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.points.len().trailing_zeros()
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }
}

/// One user's K×M codebook, `rows[k][m]` = chip `k` of codeword `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    rows: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn new(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(LdsError::Dimension(
                "codebook must be a non-empty K×M matrix".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    pub fn chip(&self, k: usize, m: usize) -> Complex64 {
        self.rows[k][m]
    }

    pub fn resources(&self) -> usize {
        self.rows.len()
    }

    pub fn order(&self) -> usize {
        self.rows[0].len()
    }

    pub fn codeword(&self, m: usize) -> Vec<Complex64> {
        self.rows.iter().map(|r| r[m]).collect()
    }

    /// Rows that are not identically zero.
    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&k| self.rows[k].iter().any(|z| *z != Complex64::ZERO))
            .collect()
    }

    /// Mean codeword energy `(1/M)·Σ_m ‖x_m‖²`.
    pub fn average_energy(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            / self.order() as f64
    }
}

/// Codebooks of all J users, sharing K and M.
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookSet {
    books: Vec<Codebook>,
}

impl CodebookSet {
    pub fn new(books: Vec<Codebook>) -> Result<Self> {
        let Some(first) = books.first() else {
            return Err(LdsError::Dimension(
                "at least one user codebook required".into(),
            ));
        };
        let (k, m) = (first.resources(), first.order());
        if let Some(j) = books
            .iter()
            .position(|b| b.resources() != k || b.order() != m)
        {
            return Err(LdsError::Dimension(format!(
                "codebook of user {j} is not {k}×{m}"
            )));
        }
        Ok(Self { books })
    }

    pub fn books(&self) -> &[Codebook] {
        &self.books
    }

    pub fn users(&self) -> usize {
        self.books.len()
    }

    pub fn resources(&self) -> usize {
        self.books[0].resources()
    }

    pub fn order(&self) -> usize {
        self.books[0].order()
    }

    /// Factor graph implied by the nonzero rows. Degrees are read from
    /// user 0 and resource 0; call `validate` on the result to check
    /// regularity.
    pub fn factor_graph(&self) -> FactorGraph {
        let (k, j) = (self.resources(), self.users());
        let mut incidence = vec![vec![0u8; j]; k];
        for (u, b) in self.books.iter().enumerate() {
            for r in b.active_rows() {
                incidence[r][u] = 1;
            }
        }
        let d_v = (0..k).filter(|&r| incidence[r][0] != 0).count();
        let d_c = incidence[0].iter().filter(|&&v| v != 0).count();
        FactorGraph {
            k,
            j,
            d_v,
            d_c,
            incidence,
        }
    }

    /// Average transmitted energy per information bit, assuming uniform
    /// symbols and a zero-mean constellation.
    pub fn energy_per_bit(&self) -> f64 {
        let es: f64 = self.books.iter().map(Codebook::average_energy).sum();
        es / (self.users() as f64 * self.order().trailing_zeros() as f64)
    }
}

/// Spreads every constellation point with each user's signature:
/// column `m` of user `j`'s codebook is `s_j·α_m`.
pub fn expand(s: &LdsMatrix, c: &Constellation) -> CodebookSet {
    let books = (0..s.graph().j)
        .map(|j| Codebook {
            rows: s
                .entries()
                .iter()
                .map(|row| c.points().iter().map(|a| row[j] * a).collect())
                .collect(),
        })
        .collect();
    CodebookSet { books }
}

/// Built-in 4×6 power-imbalanced LDS built from rings of squared radius
/// 1, 3 and 7. Entries are the published 4-decimal values, rescaled so
/// that `‖S‖²_F = 12` holds exactly.
pub fn builtin_s1() -> LdsMatrix {
    let c = Complex64::new;
    let z = Complex64::ZERO;
    let entries = vec![
        vec![
            z,
            c(0.7833, -0.4523),
            c(-0.5222, 0.0),
            z,
            c(1.3056, -0.4523),
            z,
        ],
        vec![
            c(-0.2611, -1.3568),
            z,
            c(-0.7833, 0.4523),
            z,
            z,
            c(-0.2611, -0.4523),
        ],
        vec![
            z,
            c(0.0, 0.9045),
            z,
            c(0.2611, 0.4523),
            z,
            c(0.2611, 1.3568),
        ],
        vec![
            c(-0.5222, 0.0),
            z,
            z,
            c(1.0445, 0.9045),
            c(-0.7833, -0.4523),
            z,
        ],
    ];
    LdsMatrix::new(FactorGraph::standard_4x6(), entries)
        .and_then(|s| s.normalize())
        .expect("built-in matrix is valid")
}

/// Built-in 4×6 power-balanced LDS with unit-modulus entries drawn from
/// `{1, ω, ω^{1/2}}`, `ω = exp(2πi/3)`, `ω^{1/2} = exp(πi/3)`.
pub fn builtin_s2() -> LdsMatrix {
    let one = Complex64::new(1.0, 0.0);
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let h = Complex64::from_polar(1.0, PI / 3.0);
    let z = Complex64::ZERO;
    let entries = vec![
        vec![z, w, one, z, h, z],
        vec![h, z, w, z, z, one],
        vec![z, h, z, one, z, w],
        vec![one, z, z, h, w, z],
    ];
    LdsMatrix::new(FactorGraph::standard_4x6(), entries).expect("built-in matrix is valid")
}

pub fn builtin(name: &str) -> Result<LdsMatrix> {
    match name {
        "s1" => Ok(builtin_s1()),
        "s2" => Ok(builtin_s2()),
        other => Err(LdsError::Config(format!(
            "unknown built-in matrix `{other}` (expected s1 or s2)"
        ))),
    }
}
