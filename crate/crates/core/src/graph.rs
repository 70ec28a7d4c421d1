//! Bipartite factor graph between resource nodes and user nodes, stored as a
//! K×J indicator matrix (row = resource, column = user).
//!
//! Indices are zero-based throughout the API.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LdsError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorGraph {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "J")]
    pub j: usize,
    /// Declared user-node degree.
    pub d_v: usize,
    /// Declared resource-node degree.
    pub d_c: usize,
    pub incidence: Vec<Vec<u8>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Resource,
    User,
}

/// A node whose degree differs from the declared one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: Node,
    pub index: usize,
    pub expected: usize,
    pub actual: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.node {
            Node::Resource => "row (resource)",
            Node::User => "column (user)",
        };
        write!(
            f,
            "{what} {}: degree {} expected {}",
            self.index, self.actual, self.expected
        )
    }
}

impl FactorGraph {
    /// Builds a graph from a rectangular 0/1 matrix. Regularity is not
    /// enforced here; see [`FactorGraph::validate`].
    pub fn new(incidence: Vec<Vec<u8>>, d_v: usize, d_c: usize) -> Result<Self> {
        let g = FactorGraph {
            k: incidence.len(),
            j: incidence.first().map_or(0, Vec::len),
            d_v,
            d_c,
            incidence,
        };
        g.check_shape()?;
        Ok(g)
    }

    /// The 4-resource, 6-user graph with `d_v = 2`, `d_c = 3`.
    pub fn standard_4x6() -> Self {
        let incidence = vec![
            vec![0, 1, 1, 0, 1, 0],
            vec![1, 0, 1, 0, 0, 1],
            vec![0, 1, 0, 1, 0, 1],
            vec![1, 0, 0, 1, 1, 0],
        ];
        FactorGraph {
            k: 4,
            j: 6,
            d_v: 2,
            d_c: 3,
            incidence,
        }
    }

    /// Checks dimensions and that every entry is 0 or 1.
    pub fn check_shape(&self) -> Result<()> {
        if self.k == 0 || self.j == 0 {
            return Err(LdsError::Dimension(
                "graph must have K ≥ 1 and J ≥ 1".into(),
            ));
        }
        if self.incidence.len() != self.k {
            return Err(LdsError::Dimension(format!(
                "incidence has {} rows, K = {}",
                self.incidence.len(),
                self.k
            )));
        }
        for (k, row) in self.incidence.iter().enumerate() {
            if row.len() != self.j {
                return Err(LdsError::Dimension(format!(
                    "incidence row {k} has {} columns, J = {}",
                    row.len(),
                    self.j
                )));
            }
            if let Some(j) = row.iter().position(|&v| v > 1) {
                return Err(LdsError::Dimension(format!(
                    "incidence entry (k={k}, j={j}) is not 0/1"
                )));
            }
        }
        Ok(())
    }

    pub fn is_edge(&self, k: usize, j: usize) -> bool {
        self.incidence[k][j] != 0
    }

    /// Users active on resource `k`, ascending.
    pub fn active_users(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.k {
            return Err(LdsError::ResourceOutOfRange { k, max: self.k - 1 });
        }
        Ok((0..self.j).filter(|&j| self.is_edge(k, j)).collect())
    }

    /// Resources used by user `j`, ascending.
    pub fn user_resources(&self, j: usize) -> Vec<usize> {
        (0..self.k).filter(|&k| self.is_edge(k, j)).collect()
    }

    pub fn row_degree(&self, k: usize) -> usize {
        self.incidence[k].iter().filter(|&&v| v != 0).count()
    }

    pub fn column_degree(&self, j: usize) -> usize {
        (0..self.k).filter(|&k| self.is_edge(k, j)).count()
    }

    pub fn overloading_factor(&self) -> f64 {
        self.j as f64 / self.k as f64
    }

    /// Every row/column whose degree differs from the declared `d_c`/`d_v`.
    pub fn validate(&self) -> Vec<Violation> {
        let rows = (0..self.k).filter_map(|k| {
            let actual = self.row_degree(k);
            (actual != self.d_c).then_some(Violation {
                node: Node::Resource,
                index: k,
                expected: self.d_c,
                actual,
            })
        });
        let cols = (0..self.j).filter_map(|j| {
            let actual = self.column_degree(j);
            (actual != self.d_v).then_some(Violation {
                node: Node::User,
                index: j,
                expected: self.d_v,
                actual,
            })
        });
        rows.chain(cols).collect()
    }

    pub fn is_regular(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn require_regular(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(LdsError::Irregular(v.to_string())),
        }
    }
}
