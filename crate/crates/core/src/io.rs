//! JSON file formats.
//!
//! LDS file, `S` row-major K×J:
//! `{"K":4,"J":6,"d_v":2,"d_c":3,"incidence":[[0,1,1,0,1,0],...],"S":[[[re,im],...],...]}`
//!
//! External codebook file, `books` indexed user, resource, symbol:
//! `{"K":4,"J":6,"M":4,"books":[[[[re,im],...],...],...]}`
//!
//! Complex numbers are `[re, im]` pairs. Reals are written in shortest
//! round-trip form, so `load(save(x))` is bit-exact.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, CodebookSet, LdsMatrix};
use crate::error::{LdsError, Result};
use crate::graph::FactorGraph;

type Pair = [f64; 2];

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn complex(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Serialize, Deserialize)]
struct LdsFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "J")]
    j: usize,
    d_v: usize,
    d_c: usize,
    incidence: Vec<Vec<u8>>,
    #[serde(rename = "S")]
    s: Vec<Vec<Pair>>,
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "J")]
    j: usize,
    #[serde(rename = "M")]
    m: usize,
    books: Vec<Vec<Vec<Pair>>>,
}

/// Contents of a signature or codebook file.
#[derive(Clone, Debug)]
pub enum Loaded {
    Lds(LdsMatrix),
    Codebooks(CodebookSet),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| LdsError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `contents` to `path`, refusing to replace an existing file unless
/// `overwrite` is set.
pub fn write(path: &Path, contents: &str, overwrite: bool) -> Result<()> {
    if !overwrite && path.exists() {
        return Err(LdsError::Config(format!(
            "{} already exists (use --force to overwrite)",
            path.display()
        )));
    }
    fs::write(path, contents).map_err(|source| LdsError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|source| LdsError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn lds_to_json(s: &LdsMatrix) -> String {
    let g = s.graph();
    let file = LdsFile {
        k: g.k,
        j: g.j,
        d_v: g.d_v,
        d_c: g.d_c,
        incidence: g.incidence.clone(),
        s: s.entries()
            .iter()
            .map(|row| row.iter().copied().map(pair).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes") + "\n"
}

pub fn codebooks_to_json(set: &CodebookSet) -> String {
    let file = CodebookFile {
        k: set.resources(),
        j: set.users(),
        m: set.order(),
        books: set
            .books()
            .iter()
            .map(|b| {
                b.rows()
                    .iter()
                    .map(|r| r.iter().copied().map(pair).collect())
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes") + "\n"
}

fn lds_from_file(f: LdsFile) -> Result<LdsMatrix> {
    let graph = FactorGraph {
        k: f.k,
        j: f.j,
        d_v: f.d_v,
        d_c: f.d_c,
        incidence: f.incidence,
    };
    let entries =
        f.s.into_iter()
            .map(|row| row.into_iter().map(complex).collect())
            .collect();
    LdsMatrix::new(graph, entries)
}

fn codebooks_from_file(f: CodebookFile) -> Result<CodebookSet> {
    if f.books.len() != f.j {
        return Err(LdsError::Dimension(format!(
            "{} books for J = {}",
            f.books.len(),
            f.j
        )));
    }
    let books = f
        .books
        .into_iter()
        .enumerate()
        .map(|(j, rows)| {
            if rows.len() != f.k || rows.iter().any(|r| r.len() != f.m) {
                return Err(LdsError::Dimension(format!(
                    "book of user {j} is not {}×{}",
                    f.k, f.m
                )));
            }
            Codebook::new(
                rows.into_iter()
                    .map(|r| r.into_iter().map(complex).collect())
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if !f.m.is_power_of_two() || f.m < 2 {
        return Err(LdsError::Config(format!(
            "M = {} is not a power of two ≥ 2",
            f.m
        )));
    }
    CodebookSet::new(books)
}

/// Parses either file format, deciding by the presence of `S` or `books`.
pub fn parse_loaded(text: &str, path: &Path) -> Result<Loaded> {
    let value: serde_json::Value = parse(text, path)?;
    if value.get("S").is_some() {
        lds_from_file(parse(text, path)?).map(Loaded::Lds)
    } else if value.get("books").is_some() {
        codebooks_from_file(parse(text, path)?).map(Loaded::Codebooks)
    } else {
        Err(LdsError::Config(format!(
            "{}: neither an LDS file (`S`) nor a codebook file (`books`)",
            path.display()
        )))
    }
}

pub fn load(path: &Path) -> Result<Loaded> {
    parse_loaded(&read(path)?, path)
}

pub fn load_lds(path: &Path) -> Result<LdsMatrix> {
    match load(path)? {
        Loaded::Lds(s) => Ok(s),
        Loaded::Codebooks(_) => Err(LdsError::Config(format!(
            "{} holds full codebooks, expected an LDS matrix",
            path.display()
        ))),
    }
}

pub fn load_codebooks(path: &Path) -> Result<CodebookSet> {
    let text = read(path)?;
    codebooks_from_file(parse(&text, path)?)
}

/// Reads a graph from `{"K","J","d_v","d_c","incidence"}`; LDS files work too.
pub fn load_graph(path: &Path) -> Result<FactorGraph> {
    let g: FactorGraph = parse(&read(path)?, path)?;
    g.check_shape()?;
    Ok(g)
}

pub fn save_lds(s: &LdsMatrix, path: &Path, overwrite: bool) -> Result<()> {
    write(path, &lds_to_json(s), overwrite)
}

pub fn save_codebooks(set: &CodebookSet, path: &Path, overwrite: bool) -> Result<()> {
    write(path, &codebooks_to_json(set), overwrite)
}
