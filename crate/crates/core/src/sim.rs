//! Monte Carlo bit-error-rate simulation over AWGN and Rayleigh block-fading
//! channels with message-passing detection.
//!
//! Block `b` of grid point `p` draws all of its randomness from a ChaCha
//! stream keyed by `(seed, p)` with stream id `b`. Blocks are simulated in
//! waves and accumulated in block order up to the exact block where the stop
//! rule fires, so curves are identical for any number of worker threads.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::codebook::{CodebookSet, Constellation, LdsMatrix};
use crate::detector::{Combine, MpaDetector, MpaWorkspace};
use crate::error::{LdsError, Result};
use crate::par;

const BLOCKS_PER_TASK: usize = 512;
const TASKS_PER_WAVE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Awgn,
    Rayleigh,
}

impl FromStr for Channel {
    type Err = LdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(Channel::Awgn),
            "rayleigh" => Ok(Channel::Rayleigh),
            other => Err(LdsError::Config(format!("unknown channel `{other}`"))),
        }
    }
}

/// Noise spectral density for a given Eb/N0 in dB and energy per bit.
pub fn n0_from_ebno(ebno_db: f64, energy_per_bit: f64) -> f64 {
    energy_per_bit / 10f64.powf(ebno_db / 10.0)
}

/// `N0` for an LDS matrix spread with `c`:
/// `Eb = ‖S‖²_F·E_s/(J·log2 M)`, `N0 = Eb/10^(EbN0/10)`.
pub fn ebno_to_n0(ebno_db: f64, s: &LdsMatrix, c: &Constellation) -> f64 {
    let eb =
        s.frobenius_sq() * c.average_energy() / (s.graph().j as f64 * c.bits_per_symbol() as f64);
    n0_from_ebno(ebno_db, eb)
}

/// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub books: CodebookSet,
    /// Bit label of each symbol index.
    pub labels: Vec<u32>,
    pub channel: Channel,
    pub ebno_grid_db: Vec<f64>,
    /// Energy per information bit used to map Eb/N0 to N0.
    pub energy_per_bit: f64,
    pub mpa_iters: usize,
    pub combine: Combine,
    pub min_errors: u64,
    pub max_blocks: u64,
    pub seed: u64,
}

impl SimConfig {
    /// Defaults: 8 MPA iterations, stop at 200 bit errors or 10⁶ blocks.
    pub fn new(
        books: CodebookSet,
        constellation: &Constellation,
        channel: Channel,
        ebno_grid_db: Vec<f64>,
    ) -> Self {
        let energy_per_bit = books.energy_per_bit();
        Self {
            books,
            labels: constellation.labels().to_vec(),
            channel,
            ebno_grid_db,
            energy_per_bit,
            mpa_iters: 8,
            combine: Combine::Exact,
            min_errors: 200,
            max_blocks: 1_000_000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ebno_grid_db.is_empty() {
            return Err(LdsError::Config("Eb/N0 grid is empty".into()));
        }
        if self.min_errors == 0 || self.max_blocks == 0 {
            return Err(LdsError::Config(
                "min errors and max blocks must be ≥ 1".into(),
            ));
        }
        if self.mpa_iters == 0 {
            return Err(LdsError::Config("MPA needs at least one iteration".into()));
        }
        if self.labels.len() != self.books.order() {
            return Err(LdsError::Dimension(format!(
                "{} labels for M = {}",
                self.labels.len(),
                self.books.order()
            )));
        }
        if self.energy_per_bit.is_nan() || self.energy_per_bit <= 0.0 {
            return Err(LdsError::Config("energy per bit must be positive".into()));
        }
        Ok(())
    }

    fn bits_per_block(&self) -> u64 {
        self.books.users() as u64 * self.books.order().trailing_zeros() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BerPoint {
    pub ebno_db: f64,
    pub n0: f64,
    pub blocks: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub ci95: f64,
}

impl BerPoint {
    fn new(ebno_db: f64, n0: f64, blocks: u64, bits: u64, bit_errors: u64) -> Self {
        let ber = bit_errors as f64 / bits as f64;
        let ci95 = 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt();
        Self {
            ebno_db,
            n0,
            blocks,
            bits,
            bit_errors,
            ber,
            ci95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ebno_db,blocks,bits,bit_errors,ber,ci95\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.ebno_db, p.blocks, p.bits, p.bit_errors, p.ber, p.ci95
            )
            .expect("writing to a String");
        }
        out
    }

    /// Eb/N0 at which the curve crosses `target`, interpolating linearly in
    /// `log10(BER)` between the bracketing grid points.
    pub fn ebno_at(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.ber >= target && b.ber < target && b.ber > 0.0 {
                let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
                Some(a.ebno_db + (b.ebno_db - a.ebno_db) * (la - lt) / (la - lb))
            } else {
                None
            }
        })
    }
}

/// Per-block simulation kernel shared by all workers.
struct Engine<'a> {
    cfg: &'a SimConfig,
    det: MpaDetector,
}

impl Engine<'_> {
    fn rng(&self, point: usize, block: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.cfg.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(point as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(block);
        rng
    }

    /// Bit errors of one block.
    fn block(&self, point: usize, block: u64, n0: f64, ws: &mut BlockScratch) -> u64 {
        let cfg = self.cfg;
        let books = cfg.books.books();
        let (k, m) = (cfg.books.resources(), cfg.books.order());
        let mut rng = self.rng(point, block);

        ws.tx.clear();
        ws.tx
            .extend((0..books.len()).map(|_| rng.random_range(0..m)));
        ws.h.clear();
        match cfg.channel {
            Channel::Awgn => ws.h.resize(k, Complex64::new(1.0, 0.0)),
            Channel::Rayleigh => ws.h.extend((0..k).map(|_| complex_normal(&mut rng, 1.0))),
        }
        ws.y.clear();
        for r in 0..k {
            let x: Complex64 = books.iter().zip(&ws.tx).map(|(b, &s)| b.chip(r, s)).sum();
            ws.y.push(ws.h[r] * x + complex_normal(&mut rng, n0));
        }

        let decided = self.det.run(&ws.y, &ws.h, n0, cfg.mpa_iters, &mut ws.mpa);
        ws.tx
            .iter()
            .zip(decided)
            .map(|(&a, &b)| (cfg.labels[a] ^ cfg.labels[b]).count_ones() as u64)
            .sum()
    }

    fn point(&self, index: usize, ebno_db: f64) -> BerPoint {
        let cfg = self.cfg;
        let n0 = n0_from_ebno(ebno_db, cfg.energy_per_bit);
        let mut blocks = 0u64;
        let mut errors = 0u64;
        'waves: while blocks < cfg.max_blocks {
            let wave = ((cfg.max_blocks - blocks) as usize).min(BLOCKS_PER_TASK * TASKS_PER_WAVE);
            let tasks: Vec<_> = par::chunks(wave, BLOCKS_PER_TASK).collect();
            let start = blocks;
            let results = par::map_range(tasks.len(), |t| {
                let mut ws = BlockScratch::default();
                tasks[t]
                    .clone()
                    .map(|b| self.block(index, start + b as u64, n0, &mut ws))
                    .collect::<Vec<_>>()
            });
            for e in results.into_iter().flatten() {
                blocks += 1;
                errors += e;
                if errors >= cfg.min_errors {
                    break 'waves;
                }
            }
        }
        BerPoint::new(ebno_db, n0, blocks, blocks * cfg.bits_per_block(), errors)
    }
}

#[derive(Default)]
struct BlockScratch {
    tx: Vec<usize>,
    h: Vec<Complex64>,
    y: Vec<Complex64>,
    mpa: MpaWorkspace,
}

pub fn simulate(cfg: &SimConfig) -> Result<BerCurve> {
    cfg.validate()?;
    let engine = Engine {
        cfg,
        det: MpaDetector::with_combine(&cfg.books, cfg.combine)?,
    };
    let points = cfg
        .ebno_grid_db
        .iter()
        .enumerate()
        .map(|(i, &db)| engine.point(i, db))
        .collect();
    Ok(BerCurve { points })
}
