//! Zipf popularity and per-node local popularity synthesis.
//!
//! Every node gets the same Zipf probability values, assigned over its own
//! ranking of the library. Rankings start from the global order and are
//! perturbed by bounded-window swaps, so nearby ranks trade places while the
//! per-node distribution keeps its Zipf shape. The global popularity is the
//! rate-weighted mixture of the rows.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stream_rng, FileId, NodeId, Scenario, Stream};

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    pub z: f64,
    pub library_size: usize,
}

impl ZipfParams {
    pub fn new(z: f64, library_size: usize) -> Result<Self> {
        if !(z >= 0.0 && z.is_finite()) || library_size == 0 {
            return Err(Error::Popularity(format!(
                "zipf needs z >= 0 and F >= 1 (z={z}, F={library_size})"
            )));
        }
        Ok(Self { z, library_size })
    }
}

/// `p_f = f^-z / sum_g g^-z` over ranks `f = 1..=F`.
pub fn zipf_pmf(p: ZipfParams) -> Vec<f64> {
    let raw: Vec<f64> = (1..=p.library_size)
        .map(|f| (f as f64).powf(-p.z))
        .collect();
    // summing smallest first keeps the normalizer accurate for large F
    let total: f64 = raw.iter().rev().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Local popularities, load weights and the global mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityModel {
    local: Vec<Vec<f64>>,
    weights: Vec<f64>,
    global: Vec<f64>,
}

impl PopularityModel {
    /// Builds a model from an M×F matrix, deriving weights from `rates`.
    pub fn from_local(local: Vec<Vec<f64>>, rates: &[f64]) -> Result<Self> {
        if local.len() != rates.len() {
            return Err(Error::LengthMismatch {
                what: "popularity rows vs rates",
                expected: rates.len(),
                got: local.len(),
            });
        }
        let width = local.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::Popularity("empty popularity matrix".into()));
        }
        for (m, row) in local.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Popularity(format!(
                    "row {m} has {} entries, expected {width}",
                    row.len()
                )));
            }
            if let Some(f) = row.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Popularity(format!(
                    "p[{m}][{f}] = {} outside [0, 1]",
                    row[f]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Popularity(format!("row {m} sums to {sum}")));
            }
        }
        if rates.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(Error::Popularity("rates must be positive".into()));
        }
        let total: f64 = rates.iter().sum();
        let weights: Vec<f64> = rates.iter().map(|r| r / total).collect();
        let global = (0..width)
            .map(|f| local.iter().zip(&weights).map(|(row, w)| w * row[f]).sum())
            .collect();
        Ok(Self {
            local,
            weights,
            global,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.local.len()
    }

    pub fn library_size(&self) -> usize {
        self.global.len()
    }

    pub fn row(&self, m: NodeId) -> &[f64] {
        &self.local[m]
    }

    pub fn local(&self) -> &[Vec<f64>] {
        &self.local
    }

    pub fn p(&self, m: NodeId, f: FileId) -> f64 {
        self.local[m][f]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn global(&self) -> &[f64] {
        &self.global
    }

    /// Checks the model against a scenario's shape.
    pub fn check_shape(&self, s: &Scenario) -> Result<()> {
        if self.num_nodes() != s.num_nodes {
            return Err(Error::LengthMismatch {
                what: "popularity rows vs M",
                expected: s.num_nodes,
                got: self.num_nodes(),
            });
        }
        if self.library_size() != s.library_size {
            return Err(Error::LengthMismatch {
                what: "popularity columns vs F",
                expected: s.library_size,
                got: self.library_size(),
            });
        }
        Ok(())
    }

    /// Reads an M×F matrix: a header row of file ids, then one row per node.
    pub fn read_csv<R: Read>(reader: R, rates: &[f64]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        for (i, h) in header.iter().enumerate() {
            let id: usize = h
                .trim()
                .parse()
                .map_err(|_| Error::Popularity(format!("bad file id `{h}` in header")))?;
            if id != i {
                return Err(Error::Popularity(format!(
                    "header column {i} names file {id}"
                )));
            }
        }
        let mut local = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Popularity(format!("bad probability `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            local.push(row);
        }
        Self::from_local(local, rates)
    }

    pub fn read_csv_path(path: &Path, rates: &[f64]) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, rates)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.library_size()).map(|f| f.to_string()))?;
        for row in &self.local {
            w.write_record(row.iter().map(|p| p.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranking permutation: entry `r` is the file at rank `r`. Each position swaps
/// with a uniformly drawn position at most `window` ranks further down.
fn windowed_ranking<R: Rng>(library_size: usize, window: usize, rng: &mut R) -> Vec<FileId> {
    let mut ranking: Vec<FileId> = (0..library_size).collect();
    if window == 0 {
        return ranking;
    }
    for i in 0..library_size {
        let hi = (i + window).min(library_size - 1);
        let j = rng.gen_range(i..=hi);
        ranking.swap(i, j);
    }
    ranking
}

/// Per-node Zipf popularity over node-specific rankings.
///
/// The swap window is `round(locality * F)`; `locality = 0` leaves every node
/// on the global Zipf ranking.
pub fn synthesize_local_popularity(s: &Scenario, locality: f64) -> Result<PopularityModel> {
    if !(0.0..=1.0).contains(&locality) {
        return Err(Error::InvalidLocality(locality));
    }
    let zipf = zipf_pmf(ZipfParams::new(s.zipf_z, s.library_size)?);
    let window = (locality * s.library_size as f64).round() as usize;
    let mut rng = stream_rng(s.seed, Stream::Popularity);
    let local = (0..s.num_nodes)
        .map(|_| {
            let ranking = windowed_ranking(s.library_size, window, &mut rng);
            let mut row = vec![0.0; s.library_size];
            for (rank, &file) in ranking.iter().enumerate() {
                row[file] = zipf[rank];
            }
            row
        })
        .collect();
    PopularityModel::from_local(local, &s.rates)
}

/// Popularity for a scenario using its own locality setting.
pub fn scenario_popularity(s: &Scenario) -> Result<PopularityModel> {
    synthesize_local_popularity(s, s.locality)
}

/// Indices of the `k` largest values, by value descending then index ascending.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut order = rank_descending(values);
    order.truncate(k.min(values.len()));
    order
}

/// All indices sorted by value descending, ties by lower index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Sum of the `k` largest values (all of them when `k >= len`).
pub fn top_k_sum(values: &[f64], k: usize) -> f64 {
    if k >= values.len() {
        return values.iter().sum();
    }
    if k == 0 {
        return 0.0;
    }
    let mut buf = values.to_vec();
    buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    buf[..k].iter().sum()
}
