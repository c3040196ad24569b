//! Windowed correlation distances over a panel of series.
//!
//! Pearson correlations `c` are mapped to the metric `d = sqrt(2 (1 - c))`,
//! which ranges over `[0, 2]`. The mean off-diagonal distance per window traces
//! how tightly the panel moves together; single-linkage clustering of one
//! window's distances gives its grouping.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{diff_returns, ReturnMode, TimeSeries};

/// Common-time panel of at least two series.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub labels: Vec<String>,
    pub series: Vec<TimeSeries>,
    /// Observations dropped from each input during alignment.
    pub dropped: Vec<usize>,
}

pub const MIN_COMMON: usize = 8;

/// Restricts every series to the times all of them share.
pub fn align(raw: &[TimeSeries]) -> Result<Panel> {
    if raw.len() < 2 {
        return Err(Error::InsufficientData {
            got: raw.len(),
            need: 2,
        });
    }
    let key = |t: f64| t.to_bits();
    let mut common: BTreeSet<u64> = raw[0].times().iter().map(|t| key(*t)).collect();
    for s in &raw[1..] {
        let here: BTreeSet<u64> = s.times().iter().map(|t| key(*t)).collect();
        common = common.intersection(&here).copied().collect();
    }
    if common.len() < MIN_COMMON {
        return Err(Error::InsufficientData {
            got: common.len(),
            need: MIN_COMMON,
        });
    }
    let mut series = Vec::with_capacity(raw.len());
    let mut dropped = Vec::with_capacity(raw.len());
    for s in raw {
        let keep: Vec<usize> = (0..s.len())
            .filter(|&i| common.contains(&key(s.times()[i])))
            .collect();
        dropped.push(s.len() - keep.len());
        let times = keep.iter().map(|&i| s.times()[i]).collect();
        let values = keep.iter().map(|&i| s.values()[i]).collect();
        let mut aligned = TimeSeries::new(s.label(), times, values, s.kind())?;
        if let Some(d) = s.dates() {
            aligned = aligned.with_dates(keep.iter().map(|&i| d[i]).collect())?;
        }
        series.push(aligned);
    }
    Ok(Panel {
        labels: raw.iter().map(|s| s.label().to_string()).collect(),
        series,
        dropped,
    })
}

impl Panel {
    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        self.series[0].times()
    }

    /// Log growth rates of every member.
    pub fn growth_rates(&self) -> Result<Panel> {
        let series = self
            .series
            .iter()
            .map(|s| diff_returns(s, ReturnMode::Log))
            .collect::<Result<Vec<_>>>()?;
        Ok(Panel {
            labels: self.labels.clone(),
            series,
            dropped: self.dropped.clone(),
        })
    }

    fn window_range(&self, start: f64, end: f64) -> (usize, usize) {
        let t = self.times();
        (
            t.partition_point(|x| *x < start),
            t.partition_point(|x| *x <= end),
        )
    }
}

/// Pearson correlations with an explicit mask: `None` where a member has zero
/// variance inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<Option<f64>>>,
    pub window: (f64, f64),
    /// Members whose variance vanished in the window.
    pub degenerate: Vec<String>,
}

fn pearson_block(cols: &[&[f64]]) -> (Vec<Vec<Option<f64>>>, Vec<bool>) {
    let k = cols.len();
    let n = cols[0].len() as f64;
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let ss: Vec<f64> = centred
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();
    let degenerate: Vec<bool> = ss
        .iter()
        .zip(cols)
        .map(|(s, c)| {
            let scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            !(*s > 1e-24 * scale * scale * n) || *s == 0.0
        })
        .collect();
    let mut out = vec![vec![None; k]; k];
    for i in 0..k {
        if degenerate[i] {
            continue;
        }
        out[i][i] = Some(1.0);
        for j in i + 1..k {
            if degenerate[j] {
                continue;
            }
            let cov: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let c = (cov / (ss[i] * ss[j]).sqrt()).clamp(-1.0, 1.0);
            out[i][j] = Some(c);
            out[j][i] = Some(c);
        }
    }
    (out, degenerate)
}

/// Correlations over observations with times in `[start, end]`.
pub fn corr_matrix(p: &Panel, window: (f64, f64)) -> Result<CorrMatrix> {
    let (lo, hi) = p.window_range(window.0, window.1);
    corr_by_index(p, lo, hi)
}

fn corr_by_index(p: &Panel, lo: usize, hi: usize) -> Result<CorrMatrix> {
    if hi.saturating_sub(lo) < 4 {
        return Err(Error::InsufficientData {
            got: hi.saturating_sub(lo),
            need: 4,
        });
    }
    let cols: Vec<&[f64]> = p.series.iter().map(|s| &s.values()[lo..hi]).collect();
    let (entries, degenerate) = pearson_block(&cols);
    Ok(CorrMatrix {
        labels: p.labels.clone(),
        entries,
        window: (p.times()[lo], p.times()[hi - 1]),
        degenerate: p
            .labels
            .iter()
            .zip(&degenerate)
            .filter(|(_, d)| **d)
            .map(|(l, _)| l.clone())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<Option<f64>>>,
    pub window: (f64, f64),
}

/// `d = sqrt(2 (1 - c))`; masked correlations stay masked.
pub fn to_distance(c: &CorrMatrix) -> DistanceMatrix {
    let entries = c
        .entries
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    v.map(|c| {
                        if i == j {
                            0.0
                        } else {
                            (2.0 * (1.0 - c.clamp(-1.0, 1.0))).sqrt()
                        }
                    })
                })
                .collect()
        })
        .collect();
    DistanceMatrix {
        labels: c.labels.clone(),
        entries,
        window: c.window,
    }
}

impl DistanceMatrix {
    /// Builds a complete matrix from plain values.
    pub fn from_values(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::Config(
                "distance matrix must be square and labelled".into(),
            ));
        }
        Ok(Self {
            labels,
            entries: values
                .into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
            window: (0.0, 0.0),
        })
    }

    pub fn is_masked(&self) -> bool {
        self.entries.iter().flatten().any(Option::is_none)
    }

    /// Mean and count of the unmasked entries above the diagonal.
    pub fn mean_off_diagonal(&self) -> (Option<f64>, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        for i in 0..self.labels.len() {
            for j in i + 1..self.labels.len() {
                if let Some(d) = self.entries[i][j] {
                    sum += d;
                    count += 1;
                }
            }
        }
        ((count > 0).then(|| sum / count as f64), count)
    }

    /// Square CSV with a labelled header row and first column; masked cells
    /// are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.entries) {
            out.push_str(l);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    let _ = write!(out, "{v:?}");
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub window_end: f64,
    pub mean_distance: Option<f64>,
    pub n_pairs: usize,
}

/// Mean off-diagonal distance over right-aligned windows of `window_len`
/// observations advancing by `step`.
pub fn rolling_mean_distance(
    p: &Panel,
    window_len: usize,
    step: usize,
) -> Result<Vec<TrajectoryPoint>> {
    if step == 0 {
        return Err(Error::Config("step must be at least 1".into()));
    }
    if window_len < 4 {
        return Err(Error::Config(
            "window must hold at least 4 observations".into(),
        ));
    }
    if window_len > p.len() {
        return Err(Error::TooShort {
            len: p.len(),
            min: window_len,
        });
    }
    let ends: Vec<usize> = (window_len..=p.len()).step_by(step).collect();
    ends.par_iter()
        .map(|&end| {
            let d = to_distance(&corr_by_index(p, end - window_len, end)?);
            let (mean_distance, n_pairs) = d.mean_off_diagonal();
            Ok(TrajectoryPoint {
                window_end: p.times()[end - 1],
                mean_distance,
                n_pairs,
            })
        })
        .collect()
}

pub fn trajectory_to_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("window_end,mean_distance,n_pairs\n");
    for p in points {
        let m = p
            .mean_distance
            .map(|v| format!("{v:?}"))
            .unwrap_or_default();
        let _ = writeln!(out, "{:?},{},{}", p.window_end, m, p.n_pairs);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Single,
    Average,
}

/// One agglomeration step. Leaves are `0..n`; the cluster formed by merge `i`
/// gets id `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree {
    pub labels: Vec<String>,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

struct Cluster {
    id: usize,
    members: Vec<usize>,
    /// Smallest member label, used for tie-breaking.
    key: String,
}

/// Agglomerative clustering. Among equally close pairs the one whose
/// `(smaller key, larger key)` label pair sorts first merges first, where a
/// cluster's key is its lexicographically smallest member label.
pub fn hierarchical_cluster(d: &DistanceMatrix, linkage: Linkage) -> Result<LinkageTree> {
    if d.is_masked() {
        return Err(Error::Masked);
    }
    let n = d.labels.len();
    let dist = |i: usize, j: usize| d.entries[i][j].expect("unmasked");
    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            id: i,
            members: vec![i],
            key: d.labels[i].clone(),
        })
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while clusters.len() > 1 {
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (ci, cj) = (&clusters[i], &clusters[j]);
                let h = match linkage {
                    Linkage::Single => ci
                        .members
                        .iter()
                        .flat_map(|a| cj.members.iter().map(move |b| (*a, *b)))
                        .map(|(a, b)| dist(a, b))
                        .fold(f64::INFINITY, f64::min),
                    Linkage::Average => {
                        let total: f64 = ci
                            .members
                            .iter()
                            .flat_map(|a| cj.members.iter().map(move |b| (*a, *b)))
                            .map(|(a, b)| dist(a, b))
                            .sum();
                        total / (ci.members.len() * cj.members.len()) as f64
                    }
                };
                let pair = if ci.key <= cj.key {
                    (ci.key.clone(), cj.key.clone())
                } else {
                    (cj.key.clone(), ci.key.clone())
                };
                let better = match &best {
                    None => true,
                    Some((bh, bp, _, _)) => h < *bh || (h == *bh && pair < *bp),
                };
                if better {
                    best = Some((h, pair, i, j));
                }
            }
        }
        let (height, _, i, j) = best.expect("at least one pair");
        let cj = clusters.remove(j);
        let ci = clusters.remove(i);
        let (a, b) = if ci.key <= cj.key {
            (ci.id, cj.id)
        } else {
            (cj.id, ci.id)
        };
        let mut members = ci.members;
        members.extend(cj.members);
        members.sort_unstable();
        let key = if ci.key <= cj.key { ci.key } else { cj.key };
        merges.push(Merge {
            a,
            b,
            height,
            size: members.len(),
        });
        clusters.push(Cluster {
            id: n + merges.len() - 1,
            members,
            key,
        });
    }
    Ok(LinkageTree {
        labels: d.labels.clone(),
        linkage,
        merges,
    })
}
