//! Estimators for heat samples: k-statistics, bootstrap errors, histograms
//! and the rare-event scan.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream};
use crate::trajectories::{JumpEvent, TrajectoryRecord};

pub const DEFAULT_RESAMPLES: usize = 1000;

/// Unbiased k-statistics `k1..k4`; `k4` is NaN below eight samples.
pub fn k_statistics(x: &[f64]) -> Result<[f64; 4]> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples { need: 3, got: n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let k2 = s2 / (nf - 1.0);
    let k3 = nf * s3 / ((nf - 1.0) * (nf - 2.0));
    let k4 = if n >= 8 {
        (nf * (nf + 1.0) * s4 - 3.0 * (nf - 1.0) * s2 * s2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0))
    } else {
        f64::NAN
    };
    Ok([mean, k2, k3, k4])
}

/// Bootstrap standard error of `stat` with seeded, order-independent resamples.
pub fn bootstrap_se<const K: usize>(
    x: &[f64],
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[f64]) -> [f64; K] + Sync,
) -> Result<[f64; K]> {
    if resamples < 2 {
        return Err(invalid("bootstrap needs at least two resamples"));
    }
    if x.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let n = x.len();
    let draws: Vec<[f64; K]> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(derive_seed(seed, b));
            let sample: Vec<f64> = (0..n).map(|_| x[rng.gen_range(0..n)]).collect();
            stat(&sample)
        })
        .collect();
    let mut out = [0.0; K];
    for (k, slot) in out.iter_mut().enumerate() {
        let vals = draws.iter().map(|d| d[k]);
        let m = vals.clone().sum::<f64>() / resamples as f64;
        let v = vals.map(|v| (v - m).powi(2)).sum::<f64>() / (resamples as f64 - 1.0);
        *slot = v.sqrt();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantEstimate {
    pub n: usize,
    pub k: [f64; 4],
    pub bootstrap_se: [f64; 4],
    /// `k2 / k1`, only when `|k1| > 10 se(k1)`.
    pub fano: Option<f64>,
}

impl CumulantEstimate {
    pub fn fano_se(&self) -> Option<f64> {
        let f = self.fano?;
        let rel = (self.bootstrap_se[1] / self.k[1]).hypot(self.bootstrap_se[0] / self.k[0]);
        Some(f.abs() * rel)
    }
}

pub fn empirical_cumulants(x: &[f64], resamples: usize, seed: u64) -> Result<CumulantEstimate> {
    let k = k_statistics(x)?;
    let bootstrap_se = bootstrap_se(x, resamples, seed, |s| {
        k_statistics(s).unwrap_or([f64::NAN; 4])
    })?;
    let fano = (k[0].abs() > 10.0 * bootstrap_se[0]).then(|| k[1] / k[0]);
    Ok(CumulantEstimate {
        n: x.len(),
        k,
        bootstrap_se,
        fano,
    })
}

/// `ln <e^{-u x}>` by log-sum-exp.
pub fn empirical_cgf(x: &[f64], u: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let m = x.iter().map(|&v| -u * v).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = x.iter().map(|&v| (-u * v - m).exp()).sum();
    Ok(m + (s / x.len() as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinRule {
    FreedmanDiaconis,
    /// Bin width in energy units.
    FixedWidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Counts,
    Probability,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl HeatHistogram {
    /// Bins samples into `edges`; samples outside stretch the first or last bin.
    pub fn with_edges(x: &[f64], edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid(
                "bin edges must be strictly ascending with at least one bin",
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples must be finite"));
        }
        let mut edges = edges.to_vec();
        let nb = edges.len() - 1;
        for &v in x {
            edges[0] = edges[0].min(v);
            edges[nb] = edges[nb].max(v);
        }
        let mut counts = vec![0u64; nb];
        for &v in x {
            let k = edges[1..nb].partition_point(|&e| e <= v);
            counts[k] += 1;
        }
        Ok(Self {
            edges,
            counts,
            total: x.len() as u64,
        })
    }

    pub fn values(&self, mode: Normalization) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| match mode {
                Normalization::Counts => c as f64,
                Normalization::Probability => c as f64 / total,
                Normalization::Density => c as f64 / (total * (w[1] - w[0])),
            })
            .collect()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

const MAX_BINS: usize = 100_000;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn build_histogram(x: &[f64], rule: BinRule) -> Result<HeatHistogram> {
    if x.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let range = hi - lo;
    let width = match rule {
        BinRule::FixedWidth(w) if w > 0.0 && w.is_finite() => w,
        BinRule::FixedWidth(w) => {
            return Err(invalid(format!("bin width must be positive, got {w}")))
        }
        BinRule::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let fd = 2.0 * iqr / (x.len() as f64).cbrt();
            if fd > 0.0 {
                fd
            } else if range > 0.0 {
                range / (x.len() as f64).sqrt().ceil()
            } else {
                1.0
            }
        }
    };
    if range == 0.0 {
        return HeatHistogram::with_edges(x, &[lo - 0.5 * width, lo + 0.5 * width]);
    }
    let nb = ((range / width).ceil() as usize).max(1);
    if nb > MAX_BINS {
        return Err(invalid(format!("{nb} bins exceed the limit of {MAX_BINS}")));
    }
    let edges: Vec<f64> = (0..=nb).map(|k| lo + k as f64 * width).collect();
    HeatHistogram::with_edges(x, &edges)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedTrajectory {
    pub index: usize,
    pub heat: f64,
    pub events: Vec<JumpEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RareEventReport {
    pub total: usize,
    pub flagged: Vec<FlaggedTrajectory>,
    /// Largest heat among flagged trajectories.
    pub max_flagged_heat: Option<f64>,
    /// Largest heat in the whole ensemble.
    pub max_heat: Option<f64>,
}

impl RareEventReport {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.flagged.len() as f64 / self.total as f64
        }
    }
}

/// Flags records with two consecutive events of the same kind.
pub fn rare_event_scan(records: &[TrajectoryRecord]) -> RareEventReport {
    let flagged: Vec<FlaggedTrajectory> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.has_repeated_kind())
        .map(|(index, r)| FlaggedTrajectory {
            index,
            heat: r.heat,
            events: r.events.clone(),
        })
        .collect();
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.reduce(f64::max);
    RareEventReport {
        total: records.len(),
        max_flagged_heat: max_of(&mut flagged.iter().map(|f| f.heat)),
        max_heat: max_of(&mut records.iter().map(|r| r.heat)),
        flagged,
    }
}
