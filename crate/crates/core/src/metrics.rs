//! Run records, attack potency metrics, and cross-seed aggregation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("attack time {t_attack} is not before the last epoch ({n_epochs} epochs)")]
    InvalidAttackTime { t_attack: usize, n_epochs: usize },
    #[error("baseline AAL {0} is not positive; advantage is undefined")]
    NonPositiveBaseline(f64),
    #[error("records come from different configurations: `{0}` vs `{1}`")]
    FingerprintMismatch(String, String),
    #[error("aggregation needs at least two records, got {0}")]
    TooFewRecords(usize),
    #[error("run csv parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Honest-mean test accuracy, a fraction in `[0, 1]`.
    Accuracy,
    /// Honest-mean distance to the honest optimum (quadratic task).
    DistToOpt,
}

impl SeriesKind {
    fn column(self) -> &'static str {
        match self {
            SeriesKind::Accuracy => "honest_mean_accuracy",
            SeriesKind::DistToOpt => "dist_to_opt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub fingerprint: String,
    pub seed: u64,
    pub kind: SeriesKind,
    /// One value per epoch.
    pub values: Vec<f64>,
    pub loss: Vec<f64>,
    pub adversaries: Vec<usize>,
    pub d_avg: Option<f64>,
}

impl RunRecord {
    pub fn n_epochs(&self) -> usize {
        self.values.len()
    }

    /// `epoch,<metric>,honest_mean_loss`, one row per epoch.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,{},honest_mean_loss", self.kind.column())?;
        for (t, (v, l)) in self.values.iter().zip(&self.loss).enumerate() {
            writeln!(w, "{t},{v},{l}")?;
        }
        Ok(())
    }

    /// Reads back a run CSV; the caller supplies the identity fields.
    pub fn read_csv<R: BufRead>(reader: R, fingerprint: &str, seed: u64) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let kind = [SeriesKind::Accuracy, SeriesKind::DistToOpt]
            .into_iter()
            .find(|k| header == format!("epoch,{},honest_mean_loss", k.column()))
            .ok_or_else(|| MetricsError::Parse { line: 1, msg: format!("unexpected header `{header}`") })?;
        let mut values = Vec::new();
        let mut loss = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| MetricsError::Parse { line: i + 2, msg };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 columns, got {}", cols.len())));
            }
            if cols[0].parse::<usize>().ok() != Some(values.len()) {
                return Err(bad(format!("epoch `{}` out of sequence", cols[0])));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
            values.push(num(cols[1])?);
            loss.push(num(cols[2])?);
        }
        Ok(Self {
            fingerprint: fingerprint.to_string(),
            seed,
            kind,
            values,
            loss,
            adversaries: Vec::new(),
            d_avg: None,
        })
    }
}

/// An attacked run with its clean twin (same graph, shards, init, batches).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub attacked: RunRecord,
    pub clean: RunRecord,
}

/// Sum over `t_attack..n_epochs` of `clean - attacked`, in percentage points.
pub fn attack_accuracy_loss(pr: &PairedRun, t_attack: usize) -> Result<f64> {
    aal_of_series(&pr.clean.values, &pr.attacked.values, t_attack)
}

pub fn aal_of_series(clean: &[f64], attacked: &[f64], t_attack: usize) -> Result<f64> {
    if clean.len() != attacked.len() {
        return Err(MetricsError::LengthMismatch(clean.len(), attacked.len()));
    }
    if t_attack >= clean.len() {
        return Err(MetricsError::InvalidAttackTime { t_attack, n_epochs: clean.len() });
    }
    Ok(clean[t_attack..]
        .iter()
        .zip(&attacked[t_attack..])
        .map(|(c, a)| 100.0 * c - 100.0 * a)
        .sum())
}

/// Relative improvement of the best attack over the next best, in percent.
pub fn attack_advantage(aal_best: f64, aal_next: f64) -> Result<f64> {
    if aal_next <= 0.0 || aal_next.is_nan() {
        return Err(MetricsError::NonPositiveBaseline(aal_next));
    }
    Ok(100.0 * (aal_best - aal_next) / aal_next)
}

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Per-epoch mean, sample standard deviation, and normal 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl SeriesStats {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,mean,std,ci_low,ci_high")?;
        for t in 0..self.mean.len() {
            writeln!(w, "{t},{},{},{},{}", self.mean[t], self.std[t], self.ci_low[t], self.ci_high[t])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn scalar_stats(xs: &[f64]) -> ScalarStats {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    ScalarStats { n, mean, std }
}

fn check_compatible(records: &[&RunRecord]) -> Result<()> {
    if records.len() < 2 {
        return Err(MetricsError::TooFewRecords(records.len()));
    }
    let first = records[0];
    for r in &records[1..] {
        if r.fingerprint != first.fingerprint {
            return Err(MetricsError::FingerprintMismatch(first.fingerprint.clone(), r.fingerprint.clone()));
        }
        if r.values.len() != first.values.len() {
            return Err(MetricsError::LengthMismatch(first.values.len(), r.values.len()));
        }
    }
    Ok(())
}

/// Pointwise statistics of the metric series across seeds.
pub fn aggregate(records: &[RunRecord]) -> Result<SeriesStats> {
    let refs: Vec<&RunRecord> = records.iter().collect();
    check_compatible(&refs)?;
    let n = records.len();
    let epochs = records[0].values.len();
    let mut out = SeriesStats {
        n,
        mean: Vec::with_capacity(epochs),
        std: Vec::with_capacity(epochs),
        ci_low: Vec::with_capacity(epochs),
        ci_high: Vec::with_capacity(epochs),
    };
    let mut column = vec![0.0; n];
    for t in 0..epochs {
        for (c, r) in column.iter_mut().zip(records) {
            *c = r.values[t];
        }
        let s = scalar_stats(&column);
        let half = Z95 * s.std / (n as f64).sqrt();
        out.mean.push(s.mean);
        out.std.push(s.std);
        out.ci_low.push(s.mean - half);
        out.ci_high.push(s.mean + half);
    }
    Ok(out)
}

/// AAL mean and spread across paired seeds.
pub fn aggregate_aal(pairs: &[PairedRun], t_attack: usize) -> Result<(ScalarStats, Vec<f64>)> {
    let attacked: Vec<&RunRecord> = pairs.iter().map(|p| &p.attacked).collect();
    check_compatible(&attacked)?;
    let aals = pairs
        .iter()
        .map(|p| attack_accuracy_loss(p, t_attack))
        .collect::<Result<Vec<f64>>>()?;
    Ok((scalar_stats(&aals), aals))
}

/// One row of the strategy summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub aal: ScalarStats,
    /// Advantage over the strongest other strategy; `None` when undefined.
    pub advantage_vs_next_best: Option<f64>,
}

/// Builds summary rows, computing each strategy's advantage over the best of
/// the remaining strategies.
pub fn summarize(entries: &[(String, ScalarStats)]) -> Vec<SummaryRow> {
    entries
        .iter()
        .enumerate()
        .map(|(i, (name, aal))| {
            let rival = entries
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (_, s))| s.mean)
                .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));
            SummaryRow {
                strategy: name.clone(),
                aal: *aal,
                advantage_vs_next_best: rival.and_then(|r| attack_advantage(aal.mean, r).ok()),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "strategy,aal_mean,aal_std,n_seeds,advantage_vs_next_best")?;
    for r in rows {
        let adv = r.advantage_vs_next_best.map_or_else(|| "undefined".to_string(), |a| a.to_string());
        writeln!(w, "{},{},{},{},{adv}", r.strategy, r.aal.mean, r.aal.std, r.aal.n)?;
    }
    Ok(())
}
