use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{GridRow, Mode};
use crate::stats::wilcoxon_one_sided;

/// p-values at or below this count as significant.
pub const SIGNIFICANCE: f64 = 0.05;

/// Entropy against naive for one (model, group) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub group: String,
    /// Paired (dataset, configuration) runs.
    pub pairs: usize,
    pub naive_auc: f64,
    pub entropy_auc: f64,
    pub optimal_auc: Option<f64>,
    /// Total entropy-mode training time over total naive time.
    pub time_ratio: Option<f64>,
    /// Mean entropy-mode iterations over mean naive iterations.
    pub iter_ratio: f64,
    /// One-sided paired Wilcoxon for entropy > naive; `None` when every
    /// difference is zero.
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

struct Pair<'a> {
    naive: &'a GridRow,
    entropy: &'a GridRow,
    optimal: Option<&'a GridRow>,
}

/// Pairs naive and entropy runs by (dataset, config hash) and summarizes
/// them per model and group, plus an `all` row per model when there is more
/// than one group.
///
/// Failed runs and runs without an AUC are ignored. The naive and entropy
/// runs must cover the same datasets.
pub fn build_report(rows: &[GridRow]) -> Result<Report> {
    let usable: Vec<&GridRow> = rows.iter().filter(|r| r.succeeded() && r.auc.is_some()).collect();
    let datasets = |mode: Mode| -> BTreeSet<&str> {
        usable.iter().filter(|r| r.mode == mode).map(|r| r.dataset.as_str()).collect()
    };
    let (naive_ds, entropy_ds) = (datasets(Mode::Naive), datasets(Mode::Entropy));
    if naive_ds.is_empty() || entropy_ds.is_empty() {
        return Err(Error::invalid("report needs completed naive and entropy runs"));
    }
    if naive_ds != entropy_ds {
        let only: Vec<&str> = naive_ds.symmetric_difference(&entropy_ds).copied().collect();
        return Err(Error::invalid(format!(
            "naive and entropy runs cover different datasets: {}",
            only.join(", ")
        )));
    }

    let mut by_key: BTreeMap<(&str, &str), [Option<&GridRow>; 3]> = BTreeMap::new();
    for r in &usable {
        let slot = match r.mode {
            Mode::Naive => 0,
            Mode::Entropy => 1,
            Mode::Optimal => 2,
        };
        by_key.entry((&r.dataset, &r.config_hash)).or_default()[slot] = Some(r);
    }
    let pairs: Vec<Pair> = by_key
        .values()
        .filter_map(|s| match s {
            [Some(n), Some(e), o] => Some(Pair {
                naive: n,
                entropy: e,
                optimal: *o,
            }),
            _ => None,
        })
        .collect();

    let mut cells: BTreeMap<(&str, &str), Vec<&Pair>> = BTreeMap::new();
    for p in &pairs {
        cells.entry((&p.naive.model, &p.naive.group)).or_default().push(p);
    }
    let mut out = Vec::new();
    let models: BTreeSet<&str> = cells.keys().map(|k| k.0).collect();
    for model in models {
        let groups: Vec<(&str, &Vec<&Pair>)> = cells
            .iter()
            .filter(|(k, _)| k.0 == model)
            .map(|(k, v)| (k.1, v))
            .collect();
        for (group, ps) in &groups {
            out.push(summarize(model, group, ps)?);
        }
        if groups.len() > 1 {
            let all: Vec<&Pair> = groups.iter().flat_map(|(_, ps)| ps.iter().copied()).collect();
            out.push(summarize(model, "all", &all)?);
        }
    }
    Ok(Report { rows: out })
}

fn summarize(model: &str, group: &str, pairs: &[&Pair]) -> Result<ReportRow> {
    let n = pairs.len() as f64;
    let naive: Vec<f64> = pairs.iter().map(|p| p.naive.auc.unwrap_or(f64::NAN)).collect();
    let entropy: Vec<f64> = pairs.iter().map(|p| p.entropy.auc.unwrap_or(f64::NAN)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let optimal_auc = if pairs.iter().all(|p| p.optimal.is_some()) {
        Some(mean(&pairs.iter().filter_map(|p| p.optimal.and_then(|o| o.auc)).collect::<Vec<_>>()))
    } else {
        None
    };
    let times: Option<(f64, f64)> = pairs.iter().try_fold((0.0, 0.0), |(a, b), p| {
        Some((a + p.entropy.wall_time_s?, b + p.naive.wall_time_s?))
    });
    let time_ratio = times.and_then(|(e, nv)| (nv > 0.0).then_some(e / nv));
    let iters = |f: fn(&Pair) -> Option<usize>| pairs.iter().filter_map(|p| f(p)).sum::<usize>() as f64 / n;
    let naive_iters = iters(|p| p.naive.total_iters);
    let iter_ratio = if naive_iters > 0.0 {
        iters(|p| p.entropy.total_iters) / naive_iters
    } else {
        1.0
    };

    let p_value = match wilcoxon_one_sided(&entropy, &naive) {
        Ok(t) => Some(t.p_value),
        Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ReportRow {
        model: model.to_string(),
        group: group.to_string(),
        pairs: pairs.len(),
        naive_auc: mean(&naive),
        entropy_auc: mean(&entropy),
        optimal_auc,
        time_ratio,
        iter_ratio,
        p_value,
        significant: p_value.is_some_and(|p| p <= SIGNIFICANCE),
    })
}

impl Report {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "model",
            "group",
            "pairs",
            "naive_auc",
            "entropy_auc",
            "optimal_auc",
            "time_ratio",
            "iter_ratio",
            "p_value",
            "significant",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.group.clone(),
                r.pairs.to_string(),
                format!("{:.6}", r.naive_auc),
                format!("{:.6}", r.entropy_auc),
                opt(r.optimal_auc),
                opt(r.time_ratio),
                format!("{:.6}", r.iter_ratio),
                opt(r.p_value),
                r.significant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:<10} {:>5} {:>8} {:>8} {:>8} {:>6} {:>6} {:>8}",
            "model", "group", "pairs", "naive", "entropy", "optimal", "time", "iters", "p"
        )?;
        let opt = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| "n/a".into());
        for r in &self.rows {
            writeln!(
                f,
                "{:<6} {:<10} {:>5} {:>8.3} {:>8.3} {:>8} {:>6} {:>6.3} {:>8}{}",
                r.model,
                r.group,
                r.pairs,
                r.naive_auc,
                r.entropy_auc,
                opt(r.optimal_auc, 3),
                opt(r.time_ratio, 3),
                r.iter_ratio,
                opt(r.p_value, 4),
                if r.significant { " *" } else { "" }
            )?;
        }
        Ok(())
    }
}
