use serde::{Deserialize, Serialize};

use super::{recompute_report, TraceRecord};
use crate::error::Result;
use crate::metrics::{drop_rate, BehavioralReport};
use crate::strategies::StrategyKind;

/// How a group's drop percentage is aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    /// Mean of per-run drop rates.
    #[default]
    PerRun,
    /// Eq. 3 applied to the group's mean depths.
    RatioOfMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub d_sym: f64,
    pub d_ground: f64,
    pub drop_pct: Option<f64>,
    /// Collapsed chains over all hypotheses in the group.
    pub failure_pct: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub mode: DropMode,
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups completed runs by strategy and aggregates their recomputed
/// reports. Requested strategies with no runs are omitted with a warning.
pub fn compare_runs(records: &[TraceRecord], requested: &[StrategyKind], mode: DropMode) -> ComparisonTable {
    let mut table = ComparisonTable {
        mode,
        ..Default::default()
    };
    for r in records.iter().filter(|r| r.is_aborted()) {
        table
            .warnings
            .push(format!("skipping aborted run `{}` ({})", r.query_id, r.config.strategy.kind.as_str()));
    }
    for &kind in requested {
        let reports: Vec<BehavioralReport> = records
            .iter()
            .filter(|r| !r.is_aborted() && r.config.strategy.kind == kind)
            .map(recompute_report)
            .collect();
        if reports.is_empty() {
            table.warnings.push(format!("no runs for strategy `{}`; row omitted", kind.as_str()));
            continue;
        }
        let d_sym = mean(reports.iter().map(|r| r.d_sym)).unwrap_or_default();
        let d_ground = mean(reports.iter().map(|r| r.d_ground)).unwrap_or_default();
        let drop = match mode {
            DropMode::PerRun => mean(reports.iter().filter_map(|r| r.drop_rate)),
            DropMode::RatioOfMeans => drop_rate(d_sym, d_ground),
        };
        let hypotheses: usize = reports.iter().map(|r| r.n_hypotheses).sum();
        let collapsed: usize = reports.iter().map(|r| r.n_collapsed).sum();
        table.rows.push(ComparisonRow {
            strategy: kind,
            runs: reports.len(),
            d_sym,
            d_ground,
            drop_pct: drop.map(|d| 100.0 * d),
            failure_pct: (hypotheses > 0).then(|| 100.0 * collapsed as f64 / hypotheses as f64),
        });
    }
    table
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.decimals$}"))
}

impl ComparisonTable {
    pub fn row(&self, kind: StrategyKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == kind)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["Method", "Runs", "Symbolic Depth", "Grounded Depth", "Drop (%)", "Failure (%)"])?;
        for r in &self.rows {
            w.write_record([
                r.strategy.display_name().to_string(),
                r.runs.to_string(),
                format!("{:.2}", r.d_sym),
                format!("{:.2}", r.d_ground),
                opt(r.drop_pct, 1),
                opt(r.failure_pct, 1),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:>4} {:>9} {:>9} {:>9} {:>12}\n",
            "Method", "Runs", "Symbolic", "Grounded", "Drop (%)", "Failure (%)"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>4} {:>9.2} {:>9.2} {:>9} {:>12}\n",
                r.strategy.display_name(),
                r.runs,
                r.d_sym,
                r.d_ground,
                opt(r.drop_pct, 1),
                opt(r.failure_pct, 1)
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// One recomputed report per trace, in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub query_id: String,
    pub strategy: StrategyKind,
    pub report: BehavioralReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

pub fn metrics_table(records: &[TraceRecord]) -> MetricsTable {
    MetricsTable {
        rows: records
            .iter()
            .map(|r| MetricsRow {
                query_id: r.query_id.clone(),
                strategy: r.config.strategy.kind,
                report: recompute_report(r),
            })
            .collect(),
    }
}

impl MetricsTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "Query",
            "Strategy",
            "Bridge",
            "Jaccard",
            "Symbolic Depth",
            "Grounded Depth",
            "Drop Rate",
            "Failure Rate",
            "Hypotheses",
            "Abstention",
        ])?;
        for row in &self.rows {
            let r = &row.report;
            w.write_record([
                row.query_id.clone(),
                row.strategy.as_str().to_string(),
                if r.bridge_attempted { "Yes" } else { "No" }.to_string(),
                opt(r.diversity_jaccard, 3),
                format!("{:.2}", r.d_sym),
                format!("{:.2}", r.d_ground),
                opt(r.drop_rate, 2),
                opt(r.failure_rate, 2),
                r.n_hypotheses.to_string(),
                r.abstention.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:<15} {:>6} {:>7} {:>8} {:>8} {:>6} {:>7} {:>4} {:>10}\n",
            "Query", "Strategy", "Bridge", "Jaccard", "D_sym", "D_ground", "Drop", "Failure", "Hyp", "Abstention"
        );
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{:<28} {:<15} {:>6} {:>7} {:>8.2} {:>8.2} {:>6} {:>7} {:>4} {:>10}\n",
                row.query_id,
                row.strategy.as_str(),
                if r.bridge_attempted { "Yes" } else { "No" },
                opt(r.diversity_jaccard, 3),
                r.d_sym,
                r.d_ground,
                opt(r.drop_rate, 2),
                opt(r.failure_rate, 2),
                r.n_hypotheses,
                r.abstention
            ));
        }
        out
    }
}
