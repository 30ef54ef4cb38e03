use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::analysis::{ClusterReport, Projection2D};
use crate::error::{Error, Result};
use crate::training::RunManifest;

/// Bumped whenever a field is renamed or its meaning changes.
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// A number together with the manifest id of the run that produced it.
/// Scores are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub run: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedClusterReport {
    #[serde(flatten)]
    pub report: ClusterReport,
    pub run: String,
}

/// Everything one pipeline run reports.
///
/// Metric keys:
/// - `task_f1/overall`, `task_f1/cross_lingual` (all non-pivot languages
///   pooled) and `task_f1/<language>`: task macro F1 on the task test split
/// - `lid_f1/task_test` and `lid_f1/lid_test`: the retrained language probe
///   on task test data and on LID test data
/// - `v_measure/<dataset>/<annotation>`: mean V-measure of the cluster reports
///
/// Cluster reports and projections are keyed `task/labels`, `task/languages`,
/// `lid/languages` and `task`, `lid` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub schema_version: u32,
    /// `initial` for a frozen-encoder run, otherwise the regime name.
    pub column: String,
    pub manifest: RunManifest,
    pub pipeline: PipelineConfig,
    pub label_names: Vec<String>,
    pub language_names: Vec<String>,
    pub metrics: BTreeMap<String, Metric>,
    pub clusters: BTreeMap<String, TracedClusterReport>,
    pub projections: BTreeMap<String, Projection2D>,
}

impl ResultsBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ResultsBundle = serde_json::from_str(text)?;
        if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "bundle schema version {} (expected {BUNDLE_SCHEMA_VERSION})",
                bundle.schema_version
            )));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).map(|m| m.value)
    }

    /// Table of metrics as percentages with one decimal place.
    pub fn summary(&self) -> String {
        let mut s = format!("run {} ({})\n", self.manifest.id, self.column);
        for (k, m) in &self.metrics {
            let _ = writeln!(s, "{k:<28} {:>6}", percent(m.value));
        }
        s
    }
}

pub(crate) fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Which projection to export and which annotation the plot is meant to be
/// colored by. Every CSV carries both annotation columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotColor {
    Labels,
    Languages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotDataset {
    Task,
    Lid,
}

impl PlotDataset {
    pub fn key(self) -> &'static str {
        match self {
            PlotDataset::Task => "task",
            PlotDataset::Lid => "lid",
        }
    }
}

/// Writes the requested projection as CSV (`x,y,label,language`) and returns
/// the number of rows written.
pub fn export_plot_data(
    bundle: &ResultsBundle,
    color: PlotColor,
    dataset: PlotDataset,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let projection = bundle
        .projections
        .get(dataset.key())
        .ok_or_else(|| Error::invalid(format!("bundle has no {} projection", dataset.key())))?;
    if color == PlotColor::Labels && projection.points.iter().any(|p| p.label.is_none()) {
        return Err(Error::invalid(format!(
            "the {} projection has no task labels to color by",
            dataset.key()
        )));
    }
    projection.write_csv(path)?;
    Ok(projection.points.len())
}

/// One bundle's value for a metric, relative to the first bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Delta {
    Value { value: f64, delta: f64, run: String },
    /// The metric is missing from this bundle or from the baseline.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub baseline: Option<Metric>,
    /// One entry per compared bundle after the baseline.
    pub deltas: Vec<Delta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    /// Column name and run id of every bundle, baseline first.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn row(&self, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Plain-text table; deltas are percentage points with one decimal.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<28}", "metric");
        for (col, run) in &self.columns {
            let _ = write!(s, " {:>20}", format!("{col}:{run}"));
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<28}", row.metric);
            let _ = write!(s, " {:>20}", row.baseline.as_ref().map_or("gap".to_string(), |m| percent(m.value)));
            for d in &row.deltas {
                let cell = match d {
                    // Adding 0.0 turns a rounded negative zero into +0.0.
                    Delta::Value { delta, .. } => format!("{:+.1}", (1000.0 * delta).round() / 10.0 + 0.0),
                    Delta::Gap => "gap".to_string(),
                };
                let _ = write!(s, " {cell:>20}");
            }
            s.push('\n');
        }
        s
    }
}

/// Per-metric differences of every bundle against the first one.
pub fn compare_runs(bundles: &[ResultsBundle]) -> Result<DeltaTable> {
    let (base, rest) = bundles
        .split_first()
        .ok_or_else(|| Error::invalid("nothing to compare"))?;
    for b in rest {
        if b.schema_version != base.schema_version {
            return Err(Error::invalid(format!(
                "mismatched schemas: version {} vs {}",
                base.schema_version, b.schema_version
            )));
        }
        if b.label_names != base.label_names || b.language_names != base.language_names {
            return Err(Error::invalid(format!(
                "mismatched schemas: runs {} and {} use different label or language sets",
                base.manifest.id, b.manifest.id
            )));
        }
    }
    let keys: BTreeSet<&String> = bundles.iter().flat_map(|b| b.metrics.keys()).collect();
    let rows = keys
        .into_iter()
        .map(|k| {
            let baseline = base.metrics.get(k).cloned();
            let deltas = rest
                .iter()
                .map(|b| match (&baseline, b.metrics.get(k)) {
                    (Some(m0), Some(m)) => Delta::Value {
                        value: m.value,
                        delta: m.value - m0.value,
                        run: m.run.clone(),
                    },
                    _ => Delta::Gap,
                })
                .collect();
            DeltaRow {
                metric: k.clone(),
                baseline,
                deltas,
            }
        })
        .collect();
    Ok(DeltaTable {
        columns: bundles.iter().map(|b| (b.column.clone(), b.manifest.id.clone())).collect(),
        rows,
    })
}
