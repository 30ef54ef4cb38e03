use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::sample::EmbeddingSample;
use super::tsne::TsneConfig;
use crate::error::{Error, Result};

/// One projected point with its annotations by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub label: Option<String>,
    pub language: String,
}

/// Two-dimensional projection of a sample with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<ProjectedPoint>,
    pub settings: TsneConfig,
}

impl Projection2D {
    pub fn from_embedding(sample: &EmbeddingSample, coords: &Array2<f64>, settings: TsneConfig) -> Result<Self> {
        if coords.dim() != (sample.len(), 2) {
            return Err(Error::Shape(format!(
                "projection of shape {:?} for {} points",
                coords.dim(),
                sample.len()
            )));
        }
        let points = (0..sample.len())
            .map(|i| ProjectedPoint {
                x: coords[[i, 0]],
                y: coords[[i, 1]],
                label: sample.labels[i].map(|l| sample.label_names[l].clone()),
                language: sample.language_names[sample.languages[i]].clone(),
            })
            .collect();
        Ok(Projection2D { points, settings })
    }

    /// CSV with header `x,y,label,language`; a missing label is written as `-`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,label,language\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.x, p.y, p.label.as_deref().unwrap_or("-"), p.language);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Writes `dim=<d>`, then per point: the coordinates separated by spaces, a
/// tab, the task label or `-`, a tab, and the language.
pub fn write_embedding_dump(path: impl AsRef<Path>, sample: &EmbeddingSample) -> Result<()> {
    sample.validate()?;
    let mut s = format!("dim={}\n", sample.vectors.ncols());
    for i in 0..sample.len() {
        let coords: Vec<String> = sample.vectors.row(i).iter().map(|v| v.to_string()).collect();
        let label = sample.labels[i].map_or("-", |l| sample.label_names[l].as_str());
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            coords.join(" "),
            label,
            sample.language_names[sample.languages[i]]
        );
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads the format of [`write_embedding_dump`]. Name tables are built in
/// order of first appearance.
pub fn read_embedding_dump(path: impl AsRef<Path>) -> Result<EmbeddingSample> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let dim: usize = match lines.next() {
        Some((_, header)) => header
            .strip_prefix("dim=")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected header dim=<d>"))?,
        None => return Err(Error::parse(path, 1, "empty embedding dump")),
    };
    let mut data = Vec::new();
    let (mut labels, mut languages) = (Vec::new(), Vec::new());
    let (mut label_names, mut language_names): (Vec<String>, Vec<String>) = (Vec::new(), Vec::new());
    let (mut label_ids, mut language_ids): (HashMap<String, usize>, HashMap<String, usize>) =
        (HashMap::new(), HashMap::new());
    let intern = |names: &mut Vec<String>, ids: &mut HashMap<String, usize>, s: &str| {
        *ids.entry(s.to_string()).or_insert_with(|| {
            names.push(s.to_string());
            names.len() - 1
        })
    };
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(path, i + 1, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let values = cols[0]
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if values.len() != dim {
            return Err(Error::parse(path, i + 1, format!("expected {dim} values, found {}", values.len())));
        }
        data.extend(values);
        labels.push(match cols[1] {
            "-" => None,
            l => Some(intern(&mut label_names, &mut label_ids, l)),
        });
        languages.push(intern(&mut language_names, &mut language_ids, cols[2]));
    }
    let vectors = Array2::from_shape_vec((languages.len(), dim), data).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(EmbeddingSample {
        vectors,
        labels,
        languages,
        label_names,
        language_names,
    })
}
