use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::learn::CURVE_HEADER;

use super::run::ExperimentSummary;
use super::{write_atomic, HarnessError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub agent: String,
    pub n_seeds: usize,
    pub points: usize,
}

/// Sidecar describing `plot/<name>.tsv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotManifest {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub data: String,
    pub columns: Vec<String>,
    pub series: Vec<PlotSeries>,
}

/// Collects every aggregate curve under `out_dir` into one long-format TSV
/// (`agent episode median p25 p75`) plus a JSON manifest. Returns the TSV path.
pub fn emit_plot_data(out_dir: &Path) -> Result<PathBuf, HarnessError> {
    let meta_path = out_dir.join("metadata.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| HarnessError::io(&meta_path, e))?;
    let summary: ExperimentSummary = serde_json::from_str(&text).map_err(|e| HarnessError::io(&meta_path, e))?;

    let mut tsv = String::from("agent\tepisode\tmedian\tp25\tp75\n");
    let mut series = Vec::new();
    for agent in &summary.agents {
        let path = out_dir.join("aggregate").join(format!("{agent}.csv"));
        let Ok(csv) = std::fs::read_to_string(&path) else {
            continue;
        };
        let mut lines = csv.lines();
        if lines.next() != Some(CURVE_HEADER) {
            return Err(HarnessError::io(&path, "unexpected header"));
        }
        let mut points = 0;
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(HarnessError::io(&path, format!("bad row `{line}`")));
            }
            let _ = writeln!(tsv, "{agent}\t{}", cols.join("\t"));
            points += 1;
        }
        let n_seeds = summary.runs.iter().filter(|r| &r.agent == agent).count();
        series.push(PlotSeries {
            agent: agent.clone(),
            n_seeds,
            points,
        });
    }
    if series.is_empty() {
        return Err(HarnessError::MissingAggregate(out_dir.display().to_string()));
    }

    let data = out_dir.join("plot").join(format!("{}.tsv", summary.name));
    write_atomic(&data, tsv.as_bytes())?;
    let n_seeds = series.iter().map(|s| s.n_seeds).max().unwrap_or(0);
    let manifest = PlotManifest {
        name: summary.name.clone(),
        title: summary.plot.title.clone().unwrap_or_else(|| summary.name.clone()),
        x_label: summary.plot.x_label.clone().unwrap_or_else(|| "training episodes".into()),
        y_label: summary
            .plot
            .y_label
            .clone()
            .unwrap_or_else(|| format!("normalized return (median, 25-75%, {n_seeds} seeds)")),
        data: format!("{}.tsv", summary.name),
        columns: ["agent", "episode", "median", "p25", "p75"].map(String::from).to_vec(),
        series,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&data.with_extension("json"), json.as_bytes())?;
    Ok(data)
}
