//! Aggregates sweep summaries and training traces into one long-format table
//! for external plotting, plus monotonicity checks over sweep variables.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sweep::SUMMARY_FILE;

pub const REPORT_FILE: &str = "report_long.csv";
pub const LONG_HEADER: [&str; 11] = [
    "source",
    "variable",
    "value",
    "series",
    "method",
    "seed",
    "metric",
    "mean",
    "std",
    "n",
    "config_hash",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub source: String,
    pub variable: String,
    pub value: f64,
    pub series: String,
    pub method: String,
    pub seed: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub config_hash: String,
}

#[derive(Debug, Deserialize)]
struct SummaryLine {
    variable: String,
    value: f64,
    series: String,
    method: String,
    n_seeds: usize,
    mean_min_rate: f64,
    std_min_rate: f64,
    mean_sum_rate: f64,
    std_sum_rate: f64,
    mean_feasible_fraction: f64,
    seed: String,
    config_hash: String,
}

#[derive(Debug, Deserialize)]
struct TraceLine {
    episode: usize,
    mean_reward: f64,
    min_rate: f64,
    satisfied_count: f64,
    config_hash: String,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCheck {
    pub source: String,
    pub variable: String,
    pub series: String,
    pub method: String,
    pub points: usize,
    pub holds: bool,
}

impl MonotoneCheck {
    pub fn line(&self) -> String {
        format!(
            "monotone check [{}] mean_min_rate nondecreasing in {} ({}, {}, {} points): {}",
            self.source,
            self.variable,
            self.series,
            self.method,
            self.points,
            if self.holds { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<LongRow>,
    pub checks: Vec<MonotoneCheck>,
}

fn source_name(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.to_string_lossy().replace('\\', "/")
}

/// `dir` and its immediate subdirectories, sorted.
fn candidate_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = vec![dir.to_path_buf()];
    let mut sub: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    sub.sort();
    dirs.extend(sub);
    let mut files = Vec::new();
    for d in dirs {
        let mut here: Vec<PathBuf> = std::fs::read_dir(&d)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        here.sort();
        files.extend(here);
    }
    Ok(files)
}

fn is_trace(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.starts_with("trace_") && name.ends_with(".csv")
}

/// Algorithm name from `trace_<algo>_seed<S>.csv`.
fn trace_algo(path: &Path) -> String {
    let stem = path.file_stem().and_then(|n| n.to_str()).unwrap_or("");
    stem.trim_start_matches("trace_")
        .split('_')
        .next()
        .unwrap_or("")
        .to_string()
}

fn read_summary(path: &Path, source: &str, rows: &mut Vec<LongRow>) -> Result<()> {
    let mut r = csv::Reader::from_path(path)?;
    for line in r.deserialize::<SummaryLine>() {
        let l = line?;
        for (metric, mean, std) in [
            ("min_rate", l.mean_min_rate, l.std_min_rate),
            ("sum_rate", l.mean_sum_rate, l.std_sum_rate),
            ("feasible_fraction", l.mean_feasible_fraction, f64::NAN),
        ] {
            rows.push(LongRow {
                source: source.to_string(),
                variable: l.variable.clone(),
                value: l.value,
                series: l.series.clone(),
                method: l.method.clone(),
                seed: l.seed.clone(),
                metric: metric.into(),
                mean,
                std,
                n: l.n_seeds,
                config_hash: l.config_hash.clone(),
            });
        }
    }
    Ok(())
}

fn read_trace(path: &Path, source: &str, rows: &mut Vec<LongRow>) -> Result<()> {
    let algo = trace_algo(path);
    let mut r = csv::Reader::from_path(path)?;
    for line in r.deserialize::<TraceLine>() {
        let l = line?;
        for (metric, v) in [
            ("mean_reward", l.mean_reward),
            ("min_rate", l.min_rate),
            ("satisfied_count", l.satisfied_count),
        ] {
            rows.push(LongRow {
                source: source.to_string(),
                variable: "episode".into(),
                value: l.episode as f64,
                series: String::new(),
                method: algo.clone(),
                seed: l.seed.to_string(),
                metric: metric.into(),
                mean: v,
                std: 0.0,
                n: 1,
                config_hash: l.config_hash.clone(),
            });
        }
    }
    Ok(())
}

type GroupKey = (String, String, String, String);

fn monotone_checks(rows: &[LongRow]) -> Vec<MonotoneCheck> {
    let mut groups: BTreeMap<GroupKey, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.metric == "min_rate" && r.variable != "episode")
    {
        groups
            .entry((r.source.clone(), r.variable.clone(), r.series.clone(), r.method.clone()))
            .or_default()
            .push((r.value, r.mean));
    }
    groups
        .into_iter()
        .map(|((source, variable, series, method), mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            MonotoneCheck {
                holds: pts.windows(2).all(|w| w[1].1 >= w[0].1),
                points: pts.len(),
                source,
                variable,
                series,
                method,
            }
        })
        .collect()
}

/// Reads every `summary.csv` and `trace_*.csv` in `dir` and its immediate
/// subdirectories.
pub fn build_report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "report input {} is not a directory",
            dir.display()
        )));
    }
    let mut rows = Vec::new();
    for file in candidate_files(dir)? {
        let source = source_name(dir, &file);
        if file.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            read_summary(&file, &source, &mut rows)?;
        } else if is_trace(&file) {
            read_trace(&file, &source, &mut rows)?;
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "no summary or trace CSVs under {}",
            dir.display()
        )));
    }
    let checks = monotone_checks(&rows);
    Ok(Report { rows, checks })
}

impl Report {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(LONG_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.source.clone(),
                r.variable.clone(),
                r.value.to_string(),
                r.series.clone(),
                r.method.clone(),
                r.seed.clone(),
                r.metric.clone(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n.to_string(),
                r.config_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{EpisodeRow, TrainingTrace};
    use std::fs;

    const SUMMARY: &str = "variable,value,series,method,n_seeds,failures,mean_min_rate,std_min_rate,mean_sum_rate,std_sum_rate,mean_feasible_fraction,seed,config_hash
p_bs_max_watts,4,active,random,3,0,1.0,0.1,3.0,0.3,1,1;2;3,h
p_bs_max_watts,8,active,random,3,0,2.0,0.1,6.0,0.3,1,1;2;3,h
p_bs_max_watts,16,active,random,3,0,2.0,0.1,6.5,0.3,1,1;2;3,h
p_bs_max_watts,32,active,random,3,0,3.5,0.1,9.0,0.3,1,1;2;3,h
";

    #[test]
    fn summary_becomes_long_rows_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("summary.csv"), SUMMARY).unwrap();
        let sub = dir.path().join("bad");
        fs::create_dir(&sub).unwrap();
        fs::write(sub.join("summary.csv"), SUMMARY.replace(",3.5,", ",0.5,")).unwrap();
        let report = build_report(dir.path()).unwrap();
        assert_eq!(report.rows.len(), 24);
        assert_eq!(report.checks.len(), 2);
        assert!(report.checks[1].holds && report.checks[1].source == "summary.csv");
        assert!(!report.checks[0].holds);
        assert!(report.checks[1].line().ends_with("(active, random, 4 points): PASS"));
        let out = dir.path().join(REPORT_FILE);
        report.write(&out).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 25);
    }

    #[test]
    fn traces_are_read_with_their_algorithm() {
        let dir = tempfile::tempdir().unwrap();
        let t = TrainingTrace {
            algo: "td3".into(),
            seed: 4,
            config_hash: "h".into(),
            rows: vec![EpisodeRow {
                episode: 0,
                mean_reward: 2.0,
                min_rate: 0.1,
                satisfied_count: 9.0,
            }],
        };
        t.save_csv(&dir.path().join("trace_td3_seed4.csv")).unwrap();
        let report = build_report(dir.path()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.method == "td3" && r.seed == "4"));
        assert!(report.checks.is_empty());
    }

    #[test]
    fn empty_or_missing_inputs_fail() {
        let dir = tempfile::tempdir().unwrap();
        assert!(build_report(dir.path()).is_err());
        assert!(build_report(&dir.path().join("nope")).is_err());
    }
}
