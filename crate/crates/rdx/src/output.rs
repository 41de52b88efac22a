//! `timeseries.csv`, `report.json` and snapshot files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! reloaded CSV reproduces every logged value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use rdx_core::diagnostics::StepStats;
use rdx_core::{CheckReport, DiagnosticsLog, LogRow, SpeciesStats, StateField};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("nothing recorded")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("timeseries line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn timeseries_header(species: &[String]) -> String {
    let mut cols = vec!["t".to_string()];
    for name in species {
        for stat in ["min", "max", "mass", "lp"] {
            cols.push(format!("{stat}_{name}"));
        }
    }
    cols.extend(["total_mass", "mass_control_residual", "dt"].map(String::from));
    cols.join(",")
}

pub fn render_timeseries(log: &DiagnosticsLog) -> Result<String, OutputError> {
    if log.rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut out = timeseries_header(&log.species_names);
    out.push('\n');
    for r in &log.rows {
        write!(out, "{}", r.t).unwrap();
        for s in &r.species {
            write!(out, ",{},{},{},{}", s.min, s.max, s.mass, s.lp).unwrap();
        }
        writeln!(
            out,
            ",{},{},{}",
            r.total_mass, r.mass_control_residual, r.dt
        )
        .unwrap();
    }
    Ok(out)
}

/// Rebuilds a log from `timeseries.csv`. Rate residuals are not stored in
/// the file and come back as `NaN`.
pub fn parse_timeseries(
    text: &str,
    lp: f64,
    steady_tol: f64,
) -> Result<DiagnosticsLog, OutputError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(OutputError::Empty)?;
    let cols: Vec<&str> = header.split(',').collect();
    let bad_header = || OutputError::Parse {
        line: 1,
        message: "unexpected header".into(),
    };
    if cols.len() < 4 || cols[0] != "t" || !(cols.len() - 4).is_multiple_of(4) {
        return Err(bad_header());
    }
    let species_names: Vec<String> = cols[1..cols.len() - 3]
        .chunks(4)
        .map(|c| {
            c[0].strip_prefix("min_")
                .map(String::from)
                .ok_or_else(bad_header)
        })
        .collect::<Result<_, _>>()?;
    if timeseries_header(&species_names) != header {
        return Err(bad_header());
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| OutputError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if v.len() != cols.len() {
            return Err(OutputError::Parse {
                line: idx + 1,
                message: format!("{} fields, expected {}", v.len(), cols.len()),
            });
        }
        let n = v.len();
        rows.push(LogRow {
            t: v[0],
            species: v[1..n - 3]
                .chunks(4)
                .map(|c| SpeciesStats {
                    min: c[0],
                    max: c[1],
                    mass: c[2],
                    lp: c[3],
                })
                .collect(),
            total_mass: v[n - 3],
            mass_control_residual: v[n - 2],
            dt: v[n - 1],
            rate_residual: f64::NAN,
        });
    }
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    Ok(DiagnosticsLog {
        species_names,
        lp,
        steady_tol,
        reached_steady: false,
        stats: StepStats::default(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub checks: Vec<CheckRecord>,
    pub config_hash: String,
    pub git_describe: String,
}

impl ReportFile {
    pub fn new(report: &CheckReport, config_hash: String) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            checks: report
                .checks
                .iter()
                .map(|c| CheckRecord {
                    name: c.name.clone(),
                    pass: c.pass,
                    value: finite(c.value),
                    bound: finite(c.bound),
                    tol: c.tol,
                })
                .collect(),
            config_hash,
            git_describe: git_describe(),
        }
    }
}

/// `git describe --always --dirty` of the working directory, or `"unknown"`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Columns `x[,y]` then one per species.
pub fn render_snapshot(state: &StateField, species: &[String]) -> String {
    let grid = &state.grid;
    let mut out = String::from(if grid.dim() == 2 { "x,y" } else { "x" });
    for name in species {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for cell in 0..grid.cell_count() {
        let (x, y) = grid.center(cell);
        write!(out, "{x}").unwrap();
        if grid.dim() == 2 {
            write!(out, ",{y}").unwrap();
        }
        for s in 0..state.species_count() {
            write!(out, ",{}", state.species(s)[cell]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t:.6}.csv")
}

/// Writes `timeseries.csv`, `report.json` and one file per snapshot.
pub fn write_outputs(
    dir: &Path,
    log: &DiagnosticsLog,
    report: &ReportFile,
    snapshots: &[StateField],
) -> Result<(), OutputError> {
    let series = render_timeseries(log)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("timeseries.csv");
    fs::write(&path, series).map_err(io_err(&path))?;
    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    for snap in snapshots {
        let path = dir.join(snapshot_name(snap.time));
        fs::write(&path, render_snapshot(snap, &log.species_names)).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rdx_core::diagnostics::Check;
    use rdx_core::network::parse_network;
    use rdx_core::Grid;

    fn sample_log(rows: usize) -> (DiagnosticsLog, Vec<StateField>) {
        let net = parse_network("species A D=1\nspecies B D=2\nA <-> B : kf=1, kb=0.3\n").unwrap();
        let g = Grid::line(5, 1.0).unwrap();
        let cond = net.classify_mass_condition();
        let mut log = DiagnosticsLog::new(&net, 2.0, 1e-9);
        let mut states = Vec::new();
        for k in 0..rows {
            let mut s = StateField::new(g, 2, g.sample(|x, _| 0.1 + x / 3.0).repeat(2)).unwrap();
            s.time = k as f64 * 0.1;
            s.species_mut(1)[2] = 1.0 / 7.0 + k as f64;
            log.record(&s, &net, &cond, 0.1);
            states.push(s);
        }
        (log, states)
    }

    #[test]
    fn empty_log_is_rejected() {
        let (log, _) = sample_log(0);
        assert_eq!(
            render_timeseries(&log).unwrap_err().to_string(),
            "nothing recorded"
        );
    }

    #[test]
    fn one_row_gives_header_plus_one_line() {
        let (log, _) = sample_log(1);
        let csv = render_timeseries(&log).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "t,min_A,max_A,mass_A,lp_A,min_B,max_B,mass_B,lp_B,total_mass,mass_control_residual,dt"
        );
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let (log, _) = sample_log(4);
        let back = parse_timeseries(&render_timeseries(&log).unwrap(), 2.0, 1e-9).unwrap();
        assert_eq!(back.species_names, log.species_names);
        for (a, b) in back.rows.iter().zip(&log.rows) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.species, b.species);
            assert_eq!(a.total_mass, b.total_mass);
            let recomputed: f64 = a.species.iter().map(|s| s.mass).sum();
            assert!((recomputed - b.total_mass).abs() <= 1e-12 * b.total_mass);
        }
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_timeseries("", 2.0, 1e-9).is_err());
        assert!(parse_timeseries("t,x\n1,2\n", 2.0, 1e-9).is_err());
        let (log, _) = sample_log(1);
        let csv = render_timeseries(&log).unwrap();
        let header = csv.lines().next().unwrap();
        assert!(parse_timeseries(&format!("{header}\n1,2\n"), 2.0, 1e-9).is_err());
        assert!(matches!(
            parse_timeseries(&format!("{header}\n"), 2.0, 1e-9),
            Err(OutputError::Empty)
        ));
    }

    #[test]
    fn writes_all_files() {
        let (log, states) = sample_log(3);
        let report = ReportFile::new(
            &CheckReport {
                checks: vec![Check::new("positivity", true, 0.1, 0.0, 0.0)],
            },
            "abc".into(),
        );
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &log, &report, &states).unwrap();
        let json: ReportFile =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(json, report);
        let snap = fs::read_to_string(dir.path().join(snapshot_name(0.2))).unwrap();
        assert!(snap.starts_with("x,A,B\n"));
        assert_eq!(snap.lines().count(), 6);
    }
}
