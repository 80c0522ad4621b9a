//! Plain-text artifact formats: CSV for profiles, populations, traces and
//! sweep tables, JSON for echo metrics.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so a
//! write/read cycle reproduces values bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::holeburn::PopulationField;
use crate::spectral::{FrequencyGrid, OpticalDepthProfile};

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(contents.as_bytes()).map_err(io_err)?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse_field(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::CsvParse {
        path: path.display().to_string(),
        line,
        reason: format!("bad {what}: {s:?}"),
    })
}

/// Write an optical-depth profile as `frequency_hz,od`.
pub fn write_od_csv(path: &Path, profile: &OpticalDepthProfile) -> Result<()> {
    let mut out = String::with_capacity(profile.od.len() * 24);
    out.push_str("frequency_hz,od\n");
    for (f, d) in profile.grid.iter().zip(profile.od.iter()) {
        writeln!(out, "{f},{d}").expect("string write");
    }
    write_atomic(path, &out)
}

/// Read a `frequency_hz,od` CSV back into a profile, reconstructing the
/// uniform grid from the frequency column.
pub fn read_od_csv(path: &Path) -> Result<OpticalDepthProfile> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "frequency_hz,od" => {}
        other => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                reason: format!("expected header 'frequency_hz,od', got {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut freqs = Vec::new();
    let mut od = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::CsvParse {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("expected two fields, got {line:?}"),
                })
            }
        };
        freqs.push(parse_field(path, i + 1, a, "frequency")?);
        od.push(parse_field(path, i + 1, b, "od")?);
    }
    let grid = grid_from_column(path, &freqs)?;
    OpticalDepthProfile::new(grid, od)
}

/// Reconstruct a uniform grid from a strictly increasing frequency column.
fn grid_from_column(path: &Path, freqs: &[f64]) -> Result<FrequencyGrid> {
    let bad = |line: usize, reason: String| Error::CsvParse {
        path: path.display().to_string(),
        line,
        reason,
    };
    if freqs.len() < 2 {
        return Err(bad(freqs.len() + 1, "need at least two samples".into()));
    }
    let n = freqs.len();
    let span = freqs[n - 1] - freqs[0];
    if !(span > 0.0) {
        return Err(bad(2, "frequency column must be strictly increasing".into()));
    }
    let d = span / (n - 1) as f64;
    for (i, pair) in freqs.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - d).abs() > 1e-6 * d {
            return Err(bad(i + 3, "frequency column is not uniformly spaced".into()));
        }
    }
    FrequencyGrid::from_data(0.5 * (freqs[0] + freqs[n - 1]), span, n)
}

/// Write per-class ground-state populations as
/// `class_detuning_hz,n_half,n_three_half,n_five_half`.
pub fn write_populations_csv(path: &Path, field: &PopulationField) -> Result<()> {
    let mut out = String::with_capacity(field.pops.len() * 40);
    out.push_str("class_detuning_hz,n_half,n_three_half,n_five_half\n");
    for (f, p) in field.class_grid.iter().zip(field.pops.iter()) {
        writeln!(out, "{f},{},{},{}", p[0], p[1], p[2]).expect("string write");
    }
    write_atomic(path, &out)
}

/// Write a time-domain intensity record as `time_s,intensity`.
pub fn write_trace_csv(path: &Path, trace: &crate::echo::EchoTrace) -> Result<()> {
    let mut out = String::with_capacity(trace.intensity.len() * 24);
    out.push_str("time_s,intensity\n");
    for (i, v) in trace.intensity.iter().enumerate() {
        writeln!(out, "{},{v}", trace.time(i)).expect("string write");
    }
    write_atomic(path, &out)
}

/// Read a `time_s,intensity` CSV back into a trace.
pub fn read_trace_csv(path: &Path) -> Result<crate::echo::EchoTrace> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "time_s,intensity" => {}
        other => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                reason: format!("expected header 'time_s,intensity', got {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut times = Vec::new();
    let mut intensity = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::CsvParse {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("expected two fields, got {line:?}"),
                })
            }
        };
        times.push(parse_field(path, i + 1, a, "time")?);
        intensity.push(parse_field(path, i + 1, b, "intensity")?);
    }
    if times.len() < 2 {
        return Err(Error::CsvParse {
            path: path.display().to_string(),
            line: times.len() + 1,
            reason: "need at least two samples".into(),
        });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::CsvParse {
            path: path.display().to_string(),
            line: 2,
            reason: "time column must be strictly increasing".into(),
        });
    }
    for (i, pair) in times.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: i + 3,
                reason: "time column is not uniformly spaced".into(),
            });
        }
    }
    Ok(crate::echo::EchoTrace { dt_s: dt, t_start_s: times[0], intensity })
}

/// Write echo metrics as pretty-printed JSON.
pub fn write_metrics_json(path: &Path, metrics: &crate::echo::EchoMetrics) -> Result<()> {
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    write_atomic(path, &(text + "\n"))
}

/// Read echo metrics back from JSON.
pub fn read_metrics_json(path: &Path) -> Result<crate::echo::EchoMetrics> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::CsvParse {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Write arbitrary text (used for SVG plots and sweep tables).
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{EchoMetrics, EchoTrace};
    use crate::holeburn::thermal_populations;
    use crate::spectral::FrequencyGrid;

    #[test]
    fn od_csv_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("od.csv");
        let grid = FrequencyGrid::new(0.0, 1e9, 257, 1e9).unwrap();
        let od: Vec<f64> = grid.iter().map(|f| (f / 1e9 + 0.5).powi(3) * 1.7).collect();
        let prof = OpticalDepthProfile::new(grid, od).unwrap();
        write_od_csv(&path, &prof).unwrap();
        let back = read_od_csv(&path).unwrap();
        assert_eq!(back.od, prof.od);
        assert_eq!(back.grid.n_points(), prof.grid.n_points());
        for (a, b) in back.grid.iter().zip(prof.grid.iter()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn od_csv_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "frequency_hz,od\n0.0,1.0\nnot_a_number,2.0\n").unwrap();
        match read_od_csv(&path) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected CsvParse, got {other:?}"),
        }
    }

    #[test]
    fn od_csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "freq,depth\n0.0,1.0\n").unwrap();
        assert!(matches!(read_od_csv(&path), Err(Error::CsvParse { line: 1, .. })));
    }

    #[test]
    fn trace_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = EchoTrace {
            dt_s: 2e-11,
            t_start_s: -1e-9,
            intensity: (0..500).map(|i| (i as f64 * 0.01).sin().powi(2)).collect(),
        };
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.intensity, trace.intensity);
        assert!((back.dt_s - trace.dt_s).abs() < 1e-20);
        assert!((back.t_start_s - trace.t_start_s).abs() < 1e-20);
    }

    #[test]
    fn populations_csv_has_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pops.csv");
        let grid = FrequencyGrid::new(0.0, 1e8, 11, 1e8).unwrap();
        let field = thermal_populations(&grid);
        write_populations_csv(&path, &field).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "class_detuning_hz,n_half,n_three_half,n_five_half");
        assert_eq!(lines.count(), 11);
        let third = 1.0f64 / 3.0;
        assert!(text.contains(&format!("{third}")));
    }

    #[test]
    fn metrics_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        let m = EchoMetrics {
            eta_per_echo: vec![0.1, 0.05, 0.025],
            eta_total: 0.175,
            transmitted_fraction: 0.3,
            n_visible: 3,
            tau_s: 12.5e-9,
        };
        write_metrics_json(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["eta_per_echo", "eta_total", "transmitted_fraction", "n_visible", "tau_s"] {
            assert!(text.contains(key), "metrics JSON missing key {key}");
        }
        let back = read_metrics_json(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn io_error_carries_path() {
        let err = read_od_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.contains("nonexistent")),
            other => panic!("expected Io, got {other:?}"),
        }
    }
}
