//! CSV emission with atomic writes and a generic plot-script template.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Writes a table atomically: serialize next to the target, then rename.
pub fn emit_csv(header: &[&str], rows: &[Vec<String>], path: &Path) -> Result<(), CsvError> {
    let io_err = |source: std::io::Error| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let file = std::fs::File::create(&tmp).map_err(io_err)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(header)
            .map_err(|e| io_err(std::io::Error::other(e)))?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "row width must match header");
            w.write_record(row)
                .map_err(|e| io_err(std::io::Error::other(e)))?;
        }
        w.flush().map_err(io_err)?;
    }
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CsvError> {
    let io_err = |source: std::io::Error| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(std::io::Error::other(e)))?;
    let header = reader
        .headers()
        .map_err(|e| io_err(std::io::Error::other(e)))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(std::io::Error::other(e)))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Canonical float rendering for CSV cells: shortest round-trip form, so
/// identical runs emit byte-identical files.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

const PLOT_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Generic log-log plotter for study CSVs emitted by this tool.

Usage: python plot.py <study.csv> <x-column> <y-column> [more y-columns...]
"""
import csv
import sys

import matplotlib.pyplot as plt


def main():
    path, xcol, *ycols = sys.argv[1:]
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    xs = [float(r[xcol]) for r in rows]
    fig, ax = plt.subplots()
    for ycol in ycols:
        ys = [abs(float(r[ycol])) for r in rows]
        ax.loglog(xs, ys, "o-", label=ycol)
    ax.set_xlabel(xcol)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    out = path.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
"#;

/// Writes the plotting helper next to the study outputs.
pub fn emit_plot_script(dir: &Path) -> Result<std::path::PathBuf, CsvError> {
    let path = dir.join("plot.py");
    std::fs::create_dir_all(dir).map_err(|source| CsvError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut file = std::fs::File::create(&path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(PLOT_TEMPLATE.as_bytes())
        .map_err(|source| CsvError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(path)
}
