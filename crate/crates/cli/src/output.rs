//! CSV tables, gnuplot column files and the JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qudit_sim::odmr::FieldMap;
use qudit_sim::{Spectrum, TimeTrace};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Column names carry their unit as a suffix, e.g. `freq_MHz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn from_spectrum(s: &Spectrum, value_col: &'static str) -> Self {
        let mut t = Table::new(&["freq_MHz", value_col]);
        for (&f, &v) in s.freqs.iter().zip(&s.values) {
            t.push(vec![f.into(), v.into()]);
        }
        t
    }

    pub fn from_trace(tr: &TimeTrace, time_col: &'static str, value_col: &'static str) -> Self {
        let mut t = Table::new(&[time_col, value_col]);
        for (&x, &v) in tr.times.iter().zip(&tr.values) {
            t.push(vec![x.into(), v.into()]);
        }
        t
    }
}

/// Shortest round-trip decimal, so equal floats always print equal text.
fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Runs write into one directory and remember what they wrote.
pub struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.record(&format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&table.columns)?;
        for (i, row) in table.rows.iter().enumerate() {
            let mut rec = Vec::with_capacity(row.len());
            for (c, cell) in row.iter().enumerate() {
                rec.push(match cell {
                    Cell::Num(v) if !v.is_finite() => {
                        bail!("{name}.csv row {i}, column {}: non-finite value", table.columns[c])
                    }
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Text(s) => s.clone(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn dat(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.record(&format!("{name}.dat"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Two columns with `#`-prefixed metadata.
    pub fn dat_columns(&mut self, name: &str, meta: &[(String, String)], header: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
        let mut s = String::new();
        for (k, v) in meta {
            writeln!(s, "# {k}: {v}")?;
        }
        writeln!(s, "# {header}")?;
        for (x, y) in xs.iter().zip(ys) {
            writeln!(s, "{} {}", fmt_num(*x), fmt_num(*y))?;
        }
        self.dat(name, &s)
    }

    pub fn dat_spectrum(&mut self, name: &str, s: &Spectrum) -> Result<()> {
        let meta: Vec<(String, String)> = s.meta.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        self.dat_columns(name, &meta, "freq_MHz dpl_pl", &s.freqs, &s.values)
    }

    pub fn dat_trace(&mut self, name: &str, tr: &TimeTrace, header: &str) -> Result<()> {
        let meta: Vec<(String, String)> = tr.meta.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        self.dat_columns(name, &meta, header, &tr.times, &tr.values)
    }

    /// (B_z, ν, signal) triples, one block per B_z separated by blank lines
    /// (gnuplot `splot ... with pm3d`).
    pub fn dat_map(&mut self, name: &str, map: &FieldMap) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# bperp_uT: {}", fmt_num(map.bperp))?;
        writeln!(s, "# bz_uT freq_MHz signal_norm")?;
        for (bz, col) in map.bz.iter().zip(&map.values) {
            for (f, v) in map.freqs.iter().zip(col) {
                writeln!(s, "{} {} {}", fmt_num(*bz), fmt_num(*f), fmt_num(*v))?;
            }
            writeln!(s)?;
        }
        self.dat(name, &s)
    }

    /// `<subcommand>.meta.json`: the resolved config plus the file list.
    pub fn sidecar(mut self, subcommand: &str, cfg: &ExperimentConfig) -> Result<Vec<String>> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            tool: &'static str,
            version: &'static str,
            subcommand: &'a str,
            seed: u64,
            outputs: &'a [String],
            config: &'a ExperimentConfig,
        }
        let name = format!("{subcommand}.meta.json");
        let outputs = self.written.clone();
        let path = self.record(&name);
        let side = Sidecar {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed: cfg.seed,
            outputs: &outputs,
            config: cfg,
        };
        let text = serde_json::to_string_pretty(&side)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(self.written)
    }
}
