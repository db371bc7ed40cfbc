//! Observable containers: frequency spectra and time traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QuditError, Result};

/// Contrast values on a strictly increasing frequency grid (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    /// ΔPL/PL, may be signed.
    pub values: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

/// Signal vs time on a strictly increasing grid (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

fn check_axis(name: &str, axis: &[f64], values: &[f64]) -> Result<()> {
    if axis.len() != values.len() {
        return Err(QuditError::GridMismatch(format!(
            "{name} has {} points but {} values",
            axis.len(),
            values.len()
        )));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QuditError::GridMismatch(format!("{name} not strictly increasing")));
    }
    if axis.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(QuditError::GridMismatch(format!("non-finite entry in {name} data")));
    }
    Ok(())
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("frequency grid", &freqs, &values)?;
        Ok(Self {
            freqs,
            values,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Frequency step, assuming a uniform grid.
    pub fn step(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            (self.freqs[self.freqs.len() - 1] - self.freqs[0]) / (self.freqs.len() - 1) as f64
        }
    }

    /// Pointwise a − b on identical grids.
    pub fn difference(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
        if a.freqs != b.freqs {
            return Err(QuditError::GridMismatch(
                "spectra were computed on different frequency grids".into(),
            ));
        }
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        Ok(Spectrum {
            freqs: a.freqs.clone(),
            values,
            meta: a.meta.clone(),
        })
    }

    /// Value linearly interpolated at `f` (0 outside the grid).
    pub fn interpolate(&self, f: f64) -> f64 {
        interpolate(&self.freqs, &self.values, f)
    }

    pub fn index_of_min(&self) -> usize {
        arg_by(&self.values, |a, b| a < b)
    }

    pub fn index_of_max(&self) -> usize {
        arg_by(&self.values, |a, b| a > b)
    }
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("time grid", &times, &values)?;
        Ok(Self {
            times,
            values,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Time step (ns) if the grid is uniform within 1e-9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        let n = self.times.len();
        if n < 2 {
            return None;
        }
        let dt = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        let ok = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
        ok.then_some(dt)
    }
}

fn arg_by(v: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if better(x, v[best]) {
            best = i;
        }
    }
    best
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - t) + ys[k] * t
}

/// start, start + step, … up to `stop` inclusive (rounded to whole steps).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop > start) {
        return Err(crate::error::invalid("grid", "need step > 0 and stop > start"));
    }
    let n = ((stop - start) / step).round() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

/// Full width at half maximum of the dominant peak of `ys` (positive
/// lobe), by linear interpolation of the half-level crossings.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let i0 = arg_by(ys, |a, b| a > b);
    let peak = ys[i0];
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let mut left = None;
    for i in (0..i0).rev() {
        if ys[i] <= half {
            let t = (half - ys[i]) / (ys[i + 1] - ys[i]);
            left = Some(xs[i] + t * (xs[i + 1] - xs[i]));
            break;
        }
    }
    let mut right = None;
    for i in (i0 + 1)..ys.len() {
        if ys[i] <= half {
            let t = (ys[i - 1] - half) / (ys[i - 1] - ys[i]);
            right = Some(xs[i - 1] + t * (xs[i] - xs[i - 1]));
            break;
        }
    }
    Some(right? - left?)
}
