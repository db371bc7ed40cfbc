//! Fringe fitting, FFT peak estimation, ODMR line inversion and the
//! absolute field estimator B_eff = (ν_probe − f_R) / (γ√(1 + 3 sin²θ)).

pub mod lm;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QuditError, Result};
use crate::params::{CenterParams, FieldConfig};
use crate::signal::{Spectrum, TimeTrace};
use crate::spin::{build_hamiltonian, exact_levels, Transition};
use lm::{levenberg_marquardt, LmOptions};

/// Zero-padding factor used by every FFT in this module.
pub const PAD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Fringes,
    /// Free-induction decay (no resolvable oscillation); f_r = 0.
    Fid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// MHz
    pub f_r: f64,
    pub f_r_err: f64,
    /// ns; 0 when the trace is flat.
    pub t2_star: f64,
    pub t2_err: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// rad
    pub phase: f64,
    pub kind: SignalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FftPeak {
    /// Lorentzian center (MHz).
    pub f_r: f64,
    /// Half width at half maximum of the power peak (MHz).
    pub width: f64,
    /// Standard error of the center (MHz).
    pub err: f64,
    /// Padded bin spacing (MHz).
    pub bin: f64,
    pub kind: SignalKind,
    /// The peak is not a single Lorentzian: two overlapping lines or a
    /// broadened feature.
    pub multimodal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldEstimate {
    /// µT
    pub b_eff: f64,
    pub b_err: f64,
    /// deg
    pub theta: f64,
}

fn check_trace(trace: &TimeTrace, min_points: usize) -> Result<()> {
    if trace.times.len() < min_points {
        return Err(QuditError::InsufficientData(format!(
            "{} points, need at least {min_points}",
            trace.times.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean-subtracted, zero-padded FFT. Returns (freqs MHz, complex
/// amplitudes) for non-negative frequencies.
fn padded_fft(trace: &TimeTrace) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let dt = trace
        .uniform_step()
        .ok_or_else(|| QuditError::GridMismatch("FFT needs a uniform time grid".into()))?;
    let n = trace.values.len();
    let m = PAD * n;
    let mu = mean(&trace.values);
    let mut buf: Vec<Complex64> = trace.values.iter().map(|v| Complex64::new(v - mu, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let df = 1e3 / (m as f64 * dt);
    let half = m / 2 + 1;
    buf.truncate(half);
    Ok(((0..half).map(|k| k as f64 * df).collect(), buf))
}

/// |FFT| of the mean-subtracted trace (zero-padded ×8), normalized by the
/// number of samples.
pub fn fft_magnitude(trace: &TimeTrace) -> Result<Spectrum> {
    let (f, x) = padded_fft(trace)?;
    let n = trace.values.len() as f64;
    Spectrum::new(f, x.iter().map(|c| c.norm() / n).collect()).map(|s| s.with_meta("quantity", "fft_magnitude"))
}

/// Largest normalized FFT magnitude away from DC (first unpadded bin and
/// above).
pub fn fringe_contrast(trace: &TimeTrace) -> Result<f64> {
    let s = fft_magnitude(trace)?;
    Ok(s.values.iter().skip(PAD).cloned().fold(0.0, f64::max))
}

/// Direct periodogram for seeding; works on non-uniform grids.
fn periodogram_peak(times: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let mu = mean(values);
    let span = times[times.len() - 1] - times[0];
    let min_dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let f_max = 0.5e3 / min_dt;
    let df = 1e3 / (PAD as f64 * span);
    let mut best = (0.0, 0.0, 0.0);
    let mut f = 0.0;
    while f <= f_max {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in times.iter().zip(values) {
            let ph = 2e-3 * PI * f * (t - times[0]);
            re += (v - mu) * ph.cos();
            im -= (v - mu) * ph.sin();
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (f, p, im.atan2(re));
        }
        f += df;
    }
    best
}

fn decaying_cos(p: &[f64], t: f64) -> f64 {
    p[0] * (2e-3 * PI * p[1] * t + p[2]).cos() * (-t / p[3]).exp() + p[4]
}

/// Least-squares fit of A·cos(2πf_R τ + φ)·exp(−τ/T₂*) + C, seeded from
/// the periodogram peak. Traces without a significant oscillation are
/// refitted as A·exp(−τ/T₂*) + C and classified as FID.
pub fn fit_decaying_sinusoid(trace: &TimeTrace) -> Result<FringeFit> {
    check_trace(trace, 10)?;
    let t0 = trace.times[0];
    let ts: Vec<f64> = trace.times.iter().map(|t| t - t0).collect();
    let ys = &trace.values;
    let mu = mean(ys);
    let scale = ys.iter().map(|y| (y - mu).abs()).fold(0.0, f64::max);
    if scale <= 1e-14 * mu.abs().max(1e-300) || scale == 0.0 {
        return Ok(FringeFit {
            f_r: 0.0,
            f_r_err: 0.0,
            t2_star: 0.0,
            t2_err: 0.0,
            amplitude: 0.0,
            offset: mu,
            phase: 0.0,
            kind: SignalKind::Fid,
        });
    }
    let span = ts[ts.len() - 1];
    let min_dt = ts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let f_nyq = 0.5e3 / min_dt;
    let (f0, _, ph0) = periodogram_peak(&ts, ys);
    let resid = |p: &[f64]| -> Vec<f64> { ts.iter().zip(ys).map(|(&t, &y)| decaying_cos(p, t) - y).collect() };
    let lo = [0.0, 0.0, -4.0 * PI, min_dt * 0.1, mu - 10.0 * scale];
    let hi = [10.0 * scale, f_nyq, 4.0 * PI, 100.0 * span, mu + 10.0 * scale];
    let mut best: Option<lm::LmResult> = None;
    for t_seed in [span / 3.0, span / 10.0, span] {
        for (a_seed, ph_seed) in [(scale, ph0), (scale, ph0 + PI)] {
            let p0 = [a_seed, f0, ph_seed, t_seed, mu];
            if let Ok(r) = levenberg_marquardt(resid, &p0, &lo, &hi, LmOptions::default()) {
                if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                    best = Some(r);
                }
            }
        }
    }
    let fit = best.ok_or(QuditError::FitDiverged {
        iterations: LmOptions::default().max_iter,
        cost: f64::NAN,
        last_step: f64::NAN,
    })?;
    let p = &fit.params;
    let e = &fit.std_errors;
    let cycles = p[1] * span * 1e-3;
    let significant = p[0] > 2.0 * e[0].max(0.0) && cycles >= 1.0 && p[3] * p[1] * 1e-3 >= 0.25;
    if significant {
        let phase = p[2].rem_euclid(2.0 * PI);
        return Ok(FringeFit {
            f_r: p[1],
            f_r_err: e[1].abs(),
            t2_star: p[3],
            t2_err: e[3].abs(),
            amplitude: p[0],
            offset: p[4],
            phase,
            kind: SignalKind::Fringes,
        });
    }
    let resid = |q: &[f64]| -> Vec<f64> {
        ts.iter()
            .zip(ys)
            .map(|(&t, &y)| q[0] * (-t / q[1]).exp() + q[2] - y)
            .collect()
    };
    let first = ys[0] - ys[ys.len() - 1];
    let r = levenberg_marquardt(
        resid,
        &[first, span / 3.0, ys[ys.len() - 1]],
        &[-10.0 * scale, min_dt * 0.1, mu - 10.0 * scale],
        &[10.0 * scale, 100.0 * span, mu + 10.0 * scale],
        LmOptions::default(),
    )?;
    Ok(FringeFit {
        f_r: 0.0,
        f_r_err: 0.0,
        t2_star: r.params[1],
        t2_err: r.std_errors[1].abs(),
        amplitude: r.params[0],
        offset: r.params[2],
        phase: 0.0,
        kind: SignalKind::Fid,
    })
}

/// Σ_{n<N} rⁿ
fn geometric(r: Complex64, n: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if (one - r).norm() < 1e-12 {
        return Complex64::new(n as f64, 0.0);
    }
    (one - r.powu(n as u32)) / (one - r)
}

/// DFT of Σ_k e^{−γ_k t}·Re(2a_k e^{i2πf_k t}) on N samples of spacing dt,
/// minus a constant m. Parameters per oscillator: [Re a, Im a, f, γ], then m.
fn oscillator_dft(p: &[f64], f: f64, dt: f64, n: usize) -> Complex64 {
    let w = |fr: f64, g: f64| Complex64::new(-g * dt, 2e-3 * PI * fr * dt).exp();
    let mut x = Complex64::new(0.0, 0.0);
    for q in p[..p.len() - 1].chunks(4) {
        let a = Complex64::new(q[0], q[1]);
        x += a * geometric(w(q[2] - f, q[3]), n) + a.conj() * geometric(w(-q[2] - f, q[3]), n);
    }
    x - p[p.len() - 1] * geometric(w(-f, 0.0), n)
}

/// FFT (mean-subtracted, zero-padded ×8, rectangular window) followed by a
/// least-squares fit of the complex damped-oscillator lineshape around the
/// dominant peak. Its power is a Lorentzian of half width γ/2π = 1/(2πT);
/// fitting the complex spectrum with the negative-frequency image and the
/// finite record included keeps the center unbiased at low f_R.
pub fn fft_lorentzian(trace: &TimeTrace) -> Result<FftPeak> {
    check_trace(trace, 10)?;
    let (f, x) = padded_fft(trace)?;
    let dt = trace.uniform_step().unwrap_or(1.0);
    let n = trace.values.len();
    let bin = f[1];
    let power: Vec<f64> = x.iter().map(|c| c.norm_sqr()).collect();
    let fid = FftPeak {
        f_r: 0.0,
        width: 0.0,
        err: 0.0,
        bin,
        kind: SignalKind::Fid,
        multimodal: false,
    };
    let (imax, pmax) = power
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    let mut sorted = power[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    if !(pmax > 0.0) || pmax < 25.0 * floor {
        return Ok(fid);
    }
    // Half-power crossings for the width seed.
    let half = 0.5 * pmax;
    let left = (0..imax).rev().find(|&i| power[i] < half).unwrap_or(0);
    let right = (imax..power.len()).find(|&i| power[i] < half).unwrap_or(power.len() - 1);
    let w0 = (0.5 * (f[right] - f[left])).max(bin);
    let win = (4.0 * w0).max(6.0 * bin);
    let idx: Vec<usize> = (0..f.len()).filter(|&i| (f[i] - f[imax]).abs() <= win).collect();
    let scale = pmax.sqrt();
    let fs: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
    let xs: Vec<Complex64> = idx.iter().map(|&i| x[i] / scale).collect();
    let resid = |p: &[f64]| -> Vec<f64> {
        fs.iter()
            .zip(&xs)
            .flat_map(|(&fr, &y)| {
                let d = oscillator_dft(p, fr, dt, n) - y;
                [d.re, d.im]
            })
            .collect()
    };
    let g0 = 2e-3 * PI * w0;
    let a0 = x[imax] / scale * (1.0 - (-g0 * dt).exp());
    let (g_lo, g_hi) = (1e-9, 2e-3 * PI * 10.0 * win);
    let osc_lo = |c: f64| [-10.0, -10.0, c - win, g_lo];
    let osc_hi = |c: f64| [10.0, 10.0, c + win, g_hi];
    let fc = f[imax];
    let cat = |parts: &[&[f64]]| parts.concat();
    let osc_lo = |c: f64| {
        let mut b = osc_lo(c);
        b[2] = b[2].max(0.0);
        b
    };
    // A peak near DC may be a broad low-frequency line overlapping its image.
    let f_seeds: &[f64] = if fc < 2.0 * w0 { &[fc, fc + w0] } else { &[fc] };
    let single = f_seeds
        .iter()
        .filter_map(|&fs0| {
            levenberg_marquardt(
                resid,
                &cat(&[&[a0.re, a0.im, fs0, g0], &[0.0]]),
                &cat(&[&osc_lo(fc), &[-10.0]]),
                &cat(&[&osc_hi(fc), &[10.0]]),
                LmOptions::default(),
            )
            .ok()
        })
        .min_by(|a, b| a.cost.total_cmp(&b.cost));
    let single = match single {
        Some(r) => r,
        // The oscillator model degenerates at f = 0.
        None if fc < 2.0 * w0 => return Ok(fid),
        None => {
            return Err(QuditError::FitDiverged {
                iterations: LmOptions::default().max_iter,
                cost: f64::NAN,
                last_step: f64::NAN,
            })
        }
    };
    // Less than half a cycle over the record: no resolvable oscillation.
    let span = trace.times[n - 1] - trace.times[0];
    if single.params[2] < 0.5e3 / span {
        return Ok(fid);
    }
    let double = levenberg_marquardt(
        resid,
        &cat(&[
            &[0.5 * a0.re, 0.5 * a0.im, fc - 0.5 * w0, 0.6 * g0],
            &[0.5 * a0.re, 0.5 * a0.im, fc + 0.5 * w0, 0.6 * g0],
            &[0.0],
        ]),
        &cat(&[&osc_lo(fc), &osc_lo(fc), &[-10.0]]),
        &cat(&[&osc_hi(fc), &osc_hi(fc), &[10.0]]),
        LmOptions::default(),
    );
    let energy: f64 = 0.5 * xs.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let multimodal = match double {
        Ok(d) => {
            let q = &d.params;
            let (m1, m2) = (q[0].hypot(q[1]), q[4].hypot(q[5]));
            let minor = m1.min(m2) / m1.max(m2);
            let apart = (q[2] - q[6]).abs() > 0.5 * bin;
            single.cost > 1e-3 * energy && d.cost < 0.1 * single.cost && minor > 0.2 && apart
        }
        Err(_) => false,
    };
    // Padded bins are correlated; PAD of them carry one independent sample.
    let err = single.std_errors[2].abs() * (PAD as f64).sqrt();
    Ok(FftPeak {
        f_r: single.params[2],
        width: single.params[3] * 1e3 / (2.0 * PI),
        err,
        bin,
        kind: SignalKind::Fringes,
        multimodal,
    })
}

/// Inputs of the field estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FringeInput {
    /// MHz
    pub nu_probe: f64,
    pub f_r: f64,
    pub f_r_err: f64,
    /// deg
    pub theta: f64,
    pub theta_err: f64,
}

impl Default for FringeInput {
    fn default() -> Self {
        Self {
            nu_probe: 11.70,
            f_r: 4.51,
            f_r_err: 0.0,
            theta: 19.0,
            theta_err: 0.0,
        }
    }
}

impl FringeInput {
    pub fn new(nu_probe: f64, f_r: f64, theta: f64) -> Self {
        Self {
            nu_probe,
            f_r,
            f_r_err: 0.0,
            theta,
            theta_err: 0.0,
        }
    }

    pub fn with_errors(mut self, f_r_err: f64, theta_err: f64) -> Self {
        self.f_r_err = f_r_err;
        self.theta_err = theta_err;
        self
    }
}

/// B_eff = (ν_probe − f_R) / (γ√(1 + 3 sin²θ)) in µT, γ in MHz/mT.
pub fn b_eff_from_fringes(input: &FringeInput, gamma: f64) -> Result<FieldEstimate> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be > 0"));
    }
    if !(input.f_r >= 0.0) || !input.nu_probe.is_finite() {
        return Err(invalid("f_r", "must be finite and >= 0"));
    }
    if !(input.nu_probe > input.f_r) {
        return Err(QuditError::InvalidDetuning {
            nu_probe: input.nu_probe,
            f_r: input.f_r,
        });
    }
    let th = input.theta.to_radians();
    let g2 = 1.0 + 3.0 * th.sin().powi(2);
    let g = g2.sqrt();
    let b = 1e3 * (input.nu_probe - input.f_r) / (gamma * g);
    let db_df = 1e3 / (gamma * g);
    let db_dth = b * 3.0 * th.sin() * th.cos() / g2;
    let b_err = (db_df * input.f_r_err).hypot(db_dth * input.theta_err.to_radians());
    Ok(FieldEstimate {
        b_eff: b,
        b_err,
        theta: input.theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldInversion {
    /// µT
    pub bz: f64,
    pub bperp: f64,
    /// MHz
    pub two_d: f64,
    /// RMS line residual (MHz).
    pub residual: f64,
}

impl FieldInversion {
    pub fn field(&self) -> FieldConfig {
        FieldConfig::new(self.bz, self.bperp)
    }

    /// Polar angle of the recovered field (deg).
    pub fn theta_deg(&self) -> f64 {
        self.field().theta().to_degrees()
    }
}

/// Exact line frequencies ν₁..ν₄ for (B_z, B_⊥, D).
fn exact_lines(params: &CenterParams, bz: f64, bperp: f64, d: f64, which: &[Transition]) -> Result<Vec<f64>> {
    let lv = exact_levels(&build_hamiltonian(params, &FieldConfig::new(bz, bperp), Some(d)))?;
    Ok(which.iter().map(|&t| lv.frequency(t)).collect())
}

/// Recover (B_z, B_⊥, 2D) from labeled ODMR line positions. A linear
/// least-squares solve of the weak-field pattern
/// ν = 2D + (3/2)σγB_z − (1/2)σ'γ√(B_z² + 4B_⊥²) seeds a bounded fit of
/// the exact model, started on both B_z sign branches and with B_⊥ = 0;
/// the lowest residual wins. `two_d_known` fixes the zero-field splitting.
pub fn invert_field_from_lines(
    params: &CenterParams,
    lines: &[(Transition, f64)],
    two_d_known: Option<f64>,
) -> Result<FieldInversion> {
    let unknowns = if two_d_known.is_some() { 2 } else { 3 };
    let mut labels: Vec<Transition> = Vec::new();
    let mut freqs: Vec<f64> = Vec::new();
    for &(t, f) in lines {
        if t.doublet_signs().is_none() {
            return Err(invalid("lines", "only ν1..ν4 carry the field pattern"));
        }
        if !f.is_finite() || f <= 0.0 {
            return Err(invalid("lines", "frequencies must be finite and > 0"));
        }
        if labels.contains(&t) {
            return Err(invalid("lines", format!("{} given twice", t.name())));
        }
        labels.push(t);
        freqs.push(f);
    }
    if labels.len() < unknowns {
        return Err(QuditError::Underdetermined {
            lines: labels.len(),
            unknowns,
        });
    }
    let gamma = params.gamma_per_ut();
    // Linear seed in (2D, a = 1.5γB_z, b = 0.5γB').
    let rows: Vec<[f64; 3]> = labels
        .iter()
        .map(|t| {
            let (s, sp) = t.doublet_signs().unwrap();
            [1.0, f64::from(s), -f64::from(sp)]
        })
        .collect();
    let (two_d0, a, b) = {
        let cols = if two_d_known.is_some() { 2 } else { 3 };
        let mut m = nalgebra::DMatrix::zeros(rows.len(), cols);
        let mut y = nalgebra::DVector::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let off = two_d_known.unwrap_or(0.0);
            y[i] = freqs[i] - off;
            for c in 0..cols {
                m[(i, c)] = r[3 - cols + c];
            }
        }
        let sol = m
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| QuditError::Singular(e.to_string()))?;
        match two_d_known {
            Some(td) => (td, sol[0], sol[1]),
            None => (sol[0], sol[1], sol[2]),
        }
    };
    let bz0 = a / (1.5 * gamma);
    let bd = (2.0 * b / gamma).abs();
    let bperp0 = (0.25 * (bd * bd - bz0 * bz0)).max(0.0).sqrt();
    let bmax = 10.0 * (bz0.abs() + bd + 1.0);

    let n_free = unknowns;
    let resid = |p: &[f64]| -> Vec<f64> {
        let d = match two_d_known {
            Some(td) => 0.5 * td,
            None => 0.5 * p[2],
        };
        match exact_lines(params, p[0], p[1], d, &labels) {
            Ok(v) => v.iter().zip(&freqs).map(|(a, b)| a - b).collect(),
            Err(_) => vec![f64::NAN; freqs.len()],
        }
    };
    let mut lo = vec![-bmax, 0.0];
    let mut hi = vec![bmax, bmax];
    if n_free == 3 {
        lo.push(0.5 * two_d0);
        hi.push(2.0 * two_d0);
    }
    let mut best: Option<lm::LmResult> = None;
    let seeds = [(bz0, bperp0), (bz0, 0.0), (-bz0, bperp0), (bz0, 0.5 * bd)];
    for (sz, sp) in seeds {
        let mut p0 = vec![sz, sp];
        if n_free == 3 {
            p0.push(two_d0);
        }
        let opts = LmOptions {
            max_iter: 500,
            xtol: 1e-13,
        };
        if let Ok(r) = levenberg_marquardt(resid, &p0, &lo, &hi, opts) {
            if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                best = Some(r);
            }
        }
    }
    let fit = best.ok_or(QuditError::FitDiverged {
        iterations: 500,
        cost: f64::NAN,
        last_step: f64::NAN,
    })?;
    let p = &fit.params;
    Ok(FieldInversion {
        bz: p[0],
        bperp: p[1],
        two_d: two_d_known.unwrap_or_else(|| p[2]),
        residual: (2.0 * fit.cost / freqs.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketMeasurement {
    /// MHz
    pub nu_pump: f64,
    pub nu_probe: f64,
    pub f_r: f64,
    pub f_r_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub i: usize,
    pub j: usize,
    /// µT
    pub delta: f64,
    /// Combined 1σ (µT).
    pub sigma: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub estimates: Vec<FieldEstimate>,
    /// Weighted mean (µT); plain mean when no errors are given.
    pub mean: f64,
    /// max − min (µT).
    pub spread: f64,
    pub pairs: Vec<PairComparison>,
    /// Measurements grouped by mutual agreement.
    pub groups: Vec<Vec<usize>>,
    pub all_consistent: bool,
}

/// B_eff for each packet measurement; pairs agree when their difference is
/// within `k_sigma` combined standard errors (or exactly equal).
pub fn cross_packet_consistency(
    measurements: &[PacketMeasurement],
    theta_deg: f64,
    theta_err_deg: f64,
    gamma: f64,
    k_sigma: f64,
) -> Result<ConsistencyReport> {
    if measurements.len() < 2 {
        return Err(QuditError::InsufficientData("need at least two measurements".into()));
    }
    let estimates = measurements
        .iter()
        .map(|m| {
            b_eff_from_fringes(
                &FringeInput::new(m.nu_probe, m.f_r, theta_deg).with_errors(m.f_r_err, theta_err_deg),
                gamma,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = estimates
        .iter()
        .map(|e| if e.b_err > 0.0 { 1.0 / (e.b_err * e.b_err) } else { 0.0 })
        .collect();
    let mean = if weights.iter().all(|&w| w > 0.0) {
        estimates.iter().zip(&weights).map(|(e, w)| e.b_eff * w).sum::<f64>() / weights.iter().sum::<f64>()
    } else {
        estimates.iter().map(|e| e.b_eff).sum::<f64>() / estimates.len() as f64
    };
    let bs: Vec<f64> = estimates.iter().map(|e| e.b_eff).collect();
    let spread = bs.iter().cloned().fold(f64::MIN, f64::max) - bs.iter().cloned().fold(f64::MAX, f64::min);
    let mut pairs = Vec::new();
    for i in 0..estimates.len() {
        for j in (i + 1)..estimates.len() {
            let delta = estimates[j].b_eff - estimates[i].b_eff;
            let sigma = estimates[i].b_err.hypot(estimates[j].b_err);
            let consistent = delta.abs() <= k_sigma * sigma || delta.abs() <= 1e-9 * mean.abs();
            pairs.push(PairComparison {
                i,
                j,
                delta,
                sigma,
                consistent,
            });
        }
    }
    // Union-find over consistent pairs.
    let mut parent: Vec<usize> = (0..estimates.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for pc in pairs.iter().filter(|p| p.consistent) {
        let (a, b) = (root(&mut parent, pc.i), root(&mut parent, pc.j));
        parent[a.max(b)] = a.min(b);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..estimates.len() {
        let r = root(&mut parent, i);
        match groups.iter_mut().find(|g| root(&mut parent.clone(), g[0]) == r) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let all_consistent = pairs.iter().all(|p| p.consistent);
    Ok(ConsistencyReport {
        estimates,
        mean,
        spread,
        pairs,
        groups,
        all_consistent,
    })
}
