//! Continuous-wave ODMR in the rate-equation approximation.
//!
//! Each packet carries four populations on its labeled eigenstates. They
//! relax with the population generator R toward the optically pumped
//! distribution n_t = 1/4 + d_t·D₀, are pulled toward n_t by the optical
//! pump, and are mixed pairwise by microwave tones with Lorentzian rates
//!
//!   W_ij(ν) = π Ω² |⟨i|S_x|j⟩|² Γ / (Γ² + (ν − ν_ij)²)   [µs⁻¹]
//!
//! (Ω and Γ in MHz). Coherences are dropped, which holds while Ω·|M| is
//! small against the splittings between lines. Power broadening is not a
//! separate term: it follows from saturation of the populations.
//!
//! The observable is ΔPL/PL = contrast·(d₀(with probe) − d₀(without)),
//! negative-going for pump_sign = +1.

use std::f64::consts::PI;

use nalgebra::Vector4;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ensemble::{enumerate_packets, InhomogeneousDistribution, SpinPacket, DEFAULT_GAMMA_HOM_KHZ};
use crate::error::{invalid, QuditError, Result};
use crate::multipole::{build_rate_matrix, multipole_basis, MultipoleState, RelaxationModel};
use crate::params::{CenterParams, FieldConfig};
use crate::signal::Spectrum;
use crate::spin::{packet_levels, sx_element_sq, LevelModel, Transition};
use crate::RMat4;

/// Level pairs addressed by microwave tones, (i, j) with i < j.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Calibrated amplitude per √mW: 11 dBm on the unmixed ν₁ element
/// (√3/2) gives a 1.2 µs π pulse.
pub fn default_rabi_scale() -> f64 {
    rabi_scale_for(1.2, 11.0, 3f64.sqrt() / 2.0)
}

/// rabi_scale that yields a π pulse of `t_pi_us` at `power_dbm` on a
/// transition with matrix element `element`.
pub fn rabi_scale_for(t_pi_us: f64, power_dbm: f64, element: f64) -> f64 {
    1.0 / (2.0 * t_pi_us * element * 10f64.powf(power_dbm / 20.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    /// MHz
    pub freq: f64,
    pub power_dbm: f64,
    /// MHz per unit field amplitude.
    pub rabi_scale: f64,
}

impl DriveTone {
    pub fn new(freq: f64, power_dbm: f64) -> Self {
        Self {
            freq,
            power_dbm,
            rabi_scale: default_rabi_scale(),
        }
    }

    /// Ω = rabi_scale · 10^(dBm/20), in MHz.
    pub fn amplitude(&self) -> f64 {
        self.rabi_scale * 10f64.powf(self.power_dbm / 20.0)
    }

    pub fn at(&self, freq: f64) -> Self {
        Self { freq, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalPump {
    /// µs⁻¹; must stay well below 1/T_p.
    pub rate: f64,
    /// Magnitude of the pumped quadrupole; the sign comes from pump_sign.
    pub target_d0: f64,
    /// ΔPL/PL per unit d₀.
    pub contrast_scale: f64,
}

impl Default for OpticalPump {
    fn default() -> Self {
        Self {
            rate: 1e-6,
            target_d0: 0.1,
            contrast_scale: 0.1,
        }
    }
}

impl OpticalPump {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            return Err(invalid("pump.rate", "must be > 0"));
        }
        if !(self.target_d0.abs() <= 0.5) {
            return Err(invalid("pump.target_d0", "|target_d0| must be <= 1/2"));
        }
        if !self.contrast_scale.is_finite() {
            return Err(invalid("pump.contrast_scale", "must be finite"));
        }
        Ok(())
    }
}

/// How the probe enters spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeModel {
    /// First order in probe power (the weak-probe limit); fast.
    #[default]
    Linear,
    /// Full steady state at every probe frequency.
    Saturating,
}

/// Everything that defines a CW experiment apart from the tones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrSetup {
    pub params: CenterParams,
    pub field: FieldConfig,
    pub dist: InhomogeneousDistribution,
    /// Homogeneous half-width (kHz).
    pub gamma_hom: f64,
    pub pump: OpticalPump,
    /// Defaults to the multipole times of `params`.
    pub relax: Option<RelaxationModel>,
    pub level_model: LevelModel,
    pub probe_model: ProbeModel,
}

impl Default for OdmrSetup {
    fn default() -> Self {
        Self {
            params: CenterParams::default(),
            field: FieldConfig::default(),
            dist: InhomogeneousDistribution::default(),
            gamma_hom: DEFAULT_GAMMA_HOM_KHZ,
            pump: OpticalPump::default(),
            relax: None,
            level_model: LevelModel::Exact,
            probe_model: ProbeModel::Linear,
        }
    }
}

impl OdmrSetup {
    pub fn relaxation(&self) -> RelaxationModel {
        self.relax.unwrap_or(RelaxationModel::Multipole {
            t_p: self.params.t_p,
            t_d: self.params.t_d,
            t_f: self.params.t_f,
        })
    }

    pub fn with_field(&self, field: FieldConfig) -> Self {
        Self { field, ..*self }
    }
}

/// Line positions and S_x elements of one packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketLines {
    pub weight: f64,
    /// Half-width (MHz).
    pub gamma: f64,
    pub freqs: [f64; 6],
    pub elements: [f64; 6],
}

impl PacketLines {
    pub fn new(params: &CenterParams, packet: &SpinPacket, field: &FieldConfig, model: LevelModel) -> Result<Self> {
        let f = field.with_bz_offset(packet.b_offset);
        let lv = packet_levels(params, &f, Some(packet.d_value), model)?;
        let mut freqs = [0.0; 6];
        let mut elements = [0.0; 6];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            freqs[k] = (lv.energies[a] - lv.energies[b]).abs();
            elements[k] = sx_element_sq(lv.states.as_ref(), a, b);
        }
        Ok(Self {
            weight: packet.weight,
            gamma: packet.gamma_mhz(),
            freqs,
            elements,
        })
    }

    /// Drive rate on pair `k` per unit Ω² (µs⁻¹ MHz⁻²).
    fn unit_rate(&self, k: usize, freq: f64) -> f64 {
        let g = self.gamma;
        let det = freq - self.freqs[k];
        PI * self.elements[k] * g / (g * g + det * det)
    }

    pub fn rates(&self, tones: &[DriveTone]) -> [f64; 6] {
        let mut w = [0.0; 6];
        for t in tones {
            let om2 = t.amplitude().powi(2);
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += om2 * self.unit_rate(k, t.freq);
            }
        }
        w
    }
}

fn pair_vector(k: usize) -> Vector4<f64> {
    let (a, b) = PAIRS[k];
    let mut u = Vector4::zeros();
    u[a] = 1.0;
    u[b] = -1.0;
    u
}

/// Rate equations of one packet without the tone terms.
#[derive(Debug, Clone)]
pub struct Kinetics {
    /// R + k·Π with Π the projector on traceless vectors.
    generator: RMat4,
    rhs: Vector4<f64>,
    d0_diag: Vector4<f64>,
}

impl Kinetics {
    pub fn new(relax: &RMat4, pump: &OpticalPump, pump_sign: i8) -> Self {
        let b = multipole_basis();
        let d0_diag = b.diag_d0();
        let target = Vector4::repeat(0.25) + d0_diag * (f64::from(pump_sign) * pump.target_d0.abs());
        let j = RMat4::repeat(0.25);
        let generator = relax + (RMat4::identity() - j) * pump.rate;
        let rhs = generator * target + Vector4::repeat(0.25);
        Self {
            generator,
            rhs,
            d0_diag,
        }
    }

    fn system(&self, w: &[f64; 6]) -> RMat4 {
        let mut m = self.generator + RMat4::repeat(0.25);
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                let u = pair_vector(k);
                m += u * u.transpose() * wk;
            }
        }
        m
    }

    /// Steady-state populations for the given pair rates.
    pub fn populations(&self, w: &[f64; 6]) -> Result<Vector4<f64>> {
        self.system(w)
            .lu()
            .solve(&self.rhs)
            .ok_or_else(|| QuditError::Singular("steady-state rate equations".into()))
    }

    pub fn d0(&self, w: &[f64; 6]) -> Result<f64> {
        Ok(self.d0_diag.dot(&self.populations(w)?))
    }

    /// ∂d₀/∂W_k at the given operating point, for all six pairs.
    pub fn probe_response(&self, w: &[f64; 6]) -> Result<[f64; 6]> {
        let lu = self.system(w).lu();
        let err = || QuditError::Singular("steady-state rate equations".into());
        let n = lu.solve(&self.rhs).ok_or_else(err)?;
        // system matrix is symmetric, so M⁻ᵀ D₀ = M⁻¹ D₀
        let y = lu.solve(&self.d0_diag).ok_or_else(err)?;
        let mut c = [0.0; 6];
        for (k, ck) in c.iter_mut().enumerate() {
            let u = pair_vector(k);
            *ck = -y.dot(&u) * u.dot(&n);
        }
        Ok(c)
    }
}

/// Steady state of one packet under optical pumping and microwave tones.
pub fn packet_steady_state(
    params: &CenterParams,
    packet: &SpinPacket,
    field: &FieldConfig,
    tones: &[DriveTone],
    pump: &OpticalPump,
    relax: &RelaxationModel,
) -> Result<MultipoleState> {
    params.validate()?;
    pump.validate()?;
    let lines = PacketLines::new(params, packet, field, LevelModel::Exact)?;
    let kin = Kinetics::new(&build_rate_matrix(relax)?, pump, params.pump_sign);
    let n = kin.populations(&lines.rates(tones))?;
    Ok(MultipoleState::from_populations(&[n[0], n[1], n[2], n[3]]))
}

/// Packets of one setup with their line tables and kinetics.
pub struct OdmrEngine {
    setup: OdmrSetup,
    lines: Vec<PacketLines>,
    kinetics: Kinetics,
}

impl OdmrEngine {
    pub fn new(setup: &OdmrSetup) -> Result<Self> {
        setup.params.validate()?;
        setup.pump.validate()?;
        let packets = enumerate_packets(&setup.dist, setup.gamma_hom)?;
        let lines = packets
            .par_iter()
            .map(|p| PacketLines::new(&setup.params, p, &setup.field, setup.level_model))
            .collect::<Result<Vec<_>>>()?;
        let kinetics = Kinetics::new(
            &build_rate_matrix(&setup.relaxation())?,
            &setup.pump,
            setup.params.pump_sign,
        );
        Ok(Self {
            setup: *setup,
            lines,
            kinetics,
        })
    }

    pub fn lines(&self) -> &[PacketLines] {
        &self.lines
    }

    fn contrast(&self) -> f64 {
        self.setup.pump.contrast_scale
    }

    /// ΔPL/PL vs probe frequency, relative to the same state without probe.
    pub fn spectrum(&self, grid: &[f64], probe: &DriveTone, pump: Option<&DriveTone>) -> Result<Spectrum> {
        let tones: Vec<DriveTone> = pump.into_iter().copied().collect();
        let values = match self.setup.probe_model {
            ProbeModel::Linear => {
                let coeffs = self.response_coeffs(&tones, None)?;
                self.accumulate(grid, probe, &coeffs)
            }
            ProbeModel::Saturating => self.saturating(grid, probe, &tones)?,
        };
        Ok(self.tag(Spectrum::new(grid.to_vec(), values)?, probe, pump))
    }

    /// Pump-on minus pump-off spectrum.
    pub fn lockin(&self, grid: &[f64], probe: &DriveTone, pump: &DriveTone) -> Result<Spectrum> {
        match self.setup.probe_model {
            ProbeModel::Linear => {
                let coeffs = self.response_coeffs(&[*pump], Some(&[]))?;
                let values = self.accumulate(grid, probe, &coeffs);
                Ok(self.tag(Spectrum::new(grid.to_vec(), values)?, probe, Some(pump)))
            }
            ProbeModel::Saturating => {
                let on = self.spectrum(grid, probe, Some(pump))?;
                let off = self.spectrum(grid, probe, None)?;
                Spectrum::difference(&on, &off)
            }
        }
    }

    fn tag(&self, s: Spectrum, probe: &DriveTone, pump: Option<&DriveTone>) -> Spectrum {
        let s = s
            .with_meta("bz_ut", self.setup.field.bz)
            .with_meta("bperp_ut", self.setup.field.bperp)
            .with_meta("probe_dbm", probe.power_dbm)
            .with_meta("packets", self.lines.len());
        match pump {
            Some(p) => s.with_meta("pump_mhz", p.freq).with_meta("pump_dbm", p.power_dbm),
            None => s,
        }
    }

    /// Per-packet ∂d₀/∂W_k with `tones` on, minus the same with `reference`.
    fn response_coeffs(&self, tones: &[DriveTone], reference: Option<&[DriveTone]>) -> Result<Vec<[f64; 6]>> {
        self.lines
            .par_iter()
            .map(|pl| {
                let mut c = self.kinetics.probe_response(&pl.rates(tones))?;
                if let Some(r) = reference {
                    let c0 = self.kinetics.probe_response(&pl.rates(r))?;
                    for k in 0..6 {
                        c[k] -= c0[k];
                    }
                }
                Ok(c)
            })
            .collect()
    }

    fn accumulate(&self, grid: &[f64], probe: &DriveTone, coeffs: &[[f64; 6]]) -> Vec<f64> {
        let om2 = probe.amplitude().powi(2);
        let scale = self.contrast() * om2 * PI;
        let mut sticks = Vec::with_capacity(6 * self.lines.len());
        for (pl, c) in self.lines.iter().zip(coeffs) {
            for k in 0..6 {
                let a = scale * pl.weight * c[k] * pl.elements[k];
                if a != 0.0 {
                    sticks.push((pl.freqs[k], a, pl.gamma));
                }
            }
        }
        lorentzian_sum(&sticks, grid)
    }

    fn saturating(&self, grid: &[f64], probe: &DriveTone, tones: &[DriveTone]) -> Result<Vec<f64>> {
        let base: Vec<f64> = self
            .lines
            .iter()
            .map(|pl| self.kinetics.d0(&pl.rates(tones)))
            .collect::<Result<_>>()?;
        grid.par_iter()
            .map(|&f| {
                let mut all = tones.to_vec();
                all.push(probe.at(f));
                let mut acc = 0.0;
                for (pl, b) in self.lines.iter().zip(&base) {
                    acc += pl.weight * (self.kinetics.d0(&pl.rates(&all))? - b);
                }
                Ok(self.contrast() * acc)
            })
            .collect()
    }
}

/// Σ a·Γ/(Γ² + (ν − c)²) over sticks (c, a, Γ), evaluated on `grid`.
///
/// Uniform grids with one common Γ and many sticks go through an FFT
/// convolution of the binned sticks (linear-interpolation deposit, which
/// keeps each stick's centroid); lines further than one grid span outside
/// the grid are dropped there. Everything else is summed directly.
pub fn lorentzian_sum(sticks: &[(f64, f64, f64)], grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let common_gamma = sticks.first().map(|s| s.2).filter(|&g| sticks.iter().all(|s| s.2 == g));
    let step = if n > 1 { (grid[n - 1] - grid[0]) / (n - 1) as f64 } else { 0.0 };
    let uniform = n > 8 && grid.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
    match common_gamma {
        Some(g) if uniform && sticks.len() > 4 * n.max(64) / 64 && g > 2.0 * step => {
            convolved(sticks, grid[0], step, n, g)
        }
        _ => grid
            .iter()
            .map(|&f| {
                sticks
                    .iter()
                    .map(|&(c, a, g)| a * g / (g * g + (f - c) * (f - c)))
                    .sum()
            })
            .collect(),
    }
}

fn convolved(sticks: &[(f64, f64, f64)], x0: f64, h: f64, n: usize, gamma: f64) -> Vec<f64> {
    let m = n;
    let bins = n + 2 * m;
    let mut deposit = vec![0.0; bins];
    for &(c, a, _) in sticks {
        let pos = (c - x0) / h + m as f64;
        if pos < 0.0 || pos >= (bins - 1) as f64 {
            continue;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        deposit[i] += a * (1.0 - frac);
        deposit[i + 1] += a * frac;
    }
    let len = (2 * bins).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut a: Vec<Complex64> = deposit.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(len, Complex64::new(0.0, 0.0));
    let mut k = vec![Complex64::new(0.0, 0.0); len];
    for d in 0..bins {
        let x = d as f64 * h;
        let v = gamma / (gamma * gamma + x * x);
        k[d] = Complex64::new(v, 0.0);
        if d > 0 {
            k[len - d] = Complex64::new(v, 0.0);
        }
    }
    fwd.process(&mut a);
    fwd.process(&mut k);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= y;
    }
    inv.process(&mut a);
    let norm = 1.0 / len as f64;
    (0..n).map(|i| a[i + m].re * norm).collect()
}

/// Spectrum of the setup with optional pump (convenience wrapper).
pub fn odmr_spectrum(setup: &OdmrSetup, grid: &[f64], probe: &DriveTone, pump: Option<&DriveTone>) -> Result<Spectrum> {
    OdmrEngine::new(setup)?.spectrum(grid, probe, pump)
}

/// Pump-on minus pump-off spectrum (convenience wrapper).
pub fn lockin_difference(setup: &OdmrSetup, grid: &[f64], probe: &DriveTone, pump: &DriveTone) -> Result<Spectrum> {
    OdmrEngine::new(setup)?.lockin(grid, probe, pump)
}

/// One Eq.-(2)-type satellite position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeLine {
    pub s: i8,
    pub sp: i8,
    /// MHz
    pub frequency: f64,
}

/// ν_pump + 3sγB_z + s'γ√(B_z² + 4B_⊥²) for s, s' ∈ {−1, 0, 1}; (0, 0) is
/// the hole itself.
pub fn mode_frequencies(nu_pump: f64, field: &FieldConfig, gamma: f64) -> Vec<ModeLine> {
    let g = gamma * 1e-3;
    let mut out = Vec::with_capacity(9);
    for s in [-1i8, 0, 1] {
        for sp in [-1i8, 0, 1] {
            let frequency = nu_pump + 3.0 * f64::from(s) * g * field.bz + f64::from(sp) * g * field.doublet_field();
            out.push(ModeLine { s, sp, frequency });
        }
    }
    out
}

/// Mode label of the satellite seen on line `probe` when line `pump` is
/// saturated: (ν_probe − ν_pump) = 3sγB_z + s'γB'.
pub fn pair_mode(pump: Transition, probe: Transition) -> Option<(i8, i8)> {
    let (sj, tj) = pump.doublet_signs()?;
    let (sk, tk) = probe.doublet_signs()?;
    Some(((sk - sj) / 2, (tj - tk) / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeStrength {
    pub s: i8,
    pub sp: i8,
    /// Σ over line pairs of u_probeᵀ R⁺ u_pump (µs), in the weak-drive limit
    /// with unit matrix elements.
    pub transfer: f64,
    /// transfer normalized to the largest |transfer| among the 8 satellites.
    pub relative: f64,
}

/// Population-transfer strength of the 8 satellites from the relaxation
/// model alone. Saturating ν_j moves populations by R⁺u_j; line ν_k reads
/// them through u_k.
pub fn mode_strengths(relax: &RelaxationModel) -> Result<Vec<ModeStrength>> {
    let r = build_rate_matrix(relax)?;
    let j = RMat4::repeat(0.25);
    let pinv = (r + j)
        .try_inverse()
        .ok_or_else(|| QuditError::Singular("relaxation generator has extra zero modes".into()))?
        - j;
    let u = |t: Transition| {
        let (a, b) = t.indices();
        let mut v = Vector4::zeros();
        v[a] = 1.0;
        v[b] = -1.0;
        v
    };
    let mut out: Vec<ModeStrength> = Vec::with_capacity(8);
    for s in [-1i8, 0, 1] {
        for sp in [-1i8, 0, 1] {
            if s == 0 && sp == 0 {
                continue;
            }
            let mut transfer = 0.0;
            for pj in Transition::INTER_DOUBLET {
                for pk in Transition::INTER_DOUBLET {
                    if pair_mode(pj, pk) == Some((s, sp)) {
                        transfer += u(pk).dot(&(pinv * u(pj)));
                    }
                }
            }
            out.push(ModeStrength {
                s,
                sp,
                transfer,
                relative: 0.0,
            });
        }
    }
    let max = out.iter().map(|m| m.transfer.abs()).fold(0.0, f64::max);
    for m in &mut out {
        m.relative = if max > 0.0 { m.transfer / max } else { 0.0 };
    }
    Ok(out)
}

/// Position of the largest |value| within ±`half_window` of `center`.
pub fn locate_extremum(spec: &Spectrum, center: f64, half_window: f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, &v) in spec.freqs.iter().zip(&spec.values) {
        if (f - center).abs() <= half_window && best.is_none_or(|b| v.abs() > b.1) {
            best = Some((f, v.abs()));
        }
    }
    best.map(|b| b.0)
}

/// ∫|value| dν over ±`half_window` around `center` (MHz units).
pub fn integrated_signal(spec: &Spectrum, center: f64, half_window: f64) -> f64 {
    let h = spec.step();
    spec.freqs
        .iter()
        .zip(&spec.values)
        .filter(|(&f, _)| (f - center).abs() <= half_window)
        .map(|(_, v)| v.abs() * h)
        .sum()
}

/// Linear baseline through the mean values of the two flanking bands
/// [`half_window`, 2·`half_window`] on either side of `center`.
fn flank_baseline(spec: &Spectrum, center: f64, half_window: f64) -> Option<(f64, f64)> {
    let band = |sign: f64| {
        let pts: Vec<(f64, f64)> = spec
            .freqs
            .iter()
            .zip(&spec.values)
            .filter(|(&f, _)| {
                let d = sign * (f - center);
                d > half_window && d <= 2.0 * half_window
            })
            .map(|(&f, &v)| (f, v))
            .collect();
        (!pts.is_empty()).then(|| {
            let n = pts.len() as f64;
            (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n)
        })
    };
    let (l, r) = (band(-1.0)?, band(1.0)?);
    let slope = (r.1 - l.1) / (r.0 - l.0);
    Some((l.1 - slope * l.0, slope))
}

/// ∫|value − baseline| dν over ±`half_window` around `center`, with the
/// baseline drawn linearly under the feature from the flanking bands.
/// Removes the broad pedestal left by far-detuned packets. Falls back to
/// no baseline when a flank lies outside the spectrum.
pub fn feature_strength(spec: &Spectrum, center: f64, half_window: f64) -> f64 {
    let (a, b) = flank_baseline(spec, center, half_window).unwrap_or((0.0, 0.0));
    let h = spec.step();
    spec.freqs
        .iter()
        .zip(&spec.values)
        .filter(|(&f, _)| (f - center).abs() <= half_window)
        .map(|(&f, &v)| (v - a - b * f).abs() * h)
        .sum()
}

/// Like [`locate_extremum`], after removing the flank baseline.
pub fn locate_feature(spec: &Spectrum, center: f64, half_window: f64) -> Option<f64> {
    let (a, b) = flank_baseline(spec, center, half_window).unwrap_or((0.0, 0.0));
    let mut best: Option<(f64, f64)> = None;
    for (&f, &v) in spec.freqs.iter().zip(&spec.values) {
        let d = (v - a - b * f).abs();
        if (f - center).abs() <= half_window && best.is_none_or(|x| d > x.1) {
            best = Some((f, d));
        }
    }
    best.map(|x| x.0)
}

/// Lock-in spectra vs B_z, each column normalized to its own max |value|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub bz: Vec<f64>,
    pub bperp: f64,
    pub freqs: Vec<f64>,
    /// values[i][j]: column at bz[i], frequency freqs[j].
    pub values: Vec<Vec<f64>>,
}

pub fn field_map(
    setup: &OdmrSetup,
    bz_values: &[f64],
    grid: &[f64],
    pump: &DriveTone,
    probe: &DriveTone,
) -> Result<FieldMap> {
    if bz_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("bz_range", "must be strictly increasing"));
    }
    let bperp = setup.field.bperp;
    let values = bz_values
        .par_iter()
        .map(|&bz| {
            let s = OdmrEngine::new(&setup.with_field(FieldConfig::new(bz, bperp)))?.lockin(grid, probe, pump)?;
            let max = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(if max > 0.0 {
                s.values.iter().map(|v| v / max).collect()
            } else {
                s.values
            })
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(FieldMap {
        bz: bz_values.to_vec(),
        bperp,
        freqs: grid.to_vec(),
        values,
    })
}
