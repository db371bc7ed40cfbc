//! Lab-frame density-matrix propagation under rectangular microwave pulses.
//!
//! A pulse adds Ω·cos(2πν·t + φ)·S_x to the packet Hamiltonian, with t the
//! absolute sequence time, so the on-resonance Rabi frequency of a pair is
//! Ω·|⟨i|S_x|j⟩| and t_π = 1/(2Ω|M|). Each step is a symmetric splitting
//! e^{−iH₀h/2}·e^{−iV(t_mid)h}·e^{−iH₀h/2} carried out in the H₀ eigenbasis,
//! with both exponentials evaluated exactly from precomputed eigensystems.
//! Delays rotate coherences exactly, damp them with T₂*, and relax
//! populations with the Δm = ±1 generator. Relaxation is ignored during
//! pulses.

use std::f64::consts::PI;

use nalgebra::{SymmetricEigen, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{enumerate_packets, InhomogeneousDistribution, SpinPacket};
use crate::error::{invalid, QuditError, Result};
use crate::multipole::{build_rate_matrix, multipole_basis, project, MultipoleState, RelaxationModel};
use crate::odmr::OpticalPump;
use crate::params::{CenterParams, FieldConfig};
use crate::signal::TimeTrace;
use crate::spin::{exact_levels, build_hamiltonian, spin_operators, Transition};
use crate::{CMat4, RMat4};

const TWO_PI_NS: f64 = 2.0 * PI * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// MHz
    pub freq: f64,
    /// Ω (MHz) for a unit matrix element.
    pub rabi: f64,
    /// ns
    pub duration: f64,
    /// rad
    pub phase: f64,
}

impl Pulse {
    pub fn new(freq: f64, rabi: f64, duration: f64) -> Self {
        Self {
            freq,
            rabi,
            duration,
            phase: 0.0,
        }
    }

    /// Largest allowed integration step (ns).
    pub fn max_step(&self) -> f64 {
        1e3 / (20.0 * self.freq.abs().max(self.rabi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Element {
    Pulse(Pulse),
    /// ns
    Delay(f64),
    Readout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub elements: Vec<Element>,
}

impl PulseSequence {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        let seq = Self { elements };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        let readouts = self.elements.iter().filter(|e| matches!(e, Element::Readout)).count();
        if readouts != 1 || !matches!(self.elements.last(), Some(Element::Readout)) {
            return Err(QuditError::InvalidSequence("exactly one Readout, placed last, is required".into()));
        }
        for e in &self.elements {
            match e {
                Element::Pulse(p) if !(p.duration >= 0.0) || !(p.rabi >= 0.0) => {
                    return Err(QuditError::InvalidSequence("pulse duration and rabi must be >= 0".into()))
                }
                Element::Delay(t) if !(*t >= 0.0) => {
                    return Err(QuditError::InvalidSequence("delay must be >= 0".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Pulse(p) => p.duration,
                Element::Delay(t) => *t,
                Element::Readout => 0.0,
            })
            .sum()
    }
}

/// Precomputed eigensystems of one packet. The density matrix is handled
/// in the labeled H₀ eigenbasis throughout.
#[derive(Debug, Clone)]
pub struct PacketPropagator {
    /// Labeled energies (MHz).
    pub energies: [f64; 4],
    /// Eigenvectors as columns (m_S basis).
    pub states: CMat4,
    sx_vecs: CMat4,
    sx_vals: Vector4<f64>,
    relax_vecs: RMat4,
    relax_vals: Vector4<f64>,
    /// ns
    t2_star: f64,
    frame: DriveFrame,
}

/// How the drive couples the eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveFrame {
    /// Full linearly polarized field Ω·cos(2πνt + φ)·S_x.
    #[default]
    Lab,
    /// Co-rotating part only: each eigenpair (i above j) sees
    /// (Ω/2)·⟨i|S_x|j⟩·e^{−i(2πνt + φ)}, applied as exact 2×2 rotations.
    Rotating,
}

impl PacketPropagator {
    pub fn new(
        params: &CenterParams,
        packet: &SpinPacket,
        field: &FieldConfig,
        relax: &RelaxationModel,
    ) -> Result<Self> {
        let f = field.with_bz_offset(packet.b_offset);
        let lv = exact_levels(&build_hamiltonian(params, &f, Some(packet.d_value)))?;
        let states = lv.states.ok_or(QuditError::EigenFailure)?;
        let sx_e = states.adjoint() * spin_operators().sx * states;
        let sx_e = (sx_e + sx_e.adjoint()) * Complex64::new(0.5, 0.0);
        let se = SymmetricEigen::try_new(sx_e, f64::EPSILON, 1000).ok_or(QuditError::EigenFailure)?;
        let re = SymmetricEigen::new(build_rate_matrix(relax)?);
        Ok(Self {
            energies: lv.energies,
            states,
            sx_vecs: se.eigenvectors,
            sx_vals: se.eigenvalues,
            relax_vecs: re.eigenvectors,
            relax_vals: re.eigenvalues,
            t2_star: params.t2_star,
            frame: DriveFrame::Lab,
        })
    }

    pub fn with_frame(mut self, frame: DriveFrame) -> Self {
        self.frame = frame;
        self
    }

    /// |⟨a|S_x|b⟩| between labeled eigenstates.
    pub fn element(&self, t: Transition) -> f64 {
        let (a, b) = t.indices();
        crate::spin::sx_element_sq(Some(&self.states), a, b).sqrt()
    }

    pub fn frequency(&self, t: Transition) -> f64 {
        let (a, b) = t.indices();
        (self.energies[a] - self.energies[b]).abs()
    }

    /// Eigenbasis density matrix from one in the m_S basis.
    pub fn to_eigen(&self, rho: &CMat4) -> CMat4 {
        self.states.adjoint() * rho * self.states
    }

    pub fn to_lab(&self, rho_e: &CMat4) -> CMat4 {
        self.states * rho_e * self.states.adjoint()
    }

    fn half_phase(&self, h: f64) -> Vector4<Complex64> {
        Vector4::from_fn(|k, _| Complex64::from_polar(1.0, -TWO_PI_NS * self.energies[k] * 0.5 * h))
    }

    /// Propagator of a pulse starting at absolute time `t0` (ns), with
    /// `n_steps` equal steps.
    pub fn pulse_unitary(&self, pulse: &Pulse, t0: f64, n_steps: usize) -> CMat4 {
        if self.frame == DriveFrame::Rotating {
            return self.rotating_unitary(pulse, t0, n_steps);
        }
        let mut u = CMat4::identity();
        if n_steps == 0 || pulse.duration == 0.0 {
            return u;
        }
        let h = pulse.duration / n_steps as f64;
        let half = self.half_phase(h);
        let q = &self.sx_vecs;
        let qa = q.adjoint();
        for s in 0..n_steps {
            let t_mid = t0 + (s as f64 + 0.5) * h;
            let amp = pulse.rabi * (TWO_PI_NS * pulse.freq * t_mid + pulse.phase).cos();
            let theta = TWO_PI_NS * amp * h;
            let mut qd = *q;
            for k in 0..4 {
                let ph = Complex64::from_polar(1.0, -theta * self.sx_vals[k]);
                qd.column_mut(k).scale_mut(1.0);
                for r in 0..4 {
                    qd[(r, k)] *= ph;
                }
            }
            let mut step = qd * qa;
            for r in 0..4 {
                for c in 0..4 {
                    step[(r, c)] *= half[r] * half[c];
                }
            }
            u = step * u;
        }
        u
    }

    fn rotating_unitary(&self, pulse: &Pulse, t0: f64, n_steps: usize) -> CMat4 {
        let mut u = CMat4::identity();
        if n_steps == 0 || pulse.duration == 0.0 {
            return u;
        }
        let h = pulse.duration / n_steps as f64;
        let half = self.half_phase(h);
        let sx_e = self.states.adjoint() * spin_operators().sx * self.states;
        // (upper, lower, ⟨upper|S_x|lower⟩)
        let mut pairs: Vec<(usize, usize, Complex64)> = Vec::with_capacity(6);
        for i in 0..4 {
            for j in 0..4 {
                if self.energies[i] > self.energies[j] && sx_e[(i, j)].norm() > 1e-12 {
                    pairs.push((i, j, sx_e[(i, j)]));
                }
            }
        }
        let rotate = |u: &mut CMat4, (i, j, m): (usize, usize, Complex64), theta: f64, tau: f64| {
            // exp(−i·2π·τ·[[0, c], [c*, 0]]) on rows i, j with c = (Ω/2)·m·e^{−iθ}
            let c = m * Complex64::from_polar(0.5 * pulse.rabi, -theta);
            let a = TWO_PI_NS * tau * c.norm();
            let e = c / c.norm();
            let (sn, cs) = a.sin_cos();
            let mi = Complex64::new(0.0, -sn);
            for col in 0..4 {
                let (x, y) = (u[(i, col)], u[(j, col)]);
                u[(i, col)] = x * cs + mi * e * y;
                u[(j, col)] = mi * e.conj() * x + y * cs;
            }
        };
        for s in 0..n_steps {
            let t_mid = t0 + (s as f64 + 0.5) * h;
            let theta = TWO_PI_NS * pulse.freq * t_mid + pulse.phase;
            for r in 0..4 {
                for c in 0..4 {
                    u[(r, c)] *= half[r];
                }
            }
            for &p in &pairs {
                rotate(&mut u, p, theta, 0.5 * h);
            }
            for &p in pairs.iter().rev() {
                rotate(&mut u, p, theta, 0.5 * h);
            }
            for r in 0..4 {
                for c in 0..4 {
                    u[(r, c)] *= half[r];
                }
            }
        }
        u
    }

    /// Number of steps for `pulse` given an optional requested step (ns).
    pub fn steps_for(pulse: &Pulse, step_ns: Option<f64>) -> Result<usize> {
        let max = pulse.max_step();
        let h = match step_ns {
            Some(h) if h > max * (1.0 + 1e-12) => {
                return Err(QuditError::StepTooLarge { step_ns: h, max_ns: max })
            }
            Some(h) if h > 0.0 => h,
            Some(_) => return Err(invalid("step_ns", "must be > 0")),
            None => max,
        };
        Ok((pulse.duration / h).ceil() as usize)
    }

    /// Free evolution for `tau` ns in the eigenbasis.
    pub fn delay(&self, rho_e: &CMat4, tau: f64) -> CMat4 {
        let mut out = *rho_e;
        let damp = (-tau / self.t2_star).exp();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let ph = Complex64::from_polar(damp, -TWO_PI_NS * (self.energies[i] - self.energies[j]) * tau);
                    out[(i, j)] *= ph;
                }
            }
        }
        let n = Vector4::from_fn(|k, _| rho_e[(k, k)].re);
        let mean = n.sum() * 0.25;
        let decay = self.relax_vals.map(|l| (-l * tau * 1e-3).exp());
        let dev = n - Vector4::repeat(mean);
        let relaxed = Vector4::repeat(mean) + self.relax_vecs * (decay.component_mul(&(self.relax_vecs.transpose() * dev)));
        for k in 0..4 {
            out[(k, k)] = Complex64::new(relaxed[k], 0.0);
        }
        out
    }

    /// Apply a pulse starting at absolute time `t0`.
    pub fn apply_pulse(&self, rho_e: &CMat4, pulse: &Pulse, t0: f64, step_ns: Option<f64>) -> Result<CMat4> {
        let u = self.pulse_unitary(pulse, t0, Self::steps_for(pulse, step_ns)?);
        Ok(u * rho_e * u.adjoint())
    }
}

/// Populations 1/4 + d·D₀ on the labeled eigenstates.
pub fn pumped_state(pump: &OpticalPump, pump_sign: i8) -> CMat4 {
    let d = multipole_basis().diag_d0() * (f64::from(pump_sign) * pump.target_d0.abs());
    CMat4::from_diagonal(&Vector4::from_fn(|k, _| Complex64::new(0.25 + d[k], 0.0)))
}

/// Run `seq` on `rho0` (m_S basis) and return the final multipole state.
pub fn propagate(
    rho0: &CMat4,
    params: &CenterParams,
    packet: &SpinPacket,
    field: &FieldConfig,
    seq: &PulseSequence,
    relax: &RelaxationModel,
    step_ns: Option<f64>,
) -> Result<MultipoleState> {
    seq.validate()?;
    let prop = PacketPropagator::new(params, packet, field, relax)?;
    let mut rho = prop.to_eigen(rho0);
    let mut t = 0.0;
    for e in &seq.elements {
        match e {
            Element::Pulse(p) => {
                rho = prop.apply_pulse(&rho, p, t, step_ns)?;
                t += p.duration;
            }
            Element::Delay(tau) => {
                rho = prop.delay(&rho, *tau);
                t += tau;
            }
            Element::Readout => {}
        }
    }
    Ok(project(&prop.to_lab(&rho)))
}

fn pair_difference(rho_e: &CMat4, t: Transition) -> f64 {
    let (a, b) = t.indices();
    rho_e[(a, a)].re - rho_e[(b, b)].re
}

/// Readout vs pulse length for one packet, starting from the pumped state.
/// Signal = contrast · (n_first − n_second) of `readout`.
pub fn rabi_trace(
    params: &CenterParams,
    packet: &SpinPacket,
    field: &FieldConfig,
    drive: &Pulse,
    readout: Transition,
    pump: &OpticalPump,
    durations: &[f64],
) -> Result<TimeTrace> {
    if durations.windows(2).any(|w| !(w[1] > w[0])) || durations.first().is_some_and(|&d| d < 0.0) {
        return Err(invalid("durations", "must be non-negative and strictly increasing"));
    }
    let relax = RelaxationModel::Multipole {
        t_p: params.t_p,
        t_d: params.t_d,
        t_f: params.t_f,
    };
    let prop = PacketPropagator::new(params, packet, field, &relax)?;
    let mut rho = pumped_state(pump, params.pump_sign);
    let mut t = 0.0;
    let mut values = Vec::with_capacity(durations.len());
    for &d in durations {
        let seg = Pulse {
            duration: d - t,
            ..*drive
        };
        let n = (seg.duration / drive.max_step()).ceil() as usize;
        let u = prop.pulse_unitary(&seg, t, n);
        rho = u * rho * u.adjoint();
        t = d;
        values.push(pump.contrast_scale * pair_difference(&rho, readout));
    }
    Ok(TimeTrace::new(durations.to_vec(), values)?
        .with_meta("drive_mhz", drive.freq)
        .with_meta("rabi_mhz", drive.rabi))
}

/// Weighted sum of single-packet Rabi traces.
pub fn ensemble_rabi_trace(
    params: &CenterParams,
    dist: &InhomogeneousDistribution,
    field: &FieldConfig,
    drive: &Pulse,
    readout: Transition,
    pump: &OpticalPump,
    durations: &[f64],
) -> Result<TimeTrace> {
    let packets = enumerate_packets(dist, crate::ensemble::DEFAULT_GAMMA_HOM_KHZ)?;
    let traces = packets
        .par_iter()
        .map(|p| rabi_trace(params, p, field, drive, readout, pump, durations))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; durations.len()];
    for (p, tr) in packets.iter().zip(&traces) {
        for (v, x) in values.iter_mut().zip(&tr.values) {
            *v += p.weight * x;
        }
    }
    Ok(TimeTrace::new(durations.to_vec(), values)?.with_meta("packets", packets.len()))
}

/// Two-frequency Ramsey experiment on an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseySetup {
    pub params: CenterParams,
    pub field: FieldConfig,
    pub dist: InhomogeneousDistribution,
    pub pump: OpticalPump,
    /// Selection/projection π pulse frequency (MHz), on ν₁.
    pub nu_pump: f64,
    /// π/2 pulse frequency (MHz), near ν₅.
    pub nu_probe: f64,
    /// Ω of the selection pulses for a unit matrix element (MHz).
    pub selection_rabi: f64,
    /// ns
    pub selection_duration: f64,
    pub probe_rabi: f64,
    /// ns
    pub probe_duration: f64,
    /// false: drop both ν₁ pulses (single-frequency control).
    pub select: bool,
    /// Phase cycle. The two π/2 phases step together over the four
    /// quadratures and the second one alone flips by π (half difference),
    /// which keeps terms in φ₂ − φ₁ only: no offset, no single-pulse or
    /// double-quantum terms. The selection and
    /// projection pulses each take source phases {0, π} independently, so
    /// only population transfer on ν₁ survives; coherence left by an
    /// imperfect π on detuned packets (which would beat at ν_pump − ν₁)
    /// cancels. 64 shots per delay, sharing unitaries.
    pub phase_cycle: bool,
    pub frame: DriveFrame,
}

impl Default for RamseySetup {
    fn default() -> Self {
        let cal = Calibration::default();
        Self {
            params: CenterParams::default(),
            field: FieldConfig::from_polar(223.0, 19f64.to_radians()),
            dist: InhomogeneousDistribution {
                n_packets: 121,
                scheme: crate::ensemble::Scheme::UniformGrid,
                ..Default::default()
            },
            pump: OpticalPump::default(),
            nu_pump: 21.8,
            nu_probe: 11.7,
            selection_rabi: cal.selection_rabi(),
            selection_duration: cal.t_pi_nu1,
            probe_rabi: cal.probe_rabi(),
            probe_duration: cal.t_half_pi_nu5,
            select: true,
            phase_cycle: true,
            frame: DriveFrame::Lab,
        }
    }
}

impl RamseySetup {
    fn relax(&self) -> RelaxationModel {
        RelaxationModel::Multipole {
            t_p: self.params.t_p,
            t_d: self.params.t_d,
            t_f: self.params.t_f,
        }
    }

    fn selection(&self) -> Pulse {
        Pulse::new(self.nu_pump, self.selection_rabi, self.selection_duration)
    }

    fn probe(&self) -> Pulse {
        Pulse::new(self.nu_probe, self.probe_rabi, self.probe_duration)
    }

    /// Pulse sequence for one delay τ (ns).
    pub fn sequence(&self, tau: f64) -> PulseSequence {
        let mut e = Vec::with_capacity(6);
        if self.select {
            e.push(Element::Pulse(self.selection()));
        }
        e.push(Element::Pulse(self.probe()));
        e.push(Element::Delay(tau));
        e.push(Element::Pulse(self.probe()));
        if self.select {
            e.push(Element::Pulse(self.selection()));
        }
        e.push(Element::Readout);
        PulseSequence { elements: e }
    }
}

/// Ramsey signal of one packet for all delays.
fn packet_ramsey(setup: &RamseySetup, prop: &PacketPropagator, taus: &[f64]) -> Vec<f64> {
    let probe = setup.probe();
    let sel = setup.selection();
    let n_sel = (sel.duration / sel.max_step()).ceil() as usize;
    let n_probe = (probe.duration / probe.max_step()).ceil() as usize;
    let t_sel = if setup.select { sel.duration } else { 0.0 };
    let t1 = t_sel + probe.duration;
    let cycle: &[f64] = if setup.phase_cycle { &[0.0, PI] } else { &[0.0] };
    let quad: &[f64] = if setup.phase_cycle { &[0.0, 0.5 * PI, PI, 1.5 * PI] } else { &[0.0] };
    let sel_phases: &[f64] = if setup.select { cycle } else { &[] };
    let with_phase = |p: &Pulse, ph: f64| Pulse { phase: p.phase + ph, ..*p };
    let conj = |u: &CMat4, r: &CMat4| u * r * u.adjoint();

    // (first π/2 phase index, state after the first π/2)
    let mut branches: Vec<(usize, CMat4)> = Vec::new();
    let rho0 = pumped_state(&setup.pump, setup.params.pump_sign);
    let starts: Vec<CMat4> = if setup.select {
        sel_phases
            .iter()
            .map(|&psi| conj(&prop.pulse_unitary(&with_phase(&sel, psi), 0.0, n_sel), &rho0))
            .collect()
    } else {
        vec![rho0]
    };
    for r in &starts {
        for (k, &phi) in quad.iter().enumerate() {
            let u = prop.pulse_unitary(&with_phase(&probe, phi), t_sel, n_probe);
            branches.push((k, conj(&u, r)));
        }
    }
    let n_proj = sel_phases.len().max(1);
    let scale = 1.0 / (branches.len() * n_proj) as f64;
    taus.iter()
        .map(|&tau| {
            let t = t1 + tau;
            let second: Vec<CMat4> = quad
                .iter()
                .map(|&phi| prop.pulse_unitary(&with_phase(&probe, phi), t, n_probe))
                .collect();
            let proj: Vec<CMat4> = sel_phases
                .iter()
                .map(|&psi| prop.pulse_unitary(&with_phase(&sel, psi), t + probe.duration, n_sel))
                .collect();
            let read = |r: &CMat4| -> f64 {
                if proj.is_empty() {
                    pair_difference(r, Transition::Nu1)
                } else {
                    proj.iter().map(|u| pair_difference(&conj(u, r), Transition::Nu1)).sum()
                }
            };
            let mut acc = 0.0;
            for (k, rho1) in &branches {
                let r0 = prop.delay(rho1, tau);
                acc += if setup.phase_cycle {
                    // Same phase minus opposite phase for the second π/2.
                    0.5 * (read(&conj(&second[*k], &r0)) - read(&conj(&second[(k + 2) % 4], &r0)))
                } else {
                    read(&conj(&second[0], &r0))
                };
            }
            setup.pump.contrast_scale * acc * scale
        })
        .collect()
}

/// Selection π at ν_pump, π/2 at ν_probe, delay τ, π/2 at ν_probe,
/// projection π at ν_pump; readout of the ν₁ pair, summed over packets.
pub fn ramsey_two_frequency(setup: &RamseySetup, taus: &[f64]) -> Result<TimeTrace> {
    setup.params.validate()?;
    setup.pump.validate()?;
    if taus.windows(2).any(|w| !(w[1] > w[0])) || taus.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("taus", "must be non-negative and strictly increasing"));
    }
    let relax = setup.relax();
    let packets = enumerate_packets(&setup.dist, crate::ensemble::DEFAULT_GAMMA_HOM_KHZ)?;
    let per_packet = packets
        .par_iter()
        .map(|p| {
            let prop = PacketPropagator::new(&setup.params, p, &setup.field, &relax)?.with_frame(setup.frame);
            Ok(packet_ramsey(setup, &prop, taus))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; taus.len()];
    for (p, tr) in packets.iter().zip(&per_packet) {
        for (v, x) in values.iter_mut().zip(tr) {
            *v += p.weight * x;
        }
    }
    Ok(TimeTrace::new(taus.to_vec(), values)?
        .with_meta("nu_pump_mhz", setup.nu_pump)
        .with_meta("nu_probe_mhz", setup.nu_probe)
        .with_meta("select", setup.select)
        .with_meta("packets", packets.len()))
}

/// Transfer probability of a rectangular pulse on an isolated pair:
/// Ω²/(Ω² + Δ²)·sin²(π√(Ω² + Δ²)·t), Ω = Ω_eff (MHz), t in µs.
pub fn two_level_transfer(omega_eff: f64, detuning: f64, t_us: f64) -> f64 {
    let w2 = omega_eff * omega_eff + detuning * detuning;
    if w2 == 0.0 {
        return 0.0;
    }
    omega_eff * omega_eff / w2 * (PI * w2.sqrt() * t_us).sin().powi(2)
}

/// Per-packet excitation after the selection π pulse, with each packet's
/// own ν₁ (MHz) alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProfile {
    pub nu1: Vec<f64>,
    pub excitation: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn packet_selection_profile(
    params: &CenterParams,
    dist: &InhomogeneousDistribution,
    field: &FieldConfig,
    nu_pump: f64,
    pump_pulse: &Pulse,
) -> Result<SelectionProfile> {
    let packets = enumerate_packets(dist, crate::ensemble::DEFAULT_GAMMA_HOM_KHZ)?;
    let rows = packets
        .par_iter()
        .map(|p| {
            let f = field.with_bz_offset(p.b_offset);
            let lv = exact_levels(&build_hamiltonian(params, &f, Some(p.d_value)))?;
            let (a, b) = Transition::Nu1.indices();
            let m = crate::spin::sx_element_sq(lv.states.as_ref(), a, b).sqrt();
            let nu1 = lv.frequency(Transition::Nu1);
            let x = two_level_transfer(pump_pulse.rabi * m, nu1 - nu_pump, pump_pulse.duration * 1e-3);
            Ok((nu1, x, p.weight))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionProfile {
        nu1: rows.iter().map(|r| r.0).collect(),
        excitation: rows.iter().map(|r| r.1).collect(),
        weights: rows.iter().map(|r| r.2).collect(),
    })
}

/// Power anchors for the two pulse types (per-transition calibration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// π pulse on ν₁ (ns) at `p_nu1_dbm`.
    pub t_pi_nu1: f64,
    pub p_nu1_dbm: f64,
    /// π/2 pulse on ν₅ (ns) at `p_nu5_dbm`.
    pub t_half_pi_nu5: f64,
    pub p_nu5_dbm: f64,
    /// Unmixed matrix elements used for the anchors.
    pub m_nu1: f64,
    pub m_nu5: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            t_pi_nu1: 1200.0,
            p_nu1_dbm: 11.0,
            t_half_pi_nu5: 80.0,
            p_nu5_dbm: 33.0,
            m_nu1: 3f64.sqrt() / 2.0,
            m_nu5: 1.0,
        }
    }
}

impl Calibration {
    /// Ω for a unit element that gives the ν₁ anchor (MHz).
    pub fn selection_rabi(&self) -> f64 {
        1e3 / (2.0 * self.t_pi_nu1 * self.m_nu1)
    }

    pub fn probe_rabi(&self) -> f64 {
        1e3 / (4.0 * self.t_half_pi_nu5 * self.m_nu5)
    }

    /// Ω at an arbitrary power for the ν₁ or ν₅ chain.
    pub fn rabi_at(&self, transition: Transition, power_dbm: f64) -> f64 {
        let (base, p0) = match transition {
            Transition::Nu5 => (self.probe_rabi(), self.p_nu5_dbm),
            _ => (self.selection_rabi(), self.p_nu1_dbm),
        };
        base * 10f64.powf((power_dbm - p0) / 20.0)
    }

    /// Amplitude ratio implied by the power difference vs the ratio of the
    /// calibrated Rabi frequencies; these do not agree for the two anchors.
    pub fn anchor_mismatch(&self) -> (f64, f64) {
        (
            10f64.powf((self.p_nu5_dbm - self.p_nu1_dbm) / 20.0),
            self.probe_rabi() * self.m_nu5 / (self.selection_rabi() * self.m_nu1),
        )
    }
}
