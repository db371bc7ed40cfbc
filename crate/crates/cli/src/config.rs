//! Run configuration: one flat TOML (or JSON) file, every field defaulted.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qudit_sim::analysis::FringeInput;
use qudit_sim::ensemble::{InhomogeneousDistribution, Scheme, DEFAULT_GAMMA_HOM_KHZ};
use qudit_sim::multipole::RelaxationModel;
use qudit_sim::odmr::{OdmrSetup, OpticalPump, ProbeModel};
use qudit_sim::pulse::{Calibration, DriveFrame, RamseySetup};
use qudit_sim::signal::uniform_grid;
use qudit_sim::spin::{LevelModel, Transition};
use qudit_sim::{CenterParams, FieldConfig};
use serde::{Deserialize, Serialize};

/// start..=stop in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub const fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn points(&self, path: &str) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            bail!("{path}: need finite start <= stop and step > 0");
        }
        if (self.stop - self.start) / self.step > 5e6 {
            bail!("{path}: more than 5e6 points");
        }
        uniform_grid(self.start, self.stop, self.step).with_context(|| path.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrConfig {
    pub dist: InhomogeneousDistribution,
    pub level_model: LevelModel,
    pub probe_model: ProbeModel,
    /// None: multipole times from `params`.
    pub relax: Option<RelaxationModel>,
    /// MHz
    pub grid: GridSpec,
    pub probe_dbm: f64,
    pub pump_mhz: f64,
    pub pump_dbm: f64,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        Self {
            dist: InhomogeneousDistribution::default(),
            level_model: LevelModel::Exact,
            probe_model: ProbeModel::Linear,
            relax: None,
            grid: GridSpec::new(15.0, 40.0, 0.01),
            probe_dbm: -30.0,
            pump_mhz: 21.8,
            pump_dbm: -30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeMapConfig {
    pub dist: InhomogeneousDistribution,
    pub level_model: LevelModel,
    pub relax: Option<RelaxationModel>,
    /// µT
    pub bperp: f64,
    /// µT
    pub bz: GridSpec,
    /// MHz
    pub grid: GridSpec,
    pub probe_dbm: f64,
    pub pump_mhz: f64,
    pub pump_dbm: f64,
}

impl Default for ModeMapConfig {
    fn default() -> Self {
        Self {
            dist: InhomogeneousDistribution {
                d_sigma: 5.0,
                n_packets: 4001,
                scheme: Scheme::UniformGrid,
                ..Default::default()
            },
            level_model: LevelModel::Perturbative,
            relax: None,
            bperp: 60.0,
            bz: GridSpec::new(0.0, 300.0, 5.0),
            grid: GridSpec::new(-10.0, 64.0, 0.02),
            probe_dbm: -30.0,
            pump_mhz: 26.8,
            pump_dbm: -30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    pub dist: InhomogeneousDistribution,
    pub transition: Transition,
    /// MHz; None: the exact line of the mean packet.
    pub freq: Option<f64>,
    /// Ω for a unit matrix element (MHz).
    pub rabi: f64,
    /// ns
    pub durations: GridSpec,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            dist: InhomogeneousDistribution::single(26.8),
            transition: Transition::Nu1,
            freq: None,
            rabi: Calibration::default().selection_rabi(),
            durations: GridSpec::new(0.0, 3000.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyConfig {
    pub dist: InhomogeneousDistribution,
    pub nu_pump: f64,
    pub nu_probe: f64,
    pub selection_rabi: f64,
    /// ns
    pub selection_duration: f64,
    pub probe_rabi: f64,
    /// ns
    pub probe_duration: f64,
    pub select: bool,
    pub phase_cycle: bool,
    pub frame: DriveFrame,
    /// ns
    pub tau: GridSpec,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        let s = RamseySetup::default();
        Self {
            dist: s.dist,
            nu_pump: s.nu_pump,
            nu_probe: s.nu_probe,
            selection_rabi: s.selection_rabi,
            selection_duration: s.selection_duration,
            probe_rabi: s.probe_rabi,
            probe_duration: s.probe_duration,
            select: s.select,
            phase_cycle: s.phase_cycle,
            frame: s.frame,
            tau: GridSpec::new(0.0, 1500.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineInput {
    pub transition: Transition,
    /// MHz
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertConfig {
    /// Measured lines; empty: the exact ν₁..ν₄ of `field`.
    pub lines: Vec<LineInput>,
    /// MHz; None fits 2D as well.
    pub two_d_known: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Recorded even when no stage draws random numbers. Replaces the seed of
    /// Monte Carlo packet schemes.
    pub seed: u64,
    pub params: CenterParams,
    pub field: FieldConfig,
    pub pump: OpticalPump,
    /// Homogeneous half-width (kHz).
    pub gamma_hom_khz: f64,
    pub odmr: OdmrConfig,
    pub modemap: ModeMapConfig,
    pub rabi: RabiConfig,
    pub ramsey: RamseyConfig,
    pub invert: InvertConfig,
    pub beff: FringeInput,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            params: CenterParams::default(),
            field: FieldConfig::from_polar(223.0, 19f64.to_radians()),
            pump: OpticalPump::default(),
            gamma_hom_khz: DEFAULT_GAMMA_HOM_KHZ,
            odmr: OdmrConfig::default(),
            modemap: ModeMapConfig::default(),
            rabi: RabiConfig::default(),
            ramsey: RamseyConfig::default(),
            invert: InvertConfig::default(),
            beff: FringeInput::default(),
        }
    }
}

fn reseed(dist: &mut InhomogeneousDistribution, seed: u64) {
    if let Scheme::MonteCarlo { .. } = dist.scheme {
        dist.scheme = Scheme::MonteCarlo { seed };
    }
}

impl ExperimentConfig {
    /// Reads TOML, or JSON for `.json` paths. A run sidecar (which wraps the
    /// resolved config under "config") is accepted as well.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: Self = if is_json {
            let v: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))?;
            let inner = match v {
                serde_json::Value::Object(mut m) if m.contains_key("config") && m.contains_key("subcommand") => {
                    m.remove("config").unwrap_or_default()
                }
                other => other,
            };
            serde_json::from_value(inner).with_context(|| format!("{}: invalid config", path.display()))?
        } else {
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
        };
        Ok(cfg)
    }

    /// Applies the run seed and checks every section, naming the field on
    /// failure.
    pub fn resolve(mut self, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        let seed = self.seed;
        for d in [
            &mut self.odmr.dist,
            &mut self.modemap.dist,
            &mut self.rabi.dist,
            &mut self.ramsey.dist,
        ] {
            reseed(d, seed);
        }
        self.params.validate().context("params")?;
        self.pump.validate().context("pump")?;
        for (name, v) in [("field.bz", self.field.bz), ("field.bperp", self.field.bperp)] {
            if !v.is_finite() {
                bail!("{name}: must be finite");
            }
        }
        if !(self.gamma_hom_khz > 0.0) {
            bail!("gamma_hom_khz: must be > 0");
        }
        for (name, d) in [
            ("odmr.dist", &self.odmr.dist),
            ("modemap.dist", &self.modemap.dist),
            ("rabi.dist", &self.rabi.dist),
            ("ramsey.dist", &self.ramsey.dist),
        ] {
            d.validate().with_context(|| name.to_string())?;
        }
        self.odmr.grid.points("odmr.grid")?;
        self.modemap.grid.points("modemap.grid")?;
        self.modemap.bz.points("modemap.bz")?;
        self.rabi.durations.points("rabi.durations")?;
        self.ramsey.tau.points("ramsey.tau")?;
        if self.rabi.durations.start < 0.0 {
            bail!("rabi.durations.start: must be >= 0");
        }
        if self.ramsey.tau.start < 0.0 {
            bail!("ramsey.tau.start: must be >= 0");
        }
        for (name, v) in [
            ("ramsey.selection_duration", self.ramsey.selection_duration),
            ("ramsey.probe_duration", self.ramsey.probe_duration),
            ("ramsey.nu_probe", self.ramsey.nu_probe),
            ("ramsey.nu_pump", self.ramsey.nu_pump),
        ] {
            if !(v > 0.0) {
                bail!("{name}: must be > 0");
            }
        }
        Ok(self)
    }

    pub fn odmr_setup(&self) -> OdmrSetup {
        OdmrSetup {
            params: self.params,
            field: self.field,
            dist: self.odmr.dist,
            gamma_hom: self.gamma_hom_khz,
            pump: self.pump,
            relax: self.odmr.relax,
            level_model: self.odmr.level_model,
            probe_model: self.odmr.probe_model,
        }
    }

    pub fn modemap_setup(&self) -> OdmrSetup {
        OdmrSetup {
            params: self.params,
            field: FieldConfig::new(self.modemap.bz.start, self.modemap.bperp),
            dist: self.modemap.dist,
            gamma_hom: self.gamma_hom_khz,
            pump: self.pump,
            relax: self.modemap.relax,
            level_model: self.modemap.level_model,
            probe_model: ProbeModel::Linear,
        }
    }

    pub fn ramsey_setup(&self) -> RamseySetup {
        let r = &self.ramsey;
        RamseySetup {
            params: self.params,
            field: self.field,
            dist: r.dist,
            pump: self.pump,
            nu_pump: r.nu_pump,
            nu_probe: r.nu_probe,
            selection_rabi: r.selection_rabi,
            selection_duration: r.selection_duration,
            probe_rabi: r.probe_rabi,
            probe_duration: r.probe_duration,
            select: r.select,
            phase_cycle: r.phase_cycle,
            frame: r.frame,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_field_is_named_with_its_line() {
        let err = toml::from_str::<ExperimentConfig>("seed = 1\n[odmr]\nprobe_dbn = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("probe_dbn") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.odmr.grid.step = 0.0;
        let msg = format!("{:#}", cfg.resolve(None).unwrap_err());
        assert!(msg.contains("odmr.grid"), "{msg}");
        let mut cfg = ExperimentConfig::default();
        cfg.ramsey.dist.n_packets = 0;
        let msg = format!("{:#}", cfg.resolve(None).unwrap_err());
        assert!(msg.contains("ramsey.dist") && msg.contains("n_packets"), "{msg}");
    }

    #[test]
    fn seed_replaces_monte_carlo_seed() {
        let mut cfg = ExperimentConfig::default();
        cfg.odmr.dist.scheme = Scheme::MonteCarlo { seed: 1 };
        let cfg = cfg.resolve(Some(42)).unwrap();
        assert_eq!(cfg.odmr.dist.scheme, Scheme::MonteCarlo { seed: 42 });
        assert_eq!(cfg.seed, 42);
    }
}
