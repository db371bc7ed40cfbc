use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Material parameters of one color-center species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CenterParams {
    /// Zero-field splitting 2D (MHz).
    pub two_d: f64,
    /// Gyromagnetic ratio γ (MHz/mT).
    pub gamma: f64,
    /// Dipole relaxation time T_p (µs).
    pub t_p: f64,
    /// Quadrupole relaxation time T_d (µs).
    pub t_d: f64,
    /// Octupole relaxation time T_f (µs).
    pub t_f: f64,
    /// Inhomogeneous dephasing time of one packet, T₂* (ns).
    pub t2_star: f64,
    /// +1 when optical pumping favors m_S = ±3/2, −1 for ±1/2.
    pub pump_sign: i8,
}

impl Default for CenterParams {
    fn default() -> Self {
        // V3 center in 6H-SiC; relaxation times obey T_p = 3 T_d = 6 T_f.
        Self {
            two_d: 26.8,
            gamma: 28.0,
            t_p: 300.0,
            t_d: 100.0,
            t_f: 50.0,
            t2_star: 357.0,
            pump_sign: 1,
        }
    }
}

impl CenterParams {
    /// D = two_d / 2 (MHz).
    pub fn d(&self) -> f64 {
        0.5 * self.two_d
    }

    /// γ in MHz/µT.
    pub fn gamma_per_ut(&self) -> f64 {
        self.gamma * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.two_d > 0.0) {
            return Err(invalid("two_d", "must be > 0"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "must be > 0"));
        }
        for (name, v) in [
            ("t_p", self.t_p),
            ("t_d", self.t_d),
            ("t_f", self.t_f),
            ("t2_star", self.t2_star),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "relaxation times must be > 0"));
            }
        }
        if self.pump_sign != 1 && self.pump_sign != -1 {
            return Err(invalid("pump_sign", "must be +1 or -1"));
        }
        Ok(())
    }
}

/// Static magnetic field relative to the c-axis, in µT.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub bz: f64,
    pub bperp: f64,
}

impl FieldConfig {
    pub fn new(bz: f64, bperp: f64) -> Self {
        Self { bz, bperp }
    }

    /// Field of magnitude `b` (µT) at polar angle `theta` (rad) from the c-axis.
    pub fn from_polar(b: f64, theta: f64) -> Self {
        Self {
            bz: b * theta.cos(),
            bperp: b * theta.sin(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.bz.hypot(self.bperp)
    }

    /// Polar angle θ = atan2(B_⊥, B_z) in radians.
    pub fn theta(&self) -> f64 {
        self.bperp.atan2(self.bz)
    }

    /// √(B_z² + 4 B_⊥²), the effective field of the ±1/2 doublet (µT).
    pub fn doublet_field(&self) -> f64 {
        (self.bz * self.bz + 4.0 * self.bperp * self.bperp).sqrt()
    }

    pub fn with_bz_offset(&self, offset: f64) -> Self {
        Self {
            bz: self.bz + offset,
            bperp: self.bperp,
        }
    }
}
