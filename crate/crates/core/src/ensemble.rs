//! Inhomogeneous broadening as a weighted set of homogeneous spin packets.
//!
//! The D distribution follows f(D) ∝ exp(−(D − D̄)²/δD²), so `d_sigma` = δD
//! and the variance of D is δD²/2. The field spread uses `b_sigma` as a plain
//! standard deviation of the local B_z offset.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::Spectrum;

/// Default homogeneous half-width (kHz).
pub const DEFAULT_GAMMA_HOM_KHZ: f64 = 62.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Packets differ in D (strain, temperature).
    #[default]
    ZfsSpread,
    /// Packets differ in local B_z (magnetic noise).
    FieldSpread,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    GaussHermite,
    /// Equally spaced nodes over ±4 standard deviations, Gaussian weights.
    UniformGrid,
    MonteCarlo { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InhomogeneousDistribution {
    pub mechanism: Mechanism,
    /// Mean zero-field splitting 2D̄ (MHz).
    pub d_mean: f64,
    /// δD (MHz) of the Gaussian over D.
    pub d_sigma: f64,
    /// Standard deviation of the local B_z offset (µT).
    pub b_sigma: f64,
    /// Nodes per varied axis (tensor grid for `Both` unless Monte Carlo).
    pub n_packets: usize,
    pub scheme: Scheme,
}

impl Default for InhomogeneousDistribution {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::ZfsSpread,
            d_mean: 26.8,
            d_sigma: 0.5,
            b_sigma: 0.0,
            n_packets: 41,
            scheme: Scheme::GaussHermite,
        }
    }
}

impl InhomogeneousDistribution {
    /// A single packet at 2D̄ (no broadening).
    pub fn single(d_mean: f64) -> Self {
        Self {
            d_sigma: 0.0,
            n_packets: 1,
            d_mean,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_packets == 0 {
            return Err(invalid("n_packets", "must be >= 1"));
        }
        if !(self.d_mean > 0.0) {
            return Err(invalid("d_mean", "must be > 0"));
        }
        if !(self.d_sigma >= 0.0) {
            return Err(invalid("d_sigma", "must be >= 0"));
        }
        if !(self.b_sigma >= 0.0) {
            return Err(invalid("b_sigma", "must be >= 0"));
        }
        Ok(())
    }
}

/// One homogeneous sub-ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinPacket {
    /// This packet's D (MHz), half the zero-field splitting.
    pub d_value: f64,
    /// Local B_z offset (µT).
    pub b_offset: f64,
    /// Homogeneous half-width (kHz).
    pub gamma_hom: f64,
    pub weight: f64,
}

impl SpinPacket {
    /// Half-width in MHz.
    pub fn gamma_mhz(&self) -> f64 {
        1e-3 * self.gamma_hom
    }
}

/// Nodes and weights for ∫ e^{−x²} f(x) dx (Golub–Welsch), weights
/// normalized to sum to 1 and nodes ascending, mirrored exactly about 0.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (0.5 * k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for k in 0..n / 2 {
        let j = n - 1 - k;
        let xs = 0.5 * (x[j] - x[k]);
        let ws = 0.5 * (w[j] + w[k]);
        x[k] = -xs;
        x[j] = xs;
        w[k] = ws;
        w[j] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (x, w)
}

/// Standard-normal nodes (unit variance) with normalized weights.
fn normal_nodes(n: usize, scheme: Scheme, stream: u64) -> (Vec<f64>, Vec<f64>) {
    match scheme {
        Scheme::GaussHermite => {
            let (x, w) = gauss_hermite(n);
            (x.into_iter().map(|v| v * 2f64.sqrt()).collect(), w)
        }
        Scheme::UniformGrid => {
            if n == 1 {
                return (vec![0.0], vec![1.0]);
            }
            let x: Vec<f64> = (0..n).map(|k| -4.0 + 8.0 * k as f64 / (n - 1) as f64).collect();
            let w: Vec<f64> = x.iter().map(|v| (-0.5 * v * v).exp()).collect();
            let total: f64 = w.iter().sum();
            (x, w.into_iter().map(|v| v / total).collect())
        }
        Scheme::MonteCarlo { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (x, vec![1.0 / n as f64; n])
        }
    }
}

/// Expand the distribution into packets. Deterministic and order-stable.
pub fn enumerate_packets(dist: &InhomogeneousDistribution, gamma_hom: f64) -> Result<Vec<SpinPacket>> {
    dist.validate()?;
    if !(gamma_hom > 0.0) {
        return Err(invalid("gamma_hom", "must be > 0"));
    }
    let d_bar = 0.5 * dist.d_mean;
    // Var(D) = δD²/2, so the unit-variance node scales by δD/√2.
    let d_scale = dist.d_sigma / 2f64.sqrt();
    let n = dist.n_packets;
    let packet = |x_d: f64, x_b: f64, weight: f64| SpinPacket {
        d_value: d_bar + d_scale * x_d,
        b_offset: dist.b_sigma * x_b,
        gamma_hom,
        weight,
    };
    let out = match dist.mechanism {
        Mechanism::ZfsSpread => {
            let (x, w) = normal_nodes(n, dist.scheme, 0);
            x.iter().zip(&w).map(|(&x, &w)| packet(x, 0.0, w)).collect()
        }
        Mechanism::FieldSpread => {
            let (x, w) = normal_nodes(n, dist.scheme, 1);
            x.iter().zip(&w).map(|(&x, &w)| packet(0.0, x, w)).collect()
        }
        Mechanism::Both => match dist.scheme {
            Scheme::MonteCarlo { .. } => {
                let (xd, w) = normal_nodes(n, dist.scheme, 0);
                let (xb, _) = normal_nodes(n, dist.scheme, 1);
                (0..n).map(|k| packet(xd[k], xb[k], w[k])).collect()
            }
            _ => {
                let (x, w) = normal_nodes(n, dist.scheme, 0);
                let mut v = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        v.push(packet(x[i], x[j], w[i] * w[j]));
                    }
                }
                v
            }
        },
    };
    Ok(out)
}

/// Area-normalized Lorentzian with half-width `hwhm`.
pub fn lorentzian(x: f64, center: f64, hwhm: f64) -> f64 {
    hwhm / PI / ((x - center).powi(2) + hwhm * hwhm)
}

/// Weighted sum of per-packet Lorentzians (unit area per line) on `grid`.
///
/// `line_freqs[k]` lists the resonance positions (MHz) of packet k.
pub fn inhomogeneous_line(packets: &[SpinPacket], line_freqs: &[Vec<f64>], grid: &[f64]) -> Result<Spectrum> {
    if packets.len() != line_freqs.len() {
        return Err(crate::error::QuditError::GridMismatch(format!(
            "{} packets but {} line lists",
            packets.len(),
            line_freqs.len()
        )));
    }
    let mut values = vec![0.0; grid.len()];
    for (p, lines) in packets.iter().zip(line_freqs) {
        let g = p.gamma_mhz();
        for &c in lines {
            for (v, &f) in values.iter_mut().zip(grid) {
                *v += p.weight * lorentzian(f, c, g);
            }
        }
    }
    Spectrum::new(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{CenterParams, FieldConfig};
    use crate::signal::{fwhm, uniform_grid};
    use crate::spin::{approx_levels, Transition};
    use approx::assert_abs_diff_eq;

    #[test]
    fn degenerate_distribution_is_one_packet() {
        let d = InhomogeneousDistribution::single(26.8);
        let p = enumerate_packets(&d, 62.5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].d_value, 13.4);
        assert_eq!(p[0].weight, 1.0);
    }

    #[test]
    fn zero_packets_rejected() {
        let d = InhomogeneousDistribution {
            n_packets: 0,
            ..Default::default()
        };
        assert!(enumerate_packets(&d, 62.5).is_err());
    }

    #[test]
    fn gauss_hermite_moments() {
        let d = InhomogeneousDistribution {
            d_sigma: 0.8,
            n_packets: 21,
            ..Default::default()
        };
        let p = enumerate_packets(&d, 62.5).unwrap();
        let wsum: f64 = p.iter().map(|q| q.weight).sum();
        assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-13);
        let mean: f64 = p.iter().map(|q| q.weight * q.d_value).sum();
        assert_abs_diff_eq!(mean, 13.4, epsilon = 1e-10);
        let var: f64 = p.iter().map(|q| q.weight * (q.d_value - 13.4).powi(2)).sum();
        assert_abs_diff_eq!(var, 0.8 * 0.8 / 2.0, epsilon = 1e-10);
        for k in 0..p.len() {
            let mirror = &p[p.len() - 1 - k];
            assert_abs_diff_eq!(p[k].d_value - 13.4, 13.4 - mirror.d_value, epsilon = 1e-12);
        }
    }

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        // ∫ e^{−x²} x⁴ dx / √π = 3/4
        let (x, w) = gauss_hermite(10);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert_abs_diff_eq!(m4, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let d = InhomogeneousDistribution {
            mechanism: Mechanism::Both,
            b_sigma: 2.0,
            n_packets: 50,
            scheme: Scheme::MonteCarlo { seed: 7 },
            ..Default::default()
        };
        let a = enumerate_packets(&d, 62.5).unwrap();
        let b = enumerate_packets(&d, 62.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        let c = enumerate_packets(
            &InhomogeneousDistribution {
                scheme: Scheme::MonteCarlo { seed: 8 },
                ..d
            },
            62.5,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_packet_line_is_lorentzian() {
        let grid = uniform_grid(25.8, 27.8, 0.001).unwrap();
        let p = enumerate_packets(&InhomogeneousDistribution::single(26.8), 125.0).unwrap();
        let s = inhomogeneous_line(&p, &[vec![26.8]], &grid).unwrap();
        assert_abs_diff_eq!(fwhm(&s.freqs, &s.values).unwrap(), 0.25, epsilon = 2e-3);
        assert_abs_diff_eq!(s.freqs[s.index_of_max()], 26.8, epsilon = 1e-9);
    }

    #[test]
    fn broad_distribution_matches_voigt_width() {
        let d_sigma = 1.0;
        let gamma = 0.0625;
        let dist = InhomogeneousDistribution {
            d_sigma,
            n_packets: 801,
            scheme: Scheme::UniformGrid,
            ..Default::default()
        };
        let packets = enumerate_packets(&dist, gamma * 1e3).unwrap();
        let lines: Vec<Vec<f64>> = packets.iter().map(|p| vec![2.0 * p.d_value]).collect();
        let grid = uniform_grid(20.8, 32.8, 0.005).unwrap();
        let s = inhomogeneous_line(&packets, &lines, &grid).unwrap();
        assert_abs_diff_eq!(s.freqs[s.index_of_max()], 26.8, epsilon = 0.006);

        // Oracle: direct numerical convolution of the Gaussian over ν = 2D
        // with the Lorentzian.
        let sigma_nu = 2.0 * d_sigma / 2f64.sqrt();
        let voigt: Vec<f64> = grid
            .iter()
            .map(|&f| {
                let n = 4000;
                let h = 12.0 * sigma_nu / n as f64;
                (0..=n)
                    .map(|k| {
                        let u = -6.0 * sigma_nu + k as f64 * h;
                        (-0.5 * (u / sigma_nu).powi(2)).exp() * lorentzian(f, 26.8 + u, gamma) * h
                    })
                    .sum::<f64>()
            })
            .collect();
        let w_sim = fwhm(&grid, &s.values).unwrap();
        let w_voigt = fwhm(&grid, &voigt).unwrap();
        assert!((w_sim / w_voigt - 1.0).abs() < 0.1, "{w_sim} vs {w_voigt}");
        assert!(w_sim > 10.0 * 2.0 * gamma);
    }

    #[test]
    fn mechanisms_shift_fan_chart_differently() {
        // ∂ν/∂(2D) = 1 for every inter-doublet line; ∂ν/∂B_z = ±γ, ±2γ.
        let p = CenterParams::default();
        let f = FieldConfig::new(150.0, 0.0);
        let base = approx_levels(&p, &f, None);
        let shifted_d = approx_levels(&p, &f, Some(13.4 + 0.05));
        let shifted_b = approx_levels(&p, &f.with_bz_offset(1.0), None);
        let g = p.gamma_per_ut();
        let want_b = [-g, g, -2.0 * g, 2.0 * g];
        for (k, t) in Transition::INTER_DOUBLET.iter().enumerate() {
            let nu = |lv: &crate::spin::LevelSet| {
                let (a, b) = t.indices();
                lv.energies[a] - lv.energies[b]
            };
            // signed ±3/2 minus ±1/2 energy
            assert_abs_diff_eq!((nu(&shifted_d) - nu(&base)) / 0.1, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(nu(&shifted_b) - nu(&base), want_b[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_field_line_centered() {
        let dist = InhomogeneousDistribution::default();
        let packets = enumerate_packets(&dist, 62.5).unwrap();
        let lines: Vec<Vec<f64>> = packets.iter().map(|p| vec![2.0 * p.d_value; 4]).collect();
        let grid = uniform_grid(24.8, 28.8, 0.01).unwrap();
        let s = inhomogeneous_line(&packets, &lines, &grid).unwrap();
        let mean: f64 = s.freqs.iter().zip(&s.values).map(|(f, v)| f * v).sum::<f64>() / s.values.iter().sum::<f64>();
        assert_abs_diff_eq!(mean, 26.8, epsilon = 1e-6);
    }
}
