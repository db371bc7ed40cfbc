//! Multipole decomposition of the spin-3/2 density matrix and the Δm = ±1
//! population relaxation model.
//!
//! Basis layout (16 Hermitian matrices, orthogonal under Tr(A B)):
//!
//! | index  | member                                   |
//! |--------|------------------------------------------|
//! | 0      | identity I                               |
//! | 1..=3  | dipole: P₀, then q = 1 (re, im)          |
//! | 4..=8  | quadrupole: D₀, q = 1, 2 (re, im)        |
//! | 9..=15 | octupole: F₀, q = 1, 2, 3 (re, im)       |
//!
//! Every non-unit member has unit Frobenius norm, so the diagonal ones are
//! P₀ = diag(3, 1, −1, −3)/√20, D₀ = diag(1, −1, −1, 1)/2 and
//! F₀ = diag(1, −3, 3, −1)/√20.

use std::sync::OnceLock;

use nalgebra::{SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QuditError, Result};
use crate::spin::{hermitian_deviation, spin_operators};
use crate::{CMat4, RMat4};

pub const UNIT: usize = 0;
pub const P0: usize = 1;
pub const D0: usize = 4;
pub const F0: usize = 9;

const TRACE_TOL: f64 = 1e-8;

/// Rank of each basis element (0 for the identity).
pub const RANK: [usize; 16] = [0, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3];

pub struct MultipoleBasis {
    pub basis: [CMat4; 16],
    pub names: [&'static str; 16],
}

impl MultipoleBasis {
    pub fn diag_p0(&self) -> Vector4<f64> {
        diagonal(&self.basis[P0])
    }
    pub fn diag_d0(&self) -> Vector4<f64> {
        diagonal(&self.basis[D0])
    }
    pub fn diag_f0(&self) -> Vector4<f64> {
        diagonal(&self.basis[F0])
    }
}

fn diagonal(m: &CMat4) -> Vector4<f64> {
    Vector4::from_fn(|i, _| m[(i, i)].re)
}

fn frob_sq(m: &CMat4) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Normalize to unit Frobenius norm and fix the sign so the first
/// significant entry (row-major) has a positive real or imaginary part.
fn normalized(m: CMat4) -> CMat4 {
    let n = frob_sq(&m).sqrt();
    let mut m = m / Complex64::new(n, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            let z = m[(i, j)];
            if z.norm() > 1e-12 {
                let lead = if z.re.abs() > 1e-12 { z.re } else { z.im };
                if lead < 0.0 {
                    m = -m;
                }
                return m;
            }
        }
    }
    m
}

/// Spherical tensor components T^k_q for q = k down to 0, built from
/// (S₊)^k by repeated commutation with S₋.
fn tensor_components(rank: usize) -> Vec<CMat4> {
    let ops = spin_operators();
    let i = Complex64::new(0.0, 1.0);
    let sp = ops.sx + ops.sy * i;
    let sm = ops.sx - ops.sy * i;
    let mut top = CMat4::identity();
    for _ in 0..rank {
        top *= sp;
    }
    let mut comps = vec![top];
    for _ in 0..rank {
        let last = comps.last().unwrap();
        comps.push(sm * last - last * sm);
    }
    comps
}

fn build_basis() -> MultipoleBasis {
    let mut basis = [CMat4::zeros(); 16];
    basis[UNIT] = CMat4::identity();
    let mut idx = 1;
    let i = Complex64::new(0.0, 1.0);
    for rank in 1..=3 {
        let comps = tensor_components(rank);
        // comps[rank - q] = T^k_q
        basis[idx] = normalized(comps[rank]);
        idx += 1;
        for q in 1..=rank {
            let t = comps[rank - q];
            basis[idx] = normalized(t + t.adjoint());
            basis[idx + 1] = normalized((t - t.adjoint()) * i);
            idx += 2;
        }
    }
    MultipoleBasis {
        basis,
        names: [
            "I", "P0", "P1c", "P1s", "D0", "D1c", "D1s", "D2c", "D2s", "F0", "F1c", "F1s", "F2c",
            "F2s", "F3c", "F3s",
        ],
    }
}

pub fn multipole_basis() -> &'static MultipoleBasis {
    static BASIS: OnceLock<MultipoleBasis> = OnceLock::new();
    BASIS.get_or_init(build_basis)
}

/// Real coefficients of ρ = Σ cᵢ·basisᵢ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipoleState {
    pub coeffs: [f64; 16],
}

impl Default for MultipoleState {
    fn default() -> Self {
        Self::thermal()
    }
}

impl MultipoleState {
    /// Infinite-temperature equilibrium ρ = I/4.
    pub fn thermal() -> Self {
        let mut coeffs = [0.0; 16];
        coeffs[UNIT] = 0.25;
        Self { coeffs }
    }

    /// ρ = I/4 + p₀P₀ + d₀D₀ + f₀F₀.
    pub fn diagonal(p0: f64, d0: f64, f0: f64) -> Self {
        let mut s = Self::thermal();
        s.coeffs[P0] = p0;
        s.coeffs[D0] = d0;
        s.coeffs[F0] = f0;
        s
    }

    /// Decompose a diagonal density matrix given by its populations.
    pub fn from_populations(n: &[f64; 4]) -> Self {
        let b = multipole_basis();
        let v = Vector4::from_column_slice(n);
        let mut s = Self { coeffs: [0.0; 16] };
        s.coeffs[UNIT] = v.sum() / 4.0;
        s.coeffs[P0] = b.diag_p0().dot(&v);
        s.coeffs[D0] = b.diag_d0().dot(&v);
        s.coeffs[F0] = b.diag_f0().dot(&v);
        s
    }

    pub fn p0(&self) -> f64 {
        self.coeffs[P0]
    }
    pub fn d0(&self) -> f64 {
        self.coeffs[D0]
    }
    pub fn f0(&self) -> f64 {
        self.coeffs[F0]
    }

    pub fn reconstruct(&self) -> CMat4 {
        let b = multipole_basis();
        b.basis
            .iter()
            .zip(self.coeffs.iter())
            .fold(CMat4::zeros(), |acc, (m, &c)| acc + m * Complex64::new(c, 0.0))
    }

    /// Diagonal of the reconstructed density matrix in the m_S basis.
    pub fn populations(&self) -> [f64; 4] {
        let b = multipole_basis();
        let v = Vector4::repeat(self.coeffs[UNIT])
            + b.diag_p0() * self.coeffs[P0]
            + b.diag_d0() * self.coeffs[D0]
            + b.diag_f0() * self.coeffs[F0];
        [v[0], v[1], v[2], v[3]]
    }
}

/// Project a Hermitian, unit-trace density matrix onto the multipole basis.
pub fn decompose(rho: &CMat4) -> Result<MultipoleState> {
    let dev = hermitian_deviation(rho);
    if dev > 1e-9 {
        return Err(QuditError::NotHermitian { deviation: dev });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(QuditError::BadTrace { trace: tr.re });
    }
    Ok(project(rho))
}

/// Projection without validation (any Hermitian matrix).
pub(crate) fn project(rho: &CMat4) -> MultipoleState {
    let b = multipole_basis();
    let mut coeffs = [0.0; 16];
    for (c, m) in coeffs.iter_mut().zip(b.basis.iter()) {
        *c = (m * rho).trace().re / frob_sq(m);
    }
    MultipoleState { coeffs }
}

/// Decay times of the three diagonal multipoles (µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipoleTimes {
    pub t_p: f64,
    pub t_d: f64,
    pub t_f: f64,
}

impl MultipoleTimes {
    /// T_p = 3 T_d = 6 T_f.
    pub fn delta_m_one(t_d: f64) -> Self {
        Self {
            t_p: 3.0 * t_d,
            t_d,
            t_f: 0.5 * t_d,
        }
    }

    /// 5 T_d − T_p − 4 T_f; zero under the Δm = ±1 ratio.
    pub fn mode_factor(&self) -> f64 {
        5.0 * self.t_d - self.t_p - 4.0 * self.t_f
    }
}

/// Population relaxation between the four levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RelaxationModel {
    /// Δm = ±1 flips only: rate_a = (1/2)/T_d for ±3/2 ↔ ±1/2 and
    /// rate_b = (2/3)/T_d for +1/2 ↔ −1/2.
    DeltaMOne { t_d: f64 },
    /// Δm = ±1 flips with free rates (µs⁻¹).
    Custom { rate_a: f64, rate_b: f64 },
    /// Each diagonal multipole decays with its own time (spherical model).
    Multipole { t_p: f64, t_d: f64, t_f: f64 },
}

impl RelaxationModel {
    /// (rate_a, rate_b) for the Δm = ±1 variants.
    pub fn rates(&self) -> Option<(f64, f64)> {
        match *self {
            RelaxationModel::DeltaMOne { t_d } => Some((0.5 / t_d, 2.0 / (3.0 * t_d))),
            RelaxationModel::Custom { rate_a, rate_b } => Some((rate_a, rate_b)),
            RelaxationModel::Multipole { .. } => None,
        }
    }

    /// Multipole decay times when P₀, D₀, F₀ are eigenvectors of the model.
    pub fn multipole_times(&self) -> Option<MultipoleTimes> {
        match *self {
            RelaxationModel::DeltaMOne { t_d } => Some(MultipoleTimes::delta_m_one(t_d)),
            RelaxationModel::Multipole { t_p, t_d, t_f } => Some(MultipoleTimes { t_p, t_d, t_f }),
            RelaxationModel::Custom { rate_a, rate_b } => {
                let scale = rate_a.abs().max(rate_b.abs());
                if rate_a > 0.0 && (rate_b - 4.0 * rate_a / 3.0).abs() <= 1e-12 * scale {
                    Some(MultipoleTimes {
                        t_p: 1.5 / rate_a,
                        t_d: 0.5 / rate_a,
                        t_f: 0.25 / rate_a,
                    })
                } else {
                    None
                }
            }
        }
    }
}

/// Generator R of dn/dt = −R n in the (+3/2, +1/2, −1/2, −3/2) order.
///
/// Columns sum to zero and R is symmetric (infinite-temperature rates).
pub fn build_rate_matrix(model: &RelaxationModel) -> Result<RMat4> {
    match *model {
        RelaxationModel::Multipole { t_p, t_d, t_f } => {
            for (name, t) in [("t_p", t_p), ("t_d", t_d), ("t_f", t_f)] {
                if !(t > 0.0) {
                    return Err(invalid(name, "multipole times must be > 0"));
                }
            }
            let b = multipole_basis();
            let (p, d, f) = (b.diag_p0(), b.diag_d0(), b.diag_f0());
            Ok(p * p.transpose() / t_p + d * d.transpose() / t_d + f * f.transpose() / t_f)
        }
        _ => {
            let (a, b) = model.rates().expect("rate variant");
            if !(a >= 0.0) || !(b >= 0.0) {
                return Err(invalid("rate", "relaxation rates must be >= 0"));
            }
            #[rustfmt::skip]
            let r = RMat4::new(
                 a,     -a,      0.0,   0.0,
                -a,      a + b, -b,     0.0,
                 0.0,   -b,      a + b, -a,
                 0.0,    0.0,   -a,      a,
            );
            Ok(r)
        }
    }
}

/// n(t) = 1/4 + exp(−R t)(n − 1/4) for symmetric R.
pub fn relax_populations(n: &[f64; 4], rate: &RMat4, t: f64) -> [f64; 4] {
    let eig = SymmetricEigen::new(*rate);
    let decay = RMat4::from_diagonal(&eig.eigenvalues.map(|l| (-l * t).exp()));
    let prop = eig.eigenvectors * decay * eig.eigenvectors.transpose();
    let dev = Vector4::from_column_slice(n) - Vector4::repeat(0.25 * n.iter().sum::<f64>());
    let out = Vector4::repeat(0.25 * n.iter().sum::<f64>()) + prop * dev;
    [out[0], out[1], out[2], out[3]]
}

/// Free decay of a multipole state over `t` µs.
///
/// p₀, d₀, f₀ decay with T_p, T_d, T_f; every coherence (q ≠ 0) component
/// decays with the single time `t2_star` (µs).
pub fn relax_diagonal(state: &MultipoleState, t: f64, times: &MultipoleTimes, t2_star: f64) -> MultipoleState {
    let mut out = *state;
    for (k, c) in out.coeffs.iter_mut().enumerate() {
        let tau = match k {
            UNIT => continue,
            P0 => times.t_p,
            D0 => times.t_d,
            F0 => times.t_f,
            _ => t2_star,
        };
        *c *= (-t / tau).exp();
    }
    out
}
