//! Spin-3/2 operator algebra, the axial Hamiltonian and its level structure.
//!
//! Basis order is fixed as m_S = (+3/2, +1/2, −1/2, −3/2), index 0..3.

use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QuditError, Result};
use crate::params::{CenterParams, FieldConfig};
use crate::CMat4;

const HERMITIAN_TOL: f64 = 1e-9;
const EIGEN_TOL: f64 = 1e-10;

/// Spin-3/2 sublevel label, ordered like the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    P3,
    P1,
    M1,
    M3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::P3, Level::P1, Level::M1, Level::M3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn m(self) -> f64 {
        match self {
            Level::P3 => 1.5,
            Level::P1 => 0.5,
            Level::M1 => -0.5,
            Level::M3 => -1.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::P3 => "+3/2",
            Level::P1 => "+1/2",
            Level::M1 => "-1/2",
            Level::M3 => "-3/2",
        }
    }
}

/// The five resonances of one center.
///
/// ν₁, ν₂ are the inner (Δm = ±1) inter-doublet lines, ν₃, ν₄ the outer
/// (Δm = ±2) ones and ν₅ the intra-doublet "+1/2" ↔ "−1/2" line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Nu1,
    Nu2,
    Nu3,
    Nu4,
    Nu5,
}

impl Transition {
    pub const ALL: [Transition; 5] = [
        Transition::Nu1,
        Transition::Nu2,
        Transition::Nu3,
        Transition::Nu4,
        Transition::Nu5,
    ];
    pub const INTER_DOUBLET: [Transition; 4] = [
        Transition::Nu1,
        Transition::Nu2,
        Transition::Nu3,
        Transition::Nu4,
    ];

    /// (first, second) level; the first one is the member whose population
    /// is read out as "first minus second".
    pub fn levels(self) -> (Level, Level) {
        match self {
            Transition::Nu1 => (Level::M3, Level::M1),
            Transition::Nu2 => (Level::P3, Level::P1),
            Transition::Nu3 => (Level::M3, Level::P1),
            Transition::Nu4 => (Level::P3, Level::M1),
            Transition::Nu5 => (Level::P1, Level::M1),
        }
    }

    pub fn indices(self) -> (usize, usize) {
        let (a, b) = self.levels();
        (a.index(), b.index())
    }

    /// Signs (σ, σ') of the ±3/2 and ±1/2 members for inter-doublet lines.
    pub fn doublet_signs(self) -> Option<(i8, i8)> {
        match self {
            Transition::Nu1 => Some((-1, -1)),
            Transition::Nu2 => Some((1, 1)),
            Transition::Nu3 => Some((-1, 1)),
            Transition::Nu4 => Some((1, -1)),
            Transition::Nu5 => None,
        }
    }

    pub fn is_inner(self) -> bool {
        matches!(self, Transition::Nu1 | Transition::Nu2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Transition::Nu1 => "nu1",
            Transition::Nu2 => "nu2",
            Transition::Nu3 => "nu3",
            Transition::Nu4 => "nu4",
            Transition::Nu5 => "nu5",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub sx: CMat4,
    pub sy: CMat4,
    pub sz: CMat4,
}

/// Standard S = 3/2 angular-momentum matrices (ħ = 1).
pub fn build_spin_operators() -> SpinOperators {
    let mut sp = CMat4::zeros();
    // ⟨m+1|S+|m⟩ = √(S(S+1) − m(m+1)), S = 3/2
    for j in 1..4 {
        let m = Level::ALL[j].m();
        sp[(j - 1, j)] = Complex64::new((3.75 - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let sx = (sp + sm) * half;
    let sy = (sp - sm) * Complex64::new(0.0, -0.5);
    let sz = CMat4::from_diagonal(&nalgebra::Vector4::from_fn(|i, _| {
        Complex64::new(Level::ALL[i].m(), 0.0)
    }));
    SpinOperators { sx, sy, sz }
}

/// Shared instance of the spin matrices.
pub fn spin_operators() -> &'static SpinOperators {
    static OPS: OnceLock<SpinOperators> = OnceLock::new();
    OPS.get_or_init(build_spin_operators)
}

/// H = D (S_z² − 5/4) + γ (B_z S_z + B_⊥ S_x), in MHz.
///
/// `d_override` is the packet's own D (MHz), replacing `params.two_d / 2`.
pub fn build_hamiltonian(params: &CenterParams, field: &FieldConfig, d_override: Option<f64>) -> CMat4 {
    let ops = spin_operators();
    let d = d_override.unwrap_or_else(|| params.d());
    let g = params.gamma_per_ut();
    let id = CMat4::identity();
    let c = |x: f64| Complex64::new(x, 0.0);
    (ops.sz * ops.sz - id * c(1.25)) * c(d) + ops.sz * c(g * field.bz) + ops.sx * c(g * field.bperp)
}

/// Four energies in label order (+3/2, +1/2, −1/2, −3/2).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub energies: [f64; 4],
    /// Eigenvectors as columns, in label order. Present for exact solves.
    pub states: Option<CMat4>,
}

impl LevelSet {
    pub fn energy(&self, level: Level) -> f64 {
        self.energies[level.index()]
    }

    /// Transition frequency |E_a − E_b| (MHz).
    pub fn frequency(&self, t: Transition) -> f64 {
        let (a, b) = t.indices();
        (self.energies[a] - self.energies[b]).abs()
    }

    pub fn sum(&self) -> f64 {
        self.energies.iter().sum()
    }
}

/// Which energies feed transition frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelModel {
    /// Numerical diagonalization of the full Hamiltonian.
    #[default]
    Exact,
    /// Weak-field closed form (eigenvectors still from the exact solve).
    Perturbative,
}

pub fn hermitian_deviation(h: &CMat4) -> f64 {
    (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// All 24 permutations of (0, 1, 2, 3) in lexicographic order.
fn permutations4() -> &'static [[usize; 4]; 24] {
    static PERMS: OnceLock<[[usize; 4]; 24]> = OnceLock::new();
    PERMS.get_or_init(|| {
        let mut out = [[0usize; 4]; 24];
        let mut k = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let p = [a, b, c, d];
                        let distinct = (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j]));
                        if distinct {
                            out[k] = p;
                            k += 1;
                        }
                    }
                }
            }
        }
        out
    })
}

/// Diagonalize a Hermitian 4×4 matrix and label eigenpairs by m_S character.
///
/// Labels maximize the summed overlap Σ|⟨m|ψ⟩|² over all assignments; on
/// exact ties (B_z = 0) the higher-energy eigenvector takes the lower basis
/// index, so +1/2 sits above −1/2 as in the B_z → 0⁺ limit.
pub fn exact_levels(h: &CMat4) -> Result<LevelSet> {
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL {
        return Err(QuditError::NotHermitian { deviation: dev });
    }
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = herm.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let eig = SymmetricEigen::try_new(herm, f64::EPSILON, 1000).ok_or(QuditError::EigenFailure)?;
    for k in 0..4 {
        let v = eig.eigenvectors.column(k);
        let resid = (herm * v - v * Complex64::new(eig.eigenvalues[k], 0.0)).norm();
        if resid > EIGEN_TOL * scale {
            return Err(QuditError::EigenFailure);
        }
    }

    // Descending energy, so ties in labeling are reproducible.
    let mut order: [usize; 4] = [0, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let overlap = |vec_idx: usize, basis: usize| eig.eigenvectors[(basis, order[vec_idx])].norm_sqr();
    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    for perm in permutations4() {
        // perm[k] = basis label assigned to the k-th sorted eigenvector
        let score: f64 = (0..4).map(|k| overlap(k, perm[k])).sum();
        if score > best.0 + 1e-14 {
            best = (score, *perm);
        }
    }
    // A near-degenerate pair elsewhere can mask a tie; settle ties pairwise.
    let mut labels = best.1;
    loop {
        let mut swapped = false;
        for k in 0..4 {
            for l in k + 1..4 {
                let (a, b) = (labels[k], labels[l]);
                let gain = overlap(k, b) + overlap(l, a) - overlap(k, a) - overlap(l, b);
                if a > b && gain.abs() < 1e-12 {
                    labels.swap(k, l);
                    swapped = true;
                }
            }
        }
        if !swapped {
            break;
        }
    }

    let mut energies = [0.0; 4];
    let mut states = CMat4::zeros();
    for k in 0..4 {
        let label = labels[k];
        let col = order[k];
        energies[label] = eig.eigenvalues[col];
        let mut v = eig.eigenvectors.column(col).clone_owned();
        // Fix the global phase: the labeled component is real positive.
        let c = v[label];
        if c.norm() > 0.0 {
            v *= c.conj() / c.norm();
        }
        states.set_column(label, &v);
    }
    Ok(LevelSet {
        energies,
        states: Some(states),
    })
}

/// Weak-field closed form:
/// E_{±3/2} = +D ± (3/2) γ B_z,  E_{±1/2} = −D ± (1/2) γ √(B_z² + 4 B_⊥²).
pub fn approx_levels(params: &CenterParams, field: &FieldConfig, d_override: Option<f64>) -> LevelSet {
    let d = d_override.unwrap_or_else(|| params.d());
    let g = params.gamma_per_ut();
    if g * field.magnitude() / d > 0.2 {
        log::warn!(
            "weak-field level formula used outside its range: gamma*|B|/D = {:.3}",
            g * field.magnitude() / d
        );
    }
    let outer = 1.5 * g * field.bz;
    let inner = 0.5 * g * field.doublet_field();
    LevelSet {
        energies: [d + outer, -d + inner, -d - inner, d - outer],
        states: None,
    }
}

/// Levels of one packet under the chosen model. Eigenvectors always come
/// from the exact solve so that matrix elements are available.
pub fn packet_levels(
    params: &CenterParams,
    field: &FieldConfig,
    d_override: Option<f64>,
    model: LevelModel,
) -> Result<LevelSet> {
    let exact = exact_levels(&build_hamiltonian(params, field, d_override))?;
    Ok(match model {
        LevelModel::Exact => exact,
        LevelModel::Perturbative => LevelSet {
            states: exact.states,
            ..approx_levels(params, field, d_override)
        },
    })
}

/// |⟨a|S_x|b⟩|² between labeled eigenstates (unperturbed basis when no states).
pub fn sx_element_sq(states: Option<&CMat4>, a: usize, b: usize) -> f64 {
    let sx = &spin_operators().sx;
    match states {
        Some(v) => {
            let va = v.column(a);
            let vb = v.column(b);
            (va.adjoint() * sx * vb)[(0, 0)].norm_sqr()
        }
        None => sx[(a, b)].norm_sqr(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub transition: Transition,
    /// MHz
    pub frequency: f64,
    /// |⟨i|S_x|j⟩|² normalized to the strongest of the five lines.
    pub strength: f64,
    /// Un-normalized |⟨i|S_x|j⟩|².
    pub element_sq: f64,
}

/// ν₁…ν₅ with relative S_x strengths.
pub fn transition_table(levels: &LevelSet) -> Vec<TransitionLine> {
    let raw: Vec<(Transition, f64, f64)> = Transition::ALL
        .iter()
        .map(|&t| {
            let (a, b) = t.indices();
            (t, levels.frequency(t), sx_element_sq(levels.states.as_ref(), a, b))
        })
        .collect();
    let max = raw.iter().map(|r| r.2).fold(0.0, f64::max);
    raw.into_iter()
        .map(|(transition, frequency, el)| TransitionLine {
            transition,
            frequency,
            strength: if max > 0.0 { el / max } else { 0.0 },
            element_sq: el,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn spin_matrices_satisfy_algebra() {
        let s = build_spin_operators();
        let i = Complex64::new(0.0, 1.0);
        let comm = s.sx * s.sy - s.sy * s.sx - s.sz * i;
        assert!(comm.iter().all(|z| z.norm() < 1e-14));
        let comm = s.sy * s.sz - s.sz * s.sy - s.sx * i;
        assert!(comm.iter().all(|z| z.norm() < 1e-14));
        let comm = s.sz * s.sx - s.sx * s.sz - s.sy * i;
        assert!(comm.iter().all(|z| z.norm() < 1e-14));
        let casimir = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz - CMat4::identity() * c(3.75);
        assert!(casimir.iter().all(|z| z.norm() < 1e-14));
        for m in [&s.sx, &s.sy, &s.sz] {
            assert!(hermitian_deviation(m) < 1e-15);
        }
    }

    #[test]
    fn sz_diagonal_and_inner_ladder_element() {
        let s = build_spin_operators();
        for (k, m) in [1.5, 0.5, -0.5, -1.5].iter().enumerate() {
            assert_abs_diff_eq!(s.sz[(k, k)].re, *m);
        }
        assert_abs_diff_eq!(s.sx[(1, 2)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sx[(0, 1)].re, 3f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_field_hamiltonian() {
        let p = CenterParams::default();
        let h = build_hamiltonian(&p, &FieldConfig::default(), None);
        let expect = [13.4, -13.4, -13.4, 13.4];
        for k in 0..4 {
            assert_abs_diff_eq!(h[(k, k)].re, expect[k], epsilon = 1e-12);
        }
        assert!(h.trace().norm() < 1e-12);
    }

    #[test]
    fn transverse_only_field_puts_plus_half_on_top() {
        let p = CenterParams::default();
        for j in 1..=20 {
            let bperp = 1.2 * j as f64;
            let f = FieldConfig::new(0.0, bperp);
            let ex = exact_levels(&build_hamiltonian(&p, &f, None)).unwrap();
            let ap = approx_levels(&p, &f, None);
            assert!(ex.energy(Level::P1) > ex.energy(Level::M1), "bperp {bperp}");
            let bound = 4.0 * (p.gamma_per_ut() * bperp).powi(2) / p.two_d;
            for l in Level::ALL {
                assert!((ex.energy(l) - ap.energy(l)).abs() <= bound, "bperp {bperp}, {l:?}");
            }
        }
    }

    #[test]
    fn hamiltonian_matches_explicit_entries() {
        // Element-by-element assembly from the ladder coefficients.
        let p = CenterParams::default();
        let f = FieldConfig::new(211.0, 73.0);
        let h = build_hamiltonian(&p, &f, None);
        let (d, g) = (13.4, 0.028);
        let r3 = 3f64.sqrt() / 2.0;
        let mut e = [[0.0f64; 4]; 4];
        e[0][0] = d + 1.5 * g * 211.0;
        e[1][1] = -d + 0.5 * g * 211.0;
        e[2][2] = -d - 0.5 * g * 211.0;
        e[3][3] = d - 1.5 * g * 211.0;
        e[0][1] = r3 * g * 73.0;
        e[1][2] = g * 73.0;
        e[2][3] = r3 * g * 73.0;
        for i in 0..4 {
            for j in 0..4 {
                let v = if j >= i { e[i][j] } else { e[j][i] };
                assert_abs_diff_eq!(h[(i, j)].re, v, epsilon = 1e-12);
                assert_abs_diff_eq!(h[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn exact_levels_zero_field_and_axial() {
        let p = CenterParams::default();
        let lv = exact_levels(&build_hamiltonian(&p, &FieldConfig::default(), None)).unwrap();
        let mut e = lv.energies;
        e.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(e[0], -13.4, epsilon = 1e-10);
        assert_abs_diff_eq!(e[1], -13.4, epsilon = 1e-10);
        assert_abs_diff_eq!(e[2], 13.4, epsilon = 1e-10);
        assert_abs_diff_eq!(e[3], 13.4, epsilon = 1e-10);

        let bz = 211.0;
        let g = 0.028;
        let lv = exact_levels(&build_hamiltonian(&p, &FieldConfig::new(bz, 0.0), None)).unwrap();
        let want = [13.4 + 1.5 * g * bz, -13.4 + 0.5 * g * bz, -13.4 - 0.5 * g * bz, 13.4 - 1.5 * g * bz];
        for k in 0..4 {
            assert_abs_diff_eq!(lv.energies[k], want[k], epsilon = 1e-10);
        }
        assert_abs_diff_eq!(lv.sum(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_levels_rejects_non_hermitian() {
        let mut h = CMat4::identity();
        h[(0, 1)] = c(1.0);
        assert!(matches!(exact_levels(&h), Err(QuditError::NotHermitian { .. })));
    }

    #[test]
    fn approx_levels_reference_field() {
        let p = CenterParams::default();
        let f = FieldConfig::new(211.0, 73.0);
        let lv = approx_levels(&p, &f, None);
        let want = [22.262, -9.808, -16.992, 4.538];
        for k in 0..4 {
            assert_abs_diff_eq!(lv.energies[k], want[k], epsilon = 5e-4);
        }
        let inner = lv.energy(Level::P1) - lv.energy(Level::M1);
        assert_abs_diff_eq!(inner, 7.184, epsilon = 5e-4);
        let th = f.theta();
        assert_abs_diff_eq!(th.to_degrees(), 19.08, epsilon = 0.01);
        let alt = 0.028 * f.magnitude() * (1.0 + 3.0 * th.sin().powi(2)).sqrt();
        assert_abs_diff_eq!(inner, alt, epsilon = 1e-9);

        let exact = exact_levels(&build_hamiltonian(&p, &f, None)).unwrap();
        let bound = (0.028f64 * 73.0).powi(2) / 13.4;
        for k in 0..4 {
            assert!((exact.energies[k] - lv.energies[k]).abs() <= bound);
        }

        let zero = approx_levels(&p, &FieldConfig::default(), None);
        assert_eq!(zero.energies, [13.4, -13.4, -13.4, 13.4]);
    }

    #[test]
    fn transition_table_cases() {
        let p = CenterParams::default();
        let lv = exact_levels(&build_hamiltonian(&p, &FieldConfig::default(), None)).unwrap();
        let tt = transition_table(&lv);
        for line in &tt[..4] {
            assert_abs_diff_eq!(line.frequency, 26.8, epsilon = 1e-9);
        }

        let f = FieldConfig::new(211.0, 73.0);
        let approx = approx_levels(&p, &f, None);
        assert_abs_diff_eq!(approx.frequency(Transition::Nu1), 21.53, epsilon = 5e-3);

        // B_⊥ = 0: pure Δm = ±1 selection rule
        let lv = exact_levels(&build_hamiltonian(&p, &FieldConfig::new(150.0, 0.0), None)).unwrap();
        let tt = transition_table(&lv);
        let get = |t: Transition| tt.iter().find(|l| l.transition == t).unwrap().strength;
        assert_abs_diff_eq!(get(Transition::Nu3), 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(get(Transition::Nu4), 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(get(Transition::Nu5), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(get(Transition::Nu1), 0.75, epsilon = 1e-12);

        // With mixing, inner lines stay stronger than outer ones.
        let lv = exact_levels(&build_hamiltonian(&p, &f, None)).unwrap();
        let tt = transition_table(&lv);
        let get = |t: Transition| tt.iter().find(|l| l.transition == t).unwrap().strength;
        assert!(get(Transition::Nu1) > get(Transition::Nu3));
        assert!(get(Transition::Nu2) > get(Transition::Nu4));
        assert!(get(Transition::Nu3) > 0.0);
    }

    #[test]
    fn diagonal_field_pairing_identity() {
        let p = CenterParams::default();
        let lv = exact_levels(&build_hamiltonian(&p, &FieldConfig::new(120.0, 0.0), None)).unwrap();
        let s_inner = lv.frequency(Transition::Nu1) + lv.frequency(Transition::Nu2);
        let s_outer = lv.frequency(Transition::Nu3) + lv.frequency(Transition::Nu4);
        assert_abs_diff_eq!(s_inner, s_outer, epsilon = 1e-9);
    }
}
