//! Truncated Fock-space states and passive two-mode unitaries.
//!
//! Single-mode states carry `cutoff` number-basis amplitudes `|0⟩..|D-1⟩`.
//! Two-mode states are stored row-major as `coeff(m, n)` with `m` the
//! signal-port photon number and `n` the ancilla-port photon number.
//!
//! The beam splitter `B(θ) = exp[θ(a₀†a₁ − a₁†a₀)]` conserves total photon
//! number, so it is applied block by block: the block of total photon number
//! `k` is a `(k+1)`-dimensional rotation generated by a real antisymmetric
//! tridiagonal matrix. Each block is diagonalised once (the eigenvectors do
//! not depend on `θ`) and cached for the lifetime of the process.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::u2::U2Params;

/// Largest supported photon-number cutoff.
pub const MAX_CUTOFF: usize = 256;

pub const DEFAULT_CUTOFF: usize = 40;
pub const DEFAULT_LEAK_TOL: f64 = 1e-8;

/// Photon-number truncation and the norm-deficit tolerance that goes with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub cutoff: usize,
    pub leak_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { cutoff: DEFAULT_CUTOFF, leak_tol: DEFAULT_LEAK_TOL }
    }
}

impl Truncation {
    pub fn new(cutoff: usize) -> Result<Self> {
        Self::with_tolerance(cutoff, DEFAULT_LEAK_TOL)
    }

    pub fn with_tolerance(cutoff: usize, leak_tol: f64) -> Result<Self> {
        if cutoff == 0 || cutoff > MAX_CUTOFF {
            return Err(Error::invalid("cutoff", format!("must be in 1..={MAX_CUTOFF}, got {cutoff}")));
        }
        if !(leak_tol.is_finite() && leak_tol > 0.0 && leak_tol < 1.0) {
            return Err(Error::invalid("leak_tol", format!("must be in (0, 1), got {leak_tol}")));
        }
        Ok(Truncation { cutoff, leak_tol })
    }

    /// Fails with [`Error::CutoffTooSmall`] when `leakage` reaches the tolerance.
    pub fn check(&self, leakage: f64) -> Result<()> {
        if leakage >= self.leak_tol {
            Err(Error::CutoffTooSmall { leakage, tolerance: self.leak_tol, cutoff: self.cutoff })
        } else {
            Ok(())
        }
    }
}

/// Beam-splitter mixing angle; the transmittance is `cos θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitterAngle(pub f64);

impl BeamSplitterAngle {
    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for BeamSplitterAngle {
    fn from(theta: f64) -> Self {
        BeamSplitterAngle(theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

/// Pure single-mode state in a truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeState {
    coeffs: Vec<C64>,
}

impl ModeState {
    /// Wraps raw amplitudes; no normalisation is applied.
    pub fn from_coeffs(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("cutoff", "must be >= 1"));
        }
        Ok(ModeState { coeffs })
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        fock_state(0, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> C64 {
        self.coeffs[n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &ModeState) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &ModeState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Phase-space rotation `e^{i φ n̂}`, mapping `|α⟩` to `|α e^{iφ}⟩`.
    pub fn rotated(&self, phi: f64) -> ModeState {
        let coeffs = self.coeffs.iter().enumerate().map(|(n, c)| c * C64::from_polar(1.0, n as f64 * phi)).collect();
        ModeState { coeffs }
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }
}

/// `|α⟩` truncated to `cutoff` levels.
pub fn coherent_state(alpha: C64, trunc: Truncation) -> Result<ModeState> {
    let coeffs = coherent_coeffs(alpha, trunc.cutoff);
    let state = ModeState::from_coeffs(coeffs)?;
    trunc.check(state.leakage())?;
    Ok(state)
}

fn coherent_coeffs(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut coeffs = Vec::with_capacity(cutoff);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        coeffs.push(c);
    }
    coeffs
}

pub fn fock_state(n: usize, cutoff: usize) -> Result<ModeState> {
    if n >= cutoff {
        return Err(Error::IndexOutOfRange { n, cutoff });
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); cutoff];
    coeffs[n] = C64::new(1.0, 0.0);
    Ok(ModeState { coeffs })
}

/// Normalised `|β⟩ ± |−β⟩`.
pub fn cat_state(beta: C64, parity: Parity, trunc: Truncation) -> Result<ModeState> {
    let b2 = beta.norm_sqr();
    let norm2 = match parity {
        Parity::Even => 2.0 * (1.0 + (-2.0 * b2).exp()),
        Parity::Odd => -2.0 * (-2.0 * b2).exp_m1(),
    };
    if norm2 <= 0.0 {
        return Err(Error::DegenerateState("odd cat state requires beta != 0".into()));
    }
    let scale = 2.0 / norm2.sqrt();
    let keep = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let coeffs = coherent_coeffs(beta, trunc.cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == keep { c * scale } else { C64::new(0.0, 0.0) })
        .collect();
    let state = ModeState::from_coeffs(coeffs)?;
    trunc.check(state.leakage())?;
    Ok(state)
}

/// Squeezed vacuum `exp[(r/2)(a² − a†²)]|0⟩`.
pub fn squeezed_vacuum(r: f64, trunc: Truncation) -> Result<ModeState> {
    if !r.is_finite() {
        return Err(Error::invalid("r", "must be finite"));
    }
    let t = r.tanh();
    let mut coeffs = vec![C64::new(0.0, 0.0); trunc.cutoff];
    let mut c = 1.0 / r.cosh().sqrt();
    coeffs[0] = C64::new(c, 0.0);
    let mut n = 2;
    while n < trunc.cutoff {
        c *= -t * ((n - 1) as f64 / n as f64).sqrt();
        coeffs[n] = C64::new(c, 0.0);
        n += 2;
    }
    let state = ModeState::from_coeffs(coeffs)?;
    trunc.check(state.leakage())?;
    Ok(state)
}

/// `1 − ‖ψ‖²` of a single-mode state.
pub fn norm_leakage(state: &ModeState) -> f64 {
    state.leakage()
}

/// Pure two-mode state (signal ⊗ ancilla) sharing one cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    cutoff: usize,
    coeffs: Vec<C64>,
}

impl TwoModeState {
    pub fn from_coeffs(cutoff: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != cutoff * cutoff {
            return Err(Error::LengthMismatch {
                what: "two-mode coefficients",
                left: coeffs.len(),
                right: cutoff * cutoff,
            });
        }
        Ok(TwoModeState { cutoff, coeffs })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Row-major amplitudes, index `m * cutoff + n`.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize, n: usize) -> C64 {
        self.coeffs[m * self.cutoff + n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    /// Probability of each total photon number `k = m + n`, for `k < 2D − 1`.
    pub fn total_photon_distribution(&self) -> Vec<f64> {
        let d = self.cutoff;
        let mut out = vec![0.0; 2 * d - 1];
        for m in 0..d {
            for n in 0..d {
                out[m + n] += self.coeff(m, n).norm_sqr();
            }
        }
        out
    }

    pub fn inner(&self, other: &TwoModeState) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &TwoModeState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Per-mode phase-space rotations `e^{i(φ₀ m + φ₁ n)}`.
    pub fn with_mode_phases(&self, phi_signal: f64, phi_ancilla: f64) -> TwoModeState {
        let d = self.cutoff;
        let sig: Vec<C64> = (0..d).map(|m| C64::from_polar(1.0, m as f64 * phi_signal)).collect();
        let anc: Vec<C64> = (0..d).map(|n| C64::from_polar(1.0, n as f64 * phi_ancilla)).collect();
        let mut coeffs = self.coeffs.clone();
        for m in 0..d {
            for n in 0..d {
                coeffs[m * d + n] *= sig[m] * anc[n];
            }
        }
        TwoModeState { cutoff: d, coeffs }
    }

    /// Singular values of the coefficient matrix, descending.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let d = self.cutoff;
        let m = DMatrix::from_fn(d, d, |i, j| {
            let c = self.coeff(i, j);
            nalgebra::Complex::new(c.re, c.im)
        });
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    pub fn schmidt_rank(&self, tol: f64) -> usize {
        self.schmidt_coefficients().into_iter().filter(|s| *s > tol).count()
    }
}

/// Product state `a ⊗ b`.
pub fn tensor(a: &ModeState, b: &ModeState) -> Result<TwoModeState> {
    if a.cutoff() != b.cutoff() {
        return Err(Error::CutoffMismatch { left: a.cutoff(), right: b.cutoff() });
    }
    let d = a.cutoff();
    let mut coeffs = Vec::with_capacity(d * d);
    for am in a.coeffs() {
        for bn in b.coeffs() {
            coeffs.push(am * bn);
        }
    }
    Ok(TwoModeState { cutoff: d, coeffs })
}

/// Eigen-decomposition of one total-photon-number block.
///
/// With `D = diag(iᵖ)` the generator block is `G = D (−iT) D⁻¹`, where `T` is
/// real symmetric tridiagonal with off-diagonal `√((p+1)(k−p))`. Its spectrum
/// is exactly `{−k, −k+2, …, k}`.
struct BlockEigen {
    dim: usize,
    /// Row-major eigenvector matrix `W[p][j]`.
    vecs: Vec<f64>,
    evals: Vec<f64>,
}

impl BlockEigen {
    fn new(k: usize) -> Self {
        let dim = k + 1;
        let mut t = DMatrix::<f64>::zeros(dim, dim);
        for p in 0..k {
            let b = (((p + 1) * (k - p)) as f64).sqrt();
            t[(p + 1, p)] = b;
            t[(p, p + 1)] = b;
        }
        let eig = SymmetricEigen::new(t);
        let evals = eig.eigenvalues.iter().map(|l| l.round()).collect();
        let mut vecs = vec![0.0; dim * dim];
        for p in 0..dim {
            for j in 0..dim {
                vecs[p * dim + j] = eig.eigenvectors[(p, j)];
            }
        }
        BlockEigen { dim, vecs, evals }
    }

    fn apply(&self, theta: f64, v: &mut [C64]) {
        let dim = self.dim;
        let ipow = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        let w1: Vec<C64> = v.iter().enumerate().map(|(p, x)| x * ipow[(4 - p % 4) % 4]).collect();
        let mut w2 = vec![C64::new(0.0, 0.0); dim];
        for (p, x) in w1.iter().enumerate() {
            let row = &self.vecs[p * dim..(p + 1) * dim];
            for (acc, w) in w2.iter_mut().zip(row) {
                *acc += x * w;
            }
        }
        for (x, l) in w2.iter_mut().zip(&self.evals) {
            *x *= C64::from_polar(1.0, -theta * l);
        }
        for (p, out) in v.iter_mut().enumerate() {
            let row = &self.vecs[p * dim..(p + 1) * dim];
            let s: C64 = row.iter().zip(&w2).map(|(w, x)| x * w).sum();
            *out = s * ipow[p % 4];
        }
    }
}

fn block(k: usize) -> &'static BlockEigen {
    static BLOCKS: [OnceLock<BlockEigen>; MAX_CUTOFF] = [const { OnceLock::new() }; MAX_CUTOFF];
    BLOCKS[k].get_or_init(|| BlockEigen::new(k))
}

/// Applies `B(θ)`. Amplitudes with `m + n ≥ D` cannot be represented after
/// mixing and are dropped; the loss shows up in [`TwoModeState::leakage`].
pub fn beam_splitter(state: &TwoModeState, theta: BeamSplitterAngle) -> TwoModeState {
    let d = state.cutoff;
    let theta = theta.radians();
    let real = state.is_real();
    let mut coeffs = vec![C64::new(0.0, 0.0); d * d];
    let mut buf = Vec::with_capacity(d);
    for k in 0..d {
        buf.clear();
        buf.extend((0..=k).map(|m| state.coeffs[m * d + (k - m)]));
        if buf.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
            continue;
        }
        block(k).apply(theta, &mut buf);
        for (m, c) in buf.iter().enumerate() {
            // B(θ) is a real matrix: a real input stays real.
            coeffs[m * d + (k - m)] = if real { C64::new(c.re, 0.0) } else { *c };
        }
    }
    TwoModeState { cutoff: d, coeffs }
}

/// Applies the U(2) beam splitter `e^{iδ} e^{iφσ_z} e^{iθσ_y} e^{iχσ_z}`
/// acting on the coherent amplitude pair `(signal, ancilla)`.
pub fn beam_splitter_u2(state: &TwoModeState, u: &U2Params) -> TwoModeState {
    let pre = state.with_mode_phases(u.chi, -u.chi);
    let mixed = beam_splitter(&pre, BeamSplitterAngle(u.theta));
    mixed.with_mode_phases(u.phi + u.delta, -u.phi + u.delta)
}

/// Amplitude map of `B(θ)` on coherent labels: `(s, γ) ↦ R(θ)(s, γ)`.
pub fn rotate_amplitudes(s: C64, gamma: C64, theta: f64) -> (C64, C64) {
    let (sn, cs) = theta.sin_cos();
    (s * cs + gamma * sn, -s * sn + gamma * cs)
}

/// Canonical representative of an angle in `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn vacuum_and_fock() {
        let v = coherent_state(c(0.0), Truncation::new(8).unwrap()).unwrap();
        assert_eq!(v.coeffs()[0], c(1.0));
        assert!(v.coeffs()[1..].iter().all(|x| x.norm() == 0.0));
        assert_eq!(fock_state(0, 2).unwrap().coeffs(), &[c(1.0), c(0.0)]);
        assert_eq!(fock_state(1, 4).unwrap().coeffs(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(fock_state(4, 3), Err(Error::IndexOutOfRange { n: 4, cutoff: 3 }));
        assert_abs_diff_eq!(norm_leakage(&fock_state(3, 10).unwrap()), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coherent_series_values() {
        let s = coherent_state(c(0.5), Truncation::default()).unwrap();
        // Direct series: e^{-|α|²/2} αⁿ / √n!.
        for n in 0..10 {
            let expect = (-0.125f64).exp() * 0.5f64.powi(n as i32) / factorial(n).sqrt();
            assert_abs_diff_eq!(s.coeff(n).re, expect, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.coeff(0).re, 0.882_496_902_584_595, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coeff(1).re, 0.441_248_451_292_297, epsilon = 1e-12);
        assert!(norm_leakage(&s) < 1e-12);
    }

    #[test]
    fn coherent_phase_symmetry() {
        let t = Truncation::default();
        let a = coherent_state(C64::new(0.0, 1.0), t).unwrap();
        let b = coherent_state(c(1.0), t).unwrap();
        for n in 0..40 {
            assert_abs_diff_eq!(a.coeff(n).norm(), b.coeff(n).norm(), epsilon = 1e-15);
        }
    }

    #[test]
    fn under_truncated_coherent_is_rejected() {
        let t = Truncation::new(6).unwrap();
        let raw = ModeState::from_coeffs(coherent_coeffs(c(3.0), 6)).unwrap();
        assert!(norm_leakage(&raw) > 0.5);
        assert!(matches!(coherent_state(c(3.0), t), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn cat_states() {
        let t = Truncation::default();
        let odd = cat_state(c(1.0), Parity::Odd, t).unwrap();
        assert!(odd.coeffs().iter().step_by(2).all(|x| x.norm() == 0.0));
        assert_abs_diff_eq!(odd.norm_sqr(), 1.0, epsilon = 1e-12);

        let v = cat_state(c(0.0), Parity::Even, Truncation::new(8).unwrap()).unwrap();
        assert_abs_diff_eq!(v.coeff(0).re, 1.0, epsilon = 1e-15);

        assert!(matches!(cat_state(c(0.0), Parity::Odd, t), Err(Error::DegenerateState(_))));

        // (|β⟩ + |−β⟩) built from two coherent vectors, normalised numerically.
        let p = coherent_coeffs(c(1.0), 40);
        let m = coherent_coeffs(c(-1.0), 40);
        let sum: Vec<C64> = p.iter().zip(&m).map(|(a, b)| a + b).collect();
        let nrm = sum.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let even = cat_state(c(1.0), Parity::Even, t).unwrap();
        for n in 0..40 {
            assert_abs_diff_eq!(even.coeff(n).re, sum[n].re / nrm, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(even.coeff(0).re, 0.805_018_182_194_592, epsilon = 1e-12);
    }

    /// exp(A)v by scaling and squaring of a truncated Taylor series.
    fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
        let norm = a.iter().map(|x| x.abs()).sum::<f64>();
        let s = (norm.max(1.0).log2().ceil() as i32 + 2).max(0);
        let scaled = a / 2f64.powi(s);
        let n = a.nrows();
        let mut result = DMatrix::<f64>::identity(n, n);
        let mut term = DMatrix::<f64>::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            result += &term;
        }
        for _ in 0..s {
            result = &result * &result;
        }
        result
    }

    #[test]
    fn squeezed_vacuum_matches_generator_exponential() {
        let t = Truncation::default();
        assert_eq!(squeezed_vacuum(0.0, t).unwrap(), ModeState::vacuum(40).unwrap());
        let s = squeezed_vacuum(0.5, t).unwrap();
        assert!(s.coeffs().iter().skip(1).step_by(2).all(|x| x.norm() == 0.0));
        assert_abs_diff_eq!(s.coeff(2).re / s.coeff(0).re, -(0.5f64).tanh() / 2f64.sqrt(), epsilon = 1e-14);

        // Oracle: exp[(r/2)(a² − a†²)] on a larger truncated space, applied to |0⟩.
        let big = 120;
        let mut g = DMatrix::<f64>::zeros(big, big);
        for n in 0..big - 2 {
            let amp = (((n + 1) * (n + 2)) as f64).sqrt();
            g[(n, n + 2)] += 0.25 * amp; // (r/2) a²
            g[(n + 2, n)] -= 0.25 * amp; // −(r/2) a†²
        }
        let u = expm(&g);
        for n in 0..30 {
            assert_abs_diff_eq!(s.coeff(n).re, u[(n, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn tensor_products() {
        let t = Truncation::default();
        let vv = tensor(&ModeState::vacuum(40).unwrap(), &ModeState::vacuum(40).unwrap()).unwrap();
        assert_eq!(vv.coeff(0, 0), c(1.0));
        assert_abs_diff_eq!(vv.norm_sqr(), 1.0);
        let f = tensor(&fock_state(1, 40).unwrap(), &ModeState::vacuum(40).unwrap()).unwrap();
        assert_eq!(f.coeff(1, 0), c(1.0));
        let a = coherent_state(c(0.5), t).unwrap();
        let b = coherent_state(c(0.3), t).unwrap();
        let ab = tensor(&a, &b).unwrap();
        for m in 0..40 {
            for n in 0..40 {
                assert_eq!(ab.coeff(m, n), a.coeff(m) * b.coeff(n));
            }
        }
        assert!(matches!(
            tensor(&a, &ModeState::vacuum(8).unwrap()),
            Err(Error::CutoffMismatch { left: 40, right: 8 })
        ));
    }

    #[test]
    fn single_photon_splits_by_generator_sign() {
        let s = tensor(&fock_state(1, 40).unwrap(), &ModeState::vacuum(40).unwrap()).unwrap();
        let out = beam_splitter(&s, BeamSplitterAngle(FRAC_PI_4));
        assert_abs_diff_eq!(out.coeff(1, 0).re, FRAC_1_SQRT_2, epsilon = 1e-14);
        // exp[θ(a₀†a₁ − a₁†a₀)] sends a₀† to a₀† cos θ − a₁† sin θ.
        assert_abs_diff_eq!(out.coeff(0, 1).re, -FRAC_1_SQRT_2, epsilon = 1e-14);
        let swap = beam_splitter(&s, BeamSplitterAngle(FRAC_PI_2));
        assert_abs_diff_eq!(swap.coeff(0, 1).re, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_angle() {
        let t = Truncation::default();
        let s = tensor(&cat_state(c(1.0), Parity::Odd, t).unwrap(), &coherent_state(C64::new(0.2, 0.4), t).unwrap())
            .unwrap();
        let out = beam_splitter(&s, BeamSplitterAngle(0.0));
        for (a, b) in out.coeffs().iter().zip(s.coeffs()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn coherent_pair_maps_by_rotation() {
        let t = Truncation::default();
        for &(s, g, th) in &[(0.5, 0.3, 0.7), (-1.0, 0.8, 2.1), (1.0, -1.0, -0.4)] {
            for &phase in &[0.0, 0.9] {
                let s = C64::from_polar(s, phase);
                let g = C64::new(g, 0.0);
                let input = tensor(&coherent_state(s, t).unwrap(), &coherent_state(g, t).unwrap()).unwrap();
                let (s2, g2) = rotate_amplitudes(s, g, th);
                let expect = tensor(&coherent_state(s2, t).unwrap(), &coherent_state(g2, t).unwrap()).unwrap();
                let out = beam_splitter(&input, BeamSplitterAngle(th));
                assert!(out.fidelity(&expect) > 1.0 - 1e-10);
            }
        }
    }

    #[test]
    fn u2_reduces_to_real_splitter() {
        let t = Truncation::default();
        let s = tensor(&coherent_state(c(0.5), t).unwrap(), &cat_state(c(1.0), Parity::Odd, t).unwrap()).unwrap();
        let u = U2Params { theta: 0.6, ..U2Params::default() };
        let a = beam_splitter_u2(&s, &u);
        let b = beam_splitter(&s, BeamSplitterAngle(0.6));
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-15);
        }

        // θ = 0: diagonal unitary, photon-number distribution unchanged.
        let u = U2Params { phi: 1.1, chi: -0.3, delta: 0.4, ..U2Params::default() };
        let out = beam_splitter_u2(&s, &u);
        for (x, y) in out.coeffs().iter().zip(s.coeffs()) {
            assert_abs_diff_eq!(x.norm(), y.norm(), epsilon = 1e-15);
        }
    }

    #[test]
    fn u2_coherent_image() {
        let t = Truncation::default();
        let (s, g) = (C64::new(0.5, 0.0), C64::new(0.2, -0.6));
        let u = U2Params { delta: 0.3, phi: 0.8, theta: 1.1, chi: -0.5, ..U2Params::default() };
        // U = e^{iδ} e^{iφσz} e^{iθσy} e^{iχσz} multiplied out as 2×2 matrices.
        let i = C64::new(0.0, 1.0);
        let ez = |a: f64| [[(i * a).exp(), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), (-i * a).exp()]];
        let (sn, cs) = u.theta.sin_cos();
        let ry = [[c(cs), c(sn)], [c(-sn), c(cs)]];
        let mul = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| {
            let mut o = [[C64::new(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for col in 0..2 {
                    o[r][col] = a[r][0] * b[0][col] + a[r][1] * b[1][col];
                }
            }
            o
        };
        let m = mul(mul(ez(u.phi), ry), ez(u.chi));
        let g0 = (i * u.delta).exp();
        let s2 = g0 * (m[0][0] * s + m[0][1] * g);
        let g2 = g0 * (m[1][0] * s + m[1][1] * g);
        let input = tensor(&coherent_state(s, t).unwrap(), &coherent_state(g, t).unwrap()).unwrap();
        let expect = tensor(&coherent_state(s2, t).unwrap(), &coherent_state(g2, t).unwrap()).unwrap();
        let out = beam_splitter_u2(&input, &u);
        assert!(out.fidelity(&expect) > 1.0 - 1e-10);
        // Amplitude-level equality including the phase e^{iδ}.
        for (x, y) in out.coeffs().iter().zip(expect.coeffs()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn schmidt_rank_of_split_photon() {
        let s = tensor(&fock_state(1, 8).unwrap(), &ModeState::vacuum(8).unwrap()).unwrap();
        assert_eq!(s.schmidt_rank(1e-12), 1);
        assert_eq!(beam_splitter(&s, BeamSplitterAngle(0.3)).schmidt_rank(1e-12), 2);
    }
}
