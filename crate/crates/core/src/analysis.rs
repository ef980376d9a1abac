//! Analytic references and property checks: outcome rotation, the bare
//! homodyne limit, the coherent-ancilla closed form, the exact one-ancilla
//! BER, the factorization statistics and the quadrature separability of
//! beam splitters.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::decision::{normal_cdf, threshold, SignalSpec, Truth};
use crate::error::{Error, Result};
use crate::fock::{
    beam_splitter, coherent_state, fock_state, tensor, BeamSplitterAngle, ModeState, Truncation, TwoModeState,
};
use crate::hermite::{hermite_functions, hermite_into, HermiteTable, PartialOverlaps};
use crate::homodyne::{collapse_exact, quad_amplitude, HomodynePhase, MeasuredMode, QuadratureMarginal};
use crate::stats::{chi_square_independence, ks_one_sample, pearson, ChiSquareResult, KsResult};
use crate::u2::U2Params;

/// Minimum sample size accepted by [`factorization_test`].
pub const MIN_FACTORIZATION_SAMPLE: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TransformedOutcomes {
    pub x0: f64,
    pub v: Vec<f64>,
}

/// `(uₙ, vₙ) = R(θₙ)⁻¹(xₙ, yₙ)` for `n = N … 1`, with `x_N = x` and
/// `x_{n−1} = uₙ`.
pub fn rotate_outcomes(x: f64, ys: &[f64], thetas: &[f64]) -> Result<TransformedOutcomes> {
    if ys.len() != thetas.len() {
        return Err(Error::LengthMismatch { what: "outcomes vs angles", left: ys.len(), right: thetas.len() });
    }
    let mut v = vec![0.0; ys.len()];
    let mut xn = x;
    for n in (0..ys.len()).rev() {
        let (s, c) = thetas[n].sin_cos();
        let y = ys[n];
        v[n] = s * xn + c * y;
        xn = c * xn - s * y;
    }
    Ok(TransformedOutcomes { x0: xn, v })
}

/// Inverse of [`rotate_outcomes`]: `(xₙ, yₙ) = R(θₙ)(x_{n−1}, vₙ)` upwards.
pub fn unrotate_outcomes(t: &TransformedOutcomes, thetas: &[f64]) -> Result<(f64, Vec<f64>)> {
    if t.v.len() != thetas.len() {
        return Err(Error::LengthMismatch { what: "outcomes vs angles", left: t.v.len(), right: thetas.len() });
    }
    let mut ys = vec![0.0; thetas.len()];
    let mut x = t.x0;
    for (n, th) in thetas.iter().enumerate() {
        let (s, c) = th.sin_cos();
        ys[n] = -s * x + c * t.v[n];
        x = c * x + s * t.v[n];
    }
    Ok((x, ys))
}

/// Coefficients `(a, b)` with `x₀ = a·x + b` for fixed ancilla outcomes.
pub fn x0_affine(ys: &[f64], thetas: &[f64]) -> Result<(f64, f64)> {
    if ys.len() != thetas.len() {
        return Err(Error::LengthMismatch { what: "outcomes vs angles", left: ys.len(), right: thetas.len() });
    }
    let (mut a, mut b) = (1.0, 0.0);
    for n in (0..ys.len()).rev() {
        let (s, c) = thetas[n].sin_cos();
        a *= c;
        b = c * b - s * ys[n];
    }
    Ok((a, b))
}

/// Error probability of a single phase-0 homodyne of `|s⟩` under the
/// threshold rule, given `truth`.
pub fn conditional_ber0(spec: &SignalSpec, truth: Truth) -> f64 {
    let x_th = threshold(spec).x_th;
    let z = (x_th - SQRT_2 * spec.amplitude(truth)) / 0.5f64.sqrt();
    match truth {
        Truth::Plus => normal_cdf(z),
        Truth::Minus => 1.0 - normal_cdf(z),
    }
}

/// `BER₀ = p(+α)·Q₊ + p(−α)·Q₋`; `erfc(√2α)/2` at equal priors.
pub fn ber_homodyne_limit(spec: &SignalSpec) -> f64 {
    spec.prior(Truth::Plus) * conditional_ber0(spec, Truth::Plus)
        + spec.prior(Truth::Minus) * conditional_ber0(spec, Truth::Minus)
}

/// Exponent pieces of the joint density written over pairs of coherent
/// labels `(αₙ, βₙ)`: `P ∝ exp[J − (x − s'')² − Σ (yₙ − αₙ'')²]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentPairTerms {
    pub j: C64,
    pub s2: C64,
    pub alpha2: Vec<C64>,
}

impl CoherentPairTerms {
    /// Multi-ancilla chain of real beam splitters with phase-0 detections.
    pub fn chain(s: C64, alphas: &[C64], betas: &[C64], thetas: &[f64]) -> Result<Self> {
        if alphas.len() != thetas.len() || betas.len() != thetas.len() {
            return Err(Error::LengthMismatch {
                what: "coherent labels vs angles",
                left: alphas.len(),
                right: thetas.len(),
            });
        }
        let mut sa = s;
        let mut sb = s;
        let mut j = C64::new(0.0, 0.0);
        let mut alpha2 = Vec::with_capacity(thetas.len());
        for ((a, b), th) in alphas.iter().zip(betas).zip(thetas) {
            j += 0.5 * ((a.conj() * b - b.conj() * a) - (a - b).norm_sqr());
            let (s_new_a, anc_a) = crate::fock::rotate_amplitudes(sa, *a, *th);
            let (s_new_b, anc_b) = crate::fock::rotate_amplitudes(sb, *b, *th);
            alpha2.push((anc_a.conj() + anc_b) / SQRT_2);
            sa = s_new_a;
            sb = s_new_b;
        }
        Ok(CoherentPairTerms { j, s2: (sa.conj() + sb) / SQRT_2, alpha2 })
    }

    /// One ancilla through a U(2) beam splitter with detection phases
    /// `φ₀`, `φ₁`; `j` holds the two-port `K`.
    pub fn two_port(s: C64, alpha: C64, beta: C64, u: &U2Params) -> Self {
        let m = u.matrix();
        let image = |a: C64| (m[0][0] * s + m[0][1] * a, m[1][0] * s + m[1][1] * a);
        let (sa, aa) = image(alpha);
        let (sb, ab) = image(beta);
        let e0 = C64::from_polar(1.0, u.phi0);
        let e1 = C64::from_polar(1.0, u.phi1);
        let k = 0.5 * ((alpha.conj() * beta - alpha * beta.conj()) - (alpha - beta).norm_sqr());
        CoherentPairTerms {
            j: k,
            s2: ((sa * e0).conj() + sb * e0) / SQRT_2,
            alpha2: vec![((aa * e1).conj() + ab * e1) / SQRT_2],
        }
    }

    pub fn exponent(&self, x: f64, ys: &[f64]) -> C64 {
        let mut e = self.j - (x - self.s2).powi(2);
        for (y, a) in ys.iter().zip(&self.alpha2) {
            e -= (y - a).powi(2);
        }
        e
    }

    /// Density for coherent (diagonal) labels, normalised over `N + 1`
    /// real outcomes.
    pub fn diagonal_density(&self, x: f64, ys: &[f64]) -> f64 {
        self.exponent(x, ys).exp().re / PI.powf((ys.len() + 1) as f64 / 2.0)
    }
}

/// Closed-form joint density for coherent ancillae `γₙ`.
pub fn coherent_oracle_density(s: f64, gammas: &[C64], thetas: &[f64], x: f64, ys: &[f64]) -> Result<f64> {
    if ys.len() != thetas.len() {
        return Err(Error::LengthMismatch { what: "outcomes vs angles", left: ys.len(), right: thetas.len() });
    }
    let terms = CoherentPairTerms::chain(C64::new(s, 0.0), gammas, gammas, thetas)?;
    Ok(terms.diagonal_density(x, ys))
}

/// Joint density `P(x, y₁ … y_N | s)` through the Fock-space chain:
/// sequential beam splitters, exact conditional amplitudes at each `yₙ`.
pub fn fock_joint_density(
    signal: &ModeState,
    ancillae: &[ModeState],
    thetas: &[f64],
    x: f64,
    ys: &[f64],
) -> Result<f64> {
    if ys.len() != thetas.len() || ancillae.len() != thetas.len() {
        return Err(Error::LengthMismatch { what: "outcomes vs angles", left: ys.len(), right: thetas.len() });
    }
    let mut state = signal.clone();
    let mut density = 1.0;
    for ((anc, th), y) in ancillae.iter().zip(thetas).zip(ys) {
        let joint = beam_splitter(&tensor(&state, anc)?, BeamSplitterAngle(*th));
        let marginal = QuadratureMarginal::of_two_mode(&joint, MeasuredMode::Ancilla, HomodynePhase(0.0));
        density *= marginal.pdf(*y);
        state = collapse_exact(&joint, MeasuredMode::Ancilla, HomodynePhase(0.0), *y)?;
    }
    Ok(density * QuadratureMarginal::of_mode(&state, HomodynePhase(0.0)).pdf(x))
}

/// Threshold- and ML-rule BERs of a two-port measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPortBer {
    pub threshold: f64,
    /// Present when the ML comparison was requested.
    pub ml: Option<f64>,
}

/// Options for [`two_port_ber`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPortOptions {
    pub phi0: f64,
    pub phi1: f64,
    /// Decision variable `cx·x + cy·y`, thresholded at `x_th`.
    pub cx: f64,
    pub cy: f64,
    /// Grid stride of the 2D sub-grid used for the ML correction.
    pub ml_stride: Option<usize>,
}

/// Exact BER of the two-outcome measurement on `joints[truth]` (signal port
/// at `φ₀`, ancilla port at `φ₁`). The ancilla outcome is integrated by the
/// trapezoid rule on the grid; the signal outcome in closed form through
/// partial Hermite overlaps.
///
/// The ML figure integrates `min(p₊P₊, p₋P₋)` over a strided sub-grid (see
/// [`ml_ber`]). It is capped at the threshold figure, which the true ML
/// error can never exceed.
pub fn two_port_ber(
    spec: &SignalSpec,
    plus: &TwoModeState,
    minus: &TwoModeState,
    opts: TwoPortOptions,
    table: &HermiteTable,
) -> Result<TwoPortBer> {
    let rule = threshold(spec);
    let grid = *table.grid();
    let mut tables = Vec::with_capacity(2);
    let mut ber = 0.0;
    for (truth, joint) in [(Truth::Plus, plus), (Truth::Minus, minus)] {
        let signal_marginal = QuadratureMarginal::of_two_mode(joint, MeasuredMode::Signal, HomodynePhase(opts.phi0));
        let mut ws = signal_marginal.workspace();
        signal_marginal.check_grid(&grid, &mut ws)?;
        let amp = phased_signal_amplitudes(joint, opts, table)?;
        let d = joint.cutoff();
        let mut ov = PartialOverlaps::new(d);
        let mut mass = vec![0.0; grid.points()];
        for (i, m) in mass.iter_mut().enumerate() {
            let (re, im) = amp.row(i);
            let region = rule.wrong_region_affine(truth, opts.cx, opts.cy * grid.x(i));
            *m = match region {
                crate::decision::Region::Nothing => 0.0,
                crate::decision::Region::Everything => dot(re, re) + dot(im, im),
                crate::decision::Region::Below(t) => {
                    ov.evaluate(t);
                    ov.quadratic(re, im)
                }
                crate::decision::Region::AtOrAbove(t) => {
                    ov.evaluate(t);
                    dot(re, re) + dot(im, im) - ov.quadratic(re, im)
                }
            };
        }
        ber += spec.prior(truth) * grid.integrate(&mass);
        tables.push(amp);
    }
    let ml = match opts.ml_stride {
        None => None,
        Some(stride) => Some(ml_ber(spec, &tables[0], &tables[1], table, stride)?.min(ber)),
    };
    Ok(TwoPortBer { threshold: ber, ml })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Signal-mode amplitudes `Ã(yᵢ)[m] = e^{imφ₀} A(yᵢ)[m]` split into real
/// and imaginary parts.
struct SignalAmplitudes {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SignalAmplitudes {
    fn row(&self, i: usize) -> (&[f64], &[f64]) {
        let r = i * self.dim..(i + 1) * self.dim;
        (&self.re[r.clone()], &self.im[r])
    }
}

fn phased_signal_amplitudes(
    joint: &TwoModeState,
    opts: TwoPortOptions,
    table: &HermiteTable,
) -> Result<SignalAmplitudes> {
    let amp = quad_amplitude(joint, MeasuredMode::Ancilla, HomodynePhase(opts.phi1), table)?;
    let d = amp.dim();
    let phases: Vec<C64> = (0..d).map(|m| C64::from_polar(1.0, m as f64 * opts.phi0)).collect();
    let n = table.grid().points();
    let mut re = vec![0.0; n * d];
    let mut im = vec![0.0; n * d];
    for i in 0..n {
        for (m, a) in amp.row(i).iter().enumerate() {
            let v = a * phases[m];
            re[i * d + m] = v.re;
            im[i * d + m] = v.im;
        }
    }
    Ok(SignalAmplitudes { dim: d, re, im })
}

/// `∫∫ min(p₊P₊, p₋P₋)` on the points `0, stride, 2·stride, …` of the grid.
/// Cells containing the ML boundary leave an `O(h²)` error, so when every
/// other point also forms a grid the two step sizes are combined by one
/// Richardson step, which costs no extra density evaluations.
fn ml_ber(
    spec: &SignalSpec,
    plus: &SignalAmplitudes,
    minus: &SignalAmplitudes,
    table: &HermiteTable,
    stride: usize,
) -> Result<f64> {
    let grid = *table.grid();
    if stride == 0 || (grid.points() - 1) % stride != 0 {
        return Err(Error::invalid("stride", format!("{stride} does not divide {}", grid.points() - 1)));
    }
    let idx: Vec<usize> = (0..grid.points()).step_by(stride).collect();
    let n = idx.len();
    let h = grid.spacing() * stride as f64;
    let (pp, pm) = (spec.prior(Truth::Plus), spec.prior(Truth::Minus));
    let d = plus.dim;
    let halved = (n - 1) % 2 == 0 && n >= 5;
    let (mut fine, mut wide) = (vec![0.0; n], vec![0.0; n.div_ceil(2)]);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (r, &iy) in idx.iter().enumerate() {
        let (pr, pi) = plus.row(iy);
        let (mr, mi) = minus.row(iy);
        for (k, &ix) in idx.iter().enumerate() {
            let chi = &table.row(ix)[..d];
            a[k] = pp * (dot(pr, chi).powi(2) + dot(pi, chi).powi(2));
            b[k] = pm * (dot(mr, chi).powi(2) + dot(mi, chi).powi(2));
        }
        fine[r] = h * (0..n - 1).map(|k| min_of_lines(a[k], a[k + 1], b[k], b[k + 1])).sum::<f64>();
        if halved && r % 2 == 0 {
            let m = n / 2;
            wide[r / 2] =
                2.0 * h * (0..m).map(|k| min_of_lines(a[2 * k], a[2 * k + 2], b[2 * k], b[2 * k + 2])).sum::<f64>();
        }
    }
    let trapezoid = |v: &[f64], h: f64| h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]));
    let i1 = trapezoid(&fine, h);
    if !halved {
        return Ok(i1);
    }
    let i2 = trapezoid(&wide, 2.0 * h);
    Ok((4.0 * i1 - i2) / 3.0)
}

/// Mean over `[0, 1]` of `min(a(t), b(t))` for the two linear interpolants.
/// Without a crossing this is the trapezoid average; with one the kink is
/// integrated exactly.
fn min_of_lines(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let (f0, f1) = (a0 - b0, a1 - b1);
    if f0 * f1 >= 0.0 {
        return 0.5 * (a0.min(b0) + a1.min(b1));
    }
    let t = f0 / (f0 - f1);
    let at = a0 + t * (a1 - a0);
    // Left piece follows the smaller endpoint at 0, right piece at 1.
    let left = 0.5 * t * (a0.min(b0) + at);
    let right = 0.5 * (1.0 - t) * (at + a1.min(b1));
    left + right
}

/// Deterministic BER of one fixed ancilla and angle, deciding on
/// `x₀ = x cosθ − y sinθ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactBer {
    pub ber: f64,
    pub ber0: f64,
}

impl ExactBer {
    pub fn difference(&self) -> f64 {
        self.ber - self.ber0
    }
}

pub fn exact_ber_n1(
    spec: &SignalSpec,
    ancilla: &ModeState,
    theta: f64,
    trunc: Truncation,
    table: &HermiteTable,
) -> Result<ExactBer> {
    let joint = |truth: Truth| -> Result<TwoModeState> {
        let signal = coherent_state(C64::new(spec.amplitude(truth), 0.0), trunc)?;
        let out = beam_splitter(&tensor(&signal, ancilla)?, BeamSplitterAngle(theta));
        trunc.check(out.leakage())?;
        Ok(out)
    };
    let (s, c) = theta.sin_cos();
    let opts = TwoPortOptions { phi0: 0.0, phi1: 0.0, cx: c, cy: -s, ml_stride: None };
    let r = two_port_ber(spec, &joint(Truth::Plus)?, &joint(Truth::Minus)?, opts, table)?;
    Ok(ExactBer { ber: r.threshold, ber0: ber_homodyne_limit(spec) })
}

/// Outcome record of one trajectory as consumed by the statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecord {
    pub truth: Truth,
    pub x: f64,
    pub ys: Vec<f64>,
    pub thetas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationReport {
    pub samples: usize,
    /// KS of `x₀ − √2s` against the vacuum Gaussian of variance ½.
    pub ks: KsResult,
    /// `corr(x₀ − √2s, vₙ)` for each step.
    pub correlations: Vec<f64>,
    /// 10×10 independence test of `(x₀ − √2s, v₁)`; absent for `N = 0`.
    pub chi_square: Option<ChiSquareResult>,
}

impl FactorizationReport {
    pub fn correlation_bound(&self) -> f64 {
        3.0 / (self.samples as f64).sqrt()
    }

    pub fn passes(&self, level: f64) -> bool {
        self.ks.p_value > level
            && self.correlations.iter().all(|c| c.abs() < self.correlation_bound())
            && self.chi_square.is_none_or(|c| c.p_value > level)
    }
}

pub fn factorization_test(records: &[OutcomeRecord], spec: &SignalSpec) -> Result<FactorizationReport> {
    if records.len() < MIN_FACTORIZATION_SAMPLE {
        return Err(Error::InsufficientSample { got: records.len(), need: MIN_FACTORIZATION_SAMPLE });
    }
    let n_steps = records[0].ys.len();
    let mut residual = Vec::with_capacity(records.len());
    let mut vs = vec![Vec::with_capacity(records.len()); n_steps];
    for r in records {
        if r.ys.len() != n_steps {
            return Err(Error::LengthMismatch { what: "trajectory length", left: r.ys.len(), right: n_steps });
        }
        let t = rotate_outcomes(r.x, &r.ys, &r.thetas)?;
        residual.push(t.x0 - SQRT_2 * spec.amplitude(r.truth));
        for (col, v) in vs.iter_mut().zip(&t.v) {
            col.push(*v);
        }
    }
    let ks = ks_one_sample(&residual, |z| normal_cdf(z / 0.5f64.sqrt()));
    let correlations = vs.iter().map(|v| pearson(&residual, v)).collect::<Result<Vec<_>>>()?;
    let chi_square = match vs.first() {
        Some(v1) => Some(chi_square_independence(&residual, v1, 10)?),
        None => None,
    };
    Ok(FactorizationReport { samples: records.len(), ks, correlations, chi_square })
}

/// Largest `|P_out(x, y) − P_in(x cosθ − y sinθ, x sinθ + y cosθ)|` over a
/// `points × points` grid on `[−half_width, half_width]²`, where `P_out` is
/// the quadrature density of `B(θ)(a ⊗ b)` and `P_in` that of `a ⊗ b`.
pub fn separability_check(theta: f64, a: &ModeState, b: &ModeState, points: usize, half_width: f64) -> Result<f64> {
    let out = beam_splitter(&tensor(a, b)?, BeamSplitterAngle(theta));
    let d = out.cutoff();
    let (s, c) = theta.sin_cos();
    let axis: Vec<f64> = (0..points).map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64).collect();
    let single = |state: &ModeState, x: f64| -> f64 {
        let chi = hermite_functions(x, state.cutoff());
        state.coeffs().iter().zip(&chi).map(|(c, h)| c * h).sum::<C64>().norm_sqr()
    };
    let mut chi_x = vec![0.0; d];
    let mut chi_y = vec![0.0; d];
    let mut worst = 0.0f64;
    for &x in &axis {
        hermite_into(x, &mut chi_x);
        for &y in &axis {
            hermite_into(y, &mut chi_y);
            let mut amp = C64::new(0.0, 0.0);
            for m in 0..d {
                let row: C64 = (0..d).map(|n| out.coeff(m, n) * chi_y[n]).sum();
                amp += row * chi_x[m];
            }
            let lhs = amp.norm_sqr();
            let rhs = single(a, c * x - s * y) * single(b, s * x + c * y);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Output amplitudes of a single photon entering the signal port.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntanglementAmplitudes {
    /// `⟨1,0|B(θ)|1,0⟩`.
    pub stay: f64,
    /// `⟨0,1|B(θ)|1,0⟩`.
    pub cross: f64,
    pub schmidt_rank: usize,
}

pub fn entanglement_check(theta: f64) -> Result<EntanglementAmplitudes> {
    let input = tensor(&fock_state(1, 4)?, &fock_state(0, 4)?)?;
    let out = beam_splitter(&input, BeamSplitterAngle(theta));
    Ok(EntanglementAmplitudes {
        stay: out.coeff(1, 0).re,
        cross: out.coeff(0, 1).re,
        schmidt_rank: out.schmidt_rank(1e-12),
    })
}
