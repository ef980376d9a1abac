//! Invariant suites behind `ahd verify`. Every random draw comes from the
//! suite seed, so a summary is a pure function of its flags.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};
use std::path::Path;
use std::sync::Arc;

use ancilla_homodyne::analysis::{ber_homodyne_limit, entanglement_check, factorization_test, separability_check};
use ancilla_homodyne::decision::{coherent_quadrature_density, normal_cdf};
use ancilla_homodyne::fock::Truncation;
use ancilla_homodyne::homodyne::{error_mass, QuadratureMarginal};
use ancilla_homodyne::policy::{AncillaSpec, ConstantPolicy};
use ancilla_homodyne::receiver::{simulate, trial_rng, Estimator, ReceiverConfig};
use ancilla_homodyne::stats::ks_one_sample;
use ancilla_homodyne::{
    beam_splitter, cat_state, coherent_state, fock_state, tensor, threshold, BeamSplitterAngle, HomodynePhase,
    ModeState, Parity, QuadratureGrid, SignalSpec, Truth, TwoModeState,
};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::output::{emit, toml_text};
use crate::{CliError, Suite};

/// Trials of the factorization suite; the statistics need at least 10⁴.
const FACTORIZATION_TRIALS: u64 = 20_000;
const LEVEL: f64 = 0.01;

#[derive(Debug, Serialize)]
struct Check {
    suite: &'static str,
    name: &'static str,
    value: f64,
    /// `value` must stay below `bound`, or above it for p-values.
    bound: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    command: &'static str,
    suite: String,
    seed: u64,
    cutoff: usize,
    alpha: f64,
    passed: bool,
    failures: Vec<String>,
    checks: Vec<Check>,
}

struct Ctx {
    seed: u64,
    trunc: Truncation,
    alpha: f64,
    checks: Vec<Check>,
}

impl Ctx {
    fn below(&mut self, suite: &'static str, name: &'static str, value: f64, bound: f64) {
        self.checks.push(Check { suite, name, value, bound, passed: value < bound });
    }

    fn above(&mut self, suite: &'static str, name: &'static str, value: f64, bound: f64) {
        self.checks.push(Check { suite, name, value, bound, passed: value > bound });
    }
}

fn core(e: ancilla_homodyne::Error) -> CliError {
    CliError::from_core(e)
}

fn random_two_mode<R: Rng>(rng: &mut R, d: usize) -> TwoModeState {
    // Support on m + n < d/2 keeps every block inside the truncation.
    let mut coeffs = vec![C64::new(0.0, 0.0); d * d];
    for m in 0..d {
        for n in 0..d {
            if m + n < d / 2 {
                coeffs[m * d + n] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
    }
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    coeffs.iter_mut().for_each(|c| *c /= norm);
    TwoModeState::from_coeffs(d, coeffs).expect("square coefficient block")
}

fn fock_suite(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = "fock";
    let d = ctx.trunc.cutoff;
    let probe = coherent_state(C64::new(ctx.alpha, 0.0), ctx.trunc).map_err(core)?;
    ctx.below(s, "coherent-leakage", probe.leakage(), ctx.trunc.leak_tol);
    let mut rng = trial_rng(ctx.seed, 0);
    let (mut norm, mut inverse, mut compose, mut photons) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..16 {
        let psi = random_two_mode(&mut rng, d);
        let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let out = beam_splitter(&psi, BeamSplitterAngle(a));
        norm = norm.max((out.norm_sqr() - psi.norm_sqr()).abs());
        let back = beam_splitter(&out, BeamSplitterAngle(-a));
        inverse = inverse.max(1.0 - back.fidelity(&psi));
        let two = beam_splitter(&out, BeamSplitterAngle(b));
        compose = compose.max(1.0 - two.fidelity(&beam_splitter(&psi, BeamSplitterAngle(a + b))));
        let (p_in, p_out) = (psi.total_photon_distribution(), out.total_photon_distribution());
        photons = photons.max(p_in.iter().zip(&p_out).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    ctx.below(s, "beam-splitter-norm", norm, 1e-12);
    ctx.below(s, "beam-splitter-inverse", inverse, 1e-12);
    ctx.below(s, "beam-splitter-composition", compose, 1e-12);
    ctx.below(s, "photon-number-conservation", photons, 1e-12);
    // Coherent labels rotate: B(θ)|s, γ⟩ = |s cosθ + γ sinθ, −s sinθ + γ cosθ⟩.
    let (t, g) = (0.7, C64::new(0.3, -0.2));
    let s0 = C64::new(ctx.alpha, 0.0);
    let input = tensor(&probe, &coherent_state(g, ctx.trunc).map_err(core)?).map_err(core)?;
    let out = beam_splitter(&input, BeamSplitterAngle(t));
    let (c, sn) = (t.cos(), t.sin());
    let expect = tensor(
        &coherent_state(s0 * c + g * sn, ctx.trunc).map_err(core)?,
        &coherent_state(-s0 * sn + g * c, ctx.trunc).map_err(core)?,
    )
    .map_err(core)?;
    ctx.below(s, "coherent-label-rotation", 1.0 - out.fidelity(&expect), 1e-10);
    Ok(())
}

fn homodyne_suite(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = "homodyne";
    let grid = QuadratureGrid::default();
    let vac = ModeState::vacuum(ctx.trunc.cutoff).map_err(core)?;
    let m = QuadratureMarginal::of_mode(&vac, HomodynePhase(0.0));
    let dev = grid.xs().iter().map(|x| (m.pdf(*x) - coherent_quadrature_density(0.0, *x)).abs()).fold(0.0, f64::max);
    ctx.below(s, "vacuum-density", dev, 1e-12);

    let state = coherent_state(C64::new(ctx.alpha, 0.0), ctx.trunc).map_err(core)?;
    let m = QuadratureMarginal::of_mode(&state, HomodynePhase(0.0));
    let dev =
        grid.xs().iter().map(|x| (m.pdf(*x) - coherent_quadrature_density(ctx.alpha, *x)).abs()).fold(0.0, f64::max);
    ctx.below(s, "coherent-density", dev, 1e-10);

    // Measuring |α⟩ at phase φ is measuring |αe^{iφ}⟩ at phase 0.
    let phi = 0.9;
    let rotated = coherent_state(C64::from_polar(ctx.alpha, phi), ctx.trunc).map_err(core)?;
    let (a, b) = (
        QuadratureMarginal::of_mode(&state, HomodynePhase(phi)),
        QuadratureMarginal::of_mode(&rotated, HomodynePhase(0.0)),
    );
    let dev = grid.xs().iter().map(|x| (a.pdf(*x) - b.pdf(*x)).abs()).fold(0.0, f64::max);
    ctx.below(s, "phase-covariance", dev, 1e-10);

    let spec = SignalSpec::equal_priors(ctx.alpha).map_err(core)?;
    let rule = threshold(&spec);
    let mass = error_mass(&state, &rule, Truth::Plus, &grid).map_err(core)?;
    ctx.below(s, "error-mass-closed-form", (mass - ber_homodyne_limit(&spec)).abs(), 1e-10);

    let mut ws = m.workspace();
    m.check_grid(&grid, &mut ws).map_err(core)?;
    let mut rng = trial_rng(ctx.seed, 1);
    let xs: Vec<f64> = (0..20_000).map(|_| m.sample(&grid, &mut ws, &mut rng).value).collect();
    let mu = std::f64::consts::SQRT_2 * ctx.alpha;
    let ks = ks_one_sample(&xs, |x| normal_cdf((x - mu) / 0.5f64.sqrt()));
    ctx.above(s, "sampler-ks-p", ks.p_value, LEVEL);
    Ok(())
}

fn separability_suite(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = "separability";
    let t = ctx.trunc;
    let probes = [
        (PI / 5.0, coherent_state(C64::new(ctx.alpha, 0.0), t), coherent_state(C64::new(0.3, 0.0), t)),
        (FRAC_PI_3, fock_state(1, t.cutoff), cat_state(C64::new(1.0, 0.0), Parity::Odd, t)),
        (FRAC_PI_4, coherent_state(C64::new(ctx.alpha, 0.0), t), fock_state(1, t.cutoff)),
    ];
    let mut worst = 0.0f64;
    for (theta, a, b) in probes {
        worst = worst.max(separability_check(theta, &a.map_err(core)?, &b.map_err(core)?, 41, 4.0).map_err(core)?);
    }
    ctx.below(s, "rotated-density-max-deviation", worst, 1e-6);

    let mut magnitude = 0.0f64;
    let mut signed = 0.0f64;
    let mut rank_ok = true;
    for theta in [PI / 7.0, FRAC_PI_4, FRAC_PI_3] {
        let e = entanglement_check(theta).map_err(core)?;
        magnitude = magnitude.max((e.stay.abs() - theta.cos()).abs()).max((e.cross.abs() - theta.sin()).abs());
        signed = signed.max((e.stay - theta.cos()).abs()).max((e.cross - theta.sin()).abs());
        rank_ok &= e.schmidt_rank == 2;
    }
    ctx.below(s, "single-photon-amplitude-magnitudes", magnitude, 1e-12);
    ctx.below(s, "single-photon-schmidt-rank-2", if rank_ok { 0.0 } else { 1.0 }, 0.5);
    // Literal (cos θ, +sin θ) convention for the split photon. It cannot
    // hold together with the rotated-density check above; see README.
    ctx.below(s, "single-photon-amplitudes-signed", signed, 1e-12);
    Ok(())
}

fn factorization_suite(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = "factorization";
    let spec = SignalSpec::equal_priors(ctx.alpha).map_err(core)?;
    let cat = AncillaSpec::Cat { beta: C64::new(1.0, 0.0), parity: Parity::Odd };
    let policy = ConstantPolicy::uniform(cat, FRAC_PI_4, 1).map_err(core)?;
    let mut config = ReceiverConfig::new(spec, Arc::new(policy));
    config.truncation = ctx.trunc;
    config.estimator = Estimator::Mc;
    let (_, records) = simulate(&config, FACTORIZATION_TRIALS, ctx.seed, true).map_err(core)?;
    let outcomes: Vec<_> = records.iter().filter_map(|r| r.outcome_record()).collect();
    let r = factorization_test(&outcomes, &spec).map_err(core)?;
    ctx.above(s, "x0-ks-p", r.ks.p_value, LEVEL);
    ctx.below(s, "x0-v1-abs-correlation", r.correlations[0].abs(), r.correlation_bound());
    ctx.above(s, "x0-v1-chi-square-p", r.chi_square.map(|c| c.p_value).unwrap_or(0.0), LEVEL);
    Ok(())
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Fock => "fock",
        Suite::Homodyne => "homodyne",
        Suite::Separability => "separability",
        Suite::Factorization => "factorization",
        Suite::All => "all",
    }
}

pub fn run(suite: Suite, seed: u64, cutoff: usize, alpha: f64, out: Option<&Path>) -> Result<(), CliError> {
    let trunc = Truncation::new(cutoff).map_err(|e| CliError::Config(format!("--cutoff: {e}")))?;
    SignalSpec::equal_priors(alpha).map_err(|e| CliError::Config(format!("--alpha: {e}")))?;
    // The probes all start from |α⟩; too small a cutoff is reported as a
    // numerical guard before any suite runs.
    coherent_state(C64::new(alpha, 0.0), trunc).map_err(core)?;
    let mut ctx = Ctx { seed, trunc, alpha, checks: Vec::new() };
    let all = suite == Suite::All;
    if all || suite == Suite::Fock {
        fock_suite(&mut ctx)?;
    }
    if all || suite == Suite::Homodyne {
        homodyne_suite(&mut ctx)?;
    }
    if all || suite == Suite::Separability {
        separability_suite(&mut ctx)?;
    }
    if all || suite == Suite::Factorization {
        factorization_suite(&mut ctx)?;
    }
    let failures: Vec<String> =
        ctx.checks.iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.suite, c.name)).collect();
    let summary = Summary {
        command: "verify",
        suite: suite_name(suite).into(),
        seed,
        cutoff,
        alpha,
        passed: failures.is_empty(),
        failures: failures.clone(),
        checks: ctx.checks,
    };
    emit(out, "verify.toml", &toml_text(&summary))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(failures.join(", ")))
    }
}
