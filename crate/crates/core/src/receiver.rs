//! The receiver chain: coherent signal, `N` ancilla couplings with
//! feedforward, sequential ancilla homodynes at phase 0, a final signal
//! homodyne and a threshold decision on the back-rotated variable `x₀`.
//!
//! Trial `k` draws everything from its own ChaCha8 stream `k` of the
//! master seed, so results do not depend on how trials are scheduled.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{ber_homodyne_limit, x0_affine, OutcomeRecord};
use crate::decision::{threshold, SignalSpec, Truth};
use crate::error::{Error, Result};
use crate::fock::{beam_splitter, coherent_state, tensor, BeamSplitterAngle, ModeState, Truncation};
use crate::homodyne::{collapse_exact, HomodynePhase, MeasuredMode, QuadratureGrid, QuadratureMarginal};
use crate::stats::wilson_interval;

pub use crate::decision::DecisionRule;
pub use crate::policy::{
    builtin_policies, AncillaSpec, ConstantPolicy, FeedforwardPolicy, HashRandomPolicy, StepChoice,
    ThresholdSwitchPolicy,
};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Indicator of a wrong decision on a sampled final outcome.
    Mc,
    /// Exact error mass of the conditional signal state.
    Rb,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Mc => "mc",
            Estimator::Rb => "rb",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReceiverConfig {
    pub signal: SignalSpec,
    pub truncation: Truncation,
    pub grid: QuadratureGrid,
    pub policy: Arc<dyn FeedforwardPolicy>,
    pub estimator: Estimator,
    /// Run both symbols in every trial and weight them by the priors.
    pub stratified: bool,
}

impl ReceiverConfig {
    pub fn new(signal: SignalSpec, policy: Arc<dyn FeedforwardPolicy>) -> Self {
        ReceiverConfig {
            signal,
            truncation: Truncation::default(),
            grid: QuadratureGrid::default(),
            policy,
            estimator: Estimator::Rb,
            stratified: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.policy.steps()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ending {
    Sampled { x: f64, x0: f64, decision: Truth },
    Conditional { state: ModeState, error_mass: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub truth: Truth,
    pub thetas: Vec<f64>,
    pub ancillae: Vec<AncillaSpec>,
    pub outcomes: Vec<f64>,
    pub ending: Ending,
    /// Largest norm deficit seen at each step (ancilla or mixed state).
    pub leakage: Vec<f64>,
}

impl Trajectory {
    /// 0/1 for a sampled ending, the conditional error probability otherwise.
    pub fn error(&self) -> f64 {
        match &self.ending {
            Ending::Sampled { decision, .. } => (*decision != self.truth) as u8 as f64,
            Ending::Conditional { error_mass, .. } => *error_mass,
        }
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    pub fn outcome_record(&self) -> Option<OutcomeRecord> {
        match self.ending {
            Ending::Sampled { x, .. } => {
                Some(OutcomeRecord { truth: self.truth, x, ys: self.outcomes.clone(), thetas: self.thetas.clone() })
            }
            Ending::Conditional { .. } => None,
        }
    }
}

/// One trajectory for a known `truth`. The final signal homodyne is sampled
/// for [`Estimator::Mc`] and integrated for [`Estimator::Rb`].
pub fn run_trajectory<R: Rng + ?Sized>(config: &ReceiverConfig, truth: Truth, rng: &mut R) -> Result<Trajectory> {
    let trunc = config.truncation;
    let n = config.steps();
    let mut signal = coherent_state(C64::new(config.signal.amplitude(truth), 0.0), trunc)?;
    let mut thetas = Vec::with_capacity(n);
    let mut ancillae = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut leakage = Vec::with_capacity(n);
    for step in 0..n {
        let choice = config.policy.choose(step, &outcomes);
        let ancilla = choice.ancilla.prepare(trunc)?;
        let joint = beam_splitter(&tensor(&signal, &ancilla)?, BeamSplitterAngle(choice.theta));
        let leak = ancilla.leakage().max(joint.leakage());
        trunc.check(leak)?;
        let marginal = QuadratureMarginal::of_two_mode(&joint, MeasuredMode::Ancilla, HomodynePhase(0.0));
        let mut ws = marginal.workspace();
        marginal.check_grid(&config.grid, &mut ws)?;
        let y = marginal.sample(&config.grid, &mut ws, rng).value;
        signal = collapse_exact(&joint, MeasuredMode::Ancilla, HomodynePhase(0.0), y)?;
        thetas.push(choice.theta);
        ancillae.push(choice.ancilla);
        outcomes.push(y);
        leakage.push(leak);
    }
    let rule = threshold(&config.signal);
    let (a, b) = x0_affine(&outcomes, &thetas)?;
    let marginal = QuadratureMarginal::of_mode(&signal, HomodynePhase(0.0));
    let mut ws = marginal.workspace();
    marginal.check_grid(&config.grid, &mut ws)?;
    let ending = match config.estimator {
        Estimator::Mc => {
            let x = marginal.sample(&config.grid, &mut ws, rng).value;
            let x0 = a * x + b;
            Ending::Sampled { x, x0, decision: rule.decide(x0) }
        }
        Estimator::Rb => {
            let region = rule.wrong_region_affine(truth, a, b);
            let error_mass = marginal.region_mass(region, &mut ws) / marginal.total();
            Ending::Conditional { state: signal, error_mass }
        }
    };
    Ok(Trajectory { truth, thetas, ancillae, outcomes, ending, leakage })
}

/// Flat per-trajectory record for dumps and statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub trial: u64,
    pub truth: Truth,
    pub outcomes: Vec<f64>,
    pub thetas: Vec<f64>,
    pub ancillae: Vec<AncillaSpec>,
    pub x: Option<f64>,
    pub x0: Option<f64>,
    pub decision: Option<Truth>,
    pub conditional_error: Option<f64>,
}

impl TrajectoryRecord {
    fn from_trajectory(trial: u64, t: Trajectory) -> Self {
        let (x, x0, decision, conditional_error) = match t.ending {
            Ending::Sampled { x, x0, decision } => (Some(x), Some(x0), Some(decision), None),
            Ending::Conditional { error_mass, .. } => (None, None, None, Some(error_mass)),
        };
        TrajectoryRecord {
            trial,
            truth: t.truth,
            outcomes: t.outcomes,
            thetas: t.thetas,
            ancillae: t.ancillae,
            x,
            x0,
            decision,
            conditional_error,
        }
    }

    pub fn outcome_record(&self) -> Option<OutcomeRecord> {
        self.x.map(|x| OutcomeRecord { truth: self.truth, x, ys: self.outcomes.clone(), thetas: self.thetas.clone() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerReport {
    pub estimator: Estimator,
    pub stratified: bool,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ber0: f64,
    pub max_leakage: f64,
    pub seed: u64,
    /// Wrong decisions, for the unstratified indicator estimator.
    pub wrong_decisions: Option<u64>,
}

/// Stream used by trial `k`; stratified runs use `2k` and `2k + 1`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct TrialResult {
    value: f64,
    max_leakage: f64,
    records: Vec<TrajectoryRecord>,
}

fn run_trial(config: &ReceiverConfig, seed: u64, k: u64, keep: bool) -> Result<TrialResult> {
    let mut out = TrialResult { value: 0.0, max_leakage: 0.0, records: Vec::new() };
    let push = |t: Trajectory, weight: f64, out: &mut TrialResult| {
        out.value += weight * t.error();
        out.max_leakage = out.max_leakage.max(t.max_leakage());
        if keep {
            out.records.push(TrajectoryRecord::from_trajectory(k, t));
        }
    };
    if config.stratified {
        for (bit, truth) in [(0, Truth::Plus), (1, Truth::Minus)] {
            let mut rng = trial_rng(seed, (k << 1) | bit);
            let t = run_trajectory(config, truth, &mut rng)?;
            push(t, config.signal.prior(truth), &mut out);
        }
    } else {
        let mut rng = trial_rng(seed, k);
        let truth = if rng.random::<f64>() < config.signal.prior(Truth::Plus) { Truth::Plus } else { Truth::Minus };
        let t = run_trajectory(config, truth, &mut rng)?;
        push(t, 1.0, &mut out);
    }
    Ok(out)
}

/// Runs `trials` trials on the current rayon pool and reduces them in trial
/// order. With `keep` set, every trajectory is returned as a record.
pub fn simulate(
    config: &ReceiverConfig,
    trials: u64,
    seed: u64,
    keep: bool,
) -> Result<(BerReport, Vec<TrajectoryRecord>)> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let results: Vec<Result<TrialResult>> =
        (0..trials).into_par_iter().map(|k| run_trial(config, seed, k, keep)).collect();
    let mut values = Vec::with_capacity(results.len());
    let mut max_leakage = 0.0f64;
    let mut records = Vec::new();
    for r in results {
        let r = r?;
        values.push(r.value);
        max_leakage = max_leakage.max(r.max_leakage);
        records.extend(r.records);
    }
    let m = values.len() as f64;
    let estimate = values.iter().sum::<f64>() / m;
    let var =
        if values.len() > 1 { values.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    let std_error = (var / m).sqrt();
    let indicator = config.estimator == Estimator::Mc && !config.stratified;
    let (ci_low, ci_high, wrong) = if indicator {
        let k = values.iter().filter(|v| **v > 0.5).count();
        let (lo, hi) = wilson_interval(k, values.len());
        (lo, hi, Some(k as u64))
    } else {
        (estimate - Z95 * std_error, estimate + Z95 * std_error, None)
    };
    let report = BerReport {
        estimator: config.estimator,
        stratified: config.stratified,
        trials,
        estimate,
        std_error,
        ci_low: ci_low.min(estimate),
        ci_high: ci_high.max(estimate),
        ber0: ber_homodyne_limit(&config.signal),
        max_leakage,
        seed,
        wrong_decisions: wrong,
    };
    Ok((report, records))
}

pub fn estimate_ber(config: &ReceiverConfig, trials: u64, seed: u64) -> Result<BerReport> {
    simulate(config, trials, seed, false).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Parity;
    use approx::assert_abs_diff_eq;
    use libm::erfc;
    use std::f64::consts::FRAC_PI_2;

    fn constant(ancilla: AncillaSpec, theta: f64, steps: usize) -> Arc<dyn FeedforwardPolicy> {
        Arc::new(ConstantPolicy::uniform(ancilla, theta, steps).unwrap())
    }

    fn config(alpha: f64, policy: Arc<dyn FeedforwardPolicy>) -> ReceiverConfig {
        ReceiverConfig::new(SignalSpec::equal_priors(alpha).unwrap(), policy)
    }

    #[test]
    fn n0_rb_is_exact() {
        let cfg = config(0.5, constant(AncillaSpec::Fock(0), 0.0, 0));
        let r = estimate_ber(&cfg, 10_000, 1).unwrap();
        assert_abs_diff_eq!(r.estimate, 0.5 * erfc(0.5f64.sqrt()), epsilon = 1e-12);
        assert!(r.std_error < 1e-12);
        let cfg = config(1.5, constant(AncillaSpec::Fock(0), 0.0, 0));
        assert_abs_diff_eq!(
            estimate_ber(&cfg, 10, 1).unwrap().estimate,
            0.5 * erfc(1.5 * 2f64.sqrt()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn n0_prior_weighted() {
        let spec = SignalSpec::new(0.5, 0.7, 0.3).unwrap();
        let mut cfg = ReceiverConfig::new(spec, constant(AncillaSpec::Fock(0), 0.0, 0));
        cfg.stratified = true;
        let r = estimate_ber(&cfg, 100, 3).unwrap();
        assert_abs_diff_eq!(r.estimate, ber_homodyne_limit(&spec), epsilon = 1e-6);
    }

    #[test]
    fn n0_mc_samples_gaussian() {
        let mut cfg = config(0.5, constant(AncillaSpec::Fock(0), 0.0, 0));
        cfg.estimator = Estimator::Mc;
        let (_, recs) = simulate(&cfg, 20_000, 5, true).unwrap();
        let plus: Vec<f64> = recs.iter().filter(|r| r.truth == Truth::Plus).map(|r| r.x.unwrap()).collect();
        let ks = crate::stats::ks_one_sample(&plus, |x| {
            crate::decision::normal_cdf((x - 2f64.sqrt() * 0.5) / 0.5f64.sqrt())
        });
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn identity_coupling_leaves_signal() {
        let cfg = config(0.5, constant(AncillaSpec::Cat { beta: C64::new(1.0, 0.0), parity: Parity::Odd }, 0.0, 1));
        let mut rng = trial_rng(9, 0);
        let t = run_trajectory(&cfg, Truth::Minus, &mut rng).unwrap();
        let Ending::Conditional { state, .. } = &t.ending else { panic!() };
        let target = coherent_state(C64::new(-0.5, 0.0), cfg.truncation).unwrap();
        assert!(state.fidelity(&target) > 1.0 - 1e-10);
    }

    #[test]
    fn coherent_ancilla_collapse_is_coherent_image() {
        let gamma = 0.3;
        let theta = 0.7;
        let cfg = config(0.5, constant(AncillaSpec::Coherent(C64::new(gamma, 0.0)), theta, 1));
        for k in 0..20 {
            let mut rng = trial_rng(4, k);
            let t = run_trajectory(&cfg, Truth::Plus, &mut rng).unwrap();
            let Ending::Conditional { state, .. } = &t.ending else { panic!() };
            let (s, _) = crate::fock::rotate_amplitudes(C64::new(0.5, 0.0), C64::new(gamma, 0.0), theta);
            let target = coherent_state(s, cfg.truncation).unwrap();
            assert!(state.fidelity(&target) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn swap_gives_x0_from_ancilla() {
        // θ = π/2 swaps the ports: x₀ = −y₁ carries the signal.
        let mut cfg = config(0.5, constant(AncillaSpec::Fock(1), FRAC_PI_2, 1));
        cfg.estimator = Estimator::Mc;
        let (_, recs) = simulate(&cfg, 200, 2, true).unwrap();
        for r in &recs {
            assert_abs_diff_eq!(r.x0.unwrap(), -r.outcomes[0], epsilon = 1e-6);
        }
    }

    #[test]
    fn reproducible_and_index_ordered() {
        let lib = vec![AncillaSpec::Fock(1), AncillaSpec::Coherent(C64::new(0.4, 0.0))];
        let policy: Arc<dyn FeedforwardPolicy> = Arc::new(HashRandomPolicy::new(2, lib, 5).unwrap());
        let cfg = config(0.5, policy);
        let (a, ra) = simulate(&cfg, 64, 11, true).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (b, rb) = pool.install(|| simulate(&cfg, 64, 11, true)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.windows(2).all(|w| w[0].trial < w[1].trial));
    }

    #[test]
    fn cutoff_guard() {
        let mut cfg = config(1.5, constant(AncillaSpec::Fock(0), 0.0, 0));
        cfg.truncation = Truncation::new(4).unwrap();
        let err = estimate_ber(&cfg, 1, 0).unwrap_err();
        assert!(err.is_numerical_guard(), "{err}");
    }

    #[test]
    fn mc_and_rb_agree() {
        let policy: Arc<dyn FeedforwardPolicy> = Arc::new(ThresholdSwitchPolicy {
            steps: 1,
            theta_bar: 0.6,
            gain: 0.3,
            initial: AncillaSpec::Fock(1),
            on_nonnegative: AncillaSpec::Fock(1),
            on_negative: AncillaSpec::Fock(1),
        });
        let mut cfg = config(0.5, policy);
        let rb = estimate_ber(&cfg, 4000, 8).unwrap();
        cfg.estimator = Estimator::Mc;
        let mc = estimate_ber(&cfg, 4000, 8).unwrap();
        let se = (rb.std_error.powi(2) + mc.std_error.powi(2)).sqrt();
        assert!((rb.estimate - mc.estimate).abs() < 3.0 * se, "{rb:?} {mc:?}");
        assert!(mc.ci_low <= mc.estimate && mc.estimate <= mc.ci_high);
    }
}
