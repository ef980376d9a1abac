//! Ancilla descriptors and feedforward policies.
//!
//! A policy maps the step index and the ancilla outcomes seen so far to the
//! next ancilla and beam-splitter angle. It is never told which symbol was
//! sent.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{cat_state, coherent_state, fock_state, squeezed_vacuum, ModeState, Parity, Truncation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AncillaSpec {
    Coherent(C64),
    Fock(usize),
    Cat { beta: C64, parity: Parity },
    Squeezed(f64),
}

impl AncillaSpec {
    pub fn prepare(&self, trunc: Truncation) -> Result<ModeState> {
        match *self {
            AncillaSpec::Coherent(a) => coherent_state(a, trunc),
            AncillaSpec::Fock(n) => fock_state(n, trunc.cutoff),
            AncillaSpec::Cat { beta, parity } => cat_state(beta, parity, trunc),
            AncillaSpec::Squeezed(r) => squeezed_vacuum(r, trunc),
        }
    }
}

fn fmt_complex(f: &mut fmt::Formatter<'_>, z: C64) -> fmt::Result {
    if z.im == 0.0 {
        write!(f, "{}", z.re)
    } else {
        write!(f, "{}{:+}i", z.re, z.im)
    }
}

impl fmt::Display for AncillaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AncillaSpec::Coherent(a) => {
                write!(f, "coherent(")?;
                fmt_complex(f, a)?;
                write!(f, ")")
            }
            AncillaSpec::Fock(n) => write!(f, "fock({n})"),
            AncillaSpec::Cat { beta, parity } => {
                write!(f, "cat(")?;
                fmt_complex(f, beta)?;
                let p = match parity {
                    Parity::Even => "even",
                    Parity::Odd => "odd",
                };
                write!(f, ",{p})")
            }
            AncillaSpec::Squeezed(r) => write!(f, "squeezed({r})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepChoice {
    pub ancilla: AncillaSpec,
    pub theta: f64,
}

pub trait FeedforwardPolicy: Send + Sync + fmt::Debug {
    /// Number of ancilla steps `N`.
    fn steps(&self) -> usize;

    /// Choice for step `step` (0-based) given `y₁ … y_step`.
    fn choose(&self, step: usize, history: &[f64]) -> StepChoice;

    fn name(&self) -> &'static str;
}

/// Fixed schedule, independent of outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantPolicy {
    schedule: Vec<StepChoice>,
}

impl ConstantPolicy {
    pub fn new(ancillae: Vec<AncillaSpec>, thetas: Vec<f64>) -> Result<Self> {
        if ancillae.len() != thetas.len() {
            return Err(Error::LengthMismatch {
                what: "ancillae vs thetas",
                left: ancillae.len(),
                right: thetas.len(),
            });
        }
        check_angles(&thetas)?;
        let schedule = ancillae.into_iter().zip(thetas).map(|(ancilla, theta)| StepChoice { ancilla, theta }).collect();
        Ok(ConstantPolicy { schedule })
    }

    /// The same ancilla and angle at every step.
    pub fn uniform(ancilla: AncillaSpec, theta: f64, steps: usize) -> Result<Self> {
        Self::new(vec![ancilla; steps], vec![theta; steps])
    }

    pub fn schedule(&self) -> &[StepChoice] {
        &self.schedule
    }
}

impl FeedforwardPolicy for ConstantPolicy {
    fn steps(&self) -> usize {
        self.schedule.len()
    }

    fn choose(&self, step: usize, _history: &[f64]) -> StepChoice {
        self.schedule[step]
    }

    fn name(&self) -> &'static str {
        "constant"
    }
}

/// `θₙ₊₁ = θ̄ + g·tanh(yₙ)`; the next ancilla is `on_nonnegative` when
/// `yₙ ≥ 0` and `on_negative` otherwise. Step 1 uses `initial` and `θ̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSwitchPolicy {
    pub steps: usize,
    pub theta_bar: f64,
    pub gain: f64,
    pub initial: AncillaSpec,
    pub on_nonnegative: AncillaSpec,
    pub on_negative: AncillaSpec,
}

impl FeedforwardPolicy for ThresholdSwitchPolicy {
    fn steps(&self) -> usize {
        self.steps
    }

    fn choose(&self, step: usize, history: &[f64]) -> StepChoice {
        if step == 0 {
            return StepChoice { ancilla: self.initial, theta: self.theta_bar };
        }
        let y = history[step - 1];
        let ancilla = if y >= 0.0 { self.on_nonnegative } else { self.on_negative };
        StepChoice { ancilla, theta: self.theta_bar + self.gain * y.tanh() }
    }

    fn name(&self) -> &'static str {
        "threshold-switch"
    }
}

/// Outcome history hashed with a seed into `θ ∈ [0, π/2]` and an index into
/// a fixed ancilla library.
#[derive(Clone, Debug, PartialEq)]
pub struct HashRandomPolicy {
    pub steps: usize,
    pub library: Vec<AncillaSpec>,
    pub seed: u64,
}

impl HashRandomPolicy {
    pub fn new(steps: usize, library: Vec<AncillaSpec>, seed: u64) -> Result<Self> {
        if library.is_empty() {
            return Err(Error::invalid("ancillae", "hash-random policy needs a nonempty library"));
        }
        Ok(HashRandomPolicy { steps, library, seed })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl FeedforwardPolicy for HashRandomPolicy {
    fn steps(&self) -> usize {
        self.steps
    }

    fn choose(&self, step: usize, history: &[f64]) -> StepChoice {
        let mut h = splitmix64(self.seed ^ splitmix64(step as u64));
        for y in &history[..step] {
            h = splitmix64(h ^ y.to_bits());
        }
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        let pick = splitmix64(h) % self.library.len() as u64;
        StepChoice { ancilla: self.library[pick as usize], theta: u * FRAC_PI_2 }
    }

    fn name(&self) -> &'static str {
        "hash-random"
    }
}

fn check_angles(thetas: &[f64]) -> Result<()> {
    if thetas.iter().all(|t| t.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("thetas", "angles must be finite"))
    }
}

/// One representative of each built-in kind over `library`: constant (first
/// element, `θ̄`), threshold-switch (first two elements, gain `g`) and
/// hash-random (whole library).
pub fn builtin_policies(
    steps: usize,
    library: &[AncillaSpec],
    theta_bar: f64,
    gain: f64,
    seed: u64,
) -> Result<Vec<Box<dyn FeedforwardPolicy>>> {
    let first = *library.first().ok_or_else(|| Error::invalid("ancillae", "library is empty"))?;
    let second = *library.get(1).unwrap_or(&first);
    Ok(vec![
        Box::new(ConstantPolicy::uniform(first, theta_bar, steps)?),
        Box::new(ThresholdSwitchPolicy {
            steps,
            theta_bar,
            gain,
            initial: first,
            on_nonnegative: first,
            on_negative: second,
        }),
        Box::new(HashRandomPolicy::new(steps, library.to_vec(), seed)?),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> Vec<AncillaSpec> {
        vec![
            AncillaSpec::Coherent(C64::new(0.5, 0.0)),
            AncillaSpec::Cat { beta: C64::new(1.0, 0.0), parity: Parity::Odd },
            AncillaSpec::Fock(1),
        ]
    }

    #[test]
    fn constant_ignores_history() {
        let p = ConstantPolicy::uniform(AncillaSpec::Fock(1), 0.3, 3).unwrap();
        assert_eq!(p.choose(2, &[0.1, 0.2]), p.choose(2, &[-5.0, 9.0]));
    }

    #[test]
    fn hash_random_is_deterministic_and_in_range() {
        let a = HashRandomPolicy::new(3, lib(), 42).unwrap();
        let b = HashRandomPolicy::new(3, lib(), 42).unwrap();
        let c = HashRandomPolicy::new(3, lib(), 43).unwrap();
        let mut differs = false;
        for k in 0..200 {
            let h = [k as f64 * 0.37 - 30.0, 0.5];
            assert_eq!(a.choose(2, &h), b.choose(2, &h));
            let ch = a.choose(2, &h);
            assert!((0.0..=FRAC_PI_2).contains(&ch.theta));
            differs |= ch != c.choose(2, &h);
        }
        assert!(differs);
        // Only the first `step` outcomes matter.
        assert_eq!(a.choose(1, &[0.3, 1.0]), a.choose(1, &[0.3, -7.0]));
    }

    #[test]
    fn threshold_switch_tie_goes_to_first() {
        let p = ThresholdSwitchPolicy {
            steps: 2,
            theta_bar: 0.5,
            gain: 0.2,
            initial: lib()[2],
            on_nonnegative: lib()[0],
            on_negative: lib()[1],
        };
        assert_eq!(p.choose(0, &[]), StepChoice { ancilla: lib()[2], theta: 0.5 });
        assert_eq!(p.choose(1, &[0.0]).ancilla, lib()[0]);
        assert_eq!(p.choose(1, &[-0.0]).ancilla, lib()[0]);
        assert_eq!(p.choose(1, &[-1e-9]).ancilla, lib()[1]);
        assert!((p.choose(1, &[2.0]).theta - (0.5 + 0.2 * 2f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn labels() {
        assert_eq!(lib()[0].to_string(), "coherent(0.5)");
        assert_eq!(lib()[1].to_string(), "cat(1,odd)");
        assert_eq!(AncillaSpec::Coherent(C64::new(0.1, -0.2)).to_string(), "coherent(0.1-0.2i)");
    }

    #[test]
    fn catalog() {
        let ps = builtin_policies(2, &lib(), 0.4, 0.3, 7).unwrap();
        let names: Vec<_> = ps.iter().map(|p| p.name()).collect();
        assert_eq!(names, ["constant", "threshold-switch", "hash-random"]);
        assert!(ps.iter().all(|p| p.steps() == 2));
    }
}
