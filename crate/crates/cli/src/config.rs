//! The TOML run configuration: parsing, validation into library types, and
//! the canonical digest written into every report.

use std::path::Path;
use std::sync::Arc;

use ancilla_homodyne::fock::Truncation;
use ancilla_homodyne::policy::{
    AncillaSpec, ConstantPolicy, FeedforwardPolicy, HashRandomPolicy, ThresholdSwitchPolicy,
};
use ancilla_homodyne::receiver::{Estimator, ReceiverConfig};
use ancilla_homodyne::u2::{ScanGrid, DEFAULT_BUDGET};
use ancilla_homodyne::{Error, Parity, QuadratureGrid, SignalSpec};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn equal_priors() -> [f64; 2] {
    [0.5, 0.5]
}

fn default_cutoff() -> usize {
    ancilla_homodyne::fock::DEFAULT_CUTOFF
}

fn default_trials() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: f64,
    #[serde(default = "equal_priors")]
    pub priors: [f64; 2],
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_tol: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ancillae: Vec<AncillaConfig>,
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
    /// Signal amplitudes swept by `plotdata ber-vs-alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = QuadratureGrid::default();
        GridConfig { min: g.x_min(), max: g.x_max(), points: g.points() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityName {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AncillaConfig {
    Coherent {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Fock {
        n: usize,
    },
    Cat {
        re: f64,
        #[serde(default)]
        im: f64,
        parity: ParityName,
    },
    Squeezed {
        r: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    Constant,
    ThresholdSwitch,
    HashRandom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default)]
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mc,
    #[default]
    Rb,
}

/// Parameter lists of a U(2) scan. Missing lists take five equispaced
/// points; δ is never scanned.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_stride: Option<usize>,
}

/// A parsed configuration together with its checked library objects.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub file: FileConfig,
    pub signal: SignalSpec,
    pub truncation: Truncation,
    pub grid: QuadratureGrid,
    pub ancillae: Vec<AncillaSpec>,
    pub estimator: Estimator,
}

fn config_error(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn field(name: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config(format!("invalid `{}`: {}", name.into(), reason.into()))
}

pub fn read(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
}

impl AncillaConfig {
    fn spec(&self, i: usize, cutoff: usize) -> Result<AncillaSpec, CliError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(field(format!("ancillae[{i}].{name}"), "must be finite"))
            }
        };
        Ok(match *self {
            AncillaConfig::Coherent { re, im } => AncillaSpec::Coherent(C64::new(finite("re", re)?, finite("im", im)?)),
            AncillaConfig::Fock { n } => {
                if n >= cutoff {
                    return Err(field(format!("ancillae[{i}].n"), format!("must be below cutoff {cutoff}, got {n}")));
                }
                AncillaSpec::Fock(n)
            }
            AncillaConfig::Cat { re, im, parity } => {
                let beta = C64::new(finite("re", re)?, finite("im", im)?);
                if beta.norm() == 0.0 {
                    return Err(field(format!("ancillae[{i}]"), "cat amplitude must be nonzero"));
                }
                let parity = match parity {
                    ParityName::Even => Parity::Even,
                    ParityName::Odd => Parity::Odd,
                };
                AncillaSpec::Cat { beta, parity }
            }
            AncillaConfig::Squeezed { r } => {
                if !(finite("r", r)? >= 0.0) {
                    return Err(field(format!("ancillae[{i}].r"), format!("must be >= 0, got {r}")));
                }
                AncillaSpec::Squeezed(r)
            }
        })
    }
}

fn unused(name: &str, present: bool, kind: &str) -> Result<(), CliError> {
    if present {
        Err(field(format!("policy.{name}"), format!("not used by the {kind} policy")))
    } else {
        Ok(())
    }
}

fn required<T: Copy>(name: &str, v: Option<T>, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| field(format!("policy.{name}"), format!("required by the {kind} policy")))
}

fn check_angle(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field(name, "must be finite"))
    }
}

fn build_policy(file: &FileConfig, ancillae: &[AncillaSpec]) -> Result<Arc<dyn FeedforwardPolicy>, CliError> {
    let p = &file.policy;
    for (i, t) in file.thetas.iter().enumerate() {
        check_angle(&format!("thetas[{i}]"), *t)?;
    }
    match p.kind {
        PolicyKind::Constant => {
            let kind = "constant";
            unused("theta_bar", p.theta_bar.is_some(), kind)?;
            unused("gain", p.gain.is_some(), kind)?;
            unused("policy_seed", p.policy_seed.is_some(), kind)?;
            if let Some(steps) = p.steps {
                if steps != file.thetas.len() {
                    return Err(field(
                        "policy.steps",
                        format!("constant policy has one step per `thetas` entry ({}), got {steps}", file.thetas.len()),
                    ));
                }
            }
            if ancillae.len() != file.thetas.len() {
                return Err(field(
                    "ancillae",
                    format!(
                        "constant policy needs one ancilla per `thetas` entry ({}), got {}",
                        file.thetas.len(),
                        ancillae.len()
                    ),
                ));
            }
            Ok(Arc::new(ConstantPolicy::new(ancillae.to_vec(), file.thetas.clone()).map_err(config_error)?))
        }
        PolicyKind::ThresholdSwitch => {
            let kind = "threshold-switch";
            unused("policy_seed", p.policy_seed.is_some(), kind)?;
            let steps = required("steps", p.steps, kind)?;
            let theta_bar = check_angle("policy.theta_bar", required("theta_bar", p.theta_bar, kind)?)?;
            let gain = check_angle("policy.gain", required("gain", p.gain, kind)?)?;
            let (initial, on_nonnegative, on_negative) = match ancillae {
                [a, b] => (*a, *a, *b),
                [a, b, c] => (*a, *b, *c),
                _ => {
                    return Err(field(
                        "ancillae",
                        format!(
                            "threshold-switch takes [nonnegative, negative] or [initial, nonnegative, negative], got {} entries",
                            ancillae.len()
                        ),
                    ))
                }
            };
            Ok(Arc::new(ThresholdSwitchPolicy { steps, theta_bar, gain, initial, on_nonnegative, on_negative }))
        }
        PolicyKind::HashRandom => {
            let kind = "hash-random";
            unused("theta_bar", p.theta_bar.is_some(), kind)?;
            unused("gain", p.gain.is_some(), kind)?;
            let steps = required("steps", p.steps, kind)?;
            let seed = required("policy_seed", p.policy_seed, kind)?;
            if ancillae.is_empty() {
                return Err(field("ancillae", "hash-random policy needs a nonempty library"));
            }
            Ok(Arc::new(HashRandomPolicy::new(steps, ancillae.to_vec(), seed).map_err(config_error)?))
        }
    }
}

/// Upper bound on the number of ancilla steps accepted from a file.
pub const MAX_STEPS: usize = 64;

impl FileConfig {
    /// Checks every field and builds the library objects. Preparing the
    /// ancillae is part of validation, so an insufficient cutoff surfaces
    /// here as a numerical guard.
    pub fn load(self) -> Result<Loaded, CliError> {
        let signal = SignalSpec::new(self.alpha, self.priors[0], self.priors[1]).map_err(config_error)?;
        let truncation = match self.leak_tol {
            Some(t) => Truncation::with_tolerance(self.cutoff, t),
            None => Truncation::new(self.cutoff),
        }
        .map_err(config_error)?;
        let grid = QuadratureGrid::new(self.grid.min, self.grid.max, self.grid.points).map_err(config_error)?;
        if self.trials == 0 {
            return Err(field("trials", "must be >= 1"));
        }
        let ancillae =
            self.ancillae.iter().enumerate().map(|(i, a)| a.spec(i, self.cutoff)).collect::<Result<Vec<_>, _>>()?;
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() {
                return Err(field("alphas", "must be nonempty"));
            }
            for (i, a) in alphas.iter().enumerate() {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(field(format!("alphas[{i}]"), format!("must be finite and > 0, got {a}")));
                }
            }
        }
        if let Some(scan) = &self.scan {
            if scan.ml_stride == Some(0) {
                return Err(field("scan.ml_stride", "must be >= 1"));
            }
        }
        for a in &ancillae {
            a.prepare(truncation).map_err(CliError::from_core)?;
        }
        let estimator = match self.estimator {
            EstimatorKind::Mc => Estimator::Mc,
            EstimatorKind::Rb => Estimator::Rb,
        };
        Ok(Loaded { file: self, signal, truncation, grid, ancillae, estimator })
    }

    /// SHA-256 of the configuration re-serialised with every default filled
    /// in, so formatting, key order and comments do not matter.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialises");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Loaded {
    /// The receiver described by the file. The policy is only checked
    /// here because a scan config carries an ancilla list but no schedule.
    pub fn receiver(&self) -> Result<ReceiverConfig, CliError> {
        let policy = build_policy(&self.file, &self.ancillae)?;
        if policy.steps() > MAX_STEPS {
            return Err(field(
                "policy.steps",
                format!("at most {MAX_STEPS} steps are supported, got {}", policy.steps()),
            ));
        }
        let mut r = ReceiverConfig::new(self.signal, policy);
        r.truncation = self.truncation;
        r.grid = self.grid;
        r.estimator = self.estimator;
        r.stratified = self.file.stratified;
        Ok(r)
    }

    pub fn scan_grid(&self) -> Result<ScanGrid, CliError> {
        if self.ancillae.is_empty() {
            return Err(field("ancillae", "scan needs at least one ancilla"));
        }
        let mut g = ScanGrid::default_for(self.signal, self.ancillae.clone());
        let s = self.file.scan.clone().unwrap_or_default();
        let lists = [
            ("scan.theta", s.theta, &mut g.theta),
            ("scan.phi", s.phi, &mut g.phi),
            ("scan.chi", s.chi, &mut g.chi),
            ("scan.phi0", s.phi0, &mut g.phi0),
            ("scan.phi1", s.phi1, &mut g.phi1),
        ];
        for (name, given, target) in lists {
            if let Some(v) = given {
                if v.is_empty() {
                    return Err(field(name, "must be nonempty"));
                }
                for (i, x) in v.iter().enumerate() {
                    check_angle(&format!("{name}[{i}]"), *x)?;
                }
                *target = v;
            }
        }
        g.budget = s.budget.unwrap_or(DEFAULT_BUDGET);
        g.validate().map_err(|e| match e {
            Error::BudgetExceeded { .. } => field("scan.budget", e.to_string()),
            other => config_error(other),
        })?;
        Ok(g)
    }

    pub fn ml_stride(&self) -> usize {
        self.file
            .scan
            .as_ref()
            .and_then(|s| s.ml_stride)
            .unwrap_or(ancilla_homodyne::u2::ScanOptions::default().ml_stride)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
alpha = 0.5
thetas = [0.5]

[[ancillae]]
kind = "cat"
re = 1.0
parity = "odd"
"#;

    fn message(text: &str) -> String {
        match parse(text).and_then(|c| c.load()).and_then(|l| l.receiver()) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_loads() {
        let l = parse(BASE).unwrap().load().unwrap();
        assert_eq!(l.receiver().unwrap().steps(), 1);
        assert_eq!(l.grid, QuadratureGrid::default());
        assert_eq!(l.estimator, Estimator::Rb);
    }

    #[test]
    fn errors_name_the_field() {
        assert!(message(&format!("{BASE}\npriors = [0.6, 0.6]")).contains("priors"));
        assert!(message(&format!("{BASE}\nbogus = 1")).contains("bogus"));
        assert!(message(&BASE.replace("parity = \"odd\"", "parity = \"odd\"\nwidth = 2")).contains("width"));
        assert!(message(&format!("{BASE}\n[grid]\nmin = -5\nmax = 5\npoints = 100")).contains("grid"));
        assert!(message(&format!("{BASE}\n[policy]\ngain = 0.3")).contains("policy.gain"));
        assert!(message(&format!("{BASE}\n[policy]\nkind = \"hash-random\"\nsteps = 2")).contains("policy.policy_seed"));
        assert!(message(&BASE.replace("thetas = [0.5]", "thetas = [0.5, 0.2]")).contains("ancillae"));
        assert!(message(&format!("{BASE}\ncutoff = 0")).contains("cutoff"));
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = parse(BASE).unwrap();
        let b = parse(&format!("# comment\n{}", BASE.replace("alpha = 0.5", "alpha = 5e-1"))).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = parse(&BASE.replace("alpha = 0.5", "alpha = 0.6")).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn threshold_switch_layouts() {
        let text = r#"
alpha = 0.5
[policy]
kind = "threshold-switch"
steps = 3
theta_bar = 0.6
gain = 0.3
[[ancillae]]
kind = "coherent"
re = 0.5
[[ancillae]]
kind = "fock"
n = 1
"#;
        let p = parse(text).unwrap().load().unwrap().receiver().unwrap().policy;
        assert_eq!(p.steps(), 3);
        assert_eq!(p.choose(0, &[]).ancilla, AncillaSpec::Coherent(C64::new(0.5, 0.0)));
        assert_eq!(p.choose(1, &[-1.0]).ancilla, AncillaSpec::Fock(1));
    }
}
