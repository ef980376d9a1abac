//! General U(2) beam splitter with phase-rotated homodyne detections on both
//! ports, and a BER scan over its parameters.
//!
//! `U = e^{iδ} e^{iφσz} e^{iθσy} e^{iχσz}` acts on the coherent label pair
//! (signal, ancilla). The global phase δ cannot affect any density and is
//! held at zero by the scan.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::analysis::{ber_homodyne_limit, two_port_ber, CoherentPairTerms, TwoPortOptions};
use crate::decision::{SignalSpec, Truth};
use crate::error::{Error, Result};
use crate::fock::{beam_splitter_u2, coherent_state, tensor, ModeState, Truncation, TwoModeState};
use crate::hermite::{hermite_functions, HermiteTable};
use crate::homodyne::QuadratureGrid;
use crate::policy::AncillaSpec;

/// Scan rows below `BER₀ − FLAG_MARGIN` are flagged for inspection.
pub const FLAG_MARGIN: f64 = 1e-4;

pub const THRESHOLD_RULE: &str = "rotated-threshold: decide +alpha iff x cos(theta) - y sin(theta) >= x_th";
pub const ML_RULE: &str = "2d-maximum-likelihood: decide by p(+)P(x,y|+alpha) vs p(-)P(x,y|-alpha)";

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct U2Params {
    pub delta: f64,
    pub phi: f64,
    pub theta: f64,
    pub chi: f64,
    /// Detection phase on the signal port.
    pub phi0: f64,
    /// Detection phase on the ancilla port.
    pub phi1: f64,
}

impl U2Params {
    /// The real beam splitter `B(θ)` with phase-0 detections.
    pub fn so2(theta: f64) -> Self {
        U2Params { theta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.delta, self.phi, self.theta, self.chi, self.phi0, self.phi1];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("u2", "parameters must be finite"))
        }
    }

    /// The 2×2 matrix acting on `(signal, ancilla)` coherent labels.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        let g = C64::from_polar(1.0, self.delta);
        [
            [g * C64::from_polar(c, self.phi + self.chi), g * C64::from_polar(s, self.phi - self.chi)],
            [-g * C64::from_polar(s, self.chi - self.phi), g * C64::from_polar(c, -self.phi - self.chi)],
        ]
    }
}

/// `P(x(φ₀), y(φ₁) | s)` through the Fock representation.
pub fn two_port_density(s: f64, ancilla: &ModeState, u: &U2Params, x: f64, y: f64) -> Result<f64> {
    let trunc = Truncation::new(ancilla.cutoff())?;
    let joint = beam_splitter_u2(&tensor(&coherent_state(C64::new(s, 0.0), trunc)?, ancilla)?, u);
    Ok(joint_density(&joint, u.phi0, u.phi1, x, y))
}

fn joint_density(joint: &TwoModeState, phi0: f64, phi1: f64, x: f64, y: f64) -> f64 {
    let d = joint.cutoff();
    let cx = hermite_functions(x, d);
    let cy = hermite_functions(y, d);
    let ex: Vec<C64> = (0..d).map(|m| C64::from_polar(cx[m], m as f64 * phi0)).collect();
    let ey: Vec<C64> = (0..d).map(|n| C64::from_polar(cy[n], n as f64 * phi1)).collect();
    let mut amp = C64::new(0.0, 0.0);
    for m in 0..d {
        let row: C64 = (0..d).map(|n| joint.coeff(m, n) * ey[n]).sum();
        amp += row * ex[m];
    }
    amp.norm_sqr()
}

/// Closed form for a coherent ancilla `γ`.
pub fn two_port_density_coherent(s: f64, gamma: C64, u: &U2Params, x: f64, y: f64) -> f64 {
    CoherentPairTerms::two_port(C64::new(s, 0.0), gamma, gamma, u).diagonal_density(x, &[y])
}

/// Parameter lists of a scan; δ is fixed at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid {
    pub signal: SignalSpec,
    pub ancillae: Vec<AncillaSpec>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub chi: Vec<f64>,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub budget: usize,
}

pub const DEFAULT_BUDGET: usize = 20_000;

fn periodic(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

impl ScanGrid {
    /// Five equispaced points for each of φ, χ, φ₀, φ₁ on `[0, 2π)` and for
    /// θ on `[0, π/2]`.
    pub fn default_for(signal: SignalSpec, ancillae: Vec<AncillaSpec>) -> Self {
        ScanGrid {
            signal,
            ancillae,
            theta: (0..5).map(|k| FRAC_PI_2 * k as f64 / 4.0).collect(),
            phi: periodic(5),
            chi: periodic(5),
            phi0: periodic(5),
            phi1: periodic(5),
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn len(&self) -> usize {
        self.ancillae.len() * self.theta.len() * self.phi.len() * self.chi.len() * self.phi0.len() * self.phi1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let lists: [(&'static str, &Vec<f64>); 5] = [
            ("theta", &self.theta),
            ("phi", &self.phi),
            ("chi", &self.chi),
            ("phi0", &self.phi0),
            ("phi1", &self.phi1),
        ];
        for (name, l) in lists {
            if l.is_empty() {
                return Err(Error::invalid(name, "scan list must be nonempty"));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(name, "scan values must be finite"));
            }
        }
        if self.ancillae.is_empty() {
            return Err(Error::invalid("ancillae", "scan needs at least one ancilla"));
        }
        if self.len() > self.budget {
            return Err(Error::BudgetExceeded { points: self.len(), budget: self.budget });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub truncation: Truncation,
    /// Stride of the sub-grid used for the ML correction.
    pub ml_stride: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { truncation: Truncation::default(), ml_stride: 5 }
    }
}

/// Grid for the scan's `y` integral. The trapezoid rule is spectrally
/// accurate for these Gaussian-tailed integrands, so 1001 points on
/// `[−10, 10]` already agree with the 4001-point grid to ~1e−15.
pub fn scan_grid() -> QuadratureGrid {
    QuadratureGrid::new(-10.0, 10.0, 1001).expect("static grid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub ancilla: AncillaSpec,
    pub params: U2Params,
    pub ber_threshold: f64,
    pub ber_ml: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub ber0: f64,
    pub dropped: Vec<&'static str>,
    pub rules: [&'static str; 2],
    /// Sorted by threshold-rule BER, then by point index.
    pub rows: Vec<ScanRow>,
}

/// BERs of one U(2) point under both decision rules.
pub fn point_ber(
    signal: &SignalSpec,
    ancilla: &ModeState,
    u: &U2Params,
    trunc: Truncation,
    table: &HermiteTable,
    ml_stride: Option<usize>,
) -> Result<crate::analysis::TwoPortBer> {
    let joint = |truth: Truth| -> Result<TwoModeState> {
        let sig = coherent_state(C64::new(signal.amplitude(truth), 0.0), trunc)?;
        let out = beam_splitter_u2(&tensor(&sig, ancilla)?, u);
        trunc.check(out.leakage())?;
        Ok(out)
    };
    let (s, c) = u.theta.sin_cos();
    let opts = TwoPortOptions { phi0: u.phi0, phi1: u.phi1, cx: c, cy: -s, ml_stride };
    two_port_ber(signal, &joint(Truth::Plus)?, &joint(Truth::Minus)?, opts, table)
}

pub fn scan_ber(grid: &ScanGrid, options: ScanOptions, table: &HermiteTable) -> Result<ScanReport> {
    grid.validate()?;
    let states = grid.ancillae.iter().map(|a| a.prepare(options.truncation)).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(grid.len());
    for (ai, _) in grid.ancillae.iter().enumerate() {
        for &theta in &grid.theta {
            for &phi in &grid.phi {
                for &chi in &grid.chi {
                    for &phi0 in &grid.phi0 {
                        for &phi1 in &grid.phi1 {
                            points.push((ai, U2Params { delta: 0.0, phi, theta, chi, phi0, phi1 }));
                        }
                    }
                }
            }
        }
    }
    let ber0 = ber_homodyne_limit(&grid.signal);
    let results: Vec<Result<ScanRow>> = points
        .par_iter()
        .enumerate()
        .map(|(index, (ai, u))| {
            let r = point_ber(&grid.signal, &states[*ai], u, options.truncation, table, Some(options.ml_stride))?;
            let ber_ml = r.ml.unwrap_or(r.threshold);
            Ok(ScanRow {
                index,
                ancilla: grid.ancillae[*ai],
                params: *u,
                ber_threshold: r.threshold,
                ber_ml,
                flagged: r.threshold.min(ber_ml) < ber0 - FLAG_MARGIN,
            })
        })
        .collect();
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.ber_threshold.total_cmp(&b.ber_threshold).then(a.index.cmp(&b.index)));
    Ok(ScanReport { ber0, dropped: vec!["delta (global phase)"], rules: [THRESHOLD_RULE, ML_RULE], rows })
}
