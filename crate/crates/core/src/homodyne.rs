//! Homodyne detection: quadrature amplitudes, outcome densities, sampling
//! and conditional collapse of the unmeasured mode.
//!
//! Quadrature convention: `x̂ = (a + a†)/√2`, so the vacuum density is
//! `e^{−x²}/√π`. A detection at local-oscillator phase `φ` projects onto
//! `⟨x(φ)|n⟩ = e^{inφ} χₙ(x)`, equivalently `⟨x(φ)|α⟩ = ⟨x|α e^{iφ}⟩`.
//!
//! Two routes are provided. The grid route tabulates amplitudes on a
//! [`QuadratureGrid`] and integrates by the trapezoid rule. The exact route
//! ([`QuadratureMarginal`]) keeps the marginal as a number-basis matrix and
//! evaluates its CDF through [`PartialOverlaps`], which is what the
//! Monte-Carlo receiver uses.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::decision::{DecisionRule, Region, Truth};
use crate::error::{Error, Result};
use crate::fock::{ModeState, TwoModeState};
use crate::hermite::{hermite_into, HermiteTable, PartialOverlaps};

/// Minimum fraction of the marginal that must fall inside the grid.
pub const GRID_MASS_TOL: f64 = 1e-6;

/// Densities at or below this are treated as zero when collapsing.
pub const ZERO_DENSITY: f64 = 1e-200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    x_min: f64,
    x_max: f64,
    points: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid { x_min: -10.0, x_max: 10.0, points: 4001 }
    }
}

impl QuadratureGrid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::invalid("grid", format!("need finite min < max, got [{x_min}, {x_max}]")));
        }
        if points < 3 || points % 2 == 0 {
            return Err(Error::invalid("grid", format!("points must be odd and >= 3, got {points}")));
        }
        Ok(QuadratureGrid { x_min, x_max, points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.x_max
        } else {
            self.x_min + self.spacing() * i as f64
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        let h = self.spacing();
        let inner: f64 = values[1..values.len() - 1].iter().sum();
        h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
    }

    /// Index of the cell `[xᵢ, xᵢ₊₁)` containing `x`, clamped to the grid.
    pub fn cell(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.spacing()).floor();
        (i.max(0.0) as usize).min(self.points - 2)
    }

    /// Every `stride`-th point (the end point is always kept when `stride`
    /// divides `points − 1`).
    pub fn coarsened(&self, stride: usize) -> Result<QuadratureGrid> {
        if stride == 0 || (self.points - 1) % stride != 0 {
            return Err(Error::invalid("stride", format!("{stride} does not divide {}", self.points - 1)));
        }
        let points = (self.points - 1) / stride + 1;
        QuadratureGrid::new(self.x_min, self.x_max, if points % 2 == 0 { points + 1 } else { points })
    }
}

/// Local-oscillator phase of a homodyne detector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HomodynePhase(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasuredMode {
    Signal,
    Ancilla,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomodyneOutcome {
    pub value: f64,
    pub grid_index: usize,
    pub pdf_at_value: f64,
}

/// Conditional amplitude map of a two-mode state measured on one port.
///
/// `proj[m][n]` is the amplitude of unmeasured level `m` and measured level
/// `n`, with the detection phase already folded in, so that the unmeasured
/// mode after outcome `x` is `Σₙ proj[m][n] χₙ(x)`.
#[derive(Clone, Debug)]
struct Projector {
    dim: usize,
    entries: Vec<C64>,
}

impl Projector {
    fn new(state: &TwoModeState, measured: MeasuredMode, phi: HomodynePhase) -> Self {
        let d = state.cutoff();
        let phases: Vec<C64> = (0..d).map(|n| C64::from_polar(1.0, n as f64 * phi.0)).collect();
        let mut entries = vec![C64::new(0.0, 0.0); d * d];
        for m in 0..d {
            for n in 0..d {
                let (u, k, c) = match measured {
                    MeasuredMode::Ancilla => (m, n, state.coeff(m, n)),
                    MeasuredMode::Signal => (n, m, state.coeff(m, n)),
                };
                entries[u * d + k] = c * phases[k];
            }
        }
        Projector { dim: d, entries }
    }

    fn from_mode(state: &ModeState, phi: HomodynePhase) -> Self {
        let entries = state.rotated(phi.0).coeffs().to_vec();
        Projector { dim: entries.len(), entries }
    }

    fn rows(&self) -> usize {
        self.entries.len() / self.dim
    }

    fn apply(&self, chi: &[f64], out: &mut [C64]) {
        let d = self.dim;
        for (m, o) in out.iter_mut().enumerate() {
            let row = &self.entries[m * d..(m + 1) * d];
            *o = row.iter().zip(chi).map(|(c, x)| c * x).sum();
        }
    }

    /// Real part of the measured-port reduced density matrix.
    fn marginal_matrix(&self) -> Vec<f64> {
        let d = self.dim;
        let mut r = vec![0.0; d * d];
        for m in 0..self.rows() {
            let row = &self.entries[m * d..(m + 1) * d];
            for n in 0..d {
                let a = row[n].conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in n..d {
                    r[n * d + k] += (a * row[k]).re;
                }
            }
        }
        for n in 0..d {
            for k in 0..n {
                r[n * d + k] = r[k * d + n];
            }
        }
        r
    }
}

/// Amplitudes `A(xᵢ)[m]` of the unmeasured mode on a grid.
#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    grid: QuadratureGrid,
    dim: usize,
    values: Vec<C64>,
    projector: Projector,
}

impl AmplitudeTable {
    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// Dimension of the unmeasured mode.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact amplitudes at an arbitrary (off-grid) outcome.
    pub fn amplitudes_at(&self, x: f64) -> Vec<C64> {
        let mut chi = vec![0.0; self.projector.dim];
        hermite_into(x, &mut chi);
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.projector.apply(&chi, &mut out);
        out
    }
}

/// Tabulates the conditional amplitudes of `state` measured on `measured`.
pub fn quad_amplitude(
    state: &TwoModeState,
    measured: MeasuredMode,
    phi: HomodynePhase,
    table: &HermiteTable,
) -> Result<AmplitudeTable> {
    let projector = Projector::new(state, measured, phi);
    let amp = tabulate(projector, table)?;
    check_grid_mass(amp.grid.integrate(&density_values(&amp)), state.norm_sqr())?;
    Ok(amp)
}

/// Single-mode version: one row per grid point with a single amplitude.
pub fn quad_amplitude_mode(state: &ModeState, phi: HomodynePhase, table: &HermiteTable) -> Result<AmplitudeTable> {
    let amp = tabulate(Projector::from_mode(state, phi), table)?;
    check_grid_mass(amp.grid.integrate(&density_values(&amp)), state.norm_sqr())?;
    Ok(amp)
}

fn tabulate(projector: Projector, table: &HermiteTable) -> Result<AmplitudeTable> {
    let d = projector.dim;
    if table.dim() < d {
        return Err(Error::LengthMismatch { what: "hermite table dimension", left: table.dim(), right: d });
    }
    let rows = projector.rows();
    let grid = *table.grid();
    // Transposed real and imaginary parts so the inner loop is an axpy.
    let mut tr = vec![0.0; d * rows];
    let mut ti = vec![0.0; d * rows];
    for m in 0..rows {
        for n in 0..d {
            let c = projector.entries[m * d + n];
            tr[n * rows + m] = c.re;
            ti[n * rows + m] = c.im;
        }
    }
    let real = ti.iter().all(|v| *v == 0.0);
    let mut values = vec![C64::new(0.0, 0.0); grid.points() * rows];
    let mut acc_r = vec![0.0; rows];
    let mut acc_i = vec![0.0; rows];
    for i in 0..grid.points() {
        let chi = &table.row(i)[..d];
        acc_r.iter_mut().for_each(|v| *v = 0.0);
        acc_i.iter_mut().for_each(|v| *v = 0.0);
        for (n, x) in chi.iter().enumerate() {
            let col = &tr[n * rows..(n + 1) * rows];
            for (a, c) in acc_r.iter_mut().zip(col) {
                *a += c * x;
            }
            if !real {
                let col = &ti[n * rows..(n + 1) * rows];
                for (a, c) in acc_i.iter_mut().zip(col) {
                    *a += c * x;
                }
            }
        }
        for (m, v) in values[i * rows..(i + 1) * rows].iter_mut().enumerate() {
            *v = C64::new(acc_r[m], acc_i[m]);
        }
    }
    Ok(AmplitudeTable { grid, dim: rows, values, projector })
}

fn density_values(amp: &AmplitudeTable) -> Vec<f64> {
    (0..amp.grid.points()).map(|i| amp.row(i).iter().map(|c| c.norm_sqr()).sum()).collect()
}

fn check_grid_mass(mass: f64, total: f64) -> Result<()> {
    if mass < total * (1.0 - GRID_MASS_TOL) {
        Err(Error::GridTooSmall { mass, total })
    } else {
        Ok(())
    }
}

/// Tabulated outcome density with its normalised trapezoid CDF.
#[derive(Clone, Debug)]
pub struct DensityTable {
    grid: QuadratureGrid,
    values: Vec<f64>,
    cdf: Vec<f64>,
    total: f64,
}

impl DensityTable {
    pub fn from_values(grid: QuadratureGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::LengthMismatch { what: "density table", left: values.len(), right: grid.points() });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("density", "values must be finite and non-negative"));
        }
        let h = grid.spacing();
        let mut cdf = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::invalid("density", "integrates to zero"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(DensityTable { grid, values, cdf, total: acc })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral of the tabulated density.
    pub fn integral(&self) -> f64 {
        self.total
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn mean(&self) -> f64 {
        let xs = self.grid.xs();
        let f: Vec<f64> = self.values.iter().zip(&xs).map(|(p, x)| p * x).collect();
        self.grid.integrate(&f) / self.total
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let xs = self.grid.xs();
        let f: Vec<f64> = self.values.iter().zip(&xs).map(|(p, x)| p * (x - mu).powi(2)).collect();
        self.grid.integrate(&f) / self.total
    }

    /// Normalised density at `x` by linear interpolation.
    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.grid.x_min() || x > self.grid.x_max() {
            return 0.0;
        }
        let i = self.grid.cell(x);
        let f = (x - self.grid.x(i)) / self.grid.spacing();
        ((1.0 - f) * self.values[i] + f * self.values[i + 1]) / self.total
    }

    /// Inverse of the piecewise-linear CDF at `u ∈ [0, 1)`.
    pub fn sample_at(&self, u: f64) -> HomodyneOutcome {
        let last = self.cdf.len() - 1;
        let j = self.cdf.partition_point(|c| *c <= u).clamp(1, last);
        let i = j - 1;
        let width = self.cdf[j] - self.cdf[i];
        let frac = if width > 0.0 { ((u - self.cdf[i]) / width).clamp(0.0, 1.0) } else { 0.0 };
        let value = self.grid.x(i) + frac * self.grid.spacing();
        HomodyneOutcome { value, grid_index: i, pdf_at_value: self.density_at(value) }
    }

    /// Trapezoid mass of the region, with the partial cell at the boundary
    /// integrated under linear interpolation.
    pub fn region_mass(&self, region: Region) -> f64 {
        let below = |t: f64| -> f64 {
            if t <= self.grid.x_min() {
                return 0.0;
            }
            if t >= self.grid.x_max() {
                return self.total;
            }
            let i = self.grid.cell(t);
            let h = self.grid.spacing();
            let f = (t - self.grid.x(i)) / h;
            let pt = (1.0 - f) * self.values[i] + f * self.values[i + 1];
            self.cdf[i] * self.total + 0.5 * f * h * (self.values[i] + pt)
        };
        match region {
            Region::Below(t) => below(t),
            Region::AtOrAbove(t) => self.total - below(t),
            Region::Everything => self.total,
            Region::Nothing => 0.0,
        }
    }
}

impl AmplitudeTable {
    /// `p(x) = Σₘ |A(x)[m]|²` on the grid.
    pub fn outcome_pdf(&self) -> Result<DensityTable> {
        DensityTable::from_values(self.grid, density_values(self))
    }
}

pub fn outcome_pdf(amp: &AmplitudeTable) -> Result<DensityTable> {
    amp.outcome_pdf()
}

/// Draws one outcome by inverse-CDF sampling of the tabulated density.
pub fn sample_outcome<R: Rng + ?Sized>(density: &DensityTable, rng: &mut R) -> HomodyneOutcome {
    density.sample_at(rng.random::<f64>())
}

/// Normalised state of the unmeasured mode after observing `outcome`.
pub fn collapse(amp: &AmplitudeTable, outcome: f64) -> Result<ModeState> {
    collapse_amplitudes(amp.amplitudes_at(outcome), outcome)
}

fn collapse_amplitudes(a: Vec<C64>, outcome: f64) -> Result<ModeState> {
    let p: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    if !(p > ZERO_DENSITY) || !p.is_finite() {
        return Err(Error::ZeroDensity { value: outcome, density: p });
    }
    let s = 1.0 / p.sqrt();
    ModeState::from_coeffs(a.into_iter().map(|c| c * s).collect())
}

/// Exact homodyne marginal held as the real part of a reduced density
/// matrix in the number basis.
#[derive(Clone, Debug)]
pub struct QuadratureMarginal {
    dim: usize,
    matrix: Vec<f64>,
    total: f64,
}

impl QuadratureMarginal {
    pub fn of_mode(state: &ModeState, phi: HomodynePhase) -> Self {
        Self::from_projector(&Projector::from_mode(state, phi))
    }

    /// Marginal of the measured port of a two-mode state.
    pub fn of_two_mode(state: &TwoModeState, measured: MeasuredMode, phi: HomodynePhase) -> Self {
        Self::from_projector(&Projector::new(state, measured, phi))
    }

    fn from_projector(p: &Projector) -> Self {
        let matrix = p.marginal_matrix();
        let d = p.dim;
        let total = (0..d).map(|n| matrix[n * d + n]).sum();
        QuadratureMarginal { dim: d, matrix, total }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total probability (the state's squared norm).
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let chi = crate::hermite::hermite_functions(x, self.dim);
        self.pdf_with(&chi)
    }

    fn pdf_with(&self, chi: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for m in 0..d {
            let row = &self.matrix[m * d..(m + 1) * d];
            acc += chi[m] * row.iter().zip(chi).map(|(r, c)| r * c).sum::<f64>();
        }
        acc.max(0.0)
    }

    /// Unnormalised mass below `t`.
    pub fn cdf(&self, t: f64, ws: &mut PartialOverlaps) -> f64 {
        ws.evaluate(t);
        ws.contract(&self.matrix)
    }

    pub fn region_mass(&self, region: Region, ws: &mut PartialOverlaps) -> f64 {
        match region {
            Region::Below(t) => self.cdf(t, ws),
            Region::AtOrAbove(t) => self.total - self.cdf(t, ws),
            Region::Everything => self.total,
            Region::Nothing => 0.0,
        }
    }

    pub fn workspace(&self) -> PartialOverlaps {
        PartialOverlaps::new(self.dim)
    }

    /// Fails when the grid misses more than [`GRID_MASS_TOL`] of the mass.
    pub fn check_grid(&self, grid: &QuadratureGrid, ws: &mut PartialOverlaps) -> Result<()> {
        let mass = self.cdf(grid.x_max(), ws) - self.cdf(grid.x_min(), ws);
        check_grid_mass(mass, self.total)
    }

    /// Inverse-CDF sample restricted to the grid span, solved by bracketed
    /// Newton iteration on the closed-form CDF.
    pub fn sample_at(&self, u: f64, grid: &QuadratureGrid, ws: &mut PartialOverlaps) -> HomodyneOutcome {
        let (mut lo, mut hi) = (grid.x_min(), grid.x_max());
        let f_lo = self.cdf(lo, ws);
        let f_hi = self.cdf(hi, ws);
        let target = f_lo + u * (f_hi - f_lo);
        let mut chi = vec![0.0; self.dim];
        let mut t = 0.0f64.clamp(lo, hi);
        for _ in 0..200 {
            let f = self.cdf(t, ws) - target;
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            hermite_into(t, &mut chi);
            let p = self.pdf_with(&chi);
            let newton = t - f / p;
            let next = if p > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let done = (next - t).abs() < 1e-13 * (1.0 + t.abs()) || hi - lo < 1e-13;
            t = next;
            if done {
                break;
            }
        }
        hermite_into(t, &mut chi);
        let norm = f_hi - f_lo;
        HomodyneOutcome { value: t, grid_index: grid.cell(t), pdf_at_value: self.pdf_with(&chi) / norm }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        grid: &QuadratureGrid,
        ws: &mut PartialOverlaps,
        rng: &mut R,
    ) -> HomodyneOutcome {
        self.sample_at(rng.random::<f64>(), grid, ws)
    }
}

/// Conditional unmeasured-mode state after an exact outcome, without any
/// grid tabulation.
pub fn collapse_exact(
    state: &TwoModeState,
    measured: MeasuredMode,
    phi: HomodynePhase,
    outcome: f64,
) -> Result<ModeState> {
    let p = Projector::new(state, measured, phi);
    let mut chi = vec![0.0; p.dim];
    hermite_into(outcome, &mut chi);
    let mut a = vec![C64::new(0.0, 0.0); p.rows()];
    p.apply(&chi, &mut a);
    collapse_amplitudes(a, outcome)
}

/// Probability that a phase-0 homodyne of `state` falls in the region where
/// `truth` is misclassified by `rule`.
pub fn error_mass(state: &ModeState, rule: &DecisionRule, truth: Truth, grid: &QuadratureGrid) -> Result<f64> {
    region_error_mass(state, rule.wrong_region(truth), grid)
}

/// [`error_mass`] for an arbitrary half-line region, by closed-form partial
/// overlaps.
pub fn region_error_mass(state: &ModeState, region: Region, grid: &QuadratureGrid) -> Result<f64> {
    let marginal = QuadratureMarginal::of_mode(state, HomodynePhase(0.0));
    let mut ws = marginal.workspace();
    marginal.check_grid(grid, &mut ws)?;
    Ok(marginal.region_mass(region, &mut ws))
}

/// Grid-quadrature counterpart of [`error_mass`].
pub fn error_mass_trapezoid(state: &ModeState, rule: &DecisionRule, truth: Truth, table: &HermiteTable) -> Result<f64> {
    let amp = quad_amplitude_mode(state, HomodynePhase(0.0), table)?;
    Ok(amp.outcome_pdf()?.region_mass(rule.wrong_region(truth)))
}
