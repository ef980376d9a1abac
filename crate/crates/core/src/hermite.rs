//! Normalised Hermite functions `χₙ(x) = ⟨x|n⟩` and their partial overlaps.

use std::f64::consts::PI;

use libm::erfc;

use crate::homodyne::QuadratureGrid;

/// Fills `out[n] = χₙ(x)` using
/// `χₙ = √(2/n)·x·χₙ₋₁ − √((n−1)/n)·χₙ₋₂`, `χ₀ = π^{−1/4} e^{−x²/2}`.
pub fn hermite_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 2..out.len() {
        let nf = n as f64;
        out[n] = (2.0 / nf).sqrt() * x * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
    }
}

pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    hermite_into(x, &mut out);
    out
}

/// `χₙ(xᵢ)` for every grid point, stored point-major.
#[derive(Clone, Debug)]
pub struct HermiteTable {
    grid: QuadratureGrid,
    dim: usize,
    values: Vec<f64>,
}

impl HermiteTable {
    pub fn new(grid: QuadratureGrid, dim: usize) -> Self {
        let mut values = vec![0.0; grid.points() * dim];
        for (i, row) in values.chunks_mut(dim.max(1)).enumerate().take(grid.points()) {
            hermite_into(grid.x(i), row);
        }
        HermiteTable { grid, dim, values }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chi(&self, n: usize, i: usize) -> f64 {
        self.values[i * self.dim + n]
    }

    /// `χ₀(xᵢ) … χ_{D−1}(xᵢ)`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest `|Σᵢ wᵢ χₘ(xᵢ)χₙ(xᵢ) − δₘₙ|` under trapezoid weights.
    pub fn orthonormality_error(&self) -> f64 {
        let w = self.grid.trapezoid_weights();
        let d = self.dim;
        let mut gram = vec![0.0; d * d];
        for (i, wi) in w.iter().enumerate() {
            let row = self.row(i);
            for m in 0..d {
                let a = wi * row[m];
                for n in m..d {
                    gram[m * d + n] += a * row[n];
                }
            }
        }
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in m..d {
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((gram[m * d + n] - target).abs());
            }
        }
        worst
    }
}

/// `I_{mn}(t) = ∫_{−∞}^{t} χₘ χₙ dx` for `m, n < dim`, in closed form.
///
/// Off the diagonal the Hermite equation `χₙ'' = (x² − 2n − 1)χₙ` gives
/// `I_{mn}(t) = [χₘχₙ' − χₙχₘ'](t) / (2(m − n))`. The diagonal follows from
/// `I₀₀(t) = erfc(−t)/2` and
/// `√n·I_{nn} = √(n+1)·I_{n−1,n+1} + √n·I_{n−1,n−1} − √(n−1)·I_{n,n−2}`.
#[derive(Clone, Debug)]
pub struct PartialOverlaps {
    dim: usize,
    chi: Vec<f64>,
    dchi: Vec<f64>,
    inv_gap: Vec<f64>,
    /// `(dim+1)²` row-major; only the leading `dim × dim` block is exposed.
    full: Vec<f64>,
}

impl PartialOverlaps {
    pub fn new(dim: usize) -> Self {
        let ext = dim + 1;
        let mut inv_gap = vec![0.0; 2 * ext + 1];
        for (i, g) in inv_gap.iter_mut().enumerate() {
            let diff = i as f64 - ext as f64;
            if diff != 0.0 {
                *g = 1.0 / (2.0 * diff);
            }
        }
        PartialOverlaps { dim, chi: vec![0.0; ext + 1], dchi: vec![0.0; ext], inv_gap, full: vec![0.0; ext * ext] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Recomputes the overlaps at `t`.
    pub fn evaluate(&mut self, t: f64) {
        let ext = self.dim + 1;
        if t == f64::INFINITY || t == f64::NEG_INFINITY {
            let v = if t > 0.0 { 1.0 } else { 0.0 };
            self.full.iter_mut().for_each(|x| *x = 0.0);
            for n in 0..ext {
                self.full[n * ext + n] = v;
            }
            return;
        }
        hermite_into(t, &mut self.chi);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for n in 0..ext {
            let lower = if n > 0 { (n as f64).sqrt() * self.chi[n - 1] } else { 0.0 };
            self.dchi[n] = s * (lower - ((n + 1) as f64).sqrt() * self.chi[n + 1]);
        }
        for m in 0..ext {
            for n in (m + 1)..ext {
                let w = self.chi[m] * self.dchi[n] - self.chi[n] * self.dchi[m];
                let v = w * self.inv_gap[ext + m - n];
                self.full[m * ext + n] = v;
                self.full[n * ext + m] = v;
            }
        }
        self.full[0] = 0.5 * erfc(-t);
        for n in 1..self.dim {
            let nf = n as f64;
            let mut acc = ((n + 1) as f64).sqrt() * self.full[(n - 1) * ext + n + 1]
                + nf.sqrt() * self.full[(n - 1) * ext + n - 1];
            if n >= 2 {
                acc -= ((n - 1) as f64).sqrt() * self.full[n * ext + n - 2];
            }
            self.full[n * ext + n] = acc / nf.sqrt();
        }
    }

    /// `∫_t^∞ χₙ²`.
    pub fn tail_mass(n: usize, t: f64) -> f64 {
        let mut ov = PartialOverlaps::new(n + 1);
        ov.evaluate(t);
        1.0 - ov.get(n, n)
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.full[m * (self.dim + 1) + n]
    }

    /// `Σₘₙ R_{mn} I_{mn}(t)` for a real symmetric `dim × dim` matrix `R`
    /// (row-major). Call [`PartialOverlaps::evaluate`] first.
    pub fn contract(&self, r: &[f64]) -> f64 {
        let d = self.dim;
        let ext = d + 1;
        let mut acc = 0.0;
        for m in 0..d {
            let rrow = &r[m * d..(m + 1) * d];
            let irow = &self.full[m * ext..m * ext + d];
            acc += rrow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    /// `Re(a† I a)` for `a = re + i·im`, i.e. the mass below `t` of the
    /// wavefunction `Σ aₙ χₙ`.
    pub fn quadratic(&self, re: &[f64], im: &[f64]) -> f64 {
        let ext = self.dim + 1;
        let mut acc = 0.0;
        for m in 0..self.dim.min(re.len()) {
            let irow = &self.full[m * ext..m * ext + re.len()];
            let r: f64 = irow.iter().zip(re).map(|(a, b)| a * b).sum();
            let i: f64 = irow.iter().zip(im).map(|(a, b)| a * b).sum();
            acc += re[m] * r + im[m] * i;
        }
        acc
    }

    /// The leading `dim × dim` block, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let d = self.dim;
        let ext = d + 1;
        (0..d).flat_map(|m| self.full[m * ext..m * ext + d].iter().copied()).collect()
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi[..self.dim]
    }
}
