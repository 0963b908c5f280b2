//! Uniform grids on the n-torus and the discrete Fourier pair.
//!
//! A grid has M nodes per axis at x = m/M, m = 0..M-1, enumerated
//! lexicographically with the first coordinate most significant. The forward
//! transform evaluates u_hat(x) = sum_k exp(-2*pi*i k.x) u(k) at the nodes;
//! the inverse applies the quadrature u(k) = (1/M^n) sum_m exp(2*pi*i k.x_m)
//! u_hat(x_m), which is exact when M >= 2N+1. Both are implemented as plain
//! sums with phases reduced modulo M before evaluation, so each phase factor
//! is computed from an angle in [0, 2*pi) at full precision.
//!
//! The derivative operator implemented here is spectral: a grid function is
//! decomposed into modes exp(2*pi*i q.x) with q in the symmetric frequency
//! window, the mode with frequency q on axis j is multiplied by the falling
//! factorial q(q-1)...(q-l+1), and the samples are resynthesized. No finite
//! differences in x are involved.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticeFunction};
use crate::numeric::pairwise_sum_complex;

/// The uniform grid {(m_1/M, .., m_n/M) : 0 <= m_j < M} on the n-torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
    m: usize,
}

impl TorusGrid {
    /// Creates a grid with M nodes per axis. Requires `n >= 1`, `m >= 1`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("grid dimension must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::Parameter("grid needs at least one node per axis".into()));
        }
        let mut count: u128 = 1;
        for _ in 0..n {
            count = count
                .checked_mul(m as u128)
                .filter(|&c| c <= u128::from(u32::MAX))
                .ok_or_else(|| {
                    Error::Parameter(format!("grid (n={n}, M={m}) has too many nodes"))
                })?;
        }
        Ok(Self { n, m })
    }

    /// The default grid paired with a box: M is 2*(2N+1) rounded up to the
    /// next odd integer, comfortably above the sampling threshold 2N+1.
    pub fn default_for(domain: &LatticeBox) -> Self {
        let m = 2 * (2 * domain.radius() as usize + 1) + 1;
        Self { n: domain.n(), m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes per axis, M.
    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    /// Total node count M^n.
    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight 1/M^n of each node.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// The node multi-index at an enumeration position.
    pub fn node_index(&self, mut idx: usize) -> Vec<usize> {
        assert!(idx < self.len(), "node index {idx} out of range");
        let mut m = vec![0usize; self.n];
        for j in (0..self.n).rev() {
            m[j] = idx % self.m;
            idx /= self.m;
        }
        m
    }

    /// The node coordinates m/M at an enumeration position.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.node_index(idx).iter().map(|&c| c as f64 / self.m as f64).collect()
    }

    /// The symmetric per-axis frequency window of the grid.
    ///
    /// Odd M gives -(M-1)/2 ..= (M-1)/2; even M keeps the same count by
    /// assigning the ambiguous half-rate mode to +M/2, giving
    /// -(M/2-1) ..= M/2.
    pub fn mode_window(&self) -> (i64, i64) {
        let m = self.m as i64;
        if m % 2 == 1 {
            (-(m - 1) / 2, (m - 1) / 2)
        } else {
            (-(m / 2 - 1), m / 2)
        }
    }
}

/// Complex samples on a [`TorusGrid`], stored in node enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusSamples {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl TorusSamples {
    pub fn zeros(grid: TorusGrid) -> Self {
        let len = grid.len();
        Self { grid, values: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "sample count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds samples by evaluating f at every node.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Serializes to `{"n": .., "M": .., "values": [[re, im], ..]}` in node
    /// enumeration order.
    pub fn to_json(&self) -> String {
        let repr = TorusSamplesRepr {
            n: self.grid.n,
            m: self.grid.m,
            values: self.values.iter().map(|z| (z.re, z.im)).collect(),
        };
        serde_json::to_string(&repr).expect("serialization cannot fail")
    }

    /// Parses the interchange form, rejecting sample arrays whose length
    /// does not match the declared grid.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: TorusSamplesRepr = serde_json::from_str(text)?;
        let grid = TorusGrid::new(repr.n, repr.m)?;
        let values = repr.values.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        Self::from_values(grid, values)
    }
}

#[derive(Serialize, Deserialize)]
struct TorusSamplesRepr {
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    values: Vec<(f64, f64)>,
}

/// Roots of unity exp(-2*pi*i q / M) for q = 0..M-1.
pub(crate) fn twiddle_table(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|q| {
            let angle = -2.0 * std::f64::consts::PI * q as f64 / m as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

/// k . m reduced into 0..M-1, valid for negative components.
pub(crate) fn phase_index(k: &[i64], node: &[usize], m: usize) -> usize {
    let m_i = m as i64;
    let mut acc: i64 = 0;
    for (kj, &mj) in k.iter().zip(node) {
        acc = (acc + (kj.rem_euclid(m_i)) * (mj as i64)) % m_i;
    }
    acc as usize
}

fn check_sampling(domain: &LatticeBox, grid: &TorusGrid) -> Result<()> {
    if domain.n() != grid.n {
        return Err(Error::Dimension(format!(
            "box dimension {} does not match grid dimension {}",
            domain.n(),
            grid.n
        )));
    }
    let needed = 2 * domain.radius() as usize + 1;
    if grid.m < needed {
        return Err(Error::Resolution(format!(
            "grid with M = {} undersamples the box with N = {}: the sampling rule requires \
             M >= 2N+1 = {}",
            grid.m,
            domain.radius(),
            needed
        )));
    }
    Ok(())
}

/// Evaluates u_hat(x) = sum_k exp(-2*pi*i k.x) u(k) at every grid node.
pub fn dft(u: &LatticeFunction, grid: &TorusGrid) -> Result<TorusSamples> {
    check_sampling(u.domain(), grid)?;
    let m = grid.m;
    let table = twiddle_table(m);
    let points: Vec<Vec<i64>> = u.domain().points().collect();
    let mut terms = vec![Complex64::new(0.0, 0.0); points.len()];
    let mut out = Vec::with_capacity(grid.len());
    for node_idx in 0..grid.len() {
        let node = grid.node_index(node_idx);
        for (i, k) in points.iter().enumerate() {
            terms[i] = u.values()[i] * table[phase_index(k, &node, m)];
        }
        out.push(pairwise_sum_complex(&terms));
    }
    TorusSamples::from_values(grid.clone(), out)
}

/// Recovers u(k) = (1/M^n) sum_m exp(2*pi*i k.x_m) f(x_m) on the box.
///
/// Exact (up to rounding) whenever f is the transform of a function on a box
/// the grid resolves.
pub fn idft(f: &TorusSamples, domain: &LatticeBox) -> Result<LatticeFunction> {
    check_sampling(domain, &f.grid)?;
    let m = f.grid.m;
    let table = twiddle_table(m);
    let weight = f.grid.weight();
    let nodes: Vec<Vec<usize>> = (0..f.grid.len()).map(|i| f.grid.node_index(i)).collect();
    let mut terms = vec![Complex64::new(0.0, 0.0); nodes.len()];
    let mut out = Vec::with_capacity(domain.len());
    for k_idx in 0..domain.len() {
        let k = domain.point(k_idx);
        for (i, node) in nodes.iter().enumerate() {
            // Conjugate phase: index M - p picks exp(+2*pi*i p/M).
            let p = phase_index(&k, node, m);
            let conj_idx = if p == 0 { 0 } else { m - p };
            terms[i] = f.values[i] * table[conj_idx];
        }
        out.push(pairwise_sum_complex(&terms) * weight);
    }
    LatticeFunction::from_values(domain.clone(), out)
}

/// Falling factorial q(q-1)...(q-l+1), with the empty product equal to 1.
pub fn falling_factorial(q: i64, l: usize) -> f64 {
    let mut acc = 1.0f64;
    for r in 0..l as i64 {
        acc *= (q - r) as f64;
    }
    acc
}

/// Applies the spectral derivative of order `beta[j]` along each axis j.
///
/// On the mode exp(2*pi*i q.x) the operator acts as multiplication by the
/// product of falling factorials of the q_j, matching the normalized
/// derivative (2*pi*i)^(-1) d/dx_j shifted by 0, 1, .., l-1. Modes are taken
/// from the grid's symmetric frequency window.
pub fn falling_factorial_derivative(f: &TorusSamples, beta: &[usize]) -> Result<TorusSamples> {
    if beta.len() != f.grid.n {
        return Err(Error::Dimension(format!(
            "derivative order has {} components, grid has dimension {}",
            beta.len(),
            f.grid.n
        )));
    }
    let mut current = f.clone();
    for (axis, &order) in beta.iter().enumerate() {
        if order > 0 {
            current = derivative_along_axis(&current, axis, order);
        }
    }
    Ok(current)
}

fn derivative_along_axis(f: &TorusSamples, axis: usize, order: usize) -> TorusSamples {
    let grid = f.grid.clone();
    let m = grid.m;
    let table = twiddle_table(m);
    let (q_lo, q_hi) = grid.mode_window();
    let weights: Vec<f64> = (q_lo..=q_hi).map(|q| falling_factorial(q, order)).collect();

    let stride = m.pow((grid.n - 1 - axis) as u32);
    let outer = grid.len() / (m * stride);
    let mut out = f.values.clone();
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut modes = vec![Complex64::new(0.0, 0.0); m];
    let mut terms = vec![Complex64::new(0.0, 0.0); m];
    for block in 0..outer {
        for offset in 0..stride {
            let base = block * m * stride + offset;
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = f.values[base + j * stride];
            }
            // Analysis: c_q = (1/M) sum_j line[j] exp(-2*pi*i q j / M).
            for (qi, q) in (q_lo..=q_hi).enumerate() {
                for (j, &v) in line.iter().enumerate() {
                    let p = (q.rem_euclid(m as i64) as usize * j) % m;
                    terms[j] = v * table[p];
                }
                modes[qi] = pairwise_sum_complex(&terms) / m as f64 * weights[qi];
            }
            // Synthesis: line[j] = sum_q c_q exp(2*pi*i q j / M).
            for j in 0..m {
                for (qi, q) in (q_lo..=q_hi).enumerate() {
                    let p = (q.rem_euclid(m as i64) as usize * j) % m;
                    let conj_idx = if p == 0 { 0 } else { m - p };
                    terms[qi] = modes[qi] * table[conj_idx];
                }
                out[base + j * stride] = pairwise_sum_complex(&terms);
            }
        }
    }
    TorusSamples { grid, values: out }
}
