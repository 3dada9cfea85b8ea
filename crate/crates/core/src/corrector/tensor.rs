//! The effective tensor with its Monte-Carlo error bars.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolveStats;

/// Run parameters recorded with every effective tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationMeta {
    pub realizations: usize,
    pub supercell_size: usize,
    pub cells_per_unit: usize,
    pub h: f64,
    pub theta: f64,
    pub seed: u64,
    pub realization_seeds: Vec<u64>,
    pub tol: f64,
    pub quadrature_order: usize,
    /// `1 / det E[∫_Q ∇Φ]` estimated from the same realizations.
    pub c_phi: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
    /// Solver fallbacks, one note per affected solve.
    pub fallbacks: Vec<String>,
}

impl HomogenizationMeta {
    pub(crate) fn record(&mut self, stats: &SolveStats) {
        self.max_iterations = self.max_iterations.max(stats.iterations);
        self.max_residual = self.max_residual.max(stats.residual);
        if let Some(note) = &stats.fallback {
            self.fallbacks.push(note.clone());
        }
    }
}

/// Effective `(md)×(md)` flux matrix, row `β d + j`, column `α d + i`
/// (entry `a*_{ijαβ}`). Real tensors carry zero imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedTensor {
    pub d: usize,
    pub m: usize,
    pub complex: bool,
    /// Row-major `[re, im]` pairs.
    pub values: Vec<Complex64>,
    /// Entrywise standard error (`hypot` of real and imaginary parts).
    pub stderr: Vec<f64>,
    pub meta: HomogenizationMeta,
}

impl HomogenizedTensor {
    pub fn size(&self) -> usize {
        self.d * self.m
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.size() + col]
    }

    pub fn re(&self, row: usize, col: usize) -> f64 {
        self.get(row, col).re
    }

    /// `a*_{ijαβ}`.
    pub fn coefficient(&self, i: usize, j: usize, alpha: usize, beta: usize) -> Complex64 {
        self.get(beta * self.d + j, alpha * self.d + i)
    }

    pub fn stderr_at(&self, row: usize, col: usize) -> f64 {
        self.stderr[row * self.size() + col]
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, c| self.get(r, c))
    }

    pub fn real_matrix(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, c| self.re(r, c))
    }

    /// `a*_{jiβα}`: the plain matrix transpose.
    pub fn transpose(&self) -> Self {
        let n = self.size();
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                out.values[r * n + c] = self.values[c * n + r];
                out.stderr[r * n + c] = self.stderr[c * n + r];
            }
        }
        out
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `A* − A*ᵀ`.
    pub fn asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    /// Smallest eigenvalue of the Hermitian part, `min Re⟨A*P,P⟩/|P|²`.
    pub fn ellipticity(&self) -> f64 {
        let a = self.matrix();
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Column headers for [`Self::csv_row`].
    pub fn csv_header(&self, parameter: &str) -> String {
        let n = self.size();
        let mut cols = vec![parameter.to_string()];
        for part in ["re", "im"] {
            for r in 0..n {
                for c in 0..n {
                    cols.push(format!("{part}_{r}_{c}"));
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                cols.push(format!("stderr_{r}_{c}"));
            }
        }
        cols.join(",")
    }

    pub fn csv_row(&self, parameter: f64) -> String {
        let mut cols = vec![format!("{parameter:.17e}")];
        cols.extend(self.values.iter().map(|v| format!("{:.17e}", v.re)));
        cols.extend(self.values.iter().map(|v| format!("{:.17e}", v.im)));
        cols.extend(self.stderr.iter().map(|v| format!("{v:.17e}")));
        cols.join(",")
    }
}

/// CSV table of a parameter sweep (θ, N, …): one row per tensor.
pub fn sweep_csv(parameter: &str, values: &[f64], tensors: &[HomogenizedTensor]) -> String {
    let mut out = String::new();
    if let Some(first) = tensors.first() {
        out.push_str(&first.csv_header(parameter));
        out.push('\n');
    }
    for (v, t) in values.iter().zip(tensors) {
        out.push_str(&t.csv_row(*v));
        out.push('\n');
    }
    out
}
