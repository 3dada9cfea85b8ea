//! Periodic coefficient tensors `a_{ijαβ}(y)`.
//!
//! A tensor at one point is stored as the `(md)×(md)` flux matrix acting on
//! gradients laid out as `P[α d + i] = ∂_i u_α`: entry
//! `(β d + j, α d + i)` holds `a_{ijαβ}`, so the flux is `σ = A P` and the
//! bilinear form is `σ · ∇w'`. With this layout the transpose tensor
//! `a_{jiβα}` is the plain matrix transpose.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat position of `(component, direction)` in a gradient vector.
#[inline]
pub fn flat_index(dim: usize, direction: usize, component: usize) -> usize {
    component * dim + direction
}

/// Coefficient tensor at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTensor<S> {
    pub dim: usize,
    pub components: usize,
    /// Row-major `(md)×(md)` flux matrix.
    pub data: Vec<S>,
}

impl<S: Scalar> CoefTensor<S> {
    pub fn zeros(dim: usize, components: usize) -> Self {
        let n = dim * components;
        Self {
            dim,
            components,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.dim * self.components
    }

    /// `a_{ijαβ}`.
    pub fn get(&self, i: usize, j: usize, alpha: usize, beta: usize) -> S {
        let n = self.size();
        self.data[flat_index(self.dim, j, beta) * n + flat_index(self.dim, i, alpha)]
    }

    pub fn set(&mut self, i: usize, j: usize, alpha: usize, beta: usize, value: S) {
        let n = self.size();
        self.data[flat_index(self.dim, j, beta) * n + flat_index(self.dim, i, alpha)] = value;
    }

    pub fn transpose(&self) -> Self {
        let n = self.size();
        let mut data = vec![S::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.data[r * n + c];
            }
        }
        Self {
            dim: self.dim,
            components: self.components,
            data,
        }
    }

    pub fn to_complex_matrix(&self) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, c| self.data[r * n + c].to_complex())
    }
}

/// A coefficient field on `R^d`, periodic with period cell `[0,1)^d`.
pub trait CoefficientField<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;

    /// Writes the flux matrix at `y` into `out` (length `(md)^2`).
    fn eval_into(&self, y: &[f64], out: &mut [S]);

    /// Lower bound `c` with `Re⟨A(y)P, P⟩ ≥ c|P|²` for all `y` and `P`.
    fn ellipticity_constant(&self) -> f64;

    fn description(&self) -> String {
        String::new()
    }

    fn eval(&self, y: &[f64]) -> CoefTensor<S> {
        let mut t = CoefTensor::zeros(self.dim(), self.components());
        self.eval_into(y, &mut t.data);
        t
    }
}

impl<S: Scalar, F: CoefficientField<S> + ?Sized> CoefficientField<S> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn components(&self) -> usize {
        (**self).components()
    }
    fn eval_into(&self, y: &[f64], out: &mut [S]) {
        (**self).eval_into(y, out)
    }
    fn ellipticity_constant(&self) -> f64 {
        (**self).ellipticity_constant()
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

impl<S: Scalar> CoefficientField<S> for Box<dyn CoefficientField<S>> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn components(&self) -> usize {
        (**self).components()
    }
    fn eval_into(&self, y: &[f64], out: &mut [S]) {
        (**self).eval_into(y, out)
    }
    fn ellipticity_constant(&self) -> f64 {
        (**self).ellipticity_constant()
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

/// The transposed field `a_{jiβα}`.
pub struct Transposed<F>(pub F);

impl<S: Scalar, F: CoefficientField<S>> CoefficientField<S> for Transposed<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn components(&self) -> usize {
        self.0.components()
    }
    fn eval_into(&self, y: &[f64], out: &mut [S]) {
        let n = self.dim() * self.components();
        self.0.eval_into(y, out);
        for r in 0..n {
            for c in r + 1..n {
                out.swap(r * n + c, c * n + r);
            }
        }
    }
    fn ellipticity_constant(&self) -> f64 {
        // the Hermitian part of A and Aᵀ have the same spectrum for real A;
        // for complex A it is the conjugate matrix, again the same spectrum
        self.0.ellipticity_constant()
    }
    fn description(&self) -> String {
        format!("transpose of ({})", self.0.description())
    }
}

/// Closure-backed field.
pub struct FnField<S, G> {
    dim: usize,
    components: usize,
    ellipticity: f64,
    description: String,
    f: G,
    _marker: std::marker::PhantomData<fn() -> S>,
}

impl<S, G> FnField<S, G>
where
    S: Scalar,
    G: Fn(&[f64], &mut [S]) + Send + Sync,
{
    pub fn new(dim: usize, components: usize, ellipticity: f64, f: G) -> Self {
        Self {
            dim,
            components,
            ellipticity,
            description: String::from("closure field"),
            f,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }
}

impl<S, G> CoefficientField<S> for FnField<S, G>
where
    S: Scalar,
    G: Fn(&[f64], &mut [S]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn eval_into(&self, y: &[f64], out: &mut [S]) {
        (self.f)(y, out)
    }
    fn ellipticity_constant(&self) -> f64 {
        self.ellipticity
    }
    fn description(&self) -> String {
        self.description.clone()
    }
}

/// Constant field `A(y) = A₀`.
#[derive(Debug, Clone)]
pub struct ConstantField<S> {
    tensor: CoefTensor<S>,
    ellipticity: f64,
}

impl<S: Scalar> ConstantField<S> {
    pub fn new(tensor: CoefTensor<S>) -> Result<Self> {
        let ellipticity = hermitian_part_min_eigenvalue(&tensor);
        Ok(Self {
            tensor,
            ellipticity,
        })
    }

    pub fn tensor(&self) -> &CoefTensor<S> {
        &self.tensor
    }
}

impl<S: Scalar> CoefficientField<S> for ConstantField<S> {
    fn dim(&self) -> usize {
        self.tensor.dim
    }
    fn components(&self) -> usize {
        self.tensor.components
    }
    fn eval_into(&self, _y: &[f64], out: &mut [S]) {
        out.copy_from_slice(&self.tensor.data);
    }
    fn ellipticity_constant(&self) -> f64 {
        self.ellipticity
    }
    fn description(&self) -> String {
        "constant".into()
    }
}

/// Smallest eigenvalue of `(A + Aᴴ)/2`, i.e. `min Re⟨AP,P⟩/|P|²`.
pub fn hermitian_part_min_eigenvalue<S: Scalar>(t: &CoefTensor<S>) -> f64 {
    let a = t.to_complex_matrix();
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}

/// Points per axis used by the sampled checks in dimension `dim`.
pub fn default_sampling(dim: usize) -> usize {
    match dim {
        1 => 512,
        2 => 48,
        _ => 16,
    }
}

/// Sampled ellipticity check on a uniform grid of `per_axis^d` points of the
/// period cell. Returns the smallest Hermitian-part eigenvalue seen, or
/// `NonElliptic` with the violating point.
pub fn check_ellipticity<S: Scalar, F: CoefficientField<S> + ?Sized>(
    field: &F,
    per_axis: usize,
) -> Result<f64> {
    let d = field.dim();
    let count = per_axis.pow(d as u32);
    let mut worst = f64::INFINITY;
    let mut y = vec![0.0; d];
    let mut t = CoefTensor::zeros(d, field.components());
    for flat in 0..count {
        let mut rem = flat;
        for yi in y.iter_mut() {
            *yi = (rem % per_axis) as f64 / per_axis as f64 + 0.5 / per_axis as f64;
            rem /= per_axis;
        }
        field.eval_into(&y, &mut t.data);
        if let Some(bad) = t.data.iter().find(|v| !v.is_finite()) {
            let _ = bad;
            return Err(Error::NonFiniteCoefficient { point: y.clone() });
        }
        let ev = hermitian_part_min_eigenvalue(&t);
        if ev <= 0.0 {
            return Err(Error::NonElliptic {
                point: y.clone(),
                eigenvalue: ev,
            });
        }
        worst = worst.min(ev);
    }
    Ok(worst)
}
