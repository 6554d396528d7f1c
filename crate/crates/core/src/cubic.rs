//! Cubic forms as fully symmetric trilinear tensors and the algebra `V(u)`.
//!
//! The canonical store keeps one polynomial coefficient per sorted index
//! triple `i <= j <= k`. The tensor entry `T_{ijk}` is that coefficient times
//! the multiplicity `6 / |orbit|` of the triple:
//!
//! | pattern     | permutations | `T` entry    |
//! |-------------|--------------|--------------|
//! | `a < b < c` | 6            | `coeff`      |
//! | `a = b < c` | 3            | `2 * coeff`  |
//! | `a = b = c` | 1            | `6 * coeff`  |
//!
//! so that `u(x) = T(x, x, x) / 6 = sum coeff * x_i x_j x_k`. Keeping the
//! coefficient (not the tensor entry) makes `to_monomials` an exact inverse
//! of `from_monomials`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Element of `V = R^n` with the standard Euclidean inner product.
pub type AlgebraElement = DVector<f64>;

/// Sorted index triple `[i, j, k]` with `i <= j <= k`.
pub type Triple = [usize; 3];

/// Largest dimension for which a dense `n^3` tensor is materialized.
pub const DENSE_MAX_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("form dimension must be positive")]
    ZeroDimension,
    #[error("monomial index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("monomial {triple:?} is not sorted (expected i <= j <= k)")]
    UnsortedTriple { triple: Triple },
    #[error("non-finite coefficient {coeff} for monomial {triple:?}")]
    NonFinite { triple: Triple, coeff: f64 },
    #[error("dimension mismatch: form has dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed form file: {0}")]
    Malformed(String),
    #[error("cannot read form file {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Number of entries of `T` equal to `T_{ijk}` divided into 6.
fn multiplicity(t: &Triple) -> f64 {
    match (t[0] == t[1], t[1] == t[2]) {
        (true, true) => 6.0,
        (false, false) => 1.0,
        _ => 2.0,
    }
}

/// Distinct permutations of a sorted triple.
fn permutations(t: &Triple) -> Vec<Triple> {
    let [a, b, c] = *t;
    let mut perms = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    perms.sort_unstable();
    perms.dedup();
    perms
}

#[derive(Debug, Clone)]
pub struct CubicForm {
    dim: usize,
    coeffs: BTreeMap<Triple, f64>,
    dense: Option<Vec<f64>>,
    label: String,
}

impl PartialEq for CubicForm {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coeffs == other.coeffs
    }
}

impl CubicForm {
    /// Builds a form from `(sorted triple, coefficient)` pairs describing
    /// `u(x) = sum coeff * x_i x_j x_k`. Duplicate triples are summed and
    /// exact zeros are dropped.
    pub fn from_monomials<I>(dim: usize, terms: I) -> Result<Self, FormError>
    where
        I: IntoIterator<Item = (Triple, f64)>,
    {
        if dim == 0 {
            return Err(FormError::ZeroDimension);
        }
        let mut coeffs = BTreeMap::new();
        for (triple, coeff) in terms {
            if let Some(&index) = triple.iter().find(|&&i| i >= dim) {
                return Err(FormError::IndexOutOfRange { index, dim });
            }
            if !(triple[0] <= triple[1] && triple[1] <= triple[2]) {
                return Err(FormError::UnsortedTriple { triple });
            }
            if !coeff.is_finite() {
                return Err(FormError::NonFinite { triple, coeff });
            }
            *coeffs.entry(triple).or_insert(0.0) += coeff;
        }
        coeffs.retain(|_, c| *c != 0.0);
        Ok(Self::from_canonical(dim, coeffs, String::new()))
    }

    fn from_canonical(dim: usize, coeffs: BTreeMap<Triple, f64>, label: String) -> Self {
        let dense = (dim <= DENSE_MAX_DIM).then(|| {
            let mut t = vec![0.0; dim * dim * dim];
            for (triple, &coeff) in &coeffs {
                let value = multiplicity(triple) * coeff;
                for [a, b, c] in permutations(triple) {
                    t[(a * dim + b) * dim + c] = value;
                }
            }
            t
        });
        Self { dim, coeffs, dense, label }
    }

    /// The zero form on `R^dim`.
    pub fn zero(dim: usize) -> Result<Self, FormError> {
        Self::from_monomials(dim, std::iter::empty())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Sorted nonzero `(triple, coefficient)` list; inverse of
    /// [`CubicForm::from_monomials`].
    pub fn to_monomials(&self) -> Vec<(Triple, f64)> {
        self.coeffs.iter().map(|(t, &c)| (*t, c)).collect()
    }

    /// Tensor entry `T_{ijk}` for any index order.
    pub fn tensor_entry(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut t = [i, j, k];
        t.sort_unstable();
        self.coeffs.get(&t).map_or(0.0, |c| multiplicity(&t) * c)
    }

    /// Frobenius norm of the full tensor `T`.
    pub fn tensor_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(t, c)| {
                let value = multiplicity(t) * c;
                value * value * permutations(t).len() as f64
            })
            .sum::<f64>()
            .sqrt()
    }

    /// The form `factor * u`. Scaling the form scales the product of `V(u)`.
    pub fn scaled(&self, factor: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(t, c)| (*t, c * factor))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        Self::from_canonical(self.dim, coeffs, self.label.clone())
    }

    fn check(&self, x: &AlgebraElement) -> Result<(), FormError> {
        if x.len() != self.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    /// `u(x)`.
    pub fn evaluate(&self, x: &AlgebraElement) -> Result<f64, FormError> {
        self.check(x)?;
        Ok(self.coeffs.iter().map(|([i, j, k], c)| c * x[*i] * x[*j] * x[*k]).sum())
    }

    /// Full polarization `u(x, y, z) = T(x, y, z)`.
    pub fn polarize(
        &self,
        x: &AlgebraElement,
        y: &AlgebraElement,
        z: &AlgebraElement,
    ) -> Result<f64, FormError> {
        self.check(z)?;
        Ok(self.multiply(x, y)?.dot(z))
    }

    /// Product of `V(u)`: the unique `xy` with `<xy, z> = u(x, y, z)`.
    pub fn multiply(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, FormError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.product(x, y))
    }

    pub(crate) fn product(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        match &self.dense {
            Some(t) => {
                for i in 0..n {
                    if x[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        let w = x[i] * y[j];
                        if w == 0.0 {
                            continue;
                        }
                        let row = &t[(i * n + j) * n..(i * n + j + 1) * n];
                        for (o, &v) in out.iter_mut().zip(row) {
                            *o += w * v;
                        }
                    }
                }
            }
            None => {
                for (triple, c) in &self.coeffs {
                    let value = multiplicity(triple) * c;
                    for [a, b, k] in permutations(triple) {
                        out[k] += value * x[a] * y[b];
                    }
                }
            }
        }
        out
    }

    /// `x² = xx`.
    pub fn square(&self, x: &AlgebraElement) -> Result<AlgebraElement, FormError> {
        self.multiply(x, x)
    }

    /// Multiplication operator `L_x: y -> xy`, which equals the Hessian of
    /// `u` at `x`. The matrix is symmetric bitwise.
    pub fn mult_operator(&self, x: &AlgebraElement) -> Result<DMatrix<f64>, FormError> {
        self.check(x)?;
        Ok(self.operator(x))
    }

    pub(crate) fn operator(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let n = self.dim;
        let mut l = DMatrix::zeros(n, n);
        match &self.dense {
            Some(t) => {
                for i in 0..n {
                    let xi = x[i];
                    if xi == 0.0 {
                        continue;
                    }
                    let slab = &t[i * n * n..(i + 1) * n * n];
                    for j in 0..n {
                        for k in 0..n {
                            l[(j, k)] += xi * slab[j * n + k];
                        }
                    }
                }
            }
            None => {
                for (triple, c) in &self.coeffs {
                    let value = multiplicity(triple) * c;
                    for [a, b, k] in permutations(triple) {
                        l[(b, k)] += value * x[a];
                    }
                }
            }
        }
        l
    }

    /// `grad u(x) = x²/2`.
    pub fn gradient_u(&self, x: &AlgebraElement) -> Result<AlgebraElement, FormError> {
        Ok(self.multiply(x, x)? * 0.5)
    }

    /// `trace L_{e_i}` for every basis vector; `u` is harmonic iff all vanish.
    pub fn basis_traces(&self) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.tensor_entry(i, j, j)).sum()).collect()
    }

    pub fn to_file_format(&self) -> FormFile {
        FormFile {
            dim: self.dim,
            terms: self
                .coeffs
                .iter()
                .map(|(t, &coeff)| FormTerm { monomial: *t, coeff })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("form file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FormError> {
        let file: FormFile =
            serde_json::from_str(text).map_err(|e| FormError::Malformed(e.to_string()))?;
        Self::from_monomials(file.dim, file.terms.into_iter().map(|t| (t.monomial, t.coeff)))
    }

    pub fn from_path(path: &Path) -> Result<Self, FormError> {
        let text = fs::read_to_string(path).map_err(|e| FormError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self::from_json(&text)?.with_label(format!("file:{}", path.display())))
    }
}

/// On-disk form: `{"dim": n, "terms": [{"monomial": [i, j, k], "coeff": c}]}`
/// with 0-based sorted triples.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FormFile {
    pub dim: usize,
    pub terms: Vec<FormTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FormTerm {
    pub monomial: Triple,
    pub coeff: f64,
}

/// Accumulates monomials given in any index order.
#[derive(Debug, Default, Clone)]
pub(crate) struct MonomialSum {
    terms: BTreeMap<Triple, f64>,
}

impl MonomialSum {
    pub(crate) fn add(&mut self, i: usize, j: usize, k: usize, coeff: f64) {
        let mut t = [i, j, k];
        t.sort_unstable();
        *self.terms.entry(t).or_insert(0.0) += coeff;
    }

    /// Adds `coeff * l1(x) l2(x) l3(x)` for linear forms given as coefficient
    /// vectors.
    pub(crate) fn add_linear_product(&mut self, l1: &[f64], l2: &[f64], l3: &[f64], coeff: f64) {
        for (a, &p) in l1.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            for (b, &q) in l2.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                for (c, &r) in l3.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    self.add(a, b, c, coeff * p * q * r);
                }
            }
        }
    }

    pub(crate) fn into_form(self, dim: usize, label: &str) -> Result<CubicForm, FormError> {
        Ok(CubicForm::from_monomials(dim, self.terms)?.with_label(label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_vector, substream};
    use proptest::prelude::*;

    fn cube() -> CubicForm {
        CubicForm::from_monomials(1, [([0, 0, 0], 1.0)]).unwrap()
    }

    fn half_square() -> CubicForm {
        CubicForm::from_monomials(2, [([0, 0, 1], 0.5)]).unwrap()
    }

    fn random_terms(dim: usize, seed: u64) -> CubicForm {
        let mut rng = substream(seed, 0);
        let mut terms = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    terms.push(([i, j, k], gaussian_vector(&mut rng, 1)[0]));
                }
            }
        }
        CubicForm::from_monomials(dim, terms).unwrap()
    }

    fn v(xs: &[f64]) -> AlgebraElement {
        DVector::from_column_slice(xs)
    }

    /// Polarization by inclusion–exclusion on `u` alone.
    fn polarize_oracle(u: &CubicForm, x: &AlgebraElement, y: &AlgebraElement, z: &AlgebraElement) -> f64 {
        let e = |p: AlgebraElement| u.evaluate(&p).unwrap();
        e(x + y + z) - e(x + y) - e(x + z) - e(y + z) + e(x.clone()) + e(y.clone()) + e(z.clone())
    }

    #[test]
    fn multiplicity_table() {
        let u = cube();
        assert_eq!(u.tensor_entry(0, 0, 0), 6.0);
        let w = half_square();
        for (i, j, k) in [(0, 0, 1), (0, 1, 0), (1, 0, 0)] {
            assert_eq!(w.tensor_entry(i, j, k), 1.0);
        }
        assert_eq!(w.tensor_entry(1, 1, 0), 0.0);
        let distinct = CubicForm::from_monomials(3, [([0, 1, 2], 2.5)]).unwrap();
        assert_eq!(distinct.tensor_entry(2, 0, 1), 2.5);
    }

    #[test]
    fn cube_examples() {
        let u = cube();
        assert_eq!(u.evaluate(&v(&[2.0])).unwrap(), 8.0);
        assert_eq!(u.evaluate(&v(&[0.0])).unwrap(), 0.0);
        assert_eq!(u.polarize(&v(&[1.0]), &v(&[1.0]), &v(&[1.0])).unwrap(), 6.0);
        assert_eq!(u.multiply(&v(&[2.0]), &v(&[3.0])).unwrap()[0], 36.0);
        assert_eq!(u.mult_operator(&v(&[0.5])).unwrap()[(0, 0)], 3.0);
        assert_eq!(u.gradient_u(&v(&[2.0])).unwrap()[0], 12.0);
        assert_eq!(u.to_monomials(), vec![([0, 0, 0], 1.0)]);
    }

    #[test]
    fn half_square_examples() {
        let u = half_square();
        let e1 = v(&[0.0, 1.0]);
        assert_eq!(u.multiply(&e1, &e1).unwrap(), v(&[0.0, 0.0]));
        let x = v(&[1.5, -2.0]);
        assert!((u.evaluate(&x).unwrap() - 0.5 * 1.5 * 1.5 * -2.0).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            CubicForm::from_monomials(2, [([0, 1, 2], 1.0)]).unwrap_err(),
            FormError::IndexOutOfRange { index: 2, dim: 2 }
        );
        assert!(matches!(
            CubicForm::from_monomials(2, [([0, 0, 1], f64::NAN)]),
            Err(FormError::NonFinite { .. })
        ));
        assert!(matches!(
            CubicForm::from_monomials(3, [([1, 0, 2], 1.0)]),
            Err(FormError::UnsortedTriple { .. })
        ));
        assert_eq!(CubicForm::from_monomials(0, []).unwrap_err(), FormError::ZeroDimension);
        let u = cube();
        assert!(matches!(u.evaluate(&v(&[1.0, 2.0])), Err(FormError::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicates_are_summed() {
        let u = CubicForm::from_monomials(2, [([0, 1, 1], 1.0), ([0, 1, 1], 2.0)]).unwrap();
        assert_eq!(u.to_monomials(), vec![([0, 1, 1], 3.0)]);
    }

    #[test]
    fn polarization_matches_inclusion_exclusion() {
        let u = random_terms(5, 3);
        let mut rng = substream(11, 0);
        for _ in 0..50 {
            let (x, y, z) = (gaussian_vector(&mut rng, 5), gaussian_vector(&mut rng, 5), gaussian_vector(&mut rng, 5));
            let p = u.polarize(&x, &y, &z).unwrap();
            let oracle = polarize_oracle(&u, &x, &y, &z);
            assert!((p - oracle).abs() <= 1e-12 * (1.0 + p.abs().max(oracle.abs())) * 10.0, "{p} vs {oracle}");
            assert!((p - u.polarize(&z, &x, &y).unwrap()).abs() <= 1e-12 * (1.0 + p.abs()));
            let diag = u.polarize(&x, &x, &x).unwrap();
            assert!((diag - 6.0 * u.evaluate(&x).unwrap()).abs() <= 1e-12 * (1.0 + diag.abs()));
        }
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let u = random_terms(4, 9);
        let sparse = CubicForm { dense: None, ..u.clone() };
        let mut rng = substream(2, 0);
        let x = gaussian_vector(&mut rng, 4);
        let y = gaussian_vector(&mut rng, 4);
        assert!((u.product(&x, &y) - sparse.product(&x, &y)).norm() < 1e-12);
        let (a, b) = (u.operator(&x), sparse.operator(&x));
        assert!((&a - &b).norm() < 1e-12);
        assert_eq!(b, b.transpose());
    }

    #[test]
    fn high_dimension_uses_sparse_store() {
        let u = CubicForm::from_monomials(70, [([0, 1, 69], 1.0), ([5, 5, 5], -1.0)]).unwrap();
        assert!(u.dense.is_none());
        let mut x = DVector::zeros(70);
        x[0] = 1.0;
        x[1] = 2.0;
        x[69] = 3.0;
        x[5] = 1.0;
        assert!((u.evaluate(&x).unwrap() - 5.0).abs() < 1e-15);
        let l = u.mult_operator(&x).unwrap();
        assert_eq!(l, l.transpose());
        assert_eq!(l[(5, 5)], -6.0);
    }

    #[test]
    fn finite_difference_gradient_and_hessian() {
        let u = random_terms(5, 21);
        let mut rng = substream(5, 0);
        for _ in 0..10 {
            let x = gaussian_vector(&mut rng, 5);
            let h = 1e-5 * (1.0 + x.norm());
            let grad = u.gradient_u(&x).unwrap();
            let hess = u.mult_operator(&x).unwrap();
            for i in 0..5 {
                let mut e = DVector::zeros(5);
                e[i] = h;
                let fd = (u.evaluate(&(&x + &e)).unwrap() - u.evaluate(&(&x - &e)).unwrap()) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + grad[i].abs()));
                let gd = (u.gradient_u(&(&x + &e)).unwrap() - u.gradient_u(&(&x - &e)).unwrap()) / (2.0 * h);
                for j in 0..5 {
                    assert!((gd[j] - hess[(j, i)]).abs() <= 1e-6 * (1.0 + hess[(j, i)].abs()));
                }
            }
        }
    }

    #[test]
    fn zero_algebra_iff_zero_form() {
        let zero = CubicForm::zero(3).unwrap();
        assert!(zero.is_zero());
        for i in 0..3 {
            for j in 0..3 {
                let (mut a, mut b) = (DVector::zeros(3), DVector::zeros(3));
                a[i] = 1.0;
                b[j] = 1.0;
                assert_eq!(zero.multiply(&a, &b).unwrap().norm(), 0.0);
            }
        }
        let u = half_square();
        let e0 = v(&[1.0, 0.0]);
        assert!(u.multiply(&e0, &e0).unwrap().norm() > 0.0);
    }

    #[test]
    fn json_round_trip() {
        let u = random_terms(3, 4);
        let back = CubicForm::from_json(&u.to_json()).unwrap();
        assert_eq!(back, u);
        assert!(matches!(CubicForm::from_json("{\"dim\": 2}"), Err(FormError::Malformed(_))));
    }

    proptest! {
        #[test]
        fn associating_form_and_self_adjointness(seed in 0u64..500, dim in 1usize..6) {
            let u = random_terms(dim, seed);
            let norm = u.tensor_norm();
            let mut rng = substream(seed, 1);
            let (x, y, z) = (gaussian_vector(&mut rng, dim), gaussian_vector(&mut rng, dim), gaussian_vector(&mut rng, dim));
            let left = u.multiply(&x, &y).unwrap().dot(&z);
            let right = x.dot(&u.multiply(&y, &z).unwrap());
            prop_assert!((left - right).abs() <= 1e-12 * (1.0 + x.norm() * y.norm() * z.norm() * norm));
            let l = u.mult_operator(&x).unwrap();
            prop_assert!(crate::linalg::max_abs(&(&l - l.transpose())) <= 1e-14);
            prop_assert!((&l * &y - u.multiply(&x, &y).unwrap()).norm() <= 1e-12 * (1.0 + norm * x.norm() * y.norm()));
        }

        #[test]
        fn monomial_round_trip_and_homogeneity(seed in 0u64..500, t in -3.0f64..3.0) {
            let u = random_terms(4, seed);
            let back = CubicForm::from_monomials(4, u.to_monomials()).unwrap();
            prop_assert_eq!(back.to_monomials(), u.to_monomials());
            let x = gaussian_vector(&mut substream(seed, 2), 4);
            let lhs = u.evaluate(&(&x * t)).unwrap();
            let rhs = t.powi(3) * u.evaluate(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
