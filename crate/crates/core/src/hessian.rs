//! The ray function `w(x) = s <x², x> / |x|^α` and its derivatives, with the
//! closed-form Hessian spectrum at idempotents.
//!
//! `<x², x> = 6u(x)`, so `s = 1` is six times `u/|x|^α`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::cubic::{AlgebraElement, CubicForm};
use crate::linalg::sym_eigenvalues_sorted;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HessianError {
    #[error("w is singular at the origin")]
    ZeroInput,
    #[error("dimension mismatch: form has dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("alpha must lie in [1, 2), got {0}")]
    InvalidAlpha(f64),
    #[error("scale must be finite and nonzero, got {0}")]
    InvalidScale(f64),
    #[error("closed-form spectra need alpha = 1, got {0}")]
    NeedsAlphaOne(f64),
    #[error("not an idempotent: |c² - c| = {0:e}")]
    NotIdempotent(f64),
    #[error("grid point t = {0} is a pole of the characteristic identity")]
    PoleOnGrid(f64),
}

/// Largest `|c² - c|` accepted by the idempotent spectral formulas.
pub const IDEMPOTENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RayFunction {
    pub u: CubicForm,
    pub alpha: f64,
    pub scale: f64,
}

impl RayFunction {
    pub fn new(u: CubicForm, alpha: f64) -> Result<Self, HessianError> {
        Self::with_scale(u, alpha, 1.0)
    }

    pub fn with_scale(u: CubicForm, alpha: f64, scale: f64) -> Result<Self, HessianError> {
        if !(1.0..2.0).contains(&alpha) {
            return Err(HessianError::InvalidAlpha(alpha));
        }
        if !scale.is_finite() || scale == 0.0 {
            return Err(HessianError::InvalidScale(scale));
        }
        Ok(Self { u, alpha, scale })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    fn check(&self, x: &AlgebraElement) -> Result<f64, HessianError> {
        if x.len() != self.dim() {
            return Err(HessianError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let r = x.norm();
        if r == 0.0 {
            return Err(HessianError::ZeroInput);
        }
        Ok(r)
    }

    pub fn eval(&self, x: &AlgebraElement) -> Result<f64, HessianError> {
        let r = self.check(x)?;
        let p = self.u.product(x, x).dot(x);
        Ok(self.scale * p * r.powf(-self.alpha))
    }

    /// `grad w = s (3x² |x|^{-α} - α p |x|^{-α-2} x)`, `p = <x², x>`.
    pub fn eval_grad(&self, x: &AlgebraElement) -> Result<(f64, DVector<f64>), HessianError> {
        let r = self.check(x)?;
        let x2 = self.u.product(x, x);
        let p = x2.dot(x);
        let ra = r.powf(-self.alpha);
        let grad = (&x2 * (3.0 * ra) - x * (self.alpha * p * ra / (r * r))) * self.scale;
        Ok((self.scale * p * ra, grad))
    }

    /// `D²w = s (6 L_x |x|^{-α} - 3α |x|^{-α-2} (x²⊗x + x⊗x²)
    ///   - α p |x|^{-α-2} I + α(α+2) p |x|^{-α-4} x⊗x)`.
    pub fn hessian(&self, x: &AlgebraElement) -> Result<DMatrix<f64>, HessianError> {
        let r = self.check(x)?;
        let n = self.dim();
        let a = self.alpha;
        let lx = self.u.operator(x);
        let x2 = &lx * x;
        let p = x2.dot(x);
        let ra = r.powf(-a);
        let r2 = r * r;
        let cross = &x2 * x.transpose() + x * x2.transpose();
        let h = lx * (6.0 * ra) - cross * (3.0 * a * ra / r2) - DMatrix::identity(n, n) * (a * p * ra / r2)
            + x * x.transpose() * (a * (a + 2.0) * p * ra / (r2 * r2));
        Ok(h * self.scale)
    }

    /// `Δw = s (6 trace L_x |x|^{-α} - α(n + 4 - α) p |x|^{-α-2})`.
    pub fn laplacian(&self, x: &AlgebraElement) -> Result<f64, HessianError> {
        let r = self.check(x)?;
        let n = self.dim() as f64;
        let a = self.alpha;
        let trace: f64 = self.u.basis_traces().iter().zip(x.iter()).map(|(t, xi)| t * xi).sum();
        let p = self.u.product(x, x).dot(x);
        let ra = r.powf(-a);
        Ok(self.scale * (6.0 * trace * ra - a * (n + 4.0 - a) * p * ra / (r * r)))
    }

    fn idempotent_check(&self, c: &AlgebraElement) -> Result<(), HessianError> {
        if self.alpha != 1.0 {
            return Err(HessianError::NeedsAlphaOne(self.alpha));
        }
        self.check(c)?;
        let residual = (self.u.product(c, c) - c).norm();
        if !(residual <= IDEMPOTENT_TOL) {
            return Err(HessianError::NotIdempotent(residual));
        }
        Ok(())
    }

    /// Closed-form spectrum of `D²w(c)` at an idempotent `c` (α = 1):
    /// `s {2/|c|, (6λ_i - 1)/|c|}` with `λ_i` the spectrum of `L_c` on `c⊥`,
    /// cross-checked against a direct eigensolve.
    pub fn idempotent_spectrum(&self, c: &AlgebraElement) -> Result<IdempotentSpectrum, HessianError> {
        self.idempotent_check(c)?;
        let r = c.norm();
        let record = crate::idempotent::classify(&self.u, c, crate::idempotent::Origin::Newton);
        let mut closed_form: Vec<f64> = std::iter::once(2.0 / r)
            .chain(record.perp_spectrum.iter().map(|l| (6.0 * l - 1.0) / r))
            .map(|v| v * self.scale)
            .collect();
        closed_form.sort_by(f64::total_cmp);
        let h = self.hessian(c)?;
        let direct = sym_eigenvalues_sorted(&h);
        let max_deviation = closed_form.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let eigenvector_residual = (&h * c - c * (2.0 * self.scale / r)).norm() / r;
        Ok(IdempotentSpectrum { closed_form, direct, max_deviation, eigenvector_residual })
    }

    /// Compares `det(t - D²w(c))` with
    /// `s^n 6^n (|c|τ - 2) / (|c|^n (|c|τ - 5)) χ_c((1 + |c|τ)/6)`, `τ = t/s`,
    /// where `χ_c(z) = det(z - L_c)`.
    pub fn charpoly_check(&self, c: &AlgebraElement, grid: Option<&[f64]>) -> Result<CharpolyCheck, HessianError> {
        self.idempotent_check(c)?;
        let r = c.norm();
        let n = self.dim();
        let s = self.scale;
        let grid: Vec<f64> = match grid {
            Some(g) => g.to_vec(),
            None => default_grid(r, s),
        };
        let h = self.hessian(c)?;
        let lc = self.u.operator(c);
        let mut residual = 0.0_f64;
        for &t in &grid {
            let tau = t / s;
            if (r * tau - 5.0).abs() < 1e-9 {
                return Err(HessianError::PoleOnGrid(t));
            }
            let lhs = (DMatrix::identity(n, n) * t - &h).determinant();
            let z = (1.0 + r * tau) / 6.0;
            let chi_c = (DMatrix::identity(n, n) * z - &lc).determinant();
            let rhs = s.powi(n as i32) * 6f64.powi(n as i32) * (r * tau - 2.0) / (r.powi(n as i32) * (r * tau - 5.0)) * chi_c;
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            residual = residual.max((lhs - rhs).abs() / scale);
        }
        let direct = sym_eigenvalues_sorted(&h);
        let two = 2.0 * s / r;
        let two_multiplicity = direct.iter().filter(|v| (*v - two).abs() <= 1e-8 * s.abs().max(1.0)).count();
        let half_in_peirce = sym_eigenvalues_sorted(&lc).iter().any(|l| (l - 0.5).abs() <= 1e-8);
        Ok(CharpolyCheck {
            grid,
            residual,
            generic: !half_in_peirce,
            two_over_c_multiplicity: two_multiplicity,
            two_over_c_simple: two_multiplicity == 1,
        })
    }
}

/// Twenty half-integers `-9.5, ..., 9.5` scaled by `s/|c|`; none of them
/// hits the pole `|c|τ = 5` or the root `|c|τ = 2`.
pub fn default_grid(norm_c: f64, scale: f64) -> Vec<f64> {
    (0..20).map(|k| (k as f64 - 9.5) * scale / norm_c).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotentSpectrum {
    pub closed_form: Vec<f64>,
    pub direct: Vec<f64>,
    pub max_deviation: f64,
    /// `|D²w(c) c - (2s/|c|) c| / |c|`.
    pub eigenvector_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharpolyCheck {
    pub grid: Vec<f64>,
    /// Max relative residual over the grid.
    pub residual: f64,
    /// `½` is absent from the spectrum of `L_c`.
    pub generic: bool,
    pub two_over_c_multiplicity: usize,
    pub two_over_c_simple: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cartan_cubic, random_form};
    use crate::idempotent::newton_search;
    use crate::linalg::{gaussian_vector, substream};

    fn ray(u: CubicForm, alpha: f64) -> RayFunction {
        RayFunction::new(u, alpha).unwrap()
    }

    fn step(x: &DVector<f64>) -> f64 {
        1e-5 * (1.0 + x.norm())
    }

    #[test]
    fn homogeneity() {
        let r = ray(random_form(4, 2).unwrap(), 1.5);
        let x = gaussian_vector(&mut substream(1, 0), 4);
        let (w1, w2) = (r.eval(&x).unwrap(), r.eval(&(&x * 2.0)).unwrap());
        assert!((w2 - 2f64.powf(1.5) * w1).abs() <= 1e-12 * w2.abs());
    }

    #[test]
    fn gradient_closed_form_and_finite_differences() {
        let u = random_form(4, 3).unwrap();
        let mut rng = substream(2, 0);
        for alpha in [1.0, 1.5] {
            let r = ray(u.clone(), alpha);
            for _ in 0..10 {
                let x = gaussian_vector(&mut rng, 4);
                let (_, g) = r.eval_grad(&x).unwrap();
                let h = step(&x);
                for i in 0..4 {
                    let mut e = DVector::zeros(4);
                    e[i] = h;
                    let fd = (r.eval(&(&x + &e)).unwrap() - r.eval(&(&x - &e)).unwrap()) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g.norm()));
                }
                if alpha == 1.0 {
                    let rr = x.norm();
                    let x2 = u.product(&x, &x);
                    let closed = (&x2 * (3.0 * rr * rr) - &x * x2.dot(&x)) / rr.powi(3);
                    assert!((closed - &g).norm() <= 1e-12 * g.norm());
                }
            }
        }
    }

    #[test]
    fn gradient_at_eiconal_idempotent() {
        let u = cartan_cubic(1).unwrap().scaled(1.0 / 6.0);
        let c = newton_search(&u, 16, 1, 1e-13, 200).records[0].c.clone();
        let (_, g) = ray(u, 1.0).eval_grad(&c).unwrap();
        assert!((g - &c * 2.0).norm() <= 1e-10);
    }

    #[test]
    fn hessian_matches_printed_form_and_finite_differences() {
        let u = random_form(5, 7).unwrap();
        let mut rng = substream(3, 0);
        for alpha in [1.0, 1.3, 1.9] {
            let r = ray(u.clone(), alpha);
            for _ in 0..5 {
                let x = gaussian_vector(&mut rng, 5);
                let hm = r.hessian(&x).unwrap();
                assert!((&hm - hm.transpose()).amax() <= 1e-12 * hm.amax());
                let h = step(&x);
                for j in 0..5 {
                    let mut e = DVector::zeros(5);
                    e[j] = h;
                    let col = (r.eval_grad(&(&x + &e)).unwrap().1 - r.eval_grad(&(&x - &e)).unwrap().1) / (2.0 * h);
                    assert!((col - hm.column(j)).amax() <= 1e-5 * (1.0 + hm.amax()));
                }
                assert!((r.laplacian(&x).unwrap() - hm.trace()).abs() <= 1e-10 * (1.0 + hm.amax()));
            }
        }
        let r = ray(u.clone(), 1.0);
        let x = gaussian_vector(&mut rng, 5);
        let rr = x.norm();
        let lx = u.operator(&x);
        let x2 = &lx * &x;
        let p = x2.dot(&x);
        let printed = &lx * (6.0 / rr) - DMatrix::identity(5, 5) * (p / rr.powi(3))
            - (&x * x2.transpose() + &x2 * x.transpose()) * (3.0 / rr.powi(3))
            + &x * x.transpose() * (3.0 * p / rr.powi(5));
        assert!((printed - r.hessian(&x).unwrap()).amax() <= 1e-12 * (1.0 + lx.amax()));
    }

    #[test]
    fn alpha_one_hessian_is_odd_and_ray_constant() {
        let r = ray(random_form(5, 1).unwrap(), 1.0);
        let mut rng = substream(4, 0);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let x = gaussian_vector(&mut rng, 5);
            let h = r.hessian(&x).unwrap();
            worst = worst.max((r.hessian(&-&x).unwrap() + &h).amax() / h.amax());
            worst = worst.max((r.hessian(&(&x * 3.7)).unwrap() - &h).amax() / h.amax());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn harmonic_laplacian_and_one_dimensional_case() {
        let u = cartan_cubic(2).unwrap();
        let r = ray(u.clone(), 1.0);
        let x = gaussian_vector(&mut substream(5, 0), 8);
        let rr = x.norm();
        let p = u.product(&x, &x).dot(&x);
        let expected = -(8.0 + 3.0) * p / rr.powi(3);
        assert!((r.laplacian(&x).unwrap() - expected).abs() <= 1e-10 * expected.abs().max(1.0));

        let cube = ray(CubicForm::from_monomials(1, [([0, 0, 0], 1.0)]).unwrap(), 1.0);
        for x0 in [0.7, -1.3] {
            // w = 6x|x|, w'' = 12 sign(x).
            let x = DVector::from_element(1, x0);
            assert!((cube.laplacian(&x).unwrap() - 12.0 * x0.signum()).abs() <= 1e-12);
            let h = 1e-4;
            let f = |t: f64| cube.eval(&DVector::from_element(1, t)).unwrap();
            let fd = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
            assert!((cube.laplacian(&x).unwrap() - fd).abs() <= 1e-5 * fd.abs());
        }
    }

    #[test]
    fn idempotent_spectrum_of_eiconal_cartan() {
        for d in [1, 2, 4, 8] {
            let u = cartan_cubic(d).unwrap().scaled(1.0 / 6.0);
            let c = newton_search(&u, 16, 2, 1e-13, 200).records[0].c.clone();
            let spec = ray(u, 1.0).idempotent_spectrum(&c).unwrap();
            assert!(spec.max_deviation <= 1e-8);
            assert!(spec.eigenvector_residual <= 1e-10);
            let twos = spec.direct.iter().filter(|v| (*v - 2.0).abs() < 1e-8).count();
            let sevens = spec.direct.iter().filter(|v| (*v + 7.0).abs() < 1e-8).count();
            assert_eq!((twos, sevens), (2 * d + 1, d + 1));
        }
    }

    #[test]
    fn idempotent_spectrum_of_random_form_and_scale() {
        let u = random_form(5, 3).unwrap();
        for c in newton_search(&u, 32, 2, 1e-13, 200).records.iter().map(|r| r.c.clone()) {
            let spec = RayFunction::with_scale(u.clone(), 1.0, -2.5).unwrap().idempotent_spectrum(&c).unwrap();
            assert!(spec.max_deviation <= 1e-8 * (1.0 + spec.direct.iter().fold(0.0_f64, |m, v| m.max(v.abs()))));
        }
    }

    #[test]
    fn charpoly_identity() {
        let u = cartan_cubic(1).unwrap().scaled(1.0 / 6.0);
        let c = newton_search(&u, 16, 2, 1e-13, 200).records[0].c.clone();
        let r = ray(u, 1.0);
        let check = r.charpoly_check(&c, None).unwrap();
        assert_eq!(check.grid.len(), 20);
        assert!(check.residual <= 1e-8);
        assert!(!check.generic);
        // At t = 2/|c| the left side vanishes, 2/|c| being an eigenvalue.
        let t = 2.0 / c.norm();
        let lhs = (DMatrix::identity(5, 5) * t - r.hessian(&c).unwrap()).determinant();
        assert!(lhs.abs() <= 1e-9);
        assert!(matches!(r.charpoly_check(&c, Some(&[5.0 / c.norm()])), Err(HessianError::PoleOnGrid(_))));

        let cube = ray(CubicForm::from_monomials(1, [([0, 0, 0], 1.0)]).unwrap(), 1.0);
        let c = DVector::from_element(1, 1.0 / 6.0);
        let check = cube.charpoly_check(&c, None).unwrap();
        assert!(check.residual <= 1e-12);
        assert!(check.generic && check.two_over_c_simple);

        let u = random_form(5, 3).unwrap();
        let r = ray(u.clone(), 1.0);
        for rec in newton_search(&u, 32, 2, 1e-13, 200).records {
            let check = r.charpoly_check(&rec.c, None).unwrap();
            assert!(check.residual <= 1e-8);
            if check.generic {
                assert!(check.two_over_c_simple);
            }
        }
    }

    #[test]
    fn input_errors() {
        let u = random_form(3, 1).unwrap();
        assert_eq!(RayFunction::new(u.clone(), 2.0).unwrap_err(), HessianError::InvalidAlpha(2.0));
        assert_eq!(RayFunction::with_scale(u.clone(), 1.0, 0.0).unwrap_err(), HessianError::InvalidScale(0.0));
        let r = ray(u, 1.5);
        assert_eq!(r.hessian(&DVector::zeros(3)).unwrap_err(), HessianError::ZeroInput);
        assert!(matches!(r.idempotent_spectrum(&DVector::from_element(3, 1.0)), Err(HessianError::NeedsAlphaOne(_))));
    }
}
