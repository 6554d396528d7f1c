//! Trace identities of Hsiang cubics: `trace D²u = 0`,
//! `trace (D²u)² = C1 |x|²`, `trace (D²u)³ = C2 u(x)`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cubic::CubicForm;
use crate::linalg::{gaussian_vector, substream, sym_eigenvalues_sorted};

pub const HSIANG_TOL: f64 = 1e-9;
/// Probes tried for the `C2` fit before giving up on `u(x) != 0`.
pub const C2_PROBE_ATTEMPTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HsiangError {
    #[error("u vanishes at every probe point; C2 cannot be fitted")]
    DegenerateProbe,
}

#[derive(Debug, Clone, Serialize)]
pub struct HsiangFit {
    pub c1: f64,
    pub c2: f64,
    /// Max `|trace L_{e_i}|` relative to `|T|_F`.
    pub harmonic_residual: f64,
    /// Max `|trace L_x² - C1|x|²| / (C1 |x|²)`.
    pub c1_residual: f64,
    /// Max `|trace L_x³ - C2 u(x)| / sum |λ_i|³`.
    pub c2_residual: f64,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
}

/// Fits `C1`, `C2` at seeded probes and measures both identities, plus
/// harmonicity, over `n_samples` further points. `D²u = L_x`.
pub fn hsiang_fit(u: &CubicForm, n_samples: usize, seed: u64) -> Result<HsiangFit, HsiangError> {
    let n = u.dim();
    let scale = u.tensor_norm().max(f64::MIN_POSITIVE);
    let harmonic_residual = u.basis_traces().iter().fold(0.0_f64, |m, t| m.max(t.abs())) / scale;
    let powers = |x: &nalgebra::DVector<f64>| {
        let eig = sym_eigenvalues_sorted(&u.operator(x));
        let t2: f64 = eig.iter().map(|l| l * l).sum();
        let t3: f64 = eig.iter().map(|l| l * l * l).sum();
        let abs3: f64 = eig.iter().map(|l| l.abs().powi(3)).sum();
        (t2, t3, abs3)
    };

    let mut probe_rng = substream(seed, u64::MAX);
    let x1 = gaussian_vector(&mut probe_rng, n);
    let c1 = powers(&x1).0 / x1.norm_squared();
    let mut c2 = None;
    for _ in 0..C2_PROBE_ATTEMPTS {
        let x = gaussian_vector(&mut probe_rng, n);
        let ux = u.product(&x, &x).dot(&x) / 6.0;
        if ux.abs() > 1e-8 * scale * x.norm().powi(3) {
            c2 = Some(powers(&x).1 / ux);
            break;
        }
    }
    let c2 = c2.ok_or(HsiangError::DegenerateProbe)?;

    let (c1_residual, c2_residual) = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = gaussian_vector(&mut substream(seed, i as u64), n);
            let (t2, t3, abs3) = powers(&x);
            let ux = u.product(&x, &x).dot(&x) / 6.0;
            let r1 = (t2 - c1 * x.norm_squared()).abs() / (c1.abs() * x.norm_squared()).max(f64::MIN_POSITIVE);
            let r2 = (t3 - c2 * ux).abs() / abs3.max(f64::MIN_POSITIVE);
            (r1, r2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let pass = harmonic_residual <= HSIANG_TOL && c1_residual <= HSIANG_TOL && c2_residual <= HSIANG_TOL;
    Ok(HsiangFit { c1, c2, harmonic_residual, c1_residual, c2_residual, samples: n_samples, seed, tol: HSIANG_TOL, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cartan_cubic, det3_form, random_form};

    /// `trace L_x² = sum_{ijk} T_ijk T_ijl x_k x_l`, summed directly.
    fn trace_square_oracle(u: &CubicForm, x: &[f64]) -> f64 {
        let n = u.dim();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a: f64 = (0..n).map(|k| u.tensor_entry(i, j, k) * x[k]).sum();
                total += a * a;
            }
        }
        total
    }

    #[test]
    fn u9_is_hsiang() {
        let fit = hsiang_fit(&det3_form(), 200, 1).unwrap();
        assert!(fit.pass, "{fit:?}");
    }

    #[test]
    fn cartan_forms_are_hsiang_with_c1() {
        for d in [1, 2, 4, 8] {
            let n = 3 * d + 2;
            let fit = hsiang_fit(&cartan_cubic(d).unwrap(), 100, 2).unwrap();
            assert!(fit.pass, "{fit:?}");
            assert!((fit.c1 - 18.0 * (n as f64 + 2.0)).abs() <= 1e-9 * fit.c1);
        }
    }

    #[test]
    fn c1_oracle_at_n5() {
        let u = cartan_cubic(1).unwrap();
        let x = [0.3, -1.1, 0.7, 0.2, 0.9];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!((trace_square_oracle(&u, &x) / r2 - 126.0).abs() < 1e-10);
    }

    #[test]
    fn random_form_fails() {
        let fit = hsiang_fit(&random_form(5, 1).unwrap(), 100, 1).unwrap();
        assert!(!fit.pass);
        assert!(fit.c1_residual > 1e-3);
    }

    #[test]
    fn zero_form_is_degenerate() {
        assert_eq!(hsiang_fit(&CubicForm::zero(3).unwrap(), 10, 1).unwrap_err(), HsiangError::DegenerateProbe);
    }
}
