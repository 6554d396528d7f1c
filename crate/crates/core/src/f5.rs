//! The quintic Hessian invariant `F(D²w) = (Δw)⁵ + 2⁸3²(Δw)³ + 2¹²3⁵Δw
//! + 2¹⁵ det D²w` for `w = s u₅/|x|`, a scale search for `s`, and a
//! least-squares fit of the relation actually satisfied by `det` and `Δ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cubic::{AlgebraElement, CubicForm};
use crate::hessian::{HessianError, RayFunction};
use crate::linalg::{random_unit, substream};

pub const C3: f64 = 256.0 * 9.0;
pub const C1: f64 = 4096.0 * 243.0;
pub const C_DET: f64 = 32768.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum F5Error {
    #[error("F5 needs a form on R^5, got dimension {0}")]
    WrongDimension(usize),
    #[error(transparent)]
    Hessian(#[from] HessianError),
}

/// The four terms of `F` evaluated on `(Δ, det)`.
pub fn f5_terms(laplacian: f64, det: f64) -> [f64; 4] {
    [laplacian.powi(5), C3 * laplacian.powi(3), C1 * laplacian, C_DET * det]
}

/// `|F| / max |term|`, zero when every term vanishes.
pub fn normalized_residual(terms: &[f64; 4]) -> f64 {
    let big = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if big == 0.0 {
        0.0
    } else {
        terms.iter().sum::<f64>().abs() / big
    }
}

/// `w = s u/|x|` as a ray function: `RayFunction` carries `<x², x> = 6u`, so
/// its scale is `s/6`.
pub fn ray_for_scale(u: &CubicForm, s: f64) -> Result<RayFunction, F5Error> {
    if u.dim() != 5 {
        return Err(F5Error::WrongDimension(u.dim()));
    }
    Ok(RayFunction::with_scale(u.clone(), 1.0, s / 6.0)?)
}

/// Normalized residual of `F(D²w)` at `x` for `w = s u/|x|`.
pub fn f5_residual(u: &CubicForm, x: &AlgebraElement, s: f64) -> Result<f64, F5Error> {
    let r = ray_for_scale(u, s)?;
    let h = r.hessian(x)?;
    Ok(normalized_residual(&f5_terms(r.laplacian(x)?, h.determinant())))
}

/// Seeded unit points used by the scale search.
pub fn probe_points(n_points: usize, seed: u64) -> Vec<DVector<f64>> {
    (0..n_points).map(|i| random_unit(&mut substream(seed, i as u64), 5)).collect()
}

/// `(Δ, det)` of `D²(u/|x|)` at each point.
fn invariants(u: &CubicForm, points: &[DVector<f64>]) -> Result<Vec<(f64, f64)>, F5Error> {
    let r = ray_for_scale(u, 1.0)?;
    points
        .par_iter()
        .map(|x| {
            let h = r.hessian(x)?;
            Ok((r.laplacian(x)?, h.determinant()))
        })
        .collect()
}

/// Max normalized residual over points with invariants at unit scale;
/// `D²(s w) = s D²w` gives `Δ -> sΔ`, `det -> s⁵ det`.
fn max_residual(inv: &[(f64, f64)], s: f64) -> f64 {
    inv.iter()
        .map(|&(lap, det)| normalized_residual(&f5_terms(s * lap, s.powi(5) * det)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleTracePoint {
    pub s: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSearch {
    pub n_points: usize,
    pub seed: u64,
    pub grid_per_sign: usize,
    pub s_best: f64,
    pub residual_best: f64,
    pub tol: f64,
    pub found: bool,
    /// Max residual at `2 s_best`.
    pub residual_double: f64,
    pub trace: Vec<ScaleTracePoint>,
    pub fit: RelationFit,
}

pub const SCALE_MIN: f64 = 1e-3;
pub const SCALE_MAX: f64 = 1e3;
pub const SCALE_GRID: usize = 241;

/// Logarithmic search for `s ∈ ±[1e-3, 1e3]` minimizing the max normalized
/// residual of `F` over `n_points` seeded unit points, followed by a
/// golden-section refinement in `log |s|` around the best grid point.
pub fn scale_search(u: &CubicForm, n_points: usize, seed: u64, tol: f64) -> Result<ScaleSearch, F5Error> {
    let points = probe_points(n_points, seed);
    let inv = invariants(u, &points)?;
    let (lo, hi) = (SCALE_MIN.ln(), SCALE_MAX.ln());
    let step = (hi - lo) / (SCALE_GRID - 1) as f64;
    let mut trace = Vec::with_capacity(2 * SCALE_GRID + 100);
    for sign in [1.0, -1.0] {
        for k in 0..SCALE_GRID {
            let s = sign * (lo + step * k as f64).exp();
            trace.push(ScaleTracePoint { s, residual: max_residual(&inv, s) });
        }
    }
    let best = trace.iter().min_by(|a, b| a.residual.total_cmp(&b.residual)).expect("nonempty grid").clone();
    let sign = best.s.signum();
    let center = best.s.abs().ln();
    let (mut a, mut b) = ((center - step).max(lo), (center + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |t: f64| max_residual(&inv, sign * t.exp());
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c);
            trace.push(ScaleTracePoint { s: sign * c.exp(), residual: fc });
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d);
            trace.push(ScaleTracePoint { s: sign * d.exp(), residual: fd });
        }
    }
    let best = trace.iter().min_by(|a, b| a.residual.total_cmp(&b.residual)).expect("nonempty trace").clone();
    Ok(ScaleSearch {
        n_points,
        seed,
        grid_per_sign: SCALE_GRID,
        s_best: best.s,
        residual_best: best.residual,
        tol,
        found: best.residual <= tol,
        residual_double: max_residual(&inv, 2.0 * best.s),
        trace,
        fit: fit_relation(&inv),
    })
}

/// Least-squares fit of `k5 Δ⁵ + k3 Δ³ + k1 Δ + 2¹⁵ det = 0` for `w = u/|x|`.
#[derive(Debug, Clone, Serialize)]
pub struct RelationFit {
    pub k5: f64,
    pub k3: f64,
    pub k1: f64,
    /// `k / (nominal coefficient)`, i.e. `(k5, k3 / (2⁸3²), k1 / (2¹²3⁵))`.
    pub ratio_to_nominal: [f64; 3],
    /// Max of `|fit residual| / max |term|` over the points.
    pub residual: f64,
}

fn fit_relation(inv: &[(f64, f64)]) -> RelationFit {
    let m = inv.len();
    let a = DMatrix::from_fn(m, 3, |i, j| inv[i].0.powi([5, 3, 1][j]));
    let b = DVector::from_fn(m, |i, _| -C_DET * inv[i].1);
    let k = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    let residual = inv
        .iter()
        .map(|&(lap, det)| normalized_residual(&[k[0] * lap.powi(5), k[1] * lap.powi(3), k[2] * lap, C_DET * det]))
        .fold(0.0, f64::max);
    RelationFit { k5: k[0], k3: k[1], k1: k[2], ratio_to_nominal: [k[0], k[1] / C3, k[2] / C1], residual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{normalize_munzner, u5_determinant};
    use crate::U5Variant;

    fn u5() -> CubicForm {
        normalize_munzner(&u5_determinant(U5Variant::Symmetric), 1e-9).unwrap().0
    }

    #[test]
    fn zero_matrix_gives_zero() {
        assert_eq!(f5_terms(0.0, 0.0), [0.0; 4]);
        assert_eq!(normalized_residual(&f5_terms(0.0, 0.0)), 0.0);
    }

    #[test]
    fn terms_scale_with_degree() {
        let u = u5();
        let x = probe_points(1, 3).remove(0);
        let r1 = ray_for_scale(&u, 1.0).unwrap();
        let r2 = ray_for_scale(&u, 2.0).unwrap();
        assert!((r2.laplacian(&x).unwrap() - 2.0 * r1.laplacian(&x).unwrap()).abs() < 1e-10);
        let (d1, d2) = (r1.hessian(&x).unwrap().determinant(), r2.hessian(&x).unwrap().determinant());
        assert!((d2 - 32.0 * d1).abs() <= 1e-10 * d2.abs());
    }

    #[test]
    fn wrong_dimension() {
        let u = crate::catalog::cartan_cubic(2).unwrap();
        assert_eq!(f5_residual(&u, &DVector::from_element(8, 1.0), 1.0).unwrap_err(), F5Error::WrongDimension(8));
    }

    #[test]
    fn quintic_relation_holds_with_fitted_coefficients() {
        let fit = fit_relation(&invariants(&u5(), &probe_points(100, 7)).unwrap());
        assert!(fit.residual <= 1e-9, "{fit:?}");
    }

    #[test]
    fn doubling_the_scale_moves_the_residual() {
        let u = u5();
        let search = scale_search(&u, 20, 1, 1e-6).unwrap();
        assert!(search.residual_double > 1e-3);
        assert!(search.trace.len() >= 2 * SCALE_GRID);
    }
}
