//! Idempotents `c² = c` of `V(u)`: Newton multistart on `g(x) = x² - x`,
//! projected-gradient ascent of `<x, x²>` on the unit sphere, and the
//! `½`-criterion for genericity.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cubic::{AlgebraElement, CubicForm};
use crate::linalg::{random_unit, scaled_determinant, sym_eigen_sorted, substream};

/// Jacobians whose Hadamard-scaled determinant falls below this value take a
/// damped (Levenberg–Marquardt) step.
pub const SINGULAR_JACOBIAN: f64 = 1e-12;
/// Slack for the extremal property `spectrum(L_c|c⊥) ⊂ (-∞, ½]`.
pub const EXTREMAL_SLACK: f64 = 1e-8;
/// Distance from 1 below which a `c⊥` eigenvalue counts as a second 1.
pub const PRIMITIVE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdempotentError {
    #[error("start vector must have unit norm, got |x0| = {0}")]
    NotUnit(f64),
    #[error("dimension mismatch: form has dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("variational ascent did not converge after {iterations} iterations (stationarity {stationarity:e})")]
    NoConvergence { iterations: usize, stationarity: f64 },
    #[error("idempotent polish failed: residual {0:e}")]
    PolishFailed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Newton,
    Variational,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotentRecord {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub c: AlgebraElement,
    /// `|c² - c|_2`.
    pub residual: f64,
    pub origin: Origin,
    /// Eigenvalues of `L_c`, ascending.
    pub spectrum: Vec<f64>,
    /// Eigenvalues of `L_c` restricted to `c⊥`, ascending.
    pub perp_spectrum: Vec<f64>,
    pub primitive: bool,
    pub extremal: bool,
    /// The variational search stopped at a point with `x² = 0`; `c` then
    /// holds that point, not an idempotent.
    pub square_zero_witness: bool,
}

impl IdempotentRecord {
    pub fn norm(&self) -> f64 {
        self.c.norm()
    }
}

/// Builds a record for a (candidate) idempotent with its Peirce spectrum and
/// flags.
pub fn classify(u: &CubicForm, c: &AlgebraElement, origin: Origin) -> IdempotentRecord {
    let residual = (u.product(c, c) - c).norm();
    let (spectrum, perp_spectrum) = spectra(u, c);
    let primitive = perp_spectrum.iter().all(|l| (l - 1.0).abs() > PRIMITIVE_TOL);
    let extremal = perp_spectrum.last().is_none_or(|&top| top <= 0.5 + EXTREMAL_SLACK);
    IdempotentRecord {
        c: c.clone(),
        residual,
        origin,
        spectrum,
        perp_spectrum,
        primitive,
        extremal,
        square_zero_witness: false,
    }
}

/// Spectrum of `L_c` and of its restriction to `c⊥`. The eigenpair dropped for
/// `c⊥` is the one whose eigenvector is most aligned with `c`.
fn spectra(u: &CubicForm, c: &AlgebraElement) -> (Vec<f64>, Vec<f64>) {
    let (values, vectors) = sym_eigen_sorted(&u.operator(c));
    let norm = c.norm();
    if norm == 0.0 {
        return (values.clone(), values);
    }
    let unit = c / norm;
    let aligned = (0..values.len())
        .max_by(|&a, &b| {
            let pa = vectors.column(a).dot(&unit).abs();
            let pb = vectors.column(b).dot(&unit).abs();
            pa.total_cmp(&pb)
        })
        .expect("nonempty spectrum");
    let perp = values.iter().enumerate().filter(|(i, _)| *i != aligned).map(|(_, v)| *v).collect();
    (values, perp)
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonSearch {
    pub records: Vec<IdempotentRecord>,
    pub n_starts: usize,
    pub converged: usize,
    /// Starts that converged to the zero solution.
    pub zero_hits: usize,
    /// Starts that failed to converge within `max_iter` or diverged.
    pub dropped: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

enum StartOutcome {
    Root(AlgebraElement),
    Zero,
    Failed,
}

/// One Newton step for `g(x) = x² - x` with Jacobian `2L_x - I`.
fn newton_step(u: &CubicForm, x: &AlgebraElement, g: &AlgebraElement) -> AlgebraElement {
    let n = x.len();
    let jac = u.operator(x) * 2.0 - DMatrix::identity(n, n);
    if scaled_determinant(&jac) >= SINGULAR_JACOBIAN {
        if let Some(step) = jac.clone().lu().solve(&(-g)) {
            return step;
        }
    }
    // Damped step (J^T J + mu I) d = -J^T g, mu = |g|.
    let mu = g.norm().max(f64::MIN_POSITIVE);
    let normal = jac.transpose() * &jac + DMatrix::identity(n, n) * mu;
    let rhs = -(jac.transpose() * g);
    normal.cholesky().map(|ch| ch.solve(&rhs)).unwrap_or_else(|| rhs / mu)
}

/// Residual history `|x_k² - x_k|` of a plain Newton run from `x0`.
pub fn newton_trace(u: &CubicForm, x0: &AlgebraElement, tol: f64, max_iter: usize) -> Vec<f64> {
    let mut x = x0.clone();
    let mut trace = Vec::new();
    for _ in 0..=max_iter {
        let g = u.product(&x, &x) - &x;
        let r = g.norm();
        trace.push(r);
        if r <= tol || !r.is_finite() {
            break;
        }
        x += newton_step(u, &x, &g);
    }
    trace
}

/// Runs Newton from `x0` until `|x² - x| <= tol`.
pub(crate) fn newton_polish(u: &CubicForm, x0: &AlgebraElement, tol: f64, max_iter: usize) -> Option<AlgebraElement> {
    let blowup = 1e8 * (1.0 + x0.norm());
    let mut x = x0.clone();
    for _ in 0..=max_iter {
        let g = u.product(&x, &x) - &x;
        let r = g.norm();
        if r <= tol {
            return Some(x);
        }
        if !r.is_finite() || x.norm() > blowup {
            return None;
        }
        x += newton_step(u, &x, &g);
    }
    None
}

fn run_start(u: &CubicForm, seed: u64, index: usize, tol: f64, max_iter: usize, zero_radius: f64) -> StartOutcome {
    let mut rng = substream(seed, index as u64);
    let dir = random_unit(&mut rng, u.dim());
    let spread = crate::linalg::sym_eigenvalues_sorted(&u.operator(&dir))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if spread == 0.0 {
        return StartOutcome::Zero;
    }
    let x0 = dir / spread;
    match newton_polish(u, &x0, tol, max_iter) {
        Some(c) if c.norm() < zero_radius => StartOutcome::Zero,
        Some(c) => StartOutcome::Root(c),
        None => StartOutcome::Failed,
    }
}

fn lex_cmp(a: &AlgebraElement, b: &AlgebraElement) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Newton multistart for the nonzero idempotents of `V(u)`.
///
/// Start `i` is a uniform unit vector `x` from substream `(seed, i)` scaled by
/// `1/max|spectrum(L_x)|`, the size of an idempotent along `x` when `x` is an
/// eigenvector of `L_x` for its top eigenvalue. Converged roots are deduplicated in start
/// order with radius `10 tol` and sorted by `(residual, coordinates)`.
pub fn newton_search(u: &CubicForm, n_starts: usize, seed: u64, tol: f64, max_iter: usize) -> NewtonSearch {
    // Nonzero idempotents satisfy 1 <= |L_c| <= |T|_F |c|.
    let zero_radius = 0.5 / u.tensor_norm().max(f64::MIN_POSITIVE);
    let outcomes: Vec<StartOutcome> = if u.is_zero() {
        (0..n_starts).map(|_| StartOutcome::Zero).collect()
    } else {
        (0..n_starts)
            .into_par_iter()
            .map(|i| run_start(u, seed, i, tol, max_iter, zero_radius))
            .collect()
    };
    let mut roots: Vec<AlgebraElement> = Vec::new();
    let (mut converged, mut zero_hits, mut dropped) = (0, 0, 0);
    for outcome in outcomes {
        match outcome {
            StartOutcome::Root(c) => {
                converged += 1;
                if roots.iter().all(|r| (r - &c).norm() > 10.0 * tol) {
                    roots.push(c);
                }
            }
            StartOutcome::Zero => {
                converged += 1;
                zero_hits += 1;
            }
            StartOutcome::Failed => dropped += 1,
        }
    }
    let mut records: Vec<IdempotentRecord> =
        roots.par_iter().map(|c| classify(u, c, Origin::Newton)).collect();
    records.sort_by(|a, b| a.residual.total_cmp(&b.residual).then_with(|| lex_cmp(&a.c, &b.c)));
    NewtonSearch { records, n_starts, converged, zero_hits, dropped, seed, tol, max_iter }
}

#[derive(Debug, Clone)]
pub struct VariationalOptions {
    pub tol: f64,
    /// Ascent stops once `|x² - <x², x> x| <= stationarity * (1 + |x²|)`.
    pub stationarity: f64,
    pub max_iter: usize,
    pub polish_iter: usize,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        Self { tol: 1e-12, stationarity: 1e-8, max_iter: 20_000, polish_iter: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalOutcome {
    pub record: IdempotentRecord,
    /// Objective `<x, x²>` after every accepted ascent step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub stationary_point: AlgebraElement,
}

/// Ascent of `<x, x²>` on the unit sphere from `x0`; see
/// [`variational_search_with`].
pub fn variational_search(u: &CubicForm, x0: &AlgebraElement, tol: f64) -> Result<IdempotentRecord, IdempotentError> {
    let opts = VariationalOptions { tol, ..VariationalOptions::default() };
    variational_search_with(u, x0, &opts).map(|o| o.record)
}

/// Projected-gradient ascent with Armijo backtracking. At the stationary
/// point `x*`, returns a square-zero witness when `|x*²| <= tol`, otherwise
/// the idempotent `c = x*/<x*², x*>` polished by Newton to `|c² - c| <= tol`.
pub fn variational_search_with(
    u: &CubicForm,
    x0: &AlgebraElement,
    opts: &VariationalOptions,
) -> Result<VariationalOutcome, IdempotentError> {
    if x0.len() != u.dim() {
        return Err(IdempotentError::DimensionMismatch { expected: u.dim(), found: x0.len() });
    }
    if (x0.norm() - 1.0).abs() > 1e-8 {
        return Err(IdempotentError::NotUnit(x0.norm()));
    }
    let mut x = x0.normalize();
    let mut sq = u.product(&x, &x);
    let mut f = sq.dot(&x);
    let mut objective = vec![f];
    let mut eta = 1.0 / (1.0 + u.tensor_norm());
    let mut iterations = 0;
    let mut stationarity;
    loop {
        let tangent: DVector<f64> = (&sq - &x * f) * 3.0;
        stationarity = tangent.norm() / 3.0;
        if stationarity <= opts.stationarity * (1.0 + sq.norm()) {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(IdempotentError::NoConvergence { iterations, stationarity });
        }
        iterations += 1;
        let slope = tangent.norm_squared();
        let mut accepted = false;
        while eta > 1e-300 {
            let trial = (&x + &tangent * eta).normalize();
            let trial_sq = u.product(&trial, &trial);
            let trial_f = trial_sq.dot(&trial);
            // Rounding slack keeps the search from stalling once the gain
            // reaches the last bits of f.
            if trial_f >= f + 1e-4 * eta * slope - 4.0 * f64::EPSILON * f.abs() {
                x = trial;
                sq = trial_sq;
                f = trial_f;
                accepted = true;
                eta *= 2.0;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // No ascent direction left at working precision.
            break;
        }
        objective.push(f);
    }

    if sq.norm() <= opts.tol {
        let mut record = classify(u, &x, Origin::Variational);
        record.square_zero_witness = true;
        record.extremal = false;
        return Ok(VariationalOutcome { record, objective, iterations, stationary_point: x });
    }
    let start = &x / f;
    let c = newton_polish(u, &start, opts.tol, opts.polish_iter)
        .ok_or_else(|| IdempotentError::PolishFailed((u.product(&start, &start) - &start).norm()))?;
    let record = classify(u, &c, Origin::Variational);
    Ok(VariationalOutcome { record, objective, iterations, stationary_point: x })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericityEntry {
    pub index: usize,
    /// `min |lambda - ½|` over the spectrum of `L_c`.
    pub distance_to_half: f64,
    pub half_in_spectrum: bool,
    /// Smallest singular value of `2L_c - I` (independent SVD route).
    pub jacobian_sigma_min: f64,
    pub jacobian_singular: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericityReport {
    pub entries: Vec<GenericityEntry>,
    pub generic_evidence: bool,
    pub all_consistent: bool,
    pub tol: f64,
}

/// Flags idempotents with `½` in their Peirce spectrum. The form shows
/// generic evidence iff none of the found idempotents does; each flag is
/// cross-checked against singularity of the Newton Jacobian `2L_c - I`.
pub fn genericity_report(u: &CubicForm, records: &[IdempotentRecord], tol: f64) -> GenericityReport {
    let entries: Vec<GenericityEntry> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.square_zero_witness)
        .map(|(index, r)| {
            let distance_to_half = r.spectrum.iter().map(|l| (l - 0.5).abs()).fold(f64::INFINITY, f64::min);
            let n = r.c.len();
            let jac = u.operator(&r.c) * 2.0 - DMatrix::identity(n, n);
            let jacobian_sigma_min = jac.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
            let half_in_spectrum = distance_to_half <= tol;
            let jacobian_singular = jacobian_sigma_min <= 2.0 * tol;
            GenericityEntry {
                index,
                distance_to_half,
                half_in_spectrum,
                jacobian_sigma_min,
                jacobian_singular,
                consistent: half_in_spectrum == jacobian_singular,
            }
        })
        .collect();
    GenericityReport {
        generic_evidence: entries.iter().all(|e| !e.half_in_spectrum),
        all_consistent: entries.iter().all(|e| e.consistent),
        entries,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cartan_cubic, random_form};

    fn cube() -> CubicForm {
        CubicForm::from_monomials(1, [([0, 0, 0], 1.0)]).unwrap()
    }

    fn eiconal_cartan(d: usize) -> CubicForm {
        cartan_cubic(d).unwrap().scaled(1.0 / 6.0)
    }

    #[test]
    fn cube_has_single_idempotent() {
        let search = newton_search(&cube(), 16, 1, 1e-12, 100);
        assert_eq!(search.records.len(), 1);
        let c = &search.records[0];
        assert!((c.c[0] - 1.0 / 6.0).abs() < 1e-14);
        assert_eq!(c.spectrum.len(), 1);
        assert!((c.spectrum[0] - 1.0).abs() < 1e-12);
        assert!(c.primitive && c.extremal);
    }

    #[test]
    fn zero_form_has_no_idempotents() {
        let search = newton_search(&CubicForm::zero(3).unwrap(), 8, 1, 1e-12, 50);
        assert!(search.records.is_empty());
        assert_eq!(search.zero_hits, 8);
    }

    #[test]
    fn eiconal_idempotents_have_unit_norm() {
        let search = newton_search(&eiconal_cartan(1), 64, 3, 1e-12, 200);
        assert!(!search.records.is_empty());
        for r in &search.records {
            assert!(r.residual <= 1e-12);
            assert!((r.norm() - 1.0).abs() <= 1e-10, "norm {}", r.norm());
        }
    }

    #[test]
    fn newton_is_deterministic() {
        let u = random_form(4, 8).unwrap();
        let a = newton_search(&u, 32, 5, 1e-12, 100);
        let b = newton_search(&u, 32, 5, 1e-12, 100);
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.c, y.c);
        }
    }

    #[test]
    fn records_are_idempotents_with_unit_eigenvalue() {
        let u = random_form(5, 2).unwrap();
        let search = newton_search(&u, 64, 9, 1e-12, 100);
        assert!(!search.records.is_empty());
        for r in &search.records {
            assert!(r.residual <= 1e-12);
            assert!(r.spectrum.iter().any(|l| (l - 1.0).abs() <= 1e-10));
            let lc = u.mult_operator(&r.c).unwrap();
            assert!((&lc * &r.c - &r.c).norm() <= 1e-10);
        }
        for pair in search.records.windows(2) {
            assert!((&pair[0].c - &pair[1].c).norm() > 10.0 * 1e-12);
        }
    }

    #[test]
    fn newton_converges_quadratically_near_nondegenerate_root() {
        let u = random_form(4, 8).unwrap();
        let search = newton_search(&u, 32, 5, 1e-13, 100);
        let root = &search.records[0];
        let start = &root.c + DVector::from_element(4, 1e-3);
        let trace = newton_trace(&u, &start, 1e-15, 30);
        // Once in the quadratic regime r_{k+1} <= C r_k^2.
        let ratios: Vec<f64> = trace.windows(2).filter(|w| w[0] < 1e-2 && w[1] > 1e-14).map(|w| w[1] / (w[0] * w[0])).collect();
        assert!(!ratios.is_empty());
        assert!(ratios.iter().all(|&q| q < 1e3), "{trace:?}");
    }

    #[test]
    fn variational_cube() {
        let x0 = DVector::from_element(1, 1.0);
        let r = variational_search(&cube(), &x0, 1e-12).unwrap();
        assert!((r.c[0] - 1.0 / 6.0).abs() < 1e-14);
        assert_eq!(r.origin, Origin::Variational);
    }

    #[test]
    fn variational_square_zero_witness() {
        let u = CubicForm::from_monomials(2, [([0, 0, 1], 0.5)]).unwrap();
        let x0 = DVector::from_column_slice(&[0.0, 1.0]);
        let r = variational_search(&u, &x0, 1e-12).unwrap();
        assert!(r.square_zero_witness);
        assert_eq!(r.c, x0);
    }

    #[test]
    fn variational_on_eiconal_cartan_is_extremal_and_monotone() {
        let u = eiconal_cartan(1);
        let mut rng = substream(4, 0);
        for _ in 0..5 {
            let x0 = random_unit(&mut rng, 5);
            let out = variational_search_with(&u, &x0, &VariationalOptions::default()).unwrap();
            assert!(out.objective.windows(2).all(|w| w[1] >= w[0] - 8.0 * f64::EPSILON * w[0].abs()));
            let r = out.record;
            assert!(r.residual <= 1e-12);
            assert!(r.extremal && r.primitive);
            assert!(r.perp_spectrum.iter().all(|&l| l <= 0.5 + 1e-8));
        }
    }

    #[test]
    fn variational_rejects_non_unit_start() {
        let x0 = DVector::from_element(1, 2.0);
        assert!(matches!(variational_search(&cube(), &x0, 1e-12), Err(IdempotentError::NotUnit(_))));
    }

    #[test]
    fn genericity_examples() {
        let cube_search = newton_search(&cube(), 4, 1, 1e-12, 50);
        let report = genericity_report(&cube(), &cube_search.records, 1e-8);
        assert!(report.generic_evidence && report.all_consistent);

        for d in [1, 2] {
            let u = eiconal_cartan(d);
            let search = newton_search(&u, 32, 2, 1e-12, 200);
            let report = genericity_report(&u, &search.records, 1e-8);
            assert!(!report.generic_evidence);
            assert!(report.all_consistent);
            for r in &search.records {
                let halves = r.spectrum.iter().filter(|l| (*l - 0.5).abs() < 1e-8).count();
                assert_eq!(halves, 2 * d);
            }
        }

        let u = random_form(5, 1).unwrap();
        let search = newton_search(&u, 64, 1, 1e-12, 100);
        let report = genericity_report(&u, &search.records, 1e-8);
        assert!(report.generic_evidence);
        assert!(report.all_consistent);
    }
}
