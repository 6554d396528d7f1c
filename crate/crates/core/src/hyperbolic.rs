//! M-hyperbolicity of Hessian differences and the gap-ratio diagnostic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cubic::CubicForm;
use crate::hessian::RayFunction;
use crate::idempotent::newton_search;
use crate::linalg::{haar_orthogonal, max_abs, random_unit, substream, sym_eigenvalues_sorted};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MClass {
    /// Every eigenvalue vanishes (within `zero_tol`); hyperbolic for all M.
    ZeroClass,
    /// `λ_1 < 0 < λ_n` fails.
    Infinite,
    Finite(f64),
}

impl Serialize for MClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MClass::ZeroClass => s.serialize_str("zero-class"),
            MClass::Infinite => s.serialize_str("inf"),
            MClass::Finite(m) => s.serialize_f64(*m),
        }
    }
}

/// Smallest M with `1/M <= -λ_1/λ_n <= M`, eigenvalues ascending.
pub fn m_hyperbolicity(a: &DMatrix<f64>, zero_tol: f64) -> MClass {
    if max_abs(a) <= zero_tol {
        return MClass::ZeroClass;
    }
    let eig = sym_eigenvalues_sorted(a);
    m_from_extremes(eig[0], eig[eig.len() - 1])
}

fn m_from_extremes(lo: f64, hi: f64) -> MClass {
    if lo < 0.0 && hi > 0.0 {
        MClass::Finite((-lo / hi).max(-hi / lo))
    } else {
        MClass::Infinite
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSample {
    pub pair_index: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub m: MClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstPair {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub x: DVector<f64>,
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub y: DVector<f64>,
    /// Row-major orthogonal matrix applied to `H(y)` in orbit mode.
    pub rotation: Option<Vec<Vec<f64>>>,
    pub pair_index: usize,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    /// Sup of M over sampled and refined pairs; infinite once any pair
    /// violates the sign condition.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub m_sup: f64,
    /// Sup over the sampled pairs only.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub m_sup_sampled: f64,
    pub n_pairs: usize,
    pub violations: usize,
    pub zero_class_pairs: usize,
    /// Violations met during worst-pair refinement (not counted above).
    pub refinement_violations: usize,
    pub worst: Option<WorstPair>,
    pub seed: u64,
    pub orbit: bool,
    /// Absolute tolerance if given, else `None` and the relative rule
    /// `1e-10 (1 + |H(x)|_max + |H(y)|_max)` applies.
    pub zero_tol: Option<f64>,
    pub zero_tol_rule: String,
    pub refined_pairs: usize,
    pub hyperbolic_evidence: bool,
    #[serde(skip)]
    pub samples: Vec<PairSample>,
}

impl HyperbolicityReport {
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                let m = match s.m {
                    MClass::Finite(m) => m,
                    MClass::Infinite => f64::INFINITY,
                    MClass::ZeroClass => f64::NAN,
                };
                vec![s.pair_index as f64, s.lambda_min, s.lambda_max, m]
            })
            .collect()
    }
}

pub const CSV_HEADER: [&str; 4] = ["pair_index", "lambda_min", "lambda_max", "M"];

/// Number of sampled worst pairs polished by coordinate ascent.
pub const REFINED_PAIRS: usize = 8;

struct PairEval {
    class: MClass,
    lo: f64,
    hi: f64,
}

struct Sampler<'a> {
    r: &'a RayFunction,
    zero_tol: Option<f64>,
}

impl Sampler<'_> {
    fn eval(&self, x: &DVector<f64>, y: &DVector<f64>, rot: Option<&DMatrix<f64>>) -> PairEval {
        let hx = self.r.hessian(x).expect("unit vector");
        let mut hy = self.r.hessian(y).expect("unit vector");
        if let Some(q) = rot {
            hy = q * hy * q.transpose();
        }
        let tol = self.zero_tol.unwrap_or_else(|| 1e-10 * (1.0 + max_abs(&hx) + max_abs(&hy)));
        let diff = hx - hy;
        if max_abs(&diff) <= tol {
            return PairEval { class: MClass::ZeroClass, lo: 0.0, hi: 0.0 };
        }
        let eig = sym_eigenvalues_sorted(&diff);
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        PairEval { class: m_from_extremes(lo, hi), lo, hi }
    }
}

fn pair_inputs(seed: u64, index: usize, n: usize, orbit: bool) -> (DVector<f64>, DVector<f64>, Option<DMatrix<f64>>) {
    let mut rng = substream(seed, index as u64);
    let x = random_unit(&mut rng, n);
    let y = random_unit(&mut rng, n);
    let rot = orbit.then(|| haar_orthogonal(&mut rng, n));
    (x, y, rot)
}

/// Sweeps allowed per refinement; suprema approached only in the limit
/// `y -> x` would otherwise keep the ascent crawling.
pub const REFINE_SWEEPS: usize = 400;

/// Coordinate ascent of M over `(x, y)` on the product of unit spheres and,
/// in orbit mode, over Givens rotations of `U`.
fn refine(
    sampler: &Sampler<'_>,
    mut x: DVector<f64>,
    mut y: DVector<f64>,
    mut rot: Option<DMatrix<f64>>,
    mut best: f64,
) -> (DVector<f64>, DVector<f64>, Option<DMatrix<f64>>, f64, usize) {
    let n = x.len();
    let planes: Vec<(usize, usize)> =
        if rot.is_some() { (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect() } else { Vec::new() };
    let mut violations = 0;
    let mut step = 1e-2;
    let mut sweeps = 0;
    while step > 1e-9 && sweeps < REFINE_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for k in 0..2 * n + planes.len() {
            for sign in [1.0, -1.0] {
                let (mut tx, mut ty, mut trot) = (x.clone(), y.clone(), rot.clone());
                if k < n {
                    tx[k] += sign * step;
                    tx.normalize_mut();
                } else if k < 2 * n {
                    ty[k - n] += sign * step;
                    ty.normalize_mut();
                } else if let Some(q) = trot.as_mut() {
                    let (i, j) = planes[k - 2 * n];
                    let (sn, cs) = (sign * step).sin_cos();
                    for col in 0..n {
                        let (a, b) = (q[(i, col)], q[(j, col)]);
                        q[(i, col)] = cs * a - sn * b;
                        q[(j, col)] = sn * a + cs * b;
                    }
                }
                match sampler.eval(&tx, &ty, trot.as_ref()).class {
                    MClass::Finite(m) if m > best => {
                        best = m;
                        x = tx;
                        y = ty;
                        rot = trot;
                        improved = true;
                    }
                    MClass::Infinite => violations += 1,
                    _ => {}
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, y, rot, best, violations)
}

/// Samples `n_pairs` unit pairs `(x, y)` and classifies `H(x) - H(y)`, or
/// `H(x) - U H(y) U^T` with Haar-random `U` in orbit mode. The
/// [`REFINED_PAIRS`] largest finite M are then tightened by coordinate
/// ascent, which in orbit mode also moves `U`.
pub fn hyperbolic_set_estimate(
    r: &RayFunction,
    n_pairs: usize,
    seed: u64,
    orbit: bool,
    zero_tol: Option<f64>,
) -> HyperbolicityReport {
    let n = r.dim();
    let sampler = Sampler { r, zero_tol };
    let samples: Vec<PairSample> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let (x, y, rot) = pair_inputs(seed, i, n, orbit);
            let e = sampler.eval(&x, &y, rot.as_ref());
            PairSample { pair_index: i, lambda_min: e.lo, lambda_max: e.hi, m: e.class }
        })
        .collect();
    let violations = samples.iter().filter(|s| s.m == MClass::Infinite).count();
    let zero_class_pairs = samples.iter().filter(|s| s.m == MClass::ZeroClass).count();
    let mut finite: Vec<(usize, f64)> = samples
        .iter()
        .filter_map(|s| match s.m {
            MClass::Finite(m) => Some((s.pair_index, m)),
            _ => None,
        })
        .collect();
    finite.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let m_sup_sampled = if violations > 0 {
        f64::INFINITY
    } else {
        finite.first().map_or(1.0, |f| f.1)
    };

    let refined: Vec<(usize, DVector<f64>, DVector<f64>, Option<DMatrix<f64>>, f64, usize)> = finite
        .iter()
        .take(REFINED_PAIRS)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&(i, m)| {
            let (x, y, rot) = pair_inputs(seed, i, n, orbit);
            let (x, y, rot, best, v) = refine(&sampler, x, y, rot, m);
            (i, x, y, rot, best, v)
        })
        .collect();
    let refinement_violations = refined.iter().map(|t| t.5).sum();
    let worst = refined
        .iter()
        .max_by(|a, b| a.4.total_cmp(&b.4).then(b.0.cmp(&a.0)))
        .map(|(i, x, y, rot, m, _)| WorstPair {
            x: x.clone(),
            y: y.clone(),
            rotation: rot.as_ref().map(|q| q.row_iter().map(|row| row.iter().copied().collect()).collect()),
            pair_index: *i,
            m: *m,
        });
    let m_sup = if violations > 0 {
        f64::INFINITY
    } else {
        worst.as_ref().map_or(m_sup_sampled, |w| w.m.max(m_sup_sampled))
    };
    HyperbolicityReport {
        m_sup,
        m_sup_sampled,
        n_pairs,
        violations,
        zero_class_pairs,
        refinement_violations,
        worst,
        seed,
        orbit,
        zero_tol,
        zero_tol_rule: match zero_tol {
            Some(t) => format!("absolute {t:e}"),
            None => "1e-10 * (1 + max|H(x)| + max|H(y)|)".to_string(),
        },
        refined_pairs: refined.len(),
        hyperbolic_evidence: violations == 0,
        samples,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("gap ratio needs at least 3 eigenvalues, got {0}")]
    TooShort(usize),
}

/// With `μ_1 >= ... >= μ_n`, `max(|μ_1/μ_3|, |μ_n/μ_{n-2}|)`; a denominator
/// of size at most `zero_tol` gives infinity.
pub fn gap_ratio(spectrum: &[f64], zero_tol: f64) -> Result<f64, GapError> {
    let n = spectrum.len();
    if n < 3 {
        return Err(GapError::TooShort(n));
    }
    let mut mu = spectrum.to_vec();
    mu.sort_by(|a, b| b.total_cmp(a));
    let ratio = |num: f64, den: f64| if den.abs() <= zero_tol { f64::INFINITY } else { (num / den).abs() };
    Ok(ratio(mu[0], mu[2]).max(ratio(mu[n - 1], mu[n - 3])))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotentGap {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub direction: DVector<f64>,
    pub extremal: bool,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapScanReport {
    pub n_dirs: usize,
    pub seed: u64,
    pub delta: f64,
    pub zero_tol: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub max_ratio: f64,
    /// Sampled directions with `rho(d) >= 2 - delta`.
    pub violating_dirs: usize,
    pub idempotents: Vec<IdempotentGap>,
    /// Some direction (sampled or idempotent) has `rho(d) >= 2 - delta`, so
    /// the condition `rho < 2 - delta` fails.
    pub condition_fails: bool,
    /// Minimum of `rho` over extremal idempotent directions.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub min_extremal_ratio: f64,
    pub newton_starts: usize,
}

pub const GAP_ZERO_TOL: f64 = 1e-12;
pub const GAP_NEWTON_STARTS: usize = 64;

/// Gap ratios of `spectrum(½ L_d)` over seeded unit directions and over
/// every idempotent direction found by Newton multistart.
pub fn gap_scan(u: &CubicForm, n_dirs: usize, seed: u64, delta: f64) -> GapScanReport {
    let n = u.dim();
    let threshold = 2.0 - delta;
    let ratio_at = |d: &DVector<f64>| {
        let spec = sym_eigenvalues_sorted(&(u.operator(d) * 0.5));
        gap_ratio(&spec, GAP_ZERO_TOL).unwrap_or(f64::NAN)
    };
    let ratios: Vec<f64> = (0..n_dirs).into_par_iter().map(|i| ratio_at(&random_unit(&mut substream(seed, i as u64), n))).collect();
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violating_dirs = ratios.iter().filter(|&&r| r >= threshold).count();
    let search = newton_search(u, GAP_NEWTON_STARTS, seed, 1e-12, 200);
    let idempotents: Vec<IdempotentGap> = search
        .records
        .iter()
        .map(|rec| {
            let direction = rec.c.normalize();
            IdempotentGap { ratio: ratio_at(&direction), direction, extremal: rec.extremal }
        })
        .collect();
    let min_extremal_ratio =
        idempotents.iter().filter(|g| g.extremal).map(|g| g.ratio).fold(f64::INFINITY, f64::min);
    let condition_fails = violating_dirs > 0 || idempotents.iter().any(|g| g.ratio >= threshold);
    GapScanReport {
        n_dirs,
        seed,
        delta,
        zero_tol: GAP_ZERO_TOL,
        max_ratio,
        violating_dirs,
        idempotents,
        condition_fails,
        min_extremal_ratio,
        newton_starts: GAP_NEWTON_STARTS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cartan_cubic, normalize_munzner, random_form, u5_determinant};
    use crate::U5Variant;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn m_examples() {
        assert_eq!(m_hyperbolicity(&diag(&[-1.0, 1.0]), 1e-12), MClass::Finite(1.0));
        assert_eq!(m_hyperbolicity(&diag(&[-2.0, 1.0, 1.0]), 1e-12), MClass::Finite(2.0));
        assert_eq!(m_hyperbolicity(&DMatrix::identity(3, 3), 1e-12), MClass::Infinite);
        assert_eq!(m_hyperbolicity(&DMatrix::zeros(3, 3), 1e-12), MClass::ZeroClass);
    }

    #[test]
    fn m_is_scale_invariant() {
        let a = diag(&[-3.0, 0.5, 2.0]);
        assert_eq!(m_hyperbolicity(&a, 1e-12), m_hyperbolicity(&(&a * 7.5), 1e-12));
    }

    fn u5() -> CubicForm {
        normalize_munzner(&u5_determinant(U5Variant::Symmetric), 1e-9).unwrap().0
    }

    #[test]
    fn u5_pairs_are_hyperbolic() {
        let r = RayFunction::new(u5(), 1.0).unwrap();
        for orbit in [false, true] {
            let rep = hyperbolic_set_estimate(&r, 2000, 1, orbit, None);
            assert_eq!(rep.violations, 0, "orbit {orbit}");
            assert!(rep.m_sup.is_finite() && rep.m_sup >= 1.0);
        }
    }

    #[test]
    fn antipodal_idempotent_pair_gives_seven_halves() {
        let u = u5().scaled(1.0 / 6.0);
        let c = newton_search(&u, 16, 1, 1e-13, 200).records[0].c.clone();
        let r = RayFunction::new(u, 1.0).unwrap();
        let h = r.hessian(&c).unwrap();
        match m_hyperbolicity(&(&h * 2.0), 1e-12) {
            MClass::Finite(m) => assert!((m - 3.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_form_is_zero_class() {
        let r = RayFunction::new(CubicForm::zero(4).unwrap(), 1.0).unwrap();
        let rep = hyperbolic_set_estimate(&r, 50, 1, false, None);
        assert_eq!(rep.zero_class_pairs, 50);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn random_form_has_violations() {
        let r = RayFunction::new(random_form(5, 1).unwrap(), 1.0).unwrap();
        let rep = hyperbolic_set_estimate(&r, 2000, 1, false, None);
        assert!(rep.violations > 0);
        assert!(rep.m_sup.is_infinite());
    }

    #[test]
    fn estimate_is_deterministic() {
        let r = RayFunction::new(u5(), 1.0).unwrap();
        let a = hyperbolic_set_estimate(&r, 500, 9, true, None);
        let b = hyperbolic_set_estimate(&r, 500, 9, true, None);
        assert_eq!(a.m_sup, b.m_sup);
        assert_eq!(a.csv_rows(), b.csv_rows());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_ratio(&[4.0, 2.0, 1.0, 1.0, -1.0], 1e-12).unwrap(), 4.0);
        assert_eq!(gap_ratio(&[1.0, 1.0, 1.0], 1e-12).unwrap(), 1.0);
        assert_eq!(gap_ratio(&[1.0, 0.5, 0.5, -1.0, -1.0], 1e-12).unwrap(), 2.0);
        assert!(gap_ratio(&[1.0, 0.0, 0.0], 1e-12).unwrap().is_infinite());
        assert_eq!(gap_ratio(&[1.0, 2.0], 1e-12), Err(GapError::TooShort(2)));
        let s = [3.0, -0.2, 1.5, 0.7, -2.0];
        let scaled: Vec<f64> = s.iter().map(|v| v * 4.2).collect();
        assert!((gap_ratio(&s, 1e-12).unwrap() - gap_ratio(&scaled, 1e-12).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn gap_scan_on_cartan_and_random() {
        let rep = gap_scan(&cartan_cubic(1).unwrap(), 200, 1, 0.1);
        assert!(rep.idempotents.iter().any(|g| g.extremal));
        assert!(rep.min_extremal_ratio >= 2.0 - 1e-8);
        assert!(rep.condition_fails);
        let rep = gap_scan(&random_form(5, 1).unwrap(), 1000, 1, 0.1);
        assert!(rep.max_ratio.is_finite());
    }
}
