//! Peirce decomposition of `L_c`, fusion laws, eiconal and Münzner identity
//! residuals, the Clifford system on `V_½(c)` and Hurwitz–Radon bounds.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cubic::{AlgebraElement, CubicForm};
use crate::linalg::{gaussian_vector, random_unit, sym_eigen_sorted, substream};

/// Largest `|c² - c|` accepted as an idempotent.
pub const IDEMPOTENT_TOL: f64 = 1e-8;
/// Distance from a profile label within which an eigenvalue counts as
/// matching it in [`dimension_check`].
pub const PROFILE_TOL: f64 = 1e-6;
pub const FUSION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeirceError {
    #[error("not an idempotent: |c² - c| = {0:e}")]
    NotIdempotent(f64),
    #[error("dimension mismatch: form has dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spectrum {0:?} is not of eiconal profile {{1, 1/2, -1}}")]
    NotEiconalProfile(Vec<f64>),
    #[error("Peirce space V_{0} is empty")]
    MissingEigenspace(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct PeirceCluster {
    pub center: f64,
    pub multiplicity: usize,
    /// Orthonormal basis, one column per eigenvector.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeirceDecomposition {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub c: AlgebraElement,
    /// Ascending by center.
    pub clusters: Vec<PeirceCluster>,
    pub cluster_tol: f64,
    #[serde(skip)]
    eigenvalues: Vec<f64>,
    #[serde(skip)]
    eigenvectors: DMatrix<f64>,
}

impl PeirceDecomposition {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        self.clusters.iter().map(|k| (k.center, k.multiplicity)).collect()
    }

    /// Cluster whose center is within `tol` of `lambda`.
    pub fn cluster_near(&self, lambda: f64, tol: f64) -> Option<&PeirceCluster> {
        self.clusters.iter().find(|k| (k.center - lambda).abs() <= tol)
    }

    pub fn multiplicity_near(&self, lambda: f64, tol: f64) -> usize {
        self.cluster_near(lambda, tol).map_or(0, |k| k.multiplicity)
    }

    /// Eigenvectors assigned to the nearest of `labels`, as `(label, basis)`.
    fn label_spaces(&self, labels: &[f64]) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let n = self.dim();
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
        let mut deviation = vec![0.0_f64; labels.len()];
        for (i, &value) in self.eigenvalues.iter().enumerate() {
            let (best, dist) = labels
                .iter()
                .enumerate()
                .map(|(j, l)| (j, (value - l).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("labels nonempty");
            columns[best].push(i);
            deviation[best] = deviation[best].max(dist);
        }
        let spaces = columns
            .iter()
            .map(|cols| DMatrix::from_fn(n, cols.len(), |r, c| self.eigenvectors[(r, cols[c])]))
            .collect();
        (spaces, deviation)
    }
}

/// Eigendecomposition of `L_c` with eigenvalues merged into clusters.
///
/// Consecutive ascending eigenvalues closer than `cluster_tol` share a
/// cluster; the default is `1e-6 |L_c|_2`.
pub fn peirce_decompose(
    u: &CubicForm,
    c: &AlgebraElement,
    cluster_tol: Option<f64>,
) -> Result<PeirceDecomposition, PeirceError> {
    if c.len() != u.dim() {
        return Err(PeirceError::DimensionMismatch { expected: u.dim(), found: c.len() });
    }
    let residual = (u.product(c, c) - c).norm();
    if !(residual <= IDEMPOTENT_TOL) {
        return Err(PeirceError::NotIdempotent(residual));
    }
    let (values, vectors) = sym_eigen_sorted(&u.operator(c));
    let spectral_norm = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cluster_tol = cluster_tol.unwrap_or(1e-6 * spectral_norm);
    let n = values.len();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.last_mut() {
            Some(g) if values[i] - values[*g.last().unwrap()] <= cluster_tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let clusters = groups
        .iter()
        .map(|g| PeirceCluster {
            center: g.iter().map(|&i| values[i]).sum::<f64>() / g.len() as f64,
            multiplicity: g.len(),
            basis: DMatrix::from_fn(n, g.len(), |r, k| vectors[(r, g[k])]),
        })
        .collect();
    Ok(PeirceDecomposition { c: c.clone(), clusters, cluster_tol, eigenvalues: values, eigenvectors: vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionProfile {
    Eiconal,
    Jordan,
    Free,
}

impl std::str::FromStr for FusionProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eiconal" => Ok(Self::Eiconal),
            "jordan" => Ok(Self::Jordan),
            "free" => Ok(Self::Free),
            other => Err(format!("unknown fusion profile '{other}'")),
        }
    }
}

/// `(labels, cells)` where a cell `(i, j, targets)` prescribes
/// `V_{labels[i]} V_{labels[j]} ⊂ ⊕_{t ∈ targets} V_{labels[t]}`.
type FusionRules = (Vec<f64>, Vec<(usize, usize, Vec<usize>)>);

fn fusion_rules(profile: FusionProfile, decomp: &PeirceDecomposition) -> FusionRules {
    match profile {
        // V_1 = Rc for eiconal algebras, every idempotent being primitive.
        FusionProfile::Eiconal => (
            vec![1.0, 0.5, -1.0],
            vec![
                (0, 0, vec![0]),
                (0, 1, vec![1]),
                (0, 2, vec![2]),
                (2, 2, vec![0]),
                (2, 1, vec![1]),
                (1, 1, vec![0, 2]),
            ],
        ),
        FusionProfile::Jordan => (
            vec![0.0, 0.5, 1.0],
            vec![
                (0, 0, vec![0]),
                (0, 1, vec![1]),
                (0, 2, vec![]),
                (1, 1, vec![0, 2]),
                (2, 1, vec![1]),
                (2, 2, vec![2]),
            ],
        ),
        FusionProfile::Free => {
            let labels: Vec<f64> = decomp.clusters.iter().map(|k| k.center).collect();
            let all: Vec<usize> = (0..labels.len()).collect();
            let mut cells = Vec::new();
            for i in 0..labels.len() {
                for j in i..labels.len() {
                    cells.push((i, j, all.clone()));
                }
            }
            (labels, cells)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub target: Vec<f64>,
    pub dims: (usize, usize),
    pub samples: usize,
    /// Max over samples of `|x·y - P_target(x·y)| / |x·y|`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub leakage: f64,
    /// Max over samples of the relative component of `x·y` in each label space.
    pub components: Vec<f64>,
    pub skipped: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionReport {
    pub profile: FusionProfile,
    pub labels: Vec<f64>,
    /// Dimension of each label space.
    pub label_dims: Vec<usize>,
    /// Max distance of an assigned eigenvalue from its label.
    pub label_deviation: Vec<f64>,
    pub cells: Vec<FusionCell>,
    /// Eiconal profile: max `|<x y, z>|` for unit `x, y, z` in `c⊥` spaces
    /// with `lambda_1 + lambda_2 + lambda_3 != 0`.
    pub orthogonality: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
}

fn sample_in(basis: &DMatrix<f64>, rng: &mut rand_chacha::ChaCha8Rng) -> DVector<f64> {
    let coeffs = random_unit(rng, basis.ncols());
    basis * coeffs
}

/// Samples products of unit elements of Peirce spaces and measures how much
/// of each product falls outside the space prescribed by `profile`.
///
/// Every eigenvector of `L_c` is assigned to the nearest profile label, so a
/// spectrum that does not match the profile shows up as leakage. Products
/// shorter than `1e-6 |L_c|` are measured against that floor instead of
/// their own length. The free profile prescribes nothing and reports the
/// component grid over the actual clusters.
pub fn fusion_table(
    u: &CubicForm,
    decomp: &PeirceDecomposition,
    profile: FusionProfile,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> FusionReport {
    let (labels, cells) = fusion_rules(profile, decomp);
    let (spaces, label_deviation) = match profile {
        FusionProfile::Free => {
            (decomp.clusters.iter().map(|k| k.basis.clone()).collect::<Vec<_>>(), vec![0.0; labels.len()])
        }
        _ => decomp.label_spaces(&labels),
    };
    let op_scale = decomp.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-6 * op_scale.max(f64::MIN_POSITIVE);
    let projectors: Vec<DMatrix<f64>> = spaces.iter().map(|b| b * b.transpose()).collect();
    let n = decomp.dim();

    let results: Vec<FusionCell> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, (i, j, target))| {
            let (bi, bj) = (&spaces[*i], &spaces[*j]);
            let mut cell = FusionCell {
                lambda1: labels[*i],
                lambda2: labels[*j],
                target: target.iter().map(|&t| labels[t]).collect(),
                dims: (bi.ncols(), bj.ncols()),
                samples: 0,
                leakage: 0.0,
                components: vec![0.0; labels.len()],
                skipped: bi.ncols() == 0 || bj.ncols() == 0,
                pass: true,
            };
            if cell.skipped {
                return cell;
            }
            let target_proj = target.iter().fold(DMatrix::zeros(n, n), |acc, &t| acc + &projectors[t]);
            for s in 0..n_samples {
                let mut rng = substream(seed, ((idx as u64) << 32) | s as u64);
                let x = sample_in(bi, &mut rng);
                let y = sample_in(bj, &mut rng);
                let p = u.product(&x, &y);
                let denom = p.norm().max(floor);
                let outside = (&p - &target_proj * &p).norm() / denom;
                cell.leakage = cell.leakage.max(outside);
                for (k, proj) in projectors.iter().enumerate() {
                    cell.components[k] = cell.components[k].max((proj * &p).norm() / denom);
                }
            }
            cell.samples = n_samples;
            cell.pass = profile == FusionProfile::Free || cell.leakage <= tol;
            cell
        })
        .collect();

    let orthogonality = (profile == FusionProfile::Eiconal)
        .then(|| triple_orthogonality(u, &labels[1..], &spaces[1..], n_samples, seed));
    let pass = results.iter().all(|c| c.skipped || c.pass) && orthogonality.is_none_or(|o| o <= tol);
    FusionReport {
        profile,
        label_dims: spaces.iter().map(|b| b.ncols()).collect(),
        labels,
        label_deviation,
        cells: results,
        orthogonality,
        n_samples,
        seed,
        tol,
        pass,
    }
}

fn triple_orthogonality(u: &CubicForm, labels: &[f64], spaces: &[DMatrix<f64>], n_samples: usize, seed: u64) -> f64 {
    let mut triples = Vec::new();
    for a in 0..labels.len() {
        for b in a..labels.len() {
            for c in 0..labels.len() {
                if labels[a] + labels[b] + labels[c] != 0.0
                    && spaces[a].ncols() > 0
                    && spaces[b].ncols() > 0
                    && spaces[c].ncols() > 0
                {
                    triples.push((a, b, c));
                }
            }
        }
    }
    triples
        .par_iter()
        .enumerate()
        .map(|(idx, &(a, b, c))| {
            (0..n_samples)
                .map(|s| {
                    let mut rng = substream(seed ^ 0x0f0f, ((idx as u64) << 32) | s as u64);
                    let x = sample_in(&spaces[a], &mut rng);
                    let y = sample_in(&spaces[b], &mut rng);
                    let z = sample_in(&spaces[c], &mut rng);
                    u.product(&x, &y).dot(&z).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Raw,
    /// Product divided by 6, the eiconal normalization of a Münzner form.
    Eiconal,
}

impl Scaling {
    pub fn apply(self, u: &CubicForm) -> CubicForm {
        match self {
            Scaling::Raw => u.clone(),
            Scaling::Eiconal => u.scaled(1.0 / 6.0),
        }
    }
}

impl std::str::FromStr for Scaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Self::Raw),
            "eiconal" => Ok(Self::Eiconal),
            other => Err(format!("unknown scaling '{other}'")),
        }
    }
}

/// Max relative residuals of the eiconal identities over seeded samples.
#[derive(Debug, Clone, Serialize)]
pub struct EiconalResiduals {
    pub scaling: Scaling,
    pub samples: usize,
    pub seed: u64,
    /// `<x², x²> - <x, x>²`.
    pub norm_square: f64,
    /// `x³ - <x, x> x`.
    pub cube: f64,
    /// `L_{x²} + 2 L_x² - <x, x> - 2 x⊗x`.
    pub operator_identity: f64,
    /// `x(yz) + y(zx) + z(xy) - <x,y>z - <y,z>x - <z,x>y`.
    pub trilinear: f64,
    /// `[L_{x²}, L_x²]`.
    pub near_jordan: f64,
}

impl EiconalResiduals {
    pub fn max(&self) -> f64 {
        [self.norm_square, self.cube, self.operator_identity, self.trilinear, self.near_jordan]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn eiconal_residuals(u: &CubicForm, scaling: Scaling, n_samples: usize, seed: u64) -> EiconalResiduals {
    let v = scaling.apply(u);
    let n = v.dim();
    let per_sample: Vec<[f64; 5]> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, s as u64);
            let x = gaussian_vector(&mut rng, n);
            let y = gaussian_vector(&mut rng, n);
            let z = gaussian_vector(&mut rng, n);
            let r2 = x.norm_squared();
            let x2 = v.product(&x, &x);
            let norm_square = (x2.norm_squared() - r2 * r2).abs() / (r2 * r2);
            let cube = (v.product(&x, &x2) - &x * r2).norm() / (r2 * r2.sqrt());
            let lx = v.operator(&x);
            let lx2 = v.operator(&x2);
            let lx_sq = &lx * &lx;
            let ident = &lx2 + &lx_sq * 2.0 - DMatrix::identity(n, n) * r2 - &x * x.transpose() * 2.0;
            let operator_identity = ident.norm() / r2;
            let lhs = v.product(&x, &v.product(&y, &z)) + v.product(&y, &v.product(&z, &x)) + v.product(&z, &v.product(&x, &y));
            let rhs = &z * x.dot(&y) + &x * y.dot(&z) + &y * z.dot(&x);
            let trilinear = (lhs - rhs).norm() / (x.norm() * y.norm() * z.norm());
            let near_jordan = (&lx2 * &lx_sq - &lx_sq * &lx2).norm() / (r2 * r2);
            [norm_square, cube, operator_identity, trilinear, near_jordan]
        })
        .collect();
    let max_of = |k: usize| per_sample.iter().map(|r| r[k]).fold(0.0, f64::max);
    EiconalResiduals {
        scaling,
        samples: n_samples,
        seed,
        norm_square: max_of(0),
        cube: max_of(1),
        operator_identity: max_of(2),
        trilinear: max_of(3),
        near_jordan: max_of(4),
    }
}

/// Max of `|[L_x, L_{x²}]| / |x|³` over seeded samples; vanishes for Jordan
/// algebras.
pub fn jordan_residual(u: &CubicForm, n_samples: usize, seed: u64) -> f64 {
    (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let x = gaussian_vector(&mut substream(seed, s as u64), u.dim());
            let lx = u.operator(&x);
            let lx2 = u.operator(&u.product(&x, &x));
            (&lx * &lx2 - &lx2 * &lx).norm() / x.norm().powi(3)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct MunznerResiduals {
    pub samples: usize,
    pub seed: u64,
    /// Max of `| |grad u|² / (9|x|⁴) - 1 |`.
    pub munzner: f64,
    /// Max of `|trace L_{e_i}|` over the basis.
    pub harmonicity: f64,
}

pub fn munzner_residuals(u: &CubicForm, n_samples: usize, seed: u64) -> MunznerResiduals {
    let munzner = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let x = gaussian_vector(&mut substream(seed, s as u64), u.dim());
            let grad = u.product(&x, &x) * 0.5;
            (grad.norm_squared() / (9.0 * x.norm_squared().powi(2)) - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max);
    let harmonicity = u.basis_traces().iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    MunznerResiduals { samples: n_samples, seed, munzner, harmonicity }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliffordResiduals {
    pub samples: usize,
    pub seed: u64,
    /// Max over unit `x ∈ V_{-1}` of `|B^T L_x² B - ¾<x,x> I|`, with `B` an
    /// orthonormal basis of `V_½`.
    pub clifford: f64,
    /// `|P (2 L_c² + L_c - 1) P|` with `P` the projector onto `c⊥`.
    pub lccc: f64,
    pub dim_half: usize,
    pub dim_half_even: bool,
}

/// Clifford-system residuals of an eiconal-scaled form at an idempotent.
pub fn clifford_check(
    u: &CubicForm,
    decomp: &PeirceDecomposition,
    n_samples: usize,
    seed: u64,
) -> Result<CliffordResiduals, PeirceError> {
    let (spaces, _) = decomp.label_spaces(&[1.0, 0.5, -1.0]);
    let (half, minus) = (&spaces[1], &spaces[2]);
    if minus.ncols() == 0 {
        return Err(PeirceError::MissingEigenspace(-1.0));
    }
    if half.ncols() == 0 {
        return Err(PeirceError::MissingEigenspace(0.5));
    }
    let clifford = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let x = sample_in(minus, &mut substream(seed, s as u64));
            clifford_residual(u, half, &x)
        })
        .reduce(|| 0.0, f64::max);
    let n = decomp.dim();
    let c = &decomp.c;
    let lc = u.operator(c);
    let p = DMatrix::identity(n, n) - c * c.transpose() / c.norm_squared();
    let lccc = (&p * (&lc * &lc * 2.0 + &lc - DMatrix::identity(n, n)) * &p).norm();
    Ok(CliffordResiduals { samples: n_samples, seed, clifford, lccc, dim_half: half.ncols(), dim_half_even: half.ncols() % 2 == 0 })
}

/// `|B^T L_x² B - ¾<x,x> I|_F` for a basis `B` of `V_½`.
pub fn clifford_residual(u: &CubicForm, half_basis: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let lx = u.operator(x);
    let lb = &lx * half_basis;
    let gram = lb.transpose() * &lb;
    let k = half_basis.ncols();
    (gram - DMatrix::identity(k, k) * (0.75 * x.norm_squared())).norm()
}

/// `rho(m) = 8a + 2^b` for `m = 2^{4a+b} · odd`, `0 <= b <= 3`.
pub fn hurwitz_radon(m: u64) -> u64 {
    assert!(m >= 1, "Hurwitz-Radon function needs m >= 1");
    let k = m.trailing_zeros() as u64;
    8 * (k / 4) + (1 << (k % 4))
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionVerdict {
    pub n: usize,
    pub dim_minus: usize,
    pub dim_half: usize,
    /// `dim V_{-1} - 1 <= rho(½ dim V_½)`.
    pub radon_bound: bool,
    pub harmonic: bool,
    /// `m = dim V_{-1} - 1`.
    pub m: usize,
    pub half_is_2m: Option<bool>,
    pub rho_m_at_least_m: Option<bool>,
    pub n_is_3m_plus_2: Option<bool>,
    pub pass: bool,
}

/// Hurwitz–Radon dimensional restrictions on an eiconal Peirce profile.
pub fn dimension_check(decomp: &PeirceDecomposition, harmonic: bool) -> Result<DimensionVerdict, PeirceError> {
    let profile_ok = decomp.eigenvalues.iter().all(|v| [1.0, 0.5, -1.0].iter().any(|l| (v - l).abs() <= PROFILE_TOL))
        && decomp.eigenvalues.iter().filter(|v| (*v - 1.0).abs() <= PROFILE_TOL).count() == 1;
    if !profile_ok {
        return Err(PeirceError::NotEiconalProfile(decomp.eigenvalues.clone()));
    }
    let count = |l: f64| decomp.eigenvalues.iter().filter(|v| (*v - l).abs() <= PROFILE_TOL).count();
    Ok(dimension_check_counts(decomp.dim(), count(-1.0), count(0.5), harmonic))
}

/// [`dimension_check`] on bare multiplicities.
pub fn dimension_check_counts(n: usize, dim_minus: usize, dim_half: usize, harmonic: bool) -> DimensionVerdict {
    let radon_bound = dim_half.is_multiple_of(2)
        && (dim_half == 0 && dim_minus <= 1 || dim_half > 0 && dim_minus as u64 <= 1 + hurwitz_radon(dim_half as u64 / 2));
    let m = dim_minus.saturating_sub(1);
    let (half_is_2m, rho_m_at_least_m, n_is_3m_plus_2) = if harmonic {
        let rho_ok = m >= 1 && hurwitz_radon(m as u64) >= m as u64;
        (Some(dim_half == 2 * m), Some(rho_ok), Some(n == 3 * m + 2 && [5, 8, 14, 26].contains(&n)))
    } else {
        (None, None, None)
    };
    let pass = radon_bound && [half_is_2m, rho_m_at_least_m, n_is_3m_plus_2].iter().all(|f| f.unwrap_or(true));
    DimensionVerdict { n, dim_minus, dim_half, radon_bound, harmonic, m, half_is_2m, rho_m_at_least_m, n_is_3m_plus_2, pass }
}
