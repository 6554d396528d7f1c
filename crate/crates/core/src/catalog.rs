//! Named cubic forms, the Münzner normalizer and the form selector language.
//!
//! Selectors: `cartan:<d>`, `u5`, `u5-printed`, `u9`, `triality:<d>`,
//! `random:<dim>:<seed>`, `file:<path>`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::cubic::{CubicForm, FormError, MonomialSum};
use crate::division::{check_dimension, real_triple, DivisionError};
use crate::linalg::{random_unit, substream};

/// Seed of the fixed probe set used by [`normalize_munzner`].
pub const MUNZNER_PROBE_SEED: u64 = 0x5eed_4d75_6e7a;
pub const MUNZNER_PROBE_POINTS: usize = 1000;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error("triality form needs d in {{2, 4, 8}}, got {0}")]
    InvalidTriality(usize),
    #[error("form is not eiconal: |grad u|^2/|x|^4 has mean {kappa} and relative spread {spread:e}")]
    NotEiconal { kappa: f64, spread: f64 },
    #[error("unknown form selector `{0}`")]
    UnknownSelector(String),
}

/// Linear form `sum coeffs[i] x_i` on `R^dim` as a coefficient vector.
fn linear(dim: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut l = vec![0.0; dim];
    for &(i, c) in entries {
        l[i] += c;
    }
    l
}

/// Adds `coeff * det(M)` for a 3×3 matrix of linear forms.
fn add_determinant(sum: &mut MonomialSum, m: &[[Vec<f64>; 3]; 3], coeff: f64) {
    const PERMS: [([usize; 3], f64); 6] = [
        ([0, 1, 2], 1.0),
        ([1, 2, 0], 1.0),
        ([2, 0, 1], 1.0),
        ([0, 2, 1], -1.0),
        ([2, 1, 0], -1.0),
        ([1, 0, 2], -1.0),
    ];
    for (p, sign) in PERMS {
        sum.add_linear_product(&m[0][p[0]], &m[1][p[1]], &m[2][p[2]], coeff * sign);
    }
}

/// Adds `coeff * Re((z_1 z_2) z_3)` with `z_i` occupying `d` consecutive
/// coordinates starting at `offsets[i]`.
fn add_real_triple(sum: &mut MonomialSum, d: usize, offsets: [usize; 3], coeff: f64) {
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let s = real_triple(d, a, b, c);
                if s != 0.0 {
                    sum.add(offsets[0] + a, offsets[1] + b, offsets[2] + c, coeff * s);
                }
            }
        }
    }
}

/// Cartan's isoparametric cubic on `R^{3d+2}`, coordinates
/// `(x_1, x_2, z_1, z_2, z_3)` with `z_i ∈ F_d`:
///
/// `x_1^3 + 3/2 x_1 (|z_1|^2 + |z_2|^2 - 2|z_3|^2 - 2x_2^2)
///  + 3√3/2 x_2 (|z_2|^2 - |z_1|^2) + 3√3 Re((z_1 z_2) z_3)`.
pub fn cartan_cubic(d: usize) -> Result<CubicForm, CatalogError> {
    check_dimension(d)?;
    let dim = 3 * d + 2;
    let (x1, x2) = (0, 1);
    let z = [2, 2 + d, 2 + 2 * d];
    let r3 = 3.0_f64.sqrt();
    let mut sum = MonomialSum::default();
    sum.add(x1, x1, x1, 1.0);
    sum.add(x1, x2, x2, -3.0);
    for a in 0..d {
        sum.add(x1, z[0] + a, z[0] + a, 1.5);
        sum.add(x1, z[1] + a, z[1] + a, 1.5);
        sum.add(x1, z[2] + a, z[2] + a, -3.0);
        sum.add(x2, z[1] + a, z[1] + a, 1.5 * r3);
        sum.add(x2, z[0] + a, z[0] + a, -1.5 * r3);
    }
    add_real_triple(&mut sum, d, z, 3.0 * r3);
    Ok(sum.into_form(dim, &format!("cartan:{d}"))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum U5Variant {
    /// The determinant matrix with entry (2,1) equal to `x_2`, which makes it
    /// asymmetric.
    Printed,
    /// The symmetric reading, entry (2,1) equal to `x_3`.
    Symmetric,
}

/// Determinant representation of the five-variable cubic
///
/// ```text
/// | x1/√3 + x2   x3        x4         |
/// | x2 | x3      -2x1/√3   x5         |
/// | x4           x5        x1/√3 - x2 |
/// ```
///
/// where the (2,1) entry is `x2` for [`U5Variant::Printed`] and `x3` for
/// [`U5Variant::Symmetric`].
pub fn u5_determinant(variant: U5Variant) -> CubicForm {
    let r3 = 3.0_f64.sqrt();
    let l = |entries: &[(usize, f64)]| linear(5, entries);
    let row1_col0 = match variant {
        U5Variant::Printed => l(&[(1, 1.0)]),
        U5Variant::Symmetric => l(&[(2, 1.0)]),
    };
    let m = [
        [l(&[(0, 1.0 / r3), (1, 1.0)]), l(&[(2, 1.0)]), l(&[(3, 1.0)])],
        [row1_col0, l(&[(0, -2.0 / r3)]), l(&[(4, 1.0)])],
        [l(&[(3, 1.0)]), l(&[(4, 1.0)]), l(&[(0, 1.0 / r3), (1, -1.0)])],
    ];
    let mut sum = MonomialSum::default();
    add_determinant(&mut sum, &m, 1.0);
    let label = match variant {
        U5Variant::Printed => "u5-printed",
        U5Variant::Symmetric => "u5",
    };
    sum.into_form(5, label).expect("u5 terms are valid")
}

/// `Re((z_1 z_2) z_3)` on `F_d^3`, `d ∈ {2, 4, 8}`.
pub fn triality_form(d: usize) -> Result<CubicForm, CatalogError> {
    if !matches!(d, 2 | 4 | 8) {
        return Err(CatalogError::InvalidTriality(d));
    }
    let mut sum = MonomialSum::default();
    add_real_triple(&mut sum, d, [0, d, 2 * d], 1.0);
    Ok(sum.into_form(3 * d, &format!("triality:{d}"))?)
}

/// `det X` for a general 3×3 matrix, `X_{rc} = x_{3r+c}`.
pub fn det3_form() -> CubicForm {
    let e = |i: usize| linear(9, &[(i, 1.0)]);
    let m = [[e(0), e(1), e(2)], [e(3), e(4), e(5)], [e(6), e(7), e(8)]];
    let mut sum = MonomialSum::default();
    add_determinant(&mut sum, &m, 1.0);
    sum.into_form(9, "u9").expect("det terms are valid")
}

/// Form with i.i.d. standard normal coefficients on every sorted monomial,
/// drawn in lexicographic triple order from ChaCha8 keyed by `seed`.
pub fn random_form(dim: usize, seed: u64) -> Result<CubicForm, CatalogError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            for k in j..dim {
                let c: f64 = StandardNormal.sample(&mut rng);
                terms.push(([i, j, k], c));
            }
        }
    }
    Ok(CubicForm::from_monomials(dim, terms)?.with_label(format!("random:{dim}:{seed}")))
}

/// Ratio `|grad u(x)|^2 / |x|^4` at a point.
pub fn munzner_ratio(u: &CubicForm, x: &crate::AlgebraElement) -> f64 {
    let g = u.gradient_u(x).expect("dimension checked by caller");
    g.norm_squared() / x.norm_squared().powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct MunznerNormalization {
    pub kappa: f64,
    pub spread: f64,
    pub factor: f64,
    pub probes: usize,
}

/// Rescales an eiconal cubic so that `|grad u|^2 = 9|x|^4`.
///
/// Measures `kappa = |grad u|^2/|x|^4` on [`MUNZNER_PROBE_POINTS`] seeded
/// unit points and fails with [`CatalogError::NotEiconal`] when the relative
/// spread `max |kappa_i / kappa - 1|` exceeds `tol`. On success returns
/// `(3/sqrt(kappa)) u` and `kappa`.
pub fn normalize_munzner(u: &CubicForm, tol: f64) -> Result<(CubicForm, f64), CatalogError> {
    let (form, info) = normalize_munzner_detailed(u, tol)?;
    Ok((form, info.kappa))
}

pub fn normalize_munzner_detailed(
    u: &CubicForm,
    tol: f64,
) -> Result<(CubicForm, MunznerNormalization), CatalogError> {
    let mut rng = substream(MUNZNER_PROBE_SEED, 0);
    let ratios: Vec<f64> = (0..MUNZNER_PROBE_POINTS)
        .map(|_| munzner_ratio(u, &random_unit(&mut rng, u.dim())))
        .collect();
    let kappa = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = if kappa > 0.0 {
        ratios.iter().map(|r| (r / kappa - 1.0).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    if !(spread <= tol) {
        return Err(CatalogError::NotEiconal { kappa, spread });
    }
    let factor = 3.0 / kappa.sqrt();
    let info = MunznerNormalization { kappa, spread, factor, probes: ratios.len() };
    Ok((u.scaled(factor), info))
}

#[derive(Debug, Clone, Serialize)]
pub struct U5Attempt {
    pub variant: U5Variant,
    pub kappa: f64,
    pub spread: f64,
    pub eiconal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct U5Reconciliation {
    pub attempts: Vec<U5Attempt>,
    /// First variant, in the order printed then symmetric, that normalizes.
    pub chosen: Option<U5Variant>,
    pub kappa: Option<f64>,
    pub factor: Option<f64>,
    pub tol: f64,
}

/// Tries [`normalize_munzner`] on both readings of the u₅ matrix.
pub fn reconcile_u5(tol: f64) -> (U5Reconciliation, Option<CubicForm>) {
    let mut attempts = Vec::new();
    let mut chosen = None;
    for variant in [U5Variant::Printed, U5Variant::Symmetric] {
        match normalize_munzner_detailed(&u5_determinant(variant), tol) {
            Ok((form, info)) => {
                attempts.push(U5Attempt { variant, kappa: info.kappa, spread: info.spread, eiconal: true });
                if chosen.is_none() {
                    chosen = Some((variant, info, form));
                }
            }
            Err(CatalogError::NotEiconal { kappa, spread }) => {
                attempts.push(U5Attempt { variant, kappa, spread, eiconal: false });
            }
            Err(other) => unreachable!("u5 normalization cannot fail with {other}"),
        }
    }
    let report = U5Reconciliation {
        attempts,
        chosen: chosen.as_ref().map(|c| c.0),
        kappa: chosen.as_ref().map(|c| c.1.kappa),
        factor: chosen.as_ref().map(|c| c.1.factor),
        tol,
    };
    (report, chosen.map(|c| c.2))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormSelector {
    Cartan(usize),
    U5,
    U5Printed,
    U9,
    Triality(usize),
    Random { dim: usize, seed: u64 },
    File(PathBuf),
}

impl FromStr for FormSelector {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || CatalogError::UnknownSelector(s.to_string());
        let parts: Vec<&str> = s.splitn(2, ':').collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| unknown());
        Ok(match parts.as_slice() {
            ["u5"] => Self::U5,
            ["u5-printed"] => Self::U5Printed,
            ["u9"] => Self::U9,
            ["cartan", d] => Self::Cartan(num(d)?),
            ["triality", d] => Self::Triality(num(d)?),
            ["random", rest] => {
                let (dim, seed) = rest.split_once(':').ok_or_else(unknown)?;
                let dim = num(dim)?;
                let seed = seed.parse::<u64>().map_err(|_| unknown())?;
                Self::Random { dim, seed }
            }
            ["file", path] if !path.is_empty() => Self::File(PathBuf::from(path)),
            _ => return Err(unknown()),
        })
    }
}

impl fmt::Display for FormSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cartan(d) => write!(f, "cartan:{d}"),
            Self::U5 => write!(f, "u5"),
            Self::U5Printed => write!(f, "u5-printed"),
            Self::U9 => write!(f, "u9"),
            Self::Triality(d) => write!(f, "triality:{d}"),
            Self::Random { dim, seed } => write!(f, "random:{dim}:{seed}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FormSelector {
    pub fn build(&self) -> Result<CubicForm, CatalogError> {
        match self {
            Self::Cartan(d) => cartan_cubic(*d),
            Self::U5 => Ok(u5_determinant(U5Variant::Symmetric)),
            Self::U5Printed => Ok(u5_determinant(U5Variant::Printed)),
            Self::U9 => Ok(det3_form()),
            Self::Triality(d) => triality_form(*d),
            Self::Random { dim, seed } => random_form(*dim, *seed),
            Self::File(path) => Ok(CubicForm::from_path(path)?),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub selector: String,
    pub dim: usize,
    pub description: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    let mut entries = Vec::new();
    for d in [1, 2, 4, 8] {
        entries.push(CatalogEntry {
            selector: format!("cartan:{d}"),
            dim: 3 * d + 2,
            description: "Cartan isoparametric cubic over F_d (harmonic, |grad u|^2 = 9|x|^4)",
        });
    }
    entries.push(CatalogEntry {
        selector: "u5".into(),
        dim: 5,
        description: "determinant cubic on trace-free symmetric 3x3 matrices (symmetric reading)",
    });
    entries.push(CatalogEntry {
        selector: "u5-printed".into(),
        dim: 5,
        description: "determinant cubic with the asymmetric (2,1) entry x2",
    });
    entries.push(CatalogEntry { selector: "u9".into(), dim: 9, description: "det X for a general 3x3 matrix" });
    for d in [2, 4, 8] {
        entries.push(CatalogEntry {
            selector: format!("triality:{d}"),
            dim: 3 * d,
            description: "triality form Re((z1 z2) z3) over F_d",
        });
    }
    entries.push(CatalogEntry {
        selector: "random:<dim>:<seed>".into(),
        dim: 0,
        description: "i.i.d. standard normal monomial coefficients (ChaCha8)",
    });
    entries.push(CatalogEntry {
        selector: "file:<path>".into(),
        dim: 0,
        description: "JSON form file {\"dim\": n, \"terms\": [{\"monomial\": [i,j,k], \"coeff\": c}]}",
    });
    entries
}
