//! Closed-form counterexamples: Maz'ya's unbounded solution exponent and the
//! Lawson–Osserman cone map.

use serde::Serialize;
use thiserror::Error;

use crate::division::DivisionElement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error("operator is not strongly elliptic: kappa^2 = {kappa_sq} > mu*nu = {mu_nu}")]
    NotStronglyElliptic { kappa_sq: f64, mu_nu: f64 },
    #[error("negative radicand {0} in the exponent formula")]
    NegativeRadicand(f64),
    #[error("denominator nu + 2 kappa + mu vanishes")]
    ZeroDenominator,
    #[error("ambient dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("Lawson-Osserman map needs d in {{2, 4, 8}}, got {0}")]
    InvalidDivisionDimension(usize),
    #[error("expected a point of R^{expected}, got length {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("the cone map is undefined at the origin")]
    ZeroInput,
}

/// Coefficients of the fourth-order operator
/// `nu Δ²w + kappa Δ(x_i x_j/|x|² w_ij) + kappa (x_i x_j/|x|² Δw)_ij
///  + mu (x_i x_j x_k x_l/|x|⁴ w_ij)_kl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MazyaParams {
    pub n: usize,
    pub kappa: f64,
    pub mu: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ellipticity {
    /// `kappa² < mu nu`.
    Strict,
    /// `kappa² = mu nu`, the boundary reached by the `eps -> 0` family.
    Degenerate,
    NotElliptic,
}

impl MazyaParams {
    /// The family `kappa = n(n-2)`, `mu = n²`, `nu = (n-2)² + eps`.
    pub fn from_epsilon(n: usize, eps: f64) -> Self {
        let nf = n as f64;
        Self { n, kappa: nf * (nf - 2.0), mu: nf * nf, nu: (nf - 2.0).powi(2) + eps }
    }

    pub fn ellipticity(&self) -> Ellipticity {
        let kappa_sq = self.kappa * self.kappa;
        let mu_nu = self.mu * self.nu;
        if kappa_sq < mu_nu {
            Ellipticity::Strict
        } else if kappa_sq == mu_nu {
            Ellipticity::Degenerate
        } else {
            Ellipticity::NotElliptic
        }
    }
}

/// Exponent `a` of the radial solution `|x|^a`:
/// `a = 2 - n/2 + sqrt(n²/4 - (n-1)(kappa n + mu)/(nu + 2 kappa + mu))`.
///
/// The boundary case `kappa² = mu nu` is accepted (see [`Ellipticity`]).
pub fn mazya_exponent(p: &MazyaParams) -> Result<f64, GalleryError> {
    if p.n < 2 {
        return Err(GalleryError::InvalidDimension(p.n));
    }
    if p.ellipticity() == Ellipticity::NotElliptic {
        return Err(GalleryError::NotStronglyElliptic { kappa_sq: p.kappa * p.kappa, mu_nu: p.mu * p.nu });
    }
    let n = p.n as f64;
    let denom = p.nu + 2.0 * p.kappa + p.mu;
    if denom == 0.0 {
        return Err(GalleryError::ZeroDenominator);
    }
    let radicand = n * n / 4.0 - (n - 1.0) * (p.kappa * n + p.mu) / denom;
    if radicand < 0.0 {
        return Err(GalleryError::NegativeRadicand(radicand));
    }
    Ok(2.0 - n / 2.0 + radicand.sqrt())
}

/// `½ sqrt((2d+1)/(d-1))`.
pub fn lawson_osserman_prefactor(d: usize) -> f64 {
    let d = d as f64;
    0.5 * ((2.0 * d + 1.0) / (d - 1.0)).sqrt()
}

fn split_pair(x: &[f64], d: usize) -> Result<(DivisionElement, DivisionElement), GalleryError> {
    if !matches!(d, 2 | 4 | 8) {
        return Err(GalleryError::InvalidDivisionDimension(d));
    }
    if x.len() != 2 * d {
        return Err(GalleryError::WrongLength { expected: 2 * d, found: x.len() });
    }
    let z1 = DivisionElement::new(x[..d].to_vec()).expect("valid d");
    let z2 = DivisionElement::new(x[d..].to_vec()).expect("valid d");
    Ok((z1, z2))
}

/// Hopf map `eta(z_1, z_2) = (|z_1|² - |z_2|², 2 z_1 conj(z_2))`.
pub fn hopf_map(x: &[f64], d: usize) -> Result<Vec<f64>, GalleryError> {
    let (z1, z2) = split_pair(x, d)?;
    let prod = z1.multiply(&z2.conj()).expect("same d");
    let mut out = Vec::with_capacity(d + 1);
    out.push(z1.norm_sqr() - z2.norm_sqr());
    out.extend(prod.coords().iter().map(|c| 2.0 * c));
    Ok(out)
}

/// Lawson–Osserman cone map `w(x) = ½ sqrt((2d+1)/(d-1)) eta(x)/|x|`.
pub fn lawson_osserman(x: &[f64], d: usize) -> Result<Vec<f64>, GalleryError> {
    let eta = hopf_map(x, d)?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(GalleryError::ZeroInput);
    }
    let scale = lawson_osserman_prefactor(d) / norm;
    Ok(eta.into_iter().map(|e| e * scale).collect())
}
