//! The classical division algebras `F_d`, `d ∈ {1, 2, 4, 8}`.
//!
//! Basis `e_0 = 1, e_1, ..., e_{d-1}`. Complex numbers use `e_1 = i`, the
//! quaternions `e_1 e_2 = e_3` (`ij = k`) and cyclic. The octonion table is
//! the Fano-plane convention `e_i e_{i+1} = e_{i+3}` with imaginary indices
//! taken in `1..=7` modulo 7, i.e. the oriented lines
//! `(1,2,4) (2,3,5) (3,4,6) (4,5,7) (5,6,1) (6,7,2) (7,1,3)`. Every catalog
//! form in [`crate::catalog`] is built from this one table.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivisionError {
    #[error("division algebra dimension must be 1, 2, 4 or 8, got {0}")]
    InvalidDimension(usize),
    #[error("mismatched division algebra dimensions {0} and {1}")]
    Mismatched(usize, usize),
}

pub fn check_dimension(d: usize) -> Result<(), DivisionError> {
    match d {
        1 | 2 | 4 | 8 => Ok(()),
        other => Err(DivisionError::InvalidDimension(other)),
    }
}

const QUATERNION_LINES: [[usize; 3]; 1] = [[1, 2, 3]];
const OCTONION_LINES: [[usize; 3]; 7] =
    [[1, 2, 4], [2, 3, 5], [3, 4, 6], [4, 5, 7], [5, 6, 1], [6, 7, 2], [7, 1, 3]];

/// `e_a e_b = sign * e_index`.
pub fn basis_product(d: usize, a: usize, b: usize) -> (f64, usize) {
    if a == 0 {
        return (1.0, b);
    }
    if b == 0 {
        return (1.0, a);
    }
    if a == b {
        return (-1.0, 0);
    }
    let lines: &[[usize; 3]] = match d {
        4 => &QUATERNION_LINES,
        8 => &OCTONION_LINES,
        _ => &[],
    };
    for &[p, q, r] in lines {
        for (x, y, z) in [(p, q, r), (q, r, p), (r, p, q)] {
            if (a, b) == (x, y) {
                return (1.0, z);
            }
            if (a, b) == (y, x) {
                return (-1.0, z);
            }
        }
    }
    unreachable!("basis product e_{a} e_{b} undefined for d = {d}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionElement {
    coords: Vec<f64>,
}

impl DivisionElement {
    pub fn new(coords: Vec<f64>) -> Result<Self, DivisionError> {
        check_dimension(coords.len())?;
        Ok(Self { coords })
    }

    pub fn one(d: usize) -> Result<Self, DivisionError> {
        Self::basis(d, 0)
    }

    pub fn basis(d: usize, i: usize) -> Result<Self, DivisionError> {
        check_dimension(d)?;
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn re(&self) -> f64 {
        self.coords[0]
    }

    pub fn conj(&self) -> Self {
        let mut coords = self.coords.clone();
        coords.iter_mut().skip(1).for_each(|c| *c = -*c);
        Self { coords }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, DivisionError> {
        division_multiply(self, other)
    }
}

pub fn division_multiply(a: &DivisionElement, b: &DivisionElement) -> Result<DivisionElement, DivisionError> {
    let d = a.dim();
    if b.dim() != d {
        return Err(DivisionError::Mismatched(d, b.dim()));
    }
    let mut coords = vec![0.0; d];
    for (i, &x) in a.coords.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.coords.iter().enumerate() {
            let (sign, k) = basis_product(d, i, j);
            coords[k] += sign * x * y;
        }
    }
    Ok(DivisionElement { coords })
}

/// `Re((e_a e_b) e_c)`, the structure constant of the trilinear form
/// `Re((z_1 z_2) z_3)`.
pub fn real_triple(d: usize, a: usize, b: usize, c: usize) -> f64 {
    let (s1, p) = basis_product(d, a, b);
    let (s2, q) = basis_product(d, p, c);
    if q == 0 {
        s1 * s2
    } else {
        0.0
    }
}
