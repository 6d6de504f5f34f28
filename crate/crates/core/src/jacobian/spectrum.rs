use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::eigen::eigenvalues;
use crate::{cabs, Error, Real, Result};

/// Default relative tolerance below which an imaginary part counts as zero.
pub const DEFAULT_IMAG_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Classification<T> {
    /// Every eigenvalue is real.
    Real { sigma_min: T, sigma_max: T },
    /// At least one eigenvalue has a significant imaginary part. `mu_plus` is
    /// the largest nonnegative real eigenvalue, if any.
    Complex { mu_plus: Option<T>, rho: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    pub spectral_radius: T,
    pub classification: Classification<T>,
    pub imag_tolerance: T,
}

impl<T: Real> Spectrum<T> {
    /// Classifies an eigenvalue multiset. An eigenvalue is real when
    /// `|Im| ≤ imag_tolerance·max(1, radius)`.
    pub fn from_eigenvalues(eigenvalues: Vec<Complex<T>>, imag_tolerance: T) -> Self {
        let radius = eigenvalues.iter().fold(T::zero(), |r, l| r.max(cabs(*l)));
        let cut = imag_tolerance * radius.max(T::one());
        let is_real = |l: &Complex<T>| l.im.abs() <= cut;
        let reals = eigenvalues.iter().filter(|l| is_real(l)).map(|l| l.re);
        let classification = if eigenvalues.iter().all(is_real) && !eigenvalues.is_empty() {
            let (lo, hi) = reals.fold((T::max_value().unwrap(), T::min_value().unwrap()), |(lo, hi), r| (lo.min(r), hi.max(r)));
            Classification::Real { sigma_min: lo, sigma_max: hi }
        } else {
            let mu_plus = reals.filter(|r| *r >= T::zero()).fold(None, |m: Option<T>, r| Some(m.map_or(r, |m| m.max(r))));
            Classification::Complex { mu_plus, rho: radius }
        };
        Spectrum { eigenvalues, spectral_radius: radius, classification, imag_tolerance }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.classification, Classification::Real { .. })
    }

    /// Largest nonnegative real eigenvalue (`σ_max` when nonnegative in the real case).
    pub fn mu_plus(&self) -> Option<T> {
        match self.classification {
            Classification::Real { sigma_max, .. } => (sigma_max >= T::zero()).then_some(sigma_max),
            Classification::Complex { mu_plus, .. } => mu_plus,
        }
    }

    /// Eigenvalues with the imaginary parts of real ones set to zero.
    pub fn cleaned(&self) -> Vec<Complex<T>> {
        let cut = self.imag_tolerance * self.spectral_radius.max(T::one());
        self.eigenvalues
            .iter()
            .map(|l| if l.im.abs() <= cut { Complex::new(l.re, T::zero()) } else { *l })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_eigenvalues_csv(&self.eigenvalues, w)
    }
}

/// Full spectrum with the default imaginary tolerance.
pub fn spectrum_of<T: Real>(matrix: &DMatrix<T>) -> Result<Spectrum<T>> {
    spectrum_with_tolerance(matrix, T::lit(DEFAULT_IMAG_TOLERANCE))
}

pub fn spectrum_with_tolerance<T: Real>(matrix: &DMatrix<T>, imag_tolerance: T) -> Result<Spectrum<T>> {
    Ok(Spectrum::from_eigenvalues(eigenvalues(matrix)?, imag_tolerance))
}

/// CSV with header `re,im`, one eigenvalue per row, 17 significant digits.
pub fn write_eigenvalues_csv<T: Real, W: Write>(eigenvalues: &[Complex<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "re,im")?;
    for l in eigenvalues {
        writeln!(w, "{:.16e},{:.16e}", l.re.as_f64(), l.im.as_f64())?;
    }
    Ok(())
}

pub fn read_eigenvalues_csv<T: Real, R: BufRead>(r: R) -> Result<Vec<Complex<T>>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 {
            if line != "re,im" {
                return Err(Error::Parse { line: 1, message: format!("expected header `re,im`, got `{line}`") });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse { line: i + 1, message: format!("bad number `{s}`") })
        };
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse { line: i + 1, message: "expected `re,im`".into() })?;
        out.push(Complex::new(T::lit(parse(re)?), T::lit(parse(im)?)));
    }
    Ok(out)
}
