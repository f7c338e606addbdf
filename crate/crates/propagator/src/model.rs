//! Physical parameters, smearing widths, Gaussian wavepackets and the
//! closed-form reference propagators.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass, reduced Planck constant and spatial dimension.
///
/// Defaults to natural units `m = hbar = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    pub dim: usize,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, dim: usize) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        Ok(Self { mass, hbar, dim })
    }

    /// Natural units `m = hbar = 1` in `dim` dimensions.
    pub fn natural(dim: usize) -> Self {
        Self { mass: 1.0, hbar: 1.0, dim }
    }
}

/// The two Euclidean smearing times. Both must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmearWidths {
    pub eta: f64,
    pub gamma: f64,
}

impl SmearWidths {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { eta, gamma })
    }
}

fn check_point(label: &str, x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "{label} has {} components, expected {dim}",
            x.len()
        )));
    }
    Ok(())
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Normalized Gaussian smearing kernel of Euclidean width `width`:
/// `(m / 2 pi hbar w)^(n/2) exp(-m |x0 - y|^2 / (2 hbar w))`.
///
/// One formula serves both smearing kernels; only the width differs.
pub fn smearing_kernel(x0: &[f64], y: &[f64], width: f64, p: &PhysicalParams) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("smearing width must be positive, got {width}")));
    }
    check_point("x0", x0, p.dim)?;
    check_point("y", y, p.dim)?;
    let pref = (p.mass / (2.0 * PI * p.hbar * width)).powf(p.dim as f64 / 2.0);
    Ok(pref * (-p.mass * dist2(x0, y) / (2.0 * p.hbar * width)).exp())
}

/// L2 norm of the smearing kernel as a function of its second argument:
/// `(m / 4 pi hbar w)^(n/4)`.
pub fn smearing_norm(width: f64, p: &PhysicalParams) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("smearing width must be positive, got {width}")));
    }
    Ok((p.mass / (4.0 * PI * p.hbar * width)).powf(p.dim as f64 / 4.0))
}

/// Uniform bound on the smeared kernel: the product of the two smearing-kernel
/// norms. Independent of the evolution time and the potential.
pub fn smear_bound(widths: &SmearWidths, p: &PhysicalParams) -> Result<f64> {
    Ok(smearing_norm(widths.eta, p)? * smearing_norm(widths.gamma, p)?)
}

/// `(1/i)^(n/2)` on the principal branch, i.e. `exp(-i pi n / 4)`.
fn inverse_i_pow(half_n: f64) -> Complex64 {
    Complex64::from_polar(1.0, -PI / 2.0 * half_n)
}

/// Free-particle propagator `(m / 2 pi i hbar t)^(n/2) exp(i m |x-x0|^2 / 2 hbar t)`.
pub fn free_propagator(x: &[f64], x0: &[f64], t: f64, p: &PhysicalParams) -> Result<Complex64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("free propagator requires t > 0, got {t}")));
    }
    check_point("x", x, p.dim)?;
    check_point("x0", x0, p.dim)?;
    let n2 = p.dim as f64 / 2.0;
    let modulus = (p.mass / (2.0 * PI * p.hbar * t)).powf(n2);
    let phase = p.mass * dist2(x, x0) / (2.0 * p.hbar * t);
    Ok(modulus * inverse_i_pow(n2) * Complex64::from_polar(1.0, phase))
}

/// Harmonic-oscillator propagator for `0 < t < pi/lambda`:
///
/// `(m lambda / 2 pi i hbar sin(lambda t))^(n/2)
///   exp{ i m lambda / (2 hbar sin(lambda t)) [ (x0^2 + x^2) cos(lambda t) - 2 x.x0 ] }`.
///
/// The `1/2` in the exponent is pinned by the free-particle limit
/// `lambda -> 0` and by cross-checks against grid evolution.
pub fn harmonic_propagator(
    x: &[f64],
    x0: &[f64],
    t: f64,
    lambda: f64,
    p: &PhysicalParams,
) -> Result<Complex64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    caustic_window(t, lambda)?;
    check_point("x", x, p.dim)?;
    check_point("x0", x0, p.dim)?;
    let (sin, cos) = (lambda * t).sin_cos();
    let n2 = p.dim as f64 / 2.0;
    let modulus = (p.mass * lambda / (2.0 * PI * p.hbar * sin)).powf(n2);
    let xx = x.iter().map(|a| a * a).sum::<f64>() + x0.iter().map(|a| a * a).sum::<f64>();
    let cross: f64 = x.iter().zip(x0).map(|(a, b)| a * b).sum();
    let phase = p.mass * lambda / (2.0 * p.hbar * sin) * (xx * cos - 2.0 * cross);
    Ok(modulus * inverse_i_pow(n2) * Complex64::from_polar(1.0, phase))
}

/// Checks `0 < t < pi/lambda`. `lambda = 0` means a free system, where any
/// positive time is allowed.
pub fn caustic_window(t: f64, lambda: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    if lambda > 0.0 && t >= PI / lambda {
        return Err(Error::CausticWindow { t, limit: PI / lambda });
    }
    Ok(())
}

/// A normalized Gaussian wavepacket
/// `(pi sigma^2)^(-n/4) exp(-(x-a)^2/(2 sigma^2) + i p.x / hbar)`.
///
/// Belongs to `L1 ∩ L2` with unit L2 norm in exact arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWavepacket {
    pub center: Vec<f64>,
    pub width: f64,
    pub momentum: Vec<f64>,
}

impl GaussianWavepacket {
    pub fn new(center: Vec<f64>, width: f64, momentum: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter(format!("wavepacket width must be positive, got {width}")));
        }
        if center.len() != momentum.len() {
            return Err(Error::InvalidParameter(
                "wavepacket center and momentum must have the same dimension".into(),
            ));
        }
        Ok(Self { center, width, momentum })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Pointwise value at `x` for the given `hbar`.
    pub fn eval(&self, x: &[f64], p: &PhysicalParams) -> Complex64 {
        let s2 = self.width * self.width;
        let norm = (PI * s2).powf(-(self.dim() as f64) / 4.0);
        let d2 = dist2(x, &self.center);
        let phase: f64 = x.iter().zip(&self.momentum).map(|(a, b)| a * b).sum::<f64>() / p.hbar;
        norm * (-d2 / (2.0 * s2)).exp() * Complex64::from_polar(1.0, phase)
    }
}
