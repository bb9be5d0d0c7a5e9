//! Closed-form phase construction and diagnostic formulas.
//!
//! Every function here is pure and returns unwrapped phase in radians;
//! wrapping onto [0, 2pi) is the quantizer's job. The hyperbolic point-focus
//! phase generalizes row by row: a lateral offset `a(y)` steers each row's
//! micro focus off axis, and a focal shift `s(y)` retunes its effective focal
//! length. The spacing, numerical-aperture, and beamlet-width diagnostics
//! quantify when the resulting micro focuses merge into a continuous pattern
//! and when the pitch discretization starts to hurt.

use crate::lens::{LensSpec, RowParams};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("vertical-line degenerate slope: k = 0 (use a constant-offset segment instead)")]
    VerticalLineSlope,
    #[error("row outside arc support: |y| = {y_abs_um} um exceeds radius {radius_um} um")]
    RowOutsideArcSupport { y_abs_um: f64, radius_um: f64 },
    #[error("non-positive effective focal length: f = {focal_um} um, s = {shift_um} um")]
    NonPositiveEffectiveFocal { focal_um: f64, shift_um: f64 },
    #[error("invalid numerical aperture {na} (must be in (0, 1])")]
    InvalidNumericalAperture { na: f64 },
    #[error("grazing beam, width unbounded (NA = {na})")]
    GrazingBeam { na: f64 },
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
}

/// sqrt(v^2 + g^2) - g without cancellation for |v| << g.
#[inline]
fn hypot_minus(v_sq: f64, g: f64) -> f64 {
    v_sq / ((v_sq + g * g).sqrt() + g)
}

/// Point-focus phase: `(2pi/lambda) (sqrt(x^2 + y^2 + f^2) - f)`.
///
/// Zero at the origin, nonnegative, radially symmetric.
pub fn point_focus_phase(x_um: f64, y_um: f64, spec: &LensSpec) -> f64 {
    let r_sq = x_um * x_um + y_um * y_um;
    2.0 * PI / spec.wavelength_um * hypot_minus(r_sq, spec.focal_length_um)
}

/// Row offset for a line-shaped focus with slope `k` and intercept `c`:
/// `a(y) = -(y - c)/k`.
pub fn line_offset(y_um: f64, k: f64, c_um: f64) -> Result<f64, SynthesisError> {
    if k == 0.0 {
        return Err(SynthesisError::VerticalLineSlope);
    }
    Ok(-(y_um - c_um) / k)
}

/// Row offset for an arc of radius `r` about the origin:
/// `a(y) = -sqrt(r^2 - y^2)`.
pub fn arc_offset(y_um: f64, r_um: f64) -> Result<f64, SynthesisError> {
    if y_um.abs() > r_um {
        return Err(SynthesisError::RowOutsideArcSupport {
            y_abs_um: y_um.abs(),
            radius_um: r_um,
        });
    }
    Ok(-(r_um * r_um - y_um * y_um).sqrt())
}

/// Per-row focusing phase with lateral offset and focal shift:
/// `(2pi/lambda) (sqrt((x + a)^2 + (f + s)^2) - (f + s))`.
///
/// Depends on y only through `(a, s)`; it is a cylindrical (x-only) phase.
pub fn shifted_focus_phase(
    x_um: f64,
    row: &RowParams,
    spec: &LensSpec,
) -> Result<f64, SynthesisError> {
    let f_eff = spec.focal_length_um + row.s_um;
    if f_eff <= 0.0 {
        return Err(SynthesisError::NonPositiveEffectiveFocal {
            focal_um: spec.focal_length_um,
            shift_um: row.s_um,
        });
    }
    let u = x_um + row.a_um;
    Ok(2.0 * PI / spec.wavelength_um * hypot_minus(u * u, f_eff))
}

/// Offset change between adjacent rows, `a(y + U) - a(y)`.
///
/// This is the lateral component of the micro-focus spacing; the paper's
/// quoted arc spacings track this term alone.
pub fn offset_step<F>(a_of_y: F, y_um: f64, pitch_um: f64) -> Result<f64, SynthesisError>
where
    F: Fn(f64) -> Result<f64, SynthesisError>,
{
    Ok(a_of_y(y_um + pitch_um)? - a_of_y(y_um)?)
}

/// Distance between adjacent micro focuses:
/// `D = sqrt((a(y+U) - a(y))^2 + U^2)`. Always at least the pitch.
pub fn micro_focus_spacing<F>(a_of_y: F, y_um: f64, pitch_um: f64) -> Result<f64, SynthesisError>
where
    F: Fn(f64) -> Result<f64, SynthesisError>,
{
    let da = offset_step(a_of_y, y_um, pitch_um)?;
    Ok(da.hypot(pitch_um))
}

/// Whether a micro-focus spacing stays within the Abbe diffraction limit
/// `lambda / (2 NA)`, so that adjacent micro focuses overlap into a
/// continuous pattern.
pub fn spacing_criterion_satisfied(
    d_um: f64,
    wavelength_um: f64,
    na_local: f64,
) -> Result<bool, SynthesisError> {
    if !(na_local > 0.0 && na_local <= 1.0) {
        return Err(SynthesisError::InvalidNumericalAperture { na: na_local });
    }
    Ok(d_um <= wavelength_um / (2.0 * na_local))
}

/// Numerical aperture of an off-axis micro metalens, taken as the
/// marginal-ray sine from the far aperture edge to the focus:
/// `NA = m / sqrt(m^2 + f'^2)` with `m = W/2 + |a|`.
pub fn local_na(
    aperture_w_um: f64,
    a_um: f64,
    effective_f_um: f64,
) -> Result<f64, SynthesisError> {
    if !(aperture_w_um > 0.0) {
        return Err(SynthesisError::NonPositive {
            field: "aperture_w_um",
            value: aperture_w_um,
        });
    }
    if !(effective_f_um > 0.0) {
        return Err(SynthesisError::NonPositive {
            field: "effective_f_um",
            value: effective_f_um,
        });
    }
    let m = aperture_w_um / 2.0 + a_um.abs();
    Ok(m / (m * m + effective_f_um * effective_f_um).sqrt())
}

/// Width of the beamlet emitted by one pitch cell, `d = U / sqrt(1 - NA^2)`.
///
/// The piecewise-constant phase per pitch makes each cell emit a finite
/// beamlet whose equiphase segment spans the period; its transmission angle
/// measured from the lens plane has sine `sqrt(1 - NA^2)`, so the beamlet
/// broadens without bound as NA approaches 1.
pub fn beam_width(pitch_um: f64, na_local: f64) -> Result<f64, SynthesisError> {
    if !(na_local >= 0.0) {
        return Err(SynthesisError::InvalidNumericalAperture { na: na_local });
    }
    if na_local >= 1.0 {
        return Err(SynthesisError::GrazingBeam { na: na_local });
    }
    Ok(pitch_um / (1.0 - na_local * na_local).sqrt())
}
