//! Lens geometry and per-row steering parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LensError {
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("pitch {pitch_um} um is not subwavelength (wavelength {wavelength_um} um)")]
    PitchNotSubwavelength { pitch_um: f64, wavelength_um: f64 },
    #[error("aperture {axis} of {aperture_um} um yields fewer than 2 cells at pitch {pitch_um} um")]
    GridTooSmall {
        axis: &'static str,
        aperture_um: f64,
        pitch_um: f64,
    },
    #[error("non-positive effective focal length: f = {focal_um} um, s = {shift_um} um")]
    NonPositiveEffectiveFocal { focal_um: f64, shift_um: f64 },
}

/// Geometry and material description of one lens design.
///
/// The lens plane is a `ny()` x `nx()` lattice of phase-shifter cells spaced
/// `pitch_um` apart; cell `(i, j)` is centered at
/// `x = (j + 0.5) * pitch - aperture_w / 2`,
/// `y = (i + 0.5) * pitch - aperture_h / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub wavelength_um: f64,
    pub focal_length_um: f64,
    pub pitch_um: f64,
    pub aperture_w_um: f64,
    pub aperture_h_um: f64,
    /// Refractive index of the shifter material at `wavelength_um`.
    pub material_index: f64,
    pub material_thickness_um: f64,
}

impl LensSpec {
    pub fn new(
        wavelength_um: f64,
        focal_length_um: f64,
        pitch_um: f64,
        aperture_w_um: f64,
        aperture_h_um: f64,
        material_index: f64,
        material_thickness_um: f64,
    ) -> Result<Self, LensError> {
        let spec = Self {
            wavelength_um,
            focal_length_um,
            pitch_um,
            aperture_w_um,
            aperture_h_um,
            material_index,
            material_thickness_um,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LensError> {
        for (field, value) in [
            ("wavelength_um", self.wavelength_um),
            ("focal_length_um", self.focal_length_um),
            ("pitch_um", self.pitch_um),
            ("aperture_w_um", self.aperture_w_um),
            ("aperture_h_um", self.aperture_h_um),
            ("material_index", self.material_index),
            ("material_thickness_um", self.material_thickness_um),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(LensError::NonPositive { field, value });
            }
        }
        if self.pitch_um >= self.wavelength_um {
            return Err(LensError::PitchNotSubwavelength {
                pitch_um: self.pitch_um,
                wavelength_um: self.wavelength_um,
            });
        }
        if self.nx() < 2 {
            return Err(LensError::GridTooSmall {
                axis: "width",
                aperture_um: self.aperture_w_um,
                pitch_um: self.pitch_um,
            });
        }
        if self.ny() < 2 {
            return Err(LensError::GridTooSmall {
                axis: "height",
                aperture_um: self.aperture_h_um,
                pitch_um: self.pitch_um,
            });
        }
        Ok(())
    }

    /// Number of cells across the aperture width.
    pub fn nx(&self) -> usize {
        (self.aperture_w_um / self.pitch_um).round().max(0.0) as usize
    }

    /// Number of cells across the aperture height.
    pub fn ny(&self) -> usize {
        (self.aperture_h_um / self.pitch_um).round().max(0.0) as usize
    }

    /// Center x coordinate of column `j`.
    pub fn cell_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.pitch_um - self.aperture_w_um / 2.0
    }

    /// Center y coordinate of row `i`.
    pub fn cell_y(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.pitch_um - self.aperture_h_um / 2.0
    }

    /// All row center coordinates, bottom to top.
    pub fn row_centers(&self) -> Vec<f64> {
        (0..self.ny()).map(|i| self.cell_y(i)).collect()
    }
}

/// Steering parameters of one lens row: lateral offset `a(y)` and focal
/// shift `s(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowParams {
    pub y_um: f64,
    pub a_um: f64,
    pub s_um: f64,
}

impl RowParams {
    pub fn new(y_um: f64, a_um: f64, s_um: f64) -> Self {
        Self { y_um, a_um, s_um }
    }

    /// Effective focal length `f + s` for the owning lens; errors when it is
    /// not positive.
    pub fn effective_focal(&self, spec: &LensSpec) -> Result<f64, LensError> {
        let f_eff = spec.focal_length_um + self.s_um;
        if f_eff > 0.0 {
            Ok(f_eff)
        } else {
            Err(LensError::NonPositiveEffectiveFocal {
                focal_um: spec.focal_length_um,
                shift_um: self.s_um,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_lens(w: f64, h: f64, f: f64) -> LensSpec {
        LensSpec::new(0.685, f, 0.22, w, h, 2.74, 0.6).unwrap()
    }

    #[test]
    fn grid_dimensions_round_to_nearest() {
        let spec = test_lens(10.0, 10.0, 6.0);
        assert_eq!(spec.nx(), 45);
        assert_eq!(spec.ny(), 45);
        let m = test_lens(44.0, 80.0, 15.0);
        assert_eq!(m.nx(), 200);
        assert_eq!(m.ny(), 364);
    }

    #[test]
    fn rejects_superwavelength_pitch() {
        let err = LensSpec::new(0.685, 6.0, 0.7, 10.0, 10.0, 2.74, 0.6).unwrap_err();
        assert!(matches!(err, LensError::PitchNotSubwavelength { .. }));
    }

    #[test]
    fn rejects_degenerate_grid() {
        let err = LensSpec::new(0.685, 6.0, 0.22, 0.3, 10.0, 2.74, 0.6).unwrap_err();
        assert!(matches!(err, LensError::GridTooSmall { axis: "width", .. }));
    }

    #[test]
    fn effective_focal_guards_sign() {
        let spec = test_lens(10.0, 10.0, 6.0);
        assert_eq!(RowParams::new(0.0, 0.0, 1.0).effective_focal(&spec), Ok(7.0));
        assert!(RowParams::new(0.0, 0.0, -6.0).effective_focal(&spec).is_err());
    }

    #[test]
    fn cell_centers_follow_origin_convention() {
        let spec = test_lens(10.0, 10.0, 6.0);
        assert!((spec.cell_x(0) - (0.11 - 5.0)).abs() < 1e-12);
        assert!((spec.cell_y(44) - (44.5 * 0.22 - 5.0)).abs() < 1e-12);
    }
}
