//! Sampled complex scalar fields.

use crate::profile::PhaseProfile;
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field grid must be at least 2 x 2, got {ny} x {nx}")]
    GridTooSmall { ny: usize, nx: usize },
    #[error("sample pitch must be positive, got {0}")]
    BadPitch(f64),
    #[error("non-finite sample at ({i}, {j})")]
    NonFiniteSample { i: usize, j: usize },
    #[error("padding factor must be >= 1, got {0}")]
    BadPadding(f64),
}

/// A complex scalar field sampled on a uniform grid at plane `z_um`.
///
/// Sample `(i, j)` sits at `x = (j + 0.5) dx - W/2`, `y = (i + 0.5) dx - H/2`
/// with `W = nx * dx`, `H = ny * dx` — the same centering convention as
/// [`PhaseProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    samples: Array2<Complex64>,
    dx_um: f64,
    wavelength_um: f64,
    z_um: f64,
}

impl ComplexField {
    pub fn new(
        samples: Array2<Complex64>,
        dx_um: f64,
        wavelength_um: f64,
        z_um: f64,
    ) -> Result<Self, FieldError> {
        let (ny, nx) = samples.dim();
        if ny < 2 || nx < 2 {
            return Err(FieldError::GridTooSmall { ny, nx });
        }
        if !(dx_um > 0.0) {
            return Err(FieldError::BadPitch(dx_um));
        }
        for ((i, j), s) in samples.indexed_iter() {
            if !s.re.is_finite() || !s.im.is_finite() {
                return Err(FieldError::NonFiniteSample { i, j });
            }
        }
        Ok(Self {
            samples,
            dx_um,
            wavelength_um,
            z_um,
        })
    }

    pub(crate) fn from_parts(
        samples: Array2<Complex64>,
        dx_um: f64,
        wavelength_um: f64,
        z_um: f64,
    ) -> Self {
        Self {
            samples,
            dx_um,
            wavelength_um,
            z_um,
        }
    }

    pub fn samples(&self) -> &Array2<Complex64> {
        &self.samples
    }

    pub fn nx(&self) -> usize {
        self.samples.ncols()
    }

    pub fn ny(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dx_um(&self) -> f64 {
        self.dx_um
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_um
    }

    pub fn z_um(&self) -> f64 {
        self.z_um
    }

    pub fn cell_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx_um - self.nx() as f64 * self.dx_um / 2.0
    }

    pub fn cell_y(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx_um - self.ny() as f64 * self.dx_um / 2.0
    }

    /// Column index of the sample nearest a physical x coordinate.
    pub fn col_at(&self, x_um: f64) -> Option<usize> {
        let j = (x_um + self.nx() as f64 * self.dx_um / 2.0) / self.dx_um - 0.5;
        let j = j.round();
        (j >= 0.0 && j < self.nx() as f64).then_some(j as usize)
    }

    /// Row index of the sample nearest a physical y coordinate.
    pub fn row_at(&self, y_um: f64) -> Option<usize> {
        let i = (y_um + self.ny() as f64 * self.dx_um / 2.0) / self.dx_um - 0.5;
        let i = i.round();
        (i >= 0.0 && i < self.ny() as f64).then_some(i as usize)
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.samples.mapv(|s| s.norm_sqr())
    }

    pub fn is_all_zero(&self) -> bool {
        self.samples.iter().all(|s| s.norm_sqr() == 0.0)
    }
}

/// Turn a phase profile into the transmitted field just behind the lens:
/// unit amplitude inside the aperture, zero in the zero-padded border.
///
/// The lens plane sits at z = 0. The transmitted sample is `exp(-i phase)`,
/// the converging convention matching the forward propagation kernel of
/// [`crate::propagate::propagate`]; intensities are unaffected by the sign.
pub fn field_from_profile(
    profile: &PhaseProfile,
    padding_factor: f64,
) -> Result<ComplexField, FieldError> {
    if !(padding_factor >= 1.0) {
        return Err(FieldError::BadPadding(padding_factor));
    }
    let (ny, nx) = (profile.ny(), profile.nx());
    let py = (ny as f64 * padding_factor).ceil() as usize;
    let px = (nx as f64 * padding_factor).ceil() as usize;
    let (off_y, off_x) = ((py - ny) / 2, (px - nx) / 2);
    let mut samples = Array2::zeros((py, px));
    for i in 0..ny {
        for j in 0..nx {
            let phase = profile.phases()[[i, j]];
            samples[[i + off_y, j + off_x]] = Complex64::from_polar(1.0, -phase);
        }
    }
    Ok(ComplexField::from_parts(
        samples,
        profile.pitch_um(),
        profile.wavelength_um(),
        0.0,
    ))
}

/// Total field power, `sum |E|^2 dx^2`.
pub fn total_power(field: &ComplexField) -> f64 {
    field.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * field.dx_um * field.dx_um
}
