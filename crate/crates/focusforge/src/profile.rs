//! Wrapped phase grids at pitch resolution.

use crate::lens::{LensSpec, RowParams};
use crate::pattern::{RowAssignment, RowAxis, Segment};
use crate::quantize::wrap;
use crate::synthesis::shifted_focus_phase;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("assignment has {rows} rows but the lens grid has {expected}")]
    GridMismatch { rows: usize, expected: usize },
    #[error("radial profile too short: grid needs radius {needed_um} um, profile covers {covered_um} um")]
    RadialProfileTooShort { needed_um: f64, covered_um: f64 },
    #[error("radial profile needs at least 2 samples")]
    RadialProfileEmpty,
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
}

/// A 2-D grid of wrapped phase values on the lens pitch lattice.
///
/// Cell `(i, j)` (row, column) is centered at
/// `x = (j + 0.5) * pitch - width / 2`, `y = (i + 0.5) * pitch - height / 2`.
/// Every stored value lies in [0, 2pi).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    phases: Array2<f64>,
    pitch_um: f64,
    wavelength_um: f64,
    width_um: f64,
    height_um: f64,
}

impl PhaseProfile {
    /// Wraps the supplied grid onto [0, 2pi) and takes ownership.
    pub fn from_unwrapped(
        mut phases: Array2<f64>,
        pitch_um: f64,
        wavelength_um: f64,
        width_um: f64,
        height_um: f64,
    ) -> Self {
        phases.mapv_inplace(wrap);
        Self {
            phases,
            pitch_um,
            wavelength_um,
            width_um,
            height_um,
        }
    }

    /// Rebuild from already wrapped values, e.g. when loading a dump. The
    /// aperture size is taken as grid extent times pitch.
    pub fn from_wrapped_grid(phases: Array2<f64>, pitch_um: f64, wavelength_um: f64) -> Self {
        let (ny, nx) = phases.dim();
        Self {
            phases,
            pitch_um,
            wavelength_um,
            width_um: nx as f64 * pitch_um,
            height_um: ny as f64 * pitch_um,
        }
    }

    pub fn phases(&self) -> &Array2<f64> {
        &self.phases
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_um
    }

    pub fn nx(&self) -> usize {
        self.phases.ncols()
    }

    pub fn ny(&self) -> usize {
        self.phases.nrows()
    }

    pub fn cell_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.pitch_um - self.width_um / 2.0
    }

    pub fn cell_y(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.pitch_um - self.height_um / 2.0
    }
}

/// Evaluate the per-row focusing phase over the whole grid.
///
/// Each cell inside a sub-aperture gets the shifted-focus phase at its center
/// with that sub-aperture's `(a, s)`; uncovered cells stay flat (the
/// fabricated device has no absorber, so the background transmits as a plane
/// wave).
pub fn synthesize_profile(
    assignment: &RowAssignment,
    spec: &LensSpec,
) -> Result<PhaseProfile, ProfileError> {
    let (n_rows, n_cols) = match assignment.row_axis {
        RowAxis::Y => (spec.ny(), spec.nx()),
        RowAxis::X => (spec.nx(), spec.ny()),
    };
    if assignment.rows.len() != n_rows {
        return Err(ProfileError::GridMismatch {
            rows: assignment.rows.len(),
            expected: n_rows,
        });
    }

    let col_center = |j: usize| match assignment.row_axis {
        RowAxis::Y => spec.cell_x(j),
        RowAxis::X => spec.cell_y(j),
    };

    let mut unwrapped = Array2::zeros((n_rows, n_cols));
    for (i, row) in assignment.rows.iter().enumerate() {
        for sub in &row.sub_apertures {
            let params = RowParams::new(row.y_um, sub.a_um, sub.s_um);
            for j in 0..n_cols {
                let x = col_center(j);
                if x >= sub.x_lo_um && x < sub.x_hi_um {
                    unwrapped[[i, j]] = shifted_focus_phase(x, &params, spec)?;
                }
            }
        }
    }

    let grid = match assignment.row_axis {
        RowAxis::Y => unwrapped,
        // rows were built along x; transpose back onto the (y, x) grid
        RowAxis::X => unwrapped.reversed_axes().as_standard_layout().to_owned(),
    };
    Ok(PhaseProfile::from_unwrapped(
        grid,
        spec.pitch_um,
        spec.wavelength_um,
        spec.aperture_w_um,
        spec.aperture_h_um,
    ))
}

/// A 1-D unwrapped phase profile sampled uniformly in radius, the generator
/// for rotation-constructed lenses.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub phases: Vec<f64>,
    pub du_um: f64,
}

impl RadialProfile {
    /// Sample the off-axis focusing phase out to `u_max_um`. A negative
    /// offset `a` puts the focus at radius |a|, so a full rotation yields a
    /// ring of that radius.
    pub fn off_axis(
        a_um: f64,
        s_um: f64,
        u_max_um: f64,
        du_um: f64,
        spec: &LensSpec,
    ) -> Result<Self, ProfileError> {
        let n = (u_max_um / du_um).ceil() as usize + 1;
        let params = RowParams::new(0.0, a_um, s_um);
        let phases = (0..n)
            .map(|k| shifted_focus_phase(k as f64 * du_um, &params, spec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { phases, du_um })
    }

    pub fn u_max_um(&self) -> f64 {
        (self.phases.len().saturating_sub(1)) as f64 * self.du_um
    }

    /// Linear interpolation between the two samples straddling `u`.
    fn sample(&self, u_um: f64) -> f64 {
        let t = u_um / self.du_um;
        let k = (t.floor() as usize).min(self.phases.len() - 2);
        let frac = t - k as f64;
        self.phases[k] * (1.0 - frac) + self.phases[k + 1] * frac
    }
}

/// Center and azimuth range of a rotation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSweep {
    pub center_x_um: f64,
    pub center_y_um: f64,
    pub azimuth_start_deg: f64,
    pub azimuth_end_deg: f64,
}

impl ArcSweep {
    pub fn full_turn() -> Self {
        Self {
            center_x_um: 0.0,
            center_y_um: 0.0,
            azimuth_start_deg: 0.0,
            azimuth_end_deg: 360.0,
        }
    }

    /// Extract the sweep geometry from an arc segment.
    pub fn from_segment(segment: &Segment) -> Option<Self> {
        match segment {
            Segment::Arc {
                center_x_um,
                center_y_um,
                azimuth_start_deg,
                azimuth_end_deg,
                ..
            } => Some(Self {
                center_x_um: *center_x_um,
                center_y_um: *center_y_um,
                azimuth_start_deg: *azimuth_start_deg,
                azimuth_end_deg: *azimuth_end_deg,
            }),
            _ => None,
        }
    }
}

/// Sweep a 1-D radial phase around an arc center: cells whose azimuth falls
/// inside the arc's range get the interpolated radial phase, all others stay
/// flat. A full 360-degree sweep of the on-axis profile reproduces the
/// rotationally symmetric point lens.
pub fn rotate_half_lens(
    radial: &RadialProfile,
    arc: &ArcSweep,
    spec: &LensSpec,
) -> Result<PhaseProfile, ProfileError> {
    if radial.phases.len() < 2 {
        return Err(ProfileError::RadialProfileEmpty);
    }
    let (ny, nx) = (spec.ny(), spec.nx());
    let full_turn = arc.azimuth_end_deg - arc.azimuth_start_deg >= 360.0;
    let mut unwrapped = Array2::zeros((ny, nx));
    for i in 0..ny {
        let y = spec.cell_y(i) - arc.center_y_um;
        for j in 0..nx {
            let x = spec.cell_x(j) - arc.center_x_um;
            let theta = y.atan2(x).to_degrees();
            let inside = full_turn || {
                let turn = (theta - arc.azimuth_start_deg).rem_euclid(360.0);
                turn < arc.azimuth_end_deg - arc.azimuth_start_deg
            };
            if !inside {
                continue;
            }
            let rho = x.hypot(y);
            if rho > radial.u_max_um() {
                return Err(ProfileError::RadialProfileTooShort {
                    needed_um: rho,
                    covered_um: radial.u_max_um(),
                });
            }
            unwrapped[[i, j]] = radial.sample(rho);
        }
    }
    Ok(PhaseProfile::from_unwrapped(
        unwrapped,
        spec.pitch_um,
        spec.wavelength_um,
        spec.aperture_w_um,
        spec.aperture_h_um,
    ))
}
