//! Phase wrapping, pitch-grid discretization, and the mapping between phase
//! and physical nano-structure dimensions.

use crate::lens::LensSpec;
use crate::profile::PhaseProfile;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Minimum fabricable structure dimension.
pub const MIN_FEATURE_NM: f64 = 40.0;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizeError {
    #[error("non-finite phase {0}")]
    NonFinitePhase(f64),
    #[error("LUT needs at least 8 entries, got {0}")]
    TooFewEntries(usize),
    #[error("LUT dimensions must be strictly increasing (entry {index})")]
    DimensionsNotIncreasing { index: usize },
    #[error("LUT phases must be monotone nondecreasing (entry {index})")]
    PhasesNotMonotone { index: usize },
    #[error("LUT does not cover 2pi: span {span_rad} rad < {required_rad} rad")]
    SpanViolation { span_rad: f64, required_rad: f64 },
    #[error("LUT dimension {dimension_nm} nm below minimum feature size {MIN_FEATURE_NM} nm")]
    BelowMinFeature { dimension_nm: f64 },
    #[error("LUT wavelength {lut_um} um does not match profile wavelength {profile_um} um")]
    WavelengthMismatch { lut_um: f64, profile_um: f64 },
    #[error("dimension {dimension_nm} nm outside LUT range [{min_nm}, {max_nm}] nm")]
    DimensionOutOfRange {
        dimension_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("layout element count {elements} does not fill a {ny} x {nx} grid")]
    LayoutGridMismatch {
        elements: usize,
        ny: usize,
        nx: usize,
    },
}

/// Fast modular reduction onto [0, 2pi); assumes a finite argument.
#[inline]
pub(crate) fn wrap(phi: f64) -> f64 {
    let wrapped = phi.rem_euclid(TAU);
    // rem_euclid of a tiny negative rounds up to exactly 2pi
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Wrap a phase onto [0, 2pi). Errors on NaN or infinite input.
pub fn wrap_phase(phi_rad: f64) -> Result<f64, QuantizeError> {
    if !phi_rad.is_finite() {
        return Err(QuantizeError::NonFinitePhase(phi_rad));
    }
    Ok(wrap(phi_rad))
}

/// Sample a continuous phase field at every cell center and wrap. The result
/// has piecewise-constant-per-pitch semantics downstream.
pub fn discretize<F>(phase_field: F, spec: &LensSpec) -> PhaseProfile
where
    F: Fn(f64, f64) -> f64,
{
    let (ny, nx) = (spec.ny(), spec.nx());
    let mut grid = Array2::zeros((ny, nx));
    for i in 0..ny {
        let y = spec.cell_y(i);
        for j in 0..nx {
            let phi = phase_field(spec.cell_x(j), y);
            debug_assert!(phi.is_finite(), "phase field produced {phi} at ({i}, {j})");
            grid[[i, j]] = phi;
        }
    }
    PhaseProfile::from_unwrapped(
        grid,
        spec.pitch_um,
        spec.wavelength_um,
        spec.aperture_w_um,
        spec.aperture_h_um,
    )
}

/// Which dimension a LUT controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LutKind {
    CylinderDiameter,
    GratingFillFactor,
}

/// Monotone mapping between a structure dimension (nm) and its transmission
/// phase (rad) at a fixed wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLut {
    entries: Vec<(f64, f64)>,
    pub kind: LutKind,
    pub wavelength_um: f64,
}

impl PhaseLut {
    pub fn new(
        entries: Vec<(f64, f64)>,
        kind: LutKind,
        wavelength_um: f64,
    ) -> Result<Self, QuantizeError> {
        if entries.len() < 8 {
            return Err(QuantizeError::TooFewEntries(entries.len()));
        }
        for (index, pair) in entries.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(QuantizeError::DimensionsNotIncreasing { index: index + 1 });
            }
            if pair[1].1 < pair[0].1 {
                return Err(QuantizeError::PhasesNotMonotone { index: index + 1 });
            }
        }
        if entries[0].0 < MIN_FEATURE_NM {
            return Err(QuantizeError::BelowMinFeature {
                dimension_nm: entries[0].0,
            });
        }
        let lut = Self {
            entries,
            kind,
            wavelength_um,
        };
        lut.check_span()?;
        Ok(lut)
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Worst-case quantization step, `2pi / n`.
    pub fn quantization_step(&self) -> f64 {
        TAU / self.entries.len() as f64
    }

    fn check_span(&self) -> Result<(), QuantizeError> {
        let span = self.entries.last().unwrap().1 - self.entries[0].1;
        let required = TAU - self.quantization_step();
        if span + 1e-12 < required {
            return Err(QuantizeError::SpanViolation {
                span_rad: span,
                required_rad: required,
            });
        }
        Ok(())
    }

    /// Dimension whose LUT phase is nearest the requested phase, with linear
    /// interpolation between adjacent entries; phases beyond the tabulated
    /// span clamp to the end entries.
    pub fn dimension_for_phase(&self, phase_rad: f64) -> f64 {
        let e = &self.entries;
        if phase_rad <= e[0].1 {
            return e[0].0;
        }
        let last = e.len() - 1;
        if phase_rad >= e[last].1 {
            return e[last].0;
        }
        let k = e.partition_point(|&(_, p)| p <= phase_rad) - 1;
        let (d0, p0) = e[k];
        let (d1, p1) = e[k + 1];
        if p1 == p0 {
            return d0;
        }
        d0 + (d1 - d0) * (phase_rad - p0) / (p1 - p0)
    }

    /// Inverse lookup: the phase realized by a given dimension.
    pub fn phase_for_dimension(&self, dimension_nm: f64) -> Result<f64, QuantizeError> {
        let e = &self.entries;
        let last = e.len() - 1;
        if dimension_nm < e[0].0 || dimension_nm > e[last].0 {
            return Err(QuantizeError::DimensionOutOfRange {
                dimension_nm,
                min_nm: e[0].0,
                max_nm: e[last].0,
            });
        }
        let k = e
            .partition_point(|&(d, _)| d <= dimension_nm)
            .saturating_sub(1)
            .min(last - 1);
        let (d0, p0) = e[k];
        let (d1, p1) = e[k + 1];
        Ok(p0 + (p1 - p0) * (dimension_nm - d0) / (d1 - d0))
    }
}

/// Smooth synthetic LUT standing in for fabrication data: a normalized
/// smoothstep phase curve over [d_min, d_max] spanning [0, 2pi(1 - 1/n)].
pub fn synthetic_lut(
    n_entries: usize,
    d_min_nm: f64,
    d_max_nm: f64,
    kind: LutKind,
    wavelength_um: f64,
) -> Result<PhaseLut, QuantizeError> {
    if n_entries < 8 {
        return Err(QuantizeError::TooFewEntries(n_entries));
    }
    let span = TAU * (1.0 - 1.0 / n_entries as f64);
    let entries = (0..n_entries)
        .map(|k| {
            let t = k as f64 / (n_entries - 1) as f64;
            let smooth = t * t * (3.0 - 2.0 * t);
            (d_min_nm + (d_max_nm - d_min_nm) * t, span * smooth)
        })
        .collect();
    PhaseLut::new(entries, kind, wavelength_um)
}

/// Physical realization of a phase profile: one shifter per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShifterElement {
    pub x_um: f64,
    pub y_um: f64,
    pub dimension_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShifterLayout {
    pub elements: Vec<ShifterElement>,
    pub lut_kind: LutKind,
    pub lens: LensSpec,
    pub nx: usize,
    pub ny: usize,
}

/// Map every cell's phase to a structure dimension through the LUT. The lens
/// spec rides along as layout metadata and must agree with the profile.
pub fn phase_to_structure(
    profile: &PhaseProfile,
    lut: &PhaseLut,
    lens: &LensSpec,
) -> Result<ShifterLayout, QuantizeError> {
    if lut.wavelength_um != profile.wavelength_um() {
        return Err(QuantizeError::WavelengthMismatch {
            lut_um: lut.wavelength_um,
            profile_um: profile.wavelength_um(),
        });
    }
    lut.check_span()?;
    let mut elements = Vec::with_capacity(profile.ny() * profile.nx());
    for i in 0..profile.ny() {
        for j in 0..profile.nx() {
            elements.push(ShifterElement {
                x_um: profile.cell_x(j),
                y_um: profile.cell_y(i),
                dimension_nm: lut.dimension_for_phase(profile.phases()[[i, j]]),
            });
        }
    }
    Ok(ShifterLayout {
        elements,
        lut_kind: lut.kind,
        lens: lens.clone(),
        nx: profile.nx(),
        ny: profile.ny(),
    })
}

/// Inverse lookup over a whole layout, rebuilding the wrapped phase grid.
pub fn structure_to_phase(
    layout: &ShifterLayout,
    lut: &PhaseLut,
) -> Result<PhaseProfile, QuantizeError> {
    if layout.elements.len() != layout.nx * layout.ny {
        return Err(QuantizeError::LayoutGridMismatch {
            elements: layout.elements.len(),
            ny: layout.ny,
            nx: layout.nx,
        });
    }
    let mut grid = Array2::zeros((layout.ny, layout.nx));
    for (idx, element) in layout.elements.iter().enumerate() {
        let (i, j) = (idx / layout.nx, idx % layout.nx);
        grid[[i, j]] = lut.phase_for_dimension(element.dimension_nm)?;
    }
    Ok(PhaseProfile::from_wrapped_grid(
        grid,
        layout.lens.pitch_um,
        layout.lens.wavelength_um,
    ))
}
