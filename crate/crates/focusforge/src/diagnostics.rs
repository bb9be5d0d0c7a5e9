//! Per-row design diagnostics: micro-focus spacing, local NA, beamlet width.

use crate::lens::LensSpec;
use crate::pattern::{CompileWarning, RowAssignment};
use crate::synthesis::{beam_width, local_na, spacing_criterion_satisfied};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubApertureDiagnostics {
    pub segment_id: usize,
    pub x_lo_um: f64,
    pub x_hi_um: f64,
    pub a_um: f64,
    pub s_um: f64,
    /// Marginal-ray NA of this micro metalens.
    pub local_na: f64,
    /// Beamlet width of one pitch cell at this NA.
    pub beam_width_um: f64,
    /// True when the beamlet is wider than the diffraction-limited spot,
    /// the regime where the focus visibly broadens.
    pub beam_width_exceeds_limit: bool,
    /// Offset change to the next covered row, `a(y+U) - a(y)`.
    pub offset_step_um: Option<f64>,
    /// Micro-focus spacing `D = sqrt(da^2 + U^2)`.
    pub spacing_um: Option<f64>,
    /// Whether `D <= lambda / (2 NA)`.
    pub spacing_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostics {
    pub y_um: f64,
    pub sub_apertures: Vec<SubApertureDiagnostics>,
}

/// The full design report: every row is listed, covered or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    pub rows: Vec<RowDiagnostics>,
    pub warnings: Vec<CompileWarning>,
    pub spacing_violations: usize,
    pub max_local_na: f64,
}

/// Evaluate the spacing and beam-width diagnostics over a compiled
/// assignment. The offset step of a sub-aperture is taken against the same
/// segment's nearest sub-aperture on the next row.
pub fn design_diagnostics(
    assignment: &RowAssignment,
    spec: &LensSpec,
    warnings: Vec<CompileWarning>,
) -> DesignDiagnostics {
    let pitch = spec.pitch_um;
    let mut rows = Vec::with_capacity(assignment.rows.len());
    let mut spacing_violations = 0usize;
    let mut max_na = 0.0f64;

    for (i, row) in assignment.rows.iter().enumerate() {
        let next = assignment.rows.get(i + 1);
        let mut subs = Vec::with_capacity(row.sub_apertures.len());
        for sub in &row.sub_apertures {
            let f_eff = spec.focal_length_um + sub.s_um;
            let na = local_na(sub.x_hi_um - sub.x_lo_um, sub.a_um, f_eff)
                .expect("compiled sub-apertures have positive width and focal length");
            max_na = max_na.max(na);
            let d_n = beam_width(pitch, na)
                .expect("marginal-ray NA is strictly below 1");
            let limit = spec.wavelength_um / (2.0 * na);

            let offset_step = next.and_then(|next_row| {
                next_row
                    .sub_apertures
                    .iter()
                    .filter(|s| s.segment_id == sub.segment_id)
                    .map(|s| s.a_um - sub.a_um)
                    .min_by(|x, y| x.abs().total_cmp(&y.abs()))
            });
            let spacing = offset_step.map(|da| da.hypot(pitch));
            let spacing_ok = spacing.map(|d| {
                spacing_criterion_satisfied(d, spec.wavelength_um, na)
                    .expect("NA already validated")
            });
            if spacing_ok == Some(false) {
                spacing_violations += 1;
            }

            subs.push(SubApertureDiagnostics {
                segment_id: sub.segment_id,
                x_lo_um: sub.x_lo_um,
                x_hi_um: sub.x_hi_um,
                a_um: sub.a_um,
                s_um: sub.s_um,
                local_na: na,
                beam_width_um: d_n,
                beam_width_exceeds_limit: d_n > limit,
                offset_step_um: offset_step,
                spacing_um: spacing,
                spacing_ok,
            });
        }
        rows.push(RowDiagnostics {
            y_um: row.y_um,
            sub_apertures: subs,
        });
    }

    DesignDiagnostics {
        rows,
        warnings,
        spacing_violations,
        max_local_na: max_na,
    }
}
