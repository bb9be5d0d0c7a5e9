//! Metalens design toolkit for artificial focus patterns.
//!
//! A metalens is a flat optic built from subwavelength phase shifters on a
//! pitch lattice. Instead of focusing light to a single point, the phase
//! construction implemented here steers every lattice row to its own off-axis
//! "micro focus"; the overlapping micro focuses draw a designed pattern
//! (lines, arcs, letter shapes) on the focal plane.
//!
//! The crate is organized as a pipeline:
//!
//! * [`synthesis`] — closed-form phase construction and diagnostic formulas
//!   (point focus, off-axis rows, focal shift, micro-focus spacing, local NA,
//!   beamlet width).
//! * [`pattern`] — declarative target patterns compiled into per-row,
//!   per-sub-aperture steering parameters.
//! * [`profile`] — phase grids: row-wise synthesis and the grating-rotation
//!   construction for curved foci.
//! * [`quantize`] — phase wrapping, pitch-grid discretization, and the
//!   phase ↔ structure-dimension lookup table.
//! * [`field`] / [`propagate`] — complex fields and band-limited
//!   angular-spectrum transport, the scalar stand-in for full-wave solvers.
//! * [`metrics`] — focal-plane search, FWHM, and pattern homogeneity
//!   measurements.
//! * [`homogenize`] — calibration of the per-row focal shift that equalizes
//!   focused intensity across a pattern.
//! * [`diagnostics`] / [`io`] — design reports and file formats (layout CSV,
//!   LUT CSV, field dumps, PGM images).
//!
//! All lengths are micrometres except structure dimensions, which follow
//! fabrication convention and are nanometres. Angles are degrees at
//! serialization boundaries and radians internally.

pub mod diagnostics;
pub mod field;
pub mod homogenize;
pub mod io;
pub mod lens;
pub mod metrics;
pub mod pattern;
pub mod profile;
pub mod propagate;
pub mod quantize;
pub mod synthesis;

pub use field::{field_from_profile, total_power, ComplexField};
pub use homogenize::{
    apply_homogenization, calibrate_focal_shift, CalibrationConfig, ShiftEntry, ShiftTable,
};
pub use lens::{LensSpec, RowParams};
pub use metrics::{find_focal_plane, fwhm_of_cut, pattern_metrics, FocusMetrics, PatternMetrics};
pub use pattern::{compile_letter, compile_segments, PatternSpec, RowAssignment, Segment};
pub use profile::{rotate_half_lens, synthesize_profile, ArcSweep, PhaseProfile, RadialProfile};
pub use propagate::propagate;
pub use quantize::{
    discretize, phase_to_structure, structure_to_phase, synthetic_lut, wrap_phase, PhaseLut,
    ShifterLayout,
};
pub use synthesis::{
    arc_offset, beam_width, line_offset, local_na, micro_focus_spacing, offset_step,
    point_focus_phase, shifted_focus_phase, spacing_criterion_satisfied,
};

/// Version string stamped into metadata sidecars.
pub const GENERATED_BY: &str = concat!("focusforge ", env!("CARGO_PKG_VERSION"));
