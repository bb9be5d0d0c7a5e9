//! File formats: layout CSV, LUT CSV, shift-table CSV, binary field dumps,
//! and 16-bit PGM intensity images. Every format pairs the data file with a
//! JSON sidecar (same basename, `.meta.json`) carrying its metadata.
//!
//! Writes go to a temporary file in the target directory and rename into
//! place, so a failed run never leaves a partially written output.

use crate::field::ComplexField;
use crate::homogenize::{CalibrationConfig, ShiftEntry, ShiftTable};
use crate::lens::LensSpec;
use crate::profile::PhaseProfile;
use crate::quantize::{LutKind, PhaseLut, QuantizeError, ShifterElement, ShifterLayout};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path} line {line}: {message}")]
    MalformedCsv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("{path}: binary payload holds {found} values, sidecar declares {expected}")]
    BinarySizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{0}: dump is empty")]
    EmptyDump(PathBuf),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
}

/// Sidecar path: same basename, `.meta.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Write bytes atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    if !path.exists() {
        return Err(IoError::MissingSidecar(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Nine significant digits, enough for a lossless-at-printed-precision
/// round trip of the length scales in play.
fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

fn parse_f64(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64, IoError> {
    raw.trim().parse().map_err(|_| IoError::MalformedCsv {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {field} from '{raw}'"),
    })
}

// ---------------------------------------------------------------------------
// shifter layout

#[derive(Debug, Serialize, Deserialize)]
struct LayoutMeta {
    generated_by: String,
    lut_kind: LutKind,
    lens: LensSpec,
    nx: usize,
    ny: usize,
}

/// Layout CSV (`x_um,y_um,dimension_nm`) plus metadata sidecar.
pub fn export_layout(layout: &ShifterLayout, path: &Path) -> Result<(), IoError> {
    let mut text = String::from("x_um,y_um,dimension_nm\n");
    for e in &layout.elements {
        text.push_str(&fmt9(e.x_um));
        text.push(',');
        text.push_str(&fmt9(e.y_um));
        text.push(',');
        text.push_str(&fmt9(e.dimension_nm));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    write_json(
        &sidecar_path(path),
        &LayoutMeta {
            generated_by: crate::GENERATED_BY.to_string(),
            lut_kind: layout.lut_kind,
            lens: layout.lens.clone(),
            nx: layout.nx,
            ny: layout.ny,
        },
    )
}

pub fn import_layout(path: &Path) -> Result<ShifterLayout, IoError> {
    let meta: LayoutMeta = read_json(&sidecar_path(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut elements = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(elements.len() as u64 + 2);
        if record.len() != 3 {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        elements.push(ShifterElement {
            x_um: parse_f64(path, line, "x_um", &record[0])?,
            y_um: parse_f64(path, line, "y_um", &record[1])?,
            dimension_nm: parse_f64(path, line, "dimension_nm", &record[2])?,
        });
    }
    Ok(ShifterLayout {
        elements,
        lut_kind: meta.lut_kind,
        lens: meta.lens,
        nx: meta.nx,
        ny: meta.ny,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IoError::MalformedCsv {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// phase LUT

#[derive(Debug, Serialize, Deserialize)]
struct LutMeta {
    generated_by: String,
    kind: LutKind,
    wavelength_um: f64,
}

/// LUT CSV (`dimension_nm,phase_rad`) plus metadata sidecar.
pub fn export_lut(lut: &PhaseLut, path: &Path) -> Result<(), IoError> {
    let mut text = String::from("dimension_nm,phase_rad\n");
    for &(d, p) in lut.entries() {
        text.push_str(&fmt9(d));
        text.push(',');
        text.push_str(&fmt9(p));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    write_json(
        &sidecar_path(path),
        &LutMeta {
            generated_by: crate::GENERATED_BY.to_string(),
            kind: lut.kind,
            wavelength_um: lut.wavelength_um,
        },
    )
}

pub fn import_lut(path: &Path) -> Result<PhaseLut, IoError> {
    let meta: LutMeta = read_json(&sidecar_path(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut entries = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(entries.len() as u64 + 2);
        if record.len() != 2 {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        entries.push((
            parse_f64(path, line, "dimension_nm", &record[0])?,
            parse_f64(path, line, "phase_rad", &record[1])?,
        ));
    }
    Ok(PhaseLut::new(entries, meta.kind, meta.wavelength_um)?)
}

// ---------------------------------------------------------------------------
// shift table

#[derive(Debug, Serialize, Deserialize)]
struct ShiftTableMeta {
    generated_by: String,
    target_intensity: f64,
    config: CalibrationConfig,
}

/// Shift-table CSV (`a_um,s_um,achieved_intensity`) plus config sidecar.
pub fn export_shift_table(table: &ShiftTable, path: &Path) -> Result<(), IoError> {
    let mut text = String::from("a_um,s_um,achieved_intensity\n");
    for e in &table.entries {
        text.push_str(&fmt9(e.a_um));
        text.push(',');
        text.push_str(&fmt9(e.s_um));
        text.push(',');
        text.push_str(&fmt9(e.achieved_intensity));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    write_json(
        &sidecar_path(path),
        &ShiftTableMeta {
            generated_by: crate::GENERATED_BY.to_string(),
            target_intensity: table.target_intensity,
            config: table.config.clone(),
        },
    )
}

pub fn import_shift_table(path: &Path) -> Result<ShiftTable, IoError> {
    let meta: ShiftTableMeta = read_json(&sidecar_path(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut entries = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(entries.len() as u64 + 2);
        entries.push(ShiftEntry {
            a_um: parse_f64(path, line, "a_um", &record[0])?,
            s_um: parse_f64(path, line, "s_um", &record[1])?,
            achieved_intensity: parse_f64(path, line, "achieved_intensity", &record[2])?,
        });
    }
    Ok(ShiftTable {
        entries,
        target_intensity: meta.target_intensity,
        config: meta.config,
    })
}

// ---------------------------------------------------------------------------
// field and profile dumps

#[derive(Debug, Serialize, Deserialize)]
pub struct DumpMeta {
    pub nx: usize,
    pub ny: usize,
    pub dx_um: f64,
    pub wavelength_um: f64,
    pub z_um: f64,
    pub format: String,
    pub generated_by: String,
}

/// Binary dump of a complex field: little-endian 8-byte floats, row-major,
/// interleaved (re, im), with a JSON sidecar.
pub fn write_field_dump(field: &ComplexField, path: &Path) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(field.nx() * field.ny() * 16);
    for s in field.samples() {
        bytes.extend_from_slice(&s.re.to_le_bytes());
        bytes.extend_from_slice(&s.im.to_le_bytes());
    }
    write_atomic(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &DumpMeta {
            nx: field.nx(),
            ny: field.ny(),
            dx_um: field.dx_um(),
            wavelength_um: field.wavelength_um(),
            z_um: field.z_um(),
            format: "re_im_interleaved".to_string(),
            generated_by: crate::GENERATED_BY.to_string(),
        },
    )
}

pub fn read_field_dump(path: &Path) -> Result<ComplexField, IoError> {
    let meta: DumpMeta = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    if bytes.is_empty() {
        return Err(IoError::EmptyDump(path.to_path_buf()));
    }
    let expected = meta.nx * meta.ny;
    if bytes.len() != expected * 16 {
        return Err(IoError::BinarySizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() / 16,
        });
    }
    let mut samples = Array2::default((meta.ny, meta.nx));
    for (idx, chunk) in bytes.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        samples[[idx / meta.nx, idx % meta.nx]] = Complex64::new(re, im);
    }
    Ok(ComplexField::from_parts(
        samples,
        meta.dx_um,
        meta.wavelength_um,
        meta.z_um,
    ))
}

/// Real-only variant of the field dump carrying wrapped phases.
pub fn write_profile_dump(profile: &PhaseProfile, path: &Path) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(profile.nx() * profile.ny() * 8);
    for p in profile.phases() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    write_atomic(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &DumpMeta {
            nx: profile.nx(),
            ny: profile.ny(),
            dx_um: profile.pitch_um(),
            wavelength_um: profile.wavelength_um(),
            z_um: 0.0,
            format: "real".to_string(),
            generated_by: crate::GENERATED_BY.to_string(),
        },
    )
}

pub fn read_profile_dump(path: &Path) -> Result<PhaseProfile, IoError> {
    let meta: DumpMeta = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    if bytes.is_empty() {
        return Err(IoError::EmptyDump(path.to_path_buf()));
    }
    let expected = meta.nx * meta.ny;
    if bytes.len() != expected * 8 {
        return Err(IoError::BinarySizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() / 8,
        });
    }
    let mut grid = Array2::zeros((meta.ny, meta.nx));
    for (idx, chunk) in bytes.chunks_exact(8).enumerate() {
        grid[[idx / meta.nx, idx % meta.nx]] =
            f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(PhaseProfile::from_wrapped_grid(
        grid,
        meta.dx_um,
        meta.wavelength_um,
    ))
}

/// Max-normalized intensity as 16-bit binary PGM plus the dump sidecar.
pub fn write_intensity_pgm(field: &ComplexField, path: &Path) -> Result<(), IoError> {
    let intensity = field.intensity();
    let max = intensity.iter().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{} {}\n65535\n", field.nx(), field.ny()).into_bytes();
    for v in &intensity {
        let level = (v * scale).round() as u16;
        // PGM stores the most significant byte first
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    write_atomic(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &DumpMeta {
            nx: field.nx(),
            ny: field.ny(),
            dx_um: field.dx_um(),
            wavelength_um: field.wavelength_um(),
            z_um: field.z_um(),
            format: "pgm16".to_string(),
            generated_by: crate::GENERATED_BY.to_string(),
        },
    )
}
