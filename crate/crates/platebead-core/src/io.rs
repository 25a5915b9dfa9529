//! On-disk formats: binary PGM (P5) for inspection, the raw "BPAT" float32
//! block for pipelines, and FRF CSV.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::CoreError;
use crate::grid::Grid;
use crate::types::{BeadingPattern, FrequencyResponse};

/// Write a pattern as 8-bit binary PGM, values scaled to 0..=255.
pub fn write_pgm(path: &Path, pattern: &BeadingPattern) -> Result<(), CoreError> {
    let g = &pattern.grid;
    let mut buf = Vec::with_capacity(32 + g.len());
    write!(buf, "P5\n{} {}\n255\n", g.w, g.h)?;
    for &v in &g.data {
        buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Write the raw little-endian float32 block:
/// magic "BPAT", u32 H, u32 W, u32 reserved, then H*W row-major f32.
pub fn write_bpat(path: &Path, pattern: &BeadingPattern) -> Result<(), CoreError> {
    std::fs::write(path, bpat_bytes(&pattern.grid))?;
    Ok(())
}

pub fn bpat_bytes(grid: &Grid) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 4 * grid.len());
    buf.extend_from_slice(b"BPAT");
    buf.extend_from_slice(&(grid.h as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.w as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for &v in &grid.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn read_bpat(path: &Path) -> Result<Grid, CoreError> {
    let bytes = std::fs::read(path)?;
    grid_from_bpat(&bytes)
}

pub fn grid_from_bpat(bytes: &[u8]) -> Result<Grid, CoreError> {
    if bytes.len() < 16 || &bytes[0..4] != b"BPAT" {
        return Err(CoreError::Format { format: "BPAT", why: "bad magic or truncated header".into() });
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 16 + 4 * h * w;
    if bytes.len() != expected {
        return Err(CoreError::Format {
            format: "BPAT",
            why: format!("expected {} bytes for {}x{}, got {}", expected, h, w, bytes.len()),
        });
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Grid::from_vec(h, w, data)
}

/// Read a binary (P5) PGM into a normalized grid.
pub fn read_pgm(path: &Path) -> Result<Grid, CoreError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |why: &str| CoreError::Format { format: "PGM", why: why.into() };
    if !bytes.starts_with(b"P5") {
        return Err(bad("not a P5 PGM"));
    }
    // header: three whitespace-separated tokens after the magic (w, h, maxval)
    let mut pos = 2;
    let mut tokens = Vec::new();
    while tokens.len() < 3 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| bad("non-ascii header"))?
                .parse::<usize>()
                .map_err(|_| bad("non-numeric header field"))?,
        );
    }
    if tokens.len() != 3 {
        return Err(bad("truncated header"));
    }
    let (w, h, maxval) = (tokens[0], tokens[1], tokens[2]);
    if maxval == 0 || maxval > 255 {
        return Err(bad("unsupported maxval"));
    }
    pos += 1; // single whitespace after maxval
    if bytes.len() < pos + w * h {
        return Err(bad("truncated pixel data"));
    }
    let data = bytes[pos..pos + w * h].iter().map(|&b| b as f64 / maxval as f64).collect();
    Grid::from_vec(h, w, data)
}

pub fn write_frf_csv(path: &Path, frf: &FrequencyResponse) -> Result<(), CoreError> {
    let mut s = String::from("frequency_hz,level_db\n");
    for (f, l) in frf.frequencies.iter().zip(&frf.levels) {
        s.push_str(&format!("{},{}\n", f, l));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_frf_csv(path: &Path) -> Result<FrequencyResponse, CoreError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("frequency_hz,level_db") => {}
        _ => {
            return Err(CoreError::Format { format: "FRF CSV", why: "missing header".into() })
        }
    }
    let mut freqs = Vec::new();
    let mut levels = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let f = parts
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| CoreError::Format { format: "FRF CSV", why: format!("bad row: {line}") })?;
        let l = parts
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| CoreError::Format { format: "FRF CSV", why: format!("bad row: {line}") })?;
        freqs.push(f);
        levels.push(l);
    }
    FrequencyResponse::new(freqs, levels)
}
