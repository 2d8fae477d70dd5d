//! Foreground mask rasters: binary PGM (`P5`, 8-bit) or plain text rows of
//! `0`/`1` characters.

use super::{FormatError, ImageExtent};

/// Encode a row-major probability raster as 8-bit binary PGM.
pub fn write_mask_pgm(extent: ImageExtent, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), extent.pixel_count());
    let mut out = format!("P5\n{} {}\n255\n", extent.width, extent.height).into_bytes();
    out.extend(
        values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Decode a mask raster into `(extent, row-major values in [0, 1])`.
pub fn parse_mask(bytes: &[u8]) -> Result<(ImageExtent, Vec<f64>), FormatError> {
    if bytes.starts_with(b"P5") {
        parse_pgm(bytes)
    } else {
        let text =
            std::str::from_utf8(bytes).map_err(|_| FormatError::BadMask("not utf-8".into()))?;
        parse_text(text)
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(ImageExtent, Vec<f64>), FormatError> {
    // Header: magic, width, height, maxval separated by whitespace, then one
    // whitespace byte before the raster.
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(FormatError::BadMask("truncated header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or_default().to_string());
    }
    pos += 1;
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| FormatError::BadMask(format!("bad header field {s:?}")))
    };
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(FormatError::BadMask(format!("unsupported maxval {maxval}")));
    }
    let extent = ImageExtent::new(height, width);
    let raster = bytes.get(pos..pos + extent.pixel_count()).ok_or_else(|| {
        FormatError::BadMask("raster shorter than header dimensions".into())
    })?;
    let values = raster.iter().map(|&b| b as f64 / maxval as f64).collect();
    Ok((extent, values))
}

fn parse_text(text: &str) -> Result<(ImageExtent, Vec<f64>), FormatError> {
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let width = rows.first().map_or(0, |r| r.len());
    let mut values = Vec::with_capacity(rows.len() * width);
    for row in &rows {
        if row.len() != width {
            return Err(FormatError::BadMask("ragged rows".into()));
        }
        for ch in row.chars() {
            values.push(match ch {
                '0' => 0.0,
                '1' => 1.0,
                other => return Err(FormatError::BadMask(format!("unexpected {other:?}"))),
            });
        }
    }
    Ok((ImageExtent::new(rows.len() as u32, width as u32), values))
}
