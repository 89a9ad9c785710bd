use std::path::Path;

use super::{read_file, write_file, DataError, DepthMap};

fn header_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, DataError> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(DataError::parse("pfm", "truncated header"));
    }
    let line = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| DataError::parse("pfm", "header is not ASCII"))?;
    *pos += 1;
    Ok(line.trim())
}

/// Decodes a grayscale (`Pf`) PFM. Rows are stored bottom-to-top in the file
/// and returned top-to-bottom; a negative scale means little-endian floats.
pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap, DataError> {
    let mut pos = 0;
    match header_line(bytes, &mut pos)? {
        "Pf" => {}
        m => {
            return Err(DataError::parse(
                "pfm",
                format!("unsupported magic {m:?}, expected Pf"),
            ))
        }
    }
    let dims = header_line(bytes, &mut pos)?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (width, height) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) => (w, h),
        _ => {
            return Err(DataError::parse(
                "pfm",
                format!("malformed dimensions {dims:?}"),
            ))
        }
    };
    let scale: f32 = header_line(bytes, &mut pos)?
        .parse()
        .map_err(|_| DataError::parse("pfm", "malformed scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(DataError::parse("pfm", "scale must be non-zero"));
    }
    let little_endian = scale < 0.0;
    let n = width * height;
    let raster = bytes
        .get(pos..pos + 4 * n)
        .ok_or_else(|| DataError::parse("pfm", format!("raster truncated: need {} floats", n)))?;
    let mut data = vec![0.0f32; n];
    for (i, chunk) in raster.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, col) = (i / width, i % width);
        data[(height - 1 - row) * width + col] = v;
    }
    DepthMap::new(width, height, data)
}

/// Little-endian PFM, rows bottom-to-top.
pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for col in 0..w {
            out.extend_from_slice(&depth.get(col, row).to_le_bytes());
        }
    }
    out
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<DepthMap, DataError> {
    let path = path.as_ref();
    decode_pfm(&read_file(path)?).map_err(|e| match e {
        DataError::Parse { message, .. } => DataError::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn write_pfm(depth: &DepthMap, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_file(path.as_ref(), &encode_pfm(depth))
}
