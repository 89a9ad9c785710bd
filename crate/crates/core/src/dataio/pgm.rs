use std::path::Path;

use super::{read_file, write_file, DataError, GrayImage};

/// Reads whitespace-separated header tokens, skipping `#` comments.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start)
            .then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())
            .flatten()
    }

    fn number(&mut self, what: &str) -> Result<usize, DataError> {
        self.token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| DataError::parse("pgm", format!("missing or malformed {what}")))
    }
}

/// Decodes a binary (`P5`) PGM with maxval ≤ 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, DataError> {
    let mut header = HeaderReader { bytes, pos: 0 };
    match header.token() {
        Some("P5") => {}
        Some(m) => {
            return Err(DataError::parse(
                "pgm",
                format!("unsupported magic {m:?}, expected P5"),
            ))
        }
        None => return Err(DataError::parse("pgm", "empty file")),
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(DataError::parse(
            "pgm",
            format!("unsupported maxval {maxval}"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = header.pos + 1;
    let end = start + width * height;
    if end > bytes.len() {
        return Err(DataError::parse(
            "pgm",
            format!("raster truncated: need {} bytes", width * height),
        ));
    }
    GrayImage::new(width, height, bytes[start..end].to_vec())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, DataError> {
    let path = path.as_ref();
    decode_pgm(&read_file(path)?).map_err(|e| match e {
        DataError::Parse { message, .. } => DataError::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_file(path.as_ref(), &encode_pgm(img))
}
