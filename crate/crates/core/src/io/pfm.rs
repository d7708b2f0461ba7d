//! Single-channel portable float map (`Pf`).
//!
//! PFM stores scanlines bottom-to-top; the decoded map is top-to-bottom.
//! Writing always uses little-endian (negative scale). Reading accepts either
//! byte order.

use std::path::Path;

use super::{format_err, read_bytes, write_bytes};
use crate::error::Result;
use crate::image::ScalarMap;

pub fn encode_pfm(map: &ScalarMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&map.get(x, y).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<ScalarMap> {
    // Three whitespace-separated header tokens follow the magic; exactly one
    // whitespace byte separates the scale from the raster.
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PFM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| format_err(path, "non-ASCII PFM header"))?);
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err(format_err(path, "three-channel PFM is not supported for depth")),
        other => return Err(format_err(path, format!("bad PFM magic {other:?}"))),
    }
    let parse = |t: &str| t.parse::<usize>().map_err(|_| format_err(path, format!("bad PFM dimension {t:?}")));
    let w = parse(tokens[1])?;
    let h = parse(tokens[2])?;
    let scale: f32 = tokens[3].parse().map_err(|_| format_err(path, "bad PFM scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err(path, "PFM scale must be non-zero"));
    }
    let little = scale < 0.0;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != w * h * 4 {
        return Err(format_err(path, format!("PFM raster has {} bytes, expected {}", raster.len(), w * h * 4)));
    }
    let mut data = vec![0.0f32; w * h];
    for (i, c) in raster.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (x, row) = (i % w, i / w);
        data[(h - 1 - row) * w + x] = v;
    }
    ScalarMap::new(w, h, data).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_pfm(path: &Path) -> Result<ScalarMap> {
    decode_pfm(&read_bytes(path)?, path)
}

pub fn write_pfm(path: &Path, map: &ScalarMap) -> Result<()> {
    write_bytes(path, &encode_pfm(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_orientation() {
        let m = ScalarMap::from_fn(3, 2, |x, y| (y * 10 + x) as f32 + 0.5);
        let bytes = encode_pfm(&m);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // first stored scanline is the bottom row
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 10.5);
        let back = decode_pfm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn reads_big_endian() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        let m = decode_pfm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(m.get(0, 0), 2.5);
    }

    #[test]
    fn rejects_color_and_truncation() {
        let p = Path::new("mem");
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0", p).is_err());
        assert!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0\0\0", p).is_err());
        assert!(decode_pfm(b"Pf\n2", p).is_err());
    }
}
