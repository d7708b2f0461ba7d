use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::color::{linear_to_srgb, srgb_to_linear, BitDepth};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, LinearImage};

fn codec_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Codec { path: path.to_path_buf(), source }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
        }
    }
    Ok(())
}

/// Reads an 8- or 16-bit sRGB PNG into linear light. Alpha is dropped;
/// grayscale is expanded to RGB.
pub fn read_png(path: &Path) -> Result<(LinearImage, BitDepth)> {
    let img = image::open(path).map_err(codec_err(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_)
    );
    if sixteen {
        let codes = img.to_rgb16().into_raw();
        Ok((srgb_to_linear(w, h, &codes, BitDepth::Sixteen)?, BitDepth::Sixteen))
    } else {
        let codes: Vec<u16> = img.to_rgb8().into_raw().into_iter().map(u16::from).collect();
        Ok((srgb_to_linear(w, h, &codes, BitDepth::Eight)?, BitDepth::Eight))
    }
}

/// Encodes a linear image to sRGB and writes it as PNG.
pub fn write_png(path: &Path, img: &LinearImage, depth: BitDepth) -> Result<()> {
    ensure_parent(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let codes = linear_to_srgb(img, depth);
    match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = codes.into_iter().map(|c| c as u8).collect();
            let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer sized from image");
            buf.save(path).map_err(codec_err(path))
        }
        BitDepth::Sixteen => {
            let buf = ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, codes).expect("buffer sized from image");
            buf.save(path).map_err(codec_err(path))
        }
    }
}

/// Writes a mask as 8-bit grayscale, 0 or 255.
pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer sized from mask");
    buf.save(path).map_err(codec_err(path))
}

/// Reads a mask PNG; any pixel whose luma exceeds half range is set.
pub fn read_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(codec_err(path))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    BinaryMask::new(w, h, img.into_raw().into_iter().map(|v| v > 127).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::srgb_code_to_linear;

    #[test]
    fn png_round_trip_is_code_exact() {
        let dir = tempfile::tempdir().unwrap();
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let img = LinearImage::from_fn(5, 4, |x, y| {
                let c = ((x * 37 + y * 11) % 256) as u16;
                let v = srgb_code_to_linear(c, BitDepth::Eight);
                [v, 1.0 - v, 0.5]
            });
            let p = dir.path().join(format!("img_{depth:?}.png"));
            write_png(&p, &img, depth).unwrap();
            let (back, d) = read_png(&p).unwrap();
            assert_eq!(d, depth);
            // decode(encode(decode(code))) is a fixed point
            write_png(&dir.path().join("again.png"), &back, depth).unwrap();
            let (again, _) = read_png(&dir.path().join("again.png")).unwrap();
            assert_eq!(back, again);
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(7, 3, |x, y| (x + y) % 3 == 0);
        let p = dir.path().join("m.png");
        write_mask_png(&p, &m).unwrap();
        assert_eq!(read_mask_png(&p).unwrap(), m);
    }
}
