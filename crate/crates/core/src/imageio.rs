//! Image loading and saving: binary PPM (P6) for lossless fixtures, PNG for
//! visualizations. Samples are normalized to `[0, 1]` on load.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::image::Image;
use crate::{Error, Result};

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes by content sniffing: P6 PPM or PNG.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else {
        Err(Error::UnsupportedImage(
            "expected a P6 PPM or PNG stream".into(),
        ))
    }
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "ppm" => encode_ppm(img),
        "png" => encode_png(img)?,
        other => {
            return Err(Error::UnsupportedImage(format!(
                "cannot write extension '{other}', use .ppm or .png"
            )))
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.samples().iter().map(|&v| quantize(v)));
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let corrupt = |msg: &str| Error::CorruptImage(format!("ppm: {msg}"));
    if !bytes.starts_with(b"P6") {
        return Err(Error::UnsupportedImage("not a P6 ppm".into()));
    }
    let mut pos = 2usize;
    let next_token = |pos: &mut usize| -> Result<u64> {
        // skip whitespace and '#' comments
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(corrupt("truncated or malformed header"));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse()
            .map_err(|_| corrupt("header value overflow"))
    };
    let width = next_token(&mut pos)? as usize;
    let height = next_token(&mut pos)? as usize;
    let maxval = next_token(&mut pos)?;
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedImage(format!(
            "ppm maxval {maxval} unsupported, expected 1..=255"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(corrupt("missing raster separator"));
    }
    pos += 1;
    let need = width * height * 3;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(corrupt("truncated raster"));
    }
    let scale = 1.0 / maxval as f32;
    let data = raster[..need].iter().map(|&b| b as f32 * scale).collect();
    Image::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)
        .map_err(|e| Error::CorruptImage(format!("png: {e}")))?
        .to_rgb8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = decoded.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Image::new(w, h, data)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.samples().iter().map(|&v| quantize(v)).collect();
    let buffer =
        ::image::RgbImage::from_raw(img.width() as u32, img.height() as u32, raw).unwrap();
    let mut out = Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, ::image::ImageFormat::Png)
        .map_err(|e| Error::CorruptImage(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}
