//! Lossless PNG encoding of RGB8 images.

use std::io::Cursor;

use thiserror::Error;

use crate::types::RasterImage;

/// Largest accepted side, in pixels.
pub const MAX_SIDE: u32 = 8192;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("png decode failed: {0}")]
    Decode(String),
    #[error("png encode failed: {0}")]
    Encode(String),
    #[error("image {0}x{1} exceeds the {MAX_SIDE}px limit")]
    TooLarge(u32, u32),
}

/// 8-bit RGB, no alpha, no interlacing.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| CodecError::Encode(e.to_string()))?;
        w.write_image_data(img.pixels()).map_err(|e| CodecError::Encode(e.to_string()))?;
        w.finish().map_err(|e| CodecError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Decode any 8-bit-normalizable PNG to RGB8 (alpha is dropped, gray is
/// replicated).
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, CodecError> {
    let err = |e: png::DecodingError| CodecError::Decode(e.to_string());
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = dec.read_info().map_err(err)?;
    let (w, h) = {
        let info = reader.info();
        (info.width, info.height)
    };
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(CodecError::TooLarge(w, h));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| CodecError::Decode("output buffer size overflow".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(frame.buffer_size());
    let (color, _) = reader.output_color_type();
    let n = (w * h) as usize;
    let rgb: Vec<u8> = match color {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => return Err(CodecError::Decode("unexpanded palette".into())),
    };
    if rgb.len() != 3 * n {
        return Err(CodecError::Decode("pixel payload length mismatch".into()));
    }
    RasterImage::from_raw(w as usize, h as usize, rgb).map_err(|e| CodecError::Decode(e.to_string()))
}
