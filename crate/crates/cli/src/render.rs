//! 8-bit grayscale PNG rendering of slices and peels.

use cellpeel_core::Image2;

use crate::error::CliError;

/// Linear window `[min, max]` onto 0..=255; values outside clamp.
pub fn window(values: &[f64], min: f64, max: f64) -> Vec<u8> {
    let span = (max - min).max(f64::EPSILON);
    values.iter().map(|&v| (((v - min) / span) * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

/// Minimum and maximum over the pixels where `keep` holds; `(0, 1)` when
/// none do.
pub fn auto_range(values: &[f64], keep: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if keep(i) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

pub fn encode_gray8(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| CliError::usage(format!("png: {e}")))?;
        w.write_image_data(pixels).map_err(|e| CliError::usage(format!("png: {e}")))?;
    }
    Ok(out)
}

/// Windowed PNG of an image; pixels outside `mask` render black.
pub fn render_image(img: &Image2<f64>, mask: Option<&Image2<bool>>, range: Option<(f64, f64)>) -> Result<Vec<u8>, CliError> {
    let keep = |i: usize| mask.is_none_or(|m| m.data[i]);
    let (lo, hi) = range.unwrap_or_else(|| auto_range(&img.data, keep));
    let mut px = window(&img.data, lo, hi);
    for (i, p) in px.iter_mut().enumerate() {
        if !keep(i) {
            *p = 0;
        }
    }
    encode_gray8(img.width, img.height, &px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_clamps_and_scales() {
        assert_eq!(window(&[-5.0, 0.0, 50.0, 100.0, 300.0], 0.0, 100.0), vec![0, 0, 128, 255, 255]);
    }

    #[test]
    fn png_round_trip() {
        let img = Image2::from_vec(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let bytes = render_image(&img, None, None).unwrap();
        let dec = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut r = dec.read_info().unwrap();
        let mut buf = vec![0; r.output_buffer_size().unwrap()];
        let info = r.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (3, 2));
        assert_eq!(&buf[..6], &[0, 51, 102, 153, 204, 255]);
    }
}
