use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, Rational, TiffEncoder};
use tiff::tags::{ResolutionUnit, Tag};
use tiff::ColorType;

use super::{BitDepth, IntensityVolume, LabelVolume, MaskVolume, VolumeIoError, VolumeMeta};
use crate::grid::Volume;

/// Contents of `<stem>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spacing: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_interval_s: Option<f64>,
}

/// `dir/name.tif` → `dir/name.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// All pages of a TIFF file, widened to `u32` and concatenated page after
/// page. Multi-sample pages are stored interleaved.
#[derive(Debug, Clone)]
pub struct Pages {
    pub width: usize,
    pub height: usize,
    pub bits: u8,
    pub samples: u16,
    pub count: usize,
    pub data: Vec<u32>,
    /// Lateral pixel size in µm derived from the resolution tags.
    pub lateral_spacing: Option<f64>,
    /// Axial spacing from an ImageJ style `spacing=` description entry.
    pub axial_spacing: Option<f64>,
}

fn io_err(path: &Path, source: std::io::Error) -> VolumeIoError {
    VolumeIoError::Io { path: path.display().to_string(), source }
}

fn fmt_err(path: &Path, reason: impl Into<String>) -> VolumeIoError {
    VolumeIoError::Format { path: path.display().to_string(), reason: reason.into() }
}

fn tiff_err(path: &Path, e: tiff::TiffError) -> VolumeIoError {
    match e {
        tiff::TiffError::IoError(source)
            if matches!(source.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::InvalidData) =>
        {
            fmt_err(path, format!("truncated or malformed TIFF: {source}"))
        }
        tiff::TiffError::IoError(source) => io_err(path, source),
        other => fmt_err(path, other.to_string()),
    }
}

fn spacing_from_resolution<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>) -> Option<f64> {
    let (n, d) = match dec.find_tag(Tag::XResolution).ok()?? {
        tiff::decoder::ifd::Value::Rational(n, d) => (n as f64, d as f64),
        _ => return None,
    };
    if n <= 0.0 || d <= 0.0 {
        return None;
    }
    let per_unit = n / d;
    let unit = dec.find_tag_unsigned::<u16>(Tag::ResolutionUnit).ok().flatten().unwrap_or(2);
    let um_per_unit = match unit {
        2 => 25_400.0,
        3 => 10_000.0,
        // no absolute unit: ImageJ writes pixels per µm here
        _ => 1.0,
    };
    // the encoder's default 1/1 per inch is not a calibration
    if unit == 1 && per_unit == 1.0 {
        return None;
    }
    Some(um_per_unit / per_unit)
}

fn axial_from_description<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>) -> Option<f64> {
    let desc = match dec.find_tag(Tag::ImageDescription).ok()?? {
        tiff::decoder::ifd::Value::Ascii(s) => s,
        _ => return None,
    };
    desc.lines()
        .filter_map(|l| l.trim().strip_prefix("spacing="))
        .find_map(|v| v.trim().parse::<f64>().ok())
        .filter(|v| *v > 0.0)
}

/// Reads every page of a grayscale (or 3-sample) TIFF.
pub fn read_pages(path: &Path) -> Result<Pages, VolumeIoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(|e| tiff_err(path, e))?
        .with_limits(Limits::unlimited());

    let (w, h) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
    let (width, height) = (w as usize, h as usize);
    let first_type = dec.colortype().map_err(|e| tiff_err(path, e))?;
    let (bits, samples) = match first_type {
        ColorType::Gray(b) => (b, 1u16),
        ColorType::RGB(16) => (16, 3),
        ColorType::RGB(_) | ColorType::RGBA(_) => {
            return Err(fmt_err(path, "RGB pages are not supported, expected grayscale"));
        }
        other => return Err(fmt_err(path, format!("unsupported colour type {other:?}"))),
    };
    if !matches!(bits, 8 | 16 | 32) {
        return Err(fmt_err(path, format!("unsupported bit depth {bits}")));
    }
    let lateral_spacing = spacing_from_resolution(&mut dec);
    let axial_spacing = axial_from_description(&mut dec);

    let mut data = Vec::new();
    let mut count = 0usize;
    loop {
        let ct = dec.colortype().map_err(|e| tiff_err(path, e))?;
        if ct != first_type {
            return Err(fmt_err(path, format!("page {count} has {ct:?}, first page has {first_type:?}")));
        }
        let (pw, ph) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
        if (pw as usize, ph as usize) != (width, height) {
            return Err(fmt_err(path, format!("page {count} is {pw}x{ph}, first page is {w}x{h}")));
        }
        match dec.read_image().map_err(|e| tiff_err(path, e))? {
            DecodingResult::U8(v) => data.extend(v.into_iter().map(u32::from)),
            DecodingResult::U16(v) => data.extend(v.into_iter().map(u32::from)),
            DecodingResult::U32(v) => data.extend(v),
            _ => return Err(fmt_err(path, "unsupported sample format")),
        }
        count += 1;
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(|e| tiff_err(path, e))?;
    }
    if count == 0 || width == 0 || height == 0 {
        return Err(fmt_err(path, "no image pages"));
    }
    Ok(Pages { width, height, bits, samples, count, data, lateral_spacing, axial_spacing })
}

/// Writes `count` pages of `width x height` samples. `bits` is 8, 16 or 32
/// for single-sample pages; 3-sample pages are always 16-bit.
pub fn write_pages(
    path: &Path,
    width: usize,
    height: usize,
    bits: u8,
    samples: u16,
    data: &[u32],
    spacing: Option<[f64; 3]>,
) -> Result<(), VolumeIoError> {
    let page_len = width * height * samples as usize;
    if page_len == 0 || !data.len().is_multiple_of(page_len) {
        return Err(VolumeIoError::Shape(format!(
            "{} samples do not fill whole {width}x{height}x{samples} pages",
            data.len()
        )));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    {
        let mut enc = TiffEncoder::new(&mut writer).map_err(|e| tiff_err(path, e))?;
        let (w, h) = (width as u32, height as u32);
        let description = spacing.map(|s| format!("images={}\nspacing={}\nunit=micron\n", data.len() / page_len, s[2]));
        let resolution = spacing.map(|s| {
            // pixels per centimetre with six decimals of precision
            let per_cm = 10_000.0 / s[0];
            Rational { n: (per_cm * 1_000.0).round().min(u32::MAX as f64) as u32, d: 1_000 }
        });
        macro_rules! page {
            ($ct:ty, $conv:expr) => {
                for chunk in data.chunks(page_len) {
                    let buf: Vec<_> = chunk.iter().map($conv).collect();
                    let mut img = enc.new_image::<$ct>(w, h).map_err(|e| tiff_err(path, e))?;
                    if let Some(r) = resolution.clone() {
                        img.resolution(ResolutionUnit::Centimeter, r);
                    }
                    if let Some(d) = &description {
                        img.encoder().write_tag(Tag::ImageDescription, d.as_str()).map_err(|e| tiff_err(path, e))?;
                    }
                    img.write_data(&buf).map_err(|e| tiff_err(path, e))?;
                }
            };
        }
        match (bits, samples) {
            (8, 1) => page!(colortype::Gray8, |&v| v as u8),
            (16, 1) => page!(colortype::Gray16, |&v| v as u16),
            (32, 1) => page!(colortype::Gray32, |&v| v),
            (16, 3) => page!(colortype::RGB16, |&v| v as u16),
            _ => return Err(VolumeIoError::Shape(format!("cannot write {bits}-bit {samples}-sample pages"))),
        }
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

fn write_sidecar(path: &Path, meta: &VolumeMeta) -> Result<(), VolumeIoError> {
    let side = Sidecar { spacing: meta.spacing, frame_interval_s: meta.frame_interval };
    let sp = sidecar_path(path);
    let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    std::fs::write(&sp, text + "\n").map_err(|e| io_err(&sp, e))
}

fn resolve_meta(path: &Path, pages: &Pages) -> Result<VolumeMeta, VolumeIoError> {
    let dims = [pages.width, pages.height, pages.count];
    let sp = sidecar_path(path);
    let meta = if sp.exists() {
        let text = std::fs::read_to_string(&sp).map_err(|e| io_err(&sp, e))?;
        let side: Sidecar = serde_json::from_str(&text).map_err(|e| fmt_err(&sp, e.to_string()))?;
        VolumeMeta { dims, spacing: side.spacing, frame_interval: side.frame_interval_s }
    } else if let Some(lat) = pages.lateral_spacing {
        let ax = pages.axial_spacing.unwrap_or(lat);
        VolumeMeta { dims, spacing: [lat, lat, ax], frame_interval: None }
    } else {
        log::warn!("{}: no spacing metadata, assuming 1 µm isotropic", path.display());
        VolumeMeta::unit(dims)
    };
    meta.validate()?;
    Ok(meta)
}

/// Loads an 8- or 16-bit grayscale multi-page TIFF.
///
/// Spacing is taken from the `<stem>.meta.json` sidecar if present, then from
/// the TIFF resolution tags, and defaults to 1 µm otherwise.
pub fn load_stack(path: &Path) -> Result<IntensityVolume, VolumeIoError> {
    let pages = read_pages(path)?;
    if pages.samples != 1 {
        return Err(fmt_err(path, "expected single-sample grayscale pages"));
    }
    let depth = match pages.bits {
        8 => BitDepth::U8,
        16 => BitDepth::U16,
        b => return Err(fmt_err(path, format!("intensity stacks must be 8 or 16 bit, got {b}"))),
    };
    let meta = resolve_meta(path, &pages)?;
    let data = pages.data.into_iter().map(|v| v as u16).collect();
    Ok(IntensityVolume::new(Volume::from_vec(meta, data)?, depth))
}

/// Saves an intensity stack at its native bit depth plus a spacing sidecar.
pub fn save_stack(vol: &IntensityVolume, path: &Path) -> Result<(), VolumeIoError> {
    let [nx, ny, _] = vol.grid.meta.dims;
    let data: Vec<u32> = vol.grid.data.iter().map(|&v| v as u32).collect();
    write_pages(path, nx, ny, vol.depth.bits(), 1, &data, Some(vol.grid.meta.spacing))?;
    write_sidecar(path, &vol.grid.meta)
}

/// Loads a label volume stored as 8, 16 or 32 bit pages.
pub fn load_labels(path: &Path) -> Result<LabelVolume, VolumeIoError> {
    let pages = read_pages(path)?;
    if pages.samples != 1 {
        return Err(fmt_err(path, "expected single-sample label pages"));
    }
    let meta = resolve_meta(path, &pages)?;
    Volume::from_vec(meta, pages.data)
}

/// Saves labels as 16-bit pages, or 32-bit when a label exceeds `u16::MAX`.
pub fn save_labels(vol: &LabelVolume, path: &Path) -> Result<(), VolumeIoError> {
    let [nx, ny, _] = vol.meta.dims;
    let max = vol.data.iter().copied().max().unwrap_or(0);
    let bits = if max > u16::MAX as u32 { 32 } else { 16 };
    write_pages(path, nx, ny, bits, 1, &vol.data, Some(vol.meta.spacing))?;
    write_sidecar(path, &vol.meta)
}

/// Loads a mask; any non-zero sample is foreground.
pub fn load_mask(path: &Path) -> Result<MaskVolume, VolumeIoError> {
    let labels = load_labels(path)?;
    Ok(labels.map(|&v| v != 0))
}

/// Saves a mask as 8-bit 0/255 pages.
pub fn save_mask(mask: &MaskVolume, path: &Path) -> Result<(), VolumeIoError> {
    let [nx, ny, _] = mask.meta.dims;
    let data: Vec<u32> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pages(path, nx, ny, 8, 1, &data, Some(mask.meta.spacing))?;
    write_sidecar(path, &mask.meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp_stack(dims: [usize; 3], depth: BitDepth) -> IntensityVolume {
        let meta = VolumeMeta::new(dims, [0.19, 0.19, 0.5]).unwrap();
        let n = meta.voxel_count();
        let max = depth.max_value() as usize;
        let data = (0..n).map(|i| ((i * 37) % (max + 1)) as u16).collect();
        IntensityVolume::new(Volume::from_vec(meta, data).unwrap(), depth)
    }

    #[test]
    fn page_count_becomes_nz() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tif");
        let vol = ramp_stack([4, 4, 5], BitDepth::U16);
        let data: Vec<u32> = vol.grid.data.iter().map(|&v| v as u32).collect();
        write_pages(&path, 4, 4, 16, 1, &data, None).unwrap();
        let back = load_stack(&path).unwrap();
        assert_eq!(back.grid.meta.dims, [4, 4, 5]);
        assert_eq!(back.depth, BitDepth::U16);
        // neither sidecar nor tags
        assert_eq!(back.grid.meta.spacing, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn sidecar_spacing_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tif");
        let vol = ramp_stack([4, 4, 5], BitDepth::U8);
        let data: Vec<u32> = vol.grid.data.iter().map(|&v| v as u32).collect();
        write_pages(&path, 4, 4, 8, 1, &data, Some([2.0, 2.0, 3.0])).unwrap();
        std::fs::write(dir.path().join("s.meta.json"), r#"{"spacing":[0.19,0.19,0.5]}"#).unwrap();
        let back = load_stack(&path).unwrap();
        assert_eq!(back.grid.meta.spacing, [0.19, 0.19, 0.5]);
    }

    #[test]
    fn resolution_tags_used_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tif");
        write_pages(&path, 2, 2, 8, 1, &[0; 8], Some([0.19, 0.19, 0.5])).unwrap();
        let back = load_stack(&path).unwrap();
        let s = back.grid.meta.spacing;
        assert!((s[0] - 0.19).abs() < 1e-6 && (s[1] - 0.19).abs() < 1e-6);
        assert!((s[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_tiff_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tif");
        // header with a null first-IFD offset
        std::fs::write(&path, [b'I', b'I', 42, 0, 0, 0, 0, 0]).unwrap();
        assert!(matches!(load_stack(&path), Err(VolumeIoError::Format { .. })));
    }

    #[test]
    fn rgb_pages_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.tif");
        write_pages(&path, 2, 2, 16, 3, &[0; 12], None).unwrap();
        assert!(matches!(load_stack(&path), Err(VolumeIoError::Format { .. })));
    }

    #[test]
    fn mixed_bit_depths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.tif");
        {
            let file = File::create(&path).unwrap();
            let mut enc = TiffEncoder::new(file).unwrap();
            enc.write_image::<colortype::Gray8>(2, 2, &[1, 2, 3, 4]).unwrap();
            enc.write_image::<colortype::Gray16>(2, 2, &[1, 2, 3, 4]).unwrap();
        }
        let err = load_stack(&path).unwrap_err();
        assert!(matches!(err, VolumeIoError::Format { .. }), "{err}");
    }

    #[test]
    fn unreadable_file() {
        let err = load_stack(Path::new("/nonexistent/x.tif")).unwrap_err();
        assert!(matches!(err, VolumeIoError::Io { .. }));
    }

    #[test]
    fn random_volume_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let meta = VolumeMeta::new([8, 8, 8], [0.19, 0.19, 0.5]).unwrap().with_frame_interval(40.0);
        let data = (0..512).map(|_| rng.random::<u16>()).collect();
        let vol = IntensityVolume::new(Volume::from_vec(meta, data).unwrap(), BitDepth::U16);
        let path = dir.path().join("r.tif");
        save_stack(&vol, &path).unwrap();
        assert_eq!(load_stack(&path).unwrap(), vol);
    }

    #[test]
    fn large_labels_stored_32_bit() {
        let dir = tempfile::tempdir().unwrap();
        let mut labels = Volume::filled(VolumeMeta::unit([3, 3, 2]), 0u32);
        labels.data[4] = 70_000;
        labels.data[5] = 3;
        let path = dir.path().join("l.tif");
        save_labels(&labels, &path).unwrap();
        assert_eq!(read_pages(&path).unwrap().bits, 32);
        assert_eq!(load_labels(&path).unwrap(), labels);

        labels.data[4] = 65_535;
        save_labels(&labels, &path).unwrap();
        assert_eq!(read_pages(&path).unwrap().bits, 16);
    }

    #[test]
    fn read_only_destination_fails() {
        let dir = tempfile::tempdir().unwrap();
        let vol = ramp_stack([2, 2, 2], BitDepth::U8);
        // a path below a regular file can never be created
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = save_stack(&vol, &blocker.join("out.tif")).unwrap_err();
        assert!(matches!(err, VolumeIoError::Io { .. }));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut mask = Volume::filled(VolumeMeta::unit([4, 3, 2]), false);
        mask.data[3] = true;
        mask.data[17] = true;
        let path = dir.path().join("m.tif");
        save_mask(&mask, &path).unwrap();
        let pages = read_pages(&path).unwrap();
        assert_eq!(pages.bits, 8);
        assert_eq!(pages.data.iter().filter(|&&v| v == 255).count(), 2);
        assert_eq!(load_mask(&path).unwrap(), mask);
    }
}
