use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::geometry::Raster;

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Reads an 8-bit PGM image; intensities stay in `0..=255`.
pub fn read_pgm(path: &Path) -> Result<Raster> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| parse_err(path, e))?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(f64::from).collect();
    Raster::new(w as usize, h as usize, data)
}

/// Writes a binary (P5) PGM, scaling the maximum intensity to 255.
pub fn write_pgm(path: &Path, raster: &Raster) -> Result<()> {
    let max = raster.data().iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = raster
        .data()
        .iter()
        .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    let file = std::fs::File::create(path)?;
    PnmEncoder::new(std::io::BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &bytes,
            raster.width() as u32,
            raster.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| parse_err(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pgm");
        let r = Raster::new(3, 2, vec![0.0, 255.0, 17.0, 3.0, 128.0, 64.0]).unwrap();
        write_pgm(&path, &r).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(&bytes[bytes.len() - 6..], &[0, 255, 17, 3, 128, 64]);
        assert_eq!(read_pgm(&path).unwrap(), r);
    }

    #[test]
    fn hand_written_p5_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.pgm");
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend([1, 2, 3, 4]);
        std::fs::write(&path, bytes).unwrap();
        let r = read_pgm(&path).unwrap();
        assert_eq!((r.width(), r.height()), (2, 2));
        assert_eq!(r.data(), &[1.0, 2.0, 3.0, 4.0]);
        std::fs::write(&path, b"P5\n2 2\n255\n\x01").unwrap();
        assert!(read_pgm(&path).is_err());
    }
}
