//! 8-bit RGB rasters and their PNG I/O. This is all the image decoding
//! the toolkit does; richer formats are out of scope.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Packed row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> RgbRaster {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&color);
        }
        RgbRaster { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<RgbRaster> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::Validation(format!(
                "rgb buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(RgbRaster { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let index = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[index], self.data[index + 1], self.data[index + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let index = (y as usize * self.width as usize + x as usize) * 3;
        self.data[index..index + 3].copy_from_slice(&color);
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&self.data).map_err(png_err)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<RgbRaster> {
        let file = File::open(path)?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder.read_info().map_err(png_err)?;
        let mut buf = vec![
            0u8;
            reader
                .output_buffer_size()
                .ok_or_else(|| Error::Png("image too large".into()))?
        ];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        buf.truncate(info.buffer_size());
        let data = match (info.color_type, info.bit_depth) {
            (png::ColorType::Rgb, png::BitDepth::Eight) => buf,
            (png::ColorType::Rgba, png::BitDepth::Eight) => {
                buf.chunks_exact(4).flat_map(|px| [px[0], px[1], px[2]]).collect()
            }
            (png::ColorType::Grayscale, png::BitDepth::Eight) => {
                buf.iter().flat_map(|v| [*v, *v, *v]).collect()
            }
            (color, depth) => {
                return Err(Error::Png(format!(
                    "unsupported image format {color:?}/{depth:?}, expected 8-bit RGB(A) or grayscale"
                )))
            }
        };
        RgbRaster::from_raw(info.width, info.height, data)
    }
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut raster = RgbRaster::filled(6, 4, [10, 20, 30]);
        raster.set(2, 1, [250, 0, 100]);
        raster.write_png(&path).unwrap();
        let back = RgbRaster::read_png(&path).unwrap();
        assert_eq!(back, raster);
        assert_eq!(back.get(2, 1), [250, 0, 100]);
    }
}
