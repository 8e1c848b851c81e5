//! Image and volume file I/O.
//!
//! Images are 8- or 16-bit PNG (grayscale or RGB, alpha dropped), loaded
//! into `[0,1]`. Volumes are raw unsigned-byte occupancy grids with a JSON
//! sidecar `{nx, ny, nz}`; bytes above 127 count as occupied.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use futon::error::{Error, Result};
use futon::grid::{GridSignal, ValueRange};

pub fn load_png(path: &Path) -> Result<GridSignal> {
    let file = File::open(path)?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::config(format!("png decode failed: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::config(format!("png frame decode failed: {e}")))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let (in_ch, keep_ch) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => {
            return Err(Error::config(format!(
                "unsupported png color type {other:?}"
            )))
        }
    };
    let mut out = GridSignal::zeros(vec![height, width], keep_ch, ValueRange::UNIT)?;
    match info.bit_depth {
        png::BitDepth::Eight => {
            let data = out.data_mut();
            for pix in 0..width * height {
                for c in 0..keep_ch {
                    data[pix * keep_ch + c] = buf[pix * in_ch + c] as f64 / 255.0;
                }
            }
        }
        png::BitDepth::Sixteen => {
            let data = out.data_mut();
            for pix in 0..width * height {
                for c in 0..keep_ch {
                    let hi = buf[(pix * in_ch + c) * 2] as u16;
                    let lo = buf[(pix * in_ch + c) * 2 + 1] as u16;
                    data[pix * keep_ch + c] = ((hi << 8) | lo) as f64 / 65535.0;
                }
            }
        }
        other => {
            return Err(Error::config(format!(
                "unsupported png bit depth {other:?}"
            )))
        }
    }
    Ok(out)
}

/// Write a `[0,1]` signal as an 8-bit PNG (grayscale or RGB).
pub fn save_png(signal: &GridSignal, path: &Path) -> Result<()> {
    if signal.dims().len() != 2 {
        return Err(Error::shape("png output requires a 2-D signal"));
    }
    let (height, width) = (signal.dims()[0], signal.dims()[1]);
    let color = match signal.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        other => {
            return Err(Error::shape(format!(
                "png output supports 1 or 3 channels, got {other}"
            )))
        }
    };
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::config(format!("png encode failed: {e}")))?;
    let bytes: Vec<u8> = signal
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::config(format!("png encode failed: {e}")))?;
    Ok(())
}

/// 16-bit variant of [`save_png`], for inputs where 8-bit quantization
/// would dominate the measurement.
pub fn save_png16(signal: &GridSignal, path: &Path) -> Result<()> {
    if signal.dims().len() != 2 {
        return Err(Error::shape("png output requires a 2-D signal"));
    }
    let (height, width) = (signal.dims()[0], signal.dims()[1]);
    let color = match signal.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        other => {
            return Err(Error::shape(format!(
                "png output supports 1 or 3 channels, got {other}"
            )))
        }
    };
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::config(format!("png encode failed: {e}")))?;
    let mut bytes = Vec::with_capacity(signal.data().len() * 2);
    for &v in signal.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::config(format!("png encode failed: {e}")))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct VolumeSidecar {
    nx: usize,
    ny: usize,
    nz: usize,
}

fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

/// Load a raw occupancy volume (one byte per voxel, x slowest) with its JSON
/// sidecar; occupied voxels map to 1.0.
pub fn load_volume(raw_path: &Path) -> Result<GridSignal> {
    let sidecar: VolumeSidecar =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(raw_path))?))?;
    let bytes = std::fs::read(raw_path)?;
    let expect = sidecar.nx * sidecar.ny * sidecar.nz;
    if bytes.len() != expect {
        return Err(Error::shape(format!(
            "volume file holds {} voxels, sidecar says {}x{}x{}",
            bytes.len(),
            sidecar.nx,
            sidecar.ny,
            sidecar.nz
        )));
    }
    GridSignal::from_data(
        vec![sidecar.nx, sidecar.ny, sidecar.nz],
        1,
        ValueRange::UNIT,
        bytes.iter().map(|&b| if b > 127 { 1.0 } else { 0.0 }).collect(),
    )
}

/// Save a volume as raw 0/255 bytes plus the JSON sidecar. Values above the
/// midpoint of the signal's range count as occupied.
pub fn save_volume(signal: &GridSignal, raw_path: &Path) -> Result<()> {
    if signal.dims().len() != 3 || signal.channels() != 1 {
        return Err(Error::shape("volume output requires a 3-D single-channel signal"));
    }
    let mid = (signal.range().lo + signal.range().hi) / 2.0;
    let bytes: Vec<u8> = signal
        .data()
        .iter()
        .map(|&v| if v > mid { 255 } else { 0 })
        .collect();
    std::fs::write(raw_path, bytes)?;
    let sidecar = VolumeSidecar {
        nx: signal.dims()[0],
        ny: signal.dims()[1],
        nz: signal.dims()[2],
    };
    let mut f = File::create(sidecar_path(raw_path))?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_rgb_and_gray() {
        let dir = std::env::temp_dir().join("futon-imageio-test");
        std::fs::create_dir_all(&dir).unwrap();
        let img = GridSignal::from_data(
            vec![3, 2],
            3,
            ValueRange::UNIT,
            (0..18).map(|i| i as f64 / 17.0).collect(),
        )
        .unwrap();
        let path = dir.join("rgb.png");
        save_png(&img, &path).unwrap();
        let loaded = load_png(&path).unwrap();
        assert_eq!(loaded.dims(), img.dims());
        assert_eq!(loaded.channels(), 3);
        for (a, b) in img.data().iter().zip(loaded.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }

        let gray = GridSignal::from_data(
            vec![2, 2],
            1,
            ValueRange::UNIT,
            vec![0.0, 0.25, 0.5, 1.0],
        )
        .unwrap();
        let path = dir.join("gray.png");
        save_png(&gray, &path).unwrap();
        let loaded = load_png(&path).unwrap();
        assert_eq!(loaded.channels(), 1);
    }

    #[test]
    fn volume_round_trip() {
        let dir = std::env::temp_dir().join("futon-volio-test");
        std::fs::create_dir_all(&dir).unwrap();
        let mut vol = GridSignal::zeros(vec![3, 4, 5], 1, ValueRange::UNIT).unwrap();
        vol.set_value(&[1, 2, 3], 0, 1.0);
        vol.set_value(&[0, 0, 0], 0, 1.0);
        let path = dir.join("occ.raw");
        save_volume(&vol, &path).unwrap();
        let loaded = load_volume(&path).unwrap();
        assert_eq!(loaded, vol);
    }
}
