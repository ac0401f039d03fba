//! In-memory image buffers and binary PGM/PPM file I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use tensor_core::{Scalar, Tensor};

use crate::error::{GformerError, Result};

/// Planar float image in [0,1]: data laid out channel-major (c,y,x),
/// matching the tensor layout. 1 channel (gray) or 3 channels (color).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize, channels: usize) -> ImageBuf {
        ImageBuf {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_planes(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<ImageBuf> {
        if data.len() != width * height * channels {
            return Err(GformerError::Image(format!(
                "buffer length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(ImageBuf {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    /// Average the channels down to a single gray plane.
    pub fn to_gray(&self) -> ImageBuf {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.width * self.height;
        let mut out = vec![0.0f32; n];
        for c in 0..self.channels {
            for (o, &v) in out.iter_mut().zip(self.plane(c)) {
                *o += v;
            }
        }
        let inv = 1.0 / self.channels as f32;
        for o in &mut out {
            *o *= inv;
        }
        ImageBuf {
            width: self.width,
            height: self.height,
            channels: 1,
            data: out,
        }
    }

    /// Replicate a gray image to three identical channels.
    pub fn to_rgb(&self) -> ImageBuf {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        ImageBuf {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Nearest-neighbor upsampling by an integer factor.
    pub fn upsample_nearest(&self, factor: usize) -> ImageBuf {
        if factor == 1 {
            return self.clone();
        }
        let (w2, h2) = (self.width * factor, self.height * factor);
        let mut out = ImageBuf::new(w2, h2, self.channels);
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut out.data[c * w2 * h2..(c + 1) * w2 * h2];
            for y in 0..h2 {
                let sy = y / factor;
                for x in 0..w2 {
                    dst[y * w2 + x] = src[sy * self.width + x / factor];
                }
            }
        }
        out
    }

    /// Block-mean downsampling by an integer factor; extents must divide.
    pub fn downsample_area(&self, factor: usize) -> Result<ImageBuf> {
        if factor == 1 {
            return Ok(self.clone());
        }
        if self.width % factor != 0 || self.height % factor != 0 {
            return Err(GformerError::Image(format!(
                "extent {}x{} not divisible by {}",
                self.width, self.height, factor
            )));
        }
        let (wo, ho) = (self.width / factor, self.height / factor);
        let inv = 1.0f64 / (factor * factor) as f64;
        let mut out = ImageBuf::new(wo, ho, self.channels);
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut out.data[c * wo * ho..(c + 1) * wo * ho];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0f64;
                    for dy in 0..factor {
                        let row = (oy * factor + dy) * self.width + ox * factor;
                        for dx in 0..factor {
                            acc += src[row + dx] as f64;
                        }
                    }
                    dst[oy * wo + ox] = (acc * inv) as f32;
                }
            }
        }
        Ok(out)
    }

    pub fn clamp01(&self) -> ImageBuf {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Batch-1 tensor of shape (1, C, H, W).
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data: Vec<T> = self.data.iter().map(|&v| T::from_f64_c(v as f64)).collect();
        Tensor::from_vec(data, &[1, self.channels, self.height, self.width]).expect("image tensor")
    }

    /// From a batch-1 tensor, values clamped to [0,1].
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<ImageBuf> {
        let shape = t.shape();
        if shape.len() != 4 || shape[0] != 1 {
            return Err(GformerError::Image(format!(
                "expected shape (1,C,H,W), got {shape:?}"
            )));
        }
        let data: Vec<f32> = t
            .data()
            .iter()
            .map(|v| (v.to_f64_c().clamp(0.0, 1.0)) as f32)
            .collect();
        ImageBuf::from_planes(shape[3], shape[2], shape[1], data)
    }
}

/// Quantize one float sample to an 8-bit value.
pub fn quantize(v: f32) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Write a binary PGM (1 channel) or PPM (3 channels) with maxval 255.
pub fn write_image(path: &Path, img: &ImageBuf) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = img.width * img.height;
    match img.channels {
        1 => {
            write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
            let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
            w.write_all(&bytes)?;
        }
        3 => {
            write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
            let mut bytes = Vec::with_capacity(n * 3);
            for i in 0..n {
                for c in 0..3 {
                    bytes.push(quantize(img.data[c * n + i]));
                }
            }
            w.write_all(&bytes)?;
        }
        other => {
            return Err(GformerError::Image(format!(
                "only 1-channel PGM or 3-channel PPM supported, got {other} channels"
            )))
        }
    }
    Ok(())
}

/// Read a binary PGM/PPM written by [`write_image`] (or any maxval-255 file).
pub fn read_image(path: &Path) -> Result<ImageBuf> {
    let mut r = BufReader::new(File::open(path)?);
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    parse_pnm(&raw).map_err(|msg| GformerError::Image(format!("{}: {msg}", path.display())))
}

fn parse_pnm(raw: &[u8]) -> std::result::Result<ImageBuf, String> {
    let mut pos = 0usize;
    let mut token = |raw: &[u8]| -> std::result::Result<String, String> {
        // skip whitespace and '#' comments
        loop {
            while pos < raw.len() && raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < raw.len() && raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };

    let magic = token(raw)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic '{other}' (binary P5/P6 only)")),
    };
    let width: usize = token(raw)?.parse().map_err(|_| "bad width".to_string())?;
    let height: usize = token(raw)?.parse().map_err(|_| "bad height".to_string())?;
    let maxval: usize = token(raw)?.parse().map_err(|_| "bad maxval".to_string())?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    if width == 0 || height == 0 {
        return Err("zero image extent".into());
    }
    // exactly one whitespace byte separates header and payload
    pos += 1;
    let n = width * height;
    let need = n * channels;
    if raw.len() < pos + need {
        return Err(format!(
            "truncated payload: expected {need} bytes, found {}",
            raw.len().saturating_sub(pos)
        ));
    }
    let payload = &raw[pos..pos + need];
    let mut data = vec![0.0f32; need];
    if channels == 1 {
        for (d, &b) in data.iter_mut().zip(payload) {
            *d = b as f32 / 255.0;
        }
    } else {
        for i in 0..n {
            for c in 0..3 {
                data[c * n + i] = payload[i * 3 + c] as f32 / 255.0;
            }
        }
    }
    Ok(ImageBuf {
        width,
        height,
        channels,
        data,
    })
}
