//! Grayscale images and PGM (P2/P5) files.

use std::path::Path;

use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};

/// Intensities in `[0, 1]`, row-major (`index = row * width + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        ensure_dim("image pixels", height * width, pixels.len())?;
        Ok(ImageBuffer { height, width, pixels })
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.pixels)
    }

    pub fn from_vector(height: usize, width: usize, v: &DVector<f64>) -> Result<Self> {
        Self::new(height, width, v.as_slice().to_vec())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(cur.err("not a PGM file (expected P2 or P5 magic)")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse {
            offset: maxval_at,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let scale = maxval as f64;
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(cur.err("expected a single whitespace byte before the raster"));
        }
        cur.pos += 1;
        let depth = if maxval > 255 { 2 } else { 1 };
        let need = count * depth;
        if bytes.len() - cur.pos < need {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("truncated raster: need {need} bytes, found {}", bytes.len() - cur.pos),
            });
        }
        for i in 0..count {
            let at = cur.pos + i * depth;
            let v = if depth == 2 {
                u16::from_be_bytes([bytes[at], bytes[at + 1]]) as u32
            } else {
                bytes[at] as u32
            };
            if v > maxval {
                return Err(Error::Parse {
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            pixels.push(v as f64 / scale);
        }
    } else {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number("pixel value")?;
            if v > maxval {
                return Err(Error::Parse {
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            pixels.push(v as f64 / scale);
        }
    }
    ImageBuffer::new(height, width, pixels)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|e| e.with_context(format!("reading {}", path.display())))
}

/// Encodes as binary P5 with maxval 255; intensities are clamped to `[0, 1]`.
pub fn encode_pgm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn save_pgm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    crate::harness::write_atomic(path.as_ref(), &encode_pgm(img))
}
