//! Binary mask I/O: PGM (P5 and P2) and 8-bit grayscale PNG.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::SegMask;

/// Encodes a mask as binary PGM: `P5`, maxval 255, foreground 255.
pub fn encode_mask(mask: &SegMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b != 0 { 255u8 } else { 0 }));
    out
}

pub fn write_mask(path: &Path, mask: &SegMask) -> Result<()> {
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

/// Reads a ground-truth or predicted mask. PGM (`P5`/`P2`) and PNG are
/// accepted; a pixel is foreground when it is above half of maxval
/// (`> 127` for 8-bit data).
pub fn read_mask(path: &Path) -> Result<SegMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(&bytes).map_err(|msg| Error::format(path, msg))
    } else if bytes.starts_with(b"\x89PNG") {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::format(path, e.to_string()))?
            .into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| u8::from(v > 127)).collect();
        SegMask::new(w as usize, h as usize, bits).map_err(|e| Error::format(path, e.to_string()))
    } else {
        Err(Error::format(path, "unrecognized mask format (expected PGM or PNG)"))
    }
}

struct Tokens<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("expected a number at byte {start}"))
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<SegMask, String> {
    let binary = bytes.starts_with(b"P5");
    let mut tok = Tokens { bytes, pos: 2 };
    let width = tok.number()?;
    let height = tok.number()?;
    let maxval = tok.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("invalid maxval {maxval}"));
    }
    let count = width * height;
    let samples: Vec<usize> = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = tok.pos + 1;
        let per = if maxval > 255 { 2 } else { 1 };
        let raster = bytes
            .get(start..start + count * per)
            .ok_or_else(|| "raster shorter than width*height".to_string())?;
        if per == 1 {
            raster.iter().map(|&v| v as usize).collect()
        } else {
            raster.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as usize).collect()
        }
    } else {
        (0..count).map(|_| tok.number()).collect::<std::result::Result<_, _>>()?
    };
    let bits = samples.into_iter().map(|v| u8::from(2 * v > maxval)).collect();
    SegMask::new(width, height, bits).map_err(|e| e.to_string())
}
