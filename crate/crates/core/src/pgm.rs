//! Grayscale PGM (P2 ASCII / P5 binary, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    Ascii,
    Binary,
}

/// Quantizes a pixel the way it is written to disk: round, then clamp to `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write_pgm_as(path, image, PgmEncoding::Binary)
}

pub fn write_pgm_as(path: impl AsRef<Path>, image: &Image, encoding: PgmEncoding) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image, encoding)).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(image: &Image, encoding: PgmEncoding) -> Vec<u8> {
    let n = image.side();
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{n} {n}\n255\n").into_bytes();
    match encoding {
        PgmEncoding::Binary => out.extend(image.pixels().iter().map(|&v| quantize(v))),
        PgmEncoding::Ascii => {
            for row in image.pixels().chunks(n) {
                let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
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

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos >= self.bytes.len() {
                return Err(Error::format(start, format!("unexpected end of file reading {what}")));
            }
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(0, "missing PGM magic number"));
    }
    let encoding = match bytes[1] {
        b'2' => PgmEncoding::Ascii,
        b'5' => PgmEncoding::Binary,
        _ => return Err(Error::format(1, "only P2 and P5 PGM files are supported")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    cur.skip_whitespace_and_comments();
    let width_at = cur.pos;
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(width_at, "image dimensions must be positive"));
    }
    if width != height {
        return Err(Error::format(
            width_at,
            format!("image must be square, got {width}x{height}"),
        ));
    }
    if maxval != 255 {
        return Err(Error::format(maxval_at, format!("maxval must be 255, got {maxval}")));
    }
    let count = width * height;
    let pixels = match encoding {
        PgmEncoding::Binary => {
            // exactly one whitespace byte separates the header from the raster
            let start = cur.pos + 1;
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(Error::format(cur.pos, "expected whitespace after header"));
            }
            if bytes.len() < start + count {
                return Err(Error::format(
                    bytes.len(),
                    format!("truncated raster: expected {count} bytes, found {}", bytes.len() - start),
                ));
            }
            bytes[start..start + count].iter().map(|&b| b as f64).collect()
        }
        PgmEncoding::Ascii => {
            let mut px = Vec::with_capacity(count);
            for _ in 0..count {
                cur.skip_whitespace_and_comments();
                let at = cur.pos;
                let v = cur.read_uint("pixel value")?;
                if v > 255 {
                    return Err(Error::format(at, format!("pixel value {v} exceeds maxval")));
                }
                px.push(v as f64);
            }
            px
        }
    };
    Image::new(width, pixels)
}
