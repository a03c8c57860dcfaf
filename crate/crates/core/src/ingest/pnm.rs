//! Binary netpbm (P5 grayscale / P6 colour, maxval 255) reading and writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::frame::Frame;
use crate::error::{Error, Result};

pub fn read_pnm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes).map_err(|reason| Error::load(path, reason))
}

pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or("missing header")?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(format!(
                "unsupported netpbm magic {:?}",
                String::from_utf8_lossy(other)
            ))
        }
    };
    let mut field = |name: &str| -> std::result::Result<usize, String> {
        let tok = next_token(bytes, &mut pos).ok_or(format!("missing {name}"))?;
        std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(format!("bad {name}"))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(format!("only 8-bit images are supported (maxval {maxval})"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or(format!("raster truncated: need {need} bytes"))?;
    Frame::new(width, height, channels, raster.to_vec()).map_err(|e| e.to_string())
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.is_gray() { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn write_pnm(path: &Path, frame: &Frame) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_pnm(frame))
        .map_err(|e| Error::io(path, e))
}
