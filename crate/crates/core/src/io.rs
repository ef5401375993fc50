//! On-disk formats: the `.lft` light-field container and PGM/PPM view grids.
//!
//! `.lft` layout (little-endian throughout):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `LFT1`               |
//! | 4      | 4    | version (1)                |
//! | 8      | 16   | w, h, n_h, n_v (u32 each)  |
//! | 24     | 4    | dtype (0 = f32)            |
//! | 28     | ...  | f32 samples, `[v][s][y][x]` |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lf::{rgb_to_gray, Image, LightField, Plane};

pub const LFT_MAGIC: &[u8; 4] = b"LFT1";
pub const LFT_VERSION: u32 = 1;
pub const LFT_HEADER_LEN: usize = 28;
const DTYPE_F32: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LftHeader {
    pub version: u32,
    pub w: u32,
    pub h: u32,
    pub n_h: u32,
    pub n_v: u32,
    pub dtype: u32,
}

impl LftHeader {
    fn payload_len(&self) -> usize {
        self.w as usize * self.h as usize * self.n_h as usize * self.n_v as usize * 4
    }
}

pub fn encode_lft(lf: &LightField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(LFT_HEADER_LEN + lf.data().len() * 4);
    buf.extend_from_slice(LFT_MAGIC);
    for v in [
        LFT_VERSION,
        lf.w() as u32,
        lf.h() as u32,
        lf.n_h() as u32,
        lf.n_v() as u32,
        DTYPE_F32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &x in lf.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn parse_lft_header(bytes: &[u8]) -> Result<LftHeader> {
    if bytes.len() < LFT_HEADER_LEN {
        return Err(Error::Format(format!(
            "file too short for header: {} bytes, need {LFT_HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != LFT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let header = LftHeader {
        version: read_u32(bytes, 4),
        w: read_u32(bytes, 8),
        h: read_u32(bytes, 12),
        n_h: read_u32(bytes, 16),
        n_v: read_u32(bytes, 20),
        dtype: read_u32(bytes, 24),
    };
    if header.version != LFT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    Ok(header)
}

pub fn decode_lft(bytes: &[u8]) -> Result<LightField> {
    let header = parse_lft_header(bytes)?;
    let expected = header.payload_len();
    let actual = bytes.len() - LFT_HEADER_LEN;
    if expected != actual {
        return Err(Error::Format(format!(
            "payload size mismatch: header declares {expected} bytes, file has {actual}"
        )));
    }
    let data = bytes[LFT_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LightField::new(
        header.w as usize,
        header.h as usize,
        header.n_h as usize,
        header.n_v as usize,
        data,
    )
    .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_lft(lf: &LightField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_lft(lf)).map_err(|e| Error::io(path, e))
}

pub fn load_lft(path: impl AsRef<Path>) -> Result<LightField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_lft(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Netpbm {
    w: usize,
    h: usize,
    maxval: u32,
    channels: usize,
    samples: Vec<u32>,
}

fn parse_netpbm(bytes: &[u8]) -> Result<Netpbm> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Format("not a binary PGM (P5) or PPM (P6)".into())),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated netpbm header".into())),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed netpbm header".into()))?;
    }
    // exactly one whitespace byte separates header from raster
    pos += 1;
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!(
            "invalid netpbm header {w}x{h} maxval {maxval}"
        )));
    }
    let (w, h) = (w as usize, h as usize);
    let bps = if maxval < 256 { 1 } else { 2 };
    let need = w * h * channels * bps;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(Error::Format(format!(
            "netpbm raster truncated: need {need} bytes, have {}",
            raster.len()
        )));
    }
    let samples = if bps == 1 {
        raster[..need].iter().map(|&b| b as u32).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    };
    Ok(Netpbm {
        w,
        h,
        maxval,
        channels,
        samples,
    })
}

/// Reads a P5 (or P6, converted to luma) file, normalizing by maxval.
pub fn read_gray(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pnm =
        parse_netpbm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let scale = 1.0 / pnm.maxval as f32;
    if pnm.channels == 1 {
        let data = pnm.samples.iter().map(|&p| p as f32 * scale).collect();
        return Plane::from_vec(pnm.w, pnm.h, data);
    }
    let plane = |c: usize| -> Image {
        let data = pnm
            .samples
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&p| p as f32 * scale)
            .collect();
        Plane {
            w: pnm.w,
            h: pnm.h,
            data,
        }
    };
    rgb_to_gray(&plane(0), &plane(1), &plane(2))
}

/// Maps an intensity to an 8-bit level: clamp to [0,1], then round half up.
pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn write_pgm8(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = format!("P5\n{} {}\n255\n", img.w, img.h).into_bytes();
    buf.extend(img.data.iter().map(|&v| quantize_u8(v)));
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// `view_VV_SS.pgm`, 1-based two-digit angular indices.
pub fn view_file_name(s: usize, v: usize) -> String {
    format!("view_{v:02}_{s:02}.pgm")
}

fn view_path(dir: &Path, s: usize, v: usize) -> Result<PathBuf> {
    let pgm = dir.join(view_file_name(s, v));
    if pgm.exists() {
        return Ok(pgm);
    }
    let ppm = pgm.with_extension("ppm");
    if ppm.exists() {
        return Ok(ppm);
    }
    Err(Error::io(
        pgm,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing view (v={v}, s={s})"),
        ),
    ))
}

pub fn load_pgm_grid(dir: impl AsRef<Path>, n_h: usize, n_v: usize) -> Result<LightField> {
    let dir = dir.as_ref();
    let mut views = Vec::with_capacity(n_h * n_v);
    for v in 1..=n_v {
        for s in 1..=n_h {
            let img = read_gray(view_path(dir, s, v)?)?;
            if let Some(first) = views.first() {
                let first: &Image = first;
                if !first.same_dims(&img) {
                    return Err(Error::Dimension(format!(
                        "view (v={v}, s={s}) is {}x{}, expected {}x{}",
                        img.w, img.h, first.w, first.h
                    )));
                }
            }
            views.push(img);
        }
    }
    LightField::from_views(n_h, n_v, &views)
}

pub fn save_pgm_grid(lf: &LightField, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for v in 1..=lf.n_v() {
        for s in 1..=lf.n_h() {
            let sai = lf.get_sai(s, v)?;
            write_pgm8(&sai.pixels, dir.join(view_file_name(s, v)))?;
        }
    }
    Ok(())
}
