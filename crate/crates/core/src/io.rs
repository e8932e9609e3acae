//! File formats for depth maps, sparse points, segment maps and grayscale
//! images.
//!
//! * `pgm16`: binary PGM (P5), maxval 65535, big-endian samples,
//!   `depth = sample / 256`, sample 0 = no data.
//! * `pfm32`: grayscale PFM (`Pf`), little-endian (negative scale),
//!   rows stored bottom-to-top.
//! * `csv-points`: header `row,col,depth_m`, one measurement per line,
//!   sorted by `(row, col)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::depth::{DepthMap, GrayImage, SegmentMap};
use crate::error::{Error, Result};
use crate::synth::SyntheticPair;

pub const PGM_DEPTH_SCALE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Pgm16,
    Pfm32,
    CsvPoints,
}

impl DepthFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("pgm") => Ok(Self::Pgm16),
            Some("pfm") => Ok(Self::Pfm32),
            Some("csv") => Ok(Self::CsvPoints),
            _ => Err(Error::InvalidConfig(format!(
                "cannot infer depth format from `{}` (expected .pgm, .pfm or .csv)",
                path.display()
            ))),
        }
    }
}

impl FromStr for DepthFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm16" | "pgm" => Ok(Self::Pgm16),
            "pfm32" | "pfm" => Ok(Self::Pfm32),
            "csv-points" | "csv" => Ok(Self::CsvPoints),
            _ => Err(Error::InvalidConfig(format!("unknown depth format `{s}`"))),
        }
    }
}

impl fmt::Display for DepthFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pgm16 => "pgm16",
            Self::Pfm32 => "pfm32",
            Self::CsvPoints => "csv-points",
        })
    }
}

/// Cursor over a PNM/PFM header.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn magic(&mut self, expected: &[&str]) -> Result<String> {
        if self.bytes.len() < 2 {
            return Err(Error::format(0, "file too short for a magic number"));
        }
        let m = String::from_utf8_lossy(&self.bytes[..2]).into_owned();
        if !expected.contains(&m.as_str()) {
            return Err(Error::format(0, format!("expected magic {expected:?}, found {m:?}")));
        }
        self.pos = 2;
        Ok(m)
    }

    /// Skips whitespace and `#` comments (PNM only).
    fn skip_space(&mut self, comments: bool) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if comments && b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str, comments: bool) -> Result<&'a str> {
        self.skip_space(comments);
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start, format!("{what} is not ASCII")))
    }

    fn number<T: FromStr>(&mut self, what: &str, comments: bool) -> Result<T> {
        let start = {
            self.skip_space(comments);
            self.pos
        };
        let tok = self.token(what, comments)?;
        tok.parse()
            .map_err(|_| Error::format(start, format!("invalid {what} `{tok}`")))
    }

    /// Consumes the single whitespace byte that ends a header.
    fn end(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(self.pos)
            }
            _ => Err(Error::format(self.pos, "header not terminated by whitespace")),
        }
    }
}

fn payload<'a>(bytes: &'a [u8], start: usize, w: usize, h: usize, sample: usize) -> Result<&'a [u8]> {
    if w == 0 || h == 0 {
        return Err(Error::format(start, format!("zero image dimension {w}x{h}")));
    }
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(sample))
        .ok_or_else(|| Error::format(start, format!("dimensions {w}x{h} overflow")))?;
    let have = bytes.len() - start;
    if have < need {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {need} bytes, found {have}"),
        ));
    }
    if have > need {
        return Err(Error::format(start + need, format!("{} trailing bytes after payload", have - need)));
    }
    Ok(&bytes[start..])
}

/// Raw P5 samples: `(width, height, maxval, samples, payload offset)`.
fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, Vec<u32>, usize)> {
    let mut hdr = Header::new(bytes);
    hdr.magic(&["P5"])?;
    let w: usize = hdr.number("width", true)?;
    let h: usize = hdr.number("height", true)?;
    let maxval_at = hdr.pos;
    let maxval: u32 = hdr.number("maxval", true)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let start = hdr.end()?;
    let wide = maxval > 255;
    let data = payload(bytes, start, w, h, if wide { 2 } else { 1 })?;
    let samples: Vec<u32> = if wide {
        data.chunks_exact(2)
            .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    } else {
        data.iter().map(|&b| u32::from(b)).collect()
    };
    let step = if wide { 2 } else { 1 };
    if let Some(i) = samples.iter().position(|&s| s > maxval) {
        return Err(Error::format(
            start + i * step,
            format!("sample {} exceeds maxval {maxval}", samples[i]),
        ));
    }
    Ok((w, h, maxval, samples, start))
}

fn encode_pgm16(w: usize, h: usize, samples: impl Iterator<Item = u16>) -> Vec<u8> {
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(w * h * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

fn decode_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let mut hdr = Header::new(bytes);
    hdr.magic(&["Pf"])?;
    let w: usize = hdr.number("width", false)?;
    let h: usize = hdr.number("height", false)?;
    let scale_at = hdr.pos;
    let scale: f64 = hdr.number("scale", false)?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(scale_at, format!("invalid scale {scale}")));
    }
    let little = scale < 0.0;
    let start = hdr.end()?;
    let data = payload(bytes, start, w, h, 4)?;
    let mut out = vec![0.0; w * h];
    for (k, c) in data.chunks_exact(4).enumerate() {
        let raw = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::format(start + 4 * k, format!("invalid depth sample {v}")));
        }
        // stored bottom row first
        let (file_row, col) = (k / w, k % w);
        out[(h - 1 - file_row) * w + col] = f64::from(v);
    }
    DepthMap::new(w, h, out)
}

fn encode_pfm(map: &DepthMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            out.extend_from_slice(&(map.get(row, col) as f32).to_le_bytes());
        }
    }
    out
}

fn decode_csv(bytes: &[u8], dims: (usize, usize)) -> Result<DepthMap> {
    let (w, h) = dims;
    if w == 0 || h == 0 || w.checked_mul(h).is_none() {
        return Err(Error::InvalidGrid(format!("invalid grid {w}x{h} for points")));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(0, format!("bad csv header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["row", "col", "depth_m"] {
        return Err(Error::format(0, "csv header must be `row,col,depth_m`"));
    }
    let mut data = vec![0.0; w * h];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte() as usize);
            Error::format(offset, format!("bad csv record: {e}"))
        })?;
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        if record.len() != 3 {
            return Err(Error::format(offset, "expected 3 fields"));
        }
        let row: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(offset, format!("invalid row `{}`", &record[0])))?;
        let col: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::format(offset, format!("invalid col `{}`", &record[1])))?;
        let depth: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::format(offset, format!("invalid depth `{}`", &record[2])))?;
        if row >= h || col >= w {
            return Err(Error::format(offset, format!("point ({row}, {col}) outside {w}x{h}")));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::format(offset, format!("depth must be finite and > 0, got {depth}")));
        }
        let i = row * w + col;
        if data[i] != 0.0 {
            return Err(Error::format(offset, format!("duplicate point ({row}, {col})")));
        }
        data[i] = depth;
    }
    DepthMap::new(w, h, data)
}

fn encode_csv(map: &DepthMap) -> Vec<u8> {
    let mut out = String::from("row,col,depth_m\n");
    for row in 0..map.height() {
        for col in 0..map.width() {
            let v = map.get(row, col);
            if v > 0.0 {
                out.push_str(&format!("{row},{col},{v}\n"));
            }
        }
    }
    out.into_bytes()
}

/// Decodes a depth map. `dims` is required for `csv-points`, which does not
/// carry the grid size, and ignored otherwise.
pub fn decode_depth(bytes: &[u8], format: DepthFormat, dims: Option<(usize, usize)>) -> Result<DepthMap> {
    match format {
        DepthFormat::Pgm16 => {
            let (w, h, _, samples, _) = decode_pgm(bytes)?;
            DepthMap::new(w, h, samples.iter().map(|&s| f64::from(s) / PGM_DEPTH_SCALE).collect())
        }
        DepthFormat::Pfm32 => decode_pfm(bytes),
        DepthFormat::CsvPoints => {
            let dims = dims.ok_or_else(|| {
                Error::InvalidConfig("csv-points needs the grid size of a companion map".into())
            })?;
            decode_csv(bytes, dims)
        }
    }
}

pub fn encode_depth(map: &DepthMap, format: DepthFormat) -> Result<Vec<u8>> {
    match format {
        DepthFormat::Pgm16 => {
            let max = 65535.0 / PGM_DEPTH_SCALE;
            if let Some(v) = map.data().iter().find(|v| **v > max) {
                return Err(Error::InvalidGrid(format!("depth {v} m exceeds pgm16 range ({max} m)")));
            }
            let (w, h) = map.dims();
            Ok(encode_pgm16(
                w,
                h,
                map.data().iter().map(|v| (v * PGM_DEPTH_SCALE).round() as u16),
            ))
        }
        DepthFormat::Pfm32 => Ok(encode_pfm(map)),
        DepthFormat::CsvPoints => Ok(encode_csv(map)),
    }
}

pub fn read_depth(path: &Path, format: DepthFormat, dims: Option<(usize, usize)>) -> Result<DepthMap> {
    decode_depth(&fs::read(path)?, format, dims)
}

pub fn write_depth(map: &DepthMap, path: &Path, format: DepthFormat) -> Result<()> {
    fs::write(path, encode_depth(map, format)?)?;
    Ok(())
}

/// Decodes a 16-bit label image. Non-dense labels are renumbered by
/// ascending value; the flag reports whether that happened.
pub fn decode_segments(bytes: &[u8]) -> Result<(SegmentMap, bool)> {
    let (w, h, _, samples, _) = decode_pgm(bytes)?;
    SegmentMap::densify(w, h, samples)
}

pub fn encode_segments(seg: &SegmentMap) -> Result<Vec<u8>> {
    if seg.segment_count() > u32::from(u16::MAX) {
        return Err(Error::InvalidGrid(format!(
            "{} segments do not fit in 16 bits",
            seg.segment_count()
        )));
    }
    let (w, h) = seg.dims();
    Ok(encode_pgm16(w, h, seg.labels().iter().map(|&l| l as u16)))
}

pub fn read_segments(path: &Path) -> Result<SegmentMap> {
    let (seg, relabeled) = decode_segments(&fs::read(path)?)?;
    if relabeled {
        log::warn!(
            "{}: segment labels were not dense; renumbered to 1..={}",
            path.display(),
            seg.segment_count()
        );
    }
    Ok(seg)
}

pub fn write_segments(seg: &SegmentMap, path: &Path) -> Result<()> {
    fs::write(path, encode_segments(seg)?)?;
    Ok(())
}

/// Any P5 image, scaled by its maxval to `[0, 1]`.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let (w, h, maxval, samples, _) = decode_pgm(bytes)?;
    let m = f64::from(maxval);
    GrayImage::new(w, h, samples.iter().map(|&s| f64::from(s) / m).collect())
}

pub fn encode_gray(img: &GrayImage) -> Vec<u8> {
    let (w, h) = img.dims();
    encode_pgm16(w, h, img.values().iter().map(|v| (v * 65535.0).round() as u16))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    decode_gray(&fs::read(path)?)
}

pub const PAIR_DENSE_FILE: &str = "synthetic_gt.pfm";
pub const PAIR_SPARSE_FILE: &str = "synthetic_sparse.pfm";
pub const PAIR_MANIFEST_FILE: &str = "manifest.txt";

/// Writes the dense target, the sparse input and the manifest into `dir`.
pub fn write_pair(pair: &SyntheticPair, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_depth(&pair.dense, &dir.join(PAIR_DENSE_FILE), DepthFormat::Pfm32)?;
    write_depth(pair.sparse.as_depth(), &dir.join(PAIR_SPARSE_FILE), DepthFormat::Pfm32)?;
    fs::write(dir.join(PAIR_MANIFEST_FILE), pair.manifest())?;
    Ok(())
}
