//! Text and image interchange: MOT rows, per-detection feature files and
//! binary PPM patches.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::types::{BoundingBox, Detection, Patch, ResultRow, PATCH_HEIGHT, PATCH_WIDTH};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: duplicate key (frame {frame}, detection {index})")]
    DuplicateKey { line: usize, frame: u32, index: usize },
    #[error("line {line}: dimension {found} differs from {expected} on earlier rows")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("no descriptor for frame {frame}, detection {index}: {reason}")]
    MissingDescriptor { frame: u32, index: usize, reason: String },
    #[error("image {path}: {reason}")]
    MalformedImage { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

/// `frame,id,left,top,width,height,conf,x,y,z`. `id` is −1 for raw
/// detections; unused trailing fields are −1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    pub frame: u32,
    pub id: i64,
    pub bbox: BoundingBox,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MotRow {
    pub fn detection(frame: u32, bbox: BoundingBox, conf: f64) -> Self {
        Self {
            frame,
            id: -1,
            bbox,
            conf,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }

    pub fn from_result(row: &ResultRow) -> Self {
        Self {
            frame: row.frame,
            id: row.id as i64,
            bbox: row.bbox,
            conf: 1.0,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }
}

fn field<T: std::str::FromStr>(line: usize, name: &str, text: &str) -> Result<T, FormatError> {
    text.trim()
        .parse()
        .map_err(|_| malformed(line, format!("{name} `{}` is not a valid number", text.trim())))
}

/// Parses MOT rows. Needs at least the six box fields; absent confidence
/// defaults to 1 and absent world coordinates to −1. Blank lines are
/// skipped.
pub fn parse_mot_rows(text: &str) -> Result<Vec<MotRow>, FormatError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() < 6 || parts.len() > 10 {
            return Err(malformed(line, format!("expected 6 to 10 fields, found {}", parts.len())));
        }
        let frame: u32 = field(line, "frame", parts[0])?;
        if frame < 1 {
            return Err(malformed(line, "frame must be at least 1"));
        }
        let id: f64 = field(line, "id", parts[1])?;
        if id.fract() != 0.0 || !id.is_finite() {
            return Err(malformed(line, "id must be an integer"));
        }
        let num = |k: usize, name: &str, default: f64| -> Result<f64, FormatError> {
            let v = match parts.get(k) {
                Some(t) => field(line, name, t)?,
                None => default,
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(line, format!("{name} is not finite")))
            }
        };
        let bbox = BoundingBox::new(
            num(2, "bb_left", 0.0)?,
            num(3, "bb_top", 0.0)?,
            num(4, "bb_width", 0.0)?,
            num(5, "bb_height", 0.0)?,
        )
        .map_err(|e| malformed(line, e.to_string()))?;
        rows.push(MotRow {
            frame,
            id: id as i64,
            bbox,
            conf: num(6, "conf", 1.0)?,
            x: num(7, "x", -1.0)?,
            y: num(8, "y", -1.0)?,
            z: num(9, "z", -1.0)?,
        });
    }
    Ok(rows)
}

/// One row per line, all ten fields, shortest round-trip float formatting.
pub fn write_mot_rows(rows: &[MotRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let b = &r.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, b.left, b.top, b.width, b.height, r.conf, r.x, r.y, r.z
        );
    }
    out
}

/// Detection rows grouped by frame, in file order within a frame.
pub fn parse_detections(text: &str) -> Result<BTreeMap<u32, Vec<MotRow>>, FormatError> {
    let mut by_frame: BTreeMap<u32, Vec<MotRow>> = BTreeMap::new();
    for row in parse_mot_rows(text)? {
        by_frame.entry(row.frame).or_default().push(row);
    }
    Ok(by_frame)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<BTreeMap<u32, Vec<MotRow>>, FormatError> {
    parse_detections(&fs::read_to_string(path)?)
}

/// Rows written with confidence 1 and trailing −1.
pub fn format_results(rows: &[ResultRow]) -> String {
    write_mot_rows(&rows.iter().map(MotRow::from_result).collect::<Vec<_>>())
}

pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, format_results(rows))?;
    Ok(())
}

/// Rows whose id is non-negative, as tracker output rows.
pub fn rows_to_results(rows: &[MotRow]) -> Vec<ResultRow> {
    rows.iter()
        .filter(|r| r.id >= 0)
        .map(|r| ResultRow {
            frame: r.frame,
            id: r.id as u64,
            bbox: r.bbox,
        })
        .collect()
}

/// Converts detection rows into detections with the given descriptors.
pub fn to_detections(
    rows: &BTreeMap<u32, Vec<MotRow>>,
    mut descriptor: impl FnMut(u32, usize, &MotRow) -> Result<crate::types::AppearanceDescriptor, FormatError>,
) -> Result<BTreeMap<u32, Vec<Detection>>, FormatError> {
    let mut out = BTreeMap::new();
    for (&frame, frame_rows) in rows {
        let mut dets = Vec::with_capacity(frame_rows.len());
        for (k, r) in frame_rows.iter().enumerate() {
            let desc = descriptor(frame, k, r)?;
            let det = Detection::new(frame, r.bbox, r.conf, desc).map_err(|e| FormatError::MissingDescriptor {
                frame,
                index: k,
                reason: e.to_string(),
            })?;
            dets.push(det);
        }
        out.insert(frame, dets);
    }
    Ok(out)
}

/// Per-detection vectors keyed by `(frame, index within frame)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    dim: Option<usize>,
    entries: BTreeMap<(u32, usize), Vec<f64>>,
}

impl FeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, frame: u32, index: usize) -> Option<&[f64]> {
        self.entries.get(&(frame, index)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, usize), &Vec<f64>)> {
        self.entries.iter()
    }

    /// Inserts a vector; `line` is reported in errors.
    pub fn insert(&mut self, line: usize, frame: u32, index: usize, values: Vec<f64>) -> Result<(), FormatError> {
        match self.dim {
            Some(d) if d != values.len() => {
                return Err(FormatError::DimensionMismatch {
                    line,
                    expected: d,
                    found: values.len(),
                })
            }
            _ => self.dim = Some(values.len()),
        }
        if self.entries.contains_key(&(frame, index)) {
            return Err(FormatError::DuplicateKey { line, frame, index });
        }
        self.entries.insert((frame, index), values);
        Ok(())
    }

    /// Lines of `frame,det_index,dim,v1,...,v_dim`.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut table = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() < 3 {
                return Err(malformed(line, "expected frame, detection index and dimension"));
            }
            let frame: u32 = field(line, "frame", parts[0])?;
            let index: usize = field(line, "det_index", parts[1])?;
            let dim: usize = field(line, "dim", parts[2])?;
            if dim == 0 {
                return Err(malformed(line, "dimension must be positive"));
            }
            if parts.len() - 3 != dim {
                return Err(malformed(line, format!("declared {dim} values, found {}", parts.len() - 3)));
            }
            let values = parts[3..]
                .iter()
                .map(|t| {
                    let v: f64 = field(line, "value", t)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(malformed(line, "value is not finite"))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.insert(line, frame, index, values)?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((frame, index), values) in &self.entries {
            let _ = write!(out, "{frame},{index},{}", values.len());
            for v in values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Decoded PPM raster, RGB in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Decodes a binary PPM (`P6`), 8- or 16-bit samples.
pub fn decode_ppm(bytes: &[u8], name: &str) -> Result<RgbImage, FormatError> {
    let bad = |reason: &str| FormatError::MalformedImage {
        path: name.to_string(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Option<String> {
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
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos).as_deref() != Some("P6") {
        return Err(bad("missing P6 magic"));
    }
    let number = |pos: &mut usize, what: &str| -> Result<usize, FormatError> {
        token(pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("invalid {what}")))
    };
    let width = number(&mut pos, "width")?;
    let height = number(&mut pos, "height")?;
    let maxval = number(&mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval outside 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let sample = if maxval < 256 { 1 } else { 2 };
    let needed = width * height * 3 * sample;
    let raster = bytes.get(pos..pos + needed).ok_or_else(|| bad("truncated raster"))?;
    let scale = maxval as f32;
    let data = if sample == 1 {
        raster.iter().map(|&v| (v as f32 / scale).min(1.0)).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f32 / scale).min(1.0))
            .collect()
    };
    Ok(RgbImage { width, height, data })
}

/// Encodes an 8-bit binary PPM.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// Nearest-neighbour resize to the fixed patch size.
pub fn image_to_patch(img: &RgbImage) -> Patch {
    let mut data = Vec::with_capacity(Patch::LEN);
    for r in 0..PATCH_HEIGHT {
        let sy = (r * img.height) / PATCH_HEIGHT;
        for c in 0..PATCH_WIDTH {
            let sx = (c * img.width) / PATCH_WIDTH;
            let k = (sy * img.width + sx) * 3;
            data.extend_from_slice(&img.data[k..k + 3]);
        }
    }
    Patch::new(data).expect("resized raster has patch size and unit range")
}

/// Loads `<dir>/<frame>_<index>.ppm` as a patch.
pub fn load_patch(dir: impl AsRef<Path>, frame: u32, index: usize) -> Result<Patch, FormatError> {
    let path = dir.as_ref().join(format!("{frame}_{index}.ppm"));
    let bytes = fs::read(&path)?;
    Ok(image_to_patch(&decode_ppm(&bytes, &path.display().to_string())?))
}
