//! Binary (P5) 8-bit PGM images and the dataset directory layout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmlError};
use crate::mask::LabelMap;
use crate::synthdata::Sample;

/// Gray level per class index when masks are written as images.
pub const MASK_GRAY_STEP: u8 = 127;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub comments: Vec<String>,
}

pub fn encode_pgm(pgm: &Pgm) -> Vec<u8> {
    let mut out = Vec::with_capacity(pgm.pixels.len() + 64);
    out.extend_from_slice(b"P5\n");
    for c in &pgm.comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", pgm.width, pgm.height).as_bytes());
    out.extend_from_slice(&pgm.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Pgm, String> {
    let mut pos = 0;
    let mut comments = Vec::new();
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err("truncated header".into());
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let text = String::from_utf8_lossy(&bytes[pos + 1..end]);
            comments.push(text.strip_prefix(' ').unwrap_or(&text).to_string());
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic '{}'", fields[0]));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header field '{s}'"));
    let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(format!("only 8-bit PGM is supported (maxval {maxval})"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(format!("raster has {} of {n} bytes", bytes.len().saturating_sub(pos)));
    }
    Ok(Pgm { width, height, pixels: bytes[pos..pos + n].to_vec(), comments })
}

pub fn write_pgm(path: &Path, pgm: &Pgm) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| UmlError::io(path, e))?;
    f.write_all(&encode_pgm(pgm)).map_err(|e| UmlError::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = fs::read(path).map_err(|e| UmlError::io(path, e))?;
    decode_pgm(&bytes).map_err(|reason| UmlError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, reason)))
}

pub fn intensity_to_gray(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn image_to_pgm(values: &[f32], height: usize, width: usize, comments: Vec<String>) -> Pgm {
    Pgm { width, height, pixels: values.iter().map(|&v| intensity_to_gray(v as f64)).collect(), comments }
}

pub fn mask_to_pgm(mask: &LabelMap, comments: Vec<String>) -> Pgm {
    Pgm {
        width: mask.width(),
        height: mask.height(),
        pixels: mask.labels().iter().map(|&c| c.saturating_mul(MASK_GRAY_STEP)).collect(),
        comments,
    }
}

pub fn pgm_to_mask(pgm: &Pgm) -> Result<LabelMap> {
    let step = MASK_GRAY_STEP as f64;
    LabelMap::new(pgm.height, pgm.width, pgm.pixels.iter().map(|&g| (g as f64 / step).round() as u8).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub filename: String,
    pub label: usize,
    pub seed: u64,
}

fn mask_name(image_name: &str) -> String {
    image_name.replacen("_image", "_mask", 1)
}

/// Write one split as `NNNN_image.pgm` / `NNNN_mask.pgm` plus `manifest.csv`.
pub fn export_split(dir: &Path, samples: &[Sample], config_json: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| UmlError::io(dir, e))?;
    let comments = vec![format!("config: {config_json}")];
    let manifest = dir.join("manifest.csv");
    let mut file = fs::File::create(&manifest).map_err(|e| UmlError::io(&manifest, e))?;
    writeln!(file, "# config: {config_json}").map_err(|e| UmlError::io(&manifest, e))?;
    let mut w = csv::Writer::from_writer(file);
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{i:04}_image.pgm");
        write_pgm(&dir.join(&name), &image_to_pgm(&s.image, s.height, s.width, comments.clone()))?;
        write_pgm(&dir.join(mask_name(&name)), &mask_to_pgm(&s.mask, comments.clone()))?;
        w.serialize(ManifestRow { filename: name, label: s.label, seed: s.seed })?;
    }
    w.flush().map_err(|e| UmlError::io(&manifest, e))
}

/// Read a split written by [`export_split`]; intensities come back quantised
/// to 8 bits.
pub fn import_split(dir: &Path) -> Result<Vec<Sample>> {
    let manifest: PathBuf = dir.join("manifest.csv");
    let file = fs::File::open(&manifest).map_err(|e| UmlError::io(&manifest, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let mut out = Vec::new();
    for row in r.deserialize::<ManifestRow>() {
        let row = row?;
        let img = read_pgm(&dir.join(&row.filename))?;
        let mask = pgm_to_mask(&read_pgm(&dir.join(mask_name(&row.filename)))?)?;
        if (mask.height(), mask.width()) != (img.height, img.width) {
            return Err(UmlError::invalid(format!("{}: mask and image sizes differ", row.filename)));
        }
        out.push(Sample {
            height: img.height,
            width: img.width,
            image: img.pixels.iter().map(|&g| g as f32 / 255.0).collect(),
            mask,
            label: row.label,
            seed: row.seed,
        });
    }
    Ok(out)
}
