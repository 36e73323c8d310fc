//! The HSC cube container: magic, JSON header, f32 radiance, i32 labels.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HSC1";
const DTYPE: &str = "f32le";

/// A hyperspectral cube: `H·W` pixels with `L`-band spectra, row-major
/// `(H, W, L)`. Values must be finite; wavelengths (micrometers), when
/// present, must be strictly increasing with one entry per band.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    pub h: usize,
    pub w: usize,
    pub l: usize,
    pub data: Vec<f32>,
    pub wavelengths: Option<Vec<f64>>,
    pub sensor_tag: String,
}

impl HsiCube {
    pub fn new(h: usize, w: usize, l: usize, data: Vec<f32>) -> Result<Self> {
        let cube =
            HsiCube { h, w, l, data, wavelengths: None, sensor_tag: String::new() };
        cube.validate()?;
        Ok(cube)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 || self.l == 0 {
            return Err(Error::data(format!(
                "cube extents must be positive, got {}x{}x{}",
                self.h, self.w, self.l
            )));
        }
        if self.data.len() != self.h * self.w * self.l {
            return Err(Error::data(format!(
                "cube body holds {} values, extents {}x{}x{} require {}",
                self.data.len(),
                self.h,
                self.w,
                self.l,
                self.h * self.w * self.l
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite radiance at flat index {i}")));
        }
        if let Some(wl) = &self.wavelengths {
            if wl.len() != self.l {
                return Err(Error::data(format!(
                    "{} wavelengths for {} bands",
                    wl.len(),
                    self.l
                )));
            }
            if wl.windows(2).any(|p| !(p[1] > p[0]) || !p[0].is_finite()) {
                return Err(Error::data("wavelengths must be finite and strictly increasing"));
            }
        }
        Ok(())
    }

    /// Flat offset of pixel `(y, x)`'s spectrum.
    pub fn index(&self, y: usize, x: usize) -> usize {
        (y * self.w + x) * self.l
    }

    /// The `L`-band spectrum at `(y, x)`.
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        &self.data[self.index(y, x)..self.index(y, x) + self.l]
    }
}

/// Per-pixel class labels: 0 = unlabeled, `1..=C` = classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub h: usize,
    pub w: usize,
    pub labels: Vec<i32>,
    pub class_names: Vec<String>,
}

impl LabelMap {
    pub fn new(h: usize, w: usize, labels: Vec<i32>, class_names: Vec<String>) -> Result<Self> {
        let map = LabelMap { h, w, labels, class_names };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.h * self.w {
            return Err(Error::data(format!(
                "{} labels for a {}x{} grid",
                self.labels.len(),
                self.h,
                self.w
            )));
        }
        let c = self.class_names.len() as i32;
        if let Some(i) = self.labels.iter().position(|&v| v < 0 || v > c) {
            return Err(Error::data(format!(
                "label {} at flat index {i} outside 0..={c}",
                self.labels[i]
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label(&self, y: usize, x: usize) -> i32 {
        self.labels[y * self.w + x]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(rename = "H")]
    h: usize,
    #[serde(rename = "W")]
    w: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "C")]
    c: usize,
    class_names: Vec<String>,
    wavelengths: Option<Vec<f64>>,
    sensor_tag: String,
    dtype: String,
}

/// Writes cube + labels to an HSC container; the round trip through
/// [`load_hsc`] is bit-exact.
pub fn save_hsc(cube: &HsiCube, labels: &LabelMap, path: &Path) -> Result<()> {
    cube.validate()?;
    labels.validate()?;
    if labels.h != cube.h || labels.w != cube.w {
        return Err(Error::data(format!(
            "label grid {}x{} does not match cube {}x{}",
            labels.h, labels.w, cube.h, cube.w
        )));
    }
    let header = Header {
        h: cube.h,
        w: cube.w,
        l: cube.l,
        c: labels.class_names.len(),
        class_names: labels.class_names.clone(),
        wavelengths: cube.wavelengths.clone(),
        sensor_tag: cube.sensor_tag.clone(),
        dtype: DTYPE.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(header_bytes.len() as u32)?;
    out.write_all(&header_bytes)?;
    for &v in &cube.data {
        out.write_f32::<LittleEndian>(v)?;
    }
    for &v in &labels.labels {
        out.write_i32::<LittleEndian>(v)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an HSC container written by [`save_hsc`].
pub fn load_hsc(path: &Path) -> Result<(HsiCube, LabelMap)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format(format!("{}: not an HSC1 container", path.display())));
    }
    let header_len = (&bytes[4..8]).read_u32::<LittleEndian>()? as usize;
    let body_at = 8 + header_len;
    if bytes.len() < body_at {
        return Err(Error::format(format!("{}: truncated header", path.display())));
    }
    let header: Header = serde_json::from_slice(&bytes[8..body_at])
        .map_err(|e| Error::format(format!("{}: bad header: {e}", path.display())))?;
    if header.dtype != DTYPE {
        return Err(Error::format(format!(
            "{}: unsupported dtype {:?}",
            path.display(),
            header.dtype
        )));
    }
    let cube_vals = header.h * header.w * header.l;
    let label_vals = header.h * header.w;
    let want = body_at + 4 * (cube_vals + label_vals);
    if bytes.len() != want {
        return Err(Error::format(format!(
            "{}: header promises {} bytes, file holds {}",
            path.display(),
            want,
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(cube_vals);
    let mut rd = &bytes[body_at..];
    for _ in 0..cube_vals {
        data.push(rd.read_f32::<LittleEndian>()?);
    }
    let mut labels = Vec::with_capacity(label_vals);
    for _ in 0..label_vals {
        labels.push(rd.read_i32::<LittleEndian>()?);
    }

    let cube = HsiCube {
        h: header.h,
        w: header.w,
        l: header.l,
        data,
        wavelengths: header.wavelengths,
        sensor_tag: header.sensor_tag,
    };
    let map = LabelMap {
        h: header.h,
        w: header.w,
        labels,
        class_names: header.class_names,
    };
    cube.validate().map_err(format_err)?;
    map.validate().map_err(format_err)?;
    Ok((cube, map))
}

/// Body inconsistencies discovered on load are container corruption.
fn format_err(e: Error) -> Error {
    match e {
        Error::Data(msg) => Error::Format(msg),
        other => other,
    }
}
