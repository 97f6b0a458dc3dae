//! File formats: 16-bit millimeter PNG and PFM depth, sparse CSV, dToF CSV,
//! rig JSON, raw float volumes with a JSON sidecar.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageReader, Luma};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraRig, RigRecord};
use crate::depth::{DToFGrid, DepthMap, Field, SparseDepth, SparsePoint, Volume};
use crate::error::{Error, Result};
use crate::simulation::{MaterialMap, RgbImage};

/// Largest depth a millimeter PNG can hold.
pub const PNG_MAX_DEPTH_M: f64 = 65.535;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Millimeter codes for a 16-bit PNG; invalid pixels become 0.
pub fn depth_to_mm(map: &DepthMap) -> Result<Vec<u16>> {
    (0..map.len())
        .map(|i| match map.get_index(i) {
            None => Ok(0),
            Some(d) if d > PNG_MAX_DEPTH_M + 0.0005 => Err(Error::InvalidValue(format!(
                "depth {d} m exceeds the 16-bit millimeter range"
            ))),
            // sub-millimeter depths still have to stay valid
            Some(d) => Ok(((d * 1000.0).round() as u16).max(1)),
        })
        .collect()
}

pub fn write_png_u16(path: &Path, width: usize, height: usize, codes: Vec<u16>) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, codes)
            .ok_or_else(|| Error::DimensionMismatch("png buffer size".into()))?;
    img.save(path)?;
    Ok(())
}

pub fn write_depth_png(path: &Path, map: &DepthMap) -> Result<()> {
    write_png_u16(path, map.width(), map.height(), depth_to_mm(map)?)
}

pub fn read_depth_png(path: &Path) -> Result<DepthMap> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let gray = img.into_luma16();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray
        .into_raw()
        .into_iter()
        .map(|v| v as f64 / 1000.0)
        .collect();
    DepthMap::from_values(w, h, data)
}

/// Reads a Portable Float Map. Negative scale means little-endian; rows are
/// stored bottom-to-top.
pub fn read_pfm(path: &Path) -> Result<Field> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PFM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Format(format!("not a PFM file (magic {other:?})"))),
    };
    let parse = |s: String| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Format(format!("bad PFM header field {s:?}")))
    };
    let w = parse(token()?)? as usize;
    let h = parse(token()?)? as usize;
    let scale = parse(token()?)?;
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let little = scale < 0.0;
    let need = w * h * channels * 4;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format(format!("PFM raster needs {need} bytes")))?;
    let mut data = vec![0.0; w * h];
    for (i, chunk) in raster.chunks_exact(4 * channels).enumerate() {
        let b: [u8; 4] = chunk[..4].try_into().expect("chunk of 4");
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (file_row, col) = (i / w, i % w);
        data[(h - 1 - file_row) * w + col] = v as f64;
    }
    Field::new(w, h, data)
}

pub fn write_pfm(path: &Path, field: &Field) -> Result<()> {
    let (w, h) = (field.width(), field.height());
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "Pf\n{w} {h}\n-1.0\n")?;
    for r in (0..h).rev() {
        for c in 0..w {
            out.write_all(&(field.at(r, c) as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Depth by extension: `.png` (mm) or `.pfm` (meters, non-positive invalid).
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    match extension(path).as_str() {
        "png" => read_depth_png(path),
        "pfm" => Ok(read_pfm(path)?.to_depth_map()),
        other => Err(Error::Format(format!(
            "unsupported depth format {other:?} (expected png or pfm)"
        ))),
    }
}

pub fn write_depth(path: &Path, map: &DepthMap) -> Result<()> {
    match extension(path).as_str() {
        "png" => write_depth_png(path, map),
        "pfm" => write_pfm(
            path,
            &Field::new(map.width(), map.height(), map.to_filled_vec(0.0))?,
        ),
        other => Err(Error::Format(format!(
            "unsupported depth format {other:?} (expected png or pfm)"
        ))),
    }
}

/// Full-resolution float field by extension (`.pfm` or `.png` in mm).
pub fn read_field(path: &Path) -> Result<Field> {
    match extension(path).as_str() {
        "pfm" => read_pfm(path),
        _ => {
            let map = read_depth(path)?;
            Field::new(map.width(), map.height(), map.to_filled_vec(0.0))
        }
    }
}

fn read_csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            let got: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if got != header {
                return Err(Error::Format(format!(
                    "{}: expected header {header:?}, found {line:?}",
                    path.display()
                )));
            }
            saw_header = true;
            continue;
        }
        rows.push((
            n + 1,
            line.split(',').map(|s| s.trim().to_string()).collect(),
        ));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("{}:{line}: cannot parse {s:?}", path.display())))
}

type CsvPoint = (usize, usize, f64);

fn read_point_csv(path: &Path) -> Result<Vec<CsvPoint>> {
    read_csv_rows(path, "row,col,depth_m")?
        .into_iter()
        .map(|(line, fields)| {
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "{}:{line}: expected 3 fields, found {}",
                    path.display(),
                    fields.len()
                )));
            }
            Ok((
                parse_field(path, line, &fields[0])?,
                parse_field(path, line, &fields[1])?,
                parse_field(path, line, &fields[2])?,
            ))
        })
        .collect()
}

/// dToF frame CSV (`row,col,depth_m`); absent cells are invalid. Grid size
/// comes from `dims` when given, otherwise from the largest indices present.
pub fn read_dtof_csv(path: &Path, dims: Option<(usize, usize)>) -> Result<DToFGrid> {
    let pts = read_point_csv(path)?;
    let (rows, cols) = dims.unwrap_or_else(|| {
        pts.iter()
            .fold((0, 0), |(r, c), p| (r.max(p.0 + 1), c.max(p.1 + 1)))
    });
    let mut cells = vec![None; rows * cols];
    for (r, c, d) in pts {
        if r >= rows || c >= cols {
            return Err(Error::InvalidCell { row: r, col: c });
        }
        if !(d > 0.0 && d.is_finite()) {
            continue;
        }
        cells[r * cols + c] = Some(d);
    }
    DToFGrid::new(rows, cols, cells)
}

pub fn write_dtof_csv(path: &Path, grid: &DToFGrid) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "row,col,depth_m")?;
    for (r, c, d) in grid.valid_cells() {
        writeln!(out, "{r},{c},{d}")?;
    }
    out.flush()?;
    Ok(())
}

/// Sparse point list; the image size is not stored in the CSV.
pub fn read_sparse_csv(path: &Path, width: usize, height: usize) -> Result<SparseDepth> {
    let points = read_point_csv(path)?
        .into_iter()
        .filter(|p| p.2 > 0.0 && p.2.is_finite())
        .map(|(row, col, depth_m)| SparsePoint { row, col, depth_m })
        .collect();
    SparseDepth::new(width, height, points)
}

pub fn write_sparse_csv(path: &Path, sparse: &SparseDepth) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "row,col,depth_m")?;
    for p in sparse.points() {
        writeln!(out, "{},{},{}", p.row, p.col, p.depth_m)?;
    }
    out.flush()?;
    Ok(())
}

/// `.csv` point list or `.png` millimeter map.
pub fn write_sparse(path: &Path, sparse: &SparseDepth) -> Result<()> {
    match extension(path).as_str() {
        "csv" => write_sparse_csv(path, sparse),
        "png" => write_depth_png(path, &sparse.to_depth_map()),
        other => Err(Error::Format(format!(
            "unsupported sparse format {other:?} (expected png or csv)"
        ))),
    }
}

/// Reads a sparse map; CSV needs the image size, PNG carries it.
pub fn read_sparse(path: &Path, size: Option<(usize, usize)>) -> Result<SparseDepth> {
    match extension(path).as_str() {
        "csv" => {
            let (w, h) = size.ok_or_else(|| {
                Error::InvalidConfig("sparse CSV input needs the image size".into())
            })?;
            read_sparse_csv(path, w, h)
        }
        _ => {
            let map = read_depth(path)?;
            if let Some((w, h)) = size {
                if (map.width(), map.height()) != (w, h) {
                    return Err(Error::DimensionMismatch(format!(
                        "sparse map is {}x{}, expected {w}x{h}",
                        map.width(),
                        map.height()
                    )));
                }
            }
            Ok(SparseDepth::from_depth_map(&map))
        }
    }
}

pub fn read_rig(path: &Path) -> Result<CameraRig> {
    let rec: RigRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    CameraRig::try_from(&rec)
}

pub fn write_rig(path: &Path, rig: &CameraRig) -> Result<()> {
    write_json(path, &RigRecord::from(rig))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels)
}

/// Material probabilities from a PFM (values used as-is) or a grayscale
/// image scaled to `[0, 1]`.
pub fn read_material_map(path: &Path) -> Result<MaterialMap> {
    if extension(path) == "pfm" {
        let f = read_pfm(path)?;
        return MaterialMap::new(f.width(), f.height(), f.into_data());
    }
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?
        .into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    MaterialMap::new(
        w,
        h,
        img.into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    )
}

/// Shape record stored next to a raw volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeHeader {
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// `volume.bin` → `volume.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Reads channel-major little-endian `f32` data described by its sidecar.
pub fn read_volume(path: &Path) -> Result<Volume> {
    let header: VolumeHeader = read_json(&sidecar_path(path))?;
    crate::check_schema_version(header.schema_version)?;
    let bytes = fs::read(path)?;
    let n = header.height * header.width * header.channels;
    if bytes.len() != n * 4 {
        return Err(Error::DimensionMismatch(format!(
            "{} holds {} bytes, header describes {n} floats",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")) as f64)
        .collect();
    Volume::new(header.width, header.height, header.channels, data)
}

pub fn write_volume(path: &Path, vol: &Volume) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for v in vol.data() {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()?;
    write_json(
        &sidecar_path(path),
        &VolumeHeader {
            schema_version: crate::SCHEMA_VERSION,
            height: vol.height(),
            width: vol.width(),
            channels: vol.channels(),
        },
    )
}

/// Absolute error in millimeters as a 16-bit PNG, 0 where undefined,
/// saturating at the format limit.
pub fn write_error_png(
    path: &Path,
    width: usize,
    height: usize,
    err: &[Option<f64>],
) -> Result<()> {
    let codes = err
        .iter()
        .map(|e| {
            e.map_or(0, |v| {
                (v * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16
            })
        })
        .collect();
    write_png_u16(path, width, height, codes)
}
