//! Text file formats: ASCII PGM, flat image CSV, dense matrix files, point
//! lists and the result tables.

use std::fs;
use std::path::Path;

use gnc_core::DenseOperator;

use crate::error::{LabError, LabResult};
use crate::image::Image;

pub const PGM_MAXVAL: u32 = 65535;

fn read_text(path: &Path) -> LabResult<String> {
    fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

/// Encodes an image as ASCII PGM (`P2`, maxval 65535). Values are clamped to
/// `[0, 1]` before quantisation.
pub fn encode_pgm(image: &Image) -> String {
    let mut out = format!("P2\n{} {}\n{}\n", image.width(), image.height(), PGM_MAXVAL);
    for row in image.data().chunks(image.width()) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u32).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses an ASCII PGM, scaling samples by `1 / maxval`.
pub fn decode_pgm(text: &str) -> Result<Image, String> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err("not an ASCII PGM (missing P2 magic)".into());
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = tokens.next().ok_or_else(|| format!("missing {name}"))?;
        *slot = tok.parse().map_err(|_| format!("bad {name} {tok:?}"))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > PGM_MAXVAL as usize {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let mut data = Vec::with_capacity(width * height);
    for tok in tokens {
        let v: usize = tok.parse().map_err(|_| format!("bad sample {tok:?}"))?;
        if v > maxval {
            return Err(format!("sample {v} exceeds maxval {maxval}"));
        }
        data.push(v as f64 / maxval as f64);
    }
    if data.len() != width * height {
        return Err(format!("expected {} samples, found {}", width * height, data.len()));
    }
    Image::new(width, height, data).map_err(|e| e.to_string())
}

pub fn write_pgm(path: &Path, image: &Image) -> LabResult<()> {
    write_bytes(path, encode_pgm(image).as_bytes())
}

pub fn read_pgm(path: &Path) -> LabResult<Image> {
    decode_pgm(&read_text(path)?).map_err(|m| LabError::format(path, m))
}

/// Flat image CSV: header `row,col,value`, one pixel per line, row-major.
pub fn write_image_csv(path: &Path, image: &Image) -> LabResult<()> {
    let mut rows = Vec::with_capacity(image.data().len());
    for r in 0..image.height() {
        for c in 0..image.width() {
            rows.push(vec![r.to_string(), c.to_string(), image.get(r, c).to_string()]);
        }
    }
    write_csv(path, &["row", "col", "value"], &rows)
}

pub fn read_image_csv(path: &Path) -> LabResult<Image> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| LabError::format(path, e.to_string()))?;
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| LabError::format(path, e.to_string()))?;
        let parse = |i: usize| -> LabResult<&str> {
            record
                .get(i)
                .ok_or_else(|| LabError::format(path, "expected columns row,col,value"))
        };
        let r: usize = parse(0)?.trim().parse().map_err(|_| LabError::format(path, "bad row index"))?;
        let c: usize = parse(1)?.trim().parse().map_err(|_| LabError::format(path, "bad column index"))?;
        let v: f64 = parse(2)?.trim().parse().map_err(|_| LabError::format(path, "bad pixel value"))?;
        cells.push((r, c, v));
    }
    let height = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let width = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != width * height {
        return Err(LabError::format(path, "pixel list does not cover a full rectangle"));
    }
    let mut data = vec![f64::NAN; width * height];
    for (r, c, v) in cells {
        data[r * width + c] = v;
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err(LabError::format(path, "duplicate or missing pixels"));
    }
    Image::new(width, height, data)
}

/// Whitespace-separated numeric rows; blank lines and `#` comments ignored.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| format!("line {}: bad number {tok:?}", lineno + 1))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> LabResult<DenseOperator> {
    let rows = parse_rows(&read_text(path)?).map_err(|m| LabError::format(path, m))?;
    if rows.is_empty() {
        return Err(LabError::format(path, "matrix file has no rows"));
    }
    DenseOperator::from_rows(&rows).map_err(|e| LabError::format(path, e.to_string()))
}

pub fn write_matrix(path: &Path, op: &DenseOperator) -> LabResult<()> {
    let mut out = String::new();
    for r in 0..op.rows() {
        let line: Vec<String> = (0..op.cols()).map(|c| op.get(r, c).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// All numbers of a whitespace-separated file, in reading order.
pub fn read_vector(path: &Path) -> LabResult<Vec<f64>> {
    let rows = parse_rows(&read_text(path)?).map_err(|m| LabError::format(path, m))?;
    Ok(rows.into_iter().flatten().collect())
}

/// One point per CSV row, no header. Every row must have the same length.
pub fn read_points(path: &Path) -> LabResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| LabError::format(path, e.to_string()))?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LabError::format(path, e.to_string()))?;
        let point = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| LabError::format(path, format!("row {}: not a numeric vector", i + 1)))?;
        if let Some(first) = points.first() {
            if first.len() != point.len() {
                return Err(LabError::format(path, format!("row {} has {} entries, expected {}", i + 1, point.len(), first.len())));
            }
        }
        points.push(point);
    }
    if points.is_empty() {
        return Err(LabError::format(path, "no points"));
    }
    Ok(points)
}

pub fn write_points(path: &Path, points: &[Vec<f64>]) -> LabResult<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| p.iter().map(f64::to_string).collect())
        .collect();
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in &rows {
        writer.write_record(row).map_err(|e| LabError::format(path, e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| LabError::format(path, e.to_string()))?;
    write_bytes(path, &bytes)
}

/// CSV table rendered to bytes, with a header row.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory write")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> LabResult<()> {
    write_bytes(path, &csv_bytes(header, rows))
}

pub fn write_text(path: &Path, text: &str) -> LabResult<()> {
    write_bytes(path, text.as_bytes())
}
