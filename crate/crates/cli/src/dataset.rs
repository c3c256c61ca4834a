//! Input points: CSV rows `label,x1,...,xd` or an IDX image/label pair.

use std::fs;
use std::path::Path;

use relu_regions::BoxConstraint;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub dim: usize,
    /// Per-coordinate feature range every point was checked against, if any.
    pub range: Option<(f64, f64)>,
}

impl Dataset {
    pub fn bounds(&self) -> Option<BoxConstraint> {
        self.range
            .map(|(lo, hi)| BoxConstraint::uniform(self.dim, lo, hi).expect("validated range"))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a CSV dataset, or an IDX pair when `labels` is given. Features
/// outside `range` are rejected, not clamped.
pub fn load_dataset(
    path: &Path,
    labels: Option<&Path>,
    range: Option<(f64, f64)>,
) -> CliResult<Dataset> {
    if let Some((lo, hi)) = range {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CliError::Usage(format!("empty feature range [{lo}, {hi}]")));
        }
    }
    let points = match labels {
        Some(label_path) => idx_points(path, &read(path)?, label_path, &read(label_path)?)?,
        None => {
            let text = String::from_utf8(read(path)?)
                .map_err(|_| CliError::data(path, "dataset is not valid UTF-8"))?;
            parse_csv(path, &text)?
        }
    };
    let dim = points.first().map_or(0, |p| p.x.len());
    if let Some((lo, hi)) = range {
        for (row, p) in points.iter().enumerate() {
            if let Some(col) = p.x.iter().position(|&v| v < lo || v > hi) {
                return Err(CliError::data(
                    path,
                    format!(
                        "row {}, feature {}: value {} outside [{lo}, {hi}]",
                        row + 1,
                        col + 1,
                        p.x[col]
                    ),
                ));
            }
        }
    }
    Ok(Dataset { points, dim, range })
}

/// `label,x1,...,xd` per line; `#` starts a comment line.
pub fn parse_csv(path: &Path, text: &str) -> CliResult<Vec<Point>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut points: Vec<Point> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.len() < 2 {
            return Err(CliError::data(
                path,
                format!("line {line}: expected a label and at least one feature"),
            ));
        }
        let label = record[0].parse::<usize>().map_err(|_| {
            CliError::data(path, format!("line {line}: bad label {:?}", &record[0]))
        })?;
        let x = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(col, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::data(
                            path,
                            format!("line {line}, feature {}: bad value {field:?}", col + 1),
                        )
                    })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = points.first() {
            if first.x.len() != x.len() {
                return Err(CliError::data(
                    path,
                    format!(
                        "line {line}: {} features, expected {}",
                        x.len(),
                        first.x.len()
                    ),
                ));
            }
        }
        points.push(Point { x, label });
    }
    Ok(points)
}

/// Dimensions and payload of an unsigned-byte IDX file.
pub fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, &[u8]), String> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err("missing IDX magic number".into());
    }
    if bytes[2] != 0x08 {
        return Err(format!("unsupported IDX element type 0x{:02x}", bytes[2]));
    }
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err("truncated IDX header".into());
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|k| {
            let at = 4 + 4 * k;
            u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
        })
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count {
        return Err(format!(
            "IDX payload has {} bytes, header implies {count}",
            payload.len()
        ));
    }
    Ok((dims, payload))
}

fn idx_points(
    image_path: &Path,
    images: &[u8],
    label_path: &Path,
    labels: &[u8],
) -> CliResult<Vec<Point>> {
    let (idims, pixels) = parse_idx(images).map_err(|m| CliError::data(image_path, m))?;
    let (ldims, classes) = parse_idx(labels).map_err(|m| CliError::data(label_path, m))?;
    if idims.len() < 2 {
        return Err(CliError::data(
            image_path,
            "image file needs at least two dimensions",
        ));
    }
    if ldims.len() != 1 || ldims[0] != idims[0] {
        return Err(CliError::data(
            label_path,
            format!("{:?} labels for {} images", ldims, idims[0]),
        ));
    }
    let d: usize = idims[1..].iter().product();
    if d == 0 || pixels.len() < idims[0] * d {
        return Err(CliError::data(image_path, "truncated IDX image payload"));
    }
    if classes.len() < idims[0] {
        return Err(CliError::data(label_path, "truncated IDX label payload"));
    }
    Ok(pixels
        .chunks(d)
        .take(idims[0])
        .zip(classes)
        .map(|(chunk, &label)| Point {
            x: chunk.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: label as usize,
        })
        .collect())
}
