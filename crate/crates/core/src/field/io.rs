//! `csv-grid` reader and writer.
//!
//! Layout: a header line `height,width,n_features,cell_size_m`, one line per
//! channel name, then `n_features` blocks of `height` rows with `width`
//! comma-separated values each. A cell holding [`SENTINEL`] in any channel is
//! masked out. Blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FieldRaster, YieldRaster};
use crate::error::{Error, Result};

/// No-data marker for masked cells.
pub const SENTINEL: f64 = -9999.0;

struct Grid {
    height: usize,
    width: usize,
    cell_size_m: f64,
    names: Vec<String>,
    /// Channel-major blocks as read from the file.
    blocks: Vec<Vec<f64>>,
}

fn parse_grid(text: &str) -> Result<Grid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            line_no,
            1,
            format!(
                "header must be `height,width,n_features,cell_size_m`, got {} field(s)",
                fields.len()
            ),
        ));
    }
    let parse_count = |col: usize, what: &str| -> Result<usize> {
        fields[col]
            .parse::<usize>()
            .map_err(|_| Error::parse(line_no, col + 1, format!("{what} must be a non-negative integer")))
    };
    let height = parse_count(0, "height")?;
    let width = parse_count(1, "width")?;
    let n_features = parse_count(2, "n_features")?;
    let cell_size_m: f64 = fields[3]
        .parse()
        .map_err(|_| Error::parse(line_no, 4, "cell_size_m must be a number"))?;
    if height == 0 || width == 0 || n_features == 0 {
        return Err(Error::parse(line_no, 1, "height, width and n_features must be positive"));
    }

    let mut names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let (line_no, name) = lines.next().ok_or_else(|| {
            Error::parse(line_no, 1, format!("expected {n_features} channel names"))
        })?;
        if name.contains(',') || name.parse::<f64>().is_ok() {
            return Err(Error::parse(
                line_no,
                1,
                format!("expected a channel name, found `{name}` (header declares {n_features} channels)"),
            ));
        }
        names.push(name.to_string());
    }

    let mut blocks = Vec::with_capacity(n_features);
    let mut last_line = line_no;
    for channel in 0..n_features {
        let mut block = Vec::with_capacity(height * width);
        for row in 0..height {
            let (line_no, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    last_line + 1,
                    1,
                    format!(
                        "unexpected end of file in channel {channel} row {row}: header declares {n_features} channel(s) of {height} row(s)"
                    ),
                )
            })?;
            last_line = line_no;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(Error::parse(
                    line_no,
                    cells.len().min(width) + 1,
                    format!("ragged row: expected {width} values, found {}", cells.len()),
                ));
            }
            for (col, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::parse(line_no, col + 1, format!("non-numeric cell `{}`", cell.trim()))
                })?;
                block.push(v);
            }
        }
        blocks.push(block);
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(
            line_no,
            1,
            format!("trailing data after {n_features} declared channel block(s)"),
        ));
    }
    Ok(Grid {
        height,
        width,
        cell_size_m,
        names,
        blocks,
    })
}

impl Grid {
    fn mask(&self) -> Vec<bool> {
        (0..self.height * self.width)
            .map(|i| self.blocks.iter().all(|b| b[i] != SENTINEL))
            .collect()
    }
}

pub fn parse_field(text: &str) -> Result<FieldRaster> {
    let grid = parse_grid(text)?;
    let mask = grid.mask();
    let n = grid.blocks.len();
    let cells = grid.height * grid.width;
    let mut data = vec![0.0; cells * n];
    for (s, block) in grid.blocks.iter().enumerate() {
        for (i, &v) in block.iter().enumerate() {
            data[i * n + s] = v;
        }
    }
    FieldRaster::new(grid.height, grid.width, grid.names, data, mask, grid.cell_size_m)
}

pub fn parse_yield(text: &str) -> Result<YieldRaster> {
    let grid = parse_grid(text)?;
    if grid.blocks.len() != 1 {
        return Err(Error::parse(
            1,
            3,
            format!("yield file must have exactly 1 channel, found {}", grid.blocks.len()),
        ));
    }
    let mask = grid.mask();
    let values = grid.blocks.into_iter().next().unwrap_or_default();
    YieldRaster::new(grid.height, grid.width, values, mask)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FieldRaster> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text)
}

pub fn load_yield(path: impl AsRef<Path>) -> Result<YieldRaster> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_yield(&text)
}

fn render_grid(
    height: usize,
    width: usize,
    cell_size_m: f64,
    names: &[String],
    value: impl Fn(usize, usize, usize) -> Option<f64>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{height},{width},{},{cell_size_m}", names.len());
    for name in names {
        let _ = writeln!(out, "{name}");
    }
    for s in 0..names.len() {
        for r in 0..height {
            for c in 0..width {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", value(r, c, s).unwrap_or(SENTINEL));
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_field(path: impl AsRef<Path>, field: &FieldRaster) -> Result<()> {
    let path = path.as_ref();
    let text = render_grid(
        field.height(),
        field.width(),
        field.cell_size_m(),
        field.feature_names(),
        |r, c, s| field.is_valid(r, c).then(|| field.value(r, c, s)),
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_yield(path: impl AsRef<Path>, yield_raster: &YieldRaster, cell_size_m: f64) -> Result<()> {
    let path = path.as_ref();
    let text = render_grid(
        yield_raster.height,
        yield_raster.width,
        cell_size_m,
        &["yield".to_string()],
        |r, c, _| {
            let i = r * yield_raster.width + c;
            yield_raster.mask[i].then(|| yield_raster.values[i])
        },
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
