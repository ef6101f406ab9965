//! On-disk formats: time-series CSV, image tensors, PNG and JSON helpers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use peh_core::signal::Image;
use peh_core::{Quantity, TimeSeries};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io_err, Error, Result};

/// Write a series as `# key: value` header lines followed by one value per line.
pub fn write_timeseries(path: &Path, ts: &TimeSeries) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# quantity: {}", ts.quantity.name())?;
        writeln!(w, "# sample_rate_hz: {}", ts.sample_rate)?;
        writeln!(w, "# start_time_s: {}", ts.start_time)?;
        for v in &ts.values {
            writeln!(w, "{v}")?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub fn read_timeseries(path: &Path) -> Result<TimeSeries> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_timeseries(BufReader::new(file), path)
}

pub fn parse_timeseries(reader: impl BufRead, path: &Path) -> Result<TimeSeries> {
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let (mut quantity, mut rate, mut start) = (None, None, None);
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.split_once(':') else {
                return Err(parse_err(lineno, format!("header without `key: value`: {line}")));
            };
            let value = value.trim();
            let number = || value.parse::<f64>().map_err(|e| parse_err(lineno, format!("{}: {e}", key.trim())));
            match key.trim() {
                "quantity" => {
                    quantity = Some(
                        Quantity::from_name(value)
                            .ok_or_else(|| parse_err(lineno, format!("unknown quantity `{value}`")))?,
                    )
                }
                "sample_rate_hz" => rate = Some(number()?),
                "start_time_s" => start = Some(number()?),
                other => return Err(parse_err(lineno, format!("unknown header `{other}`"))),
            }
            continue;
        }
        let v: f64 = line.parse().map_err(|e| parse_err(lineno, format!("bad sample `{line}`: {e}")))?;
        if !v.is_finite() {
            return Err(parse_err(lineno, format!("non-finite sample `{line}`")));
        }
        values.push(v);
    }
    let missing = |what: &str| parse_err(0, format!("missing `# {what}` header"));
    let ts = TimeSeries {
        quantity: quantity.ok_or_else(|| missing("quantity"))?,
        sample_rate: rate.ok_or_else(|| missing("sample_rate_hz"))?,
        start_time: start.ok_or_else(|| missing("start_time_s"))?,
        values,
    };
    ts.validate()?;
    Ok(ts)
}

const TENSOR_MAGIC: &[u8; 4] = b"PEHT";

/// Image tensor: `PEHT`, height and width as little-endian u32, then
/// `height · width` little-endian f32 values row by row, row 0 at the top
/// (highest frequency).
pub fn write_tensor(path: &Path, img: &Image) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + 4 * img.data.len());
    bytes.extend_from_slice(TENSOR_MAGIC);
    bytes.extend_from_slice(&(img.height as u32).to_le_bytes());
    bytes.extend_from_slice(&(img.width as u32).to_le_bytes());
    for v in &img.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

pub fn read_tensor(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    let bad = |message: &str| Error::Format { path: path.to_path_buf(), message: message.to_string() };
    if bytes.len() < 12 || &bytes[..4] != TENSOR_MAGIC {
        return Err(bad("not an image tensor"));
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + 4 * height * width {
        return Err(bad("payload length does not match the header"));
    }
    let data = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Image { height, width, data })
}

/// 8-bit grayscale PNG of an image with values in `[0, 1]`.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let pixels: Vec<u8> = img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let fmt = |e: png::EncodingError| Error::Format { path: path.to_path_buf(), message: e.to_string() };
    let mut w = enc.write_header().map_err(fmt)?;
    w.write_image_data(&pixels).map_err(fmt)?;
    w.finish().map_err(fmt)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    write_bytes(path, text.as_bytes())
}
