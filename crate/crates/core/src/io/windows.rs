//! The windowed dataset file: `MARSWIN1`, then `sampleCount`, `N`, `T`,
//! `classCount` as little-endian u32, then per sample a u32 label followed by
//! `N·T` little-endian f32 values in channel-major order.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::binary::{expect_eof, expect_magic, read_exact, read_u32, to_u32, write_u32};
use crate::{Error, Result};

pub const WINDOWS_MAGIC: &[u8; 8] = b"MARSWIN1";
const WHAT: &str = "windowed dataset";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowsHeader {
    pub samples: usize,
    pub channels: usize,
    pub window: usize,
    pub classes: usize,
}

/// Labeled windows as stored on disk (values widened to f64).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowsFile {
    pub header: WindowsHeader,
    pub labels: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

pub fn write_windows<'a>(
    w: impl Write,
    channels: usize,
    window: usize,
    classes: usize,
    samples: impl ExactSizeIterator<Item = (usize, &'a [f64])>,
) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(WINDOWS_MAGIC)?;
    write_u32(&mut w, to_u32(samples.len(), "sample count")?)?;
    write_u32(&mut w, to_u32(channels, "channel count")?)?;
    write_u32(&mut w, to_u32(window, "window length")?)?;
    write_u32(&mut w, to_u32(classes, "class count")?)?;
    for (i, (label, values)) in samples.enumerate() {
        if values.len() != channels * window {
            return Err(Error::shape(format!(
                "sample {i} has {} values, header says {channels}x{window}",
                values.len()
            )));
        }
        if label >= classes {
            return Err(Error::invalid(format!("sample {i} label {label} >= {classes} classes")));
        }
        write_u32(&mut w, label as u32)?;
        for &v in values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_windows_header(r: &mut impl Read) -> Result<WindowsHeader> {
    expect_magic(r, WINDOWS_MAGIC, WHAT)?;
    Ok(WindowsHeader {
        samples: read_u32(r, WHAT)? as usize,
        channels: read_u32(r, WHAT)? as usize,
        window: read_u32(r, WHAT)? as usize,
        classes: read_u32(r, WHAT)? as usize,
    })
}

pub fn read_windows(r: impl Read) -> Result<WindowsFile> {
    let mut r = BufReader::new(r);
    let header = read_windows_header(&mut r)?;
    let per = header.channels * header.window;
    let mut labels = Vec::with_capacity(header.samples);
    let mut values = Vec::with_capacity(header.samples);
    let mut buf = vec![0u8; per * 4];
    for i in 0..header.samples {
        let label = read_u32(&mut r, WHAT)? as usize;
        if label >= header.classes {
            return Err(Error::format(
                WHAT,
                format!("sample {i} label {label} >= {} classes", header.classes),
            ));
        }
        read_exact(&mut r, &mut buf, WHAT)?;
        labels.push(label);
        values.push(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
        );
    }
    expect_eof(&mut r, WHAT)?;
    Ok(WindowsFile {
        header,
        labels,
        values,
    })
}

pub fn read_windows_file(path: &Path) -> Result<WindowsFile> {
    read_windows(std::fs::File::open(path)?)
}
