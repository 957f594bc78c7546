//! Parameter checkpoints: `MARSCKPT`, a u32 tensor count, then per tensor
//! the u32 name length, the UTF-8 name, the u32 rank, the u32 dimensions and
//! the f64 payload, all little-endian.

use std::io::{BufReader, BufWriter, Read, Write};

use super::binary::{expect_eof, expect_magic, read_exact, read_u32, to_u32, write_u32};
use crate::autodiff::{Parameter, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MARSCKPT";
const WHAT: &str = "checkpoint";

pub fn write_checkpoint(w: impl Write, params: &[Parameter]) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, to_u32(params.len(), "parameter count")?)?;
    for p in params {
        let name = p.name.as_bytes();
        write_u32(&mut w, to_u32(name.len(), "name length")?)?;
        w.write_all(name)?;
        write_u32(&mut w, to_u32(p.value.rank(), "rank")?)?;
        for &d in p.value.shape() {
            write_u32(&mut w, to_u32(d, "dimension")?)?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(r: impl Read) -> Result<Vec<(String, Tensor)>> {
    let mut r = BufReader::new(r);
    expect_magic(&mut r, CHECKPOINT_MAGIC, WHAT)?;
    let count = read_u32(&mut r, WHAT)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = read_u32(&mut r, WHAT)? as usize;
        if len > 1 << 16 {
            return Err(Error::format(WHAT, format!("tensor {i} name length {len} is implausible")));
        }
        let mut name = vec![0u8; len];
        read_exact(&mut r, &mut name, WHAT)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::format(WHAT, format!("tensor {i} name is not UTF-8")))?;
        let rank = read_u32(&mut r, WHAT)? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::format(WHAT, format!("tensor `{name}` has rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank)
            .map(|_| read_u32(&mut r, WHAT).map(|d| d as usize))
            .collect::<Result<_>>()?;
        let n: usize = shape.iter().product();
        if n == 0 || n > 1 << 28 {
            return Err(Error::format(WHAT, format!("tensor `{name}` has shape {shape:?}")));
        }
        let mut buf = vec![0u8; n * 8];
        read_exact(&mut r, &mut buf, WHAT)?;
        let data = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    expect_eof(&mut r, WHAT)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let params = vec![
            Parameter::new("a.weight", Tensor::from_fn(&[2, 3], |i| (i as f64).sin())),
            Parameter::new("a.bias", Tensor::new(vec![2], vec![f64::MIN_POSITIVE, -0.0]).unwrap()),
        ];
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &params).unwrap();
        assert_eq!(&bytes[..8], b"MARSCKPT");
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        for (p, (name, t)) in params.iter().zip(&back) {
            assert_eq!(&p.name, name);
            assert_eq!(p.value.shape(), t.shape());
            for (a, b) in p.value.data().iter().zip(t.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
