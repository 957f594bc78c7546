//! Little-endian primitive readers and writers.

use std::io::{Read, Write};

use crate::{Error, Result};

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(what, "file is truncated")
        } else {
            Error::Io(e)
        }
    })
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 8], what: &'static str) -> Result<()> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    if &b != magic {
        return Err(Error::format(
            what,
            format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&b), String::from_utf8_lossy(magic)),
        ));
    }
    Ok(())
}

pub(crate) fn expect_eof(r: &mut impl Read, what: &'static str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::format(what, "trailing bytes after the last record")),
    }
}

pub(crate) fn to_u32(v: usize, field: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{field} {v} does not fit in u32")))
}
