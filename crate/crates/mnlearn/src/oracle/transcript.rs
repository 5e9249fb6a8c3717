//! Binary transcript of pair answers: the magic `MNLT`, a little-endian u32
//! format version, a little-endian u32 item count, then one little-endian
//! u32 triple `(u, v, winner)` per answer.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MNLT";
pub const VERSION: u32 = 1;

/// One answer: `(u, v, winner)` with `u < v`.
pub type Triple = (usize, usize, usize);

pub fn write<W: Write>(mut w: W, n: usize, triples: &[Triple]) -> Result<()> {
    let u32_of = |x: usize| u32::try_from(x).map_err(|_| Error::arg(format!("item {x} does not fit in u32")));
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_of(n)?.to_le_bytes())?;
    for &(u, v, x) in triples {
        for y in [u, v, x] {
            w.write_all(&u32_of(y)?.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<(usize, Vec<Triple>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |msg: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, msg.to_string()));
    if buf.len() < 12 || buf[..4] != MAGIC {
        return Err(bad("not a transcript"));
    }
    let word = |k: usize| u32::from_le_bytes(buf[k..k + 4].try_into().unwrap()) as usize;
    if word(4) != VERSION as usize {
        return Err(bad("unsupported transcript version"));
    }
    let body = &buf[12..];
    if body.len() % 12 != 0 {
        return Err(bad("truncated transcript"));
    }
    let triples = (0..body.len() / 12).map(|t| (word(12 + 12 * t), word(16 + 12 * t), word(20 + 12 * t))).collect();
    Ok((word(8), triples))
}
