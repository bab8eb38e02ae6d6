//! Binary bond-configuration dumps.
//!
//! Layout, little-endian: magic `GFBONDS\0`, `u32` version, 64-byte ASCII
//! graph hash, `u64` seed, `u64` stream index, `u64` edge count; then records
//! of `u64` sweep index followed by `ceil(edges/64)` `u64` words.

use std::io::{Read, Write};

use crate::config::BondConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GFBONDS\0";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub graph_hash: String,
    pub seed: u64,
    pub stream: u64,
    pub num_edges: u64,
}

pub struct DumpWriter<W: Write> {
    inner: W,
    words: usize,
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut inner: W, header: &DumpHeader) -> Result<Self> {
        let hash = header.graph_hash.as_bytes();
        if hash.len() != 64 {
            return Err(Error::invalid("graph hash must be 64 hex characters"));
        }
        inner.write_all(MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        inner.write_all(hash)?;
        for v in [header.seed, header.stream, header.num_edges] {
            inner.write_all(&v.to_le_bytes())?;
        }
        Ok(DumpWriter {
            inner,
            words: (header.num_edges as usize).div_ceil(64),
        })
    }

    pub fn write(&mut self, sweep: u64, bonds: &BondConfig) -> Result<()> {
        if bonds.words().len() != self.words {
            return Err(Error::invalid("bond configuration size does not match header"));
        }
        self.inner.write_all(&sweep.to_le_bytes())?;
        for w in bonds.words() {
            self.inner.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a whole dump back.
pub fn read_dump(mut r: impl Read) -> Result<(DumpHeader, Vec<(u64, BondConfig)>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a bond dump"));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(Error::invalid("unsupported dump version"));
    }
    let mut hash = [0u8; 64];
    r.read_exact(&mut hash)?;
    let header = DumpHeader {
        graph_hash: String::from_utf8(hash.to_vec()).map_err(|_| Error::invalid("bad hash"))?,
        seed: read_u64(&mut r)?,
        stream: read_u64(&mut r)?,
        num_edges: read_u64(&mut r)?,
    };
    let ne = header.num_edges as usize;
    let mut records = Vec::new();
    loop {
        let sweep = match read_u64(&mut r) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        let words = (0..ne.div_ceil(64))
            .map(|_| read_u64(&mut r))
            .collect::<std::io::Result<Vec<u64>>>()?;
        records.push((sweep, BondConfig::from_words(ne, words)));
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let header = DumpHeader {
            graph_hash: "a".repeat(64),
            seed: 42,
            stream: 3,
            num_edges: 70,
        };
        let mut w = DumpWriter::new(Vec::new(), &header).unwrap();
        let a = BondConfig::from_open_edges(70, [0, 5, 69]);
        let b = BondConfig::open(70);
        w.write(10, &a).unwrap();
        w.write(11, &b).unwrap();
        let bytes = w.finish().unwrap();
        let (h, recs) = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(recs, vec![(10, a), (11, b)]);
        assert!(read_dump(&bytes[1..]).is_err());
    }
}
