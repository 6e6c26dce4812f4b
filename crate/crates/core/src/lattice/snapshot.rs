//! Raw binary field snapshots.
//!
//! Layout, all little-endian: five `u64` (magic, version, n, L, component
//! count), one `f64` time, then `n⁴ × count` `f64` values in row-major
//! order with `x₁` slowest and the component index fastest.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: u64 = 0x4249_4348;
pub const VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub l: usize,
    pub t: f64,
    /// One array of `n⁴` values per component.
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let points = self.n.pow(4);
        if self.components.iter().any(|c| c.len() != points) {
            return Err(Error::Snapshot("component length does not match n^4".into()));
        }
        for v in [
            MAGIC,
            VERSION,
            self.n as u64,
            self.l as u64,
            self.components.len() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.t.to_le_bytes())?;
        let mut buf = Vec::with_capacity(points * self.components.len() * 8);
        for p in 0..points {
            for c in &self.components {
                buf.extend_from_slice(&c[p].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 5];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [magic, version, n, l, count] = header;
        if magic != MAGIC {
            return Err(Error::Snapshot(format!("bad magic {magic:#x}")));
        }
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        if !(8..=1024).contains(&n) || count == 0 || count > 1024 {
            return Err(Error::Snapshot(format!("implausible header n={n} count={count}")));
        }
        r.read_exact(&mut word)?;
        let t = f64::from_le_bytes(word);
        let (n, count) = (n as usize, count as usize);
        let points = n.pow(4);
        let mut raw = vec![0u8; points * count * 8];
        r.read_exact(&mut raw)?;
        let mut components = vec![Vec::with_capacity(points); count];
        for (k, chunk) in raw.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            components[k % count].push(v);
        }
        Ok(Self {
            n,
            l: l as usize,
            t,
            components,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
