//! Binary model files.
//!
//! Layout (little-endian): magic `CMDL`, version u16, encoder u8, precision
//! u8 (32 or 64), feature_dim u32, hidden_dim u32, classes u32, block count
//! u32, then per block a u16-prefixed UTF-8 name with rows u32 and cols u32,
//! then every parameter as f64 in block order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Condition;

use super::network::{layout, EncoderKind};
use super::{Block, ClassifierError, Precision, TrainedModel, CLASSES};

pub const MAGIC: &[u8; 4] = b"CMDL";
pub const VERSION: u16 = 1;

impl TrainedModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.encoder.code()])?;
        w.write_all(&[match self.precision {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }])?;
        for v in [self.feature_dim, self.hidden_dim, CLASSES, self.blocks.len()] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for b in &self.blocks {
            w.write_all(&(b.name.len() as u16).to_le_bytes())?;
            w.write_all(b.name.as_bytes())?;
            w.write_all(&(b.rows as u32).to_le_bytes())?;
            w.write_all(&(b.cols as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ClassifierError> {
        let fmt = |m: String| ClassifierError::Format(m);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(fmt(format!("bad magic {magic:?}")));
        }
        let version = u16::from_le_bytes(read_n(&mut r)?);
        if version != VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let [code, prec] = read_n::<_, 2>(&mut r)?;
        let encoder = EncoderKind::from_code(code).ok_or_else(|| fmt(format!("unknown encoder code {code}")))?;
        let precision = match prec {
            32 => Precision::F32,
            64 => Precision::F64,
            other => return Err(fmt(format!("unknown precision {other}"))),
        };
        let feature_dim = read_u32(&mut r)?;
        let hidden_dim = read_u32(&mut r)?;
        let classes = read_u32(&mut r)?;
        if classes != CLASSES {
            return Err(fmt(format!("expected {CLASSES} classes, found {classes}")));
        }
        let n_blocks = read_u32(&mut r)?;
        let mut blocks = Vec::with_capacity(n_blocks.min(64));
        for _ in 0..n_blocks {
            let len = u16::from_le_bytes(read_n(&mut r)?) as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| fmt(e.to_string()))?;
            let rows = read_u32(&mut r)?;
            let cols = read_u32(&mut r)?;
            blocks.push(Block { name, rows, cols });
        }
        let expected = layout(
            encoder,
            super::Dims {
                input: feature_dim,
                hidden: hidden_dim,
                classes,
            },
        );
        if blocks != expected {
            return Err(fmt("parameter shapes do not match the encoder".into()));
        }
        let count: usize = blocks.iter().map(Block::size).sum();
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            params.push(f64::from_le_bytes(read_n(&mut r)?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(fmt(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            encoder,
            precision,
            feature_dim,
            hidden_dim,
            labels: Condition::ALL,
            blocks,
            params,
            log: Vec::new(),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_n<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], ClassifierError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize, ClassifierError> {
    Ok(u32::from_le_bytes(read_n(r)?) as usize)
}
