//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content                          |
//! |-------|----------------------------------|
//! | 8     | magic `FEELMLP1`                 |
//! | 8     | input_dim (u64)                  |
//! | 8     | hidden_dim (u64)                 |
//! | 8     | num_classes (u64)                |
//! | 8     | model version (u64)              |
//! | 8 * n | parameters as IEEE-754 f64 bits  |
//!
//! `n` follows from the dims, so floats round-trip bit for bit.

use std::io::{Read, Write};

use super::model::{GlobalModel, ModelDims};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FEELMLP1";

pub fn write_checkpoint<W: Write>(model: &GlobalModel, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    for v in [model.dims.input_dim, model.dims.hidden_dim, model.dims.num_classes] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    out.write_all(&model.version.to_le_bytes())?;
    for p in &model.params {
        out.write_all(&p.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(|_| Error::Truncated(format!("checkpoint ends before {what}")))?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<GlobalModel> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| Error::Truncated("checkpoint header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::InvalidInput("not a model checkpoint".into()));
    }
    let input_dim = read_u64(&mut input, "input_dim")? as usize;
    let hidden_dim = read_u64(&mut input, "hidden_dim")? as usize;
    let num_classes = read_u64(&mut input, "num_classes")? as usize;
    let dims = ModelDims::new(input_dim, hidden_dim, num_classes)?;
    let version = read_u64(&mut input, "version")?;
    let params = (0..dims.param_count())
        .map(|i| read_u64(&mut input, &format!("parameter {i}")).map(f64::from_bits))
        .collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::InvalidInput("trailing bytes after checkpoint".into()));
    }
    GlobalModel::from_params(dims, params, version)
}
