//! Binary checkpoint format: magic + version header, the model config as
//! key=value text, named f32 parameter tables for the model and the
//! discriminator, and optional Adam state. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use tensor_core::AdamState;

use crate::config::ModelConfig;
use crate::error::{GformerError, Result};
use crate::params::{ParamEntry, ParamSet};

const MAGIC: &[u8; 4] = b"GFCK";
const VERSION: u32 = 1;

pub struct OptimizerSnapshot {
    pub lr: f32,
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl OptimizerSnapshot {
    pub fn of(state: &AdamState<f32>) -> OptimizerSnapshot {
        OptimizerSnapshot {
            lr: state.lr,
            step: state.step,
            m: state.m.clone(),
            v: state.v.clone(),
        }
    }

    pub fn restore(&self) -> AdamState<f32> {
        let mut s = AdamState::new(self.lr, &self.m.iter().map(|m| m.len()).collect::<Vec<_>>());
        s.step = self.step;
        s.m = self.m.clone();
        s.v = self.v.clone();
        s
    }
}

pub struct Checkpoint {
    pub config: ModelConfig,
    pub step: u64,
    pub model: ParamSet<f32>,
    pub disc: ParamSet<f32>,
    pub opt_model: Option<OptimizerSnapshot>,
    pub opt_disc: Option<OptimizerSnapshot>,
}

fn w_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_bytes(w: &mut impl Write, b: &[u8]) -> Result<()> {
    w_u32(w, b.len() as u32)?;
    w.write_all(b)?;
    Ok(())
}

fn w_f32s(w: &mut impl Write, data: &[f32]) -> Result<()> {
    w_u32(w, data.len() as u32)?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Rd<R: Read> {
    inner: R,
}

impl<R: Read> Rd<R> {
    fn err(what: &str) -> GformerError {
        GformerError::Checkpoint(format!("truncated or corrupt checkpoint ({what})"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(|_| Self::err(what))?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b).map_err(|_| Self::err(what))?;
        Ok(u64::from_le_bytes(b))
    }

    fn bytes(&mut self, what: &str) -> Result<Vec<u8>> {
        let n = self.u32(what)? as usize;
        if n > 1 << 30 {
            return Err(Self::err(what));
        }
        let mut b = vec![0u8; n];
        self.inner.read_exact(&mut b).map_err(|_| Self::err(what))?;
        Ok(b)
    }

    fn f32s(&mut self, what: &str) -> Result<Vec<f32>> {
        let n = self.u32(what)? as usize;
        if n > 1 << 28 {
            return Err(Self::err(what));
        }
        let mut b = vec![0u8; n * 4];
        self.inner.read_exact(&mut b).map_err(|_| Self::err(what))?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

fn write_param_table(w: &mut impl Write, set: &ParamSet<f32>) -> Result<()> {
    w_u32(w, set.len() as u32)?;
    for e in set.entries() {
        w_bytes(w, e.name.as_bytes())?;
        w_u32(w, e.shape.len() as u32)?;
        for &d in &e.shape {
            w_u32(w, d as u32)?;
        }
        w_f32s(w, &e.data)?;
    }
    Ok(())
}

fn read_param_table(r: &mut Rd<impl Read>) -> Result<ParamSet<f32>> {
    let count = r.u32("param count")? as usize;
    if count > 1 << 20 {
        return Err(Rd::<File>::err("param count"));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name = String::from_utf8(r.bytes("param name")?)
            .map_err(|_| Rd::<File>::err("param name utf8"))?;
        let ndims = r.u32("ndims")? as usize;
        if ndims > 8 {
            return Err(Rd::<File>::err("ndims"));
        }
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(r.u32("dim")? as usize);
        }
        let data = r.f32s("param data")?;
        if shape.iter().product::<usize>() != data.len() {
            return Err(GformerError::Checkpoint(format!(
                "parameter {name}: shape {shape:?} does not cover {} scalars",
                data.len()
            )));
        }
        entries.push(ParamEntry { name, shape, data });
    }
    Ok(ParamSet::from_entries(entries))
}

fn write_opt(w: &mut impl Write, opt: &Option<OptimizerSnapshot>) -> Result<()> {
    match opt {
        None => w.write_all(&[0u8])?,
        Some(o) => {
            w.write_all(&[1u8])?;
            w.write_all(&o.lr.to_le_bytes())?;
            w_u64(w, o.step)?;
            w_u32(w, o.m.len() as u32)?;
            for (m, v) in o.m.iter().zip(&o.v) {
                w_f32s(w, m)?;
                w_f32s(w, v)?;
            }
        }
    }
    Ok(())
}

fn read_opt(r: &mut Rd<impl Read>) -> Result<Option<OptimizerSnapshot>> {
    let mut flag = [0u8; 1];
    r.inner
        .read_exact(&mut flag)
        .map_err(|_| Rd::<File>::err("optimizer flag"))?;
    if flag[0] == 0 {
        return Ok(None);
    }
    let mut lrb = [0u8; 4];
    r.inner
        .read_exact(&mut lrb)
        .map_err(|_| Rd::<File>::err("optimizer lr"))?;
    let lr = f32::from_le_bytes(lrb);
    let step = r.u64("optimizer step")?;
    let n = r.u32("optimizer slots")? as usize;
    let mut m = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        m.push(r.f32s("optimizer m")?);
        v.push(r.f32s("optimizer v")?);
    }
    Ok(Some(OptimizerSnapshot { lr, step, m, v }))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w_u32(&mut w, VERSION)?;
    w_bytes(&mut w, ckpt.config.to_kv().as_bytes())?;
    w_u64(&mut w, ckpt.step)?;
    write_param_table(&mut w, &ckpt.model)?;
    write_param_table(&mut w, &ckpt.disc)?;
    write_opt(&mut w, &ckpt.opt_model)?;
    write_opt(&mut w, &ckpt.opt_disc)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = Rd {
        inner: BufReader::new(File::open(path)?),
    };
    let mut magic = [0u8; 4];
    r.inner
        .read_exact(&mut magic)
        .map_err(|_| Rd::<File>::err("magic"))?;
    if &magic != MAGIC {
        return Err(GformerError::Checkpoint(format!(
            "bad magic {magic:?}, not a checkpoint"
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(GformerError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let kv = String::from_utf8(r.bytes("config")?)
        .map_err(|_| Rd::<File>::err("config utf8"))?;
    let config = ModelConfig::from_kv(&kv)?;
    let step = r.u64("step")?;
    let model = read_param_table(&mut r)?;
    let disc = read_param_table(&mut r)?;
    let opt_model = read_opt(&mut r)?;
    let opt_disc = read_opt(&mut r)?;
    Ok(Checkpoint {
        config,
        step,
        model,
        disc,
        opt_model,
        opt_disc,
    })
}
