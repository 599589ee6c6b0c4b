//! JSON checkpoints. Floats are written in shortest round-trip form, so
//! `load(save(p)) == p` bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gate, RegressorParams, Target};
use crate::error::{Error, Result};

const FORMAT: &str = "dwa-regressor";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: RegressorParams,
    pub target: Option<Target>,
    /// Hash of everything the parameters were derived from.
    pub fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Weights {
    w_z: Vec<f64>,
    u_z: Vec<f64>,
    b_z: Vec<f64>,
    w_r: Vec<f64>,
    u_r: Vec<f64>,
    b_r: Vec<f64>,
    w_n: Vec<f64>,
    u_n: Vec<f64>,
    b_n: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    seed: u64,
    #[serde(default)]
    target: Option<Target>,
    fingerprint: String,
    weights: Weights,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        let block = |r| p.block(r).to_vec();
        let doc = Document {
            format: FORMAT.into(),
            version: VERSION,
            input_dim: p.input_dim(),
            hidden_dim: p.hidden_dim(),
            seed: p.seed(),
            target: self.target,
            fingerprint: self.fingerprint.clone(),
            weights: Weights {
                w_z: block(p.w_range(Gate::Update)),
                u_z: block(p.u_range(Gate::Update)),
                b_z: block(p.b_range(Gate::Update)),
                w_r: block(p.w_range(Gate::Reset)),
                u_r: block(p.u_range(Gate::Reset)),
                b_r: block(p.b_range(Gate::Reset)),
                w_n: block(p.w_range(Gate::Candidate)),
                u_n: block(p.u_range(Gate::Candidate)),
                b_n: block(p.b_range(Gate::Candidate)),
                w_out: block(p.w_out_range()),
                b_out: p.as_slice()[p.b_out_index()],
            },
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                doc.format, doc.version
            )));
        }
        let (d, h) = (doc.input_dim, doc.hidden_dim);
        let w = doc.weights;
        let shapes_ok = [&w.w_z, &w.w_r, &w.w_n].iter().all(|b| b.len() == h * d)
            && [&w.u_z, &w.u_r, &w.u_n].iter().all(|b| b.len() == h * h)
            && [&w.b_z, &w.b_r, &w.b_n, &w.w_out].iter().all(|b| b.len() == h);
        if !shapes_ok {
            return Err(Error::InvalidConfig("checkpoint weight blocks have wrong shapes".into()));
        }
        let data = [w.w_z, w.u_z, w.b_z, w.w_r, w.u_r, w.b_r, w.w_n, w.u_n, w.b_n, w.w_out, vec![w.b_out]].concat();
        Ok(Checkpoint {
            params: RegressorParams::from_flat(d, h, doc.seed, data)?,
            target: doc.target,
            fingerprint: doc.fingerprint,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingFile(path.into())),
        Err(e) => return Err(e.into()),
    };
    Checkpoint::from_json(&text).map_err(|e| Error::InvalidCheckpoint {
        file: path.into(),
        reason: e.to_string(),
    })
}
