//! Versioned binary checkpoint: magic, resolved-config echo, model shape
//! hash, then the flattened parameter vector as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::CliError;
use crate::train::Model;

const MAGIC: &[u8; 8] = b"QPNCKPT1";

/// Hash of everything that determines the parameter vector layout.
pub fn shape_hash(model: &Model) -> u64 {
    let mut h = Sha256::new();
    h.update(model.kind.as_str().as_bytes());
    h.update(model.problem.dim.to_le_bytes());
    h.update(model.config.n_qubits.to_le_bytes());
    h.update(model.config.n_layers.to_le_bytes());
    h.update(format!("{:?}", model.config.entangler).as_bytes());
    h.update(format!("{:?}", model.config.fnn_hidden).as_bytes());
    // hash the effective aux depth so the echoed config (defaults filled)
    // yields the same shape as the original
    h.update(
        model
            .config
            .aux_layers
            .unwrap_or(model.config.n_layers)
            .to_le_bytes(),
    );
    h.update(format!("{:?}", model.config.mlp_hidden).as_bytes());
    h.update(model.param_count().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn write_checkpoint(
    path: &Path,
    config: &ExperimentConfig,
    model: &Model,
    params: &[f64],
) -> Result<(), CliError> {
    if params.len() != model.param_count() {
        return Err(CliError::Checkpoint(format!(
            "parameter vector length {} does not match the model's {}",
            params.len(),
            model.param_count()
        )));
    }
    let config_bytes = serde_json::to_vec(config)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(config_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&config_bytes)?;
    w.write_all(&shape_hash(model).to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub shape_hash: u64,
    pub params: Vec<f64>,
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CliError::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let mut len4 = [0u8; 4];
    r.read_exact(&mut len4)?;
    let config_len = u32::from_le_bytes(len4) as usize;
    let mut config_bytes = vec![0u8; config_len];
    r.read_exact(&mut config_bytes)?;
    let config: ExperimentConfig = serde_json::from_slice(&config_bytes)?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let shape = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    let mut params = Vec::with_capacity(count);
    let mut f8 = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut f8)?;
        params.push(f64::from_le_bytes(f8));
    }
    Ok(Checkpoint {
        config,
        shape_hash: shape,
        params,
    })
}

/// Rebuilds the model a checkpoint was written for, verifying the shape hash.
pub fn restore_model(ck: &Checkpoint) -> Result<(Model, super::config::Resolved), CliError> {
    let resolved = ck.config.resolve()?;
    let model = crate::train::build_model(&resolved.problem, &resolved.model, resolved.seed)?;
    if shape_hash(&model) != ck.shape_hash {
        return Err(CliError::Checkpoint(
            "checkpoint/config shape mismatch (was the config echo edited?)".into(),
        ));
    }
    if ck.params.len() != model.param_count() {
        return Err(CliError::Checkpoint(format!(
            "checkpoint has {} parameters, model wants {}",
            ck.params.len(),
            model.param_count()
        )));
    }
    Ok((model, resolved))
}
