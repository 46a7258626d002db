//! Versioned binary checkpoints with a JSON metadata sidecar.
//!
//! Layout (little endian): magic `SFS1`, `u32` version, `u32` network count,
//! then per network: `u32` name length, name bytes, `u8` hidden and output
//! activation codes, `u32` layer count, `u32` layer sizes, `u64` parameter
//! count and the `f64` parameters (per layer: weights row-major, then biases).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::ObsScale;
use super::nn::Activation;
use super::{Agent, Algorithm, RlError, TrainConfig};

pub const MAGIC: &[u8; 4] = b"SFS1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub step: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
    pub log_alpha: Option<f64>,
    pub obs_scale: ObsScale,
}

/// Path of the metadata sidecar next to a checkpoint.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
    }
}

fn act_from(code: u8) -> Result<Activation, RlError> {
    match code {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Identity),
        c => Err(RlError::Checkpoint(format!("unknown activation code {c}"))),
    }
}

pub fn encode(agent: &Agent) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let nets = agent.networks();
    out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for (name, net) in nets {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(act_code(net.hidden));
        out.push(act_code(net.output));
        out.extend_from_slice(&(net.sizes.len() as u32).to_le_bytes());
        for &s in &net.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        let flat = net.flatten();
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], RlError> {
        if self.bytes.len() < n {
            return Err(RlError::Checkpoint("unexpected end of file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, RlError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, RlError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, RlError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, RlError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Reads the version field without decoding the networks.
pub fn peek_version(bytes: &[u8]) -> Result<u32, RlError> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        return Err(RlError::Checkpoint("bad magic bytes".into()));
    }
    r.u32()
}

/// Overwrites the agent's networks from an encoded checkpoint.
pub fn decode_into(bytes: &[u8], agent: &mut Agent) -> Result<(), RlError> {
    let version = peek_version(bytes)?;
    if version != CHECKPOINT_VERSION {
        return Err(RlError::VersionMismatch {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let mut r = Reader { bytes: &bytes[8..] };
    let count = r.u32()? as usize;
    let mut nets = agent.networks_mut();
    if count != nets.len() {
        return Err(RlError::Checkpoint(format!("expected {} networks, found {count}", nets.len())));
    }
    for (name, net) in nets.iter_mut() {
        let len = r.u32()? as usize;
        let found = String::from_utf8_lossy(r.take(len)?).into_owned();
        if found != *name {
            return Err(RlError::Checkpoint(format!("expected network `{name}`, found `{found}`")));
        }
        let (hidden, output) = (act_from(r.u8()?)?, act_from(r.u8()?)?);
        let layers = r.u32()? as usize;
        let sizes = (0..layers).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        if sizes != net.sizes || hidden != net.hidden || output != net.output {
            return Err(RlError::Checkpoint(format!("network `{name}` has shape {sizes:?}, expected {:?}", net.sizes)));
        }
        let n = r.u64()? as usize;
        if n != net.param_count() {
            return Err(RlError::Checkpoint(format!("network `{name}` parameter count mismatch")));
        }
        let flat = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        net.set_flat(&flat);
    }
    if !r.bytes.is_empty() {
        return Err(RlError::Checkpoint("trailing bytes".into()));
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, agent: &Agent, meta: &CheckpointMeta) -> Result<(), RlError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path)?.write_all(&encode(agent))?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Loads an agent and its metadata. Optimizer state is not stored, so a
/// loaded agent is meant for evaluation or as a warm start.
pub fn load_checkpoint(path: &Path) -> Result<(Agent, CheckpointMeta), RlError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let version = peek_version(&bytes)?;
    if version != CHECKPOINT_VERSION {
        return Err(RlError::VersionMismatch {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if meta.format_version != version {
        return Err(RlError::VersionMismatch {
            found: meta.format_version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let cfg = TrainConfig {
        hidden: meta.hidden.clone(),
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = Agent::new(meta.algorithm, meta.obs_dim, meta.act_dim, &cfg, &mut rng);
    decode_into(&bytes, &mut agent)?;
    if let (Agent::Sac(s), Some(la)) = (&mut agent, meta.log_alpha) {
        s.log_alpha = la;
    }
    Ok((agent, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(agent: &Agent) -> CheckpointMeta {
        CheckpointMeta {
            format_version: CHECKPOINT_VERSION,
            algorithm: agent.algorithm(),
            seed: 7,
            step: 12,
            obs_dim: 13,
            act_dim: 14,
            hidden: vec![64, 64],
            log_alpha: agent.log_alpha(),
            obs_scale: ObsScale::default(),
        }
    }

    #[test]
    fn round_trip_both_algorithms() {
        let dir = tempfile::tempdir().unwrap();
        for alg in [Algorithm::Sac, Algorithm::Td3] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let agent = Agent::new(alg, 13, 14, &TrainConfig::default(), &mut rng);
            let path = dir.path().join(format!("{alg}.sfs"));
            save_checkpoint(&path, &agent, &meta(&agent)).unwrap();
            let (back, m) = load_checkpoint(&path).unwrap();
            assert_eq!(m, meta(&agent));
            for ((n1, a), (n2, b)) in agent.networks().into_iter().zip(back.networks()) {
                assert_eq!(n1, n2);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Agent::new(Algorithm::Sac, 13, 14, &TrainConfig::default(), &mut rng);
        let path = dir.path().join("a.sfs");
        save_checkpoint(&path, &agent, &meta(&agent)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(RlError::VersionMismatch { found: 99, .. })));
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(RlError::Checkpoint(_))));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = Agent::new(Algorithm::Td3, 3, 2, &TrainConfig::default(), &mut rng);
        let bytes = encode(&agent);
        assert!(decode_into(&bytes[..bytes.len() - 3], &mut agent).is_err());
        assert!(decode_into(&bytes, &mut agent).is_ok());
    }
}
