//! Binary checkpoints. A checkpoint captures everything a resumed run
//! needs to continue bit-for-bit: configuration, agents, edge and flag
//! lists in their live order, diffusion snapshot, RNG position, clock and
//! counters. Derived structures (position maps, degree bins' sum trees,
//! the live-broadcast tree) are rebuilt on load and land in identical
//! states because the orders they are built from are preserved.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentId, AgentStore};
use crate::config::SimulationConfig;
use crate::diffusion::{DiffusionSnapshot, DiffusionState};
use crate::graph::Network;
use crate::rng::{RngState, SimRng};
use crate::sim::{Counters, SimulationState};

const MAGIC: &[u8; 8] = b"SOCSIMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} unsupported (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("checkpoint payload corrupt or truncated: {0}")]
    Corrupt(#[from] bincode::Error),
}

#[derive(Serialize, Deserialize)]
struct CheckpointData {
    config: SimulationConfig,
    time: f64,
    counters: Counters,
    events_since_prune: u64,
    pending_event_time: Option<f64>,
    rng: RngState,
    agents: Vec<Agent>,
    edges: Vec<(AgentId, AgentId)>,
    flagged: Vec<(AgentId, AgentId)>,
    bins: Vec<Vec<(u32, Vec<AgentId>)>>,
    diffusion: DiffusionSnapshot,
}

pub fn to_bytes(state: &SimulationState) -> Result<Vec<u8>, CheckpointError> {
    let data = CheckpointData {
        config: state.config.clone(),
        time: state.time,
        counters: state.counters,
        events_since_prune: state.events_since_prune,
        pending_event_time: state.pending_event_time,
        rng: state.rng.state(),
        agents: state.store.agents().to_vec(),
        edges: state.network.edges().to_vec(),
        flagged: state.network.flagged_pairs().to_vec(),
        bins: state.network.export_bins(),
        diffusion: state.diffusion.export(),
    };
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bincode::serialize_into(&mut bytes, &data)?;
    Ok(bytes)
}

pub fn from_bytes(bytes: &[u8]) -> Result<SimulationState, CheckpointError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let data: CheckpointData = bincode::deserialize(&bytes[MAGIC.len() + 4..])?;

    let store = AgentStore::from_agents(data.agents, data.config.profiles.len());
    let network = Network::from_parts(
        data.config.follow.degree_flavor,
        data.edges,
        data.flagged,
        data.bins,
    );
    let diffusion = DiffusionState::from_snapshot(data.diffusion);
    Ok(SimulationState {
        config: data.config,
        rng: SimRng::restore(data.rng),
        time: data.time,
        store,
        network,
        diffusion,
        counters: data.counters,
        events_since_prune: data.events_since_prune,
        pending_event_time: data.pending_event_time,
    })
}

pub fn save(state: &SimulationState, path: &Path) -> Result<(), CheckpointError> {
    let bytes = to_bytes(state)?;
    File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SimulationState, CheckpointError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
