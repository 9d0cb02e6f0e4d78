use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::run::{Agent, FrozenRun};
use super::{HarnessError, Result};
use crate::env::{ArmState, Point};
use crate::habitual::{ActorCritic, Critic};
use crate::nn::Mlp;
use crate::planning::InternalModels;

pub const METADATA_FILE: &str = "metadata.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub l1: f64,
    pub l2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub origin: Point,
    pub training_target: Option<Point>,
    /// Hex sha256 over every network file, in file-name order.
    pub sha256: String,
    pub config: ExperimentConfig,
}

/// Serialised bytes of every network, keyed by file name.
fn network_files(agent: &Agent) -> Vec<(&'static str, Vec<u8>)> {
    let critic_bytes = |c: &Critic| {
        let mut buf = Vec::new();
        c.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    };
    let ac = &agent.habitual;
    let mut files = vec![
        ("actor.nn", ac.actor.to_bytes()),
        ("actor_target.nn", ac.actor_target.to_bytes()),
        ("critic.nn", critic_bytes(&ac.critic)),
        ("critic_target.nn", critic_bytes(&ac.critic_target)),
    ];
    if let Some(m) = &agent.models {
        files.push(("forward.nn", m.forward_net.to_bytes()));
        files.push(("inverse.nn", m.inverse_net.to_bytes()));
    }
    files
}

/// Hex sha256 over all network parameters of the agent.
pub fn agent_hash(agent: &Agent) -> String {
    let mut hasher = Sha256::new();
    for (name, bytes) in network_files(agent) {
        hasher.update(name.as_bytes());
        hasher.update(&bytes);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes the network files and metadata into `dir`, creating it.
pub fn save_checkpoint(
    dir: &Path,
    run: &FrozenRun,
    cfg: &ExperimentConfig,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, bytes) in network_files(&run.agent) {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        paths.push(path);
    }
    let meta = Metadata {
        seed: run.seed,
        l1: run.arm.l1,
        l2: run.arm.l2,
        alpha: run.arm.alpha,
        beta: run.arm.beta,
        origin: run.arm.origin,
        training_target: run.training_target,
        sha256: agent_hash(&run.agent),
        config: cfg.clone(),
    };
    let path = dir.join(METADATA_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    out.write_all(toml::to_string(&meta)?.as_bytes())?;
    out.flush()?;
    paths.push(path);
    Ok(paths)
}

fn read_mlp(dir: &Path, name: &str) -> Result<Mlp> {
    Ok(Mlp::read_from(&mut BufReader::new(File::open(
        dir.join(name),
    )?))?)
}

fn read_critic(dir: &Path, name: &str) -> Result<Critic> {
    Ok(Critic::read_from(&mut BufReader::new(File::open(
        dir.join(name),
    )?))?)
}

/// Loads a checkpoint and checks it against its recorded hash.
pub fn load_checkpoint(dir: &Path) -> Result<(FrozenRun, ExperimentConfig)> {
    let meta: Metadata = toml::from_str(&std::fs::read_to_string(dir.join(METADATA_FILE))?)?;
    let cfg = meta.config;
    let habitual = ActorCritic {
        actor: read_mlp(dir, "actor.nn")?,
        actor_target: read_mlp(dir, "actor_target.nn")?,
        critic: read_critic(dir, "critic.nn")?,
        critic_target: read_critic(dir, "critic_target.nn")?,
        cfg: cfg.habitual_config(),
    };
    let models = if cfg.uses_internal_models() {
        Some(InternalModels {
            forward_net: read_mlp(dir, "forward.nn")?,
            inverse_net: read_mlp(dir, "inverse.nn")?,
            cfg: cfg.planning_config(),
        })
    } else {
        None
    };
    let agent = Agent {
        habitual,
        models,
        arbitrator: cfg.arbitrator_config(),
    };
    let hash = agent_hash(&agent);
    if hash != meta.sha256 {
        return Err(HarnessError::Checkpoint(format!(
            "hash mismatch in {}: expected {}, found {hash}",
            dir.display(),
            meta.sha256
        )));
    }
    let run = FrozenRun {
        seed: meta.seed,
        agent,
        arm: ArmState {
            alpha: meta.alpha,
            beta: meta.beta,
            l1: meta.l1,
            l2: meta.l2,
            origin: meta.origin,
        },
        training_target: meta.training_target,
    };
    Ok((run, cfg))
}
