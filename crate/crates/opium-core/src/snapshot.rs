//! Versioned JSON persistence for hidden layers and solver states.
//!
//! Every file is a single JSON object with a fixed envelope: a format tag,
//! a version number, the payload kind, and the payload itself. Loading
//! routes the payload through the same constructors as live states, so a
//! tampered or truncated file fails with a structured error instead of
//! producing a silently inconsistent solver.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::elm::{Activation, HiddenLayer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solvers::{DynamicState, GrevilleState, LightState, OnlineSolver, OpiumState};

pub const SNAPSHOT_FORMAT: &str = "elm-readout-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Anything the crate can persist and restore.
#[derive(Clone, Debug)]
pub enum Snapshot {
    HiddenLayer(HiddenLayer),
    Opium(OpiumState),
    Greville(GrevilleState),
    Light(LightState),
    Dynamic(DynamicState),
}

impl Snapshot {
    fn kind(&self) -> &'static str {
        match self {
            Snapshot::HiddenLayer(_) => "hidden-layer",
            Snapshot::Opium(_) => "opium",
            Snapshot::Greville(_) => "greville",
            Snapshot::Light(_) => "light",
            Snapshot::Dynamic(_) => "dynamic",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    kind: String,
    payload: Value,
}

#[derive(Serialize, Deserialize)]
struct HiddenLayerPayload {
    input_dim: usize,
    hidden_dim: usize,
    activation: Activation,
    seed: u64,
    weights: Matrix,
}

#[derive(Serialize, Deserialize)]
struct OpiumPayload {
    epsilon: f64,
    updates: u64,
    weights: Matrix,
    theta: Matrix,
}

#[derive(Serialize, Deserialize)]
struct GrevillePayload {
    c_tol: f64,
    updates: u64,
    weights: Matrix,
    theta: Matrix,
    phi: Matrix,
}

#[derive(Serialize, Deserialize)]
struct LightPayload {
    g: f64,
    updates: u64,
    weights: Matrix,
}

#[derive(Serialize, Deserialize)]
struct DynamicPayload {
    epsilon: f64,
    alpha: f64,
    updates: u64,
    weights: Matrix,
    theta: Matrix,
}

fn encode_payload(snapshot: &Snapshot) -> Result<Value> {
    let value = match snapshot {
        Snapshot::HiddenLayer(layer) => serde_json::to_value(HiddenLayerPayload {
            input_dim: layer.input_dim(),
            hidden_dim: layer.hidden_dim(),
            activation: layer.activation(),
            seed: layer.seed(),
            weights: layer.weights().clone(),
        }),
        Snapshot::Opium(s) => serde_json::to_value(OpiumPayload {
            epsilon: s.epsilon(),
            updates: s.updates(),
            weights: s.weights().clone(),
            theta: s.theta().clone(),
        }),
        Snapshot::Greville(s) => serde_json::to_value(GrevillePayload {
            c_tol: s.c_tol(),
            updates: s.updates(),
            weights: s.weights().clone(),
            theta: s.theta().clone(),
            phi: s.phi().clone(),
        }),
        Snapshot::Light(s) => serde_json::to_value(LightPayload {
            g: s.g(),
            updates: s.updates(),
            weights: s.weights().clone(),
        }),
        Snapshot::Dynamic(s) => serde_json::to_value(DynamicPayload {
            epsilon: s.epsilon(),
            alpha: s.alpha(),
            updates: s.updates(),
            weights: s.weights().clone(),
            theta: s.theta().clone(),
        }),
    };
    value.map_err(|e| Error::Snapshot(format!("failed to encode payload: {e}")))
}

fn decode_payload(kind: &str, payload: Value) -> Result<Snapshot> {
    fn parse<T: serde::de::DeserializeOwned>(kind: &str, payload: Value) -> Result<T> {
        serde_json::from_value(payload)
            .map_err(|e| Error::Snapshot(format!("invalid {kind} payload: {e}")))
    }
    match kind {
        "hidden-layer" => {
            let p: HiddenLayerPayload = parse(kind, payload)?;
            if p.weights.shape() != (p.hidden_dim, p.input_dim + 1) {
                return Err(Error::Snapshot(format!(
                    "hidden-layer weights are {}x{}, expected {}x{}",
                    p.weights.rows(),
                    p.weights.cols(),
                    p.hidden_dim,
                    p.input_dim + 1
                )));
            }
            Ok(Snapshot::HiddenLayer(HiddenLayer::from_parts(
                p.weights,
                p.activation,
                p.seed,
            )?))
        }
        "opium" => {
            let p: OpiumPayload = parse(kind, payload)?;
            Ok(Snapshot::Opium(OpiumState::from_parts(
                p.weights, p.theta, p.epsilon, p.updates,
            )?))
        }
        "greville" => {
            let p: GrevillePayload = parse(kind, payload)?;
            Ok(Snapshot::Greville(GrevilleState::from_parts(
                p.weights, p.theta, p.phi, p.c_tol, p.updates,
            )?))
        }
        "light" => {
            let p: LightPayload = parse(kind, payload)?;
            Ok(Snapshot::Light(LightState::from_parts(p.weights, p.g, p.updates)?))
        }
        "dynamic" => {
            let p: DynamicPayload = parse(kind, payload)?;
            Ok(Snapshot::Dynamic(DynamicState::from_parts(
                p.weights, p.theta, p.epsilon, p.alpha, p.updates,
            )?))
        }
        other => Err(Error::Snapshot(format!("unknown snapshot kind '{other}'"))),
    }
}

/// Serialises a snapshot to its JSON text form.
pub fn to_json(snapshot: &Snapshot) -> Result<String> {
    let envelope = Envelope {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        kind: snapshot.kind().to_string(),
        payload: encode_payload(snapshot)?,
    };
    serde_json::to_string(&envelope)
        .map_err(|e| Error::Snapshot(format!("failed to encode snapshot: {e}")))
}

/// Parses and validates a snapshot from JSON text.
pub fn from_json(text: &str) -> Result<Snapshot> {
    let envelope: Envelope = serde_json::from_str(text)
        .map_err(|e| Error::Snapshot(format!("not a valid snapshot file: {e}")))?;
    if envelope.format != SNAPSHOT_FORMAT {
        return Err(Error::Snapshot(format!(
            "format tag '{}' is not '{SNAPSHOT_FORMAT}'",
            envelope.format
        )));
    }
    if envelope.version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "version {} is not supported (this build reads version {SNAPSHOT_VERSION})",
            envelope.version
        )));
    }
    decode_payload(&envelope.kind, envelope.payload)
}

pub fn save(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let text = to_json(snapshot)?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    from_json(&text)
}
