//! Roadnet and flow file formats.
//!
//! Roadnet: a JSON object `{rows, cols, lane_length_m, speed_limit_mps}`;
//! the grid topology is derived from it, never listed.
//! Flow: a JSON array of `{depart_s, route: [road ids]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FlowSpec, FlowVehicle, NetError, Network, RoadId};

/// On-disk roadnet description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadnetSpec {
    pub rows: usize,
    pub cols: usize,
    pub lane_length_m: f64,
    pub speed_limit_mps: f64,
}

fn read(path: &Path) -> Result<String, NetError> {
    fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), NetError> {
    fs::write(path, text).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a roadnet file and builds the validated grid network.
pub fn load_roadnet(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    let text = read(path)?;
    let spec: RoadnetSpec = serde_json::from_str(&text).map_err(|e| NetError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    Network::grid(spec.rows, spec.cols, spec.lane_length_m, spec.speed_limit_mps)
}

/// Writes the roadnet description a network was built from.
pub fn save_roadnet(net: &Network, path: impl AsRef<Path>) -> Result<(), NetError> {
    let spec = RoadnetSpec {
        rows: net.grid_rows,
        cols: net.grid_cols,
        lane_length_m: net.lane_length,
        speed_limit_mps: net.speed_limit,
    };
    let text = serde_json::to_string_pretty(&spec).expect("roadnet spec serializes");
    write(path.as_ref(), &text)
}

#[derive(Serialize, Deserialize)]
struct FlowRow {
    depart_s: f64,
    route: Vec<usize>,
}

/// Loads a flow file and validates it against the network.
pub fn load_flow(path: impl AsRef<Path>, net: &Network) -> Result<FlowSpec, NetError> {
    let path = path.as_ref();
    let text = read(path)?;
    let rows: Vec<FlowRow> = serde_json::from_str(&text).map_err(|e| NetError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let flow = FlowSpec {
        vehicles: rows
            .into_iter()
            .map(|r| FlowVehicle {
                depart_s: r.depart_s,
                route: r.route.into_iter().map(RoadId).collect(),
            })
            .collect(),
    };
    flow.validate(net)?;
    Ok(flow)
}

/// Serializes a flow to JSON. Output is byte-stable for a given flow.
pub fn flow_to_string(flow: &FlowSpec) -> String {
    let rows: Vec<FlowRow> = flow
        .vehicles
        .iter()
        .map(|v| FlowRow {
            depart_s: v.depart_s,
            route: v.route.iter().map(|r| r.0).collect(),
        })
        .collect();
    serde_json::to_string(&rows).expect("flow serializes")
}

pub fn save_flow(flow: &FlowSpec, path: impl AsRef<Path>) -> Result<(), NetError> {
    write(path.as_ref(), &flow_to_string(flow))
}
