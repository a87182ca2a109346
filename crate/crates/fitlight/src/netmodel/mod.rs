//! Static road-network model for rectangular grids of signalized intersections.
//!
//! Every intersection has four approaches (one per compass side) with three
//! arrival lanes each (left / straight / right by intended turn), and twelve
//! departure lanes mirroring them. A directed road pairs one arrival lane with
//! the departure lane of the same turn class on its exit side. Eight control
//! phases each authorize two non-conflicting non-right movements; the four
//! right-turn movements are authorized under every phase.

mod files;
mod flowgen;

pub use files::{flow_to_string, load_flow, load_roadnet, save_flow, save_roadnet, RoadnetSpec};
pub use flowgen::gen_synthetic_flow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of arrival (and departure) lanes per intersection.
pub const LANES_PER_INTERSECTION: usize = 12;
/// Number of control phases per intersection.
pub const NUM_PHASES: usize = 8;
/// Number of directed roads (movements) per intersection.
pub const NUM_MOVEMENTS: usize = 12;
/// Lanes per road.
pub const LANES_PER_ROAD: usize = 3;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid roadnet: {0}")]
    Validation(String),
    #[error("invalid flow: {0}")]
    FlowValidation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Compass heading of travel along a road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn opposite(self) -> Heading {
        match self {
            Heading::North => Heading::South,
            Heading::East => Heading::West,
            Heading::South => Heading::North,
            Heading::West => Heading::East,
        }
    }

    /// Heading after a left turn.
    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    /// Heading after a right turn.
    pub fn right(self) -> Heading {
        self.left().opposite()
    }
}

/// Approach side of an intersection, named by the side vehicles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::North,
        Approach::East,
        Approach::South,
        Approach::West,
    ];

    pub fn index(self) -> usize {
        match self {
            Approach::North => 0,
            Approach::East => 1,
            Approach::South => 2,
            Approach::West => 3,
        }
    }

    /// Heading of traffic arriving from this side.
    pub fn heading(self) -> Heading {
        match self {
            Approach::North => Heading::South,
            Approach::East => Heading::West,
            Approach::South => Heading::North,
            Approach::West => Heading::East,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Left, Turn::Straight, Turn::Right];

    pub fn index(self) -> usize {
        match self {
            Turn::Left => 0,
            Turn::Straight => 1,
            Turn::Right => 2,
        }
    }

    pub fn from_index(i: usize) -> Turn {
        Turn::ALL[i]
    }

    /// Turn relating an incoming heading to an outgoing heading, if one exists
    /// (a reversal is not a movement).
    pub fn between(incoming: Heading, outgoing: Heading) -> Option<Turn> {
        if outgoing == incoming {
            Some(Turn::Straight)
        } else if outgoing == incoming.left() {
            Some(Turn::Left)
        } else if outgoing == incoming.right() {
            Some(Turn::Right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntersectionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoadId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LaneId(pub usize);

/// One end of a road: an intersection or the outside world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Intersection(IntersectionId),
    Outside,
}

/// A one-way bundle of three lanes between two endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: RoadId,
    pub from: Endpoint,
    pub to: Endpoint,
    pub heading: Heading,
    /// Lane ids in turn order (left, straight, right). The turn classifies
    /// the movement at the downstream intersection; for sink roads it is
    /// positional only.
    pub lanes: [LaneId; LANES_PER_ROAD],
}

impl Road {
    pub fn lane(&self, turn: Turn) -> LaneId {
        self.lanes[turn.index()]
    }

    pub fn is_sink(&self) -> bool {
        self.to == Endpoint::Outside
    }

    pub fn is_source(&self) -> bool {
        self.from == Endpoint::Outside
    }
}

/// An (arrival lane, departure lane) pair crossing an intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedRoad {
    pub approach: Approach,
    pub turn: Turn,
    pub arrival_lane: LaneId,
    pub departure_lane: LaneId,
    /// Road the departure lane belongs to.
    pub exit_road: RoadId,
}

/// A control phase authorizing two non-right movements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub id: usize,
    /// Directed-road indices (0..12) of the two controlled movements.
    pub movements: [usize; 2],
}

/// Movement index within an intersection's directed-road list.
pub fn movement_index(approach: Approach, turn: Turn) -> usize {
    approach.index() * 3 + turn.index()
}

/// The fixed eight-phase table shared by every intersection: the four
/// two-approach pairings (opposing straights, opposing lefts) followed by the
/// four single-approach straight+left combinations.
pub const PHASE_TABLE: [[usize; 2]; NUM_PHASES] = [
    [1, 7],  // north straight + south straight
    [4, 10], // east straight + west straight
    [0, 6],  // north left + south left
    [3, 9],  // east left + west left
    [1, 0],  // north straight + north left
    [7, 6],  // south straight + south left
    [4, 3],  // east straight + east left
    [10, 9], // west straight + west left
];

/// Movement indices of the four right turns (authorized under every phase).
pub const RIGHT_TURN_MOVEMENTS: [usize; 4] = [2, 5, 8, 11];

/// Whether movement `m` is authorized under phase `p`.
pub fn movement_authorized(p: usize, m: usize) -> bool {
    assert!(p < NUM_PHASES, "phase index {p} out of range");
    m % 3 == Turn::Right.index() || PHASE_TABLE[p].contains(&m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: IntersectionId,
    pub row: usize,
    pub col: usize,
    /// Twelve directed roads ordered by (approach, turn).
    pub directed_roads: Vec<DirectedRoad>,
    /// Eight phases; `phase_table[p].movements` indexes into `directed_roads`.
    pub phase_table: Vec<Phase>,
    /// Phase in effect before any controller decision.
    pub current_phase: usize,
}

/// An immutable grid road network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Lane length in meters.
    pub lane_length: f64,
    /// Speed limit in meters per second.
    pub speed_limit: f64,
    pub intersections: Vec<Intersection>,
    pub roads: Vec<Road>,
    /// Incoming road per (intersection, approach).
    pub incoming: Vec<[RoadId; 4]>,
    /// Outgoing road per (intersection, exit side).
    pub outgoing: Vec<[RoadId; 4]>,
}

impl Network {
    /// Builds and validates a rows x cols grid network.
    pub fn grid(rows: usize, cols: usize, lane_length: f64, speed_limit: f64) -> Result<Network, NetError> {
        if rows == 0 || cols == 0 {
            return Err(NetError::Validation("grid must have at least one row and one column".into()));
        }
        if !(lane_length > 0.0) || !(speed_limit > 0.0) {
            return Err(NetError::Validation("lane length and speed limit must be positive".into()));
        }

        let n = rows * cols;
        let neighbor = |r: usize, c: usize, side: Approach| -> Endpoint {
            let rc = match side {
                Approach::North => (r.checked_sub(1), Some(c)),
                Approach::South => (if r + 1 < rows { Some(r + 1) } else { None }, Some(c)),
                Approach::West => (Some(r), c.checked_sub(1)),
                Approach::East => (Some(r), if c + 1 < cols { Some(c + 1) } else { None }),
            };
            match rc {
                (Some(nr), Some(nc)) => Endpoint::Intersection(IntersectionId(nr * cols + nc)),
                _ => Endpoint::Outside,
            }
        };

        let mut roads: Vec<Road> = Vec::new();
        let mut incoming = vec![[RoadId(usize::MAX); 4]; n];
        let mut outgoing = vec![[RoadId(usize::MAX); 4]; n];

        // Incoming roads: one per (intersection, approach). Interior roads are
        // created here exactly once, as the incoming road of their downstream
        // intersection; they double as the upstream intersection's outgoing road.
        for id in 0..n {
            let (r, c) = (id / cols, id % cols);
            for side in Approach::ALL {
                let road_id = RoadId(roads.len());
                let lanes = [
                    LaneId(road_id.0 * LANES_PER_ROAD),
                    LaneId(road_id.0 * LANES_PER_ROAD + 1),
                    LaneId(road_id.0 * LANES_PER_ROAD + 2),
                ];
                let from = neighbor(r, c, side);
                roads.push(Road {
                    id: road_id,
                    from,
                    to: Endpoint::Intersection(IntersectionId(id)),
                    heading: side.heading(),
                    lanes,
                });
                incoming[id][side.index()] = road_id;
                if let Endpoint::Intersection(up) = from {
                    // exit side at the upstream intersection is the travel heading
                    let exit_side = heading_side(side.heading());
                    outgoing[up.0][exit_side.index()] = road_id;
                }
            }
        }
        // Exit roads to the outside for border sides.
        for id in 0..n {
            let (r, c) = (id / cols, id % cols);
            for side in Approach::ALL {
                if neighbor(r, c, side) == Endpoint::Outside {
                    let road_id = RoadId(roads.len());
                    let lanes = [
                        LaneId(road_id.0 * LANES_PER_ROAD),
                        LaneId(road_id.0 * LANES_PER_ROAD + 1),
                        LaneId(road_id.0 * LANES_PER_ROAD + 2),
                    ];
                    roads.push(Road {
                        id: road_id,
                        from: Endpoint::Intersection(IntersectionId(id)),
                        to: Endpoint::Outside,
                        heading: side.heading().opposite(),
                        lanes,
                    });
                    outgoing[id][side.index()] = road_id;
                }
            }
        }

        let mut intersections = Vec::with_capacity(n);
        for id in 0..n {
            let mut directed_roads = Vec::with_capacity(NUM_MOVEMENTS);
            for approach in Approach::ALL {
                for turn in Turn::ALL {
                    let arrival_road = &roads[incoming[id][approach.index()].0];
                    let out_heading = match turn {
                        Turn::Straight => approach.heading(),
                        Turn::Left => approach.heading().left(),
                        Turn::Right => approach.heading().right(),
                    };
                    let exit_side = heading_side(out_heading);
                    let exit_road = &roads[outgoing[id][exit_side.index()].0];
                    directed_roads.push(DirectedRoad {
                        approach,
                        turn,
                        arrival_lane: arrival_road.lane(turn),
                        departure_lane: exit_road.lane(turn),
                        exit_road: exit_road.id,
                    });
                }
            }
            let phase_table = (0..NUM_PHASES)
                .map(|p| Phase { id: p, movements: PHASE_TABLE[p] })
                .collect();
            intersections.push(Intersection {
                id: IntersectionId(id),
                row: id / cols,
                col: id % cols,
                directed_roads,
                phase_table,
                current_phase: 0,
            });
        }

        let net = Network {
            grid_rows: rows,
            grid_cols: cols,
            lane_length,
            speed_limit,
            intersections,
            roads,
            incoming,
            outgoing,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn num_lanes(&self) -> usize {
        self.roads.len() * LANES_PER_ROAD
    }

    pub fn road_of_lane(&self, lane: LaneId) -> &Road {
        &self.roads[lane.0 / LANES_PER_ROAD]
    }

    pub fn lane_turn(&self, lane: LaneId) -> Turn {
        Turn::from_index(lane.0 % LANES_PER_ROAD)
    }

    /// Source roads (from the outside), in id order.
    pub fn entry_roads(&self) -> impl Iterator<Item = &Road> {
        self.roads.iter().filter(|r| r.is_source())
    }

    /// Checks every structural invariant, naming the first violated one.
    pub fn validate(&self) -> Result<(), NetError> {
        let n = self.grid_rows * self.grid_cols;
        if self.intersections.len() != n {
            return Err(NetError::Validation(format!(
                "intersection count {} does not match grid {}x{}",
                self.intersections.len(),
                self.grid_rows,
                self.grid_cols
            )));
        }
        for inter in &self.intersections {
            if inter.directed_roads.len() != NUM_MOVEMENTS {
                return Err(NetError::Validation(format!(
                    "intersection {} has {} directed roads, expected {}",
                    inter.id.0,
                    inter.directed_roads.len(),
                    NUM_MOVEMENTS
                )));
            }
            let mut arrivals = Vec::new();
            let mut departures = Vec::new();
            for (m, dr) in inter.directed_roads.iter().enumerate() {
                let check_lane = |lane: LaneId, role: &str| {
                    if lane.0 >= self.num_lanes() {
                        return Err(NetError::Validation(format!(
                            "intersection {} movement {m}: {role} lane {} references a missing road",
                            inter.id.0, lane.0
                        )));
                    }
                    Ok(())
                };
                check_lane(dr.arrival_lane, "arrival")?;
                check_lane(dr.departure_lane, "departure")?;
                let arr_road = self.road_of_lane(dr.arrival_lane);
                if arr_road.to != Endpoint::Intersection(inter.id) {
                    return Err(NetError::Validation(format!(
                        "intersection {} movement {m}: arrival lane {} does not end at this intersection",
                        inter.id.0, dr.arrival_lane.0
                    )));
                }
                let dep_road = self.road_of_lane(dr.departure_lane);
                if dep_road.from != Endpoint::Intersection(inter.id) {
                    return Err(NetError::Validation(format!(
                        "intersection {} movement {m}: departure lane {} does not start at this intersection",
                        inter.id.0, dr.departure_lane.0
                    )));
                }
                arrivals.push(dr.arrival_lane);
                departures.push(dr.departure_lane);
            }
            arrivals.sort_unstable();
            arrivals.dedup();
            departures.sort_unstable();
            departures.dedup();
            if arrivals.len() != LANES_PER_INTERSECTION {
                return Err(NetError::Validation(format!(
                    "intersection {} has {} distinct arrival lanes, expected {}",
                    inter.id.0,
                    arrivals.len(),
                    LANES_PER_INTERSECTION
                )));
            }
            if departures.len() != LANES_PER_INTERSECTION {
                return Err(NetError::Validation(format!(
                    "intersection {} has {} distinct departure lanes, expected {}",
                    inter.id.0,
                    departures.len(),
                    LANES_PER_INTERSECTION
                )));
            }
            if inter.phase_table.len() != NUM_PHASES {
                return Err(NetError::Validation(format!(
                    "intersection {} has {} phases, expected {}",
                    inter.id.0,
                    inter.phase_table.len(),
                    NUM_PHASES
                )));
            }
            for phase in &inter.phase_table {
                for &m in &phase.movements {
                    if m >= NUM_MOVEMENTS {
                        return Err(NetError::Validation(format!(
                            "intersection {} phase {}: movement index {m} out of range",
                            inter.id.0, phase.id
                        )));
                    }
                    if inter.directed_roads[m].turn == Turn::Right {
                        return Err(NetError::Validation(format!(
                            "intersection {} phase {}: right turns are not controlled",
                            inter.id.0, phase.id
                        )));
                    }
                }
                let [a, b] = phase.movements;
                if !movements_compatible(&inter.directed_roads[a], &inter.directed_roads[b]) {
                    return Err(NetError::Validation(format!(
                        "intersection {} phase {}: conflicting movement pair ({a}, {b})",
                        inter.id.0, phase.id
                    )));
                }
            }
            // every non-right movement appears in at least one phase
            for (m, dr) in inter.directed_roads.iter().enumerate() {
                if dr.turn != Turn::Right
                    && !inter.phase_table.iter().any(|p| p.movements.contains(&m))
                {
                    return Err(NetError::Validation(format!(
                        "intersection {} movement {m} is not authorized by any phase",
                        inter.id.0
                    )));
                }
            }
            if inter.current_phase >= NUM_PHASES {
                return Err(NetError::Validation(format!(
                    "intersection {} current phase {} out of range",
                    inter.id.0, inter.current_phase
                )));
            }
        }
        Ok(())
    }
}

fn heading_side(h: Heading) -> Approach {
    // the side a road pointing in heading `h` leaves the intersection through
    match h {
        Heading::North => Approach::North,
        Heading::East => Approach::East,
        Heading::South => Approach::South,
        Heading::West => Approach::West,
    }
}

/// Two controlled movements may share a phase when they come from opposing
/// approaches with the same turn, or from the same approach.
fn movements_compatible(a: &DirectedRoad, b: &DirectedRoad) -> bool {
    if a.approach == b.approach {
        return true;
    }
    a.approach.heading() == b.approach.heading().opposite() && a.turn == b.turn
}

/// Set of movement indices authorized under phase `p`: the two controlled
/// movements plus the four right turns.
pub fn phase_movements(inter: &Intersection, p: usize) -> Result<Vec<usize>, NetError> {
    if p >= NUM_PHASES {
        return Err(NetError::InvalidArgument(format!(
            "phase index {p} out of range 0..{NUM_PHASES}"
        )));
    }
    let mut set: Vec<usize> = inter.phase_table[p].movements.to_vec();
    set.extend_from_slice(&RIGHT_TURN_MOVEMENTS);
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

/// One vehicle to inject: departure time and a connected route of roads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVehicle {
    pub depart_s: f64,
    pub route: Vec<RoadId>,
}

/// A demand specification: vehicles sorted by departure time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowSpec {
    pub vehicles: Vec<FlowVehicle>,
}

impl FlowSpec {
    /// Checks departure times, ordering and route connectivity against `net`.
    pub fn validate(&self, net: &Network) -> Result<(), NetError> {
        let mut last = 0.0f64;
        for (i, v) in self.vehicles.iter().enumerate() {
            if !(v.depart_s >= 0.0) {
                return Err(NetError::FlowValidation(format!(
                    "vehicle {i}: departure time {} is negative",
                    v.depart_s
                )));
            }
            if v.depart_s < last {
                return Err(NetError::FlowValidation(format!(
                    "vehicle {i}: departures not sorted ({} after {last})",
                    v.depart_s
                )));
            }
            last = v.depart_s;
            if v.route.is_empty() {
                return Err(NetError::FlowValidation(format!("vehicle {i}: empty route")));
            }
            for &r in &v.route {
                if r.0 >= net.roads.len() {
                    return Err(NetError::FlowValidation(format!(
                        "vehicle {i}: route references missing road {}",
                        r.0
                    )));
                }
            }
            for w in v.route.windows(2) {
                let (a, b) = (&net.roads[w[0].0], &net.roads[w[1].0]);
                if a.to == Endpoint::Outside || a.to != b.from {
                    return Err(NetError::FlowValidation(format!(
                        "vehicle {i}: roads {} -> {} are not connected",
                        w[0].0, w[1].0
                    )));
                }
                if Turn::between(a.heading, b.heading).is_none() {
                    return Err(NetError::FlowValidation(format!(
                        "vehicle {i}: roads {} -> {} require a reversal",
                        w[0].0, w[1].0
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
