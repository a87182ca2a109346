//! Deterministic 1 Hz traffic microsimulation.
//!
//! Point vehicles follow a simple car-following rule: accelerate toward the
//! speed limit, never end a tick closer than the minimum gap behind the
//! (already updated) leader, and stop at the lane end unless the movement is
//! authorized and the downstream lane has headroom, in which case the vehicle
//! carries its overflow distance across the intersection. Lanes are processed
//! in id order, vehicles front to back, so a run is a pure function of
//! (network, flow, signal commands).

use std::collections::VecDeque;
use std::sync::Arc;

use crate::netmodel::{
    movement_authorized, Endpoint, FlowSpec, LaneId, Network, RoadId, Turn,
    NUM_MOVEMENTS,
};

/// Acceleration limit, m/s^2.
pub const ACCEL: f64 = 2.0;
/// Deceleration limit, m/s^2.
pub const DECEL: f64 = 4.5;
/// Minimum spacing between vehicles (vehicle length plus headway), meters.
pub const MIN_GAP: f64 = 7.0;
/// Below this speed a tick counts as waiting rather than driving, m/s.
pub const WAIT_SPEED: f64 = 0.1;

/// Per-intersection signal command for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalCommand {
    Phase(usize),
    /// Authorizes every movement; used by unconstrained-throughput baselines.
    AllGreen,
}

impl SignalCommand {
    fn authorizes(self, movement: usize) -> bool {
        match self {
            SignalCommand::Phase(p) => movement_authorized(p, movement),
            SignalCommand::AllGreen => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleObs {
    /// Distance to the lane end (stop line), meters.
    pub dist: f64,
    /// Speed over the last tick, m/s.
    pub speed: f64,
    /// Cumulative waiting time, seconds.
    pub wait_s: f64,
    /// Cumulative driving time, seconds.
    pub drive_s: f64,
}

/// Read-only snapshot of one intersection: vehicles on all 24 lanes in
/// directed-road order, plus the phase in effect.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionObservation {
    pub arrival: Vec<Vec<VehicleObs>>,
    pub departure: Vec<Vec<VehicleObs>>,
    pub phase: usize,
    pub lane_length: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelTimeStats {
    /// Mean of (exit - enter) over completed vehicles plus (now - enter) over
    /// vehicles still in the network; zero when nothing has entered.
    pub avg_travel_time_s: f64,
    pub completed: usize,
    pub in_network: usize,
}

#[derive(Debug, Clone, Default)]
struct VehicleDyn {
    route_pos: usize,
    lane: LaneId,
    /// Distance from the lane start; dist to stop line is `lane_length - pos`.
    pos: f64,
    speed: f64,
    wait_s: f64,
    drive_s: f64,
    enter_s: Option<u32>,
    exit_s: Option<u32>,
}

/// Dynamic simulation state. Single-writer; replicas for different runs are
/// independent and may live on different threads.
#[derive(Debug, Clone)]
pub struct SimState {
    net: Arc<Network>,
    flow: Arc<FlowSpec>,
    now: u32,
    vehicles: Vec<VehicleDyn>,
    /// Vehicle ids per lane, front (largest pos) to back.
    lanes: Vec<VecDeque<usize>>,
    /// Vehicles waiting to spawn, per entry lane, in departure order.
    pending: Vec<VecDeque<usize>>,
    phases: Vec<usize>,
    spawned: usize,
    completed: Vec<usize>,
}

impl SimState {
    pub fn new(net: Arc<Network>, flow: Arc<FlowSpec>) -> SimState {
        let n_lanes = net.num_lanes();
        let mut pending = vec![VecDeque::new(); n_lanes];
        let mut vehicles = Vec::with_capacity(flow.vehicles.len());
        for (vid, v) in flow.vehicles.iter().enumerate() {
            let lane = entry_lane(&net, &v.route);
            pending[lane.0].push_back(vid);
            vehicles.push(VehicleDyn::default());
        }
        let phases = net.intersections.iter().map(|i| i.current_phase).collect();
        SimState {
            net,
            flow,
            now: 0,
            vehicles,
            lanes: vec![VecDeque::new(); n_lanes],
            pending,
            phases,
            spawned: 0,
            completed: Vec::new(),
        }
    }

    pub fn now(&self) -> u32 {
        self.now
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn spawned_count(&self) -> usize {
        self.spawned
    }

    pub fn completed_count(&self) -> usize {
        self.completed.len()
    }

    pub fn in_network_count(&self) -> usize {
        self.spawned - self.completed.len()
    }

    /// Advances the simulation by one second.
    pub fn step(&mut self, commands: &[SignalCommand]) {
        assert_eq!(
            commands.len(),
            self.net.intersections.len(),
            "one signal command per intersection"
        );
        self.spawn_due();
        self.move_vehicles(commands);
        self.account();
        for (i, c) in commands.iter().enumerate() {
            if let SignalCommand::Phase(p) = c {
                self.phases[i] = *p;
            }
        }
        self.now += 1;
    }

    /// Convenience wrapper taking plain phase indices.
    pub fn step_phases(&mut self, phases: &[usize]) {
        let commands: Vec<SignalCommand> = phases.iter().map(|&p| SignalCommand::Phase(p)).collect();
        self.step(&commands);
    }

    fn spawn_due(&mut self) {
        let now_s = self.now as f64;
        for lane_id in 0..self.lanes.len() {
            while let Some(&vid) = self.pending[lane_id].front() {
                if self.flow.vehicles[vid].depart_s > now_s {
                    break;
                }
                let headroom = match self.lanes[lane_id].back() {
                    None => true,
                    Some(&tail) => self.vehicles[tail].pos >= MIN_GAP,
                };
                if !headroom {
                    break;
                }
                self.pending[lane_id].pop_front();
                let veh = &mut self.vehicles[vid];
                veh.lane = LaneId(lane_id);
                veh.pos = 0.0;
                veh.speed = self.net.speed_limit;
                veh.enter_s = Some(self.now);
                self.lanes[lane_id].push_back(vid);
                self.spawned += 1;
            }
        }
    }

    fn move_vehicles(&mut self, commands: &[SignalCommand]) {
        let l_max = self.net.lane_length;
        let v_max = self.net.speed_limit;
        let move_lists: Vec<Vec<usize>> = self
            .lanes
            .iter()
            .map(|q| q.iter().copied().collect())
            .collect();

        for (lane_id, list) in move_lists.iter().enumerate() {
            let mut leader_pos: Option<f64> = None;
            for &vid in list {
                // barrier: absolute position this vehicle may not end beyond;
                // positions past l_max mean crossing out of the lane
                let (barrier, action) = match leader_pos {
                    Some(lead) => (lead - MIN_GAP, HeadAction::Follow),
                    None => self.head_barrier(LaneId(lane_id), vid, commands),
                };
                let veh = &self.vehicles[vid];
                let pos = veh.pos;
                let avail = (barrier - pos).max(0.0);
                let v_desired = v_max.min(avail);
                let v_new = v_desired
                    .max((veh.speed - DECEL).max(0.0))
                    .min(veh.speed + ACCEL);
                let x_new = (pos + v_new).min(barrier).max(pos);
                let v_final = x_new - pos;

                if x_new > l_max {
                    debug_assert!(!matches!(action, HeadAction::Follow));
                    let popped = self.lanes[lane_id].pop_front();
                    debug_assert_eq!(popped, Some(vid));
                    match action {
                        HeadAction::Exit => {
                            let veh = &mut self.vehicles[vid];
                            veh.speed = v_final;
                            veh.exit_s = Some(self.now + 1);
                            self.completed.push(vid);
                        }
                        HeadAction::Cross(target) => {
                            let veh = &mut self.vehicles[vid];
                            veh.route_pos += 1;
                            veh.lane = target;
                            veh.pos = x_new - l_max;
                            veh.speed = v_final;
                            debug_assert!(veh.pos <= l_max);
                            self.lanes[target.0].push_back(vid);
                        }
                        HeadAction::Follow => unreachable!(),
                    }
                    // the next vehicle becomes the lane head
                    leader_pos = None;
                } else {
                    let veh = &mut self.vehicles[vid];
                    veh.pos = x_new;
                    veh.speed = v_final;
                    leader_pos = Some(x_new);
                }
            }
        }
    }

    /// Barrier and crossing action for a lane-head vehicle.
    fn head_barrier(
        &self,
        lane: LaneId,
        vid: usize,
        commands: &[SignalCommand],
    ) -> (f64, HeadAction) {
        let l_max = self.net.lane_length;
        let road = self.net.road_of_lane(lane);
        let veh = &self.vehicles[vid];
        let route = &self.flow.vehicles[vid].route;

        if road.is_sink() || veh.route_pos + 1 >= route.len() {
            // leaves the network at the end of this lane
            return (f64::INFINITY, HeadAction::Exit);
        }
        let inter = match road.to {
            Endpoint::Intersection(id) => id,
            Endpoint::Outside => unreachable!("non-sink road ends at an intersection"),
        };
        let turn = self.net.lane_turn(lane);
        let approach_heading = road.heading;
        let approach = match approach_heading {
            crate::netmodel::Heading::North => crate::netmodel::Approach::South,
            crate::netmodel::Heading::East => crate::netmodel::Approach::West,
            crate::netmodel::Heading::South => crate::netmodel::Approach::North,
            crate::netmodel::Heading::West => crate::netmodel::Approach::East,
        };
        let movement = crate::netmodel::movement_index(approach, turn);
        if !commands[inter.0].authorizes(movement) {
            return (l_max, HeadAction::Follow);
        }
        let next_road = route[veh.route_pos + 1];
        let target = self.target_lane(route, veh.route_pos, next_road, turn);
        let headroom = match self.lanes[target.0].back() {
            None => l_max,
            Some(&tail) => self.vehicles[tail].pos - MIN_GAP,
        };
        if headroom <= 0.0 {
            // blocked downstream: hold the gap even short of the stop line
            (l_max + headroom, HeadAction::Follow)
        } else {
            (l_max + headroom, HeadAction::Cross(target))
        }
    }

    /// Lane to enter on `next_road`: chosen by the turn the route takes at the
    /// following intersection; on sink roads, by the turn just performed.
    fn target_lane(&self, route: &[RoadId], route_pos: usize, next_road: RoadId, turn: Turn) -> LaneId {
        let next = &self.net.roads[next_road.0];
        if next.is_sink() {
            return next.lane(turn);
        }
        match route.get(route_pos + 2) {
            Some(&after) => {
                let t = Turn::between(next.heading, self.net.roads[after.0].heading)
                    .expect("validated route has no reversals");
                next.lane(t)
            }
            None => next.lane(Turn::Straight),
        }
    }

    fn account(&mut self) {
        for queue in &self.lanes {
            for &vid in queue {
                let veh = &mut self.vehicles[vid];
                if veh.speed < WAIT_SPEED {
                    veh.wait_s += 1.0;
                } else {
                    veh.drive_s += 1.0;
                }
            }
        }
    }

    /// Snapshot of one intersection's 24 lanes and current phase.
    pub fn observe(&self, intersection: usize) -> IntersectionObservation {
        let inter = &self.net.intersections[intersection];
        let lane_obs = |lane: LaneId| -> Vec<VehicleObs> {
            self.lanes[lane.0]
                .iter()
                .map(|&vid| {
                    let v = &self.vehicles[vid];
                    VehicleObs {
                        dist: self.net.lane_length - v.pos,
                        speed: v.speed,
                        wait_s: v.wait_s,
                        drive_s: v.drive_s,
                    }
                })
                .collect()
        };
        let mut arrival = Vec::with_capacity(NUM_MOVEMENTS);
        let mut departure = Vec::with_capacity(NUM_MOVEMENTS);
        for dr in &inter.directed_roads {
            arrival.push(lane_obs(dr.arrival_lane));
            departure.push(lane_obs(dr.departure_lane));
        }
        IntersectionObservation {
            arrival,
            departure,
            phase: self.phases[intersection],
            lane_length: self.net.lane_length,
            speed_limit: self.net.speed_limit,
        }
    }

    /// Average travel time over everything that entered the network, with
    /// in-network vehicles clamped to the current time.
    pub fn travel_time_stats(&self) -> TravelTimeStats {
        let mut total = 0.0;
        let mut count = 0usize;
        for &vid in &self.completed {
            let v = &self.vehicles[vid];
            total += (v.exit_s.unwrap() - v.enter_s.unwrap()) as f64;
            count += 1;
        }
        let mut in_network = 0usize;
        for queue in &self.lanes {
            for &vid in queue {
                let v = &self.vehicles[vid];
                total += (self.now - v.enter_s.unwrap()) as f64;
                count += 1;
                in_network += 1;
            }
        }
        TravelTimeStats {
            avg_travel_time_s: if count == 0 { 0.0 } else { total / count as f64 },
            completed: self.completed.len(),
            in_network,
        }
    }

    /// All in-network vehicles as (vehicle id, lane, dist to stop line, speed),
    /// in lane order then front to back; used by the tick trace.
    pub fn vehicles_snapshot(&self) -> Vec<(usize, LaneId, f64, f64)> {
        let mut out = Vec::new();
        for (lane_id, queue) in self.lanes.iter().enumerate() {
            for &vid in queue {
                let v = &self.vehicles[vid];
                out.push((vid, LaneId(lane_id), self.net.lane_length - v.pos, v.speed));
            }
        }
        out
    }

    #[cfg(test)]
    fn vehicle(&self, vid: usize) -> &VehicleDyn {
        &self.vehicles[vid]
    }
}

enum HeadAction {
    /// Constrained by the stop line or a leader; stays on the lane.
    Follow,
    /// May cross to the given lane.
    Cross(LaneId),
    /// Leaves the network past the lane end.
    Exit,
}

/// Entry lane for a route: the lane of the first road matching the first turn,
/// or the straight lane when the route has a single road.
fn entry_lane(net: &Network, route: &[RoadId]) -> LaneId {
    let first = &net.roads[route[0].0];
    match route.get(1) {
        Some(&second) => {
            let t = Turn::between(first.heading, net.roads[second.0].heading)
                .expect("validated route has no reversals");
            first.lane(t)
        }
        None => first.lane(Turn::Straight),
    }
}
