//! Synthetic demand generation.
//!
//! Per entry lane, the vehicle count over the horizon is drawn from a
//! Gaussian around the nominal rate (sigma = 10% of the mean, clamped at
//! zero), arrival instants are uniform over the horizon, and routes walk the
//! grid with seeded turning choices until they leave it. The first turn is
//! fixed by the entry lane itself; interior turns are straight with
//! probability 0.6, left 0.2, right 0.2.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Endpoint, FlowSpec, FlowVehicle, NetError, Network, Turn};

const P_STRAIGHT: f64 = 0.6;
const P_LEFT: f64 = 0.2;

/// Generates a deterministic synthetic flow.
///
/// `mean_rate` is in vehicles per hour per entry lane; `duration` in seconds.
pub fn gen_synthetic_flow(
    net: &Network,
    mean_rate: f64,
    seed: u64,
    duration: f64,
) -> Result<FlowSpec, NetError> {
    if !(mean_rate > 0.0) {
        return Err(NetError::InvalidArgument(format!(
            "mean rate must be positive, got {mean_rate}"
        )));
    }
    if !(duration > 0.0) {
        return Err(NetError::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = mean_rate * duration / 3600.0;
    let normal = Normal::new(mu, 0.1 * mu).expect("valid normal");

    let mut vehicles: Vec<FlowVehicle> = Vec::new();
    let entry_roads: Vec<_> = net.entry_roads().map(|r| r.id).collect();
    for road_id in entry_roads {
        for turn in Turn::ALL {
            let count = normal.sample(&mut rng).round().max(0.0) as usize;
            for _ in 0..count {
                let depart_s = rng.gen_range(0.0..duration).floor();
                let route = sample_route(net, road_id, turn, &mut rng);
                vehicles.push(FlowVehicle { depart_s, route });
            }
        }
    }
    vehicles.sort_by(|a, b| a.depart_s.total_cmp(&b.depart_s));
    let flow = FlowSpec { vehicles };
    flow.validate(net).expect("generated flow is valid");
    Ok(flow)
}

fn sample_turn(rng: &mut ChaCha8Rng) -> Turn {
    let u: f64 = rng.gen();
    if u < P_STRAIGHT {
        Turn::Straight
    } else if u < P_STRAIGHT + P_LEFT {
        Turn::Left
    } else {
        Turn::Right
    }
}

/// Walks from an entry road through the grid until a sink road is reached.
/// The turn at the first intersection is `first_turn`; later turns are sampled.
fn sample_route(
    net: &Network,
    entry: super::RoadId,
    first_turn: Turn,
    rng: &mut ChaCha8Rng,
) -> Vec<super::RoadId> {
    let mut route = vec![entry];
    let mut turn = first_turn;
    loop {
        let road = &net.roads[route.last().unwrap().0];
        let inter = match road.to {
            Endpoint::Intersection(id) => id,
            Endpoint::Outside => break,
        };
        let out_heading = match turn {
            Turn::Straight => road.heading,
            Turn::Left => road.heading.left(),
            Turn::Right => road.heading.right(),
        };
        let exit_side = match out_heading {
            super::Heading::North => super::Approach::North,
            super::Heading::East => super::Approach::East,
            super::Heading::South => super::Approach::South,
            super::Heading::West => super::Approach::West,
        };
        route.push(net.outgoing[inter.0][exit_side.index()]);
        turn = sample_turn(rng);
    }
    route
}
