use super::*;

fn grid_1x3() -> Network {
    Network::grid(1, 3, 300.0, 11.11).unwrap()
}

#[test]
fn grid_1x3_counts() {
    let net = grid_1x3();
    assert_eq!(net.intersections.len(), 3);
    let arrival_total: usize = net
        .intersections
        .iter()
        .map(|i| {
            let mut lanes: Vec<_> = i.directed_roads.iter().map(|d| d.arrival_lane).collect();
            lanes.sort_unstable();
            lanes.dedup();
            lanes.len()
        })
        .sum();
    assert_eq!(arrival_total, 36);
}

#[test]
fn grid_4x4_counts() {
    let net = Network::grid(4, 4, 300.0, 11.11).unwrap();
    assert_eq!(net.intersections.len(), 16);
    for inter in &net.intersections {
        assert_eq!(inter.phase_table.len(), 8);
    }
}

#[test]
fn dangling_lane_reference_rejected() {
    let mut net = grid_1x3();
    net.intersections[1].directed_roads[5].arrival_lane = LaneId(9999);
    let err = net.validate().unwrap_err();
    assert!(err.to_string().contains("missing road"), "got: {err}");
}

#[test]
fn duplicate_departure_lane_rejected() {
    let mut net = grid_1x3();
    let dup = net.intersections[0].directed_roads[0].departure_lane;
    net.intersections[0].directed_roads[1].departure_lane = dup;
    let err = net.validate().unwrap_err();
    assert!(err.to_string().contains("distinct departure lanes"), "got: {err}");
}

#[test]
fn phase_movements_has_two_controlled_plus_rights() {
    let net = grid_1x3();
    let inter = &net.intersections[0];
    for p in 0..NUM_PHASES {
        let set = phase_movements(inter, p).unwrap();
        assert_eq!(set.len(), 6, "phase {p}");
        let rights = set
            .iter()
            .filter(|&&m| inter.directed_roads[m].turn == Turn::Right)
            .count();
        assert_eq!(rights, 4, "phase {p}");
    }
    assert!(phase_movements(inter, 8).is_err());
}

#[test]
fn ew_straight_phase_contains_both_straights() {
    let net = grid_1x3();
    let inter = &net.intersections[0];
    let set = phase_movements(inter, 1).unwrap();
    assert!(set.contains(&movement_index(Approach::East, Turn::Straight)));
    assert!(set.contains(&movement_index(Approach::West, Turn::Straight)));
}

#[test]
fn phase_union_covers_all_movements() {
    // enumeration over the whole table
    let net = grid_1x3();
    let inter = &net.intersections[0];
    let mut seen = [false; NUM_MOVEMENTS];
    for p in 0..NUM_PHASES {
        for m in phase_movements(inter, p).unwrap() {
            seen[m] = true;
        }
    }
    assert!(seen.iter().all(|&s| s), "{seen:?}");
}

#[test]
fn every_non_right_movement_appears_in_some_phase() {
    let net = grid_1x3();
    for inter in &net.intersections {
        for (m, dr) in inter.directed_roads.iter().enumerate() {
            if dr.turn != Turn::Right {
                assert!(
                    inter.phase_table.iter().any(|p| p.movements.contains(&m)),
                    "movement {m} uncovered"
                );
            }
        }
    }
}

#[test]
fn interior_departure_lanes_are_neighbor_arrival_lanes() {
    let net = grid_1x3();
    // middle intersection's west-heading exit road arrives at intersection 0
    let exit = net.outgoing[1][Approach::West.index()];
    assert_eq!(net.roads[exit.0].to, Endpoint::Intersection(IntersectionId(0)));
    assert_eq!(net.incoming[0][Approach::East.index()], exit);
}

#[test]
fn border_roads_are_sources_and_sinks() {
    let net = grid_1x3();
    // intersection 0 is the west end of the row
    let west_in = net.incoming[0][Approach::West.index()];
    assert!(net.roads[west_in.0].is_source());
    let west_out = net.outgoing[0][Approach::West.index()];
    assert!(net.roads[west_out.0].is_sink());
}

#[test]
fn roadnet_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let net = grid_1x3();
    save_roadnet(&net, &path).unwrap();
    let reloaded = load_roadnet(&path).unwrap();
    assert_eq!(net, reloaded);
}

#[test]
fn roadnet_parse_error_includes_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"rows\": 2").unwrap();
    let err = load_roadnet(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bad.json"), "got: {msg}");
}

#[test]
fn synthetic_flow_is_deterministic_and_near_rate() {
    let net = grid_1x3();
    let a = gen_synthetic_flow(&net, 500.0, 7, 3600.0).unwrap();
    let b = gen_synthetic_flow(&net, 500.0, 7, 3600.0).unwrap();
    assert_eq!(flow_to_string(&a), flow_to_string(&b));

    // 8 entry roads x 3 lanes at 500 veh/h for one hour
    let expected = 24.0 * 500.0;
    let got = a.vehicles.len() as f64;
    assert!((got - expected).abs() / expected < 0.10, "got {got}");

    let c = gen_synthetic_flow(&net, 500.0, 8, 3600.0).unwrap();
    assert_ne!(flow_to_string(&a), flow_to_string(&c));
}

#[test]
fn synthetic_flow_rejects_bad_args() {
    let net = grid_1x3();
    assert!(gen_synthetic_flow(&net, 500.0, 1, 0.0).is_err());
    assert!(gen_synthetic_flow(&net, 0.0, 1, 3600.0).is_err());
}

#[test]
fn per_lane_count_mean_over_seeds_within_ten_percent() {
    // statistical oracle: average vehicles per entry lane across 20 seeds
    let net = grid_1x3();
    let lanes = 24.0;
    let mut total = 0.0;
    for seed in 0..20 {
        total += gen_synthetic_flow(&net, 500.0, seed, 3600.0).unwrap().vehicles.len() as f64;
    }
    let mean_per_lane = total / 20.0 / lanes;
    assert!(
        (mean_per_lane - 500.0).abs() / 500.0 < 0.10,
        "mean per-lane count {mean_per_lane}"
    );
}

#[test]
fn flow_file_round_trip_and_validation() {
    let net = grid_1x3();
    let flow = gen_synthetic_flow(&net, 100.0, 3, 600.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.json");
    save_flow(&flow, &path).unwrap();
    let reloaded = load_flow(&path, &net).unwrap();
    assert_eq!(flow, reloaded);

    // disconnected route is rejected
    let bad = FlowSpec {
        vehicles: vec![FlowVehicle { depart_s: 0.0, route: vec![RoadId(0), RoadId(0)] }],
    };
    assert!(bad.validate(&net).is_err());
    // unsorted departures are rejected
    let unsorted = FlowSpec {
        vehicles: vec![
            FlowVehicle { depart_s: 5.0, route: flow.vehicles[0].route.clone() },
            FlowVehicle { depart_s: 1.0, route: flow.vehicles[0].route.clone() },
        ],
    };
    assert!(unsorted.validate(&net).is_err());
}

#[test]
fn routes_end_on_sink_roads() {
    let net = grid_1x3();
    let flow = gen_synthetic_flow(&net, 50.0, 11, 600.0).unwrap();
    for v in &flow.vehicles {
        let last = &net.roads[v.route.last().unwrap().0];
        assert!(last.is_sink());
        let first = &net.roads[v.route[0].0];
        assert!(first.is_source());
    }
}
