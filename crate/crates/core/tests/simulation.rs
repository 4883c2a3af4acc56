//! Queueing simulations checked against the analytic stability limit.

use std::collections::HashMap;

use sown_core::simqueue::TraceKind;
use sown_core::{
    constant_placement, qsup_of_placement, simulate, solve, stability_probe, ArrivalProcess,
    PacketSize, Placement, Preset, ProbeOptions, RateFunction, SimConfig, TrafficModel,
};

const BITS: f64 = 1e6;

fn blue() -> RateFunction {
    RateFunction::preset(Preset::Blue)
}

/// Steady-state growth rate (packets/s) of each queue when every link
/// forwards at most its service rate.
fn fluid_drift(placement: &Placement, rate: &RateFunction, q: f64) -> Vec<f64> {
    let xs = placement.positions();
    let length = placement.length();
    let n = placement.len();
    let mut drift = vec![0.0; n];
    let mut inflow_from_above = 0.0;
    for k in (0..n).rev() {
        let hi = if k + 1 < n {
            0.5 * (xs[k + 1] + xs[k + 2])
        } else {
            length
        };
        let lo = 0.5 * (xs[k] + xs[k + 1]);
        let own = q * (hi - lo) / BITS;
        let service = rate.eval(placement.distances()[k]) / BITS;
        let inflow = own + inflow_from_above;
        let out = inflow.min(service);
        drift[k] = inflow - out;
        inflow_from_above = out;
    }
    drift
}

#[test]
fn below_the_limit_queues_do_not_grow() {
    let r = blue();
    let opt = solve(&r, 10, 500.0, None).unwrap();
    let traffic = TrafficModel::from_load(0.8 * opt.q_sup, BITS, 500.0).unwrap();
    let cfg = SimConfig {
        seed: 7,
        ..SimConfig::new(opt.placement.clone(), traffic)
    };
    let stats = simulate(&cfg, &r).unwrap();
    let lambda = stats.packet_rate;
    for (i, d) in stats.drift.iter().enumerate() {
        assert!(
            d.abs() < 0.01 * lambda,
            "relay {}: drift {d} vs lambda {lambda}",
            i + 1
        );
    }
    assert!(stats.is_stable());
    assert_eq!(stats.generated, stats.delivered + stats.in_system);
}

#[test]
fn above_the_limit_growth_matches_fluid_model() {
    let r = blue();
    let placement = constant_placement(10, 500.0).unwrap();
    let q = 1.2 * qsup_of_placement(&placement, &r).q_sup;
    let expected = fluid_drift(&placement, &r, q);
    let traffic = TrafficModel::from_load(q, BITS, 500.0).unwrap();
    let cfg = SimConfig {
        seed: 11,
        ..SimConfig::new(placement, traffic)
    };
    let stats = simulate(&cfg, &r).unwrap();
    assert!(!stats.is_stable());

    let lambda = stats.packet_rate;
    let total: f64 = expected.iter().sum();
    assert!(
        (stats.total_drift - total).abs() <= 0.2 * total,
        "{} vs {total}",
        stats.total_drift
    );
    for (i, (&sim, &fluid)) in stats.drift.iter().zip(&expected).enumerate() {
        if fluid > 0.01 * lambda {
            assert!(
                (sim - fluid).abs() <= 0.2 * fluid,
                "relay {}: {sim} vs {fluid}",
                i + 1
            );
        } else {
            assert!(
                sim.abs() < 0.01 * lambda,
                "relay {}: {sim} should be flat",
                i + 1
            );
        }
    }
}

#[test]
fn every_relay_serves_in_arrival_order() {
    let r = blue();
    let opt = solve(&r, 6, 500.0, None).unwrap();
    let traffic = TrafficModel::from_load(0.9 * opt.q_sup, BITS, 500.0).unwrap();
    let mut cfg = SimConfig::new(opt.placement, traffic);
    cfg.horizon_s = 20_000.0 / traffic.packet_rate;
    cfg.warmup_s = 0.1 * cfg.horizon_s;
    cfg.sizes = PacketSize::Exponential;
    cfg.record_trace = true;
    let stats = simulate(&cfg, &r).unwrap();
    let trace = stats.trace.unwrap();

    let mut arrivals: HashMap<usize, Vec<u64>> = HashMap::new();
    let mut departures: HashMap<usize, Vec<u64>> = HashMap::new();
    let mut last_time = 0.0;
    for ev in &trace {
        assert!(ev.time >= last_time);
        last_time = ev.time;
        let book = match ev.kind {
            TraceKind::Arrive => &mut arrivals,
            TraceKind::Depart => &mut departures,
        };
        book.entry(ev.node).or_default().push(ev.packet);
    }
    assert!(!departures.is_empty());
    for (node, out) in &departures {
        let inn = &arrivals[node];
        assert_eq!(
            &inn[..out.len()],
            &out[..],
            "relay {node} reordered packets"
        );
    }
}

#[test]
fn single_relay_probe_brackets_closed_form() {
    let r = blue();
    let length = 200.0;
    let placement = Placement::new(vec![length]).unwrap();
    let q_sup = 2.0 * r.eval(length) / length;
    let grid: Vec<f64> = [0.5, 0.9, 1.1, 1.5].iter().map(|f| f * q_sup).collect();
    let opts = ProbeOptions {
        arrivals: ArrivalProcess::Deterministic,
        sizes: PacketSize::Fixed,
        horizon_packets: 2e5,
        seed: 3,
        ..ProbeOptions::default()
    };
    let probe = stability_probe(&placement, &r, &grid, &opts).unwrap();
    let verdicts: Vec<bool> = probe.points.iter().map(|p| p.stable).collect();
    assert_eq!(verdicts, [true, true, false, false]);
    assert!(probe.brackets(q_sup));
}

#[test]
fn simulation_is_reproducible() {
    let r = blue();
    let opt = solve(&r, 4, 500.0, None).unwrap();
    let traffic = TrafficModel::from_load(0.95 * opt.q_sup, BITS, 500.0).unwrap();
    let mut cfg = SimConfig::new(opt.placement, traffic);
    cfg.horizon_s = 50_000.0 / traffic.packet_rate;
    cfg.warmup_s = 0.1 * cfg.horizon_s;
    let a = simulate(&cfg, &r).unwrap();
    let b = simulate(&cfg, &r).unwrap();
    assert_eq!(a.sample_totals, b.sample_totals);
    assert_eq!(a.total_drift.to_bits(), b.total_drift.to_bits());
}
