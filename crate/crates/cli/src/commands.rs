use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sown_core::{
    constant_grid, constant_placement, grid_qsup, perturb_eval, qsup_of_placement,
    solve_2d_with_nl, stability_probe, tradeoff, vertical_qsup, ArrivalProcess, PacketSize,
    Placement, ProbeOptions, RateFunction, SimConfig, SolveResult, TrafficModel,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::placement_file::read_distances;

fn emit(cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    table.emit(cfg.output.as_deref(), cfg.format)
}

fn optimal(
    cfg: &RunConfig,
    rate: &RateFunction,
    n: usize,
    length: f64,
) -> Result<SolveResult, CliError> {
    Ok(sown_core::solve(rate, n, length, cfg.tol_q)?)
}

fn load_placement(path: &Path, length: Option<f64>) -> Result<Placement, CliError> {
    let distances = read_distances(path)?;
    let placement = match length {
        Some(l) => Placement::with_length(distances, l),
        None => Placement::new(distances),
    };
    placement.map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let rate = cfg.rate()?;
    let res = optimal(cfg, &rate, cfg.n, cfg.length)?;
    let mut table = Table::new(&[
        "index",
        "distance_m",
        "position_m",
        "q_sup",
        "q0",
        "L0",
        "branch",
        "gamma",
        "tol_q",
        "N",
        "L",
    ]);
    let xs = res.placement.positions();
    for (i, &d) in res.placement.distances().iter().enumerate() {
        table.push(vec![
            (i + 1).into(),
            d.into(),
            xs[i + 1].into(),
            res.q_sup.into(),
            res.q0.into(),
            res.l0.into(),
            res.branch.as_str().into(),
            res.gamma.into(),
            res.tol_q.into(),
            cfg.n.into(),
            cfg.length.into(),
        ]);
    }
    emit(cfg, &table)
}

pub fn eval(cfg: &RunConfig, path: &Path, explicit_length: bool) -> Result<(), CliError> {
    let rate = cfg.rate()?;
    let placement = load_placement(path, explicit_length.then_some(cfg.length))?;
    let lim = qsup_of_placement(&placement, &rate);
    let mut table = Table::new(&["N", "L", "q_sup", "delta", "bottleneck"]);
    table.push(vec![
        placement.len().into(),
        placement.length().into(),
        lim.q_sup.into(),
        tradeoff(lim.q_sup, placement.len()).into(),
        (lim.bottleneck + 1).into(),
    ]);
    emit(cfg, &table)
}

pub fn sweep_n(cfg: &RunConfig, n_min: usize, n_max: usize) -> Result<(), CliError> {
    if n_min == 0 || n_max < n_min {
        return Err(CliError::Config(format!(
            "need 1 <= n_min <= n_max, got {n_min}..{n_max}"
        )));
    }
    let rate = cfg.rate()?;
    let rows = (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            let res = optimal(cfg, &rate, n, cfg.length)?;
            let constant = qsup_of_placement(&constant_placement(n, cfg.length)?, &rate).q_sup;
            Ok(vec![
                n.into(),
                cfg.length.into(),
                res.q_sup.into(),
                tradeoff(res.q_sup, n).into(),
                res.branch.as_str().into(),
                constant.into(),
                tradeoff(constant, n).into(),
            ])
        })
        .collect::<Result<Vec<Vec<Cell>>, CliError>>()?;
    let mut table = Table::new(&[
        "N",
        "L",
        "q_sup",
        "delta",
        "branch",
        "q_sup_constant",
        "delta_constant",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    emit(cfg, &table)
}

pub fn sweep_l(
    cfg: &RunConfig,
    ns: &[usize],
    l_min: f64,
    l_max: f64,
    steps: usize,
) -> Result<(), CliError> {
    if !(l_min > 0.0 && l_max >= l_min && steps >= 1) || ns.contains(&0) {
        return Err(CliError::Config(
            "need 0 < l_min <= l_max, l_steps >= 1 and N >= 1".into(),
        ));
    }
    let rate = cfg.rate()?;
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let lengths: Vec<f64> = (0..steps)
        .map(|k| {
            if steps == 1 {
                l_min
            } else {
                l_min + (l_max - l_min) * k as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let jobs: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| lengths.iter().map(move |&l| (n, l)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, l)| {
            let res = optimal(cfg, &rate, n, l)?;
            Ok(vec![
                n.into(),
                l.into(),
                res.q_sup.into(),
                tradeoff(res.q_sup, n).into(),
                res.branch.as_str().into(),
            ])
        })
        .collect::<Result<Vec<Vec<Cell>>, CliError>>()?;
    let mut table = Table::new(&["N", "L", "q_sup", "delta", "branch"]);
    rows.into_iter().for_each(|r| table.push(r));
    emit(cfg, &table)
}

pub fn solve_2d(cfg: &RunConfig, n_l: Option<usize>, n_l_max: usize) -> Result<(), CliError> {
    let rate = cfg.rate()?;
    let res = match n_l {
        Some(n_l) => solve_2d_with_nl(&rate, cfg.n_h, n_l, cfg.length, cfg.height, cfg.tol_q)?,
        None => sown_core::solve_2d(&rate, cfg.n_h, cfg.length, cfg.height, cfg.tol_q, n_l_max)?,
    };
    let constant = constant_grid(res.n_l, cfg.n_h, cfg.length, cfg.height)?;
    let delta_constant = grid_qsup(&constant, &rate)?.q_sup / constant.relay_count() as f64;
    let mut table = Table::new(&[
        "axis",
        "index",
        "spacing_m",
        "N_L",
        "N_H",
        "total_nodes",
        "q_sup",
        "q_x",
        "q_y",
        "delta",
        "delta_constant",
    ]);
    let spacings = res
        .grid
        .x_spacings
        .iter()
        .map(|&s| ("x", s))
        .enumerate()
        .chain(res.grid.y_spacings.iter().map(|&s| ("y", s)).enumerate());
    for (i, (axis, s)) in spacings {
        table.push(vec![
            axis.into(),
            (i + 1).into(),
            s.into(),
            res.n_l.into(),
            cfg.n_h.into(),
            res.total_nodes.into(),
            res.q_sup.into(),
            res.q_x.into(),
            res.q_y.into(),
            res.delta().into(),
            delta_constant.into(),
        ]);
    }
    emit(cfg, &table)
}

pub fn perturb(cfg: &RunConfig, sigmas: &[f64], placement: Option<&Path>) -> Result<(), CliError> {
    let rate = cfg.rate()?;
    let placement = match placement {
        Some(path) => load_placement(path, Some(cfg.length))?,
        None => optimal(cfg, &rate, cfg.n, cfg.length)?.placement,
    };
    let sigmas = if sigmas.is_empty() {
        vec![cfg.sigma]
    } else {
        sigmas.to_vec()
    };
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(CliError::Config(format!(
            "sigma must be non-negative, got {s}"
        )));
    }
    let hash = cfg.hash();
    let mut table = Table::new(&[
        "config_hash",
        "N",
        "L",
        "K",
        "sigma",
        "trials",
        "mean_q_sup",
        "std_q_sup",
        "mean_delta",
        "rng",
    ]);
    for &sigma in &sigmas {
        let stats = perturb_eval(&placement, &rate, sigma, cfg.trials, cfg.seed)?;
        table.push(vec![
            hash.clone().into(),
            placement.len().into(),
            placement.length().into(),
            cfg.attenuation_per_m.into(),
            sigma.into(),
            stats.trials.into(),
            stats.mean_q_sup.into(),
            stats.std_q_sup.into(),
            stats.mean_delta.into(),
            stats.rng.into(),
        ]);
    }
    emit(cfg, &table)
}

pub struct SimArgs {
    pub factors: Vec<f64>,
    pub packet_bits: f64,
    pub arrivals: ArrivalProcess,
    pub sizes: PacketSize,
    pub horizon_packets: f64,
    pub placement: Option<PathBuf>,
    pub series: Option<PathBuf>,
}

pub fn simulate(cfg: &RunConfig, args: &SimArgs) -> Result<(), CliError> {
    if !(args.packet_bits > 0.0 && args.horizon_packets >= 1.0) {
        return Err(CliError::Config(
            "packet_bits and horizon_packets must be positive".into(),
        ));
    }
    let rate = cfg.rate()?;
    let placement = match &args.placement {
        Some(path) => load_placement(path, Some(cfg.length))?,
        None => optimal(cfg, &rate, cfg.n, cfg.length)?.placement,
    };
    let q_sup = qsup_of_placement(&placement, &rate).q_sup;
    let grid: Vec<f64> = args.factors.iter().map(|f| f * q_sup).collect();
    let opts = ProbeOptions {
        mean_packet_bits: args.packet_bits,
        arrivals: args.arrivals,
        sizes: args.sizes,
        horizon_packets: args.horizon_packets,
        seed: cfg.seed,
        ..ProbeOptions::default()
    };
    let probe = stability_probe(&placement, &rate, &grid, &opts)?;

    if let Some(path) = &args.series {
        write_series(path, &placement, &rate, grid[0], &opts)?;
    }

    let mut table = Table::new(&[
        "factor",
        "q",
        "q_sup",
        "stable",
        "total_drift",
        "packet_rate",
        "end_total",
    ]);
    for (p, &f) in probe.points.iter().zip(&args.factors) {
        table.push(vec![
            f.into(),
            p.q.into(),
            q_sup.into(),
            p.stable.into(),
            p.total_drift.into(),
            p.packet_rate.into(),
            p.end_total.into(),
        ]);
    }
    emit(cfg, &table)
}

/// Per-node queue lengths of one run, same seed as the first probe point.
fn write_series(
    path: &Path,
    placement: &Placement,
    rate: &RateFunction,
    q: f64,
    opts: &ProbeOptions,
) -> Result<(), CliError> {
    let traffic = TrafficModel::from_load(q, opts.mean_packet_bits, placement.length())?;
    let horizon_s = opts.horizon_packets / traffic.packet_rate;
    let sim = SimConfig {
        arrivals: opts.arrivals,
        sizes: opts.sizes,
        horizon_s,
        warmup_s: opts.warmup_fraction * horizon_s,
        seed: opts.seed,
        ..SimConfig::new(placement.clone(), traffic)
    };
    let stats = sown_core::simulate(&sim, rate)?;
    let node_cols: Vec<String> = (1..=placement.len()).map(|k| format!("node_{k}")).collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let write_err = |e: csv::Error| CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut header = vec!["time_s".to_string(), "total".to_string()];
    header.extend(node_cols);
    w.write_record(&header).map_err(write_err)?;
    for (k, t) in stats.sample_times.iter().enumerate() {
        let mut row = vec![format!("{t:.8e}"), stats.sample_totals[k].to_string()];
        row.extend(stats.sample_queues.iter().map(|q| format!("{}", q[k])));
        w.write_record(&row).map_err(write_err)?;
    }
    w.flush().map_err(|e| CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn compare(
    cfg: &RunConfig,
    depth: f64,
    n_l: usize,
    n_v: Option<usize>,
) -> Result<(), CliError> {
    if n_l == 0 || !(depth > 0.0) {
        return Err(CliError::Config(
            "vertical layout needs depth > 0 and N_L >= 1".into(),
        ));
    }
    let n_v = n_v.unwrap_or_else(|| (cfg.n / n_l).saturating_sub(1).max(1));
    let rate = cfg.rate()?;
    let opt = optimal(cfg, &rate, cfg.n, cfg.length)?;
    let constant = qsup_of_placement(&constant_placement(cfg.n, cfg.length)?, &rate).q_sup;
    let vertical = vertical_qsup(&rate, n_l, n_v, depth, cfg.length);
    let vertical_nodes = n_l * (n_v + 1);

    let mut table = Table::new(&["layout", "nodes", "q_sup", "delta"]);
    for (name, nodes, q) in [
        ("optimal", cfg.n, opt.q_sup),
        ("constant", cfg.n, constant),
        ("vertical", vertical_nodes, vertical),
    ] {
        table.push(vec![
            name.into(),
            nodes.into(),
            q.into(),
            tradeoff(q, nodes).into(),
        ]);
    }
    emit(cfg, &table)
}
