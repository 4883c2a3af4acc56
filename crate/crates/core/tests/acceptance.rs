//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::simplex_search;
use sown_core::{
    constant_grid, constant_placement, coverage, decay_certificate, grid_qsup, l_zero, q_zero,
    qsup_of_placement, solve, solve_2d, solve_subproblem, stability_probe, vertical_qsup,
    ArrivalProcess, Branch, Grid2D, PacketSize, Placement, Preset, ProbeOptions, RateFunction,
};

const L: f64 = 500.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

fn rate(preset: Preset) -> RateFunction {
    RateFunction::preset(preset)
}

fn ceiling() -> Outcome {
    let started = Instant::now();
    let r = rate(Preset::Blue);
    let cap = r.at_zero() / L;
    let mut qs = Vec::new();
    for n in 1..=30 {
        match solve(&r, n, L, None) {
            Ok(res) => qs.push(res.q_sup),
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    let in_band = (1.12e7..=1.14e7).contains(&cap);
    let below = qs.iter().all(|&q| q < cap);
    let increasing = qs.windows(2).all(|w| w[1] > w[0]);
    let fast = elapsed < Duration::from_secs(1);
    outcome(
        in_band && below && increasing && fast,
        format!(
            "R(0)/L = {cap:.4e}, q_sup(1) = {:.3e}, q_sup(30) = {:.3e}, increasing = {increasing}, {:.0} ms",
            qs[0],
            qs[29],
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn oracle() -> Outcome {
    let started = Instant::now();
    let r = rate(Preset::Blue);
    let points = 2001;
    let cell = L / (points - 1) as f64;
    let mut worst_rel: f64 = 0.0;
    let mut worst_cells: f64 = 0.0;
    for n in [2, 3] {
        let res = match solve(&r, n, L, None) {
            Ok(res) => res,
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        };
        let (q_grid, d_grid) = simplex_search(&r, n, L, points);
        worst_rel = worst_rel.max((res.q_sup - q_grid).abs() / res.q_sup);
        for (a, b) in res.placement.distances().iter().zip(&d_grid) {
            worst_cells = worst_cells.max((a - b).abs() / cell);
        }
    }
    let elapsed = started.elapsed();
    outcome(
        worst_rel < 0.005 && worst_cells <= 1.0 && elapsed < Duration::from_secs(30),
        format!(
            "{points} points/dim, worst q gap {:.2e}, worst distance gap {worst_cells:.2} cells, {:.1} s",
            worst_rel,
            elapsed.as_secs_f64()
        ),
    )
}

fn structure() -> Outcome {
    let mut worst_tight: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for preset in Preset::ALL {
        let r = rate(preset);
        let q0 = match q_zero(&r) {
            Ok(q0) => q0,
            Err(e) => return outcome(false, e.to_string()),
        };
        for n in [2, 5, 10, 20] {
            let q = 0.5 * q0;
            let sub = match solve_subproblem(&r, q, n) {
                Ok(sub) => sub,
                Err(e) => return outcome(false, e.to_string()),
            };
            if sub.branch != Branch::CaseII {
                return outcome(
                    false,
                    format!("{preset} N={n}: expected graded spacing at q0/2"),
                );
            }
            let d = &sub.distances;
            for w in d.windows(2) {
                min_margin = min_margin.min((w[1] - w[0]) / sub.coverage);
            }
            let mut downstream = 0.0;
            for i in (0..n).rev() {
                let cap = r.eval(d[i]) / q;
                let need = d[i] / 2.0 + downstream;
                worst_tight = worst_tight.max((cap - need).abs() / cap);
                downstream += d[i];
            }
            let above = solve_subproblem(&r, q0 * (1.0 + 1e-3), n).map(|s| s.branch);
            let below = solve_subproblem(&r, q0 * (1.0 - 1e-3), n).map(|s| s.branch);
            if above != Ok(Branch::CaseI) || below != Ok(Branch::CaseII) {
                return outcome(
                    false,
                    format!("{preset} N={n}: switch not at q0 ({above:?}, {below:?})"),
                );
            }
        }
    }
    outcome(
        min_margin > 1e-12 && worst_tight < 1e-6,
        format!("min increment {min_margin:.3e} x coverage, worst slack {worst_tight:.2e}, switch at q0(1 +/- 1e-3)"),
    )
}

fn monotone_coverage() -> Outcome {
    let mut details = Vec::new();
    for preset in Preset::ALL {
        let r = rate(preset);
        let (q0, l0) = match (q_zero(&r), l_zero(&r)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return outcome(false, "thresholds failed"),
        };
        // an area a little past L0 puts q_sup inside [0.1, 10] q0
        let length = 1.5 * l0;
        let n = 10;
        let res = match solve(&r, n, length, None) {
            Ok(res) => res,
            Err(e) => return outcome(false, e.to_string()),
        };
        let grid: Vec<f64> = (0..100)
            .map(|k| q0 * 10f64.powf(-1.0 + 2.0 * k as f64 / 99.0))
            .collect();
        let xs: Vec<f64> = match grid.iter().map(|&q| coverage(&r, q, n)).collect() {
            Ok(xs) => xs,
            Err(e) => return outcome(false, format!("{e}")),
        };
        if !xs.windows(2).all(|w| w[1] < w[0]) {
            return outcome(false, format!("{preset}: coverage not strictly decreasing"));
        }
        let flips: Vec<usize> = (1..xs.len())
            .filter(|&k| (xs[k - 1] - length).signum() != (xs[k] - length).signum())
            .collect();
        let [k] = flips[..] else {
            return outcome(false, format!("{preset}: {} sign changes", flips.len()));
        };
        if !(grid[k - 1] <= res.q_sup + res.tol_q && res.q_sup - res.tol_q <= grid[k]) {
            return outcome(
                false,
                format!(
                    "{preset}: flip at [{:.4e}, {:.4e}] misses q_sup {:.4e}",
                    grid[k - 1],
                    grid[k],
                    res.q_sup
                ),
            );
        }
        details.push(format!("{preset} q_sup/q0 = {:.3}", res.q_sup / q0));
    }
    outcome(
        true,
        format!("one flip bracketing q_sup; {}", details.join(", ")),
    )
}

fn dichotomy() -> Outcome {
    let mut details = Vec::new();
    for preset in Preset::ALL {
        let r = rate(preset);
        let l0 = match l_zero(&r) {
            Ok(l0) => l0,
            Err(e) => return outcome(false, e.to_string()),
        };
        let solves = |length: f64, ns: &[usize]| -> Result<Vec<_>, String> {
            ns.iter()
                .map(|&n| solve(&r, n, length, None).map_err(|e| e.to_string()))
                .collect()
        };
        let short = match solves(0.9 * l0, &[1, 5, 20]) {
            Ok(s) => s,
            Err(e) => return outcome(false, e),
        };
        let tol = short.iter().map(|s| s.tol_q).fold(0.0, f64::max);
        let spread = short
            .iter()
            .map(|s| s.q_sup)
            .fold(f64::NEG_INFINITY, f64::max)
            - short.iter().map(|s| s.q_sup).fold(f64::INFINITY, f64::min);
        let long = match solves(1.5 * l0, &[5, 20]) {
            Ok(s) => s,
            Err(e) => return outcome(false, e),
        };
        if spread > 10.0 * tol || long[0].q_sup >= long[1].q_sup {
            return outcome(
                false,
                format!(
                    "{preset}: short spread {spread:.3e} (tol {tol:.3e}), long {:.4e} vs {:.4e}",
                    long[0].q_sup, long[1].q_sup
                ),
            );
        }
        details.push(format!(
            "{preset} gain {:.3}",
            long[1].q_sup / long[0].q_sup
        ));
    }
    outcome(
        true,
        format!(
            "flat below L0; N=20 over N=5 at 1.5 L0: {}",
            details.join(", ")
        ),
    )
}

fn decay() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for preset in Preset::ALL {
        let r = rate(preset);
        for n in [5, 10, 20] {
            let res = match solve(&r, n, L, None) {
                Ok(res) => res,
                Err(e) => return outcome(false, e.to_string()),
            };
            if res.branch != Branch::CaseII {
                continue;
            }
            let sub = match solve_subproblem(&r, res.q_sup, n) {
                Ok(sub) => sub,
                Err(e) => return outcome(false, e.to_string()),
            };
            let cert = match decay_certificate(&r, res.q_sup, &sub.distances) {
                Ok(c) => c,
                Err(e) => return outcome(false, e.to_string()),
            };
            if !cert.holds() {
                return outcome(false, format!("{preset} N={n}: {cert:?}"));
            }
            worst = worst.max(cert.worst_ratio);
            checked += 1;
        }
    }
    outcome(
        checked == 9,
        format!("{checked}/9 graded solves certified, worst d/envelope {worst:.4}"),
    )
}

fn baseline() -> Outcome {
    let r = rate(Preset::Green);
    let opt = match solve(&r, 10, L, None) {
        Ok(res) => res,
        Err(e) => return outcome(false, e.to_string()),
    };
    let constant = match constant_placement(10, L) {
        Ok(p) => qsup_of_placement(&p, &r).q_sup,
        Err(e) => return outcome(false, e.to_string()),
    };
    let ratio = opt.q_sup / constant;
    outcome(
        ratio > 1.0,
        format!(
            "optimal {:.4e} vs constant {constant:.4e}, ratio {ratio:.3}",
            opt.q_sup
        ),
    )
}

fn vertical() -> Outcome {
    let r = rate(Preset::Blue);
    let target = match solve(&r, 10, L, None) {
        Ok(res) => res.q_sup,
        Err(e) => return outcome(false, e.to_string()),
    };
    let n_l = 5;
    let Some(n_v) = (1..=10_000).find(|&n_v| vertical_qsup(&r, n_l, n_v, 3000.0, L) >= target)
    else {
        return outcome(false, "no vertical chain reaches the optimal limit");
    };
    let total = n_l * (n_v + 1);
    outcome(
        (100..=200).contains(&total),
        format!("N_V = {n_v}, total N = {total}, horizontal q_sup(10) = {target:.4e}"),
    )
}

fn stability() -> Outcome {
    let started = Instant::now();
    let r = rate(Preset::Blue);
    let opt = match solve(&r, 10, L, None) {
        Ok(res) => res,
        Err(e) => return outcome(false, e.to_string()),
    };
    let factors = [0.8, 0.9, 0.95, 1.05, 1.1, 1.2];
    let grid: Vec<f64> = factors.iter().map(|f| f * opt.q_sup).collect();
    let opts = ProbeOptions {
        arrivals: ArrivalProcess::Poisson,
        sizes: PacketSize::Fixed,
        seed: 1,
        ..ProbeOptions::default()
    };
    let probe = match stability_probe(&opt.placement, &r, &grid, &opts) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = started.elapsed();
    let verdicts: String = probe
        .points
        .iter()
        .zip(factors)
        .map(|(p, f)| format!("{f}:{}", if p.stable { "S" } else { "U" }))
        .collect::<Vec<_>>()
        .join(" ");
    let tight = probe.largest_stable == Some(grid[2]) && probe.smallest_unstable == Some(grid[3]);
    outcome(
        tight && probe.brackets(opt.q_sup) && elapsed < Duration::from_secs(60),
        format!("{verdicts}, {:.1} s", elapsed.as_secs_f64()),
    )
}

/// Largest relative overload over every link of the grid at load `q`.
fn grid_overload(grid: &Grid2D, r: &RateFunction, q: f64) -> f64 {
    let cols = Placement::with_length(grid.y_spacings.clone(), grid.height).expect("valid");
    let rows = Placement::with_length(grid.x_spacings.clone(), grid.length).expect("valid");
    let ys = cols.positions();
    let xs = rows.positions();
    let mut worst = f64::NEG_INFINITY;
    for (j, &h) in grid.y_spacings.iter().enumerate() {
        let load = q * grid.length * (grid.height - 0.5 * (ys[j] + ys[j + 1]));
        worst = worst.max(load / r.eval(h) - 1.0);
        let strip = 0.5 * (h + grid.y_spacings.get(j + 1).copied().unwrap_or(0.0));
        for (i, &l) in grid.x_spacings.iter().enumerate() {
            let load = q * strip * (grid.length - 0.5 * (xs[i] + xs[i + 1]));
            worst = worst.max(load / r.eval(l) - 1.0);
        }
    }
    worst
}

fn grid_2d() -> Outcome {
    let r = rate(Preset::Blue);
    let res = match solve_2d(&r, 5, L, L, None, 64) {
        Ok(res) => res,
        Err(e) => return outcome(false, e.to_string()),
    };
    let overload = grid_overload(&res.grid, &r, res.q_sup);
    let constant =
        match constant_grid(res.n_l, 5, L, L).and_then(|g| grid_qsup(&g, &r).map(|lim| (g, lim))) {
            Ok(c) => c,
            Err(e) => return outcome(false, e.to_string()),
        };
    let delta_const = constant.1.q_sup / constant.0.relay_count() as f64;
    let delta = res.delta();
    outcome(
        overload <= 1e-6 && res.q_sup == res.q_y && res.q_y < res.q_x && delta > delta_const,
        format!(
            "N_L = {}, nodes = {}, q_y = {:.4e} < q_x = {:.4e}, worst overload {overload:.1e}, delta {delta:.4e} vs constant {delta_const:.4e}",
            res.n_l, res.total_nodes, res.q_y, res.q_x
        ),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("capacity ceiling", ceiling),
        ("oracle equivalence", oracle),
        ("optimal spacing structure", structure),
        ("coverage monotone in load", monotone_coverage),
        ("short/long area dichotomy", dichotomy),
        ("spacing decay bound", decay),
        ("optimal beats constant spacing", baseline),
        ("vertical chain crossover", vertical),
        ("simulated stability region", stability),
        ("grid consistency", grid_2d),
    ];
    let mut failures = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let out = check();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status} {name}: {} [{:.2} s]",
            k + 1,
            out.detail,
            started.elapsed().as_secs_f64()
        );
        failures += usize::from(!out.pass);
    }
    println!(
        "acceptance: {}/{} passed",
        checks.len() - failures,
        checks.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
