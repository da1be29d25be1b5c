//! Oracle comparisons shared by the solver tests and the acceptance suite.

use super::dense_mna::solve_text;
use xbar_core::devices::{ReramParams, Technology};
use xbar_core::solver::{solve_dc, SolverOptions};
use xbar_core::topology::{build, CrossbarConfig, Element, Netlist, Parasitics, Topology};
use xbar_core::workload::WorkloadSampler;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Largest relative deviation of node voltages and sense currents over every
/// Level0 net with n, m ≤ 4.
pub fn worst_level0_oracle_error(patterns_per_shape: u64) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut nets = 0;
    for tech in Technology::ALL {
        for topology in [Topology::GateInput, Topology::DrainInput] {
            for n in 1..=4 {
                for m in 1..=4 {
                    for (k, par) in [Parasitics::default(), Parasitics::zero(), Parasitics::default().scaled(20.0)]
                        .into_iter()
                        .enumerate()
                    {
                        let cfg = CrossbarConfig {
                            topology,
                            parasitics: par,
                            ..CrossbarConfig::new(tech, n, m)
                        };
                        let cell = cfg.bit_cell().unwrap();
                        for s in 0..patterns_per_shape {
                            let p = WorkloadSampler::default().sample(n, m, 11 + k as u64, s);
                            let net = build(&cfg, &cell, &p.weights, &p.inputs, None).unwrap();
                            let got = solve_dc(&net, &SolverOptions::default()).unwrap();
                            let want = solve_text(&net.export()).expect("level0 nets are linear");
                            for (g, w) in got.voltages.iter().zip(&want.voltages) {
                                if w.abs() > 1e-12 {
                                    worst = worst.max(rel(*g, *w));
                                } else {
                                    assert!(g.abs() < 1e-12);
                                }
                            }
                            for (g, w) in got.column_currents.iter().zip(&want.sense) {
                                if *w != 0.0 {
                                    worst = worst.max(rel(*g, *w));
                                } else {
                                    assert!(g.abs() < 1e-18);
                                }
                            }
                            nets += 1;
                        }
                    }
                }
            }
        }
    }
    (worst, nets)
}

/// Scalar bisection on `(V − v)/R = I(v)` for a ReRAM element behind a resistor.
pub fn reram_bisection(p: &ReramParams, v: f64, r: f64) -> f64 {
    let f = |x: f64| (v - x) / r - p.i0 * (-p.gap_nm / p.g0_nm).exp() * (x / p.v0).sinh();
    let (mut lo, mut hi) = (0.0, v);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn two_node_reram_error() -> f64 {
    let mut worst: f64 = 0.0;
    for gap in [0.34, 0.53, 0.8, 1.09] {
        for (v, r) in [(0.25, 500.0), (0.7, 2e3), (1.0, 100.0), (0.05, 1e4)] {
            let p = ReramParams::default().with_gap(gap).unwrap();
            let text = format!(
                "nodes 4\nV 1 {v:?}\nR 1 2 {r:?}\nC 2 3 sinh:{:?}:{:?}:{:?}:{:?}\nR 3 0 0.0 sense 0\n",
                p.i0, p.g0_nm, p.v0, p.gap_nm
            );
            let net = Netlist::parse(&text).unwrap();
            assert!(matches!(net.elements[1], Element::Device { .. }));
            let got = solve_dc(&net, &SolverOptions::default()).unwrap();
            let vx = reram_bisection(&p, v, r);
            let e = rel(got.voltages[2], vx).max(rel(got.column_currents[0], (v - vx) / r));
            worst = worst.max(e);
        }
    }
    worst
}
