mod support;

use support::checks::{two_node_reram_error, worst_level0_oracle_error};
use support::dense_mna::solve_text;

#[test]
fn sparse_solver_matches_dense_mna_on_small_level0_nets() {
    let (worst, nets) = worst_level0_oracle_error(4);
    assert_eq!(nets, 4 * 2 * 16 * 3 * 4);
    assert!(worst <= 1e-9, "worst relative deviation {worst:e}");
}

#[test]
fn newton_matches_bisection_on_two_node_reram_net() {
    let worst = two_node_reram_error();
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn oracle_reads_its_own_example() {
    // 1 V across 1 kΩ + 0 Ω + 3 kΩ: 0.25 mA.
    let s = solve_text("nodes 4\nV 1 1.0\nR 1 2 1000.0\nR 2 3 0.0\nC 3 0 lin:3000.0 \nR 3 0 1e300 sense 0\n").unwrap();
    assert!((s.voltages[2] - 0.75).abs() < 1e-15);
    assert!((s.voltages[3] - 0.75).abs() < 1e-15);
}
