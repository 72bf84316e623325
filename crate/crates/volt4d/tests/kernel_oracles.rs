//! Library kernels against the reference loops in `common`, over randomized
//! shapes and geometries. Every comparison is elementwise in f64.

mod common;

use volt4d::layers::conv::Conv4dStrategy;

const TOL: f64 = 1e-10;

#[test]
fn conv3d_matches_the_reference_loops() {
    let worst = common::conv3d_oracle_max_diff(120, 0x31);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn conv4d_direct_matches_the_reference_loops() {
    let worst = common::conv4d_oracle_max_diff(110, 0x41, Conv4dStrategy::Direct);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn conv4d_decomposition_matches_the_reference_loops() {
    let worst = common::conv4d_oracle_max_diff(110, 0x42, Conv4dStrategy::TemporalDecomposition);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn conv4d_strategies_agree_across_randomized_geometries() {
    let worst = common::conv4d_strategy_max_diff(150, 0x44);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn pooling_matches_the_reference_windowed_mean() {
    let worst = common::pool_oracle_max_diff(120, 0x50);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn dense_matches_the_reference_affine_map() {
    let worst = common::dense_oracle_max_diff(150, 0x60);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}

#[test]
fn gru_step_matches_the_reference_gate_arithmetic() {
    let worst = common::gru_oracle_max_diff(100, 0x70);
    assert!(worst < TOL, "max abs diff {worst:.3e}");
}
