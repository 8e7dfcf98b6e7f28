#![allow(dead_code)]

use fuzzy_nms::Box3D;
use proptest::prelude::*;

pub fn arb_box() -> impl Strategy<Value = Box3D> {
    (
        -20.0..20.0f64,
        -20.0..20.0f64,
        -2.0..2.0f64,
        0.2..6.0f64,
        0.2..3.0f64,
        0.3..3.0f64,
        -4.0..4.0f64,
        0.0..=1.0f64,
    )
        .prop_map(|(cx, cy, cz, dx, dy, dz, yaw, s)| Box3D::new([cx, cy, cz], [dx, dy, dz], yaw, 0, s).unwrap())
}

/// Boxes packed into a small area so that overlaps are common.
pub fn arb_crowded_box() -> impl Strategy<Value = Box3D> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        -0.5..0.5f64,
        0.3..4.5f64,
        0.3..2.0f64,
        0.5..2.0f64,
        -3.2..3.2f64,
        0.0..=1.0f64,
    )
        .prop_map(|(cx, cy, cz, dx, dy, dz, yaw, s)| Box3D::new([cx, cy, cz], [dx, dy, dz], yaw, 0, s).unwrap())
}

pub fn arb_frame(max: usize) -> impl Strategy<Value = Vec<Box3D>> {
    prop::collection::vec(arb_crowded_box(), 0..max)
}

pub mod oracles;
pub mod golden;
