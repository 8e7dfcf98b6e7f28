//! The default configuration typed out by hand, independently of the library defaults.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fuzzy_nms::clustering::DbscanParams;
use fuzzy_nms::config::ToolkitConfig;
use fuzzy_nms::eval::RecallPoints;
use fuzzy_nms::fuzzy::{FuzzySet, FuzzyVariable, Rule, TriangularMf};
use fuzzy_nms::geometry::IouMode;
use fuzzy_nms::kitti::{CategoryMap, UnknownCategory};
use fuzzy_nms::nms::{CategoryThresholds, NmsConfig, SoftNmsParams, SoftPenalty};

fn var(name: &str, domain: [f64; 2], sets: &[(&str, f64, f64, f64)]) -> FuzzyVariable {
    FuzzyVariable {
        name: name.into(),
        domain,
        sets: sets.iter().map(|&(n, a, b, c)| FuzzySet::new(n, TriangularMf { a, b, c })).collect(),
    }
}

pub fn golden() -> ToolkitConfig {
    let rules = [
        ("ZE", "ZE", "S"), ("ZE", "PM", "S"), ("ZE", "PS", "S"), ("ZE", "PB", "S"),
        ("PS", "ZE", "S"), ("PS", "PM", "M"), ("PS", "PS", "B"), ("PS", "PB", "B"),
        ("PM", "ZE", "M"), ("PM", "PM", "M"), ("PM", "PS", "B"), ("PM", "PB", "B"),
        ("PB", "ZE", "M"), ("PB", "PM", "B"), ("PB", "PS", "B"), ("PB", "PB", "B"),
    ];
    let categories: BTreeMap<String, u32> = [
        ("Car", 0), ("Pedestrian", 1), ("Cyclist", 2), ("Van", 3),
        ("Truck", 4), ("Person_sitting", 5), ("Tram", 6), ("Misc", 7),
    ]
    .iter()
    .map(|&(k, v)| (k.to_string(), v))
    .collect();
    ToolkitConfig {
        version: 1,
        density: var("density", [0.0, 1.0], &[("ZE", 0.0, 0.0, 0.1), ("PS", 0.1, 0.2, 0.5), ("PM", 0.4, 0.8, 0.9), ("PB", 0.9, 1.0, 1.0)]),
        volume: var("volume", [0.0, 35.0], &[("ZE", 0.0, 0.0, 3.0), ("PS", 2.0, 5.0, 10.0), ("PM", 9.0, 12.0, 20.0), ("PB", 17.0, 20.0, 35.0)]),
        class: var("class", [0.0, 1.0], &[("S", 0.0, 0.25, 0.35), ("M", 0.34, 0.5, 0.65), ("B", 0.64, 0.85, 1.0)]),
        rules: rules.iter().map(|&(d, v, c)| Rule::new(d, v, c)).collect(),
        resolution: 1001,
        nms: NmsConfig {
            iou_threshold: CategoryThresholds { ld: 0.01, lvhd: 0.6, svhd: 0.0 },
            score_threshold: CategoryThresholds { ld: 0.1, lvhd: 0.1, svhd: 0.3 },
            iou_mode: IouMode::Bev,
            pre_filter_score: None,
        },
        dbscan: DbscanParams { eps: 0.3, min_pts: 4 },
        soft: SoftNmsParams { penalty: SoftPenalty::Gaussian { sigma: 0.5 }, final_threshold: 0.001, iou_mode: IouMode::Bev },
        categories: CategoryMap(categories),
        unknown_category: UnknownCategory::Skip,
        recall: RecallPoints::R40,
    }
}
