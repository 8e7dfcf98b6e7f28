#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fuzzy_nms::kitti::KittiRecord;
use fuzzy_nms::Box3D;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fuzzy-nms"));
    c.env_remove("FUZZY_NMS_CONFIG");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A KITTI line for `b` (in the z-up frame) with the given 2D box.
pub fn line(kind: &str, b: &Box3D, score: Option<f64>, bbox: [f64; 4]) -> String {
    let template = KittiRecord {
        kind: kind.into(),
        truncated: 0.0,
        occluded: 0,
        alpha: 0.0,
        bbox_2d: bbox,
        h: 1.0,
        w: 1.0,
        l: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
        rotation_y: 0.0,
        score: None,
    };
    template.with_box(b, score).to_line()
}

pub fn write_frame(dir: &Path, id: &str, lines: &[String]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    std::fs::write(dir.join(format!("{id}.txt")), text).unwrap();
}

fn bx(cx: f64, cy: f64, dims: [f64; 3], yaw: f64, label: u32, score: f64) -> Box3D {
    Box3D::new([cx, cy, -0.8], dims, yaw, label, score).unwrap()
}

/// Five frames mixing crowded cars, pedestrians and isolated objects.
/// Returns the detection and label directories.
pub fn five_frame_fixture(root: &Path) -> (PathBuf, PathBuf) {
    let dets = root.join("det");
    let labels = root.join("label");
    let car = [3.9, 1.6, 1.5];
    let ped = [0.8, 0.6, 1.7];
    for f in 0..5 {
        let mut d = Vec::new();
        let mut g = Vec::new();
        let base = 10.0 + 4.0 * f as f64;
        // A car with a cluster of jittered duplicates.
        let truth = bx(base, 2.0, car, 0.1 * f as f64, 0, 1.0);
        g.push(line("Car", &truth, None, [100.0, 150.0, 200.0, 230.0]));
        for k in 0..6 {
            let j = 0.04 * k as f64;
            let b = bx(base + j, 2.0 - j, car, 0.1 * f as f64 + 0.01 * k as f64, 0, 0.95 - 0.1 * k as f64);
            d.push(line("Car", &b, Some(b.score), [100.0, 150.0, 200.0, 230.0]));
        }
        // A pedestrian pair and a lone, low-confidence pedestrian.
        for (k, cy) in [-3.0, -3.65].iter().enumerate() {
            let t = bx(base, *cy, ped, 0.0, 1, 1.0);
            g.push(line("Pedestrian", &t, None, [300.0 + 30.0 * k as f64, 160.0, 320.0 + 30.0 * k as f64, 220.0]));
            let b = bx(base + 0.05, *cy, ped, 0.0, 1, 0.8 - 0.1 * k as f64);
            d.push(line("Pedestrian", &b, Some(b.score), [300.0 + 30.0 * k as f64, 160.0, 320.0 + 30.0 * k as f64, 220.0]));
        }
        let lone = bx(base + 15.0, 8.0, ped, 1.0, 1, 0.05);
        d.push(line("Pedestrian", &lone, Some(lone.score), [500.0, 170.0, 515.0, 210.0]));
        write_frame(&dets, &format!("{f:06}"), &d);
        write_frame(&labels, &format!("{f:06}"), &g);
    }
    (dets, labels)
}
