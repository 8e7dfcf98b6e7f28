//! Plot-ready CSV dumps of the fuzzy system and of per-box classifications.

use std::fmt::Write as _;

use fuzzy_nms::clustering;
use fuzzy_nms::fuzzy::FuzzyVariable;
use fuzzy_nms::pipeline::Engine;
use fuzzy_nms::KittiFrame;

use crate::{engine, frames, resolve_config, thread_pool, write_file, Failure, InspectArgs};

const CURVE_SAMPLES: usize = 200;
const DENSITY_BINS: usize = 20;
const VOLUME_BINS: usize = 35;

pub fn inspect(args: InspectArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let pool = thread_pool(args.common.jobs)?;
    let engine = engine(cfg)?;
    write_file(&args.output, "mf_curves.csv", &mf_curves(&engine))?;

    let Some(input) = &args.input else {
        return Ok(());
    };
    let mut frames = pool.install(|| frames::load(input, None, &engine.config.parse_options()))?;
    if let Some(id) = &args.frame {
        frames.retain(|f| f.id() == id);
        if frames.is_empty() {
            return Err(Failure::new(Failure::MISSING_INPUT, anyhow::anyhow!("frame {id} not found in {}", input.display())));
        }
    }
    let dumps = BoxDumps::collect(&engine, &frames)?;
    write_file(&args.output, "boxes.csv", &dumps.boxes)?;
    write_file(&args.output, "rule_firings.csv", &dumps.firings)?;
    write_file(&args.output, "density_hist.csv", &histogram(&dumps.densities, [0.0, 1.0], DENSITY_BINS))?;
    write_file(&args.output, "volume_hist.csv", &histogram(&dumps.volumes, [0.0, 35.0], VOLUME_BINS))?;
    Ok(())
}

/// `variable,set,x,mu` over an evenly spaced grid of each domain.
fn mf_curves(engine: &Engine) -> String {
    let mut out = String::from("variable,set,x,mu\n");
    let vars: [&FuzzyVariable; 3] = [engine.system.density(), engine.system.volume(), engine.system.class()];
    for var in vars {
        let [lo, hi] = var.domain;
        for set in &var.sets {
            for i in 0..=CURVE_SAMPLES {
                let x = lo + (hi - lo) * i as f64 / CURVE_SAMPLES as f64;
                let _ = writeln!(out, "{},{},{},{}", var.name, set.name, x, set.mf.eval(x));
            }
        }
    }
    out
}

struct BoxDumps {
    boxes: String,
    firings: String,
    densities: Vec<f64>,
    volumes: Vec<f64>,
}

impl BoxDumps {
    fn collect(engine: &Engine, frames: &[KittiFrame]) -> Result<Self, Failure> {
        let mut d = Self {
            boxes: String::from("frame_id,index,type,score,cluster_id,density,volume,v_O,category,degenerate\n"),
            firings: String::from("frame_id,index,density_set,volume_set,class_set,strength\n"),
            densities: Vec::new(),
            volumes: Vec::new(),
        };
        let rules = engine.system.rules().rules();
        for f in frames {
            let assignment = clustering::estimate(&f.frame, &engine.config.dbscan);
            let analysis = engine.system.classify_boxes(&f.frame, &assignment).map_err(|e| anyhow::anyhow!(e))?;
            for (i, a) in analysis.iter().enumerate() {
                let _ = writeln!(
                    d.boxes,
                    "{},{},{},{},{},{},{},{},{},{}",
                    f.id(),
                    i,
                    f.detections[i].kind,
                    f.frame.boxes[i].score,
                    a.cluster_id,
                    a.density,
                    a.volume,
                    a.v_o,
                    a.category,
                    a.degenerate
                );
                for (r, w) in rules.iter().zip(engine.system.rule_strengths(a.density, a.volume)) {
                    if w > 0.0 {
                        let _ = writeln!(d.firings, "{},{},{},{},{},{}", f.id(), i, r.density, r.volume, r.class, w);
                    }
                }
                d.densities.push(a.density);
                d.volumes.push(a.volume);
            }
        }
        Ok(d)
    }
}

/// Equal-width bins over `range`; values outside land in the edge bins.
fn histogram(values: &[f64], range: [f64; 2], bins: usize) -> String {
    let [lo, hi] = range;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v - lo) / width).floor();
        counts[(b.max(0.0) as usize).min(bins - 1)] += 1;
    }
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", lo + width * i as f64, lo + width * (i + 1) as f64, c);
    }
    out
}
