//! Mamdani fuzzy classifier mapping (density, volume) to a box category.
//!
//! Pipeline per box: fuzzify both inputs with triangular membership functions,
//! fire every rule at `min(μ_density, μ_volume)`, clip each rule's output set at
//! its firing strength, sum the clipped sets pointwise over a uniform sampling
//! of the output domain and take the centroid. The crisp value is then decoded
//! to the output set with the largest membership.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterAssignment;
use crate::geometry::Frame;

/// Aggregated mass below this means no rule fired.
pub const MIN_AGGREGATE_MASS: f64 = 1e-12;

/// Output samples used for the discrete centroid.
pub const DEFAULT_RESOLUTION: usize = 1001;

/// Shipped membership parameters `(set, [a, b, c])` and domains.
pub mod defaults {
    pub const DENSITY_DOMAIN: [f64; 2] = [0.0, 1.0];
    pub const DENSITY_SETS: [(&str, [f64; 3]); 4] = [
        ("ZE", [0.0, 0.0, 0.1]),
        ("PS", [0.1, 0.2, 0.5]),
        ("PM", [0.4, 0.8, 0.9]),
        ("PB", [0.9, 1.0, 1.0]),
    ];

    pub const VOLUME_DOMAIN: [f64; 2] = [0.0, 35.0];
    pub const VOLUME_SETS: [(&str, [f64; 3]); 4] = [
        ("ZE", [0.0, 0.0, 3.0]),
        ("PS", [2.0, 5.0, 10.0]),
        ("PM", [9.0, 12.0, 20.0]),
        ("PB", [17.0, 20.0, 35.0]),
    ];

    pub const CLASS_DOMAIN: [f64; 2] = [0.0, 1.0];
    pub const CLASS_SETS: [(&str, [f64; 3]); 3] = [
        ("S", [0.0, 0.25, 0.35]),
        ("M", [0.34, 0.5, 0.65]),
        ("B", [0.64, 0.85, 1.0]),
    ];

    /// `(density, volume, class)` in the canonical listing order.
    pub const RULES: [(&str, &str, &str); 16] = [
        ("ZE", "ZE", "S"),
        ("ZE", "PM", "S"),
        ("ZE", "PS", "S"),
        ("ZE", "PB", "S"),
        ("PS", "ZE", "S"),
        ("PS", "PM", "M"),
        ("PS", "PS", "B"),
        ("PS", "PB", "B"),
        ("PM", "ZE", "M"),
        ("PM", "PM", "M"),
        ("PM", "PS", "B"),
        ("PM", "PB", "B"),
        ("PB", "ZE", "M"),
        ("PB", "PM", "B"),
        ("PB", "PS", "B"),
        ("PB", "PB", "B"),
    ];
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("membership function {set} has invalid parameters a={a}, b={b}, c={c} (need a <= b <= c, all finite)")]
    InvalidMembership { set: String, a: f64, b: f64, c: f64 },
    #[error("variable {variable}: support of set {set} lies outside the domain [{lo}, {hi}]")]
    SupportOutsideDomain { variable: String, set: String, lo: f64, hi: f64 },
    #[error("variable {variable}: invalid domain [{lo}, {hi}]")]
    InvalidDomain { variable: String, lo: f64, hi: f64 },
    #[error("variable {variable}: duplicate set name {set}")]
    DuplicateSet { variable: String, set: String },
    #[error("variable {0} has no sets")]
    NoSets(String),
    #[error("variable {variable} has no set named {set}")]
    UnknownSet { variable: String, set: String },
    #[error("duplicate rule for antecedent (density {density}, volume {volume})")]
    DuplicateRule { density: String, volume: String },
    #[error("rule table incomplete: missing antecedents {}", .missing.join(", "))]
    IncompleteRules { missing: Vec<String> },
    #[error("class variable must define sets S, M and B; missing {0}")]
    MissingClassSet(String),
    #[error("output resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error("input {name} is not finite: {value}")]
    NonFiniteInput { name: &'static str, value: f64 },
    #[error("{boxes} boxes but {assigned} cluster assignments")]
    LengthMismatch { boxes: usize, assigned: usize },
}

/// Triangle with feet `a`, `c` and peak `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularMf {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TriangularMf {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        let mf = Self { a, b, c };
        mf.check("<anonymous>")?;
        Ok(mf)
    }

    fn check(&self, set: &str) -> Result<(), FuzzyError> {
        let ok = [self.a, self.b, self.c].iter().all(|v| v.is_finite()) && self.a <= self.b && self.b <= self.c;
        if ok {
            Ok(())
        } else {
            Err(FuzzyError::InvalidMembership { set: set.to_string(), a: self.a, b: self.b, c: self.c })
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        mf_eval(self, x)
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        Self { a: p[0], b: p[1], c: p[2] }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

/// Triangular membership: rises on `[a, b]`, falls on `[b, c]`, zero elsewhere.
/// A vertical side (`a == b` or `b == c`) evaluates to 1 at the shared point.
pub fn mf_eval(mf: &TriangularMf, x: f64) -> f64 {
    let TriangularMf { a, b, c } = *mf;
    if x.is_nan() || x < a || x > c {
        return 0.0;
    }
    if x == b {
        return 1.0;
    }
    if x < b {
        (x - a) / (b - a)
    } else {
        (c - x) / (c - b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub name: String,
    pub mf: TriangularMf,
}

impl FuzzySet {
    pub fn new(name: impl Into<String>, mf: TriangularMf) -> Self {
        Self { name: name.into(), mf }
    }
}

/// A linguistic variable: a closed domain and its named fuzzy sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    pub domain: [f64; 2],
    pub sets: Vec<FuzzySet>,
}

impl FuzzyVariable {
    pub fn new(name: impl Into<String>, domain: [f64; 2], sets: Vec<FuzzySet>) -> Result<Self, FuzzyError> {
        let var = Self { name: name.into(), domain, sets };
        var.validate()?;
        Ok(var)
    }

    pub fn from_table(name: &str, domain: [f64; 2], table: &[(&str, [f64; 3])]) -> Result<Self, FuzzyError> {
        let sets = table
            .iter()
            .map(|(n, p)| FuzzySet::new(*n, TriangularMf::from_array(*p)))
            .collect();
        Self::new(name, domain, sets)
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::InvalidDomain { variable: self.name.clone(), lo, hi });
        }
        if self.sets.is_empty() {
            return Err(FuzzyError::NoSets(self.name.clone()));
        }
        for (i, s) in self.sets.iter().enumerate() {
            s.mf.check(&s.name)?;
            if s.mf.a < lo || s.mf.c > hi {
                return Err(FuzzyError::SupportOutsideDomain {
                    variable: self.name.clone(),
                    set: s.name.clone(),
                    lo,
                    hi,
                });
            }
            if self.sets[..i].iter().any(|o| o.name == s.name) {
                return Err(FuzzyError::DuplicateSet { variable: self.name.clone(), set: s.name.clone() });
            }
        }
        Ok(())
    }

    pub fn set_index(&self, name: &str) -> Option<usize> {
        self.sets.iter().position(|s| s.name == name)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.domain[0], self.domain[1])
    }

    /// Degree of membership of `x` in every set, after clamping `x` into the
    /// domain. A clamped value sitting on a domain edge belongs fully to any
    /// set whose support reaches that edge.
    pub fn membership(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sets.len()];
        self.membership_into(x, &mut out);
        out
    }

    fn membership_into(&self, x: f64, out: &mut [f64]) {
        let [lo, hi] = self.domain;
        let x = self.clamp(x);
        for (slot, s) in out.iter_mut().zip(&self.sets) {
            let on_edge = (x >= hi && s.mf.c >= hi) || (x <= lo && s.mf.a <= lo);
            *slot = if on_edge { 1.0 } else { s.mf.eval(x) };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub density: String,
    pub volume: String,
    pub class: String,
}

impl Rule {
    pub fn new(density: &str, volume: &str, class: &str) -> Self {
        Self { density: density.into(), volume: volume.into(), class: class.into() }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "If (density is {}) and (volume is {}) then (class is {})", self.density, self.volume, self.class)
    }
}

/// Complete IF-THEN table: exactly one rule per (density set, volume set) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    rules: Vec<Rule>,
    /// `consequent[d * n_volume + v]` is the class set index.
    consequent: Vec<usize>,
    n_volume: usize,
}

impl RuleBase {
    pub fn new(
        rules: Vec<Rule>,
        density: &FuzzyVariable,
        volume: &FuzzyVariable,
        class: &FuzzyVariable,
    ) -> Result<Self, FuzzyError> {
        let unknown = |variable: &FuzzyVariable, set: &str| FuzzyError::UnknownSet {
            variable: variable.name.clone(),
            set: set.to_string(),
        };
        let n_volume = volume.sets.len();
        let mut consequent: Vec<Option<usize>> = vec![None; density.sets.len() * n_volume];
        for r in &rules {
            let d = density.set_index(&r.density).ok_or_else(|| unknown(density, &r.density))?;
            let v = volume.set_index(&r.volume).ok_or_else(|| unknown(volume, &r.volume))?;
            let c = class.set_index(&r.class).ok_or_else(|| unknown(class, &r.class))?;
            let slot = &mut consequent[d * n_volume + v];
            if slot.is_some() {
                return Err(FuzzyError::DuplicateRule { density: r.density.clone(), volume: r.volume.clone() });
            }
            *slot = Some(c);
        }
        let missing: Vec<String> = consequent
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(i, _)| format!("{}∧{}", density.sets[i / n_volume].name, volume.sets[i % n_volume].name))
            .collect();
        if !missing.is_empty() {
            return Err(FuzzyError::IncompleteRules { missing });
        }
        Ok(Self { rules, consequent: consequent.into_iter().flatten().collect(), n_volume })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn consequent(&self, density_set: usize, volume_set: usize) -> usize {
        self.consequent[density_set * self.n_volume + volume_set]
    }
}

/// The three suppression categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Low density (output set S).
    #[serde(rename = "LD")]
    Ld,
    /// Small volume, high density (output set M).
    #[serde(rename = "SVHD")]
    Svhd,
    /// Large volume, high density (output set B).
    #[serde(rename = "LVHD")]
    Lvhd,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Ld, Category::Svhd, Category::Lvhd];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Ld => "LD",
            Category::Svhd => "SVHD",
            Category::Lvhd => "LVHD",
        }
    }

    pub fn from_class_set(name: &str) -> Option<Self> {
        match name {
            "S" => Some(Category::Ld),
            "M" => Some(Category::Svhd),
            "B" => Some(Category::Lvhd),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LD" => Ok(Category::Ld),
            "SVHD" => Ok(Category::Svhd),
            "LVHD" => Ok(Category::Lvhd),
            other => Err(format!("unknown category {other}")),
        }
    }
}

/// Decoded category together with the crisp value it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCategory {
    pub category: Category,
    pub v_o: f64,
}

/// Crisp output of one inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub v_o: f64,
    /// Set when no rule fired and `v_o` fell back to the domain midpoint.
    pub degenerate: bool,
}

/// Everything the classifier derived for one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAnalysis {
    pub cluster_id: u32,
    pub density: f64,
    pub volume: f64,
    pub v_o: f64,
    pub category: Category,
    pub degenerate: bool,
}

/// Decodes a crisp value to the class set with the highest membership.
/// Ties go to the set whose peak is closest, then to declaration order.
pub fn classify(v_o: f64, class_var: &FuzzyVariable) -> BoxCategory {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, s) in class_var.sets.iter().enumerate() {
        let mu = s.mf.eval(v_o);
        let gap = (v_o - s.mf.b).abs();
        let better = match best {
            None => true,
            Some((_, bmu, bgap)) => mu > bmu || (mu == bmu && gap < bgap),
        };
        if better {
            best = Some((i, mu, gap));
        }
    }
    let idx = best.map(|(i, _, _)| i).unwrap_or(0);
    let category = Category::from_class_set(&class_var.sets[idx].name).unwrap_or(Category::Ld);
    BoxCategory { category, v_o }
}

/// Immutable inference engine; cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySystem {
    density: FuzzyVariable,
    volume: FuzzyVariable,
    class: FuzzyVariable,
    rules: RuleBase,
    samples: Vec<f64>,
    /// Output set memberships at every sample.
    class_curves: Vec<Vec<f64>>,
    class_categories: Vec<Category>,
}

impl Default for FuzzySystem {
    fn default() -> Self {
        let density = FuzzyVariable::from_table("density", defaults::DENSITY_DOMAIN, &defaults::DENSITY_SETS)
            .expect("default density variable");
        let volume = FuzzyVariable::from_table("volume", defaults::VOLUME_DOMAIN, &defaults::VOLUME_SETS)
            .expect("default volume variable");
        let class = FuzzyVariable::from_table("class", defaults::CLASS_DOMAIN, &defaults::CLASS_SETS)
            .expect("default class variable");
        let rules = defaults::RULES.iter().map(|(d, v, c)| Rule::new(d, v, c)).collect();
        Self::new(density, volume, class, rules, DEFAULT_RESOLUTION).expect("default fuzzy system")
    }
}

impl FuzzySystem {
    pub fn new(
        density: FuzzyVariable,
        volume: FuzzyVariable,
        class: FuzzyVariable,
        rules: Vec<Rule>,
        resolution: usize,
    ) -> Result<Self, FuzzyError> {
        density.validate()?;
        volume.validate()?;
        class.validate()?;
        if resolution < 2 {
            return Err(FuzzyError::InvalidResolution(resolution));
        }
        for required in ["S", "M", "B"] {
            if class.set_index(required).is_none() {
                return Err(FuzzyError::MissingClassSet(required.to_string()));
            }
        }
        let class_categories = class
            .sets
            .iter()
            .map(|s| Category::from_class_set(&s.name).ok_or_else(|| FuzzyError::MissingClassSet(s.name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let rules = RuleBase::new(rules, &density, &volume, &class)?;

        let [lo, hi] = class.domain;
        let step = (hi - lo) / (resolution - 1) as f64;
        let samples: Vec<f64> = (0..resolution).map(|i| lo + step * i as f64).collect();
        let class_curves = class
            .sets
            .iter()
            .map(|s| samples.iter().map(|&v| s.mf.eval(v)).collect())
            .collect();
        Ok(Self { density, volume, class, rules, samples, class_curves, class_categories })
    }

    pub fn density(&self) -> &FuzzyVariable {
        &self.density
    }

    pub fn volume(&self) -> &FuzzyVariable {
        &self.volume
    }

    pub fn class(&self) -> &FuzzyVariable {
        &self.class
    }

    pub fn rules(&self) -> &RuleBase {
        &self.rules
    }

    pub fn resolution(&self) -> usize {
        self.samples.len()
    }

    /// Firing strength of each rule, in rule-table order.
    pub fn rule_strengths(&self, density: f64, volume: f64) -> Vec<f64> {
        let md = self.density.membership(density);
        let mv = self.volume.membership(volume);
        self.rules
            .rules()
            .iter()
            .map(|r| {
                let d = self.density.set_index(&r.density).expect("validated");
                let v = self.volume.set_index(&r.volume).expect("validated");
                md[d].min(mv[v])
            })
            .collect()
    }

    /// Crisp classification value for one (density, volume) pair.
    pub fn infer(&self, density: f64, volume: f64) -> Result<Inference, FuzzyError> {
        if !density.is_finite() {
            return Err(FuzzyError::NonFiniteInput { name: "density", value: density });
        }
        if !volume.is_finite() {
            return Err(FuzzyError::NonFiniteInput { name: "volume", value: volume });
        }
        let md = self.density.membership(density);
        let mv = self.volume.membership(volume);

        let mut fired: Vec<(usize, f64)> = Vec::with_capacity(4);
        for (d, &wd) in md.iter().enumerate() {
            if wd <= 0.0 {
                continue;
            }
            for (v, &wv) in mv.iter().enumerate() {
                let w = wd.min(wv);
                if w > 0.0 {
                    fired.push((self.rules.consequent(d, v), w));
                }
            }
        }

        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &v) in self.samples.iter().enumerate() {
            let mut mass = 0.0;
            for &(cls, w) in &fired {
                mass += w.min(self.class_curves[cls][i]);
            }
            num += v * mass;
            den += mass;
        }
        if den < MIN_AGGREGATE_MASS {
            let [lo, hi] = self.class.domain;
            return Ok(Inference { v_o: 0.5 * (lo + hi), degenerate: true });
        }
        let v_o = (num / den).clamp(self.class.domain[0], self.class.domain[1]);
        Ok(Inference { v_o, degenerate: false })
    }

    pub fn classify(&self, v_o: f64) -> BoxCategory {
        classify(v_o, &self.class)
    }

    pub fn category_of_set(&self, class_set: usize) -> Category {
        self.class_categories[class_set]
    }

    /// Classifies every box of `frame`, reusing results for repeated
    /// (density, volume) pairs within the frame.
    pub fn classify_boxes(&self, frame: &Frame, assignment: &ClusterAssignment) -> Result<Vec<BoxAnalysis>, FuzzyError> {
        if frame.boxes.len() != assignment.len() || assignment.density.len() != assignment.len() {
            return Err(FuzzyError::LengthMismatch { boxes: frame.boxes.len(), assigned: assignment.len() });
        }
        let mut memo = InferenceMemo::new(self);
        frame
            .boxes
            .iter()
            .zip(assignment.cluster_ids.iter().zip(&assignment.density))
            .map(|(b, (&cluster_id, &density))| {
                let volume = b.volume();
                let inf = memo.infer(density, volume)?;
                Ok(BoxAnalysis {
                    cluster_id,
                    density,
                    volume,
                    v_o: inf.v_o,
                    category: self.classify(inf.v_o).category,
                    degenerate: inf.degenerate,
                })
            })
            .collect()
    }
}

/// Per-frame cache of inference results keyed on the exact input bits.
pub struct InferenceMemo<'a> {
    system: &'a FuzzySystem,
    cache: HashMap<(u64, u64), Inference>,
}

impl<'a> InferenceMemo<'a> {
    pub fn new(system: &'a FuzzySystem) -> Self {
        Self { system, cache: HashMap::new() }
    }

    pub fn infer(&mut self, density: f64, volume: f64) -> Result<Inference, FuzzyError> {
        let key = (density.to_bits(), volume.to_bits());
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let inf = self.system.infer(density, volume)?;
        self.cache.insert(key, inf);
        Ok(inf)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// Per-box classification as a free function.
pub fn classify_boxes(frame: &Frame, assignment: &ClusterAssignment, system: &FuzzySystem) -> Result<Vec<BoxAnalysis>, FuzzyError> {
    system.classify_boxes(frame, assignment)
}
