//! Hyper-parameter spaces with conditional parameters, the combinations drawn
//! from them, the Hamming distance between combinations, and the rules that
//! mark combinations invalid or infeasible.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::dataset::DatasetMeta;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Serialized form of an inactive parameter.
pub const INACTIVE: &str = "INACTIVE";
/// Prefix of every feature-selection parameter.
pub const FS_PREFIX: &str = "fs.";
/// The switch that turns feature selection on for a combination.
pub const FS_USE: &str = "fs.use";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
    Inactive,
}

impl Value {
    pub fn is_active(&self) -> bool {
        !matches!(self, Value::Inactive)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
            Value::Inactive => f.write_str(INACTIVE),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Num(v) => s.serialize_f64(*v),
            Value::Cat(c) => s.serialize_str(c),
            Value::Inactive => s.serialize_str(INACTIVE),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Value;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, a category string, or \"INACTIVE\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Value, E> {
                Ok(Value::Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Value, E> {
                Ok(Value::Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Value, E> {
                Ok(Value::Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Value, E> {
                Ok(if v == INACTIVE {
                    Value::Inactive
                } else {
                    Value::Cat(v.to_string())
                })
            }
            fn visit_unit<E: de::Error>(self) -> std::result::Result<Value, E> {
                Ok(Value::Inactive)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamKind {
    Numeric {
        min: f64,
        max: f64,
        #[serde(default = "default_scale")]
        scale: Scale,
        #[serde(default)]
        integer: bool,
    },
    Categorical {
        levels: Vec<String>,
    },
}

fn default_scale() -> Scale {
    Scale::Linear
}

/// A parameter is active only when `parent` is active and holds one of
/// `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParam {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub default: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl HyperParam {
    pub fn numeric(name: &str, min: f64, max: f64, scale: Scale, integer: bool, default: f64) -> Self {
        HyperParam {
            name: name.to_string(),
            kind: ParamKind::Numeric {
                min,
                max,
                scale,
                integer,
            },
            default: Value::Num(default),
            condition: None,
        }
    }

    pub fn categorical(name: &str, levels: &[&str], default: &str) -> Self {
        HyperParam {
            name: name.to_string(),
            kind: ParamKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
            default: Value::Cat(default.to_string()),
            condition: None,
        }
    }

    pub fn when(mut self, parent: &str, values: &[&str]) -> Self {
        self.condition = Some(Condition {
            parent: parent.to_string(),
            values: values.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    /// Position of a numeric value on the declared scale.
    fn on_scale(&self, v: f64) -> f64 {
        match self.kind {
            ParamKind::Numeric { scale: Scale::Log, .. } => v.ln(),
            _ => v,
        }
    }

    fn scaled_span(&self) -> f64 {
        match self.kind {
            ParamKind::Numeric { min, max, .. } => self.on_scale(max) - self.on_scale(min),
            ParamKind::Categorical { .. } => 0.0,
        }
    }

    /// Whether two values of this parameter count as different.
    pub fn differs(&self, a: &Value, b: &Value) -> bool {
        match (a, b) {
            (Value::Inactive, Value::Inactive) => false,
            (Value::Inactive, _) | (_, Value::Inactive) => true,
            (Value::Num(x), Value::Num(y)) => {
                (self.on_scale(*x) - self.on_scale(*y)).abs() > 0.01 * self.scaled_span()
            }
            (Value::Cat(x), Value::Cat(y)) => x != y,
            _ => true,
        }
    }

    /// Maps a value to [0, 1] on the declared scale (categoricals to their
    /// level index).
    pub fn encode(&self, v: &Value) -> f64 {
        match (&self.kind, v) {
            (_, Value::Inactive) => -1.0,
            (ParamKind::Numeric { min, .. }, Value::Num(x)) => {
                let span = self.scaled_span();
                if span > 0.0 {
                    (self.on_scale(*x) - self.on_scale(*min)) / span
                } else {
                    0.0
                }
            }
            (ParamKind::Categorical { levels }, Value::Cat(c)) => {
                levels.iter().position(|l| l == c).map_or(-1.0, |i| i as f64)
            }
            _ => -1.0,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Value {
        match &self.kind {
            ParamKind::Numeric {
                min,
                max,
                scale,
                integer,
            } => {
                let v = match scale {
                    Scale::Linear => rng.gen_range(*min..=*max),
                    Scale::Log => rng.gen_range(min.ln()..=max.ln()).exp(),
                };
                Value::Num(self.snap(v, *min, *max, *integer))
            }
            ParamKind::Categorical { levels } => {
                Value::Cat(levels[rng.gen_range(0..levels.len())].clone())
            }
        }
    }

    fn snap(&self, v: f64, min: f64, max: f64, integer: bool) -> f64 {
        let v = v.clamp(min, max);
        if integer {
            v.round().clamp(min.ceil(), max.floor())
        } else {
            v
        }
    }

    /// A value one step away from `current`: a gaussian move on the scaled
    /// axis for numerics, a different level for categoricals.
    pub fn perturb(&self, current: &Value, rng: &mut Rng) -> Value {
        match (&self.kind, current) {
            (
                ParamKind::Numeric {
                    min,
                    max,
                    scale,
                    integer,
                },
                Value::Num(x),
            ) => {
                let span = self.scaled_span();
                let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                let moved = self.on_scale(*x) + 0.2 * span * z;
                let v = match scale {
                    Scale::Linear => moved,
                    Scale::Log => moved.exp(),
                };
                Value::Num(self.snap(v, *min, *max, *integer))
            }
            (ParamKind::Categorical { levels }, Value::Cat(c)) if levels.len() > 1 => {
                let others: Vec<&String> = levels.iter().filter(|l| *l != c).collect();
                Value::Cat(others[rng.gen_range(0..others.len())].clone())
            }
            _ => self.sample(rng),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (&self.kind, v) {
            (ParamKind::Numeric { min, max, integer, .. }, Value::Num(x)) => {
                *x >= *min && *x <= *max && (!integer || x.fract() == 0.0)
            }
            (ParamKind::Categorical { levels }, Value::Cat(c)) => levels.contains(c),
            _ => false,
        }
    }
}

/// A set of hyper-parameters whose conditions form a DAG. Parameters are kept
/// in an order where every parent precedes its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HyperParam>", into = "Vec<HyperParam>")]
pub struct HyperSpace {
    params: Vec<HyperParam>,
}

impl TryFrom<Vec<HyperParam>> for HyperSpace {
    type Error = Error;
    fn try_from(params: Vec<HyperParam>) -> Result<Self> {
        HyperSpace::new(params)
    }
}

impl From<HyperSpace> for Vec<HyperParam> {
    fn from(s: HyperSpace) -> Self {
        s.params
    }
}

impl HyperSpace {
    pub fn empty() -> Self {
        HyperSpace { params: Vec::new() }
    }

    /// Validates ranges, defaults and conditions, and orders parameters so
    /// parents come first.
    pub fn new(params: Vec<HyperParam>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
            match &p.kind {
                ParamKind::Numeric { min, max, scale, .. } => {
                    if !(min < max) {
                        return Err(Error::InvalidSpace(format!("`{}`: min must be < max", p.name)));
                    }
                    if *scale == Scale::Log && *min <= 0.0 {
                        return Err(Error::InvalidSpace(format!(
                            "`{}`: log scale requires min > 0",
                            p.name
                        )));
                    }
                }
                ParamKind::Categorical { levels } => {
                    if levels.is_empty() || levels.iter().any(|l| l == INACTIVE) {
                        return Err(Error::InvalidSpace(format!(
                            "`{}`: levels must be nonempty and must not use the reserved marker",
                            p.name
                        )));
                    }
                }
            }
            if !p.contains(&p.default) {
                return Err(Error::InvalidSpace(format!("`{}`: default outside range", p.name)));
            }
        }
        // topological order; rejects cycles and dangling parents
        let mut ordered: Vec<HyperParam> = Vec::with_capacity(params.len());
        let mut pending = params;
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for p in pending {
                let ready = match &p.condition {
                    None => true,
                    Some(c) => ordered.iter().any(|q| q.name == c.parent),
                };
                if ready {
                    if let Some(c) = &p.condition {
                        let parent = ordered.iter().find(|q| q.name == c.parent).unwrap();
                        if !matches!(parent.kind, ParamKind::Categorical { .. }) {
                            return Err(Error::InvalidSpace(format!(
                                "`{}`: condition parent `{}` must be categorical",
                                p.name, c.parent
                            )));
                        }
                    }
                    ordered.push(p);
                } else {
                    rest.push(p);
                }
            }
            if rest.len() == before {
                let names: Vec<&str> = rest.iter().map(|p| p.name.as_str()).collect();
                return Err(Error::InvalidSpace(format!(
                    "conditions are cyclic or reference unknown parents: {}",
                    names.join(", ")
                )));
            }
            pending = rest;
        }
        Ok(HyperSpace { params: ordered })
    }

    pub fn params(&self) -> &[HyperParam] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, name: &str) -> Option<&HyperParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Appends `other`'s parameters with `prefix` prepended to every name;
    /// top-level parameters of `other` become conditional on `condition`.
    pub fn nest(&self, other: &HyperSpace, prefix: &str, condition: Option<Condition>) -> Result<HyperSpace> {
        let mut params = self.params.clone();
        for p in &other.params {
            let mut q = p.clone();
            q.name = format!("{prefix}{}", p.name);
            q.condition = match &p.condition {
                Some(c) => Some(Condition {
                    parent: format!("{prefix}{}", c.parent),
                    values: c.values.clone(),
                }),
                None => condition.clone(),
            };
            params.push(q);
        }
        HyperSpace::new(params)
    }

    /// A copy of the space whose categorical parameter `name` only offers
    /// `allowed` levels. The default falls back to the first allowed level.
    pub fn restrict_levels(&self, name: &str, allowed: &[String]) -> Result<HyperSpace> {
        let mut params = self.params.clone();
        let p = params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidSpace(format!("no parameter `{name}`")))?;
        if let ParamKind::Categorical { levels } = &mut p.kind {
            levels.retain(|l| allowed.contains(l));
            if levels.is_empty() {
                return Err(Error::InvalidSpace(format!("`{name}`: no allowed levels remain")));
            }
            if !p.default.as_cat().is_some_and(|d| levels.iter().any(|l| l == d)) {
                p.default = Value::Cat(levels[0].clone());
            }
        }
        HyperSpace::new(params)
    }

    fn is_active(&self, p: &HyperParam, values: &BTreeMap<String, Value>) -> bool {
        match &p.condition {
            None => true,
            Some(c) => match values.get(&c.parent) {
                Some(Value::Cat(v)) => c.values.contains(v),
                _ => false,
            },
        }
    }

    /// Fills every parameter top-down: `pick` supplies values for active
    /// parameters; inactive ones get the marker.
    fn resolve(&self, mut pick: impl FnMut(&HyperParam) -> Value) -> BTreeMap<String, Value> {
        let mut values = BTreeMap::new();
        for p in &self.params {
            let v = if self.is_active(p, &values) {
                pick(p)
            } else {
                Value::Inactive
            };
            values.insert(p.name.clone(), v);
        }
        values
    }

    pub fn default_values(&self) -> BTreeMap<String, Value> {
        self.resolve(|p| p.default.clone())
    }

    pub fn random_values(&self, rng: &mut Rng) -> BTreeMap<String, Value> {
        self.resolve(|p| p.sample(rng))
    }

    /// Changes one active parameter and re-resolves activity: parameters that
    /// become active are sampled, ones that become inactive are cleared.
    pub fn mutate(&self, base: &BTreeMap<String, Value>, rng: &mut Rng) -> BTreeMap<String, Value> {
        let active: Vec<&HyperParam> = self
            .params
            .iter()
            .filter(|p| base.get(&p.name).is_some_and(Value::is_active))
            .collect();
        if active.is_empty() {
            return base.clone();
        }
        let target = active[rng.gen_range(0..active.len())].name.clone();
        let mut out = BTreeMap::new();
        for p in &self.params {
            let v = if !self.is_active(p, &out) {
                Value::Inactive
            } else {
                let prev = base.get(&p.name).cloned().unwrap_or(Value::Inactive);
                if p.name == target {
                    p.perturb(&prev, rng)
                } else if prev.is_active() && p.contains(&prev) {
                    prev
                } else {
                    p.sample(rng)
                }
            };
            out.insert(p.name.clone(), v);
        }
        out
    }

    /// Number of parameters whose values differ, using the 1%-of-range rule
    /// for numerics and counting activity mismatches as differences.
    pub fn distance(&self, a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>) -> usize {
        self.params
            .iter()
            .filter(|p| {
                let va = a.get(&p.name).unwrap_or(&Value::Inactive);
                let vb = b.get(&p.name).unwrap_or(&Value::Inactive);
                p.differs(va, vb)
            })
            .count()
    }

    /// Checks that `values` is a well-formed assignment for this space.
    pub fn validate(&self, values: &BTreeMap<String, Value>) -> Result<()> {
        let mut seen = BTreeMap::new();
        for p in &self.params {
            let v = values.get(&p.name).cloned().unwrap_or(Value::Inactive);
            let active = self.is_active(p, &seen);
            if active && !p.contains(&v) {
                return Err(Error::InvalidSpace(format!("`{}` = {v} is outside its range", p.name)));
            }
            if !active && v.is_active() {
                return Err(Error::InvalidSpace(format!("`{}` must be inactive", p.name)));
            }
            seen.insert(p.name.clone(), v);
        }
        if let Some(extra) = values.keys().find(|k| self.param(k).is_none()) {
            return Err(Error::InvalidSpace(format!("unknown parameter `{extra}`")));
        }
        Ok(())
    }

    /// The sub-space of parameters whose names start with `prefix`.
    pub fn subspace(&self, prefix: &str) -> HyperSpace {
        HyperSpace {
            params: self
                .params
                .iter()
                .filter(|p| p.name.starts_with(prefix))
                .cloned()
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Combinations

/// One assignment of values to an algorithm's hyper-parameters, including the
/// optional feature-selection block (the `fs.*` parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub algorithm: String,
    pub values: BTreeMap<String, Value>,
}

/// The feature-selection part of a combination: search method, evaluator and
/// their parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsBlock {
    pub values: BTreeMap<String, Value>,
}

impl FsBlock {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn search(&self) -> &str {
        self.values.get("fs.search").and_then(Value::as_cat).unwrap_or("")
    }

    pub fn evaluator(&self) -> &str {
        self.values.get("fs.evaluator").and_then(Value::as_cat).unwrap_or("")
    }

    pub fn num(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_num)
    }

    pub fn cat(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(Value::as_cat)
    }

    /// Canonical string form, used for hashing and trace records.
    pub fn key(&self) -> String {
        canonical(&self.values)
    }
}

fn canonical(values: &BTreeMap<String, Value>) -> String {
    let parts: Vec<String> = values.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.join(";")
}

impl Combination {
    pub fn new(algorithm: impl Into<String>, values: BTreeMap<String, Value>) -> Self {
        Combination {
            algorithm: algorithm.into(),
            values,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn num(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_num)
    }

    pub fn cat(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(Value::as_cat)
    }

    pub fn uses_fs(&self) -> bool {
        self.cat(FS_USE) == Some("true")
    }

    /// The feature-selection block, present only when feature selection is
    /// switched on and both search method and evaluator are set.
    pub fn fs_block(&self) -> Option<FsBlock> {
        if !self.uses_fs() {
            return None;
        }
        let values: BTreeMap<String, Value> = self
            .values
            .iter()
            .filter(|(k, v)| k.starts_with(FS_PREFIX) && k.as_str() != FS_USE && v.is_active())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let block = FsBlock { values };
        (!block.search().is_empty() && !block.evaluator().is_empty()).then_some(block)
    }

    /// Names of the parameters that are active.
    pub fn active_set(&self) -> Vec<&str> {
        self.values
            .iter()
            .filter(|(_, v)| v.is_active())
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Canonical `algorithm|name=value;...` form. Equal keys imply equal
    /// combinations.
    pub fn key(&self) -> String {
        format!("{}|{}", self.algorithm, canonical(&self.values))
    }
}

pub fn default_combination(algorithm: &str, space: &HyperSpace) -> Combination {
    Combination::new(algorithm, space.default_values())
}

pub fn random_combination(algorithm: &str, space: &HyperSpace, rng: &mut Rng) -> Combination {
    Combination::new(algorithm, space.random_values(rng))
}

pub fn hamming_distance(space: &HyperSpace, a: &Combination, b: &Combination) -> Result<usize> {
    if a.algorithm != b.algorithm {
        return Err(Error::MismatchedSpaces(a.algorithm.clone(), b.algorithm.clone()));
    }
    Ok(space.distance(&a.values, &b.values))
}

/// Distance between two feature-selection blocks over the shared
/// feature-selection space.
pub fn fs_distance(fs_space: &HyperSpace, a: &FsBlock, b: &FsBlock) -> usize {
    fs_space.distance(&a.values, &b.values)
}

// ---------------------------------------------------------------------------
// Validity rules

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleVerdict {
    Invalid,
    Infeasible,
}

/// Matches when the categorical parameter `param` holds one of `values`.
///
/// Parameters nested under a meta algorithm (`decision_tree.criterion`) are
/// matched by suffix, so one rule covers both the base algorithm and every
/// wrapper that embeds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMatch {
    pub param: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RulePredicate {
    /// All matches hold at once (under one common prefix).
    ValueConflict { all_of: Vec<ParamMatch> },
    /// The matches hold and the dataset has more than `max_features` features.
    TooManyFeatures {
        when: Vec<ParamMatch>,
        max_features: usize,
    },
    /// The matches hold and the dataset has more than `max_classes` classes.
    TooManyClasses {
        when: Vec<ParamMatch>,
        max_classes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRule {
    pub id: String,
    /// Restricts the rule to one algorithm; `None` applies it everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    pub verdict: RuleVerdict,
    pub reason: String,
    pub predicate: RulePredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "lowercase")]
pub enum Verdict {
    Ok,
    Invalid(String),
    Infeasible(String),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

/// True if every match holds for some common name prefix in `c`.
fn all_match(c: &Combination, matches: &[ParamMatch]) -> bool {
    let Some(first) = matches.first() else {
        return true;
    };
    let suffix = format!(".{}", first.param);
    let prefixes = c.values.keys().filter_map(|k| {
        if *k == first.param {
            Some(String::new())
        } else {
            k.strip_suffix(suffix.as_str()).map(|p| format!("{p}."))
        }
    });
    for prefix in prefixes {
        let ok = matches.iter().all(|m| {
            c.cat(&format!("{prefix}{}", m.param))
                .is_some_and(|v| m.values.iter().any(|x| x == v))
        });
        if ok {
            return true;
        }
    }
    false
}

impl ValidityRule {
    pub fn applies(&self, c: &Combination, meta: &DatasetMeta) -> bool {
        if self.algorithm.as_ref().is_some_and(|a| *a != c.algorithm) {
            return false;
        }
        match &self.predicate {
            RulePredicate::ValueConflict { all_of } => all_match(c, all_of),
            RulePredicate::TooManyFeatures { when, max_features } => {
                meta.p > *max_features && all_match(c, when)
            }
            RulePredicate::TooManyClasses { when, max_classes } => {
                meta.n_classes > *max_classes && all_match(c, when)
            }
        }
    }
}

/// First matching rule wins; `Ok` if none match.
pub fn check_validity(c: &Combination, meta: &DatasetMeta, rules: &[ValidityRule]) -> Verdict {
    for r in rules {
        if r.applies(c, meta) {
            let reason = format!("{}: {}", r.id, r.reason);
            return match r.verdict {
                RuleVerdict::Invalid => Verdict::Invalid(reason),
                RuleVerdict::Infeasible => Verdict::Infeasible(reason),
            };
        }
    }
    Verdict::Ok
}

fn pm(param: &str, values: &[&str]) -> ParamMatch {
    ParamMatch {
        param: param.to_string(),
        values: values.iter().map(|s| s.to_string()).collect(),
    }
}

/// The shipped rule set: value conflicts, feature-count infeasibility at 2000
/// features, and class-count infeasibility at 10 classes for exhaustive
/// output codes.
pub fn default_rules() -> Vec<ValidityRule> {
    vec![
        ValidityRule {
            id: "nb-density-vs-discretization".into(),
            algorithm: None,
            verdict: RuleVerdict::Invalid,
            reason: "naive Bayes cannot use a kernel density estimator and supervised discretization together".into(),
            predicate: RulePredicate::ValueConflict {
                all_of: vec![
                    pm("kernel_density", &["true"]),
                    pm("supervised_discretization", &["true"]),
                ],
            },
        },
        ValidityRule {
            id: "ranker-vs-subset-evaluator".into(),
            algorithm: None,
            verdict: RuleVerdict::Invalid,
            reason: "the ranker search is not compatible with a subset evaluator".into(),
            predicate: RulePredicate::ValueConflict {
                all_of: vec![pm("fs.search", &["ranker"]), pm("fs.evaluator", &["cfs"])],
            },
        },
        ValidityRule {
            id: "subset-search-vs-attribute-evaluator".into(),
            algorithm: None,
            verdict: RuleVerdict::Invalid,
            reason: "subset searches need a subset evaluator".into(),
            predicate: RulePredicate::ValueConflict {
                all_of: vec![
                    pm("fs.search", &["greedy_forward", "best_first"]),
                    pm(
                        "fs.evaluator",
                        &["info_gain", "chi_square", "correlation", "principal_components"],
                    ),
                ],
            },
        },
        ValidityRule {
            id: "pca-feature-limit".into(),
            algorithm: None,
            verdict: RuleVerdict::Infeasible,
            reason: "principal components are too slow beyond 2000 features".into(),
            predicate: RulePredicate::TooManyFeatures {
                when: vec![pm("fs.evaluator", &["principal_components"])],
                max_features: 2000,
            },
        },
        ValidityRule {
            id: "exhaustive-codes-class-limit".into(),
            algorithm: None,
            verdict: RuleVerdict::Infeasible,
            reason: "exhaustive output codes grow exponentially beyond 10 classes".into(),
            predicate: RulePredicate::TooManyClasses {
                when: vec![pm("multiclass", &["exhaustive_codes"])],
                max_classes: 10,
            },
        },
    ]
}

/// Reads a JSON rule list.
pub fn rules_from_json(text: &str) -> Result<Vec<ValidityRule>> {
    Ok(serde_json::from_str(text)?)
}

/// Reads a JSON parameter list into a space.
pub fn space_from_json(text: &str) -> Result<HyperSpace> {
    let params: Vec<HyperParam> = serde_json::from_str(text)?;
    HyperSpace::new(params)
}
