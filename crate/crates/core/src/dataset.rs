//! Classification datasets, size classification, and the stratified sampling
//! plans that feed every search round.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Upper bound on the working set used in rounds one to four.
pub const MAX_WORKING_SET: usize = 5000;
/// A dataset whose `n * p` exceeds this is treated as large.
pub const LARGE_PRODUCT: u64 = 1_000_000;
/// Fractions of the largest training set used in rounds one to four.
pub const ROUND_FRACTIONS: [f64; 4] = [0.125, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    /// Category levels, in order of first appearance. Empty for numeric features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    /// Number of missing cells that were imputed at load time.
    #[serde(default)]
    pub imputed: usize,
}

/// A labeled classification dataset.
///
/// Categorical values are stored as level indices. Missing values never reach
/// this type: they are imputed during construction (mode for categorical,
/// median for numeric).
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    target_name: String,
    features: Vec<FeatureMeta>,
    rows: Vec<Vec<f64>>,
    target: Vec<usize>,
    classes: Vec<String>,
}

/// One parsed cell before imputation.
pub type Cell = Option<f64>;

impl Dataset {
    /// Builds a dataset from parsed cells, imputing missing values.
    pub fn from_cells(
        name: impl Into<String>,
        target_name: impl Into<String>,
        mut features: Vec<FeatureMeta>,
        cells: Vec<Vec<Cell>>,
        target: Vec<usize>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let target_name = target_name.into();
        if cells.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if cells.len() != target.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} rows but {} labels", cells.len(), target.len()),
            });
        }
        let p = features.len();
        if let Some(bad) = cells.iter().position(|r| r.len() != p) {
            return Err(Error::Parse {
                line: bad as u64 + 1,
                message: format!("expected {p} feature values, found {}", cells[bad].len()),
            });
        }
        if let Some(&bad) = target.iter().find(|&&t| t >= classes.len()) {
            return Err(Error::Parse {
                line: 0,
                message: format!("label index {bad} outside the class set"),
            });
        }
        let mut seen = vec![false; classes.len()];
        for &t in &target {
            seen[t] = true;
        }
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(Error::SingleClassTarget(target_name));
        }

        let fill: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(j, meta)| {
                let present: Vec<f64> = cells.iter().filter_map(|r| r[j]).collect();
                match meta.kind {
                    FeatureKind::Numeric => median(&present).unwrap_or(0.0),
                    FeatureKind::Categorical => mode(&present, meta.levels.len()).unwrap_or(0.0),
                }
            })
            .collect();
        let mut rows = Vec::with_capacity(cells.len());
        for r in cells {
            let row = r
                .into_iter()
                .enumerate()
                .map(|(j, c)| match c {
                    Some(v) => v,
                    None => {
                        features[j].imputed += 1;
                        fill[j]
                    }
                })
                .collect();
            rows.push(row);
        }

        Ok(Dataset {
            name: name.into(),
            target_name,
            features,
            rows,
            target,
            classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.features
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn label(&self, i: usize) -> usize {
        self.target[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.target
    }

    pub fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &i in rows {
            counts[self.target[i]] += 1;
        }
        counts
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n: self.n(),
            p: self.p(),
            n_classes: self.n_classes(),
        }
    }

    /// A new dataset holding the given rows, in order, with the same schema.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            target_name: self.target_name.clone(),
            features: self.features.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// The dataset facts validity rules are allowed to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub n_classes: usize,
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

pub(crate) fn mode(values: &[f64], levels: usize) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; levels.max(1)];
    for &v in values {
        counts[v as usize] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)?;
    Some(best as f64)
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Arff,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("arff") => Format::Arff,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// CSV columns to read as categorical even when every value parses as a
    /// number.
    pub categorical: Vec<String>,
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    format: Format,
    target: &str,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    match format {
        Format::Csv => parse_csv(&name, &text, target, opts),
        Format::Arff => parse_arff(&name, &text, target),
    }
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "?"
}

/// Parses CSV text with a header row. `?` and empty cells are missing.
pub fn parse_csv(name: &str, text: &str, target: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_col = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget {
            target: target.to_string(),
            available: header.clone(),
        })?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let columns: Vec<usize> = (0..header.len()).filter(|&c| c != target_col).collect();
    let mut features = Vec::with_capacity(columns.len());
    let mut cols_cells: Vec<Vec<Cell>> = Vec::with_capacity(columns.len());
    for &c in &columns {
        let numeric = !opts.categorical.iter().any(|n| n == &header[c])
            && raw
                .iter()
                .all(|r| is_missing(&r[c]) || r[c].parse::<f64>().is_ok_and(f64::is_finite));
        let (meta, cells) = if numeric {
            let cells = raw
                .iter()
                .map(|r| (!is_missing(&r[c])).then(|| r[c].parse::<f64>().unwrap()))
                .collect();
            (
                FeatureMeta {
                    name: header[c].clone(),
                    kind: FeatureKind::Numeric,
                    levels: Vec::new(),
                    imputed: 0,
                },
                cells,
            )
        } else {
            let mut levels: Vec<String> = Vec::new();
            let mut index: HashMap<String, usize> = HashMap::new();
            let cells = raw
                .iter()
                .map(|r| {
                    let v = &r[c];
                    if is_missing(v) {
                        return None;
                    }
                    let next = levels.len();
                    let idx = *index.entry(v.clone()).or_insert_with(|| {
                        levels.push(v.clone());
                        next
                    });
                    Some(idx as f64)
                })
                .collect();
            (
                FeatureMeta {
                    name: header[c].clone(),
                    kind: FeatureKind::Categorical,
                    levels,
                    imputed: 0,
                },
                cells,
            )
        };
        features.push(meta);
        cols_cells.push(cells);
    }

    let mut classes: Vec<String> = Vec::new();
    let mut target_idx = Vec::with_capacity(raw.len());
    let mut keep = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let v = &r[target_col];
        if is_missing(v) {
            // unlabeled rows carry no information for classification
            continue;
        }
        let idx = match classes.iter().position(|c| c == v) {
            Some(k) => k,
            None => {
                classes.push(v.clone());
                classes.len() - 1
            }
        };
        target_idx.push(idx);
        keep.push(i);
    }
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cells: Vec<Vec<Cell>> = keep
        .iter()
        .map(|&i| cols_cells.iter().map(|col| col[i]).collect())
        .collect();
    Dataset::from_cells(name, target, features, cells, target_idx, classes)
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Splits a line on top-level commas, honouring single and double quotes.
fn split_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for ch in line.chars() {
        match quote {
            Some(q) if ch == q => {
                quote = None;
                cur.push(ch);
            }
            Some(_) => cur.push(ch),
            None if ch == '\'' || ch == '"' => {
                quote = Some(ch);
                cur.push(ch);
            }
            None if ch == ',' => out.push(std::mem::take(&mut cur)),
            None => cur.push(ch),
        }
    }
    out.push(cur);
    out.into_iter().map(|f| unquote(&f).to_string()).collect()
}

/// Parses the `@relation` / `@attribute` / `@data` subset of ARFF.
pub fn parse_arff(name: &str, text: &str, target: &str) -> Result<Dataset> {
    struct Attr {
        name: String,
        levels: Option<Vec<String>>,
    }
    let mut relation = name.to_string();
    let mut attrs: Vec<Attr> = Vec::new();
    let mut data: Vec<(u64, Vec<String>)> = Vec::new();
    let mut in_data = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            data.push((lineno, split_fields(line)));
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(line["@relation".len()..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            let rest = line["@attribute".len()..].trim();
            let (attr_name, ty) = split_attribute(rest).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("malformed attribute declaration `{line}`"),
            })?;
            let ty_trim = ty.trim();
            let levels = if ty_trim.starts_with('{') {
                let inner = ty_trim
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: "unterminated nominal specification".into(),
                    })?;
                Some(split_fields(inner))
            } else {
                match ty_trim.to_ascii_lowercase().as_str() {
                    "numeric" | "real" | "integer" => None,
                    other => {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("unsupported attribute type `{other}`"),
                        })
                    }
                }
            };
            attrs.push(Attr {
                name: attr_name,
                levels,
            });
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(Error::Parse {
                line: lineno,
                message: format!("unexpected line `{line}`"),
            });
        }
    }
    let target_col = attrs
        .iter()
        .position(|a| a.name == target)
        .ok_or_else(|| Error::MissingTarget {
            target: target.to_string(),
            available: attrs.iter().map(|a| a.name.clone()).collect(),
        })?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut features = Vec::new();
    for (c, a) in attrs.iter().enumerate() {
        if c == target_col {
            continue;
        }
        features.push(FeatureMeta {
            name: a.name.clone(),
            kind: if a.levels.is_some() {
                FeatureKind::Categorical
            } else {
                FeatureKind::Numeric
            },
            levels: a.levels.clone().unwrap_or_default(),
            imputed: 0,
        });
    }
    let target_levels = attrs[target_col].levels.clone();

    let mut cells = Vec::with_capacity(data.len());
    let mut labels_raw = Vec::with_capacity(data.len());
    for (lineno, fields) in &data {
        if fields.len() != attrs.len() {
            return Err(Error::Parse {
                line: *lineno,
                message: format!("expected {} values, found {}", attrs.len(), fields.len()),
            });
        }
        if is_missing(&fields[target_col]) {
            continue;
        }
        let mut row = Vec::with_capacity(features.len());
        for (c, a) in attrs.iter().enumerate() {
            if c == target_col {
                continue;
            }
            let v = &fields[c];
            if is_missing(v) {
                row.push(None);
                continue;
            }
            let cell = match &a.levels {
                Some(levels) => levels.iter().position(|l| l == v).ok_or_else(|| Error::Parse {
                    line: *lineno,
                    message: format!("value `{v}` not declared for attribute `{}`", a.name),
                })? as f64,
                None => v.parse::<f64>().map_err(|_| Error::Parse {
                    line: *lineno,
                    message: format!("`{v}` is not numeric"),
                })?,
            };
            row.push(Some(cell));
        }
        cells.push(row);
        labels_raw.push((*lineno, fields[target_col].clone()));
    }

    // classes in declaration order, restricted to those that occur
    let mut order: Vec<String> = match &target_levels {
        Some(l) => l.clone(),
        None => Vec::new(),
    };
    for (lineno, l) in &labels_raw {
        if !order.contains(l) {
            if target_levels.is_some() {
                return Err(Error::Parse {
                    line: *lineno,
                    message: format!("class `{l}` not declared"),
                });
            }
            order.push(l.clone());
        }
    }
    let present: Vec<String> = order
        .into_iter()
        .filter(|c| labels_raw.iter().any(|(_, l)| l == c))
        .collect();
    let target_idx = labels_raw
        .iter()
        .map(|(_, l)| present.iter().position(|c| c == l).unwrap())
        .collect();
    Dataset::from_cells(relation, target, features, cells, target_idx, present)
}

fn split_attribute(rest: &str) -> Option<(String, &str)> {
    let rest = rest.trim_start();
    let first = rest.chars().next()?;
    if first == '\'' || first == '"' {
        let end = rest[1..].find(first)? + 1;
        Some((rest[1..end].to_string(), &rest[end + 1..]))
    } else {
        let end = rest.find(char::is_whitespace)?;
        Some((rest[..end].to_string(), &rest[end..]))
    }
}

// ---------------------------------------------------------------------------
// Size classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeTag {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeClass {
    pub tag: SizeTag,
    pub product: u64,
}

impl SizeClass {
    pub fn from_dims(n: usize, p: usize) -> SizeClass {
        let product = n as u64 * p as u64;
        let tag = if product > LARGE_PRODUCT {
            SizeTag::Large
        } else {
            SizeTag::Small
        };
        SizeClass { tag, product }
    }

    pub fn is_large(&self) -> bool {
        self.tag == SizeTag::Large
    }
}

pub fn classify_size(d: &Dataset) -> SizeClass {
    SizeClass::from_dims(d.n(), d.p())
}

// ---------------------------------------------------------------------------
// Sampling plans

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub validation: Vec<usize>,
    /// The largest training set, ordered so every prefix is close to
    /// stratified. Round samples are prefixes of this list.
    pub training: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub m: usize,
    pub working_set: Vec<usize>,
    pub folds: Vec<FoldSpec>,
    pub k: usize,
    pub round_fractions: [f64; 4],
    pub seed: u64,
}

/// Integer apportionment of `total` proportional to `weights`, by largest
/// remainder. Ties go to the lower index.
pub fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out: Vec<usize> = weights.iter().map(|&w| total * w / sum).collect();
    let assigned: usize = out.iter().sum();
    let mut rema: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (i, (total * w) % sum))
        .collect();
    rema.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in rema.iter().take(total - assigned) {
        out[i] += 1;
    }
    out
}

/// Nearest integer, ties rounded up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Row indices grouped by class, each group shuffled. Groups are returned
/// in descending order of size (ties by class index).
fn shuffled_by_class(d: &Dataset, rows: &[usize], rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for &i in rows {
        groups[d.label(i)].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| groups[b].len().cmp(&groups[a].len()).then(a.cmp(&b)));
    order.into_iter().map(|c| std::mem::take(&mut groups[c])).collect()
}

/// Deals rows into `parts` groups round-robin, walking classes in descending
/// frequency. Part sizes differ by at most one and every class is spread as
/// evenly as possible.
pub fn stratified_parts(d: &Dataset, rows: &[usize], parts: usize, rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); parts];
    let mut pos = 0usize;
    for group in shuffled_by_class(d, rows, rng) {
        for i in group {
            out[pos % parts].push(i);
            pos += 1;
        }
    }
    out
}

/// Orders rows so that every prefix is close to stratified: each class's
/// members are spread evenly along the sequence.
fn stratified_order(d: &Dataset, rows: &[usize], rng: &mut rng::Rng) -> Vec<usize> {
    let groups = shuffled_by_class(d, rows, rng);
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(rows.len());
    for (g, group) in groups.iter().enumerate() {
        let len = group.len() as f64;
        for (j, &i) in group.iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / len, g, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Draws `size` rows stratified by class (largest-remainder quotas).
fn stratified_draw(d: &Dataset, rows: &[usize], size: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let groups = shuffled_by_class(d, rows, rng);
    let weights: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quotas = apportion(size, &weights);
    groups
        .iter()
        .zip(quotas)
        .flat_map(|(g, q)| g[..q].iter().copied())
        .collect()
}

pub fn make_sampling_plan(
    d: &Dataset,
    size: SizeClass,
    k_override: Option<usize>,
    seed: u64,
) -> Result<SamplingPlan> {
    let mut rng = rng::stream(seed, &[rng::stable_hash("sampling-plan")]);
    let k = k_override.unwrap_or(if size.is_large() { 1 } else { 3 }).max(1);
    let all: Vec<usize> = (0..d.n()).collect();
    let m = d.n().min(MAX_WORKING_SET);
    let mut working_set = if m == d.n() {
        all
    } else {
        stratified_draw(d, &all, m, &mut rng)
    };
    working_set.sort_unstable();

    let counts = d.class_counts(&working_set);
    if k > 1 {
        if let Some((c, &count)) = counts
            .iter()
            .enumerate()
            .find(|(_, &cnt)| cnt > 0 && cnt < k)
        {
            return Err(Error::ClassTooSmall {
                class: d.classes()[c].clone(),
                count,
                parts: k,
            });
        }
    }

    let folds = if k == 1 {
        let groups = shuffled_by_class(d, &working_set, &mut rng);
        let weights: Vec<usize> = groups.iter().map(Vec::len).collect();
        let quotas = apportion(m / 3, &weights);
        let mut validation = Vec::new();
        let mut rest = Vec::new();
        for (g, q) in groups.iter().zip(quotas) {
            validation.extend_from_slice(&g[..q]);
            rest.extend_from_slice(&g[q..]);
        }
        validation.sort_unstable();
        let training = stratified_order(d, &rest, &mut rng);
        vec![FoldSpec {
            validation,
            training,
        }]
    } else {
        let parts = stratified_parts(d, &working_set, k, &mut rng);
        (0..k)
            .map(|f| {
                let mut validation = parts[f].clone();
                validation.sort_unstable();
                let rest: Vec<usize> = parts
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, p)| p.iter().copied())
                    .collect();
                let training = stratified_order(d, &rest, &mut rng);
                FoldSpec {
                    validation,
                    training,
                }
            })
            .collect()
    };

    Ok(SamplingPlan {
        m,
        working_set,
        folds,
        k,
        round_fractions: ROUND_FRACTIONS,
        seed,
    })
}

impl SamplingPlan {
    /// Size of the round-`round` training sample (rounds are 1-based).
    pub fn sample_size(&self, round: usize, fold: usize) -> usize {
        let full = self.folds[fold].training.len();
        round_half_up(self.round_fractions[round - 1] * full as f64).min(full)
    }

    /// The training sample of `round` (1..=4) for `fold` (0-based).
    pub fn training_sample(&self, round: usize, fold: usize) -> &[usize] {
        assert!((1..=4).contains(&round), "round must be in 1..=4");
        let size = self.sample_size(round, fold);
        &self.folds[fold].training[..size]
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold].validation
    }
}

/// The sample used by the final cross-validation.
///
/// With at most 5000 instances the whole dataset is used. Otherwise 5000
/// instances are drawn with whole-dataset class proportions, taking
/// instances outside the working set first.
pub fn final_cv_sample(d: &Dataset, plan: &SamplingPlan, seed: u64) -> Vec<usize> {
    if d.n() <= MAX_WORKING_SET {
        return (0..d.n()).collect();
    }
    let mut rng = rng::stream(seed, &[rng::stable_hash("final-cv-sample")]);
    let all: Vec<usize> = (0..d.n()).collect();
    let counts = d.class_counts(&all);
    let quotas = apportion(MAX_WORKING_SET, &counts);
    let used: std::collections::HashSet<usize> = plan.working_set.iter().copied().collect();
    let mut by_class: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for i in 0..d.n() {
        let e = by_class.entry(d.label(i)).or_default();
        if used.contains(&i) {
            e.1.push(i);
        } else {
            e.0.push(i);
        }
    }
    let mut out = Vec::with_capacity(MAX_WORKING_SET);
    for (c, (mut fresh, mut old)) in by_class {
        fresh.shuffle(&mut rng);
        old.shuffle(&mut rng);
        let q = quotas[c];
        let take_fresh = q.min(fresh.len());
        out.extend_from_slice(&fresh[..take_fresh]);
        out.extend_from_slice(&old[..(q - take_fresh).min(old.len())]);
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(n: usize, classes: usize) -> Dataset {
        let features = vec![FeatureMeta {
            name: "x".into(),
            kind: FeatureKind::Numeric,
            levels: vec![],
            imputed: 0,
        }];
        let cells = (0..n).map(|i| vec![Some(i as f64)]).collect();
        let target = (0..n).map(|i| i % classes).collect();
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        Dataset::from_cells("toy", "y", features, cells, target, names).unwrap()
    }

    #[test]
    fn car_sample_rows_are_categorical() {
        let text = "buying,maint,doors,persons,lug_boot,safety,class\n\
                    vhigh,vhigh,2,2,small,high,unacc\n\
                    high,low,4,4,med,high,acc\n\
                    low,low,2,more,med,high,good\n";
        let opts = LoadOptions {
            categorical: vec!["doors".into()],
        };
        let d = parse_csv("car", text, "class", &opts).unwrap();
        assert_eq!(d.p(), 6);
        assert_eq!(d.n(), 3);
        assert!(d.features().iter().all(|f| f.kind == FeatureKind::Categorical));
        assert_eq!(d.classes(), ["unacc", "acc", "good"]);
    }

    #[test]
    fn minimal_numeric_csv() {
        let d = parse_csv("t", "x,y\n0.5,a\n1.5,b\n2.5,a\n3.5,b\n", "y", &LoadOptions::default())
            .unwrap();
        assert_eq!((d.n(), d.p()), (4, 1));
        assert_eq!(d.features()[0].kind, FeatureKind::Numeric);
    }

    #[test]
    fn single_class_target_is_rejected() {
        let err = parse_csv("t", "x,y\n1,a\n2,a\n", "y", &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("single-class target"));
    }

    #[test]
    fn missing_target_names_columns() {
        let err = parse_csv("t", "x,z\n1,a\n2,b\n", "y", &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x") && msg.contains("z"), "{msg}");
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_csv("t", "x,y\n1,a\n2,b,3\n", "y", &LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let err = parse_csv("t", "x,y\n", "y", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn missing_values_are_imputed() {
        let text = "x,c,y\n1,a,p\n?,a,q\n3,b,p\n10,?,q\n";
        let d = parse_csv("t", text, "y", &LoadOptions::default()).unwrap();
        assert_eq!(d.value(1, 0), 3.0); // median of 1,3,10
        assert_eq!(d.value(3, 1), 0.0); // mode level `a`
        assert_eq!(d.features()[0].imputed, 1);
        assert_eq!(d.features()[1].imputed, 1);
    }

    #[test]
    fn arff_subset() {
        let text = "% comment\n@RELATION weather\n@attribute outlook {sunny, rainy}\n\
                    @Attribute temp NUMERIC\n@attribute 'play it' {yes,no}\n@DATA\n\
                    sunny,20,no\nrainy,?,yes\n'sunny',25,yes\n";
        let d = parse_arff("w", text, "play it").unwrap();
        assert_eq!(d.name(), "weather");
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.classes(), ["yes", "no"]);
        assert_eq!(d.features()[0].levels, ["sunny", "rainy"]);
        assert_eq!(d.value(1, 1), 22.5);
    }

    #[test]
    fn arff_undeclared_value() {
        let text = "@relation r\n@attribute a {x,y}\n@attribute c {p,q}\n@data\nz,p\nx,q\n";
        let err = parse_arff("r", text, "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }));
    }

    #[test]
    fn size_boundary() {
        assert_eq!(SizeClass::from_dims(5000, 200).tag, SizeTag::Small);
        assert_eq!(SizeClass::from_dims(5001, 200).tag, SizeTag::Large);
        assert_eq!(SizeClass::from_dims(1, 1).tag, SizeTag::Small);
        let mnist = SizeClass::from_dims(12000, 784);
        assert_eq!(mnist.product, 9_408_000);
        assert!(mnist.is_large());
    }

    #[test]
    fn three_instances_three_classes_cannot_stratify() {
        let d = toy(3, 3);
        let err = make_sampling_plan(&d, classify_size(&d), None, 1).unwrap_err();
        assert!(err.to_string().contains("class too small to stratify"));
    }

    #[test]
    fn small_plan_parts() {
        let d = toy(900, 3);
        let plan = make_sampling_plan(&d, classify_size(&d), None, 11).unwrap();
        assert_eq!((plan.m, plan.k), (900, 3));
        for f in 0..3 {
            assert_eq!(plan.validation(f).len(), 300);
            assert_eq!(plan.folds[f].training.len(), 600);
        }
    }

    #[test]
    fn rounding_ties_go_up() {
        assert_eq!(round_half_up(0.5 * 801.0), 401);
        assert_eq!(round_half_up(0.125 * 800.0), 100);
        assert_eq!(round_half_up(2.49), 2);
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(apportion(0, &[3, 2]), vec![0, 0]);
        assert_eq!(apportion(5, &[0, 0]), vec![0, 0]);
    }
}
