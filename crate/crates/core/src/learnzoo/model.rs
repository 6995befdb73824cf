//! Trained models, learner dispatch, and the serialized final-model format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::learners::{bayes, boosting, ensemble, forest, knn, linear, tree};
use super::meter::{Abort, Meter};
use super::params::Params;
use super::table::Table;
use super::Fit;
use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::hyperspace::{Combination, Value};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    ZeroR { class: usize },
    Knn(knn::KnnModel),
    Bayes(bayes::BayesModel),
    Tree(tree::TreeModel),
    Forest(forest::ForestModel),
    Linear(linear::LinearModel),
    Boosted(boosting::GbModel),
    Ada(boosting::AdaModel),
    Vote(ensemble::VoteModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Model::ZeroR { class } => *class,
            Model::Knn(m) => m.predict(x),
            Model::Bayes(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Linear(m) => m.predict(x),
            Model::Boosted(m) => m.predict(x),
            Model::Ada(m) => m.predict(x),
            Model::Vote(m) => m.predict(x),
        }
    }

    /// Virtual cost of one prediction.
    pub fn predict_ops(&self) -> u64 {
        match self {
            Model::ZeroR { .. } => 1,
            Model::Knn(m) => m.predict_ops(),
            Model::Bayes(m) => m.predict_ops(),
            Model::Tree(m) => m.predict_ops(),
            Model::Forest(m) => m.predict_ops(),
            Model::Linear(m) => m.predict_ops(),
            Model::Boosted(m) => m.predict_ops(),
            Model::Ada(m) => m.predict_ops(),
            Model::Vote(m) => m.predict_ops(),
        }
    }
}

fn full<M>(model: M) -> Fit<M> {
    Fit { model, partial: false }
}

/// Trains algorithm `id` on `t`, reading its parameters under `prefix`.
pub fn fit_algorithm(
    id: &str,
    t: &Table,
    values: &BTreeMap<String, Value>,
    prefix: &str,
    rng: &mut Rng,
    meter: &mut Meter,
) -> std::result::Result<Fit<Model>, Abort> {
    let p = Params::nested(values, prefix);
    if t.n() == 0 {
        return Err(Abort::Failure("empty training sample".into()));
    }
    Ok(match id {
        "zero_r" => {
            meter.charge(t.n() as u64);
            full(Model::ZeroR { class: t.majority() })
        }
        "knn" => full(Model::Knn(knn::train(t, &p, meter)?)),
        "naive_bayes" => full(Model::Bayes(bayes::train(t, &p, meter)?)),
        "decision_tree" => full(Model::Tree(tree::train(t, &p, rng, meter)?)),
        "random_forest" => {
            let f = forest::train(t, &p, rng, meter)?;
            Fit { model: Model::Forest(f.model), partial: f.partial }
        }
        "linear_svm" => {
            let f = linear::train_svm(t, &p, rng, meter)?;
            Fit { model: Model::Linear(f.model), partial: f.partial }
        }
        "logistic_regression" => {
            let f = linear::train_logistic(t, &p, rng, meter)?;
            Fit { model: Model::Linear(f.model), partial: f.partial }
        }
        "gradient_boosting" => {
            let f = boosting::train_gb(t, &p, rng, meter)?;
            Fit { model: Model::Boosted(f.model), partial: f.partial }
        }
        "adaboost" => {
            let f = boosting::train_ada(t, values, prefix, rng, meter)?;
            Fit { model: Model::Ada(f.model), partial: f.partial }
        }
        "vote" => {
            let f = ensemble::train(t, &p, rng, meter)?;
            Fit { model: Model::Vote(f.model), partial: f.partial }
        }
        other => return Err(Abort::Failure(format!("unknown algorithm `{other}`"))),
    })
}

/// Misclassification rate of `model` on `t`; charges prediction cost.
pub fn evaluate_error(model: &Model, t: &Table, meter: &mut Meter) -> f64 {
    if t.n() == 0 {
        return 1.0;
    }
    let wrong = (0..t.n()).filter(|&i| model.predict(t.row(i)) != t.y[i]).count();
    meter.charge(t.n() as u64 * model.predict_ops());
    wrong as f64 / t.n() as f64
}

pub const MODEL_FORMAT: &str = "psbo-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    /// Value substituted for a missing cell: the training median or mode.
    pub fill: f64,
}

/// A final model with everything needed to predict from raw input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub algorithm: String,
    pub combination: Combination,
    pub target: String,
    pub classes: Vec<String>,
    pub schema: Vec<FeatureSchema>,
    /// Schema indices of the features the model reads.
    pub columns: Vec<usize>,
    pub partial: bool,
    pub model: Model,
}

fn fill_value(d: &Dataset, j: usize) -> f64 {
    let v: Vec<f64> = (0..d.n()).map(|i| d.value(i, j)).collect();
    match d.features()[j].kind {
        FeatureKind::Numeric => crate::dataset::median(&v),
        FeatureKind::Categorical => crate::dataset::mode(&v, d.features()[j].levels.len()),
    }
    .unwrap_or(0.0)
}

impl TrainedModel {
    pub fn new(d: &Dataset, combination: Combination, columns: Vec<usize>, fit: Fit<Model>) -> TrainedModel {
        let schema = d
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| FeatureSchema {
                name: f.name.clone(),
                kind: f.kind,
                levels: f.levels.clone(),
                fill: fill_value(d, j),
            })
            .collect();
        TrainedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            algorithm: combination.algorithm.clone(),
            combination,
            target: d.target_name().to_string(),
            classes: d.classes().to_vec(),
            schema,
            columns,
            partial: fit.partial,
            model: fit.model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
        let version = v.get("version").and_then(|f| f.as_u64()).unwrap_or(0);
        if format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("not a model file (format `{format}`)")));
        }
        if version != u64::from(MODEL_VERSION) {
            return Err(Error::ModelFormat(format!(
                "model version {version} is not supported (expected {MODEL_VERSION})"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let x: Vec<f64> = self.columns.iter().map(|&j| row[j]).collect();
        self.model.predict(&x)
    }

    /// Predicts every row of a loaded dataset whose features match the
    /// training schema by name and kind.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<String>> {
        let mut map = Vec::with_capacity(self.schema.len());
        for s in &self.schema {
            let j = d
                .features()
                .iter()
                .position(|f| f.name == s.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("missing feature column `{}`", s.name)))?;
            if d.features()[j].kind != s.kind {
                return Err(Error::SchemaMismatch(format!("feature `{}` changed kind", s.name)));
            }
            map.push(j);
        }
        Ok((0..d.n())
            .map(|i| {
                let row: Vec<f64> = self
                    .schema
                    .iter()
                    .zip(&map)
                    .map(|(s, &j)| match s.kind {
                        FeatureKind::Numeric => d.value(i, j),
                        FeatureKind::Categorical => {
                            let level = &d.features()[j].levels[d.value(i, j) as usize];
                            s.levels.iter().position(|l| l == level).unwrap_or(s.levels.len()) as f64
                        }
                    })
                    .collect();
                self.classes[self.predict_row(&row)].clone()
            })
            .collect())
    }

    /// Predicts every row of a CSV file with a header. The target column may
    /// be absent; extra columns are ignored.
    pub fn predict_csv(&self, text: &str) -> Result<Vec<String>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut map = Vec::with_capacity(self.schema.len());
        for s in &self.schema {
            let j = header
                .iter()
                .position(|h| *h == s.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("missing feature column `{}`", s.name)))?;
            map.push(j);
        }
        let mut out = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let line = r as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let mut row = Vec::with_capacity(self.schema.len());
            for (s, &j) in self.schema.iter().zip(&map) {
                let cell = rec.get(j).unwrap_or("");
                let v = if cell.is_empty() || cell == "?" {
                    s.fill
                } else {
                    match s.kind {
                        FeatureKind::Numeric => cell.parse::<f64>().map_err(|_| Error::SchemaMismatch(format!(
                            "line {line}: `{cell}` is not numeric in column `{}`",
                            s.name
                        )))?,
                        FeatureKind::Categorical => {
                            s.levels.iter().position(|l| l == cell).unwrap_or(s.levels.len()) as f64
                        }
                    }
                };
                row.push(v);
            }
            out.push(self.classes[self.predict_row(&row)].clone());
        }
        Ok(out)
    }
}
