use std::collections::BTreeMap;

use crate::hyperspace::Value;

use super::meter::Abort;

/// Read access to one learner's hyper-parameters inside a combination,
/// optionally under a name prefix (the base learner of a meta algorithm).
#[derive(Debug, Clone, Copy)]
pub struct Params<'a> {
    values: &'a BTreeMap<String, Value>,
    prefix: &'a str,
}

impl<'a> Params<'a> {
    pub fn new(values: &'a BTreeMap<String, Value>) -> Self {
        Params { values, prefix: "" }
    }

    pub fn nested(values: &'a BTreeMap<String, Value>, prefix: &'a str) -> Self {
        Params { values, prefix }
    }

    fn get(&self, name: &str) -> Option<&'a Value> {
        if self.prefix.is_empty() {
            self.values.get(name)
        } else {
            self.values.get(&format!("{}{name}", self.prefix))
        }
    }

    pub fn num(&self, name: &str) -> Result<f64, Abort> {
        self.get(name)
            .and_then(Value::as_num)
            .ok_or_else(|| Abort::Failure(format!("missing numeric parameter `{}{name}`", self.prefix)))
    }

    pub fn int(&self, name: &str) -> Result<usize, Abort> {
        Ok(self.num(name)?.round().max(0.0) as usize)
    }

    pub fn cat(&self, name: &str) -> Result<&'a str, Abort> {
        self.get(name)
            .and_then(Value::as_cat)
            .ok_or_else(|| Abort::Failure(format!("missing categorical parameter `{}{name}`", self.prefix)))
    }

    pub fn flag(&self, name: &str) -> Result<bool, Abort> {
        Ok(self.cat(name)? == "true")
    }

    /// An integer that is only active under a switch; `None` when inactive.
    pub fn opt_int(&self, name: &str) -> Option<usize> {
        self.get(name).and_then(Value::as_num).map(|v| v.round().max(0.0) as usize)
    }
}
