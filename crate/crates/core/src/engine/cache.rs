//! Feature-selection caches shared by all algorithms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hyperspace::{FsBlock, HyperSpace, Scale, ParamKind};
use crate::learnzoo::features::{fs_space, SEARCH_NUMERIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheCause {
    Timeout,
    AllSelected,
    NoneSelected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub block: FsBlock,
    pub cause: CacheCause,
}

/// Blocks found to time out or to select all or no features. Lookups match
/// at distance 0 and go through an index on the evaluator and one on each
/// numeric search parameter.
#[derive(Debug, Clone)]
pub struct FsCache {
    space: HyperSpace,
    entries: Vec<CacheEntry>,
    by_evaluator: BTreeMap<String, Vec<usize>>,
    /// Per numeric search parameter: (position on its scale, entry), sorted.
    by_numeric: BTreeMap<&'static str, Vec<(f64, usize)>>,
}

impl Default for FsCache {
    fn default() -> Self {
        FsCache {
            space: fs_space(),
            entries: Vec::new(),
            by_evaluator: BTreeMap::new(),
            by_numeric: BTreeMap::new(),
        }
    }
}

impl FsCache {
    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of `v` on the parameter's scale and 1% of its span.
    fn scaled(&self, name: &str, v: f64) -> Option<(f64, f64)> {
        match &self.space.param(name)?.kind {
            ParamKind::Numeric { min, max, scale, .. } => Some(match scale {
                Scale::Linear => (v, 0.01 * (max - min)),
                Scale::Log => (v.ln(), 0.01 * (max.ln() - min.ln())),
            }),
            ParamKind::Categorical { .. } => None,
        }
    }

    /// Adds `block` unless an equal one is cached. Returns whether it was added.
    pub fn insert(&mut self, block: FsBlock, cause: CacheCause) -> bool {
        if self.lookup(&block).is_some() {
            return false;
        }
        let idx = self.entries.len();
        self.by_evaluator.entry(block.evaluator().to_string()).or_default().push(idx);
        for name in SEARCH_NUMERIC {
            if let Some((x, _)) = block.num(name).and_then(|v| self.scaled(name, v)) {
                let list = self.by_numeric.entry(name).or_default();
                let at = list.partition_point(|e| e.0 <= x);
                list.insert(at, (x, idx));
            }
        }
        self.entries.push(CacheEntry { block, cause });
        true
    }

    /// The first cached entry at distance 0 from `block`.
    pub fn lookup(&self, block: &FsBlock) -> Option<&CacheEntry> {
        let Some(bucket) = self.by_evaluator.get(block.evaluator()) else {
            return None;
        };
        let numeric = SEARCH_NUMERIC
            .iter()
            .find_map(|&name| Some((name, self.scaled(name, block.num(name)?)?)));
        let candidates: Vec<usize> = match numeric {
            Some((name, (x, tol))) => {
                let list = self.by_numeric.get(name).map(Vec::as_slice).unwrap_or(&[]);
                let lo = list.partition_point(|e| e.0 < x - tol);
                let mut c: Vec<usize> = list[lo..]
                    .iter()
                    .take_while(|e| e.0 <= x + tol)
                    .map(|e| e.1)
                    .collect();
                c.sort_unstable();
                c
            }
            None => bucket.clone(),
        };
        candidates
            .into_iter()
            .map(|i| &self.entries[i])
            .find(|e| self.space.distance(&e.block.values, &block.values) == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::Value;

    fn block(eval: &str, fraction: f64) -> FsBlock {
        FsBlock {
            values: BTreeMap::from([
                ("fs.search".to_string(), Value::Cat("ranker".into())),
                ("fs.evaluator".to_string(), Value::Cat(eval.into())),
                ("fs.ranker.mode".to_string(), Value::Cat("top_fraction".into())),
                ("fs.ranker.fraction".to_string(), Value::Num(fraction)),
                ("fs.bins".to_string(), Value::Num(10.0)),
            ]),
        }
    }

    #[test]
    fn exact_and_near_matches_hit() {
        let mut c = FsCache::default();
        assert!(c.insert(block("info_gain", 0.5), CacheCause::Timeout));
        assert!(c.lookup(&block("info_gain", 0.5)).is_some());
        // 1% of the 0.95 span is 0.0095.
        assert!(c.lookup(&block("info_gain", 0.509)).is_some());
        assert!(c.lookup(&block("info_gain", 0.52)).is_none());
        assert!(c.lookup(&block("chi_square", 0.5)).is_none());
        assert!(!c.insert(block("info_gain", 0.505), CacheCause::AllSelected));
        assert_eq!(c.len(), 1);
    }
}
