//! Hierarchical error taxonomies.
//!
//! A [`Taxonomy`] is a forest of [`ErrorCategory`] nodes. Category ids are
//! dot-separated paths (`fluency.grammar.word_form.agreement.case`), so the id
//! of every node is its parent's id plus one local key. Two tagsets ship
//! built in: the MQM core tagset and the Slavic tagset (see [`builtin`]).
//!
//! Taxonomies are immutable once constructed and cheap to share behind an
//! `Arc`.

mod builtin;
mod format;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{core_tagset, slavic_tagset, BUILTIN_NAMES};
pub use format::{parse_taxonomy, slugify, CategoryNode, TaxonomyTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate category id `{0}`")]
    DuplicateId(String),
    #[error("category `{id}` refers to missing parent `{parent}`")]
    DanglingParent { id: String, parent: String },
    #[error("cycle detected through category `{0}`")]
    Cycle(String),
    #[error("category id `{id}` does not extend its parent path `{parent}`")]
    InconsistentId { id: String, parent: String },
    #[error("root category id `{0}` must not contain a dot")]
    DottedRoot(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown built-in taxonomy `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCategory {
    pub id: String,
    pub name: String,
    pub parent: Option<String>,
    pub selectable: bool,
}

impl ErrorCategory {
    pub fn new(id: impl Into<String>, name: impl Into<String>, parent: Option<&str>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            parent: parent.map(str::to_owned),
            selectable: true,
        }
    }

    /// Last path segment of the id.
    pub fn key(&self) -> &str {
        local_key(&self.id)
    }
}

pub(crate) fn local_key(id: &str) -> &str {
    id.rsplit('.').next().unwrap_or(id)
}

/// A validated forest of error categories, stored in pre-order.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    name: String,
    version: String,
    categories: Vec<ErrorCategory>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Option<usize>>,
    roots: Vec<usize>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.version == other.version && self.categories == other.categories
    }
}

impl Eq for Taxonomy {}

impl Taxonomy {
    /// Builds a taxonomy from categories in any order.
    ///
    /// Children keep the relative order in which they appear in `categories`;
    /// the stored order is a pre-order walk of the forest.
    pub fn from_categories(
        name: impl Into<String>,
        version: impl Into<String>,
        categories: Vec<ErrorCategory>,
    ) -> Result<Self, TaxonomyError> {
        let mut index = HashMap::with_capacity(categories.len());
        for (i, c) in categories.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateId(c.id.clone()));
            }
        }
        for c in &categories {
            if let Some(p) = &c.parent {
                if !index.contains_key(p) {
                    return Err(TaxonomyError::DanglingParent {
                        id: c.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        // Walk every parent chain; any chain longer than the node count loops.
        for c in &categories {
            let mut seen = HashSet::new();
            let mut cur = c;
            while let Some(p) = &cur.parent {
                if !seen.insert(cur.id.as_str()) || p == &cur.id {
                    return Err(TaxonomyError::Cycle(cur.id.clone()));
                }
                cur = &categories[index[p]];
            }
        }
        for c in &categories {
            match &c.parent {
                Some(p) => {
                    let ok =
                        c.id.strip_prefix(p.as_str())
                            .and_then(|rest| rest.strip_prefix('.'))
                            .is_some_and(|key| !key.is_empty() && !key.contains('.'));
                    if !ok {
                        return Err(TaxonomyError::InconsistentId {
                            id: c.id.clone(),
                            parent: p.clone(),
                        });
                    }
                }
                None if c.id.contains('.') || c.id.is_empty() => {
                    return Err(TaxonomyError::DottedRoot(c.id.clone()));
                }
                None => {}
            }
        }

        // Re-emit in pre-order.
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); categories.len()];
        let mut roots = Vec::new();
        for (i, c) in categories.iter().enumerate() {
            match &c.parent {
                Some(p) => kids[index[p]].push(i),
                None => roots.push(i),
            }
        }
        let mut order = Vec::with_capacity(categories.len());
        let mut stack: Vec<usize> = roots.iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            order.push(i);
            stack.extend(kids[i].iter().rev());
        }
        let mut slots: Vec<Option<ErrorCategory>> = categories.into_iter().map(Some).collect();
        let ordered: Vec<ErrorCategory> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        Ok(Self::index_preordered(name.into(), version.into(), ordered))
    }

    fn index_preordered(name: String, version: String, categories: Vec<ErrorCategory>) -> Self {
        let index: HashMap<String, usize> = categories.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let mut children = vec![Vec::new(); categories.len()];
        let mut parents = vec![None; categories.len()];
        let mut roots = Vec::new();
        for (i, c) in categories.iter().enumerate() {
            match &c.parent {
                Some(p) => {
                    let pi = index[p];
                    children[pi].push(i);
                    parents[i] = Some(pi);
                }
                None => roots.push(i),
            }
        }
        Self {
            name,
            version,
            categories,
            index,
            children,
            parents,
            roots,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// All categories in pre-order.
    pub fn categories(&self) -> &[ErrorCategory] {
        &self.categories
    }

    pub fn roots(&self) -> impl Iterator<Item = &ErrorCategory> {
        self.roots.iter().map(|&i| &self.categories[i])
    }

    pub fn get(&self, id: &str) -> Option<&ErrorCategory> {
        self.index.get(id).map(|&i| &self.categories[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn children(&self, id: &str) -> Result<impl Iterator<Item = &ErrorCategory>, TaxonomyError> {
        let i = self.position(id)?;
        Ok(self.children[i].iter().map(|&c| &self.categories[c]))
    }

    fn position(&self, id: &str) -> Result<usize, TaxonomyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownCategory(id.to_owned()))
    }

    /// Ids from `id` up to its root, self first.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        let mut i = self.position(id)?;
        let mut out = vec![self.categories[i].id.as_str()];
        while let Some(p) = self.parents[i] {
            out.push(self.categories[p].id.as_str());
            i = p;
        }
        Ok(out)
    }

    /// Number of edges between `id` and its root.
    pub fn depth(&self, id: &str) -> Result<usize, TaxonomyError> {
        Ok(self.ancestors(id)?.len() - 1)
    }

    /// Maximum node depth over the whole forest, 0 for a forest of roots.
    pub fn max_depth(&self) -> usize {
        self.categories
            .iter()
            .map(|c| c.id.matches('.').count())
            .max()
            .unwrap_or(0)
    }

    /// `id` itself followed by all of its descendants, in pre-order.
    pub fn descendants_or_self(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        let i = self.position(id)?;
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.push(self.categories[n].id.as_str());
            stack.extend(self.children[n].iter().rev());
        }
        Ok(out)
    }

    /// True when `ancestor` is `id` or lies on its parent chain.
    pub fn is_within(&self, id: &str, ancestor: &str) -> bool {
        id == ancestor
            || (id.len() > ancestor.len()
                && id.starts_with(ancestor)
                && id.as_bytes()[ancestor.len()] == b'.'
                && self.contains(id))
    }

    /// True when `id` or any of its ancestors has local key `key`.
    pub fn has_ancestor_key(&self, id: &str, key: &str) -> bool {
        self.contains(id) && id.split('.').any(|seg| seg == key)
    }

    /// First category (pre-order) whose local key is `key`.
    pub fn find_by_key(&self, key: &str) -> Option<&ErrorCategory> {
        self.categories.iter().find(|c| c.key() == key)
    }
}

/// Category-level difference between two taxonomies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaxonomyDiff {
    /// Ids present only in the first taxonomy.
    pub removed: Vec<String>,
    /// Ids present only in the second taxonomy.
    pub added: Vec<String>,
    /// Categories whose local key survives under a different parent.
    pub moved: Vec<MovedCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MovedCategory {
    pub from: String,
    pub to: String,
}

impl TaxonomyDiff {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty() && self.moved.is_empty()
    }

    /// The diff of the two taxonomies taken in the opposite order.
    pub fn inverted(&self) -> Self {
        Self {
            removed: self.added.clone(),
            added: self.removed.clone(),
            moved: self
                .moved
                .iter()
                .map(|m| MovedCategory {
                    from: m.to.clone(),
                    to: m.from.clone(),
                })
                .collect(),
        }
    }
}

/// Compares `a` against `b`.
///
/// Because ids encode the ancestor path, a category that changed parent shows
/// up under a new id. A removed id and an added id sharing the same local key,
/// where that key is unique on both sides, are reported as one move.
pub fn diff_taxonomies(a: &Taxonomy, b: &Taxonomy) -> TaxonomyDiff {
    let only = |x: &Taxonomy, y: &Taxonomy| -> Vec<String> {
        x.categories
            .iter()
            .filter(|c| !y.contains(&c.id))
            .map(|c| c.id.clone())
            .collect()
    };
    let mut removed = only(a, b);
    let mut added = only(b, a);

    let key_count = |ids: &[String], key: &str| ids.iter().filter(|i| local_key(i) == key).count();
    let mut moved = Vec::new();
    for r in removed.clone() {
        let key = local_key(&r);
        if key_count(&removed, key) != 1 || key_count(&added, key) != 1 {
            continue;
        }
        if let Some(pos) = added.iter().position(|x| local_key(x) == key) {
            moved.push(MovedCategory {
                from: r.clone(),
                to: added.remove(pos),
            });
        }
    }
    removed.retain(|r| !moved.iter().any(|m| &m.from == r));
    TaxonomyDiff { removed, added, moved }
}
