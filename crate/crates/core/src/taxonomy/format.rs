//! Plain-text taxonomy definitions and the JSON tree export.
//!
//! ```text
//! # comments run to end of line
//! @name slavic
//! @version 1.0
//! Accuracy
//!   Mistranslation
//! Fluency !nonselectable
//!   Grammar
//!     Word form
//!       Tense/aspect/mood [tense_aspect_mood]
//! ```
//!
//! Two spaces of indentation make a line the child of the nearest shallower
//! line. A trailing `[key]` overrides the local key derived from the display
//! name. Top-level lines may instead name their parent explicitly with
//! `^parent.id`; on such lines the bracket holds the full category id and is
//! required.

use serde::{Deserialize, Serialize};

use super::{ErrorCategory, Taxonomy, TaxonomyError};

const NONSELECTABLE: &str = "!nonselectable";

/// Lower-cases `name` and collapses every run of non-alphanumerics to `_`.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut gap = false;
    for ch in name.chars() {
        if ch.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.extend(ch.to_lowercase());
        } else {
            gap = true;
        }
    }
    out
}

struct RawLine {
    name: String,
    id: String,
    parent: Option<String>,
    selectable: bool,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> TaxonomyError {
    TaxonomyError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

/// Parses a taxonomy definition document.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let mut name = String::from("unnamed");
    let mut version = String::from("0");
    let mut raw: Vec<RawLine> = Vec::new();
    // (depth, index into raw) for the current indentation chain
    let mut chain: Vec<(usize, usize)> = Vec::new();

    for (n, full) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = strip_comment(full).trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if let Some(col) = line[..indent].find('\t') {
            return Err(syntax(lineno, col + 1, "tabs are not allowed in indentation"));
        }
        let body = line.trim_start();

        if let Some(directive) = body.strip_prefix('@') {
            if indent != 0 {
                return Err(syntax(lineno, 1, "directives must not be indented"));
            }
            let (key, value) = directive.split_once(char::is_whitespace).unwrap_or((directive, ""));
            let value = value.trim();
            if value.is_empty() {
                return Err(syntax(lineno, indent + 2 + key.len(), format!("@{key} needs a value")));
            }
            match key {
                "name" => name = value.to_owned(),
                "version" => version = value.to_owned(),
                _ => return Err(syntax(lineno, 2, format!("unknown directive @{key}"))),
            }
            continue;
        }

        if !indent.is_multiple_of(2) {
            return Err(syntax(
                lineno,
                indent + 1,
                "indentation must be a multiple of two spaces",
            ));
        }
        let depth = indent / 2;
        while chain.last().is_some_and(|&(d, _)| d >= depth) {
            chain.pop();
        }
        let parent_idx = match chain.last() {
            Some(&(d, i)) if d + 1 == depth => Some(i),
            None if depth == 0 => None,
            _ => return Err(syntax(lineno, indent + 1, "indentation skips a level")),
        };

        let parsed = parse_entry(body, lineno, indent)?;
        let (id, parent) = match (parent_idx, parsed.explicit_parent) {
            (Some(_), Some(_)) => {
                return Err(syntax(
                    lineno,
                    indent + 1,
                    "`^parent` is only allowed on top-level lines",
                ))
            }
            (Some(pi), None) => {
                let key = parsed.bracket.unwrap_or_else(|| slugify(&parsed.name));
                if key.contains('.') {
                    return Err(syntax(lineno, indent + 1, "local keys must not contain dots"));
                }
                let pid = raw[pi].id.clone();
                (format!("{pid}.{key}"), Some(pid))
            }
            (None, Some(p)) => match parsed.bracket {
                Some(id) => (id, Some(p)),
                None => return Err(syntax(lineno, indent + 1, "lines with `^parent` need a full `[id]`")),
            },
            (None, None) => (parsed.bracket.unwrap_or_else(|| slugify(&parsed.name)), None),
        };
        if id.is_empty() || id.split('.').any(str::is_empty) {
            return Err(syntax(lineno, indent + 1, "category id is empty"));
        }
        chain.push((depth, raw.len()));
        raw.push(RawLine {
            name: parsed.name,
            id,
            parent,
            selectable: parsed.selectable,
        });
    }

    let mut seen = std::collections::HashSet::new();
    for r in &raw {
        if !seen.insert(r.id.as_str()) {
            return Err(TaxonomyError::DuplicateId(r.id.clone()));
        }
    }
    let categories = raw
        .into_iter()
        .map(|r| ErrorCategory {
            id: r.id,
            name: r.name,
            parent: r.parent,
            selectable: r.selectable,
        })
        .collect();
    Taxonomy::from_categories(name, version, categories)
}

struct Entry {
    name: String,
    bracket: Option<String>,
    explicit_parent: Option<String>,
    selectable: bool,
}

fn parse_entry(body: &str, line: usize, indent: usize) -> Result<Entry, TaxonomyError> {
    let mut rest = body.trim_end();
    let mut selectable = true;
    let mut explicit_parent = None;
    let mut bracket = None;

    loop {
        if let Some(r) = rest.strip_suffix(NONSELECTABLE) {
            selectable = false;
            rest = r.trim_end();
            continue;
        }
        if let Some(pos) = rest.rfind(|c: char| c.is_whitespace()) {
            if let Some(p) = rest[pos + 1..].strip_prefix('^') {
                if p.is_empty() {
                    return Err(syntax(line, indent + pos + 2, "empty `^parent`"));
                }
                explicit_parent = Some(p.to_owned());
                rest = rest[..pos].trim_end();
                continue;
            }
        }
        break;
    }
    if rest.ends_with(']') {
        let open = rest
            .rfind('[')
            .ok_or_else(|| syntax(line, indent + rest.len(), "unmatched `]`"))?;
        let inner = rest[open + 1..rest.len() - 1].trim();
        if inner.is_empty() {
            return Err(syntax(line, indent + open + 1, "empty `[key]`"));
        }
        bracket = Some(inner.to_owned());
        rest = rest[..open].trim_end();
    }
    if let Some(col) = rest.find(['[', ']', '^', '!']) {
        return Err(syntax(line, indent + col + 1, "unexpected character in category name"));
    }
    if rest.is_empty() {
        return Err(syntax(line, indent + 1, "missing category name"));
    }
    Ok(Entry {
        name: rest.to_owned(),
        bracket,
        explicit_parent,
        selectable,
    })
}

impl Taxonomy {
    /// Serializes to the indentation format; `parse_taxonomy` reads it back
    /// to an equal taxonomy.
    pub fn to_text(&self) -> String {
        let mut out = format!("@name {}\n@version {}\n", self.name, self.version);
        for c in &self.categories {
            let depth = c.id.matches('.').count();
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str(&c.name);
            if slugify(&c.name) != c.key() {
                out.push_str(" [");
                out.push_str(c.key());
                out.push(']');
            }
            if !c.selectable {
                out.push(' ');
                out.push_str(NONSELECTABLE);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_tree(&self) -> TaxonomyTree {
        fn node(t: &Taxonomy, i: usize) -> CategoryNode {
            let c = &t.categories[i];
            CategoryNode {
                id: c.id.clone(),
                name: c.name.clone(),
                selectable: c.selectable,
                children: t.children[i].iter().map(|&k| node(t, k)).collect(),
            }
        }
        TaxonomyTree {
            name: self.name.clone(),
            version: self.version.clone(),
            categories: self.roots.iter().map(|&r| node(self, r)).collect(),
        }
    }
}

/// Canonical structured export: `{name, version, categories: [{id, name, children}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyTree {
    pub name: String,
    pub version: String,
    pub categories: Vec<CategoryNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub id: String,
    pub name: String,
    pub selectable: bool,
    pub children: Vec<CategoryNode>,
}

impl TaxonomyTree {
    pub fn into_taxonomy(self) -> Result<Taxonomy, TaxonomyError> {
        fn walk(n: CategoryNode, parent: Option<&str>, out: &mut Vec<ErrorCategory>) {
            out.push(ErrorCategory {
                id: n.id.clone(),
                name: n.name,
                parent: parent.map(str::to_owned),
                selectable: n.selectable,
            });
            for c in n.children {
                walk(c, Some(&n.id), out);
            }
        }
        let mut cats = Vec::new();
        for n in self.categories {
            walk(n, None, &mut cats);
        }
        Taxonomy::from_categories(self.name, self.version, cats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{core_tagset, slavic_tagset};
    use proptest::prelude::*;

    #[test]
    fn slug_rules() {
        assert_eq!(slugify("Word form"), "word_form");
        assert_eq!(slugify("Tense/aspect/mood"), "tense_aspect_mood");
        assert_eq!(slugify("  Part of   speech "), "part_of_speech");
    }

    #[test]
    fn single_root_document() {
        let t = parse_taxonomy("Accuracy\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.roots().count(), 1);
        assert_eq!(t.name(), "unnamed");
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let err = parse_taxonomy("Foo [foo] ^foo\n").unwrap_err();
        assert_eq!(err, TaxonomyError::Cycle("foo".into()));
    }

    #[test]
    fn explicit_parent_and_forward_reference() {
        let t = parse_taxonomy("Child [root.child] ^root\nRoot\n").unwrap();
        assert_eq!(t.get("root.child").unwrap().parent.as_deref(), Some("root"));
        assert_eq!(t.categories()[0].id, "root");
    }

    #[test]
    fn dangling_explicit_parent() {
        let err = parse_taxonomy("Child [nowhere.child] ^nowhere\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::DanglingParent { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_taxonomy("A\n   B\n").unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::Syntax {
                line: 2,
                column: 4,
                message: "indentation must be a multiple of two spaces".into()
            }
        );
        let err = parse_taxonomy("A\n    B\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Syntax { line: 2, column: 5, .. }));
        let err = parse_taxonomy("A\n\tB\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Syntax { line: 2, column: 1, .. }));
        let err = parse_taxonomy("@colour red\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Syntax { line: 1, .. }));
        let err = parse_taxonomy("A\n  B [x.y]\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Syntax { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids() {
        let err = parse_taxonomy("A\n  B\n  B\n").unwrap_err();
        assert_eq!(err, TaxonomyError::DuplicateId("a.b".into()));
    }

    #[test]
    fn comments_flags_and_keys() {
        let t = parse_taxonomy(
            "# header\n@name demo\n@version 2\nFluency !nonselectable # parent only\n  Tense/aspect/mood [tam]\n",
        )
        .unwrap();
        assert_eq!(t.name(), "demo");
        assert_eq!(t.version(), "2");
        assert!(!t.get("fluency").unwrap().selectable);
        assert_eq!(t.get("fluency.tam").unwrap().name, "Tense/aspect/mood");
    }

    #[test]
    fn builtins_round_trip_through_text_and_tree() {
        for t in [core_tagset(), slavic_tagset()] {
            assert_eq!(parse_taxonomy(&t.to_text()).unwrap(), t);
            assert_eq!(t.to_tree().into_taxonomy().unwrap(), t);
        }
    }

    fn arb_taxonomy() -> impl Strategy<Value = Taxonomy> {
        // Each entry picks a parent among earlier nodes (or none).
        prop::collection::vec((any::<prop::sample::Index>(), any::<bool>(), any::<bool>()), 1..30).prop_map(|spec| {
            let mut cats: Vec<ErrorCategory> = Vec::new();
            for (i, (pick, is_root, sel)) in spec.into_iter().enumerate() {
                let name = format!("Node {i}");
                let key = slugify(&name);
                let parent = if is_root || cats.is_empty() {
                    None
                } else {
                    Some(cats[pick.index(cats.len())].id.clone())
                };
                let id = match &parent {
                    Some(p) => format!("{p}.{key}"),
                    None => key,
                };
                cats.push(ErrorCategory {
                    id,
                    name,
                    parent,
                    selectable: sel,
                });
            }
            Taxonomy::from_categories("gen", "1", cats).unwrap()
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(t in arb_taxonomy()) {
            prop_assert_eq!(parse_taxonomy(&t.to_text()).unwrap(), t);
        }

        #[test]
        fn ancestors_end_at_a_root_within_depth(t in arb_taxonomy()) {
            for c in t.categories() {
                let a = t.ancestors(&c.id).unwrap();
                prop_assert_eq!(a[0], c.id.as_str());
                prop_assert!(a.len() - 1 <= t.max_depth());
                prop_assert!(t.get(a[a.len() - 1]).unwrap().parent.is_none());
                for w in a.windows(2) {
                    prop_assert_eq!(t.get(w[0]).unwrap().parent.as_deref(), Some(w[1]));
                }
            }
        }
    }
}
