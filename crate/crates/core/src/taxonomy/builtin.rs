use std::sync::OnceLock;

use super::{parse_taxonomy, Taxonomy, TaxonomyError};

const CORE_TEXT: &str = include_str!("../../taxonomies/core.tax");
const SLAVIC_TEXT: &str = include_str!("../../taxonomies/slavic.tax");

pub const BUILTIN_NAMES: [&str; 2] = ["core", "slavic"];

fn cached(cell: &'static OnceLock<Taxonomy>, text: &str) -> Taxonomy {
    cell.get_or_init(|| parse_taxonomy(text).expect("built-in taxonomy parses"))
        .clone()
}

/// The MQM core tagset.
pub fn core_tagset() -> Taxonomy {
    static CELL: OnceLock<Taxonomy> = OnceLock::new();
    cached(&CELL, CORE_TEXT)
}

/// The Slavic tagset: core minus Typography, plus Register and the four
/// agreement subtypes (Number, Gender, Case, Person).
pub fn slavic_tagset() -> Taxonomy {
    static CELL: OnceLock<Taxonomy> = OnceLock::new();
    cached(&CELL, SLAVIC_TEXT)
}

impl Taxonomy {
    /// Looks up a built-in tagset by name (`core` or `slavic`).
    pub fn builtin(name: &str) -> Result<Taxonomy, TaxonomyError> {
        match name {
            "core" | "mqm-core" => Ok(core_tagset()),
            "slavic" => Ok(slavic_tagset()),
            other => Err(TaxonomyError::UnknownBuiltin(other.to_owned())),
        }
    }
}
