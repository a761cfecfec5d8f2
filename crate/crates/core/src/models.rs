//! Bundled example models, embedded at compile time.

use crate::model::{parse, Model};

pub const SI: &str = include_str!("../models/si.model");
pub const SIS: &str = include_str!("../models/sis.model");
pub const SIS_MIGRATION: &str = include_str!("../models/sis_migration.model");
pub const AUTOPHOS: &str = include_str!("../models/autophos.model");
pub const MM_FULL: &str = include_str!("../models/mm_full.model");
pub const MM_FUTILE: &str = include_str!("../models/mm_futile.model");

fn must(text: &str) -> Model {
    parse(text).expect("bundled model must parse")
}

pub fn si() -> Model {
    must(SI)
}
pub fn sis() -> Model {
    must(SIS)
}
pub fn sis_migration() -> Model {
    must(SIS_MIGRATION)
}
pub fn autophos() -> Model {
    must(AUTOPHOS)
}
pub fn mm_full() -> Model {
    must(MM_FULL)
}
pub fn mm_futile() -> Model {
    must(MM_FUTILE)
}

/// All bundled models.
pub fn all() -> Vec<Model> {
    vec![
        si(),
        sis(),
        sis_migration(),
        autophos(),
        mm_full(),
        mm_futile(),
    ]
}

/// Bundled models by name, for the command-line loader.
pub fn by_name(name: &str) -> Option<Model> {
    match name {
        "si" => Some(si()),
        "sis" => Some(sis()),
        "sis_migration" => Some(sis_migration()),
        "autophos" => Some(autophos()),
        "mm_full" => Some(mm_full()),
        "mm_futile" => Some(mm_futile()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_augmented;

    #[test]
    fn all_bundled_models_validate() {
        for m in all() {
            assert!(m.network.validate().is_empty());
            if let Some(schema) = &m.schema {
                build_augmented(&m.network, schema).unwrap();
            }
        }
    }
}
