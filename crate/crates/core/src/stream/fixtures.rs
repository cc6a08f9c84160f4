//! Stream fixtures checked into `fixtures/streams/`, one per benchmark column.

use super::StreamSpec;
use crate::error::{Error, Result};

const FIXTURES: &[(&str, &str)] = &[
    ("RBF", include_str!("../../fixtures/streams/rbf.toml")),
    ("RBF2", include_str!("../../fixtures/streams/rbf2.toml")),
    ("SEA0", include_str!("../../fixtures/streams/sea0.toml")),
    ("SEA1", include_str!("../../fixtures/streams/sea1.toml")),
    ("SEA2", include_str!("../../fixtures/streams/sea2.toml")),
    ("SineA", include_str!("../../fixtures/streams/sine_a.toml")),
    ("Sine4", include_str!("../../fixtures/streams/sine4.toml")),
    ("SineL", include_str!("../../fixtures/streams/sine_l.toml")),
    ("Hyp0", include_str!("../../fixtures/streams/hyp0.toml")),
    ("Hyp1", include_str!("../../fixtures/streams/hyp1.toml")),
    (
        "Stagger",
        include_str!("../../fixtures/streams/stagger.toml"),
    ),
    (
        "Agrawal",
        include_str!("../../fixtures/streams/agrawal.toml"),
    ),
];

/// The ten columns of the main results table, in display order.
pub const TABLE_COLUMNS: [&str; 10] = [
    "RBF", "RBF2", "SEA0", "SEA1", "SEA2", "SineA", "Sine4", "SineL", "Hyp0", "Hyp1",
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<StreamSpec> {
    let (_, text) = FIXTURES
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::config(
                "fixture",
                format!(
                    "unknown stream fixture `{name}` (known: {})",
                    names().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;
    StreamSpec::from_toml_str(text, name)
}
