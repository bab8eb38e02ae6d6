//! The built-in set of small graphs run through the identity suite.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::GhostGraph;

/// A named site set, instantiated at every `(a, h)` of the suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub sites: Vec<(i64, i64)>,
}

impl CorpusEntry {
    pub fn new(name: &str, sites: &[(i64, i64)]) -> Self {
        CorpusEntry {
            name: name.to_string(),
            sites: sites.to_vec(),
        }
    }

    pub fn build(&self, spacing: f64, field: f64) -> Result<GhostGraph> {
        GhostGraph::from_sites(spacing, field, &self.sites)
    }
}

/// Spacings and fields the suite runs every corpus graph at.
pub const CORPUS_SPACINGS: [f64; 2] = [1.0, 0.5];
pub const CORPUS_FIELDS: [f64; 3] = [0.0, 0.1, 0.7];

/// Connected site sets with at most 10 internal edges.
pub fn default_corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry::new("1x2", &[(0, 0), (1, 0)]),
        CorpusEntry::new("1x3", &[(0, 0), (1, 0), (2, 0)]),
        CorpusEntry::new("2x2", &[(0, 0), (1, 0), (0, 1), (1, 1)]),
        CorpusEntry::new("2x3", &[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]),
        CorpusEntry::new("L3", &[(0, 0), (1, 0), (0, 1)]),
        CorpusEntry::new("L5", &[(0, 0), (1, 0), (2, 0), (0, 1), (0, 2)]),
        CorpusEntry::new("T4", &[(0, 0), (1, 0), (2, 0), (1, 1)]),
        CorpusEntry::new("plus5", &[(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)]),
        CorpusEntry::new(
            "2x3+1",
            &[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (3, 1)],
        ),
        CorpusEntry::new(
            "3x3-corner",
            &[
                (0, 0),
                (1, 0),
                (2, 0),
                (0, 1),
                (1, 1),
                (2, 1),
                (0, 2),
                (1, 2),
            ],
        ),
    ]
}
