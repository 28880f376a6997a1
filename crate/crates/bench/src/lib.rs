//! Shared inputs for the benchmarks.

use calvalid::{gen_sets, CorrespondenceRecord, SimConfig, SimSet};

/// The nearest (densest) view of the default simulation.
pub fn near_set() -> SimSet {
    let cfg = SimConfig {
        n_sets: 56,
        ..SimConfig::default()
    };
    gen_sets(&cfg).expect("default config is valid").pop().expect("56 sets")
}

pub fn records(set: &SimSet) -> Vec<CorrespondenceRecord> {
    set.corrs
        .iter()
        .zip(&set.scales)
        .map(|(c, s)| CorrespondenceRecord {
            corr: *c,
            scales: Some(*s),
        })
        .collect()
}
