//! Inputs shared by the benchmarks.

use aifml_core::analytics::{synthetic, Dataset};
use aifml_core::raa::{RaaSession, Utterance};

/// The scaled synthetic roster, as used for one training epoch.
pub fn scaled_roster(records: usize) -> Dataset {
    let raw = synthetic::generate(&synthetic::SyntheticConfig {
        records,
        seed: 11,
        ..Default::default()
    });
    raw.scale_fit_transform().expect("synthetic data is not degenerate").0
}

/// A session that has already heard `n` utterances.
pub fn warm_session(n: usize) -> RaaSession {
    let cfg = Default::default();
    let mut s = RaaSession::new("s01");
    for i in 0..n {
        s.step(&cfg, utterance(i, (i % 10) as f64 / 10.0)).expect("score in range");
    }
    s
}

pub fn utterance(i: usize, score: f64) -> Utterance {
    Utterance {
        student_id: "s01".into(),
        sentence_id: format!("n{i:03}"),
        fuzzy_score: score,
        timestamp_ms: i as u64 * 1500,
    }
}
