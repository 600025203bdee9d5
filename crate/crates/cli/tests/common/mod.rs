#![allow(dead_code)]

use std::path::Path;

use ppipe_core::rng::rng_from_seed;
use ppipe_core::{write_corpus, AuthorProfile, CorpusSchema, EssayRecord, ScoreVector};
use rand::prelude::IndexedRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "sad",
    "news",
    "story",
    "people",
    "feel",
    "sorry",
    "families",
    "hurt",
    "hope",
    "help",
    "donate",
    "terrible",
    "flood",
    "fire",
    "children",
    "lost",
    "homes",
    "government",
    "should",
    "act",
    "really",
    "upset",
    "angry",
    "understand",
    "difficult",
    "situation",
    "imagine",
    "living",
    "like",
    "that",
    "world",
    "unfair",
    "support",
    "community",
    "together",
    "rebuild",
    "volunteer",
    "heart",
    "breaks",
    "reading",
];

/// `n` labeled records with random essays, profiles and gold scores.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<EssayRecord> {
    let mut rng = rng_from_seed(seed);
    (1..=n)
        .map(|i| {
            let len = rng.random_range(8..=24);
            let mut essay = String::new();
            for w in 0..len {
                if w > 0 {
                    essay.push(' ');
                }
                essay.push_str(WORDS.choose(&mut rng).unwrap());
                if rng.random_bool(0.1) {
                    essay.push('.');
                }
            }
            let gender = ["female", "male"].choose(&mut rng).unwrap();
            let profile = AuthorProfile::new(
                *gender,
                rng.random_range(1..=7),
                rng.random_range(1..=6),
                rng.random_range(18..=70),
                rng.random_range(10..=200) * 1000,
            )
            .unwrap();
            let gold = ScoreVector::from_fn(|j| {
                let hi = if j < 5 { 7.0 } else { 5.0 };
                (rng.random_range(1.0..hi) * 100.0_f64).round() / 100.0
            });
            EssayRecord {
                id: format!("e{i}"),
                essay,
                profile,
                gold: Some(gold),
                origin: None,
            }
        })
        .collect()
}

pub fn write_synthetic(path: &Path, n: usize, seed: u64) -> Vec<EssayRecord> {
    let records = synthetic_corpus(n, seed);
    write_corpus(&records, &CorpusSchema::default(), path).unwrap();
    records
}
