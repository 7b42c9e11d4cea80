//! Synthetic species-mention corpora: ~96% "O" tokens, one entity type,
//! mentions shaped like "Gen07 sp13x sp02x" — a capitalized single-token
//! head followed by lowercase continuation tokens from their own vocabulary.

use ovaner_core::corpus::{Corpus, Sentence};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const LABEL: &str = "SPC";

pub struct GenConfig {
    pub sentences: usize,
    /// Probability a sentence mentions any entity at all.
    pub entity_sentence_prob: f64,
    /// Probability of each further mention after the first (at most 3 total).
    pub extra_entity_prob: f64,
    /// Realistic capitalization noise: sentence-initial filler is
    /// capitalized and a few filler tokens are all-caps acronyms, so
    /// capitalization alone no longer identifies mention heads.
    pub noisy_caps: bool,
    pub seed: u64,
}

/// Mean sentence length 25 filler tokens plus mentions averaging 2.3 tokens;
/// at `entity_sentence_prob` 0.45 and no extra mentions the token-label mass
/// lands near B/I/O = 1.7/2.3/96.
pub fn synth_corpus(name: &str, cfg: &GenConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let filler: Vec<String> = (0..200).map(|i| format!("w{i:03}")).collect();
    let heads: Vec<String> = (0..40).map(|i| format!("Gen{i:02}")).collect();
    let tails: Vec<String> = (0..40).map(|i| format!("sp{i:02}x")).collect();

    let mut sentences = Vec::with_capacity(cfg.sentences);
    for _ in 0..cfg.sentences {
        let mut tokens: Vec<String> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        let len = rng.random_range(15..=35);
        for _ in 0..len {
            let mut word = filler.choose(&mut rng).unwrap().clone();
            if cfg.noisy_caps && rng.random_bool(0.03) {
                word = word.to_uppercase();
            }
            tokens.push(word);
            labels.push("O".into());
        }
        if rng.random_bool(cfg.entity_sentence_prob) {
            let mut mentions = 1;
            while mentions < 3 && rng.random_bool(cfg.extra_entity_prob) {
                mentions += 1;
            }
            for _ in 0..mentions {
                let ent_len = match rng.random_range(0.0..1.0) {
                    x if x < 0.2 => 1,
                    x if x < 0.6 => 2,
                    x if x < 0.9 => 3,
                    _ => 4,
                };
                let at = rng.random_range(0..=tokens.len());
                let mut ent_tokens = vec![heads.choose(&mut rng).unwrap().clone()];
                let mut ent_labels = vec![format!("B-{LABEL}")];
                for _ in 1..ent_len {
                    ent_tokens.push(tails.choose(&mut rng).unwrap().clone());
                    ent_labels.push(format!("I-{LABEL}"));
                }
                tokens.splice(at..at, ent_tokens);
                labels.splice(at..at, ent_labels);
            }
        }
        if cfg.noisy_caps && labels[0] == "O" {
            let mut chars = tokens[0].chars();
            let first = chars.next().expect("tokens are nonempty");
            tokens[0] = first.to_uppercase().collect::<String>() + chars.as_str();
        }
        sentences.push(Sentence::new(tokens, labels).expect("generated tags are valid"));
    }
    Corpus {
        name: name.into(),
        sentences,
    }
}
