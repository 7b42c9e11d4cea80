//! Training-partition sampling: uniform low-resource subsets and
//! imbalance-controlled subsets that hit a target entity-token percentage.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Sentence};
use crate::{Error, Result};

/// Default slack around the entity-percentage target, in percentage points.
pub const DEFAULT_TOLERANCE_PP: f64 = 0.5;

/// What to draw: how many sentences, under which seed, and optionally a
/// target percentage of entity tokens for the subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub size: usize,
    pub entity_pct: Option<f64>,
    pub seed: u64,
    /// Acceptable deviation from `entity_pct`, in percentage points.
    pub tolerance_pp: f64,
}

impl SampleSpec {
    /// A plain uniform draw of `size` sentences.
    pub fn uniform(size: usize, seed: u64) -> Self {
        SampleSpec { size, entity_pct: None, seed, tolerance_pp: DEFAULT_TOLERANCE_PP }
    }

    /// A draw of `size` sentences targeting `entity_pct` percent entity tokens.
    pub fn imbalanced(size: usize, entity_pct: f64, seed: u64) -> Self {
        SampleSpec { size, entity_pct: Some(entity_pct), seed, tolerance_pp: DEFAULT_TOLERANCE_PP }
    }

    fn validate(&self, corpus: &Corpus) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Invalid("sample size must be at least 1".into()));
        }
        if self.size > corpus.sentences.len() {
            return Err(Error::Invalid(format!(
                "sample size {} exceeds corpus size {}",
                self.size,
                corpus.sentences.len()
            )));
        }
        if let Some(pct) = self.entity_pct {
            if !pct.is_finite() || pct <= 0.0 || pct >= 100.0 {
                return Err(Error::Invalid(format!(
                    "entity percentage must lie strictly between 0 and 100, got {pct}"
                )));
            }
            if !self.tolerance_pp.is_finite() || self.tolerance_pp < 0.0 {
                return Err(Error::Invalid(format!(
                    "tolerance must be a non-negative number of percentage points, got {}",
                    self.tolerance_pp
                )));
            }
        }
        Ok(())
    }
}

/// Percentage of tokens in `corpus` labeled with anything other than `"O"`.
pub fn entity_token_pct(corpus: &Corpus) -> f64 {
    let tokens: usize = corpus.sentences.iter().map(Sentence::len).sum();
    let entity: usize = corpus.sentences.iter().map(Sentence::entity_token_count).sum();
    if tokens == 0 {
        return 0.0;
    }
    100.0 * entity as f64 / tokens as f64
}

/// Draw a uniformly random subset of `spec.size` distinct sentences.
///
/// The subset keeps the source order of the surviving sentences, so equal
/// seeds give byte-identical corpora.
pub fn sample_partition(corpus: &Corpus, spec: &SampleSpec) -> Result<Corpus> {
    spec.validate(corpus)?;
    if spec.entity_pct.is_some() {
        return Err(Error::Invalid(
            "sample_partition takes no entity percentage target; use sample_imbalanced".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = sample_indices(&mut rng, corpus.sentences.len(), spec.size).into_vec();
    picked.sort_unstable();
    Ok(subset(corpus, &picked, format!("{}-s{}", corpus.name, spec.size)))
}

/// Draw `spec.size` sentences whose entity-token percentage lands within
/// `tolerance_pp` of `spec.entity_pct`.
///
/// Candidates are shuffled under the seed, then picked greedily: each pick
/// minimizes the distance between the running percentage and the target
/// (ties resolve to the earliest candidate in shuffled order, i.e. at
/// random). Up to `10 * size` swap improvements follow. If the subset is
/// still off-target the draw fails, reporting the best percentage reached.
pub fn sample_imbalanced(corpus: &Corpus, spec: &SampleSpec) -> Result<Corpus> {
    spec.validate(corpus)?;
    let target = spec.entity_pct.ok_or_else(|| {
        Error::Invalid("sample_imbalanced needs an entity percentage target".into())
    })?;

    let profiles: Vec<(f64, f64)> = corpus
        .sentences
        .iter()
        .map(|s| (s.len() as f64, s.entity_token_count() as f64))
        .collect();
    let has_all_o = profiles.iter().any(|&(_, e)| e == 0.0);
    let has_entity = profiles.iter().any(|&(_, e)| e > 0.0);
    if !has_all_o || !has_entity {
        return Err(Error::Invalid(
            "imbalance sampling needs both all-O and entity-bearing sentences in the source"
                .into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..corpus.sentences.len()).collect();
    order.shuffle(&mut rng);

    let mut chosen: Vec<usize> = Vec::with_capacity(spec.size);
    let mut in_chosen = vec![false; corpus.sentences.len()];
    let (mut tok, mut ent) = (0.0_f64, 0.0_f64);
    for _ in 0..spec.size {
        let mut best: Option<(f64, usize)> = None;
        for &cand in &order {
            if in_chosen[cand] {
                continue;
            }
            let (t, e) = profiles[cand];
            let dist = (100.0 * (ent + e) / (tok + t) - target).abs();
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, cand));
            }
        }
        let (_, pick) = best.expect("size is validated against the corpus size");
        in_chosen[pick] = true;
        chosen.push(pick);
        tok += profiles[pick].0;
        ent += profiles[pick].1;
    }

    for _ in 0..10 * spec.size {
        if (100.0 * ent / tok - target).abs() <= spec.tolerance_pp {
            break;
        }
        let slot = rng.random_range(0..chosen.len());
        let (t_out, e_out) = profiles[chosen[slot]];
        let base = (100.0 * ent / tok - target).abs();
        let mut best: Option<(f64, usize)> = None;
        for &cand in &order {
            if in_chosen[cand] {
                continue;
            }
            let (t, e) = profiles[cand];
            let dist = (100.0 * (ent - e_out + e) / (tok - t_out + t) - target).abs();
            if dist < base && best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, cand));
            }
        }
        if let Some((_, cand)) = best {
            in_chosen[chosen[slot]] = false;
            in_chosen[cand] = true;
            tok += profiles[cand].0 - t_out;
            ent += profiles[cand].1 - e_out;
            chosen[slot] = cand;
        }
    }

    let achieved = 100.0 * ent / tok;
    if (achieved - target).abs() > spec.tolerance_pp {
        return Err(Error::Infeasible { target, best: achieved });
    }
    chosen.sort_unstable();
    Ok(subset(corpus, &chosen, format!("{}-s{}-p{}", corpus.name, spec.size, target)))
}

fn subset(corpus: &Corpus, indices: &[usize], name: String) -> Corpus {
    Corpus {
        name,
        sentences: indices.iter().map(|&i| corpus.sentences[i].clone()).collect(),
    }
}
