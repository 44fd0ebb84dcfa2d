use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PromptError;
use crate::model::{ConditionKind, Label, LabeledExample, Variation};

/// Few-shot cell: (variation, condition slot, label).
pub type FewShotCell = (Variation, ConditionKind, Label);

/// The 16 cells in rendering order.
pub fn fewshot_cells() -> Vec<FewShotCell> {
    let mut cells = Vec::with_capacity(16);
    for v in Variation::KNOWN {
        for slot in [ConditionKind::Mature, ConditionKind::Demature] {
            for label in [Label::Valid, Label::Invalid] {
                cells.push((v, slot, label));
            }
        }
    }
    cells
}

pub fn cell_of(e: &LabeledExample) -> FewShotCell {
    (e.stakeholder.variation, e.stakeholder.action_slot, e.label)
}

/// Picks one example uniformly at random from each of the 16 cells.
pub fn select_fewshot_examples(pool: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>, PromptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(16);
    for cell in fewshot_cells() {
        let members: Vec<&LabeledExample> = pool.iter().filter(|e| cell_of(e) == cell).collect();
        if members.is_empty() {
            let (v, slot, label) = cell;
            return Err(PromptError::UncoveredCell(format!("({v}, {slot}, {label:?})")));
        }
        picked.push(members[rng.gen_range(0..members.len())].clone());
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SynthesisConfig};
    use std::collections::HashSet;

    fn pool() -> Vec<LabeledExample> {
        generate_synthetic_corpus(&SynthesisConfig { n_stakeholders: 120, ..Default::default() })
            .unwrap()
            .corpus
            .labeled_examples()
    }

    #[test]
    fn one_per_cell() {
        let picked = select_fewshot_examples(&pool(), 3).unwrap();
        assert_eq!(picked.len(), 16);
        let cells: HashSet<_> = picked.iter().map(cell_of).collect();
        assert_eq!(cells.len(), 16);
        assert_eq!(picked.iter().map(cell_of).collect::<Vec<_>>(), fewshot_cells());
    }

    #[test]
    fn deterministic_for_seed() {
        let p = pool();
        let ids = |s| select_fewshot_examples(&p, s).unwrap().into_iter().map(|e| e.example_id).collect::<Vec<_>>();
        assert_eq!(ids(11), ids(11));
        assert_ne!(ids(11), ids(12));
    }

    #[test]
    fn missing_cell_is_named() {
        let p: Vec<_> = pool()
            .into_iter()
            .filter(|e| cell_of(e) != (Variation::V4, ConditionKind::Demature, Label::Invalid))
            .collect();
        let err = select_fewshot_examples(&p, 1).unwrap_err();
        assert_eq!(err.to_string(), "no labeled example for few-shot cell (V4, Demature, Invalid)");
    }
}
