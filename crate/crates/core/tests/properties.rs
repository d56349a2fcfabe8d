//! Property suites over random candidate sets and beliefs.

mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn belief_stays_normalized_after_every_operation(input in normalization_input()) {
        belief_stays_normalized(input)?;
    }

    #[test]
    fn entropy_lies_between_zero_and_log_support(b in arb_belief(true)) {
        entropy_is_bounded(b)?;
    }

    #[test]
    fn partition_ask_eig_lies_between_zero_and_entropy(b in arb_belief(false)) {
        partition_ask_eig_is_bounded(b)?;
    }

    #[test]
    fn pruning_never_adds_candidates(input in answer_sequence()) {
        pruning_only_removes(input)?;
    }

    #[test]
    fn exact_answers_never_prune_the_target(input in answer_sequence()) {
        exact_answers_keep_target(input)?;
    }

    #[test]
    fn search_spends_exactly_its_budget(input in search_input()) {
        search_spends_its_budget(input)?;
    }

    #[test]
    fn candidate_pool_keeps_the_target(input in pool_input()) {
        pool_keeps_target(input)?;
    }
}
