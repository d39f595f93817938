//! Metric invariants under offsets, gains, permutations and flips.

use domainscope_testkit::invariants;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intensity_offset(seed: u64) {
        invariants::intensity_offset(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn gain_scaling(seed: u64) {
        invariants::gain_scaling(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn pixel_permutation(seed: u64) {
        invariants::pixel_permutation(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn depth_offset(seed: u64) {
        invariants::depth_offset(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn flip_symmetry(seed: u64) {
        invariants::flip_symmetry(seed).map_err(TestCaseError::fail)?;
    }
}
