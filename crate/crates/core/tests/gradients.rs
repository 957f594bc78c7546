mod common;

use common::{model_gradcheck, operator_suite};

#[test]
fn every_operator_matches_central_differences() {
    for (name, err) in operator_suite(0..20) {
        assert!(err <= 1e-6, "{name}: relative error {err:e}");
    }
}

#[test]
fn shrunken_model_matches_central_differences() {
    for seed in 0..4 {
        let err = model_gradcheck(seed);
        assert!(err <= 1e-5, "seed {seed}: relative error {err:e}");
    }
}
