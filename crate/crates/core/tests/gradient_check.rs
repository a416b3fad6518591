mod common;

use common::{model_gradient_checks, uncovered_components, GRADCHECK_TOLERANCE};

fn check(d_model: usize, seed: u64) {
    let checks = model_gradient_checks(d_model, seed, 3);
    assert!(checks.len() > 100, "only {} entries checked", checks.len());
    let worst = checks
        .iter()
        .max_by(|a, b| a.relative_error().total_cmp(&b.relative_error()))
        .unwrap();
    assert!(
        worst.relative_error() <= GRADCHECK_TOLERANCE,
        "worst relative error {:.3e}: {worst:?}",
        worst.relative_error()
    );
    assert_eq!(uncovered_components(&checks), Vec::<&str>::new());
}

#[test]
fn joint_loss_gradients_d4() {
    for seed in [1, 2] {
        check(4, seed);
    }
}

#[test]
fn joint_loss_gradients_d8() {
    for seed in [3, 4] {
        check(8, seed);
    }
}
