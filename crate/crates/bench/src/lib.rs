//! Fixed inputs shared by the benchmarks.

use skelmax::geometry::AxisBox;
use skelmax::grid::BoxUnionIndicator;
use skelmax::operators::{OperatorConfig, TestFunction};
use skelmax::scaling::{skeleton_extremizer, unit_center, Candidate};
use skelmax::selection::{random_family, SkeletonFamily};

/// Extremizer for n=2, k=1 at the given `delta`, with its operator config.
pub fn extremizer_case(delta: f64) -> (OperatorConfig, TestFunction) {
    let cfg = OperatorConfig::new(2, 1, delta).expect("valid config");
    let f = skeleton_extremizer(2, 1, delta, &unit_center(2)).expect("extremizer").into();
    (cfg, f)
}

/// Seeded random boxes inside the support window.
pub fn random_boxes(delta: f64) -> TestFunction {
    Candidate::RandomBoxes
        .build(2, 1, delta, &unit_center(2), 3)
        .expect("random boxes")
}

/// A box union that fills the support window.
pub fn constant(n: usize) -> TestFunction {
    BoxUnionIndicator::new(vec![AxisBox::cube(-3.0, 7.0, n)]).expect("box").into()
}

pub fn family(m: usize) -> SkeletonFamily {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(m as u64);
    random_family(2, 1, m, skelmax::selection::growth_delta(m, 2), &mut rng).expect("family")
}
