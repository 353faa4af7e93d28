use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skelmax::geometry::{enumerate_faces, AxisBox, KFace};
use skelmax::grid::BoxUnionIndicator;
use skelmax::operators::{face_average, skeleton_maximal_at, Backend, OperatorConfig, TestFunction};
use skelmax::scaling::{
    critical_q, diagonal_exponent, norm_scan, predicted_exponent, skeleton_exponent, skeleton_extremizer,
    weak_type_scan, Candidate, ScanSettings,
};
use skelmax::selection::{brute_force_select, greedy_select, overlap_report, SkeletonFamily};

/// Boxes with corners on the `step` lattice inside `[lo, lo + span]^2`.
fn lattice_boxes(rng: &mut ChaCha8Rng, count: usize, lo: f64, span: usize, step: f64) -> Vec<AxisBox> {
    (0..count)
        .map(|_| {
            let a: Vec<usize> = (0..2).map(|_| rng.gen_range(0..span)).collect();
            let len: Vec<usize> = (0..2).map(|_| rng.gen_range(1..=span / 2)).collect();
            AxisBox::new(
                a.iter().map(|i| lo + *i as f64 * step).collect(),
                a.iter().zip(&len).map(|(i, l)| lo + (i + l) as f64 * step).collect(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn multiplicity_matches_fine_grid_count() {
    // all corners sit on the δ/8 lattice, so counting lattice cells is exact
    let delta = 0.25;
    let h = delta / 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for trial in 0..60 {
        let k = trial % 2;
        let faces: Vec<KFace> = (0..rng.gen_range(1..6))
            .map(|_| {
                let c = [rng.gen_range(0..4) as f64 * delta, rng.gen_range(0..4) as f64 * delta];
                let r = 1.0 + rng.gen_range(0..=4) as f64 * delta;
                let all = enumerate_faces(2, k, &c, r).unwrap();
                all[rng.gen_range(0..all.len())].clone()
            })
            .collect();
        let mut raw: Vec<AxisBox> = faces.iter().map(|f| f.neighborhood(delta)).collect();
        raw.extend(lattice_boxes(&mut rng, 4, -3.0, 56, 0.125));
        let e = BoxUnionIndicator::from_union(&raw).unwrap();
        let lambda = 0.3;
        let Ok(profile) = skelmax::selection::multiplicity_mu(&faces, delta, &e, lambda) else {
            continue;
        };
        checked += 1;

        let m = faces.len();
        let nbhds: Vec<AxisBox> = faces.iter().map(|f| f.neighborhood(delta)).collect();
        let mut levels = vec![vec![0.0; m + 1]; m];
        let mut level_measure = vec![0.0; m + 1];
        let cells = (8.0 / h) as i64;
        for iy in 0..cells {
            for ix in 0..cells {
                let x = [-4.0 + (ix as f64 + 0.5) * h, -4.0 + (iy as f64 + 0.5) * h];
                if !e.boxes().iter().any(|b| b.contains_point(&x)) {
                    continue;
                }
                let inside: Vec<usize> = (0..m).filter(|&j| nbhds[j].contains_point(&x)).collect();
                let v = inside.len();
                level_measure[v] += h * h;
                for j in inside {
                    levels[j][v] += h * h;
                }
                assert_eq!(profile.upsilon_at(&x), v);
            }
        }
        for v in 1..=m {
            assert_eq!(profile.level_measure(v), level_measure[v], "level {v}");
        }
        assert_eq!(profile.level_volumes, levels);
        let mu = (1..=m)
            .find(|&t| {
                let good = (0..m)
                    .filter(|&j| levels[j][..=t].iter().sum::<f64>() >= 0.5 * lambda * nbhds[j].volume())
                    .count();
                2 * good >= m
            })
            .unwrap();
        assert_eq!(profile.mu, mu);
    }
    assert!(checked >= 30, "only {checked} instances met the precondition");
}

#[test]
fn extremizer_face_average_monte_carlo() {
    let delta = 1.0 / 32.0;
    let f: TestFunction = skeleton_extremizer(2, 1, delta, &[0.5, 0.5]).unwrap().into();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for face in enumerate_faces(2, 1, &[0.5 + delta / 3.0, 0.5], 1.0 + 2.0 * delta).unwrap() {
        let exact = face_average(&face, delta, &f, Backend::Exact).unwrap();
        let nb = face.neighborhood(delta);
        let TestFunction::Boxes(e) = &f else { unreachable!() };
        let samples = 20_000;
        let hits = (0..samples)
            .filter(|_| {
                let x: Vec<f64> = nb.lo().iter().zip(nb.hi()).map(|(a, b)| rng.gen_range(*a..*b)).collect();
                e.contains_point(&x)
            })
            .count();
        let est = hits as f64 / samples as f64;
        let se = (est * (1.0 - est) / samples as f64).sqrt().max(1e-3);
        assert!((est - exact).abs() <= 4.0 * se, "exact {exact}, estimate {est}");
    }
}

/// Every face choice, scored by the largest group of faces sharing a
/// free-axis set and fixed-coordinate values.
fn exhaustive_best(family: &SkeletonFamily) -> usize {
    let options: Vec<Vec<KFace>> = (0..family.len()).map(|i| family.faces_of(i)).collect();
    let mut best = usize::MAX;
    let mut choice = vec![0usize; options.len()];
    loop {
        let mut groups: HashMap<(Vec<usize>, Vec<i64>), usize> = HashMap::new();
        for (i, &c) in choice.iter().enumerate() {
            let b = options[i][c].as_box();
            let free: Vec<usize> = options[i][c].free_axes().collect();
            let fixed: Vec<i64> = (0..family.n())
                .filter(|a| !free.contains(a))
                .map(|a| (b.lo()[a] * 1e6).round() as i64)
                .collect();
            *groups.entry((free, fixed)).or_default() += 1;
        }
        best = best.min(*groups.values().max().unwrap());
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best;
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn brute_force_is_optimal_and_greedy_never_better() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..40 {
        let (n, k) = [(2, 1), (2, 0), (3, 2), (3, 1)][trial % 4];
        let m = rng.gen_range(1..=if n == 3 { 4 } else { 6 });
        let members = (0..m)
            .map(|_| {
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64 * 0.25).collect();
                (c, 1.0 + rng.gen_range(0..=2) as f64 * 0.5)
            })
            .collect();
        let family = SkeletonFamily::new(n, k, members).unwrap();
        let brute = overlap_report(&brute_force_select(&family).unwrap()).max_coplanar;
        let greedy = overlap_report(&greedy_select(&family)).max_coplanar;
        assert_eq!(brute, exhaustive_best(&family), "trial {trial}");
        assert!(greedy >= brute);
    }
}

#[test]
fn weak_type_constants_are_stable() {
    let q = critical_q(2, 1);
    let mut constants = Vec::new();
    for j in 4..=8 {
        let delta = 2f64.powi(-j);
        let e = skeleton_extremizer(2, 1, delta, &[0.5, 0.5]).unwrap();
        let cfg = OperatorConfig::new(2, 1, delta).unwrap();
        let table = weak_type_scan(&e, &[0.1, 0.25, 0.5, 1.0], q, &cfg).unwrap();
        constants.push(table.max_constant);
    }
    let hi = constants.iter().copied().fold(0.0, f64::max);
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi / lo <= 4.0, "{constants:?}");
}

#[test]
fn diagonal_scan_stays_above_bound() {
    let settings = ScanSettings::new(2, 1, 2.0, 2.0);
    let deltas: Vec<f64> = (4..=7).map(|j| 2f64.powi(-j)).collect();
    let series = norm_scan(&deltas, &Candidate::ALL, &settings).unwrap();
    assert!(series.fit.slope >= -0.175, "slope {}", series.fit.slope);
}

proptest! {
    #[test]
    fn exponents_continuous_across_phase_boundary(p in 1.01f64..20.0, n in 1usize..8, k_frac in 0.0f64..1.0) {
        let k = ((n as f64) * k_frac) as usize;
        let qc = critical_q(n, k) * p;
        prop_assert!((diagonal_exponent(p, n, k) - skeleton_exponent(p, qc, n, k)).abs() < 1e-12);
        let below = predicted_exponent(p, qc * (1.0 - 1e-9), n, k).unwrap();
        let above = predicted_exponent(p, qc * (1.0 + 1e-9), n, k).unwrap();
        prop_assert!((below.exponent - above.exponent).abs() < 1e-6);
    }

    #[test]
    fn plane_key_ignores_motion_along_free_axes(
        ci in proptest::collection::vec(-8i32..8, 3),
        shift in -8i32..8,
        r in 1usize..4,
        k in 0usize..3,
    ) {
        let c: Vec<f64> = ci.iter().map(|v| *v as f64 * 0.125).collect();
        let faces = enumerate_faces(3, k, &c, r as f64 * 0.5).unwrap();
        for (idx, face) in faces.iter().enumerate() {
            for axis in face.free_axes().collect::<Vec<_>>() {
                let mut moved = c.clone();
                moved[axis] += shift as f64 * 0.125;
                let other = &enumerate_faces(3, k, &moved, r as f64 * 0.5).unwrap()[idx];
                prop_assert_eq!(face.plane_key(), other.plane_key());
            }
        }
    }

    #[test]
    fn maximal_value_commutes_with_lattice_shifts(
        seed in any::<u64>(),
        tx in -4i32..4,
        ty in -4i32..4,
        k in 0usize..2,
    ) {
        let delta = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes = lattice_boxes(&mut rng, 3, -2.0, 24, 0.125);
        let t = [tx as f64 * delta, ty as f64 * delta];
        let shifted: Vec<AxisBox> = boxes.iter().map(|b| b.translate(&t)).collect();
        let cfg = OperatorConfig::new(2, k, delta).unwrap();
        let f: TestFunction = BoxUnionIndicator::from_union(&boxes).unwrap().into();
        let g: TestFunction = BoxUnionIndicator::from_union(&shifted).unwrap().into();
        let x = [rng.gen_range(0..4) as f64 * delta + 0.125, rng.gen_range(0..4) as f64 * delta + 0.125];
        let y = [x[0] + t[0], x[1] + t[1]];
        let a = skeleton_maximal_at(&x, &cfg, &f).unwrap();
        let b = skeleton_maximal_at(&y, &cfg, &g).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }
}
