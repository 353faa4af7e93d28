//! Choosing one face per skeleton so that few chosen faces share an affine
//! coordinate k-plane, and the multiplicity counting built on such choices.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, enumerate_faces, face_count, AxisBox, KFace, PlaneKey};
use crate::grid::{BoxUnionIndicator, Grid};
use crate::operators::{default_radii, RadiusFunction};
use crate::stats::{fit_loglog, LogLogFit};

/// Largest search space `faces^m` the exhaustive selector accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// `1 - (n-k)(2n-1) / (2n^2)`, the growth exponent of the coplanar overlap.
pub fn overlap_exponent(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    1.0 - (n - k) * (2.0 * n - 1.0) / (2.0 * n * n)
}

/// Skeletons `S_k(x_i, r_i)`, `i = 1..m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFamily {
    n: usize,
    k: usize,
    members: Vec<(Vec<f64>, f64)>,
}

impl SkeletonFamily {
    pub fn new(n: usize, k: usize, members: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        check_dims(n, k)?;
        if members.is_empty() {
            return Err(Error::Invalid("a skeleton family needs at least one member".into()));
        }
        for (i, (c, r)) in members.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Domain(format!(
                    "skeleton {i} has a center of dimension {}, expected {n}",
                    c.len()
                )));
            }
            if !(*r >= 1.0 - 1e-9 && *r <= 2.0 + 1e-9) {
                return Err(Error::Domain(format!("skeleton {i} has radius {r} outside [1, 2]")));
            }
        }
        Ok(Self { n, k, members })
    }

    /// One skeleton per cell center, with the radius prescribed by `rho`.
    pub fn from_radius_function(rho: &RadiusFunction, n: usize, k: usize) -> Result<Self> {
        let grid = rho.grid();
        if grid.dim() != n {
            return Err(Error::Config(format!(
                "radius function lives in dimension {}, expected {n}",
                grid.dim()
            )));
        }
        let members = (0..grid.len())
            .map(|i| (grid.center_of(i), rho.values()[i]))
            .collect();
        Self::new(n, k, members)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[(Vec<f64>, f64)] {
        &self.members
    }

    pub fn faces_of(&self, i: usize) -> Vec<KFace> {
        let (c, r) = &self.members[i];
        enumerate_faces(self.n, self.k, c, *r).expect("family members are validated")
    }
}

/// One chosen face index per skeleton of a family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceSelection {
    family: SkeletonFamily,
    chosen: Vec<usize>,
}

impl FaceSelection {
    pub fn new(family: SkeletonFamily, chosen: Vec<usize>) -> Result<Self> {
        if chosen.len() != family.len() {
            return Err(Error::Invalid(format!(
                "{} choices for {} skeletons",
                chosen.len(),
                family.len()
            )));
        }
        let per = face_count(family.n, family.k);
        if let Some(bad) = chosen.iter().find(|c| **c >= per) {
            return Err(Error::Invalid(format!("face index {bad} out of range (< {per})")));
        }
        Ok(Self { family, chosen })
    }

    pub fn family(&self) -> &SkeletonFamily {
        &self.family
    }

    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn chosen_face(&self, i: usize) -> Result<KFace> {
        if i >= self.chosen.len() {
            return Err(Error::Invalid(format!("no skeleton with index {i}")));
        }
        Ok(self.family.faces_of(i).swap_remove(self.chosen[i]))
    }

    pub fn faces(&self) -> Vec<KFace> {
        (0..self.chosen.len())
            .map(|i| self.family.faces_of(i).swap_remove(self.chosen[i]))
            .collect()
    }
}

/// Processes skeletons in order; each takes the face whose plane currently
/// holds the fewest chosen faces, ties broken by the smaller plane key and
/// then the lower face index.
pub fn greedy_select(family: &SkeletonFamily) -> FaceSelection {
    let mut load: HashMap<PlaneKey, usize> = HashMap::new();
    let mut chosen = Vec::with_capacity(family.len());
    for i in 0..family.len() {
        let faces = family.faces_of(i);
        let (idx, key) = faces
            .iter()
            .enumerate()
            .map(|(j, f)| (j, f.plane_key()))
            .min_by(|(ja, ka), (jb, kb)| {
                let la = load.get(ka).copied().unwrap_or(0);
                let lb = load.get(kb).copied().unwrap_or(0);
                la.cmp(&lb).then_with(|| ka.cmp(kb)).then_with(|| ja.cmp(jb))
            })
            .expect("every skeleton has at least one face");
        *load.entry(key).or_insert(0) += 1;
        chosen.push(idx);
    }
    FaceSelection {
        family: family.clone(),
        chosen,
    }
}

/// Exhaustive search for a selection minimizing the largest coplanar group.
pub fn brute_force_select(family: &SkeletonFamily) -> Result<FaceSelection> {
    let per = face_count(family.n, family.k);
    let space = (per as u128).checked_pow(family.len() as u32);
    if space.is_none_or(|s| s > BRUTE_FORCE_LIMIT) {
        return Err(Error::Size(format!(
            "{per}^{} selections exceed the exhaustive-search limit of {BRUTE_FORCE_LIMIT}",
            family.len()
        )));
    }

    // intern plane keys so the search works on small integers
    let mut ids: HashMap<PlaneKey, usize> = HashMap::new();
    let options: Vec<Vec<usize>> = (0..family.len())
        .map(|i| {
            family
                .faces_of(i)
                .iter()
                .map(|f| {
                    let next = ids.len();
                    *ids.entry(f.plane_key()).or_insert(next)
                })
                .collect()
        })
        .collect();

    struct Search<'a> {
        options: &'a [Vec<usize>],
        counts: Vec<usize>,
        current: Vec<usize>,
        best: usize,
        best_sel: Vec<usize>,
    }

    impl Search<'_> {
        fn run(&mut self, depth: usize, cur_max: usize) {
            if cur_max >= self.best {
                return;
            }
            if depth == self.options.len() {
                self.best = cur_max;
                self.best_sel = self.current.clone();
                return;
            }
            for (j, &plane) in self.options[depth].iter().enumerate() {
                self.counts[plane] += 1;
                self.current.push(j);
                let m = cur_max.max(self.counts[plane]);
                self.run(depth + 1, m);
                self.current.pop();
                self.counts[plane] -= 1;
            }
        }
    }

    let mut search = Search {
        options: &options,
        counts: vec![0; ids.len()],
        current: Vec::with_capacity(family.len()),
        best: usize::MAX,
        best_sel: Vec::new(),
    };
    search.run(0, 0);
    FaceSelection::new(family.clone(), search.best_sel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Largest number of chosen faces in one affine coordinate k-plane.
    pub max_coplanar: usize,
    pub m: usize,
    pub bound_exponent: f64,
    /// Number of distinct planes holding at least one chosen face.
    pub planes: usize,
}

pub fn overlap_report(sel: &FaceSelection) -> OverlapReport {
    let mut groups: HashMap<PlaneKey, usize> = HashMap::new();
    for face in sel.faces() {
        *groups.entry(face.plane_key()).or_insert(0) += 1;
    }
    OverlapReport {
        max_coplanar: groups.values().copied().max().unwrap_or(0),
        m: sel.chosen.len(),
        bound_exponent: overlap_exponent(sel.family.n, sel.family.k),
        planes: groups.len(),
    }
}

/// Multiplicity data of a family of face neighborhoods against a set `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityProfile {
    /// Face neighborhoods `ℓ^j`.
    pub faces: Vec<AxisBox>,
    pub e: BoxUnionIndicator,
    pub lambda: f64,
    pub delta: f64,
    pub tau: usize,
    /// Cells of the box arrangement where the multiplicity is positive,
    /// with that multiplicity.
    pub upsilon: Vec<(AxisBox, usize)>,
    /// `level_volumes[j][v]` is `|{x ∈ ℓ^j ∩ E : Υ(x) = v}|`.
    pub level_volumes: Vec<Vec<f64>>,
    pub mu: usize,
    /// `μ |E|`.
    pub mass_lhs: f64,
    /// `(λ/2) m δ^τ`.
    pub mass_rhs: f64,
}

impl MultiplicityProfile {
    pub fn m(&self) -> usize {
        self.faces.len()
    }

    /// `Υ(x) = #{j : x ∈ ℓ^j ∩ E}`.
    pub fn upsilon_at(&self, x: &[f64]) -> usize {
        if !self.e.contains_point(x) {
            return 0;
        }
        self.faces.iter().filter(|f| f.contains_point(x)).count()
    }

    pub fn max_upsilon(&self) -> usize {
        self.upsilon.iter().map(|(_, v)| *v).max().unwrap_or(0)
    }

    /// `|{x : Υ(x) = v}|` for `v >= 1`.
    pub fn level_measure(&self, v: usize) -> f64 {
        self.upsilon
            .iter()
            .filter(|(_, u)| *u == v)
            .map(|(b, _)| b.volume())
            .sum()
    }

    /// Whether `μ |E| >= (λ/2) m δ^τ`.
    pub fn satisfies_mass_bound(&self) -> bool {
        self.mass_lhs >= self.mass_rhs
    }
}

/// Computes the multiplicity function of the width-`delta` neighborhoods of
/// `faces` restricted to `E`, and the threshold `μ`: the least integer such
/// that at least half of the faces have `|{x ∈ ℓ^j ∩ E : Υ(x) <= μ}| >=
/// (λ/2)|ℓ^j|`.
///
/// Every face must satisfy `|ℓ^j ∩ E| > λ |ℓ^j|`.
pub fn multiplicity_mu(
    faces: &[KFace],
    delta: f64,
    e: &BoxUnionIndicator,
    lambda: f64,
) -> Result<MultiplicityProfile> {
    let Some(first) = faces.first() else {
        return Err(Error::Invalid("multiplicity needs at least one face".into()));
    };
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Invalid(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("delta must be positive, got {delta}")));
    }
    let n = first.n();
    let k = first.k();
    if faces.iter().any(|f| f.n() != n || f.k() != k) || e.dim().is_some_and(|d| d != n) {
        return Err(Error::Invalid("faces and E must share one (n, k)".into()));
    }
    let nbhds: Vec<AxisBox> = faces.iter().map(|f| f.neighborhood(delta)).collect();
    for (j, nb) in nbhds.iter().enumerate() {
        let hit = e.integral_over(nb);
        if !(hit > lambda * nb.volume()) {
            return Err(Error::Precondition(format!(
                "face {j}: |ℓ ∩ E| = {hit} does not exceed λ|ℓ| = {}",
                lambda * nb.volume()
            )));
        }
    }

    let m = nbhds.len();
    let mut breaks: Vec<Vec<f64>> = vec![Vec::new(); n];
    for b in nbhds.iter().chain(e.boxes()) {
        for axis in 0..n {
            breaks[axis].push(b.lo()[axis]);
            breaks[axis].push(b.hi()[axis]);
        }
    }
    // only the hull of the neighborhoods matters
    let hull = nbhds[1..].iter().fold(nbhds[0].clone(), |acc, b| acc.hull(b));
    for (axis, v) in breaks.iter_mut().enumerate() {
        v.retain(|x| *x >= hull.lo()[axis] && *x <= hull.hi()[axis]);
        v.sort_by(f64::total_cmp);
        v.dedup();
    }

    let mut upsilon = Vec::new();
    let mut level_volumes = vec![vec![0.0; m + 1]; m];
    let shape: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
    let total: usize = shape.iter().product();
    let mut mid = vec![0.0; n];
    let mut members = Vec::with_capacity(m);
    for flat in 0..total {
        let mut rest = flat;
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for axis in 0..n {
            let i = rest % shape[axis];
            rest /= shape[axis];
            lo.push(breaks[axis][i]);
            hi.push(breaks[axis][i + 1]);
            mid[axis] = 0.5 * (breaks[axis][i] + breaks[axis][i + 1]);
        }
        if !e.contains_point(&mid) {
            continue;
        }
        members.clear();
        members.extend((0..m).filter(|&j| nbhds[j].contains_point(&mid)));
        if members.is_empty() {
            continue;
        }
        let cell = AxisBox::new(lo, hi)?;
        let vol = cell.volume();
        let v = members.len();
        for &j in &members {
            level_volumes[j][v] += vol;
        }
        upsilon.push((cell, v));
    }

    let mut mu = m;
    for candidate in 1..=m {
        let good = (0..m)
            .filter(|&j| {
                let below: f64 = level_volumes[j][..=candidate].iter().sum();
                below >= 0.5 * lambda * nbhds[j].volume()
            })
            .count();
        if 2 * good >= m {
            mu = candidate;
            break;
        }
    }

    let tau = n - k;
    Ok(MultiplicityProfile {
        mass_lhs: mu as f64 * e.measure(),
        mass_rhs: 0.5 * lambda * m as f64 * delta.powi(tau as i32),
        faces: nbhds,
        e: e.clone(),
        lambda,
        delta,
        tau,
        upsilon,
        level_volumes,
        mu,
    })
}

/// Grid spacing used for families of size `m`: the dyadic `δ` with
/// `δ^-n >= m`.
pub fn growth_delta(m: usize, n: usize) -> f64 {
    let bits = (m.max(1) as f64).log2() / n as f64;
    2f64.powi(-(bits.ceil() as i32).max(1))
}

/// Deterministic per-trial seed.
pub fn trial_seed(base: u64, m: usize, trial: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = base
        .wrapping_add((m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((trial as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random family of `m` skeletons: centers drawn from the cell centers of
/// the unit grid of spacing `delta`, radii from `[1,2] ∩ δℤ`.
pub fn random_family<R: Rng>(n: usize, k: usize, m: usize, delta: f64, rng: &mut R) -> Result<SkeletonFamily> {
    let grid = Grid::unit(n, delta)?;
    let radii = default_radii(delta);
    let members = (0..m)
        .map(|_| {
            let c = grid.center_of(rng.gen_range(0..grid.len()));
            (c, radii[rng.gen_range(0..radii.len())])
        })
        .collect();
    SkeletonFamily::new(n, k, members)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub m: usize,
    pub trial: usize,
    pub max_coplanar: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub n: usize,
    pub k: usize,
    pub predicted_exponent: f64,
    /// `(m, mean max_coplanar)` per family size.
    pub means: Vec<(usize, f64)>,
    pub fit: Option<LogLogFit>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthExperiment {
    pub rows: Vec<GrowthRow>,
    pub summary: GrowthSummary,
}

/// Runs the greedy selector on seeded random families and fits the growth
/// of the mean largest coplanar group against `m`.
pub fn coplanar_growth_experiment(
    n: usize,
    k: usize,
    m_list: &[usize],
    trials: usize,
    rng_seed: u64,
) -> Result<GrowthExperiment> {
    check_dims(n, k)?;
    if m_list.contains(&0) {
        return Err(Error::Invalid("family sizes must be positive".into()));
    }
    let tasks: Vec<(usize, usize)> = m_list
        .iter()
        .flat_map(|&m| (0..trials).map(move |t| (m, t)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(m, trial)| {
            let seed = trial_seed(rng_seed, m, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let family = random_family(n, k, m, growth_delta(m, n), &mut rng)?;
            let report = overlap_report(&greedy_select(&family));
            Ok(GrowthRow {
                m,
                trial,
                max_coplanar: report.max_coplanar,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let means: Vec<(usize, f64)> = m_list
        .iter()
        .map(|&m| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.m == m)
                .map(|r| r.max_coplanar as f64)
                .collect();
            (m, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
        })
        .collect();
    let fit = if trials > 0 && means.len() >= 3 {
        let xs: Vec<f64> = means.iter().map(|(m, _)| *m as f64).collect();
        let ys: Vec<f64> = means.iter().map(|(_, v)| *v).collect();
        fit_loglog(&xs, &ys).ok()
    } else {
        None
    };
    Ok(GrowthExperiment {
        rows,
        summary: GrowthSummary {
            n,
            k,
            predicted_exponent: overlap_exponent(n, k),
            means,
            fit,
        },
    })
}
