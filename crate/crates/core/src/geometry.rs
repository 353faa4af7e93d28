//! Axis-aligned geometry: boxes, faces of cube skeletons and their
//! sup-norm neighborhoods.
//!
//! Every neighborhood produced here is itself an [`AxisBox`], so averages of
//! box-union indicators over face neighborhoods reduce to sums of exact
//! intersection volumes.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing plane offsets.
pub const COPLANAR_TOL: f64 = 1e-9;

/// Closed axis-aligned box `[lo_0, hi_0] x ... x [lo_{n-1}, hi_{n-1}]`.
///
/// Degenerate boxes (some `lo[i] == hi[i]`) are allowed and have zero volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Invalid(format!(
                "box corners have different dimensions ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        if lo.is_empty() {
            return Err(Error::Invalid("box must have dimension >= 1".into()));
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Invalid(format!("non-finite corner on axis {i}")));
            }
            if a > b {
                return Err(Error::Invalid(format!(
                    "box has lo > hi on axis {i} ({a} > {b})"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, lo + side)^n`.
    pub fn cube(lo: f64, side: f64, n: usize) -> Self {
        assert!(side >= 0.0, "negative side length");
        Self {
            lo: vec![lo; n],
            hi: vec![lo + side; n],
        }
    }

    /// The cube with the given center and side length.
    pub fn centered_cube(center: &[f64], side: f64) -> Self {
        assert!(side >= 0.0, "negative side length");
        let h = side / 2.0;
        Self {
            lo: center.iter().map(|c| c - h).collect(),
            hi: center.iter().map(|c| c + h).collect(),
        }
    }

    /// `[0, 1)^n`.
    pub fn unit_cube(n: usize) -> Self {
        Self::cube(0.0, 1.0, n)
    }

    /// The cube of side `scale` sharing its center with the unit cube.
    pub fn scaled_unit_cube(n: usize, scale: f64) -> Self {
        Self::centered_cube(&vec![0.5; n], scale)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Half-open membership `lo <= x < hi`, used for grid cells.
    pub fn contains_point_half_open(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v < *b)
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Whether the interiors overlap (positive-volume intersection).
    pub fn overlaps(&self, other: &AxisBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lo[i].max(other.lo[i]) < self.hi[i].min(other.hi[i]))
    }

    pub fn intersection(&self, other: &AxisBox) -> Option<AxisBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let a = self.lo[i].max(other.lo[i]);
            let b = self.hi[i].min(other.hi[i]);
            if a > b {
                return None;
            }
            lo.push(a);
            hi.push(b);
        }
        Some(AxisBox { lo, hi })
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &AxisBox) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Grow every side by `d` (sup-norm `d`-neighborhood).
    pub fn inflate(&self, d: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|v| v - d).collect(),
            hi: self.hi.iter().map(|v| v + d).collect(),
        }
    }

    pub fn translate(&self, shift: &[f64]) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().zip(shift).map(|(v, s)| v + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(v, s)| v + s).collect(),
        }
    }
}

/// Volume of `a ∩ b`; zero when they are disjoint or of different dimension.
pub fn box_intersection_volume(a: &AxisBox, b: &AxisBox) -> f64 {
    if a.dim() != b.dim() {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 0..a.dim() {
        let len = a.hi[i].min(b.hi[i]) - a.lo[i].max(b.lo[i]);
        if len <= 0.0 {
            return 0.0;
        }
        v *= len;
    }
    v
}

/// Splits a union of possibly overlapping boxes into pairwise
/// interior-disjoint boxes covering the same set.
///
/// Works on the arrangement induced by all box coordinates, then merges
/// consecutive covered cells along axis 0. Cost grows like `(2m)^n`, which
/// is fine for the handful of boxes used as test functions.
pub fn disjoint_cover(boxes: &[AxisBox]) -> Vec<AxisBox> {
    let boxes: Vec<&AxisBox> = boxes.iter().filter(|b| b.volume() > 0.0).collect();
    let Some(first) = boxes.first() else {
        return Vec::new();
    };
    let n = first.dim();
    let breaks: Vec<Vec<f64>> = (0..n)
        .map(|axis| {
            let mut v: Vec<f64> = boxes
                .iter()
                .flat_map(|b| [b.lo[axis], b.hi[axis]])
                .collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();

    let mut out = Vec::new();
    // iterate over cells of the trailing axes, sweep axis 0 and merge runs
    let tails = (1..n).map(|a| 0..breaks[a].len() - 1).multi_cartesian_product();
    let tails: Box<dyn Iterator<Item = Vec<usize>>> = if n == 1 {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new(tails)
    };
    for tail in tails {
        let mut mid = vec![0.0; n];
        for (a, &j) in tail.iter().enumerate() {
            mid[a + 1] = 0.5 * (breaks[a + 1][j] + breaks[a + 1][j + 1]);
        }
        let mut run: Option<(f64, f64)> = None;
        for j in 0..breaks[0].len() - 1 {
            mid[0] = 0.5 * (breaks[0][j] + breaks[0][j + 1]);
            let covered = boxes.iter().any(|b| b.contains_point(&mid));
            match (covered, run) {
                (true, None) => run = Some((breaks[0][j], breaks[0][j + 1])),
                (true, Some((s, _))) => run = Some((s, breaks[0][j + 1])),
                (false, Some((s, e))) => {
                    out.push(cell_box(&breaks, &tail, s, e));
                    run = None;
                }
                (false, None) => {}
            }
        }
        if let Some((s, e)) = run {
            out.push(cell_box(&breaks, &tail, s, e));
        }
    }
    out
}

fn cell_box(breaks: &[Vec<f64>], tail: &[usize], s: f64, e: f64) -> AxisBox {
    let mut lo = vec![s];
    let mut hi = vec![e];
    for (a, &j) in tail.iter().enumerate() {
        lo.push(breaks[a + 1][j]);
        hi.push(breaks[a + 1][j + 1]);
    }
    AxisBox { lo, hi }
}

/// Role of one coordinate axis for a face of an axis-parallel cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisRole {
    /// The face extends along this axis over `[c - r, c + r]`.
    Free,
    /// Fixed at `c - r`.
    Lower,
    /// Fixed at `c + r`.
    Upper,
}

impl AxisRole {
    pub fn sign(self) -> Option<f64> {
        match self {
            AxisRole::Free => None,
            AxisRole::Lower => Some(-1.0),
            AxisRole::Upper => Some(1.0),
        }
    }
}

/// One k-dimensional face of the axis-parallel cube with center `center`
/// and half side `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFace {
    center: Vec<f64>,
    r: f64,
    roles: Vec<AxisRole>,
}

impl KFace {
    pub fn new(center: Vec<f64>, r: f64, roles: Vec<AxisRole>) -> Result<Self> {
        if center.len() != roles.len() || center.is_empty() {
            return Err(Error::Invalid("face center and axis roles differ in length".into()));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("half side must be positive, got {r}")));
        }
        if roles.iter().all(|r| *r == AxisRole::Free) {
            return Err(Error::Domain("a face needs at least one fixed axis (k < n)".into()));
        }
        Ok(Self { center, r, roles })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn k(&self) -> usize {
        self.free_axes().count()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_side(&self) -> f64 {
        self.r
    }

    pub fn roles(&self) -> &[AxisRole] {
        &self.roles
    }

    pub fn free_axes(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == AxisRole::Free)
            .map(|(i, _)| i)
    }

    /// The face as a (degenerate) closed box.
    pub fn as_box(&self) -> AxisBox {
        self.neighborhood(0.0)
    }

    /// Sup-norm `delta`-neighborhood of the face; always an axis box.
    pub fn neighborhood(&self, delta: f64) -> AxisBox {
        let mut lo = Vec::with_capacity(self.n());
        let mut hi = Vec::with_capacity(self.n());
        for (c, role) in self.center.iter().zip(&self.roles) {
            match role.sign() {
                None => {
                    lo.push(c - self.r - delta);
                    hi.push(c + self.r + delta);
                }
                Some(s) => {
                    let v = c + s * self.r;
                    lo.push(v - delta);
                    hi.push(v + delta);
                }
            }
        }
        AxisBox { lo, hi }
    }

    /// k-dimensional measure `(2r)^k`.
    pub fn measure(&self) -> f64 {
        (2.0 * self.r).powi(self.k() as i32)
    }

    pub fn plane_key(&self) -> PlaneKey {
        plane_key(self)
    }
}

/// Checks `0 <= k < n`.
pub fn check_dims(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be at least 1".into()));
    }
    if k >= n {
        return Err(Error::Domain(format!("face dimension must satisfy 0 <= k < n, got n={n}, k={k}")));
    }
    Ok(())
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of k-faces of an n-cube, `2^(n-k) * C(n, k)`.
pub fn face_count(n: usize, k: usize) -> usize {
    (1usize << (n - k)) * binomial(n, k)
}

/// All k-faces of the cube with the given center and half side.
///
/// Order: free-axis sets in lexicographic order, then sign patterns on the
/// fixed axes counted in binary with `Lower` before `Upper` and the lowest
/// fixed axis varying slowest.
pub fn enumerate_faces(n: usize, k: usize, center: &[f64], r: f64) -> Result<Vec<KFace>> {
    check_dims(n, k)?;
    if center.len() != n {
        return Err(Error::Domain(format!(
            "center has dimension {}, expected {n}",
            center.len()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("half side must be positive, got {r}")));
    }
    let mut faces = Vec::with_capacity(face_count(n, k));
    for free in (0..n).combinations(k) {
        let fixed: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
        let m = fixed.len();
        for pattern in 0..(1usize << m) {
            let mut roles = vec![AxisRole::Free; n];
            for (pos, &axis) in fixed.iter().enumerate() {
                let bit = (pattern >> (m - 1 - pos)) & 1;
                roles[axis] = if bit == 0 { AxisRole::Lower } else { AxisRole::Upper };
            }
            faces.push(KFace {
                center: center.to_vec(),
                r,
                roles,
            });
        }
    }
    Ok(faces)
}

/// Sup-norm `delta`-neighborhood of a face; volume `(2r+2δ)^k (2δ)^(n-k)`.
pub fn face_neighborhood(face: &KFace, delta: f64) -> AxisBox {
    face.neighborhood(delta)
}

/// Identifies the affine coordinate k-plane containing a face: the set of
/// free axes plus the values of the fixed coordinates.
///
/// Equality, ordering and hashing compare offsets after quantizing to
/// [`COPLANAR_TOL`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneKey {
    pub free: Vec<usize>,
    pub offsets: Vec<f64>,
}

impl PlaneKey {
    fn quantized(&self) -> impl Iterator<Item = i64> + '_ {
        self.offsets
            .iter()
            .map(|v| (v / COPLANAR_TOL).round() as i64)
    }
}

impl PartialEq for PlaneKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PlaneKey {}

impl PartialOrd for PlaneKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PlaneKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.free
            .cmp(&other.free)
            .then_with(|| self.quantized().cmp(other.quantized()))
    }
}

impl Hash for PlaneKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.free.hash(state);
        for q in self.quantized() {
            q.hash(state);
        }
    }
}

pub fn plane_key(face: &KFace) -> PlaneKey {
    let mut free = Vec::new();
    let mut offsets = Vec::new();
    for (i, (c, role)) in face.center.iter().zip(&face.roles).enumerate() {
        match role.sign() {
            None => free.push(i),
            Some(s) => offsets.push(c + s * face.r),
        }
    }
    PlaneKey { free, offsets }
}
