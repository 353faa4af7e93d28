//! Uniform grids of half-open cubes, piecewise-constant grid functions and
//! exact box-union indicators.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_intersection_volume, disjoint_cover, AxisBox};

const SPACING_TOL: f64 = 1e-9;

/// Side length of the window, relative to the unit cube, on which test
/// functions live.
pub const SUPPORT_SCALE: f64 = 7.0;

fn cells_along(extent: f64, delta: f64) -> Option<usize> {
    let ratio = extent / delta;
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() <= SPACING_TOL * rounded.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Returns `j` when `delta == 2^-j` (up to rounding), used for dyadic scans.
pub fn dyadic_level(delta: f64) -> Option<u32> {
    if !(delta > 0.0 && delta <= 1.0) {
        return None;
    }
    let j = (-delta.log2()).round();
    ((2f64.powi(-(j as i32)) - delta).abs() <= 1e-12 * delta).then_some(j as u32)
}

/// A box domain split into half-open cubes of side `delta`.
///
/// Cells are numbered with axis 0 varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    domain: AxisBox,
    delta: f64,
    shape: Vec<usize>,
}

impl Grid {
    /// Each side of `domain` must be an integer multiple of `delta`.
    pub fn new(domain: AxisBox, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("grid spacing must be positive, got {delta}")));
        }
        let shape = (0..domain.dim())
            .map(|axis| {
                cells_along(domain.extent(axis), delta).ok_or_else(|| {
                    Error::Config(format!(
                        "side {} of the domain is not an integer multiple of delta = {delta}",
                        domain.extent(axis)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain, delta, shape })
    }

    /// The grid on `[0,1)^n`; requires `1/delta` to be an integer.
    pub fn unit(n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) && delta != 1.0 {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {delta}")));
        }
        if cells_along(1.0, delta).is_none() {
            return Err(Error::Config(format!("1/delta must be an integer, got delta = {delta}")));
        }
        Self::new(AxisBox::unit_cube(n), delta)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.delta.powi(self.dim() as i32)
    }

    /// Per-axis indices of a flat cell index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|&s| {
                let i = idx % s;
                idx /= s;
                i
            })
            .collect()
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.shape)
            .rev()
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn center_of(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .zip(self.domain.lo())
            .map(|(&i, lo)| lo + (i as f64 + 0.5) * self.delta)
            .collect()
    }

    pub fn cell(&self, idx: usize) -> AxisBox {
        let lo: Vec<f64> = self
            .unravel(idx)
            .iter()
            .zip(self.domain.lo())
            .map(|(&i, lo)| lo + i as f64 * self.delta)
            .collect();
        let hi = lo.iter().map(|v| v + self.delta).collect();
        AxisBox::new(lo, hi).expect("cell corners are ordered")
    }

    /// Flat index of the half-open cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if !self.domain.contains_point_half_open(x) {
            return Err(Error::Domain(format!("point {x:?} lies outside the grid domain")));
        }
        let multi: Vec<usize> = x
            .iter()
            .zip(self.domain.lo())
            .zip(&self.shape)
            .map(|((v, lo), &s)| (((v - lo) / self.delta).floor() as usize).min(s - 1))
            .collect();
        Ok(self.ravel(&multi))
    }

    /// All cell centers in flat index order.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.center_of(i)).collect()
    }

    /// Indices of cells whose closed cube meets `b` with positive volume,
    /// as per-axis half-open ranges.
    fn overlap_ranges(&self, b: &AxisBox) -> Option<Vec<(usize, usize)>> {
        let mut ranges = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let lo = self.domain.lo()[axis];
            let a = ((b.lo()[axis] - lo) / self.delta).floor().max(0.0);
            let e = ((b.hi()[axis] - lo) / self.delta).ceil().min(self.shape[axis] as f64);
            if a >= e {
                return None;
            }
            ranges.push((a as usize, e as usize));
        }
        Some(ranges)
    }
}

/// Maps `x` to the center of the grid cell containing it.
pub fn psi(grid: &Grid, x: &[f64]) -> Result<Vec<f64>> {
    Ok(grid.center_of(grid.locate(x)?))
}

/// Cell centers of the unit-cube grid.
pub fn centers(n: usize, delta: f64) -> Result<Vec<Vec<f64>>> {
    Ok(Grid::unit(n, delta)?.centers())
}

/// Exponent for Lebesgue norms; `p = f64::INFINITY` selects the sup norm.
fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Invalid(format!("Lebesgue exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// Lᵖ norm of a piecewise constant function on cells of volume `cell_volume`.
pub(crate) fn lp_norm_of(values: &[f64], cell_volume: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((cell_volume * sum).powf(1.0 / p))
}

/// Non-negative function, constant on each cell of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "grid has {} cells but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "grid function values must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let len = grid.len();
        Self::new(grid, vec![c; len])
    }

    /// Samples `f` at each cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.center_of(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values[self.grid.locate(x)?])
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.values, self.grid.cell_volume(), p)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * c).collect())
    }

    /// Exact `∫_b f`, with `f` extended by zero outside the grid domain.
    pub fn integral_over(&self, b: &AxisBox) -> f64 {
        let Some(ranges) = self.grid.overlap_ranges(b) else {
            return 0.0;
        };
        let n = self.grid.dim();
        let delta = self.grid.delta;
        let lo = self.grid.domain.lo();
        // per-axis overlap lengths for each index in range
        let lengths: Vec<Vec<f64>> = (0..n)
            .map(|axis| {
                (ranges[axis].0..ranges[axis].1)
                    .map(|i| {
                        let c0 = lo[axis] + i as f64 * delta;
                        (b.hi()[axis].min(c0 + delta) - b.lo()[axis].max(c0)).max(0.0)
                    })
                    .collect()
            })
            .collect();
        let strides: Vec<usize> = self
            .grid
            .shape
            .iter()
            .scan(1usize, |acc, &s| {
                let cur = *acc;
                *acc *= s;
                Some(cur)
            })
            .collect();

        // odometer over the index box, innermost axis 0
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut total = 0.0;
        'outer: loop {
            let mut w = 1.0;
            let mut base = 0;
            for axis in 1..n {
                w *= lengths[axis][multi[axis] - ranges[axis].0];
                base += multi[axis] * strides[axis];
            }
            if w > 0.0 {
                let row: f64 = (ranges[0].0..ranges[0].1)
                    .map(|i| self.values[base + i] * lengths[0][i - ranges[0].0])
                    .sum();
                total += w * row;
            }
            for axis in 1..n {
                multi[axis] += 1;
                if multi[axis] < ranges[axis].1 {
                    continue 'outer;
                }
                multi[axis] = ranges[axis].0;
            }
            break;
        }
        total
    }
}

/// Indicator function of a finite union of interior-disjoint boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxUnionIndicator {
    boxes: Vec<AxisBox>,
}

impl BoxUnionIndicator {
    /// Rejects overlapping boxes; use [`BoxUnionIndicator::from_union`] for
    /// arbitrary unions.
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        if let Some(first) = boxes.first() {
            let n = first.dim();
            if boxes.iter().any(|b| b.dim() != n) {
                return Err(Error::Invalid("boxes of mixed dimension".into()));
            }
        }
        for (i, a) in boxes.iter().enumerate() {
            if let Some(j) = boxes[i + 1..].iter().position(|b| a.overlaps(b)) {
                return Err(Error::Invalid(format!(
                    "boxes {i} and {} overlap; indicator boxes must be pairwise disjoint",
                    i + 1 + j
                )));
            }
        }
        Ok(Self { boxes })
    }

    pub fn empty() -> Self {
        Self { boxes: Vec::new() }
    }

    /// Indicator of an arbitrary union, decomposed into disjoint pieces.
    pub fn from_union(boxes: &[AxisBox]) -> Result<Self> {
        if let Some(first) = boxes.first() {
            if boxes.iter().any(|b| b.dim() != first.dim()) {
                return Err(Error::Invalid("boxes of mixed dimension".into()));
            }
        }
        Ok(Self {
            boxes: disjoint_cover(boxes),
        })
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.iter().all(|b| b.volume() == 0.0)
    }

    pub fn dim(&self) -> Option<usize> {
        self.boxes.first().map(AxisBox::dim)
    }

    pub fn measure(&self) -> f64 {
        indicator_measure(self)
    }

    pub fn bounding_box(&self) -> Option<AxisBox> {
        let mut it = self.boxes.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, b| acc.hull(b)))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains_point(x))
    }

    /// Exact `|b ∩ E|`.
    pub fn integral_over(&self, b: &AxisBox) -> f64 {
        self.boxes.iter().map(|e| box_intersection_volume(b, e)).sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        if p.is_infinite() {
            return Ok(if self.is_empty() { 0.0 } else { 1.0 });
        }
        Ok(self.measure().powf(1.0 / p))
    }

    pub fn translate(&self, shift: &[f64]) -> Self {
        Self {
            boxes: self.boxes.iter().map(|b| b.translate(shift)).collect(),
        }
    }

    /// Restriction to `window`; logs a warning when anything is cut off.
    pub fn clip_to(&self, window: &AxisBox) -> Self {
        let mut clipped = Vec::with_capacity(self.boxes.len());
        let mut lost = false;
        for b in &self.boxes {
            match b.intersection(window) {
                Some(c) => {
                    if c != *b {
                        lost = true;
                    }
                    if c.volume() > 0.0 {
                        clipped.push(c);
                    }
                }
                None => lost = true,
            }
        }
        if lost {
            warn!("test function extends beyond {window:?}; clipping it to the support window");
        }
        Self { boxes: clipped }
    }

    /// Midpoint-rule samples on the `h`-lattice anchored at the origin,
    /// covering the bounding box of the union.
    pub fn rasterize(&self, h: f64) -> Result<Option<GridFunction>> {
        let Some(bbox) = self.bounding_box() else {
            return Ok(None);
        };
        if !(h > 0.0) {
            return Err(Error::Config(format!("quadrature cell size must be positive, got {h}")));
        }
        let lo: Vec<f64> = bbox.lo().iter().map(|v| (v / h).floor() * h).collect();
        let hi: Vec<f64> = bbox
            .hi()
            .iter()
            .zip(&lo)
            .map(|(v, l)| l + ((v - l) / h).ceil().max(1.0) * h)
            .collect();
        let grid = Grid::new(AxisBox::new(lo, hi)?, h)?;
        GridFunction::from_fn(grid, |x| if self.contains_point(x) { 1.0 } else { 0.0 }).map(Some)
    }
}

/// Total volume of the disjoint boxes.
pub fn indicator_measure(e: &BoxUnionIndicator) -> f64 {
    e.boxes.iter().map(AxisBox::volume).sum()
}

/// Lᵖ norm of a grid function.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    f.lp_norm(p)
}
