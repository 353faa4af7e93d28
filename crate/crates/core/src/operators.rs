//! The k-skeleton maximal operator and its linearized variant.
//!
//! At a point `x` the skeleton operator takes, for every admissible half
//! side `r`, the smallest average of `|f|` over the width-`w` neighborhoods
//! of the faces of the cube `S_k(x, r)`, and then the largest of those
//! minima over `r`. Evaluation on a grid is a data-parallel map over cell
//! centers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, enumerate_faces, AxisBox, KFace};
use crate::grid::{lp_norm_of, BoxUnionIndicator, Grid, GridFunction, SUPPORT_SCALE};
use crate::selection::FaceSelection;

const RADIUS_TOL: f64 = 1e-9;

/// How face averages are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Backend {
    /// Box-union inputs are integrated through exact intersection volumes.
    Exact,
    /// Box-union inputs are first sampled at the centers of an `h`-lattice.
    Quadrature { h: f64 },
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Quadrature { h } => write!(f, "quadrature({h})"),
        }
    }
}

/// Radii in `[1, 2]` that are integer multiples of `delta`.
pub fn default_radii(delta: f64) -> Vec<f64> {
    let first = (1.0 / delta - RADIUS_TOL).ceil() as i64;
    let last = (2.0 / delta + RADIUS_TOL).floor() as i64;
    (first..=last).map(|j| j as f64 * delta).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    /// Finite set of half sides the supremum runs over.
    pub radii: Vec<f64>,
    /// Face neighborhoods have width `width_factor * delta`.
    pub width_factor: f64,
    pub backend: Backend,
}

impl OperatorConfig {
    /// Default radius set `[1,2] ∩ δℤ`, width `δ`, exact backend.
    pub fn new(n: usize, k: usize, delta: f64) -> Result<Self> {
        let cfg = Self {
            n,
            k,
            delta,
            radii: if delta > 0.0 { default_radii(delta) } else { Vec::new() },
            width_factor: 1.0,
            backend: Backend::Exact,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_radii(mut self, radii: Vec<f64>) -> Result<Self> {
        self.radii = radii;
        self.validate()?;
        Ok(self)
    }

    pub fn with_width_factor(mut self, factor: f64) -> Result<Self> {
        self.width_factor = factor;
        self.validate()?;
        Ok(self)
    }

    pub fn with_backend(mut self, backend: Backend) -> Result<Self> {
        self.backend = backend;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.n, self.k)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.radii.is_empty() {
            return Err(Error::Config("radius set is empty".into()));
        }
        if let Some(r) = self
            .radii
            .iter()
            .find(|r| !(**r >= 1.0 - RADIUS_TOL && **r <= 2.0 + RADIUS_TOL))
        {
            return Err(Error::Config(format!("radius {r} lies outside [1, 2]")));
        }
        if !(self.width_factor > 0.0) || !self.width_factor.is_finite() {
            return Err(Error::Config(format!(
                "width factor must be positive, got {}",
                self.width_factor
            )));
        }
        if let Backend::Quadrature { h } = self.backend {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("quadrature cell size must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// Neighborhood width actually used for averages.
    pub fn width(&self) -> f64 {
        self.width_factor * self.delta
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    /// The grid on `[0,1)^n` with spacing `delta`.
    pub fn unit_grid(&self) -> Result<Grid> {
        Grid::unit(self.n, self.delta)
    }

    /// Window that contains every face neighborhood seen from `domain`.
    pub fn support_window(&self, domain: &AxisBox) -> AxisBox {
        let reach = (self.max_radius() + self.width()).max((SUPPORT_SCALE - 1.0) / 2.0);
        domain.inflate(reach)
    }
}

/// Non-negative inputs accepted by the operators.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Boxes(BoxUnionIndicator),
    Grid(GridFunction),
}

impl TestFunction {
    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Boxes(e) => e.dim(),
            TestFunction::Grid(g) => Some(g.grid().dim()),
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        match self {
            TestFunction::Boxes(e) => e.lp_norm(p),
            TestFunction::Grid(g) => g.lp_norm(p),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            TestFunction::Boxes(e) => {
                if e.is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
            TestFunction::Grid(g) => g.sup(),
        }
    }

    /// Region outside of which the function vanishes, if bounded.
    pub fn support_hull(&self) -> Option<AxisBox> {
        match self {
            TestFunction::Boxes(e) => e.bounding_box(),
            TestFunction::Grid(g) => Some(g.grid().domain().clone()),
        }
    }
}

impl From<BoxUnionIndicator> for TestFunction {
    fn from(e: BoxUnionIndicator) -> Self {
        TestFunction::Boxes(e)
    }
}

impl From<GridFunction> for TestFunction {
    fn from(g: GridFunction) -> Self {
        TestFunction::Grid(g)
    }
}

/// A test function prepared for repeated box integrals under a backend.
#[derive(Clone, Debug)]
pub enum Integrand {
    Zero,
    Boxes { boxes: Vec<AxisBox>, hull: AxisBox },
    Samples(GridFunction),
}

impl Integrand {
    pub fn prepare(f: &TestFunction, backend: Backend) -> Result<Self> {
        match (f, backend) {
            (TestFunction::Boxes(e), Backend::Exact) => Ok(match e.bounding_box() {
                Some(hull) if !e.is_empty() => Integrand::Boxes {
                    boxes: e.boxes().iter().filter(|b| b.volume() > 0.0).cloned().collect(),
                    hull,
                },
                _ => Integrand::Zero,
            }),
            (TestFunction::Boxes(e), Backend::Quadrature { h }) => {
                Ok(e.rasterize(h)?.map_or(Integrand::Zero, Integrand::Samples))
            }
            (TestFunction::Grid(g), _) => Ok(Integrand::Samples(g.clone())),
        }
    }

    /// `∫_b f`.
    pub fn integral_over(&self, b: &AxisBox) -> f64 {
        match self {
            Integrand::Zero => 0.0,
            Integrand::Boxes { boxes, hull } => {
                if !hull.overlaps(b) {
                    return 0.0;
                }
                boxes
                    .iter()
                    .map(|e| crate::geometry::box_intersection_volume(b, e))
                    .sum()
            }
            Integrand::Samples(g) => g.integral_over(b),
        }
    }

    pub fn average_over(&self, b: &AxisBox) -> f64 {
        let vol = b.volume();
        if vol > 0.0 {
            self.integral_over(b) / vol
        } else {
            0.0
        }
    }
}

/// Average of `f` over the width-`width` neighborhood of `face`.
pub fn face_average(face: &KFace, width: f64, f: &TestFunction, backend: Backend) -> Result<f64> {
    let integrand = Integrand::prepare(f, backend)?;
    Ok(integrand.average_over(&face.neighborhood(width)))
}

/// Face neighborhoods of `S_k(0, r)` for one radius, to be shifted by `x`.
#[derive(Clone, Debug)]
struct RadiusFaces {
    r: f64,
    boxes: Vec<AxisBox>,
}

/// The k-skeleton maximal operator bound to one test function.
#[derive(Clone, Debug)]
pub struct SkeletonMaximal {
    config: OperatorConfig,
    integrand: Integrand,
    f_sup: f64,
    per_radius: Vec<RadiusFaces>,
}

impl SkeletonMaximal {
    pub fn new(config: &OperatorConfig, f: &TestFunction) -> Result<Self> {
        config.validate()?;
        if let Some(d) = f.dim() {
            if d != config.n {
                return Err(Error::Config(format!(
                    "test function has dimension {d}, operator expects {}",
                    config.n
                )));
            }
        }
        let origin = vec![0.0; config.n];
        let width = config.width();
        let per_radius = config
            .radii
            .iter()
            .map(|&r| {
                let boxes = enumerate_faces(config.n, config.k, &origin, r)?
                    .iter()
                    .map(|face| face.neighborhood(width))
                    .collect();
                Ok(RadiusFaces { r, boxes })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            integrand: Integrand::prepare(f, config.backend)?,
            f_sup: f.sup(),
            per_radius,
        })
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.n {
            return Err(Error::Domain(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.config.n
            )));
        }
        Ok(())
    }

    /// Smallest face average of `S_k(x, r)`.
    pub fn min_face_average(&self, x: &[f64], r: f64) -> Result<f64> {
        self.check_point(x)?;
        let faces = enumerate_faces(self.config.n, self.config.k, x, r)?;
        Ok(faces
            .iter()
            .map(|face| self.integrand.average_over(&face.neighborhood(self.config.width())))
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest over the radius set of the smallest face average.
    pub fn at(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval(x))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        if matches!(self.integrand, Integrand::Zero) {
            return 0.0;
        }
        let mut best = 0.0f64;
        for rf in &self.per_radius {
            let mut smallest = f64::INFINITY;
            for rel in &rf.boxes {
                let nb = rel.translate(x);
                let avg = self.integrand.average_over(&nb);
                // this radius cannot beat the current best
                if avg <= best {
                    smallest = best;
                    break;
                }
                smallest = smallest.min(avg);
            }
            best = best.max(smallest);
            if best >= self.f_sup {
                break;
            }
        }
        best
    }

    /// Values at every cell center of `grid`.
    pub fn field_on(&self, grid: &Grid) -> Result<MaximalField> {
        if grid.dim() != self.config.n {
            return Err(Error::Config(format!(
                "grid has dimension {}, operator expects {}",
                grid.dim(),
                self.config.n
            )));
        }
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.eval(&grid.center_of(i)))
            .collect();
        Ok(MaximalField {
            grid: grid.clone(),
            values,
        })
    }

    /// Values on the unit-cube grid of spacing `delta`.
    pub fn field(&self) -> Result<MaximalField> {
        self.field_on(&self.config.unit_grid()?)
    }

    /// Radii for which the maximum is attained at `x` (first one on ties).
    pub fn argmax_radius(&self, x: &[f64]) -> Result<f64> {
        let mut best = (f64::NEG_INFINITY, self.config.radii[0]);
        for rf in &self.per_radius {
            let v = self.min_face_average(x, rf.r)?;
            if v > best.0 {
                best = (v, rf.r);
            }
        }
        Ok(best.1)
    }
}

/// `min_j` face average of `S_k(x, r)`.
pub fn min_face_average(x: &[f64], r: f64, config: &OperatorConfig, f: &TestFunction) -> Result<f64> {
    SkeletonMaximal::new(config, f)?.min_face_average(x, r)
}

/// `M^k_δ f(x)` over the configured radius set.
pub fn skeleton_maximal_at(x: &[f64], config: &OperatorConfig, f: &TestFunction) -> Result<f64> {
    SkeletonMaximal::new(config, f)?.at(x)
}

/// `M^k_δ f` at every cell center of the unit-cube grid.
///
/// Box-union inputs are clipped to the support window around the unit cube
/// (with a warning if that removes anything); no face neighborhood reaches
/// outside it.
pub fn skeleton_maximal_field(config: &OperatorConfig, f: &TestFunction) -> Result<MaximalField> {
    let grid = config.unit_grid()?;
    let clipped;
    let f = match f {
        TestFunction::Boxes(e) => {
            clipped = TestFunction::Boxes(e.clip_to(&config.support_window(grid.domain())));
            &clipped
        }
        other => other,
    };
    SkeletonMaximal::new(config, f)?.field_on(&grid)
}

/// Cell-wise values of a maximal operator over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalField {
    grid: Grid,
    values: Vec<f64>,
}

impl MaximalField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Config(format!(
                "grid has {} cells but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        lp_norm_of(&self.values, self.grid.cell_volume(), q)
    }

    /// `|{x : field(x) > lambda}|`.
    pub fn level_set_measure(&self, lambda: f64) -> f64 {
        self.values.iter().filter(|v| **v > lambda).count() as f64 * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_grid_function(self) -> Result<GridFunction> {
        GridFunction::new(self.grid, self.values)
    }
}

/// Radius assigned to each cell center; values in `[1,2] ∩ δℤ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl RadiusFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Config(format!(
                "grid has {} cells but {} radii were given",
                grid.len(),
                values.len()
            )));
        }
        let delta = grid.delta();
        for r in &values {
            let steps = r / delta;
            if !(*r >= 1.0 - RADIUS_TOL && *r <= 2.0 + RADIUS_TOL)
                || (steps - steps.round()).abs() > RADIUS_TOL * steps.max(1.0)
            {
                return Err(Error::Config(format!(
                    "radius {r} is not an element of [1,2] ∩ {delta}ℤ"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, r: f64) -> Result<Self> {
        let len = grid.len();
        Self::new(grid, vec![r; len])
    }

    /// Uniform random element of `[1,2] ∩ δℤ` per cell.
    pub fn random<R: rand::Rng>(grid: Grid, rng: &mut R) -> Result<Self> {
        let radii = default_radii(grid.delta());
        let values = (0..grid.len())
            .map(|_| radii[rng.gen_range(0..radii.len())])
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Linearized operator: at cell `i` the average over the neighborhood of
/// the face selected for the skeleton `S_k(x_i, ρ(x_i))`.
pub fn linearized_field(
    rho: &RadiusFunction,
    selection: &FaceSelection,
    config: &OperatorConfig,
    f: &TestFunction,
) -> Result<MaximalField> {
    config.validate()?;
    let grid = rho.grid();
    let family = selection.family();
    if family.len() != grid.len() || family.n() != config.n || family.k() != config.k {
        return Err(Error::Config(format!(
            "selection covers {} skeletons in (n={}, k={}), radius function has {} cells in (n={}, k={})",
            family.len(),
            family.n(),
            family.k(),
            grid.len(),
            config.n,
            config.k
        )));
    }
    for (i, (c, r)) in family.members().iter().enumerate() {
        let expected = grid.center_of(i);
        let same_center = c.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= RADIUS_TOL);
        if !same_center || (r - rho.values()[i]).abs() > RADIUS_TOL {
            return Err(Error::Config(format!(
                "skeleton {i} of the selection does not match the radius function"
            )));
        }
    }
    let integrand = Integrand::prepare(f, config.backend)?;
    let width = config.width();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let face = selection.chosen_face(i)?;
            Ok(integrand.average_over(&face.neighborhood(width)))
        })
        .collect::<Result<Vec<f64>>>()?;
    MaximalField::new(grid.clone(), values)
}
