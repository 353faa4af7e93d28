//! Norm-scaling experiments for the skeleton maximal operator.
//!
//! The predicted behaviour of `‖M^k_δ‖_{Lᵖ→Lᑫ}` as `δ → 0` has two regimes
//! split at `q = q* p` with `q* = 2n² / ((n-k)(2n-1))`. This module evaluates
//! the predictions, builds the explicit lower-bound test functions, and fits
//! empirical exponents from seeded candidate families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, enumerate_faces, AxisBox};
use crate::grid::{dyadic_level, BoxUnionIndicator, Grid};
use crate::operators::{skeleton_maximal_field, OperatorConfig, SkeletonMaximal, TestFunction};
use crate::stats::{fit_loglog, LogLogFit};

/// Width of the neighborhood of the skeleton used as the lower-bound witness,
/// in units of `δ`.
pub const EXTREMIZER_WIDTH: f64 = 6.0;

const RANDOM_BOX_LATTICE: f64 = 1.0 / 16.0;
const RANDOM_BOX_COUNT: usize = 6;

/// Default absolute tolerance on fitted exponents.
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// `q* = 2n² / ((n-k)(2n-1))`.
pub fn critical_q(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    2.0 * n * n / ((n - k) * (2.0 * n - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `q <= q* p`: exponent `(k-n)/(2np)`.
    DiagonalDominated,
    /// `q > q* p`: exponent `n/q - (n-k)/p`.
    SkeletonDominated,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::DiagonalDominated => "diagonal-dominated",
            Regime::SkeletonDominated => "skeleton-dominated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPrediction {
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub k: usize,
    pub q_star: f64,
    pub regime: Regime,
    /// Predicted `e` in `‖M^k_δ‖ ≈ δ^e`.
    pub exponent: f64,
}

pub fn diagonal_exponent(p: f64, n: usize, k: usize) -> f64 {
    (k as f64 - n as f64) / (2.0 * n as f64 * p)
}

pub fn skeleton_exponent(p: f64, q: f64, n: usize, k: usize) -> f64 {
    n as f64 / q - (n - k) as f64 / p
}

/// Regime and exponent of `‖M^k_δ‖_{Lᵖ→Lᑫ}` for `1 < p <= q < ∞`.
pub fn predicted_exponent(p: f64, q: f64, n: usize, k: usize) -> Result<ExponentPrediction> {
    check_dims(n, k)?;
    if !(p > 1.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::Domain(format!("exponents must satisfy 1 < p <= q < ∞, got p={p}, q={q}")));
    }
    if q < p {
        return Err(Error::Domain(format!(
            "q = {q} < p = {p}: the operator is unbounded there (big-cube test functions give \
             ratios (N-6)^(n/q) N^(-n/p) that grow with N)"
        )));
    }
    let q_star = critical_q(n, k);
    let (regime, exponent) = if q <= q_star * p {
        (Regime::DiagonalDominated, diagonal_exponent(p, n, k))
    } else {
        (Regime::SkeletonDominated, skeleton_exponent(p, q, n, k))
    };
    Ok(ExponentPrediction {
        p,
        q,
        n,
        k,
        q_star,
        regime,
        exponent,
    })
}

/// Parameters of a restricted weak-type estimate obtained from a bound
/// `μ <= H λ^-α m^β` on the multiplicity threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeParams {
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    pub tau: f64,
    pub n: usize,
    /// `α + 1`.
    pub p: f64,
    /// `p / (1 - β)`.
    pub q: f64,
    /// `τ/p - n/q`.
    pub gamma: f64,
}

impl WeakTypeParams {
    /// `C H^(1/p) δ^(-γ)`.
    pub fn constant(&self, c: f64, delta: f64) -> f64 {
        c * self.h.powf(1.0 / self.p) * delta.powf(-self.gamma)
    }
}

pub fn weak_type_params(alpha: f64, beta: f64, h: f64, tau: f64, n: usize) -> Result<WeakTypeParams> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(beta < 1.0) {
        return Err(Error::Domain(format!("beta must be < 1, got {beta}")));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("H must be positive, got {h}")));
    }
    let p = alpha + 1.0;
    let q = p / (1.0 - beta);
    Ok(WeakTypeParams {
        alpha,
        beta,
        h,
        tau,
        n,
        p,
        q,
        gamma: tau / p - n as f64 / q,
    })
}

/// Exponent of `δ` in the weak `(1, q)` bound for the linearized operator.
pub fn weak_exponent(q: f64, n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    if q <= critical_q(n, k) {
        (kf - nf) / (2.0 * nf)
    } else {
        nf / q + kf - nf
    }
}

/// Indicator of the `6δ`-neighborhood of the k-skeleton `S_k(x0, 1)`, split
/// into disjoint boxes.
pub fn skeleton_extremizer(n: usize, k: usize, delta: f64, x0: &[f64]) -> Result<BoxUnionIndicator> {
    check_dims(n, k)?;
    if !(delta > 0.0 && delta < 1.0 / 12.0) {
        return Err(Error::Domain(format!("the extremizer needs 0 < δ < 1/12, got {delta}")));
    }
    let sides: Vec<AxisBox> = enumerate_faces(n, k, x0, 1.0)?
        .iter()
        .map(|f| f.neighborhood(EXTREMIZER_WIDTH * delta))
        .collect();
    BoxUnionIndicator::from_union(&sides)
}

/// Center of the unit cube, the default base point of constructions.
pub fn unit_center(n: usize) -> Vec<f64> {
    vec![0.5; n]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigCubeRow {
    pub side: usize,
    /// `(N-6)^(n/q) N^(-n/p)`.
    pub ratio_bound: f64,
    /// `‖1_{field >= 1}‖_q / ‖f‖_p` measured on the inner cube.
    pub measured_ratio: f64,
    pub inner_cells: usize,
    pub min_inner_value: f64,
    pub all_at_least_one: bool,
}

/// Indicator of a cube of side `N` centered at the unit-cube center, with
/// the operator evaluated on the concentric cube of side `N - 6`.
pub fn big_cube_growth(
    sides: &[usize],
    p: f64,
    q: f64,
    n: usize,
    k: usize,
    delta: f64,
) -> Result<Vec<BigCubeRow>> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::Domain(format!("exponents must be >= 1, got p={p}, q={q}")));
    }
    let cfg = OperatorConfig::new(n, k, delta)?;
    let center = unit_center(n);
    sides
        .iter()
        .map(|&side| {
            if side < 8 {
                return Err(Error::Domain(format!("cube side must be at least 8, got {side}")));
            }
            let nf = side as f64;
            let f = BoxUnionIndicator::new(vec![AxisBox::centered_cube(&center, nf)])?;
            let inner = Grid::new(AxisBox::centered_cube(&center, nf - 6.0), delta)?;
            let field = SkeletonMaximal::new(&cfg, &f.clone().into())?.field_on(&inner)?;
            let covered = field.values().iter().filter(|v| **v >= 1.0).count();
            let norm_f = f.lp_norm(p)?;
            let measured_ratio = (covered as f64 * inner.cell_volume()).powf(1.0 / q) / norm_f;
            Ok(BigCubeRow {
                side,
                ratio_bound: (nf - 6.0).powf(n as f64 / q) * nf.powf(-(n as f64) / p),
                measured_ratio,
                inner_cells: inner.len(),
                min_inner_value: field.min(),
                all_at_least_one: covered == inner.len(),
            })
        })
        .collect()
}

/// Where the output norm `‖M f‖_q` is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormDomain {
    /// The unit cube `[0,1)^n`.
    #[default]
    Local,
    /// Union of the unit lattice cubes the field can be nonzero on.
    Tiled,
}

/// `‖M^k_δ f‖_q / ‖f‖_p` for one test function.
pub fn norm_ratio(f: &TestFunction, p: f64, q: f64, config: &OperatorConfig, domain: NormDomain) -> Result<f64> {
    let norm_f = f.lp_norm(p)?;
    if !(norm_f > 0.0) {
        return Err(Error::Invalid("norm ratio of the zero function is undefined".into()));
    }
    let field = match domain {
        NormDomain::Local => skeleton_maximal_field(config, f)?,
        NormDomain::Tiled => {
            let hull = f
                .support_hull()
                .ok_or_else(|| Error::Invalid("test function has no support".into()))?;
            let reach = config.max_radius() + config.width();
            let grown = hull.inflate(reach);
            let lo: Vec<f64> = grown.lo().iter().map(|v| v.floor()).collect();
            let hi: Vec<f64> = grown
                .hi()
                .iter()
                .zip(&lo)
                .map(|(v, l)| v.ceil().max(l + 1.0))
                .collect();
            let grid = Grid::new(AxisBox::new(lo, hi)?, config.delta)?;
            SkeletonMaximal::new(config, f)?.field_on(&grid)?
        }
    };
    Ok(field.lp_norm(q)? / norm_f)
}

/// Named test-function families tried by a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Candidate {
    /// `6δ`-neighborhood of `S_k(x0, 1)`.
    SkeletonExtremizer,
    /// Indicator of the grid cell at `x0`.
    SingleCell,
    /// Indicator of the whole support window `7Q₀`.
    Constant,
    /// A few random lattice-aligned boxes drawn from the scan seed.
    RandomBoxes,
}

impl Candidate {
    pub const ALL: [Candidate; 4] = [
        Candidate::SkeletonExtremizer,
        Candidate::SingleCell,
        Candidate::Constant,
        Candidate::RandomBoxes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Candidate::SkeletonExtremizer => "skeleton-extremizer",
            Candidate::SingleCell => "single-cell",
            Candidate::Constant => "constant",
            Candidate::RandomBoxes => "random-boxes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown candidate {s:?}")))
    }

    pub fn build(self, n: usize, k: usize, delta: f64, x0: &[f64], seed: u64) -> Result<TestFunction> {
        let window = AxisBox::scaled_unit_cube(n, 7.0);
        let e = match self {
            Candidate::SkeletonExtremizer => skeleton_extremizer(n, k, delta, x0)?,
            Candidate::SingleCell => {
                let grid = Grid::unit(n, delta)?;
                let clamped: Vec<f64> = x0.iter().map(|v| v.clamp(0.0, 1.0 - delta / 2.0)).collect();
                BoxUnionIndicator::new(vec![grid.cell(grid.locate(&clamped)?)])?
            }
            Candidate::Constant => BoxUnionIndicator::new(vec![window])?,
            Candidate::RandomBoxes => {
                // coordinates on a lattice no finer than 1/16 so the same set
                // is drawn for every delta <= 1/16
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let step = delta.max(RANDOM_BOX_LATTICE);
                let steps = (7.0 / step).round() as i64;
                let raw: Vec<AxisBox> = (0..RANDOM_BOX_COUNT)
                    .map(|_| {
                        let lo: Vec<f64> = (0..n)
                            .map(|_| window.lo()[0] + rng.gen_range(0..steps) as f64 * step)
                            .collect();
                        let hi: Vec<f64> = lo
                            .iter()
                            .map(|l| {
                                let len = rng.gen_range(1..=(3.0 / step) as i64) as f64 * step;
                                (l + len).min(window.hi()[0])
                            })
                            .collect();
                        AxisBox::new(lo, hi)
                    })
                    .collect::<Result<_>>()?;
                BoxUnionIndicator::from_union(&raw)?
            }
        };
        Ok(TestFunction::Boxes(e))
    }
}

/// Shared settings of a norm scan besides the `δ` list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub width_factor: f64,
    pub backend: crate::operators::Backend,
    pub domain: NormDomain,
    pub x0: Vec<f64>,
    pub seed: u64,
}

impl ScanSettings {
    pub fn new(n: usize, k: usize, p: f64, q: f64) -> Self {
        Self {
            n,
            k,
            p,
            q,
            width_factor: 1.0,
            backend: crate::operators::Backend::Exact,
            domain: NormDomain::Local,
            x0: unit_center(n),
            seed: 0,
        }
    }

    pub fn operator_config(&self, delta: f64) -> Result<OperatorConfig> {
        OperatorConfig::new(self.n, self.k, delta)?
            .with_width_factor(self.width_factor)?
            .with_backend(self.backend)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    pub candidate: Candidate,
    pub p: f64,
    pub q: f64,
    pub ratio: f64,
}

/// Best ratio per `δ` and the fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub rows: Vec<ScanRow>,
    /// `(δ, max over candidates of the ratio)`, `δ` strictly decreasing.
    pub points: Vec<(f64, f64)>,
    pub fit: LogLogFit,
}

fn check_delta_list(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 3 {
        return Err(Error::Invalid(format!(
            "a scan needs at least 3 values of delta, got {}",
            deltas.len()
        )));
    }
    if let Some(d) = deltas.iter().find(|d| dyadic_level(**d).is_none()) {
        return Err(Error::Config(format!("delta {d} is not a negative power of two")));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("deltas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Evaluates every candidate at every `δ` and fits `log ratio ~ log δ`.
pub fn norm_scan(deltas: &[f64], candidates: &[Candidate], settings: &ScanSettings) -> Result<ScalingSeries> {
    check_delta_list(deltas)?;
    if candidates.is_empty() {
        return Err(Error::Invalid("no candidates to scan".into()));
    }
    let tasks: Vec<(usize, Candidate)> = (0..deltas.len())
        .flat_map(|i| candidates.iter().map(move |c| (i, *c)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(i, cand)| {
            let delta = deltas[i];
            let cfg = settings.operator_config(delta)?;
            let f = cand.build(settings.n, settings.k, delta, &settings.x0, settings.seed)?;
            let ratio = norm_ratio(&f, settings.p, settings.q, &cfg, settings.domain)?;
            Ok(ScanRow {
                delta,
                candidate: cand,
                p: settings.p,
                q: settings.q,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let best = rows
                .iter()
                .filter(|r| r.delta == d)
                .map(|r| r.ratio)
                .fold(0.0, f64::max);
            (d, best)
        })
        .collect();
    if let Some((d, _)) = points.iter().find(|(_, r)| !(*r > 0.0)) {
        return Err(Error::Invalid(format!(
            "every candidate gives a zero ratio at delta = {d}; add a candidate the operator sees"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(ScalingSeries {
        fit: fit_loglog(&xs, &ys)?,
        rows,
        points,
    })
}

/// Comparison of a fitted slope against the predicted exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub regime: Regime,
    pub predicted_exponent: f64,
    pub fitted_slope: f64,
    pub r2: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ScanSummary {
    /// Two-sided check in the skeleton-dominated regime; in the diagonal
    /// regime only the upper bound is checked, so the slope may not fall
    /// below the prediction by more than the tolerance.
    pub fn evaluate(prediction: &ExponentPrediction, fit: &LogLogFit, tolerance: f64) -> Self {
        let pass = match prediction.regime {
            Regime::SkeletonDominated => (fit.slope - prediction.exponent).abs() <= tolerance,
            Regime::DiagonalDominated => fit.slope >= prediction.exponent - tolerance,
        };
        Self {
            regime: prediction.regime,
            predicted_exponent: prediction.exponent,
            fitted_slope: fit.slope,
            r2: fit.r2,
            tolerance,
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeRow {
    pub delta: f64,
    pub lambda: f64,
    pub level_set_measure: f64,
    pub implied_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeTable {
    pub q: f64,
    pub exponent: f64,
    pub rows: Vec<WeakTypeRow>,
    /// Largest implied constant over `λ`.
    pub max_constant: f64,
}

/// Level sets `{x ∈ Q₀ : M 1_E(x) > λ}` and the constants they imply in
/// `|{M 1_E > λ}|^(1/q) <= C δ^e λ^-1 |E|`.
pub fn weak_type_scan(e: &BoxUnionIndicator, lambdas: &[f64], q: f64, config: &OperatorConfig) -> Result<WeakTypeTable> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::Invalid(format!("lambda must lie in (0, 1], got {l}")));
    }
    if !(q > 1.0) {
        return Err(Error::Invalid(format!("q must exceed 1, got {q}")));
    }
    let field = skeleton_maximal_field(config, &TestFunction::Boxes(e.clone()))?;
    let exponent = weak_exponent(q, config.n, config.k);
    let measure_e = e.measure();
    let rows: Vec<WeakTypeRow> = lambdas
        .iter()
        .map(|&lambda| {
            let level = field.level_set_measure(lambda);
            let implied = if measure_e > 0.0 {
                level.powf(1.0 / q) * lambda / (config.delta.powf(exponent) * measure_e)
            } else {
                0.0
            };
            WeakTypeRow {
                delta: config.delta,
                lambda,
                level_set_measure: level,
                implied_constant: implied,
            }
        })
        .collect();
    let max_constant = rows.iter().map(|r| r.implied_constant).fold(0.0, f64::max);
    Ok(WeakTypeTable {
        q,
        exponent,
        rows,
        max_constant,
    })
}
