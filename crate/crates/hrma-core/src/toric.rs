//! Toric Cauchy data: moment polytopes, Guillemin potentials, the
//! Kähler ↔ symplectic Legendre dictionary, the convex lifespan, and the
//! evolving gap set `A_s` with monotonicity/continuity diagnostics.
//!
//! Supported shapes are the interval (n = 1) and the axis-aligned rectangle
//! with separable data (n = 2); every computation below reduces to
//! independent one-dimensional axis problems.

pub mod config;

use crate::convex::{
    conjugate, FlatPiece, IntervalUnion, PLConvexFunction, RawGap, SampledFunction, TangencyFns,
};
use crate::numeric::{bisect, golden_min, linspace, Polynomial};
use crate::{BoundaryMode, Error, Result};

/// One half-space constraint `ℓ(y) = ⟨y, normal⟩ − offset ≥ 0`.
#[derive(Debug, Clone)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Facet {
    pub fn value(&self, y: &[f64]) -> f64 {
        let dot: f64 = self.normal.iter().zip(y).map(|(n, v)| n * v).sum();
        dot - self.offset
    }
}

/// A moment polytope: an interval in dimension 1, an axis-aligned rectangle
/// in dimension 2.
#[derive(Debug, Clone)]
pub struct Polytope {
    facets: Vec<Facet>,
    dim: usize,
    intervals: Vec<(f64, f64)>,
}

impl Polytope {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Polytope {
            facets: vec![
                Facet {
                    normal: vec![1.0],
                    offset: lo,
                },
                Facet {
                    normal: vec![-1.0],
                    offset: -hi,
                },
            ],
            dim: 1,
            intervals: vec![(lo, hi)],
        }
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Self {
        Polytope {
            facets: vec![
                Facet {
                    normal: vec![1.0, 0.0],
                    offset: x.0,
                },
                Facet {
                    normal: vec![-1.0, 0.0],
                    offset: -x.1,
                },
                Facet {
                    normal: vec![0.0, 1.0],
                    offset: y.0,
                },
                Facet {
                    normal: vec![0.0, -1.0],
                    offset: -y.1,
                },
            ],
            dim: 2,
            intervals: vec![x, y],
        }
    }

    /// Builds an interval polytope from two opposing 1-D facets with
    /// arbitrary (nonzero, opposite-sign) normals.
    pub fn from_facets_1d(facets: Vec<Facet>) -> Result<Self> {
        if facets.len() != 2 || facets.iter().any(|f| f.normal.len() != 1) {
            return Err(Error::InvalidParameter(
                "dimension 1 needs exactly two scalar facets".into(),
            ));
        }
        let (f0, f1) = (&facets[0], &facets[1]);
        if f0.normal[0] == 0.0 || f1.normal[0] == 0.0 || f0.normal[0].signum() == f1.normal[0].signum()
        {
            return Err(Error::InvalidParameter(
                "interval facets need opposite-sign normals".into(),
            ));
        }
        let r0 = f0.offset / f0.normal[0];
        let r1 = f1.offset / f1.normal[0];
        let (lo, hi) = if r0 < r1 { (r0, r1) } else { (r1, r0) };
        if !(lo < hi) {
            return Err(Error::InvalidParameter(
                "interval polytope has empty interior".into(),
            ));
        }
        Ok(Polytope {
            facets,
            dim: 1,
            intervals: vec![(lo, hi)],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn axis_interval(&self, axis: usize) -> (f64, f64) {
        self.intervals[axis]
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        let scale: f64 = self
            .intervals
            .iter()
            .map(|(a, b)| (b - a).abs())
            .fold(1.0, f64::max);
        self.facets.iter().all(|f| f.value(y) >= -1e-12 * scale)
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self.dim {
            1 => {
                let (lo, hi) = self.intervals[0];
                vec![vec![lo], vec![hi]]
            }
            _ => {
                let (x, y) = (self.intervals[0], self.intervals[1]);
                vec![
                    vec![x.0, y.0],
                    vec![x.0, y.1],
                    vec![x.1, y.0],
                    vec![x.1, y.1],
                ]
            }
        }
    }
}

/// Guillemin potential `u_G(y) = Σ_k ℓ_k(y) log ℓ_k(y)`, extended by
/// `0·log 0 = 0` to the boundary. Errors when `y` lies outside the closed
/// polytope.
pub fn guillemin_potential(p: &Polytope, y: &[f64]) -> Result<f64> {
    if y.len() != p.dim() {
        return Err(Error::InvalidParameter(format!(
            "point dimension {} does not match polytope dimension {}",
            y.len(),
            p.dim()
        )));
    }
    if !p.contains(y) {
        return Err(Error::InvalidParameter(format!(
            "point {y:?} lies outside the closed polytope"
        )));
    }
    let mut sum = 0.0;
    for f in p.facets() {
        let l = f.value(y);
        if l > 0.0 {
            sum += l * l.ln();
        }
    }
    Ok(sum)
}

/// One axis of separable Cauchy data on an interval `[lo, hi]`:
/// `u₀ = u_G + F` with `F` polynomial, and a polynomial velocity `u̇₀`.
#[derive(Debug, Clone)]
pub struct AxisProblem {
    lo: f64,
    hi: f64,
    scale_lo: f64,
    scale_hi: f64,
    smooth: Polynomial,
    velocity: Polynomial,
    velocity_d1: Polynomial,
    velocity_d2: Polynomial,
    smooth_d1: Polynomial,
    smooth_d2: Polynomial,
}

impl AxisProblem {
    pub fn new(lo: f64, hi: f64, smooth: Polynomial, velocity: Polynomial) -> Result<Self> {
        Self::with_scales(lo, hi, 1.0, 1.0, smooth, velocity)
    }

    pub fn with_scales(
        lo: f64,
        hi: f64,
        scale_lo: f64,
        scale_hi: f64,
        smooth: Polynomial,
        velocity: Polynomial,
    ) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "axis interval [{lo}, {hi}] has empty interior"
            )));
        }
        if !(scale_lo > 0.0 && scale_hi > 0.0) {
            return Err(Error::InvalidParameter(
                "facet scales must be positive".into(),
            ));
        }
        let velocity_d1 = velocity.derivative();
        let velocity_d2 = velocity_d1.derivative();
        let smooth_d1 = smooth.derivative();
        let smooth_d2 = smooth_d1.derivative();
        Ok(AxisProblem {
            lo,
            hi,
            scale_lo,
            scale_hi,
            smooth,
            velocity,
            velocity_d1,
            velocity_d2,
            smooth_d1,
            smooth_d2,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `u₀(y) = ℓ₁ log ℓ₁ + ℓ₂ log ℓ₂ + F(y)` with `ℓ₁ = c₁(y − lo)`,
    /// `ℓ₂ = c₂(hi − y)`; continuous up to the boundary.
    pub fn u0(&self, y: f64) -> f64 {
        let l1 = self.scale_lo * (y - self.lo);
        let l2 = self.scale_hi * (self.hi - y);
        let t1 = if l1 > 0.0 { l1 * l1.ln() } else { 0.0 };
        let t2 = if l2 > 0.0 { l2 * l2.ln() } else { 0.0 };
        t1 + t2 + self.smooth.eval(y)
    }

    pub fn u0_d1(&self, y: f64) -> f64 {
        let l1 = self.scale_lo * (y - self.lo);
        let l2 = self.scale_hi * (self.hi - y);
        self.scale_lo * (l1.ln() + 1.0) - self.scale_hi * (l2.ln() + 1.0) + self.smooth_d1.eval(y)
    }

    pub fn u0_d2(&self, y: f64) -> f64 {
        self.scale_lo / (y - self.lo) + self.scale_hi / (self.hi - y) + self.smooth_d2.eval(y)
    }

    pub fn udot0(&self, y: f64) -> f64 {
        self.velocity.eval(y)
    }

    pub fn udot0_d1(&self, y: f64) -> f64 {
        self.velocity_d1.eval(y)
    }

    pub fn udot0_d2(&self, y: f64) -> f64 {
        self.velocity_d2.eval(y)
    }

    pub fn us(&self, s: f64, y: f64) -> f64 {
        self.u0(y) + s * self.udot0(y)
    }

    pub fn us_d1(&self, s: f64, y: f64) -> f64 {
        self.u0_d1(y) + s * self.udot0_d1(y)
    }

    pub fn us_d2(&self, s: f64, y: f64) -> f64 {
        self.u0_d2(y) + s * self.udot0_d2(y)
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.velocity.max_abs_on(self.lo, self.hi)
    }

    pub fn velocity(&self) -> &Polynomial {
        &self.velocity
    }

    /// `n` interior nodes with boundary standoff equal to the grid spacing.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        let h = self.width() / (n as f64 + 1.0);
        linspace(self.lo + h, self.hi - h, n)
    }

    pub fn closed_grid(&self, n: usize) -> Vec<f64> {
        linspace(self.lo, self.hi, n)
    }
}

/// An envelope bridge of `u_s` along one axis: the envelope is affine with
/// slope `slope` exactly on `[a, b]`, which is one component of `A_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatComponent {
    pub a: f64,
    pub b: f64,
    pub slope: f64,
}

impl From<FlatPiece> for FlatComponent {
    fn from(p: FlatPiece) -> Self {
        FlatComponent {
            a: p.a,
            b: p.b,
            slope: p.slope,
        }
    }
}

/// Locates the components of `{f ≠ f**}` for an analytic `f` by seeding from
/// the concavity regions `{f'' < 0}` (scanned on `scan_grid`, roots refined by
/// bisection) and then solving the double-tangency system for each seed.
/// This is exact down to the refinement tolerance and, unlike a value-gap
/// scan, detects components as soon as any concavity exists.
fn analytic_components(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    edge_standoff: f64,
    scan_grid: &[f64],
    merge_gap: f64,
) -> Vec<FlatComponent> {
    let mut boundaries: Vec<f64> = Vec::new();
    let mut signs: Vec<bool> = Vec::new(); // true = concave (d2f < 0) on the cell after boundary
    let first_neg = d2f(scan_grid[0]) < 0.0;
    for w in scan_grid.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let (s0, s1) = (d2f(x0) < 0.0, d2f(x1) < 0.0);
        if s0 != s1 {
            let root = bisect(d2f, x0, x1, 1e-14 * (hi - lo));
            boundaries.push(root);
            signs.push(s1);
        }
    }

    // assemble concavity intervals (c, d)
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = if first_neg { Some(lo) } else { None };
    for (i, &b) in boundaries.iter().enumerate() {
        if signs[i] {
            open = Some(b);
        } else if let Some(c) = open.take() {
            seeds.push((c, b));
        }
    }
    if let Some(c) = open {
        seeds.push((c, hi));
    }
    if seeds.is_empty() {
        return vec![];
    }

    let search_lo = lo + edge_standoff;
    let search_hi = hi - edge_standoff;
    let raws: Vec<RawGap> = seeds
        .iter()
        .enumerate()
        .map(|(k, &(c, d))| RawGap {
            core_lo: c.max(search_lo),
            core_hi: d.min(search_hi),
            left_limit: if k == 0 { search_lo } else { seeds[k - 1].1 },
            right_limit: if k + 1 == seeds.len() {
                search_hi
            } else {
                seeds[k + 1].0
            },
        })
        .collect();

    let fns = TangencyFns { f, df };
    crate::convex::refine_and_merge(&fns, raws, merge_gap, 1e-10)
        .into_iter()
        .map(FlatComponent::from)
        .collect()
}

/// `A_s` components along one axis, exact to the tangency tolerance.
pub fn axis_components(axis: &AxisProblem, s: f64, scan_nodes: usize) -> Vec<FlatComponent> {
    let (lo, hi) = axis.interval();
    let grid = axis.interior_grid(scan_nodes.max(64));
    let f = |y: f64| axis.us(s, y);
    let df = |y: f64| axis.us_d1(s, y);
    let d2f = |y: f64| axis.us_d2(s, y);
    let merge_gap = axis.width() / (scan_nodes.max(64) as f64 + 1.0);
    // the Guillemin log term blows up at the boundary, so tangency contacts
    // are always interior; keep the search just inside
    let standoff = axis.width() * 1e-13;
    analytic_components(&f, &df, &d2f, lo, hi, standoff, &grid, merge_gap)
}

/// Components of `{u̇₀ ≠ (u̇₀)**}` along one axis: the numerical `A_∞`.
/// Polynomial velocities are finite on the closed interval, so contacts may
/// pin at the boundary (the envelope of a concave velocity is the full chord).
pub fn velocity_envelope_components(axis: &AxisProblem, scan_nodes: usize) -> Vec<FlatComponent> {
    let (lo, hi) = axis.interval();
    let grid = axis.closed_grid(scan_nodes.max(64));
    let f = |y: f64| axis.udot0(y);
    let df = |y: f64| axis.udot0_d1(y);
    let d2f = |y: f64| axis.udot0_d2(y);
    let merge_gap = axis.width() / (scan_nodes.max(64) as f64 + 1.0);
    analytic_components(&f, &df, &d2f, lo, hi, 0.0, &grid, merge_gap)
}

/// Toric Cauchy data: a supported polytope together with per-axis symplectic
/// potentials `u₀ = u_G + F` and polynomial velocities. In dimension 2 the
/// data is separable by construction.
#[derive(Debug, Clone)]
pub struct ToricCauchyData {
    polytope: Polytope,
    axes: Vec<AxisProblem>,
}

impl ToricCauchyData {
    /// Round sphere data: `P = [−1, 1]`, `u₀ = u_G`, `u̇₀(y) = −y²`.
    pub fn fubini_study() -> Self {
        let polytope = Polytope::interval(-1.0, 1.0);
        let axis = AxisProblem::new(
            -1.0,
            1.0,
            Polynomial::zero(),
            Polynomial::new(vec![0.0, 0.0, -1.0]),
        )
        .unwrap();
        ToricCauchyData {
            polytope,
            axes: vec![axis],
        }
    }

    /// Product data on the square `[−1, 1]²` with `u̇₀(y) = −y₁²`: the
    /// velocity is strictly concave in the first coordinate only, so `A_s`
    /// meets the facets `{y₂ = ±1}` once non-empty.
    pub fn p1xp1() -> Self {
        let polytope = Polytope::rectangle((-1.0, 1.0), (-1.0, 1.0));
        let axis1 = AxisProblem::new(
            -1.0,
            1.0,
            Polynomial::zero(),
            Polynomial::new(vec![0.0, 0.0, -1.0]),
        )
        .unwrap();
        let axis2 =
            AxisProblem::new(-1.0, 1.0, Polynomial::zero(), Polynomial::new(vec![0.0])).unwrap();
        ToricCauchyData {
            polytope,
            axes: vec![axis1, axis2],
        }
    }

    /// 1-D data on `[lo, hi]` with `u₀ = u_G + F` and velocity `u̇₀`.
    pub fn interval(lo: f64, hi: f64, smooth: Polynomial, velocity: Polynomial) -> Result<Self> {
        let axis = AxisProblem::new(lo, hi, smooth, velocity)?;
        Ok(ToricCauchyData {
            polytope: Polytope::interval(lo, hi),
            axes: vec![axis],
        })
    }

    pub(crate) fn from_parts(polytope: Polytope, axes: Vec<AxisProblem>) -> Self {
        ToricCauchyData { polytope, axes }
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        config::parse(text)
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn axes(&self) -> &[AxisProblem] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &AxisProblem {
        &self.axes[i]
    }

    /// `max_P |u̇₀|`; for separable 2-D data the per-axis maxima add, which
    /// upper-bounds the true maximum.
    pub fn max_abs_velocity(&self) -> f64 {
        self.axes.iter().map(|a| a.max_abs_velocity()).sum()
    }

    fn require_dim1(&self, what: &str) -> Result<&AxisProblem> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter(format!(
                "{what} requires 1-dimensional data (got dimension {})",
                self.dim()
            )));
        }
        Ok(&self.axes[0])
    }
}

/// Kähler-side Cauchy data transported to the moment polytope:
/// `u₀ = ψ₀*` and `u̇₀ = −ψ̇₀ ∘ (∇ψ₀)⁻¹`, both sampled on a moment grid
/// strictly inside the closure of the slope range of `ψ₀`.
#[derive(Debug, Clone)]
pub struct SampledCauchyPair {
    pub u0: SampledFunction,
    pub udot0: SampledFunction,
}

/// Local 3-point quadratic interpolation through `(xs[j-1..=j+1], ys[...])`,
/// falling back to the linear interpolant at the ends.
fn quad_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let i = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    if i == 0 {
        return ys[0];
    }
    if i == n {
        return ys[n - 1];
    }
    let j = if i == 1 {
        1
    } else if i == n - 1 {
        n - 2
    } else {
        // center on the nearer node
        if (x - xs[i - 1]).abs() < (xs[i] - x).abs() {
            i - 1
        } else {
            i
        }
    };
    let (x0, x1, x2) = (xs[j - 1], xs[j], xs[j + 1]);
    let (y0, y1, y2) = (ys[j - 1], ys[j], ys[j + 1]);
    let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    y0 * l0 + y1 * l1 + y2 * l2
}

/// Transports sampled Kähler Cauchy data `(ψ₀, ψ̇₀)` to the symplectic side.
///
/// `ψ₀` must be strictly convex on its grid (checked through its secant
/// slopes); the moment grid is the slope range with a one-spacing standoff.
/// The slope map is inverted by monotone local interpolation, and
/// `u̇₀(y) = −ψ̇₀(x(y))`.
pub fn cauchy_from_kahler(
    psi0: &SampledFunction,
    psidot0: &SampledFunction,
) -> Result<SampledCauchyPair> {
    let xs = psi0.nodes();
    let vs = psi0.values();
    let n = xs.len();
    let mut slopes = Vec::with_capacity(n - 1);
    for i in 1..n {
        let m = (vs[i] - vs[i - 1]) / (xs[i] - xs[i - 1]);
        if let Some(&prev) = slopes.last() {
            if m <= prev {
                return Err(Error::NotConvex { index: i });
            }
        }
        slopes.push(m);
    }
    let (m_lo, m_hi) = (slopes[0], slopes[n - 2]);
    if !(m_hi - m_lo > 1e-12 * (1.0 + m_lo.abs().max(m_hi.abs()))) {
        return Err(Error::DegenerateSlopeRange { lo: m_lo, hi: m_hi });
    }

    let n_out = n;
    let h = (m_hi - m_lo) / (n_out as f64 + 1.0);
    let moment_grid = linspace(m_lo + h, m_hi - h, n_out);

    // u₀ = ψ₀* on the moment grid
    let psi0_pl = PLConvexFunction::new(xs.to_vec(), vs.to_vec(), psi0.boundary_mode())?;
    let u0 = conjugate(&psi0_pl, &moment_grid)?;

    // invert the slope map using node-centered slopes
    let mut centered = Vec::with_capacity(n);
    centered.push(slopes[0]);
    for i in 1..n - 1 {
        centered.push(0.5 * (slopes[i - 1] + slopes[i]));
    }
    centered.push(slopes[n - 2]);

    let udot_vals: Vec<f64> = moment_grid
        .iter()
        .map(|&y| {
            let x = quad_interp(&centered, xs, y);
            let pd = quad_interp(psidot0.nodes(), psidot0.values(), x);
            -pd
        })
        .collect();

    Ok(SampledCauchyPair {
        u0: u0.to_sampled(),
        udot0: SampledFunction::new(moment_grid, udot_vals, BoundaryMode::Finite)?,
    })
}

/// Samples `u_s = u₀ + s·u̇₀` on a grid strictly inside `P`. The nearest node
/// must keep a standoff of at least one grid spacing from the boundary, since
/// the Guillemin derivative diverges there.
pub fn u_s(data: &ToricCauchyData, s: f64, grid: &[f64]) -> Result<SampledFunction> {
    let axis = data.require_dim1("u_s sampling")?;
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("s must be >= 0, got {s}")));
    }
    if grid.len() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: grid.len(),
        });
    }
    let (lo, hi) = axis.interval();
    let h_first = grid[1] - grid[0];
    let h_last = grid[grid.len() - 1] - grid[grid.len() - 2];
    if grid[0] - lo < 0.999 * h_first || hi - grid[grid.len() - 1] < 0.999 * h_last {
        return Err(Error::InvalidParameter(
            "grid must keep a one-spacing standoff from the polytope boundary".into(),
        ));
    }
    SampledFunction::sample(grid, BoundaryMode::Finite, |y| axis.us(s, y))
}

/// The convex lifespan and where convexity first fails.
#[derive(Debug, Clone, PartialEq)]
pub struct LifespanResult {
    /// `T_cvx`, or `f64::INFINITY` when the velocity is convex.
    pub t_cvx: f64,
    /// Point of `P` realizing the infimum (interval midpoint on trivial axes).
    pub argmin: Vec<f64>,
}

impl LifespanResult {
    pub fn is_infinite(&self) -> bool {
        self.t_cvx == f64::INFINITY
    }
}

fn axis_lifespan(axis: &AxisProblem, grid_nodes: usize) -> (f64, f64) {
    let grid = axis.interior_grid(grid_nodes.max(64));
    let ratio = |y: f64| {
        let dd_v = axis.udot0_d2(y);
        if dd_v < 0.0 {
            axis.u0_d2(y) / (-dd_v)
        } else {
            f64::INFINITY
        }
    };
    let mut best = f64::INFINITY;
    let mut best_i = 0usize;
    for (i, &y) in grid.iter().enumerate() {
        let r = ratio(y);
        if r < best {
            best = r;
            best_i = i;
        }
    }
    let mid = 0.5 * (axis.interval().0 + axis.interval().1);
    if best == f64::INFINITY {
        return (f64::INFINITY, mid);
    }
    let lo = if best_i == 0 { grid[0] } else { grid[best_i - 1] };
    let hi = if best_i + 1 == grid.len() {
        grid[grid.len() - 1]
    } else {
        grid[best_i + 1]
    };
    let argmin = golden_min(ratio, lo, hi, 1e-8);
    (ratio(argmin).min(best), argmin)
}

/// `T_cvx = inf u₀''(y) / (−u̇₀''(y))` over `{u̇₀'' < 0}`, with a
/// golden-section refinement around the grid argmin; `+∞` when the set is
/// empty (i.e. the velocity is convex). For separable data the infimum over
/// `P` is the minimum over the axes.
pub fn convex_lifespan(data: &ToricCauchyData, grid_nodes: usize) -> Result<LifespanResult> {
    let per_axis: Vec<(f64, f64)> = data
        .axes()
        .iter()
        .map(|a| axis_lifespan(a, grid_nodes))
        .collect();
    let (best_axis, &(t, _)) = per_axis
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .unwrap();
    let argmin: Vec<f64> = per_axis
        .iter()
        .enumerate()
        .map(|(i, &(_, y))| {
            if i == best_axis && t.is_finite() {
                y
            } else {
                let (lo, hi) = data.axis(i).interval();
                0.5 * (lo + hi)
            }
        })
        .collect();
    Ok(LifespanResult { t_cvx: t, argmin })
}

/// The numerical `A_s`. For n = 2 separable data the union lives along the
/// single non-trivial axis and is crossed with the full range of the other.
#[derive(Debug, Clone)]
pub struct ASet {
    /// Axis along which the gap set varies.
    pub axis: usize,
    pub components: Vec<FlatComponent>,
    /// Full range of the complementary axis for n = 2 data.
    pub cross: Option<(f64, f64)>,
}

impl ASet {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn interval_union(&self) -> IntervalUnion {
        IntervalUnion::new(self.components.iter().map(|c| (c.a, c.b)).collect())
            .expect("refined components are sorted and disjoint")
    }

    /// Distance from the closure of `A_s` to the vertex set of `P`.
    pub fn vertex_distance(&self, p: &Polytope) -> f64 {
        if self.components.is_empty() {
            return f64::INFINITY;
        }
        let union = self.interval_union();
        let mut best = f64::INFINITY;
        for v in p.vertices() {
            let dx = union.distance_to(v[self.axis]);
            let dy = match (self.cross, p.dim()) {
                (Some((c, d)), 2) => {
                    let other = v[1 - self.axis];
                    if other < c {
                        c - other
                    } else if other > d {
                        other - d
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            best = best.min((dx * dx + dy * dy).sqrt());
        }
        best
    }

    /// Whether the closure of `A_s` meets the facets orthogonal to the
    /// trivial axis (always true for non-empty separable data, where the
    /// cross factor spans the full complementary interval).
    pub fn touches_cross_facets(&self) -> bool {
        !self.components.is_empty() && self.cross.is_some()
    }
}

/// Computes `A_s` as the gap set of `u_s` against its lower convex envelope,
/// with endpoints from the double-tangency refinement. `grid_nodes` controls
/// the concavity scan resolution.
pub fn a_set(data: &ToricCauchyData, s: f64, grid_nodes: usize) -> Result<ASet> {
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("s must be >= 0, got {s}")));
    }
    let per_axis: Vec<Vec<FlatComponent>> = data
        .axes()
        .iter()
        .map(|a| axis_components(a, s, grid_nodes))
        .collect();
    let nonempty: Vec<usize> = (0..per_axis.len())
        .filter(|&i| !per_axis[i].is_empty())
        .collect();
    if nonempty.len() > 1 {
        return Err(Error::InvalidParameter(
            "separable data must develop gaps along a single axis".into(),
        ));
    }
    // default to the axis with a concave velocity region so empty results
    // still carry a stable orientation
    let axis = nonempty.first().copied().unwrap_or_else(|| {
        data.axes()
            .iter()
            .position(|a| {
                let g = a.interior_grid(257);
                g.iter().any(|&y| a.udot0_d2(y) < 0.0)
            })
            .unwrap_or(0)
    });
    let cross = if data.dim() == 2 {
        Some(data.axis(1 - axis).interval())
    } else {
        None
    };
    Ok(ASet {
        axis,
        components: per_axis[axis].clone(),
        cross,
    })
}

/// Monotonicity/continuity diagnostics for the map `s ↦ A_s`.
#[derive(Debug, Clone)]
pub struct ASetDiagnostics {
    /// `closure(A_{s1}) ∖ ∂P ⊂ int A_{s2}`, checked componentwise with a
    /// margin at least the endpoint-refinement tolerance.
    pub nested: bool,
    /// Exact Hausdorff distance between the two unions.
    pub hausdorff: f64,
    /// The asymptotic gap set `A_∞ = {u̇₀ ≠ (u̇₀)**}`.
    pub a_inf: IntervalUnion,
    /// Hausdorff distance from `A_{s2}` to `A_∞`.
    pub hausdorff_s2_to_a_inf: f64,
}

/// Compares `A_{s1}` and `A_{s2}` for `0 < s1 < s2` and reports nesting,
/// Hausdorff distance, and the distance of the later set to `A_∞`.
pub fn a_set_diagnostics(
    data: &ToricCauchyData,
    s1: f64,
    s2: f64,
    grid_nodes: usize,
) -> Result<ASetDiagnostics> {
    if !(0.0 < s1 && s1 < s2) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < s1 < s2, got s1 = {s1}, s2 = {s2}"
        )));
    }
    let a1 = a_set(data, s1, grid_nodes)?;
    let a2 = a_set(data, s2, grid_nodes)?;
    let axis = if a1.is_empty() { a2.axis } else { a1.axis };
    let u1 = a1.interval_union();
    let u2 = a2.interval_union();
    let domain = data.axis(axis).interval();
    let nested = u1.nests_within(&u2, 1e-9, domain, 1e-9);
    let hausdorff = u1.hausdorff_distance(&u2);
    let a_inf = IntervalUnion::new(
        velocity_envelope_components(data.axis(axis), grid_nodes)
            .into_iter()
            .map(|c| (c.a, c.b))
            .collect(),
    )?;
    let hausdorff_s2_to_a_inf = u2.hausdorff_distance(&a_inf);
    Ok(ASetDiagnostics {
        nested,
        hausdorff,
        a_inf,
        hausdorff_s2_to_a_inf,
    })
}

/// Exact slice geometry of the potential at time `s`: the refined envelope
/// bridges plus analytic branch inversion, giving machine-accurate values of
/// `ψ_s(x) = sup_y (xy − u_s(y))` and of `∇ψ_s` off the kinks.
#[derive(Debug, Clone)]
pub struct SliceGeometry {
    s: f64,
    axis: AxisProblem,
    components: Vec<FlatComponent>,
}

impl SliceGeometry {
    pub fn new(data: &ToricCauchyData, s: f64, scan_nodes: usize) -> Result<Self> {
        let axis = data.require_dim1("slice geometry")?.clone();
        Self::from_axis(axis, s, scan_nodes)
    }

    /// Slice geometry of a single axis problem (used per-axis on separable
    /// data).
    pub fn from_axis(axis: AxisProblem, s: f64, scan_nodes: usize) -> Result<Self> {
        if s < 0.0 {
            return Err(Error::InvalidParameter(format!("s must be >= 0, got {s}")));
        }
        let components = axis_components(&axis, s, scan_nodes);
        Ok(SliceGeometry {
            s,
            axis,
            components,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn components(&self) -> &[FlatComponent] {
        &self.components
    }

    /// Distance from `x` to the nearest kink slope (`+∞` when smooth).
    pub fn kink_distance(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| (x - c.slope).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `∇ψ_s(x) = (∇u_s**)⁻¹(x)`: inverts the envelope slope on the branch
    /// whose slope range brackets `x`. At a kink slope the left contact point
    /// is returned; use [`Self::kink_distance`] to detect that case.
    pub fn grad(&self, x: f64) -> f64 {
        let (lo, hi) = self.axis.interval();
        let w = self.axis.width();
        // standoff small enough that the log-divergent slope exceeds |x|
        let eps = w * (-(x.abs() + 10.0)).exp().min(1e-12);
        let mut b_lo = lo + eps;
        let mut b_hi = hi - eps;
        for c in &self.components {
            if x < c.slope {
                b_hi = b_hi.min(c.a);
            } else {
                b_lo = b_lo.max(c.b);
            }
        }
        if b_lo >= b_hi {
            // x equals a kink slope up to rounding; both contacts support
            return b_hi;
        }
        let s = self.s;
        bisect(|y| self.axis.us_d1(s, y) - x, b_lo, b_hi, 1e-14 * w)
    }

    /// `ψ_s(x) = x·y* − u_s(y*)` with `y* = ∇ψ_s(x)`; exact up to the branch
    /// inversion tolerance, including at kinks (where both contacts tie).
    pub fn psi(&self, x: f64) -> f64 {
        let y = self.grad(x);
        x * y - self.axis.us(self.s, y)
    }

    /// Envelope slope at `y`: the bridge slope inside a component, `u_s'`
    /// outside.
    pub fn envelope_slope(&self, y: f64) -> f64 {
        for c in &self.components {
            if c.a <= y && y <= c.b {
                return c.slope;
            }
        }
        self.axis.us_d1(self.s, y)
    }

    /// Envelope value at `y` (bridge-affine inside components).
    pub fn envelope_value(&self, y: f64) -> f64 {
        for c in &self.components {
            if c.a <= y && y <= c.b {
                return self.axis.us(self.s, c.a) + c.slope * (y - c.a);
            }
        }
        self.axis.us(self.s, y)
    }
}
