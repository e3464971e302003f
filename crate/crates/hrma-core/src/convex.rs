//! Discrete Legendre-Fenchel conjugation, lower convex envelopes
//! (biconjugates), subdifferentials and gap sets of piecewise-linear convex
//! functions of one variable.
//!
//! Everything here is exact on piecewise-linear inputs: conjugation is a
//! monotone argmax sweep over breakpoints, envelopes come from a monotone
//! chain over the sampled graph, and gap-set endpoints are refined by
//! bisection on the double-tangency system rather than trusted at grid
//! resolution.

use crate::numeric::bisect;
use crate::{Error, Result};

/// How a function behaves off its sampled domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// The samples are a restriction of a function defined beyond the domain.
    Finite,
    /// The function is extended by `+∞` outside `[domain_lo, domain_hi]`;
    /// boundary subdifferentials then carry `∓∞` sentinels.
    PlusInfinityOutside,
}

fn validate_grid(nodes: &[f64], values: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: nodes.len(),
        });
    }
    if nodes.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} nodes but {} values",
            nodes.len(),
            values.len()
        )));
    }
    for i in 0..nodes.len() {
        if !nodes[i].is_finite() || !values[i].is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        if i > 0 && nodes[i] <= nodes[i - 1] {
            return Err(Error::NonIncreasingGrid { index: i });
        }
    }
    Ok(())
}

/// Piecewise-linear interpolation on a sorted node set. `x` must lie within
/// the node range.
fn pl_eval(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    match nodes.binary_search_by(|n| n.total_cmp(&x)) {
        Ok(i) => values[i],
        Err(i) => {
            if i == 0 {
                values[0]
            } else if i == nodes.len() {
                values[nodes.len() - 1]
            } else {
                let t = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }
}

/// A function known through samples on a strictly increasing node set.
/// Carrier for `u_s = u₀ + s·u̇₀` and for sampled Cauchy data.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    boundary_mode: BoundaryMode,
}

impl SampledFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, boundary_mode: BoundaryMode) -> Result<Self> {
        validate_grid(&nodes, &values)?;
        Ok(SampledFunction {
            nodes,
            values,
            boundary_mode,
        })
    }

    /// Sample `f` on `grid`.
    pub fn sample(grid: &[f64], boundary_mode: BoundaryMode, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.iter().map(|&y| f(y)).collect();
        SampledFunction::new(grid.to_vec(), values, boundary_mode)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain_lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn domain_hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Linear interpolation between nodes; errors outside the domain.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < self.domain_lo() || x > self.domain_hi() {
            return Err(Error::OutOfDomain {
                x,
                lo: self.domain_lo(),
                hi: self.domain_hi(),
            });
        }
        Ok(pl_eval(&self.nodes, &self.values, x))
    }

    pub fn value_range(&self) -> (f64, f64) {
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// A convex piecewise-linear function: strictly increasing breakpoints with
/// non-decreasing secant slopes. Carrier for envelopes `u_s**` and for the
/// potential slices `ψ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLConvexFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    boundary_mode: BoundaryMode,
}

impl PLConvexFunction {
    /// Validating constructor: rejects any strict decrease of secant slopes.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, boundary_mode: BoundaryMode) -> Result<Self> {
        validate_grid(&breakpoints, &values)?;
        for i in 2..breakpoints.len() {
            let left = (values[i - 1] - values[i - 2]) * (breakpoints[i] - breakpoints[i - 1]);
            let right = (values[i] - values[i - 1]) * (breakpoints[i - 1] - breakpoints[i - 2]);
            if left > right {
                return Err(Error::NotConvex { index: i - 1 });
            }
        }
        Ok(PLConvexFunction {
            breakpoints,
            values,
            boundary_mode,
        })
    }

    /// For outputs of the algorithms in this module, which are convex by
    /// construction; skips the O(n) validation.
    pub(crate) fn from_parts_unchecked(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        boundary_mode: BoundaryMode,
    ) -> Self {
        debug_assert!(breakpoints.len() >= 2 && breakpoints.len() == values.len());
        PLConvexFunction {
            breakpoints,
            values,
            boundary_mode,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain_lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn domain_hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Slope of segment `i`, joining breakpoints `i` and `i + 1`.
    pub fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    /// All segment slopes, non-decreasing.
    pub fn slopes(&self) -> Vec<f64> {
        (0..self.len() - 1).map(|i| self.slope(i)).collect()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < self.domain_lo() || x > self.domain_hi() {
            return Err(Error::OutOfDomain {
                x,
                lo: self.domain_lo(),
                hi: self.domain_hi(),
            });
        }
        Ok(pl_eval(&self.breakpoints, &self.values, x))
    }

    pub fn to_sampled(&self) -> SampledFunction {
        SampledFunction {
            nodes: self.breakpoints.clone(),
            values: self.values.clone(),
            boundary_mode: self.boundary_mode,
        }
    }
}

/// The interval `[left derivative, right derivative]` of supporting slopes at
/// a point. `lo == hi` exactly when the function is differentiable there.
/// Boundary sentinels are the IEEE infinities, never large finite stand-ins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdifferentialInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubdifferentialInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// A finite disjoint union of open intervals, sorted left to right.
/// Numerical carrier for the gap set `A_s = {y : u_s(y) ≠ u_s**(y)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    components: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(a, b)) in components.iter().enumerate() {
            if !(a < b) {
                return Err(Error::InvalidParameter(format!(
                    "component {i} has non-positive length [{a}, {b}]"
                )));
            }
            if i > 0 && components[i - 1].1 >= a {
                return Err(Error::InvalidParameter(format!(
                    "components {} and {i} overlap or touch",
                    i - 1
                )));
            }
        }
        Ok(IntervalUnion { components })
    }

    pub fn empty() -> Self {
        IntervalUnion { components: vec![] }
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn count(&self) -> usize {
        self.components.len()
    }

    /// Total length of the union.
    pub fn measure(&self) -> f64 {
        self.components.iter().map(|(a, b)| b - a).sum()
    }

    /// Membership in the open union.
    pub fn contains(&self, y: f64) -> bool {
        self.components.iter().any(|&(a, b)| a < y && y < b)
    }

    /// Distance from `y` to the closure of the union; `+∞` when empty.
    pub fn distance_to(&self, y: f64) -> f64 {
        if self.components.is_empty() {
            return f64::INFINITY;
        }
        self.components
            .iter()
            .map(|&(a, b)| {
                if y < a {
                    a - y
                } else if y > b {
                    y - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact Hausdorff distance between the closures, computed from sorted
    /// endpoints. Empty vs. empty is 0; empty vs. non-empty is `+∞`.
    pub fn hausdorff_distance(&self, other: &IntervalUnion) -> f64 {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => return 0.0,
            (true, false) | (false, true) => return f64::INFINITY,
            _ => {}
        }
        let directed = |from: &IntervalUnion, to: &IntervalUnion| -> f64 {
            let mut worst: f64 = 0.0;
            for &(a, b) in &from.components {
                worst = worst.max(to.distance_to(a)).max(to.distance_to(b));
            }
            // d(·, to) peaks at midpoints of to's gaps; check those that lie
            // inside `from`.
            for w in to.components.windows(2) {
                let mid = 0.5 * (w[0].1 + w[1].0);
                if from.contains(mid) {
                    worst = worst.max(to.distance_to(mid));
                }
            }
            worst
        };
        directed(self, other).max(directed(other, self))
    }

    /// Checks `closure(self) ∖ ∂P ⊂ interior(other)` with a margin: every
    /// component `[a, b]` must sit inside some component `(c, d)` of `other`
    /// with `c ≤ a − margin` and `b + margin ≤ d`, except on sides that touch
    /// the domain boundary (within `boundary_tol`).
    pub fn nests_within(
        &self,
        other: &IntervalUnion,
        margin: f64,
        domain: (f64, f64),
        boundary_tol: f64,
    ) -> bool {
        'outer: for &(a, b) in &self.components {
            for &(c, d) in &other.components {
                if c < b && a < d {
                    let left_ok = a - margin >= c || a <= domain.0 + boundary_tol;
                    let right_ok = b + margin <= d || b >= domain.1 - boundary_tol;
                    if left_ok && right_ok {
                        continue 'outer;
                    }
                }
            }
            return false;
        }
        true
    }
}

/// Discrete Legendre-Fenchel conjugate `g(y) = max_x (x·y − f(x))`, the max
/// running over the breakpoints of `f`, evaluated on `query_grid`.
///
/// A single monotone sweep: because `f` is convex, the maximizing breakpoint
/// index is non-decreasing in `y`; ties resolve to the smallest maximizer.
/// With `boundary_mode = PlusInfinityOutside` the sup over all of ℝ equals the
/// sup over `[domain_lo, domain_hi]` automatically, since `f` is `+∞` beyond.
pub fn conjugate(f: &PLConvexFunction, query_grid: &[f64]) -> Result<PLConvexFunction> {
    if query_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if query_grid.len() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: query_grid.len(),
        });
    }
    for i in 1..query_grid.len() {
        if query_grid[i] <= query_grid[i - 1] {
            return Err(Error::NonIncreasingGrid { index: i });
        }
    }
    let xs = f.breakpoints();
    let vs = f.values();
    let mut j = 0usize;
    let mut out = Vec::with_capacity(query_grid.len());
    for &y in query_grid {
        while j + 1 < xs.len() && xs[j + 1] * y - vs[j + 1] > xs[j] * y - vs[j] {
            j += 1;
        }
        out.push(xs[j] * y - vs[j]);
    }
    Ok(PLConvexFunction::from_parts_unchecked(
        query_grid.to_vec(),
        out,
        BoundaryMode::Finite,
    ))
}

/// The exact conjugate of a PL convex function: a PL function whose knots are
/// the distinct segment slopes of `f` and whose segment slopes are the
/// breakpoints of `f`. Linear beyond its knot range with end slopes equal to
/// `f`'s domain endpoints.
#[derive(Debug, Clone)]
pub struct ExactDual {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of the dual below the first knot: `f.domain_lo()`.
    pub slope_lo: f64,
    /// Slope of the dual above the last knot: `f.domain_hi()`.
    pub slope_hi: f64,
}

impl ExactDual {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0] + self.slope_lo * (x - self.knots[0]);
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1] + self.slope_hi * (x - self.knots[n - 1]);
        }
        pl_eval(&self.knots, &self.values, x)
    }
}

/// Builds the exact conjugate of `f` (see [`ExactDual`]). Flat runs of equal
/// slope in `f` collapse to a single dual knot, which is exactly where the
/// dual has a kink whose subdifferential is the run's breakpoint span.
pub fn conjugate_exact(f: &PLConvexFunction) -> ExactDual {
    let xs = f.breakpoints();
    let vs = f.values();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for i in 1..xs.len() {
        let m = (vs[i] - vs[i - 1]) / (xs[i] - xs[i - 1]);
        if m > prev {
            knots.push(m);
            values.push(m * xs[i - 1] - vs[i - 1]);
            prev = m;
        }
    }
    ExactDual {
        knots,
        values,
        slope_lo: xs[0],
        slope_hi: *xs.last().unwrap(),
    }
}

/// Lower convex envelope (biconjugate) of sampled data: the maximal convex
/// function below `f` at every node, i.e. the lower boundary of the convex
/// hull of the sampled epigraph. Monotone chain, O(n); the result's
/// breakpoints are a subset of `f`'s nodes, and a convex input is returned
/// identically (collinear nodes are kept).
pub fn lower_convex_envelope(f: &SampledFunction) -> Result<PLConvexFunction> {
    let xs = f.nodes();
    let vs = f.values();
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewNodes { needed: 2, got: n });
    }
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while hull.len() >= 2 {
            let s = hull[hull.len() - 2];
            let t = hull[hull.len() - 1];
            // pop t while slope(s, t) > slope(t, i); "=" keeps collinear nodes
            if (vs[t] - vs[s]) * (xs[i] - xs[t]) > (vs[i] - vs[t]) * (xs[t] - xs[s]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let bp: Vec<f64> = hull.iter().map(|&i| xs[i]).collect();
    let bv: Vec<f64> = hull.iter().map(|&i| vs[i]).collect();
    Ok(PLConvexFunction::from_parts_unchecked(
        bp,
        bv,
        f.boundary_mode(),
    ))
}

/// Subdifferential `[left slope, right slope]` of `f` at `x`.
///
/// At `domain_lo` with `PlusInfinityOutside` the left slope is the `−∞`
/// sentinel (symmetrically `+∞` at `domain_hi`); with `Finite` the one-sided
/// slope is duplicated. A query outside the domain is an error, distinct
/// from the sentinel cases.
pub fn subdifferential(f: &PLConvexFunction, x: f64) -> Result<SubdifferentialInterval> {
    let lo = f.domain_lo();
    let hi = f.domain_hi();
    if x < lo || x > hi {
        return Err(Error::OutOfDomain { x, lo, hi });
    }
    let n = f.len();
    let inf_outside = f.boundary_mode() == BoundaryMode::PlusInfinityOutside;
    match f.breakpoints().binary_search_by(|b| b.total_cmp(&x)) {
        Ok(0) => {
            let m = f.slope(0);
            Ok(SubdifferentialInterval {
                lo: if inf_outside { f64::NEG_INFINITY } else { m },
                hi: m,
            })
        }
        Ok(i) if i == n - 1 => {
            let m = f.slope(n - 2);
            Ok(SubdifferentialInterval {
                lo: m,
                hi: if inf_outside { f64::INFINITY } else { m },
            })
        }
        Ok(i) => Ok(SubdifferentialInterval {
            lo: f.slope(i - 1),
            hi: f.slope(i),
        }),
        Err(i) => {
            // strictly between breakpoints i-1 and i
            let m = f.slope(i - 1);
            Ok(SubdifferentialInterval { lo: m, hi: m })
        }
    }
}

/// Default gap tolerance: `1e-9 × (max f − min f)`, well above the float
/// noise of the hull construction and far below genuine gaps at the grid
/// sizes in use.
pub fn default_gap_tol(f: &SampledFunction) -> f64 {
    let (lo, hi) = f.value_range();
    (1e-9 * (hi - lo)).max(1e-15)
}

// ---------------------------------------------------------------------------
// Double-tangency refinement, shared by `gap_set` (finite-difference
// derivatives) and the toric layer (analytic derivatives).

/// Value and derivative closures describing the function whose envelope
/// contacts are being refined.
pub(crate) struct TangencyFns<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub df: &'a dyn Fn(f64) -> f64,
}

/// A coarse gap bracket: `(core_lo, core_hi)` is known to lie inside the gap
/// (or inside the concavity region seeding it), while the tangency contacts
/// are searched for in `[left_limit, core_lo]` and `[core_hi, right_limit]`,
/// where the function is convex.
#[derive(Debug, Clone)]
pub(crate) struct RawGap {
    pub core_lo: f64,
    pub core_hi: f64,
    pub left_limit: f64,
    pub right_limit: f64,
}

/// A refined envelope bridge: the envelope is affine with slope `slope` on
/// `[a, b]` and touches the function at both ends (or is pinned at a domain
/// endpoint when no interior tangency exists on that side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FlatPiece {
    pub a: f64,
    pub b: f64,
    pub slope: f64,
}

/// Tangent point on a convex branch `[lo, hi]` for slope `m`: the root of
/// `df − m`, clamped to the branch (a clamp at `lo`/`hi` is a pinned contact).
fn branch_point(df: &dyn Fn(f64) -> f64, lo: f64, hi: f64, m: f64, tol: f64) -> f64 {
    if lo >= hi {
        return lo;
    }
    if df(lo) >= m {
        return lo;
    }
    if df(hi) <= m {
        return hi;
    }
    bisect(|y| df(y) - m, lo, hi, tol)
}

/// Solves the double-tangency system `f'(a) = f'(b) = (f(b) − f(a))/(b − a)`
/// by bisection on the common slope `m`: the intercept mismatch
/// `H(m) = (f(a(m)) − m·a(m)) − (f(b(m)) − m·b(m))` is strictly increasing in
/// `m` (its derivative is `b − a > 0`), with `a(m)`, `b(m)` the branch
/// tangency points. Contacts collapse to the branch limits automatically
/// when the data pins the bridge at a domain endpoint (e.g. the envelope of
/// a concave function is the full chord).
pub(crate) fn refine_tangency(fns: &TangencyFns, gap: &RawGap, tol: f64) -> FlatPiece {
    let inner_tol = (tol * 1e-2).max(1e-15);
    let eval_at = |m: f64| -> (f64, f64, f64) {
        let a = branch_point(fns.df, gap.left_limit, gap.core_lo, m, inner_tol);
        let b = branch_point(fns.df, gap.core_hi, gap.right_limit, m, inner_tol);
        let h = ((fns.f)(a) - m * a) - ((fns.f)(b) - m * b);
        (a, b, h)
    };

    // Initial slope bracket from the branch-end derivatives, then expand
    // until H changes sign across it (H < 0 left of the root, > 0 right).
    let cands = [
        (fns.df)(gap.left_limit),
        (fns.df)(gap.core_lo),
        (fns.df)(gap.core_hi),
        (fns.df)(gap.right_limit),
    ];
    let finite_min = cands.iter().cloned().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    let finite_max = cands
        .iter()
        .cloned()
        .filter(|c| c.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (finite_max - finite_min).abs().max(1.0);
    let mut m_lo = finite_min - 1e-6 * span;
    let mut m_hi = finite_max + 1e-6 * span;
    let mut step = span;
    for _ in 0..64 {
        if eval_at(m_lo).2 <= 0.0 {
            break;
        }
        m_lo -= step;
        step *= 2.0;
    }
    step = span;
    for _ in 0..64 {
        if eval_at(m_hi).2 >= 0.0 {
            break;
        }
        m_hi += step;
        step *= 2.0;
    }

    for _ in 0..100 {
        let mid = 0.5 * (m_lo + m_hi);
        let h = eval_at(mid).2;
        if h == 0.0 {
            m_lo = mid;
            m_hi = mid;
            break;
        }
        if m_hi - m_lo < 1e-16 * span.max(m_hi.abs()) {
            break;
        }
        if h < 0.0 {
            m_lo = mid;
        } else {
            m_hi = mid;
        }
    }
    let m = 0.5 * (m_lo + m_hi);
    let (a, b, _) = eval_at(m);
    FlatPiece { a, b, slope: m }
}

/// Refines a batch of raw gaps and merges components that overlap or sit
/// closer than `merge_gap` apart, re-refining merged brackets until stable.
pub(crate) fn refine_and_merge(
    fns: &TangencyFns,
    mut raws: Vec<RawGap>,
    merge_gap: f64,
    tol: f64,
) -> Vec<FlatPiece> {
    loop {
        let pieces: Vec<FlatPiece> = raws.iter().map(|g| refine_tangency(fns, g, tol)).collect();
        let mut merged_at = None;
        for i in 1..pieces.len() {
            if pieces[i].a - pieces[i - 1].b < merge_gap {
                merged_at = Some(i);
                break;
            }
        }
        match merged_at {
            None => return pieces.into_iter().filter(|p| p.b > p.a).collect(),
            Some(i) => {
                let right = raws.remove(i);
                let left = &mut raws[i - 1];
                left.core_hi = right.core_hi;
                left.right_limit = right.right_limit;
            }
        }
    }
}

/// The gap set `{y : f(y) − env(y) > gap_tol}` as a union of maximal open
/// intervals, with endpoints refined by bisection on the double-tangency
/// system to absolute tolerance `1e-10`. Derivatives are centered finite
/// differences on `f`'s nodes; components closer than one node spacing are
/// merged.
pub fn gap_set(f: &SampledFunction, env: &PLConvexFunction, gap_tol: f64) -> Result<IntervalUnion> {
    if !(gap_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gap_tol must be positive, got {gap_tol}"
        )));
    }
    let xs = f.nodes();
    let vs = f.values();
    let n = xs.len();
    let gaps: Vec<f64> = (0..n)
        .map(|i| vs[i] - pl_eval(env.breakpoints(), env.values(), xs[i]))
        .collect();

    // maximal runs of nodes exceeding the tolerance
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..n {
        if gaps[i] > gap_tol {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, n - 1));
    }
    if runs.is_empty() {
        return Ok(IntervalUnion::empty());
    }

    // centered finite-difference derivative, interpolated between nodes
    let mut deriv = vec![0.0; n];
    deriv[0] = (vs[1] - vs[0]) / (xs[1] - xs[0]);
    deriv[n - 1] = (vs[n - 1] - vs[n - 2]) / (xs[n - 1] - xs[n - 2]);
    for i in 1..n - 1 {
        deriv[i] = (vs[i + 1] - vs[i - 1]) / (xs[i + 1] - xs[i - 1]);
    }
    let nodes_owned = xs.to_vec();
    let values_owned = vs.to_vec();
    let deriv_owned = deriv;
    let fv = move |y: f64| pl_eval(&nodes_owned, &values_owned, y);
    let nodes2 = xs.to_vec();
    let dfv = move |y: f64| pl_eval(&nodes2, &deriv_owned, y);
    let fns = TangencyFns { f: &fv, df: &dfv };

    let raws: Vec<RawGap> = runs
        .iter()
        .enumerate()
        .map(|(k, &(s, e))| RawGap {
            core_lo: xs[s],
            core_hi: xs[e],
            left_limit: if k == 0 { xs[0] } else { xs[runs[k - 1].1 + 1] },
            right_limit: if k + 1 == runs.len() {
                xs[n - 1]
            } else {
                xs[runs[k + 1].0 - 1]
            },
        })
        .collect();

    let spacing = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let pieces = refine_and_merge(&fns, raws, spacing, 1e-10);
    IntervalUnion::new(pieces.into_iter().map(|p| (p.a, p.b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{linspace, SplitMix64};
    use approx::assert_relative_eq;

    fn quadratic_pl(n: usize) -> PLConvexFunction {
        let grid = linspace(-3.0, 3.0, n);
        let vals: Vec<f64> = grid.iter().map(|&x| 0.5 * x * x).collect();
        PLConvexFunction::new(grid, vals, BoundaryMode::PlusInfinityOutside).unwrap()
    }

    /// u₀ on [-1, 1]: the Guillemin potential of the interval.
    fn u0(y: f64) -> f64 {
        let a = 1.0 + y;
        let b = 1.0 - y;
        let t1 = if a > 0.0 { a * a.ln() } else { 0.0 };
        let t2 = if b > 0.0 { b * b.ln() } else { 0.0 };
        t1 + t2
    }

    /// Oracle: positive root of log((1+a)/(1-a)) = 2sa by bisection.
    fn gap_endpoint_oracle(s: f64) -> f64 {
        bisect(
            |a| ((1.0 + a) / (1.0 - a)).ln() - 2.0 * s * a,
            1e-6,
            1.0 - 1e-15,
            1e-12,
        )
    }

    #[test]
    fn conjugate_of_quadratic_is_quadratic() {
        let f = quadratic_pl(2049);
        let h = 6.0 / 2048.0;
        let grid = linspace(-2.0, 2.0, 801);
        let g = conjugate(&f, &grid).unwrap();
        let err = grid
            .iter()
            .zip(g.values())
            .map(|(&y, &v)| (v - 0.5 * y * y).abs())
            .fold(0.0, f64::max);
        assert!(err <= 3.0 * h, "sup error {err} exceeds 3h = {}", 3.0 * h);
    }

    #[test]
    fn conjugate_of_abs_is_indicator() {
        let grid = linspace(-2.0, 2.0, 1025);
        let vals: Vec<f64> = grid.iter().map(|&x| x.abs()).collect();
        let f = PLConvexFunction::new(grid, vals, BoundaryMode::Finite).unwrap();
        let ys = linspace(-1.0, 1.0, 101);
        let g = conjugate(&f, &ys).unwrap();
        for &v in g.values() {
            assert!(v.abs() <= 1e-14, "conjugate of |x| should vanish on [-1,1]");
        }
    }

    #[test]
    fn conjugate_of_interval_guillemin_matches_closed_form() {
        // (u₀)*(x) = 2 log cosh(x/2): solve y = u₀'(x) and substitute.
        let grid = linspace(-1.0, 1.0, 8193);
        let vals: Vec<f64> = grid.iter().map(|&y| u0(y)).collect();
        let f = PLConvexFunction::new(grid, vals, BoundaryMode::PlusInfinityOutside).unwrap();
        let xs = linspace(-3.0, 3.0, 101);
        let g = conjugate(&f, &xs).unwrap();
        for (&x, &v) in xs.iter().zip(g.values()) {
            let want = 2.0 * (0.5 * x).cosh().ln();
            assert!(
                (v - want).abs() <= 1e-6,
                "x = {x}: got {v}, want {want}"
            );
        }
        // normalization pinned at x = 0
        assert!(g.eval(0.0).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn conjugate_rejects_bad_grids() {
        let f = quadratic_pl(65);
        assert!(matches!(conjugate(&f, &[]), Err(Error::EmptyGrid)));
        assert!(matches!(
            conjugate(&f, &[0.0, 0.0, 1.0]),
            Err(Error::NonIncreasingGrid { index: 1 })
        ));
        assert!(matches!(
            conjugate(&f, &[1.0, 0.5]),
            Err(Error::NonIncreasingGrid { index: 1 })
        ));
    }

    #[test]
    fn envelope_of_convex_function_is_identity() {
        let grid = linspace(-2.0, 2.0, 513);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| y.powi(4)).unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        assert_eq!(env.breakpoints(), f.nodes());
        assert_eq!(env.values(), f.values());
    }

    #[test]
    fn envelope_of_negative_square_is_the_chord() {
        let grid = linspace(-1.0, 1.0, 2001);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| -y * y).unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        assert_eq!(env.breakpoints(), &[-1.0, 1.0]);
        assert_eq!(env.values(), &[-1.0, -1.0]);
        assert_relative_eq!(env.eval(0.37).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn envelope_of_u2_is_flat_on_the_tangency_interval() {
        let a2 = gap_endpoint_oracle(2.0);
        let n = 4097;
        let h = 2.0 / (n as f64 + 1.0);
        let grid = linspace(-1.0 + h, 1.0 - h, n);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| u0(y) - 2.0 * y * y)
            .unwrap();
        let env = lower_convex_envelope(&f).unwrap();

        // by symmetry the bridging segment through 0 has slope 0
        let bp = env.breakpoints();
        let seg = (0..bp.len() - 1)
            .find(|&i| bp[i] < 0.0 && bp[i + 1] > 0.0)
            .expect("no bridge over 0");
        assert!(env.slope(seg).abs() <= 1e-12);
        assert!((bp[seg] + a2).abs() <= 2.0 * h, "bridge start near -a2");
        assert!((bp[seg + 1] - a2).abs() <= 2.0 * h, "bridge end near a2");

        // independent flatness check: u_s exceeds the chord strictly inside
        let chord = env.eval(0.0).unwrap();
        for &y in linspace(-a2 + 1e-3, a2 - 1e-3, 100_000).iter() {
            assert!(u0(y) - 2.0 * y * y > chord, "u_s must exceed the chord at {y}");
        }
    }

    #[test]
    fn subdifferential_cases() {
        let f = PLConvexFunction::new(
            vec![-2.0, 0.0, 2.0],
            vec![2.0, 0.0, 2.0],
            BoundaryMode::PlusInfinityOutside,
        )
        .unwrap();
        // kink of |x| at the origin
        let s = subdifferential(&f, 0.0).unwrap();
        assert_eq!(s, SubdifferentialInterval { lo: -1.0, hi: 1.0 });
        // differentiable point
        let s = subdifferential(&f, 1.0).unwrap();
        assert_eq!(s, SubdifferentialInterval { lo: 1.0, hi: 1.0 });
        // boundary sentinels
        let s = subdifferential(&f, -2.0).unwrap();
        assert_eq!(s.lo, f64::NEG_INFINITY);
        assert_eq!(s.hi, -1.0);
        let s = subdifferential(&f, 2.0).unwrap();
        assert_eq!(s.hi, f64::INFINITY);
        // outside the domain: an error, not a sentinel
        assert!(matches!(
            subdifferential(&f, 3.0),
            Err(Error::OutOfDomain { .. })
        ));

        // finite boundary mode duplicates the one-sided slope
        let g = PLConvexFunction::new(
            vec![-2.0, 0.0, 2.0],
            vec![2.0, 0.0, 2.0],
            BoundaryMode::Finite,
        )
        .unwrap();
        let s = subdifferential(&g, -2.0).unwrap();
        assert_eq!(s, SubdifferentialInterval { lo: -1.0, hi: -1.0 });
    }

    #[test]
    fn subdifferential_at_interior_breakpoint_of_strictly_convex_pl() {
        let f = quadratic_pl(65);
        let bp = f.breakpoints()[32];
        let s = subdifferential(&f, bp).unwrap();
        assert_relative_eq!(s.lo, f.slope(31));
        assert_relative_eq!(s.hi, f.slope(32));
        assert!(s.lo < s.hi);
    }

    #[test]
    fn subdifferential_of_flat_envelope_at_zero() {
        let n = 4097;
        let h = 2.0 / (n as f64 + 1.0);
        let grid = linspace(-1.0 + h, 1.0 - h, n);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| u0(y) - 2.0 * y * y)
            .unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        let s = subdifferential(&env, 0.0).unwrap();
        assert!(s.lo.abs() <= 1e-12 && s.hi.abs() <= 1e-12);
    }

    #[test]
    fn gap_set_of_convex_function_is_empty() {
        let grid = linspace(-2.0, 2.0, 513);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| y * y).unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        let u = gap_set(&f, &env, default_gap_tol(&f)).unwrap();
        assert!(u.is_empty());
    }

    #[test]
    fn gap_set_empty_up_to_the_lifespan() {
        for &s in &[0.25, 0.5, 0.9, 1.0] {
            let n = 4097;
            let h = 2.0 / (n as f64 + 1.0);
            let grid = linspace(-1.0 + h, 1.0 - h, n);
            let f =
                SampledFunction::sample(&grid, BoundaryMode::Finite, |y| u0(y) - s * y * y).unwrap();
            let env = lower_convex_envelope(&f).unwrap();
            let u = gap_set(&f, &env, default_gap_tol(&f)).unwrap();
            assert!(u.is_empty(), "A_s should be empty at s = {s}");
        }
    }

    #[test]
    fn gap_set_at_s2_is_the_tangency_interval() {
        let a2 = gap_endpoint_oracle(2.0);
        let n = 4097;
        let h = 2.0 / (n as f64 + 1.0);
        let grid = linspace(-1.0 + h, 1.0 - h, n);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| u0(y) - 2.0 * y * y)
            .unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        let u = gap_set(&f, &env, default_gap_tol(&f)).unwrap();
        assert_eq!(u.count(), 1);
        let (a, b) = u.components()[0];
        // finite-difference derivative limits endpoint accuracy to ~1e-6 here
        assert!((a + a2).abs() <= 1e-5, "left endpoint {a} vs -{a2}");
        assert!((b - a2).abs() <= 1e-5, "right endpoint {b} vs {a2}");
    }

    #[test]
    fn gap_set_rejects_nonpositive_tolerance() {
        let grid = linspace(-1.0, 1.0, 65);
        let f = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| y * y).unwrap();
        let env = lower_convex_envelope(&f).unwrap();
        assert!(gap_set(&f, &env, 0.0).is_err());
        assert!(gap_set(&f, &env, -1.0).is_err());
    }

    // -- randomized property suites --------------------------------------

    fn random_convex_pl(rng: &mut SplitMix64, max_slope: f64) -> PLConvexFunction {
        let n = 3 + (rng.next_u64() % 30) as usize;
        let lo = rng.range(-3.0, -0.5);
        let hi = rng.range(0.5, 3.0);
        let mut bps = vec![lo];
        for _ in 0..n - 2 {
            bps.push(rng.range(lo, hi));
        }
        bps.push(hi);
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        if bps.len() < 3 {
            bps = vec![lo, 0.5 * (lo + hi), hi];
        }
        // non-decreasing slopes, integrated into values
        let k = bps.len();
        let mut slopes: Vec<f64> = (0..k - 1).map(|_| rng.range(-max_slope, max_slope)).collect();
        slopes.sort_by(f64::total_cmp);
        let mut vals = vec![rng.range(-1.0, 1.0)];
        for i in 0..k - 1 {
            let prev = vals[i];
            vals.push(prev + slopes[i] * (bps[i + 1] - bps[i]));
        }
        PLConvexFunction::new(bps, vals, BoundaryMode::PlusInfinityOutside).unwrap()
    }

    fn finest_spacing(f: &PLConvexFunction) -> f64 {
        f.breakpoints()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn involution_on_random_convex_pl() {
        let mut rng = SplitMix64::new(0x5eed_1e64);
        for _ in 0..200 {
            let f = random_convex_pl(&mut rng, 5.0);
            let h = finest_spacing(&f);
            let slopes = f.slopes();
            let (mlo, mhi) = (slopes[0] - 1.0, slopes[slopes.len() - 1] + 1.0);
            let ygrid = linspace(mlo, mhi, 4096);
            let g = conjugate(&f, &ygrid).unwrap();
            let fxx = conjugate(&g, f.breakpoints()).unwrap();
            let err = f
                .values()
                .iter()
                .zip(fxx.values())
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 10.0 * h, "involution error {err} > 10h = {}", 10.0 * h);
        }
    }

    #[test]
    fn envelope_idempotence_is_exact() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..100 {
            let grid = linspace(-1.0, 1.0, 257);
            let vals: Vec<f64> = grid.iter().map(|_| rng.range(-1.0, 1.0)).collect();
            let f = SampledFunction::new(grid, vals, BoundaryMode::Finite).unwrap();
            let e1 = lower_convex_envelope(&f).unwrap();
            let e2 = lower_convex_envelope(&e1.to_sampled()).unwrap();
            assert_eq!(e1.breakpoints(), e2.breakpoints());
            assert_eq!(e1.values(), e2.values());
        }
    }

    #[test]
    fn envelope_dominance_and_contact_off_gaps() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..50 {
            let grid = linspace(-1.0, 1.0, 129);
            let vals: Vec<f64> = grid.iter().map(|&y| y * y + rng.range(0.0, 0.3)).collect();
            let f = SampledFunction::new(grid.clone(), vals, BoundaryMode::Finite).unwrap();
            let env = lower_convex_envelope(&f).unwrap();
            let tol = default_gap_tol(&f);
            let gaps = gap_set(&f, &env, tol).unwrap();
            for (i, &y) in grid.iter().enumerate() {
                let ev = env.eval(y).unwrap();
                assert!(ev <= f.values()[i] + 1e-12, "envelope must not exceed f");
                if gaps.distance_to(y) > 2.0 * (2.0 / 128.0) {
                    assert!(
                        f.values()[i] - ev <= tol,
                        "envelope must touch f away from gaps"
                    );
                }
            }
        }
    }

    #[test]
    fn conjugation_reverses_order() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..50 {
            let f = random_convex_pl(&mut rng, 4.0);
            // g = f + nonnegative convex => f <= g
            let bump: f64 = rng.range(0.0, 2.0);
            let gvals: Vec<f64> = f
                .breakpoints()
                .iter()
                .zip(f.values())
                .map(|(&x, &v)| v + bump * x * x)
                .collect();
            let g = PLConvexFunction::new(
                f.breakpoints().to_vec(),
                gvals,
                BoundaryMode::PlusInfinityOutside,
            )
            .unwrap();
            let ys = linspace(-6.0, 6.0, 257);
            let fc = conjugate(&f, &ys).unwrap();
            let gc = conjugate(&g, &ys).unwrap();
            for (a, b) in gc.values().iter().zip(fc.values()) {
                assert!(a <= b, "f <= g must imply g* <= f*");
            }
        }
    }

    #[test]
    fn fenchel_young_with_equality_on_the_subdifferential() {
        let mut rng = SplitMix64::new(1234);
        for _ in 0..50 {
            let f = random_convex_pl(&mut rng, 3.0);
            let h = finest_spacing(&f);
            let ys = linspace(-4.0, 4.0, 129);
            let g = conjugate(&f, &ys).unwrap();
            for (i, &x) in f.breakpoints().iter().enumerate() {
                let sub = subdifferential(&f, x).unwrap();
                for (j, &y) in ys.iter().enumerate() {
                    let gap = f.values()[i] + g.values()[j] - x * y;
                    assert!(gap >= -1e-10, "Fenchel-Young violated: gap = {gap}");
                    if sub.contains(y) {
                        assert!(gap <= 10.0 * h, "equality on subdifferential: gap = {gap}");
                    }
                    if gap <= 1e-12 {
                        let dist = if y < sub.lo {
                            sub.lo - y
                        } else if y > sub.hi {
                            y - sub.hi
                        } else {
                            0.0
                        };
                        assert!(dist <= 10.0 * h, "tight pair must sit near subdifferential");
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_sweep_matches_brute_force_exactly() {
        let mut rng = SplitMix64::new(0xbead);
        for _ in 0..50 {
            let f = random_convex_pl(&mut rng, 6.0);
            let ys = linspace(-7.0, 7.0, 513);
            let g = conjugate(&f, &ys).unwrap();
            for (j, &y) in ys.iter().enumerate() {
                let brute = f
                    .breakpoints()
                    .iter()
                    .zip(f.values())
                    .map(|(&x, &v)| x * y - v)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(g.values()[j], brute, "sweep must equal brute force bitwise");
            }
        }
    }

    #[test]
    fn interval_union_hausdorff_is_exact() {
        let a = IntervalUnion::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let b = IntervalUnion::new(vec![(0.0, 3.0)]).unwrap();
        // farthest point of [0,3] from A is the gap midpoint 1.5
        assert_relative_eq!(a.hausdorff_distance(&b), 0.5);
        let c = IntervalUnion::new(vec![(10.0, 11.0)]).unwrap();
        assert_relative_eq!(a.hausdorff_distance(&c), 10.0);
        assert_eq!(IntervalUnion::empty().hausdorff_distance(&IntervalUnion::empty()), 0.0);
        assert_eq!(a.hausdorff_distance(&IntervalUnion::empty()), f64::INFINITY);
    }

    #[test]
    fn interval_union_nesting() {
        let inner = IntervalUnion::new(vec![(-0.5, 0.5)]).unwrap();
        let outer = IntervalUnion::new(vec![(-0.8, 0.9)]).unwrap();
        assert!(inner.nests_within(&outer, 1e-9, (-1.0, 1.0), 1e-12));
        assert!(!outer.nests_within(&inner, 1e-9, (-1.0, 1.0), 1e-12));
        // boundary-pinned side is exempt from the strict inclusion
        let pinned = IntervalUnion::new(vec![(-1.0, 0.5)]).unwrap();
        let host = IntervalUnion::new(vec![(-1.0, 0.9)]).unwrap();
        assert!(pinned.nests_within(&host, 1e-9, (-1.0, 1.0), 1e-12));
    }
}
