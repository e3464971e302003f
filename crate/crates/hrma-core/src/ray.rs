//! Time slices of the Legendre transform potential `ψ(s, x) = (u_s)*(x)`,
//! their singular structure, induced metric coefficients, and residuals of
//! the geodesic equation on the regular locus.

use crate::convex::{conjugate_exact, lower_convex_envelope, PLConvexFunction, SampledFunction};
use crate::numeric::fmt17;
use crate::toric::{SliceGeometry, ToricCauchyData};
use crate::{BoundaryMode, Error, Result};

/// A kink of `ψ_s`: located at `x`, with x-subdifferential `[lo, hi]` equal
/// to the corresponding component of `A_s` (on which the envelope slope is
/// constant and equal to `x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

/// One time slice of the potential.
///
/// `psi` is piecewise linear over the union of `x_grid` and the exact dual
/// knots of the envelope, so kinks appear as genuine breakpoints whose
/// subdifferential is the `A_s` component; `psi_grid`/`dpsi_grid` are the
/// values and gradients on `x_grid` alone (what the CSV emission uses).
#[derive(Debug, Clone)]
pub struct RaySlice {
    pub s: f64,
    pub x_grid: Vec<f64>,
    pub psi_grid: Vec<f64>,
    pub dpsi_grid: Vec<f64>,
    pub psi: PLConvexFunction,
    pub singular_points: Vec<SingularPoint>,
    pub regular_mask: Vec<bool>,
}

impl RaySlice {
    /// Fraction of the slope range used to tell genuine kinks from hull
    /// noise when classifying grid nodes.
    pub fn width_tol(&self) -> f64 {
        let span = self.psi.domain_hi() - self.psi.domain_lo();
        1e-7 * span.max(1.0)
    }
}

/// Builds the slice at time `s`: `ψ_s = (u_s**)* = (u_s)*`, with the envelope
/// carried on `moment_nodes` interior nodes and its bridge contacts replaced
/// by the exact double-tangency endpoints. Singular points are read off the
/// bridge slopes (exact in the PL model) rather than scanned for in `ψ_s`.
pub fn ray_slice(
    data: &ToricCauchyData,
    s: f64,
    x_grid: &[f64],
    moment_nodes: usize,
) -> Result<RaySlice> {
    if x_grid.len() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: x_grid.len(),
        });
    }
    for i in 1..x_grid.len() {
        if x_grid[i] <= x_grid[i - 1] {
            return Err(Error::NonIncreasingGrid { index: i });
        }
    }
    let geom = SliceGeometry::new(data, s, moment_nodes)?;
    let axis = data.axis(0);

    // envelope on the moment grid, with exact contact points spliced in
    let grid = axis.interior_grid(moment_nodes);
    let us = SampledFunction::sample(&grid, BoundaryMode::Finite, |y| axis.us(s, y))?;
    let hull = lower_convex_envelope(&us)?;
    let comps = geom.components();
    let w = axis.width();
    let mut bps: Vec<f64> = Vec::with_capacity(hull.len() + 2 * comps.len());
    let mut vals: Vec<f64> = Vec::with_capacity(bps.capacity());
    let near = 1e-9 * w;
    let inside = |y: f64| {
        comps
            .iter()
            .any(|c| y > c.a - near && y < c.b + near)
    };
    let mut contacts: Vec<f64> = comps.iter().flat_map(|c| [c.a, c.b]).collect();
    contacts.sort_by(f64::total_cmp);
    let mut ci = 0;
    for (i, &y) in hull.breakpoints().iter().enumerate() {
        while ci < contacts.len() && contacts[ci] < y {
            bps.push(contacts[ci]);
            vals.push(axis.us(s, contacts[ci]));
            ci += 1;
        }
        if !inside(y) {
            bps.push(y);
            vals.push(hull.values()[i]);
        }
    }
    while ci < contacts.len() {
        bps.push(contacts[ci]);
        vals.push(axis.us(s, contacts[ci]));
        ci += 1;
    }
    let env = PLConvexFunction::from_parts_unchecked(bps, vals, BoundaryMode::PlusInfinityOutside);

    // exact conjugate of the refined envelope
    let dual = conjugate_exact(&env);

    // singular points: the bridge slopes as the dual computes them, so the
    // kink is bitwise a knot of psi
    let mut singular_points = Vec::with_capacity(comps.len());
    for c in comps {
        let i = env
            .breakpoints()
            .binary_search_by(|v| v.total_cmp(&c.a))
            .unwrap_or_else(|i| i);
        let slope = env.slope(i);
        singular_points.push(SingularPoint {
            x: slope,
            lo: c.a,
            hi: c.b,
        });
    }

    // psi over x_grid ∪ interior dual knots
    let x_lo = x_grid[0];
    let x_hi = *x_grid.last().unwrap();
    let eps = 1e-12 * (x_hi - x_lo).max(1.0);
    let mut merged: Vec<(f64, bool)> = x_grid.iter().map(|&x| (x, false)).collect();
    merged.extend(
        dual.knots
            .iter()
            .filter(|&&k| k > x_lo + eps && k < x_hi - eps)
            .map(|&k| (k, true)),
    );
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bx: Vec<f64> = Vec::with_capacity(merged.len());
    for &(x, is_knot) in &merged {
        match bx.last() {
            Some(&last) if x - last < eps => {
                if is_knot {
                    *bx.last_mut().unwrap() = x;
                }
            }
            _ => bx.push(x),
        }
    }
    let bv: Vec<f64> = bx.iter().map(|&x| dual.eval(x)).collect();
    let psi = PLConvexFunction::from_parts_unchecked(bx, bv, BoundaryMode::Finite);

    let psi_grid: Vec<f64> = x_grid.iter().map(|&x| dual.eval(x)).collect();
    let dpsi_grid: Vec<f64> = x_grid.iter().map(|&x| geom.grad(x)).collect();

    let mut regular_mask = Vec::with_capacity(x_grid.len());
    for (i, &x) in x_grid.iter().enumerate() {
        let h_local = if i + 1 < x_grid.len() {
            x_grid[i + 1] - x_grid[i]
        } else {
            x_grid[i] - x_grid[i - 1]
        };
        let kd = singular_points
            .iter()
            .map(|p| (x - p.x).abs())
            .fold(f64::INFINITY, f64::min);
        regular_mask.push(kd > h_local);
    }

    Ok(RaySlice {
        s,
        x_grid: x_grid.to_vec(),
        psi_grid,
        dpsi_grid,
        psi,
        singular_points,
        regular_mask,
    })
}

/// Finite-difference residual of the geodesic equation
/// `ψ̈ = (ψ'')⁻¹ (ψ̇')²` for an arbitrary evaluation `psi(s, x)`, centered
/// with step `h` in both variables.
pub fn residual_from_fn(psi: impl Fn(f64, f64) -> f64, s: f64, x: f64, h: f64) -> f64 {
    let p00 = psi(s, x);
    let pss = (psi(s + h, x) - 2.0 * p00 + psi(s - h, x)) / (h * h);
    let pxx = (psi(s, x + h) - 2.0 * p00 + psi(s, x - h)) / (h * h);
    let pxs = (psi(s + h, x + h) - psi(s + h, x - h) - psi(s - h, x + h) + psi(s - h, x - h))
        / (4.0 * h * h);
    (pss - pxs * pxs / pxx).abs()
}

/// Residual of the geodesic equation at a regular point `(s, x)`, expected
/// `O(h²)` there. Rejects points whose 5-point stencil straddles a kink of
/// any of the three slices involved.
pub fn regular_residual(data: &ToricCauchyData, s: f64, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    if s - h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "s − h = {} must stay nonnegative",
            s - h
        )));
    }
    let scan = 2049;
    let gm = SliceGeometry::new(data, s - h, scan)?;
    let g0 = SliceGeometry::new(data, s, scan)?;
    let gp = SliceGeometry::new(data, s + h, scan)?;
    for g in [&gm, &g0, &gp] {
        if g.kink_distance(x) <= 2.0 * h {
            return Err(Error::Singular { s: g.s(), x });
        }
    }
    let eval = |sv: f64, xv: f64| -> f64 {
        let g = if sv < s {
            &gm
        } else if sv > s {
            &gp
        } else {
            &g0
        };
        g.psi(xv)
    };
    Ok(residual_from_fn(eval, s, x, h))
}

/// `∂ψ/∂s(s, x) = −u̇₀(∇ψ_s(x))` at a regular point.
pub fn time_derivative(data: &ToricCauchyData, s: f64, x: f64) -> Result<f64> {
    let g = SliceGeometry::new(data, s, 2049)?;
    if g.kink_distance(x) <= 1e-10 * (1.0 + x.abs()) {
        return Err(Error::Singular { s, x });
    }
    Ok(-data.axis(0).udot0(g.grad(x)))
}

/// Metric coefficient profile `u(s)_yy` along a grid, with the `A_s`
/// zero-set flagged (the envelope is affine there, so the `dy²` coefficient
/// vanishes and the dual `dθ²` coefficient blows up).
#[derive(Debug, Clone)]
pub struct MetricProfile {
    pub y: Vec<f64>,
    pub u_yy: Vec<f64>,
    pub in_a_set: Vec<bool>,
}

/// Second derivative of the envelope `u_s**` along `y_grid`: exactly zero on
/// flat bridges, centered finite differences of the envelope elsewhere.
pub fn metric_profile(data: &ToricCauchyData, s: f64, y_grid: &[f64]) -> Result<MetricProfile> {
    if y_grid.len() < 3 {
        return Err(Error::TooFewNodes {
            needed: 3,
            got: y_grid.len(),
        });
    }
    let geom = SliceGeometry::new(data, s, y_grid.len().max(1025))?;
    let vals: Vec<f64> = y_grid.iter().map(|&y| geom.envelope_value(y)).collect();
    let n = y_grid.len();
    let mut u_yy = vec![0.0; n];
    for i in 1..n - 1 {
        let hl = y_grid[i] - y_grid[i - 1];
        let hr = y_grid[i + 1] - y_grid[i];
        u_yy[i] = 2.0 * ((vals[i + 1] - vals[i]) / hr - (vals[i] - vals[i - 1]) / hl) / (hl + hr);
    }
    u_yy[0] = u_yy[1];
    u_yy[n - 1] = u_yy[n - 2];
    let in_a_set: Vec<bool> = y_grid
        .iter()
        .map(|&y| geom.components().iter().any(|c| c.a < y && y < c.b))
        .collect();
    Ok(MetricProfile {
        y: y_grid.to_vec(),
        u_yy,
        in_a_set,
    })
}

/// One row of the boundary gradient-growth table.
#[derive(Debug, Clone, Copy)]
pub struct ProbeRow {
    pub axis: usize,
    /// `false` probes the lower facet, `true` the upper one.
    pub upper: bool,
    pub delta: f64,
    pub slope: f64,
}

/// Boundary gradient growth of the envelope: essential smoothness means the
/// slope diverges along every standoff-shrinking sequence.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// `|slope|` is non-decreasing as the standoff shrinks, on every facet.
    pub monotone: bool,
    /// Per-axis minimum of the finest `|slope|` over both facets.
    pub min_terminal_slope: f64,
}

impl ProbeReport {
    /// Whether the probed slope range covers `[−threshold, threshold]`.
    pub fn covers(&self, threshold: f64) -> bool {
        self.min_terminal_slope >= threshold
    }
}

/// Evaluates the envelope slope at standoffs `δ_k = δ₀·2^{−k}`, `k = 1..=K`,
/// from each facet (`δ₀` is an eighth of the axis width, `K = 40`).
pub fn essential_smoothness_probe(data: &ToricCauchyData, s: f64) -> Result<ProbeReport> {
    let mut rows = Vec::new();
    let mut monotone = true;
    let mut min_terminal = f64::INFINITY;
    for (ai, axis) in data.axes().iter().enumerate() {
        let geom = SliceGeometry::from_axis(axis.clone(), s, 2049)?;
        let (lo, hi) = axis.interval();
        let delta0 = axis.width() / 8.0;
        for upper in [false, true] {
            let mut prev_abs = 0.0;
            let mut slope = 0.0;
            for k in 1..=40u32 {
                let delta = delta0 * (0.5f64).powi(k as i32);
                let y = if upper { hi - delta } else { lo + delta };
                slope = geom.envelope_slope(y);
                if slope.abs() + 1e-12 < prev_abs {
                    monotone = false;
                }
                prev_abs = slope.abs();
                rows.push(ProbeRow {
                    axis: ai,
                    upper,
                    delta,
                    slope,
                });
            }
            min_terminal = min_terminal.min(slope.abs());
        }
    }
    Ok(ProbeReport {
        rows,
        monotone,
        min_terminal_slope: min_terminal,
    })
}

/// Largest deviation of `u_{s2}**` from `u_{s1}**` on a shared interior grid,
/// together with the a-priori bound `|s2 − s1| · max_P |u̇₀|`.
pub fn envelope_lipschitz_defect(
    data: &ToricCauchyData,
    s1: f64,
    s2: f64,
    grid_nodes: usize,
) -> Result<(f64, f64)> {
    let axis = data.axis(0);
    let g1 = SliceGeometry::new(data, s1, grid_nodes)?;
    let g2 = SliceGeometry::new(data, s2, grid_nodes)?;
    let grid = axis.interior_grid(grid_nodes);
    let defect = grid
        .iter()
        .map(|&y| (g1.envelope_value(y) - g2.envelope_value(y)).abs())
        .fold(0.0, f64::max);
    Ok((defect, (s2 - s1).abs() * data.max_abs_velocity()))
}

/// CSV emission per slice: `x,psi,dpsi_dx,is_regular`, floats at 17
/// significant digits.
pub fn slice_csv(slice: &RaySlice) -> String {
    let mut out = String::from("x,psi,dpsi_dx,is_regular\n");
    for i in 0..slice.x_grid.len() {
        out.push_str(&fmt17(slice.x_grid[i]));
        out.push(',');
        out.push_str(&fmt17(slice.psi_grid[i]));
        out.push(',');
        out.push_str(&fmt17(slice.dpsi_grid[i]));
        out.push(',');
        out.push_str(if slice.regular_mask[i] { "1" } else { "0" });
        out.push('\n');
    }
    out
}

/// CSV emission per metric profile: `y,u_yy`.
pub fn metric_csv(profile: &MetricProfile) -> String {
    let mut out = String::from("y,u_yy\n");
    for i in 0..profile.y.len() {
        out.push_str(&fmt17(profile.y[i]));
        out.push(',');
        out.push_str(&fmt17(profile.u_yy[i]));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::subdifferential;
    use crate::numeric::{bisect, linspace, SplitMix64};
    use approx::assert_relative_eq;

    fn fubini() -> ToricCauchyData {
        ToricCauchyData::fubini_study()
    }

    fn gap_endpoint_oracle(s: f64) -> f64 {
        bisect(
            |a| ((1.0 + a) / (1.0 - a)).ln() - 2.0 * s * a,
            1e-9,
            1.0 - 1e-15,
            1e-12,
        )
    }

    #[test]
    fn slice_at_s0_matches_the_closed_form_dual() {
        // (u₀)*(x) = 2 log cosh(x/2), normalized to 0 at x = 0
        let data = fubini();
        let xg = linspace(-3.0, 3.0, 513);
        let slice = ray_slice(&data, 0.0, &xg, 4097).unwrap();
        assert!(slice.singular_points.is_empty());
        let err = xg
            .iter()
            .zip(&slice.psi_grid)
            .map(|(&x, &v)| (v - 2.0 * (0.5 * x).cosh().ln()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-5, "sup error {err}");
        assert!(slice.psi_grid[256].abs() <= 1e-9, "ψ(0,0) = 0");
    }

    #[test]
    fn slice_past_lifespan_has_one_exact_kink() {
        let data = fubini();
        let a2 = gap_endpoint_oracle(2.0);
        let xg = linspace(-3.0, 3.0, 513);
        let slice = ray_slice(&data, 2.0, &xg, 4097).unwrap();
        assert_eq!(slice.singular_points.len(), 1);
        let p = slice.singular_points[0];
        assert!(p.x.abs() <= 1e-9, "kink at x = {}", p.x);
        assert!((p.lo + a2).abs() <= 1e-9);
        assert!((p.hi - a2).abs() <= 1e-9);
        // the kink is a genuine breakpoint of psi with the component as its
        // subdifferential
        let sub = subdifferential(&slice.psi, p.x).unwrap();
        assert!((sub.lo + a2).abs() <= 1e-9, "sub.lo = {}", sub.lo);
        assert!((sub.hi - a2).abs() <= 1e-9, "sub.hi = {}", sub.hi);
        // grid nodes adjacent to the kink are masked, far nodes are regular
        let i0 = xg.iter().position(|&x| x.abs() < 3.0 / 512.0).unwrap();
        assert!(!slice.regular_mask[i0]);
        assert!(slice.regular_mask[10] && slice.regular_mask[500]);
    }

    #[test]
    fn slices_below_lifespan_are_smooth() {
        let data = fubini();
        let xg = linspace(-3.0, 3.0, 257);
        for &s in &[0.2, 0.7, 0.99] {
            let slice = ray_slice(&data, s, &xg, 2049).unwrap();
            assert!(slice.singular_points.is_empty(), "s = {s}");
            assert!(slice.regular_mask.iter().all(|&m| m));
        }
    }

    #[test]
    fn singular_point_count_tracks_a_set_components() {
        let data = fubini();
        let xg = linspace(-3.0, 3.0, 129);
        for &s in &[0.5, 1.0, 1.2, 2.0, 5.0] {
            let slice = ray_slice(&data, s, &xg, 2049).unwrap();
            let aset = crate::toric::a_set(&data, s, 2049).unwrap();
            assert_eq!(slice.singular_points.len(), aset.components.len(), "s = {s}");
        }
    }

    #[test]
    fn residual_vanishes_at_second_order_below_lifespan() {
        let data = fubini();
        let hs = [0.04, 0.02, 0.01];
        let rs: Vec<f64> = hs
            .iter()
            .map(|&h| regular_residual(&data, 0.5, 0.7, h).unwrap())
            .collect();
        for w in rs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "observed order {order} (residuals {rs:?})");
        }
        assert!(rs[2] <= 1e-4, "terminal residual {}", rs[2]);
    }

    #[test]
    fn residual_vanishes_far_from_the_kink_past_lifespan() {
        let data = fubini();
        let r1 = regular_residual(&data, 2.0, 3.0, 0.02).unwrap();
        let r2 = regular_residual(&data, 2.0, 3.0, 0.01).unwrap();
        assert!(r2 <= 1e-4, "residual {r2}");
        assert!(r1 / r2 >= 3.0, "no h² decay: {r1} vs {r2}");
        // points on the kink are rejected
        assert!(matches!(
            regular_residual(&data, 2.0, 0.0, 0.01),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn residual_detects_a_non_solution() {
        let data = fubini();
        let g = SliceGeometry::new(&data, 0.5, 2049).unwrap();
        let gm = SliceGeometry::new(&data, 0.5 - 0.01, 2049).unwrap();
        let gp = SliceGeometry::new(&data, 0.5 + 0.01, 2049).unwrap();
        let fake = |s: f64, x: f64| {
            let base = if s < 0.5 {
                gm.psi(x)
            } else if s > 0.5 {
                gp.psi(x)
            } else {
                g.psi(x)
            };
            base + 0.01 * x * x * s * s
        };
        let r = residual_from_fn(fake, 0.5, 0.7, 0.01);
        assert!(r >= 1e-3, "perturbed potential must fail the equation: {r}");
    }

    #[test]
    fn time_derivative_matches_symmetry_and_finite_differences() {
        let data = fubini();
        // evenness: ∇ψ_s(0) = 0, so ∂_sψ(s, 0) = −u̇₀(0) = 0
        assert!(time_derivative(&data, 0.5, 0.0).unwrap().abs() <= 1e-10);

        // s = 2, x = 1: value equals (∇ψ₂(1))²
        let g = SliceGeometry::new(&data, 2.0, 2049).unwrap();
        let grad = g.grad(1.0);
        let td = time_derivative(&data, 2.0, 1.0).unwrap();
        assert_relative_eq!(td, grad * grad, epsilon = 1e-12);
        let h = 1e-4;
        let gp = SliceGeometry::new(&data, 2.0 + h, 2049).unwrap();
        let gm = SliceGeometry::new(&data, 2.0 - h, 2049).unwrap();
        let fd = (gp.psi(1.0) - gm.psi(1.0)) / (2.0 * h);
        assert!((td - fd).abs() <= 1e-6, "analytic {td} vs fd {fd}");

        // 100 random regular x below the lifespan
        let mut rng = SplitMix64::new(31);
        let gp = SliceGeometry::new(&data, 0.5 + h, 2049).unwrap();
        let gm = SliceGeometry::new(&data, 0.5 - h, 2049).unwrap();
        for _ in 0..100 {
            let x = rng.range(-4.0, 4.0);
            let td = time_derivative(&data, 0.5, x).unwrap();
            let fd = (gp.psi(x) - gm.psi(x)) / (2.0 * h);
            assert!((td - fd).abs() <= 1e-6, "x = {x}: {td} vs {fd}");
        }
    }

    #[test]
    fn metric_profile_matches_analytic_second_derivatives() {
        let data = fubini();
        let grid = data.axis(0).interior_grid(2049);
        let h = grid[1] - grid[0];

        // s = 0: u_yy = 2/(1−y²), O(h²)
        let m0 = metric_profile(&data, 0.0, &grid).unwrap();
        for (i, &y) in grid.iter().enumerate().step_by(97) {
            if y.abs() < 0.9 {
                let want = 2.0 / (1.0 - y * y);
                assert!(
                    (m0.u_yy[i] - want).abs() <= 50.0 * h * h * want,
                    "y = {y}: got {} want {want}",
                    m0.u_yy[i]
                );
            }
        }
        assert!(m0.in_a_set.iter().all(|&b| !b));

        // s = 2: zero on the flat bridge, 2/(1−y²) − 4 outside
        let a2 = gap_endpoint_oracle(2.0);
        let m2 = metric_profile(&data, 2.0, &grid).unwrap();
        for (i, &y) in grid.iter().enumerate() {
            if y.abs() < a2 - 2.0 * h {
                assert!(m2.u_yy[i].abs() <= 1e-6, "inside: y = {y}, {}", m2.u_yy[i]);
                assert!(m2.in_a_set[i]);
            } else if y.abs() > a2 + 2.0 * h && y.abs() < 0.995 {
                let want = 2.0 / (1.0 - y * y) - 4.0;
                assert!(
                    (m2.u_yy[i] - want).abs() <= 1e-3 * want.max(1.0),
                    "outside: y = {y}: got {} want {want}",
                    m2.u_yy[i]
                );
                assert!(!m2.in_a_set[i]);
            }
            assert!(m2.u_yy[i] >= -1e-9, "metric coefficient must be >= 0");
        }
    }

    #[test]
    fn boundary_slopes_diverge_logarithmically() {
        let data = fubini();
        let report = essential_smoothness_probe(&data, 0.0).unwrap();
        assert!(report.monotone);
        assert!(report.covers(20.0));
        // at s = 0 the slope at y = 1 − δ is log((2−δ)/δ)
        for row in report.rows.iter().filter(|r| r.upper) {
            let want = ((2.0 - row.delta) / row.delta).ln();
            assert_relative_eq!(row.slope, want, max_relative = 1e-9);
        }
        // still essentially smooth past the lifespan
        let report2 = essential_smoothness_probe(&data, 2.0).unwrap();
        assert!(report2.monotone && report2.covers(20.0));
    }

    #[test]
    fn envelopes_are_lipschitz_in_s() {
        let data = fubini();
        for &(s1, s2) in &[(0.2, 0.7), (1.0, 1.5), (2.0, 2.01), (0.0, 3.0)] {
            let (defect, bound) = envelope_lipschitz_defect(&data, s1, s2, 2049).unwrap();
            assert!(
                defect <= bound * (1.0 + 1e-9) + 1e-12,
                "defect {defect} exceeds bound {bound} for ({s1}, {s2})"
            );
        }
    }

    #[test]
    fn gradient_duality_roundtrip_off_the_gap_set() {
        let data = fubini();
        let axis = data.axis(0);
        let g = SliceGeometry::new(&data, 2.0, 2049).unwrap();
        let a2 = gap_endpoint_oracle(2.0);
        for &y in linspace(-0.995, 0.995, 101).iter() {
            if y.abs() > a2 + 1e-3 {
                let x = axis.us_d1(2.0, y);
                assert!((g.grad(x) - y).abs() <= 1e-9, "roundtrip at y = {y}");
            }
        }
    }

    #[test]
    fn psi_is_jointly_convex_in_s_and_x() {
        let data = fubini();
        let mut rng = SplitMix64::new(2024);
        let geoms: Vec<SliceGeometry> = (0..=30)
            .map(|i| SliceGeometry::new(&data, 0.1 * i as f64, 1025).unwrap())
            .collect();
        let eval = |s: f64, x: f64| {
            let i = (s / 0.1).round() as usize;
            geoms[i].psi(x)
        };
        for _ in 0..300 {
            let i1 = (rng.next_u64() % 31) as usize;
            let i2 = (rng.next_u64() % 31) as usize;
            // λ restricted so the combination lands on a stored slice
            let steps = if i1 <= i2 { i2 - i1 } else { i1 - i2 };
            if steps == 0 {
                continue;
            }
            let k = rng.next_u64() as usize % (steps + 1);
            let lam = k as f64 / steps as f64;
            let (x1, x2) = (rng.range(-3.0, 3.0), rng.range(-3.0, 3.0));
            let (s1, s2) = (0.1 * i1 as f64, 0.1 * i2 as f64);
            let sm = (1.0 - lam) * s1 + lam * s2;
            let xm = (1.0 - lam) * x1 + lam * x2;
            let lhs = eval(sm, xm);
            let rhs = (1.0 - lam) * eval(s1, x1) + lam * eval(s2, x2);
            assert!(lhs <= rhs + 1e-9, "joint convexity violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn psi_slopes_increase_strictly_across_dual_cells() {
        // strict convexity of ψ_s: any run of equal slopes in the PL
        // representation stays within a single dual cell (it never crosses a
        // knot of the exact conjugate)
        let data = fubini();
        let xg = linspace(-3.0, 3.0, 513);
        let slice = ray_slice(&data, 2.0, &xg, 4097).unwrap();
        let slopes = slice.psi.slopes();
        let bps = slice.psi.breakpoints();
        for i in 1..slopes.len() {
            if (slopes[i] - slopes[i - 1]).abs() <= 1e-13 {
                // shared breakpoint must be an inserted grid node, which is
                // never a kink location
                let x = bps[i];
                for p in &slice.singular_points {
                    assert!((x - p.x).abs() > 1e-12);
                }
            } else {
                assert!(slopes[i] > slopes[i - 1]);
            }
        }
    }

    #[test]
    fn slice_csv_shape() {
        let data = fubini();
        let xg = linspace(-1.0, 1.0, 5);
        let slice = ray_slice(&data, 0.5, &xg, 257).unwrap();
        let csv = slice_csv(&slice);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,psi,dpsi_dx,is_regular");
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().nth(1).unwrap().split(',').count() == 4);
    }
}
