//! Alexandrov Monge-Ampère mass of the potential on `[0, T] × ℝ`, measured
//! as the Lebesgue area of the subdifferential image.
//!
//! On the regular locus the subgradient pairs `(∂_sψ, ∂_xψ)` lie on the
//! graph of `−u̇₀`, a measure-zero set, so the regular mass is zero; past the
//! convex lifespan each kink of `ψ_s` contributes a chord between the graph
//! points over its `A_s` component, and the s-sweep of those chords fills a
//! region whose area lower-bounds the mass. The a-priori upper bound is the
//! volume between the graph of the velocity and its convex envelope.

use crate::convex::{lower_convex_envelope, SampledFunction};
use crate::numeric::{fmt17, SplitMix64};
use crate::toric::{
    axis_components, convex_lifespan, velocity_envelope_components, SliceGeometry, ToricCauchyData,
};
use crate::{Error, Result};

/// The segment `co{(−u̇₀(a), a), (−u̇₀(b), b)}` contained in `∂ψ(s, x_s)`
/// for an `A_s` component `(a, b)`; coordinates are `(t, y) = (∂_s, ∂_x)`
/// subgradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientChord {
    pub s: f64,
    pub t0: f64,
    pub y0: f64,
    pub t1: f64,
    pub y1: f64,
}

impl SubgradientChord {
    pub fn endpoints(&self) -> ((f64, f64), (f64, f64)) {
        ((self.t0, self.y0), (self.t1, self.y1))
    }
}

/// One chord per `A_s` component per mesh time, endpoints on the graph of
/// `−u̇₀` by construction. Empty whenever `A_s` is empty throughout.
pub fn chords(
    data: &ToricCauchyData,
    s_mesh: &[f64],
    grid_nodes: usize,
) -> Result<Vec<SubgradientChord>> {
    if data.dim() != 1 {
        return Err(Error::InvalidParameter(
            "mass computations require 1-dimensional data".into(),
        ));
    }
    for i in 1..s_mesh.len() {
        if s_mesh[i] <= s_mesh[i - 1] {
            return Err(Error::NonIncreasingGrid { index: i });
        }
    }
    let axis = data.axis(0);
    let mut out = Vec::new();
    for &s in s_mesh {
        for c in axis_components(axis, s, grid_nodes) {
            out.push(SubgradientChord {
                s,
                t0: -axis.udot0(c.a),
                y0: c.a,
                t1: -axis.udot0(c.b),
                y1: c.b,
            });
        }
    }
    Ok(out)
}

/// Diagnostic area of the Lemma-type upper bound at one kink: the convex hull
/// of the graph of `−u̇₀` over `[a, b]`, measured between the chord and the
/// graph by the trapezoid rule. Reported, never integrated into the mass.
pub fn chord_upper_hull_area(data: &ToricCauchyData, chord: &SubgradientChord) -> f64 {
    let axis = data.axis(0);
    let n = 512;
    let (a, b) = (chord.y0, chord.y1);
    let mut area = 0.0;
    let h = (b - a) / n as f64;
    for i in 0..=n {
        let y = a + h * i as f64;
        let t_chord = chord.t0 + (chord.t1 - chord.t0) * (y - a) / (b - a).max(1e-300);
        let gap = (t_chord - (-axis.udot0(y))).abs();
        area += if i == 0 || i == n { 0.5 * gap } else { gap };
    }
    area * h
}

/// Occupancy raster over the `(t, y)` plane of subgradients.
#[derive(Debug, Clone)]
pub struct SweptRegion {
    pub t_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Cells per axis.
    pub cells: usize,
    bits: Vec<u64>,
    pub occupied: usize,
    pub area: f64,
}

impl SweptRegion {
    fn empty(cells: usize) -> Self {
        SweptRegion {
            t_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            cells,
            bits: vec![],
            occupied: 0,
            area: 0.0,
        }
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.t_range.1 - self.t_range.0) / self.cells as f64,
            (self.y_range.1 - self.y_range.0) / self.cells as f64,
        )
    }

    pub fn is_occupied(&self, it: usize, iy: usize) -> bool {
        let idx = it * self.cells + iy;
        self.bits[idx >> 6] & (1u64 << (idx & 63)) != 0
    }

    fn mark(&mut self, t: f64, y: f64) {
        let (dt, dy) = self.cell_size();
        let it = ((t - self.t_range.0) / dt).floor() as isize;
        let iy = ((y - self.y_range.0) / dy).floor() as isize;
        if it < 0 || iy < 0 || it >= self.cells as isize || iy >= self.cells as isize {
            return;
        }
        let idx = it as usize * self.cells + iy as usize;
        let (w, b) = (idx >> 6, idx & 63);
        if self.bits[w] & (1u64 << b) == 0 {
            self.bits[w] |= 1u64 << b;
            self.occupied += 1;
        }
    }

    fn mark_segment(&mut self, p0: (f64, f64), p1: (f64, f64)) {
        let (dt, dy) = self.cell_size();
        let step = 0.45 * dt.min(dy);
        let len = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
        let n = (len / step).ceil() as usize + 1;
        for k in 0..=n {
            let u = k as f64 / n as f64;
            self.mark(p0.0 + u * (p1.0 - p0.0), p0.1 + u * (p1.1 - p0.1));
        }
    }

    fn finish(&mut self) {
        let (dt, dy) = self.cell_size();
        self.area = self.occupied as f64 * dt * dy;
    }
}

/// Rasterizes the chords together with the ruled quads spanned by
/// consecutive-mesh chords of the same component (matched by interval
/// overlap), so the discrete s-mesh does not leave gaps in the swept region.
/// The pre-condition `raster_cells ≥ 64` keeps the cell area meaningful.
pub fn swept_area(chords: &[SubgradientChord], raster_cells: usize) -> Result<SweptRegion> {
    if raster_cells < 64 {
        return Err(Error::InvalidParameter(format!(
            "raster_cells must be at least 64 per axis, got {raster_cells}"
        )));
    }
    for c in chords {
        if ![c.s, c.t0, c.y0, c.t1, c.y1].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
    }
    if chords.is_empty() {
        return Ok(SweptRegion::empty(raster_cells));
    }

    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for c in chords {
        t_lo = t_lo.min(c.t0).min(c.t1);
        t_hi = t_hi.max(c.t0).max(c.t1);
        y_lo = y_lo.min(c.y0).min(c.y1);
        y_hi = y_hi.max(c.y0).max(c.y1);
    }
    let pad_t = 0.01 * (t_hi - t_lo).max(1e-12);
    let pad_y = 0.01 * (y_hi - y_lo).max(1e-12);
    let mut region = SweptRegion {
        t_range: (t_lo - pad_t, t_hi + pad_t),
        y_range: (y_lo - pad_y, y_hi + pad_y),
        cells: raster_cells,
        bits: vec![0u64; (raster_cells * raster_cells + 63) / 64],
        occupied: 0,
        area: 0.0,
    };

    // group chords by mesh time (the mesh is strictly increasing, so equal
    // `s` values are adjacent)
    let mut groups: Vec<&[SubgradientChord]> = Vec::new();
    let mut start = 0;
    for i in 1..=chords.len() {
        if i == chords.len() || chords[i].s != chords[start].s {
            groups.push(&chords[start..i]);
            start = i;
        }
    }

    let overlap = |a: &SubgradientChord, b: &SubgradientChord| {
        let (a0, a1) = (a.y0.min(a.y1), a.y0.max(a.y1));
        let (b0, b1) = (b.y0.min(b.y1), b.y0.max(b.y1));
        a0 < b1 && b0 < a1
    };

    for gi in 0..groups.len() {
        for c in groups[gi] {
            region.mark_segment((c.t0, c.y0), (c.t1, c.y1));
        }
        if gi + 1 < groups.len() {
            for c in groups[gi] {
                for d in groups[gi + 1] {
                    if overlap(c, d) {
                        // ruled quad between matched chords
                        let (dt, dy) = region.cell_size();
                        let step = 0.45 * dt.min(dy);
                        let gap = ((d.t0 - c.t0).hypot(d.y0 - c.y0))
                            .max((d.t1 - c.t1).hypot(d.y1 - c.y1));
                        let nv = (gap / step).ceil() as usize + 1;
                        for k in 0..=nv {
                            let v = k as f64 / nv as f64;
                            let p0 = (c.t0 + v * (d.t0 - c.t0), c.y0 + v * (d.y0 - c.y0));
                            let p1 = (c.t1 + v * (d.t1 - c.t1), c.y1 + v * (d.y1 - c.y1));
                            region.mark_segment(p0, p1);
                        }
                    }
                }
            }
        }
    }
    region.finish();
    Ok(region)
}

/// The a-priori mass bound `Vol(epi(−u̇₀) ∖ epi(−(u̇₀)**))`: the integral of
/// `u̇₀ − (u̇₀)**` over `P` by the trapezoid rule on `grid_nodes` nodes. For
/// separable data the per-axis defects add, each weighted by the length of
/// the complementary interval.
pub fn prop3_bound(data: &ToricCauchyData, grid_nodes: usize) -> Result<f64> {
    let mut total = 0.0;
    for (i, axis) in data.axes().iter().enumerate() {
        let comps = velocity_envelope_components(axis, grid_nodes);
        let env_value = |y: f64| -> f64 {
            for c in &comps {
                if c.a <= y && y <= c.b {
                    return axis.udot0(c.a) + c.slope * (y - c.a);
                }
            }
            axis.udot0(y)
        };
        let grid = axis.closed_grid(grid_nodes.max(129));
        let mut defect = 0.0;
        for w in grid.windows(2) {
            let g0 = axis.udot0(w[0]) - env_value(w[0]);
            let g1 = axis.udot0(w[1]) - env_value(w[1]);
            defect += 0.5 * (g0 + g1) * (w[1] - w[0]);
        }
        let cross: f64 = data
            .axes()
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| a.width())
            .product();
        total += defect * cross;
    }
    Ok(total)
}

/// Same bound for a sampled velocity (e.g. transported Kähler data): the
/// trapezoid integral of the gap between the samples and their lower convex
/// envelope.
pub fn prop3_bound_from_samples(velocity: &SampledFunction) -> Result<f64> {
    let env = lower_convex_envelope(velocity)?;
    let xs = velocity.nodes();
    let vs = velocity.values();
    let mut defect = 0.0;
    for i in 1..xs.len() {
        let g0 = vs[i - 1] - env.eval(xs[i - 1])?;
        let g1 = vs[i] - env.eval(xs[i])?;
        defect += 0.5 * (g0 + g1) * (xs[i] - xs[i - 1]);
    }
    Ok(defect)
}

/// Full mass accounting on `[0, T] × ℝ`.
#[derive(Debug, Clone)]
pub struct MassReport {
    pub t: f64,
    pub t_cvx: f64,
    /// Zero by construction; the regular-image check below justifies it.
    pub mass_regular: f64,
    /// Area of the swept chord region over `(T_cvx, T]`.
    pub mass_singular_lower: f64,
    pub prop3_bound: f64,
    pub chord_count: usize,
    pub raster_cells: usize,
    /// Relative change of the area between the half and full resolutions.
    pub raster_rel_change: f64,
    /// Largest deviation of sampled regular subgradient pairs from the graph
    /// of `−u̇₀`.
    pub regular_image_max_dev: f64,
}

impl MassReport {
    pub const CSV_HEADER: &'static str = "T,t_cvx,mass_lower,prop3_bound,chords,raster";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            fmt17(self.t),
            fmt17(self.t_cvx),
            fmt17(self.mass_singular_lower),
            fmt17(self.prop3_bound),
            self.chord_count,
            self.raster_cells
        )
    }

    pub fn key_value_block(&self) -> String {
        format!(
            "T={}\nt_cvx={}\nmass_regular={}\nmass_singular_lower={}\nprop3_bound={}\nchord_count={}\nraster_cells={}\nraster_rel_change={}\nregular_image_max_dev={}\n",
            fmt17(self.t),
            fmt17(self.t_cvx),
            fmt17(self.mass_regular),
            fmt17(self.mass_singular_lower),
            fmt17(self.prop3_bound),
            self.chord_count,
            self.raster_cells,
            fmt17(self.raster_rel_change),
            fmt17(self.regular_image_max_dev)
        )
    }
}

/// Quadratically clustered mesh on `(t_cvx, T]`: the density doubles toward
/// the lifespan, where component endpoints grow like `√(s − T_cvx)`.
pub fn singular_mesh(t_cvx: f64, t: f64, n: usize) -> Vec<f64> {
    let n = n.max(8);
    let span = t - t_cvx;
    (1..=n)
        .map(|j| t_cvx + span * (j as f64 / n as f64).powi(2))
        .collect()
}

/// Assembles the mass report: zero regular mass (with the sampled
/// subgradient-image check behind it), the rasterized chord-sweep lower
/// bound over `(T_cvx, T]`, and the a-priori volume bound, with the internal
/// invariant chain validated before returning.
pub fn mass_report(
    data: &ToricCauchyData,
    t: f64,
    s_mesh_size: usize,
    raster_cells: usize,
    grid_nodes: usize,
) -> Result<MassReport> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t}")));
    }
    if data.dim() != 1 {
        return Err(Error::InvalidParameter(
            "mass computations require 1-dimensional data".into(),
        ));
    }
    let axis = data.axis(0);
    let t_cvx = convex_lifespan(data, grid_nodes)?.t_cvx;

    let (chord_list, region, rel_change) = if t > t_cvx {
        let mesh = singular_mesh(t_cvx, t, s_mesh_size);
        let list = chords(data, &mesh, grid_nodes)?;
        let full = swept_area(&list, raster_cells)?;
        let half = swept_area(&list, (raster_cells / 2).max(64))?;
        let rel = if full.area > 0.0 {
            (full.area - half.area).abs() / full.area
        } else {
            0.0
        };
        (list, full, rel)
    } else {
        (Vec::new(), SweptRegion::empty(raster_cells), 0.0)
    };

    let bound = prop3_bound(data, grid_nodes)?;

    // Regular-image check: sampled regular subgradient pairs must lie on the
    // graph of −u̇₀. ∂_xψ comes from the exact branch inversion, ∂_sψ from an
    // independent centered difference of ψ in s.
    let mut rng = SplitMix64::new(0x6d61_7373);
    let h = 1e-5;
    let (lo, hi) = axis.interval();
    let w = hi - lo;
    let mut max_dev: f64 = 0.0;
    let s_values = 50usize;
    let per_s = 20usize;
    for _ in 0..s_values {
        let s = rng.range(h + 0.01, t.max(0.1));
        let g0 = SliceGeometry::from_axis(axis.clone(), s, 1025)?;
        let gm = SliceGeometry::from_axis(axis.clone(), s - h, 1025)?;
        let gp = SliceGeometry::from_axis(axis.clone(), s + h, 1025)?;
        let mut taken = 0;
        while taken < per_s {
            let y = rng.range(lo + 0.05 * w, hi - 0.05 * w);
            if g0
                .components()
                .iter()
                .any(|c| y > c.a - 0.02 * w && y < c.b + 0.02 * w)
            {
                continue;
            }
            taken += 1;
            let x = axis.us_d1(s, y);
            let grad = g0.grad(x);
            let ds_fd = (gp.psi(x) - gm.psi(x)) / (2.0 * h);
            let dev = (ds_fd - (-axis.udot0(grad))).abs();
            max_dev = max_dev.max(dev);
        }
    }
    if max_dev > 1e-6 {
        return Err(Error::InvariantViolation(format!(
            "regular subgradient image strays {max_dev} from the graph of -udot0"
        )));
    }

    let report = MassReport {
        t,
        t_cvx,
        mass_regular: 0.0,
        mass_singular_lower: region.area,
        prop3_bound: bound,
        chord_count: chord_list.len(),
        raster_cells,
        raster_rel_change: rel_change,
        regular_image_max_dev: max_dev,
    };

    // invariant chain
    if t <= t_cvx && (report.chord_count > 0 || report.mass_singular_lower != 0.0) {
        return Err(Error::InvariantViolation(
            "mass must vanish at or before the convex lifespan".into(),
        ));
    }
    if report.chord_count > 0 && !(report.mass_singular_lower > 0.0) {
        return Err(Error::InvariantViolation(
            "chords present but swept area vanished".into(),
        ));
    }
    if report.mass_singular_lower > bound * 1.005 + 1e-12 {
        return Err(Error::InvariantViolation(format!(
            "lower bound {} exceeds the a-priori bound {}",
            report.mass_singular_lower, bound
        )));
    }
    Ok(report)
}

/// Chord dump CSV: `s,a,b,t0,y0,t1,y1`.
pub fn chords_csv(chords: &[SubgradientChord]) -> String {
    let mut out = String::from("s,a,b,t0,y0,t1,y1\n");
    for c in chords {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt17(c.s),
            fmt17(c.y0),
            fmt17(c.y1),
            fmt17(c.t0),
            fmt17(c.y0),
            fmt17(c.t1),
            fmt17(c.y1)
        ));
    }
    out
}

/// Swept-region dump for figures: occupancy downsampled to at most
/// `max_cells` per axis (a coarse cell is set when any fine cell under it
/// is).
pub fn downsample_occupancy(region: &SweptRegion, max_cells: usize) -> Vec<(usize, usize)> {
    if region.occupied == 0 {
        return vec![];
    }
    let factor = (region.cells + max_cells - 1) / max_cells;
    let coarse = (region.cells + factor - 1) / factor;
    let mut out = Vec::new();
    for ct in 0..coarse {
        for cy in 0..coarse {
            'cell: for ft in ct * factor..((ct + 1) * factor).min(region.cells) {
                for fy in cy * factor..((cy + 1) * factor).min(region.cells) {
                    if region.is_occupied(ft, fy) {
                        out.push((ct, cy));
                        break 'cell;
                    }
                }
            }
        }
    }
    out
}
