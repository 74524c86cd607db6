//! Resonances: zeros of `det L₊` on the continued sheet in the lower half
//! plane, located by argument-principle counting plus Newton refinement.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::livsic::livsic_matrix;
use crate::model::ModelSpec;
use crate::quadrature::circle_moment;
use crate::stieltjes::SheetTag;

/// Singular-value threshold for kernel extraction.
pub const KERNEL_THRESHOLD: f64 = 1e-8;
/// Boundary samples with `σ_min(L₊)` below this trigger a dilation.
pub const BOUNDARY_SIGMA_MIN: f64 = 1e-9;
/// Required clearance between a contour and the pole set.
pub const POLE_MARGIN: f64 = 1e-3;
/// Nodes of the trapezoidal rule used for residues.
pub const RESIDUE_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Distance from `z` to the boundary of the rectangle.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let dx = if z.re < self.re_min {
            self.re_min - z.re
        } else if z.re > self.re_max {
            z.re - self.re_max
        } else {
            0.0
        };
        let dy = if z.im < self.im_min {
            self.im_min - z.im
        } else if z.im > self.im_max {
            z.im - self.im_max
        } else {
            0.0
        };
        if dx > 0.0 || dy > 0.0 {
            return (dx * dx + dy * dy).sqrt();
        }
        (z.re - self.re_min).min(self.re_max - z.re).min(z.im - self.im_min).min(self.im_max - z.im)
    }

    /// Scale about the center by `1 + f`.
    pub fn dilate(&self, f: f64) -> Self {
        let c = self.center();
        let hw = 0.5 * self.width() * (1.0 + f);
        let hh = 0.5 * self.height() * (1.0 + f);
        Self::new(c.re - hw, c.re + hw, c.im - hh, c.im + hh)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Splits the longer side at the fraction `t`.
    fn split(&self, t: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let x = self.re_min + t * self.width();
            (Self::new(self.re_min, x, self.im_min, self.im_max), Self::new(x, self.re_max, self.im_min, self.im_max))
        } else {
            let y = self.im_min + t * self.height();
            (Self::new(self.re_min, self.re_max, self.im_min, y), Self::new(self.re_min, self.re_max, y, self.im_max))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchRegion {
    pub rect: Rect,
    pub max_depth: u32,
    /// Newton stops once a step is below `newton_tol · max(1, |z|)`.
    pub newton_tol: f64,
    pub boundary_samples_per_edge: usize,
}

impl SearchRegion {
    pub fn new(rect: Rect) -> Self {
        Self { rect, max_depth: 24, newton_tol: 1e-15, boundary_samples_per_edge: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rect;
        let finite = [r.re_min, r.re_max, r.im_min, r.im_max].iter().all(|x| x.is_finite());
        if !finite || !(r.re_min < r.re_max) || !(r.im_min < r.im_max) {
            return Err(Error::invalid("search rectangle must have positive width and height"));
        }
        if r.im_max > -1e-8 {
            return Err(Error::invalid("search rectangle must lie in Im z <= -1e-8"));
        }
        if self.boundary_samples_per_edge == 0 {
            return Err(Error::invalid("at least one boundary sample per edge is required"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Resonance {
    pub zeta: Complex64,
    /// Orthonormal columns spanning `ker L₊(ζ)`.
    pub kernel_basis: CMat,
    pub geometric_multiplicity: usize,
    /// Winding number of `det L₊` around the residue circle.
    pub winding_multiplicity: i64,
    /// `(1/2πi) ∮ L₊(z)⁻¹ dz` around `ζ`.
    pub residue_linv: CMat,
    /// Radius of the circle used for residues at this point.
    pub residue_radius: f64,
    /// `σ_min(L₊(ζ))` at the refined root.
    pub newton_residual: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SearchReport {
    pub resonances: Vec<Resonance>,
    pub warnings: Vec<String>,
    /// The rectangle actually searched after pole-margin and dilation
    /// adjustments.
    pub rect: Option<Rect>,
}

fn det_plus(spec: &ModelSpec, z: Complex64) -> Result<Complex64> {
    Ok(livsic_matrix(spec, z, SheetTag::PlusContinued)?.det())
}

/// Phase change of `f` along the path `t ↦ path(t)`, `t ∈ [0, 1]`, with
/// subdivision until every step is below π/2 and agrees with its midpoint
/// refinement.
fn path_phase<F, P>(f: &mut F, path: &P, samples: usize) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
    P: Fn(f64) -> Complex64,
{
    fn seg<F, P>(f: &mut F, path: &P, t0: f64, f0: Complex64, t1: f64, f1: Complex64, depth: u32) -> Result<f64>
    where
        F: FnMut(Complex64) -> Result<Complex64>,
        P: Fn(f64) -> Complex64,
    {
        let d = (f1 / f0).arg();
        let tm = 0.5 * (t0 + t1);
        let fm = f(path(tm))?;
        let d1 = (fm / f0).arg();
        let d2 = (f1 / fm).arg();
        if d.abs() < PI / 2.0 && (d1 + d2 - d).abs() < 1e-6 {
            return Ok(d1 + d2);
        }
        if depth >= 60 {
            return Err(Error::NoConvergence { what: "contour phase resolution" });
        }
        Ok(seg(f, path, t0, f0, tm, fm, depth + 1)? + seg(f, path, tm, fm, t1, f1, depth + 1)?)
    }
    let mut total = 0.0;
    let mut t_prev = 0.0;
    let mut f_prev = f(path(0.0))?;
    for k in 1..=samples {
        let t = k as f64 / samples as f64;
        let fv = f(path(t))?;
        total += seg(f, path, t_prev, f_prev, t, fv, 0)?;
        t_prev = t;
        f_prev = fv;
    }
    Ok(total)
}

fn round_winding(phase: f64) -> Result<i64> {
    let w = phase / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 0.05 {
        return Err(Error::NoConvergence { what: "winding number is not close to an integer" });
    }
    Ok(r as i64)
}

/// Winding number of an arbitrary nonvanishing function around the
/// positively oriented boundary of `rect`.
pub fn winding_number_of<F>(mut f: F, rect: &Rect, samples_per_edge: usize) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let c = rect.corners();
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        total += path_phase(&mut f, &|t: f64| a + (b - a) * t, samples_per_edge)?;
    }
    round_winding(total)
}

/// Winding number of `f` around the circle `|z - c| = r`.
pub fn circle_winding_of<F>(mut f: F, center: Complex64, radius: f64, samples: usize) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let phase = path_phase(&mut f, &|t: f64| center + Complex64::from_polar(radius, 2.0 * PI * t), samples)?;
    round_winding(phase)
}

/// `(1/2πi) ∮ d log det L₊` around `rect`: zeros minus poles of `det L₊`
/// inside. A boundary passing within `σ_min ≤ 1e-9` of a zero is dilated by
/// 1%, at most three times.
pub fn winding_number(spec: &ModelSpec, rect: &Rect) -> Result<i64> {
    Ok(winding_checked(spec, rect, 16)?.0)
}

fn winding_checked(spec: &ModelSpec, rect: &Rect, samples: usize) -> Result<(i64, Rect)> {
    let mut r = *rect;
    for _ in 0..4 {
        let mut hit = false;
        let res = winding_number_of(
            |z| {
                let l = livsic_matrix(spec, z, SheetTag::PlusContinued)?;
                if l.sigma_min() <= BOUNDARY_SIGMA_MIN {
                    hit = true;
                    return Err(Error::BoundaryZero);
                }
                Ok(l.det())
            },
            &r,
            samples,
        );
        match res {
            Ok(w) => return Ok((w, r)),
            Err(Error::BoundaryZero) if hit => r = r.dilate(0.01),
            Err(e) => return Err(e),
        }
    }
    Err(Error::BoundaryZero)
}

/// Order of the pole of `det L₊` at a lower pole `p` of the form factor
/// (zero if `det L₊` is regular there).
fn pole_order(spec: &ModelSpec, p: Complex64) -> Result<i64> {
    let others =
        spec.pole_set().iter().filter(|q| (*q - p).norm() > 0.0).map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
    let r = POLE_MARGIN.min(0.25 * others).min(0.5 * p.norm());
    Ok(-circle_winding_of(|z| det_plus(spec, z), p, r, 32)?)
}

/// Number of zeros of `det L₊` in `rect`, correcting the winding number
/// for the poles of `det L₊` at points of the pole set inside.
pub fn zero_count(spec: &ModelSpec, rect: &Rect) -> Result<(i64, Rect)> {
    zero_count_with(spec, rect, 16)
}

fn zero_count_with(spec: &ModelSpec, rect: &Rect, samples: usize) -> Result<(i64, Rect)> {
    let (w, used) = winding_checked(spec, rect, samples)?;
    let mut count = w;
    for p in spec.lower_poles() {
        if used.contains(p) {
            count += pole_order(spec, p)?;
        }
    }
    Ok((count, used))
}

/// Newton iteration on `det L₊` with a central-difference derivative.
pub fn newton_refine(spec: &ModelSpec, z0: Complex64, tol: f64) -> Result<Complex64> {
    let mut z = z0;
    for _ in 0..100 {
        let scale = z.norm().max(1.0);
        let h = 1e-6 * scale;
        let f = det_plus(spec, z)?;
        if f == Complex64::new(0.0, 0.0) {
            return Ok(z);
        }
        let hp = Complex64::new(h, 0.0);
        let df = (det_plus(spec, z + hp)? - det_plus(spec, z - hp)?) / (2.0 * h);
        if df.norm() == 0.0 || !df.is_finite() {
            return Err(Error::NoConvergence { what: "Newton derivative vanished" });
        }
        let step = f / df;
        z -= step;
        if !z.is_finite() {
            return Err(Error::NoConvergence { what: "Newton diverged" });
        }
        if step.norm() <= tol * scale {
            // one polishing step
            let f = det_plus(spec, z)?;
            let df = (det_plus(spec, z + hp)? - det_plus(spec, z - hp)?) / (2.0 * h);
            let s = f / df;
            if s.is_finite() && s.norm() <= 1e3 * tol * scale {
                z -= s;
            }
            return Ok(z);
        }
    }
    Err(Error::NoConvergence { what: "Newton iteration" })
}

fn split_fractions() -> [f64; 7] {
    [0.5, 0.4625, 0.5375, 0.425, 0.575, 0.3875, 0.6125]
}

struct Search<'a> {
    spec: &'a ModelSpec,
    region: &'a SearchRegion,
    roots: Vec<Complex64>,
    unresolved: Vec<Rect>,
    warnings: Vec<String>,
}

impl Search<'_> {
    fn clear_of_poles(&self, r: &Rect) -> bool {
        self.spec.lower_poles().iter().all(|p| r.boundary_distance(*p) >= POLE_MARGIN)
    }

    fn visit(&mut self, rect: Rect, count: i64, depth: u32) -> Result<()> {
        if count <= 0 {
            if count < 0 {
                self.warnings.push(format!("negative zero count {count} in {rect:?}"));
            }
            return Ok(());
        }
        if count == 1 {
            let mut starts = vec![rect.center()];
            let c = rect.center();
            let (hw, hh) = (0.25 * rect.width(), 0.25 * rect.height());
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                starts.push(c + Complex64::new(sx * hw, sy * hh));
            }
            let slack = 1e-9 * rect.center().norm().max(1.0);
            for s in starts {
                if let Ok(z) = newton_refine(self.spec, s, self.region.newton_tol) {
                    let grown =
                        Rect::new(rect.re_min - slack, rect.re_max + slack, rect.im_min - slack, rect.im_max + slack);
                    if grown.contains(z) {
                        self.roots.push(z);
                        return Ok(());
                    }
                }
            }
        }
        if depth >= self.region.max_depth {
            self.unresolved.push(rect);
            return Ok(());
        }
        for t in split_fractions() {
            let (a, b) = rect.split(t);
            if !(self.clear_of_poles(&a) && self.clear_of_poles(&b)) {
                continue;
            }
            let ca = zero_count_with(self.spec, &a, self.region.boundary_samples_per_edge);
            let cb = zero_count_with(self.spec, &b, self.region.boundary_samples_per_edge);
            let (Ok((na, ra)), Ok((nb, rb))) = (ca, cb) else {
                continue;
            };
            if ra != a || rb != b {
                // a child had to be dilated: the split line runs through a zero
                continue;
            }
            if na + nb != count {
                self.warnings.push(format!("child counts {na}+{nb} differ from parent count {count} in {rect:?}"));
            }
            self.visit(a, na, depth + 1)?;
            self.visit(b, nb, depth + 1)?;
            return Ok(());
        }
        self.unresolved.push(rect);
        Ok(())
    }
}

/// Distance from `z` to the cut `(-∞, 0]` of the continued sheet.
fn cut_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.norm()
    } else {
        z.im.abs()
    }
}

/// Radius for contour work around `zeta`: `min(1e-2, half the distance to
/// the nearest other root, point of the pole set or the cut)`.
pub fn contour_radius(spec: &ModelSpec, zeta: Complex64, other_roots: &[Complex64]) -> f64 {
    let mut r = 1e-2_f64;
    for z in other_roots {
        let d = (z - zeta).norm();
        if d > 0.0 {
            r = r.min(0.5 * d);
        }
    }
    for p in spec.pole_set() {
        let d = (p - zeta).norm();
        if d > 1e-12 {
            r = r.min(0.5 * d);
        }
    }
    r.min(0.5 * cut_distance(zeta))
}

/// Kernel, multiplicities and residue of `L₊⁻¹` at a refined root.
pub fn characterize(spec: &ModelSpec, zeta: Complex64, other_roots: &[Complex64]) -> Result<Resonance> {
    let l = livsic_matrix(spec, zeta, SheetTag::PlusContinued)?;
    let svd = l.svd();
    let sigma_min = *svd.sigma.last().unwrap_or(&0.0);
    let mut kernel = svd.null_space(KERNEL_THRESHOLD);
    if kernel.cols() == 0 {
        return Err(Error::NoConvergence { what: "refined root has no kernel at the 1e-8 threshold" });
    }
    if kernel.cols() > spec.n() {
        kernel = svd.null_space(0.0);
    }
    let radius = contour_radius(spec, zeta, other_roots);
    let residue =
        circle_moment(zeta, radius, RESIDUE_NODES, 0, |z| livsic_matrix(spec, z, SheetTag::PlusContinued)?.inverse())?;
    let winding = circle_winding_of(|z| det_plus(spec, z), zeta, radius, 32)?;
    Ok(Resonance {
        zeta,
        geometric_multiplicity: kernel.cols(),
        kernel_basis: kernel,
        winding_multiplicity: winding,
        residue_linv: residue,
        residue_radius: radius,
        newton_residual: sigma_min,
    })
}

/// All resonances in the region, with diagnostics.
pub fn search_resonances(spec: &ModelSpec, region: &SearchRegion) -> Result<SearchReport> {
    region.validate()?;
    let mut report = SearchReport::default();
    if spec.form_factor().is_zero() {
        report.rect = Some(region.rect);
        return Ok(report);
    }
    // keep the boundary away from the pole set
    let mut rect = region.rect;
    for p in spec.lower_poles() {
        let d = rect.boundary_distance(p);
        if d < POLE_MARGIN {
            let grown = rect.dilate(4.0 * POLE_MARGIN / rect.width().min(rect.height()));
            report.warnings.push(format!("rectangle adjusted to clear the pole {p}"));
            rect = if grown.im_max <= -1e-8 && grown.boundary_distance(p) >= POLE_MARGIN {
                grown
            } else {
                rect.dilate(-4.0 * POLE_MARGIN / rect.width().min(rect.height()))
            };
        }
    }
    let (count, used) = zero_count_with(spec, &rect, region.boundary_samples_per_edge)?;
    if used != rect {
        report.warnings.push(String::from("rectangle dilated to move its boundary off a zero"));
    }
    report.rect = Some(used);
    let mut s = Search { spec, region, roots: Vec::new(), unresolved: Vec::new(), warnings: Vec::new() };
    s.visit(used, count, 0)?;
    report.warnings.append(&mut s.warnings);
    if !s.unresolved.is_empty() {
        return Err(Error::MaxDepthExceeded { unresolved: s.unresolved });
    }
    let mut roots = s.roots;
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots.dedup_by(|a, b| (*a - *b).norm() <= 1e-10 * a.norm().max(1.0));
    for (i, &z) in roots.iter().enumerate() {
        let others: Vec<Complex64> = roots.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| *w).collect();
        report.resonances.push(characterize(spec, z, &others)?);
    }
    Ok(report)
}

pub fn find_resonances(spec: &ModelSpec, region: &SearchRegion) -> Result<Vec<Resonance>> {
    Ok(search_resonances(spec, region)?.resonances)
}

#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub eps: f64,
    pub resonances: Vec<Resonance>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryEvent {
    /// Two continued roots met at this coupling.
    Merge { eps: f64, zeta: Complex64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub events: Vec<TrajectoryEvent>,
    /// For each continued root: the level it approaches, and the fitted `C`
    /// in `|ζ(ε) - a| ≤ C ε²`.
    pub limits: Vec<(f64, f64)>,
}

/// Follows every resonance found at the largest coupling down the grid by
/// Newton continuation, seeded with the quadratic predictor
/// `a + (ζ - a)(ε'/ε)²` towards the nearest level `a`.
pub fn trace_trajectory(spec: &ModelSpec, eps_grid: &[f64], seed: &SearchRegion) -> Result<Trajectory> {
    if eps_grid.is_empty() {
        return Err(Error::invalid("empty coupling grid"));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::invalid("couplings must lie in (0, 1]"));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("coupling grid must be strictly descending"));
    }
    let first = spec.with_epsilon(eps_grid[0])?;
    let start = find_resonances(&first, seed)?;
    let mut points = vec![TrajectoryPoint { eps: eps_grid[0], resonances: start.clone() }];
    let mut events = Vec::new();
    let mut current: Vec<Complex64> = start.iter().map(|r| r.zeta).collect();
    let levels = spec.a().to_vec();
    let nearest = |z: Complex64| levels.iter().copied().min_by(|a, b| (z.re - a).abs().total_cmp(&(z.re - b).abs()));
    let mut history: Vec<(f64, Vec<Complex64>)> = vec![(eps_grid[0], current.clone())];
    for w in eps_grid.windows(2) {
        let (e0, e1) = (w[0], w[1]);
        let s = spec.with_epsilon(e1)?;
        let ratio = (e1 / e0) * (e1 / e0);
        let mut next = Vec::with_capacity(current.len());
        for &z in &current {
            let a = nearest(z).unwrap_or(z.re);
            let guess = Complex64::new(a, 0.0) + (z - a) * ratio;
            let refined = newton_refine(&s, guess, seed.newton_tol).or_else(|_| newton_refine(&s, z, seed.newton_tol));
            let znew = match refined {
                Ok(v) => v,
                Err(_) => {
                    return Err(Error::ContinuationLost { eps: e1, reason: "Newton diverged", last_good: history });
                }
            };
            if !(znew.im < 0.0) {
                return Err(Error::ContinuationLost {
                    eps: e1,
                    reason: "root left the lower half plane",
                    last_good: history,
                });
            }
            next.push(znew);
        }
        for i in 0..next.len() {
            for j in 0..i {
                if (next[i] - next[j]).norm() <= 1e-8 * next[i].norm().max(1.0) {
                    events.push(TrajectoryEvent::Merge { eps: e1, zeta: next[i] });
                }
            }
        }
        let mut res = Vec::with_capacity(next.len());
        for (i, &z) in next.iter().enumerate() {
            let others: Vec<Complex64> = next.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| *w).collect();
            res.push(characterize(&s, z, &others)?);
        }
        history.push((e1, next.clone()));
        points.push(TrajectoryPoint { eps: e1, resonances: res });
        current = next;
    }
    let mut limits = Vec::new();
    for k in 0..current.len() {
        let a = nearest(current[k]).unwrap_or(current[k].re);
        let c = history.iter().map(|(e, zs)| (zs[k] - a).norm() / (e * e)).fold(0.0, f64::max);
        limits.push((a, c));
    }
    Ok(Trajectory { points, events, limits })
}
