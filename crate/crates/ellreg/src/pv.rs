//! Independent numerical verification of single integration steps:
//! principal-value quadrature over the fundamental parallelogram and the
//! contour (contact-term) formula.
//!
//! The parallelogram is parametrized by lattice coordinates `(s, t)` with
//! `z = base + s + t*tau`, where the normalized measure is exactly `ds dt`
//! (a constant integrates to 1). Excision disks and polar patches are round
//! in the flat metric of the curve (`|dz|`): on such circles the uniform
//! angular rule annihilates every `conj(w)^m w^-k` mode with `m < k`, so the
//! singular parts drop out exactly and the excision limit is reached with an
//! `O(eps^2)` tail from the smooth remainder. Coordinate "disks" in `(s, t)`
//! would not do: they are not metric balls, and a scale-invariant `w^-2`
//! contribution would shift the limit.
//!
//! The domain decomposition is exact: a radial bump `chi` (1 inside half the
//! patch radius, 0 outside the patch) splits the integrand into a polar part
//! `F chi` handled by log-radial Gauss x angular trapezoid quadrature and a
//! globally smooth part `F (1 - chi)` handled by adaptively refined panels.

use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::expr::{AtomKind, Expr, Term};
use crate::kernel::ModularContext;
use crate::{Error, Point, Result};

/// Excision-tail model. Round-disk excision against the smooth volume form
/// leaves only even powers of the radius (the angular average kills every
/// `conj(w)^m w^-k` mode with `m != k`), so both models act on `x = eps^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Fit `v0 + a x` through the last two excision levels.
    Linear,
    /// Fit `v0 + a x + b x log x` through three levels (guards against
    /// logarithmic terms for high pole orders).
    EpsLogEps,
}

#[derive(Debug, Clone)]
pub struct PvOptions {
    /// Decreasing excision radii in flat lattice metric.
    pub eps_list: Vec<f64>,
    /// Radius of the polar patches (clipped to the pole geometry).
    pub patch_radius: f64,
    /// Radial Gauss nodes per annulus.
    pub radial_nodes: usize,
    /// Uniform angular nodes per annulus.
    pub angular_nodes: usize,
    /// Gauss nodes per axis per panel.
    pub panel_nodes: usize,
    /// Extrapolation model; `None` fits the even excision expansion
    /// `v0 + a eps^2 + b eps^4` (exact for these integrands), falling back
    /// to the linear model when fewer than three levels are available.
    pub extrapolation: Option<Extrapolation>,
    /// Relative tolerance the report is judged against.
    pub tolerance: f64,
    /// Base panel grid (cells per axis).
    pub base_grid: usize,
    /// Adaptive refinement depth for cells near patch boundaries.
    pub refine_depth: usize,
    /// Test hook: force the fundamental-domain translation.
    pub domain_shift: Option<(f64, f64)>,
}

impl Default for PvOptions {
    fn default() -> Self {
        PvOptions {
            eps_list: vec![0.2, 0.1, 0.05],
            patch_radius: 0.35,
            radial_nodes: 32,
            angular_nodes: 64,
            panel_nodes: 6,
            extrapolation: None,
            tolerance: 1e-3,
            base_grid: 16,
            refine_depth: 3,
            domain_shift: None,
        }
    }
}

/// Result of a principal-value run.
#[derive(Debug, Clone)]
pub struct PvReport {
    pub value: Complex64,
    pub per_eps_values: Vec<(f64, Complex64)>,
    pub extrapolated_error: f64,
    pub converged: bool,
}

/// Verdict of an engine-vs-oracle comparison. The deviation is measured
/// relative to `max(|oracle|, 1)` so that near-zero values are judged on an
/// absolute scale.
#[derive(Debug, Clone)]
pub struct CompareVerdict {
    pub pass: bool,
    pub rel_dev: f64,
    pub engine: Complex64,
    pub oracle: Complex64,
}

pub fn compare(engine: Complex64, oracle: &PvReport, rel_tol: f64) -> CompareVerdict {
    let rel_dev = (engine - oracle.value).norm() / oracle.value.norm().max(1.0);
    CompareVerdict {
        pass: oracle.converged && rel_dev < rel_tol,
        rel_dev,
        engine,
        oracle: oracle.value,
    }
}

/// One pole patch in domain coordinates.
#[derive(Debug, Clone)]
struct Patch {
    /// Position in `[0,1]^2` cell coordinates of the shifted domain.
    ab: (f64, f64),
    /// Complex position `base + a + b tau`.
    z: Complex64,
}

#[derive(Debug, Clone)]
struct Domain {
    base: Complex64,
    tau: Complex64,
    patches: Vec<Patch>,
    patch_radius: f64,
}

impl Domain {
    fn z_at(&self, a: f64, b: f64) -> Complex64 {
        self.base + Complex64::new(a, 0.0) + b * self.tau
    }
}

fn fract(x: f64) -> f64 {
    x - x.floor()
}

/// Flat-metric distance from an interior point to the parallelogram edges
/// spanned by 1 and tau at `base`.
fn edge_margin(p: Complex64, base: Complex64, tau: Complex64) -> f64 {
    let d = p - base;
    // edges with direction 1 at t = 0 and t = 1
    let m1 = (d.im).abs().min((d - tau).im.abs());
    // edges with direction tau at s = 0 and s = 1
    let dist_tau = |v: Complex64| (v * tau.conj()).im.abs() / tau.norm();
    let m2 = dist_tau(d).min(dist_tau(d - Complex64::new(1.0, 0.0)));
    m1.min(m2)
}

/// Translates the fundamental domain so every pole keeps a healthy flat-metric
/// margin from the boundary, and clips the patch radius to the pole geometry.
fn setup_domain(
    ctx: &ModularContext,
    pole_points: &[Complex64],
    opts: &PvOptions,
) -> Result<Domain> {
    let tau = ctx.tau();
    let coords: Vec<(f64, f64)> = pole_points
        .iter()
        .map(|z| {
            let (s, t) = ctx.lattice_coords(*z);
            (fract(s), fract(t))
        })
        .collect();

    let margin_for = |shift: (f64, f64)| -> f64 {
        let base = Complex64::new(shift.0, 0.0) + shift.1 * tau;
        coords
            .iter()
            .map(|&(s, t)| {
                let a = fract(s - shift.0);
                let b = fract(t - shift.1);
                edge_margin(base + Complex64::new(a, 0.0) + b * tau, base, tau)
            })
            .fold(f64::INFINITY, f64::min)
    };

    let shift = match opts.domain_shift {
        Some(sh) => sh,
        None => {
            if coords.is_empty() {
                (0.0, 0.0)
            } else {
                let mut best = (0.0, 0.0);
                let mut best_margin = -1.0;
                let n = 37;
                for i in 0..n {
                    for j in 0..n {
                        let cand = (i as f64 / n as f64, j as f64 / n as f64);
                        let m = margin_for(cand);
                        if m > best_margin {
                            best_margin = m;
                            best = cand;
                        }
                    }
                }
                best
            }
        }
    };
    let margin = if coords.is_empty() {
        0.5 * tau.im.min(1.0)
    } else {
        margin_for(shift)
    };
    if margin < 0.05 {
        return Err(Error::PoleOnBoundary);
    }

    let base = Complex64::new(shift.0, 0.0) + shift.1 * tau;
    let patches: Vec<Patch> = coords
        .iter()
        .map(|&(s, t)| {
            let a = fract(s - shift.0);
            let b = fract(t - shift.1);
            Patch {
                ab: (a, b),
                z: base + Complex64::new(a, 0.0) + b * tau,
            }
        })
        .collect();

    // Minimal pairwise flat-metric separation, including lattice copies.
    let mut min_sep = f64::INFINITY;
    for (i, p) in patches.iter().enumerate() {
        for q in patches.iter().skip(i + 1) {
            for da in -1..=1 {
                for db in -1..=1 {
                    let d = p.z - q.z + Complex64::new(da as f64, 0.0) + db as f64 * tau;
                    min_sep = min_sep.min(d.norm());
                }
            }
        }
    }
    let patch_radius = opts
        .patch_radius
        .min(0.45 * min_sep)
        .min(0.9 * margin)
        .max(1e-3);

    Ok(Domain {
        base,
        tau,
        patches,
        patch_radius,
    })
}

/// Smooth radial bump: 1 for `rho <= r/2`, 0 for `rho >= r`, C^5 between
/// (the junction smoothness bounds the panel quadrature error).
fn chi(rho: f64, r: f64) -> f64 {
    if rho <= 0.5 * r {
        1.0
    } else if rho >= r {
        0.0
    } else {
        let x = (r - rho) / (0.5 * r);
        let x2 = x * x;
        let x3 = x2 * x;
        x3 * x3 * (462.0 - 1980.0 * x + 3465.0 * x2 - 3080.0 * x3 + 1386.0 * x2 * x2 - 252.0 * x2 * x3)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence.
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed pairwise-summation tree: deterministic and more accurate than a
/// running sum, independent of how the terms were produced.
fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// `F (1 - chi)` over `[0,1]^2` in `(s,t)` coordinates, panels refined near
/// the (flat-metric) patch shells. Base cells evaluate concurrently; the
/// accumulation order is fixed, so results are run-to-run deterministic.
fn panel_integral<F>(f: &F, dom: &Domain, opts: &PvOptions) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let (gn, gw) = gauss_legendre(opts.panel_nodes);
    // Conservative flat-metric half-extent of an h x h coordinate cell.
    let kappa = 0.5 * (Complex64::new(1.0, 0.0) + dom.tau)
        .norm()
        .max((Complex64::new(1.0, 0.0) - dom.tau).norm());

    fn dist_z(a: f64, b: f64, p: &Patch, tau: Complex64) -> f64 {
        (Complex64::new(a - p.ab.0, 0.0) + (b - p.ab.1) * tau).norm()
    }

    // One unit of work per base cell; refinement recurses inside it.
    fn cell_value<F>(
        (a0, b0, h, depth): (f64, f64, f64, usize),
        f: &F,
        dom: &Domain,
        opts: &PvOptions,
        gn: &[f64],
        gw: &[f64],
        kappa: f64,
    ) -> Result<Complex64>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let r = dom.patch_radius;
        let (ca, cb) = (a0 + 0.5 * h, b0 + 0.5 * h);
        let half_ext = h * kappa;
        let mut near_shell = false;
        for p in &dom.patches {
            let d = dist_z(ca, cb, p, dom.tau);
            if d + half_ext <= 0.5 * r {
                // integrand is identically zero here
                return Ok(Complex64::new(0.0, 0.0));
            }
            if d - half_ext < r && d + half_ext > 0.5 * r {
                near_shell = true;
            }
        }
        if near_shell && depth < opts.refine_depth {
            let h2 = 0.5 * h;
            let mut acc = Complex64::new(0.0, 0.0);
            for (da, db) in [(0.0, 0.0), (h2, 0.0), (0.0, h2), (h2, h2)] {
                acc += cell_value((a0 + da, b0 + db, h2, depth + 1), f, dom, opts, gn, gw, kappa)?;
            }
            return Ok(acc);
        }
        // Tensor Gauss rule on the cell with the (1 - chi) weight.
        let mut cell = Complex64::new(0.0, 0.0);
        for (xi, wi) in gn.iter().zip(gw.iter()) {
            let a = a0 + 0.5 * h * (xi + 1.0);
            for (yj, wj) in gn.iter().zip(gw.iter()) {
                let b = b0 + 0.5 * h * (yj + 1.0);
                let mut weight = 1.0;
                for p in &dom.patches {
                    weight *= 1.0 - chi(dist_z(a, b, p, dom.tau), r);
                    if weight == 0.0 {
                        break;
                    }
                }
                if weight == 0.0 {
                    continue;
                }
                cell += wi * wj * weight * f(dom.z_at(a, b))?;
            }
        }
        Ok(cell * (0.25 * h * h))
    }

    let n0 = opts.base_grid;
    let h0 = 1.0 / n0 as f64;
    let jobs: Vec<(usize, usize)> = (0..n0)
        .flat_map(|i| (0..n0).map(move |j| (i, j)))
        .collect();
    let values: Vec<Complex64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            cell_value(
                (i as f64 * h0, j as f64 * h0, h0, 0),
                f,
                dom,
                opts,
                &gn,
                &gw,
                kappa,
            )
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&values))
}

/// `F chi` over the flat-metric annulus `eps <= |w| <= patch_radius` around
/// one patch: log-radial Gauss x angular midpoint rule. The measure is
/// `ds dt = dA_z / im(tau)`, i.e. `rho drho dtheta / im(tau)`.
fn annulus_integral<F>(
    f: &F,
    dom: &Domain,
    patch: &Patch,
    eps: f64,
    opts: &PvOptions,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let r = dom.patch_radius;
    let (gn, gw) = gauss_legendre(opts.radial_nodes);
    let (x0, x1) = (eps.ln(), r.ln());
    let mid = 0.5 * (x0 + x1);
    let half = 0.5 * (x1 - x0);
    let na = opts.angular_nodes;
    let mut total = Complex64::new(0.0, 0.0);
    for (xi, wi) in gn.iter().zip(gw.iter()) {
        let rho = (mid + half * xi).exp();
        let wchi = chi(rho, r);
        if wchi == 0.0 {
            continue;
        }
        let mut ring = Complex64::new(0.0, 0.0);
        for j in 0..na {
            let phi = 2.0 * PI * (j as f64 + 0.5) / na as f64;
            let z = patch.z + rho * Complex64::new(phi.cos(), phi.sin());
            ring += f(z)?;
        }
        // rho drho = rho^2 dx on the log grid.
        total += wi * half * wchi * rho * rho * ring * (2.0 * PI / na as f64) / dom.tau.im;
    }
    Ok(total)
}

/// Shared core: per-epsilon values of the excised integral of `f`.
fn pv_core<F>(
    f: &F,
    dom: &Domain,
    eps_list: &[f64],
    opts: &PvOptions,
) -> Result<Vec<(f64, Complex64)>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let remainder = panel_integral(f, dom, opts)?;
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut v = remainder;
        for p in &dom.patches {
            v += annulus_integral(f, dom, p, eps, opts)?;
        }
        out.push((eps, v));
    }
    Ok(out)
}

fn fit_linear(vals: &[(f64, Complex64)]) -> Complex64 {
    let n = vals.len();
    let (e1, v1) = vals[n - 2];
    let (e2, v2) = vals[n - 1];
    let (x1, x2) = (e1 * e1, e2 * e2);
    (v2 * x1 - v1 * x2) / (x1 - x2)
}

/// Solves the 3-point fit `v = x0*row0 + x1*row1 + x2*row2` and returns the
/// constant term.
fn fit_three(rows: [[f64; 3]; 3], rhs: [Complex64; 3]) -> Complex64 {
    let mut a = rows;
    let mut b = rhs;
    for col in 0..3 {
        let mut piv = col;
        for r in col + 1..3 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let m = a[r][col] / a[col][col];
            let pivot_row = a[col];
            for (entry, p) in a[r].iter_mut().zip(pivot_row.iter()).skip(col) {
                *entry -= m * p;
            }
            b[r] -= m * b[col];
        }
    }
    let x2 = b[2] / a[2][2];
    let x1 = (b[1] - x2 * a[1][2]) / a[1][1];
    (b[0] - x1 * a[0][1] - x2 * a[0][2]) / a[0][0]
}

fn last_three(vals: &[(f64, Complex64)]) -> Option<([f64; 3], [Complex64; 3])> {
    let n = vals.len();
    if n < 3 {
        return None;
    }
    Some((
        [vals[n - 3].0, vals[n - 2].0, vals[n - 1].0],
        [vals[n - 3].1, vals[n - 2].1, vals[n - 1].1],
    ))
}

fn fit_eps_log_eps(vals: &[(f64, Complex64)]) -> Complex64 {
    match last_three(vals) {
        None => fit_linear(vals),
        Some((es, vs)) => {
            let row = |e: f64| {
                let x = e * e;
                [1.0, x, x * x.ln()]
            };
            fit_three([row(es[0]), row(es[1]), row(es[2])], vs)
        }
    }
}

/// Richardson fit of the even excision expansion `v0 + a eps^2 + b eps^4`.
fn fit_even(vals: &[(f64, Complex64)]) -> Complex64 {
    match last_three(vals) {
        None => fit_linear(vals),
        Some((es, vs)) => {
            let row = |e: f64| {
                let x = e * e;
                [1.0, x, x * x]
            };
            fit_three([row(es[0]), row(es[1]), row(es[2])], vs)
        }
    }
}

fn extrapolate(
    vals: &[(f64, Complex64)],
    model: Option<Extrapolation>,
    tolerance: f64,
) -> (Complex64, f64, bool) {
    let scale = vals
        .iter()
        .map(|(_, v)| v.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let spread = vals
        .iter()
        .map(|(_, v)| (v - vals[vals.len() - 1].1).norm())
        .fold(0.0f64, f64::max);
    if spread < 1e-11 * scale {
        // The excision tail is below quadrature noise; extrapolation would
        // only amplify it.
        let v = vals[vals.len() - 1].1;
        return (v, spread.max(1e-14 * scale), true);
    }
    let even = fit_even(vals);
    let chosen = match model {
        None => even,
        Some(Extrapolation::Linear) => fit_linear(vals),
        Some(Extrapolation::EpsLogEps) => fit_eps_log_eps(vals),
    };
    // The even fit is the reference; disagreement with the next-best model
    // estimates the unresolved tail.
    let alt = if model.is_none() { fit_linear(vals) } else { even };
    let err = (chosen - alt).norm().max(1e-13 * scale);
    let converged = err < tolerance * chosen.norm().max(1.0);
    (chosen, err, converged)
}

/// Builds the pole list of `f` in the active variable under an assignment.
fn pole_positions(
    f: &Expr,
    active: Point,
    assign: &BTreeMap<Point, Complex64>,
) -> Result<(Vec<Complex64>, u32)> {
    let mut zs = Vec::new();
    let mut max_order = 0;
    for (q, ord) in f.poles_in(active) {
        let z = assign.get(&q).ok_or(Error::UnassignedPoint(q))?;
        zs.push(*z);
        max_order = max_order.max(ord);
    }
    Ok((zs, max_order))
}

fn check_pairwise_distinct(
    ctx: &ModularContext,
    assign: &BTreeMap<Point, Complex64>,
) -> Result<()> {
    let pts: Vec<(&Point, &Complex64)> = assign.iter().collect();
    for (i, (pa, za)) in pts.iter().enumerate() {
        for (pb, zb) in pts.iter().skip(i + 1) {
            let (z0, _, _) = ctx.reduce_centered(*za - *zb);
            if z0.norm() < 1e-6 {
                return Err(Error::PoleHit {
                    atom: format!("z{pa} and z{pb} coincide mod the lattice"),
                });
            }
        }
    }
    Ok(())
}

/// Principal-value quadrature of one integration step: the excision limit
/// `lim_{eps->0} int_{|s|>=eps} F` in the unit-volume normalization.
pub fn pv_single_step(
    f: &Expr,
    active: Point,
    assign: &BTreeMap<Point, Complex64>,
    ctx: &ModularContext,
    opts: &PvOptions,
) -> Result<PvReport> {
    check_pairwise_distinct(ctx, assign)?;
    let (pole_zs, max_order) = pole_positions(f, active, assign)?;
    let dom = setup_domain(ctx, &pole_zs, opts)?;

    // The excised disks must stay inside the chi = 1 plateau (radius R/2),
    // otherwise the panel part would leak into the excised region; scale
    // the radii down proportionally when the patch was clipped.
    let mut eps_list = opts.eps_list.clone();
    let max_eps = eps_list.iter().cloned().fold(0.0f64, f64::max);
    let cap = 0.45 * dom.patch_radius;
    if max_eps > cap {
        let s = cap / max_eps;
        for e in eps_list.iter_mut() {
            *e *= s;
        }
    }

    let f_eval = |z: Complex64| -> Result<Complex64> {
        let mut a = assign.clone();
        a.insert(active, z);
        f.evaluate(ctx, &a)
    };
    let vals = pv_core(&f_eval, &dom, &eps_list, opts)?;

    // Stabilization check on the epsilon sequence.
    if vals.len() >= 3 {
        let d1 = (vals[1].1 - vals[0].1).norm();
        let d2 = (vals[2].1 - vals[1].1).norm();
        let scale = vals[2].1.norm().max(1.0);
        if d2 > 1.5 * d1 && d2 > 1e-7 * scale {
            return Err(Error::NonConvergence(format!(
                "per-eps deltas grow: {d1:.3e} then {d2:.3e}"
            )));
        }
    }
    let _ = max_order;
    let (value, err, converged) = extrapolate(&vals, opts.extrapolation, opts.tolerance);
    Ok(PvReport {
        value,
        per_eps_values: vals,
        extrapolated_error: err,
        converged,
    })
}

/// The signed polynomial derivative of `F` with respect to its active-variable
/// `Zhat` atoms: `dF/d(zbar) = (-pi/im tau) * zbar_factor(F)`.
fn zbar_factor(f: &Expr, active: Point) -> Expr {
    let mut out = Expr::zero();
    for t in f.terms() {
        let mut seen = Vec::new();
        for (i, atom) in t.atoms.iter().enumerate() {
            if atom.kind != AtomKind::Zhat || !atom.involves(active) || seen.contains(atom) {
                continue;
            }
            seen.push(*atom);
            let mult = t.atoms.iter().filter(|x| *x == atom).count() as f64;
            let sign = if atom.a == active { 1.0 } else { -1.0 };
            let mut rest = t.atoms.clone();
            rest.remove(i);
            out = out.add(&Expr::from_terms(vec![Term {
                coeff: t.coeff * sign * mult,
                consts: t.consts.clone(),
                atoms: rest,
            }]));
        }
    }
    out
}

/// Contour-formula evaluation of one step: residues by small-circle contour
/// integrals of exact function values (radius 1e-2, Richardson in r^2),
/// boundary term by panelized Gauss quadrature on the parallelogram edges,
/// plus the area correction for the antiholomorphic content of `Zhat` atoms.
///
/// Uses `u(z) = (zbar - z)/(taubar - tau)`, so `phi ^ du` reproduces the
/// normalized volume form.
pub fn contour_contact_check(
    f: &Expr,
    active: Point,
    assign: &BTreeMap<Point, Complex64>,
    ctx: &ModularContext,
) -> Result<Complex64> {
    check_pairwise_distinct(ctx, assign)?;
    let (pole_zs, _) = pole_positions(f, active, assign)?;
    let opts = PvOptions::default();
    let dom = setup_domain(ctx, &pole_zs, &opts)?;
    let tau = ctx.tau();
    let u = |z: Complex64| (z.conj() - z) / (tau.conj() - tau);

    let f_eval = |z: Complex64| -> Result<Complex64> {
        let mut a = assign.clone();
        a.insert(active, z);
        f.evaluate(ctx, &a)
    };

    // 2 pi i sum res(phi u) via circles of radius r and r/2.
    let circle = |center: Complex64, r: f64| -> Result<Complex64> {
        let n = 512;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            let w = r * Complex64::new(th.cos(), th.sin());
            let z = center + w;
            acc += f_eval(z)? * u(z) * w;
        }
        // (1/2pi i) closed-int (f u) dz, dz = i w dtheta  =>  mean of f u w
        Ok(acc / n as f64)
    };
    let mut residue_term = Complex64::new(0.0, 0.0);
    for p in &dom.patches {
        let r = 1e-2;
        let i1 = circle(p.z, r)?;
        let i2 = circle(p.z, 0.5 * r)?;
        let res = (4.0 * i2 - i1) / 3.0;
        residue_term += 2.0 * PI * Complex64::new(0.0, 1.0) * res;
    }

    // Boundary term: int_{dF} phi u over the four edges.
    let (gn, gw) = gauss_legendre(10);
    let panels = 24;
    let mut boundary = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let edges: [(Complex64, Complex64); 4] = [
        (dom.base, one),
        (dom.base + one, tau),
        (dom.base + one + tau, -one),
        (dom.base + tau, -tau),
    ];
    for (start, dir) in edges {
        for p in 0..panels {
            let a0 = p as f64 / panels as f64;
            let h = 1.0 / panels as f64;
            for (xi, wi) in gn.iter().zip(gw.iter()) {
                let s = a0 + 0.5 * h * (xi + 1.0);
                let z = start + s * dir;
                boundary += wi * 0.5 * h * f_eval(z)? * u(z) * dir;
            }
        }
    }

    // Area term for Zhat content: int u dF/dzbar dzbar^dz = -2 pi i int u G ds dt.
    let g_expr = zbar_factor(f, active);
    let mut area = Complex64::new(0.0, 0.0);
    if !g_expr.is_zero_expr() {
        let g_eval = |z: Complex64| -> Result<Complex64> {
            let mut a = assign.clone();
            a.insert(active, z);
            Ok(u(z) * g_expr.evaluate(ctx, &a)?)
        };
        let (g_poles, _) = pole_positions(&g_expr, active, assign)?;
        let gdom = setup_domain(ctx, &g_poles, &opts)?;
        let mut eps_list = opts.eps_list.clone();
        let max_eps = eps_list.iter().cloned().fold(0.0f64, f64::max);
        let cap = 0.45 * gdom.patch_radius;
        if max_eps > cap {
            let s = cap / max_eps;
            for e in eps_list.iter_mut() {
                *e *= s;
            }
        }
        let vals = pv_core(&g_eval, &gdom, &eps_list, &opts)?;
        let (v, _, _) = extrapolate(&vals, None, opts.tolerance);
        area = -2.0 * PI * Complex64::new(0.0, 1.0) * v;
    }

    let value = residue_term - boundary + area;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonConvergence("contour sum is not finite".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::regint::integrate_once;
    use crate::DEFAULT_JET_CAP;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ctx(tau: Complex64) -> ModularContext {
        ModularContext::new(tau, None, DEFAULT_JET_CAP).unwrap()
    }

    fn fix(pairs: &[(Point, Complex64)]) -> BTreeMap<Point, Complex64> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn constant_integrates_to_itself() {
        // The orientation/normalization sentinel: run before trusting
        // anything else in this module.
        let k = ctx(c(0.3, 1.7));
        let f = parse("(0.75,-0.5)").unwrap();
        let rep = pv_single_step(&f, 1, &fix(&[]), &k, &PvOptions::default()).unwrap();
        assert!(
            (rep.value - c(0.75, -0.5)).norm() < 1e-8,
            "volume normalization: {}",
            rep.value
        );
        assert!(rep.converged);
    }

    #[test]
    fn single_wp_matches_kernel_constant() {
        // P.V. of wp(z - p) is -eta1hat; at tau = i that value vanishes by
        // square-lattice symmetry, at tau = 2i it is about -1.7188.
        for tau in [c(0.0, 1.0), c(0.0, 2.0)] {
            let k = ctx(tau);
            let f = parse("wp(1-2)").unwrap();
            let rep = pv_single_step(
                &f,
                1,
                &fix(&[(2, c(0.31, 0.27) * tau.im)]),
                &k,
                &PvOptions::default(),
            )
            .unwrap();
            let want = -k.eta1hat();
            assert!(
                (rep.value - want).norm() < 1e-3 * want.norm().max(1.0),
                "tau {tau}: {} vs {want}",
                rep.value
            );
        }
    }

    #[test]
    fn two_pole_product_matches_engine() {
        let k = ctx(c(0.0, 2.0));
        let f = parse("wp(1-3)*wp(2-3)").unwrap();
        let assign = fix(&[(1, c(0.13, 0.21)), (2, c(0.57, 0.89))]);
        let rep = pv_single_step(&f, 3, &assign, &k, &PvOptions::default()).unwrap();
        let engine = integrate_once(&f, 3, None, DEFAULT_JET_CAP)
            .unwrap()
            .evaluate(&k, &assign)
            .unwrap();
        let v = compare(engine, &rep, 1e-3);
        assert!(v.pass, "engine {engine} vs oracle {} (rel {})", rep.value, v.rel_dev);
    }

    #[test]
    fn eps_sequence_stabilizes_on_regression_integrands() {
        for tau in [c(0.0, 1.0), c(0.0, 2.0)] {
            let k = ctx(tau);
            for (text, active, fixed) in [
                ("wp(1-2)", 1, vec![(2, c(0.4, 0.33) * tau.im)]),
                ("wp(1-2)^2", 1, vec![(2, c(0.4, 0.33) * tau.im)]),
                ("wp(1-2)^3", 1, vec![(2, c(0.4, 0.33) * tau.im)]),
                (
                    "wp(1-3)*wp(2-3)",
                    3,
                    vec![(1, c(0.13, 0.21) * tau.im), (2, c(0.57, 0.89) * tau.im)],
                ),
            ] {
                let f = parse(text).unwrap();
                let rep =
                    pv_single_step(&f, active, &fix(&fixed), &k, &PvOptions::default()).unwrap();
                let d1 = (rep.per_eps_values[1].1 - rep.per_eps_values[0].1).norm();
                let d2 = (rep.per_eps_values[2].1 - rep.per_eps_values[1].1).norm();
                let scale = rep.value.norm().max(1.0);
                assert!(
                    d2 <= d1 / 1.5 || d2 < 1e-9 * scale,
                    "{text} at tau {tau}: deltas {d1:.3e} then {d2:.3e}"
                );
            }
        }
    }

    #[test]
    fn translation_and_model_invariance() {
        let k = ctx(c(0.0, 2.0));
        let f = parse("wp(1-2)").unwrap();
        let assign = fix(&[(2, c(0.41, 0.50))]);
        let base = pv_single_step(&f, 1, &assign, &k, &PvOptions::default()).unwrap();
        let mut opts = PvOptions {
            domain_shift: Some((0.17, 0.75)),
            ..PvOptions::default()
        };
        let shifted = pv_single_step(&f, 1, &assign, &k, &opts).unwrap();
        let tol = 2.0 * (base.extrapolated_error + shifted.extrapolated_error) + 1e-9;
        assert!(
            (base.value - shifted.value).norm() < tol.max(1e-6),
            "{} vs {}",
            base.value,
            shifted.value
        );
        opts.domain_shift = None;
        opts.extrapolation = Some(Extrapolation::EpsLogEps);
        let other = pv_single_step(&f, 1, &assign, &k, &opts).unwrap();
        let tol = 2.0 * (base.extrapolated_error + other.extrapolated_error);
        assert!((base.value - other.value).norm() < tol.max(1e-6));
    }

    #[test]
    fn resolution_doubling_within_error() {
        let k = ctx(c(0.0, 1.0));
        let f = parse("wp(1-2)").unwrap();
        let assign = fix(&[(2, c(0.37, 0.44))]);
        let base = pv_single_step(&f, 1, &assign, &k, &PvOptions::default()).unwrap();
        let fine = pv_single_step(
            &f,
            1,
            &assign,
            &k,
            &PvOptions {
                radial_nodes: 64,
                angular_nodes: 128,
                panel_nodes: 12,
                ..PvOptions::default()
            },
        )
        .unwrap();
        assert!(
            (base.value - fine.value).norm()
                <= (base.extrapolated_error + fine.extrapolated_error).max(1e-7),
            "{} vs {} (err {})",
            base.value,
            fine.value,
            base.extrapolated_error
        );
    }

    #[test]
    fn contour_formula_values() {
        // wp(z-p): the contour formula reproduces -eta1hat.
        let k = ctx(c(0.0, 2.0));
        let f = parse("wp(1-2)").unwrap();
        let got = contour_contact_check(&f, 1, &fix(&[(2, c(0.43, 0.51))]), &k).unwrap();
        let want = -k.eta1hat();
        assert!(
            (got - want).norm() < 1e-6 * want.norm().max(1.0),
            "{got} vs {want}"
        );
        // Zhat(z-p) integrates to zero (needs the area correction).
        let f = parse("Z(1-2)").unwrap();
        let got = contour_contact_check(&f, 1, &fix(&[(2, c(0.43, 0.51))]), &k).unwrap();
        assert!(got.norm() < 1e-6, "Zhat: {got}");
        // Constants pass through.
        let f = parse("(0.3,0.8)").unwrap();
        let got = contour_contact_check(&f, 1, &fix(&[]), &k).unwrap();
        assert!((got - c(0.3, 0.8)).norm() < 1e-8);
    }

    #[test]
    fn contour_agrees_with_pv() {
        let k = ctx(c(0.0, 2.0));
        for text in ["wp(1-2)", "wp(1-2)^2"] {
            let f = parse(text).unwrap();
            let assign = fix(&[(2, c(0.45, 0.61))]);
            let rep = pv_single_step(&f, 1, &assign, &k, &PvOptions::default()).unwrap();
            let con = contour_contact_check(&f, 1, &assign, &k).unwrap();
            let tol = (rep.extrapolated_error + 1e-6).max(1e-4 * rep.value.norm());
            assert!(
                (rep.value - con).norm() < tol.max(1e-5),
                "{text}: pv {} vs contour {con}",
                rep.value
            );
        }
    }

    #[test]
    fn compare_semantics() {
        let rep = |v: Complex64| PvReport {
            value: v,
            per_eps_values: vec![],
            extrapolated_error: 1e-6,
            converged: true,
        };
        assert!(compare(c(-PI, 0.0), &rep(c(-3.1414, 0.0)), 1e-3).pass);
        assert!(compare(c(1.0, 0.0), &rep(c(1.0000002, 0.0)), 1e-3).pass);
        // Sign flips are caught.
        assert!(!compare(c(-PI, 0.0), &rep(c(PI, 0.0)), 1e-3).pass);
    }

    #[test]
    fn forced_bad_translation_reports_pole_on_boundary() {
        let k = ctx(c(0.0, 1.0));
        let f = parse("wp(1-2)").unwrap();
        // pole at lattice coords (0.40, 0.33); a shift of (0.40, t) parks it
        // on the domain edge
        let opts = PvOptions {
            domain_shift: Some((0.40, 0.0)),
            ..PvOptions::default()
        };
        let r = pv_single_step(&f, 1, &fix(&[(2, c(0.4, 0.33))]), &k, &opts);
        assert!(matches!(r, Err(Error::PoleOnBoundary)));
    }

    #[test]
    fn coincident_points_rejected() {
        let k = ctx(c(0.0, 1.0));
        let f = parse("wp(1-3)*wp(2-3)").unwrap();
        let assign = fix(&[(1, c(0.2, 0.3)), (2, c(1.2, 0.3))]);
        assert!(matches!(
            pv_single_step(&f, 3, &assign, &k, &PvOptions::default()),
            Err(Error::PoleHit { .. })
        ));
    }
}
