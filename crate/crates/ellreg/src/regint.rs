//! The regularized integration engine: one variable at a time via a formal
//! primitive in `W = Zhat(z_active - z_anchor)` followed by a residue sum,
//! iterated over all variables.
//!
//! For a single step on `F(z) dz ^ dzbar/(taubar - tau)`:
//! 1. every `Zhat(z - z_r)` in the active variable is rewritten as
//!    `W + [Zhat(z - z_r) - W]`; the bracket is elliptic and meromorphic
//!    because the antiholomorphic parts cancel, so `F` becomes a polynomial
//!    in `W` with meromorphic coefficients;
//! 2. the W-antiderivative `G = sum coeffs[k] W^(k+1)/(k+1)` satisfies
//!    `omega = d(-G dz / 2 pi i)`, so the regularized integral equals the
//!    sum of holomorphic residues of `G dz` over the poles and the anchor;
//! 3. residues are Laurent coefficients of symbolic expansions, so the
//!    result is again a polynomial in the atoms of the remaining points.
//!
//! A constant integrand integrates to itself: the antiholomorphic factor is
//! normalized so the curve has unit volume. Only this standard volume
//! pairing is supported; pairing against the A-cycle dual form instead is a
//! known variant that is deliberately not implemented here.

use num_complex::Complex64;

use crate::expr::{expand_expr, Atom, AtomKind, Expr, Term};
use crate::kernel::ModularContext;
use crate::{Error, Point, Result};

/// Relative threshold for dropping floating-point dust created by exact
/// symbolic cancellations inside a residue sum.
const PRUNE_EPS: f64 = 1e-12;

/// An expression organized as a polynomial in `W = Zhat(z_active - z_anchor)`.
///
/// Coefficients are free of `W` except through the formal differences
/// `Zhat(z_active - z_r) - W`, which are kept as two-term expressions and
/// expanded only at residue time.
#[derive(Debug, Clone)]
pub struct WPolynomial {
    pub active: Point,
    pub anchor: Point,
    pub coeffs: Vec<Expr>,
}

impl WPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Reassembles `sum coeffs[k] W^k` as a plain expression.
    pub fn to_expr(&self) -> Expr {
        let w = w_expr(self.active, self.anchor);
        let mut acc = Expr::zero();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero_expr() {
                continue;
            }
            let term = if k == 0 { c.clone() } else { c.mul(&w.pow(k as u32)) };
            acc = acc.add(&term);
        }
        acc
    }
}

fn w_expr(active: Point, anchor: Point) -> Expr {
    Expr::atom(AtomKind::Zhat, active, anchor).expect("active != anchor")
}

/// Rewrites `F` as a polynomial in `W = Zhat(z_active - z_anchor)`.
///
/// Fails with `NoPoles` when `F` is constant in the active variable; callers
/// should bypass integration in that case.
pub fn rewrite_in_w(f: &Expr, active: Point, anchor: Point) -> Result<WPolynomial> {
    if active == anchor {
        return Err(Error::InvalidArgument(format!(
            "anchor z{anchor} must differ from the active variable"
        )));
    }
    if !f.involves(active) {
        return Err(Error::NoPoles(active));
    }
    let w = w_expr(active, anchor);
    let mut coeffs: Vec<Expr> = Vec::new();
    for t in f.terms() {
        // Split the term: Zhat factors in the active variable are substituted
        // by (W + difference); everything else stays in the coefficient.
        let mut zhat_views: Vec<(f64, Point)> = Vec::new(); // (sign, other)
        let mut passive = Term {
            coeff: t.coeff,
            consts: t.consts.clone(),
            atoms: Vec::new(),
        };
        for a in &t.atoms {
            if a.kind == AtomKind::Zhat && a.involves(active) {
                let (sign, other) = if a.a == active {
                    (1.0, a.b)
                } else {
                    (-1.0, a.a)
                };
                zhat_views.push((sign, other));
            } else {
                passive.atoms.push(*a);
            }
        }
        let mut poly: Vec<Expr> = vec![Expr::from_terms(vec![passive])];
        for (sign, other) in zhat_views {
            // multiply by sign * (W + D_other); D_anchor = 0
            let diff = if other == anchor {
                Expr::zero()
            } else {
                Expr::atom(AtomKind::Zhat, active, other)?.sub(&w)
            };
            let s = Complex64::new(sign, 0.0);
            let mut next: Vec<Expr> = vec![Expr::zero(); poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                if c.is_zero_expr() {
                    continue;
                }
                next[k + 1] = next[k + 1].add(&c.scale(s));
                if !diff.is_zero_expr() {
                    next[k] = next[k].add(&c.mul(&diff).scale(s));
                }
            }
            poly = next;
        }
        if poly.len() > coeffs.len() {
            coeffs.resize(poly.len(), Expr::zero());
        }
        for (k, c) in poly.into_iter().enumerate() {
            coeffs[k] = coeffs[k].add(&c);
        }
    }
    while coeffs.len() > 1 && coeffs.last().map(Expr::is_zero_expr) == Some(true) {
        coeffs.pop();
    }
    Ok(WPolynomial {
        active,
        anchor,
        coeffs,
    })
}

/// The W-antiderivative: `G = sum coeffs[k] W^(k+1) / (k+1)`.
pub fn primitive_in_w(p: &WPolynomial) -> WPolynomial {
    let mut coeffs = Vec::with_capacity(p.coeffs.len() + 1);
    coeffs.push(Expr::zero());
    for (k, c) in p.coeffs.iter().enumerate() {
        coeffs.push(c.scale(Complex64::new(1.0 / (k as f64 + 1.0), 0.0)));
    }
    WPolynomial {
        active: p.active,
        anchor: p.anchor,
        coeffs,
    }
}

/// Holomorphic residue of `G dz_active` at `z_active = z_q`, as an
/// expression in the remaining points.
pub fn residue_at(g: &WPolynomial, q: Point, jet_cap: u32) -> Result<Expr> {
    residue_of_expr_at(&g.to_expr(), g.active, q, jet_cap)
}

/// Residue of a plain expression (no primitive) at `z_active = z_q`.
pub fn residue_of_expr_at(f: &Expr, active: Point, q: Point, jet_cap: u32) -> Result<Expr> {
    let series = expand_expr(f, active, q, -1, jet_cap)?;
    series.residue()
}

/// One regularized integration step in `z_active`.
///
/// A constant integrand returns itself (unit volume normalization);
/// otherwise the residue sum of the primitive runs over the pole points and
/// the anchor (default: the lowest-index pole point).
pub fn integrate_once(
    f: &Expr,
    active: Point,
    anchor: Option<Point>,
    jet_cap: u32,
) -> Result<Expr> {
    if !f.involves(active) {
        return Ok(f.clone());
    }
    let poles = f.poles_in(active);
    let anchor = match anchor {
        Some(a) => a,
        None => poles[0].0,
    };
    let wp = rewrite_in_w(f, active, anchor)?;
    let g = primitive_in_w(&wp);
    let g_expr = g.to_expr();
    let mut points: Vec<Point> = poles.iter().map(|(q, _)| *q).collect();
    if !points.contains(&anchor) {
        points.push(anchor);
        points.sort();
    }
    let mut acc = Expr::zero();
    for q in points {
        acc = acc.add(&residue_of_expr_at(&g_expr, active, q, jet_cap)?);
    }
    Ok(acc.prune_relative(PRUNE_EPS))
}

/// One step of an iterated integral, for traces.
#[derive(Debug, Clone)]
pub struct Step {
    pub var: Point,
    pub result: Expr,
}

/// Iterates [`integrate_once`] over the given variable order and returns the
/// final (constant) expression together with the per-step trace.
pub fn integrate_all(f: &Expr, order: &[Point], jet_cap: u32) -> Result<(Expr, Vec<Step>)> {
    let mut seen = std::collections::BTreeSet::new();
    for p in order {
        if !seen.insert(*p) {
            return Err(Error::InvalidArgument(format!(
                "variable z{p} repeated in the integration order"
            )));
        }
    }
    for p in f.points() {
        if !seen.contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "integration order does not cover z{p}"
            )));
        }
    }
    let mut acc = f.clone();
    let mut steps = Vec::with_capacity(order.len());
    for &p in order {
        acc = integrate_once(&acc, p, None, jet_cap)?;
        steps.push(Step {
            var: p,
            result: acc.clone(),
        });
    }
    if !acc.is_constant() {
        return Err(Error::NonConstantResult(acc.to_string()));
    }
    Ok((acc, steps))
}

/// Evaluates the iterated integral to a number (the context resolves the
/// constant symbols in the final expression).
pub fn integrate_all_value(
    f: &Expr,
    order: &[Point],
    ctx: &ModularContext,
) -> Result<Complex64> {
    let (e, _) = integrate_all(f, order, ctx.jet_cap())?;
    e.evaluate(ctx, &std::collections::BTreeMap::new())
}

/// Simple-pole residues of a meromorphic integrand in the active variable:
/// the data of the polar splitting `F = F_0 + sum r_i Zhat(z - z_i)`.
pub fn polar_decomposition(
    f: &Expr,
    active: Point,
    jet_cap: u32,
) -> Result<Vec<(Point, Expr)>> {
    let meromorphic = f
        .terms()
        .iter()
        .all(|t| t.atoms.iter().all(|a| a.kind != AtomKind::Zhat || !a.involves(active)));
    if !meromorphic {
        return Err(Error::NotMeromorphic(active));
    }
    let mut out = Vec::new();
    for (q, _) in f.poles_in(active) {
        let r = residue_of_expr_at(f, active, q, jet_cap)?.prune_relative(PRUNE_EPS);
        out.push((q, r));
    }
    Ok(out)
}

/// Builds `sum r_i * Zhat(z_active - z_i)` from a polar decomposition.
pub fn residue_part(decomp: &[(Point, Expr)], active: Point) -> Expr {
    let mut acc = Expr::zero();
    for (q, r) in decomp {
        if r.is_zero_expr() {
            continue;
        }
        let z = Expr::atom(AtomKind::Zhat, active, *q).expect("active != pole point");
        acc = acc.add(&r.mul(&z));
    }
    acc
}

/// True when every term of the integrand is odd under global negation of all
/// points (such integrands integrate to zero by parity).
pub fn is_globally_odd(f: &Expr) -> bool {
    !f.is_zero_expr()
        && f.terms().iter().all(|t| {
            let parity: u32 = t
                .atoms
                .iter()
                .map(|a: &Atom| match a.kind {
                    AtomKind::WpDer(m) => m,
                    AtomKind::Zhat => 1,
                })
                .sum();
            parity % 2 == 1
        })
}
