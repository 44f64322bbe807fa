//! Symbolic integrands: normalized polynomial expressions in the atoms
//! `wp^(m)(z_a - z_b)` and `Zhat(z_a - z_b)`, with scalar constants
//! (`eta1h`, `G4`, `g2`, ...) kept as symbolic tokens resolved against a
//! [`ModularContext`] only at evaluation time.
//!
//! Atoms are stored with canonical orientation `a < b`; the parity rewrite
//! `wp^(m)(z_b - z_a) = (-1)^m wp^(m)(z_a - z_b)` and
//! `Zhat(z_b - z_a) = -Zhat(z_a - z_b)` folds signs into term coefficients.

mod parse;
mod render;

pub use parse::parse;
pub use render::render_expr;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::kernel::ModularContext;
use crate::laurent::{LaurentSeries, Ring};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    /// `wp^(m)`: the m-th derivative of the Weierstrass p-function.
    WpDer(u32),
    /// The completed theta log-derivative `Zhat`.
    Zhat,
}

/// One atom `f(z_a - z_b)` with canonical orientation `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub a: Point,
    pub b: Point,
    pub kind: AtomKind,
}

impl Atom {
    /// Canonicalizes `f(z_a - z_b)`, returning the atom and the parity sign
    /// folded out of it.
    pub fn oriented(kind: AtomKind, a: Point, b: Point) -> Result<(Atom, f64)> {
        if a == b {
            return Err(Error::SelfDifference(a));
        }
        if a < b {
            Ok((Atom { a, b, kind }, 1.0))
        } else {
            let sign = match kind {
                AtomKind::WpDer(m) => {
                    if m % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                AtomKind::Zhat => -1.0,
            };
            Ok((Atom { a: b, b: a, kind }, sign))
        }
    }

    /// Worst-case pole order of the atom at coincidence of its arguments.
    pub fn pole_order(&self) -> u32 {
        match self.kind {
            AtomKind::WpDer(m) => m + 2,
            AtomKind::Zhat => 1,
        }
    }

    pub fn involves(&self, p: Point) -> bool {
        self.a == p || self.b == p
    }

    /// The other endpoint of an atom involving `p`.
    pub fn other(&self, p: Point) -> Point {
        if self.a == p {
            self.b
        } else {
            self.a
        }
    }
}

/// Scalar constant tokens appearing in coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstSym {
    /// `eta1hat = eta1 - pi/im(tau)`.
    Eta1Hat,
    /// `G_{2k}` for `k >= 2` (`GUpper(2) = G4`).
    GUpper(u32),
    /// `g2 = 120 G4`.
    G2Lower,
    /// `g3 = 280 G6`.
    G3Lower,
    Pi,
}

impl ConstSym {
    pub fn resolve(&self, ctx: &ModularContext) -> Result<Complex64> {
        Ok(match self {
            ConstSym::Eta1Hat => ctx.eta1hat(),
            ConstSym::GUpper(k) => ctx.big_g(*k)?,
            ConstSym::G2Lower => ctx.g2(),
            ConstSym::G3Lower => ctx.g3(),
            ConstSym::Pi => Complex64::new(PI, 0.0),
        })
    }
}

/// One monomial: a complex coefficient times constant-symbol powers times a
/// multiset of atoms (stored expanded, sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: Complex64,
    pub consts: Vec<(ConstSym, u32)>,
    pub atoms: Vec<Atom>,
}

impl Term {
    fn key(&self) -> (&[(ConstSym, u32)], &[Atom]) {
        (&self.consts, &self.atoms)
    }

    fn normalize(mut self) -> Self {
        self.atoms.sort();
        self.consts.sort();
        let mut merged: Vec<(ConstSym, u32)> = Vec::with_capacity(self.consts.len());
        for (s, p) in self.consts.drain(..) {
            if let Some(last) = merged.last_mut() {
                if last.0 == s {
                    last.1 += p;
                    continue;
                }
            }
            merged.push((s, p));
        }
        self.consts = merged;
        self
    }
}

/// A normalized sum of terms. Always kept canonical: atoms oriented, terms
/// sorted, like terms merged, zero coefficients dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Expr::number(Complex64::new(1.0, 0.0))
    }

    pub fn number(c: Complex64) -> Self {
        Expr::from_terms(vec![Term {
            coeff: c,
            consts: Vec::new(),
            atoms: Vec::new(),
        }])
    }

    pub fn const_sym(s: ConstSym) -> Self {
        Expr::from_terms(vec![Term {
            coeff: Complex64::new(1.0, 0.0),
            consts: vec![(s, 1)],
            atoms: Vec::new(),
        }])
    }

    /// `f(z_a - z_b)` as an expression (orientation folded into the sign).
    pub fn atom(kind: AtomKind, a: Point, b: Point) -> Result<Self> {
        let (atom, sign) = Atom::oriented(kind, a, b)?;
        Ok(Expr::from_terms(vec![Term {
            coeff: Complex64::new(sign, 0.0),
            consts: Vec::new(),
            atoms: vec![atom],
        }]))
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut terms: Vec<Term> = terms.into_iter().map(Term::normalize).collect();
        terms.sort_by(|x, y| x.key().cmp(&y.key()));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(last) = out.last_mut() {
                if last.key() == t.key() {
                    last.coeff += t.coeff;
                    continue;
                }
            }
            out.push(t);
        }
        out.retain(|t| t.coeff != Complex64::new(0.0, 0.0));
        Expr { terms: out }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero_expr(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when no term contains an atom (pure scalar in the points).
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.atoms.is_empty())
    }

    /// Point symbols in use.
    pub fn points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = self
            .terms
            .iter()
            .flat_map(|t| t.atoms.iter().flat_map(|a| [a.a, a.b]))
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }

    pub fn involves(&self, p: Point) -> bool {
        self.terms
            .iter()
            .any(|t| t.atoms.iter().any(|a| a.involves(p)))
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Expr::from_terms(terms)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: -t.coeff,
                consts: t.consts.clone(),
                atoms: t.atoms.clone(),
            })
            .collect();
        Expr { terms }
    }

    pub fn scale(&self, c: Complex64) -> Expr {
        if c == Complex64::new(0.0, 0.0) {
            return Expr::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff * c,
                consts: t.consts.clone(),
                atoms: t.atoms.clone(),
            })
            .collect();
        Expr { terms }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for x in &self.terms {
            for y in &other.terms {
                let mut consts = x.consts.clone();
                consts.extend(y.consts.iter().cloned());
                let mut atoms = x.atoms.clone();
                atoms.extend(y.atoms.iter().cloned());
                terms.push(Term {
                    coeff: x.coeff * y.coeff,
                    consts,
                    atoms,
                });
            }
        }
        Expr::from_terms(terms)
    }

    pub fn pow(&self, k: u32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.mul(self);
        }
        out
    }

    /// Drops terms whose coefficient is negligible relative to the largest
    /// one (floating-point dust from exact cancellations).
    pub fn prune_relative(&self, eps: f64) -> Expr {
        let max = self
            .terms
            .iter()
            .map(|t| t.coeff.norm())
            .fold(0.0f64, f64::max);
        if max == 0.0 {
            return Expr::zero();
        }
        Expr {
            terms: self
                .terms
                .iter()
                .filter(|t| t.coeff.norm() > eps * max)
                .cloned()
                .collect(),
        }
    }

    /// Numeric value under a point assignment.
    pub fn evaluate(
        &self,
        ctx: &ModularContext,
        assign: &BTreeMap<Point, Complex64>,
    ) -> Result<Complex64> {
        // One kernel jet per atom argument pair, at the largest order used.
        let mut max_wp: HashMap<(Point, Point), u32> = HashMap::new();
        let mut need_zhat: Vec<(Point, Point)> = Vec::new();
        for t in &self.terms {
            for a in &t.atoms {
                match a.kind {
                    AtomKind::WpDer(m) => {
                        let e = max_wp.entry((a.a, a.b)).or_insert(0);
                        *e = (*e).max(m);
                    }
                    AtomKind::Zhat => need_zhat.push((a.a, a.b)),
                }
            }
        }
        let arg = |a: Point, b: Point| -> Result<Complex64> {
            let za = assign.get(&a).ok_or(Error::UnassignedPoint(a))?;
            let zb = assign.get(&b).ok_or(Error::UnassignedPoint(b))?;
            Ok(za - zb)
        };
        let mut wp_cache: HashMap<(Point, Point), Vec<Complex64>> = HashMap::new();
        for (&(a, b), &m) in &max_wp {
            let jet = ctx.wp_jet(arg(a, b)?, m).map_err(|e| match e {
                Error::PoleAtLatticePoint(_) => Error::PoleHit {
                    atom: format!("wp^({m})(z{a}-z{b})"),
                },
                other => other,
            })?;
            wp_cache.insert((a, b), jet);
        }
        let mut zhat_cache: HashMap<(Point, Point), Complex64> = HashMap::new();
        for (a, b) in need_zhat {
            if zhat_cache.contains_key(&(a, b)) {
                continue;
            }
            let v = ctx.zhat_value(arg(a, b)?).map_err(|e| match e {
                Error::PoleAtLatticePoint(_) => Error::PoleHit {
                    atom: format!("Z(z{a}-z{b})"),
                },
                other => other,
            })?;
            zhat_cache.insert((a, b), v);
        }

        let mut total = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for (s, p) in &t.consts {
                v *= s.resolve(ctx)?.powu(*p);
            }
            for a in &t.atoms {
                v *= match a.kind {
                    AtomKind::WpDer(m) => wp_cache[&(a.a, a.b)][m as usize],
                    AtomKind::Zhat => zhat_cache[&(a.a, a.b)],
                };
            }
            total += v;
        }
        Ok(total)
    }

    /// Holomorphic derivative in `z_p`. `Zhat'` is rewritten immediately as
    /// `-(wp + eta1hat)`, so `Zhat` atoms never carry derivative orders.
    pub fn differentiate(&self, p: Point) -> Expr {
        let mut out = Expr::zero();
        for t in &self.terms {
            // Leibniz over distinct atom positions involving p.
            let mut seen: Vec<Atom> = Vec::new();
            for (i, atom) in t.atoms.iter().enumerate() {
                if !atom.involves(p) || seen.contains(atom) {
                    continue;
                }
                seen.push(*atom);
                let mult = t.atoms.iter().filter(|x| *x == atom).count() as f64;
                let mut rest = t.atoms.clone();
                rest.remove(i);
                let base = Expr {
                    terms: vec![Term {
                        coeff: t.coeff * mult,
                        consts: t.consts.clone(),
                        atoms: rest,
                    }],
                };
                // d/dp of the canonical atom; sign -1 when p is subtrahend.
                let sign = if atom.a == p { 1.0 } else { -1.0 };
                let deriv = match atom.kind {
                    AtomKind::WpDer(m) => Expr::from_terms(vec![Term {
                        coeff: Complex64::new(sign, 0.0),
                        consts: Vec::new(),
                        atoms: vec![Atom {
                            a: atom.a,
                            b: atom.b,
                            kind: AtomKind::WpDer(m + 1),
                        }],
                    }]),
                    AtomKind::Zhat => {
                        // Zhat'(u) = -wp(u) - eta1hat
                        let wp = Expr::from_terms(vec![Term {
                            coeff: Complex64::new(-sign, 0.0),
                            consts: Vec::new(),
                            atoms: vec![Atom {
                                a: atom.a,
                                b: atom.b,
                                kind: AtomKind::WpDer(0),
                            }],
                        }]);
                        wp.add(&Expr::const_sym(ConstSym::Eta1Hat).scale(Complex64::new(-sign, 0.0)))
                    }
                };
                out = out.add(&base.mul(&deriv));
            }
        }
        out
    }

    /// For each other point `q`, the worst-case pole order of the expression
    /// at `z_p = z_q` (per-term sums of atom pole orders, maximized).
    pub fn poles_in(&self, p: Point) -> Vec<(Point, u32)> {
        let mut orders: BTreeMap<Point, u32> = BTreeMap::new();
        for t in &self.terms {
            let mut per_term: BTreeMap<Point, u32> = BTreeMap::new();
            for a in &t.atoms {
                if a.involves(p) {
                    *per_term.entry(a.other(p)).or_insert(0) += a.pole_order();
                }
            }
            for (q, o) in per_term {
                let e = orders.entry(q).or_insert(0);
                *e = (*e).max(o);
            }
        }
        orders.into_iter().collect()
    }

    /// Laurent expansion at `z_p = z_q + w` to the given order, with
    /// expression coefficients in the remaining points.
    pub fn laurent_expand(
        &self,
        p: Point,
        q: Point,
        order: i64,
        jet_cap: u32,
    ) -> Result<LaurentSeries<Expr>> {
        assert!(p != q, "expansion point must differ from the active point");
        expand_expr(self, p, q, order, jet_cap)
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", render_expr(self))
    }
}

impl Ring for Expr {
    fn zero() -> Self {
        Expr::zero()
    }
    fn one() -> Self {
        Expr::one()
    }
    fn is_zero(&self) -> bool {
        self.is_zero_expr()
    }
    fn add(&self, other: &Self) -> Self {
        Expr::add(self, other)
    }
    fn neg(&self) -> Self {
        Expr::neg(self)
    }
    fn mul(&self, other: &Self) -> Self {
        Expr::mul(self, other)
    }
    fn mul_int(&self, n: i64) -> Self {
        self.scale(Complex64::new(n as f64, 0.0))
    }
    fn div_int(&self, n: i64) -> Self {
        self.scale(Complex64::new(1.0 / n as f64, 0.0))
    }
}

/// Per-factor view of an atom as a function of the active variable:
/// `sign * f(z_active - z_other)`.
struct FactorView {
    kind: AtomKind,
    other: Point,
    sign: f64,
}

fn factor_view(atom: &Atom, active: Point) -> FactorView {
    if atom.a == active {
        FactorView {
            kind: atom.kind,
            other: atom.b,
            sign: 1.0,
        }
    } else {
        let sign = match atom.kind {
            AtomKind::WpDer(m) => {
                if m % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            AtomKind::Zhat => -1.0,
        };
        FactorView {
            kind: atom.kind,
            other: atom.a,
            sign,
        }
    }
}

/// Laurent/Taylor series in `w` of `sign * f(z_q - z_other + w)` with Expr
/// coefficients, truncated at `trunc`.
fn factor_series(
    view: &FactorView,
    q: Point,
    trunc: i64,
    jet_cap: u32,
) -> Result<LaurentSeries<Expr>> {
    let cap_check = |needed: i64| -> Result<()> {
        if needed > jet_cap as i64 {
            Err(Error::JetCapExceeded {
                requested: needed,
                cap: jet_cap,
            })
        } else {
            Ok(())
        }
    };
    let s = Complex64::new(view.sign, 0.0);
    if view.other == q {
        // Pole jet at w = 0.
        match view.kind {
            AtomKind::WpDer(m) => {
                cap_check(trunc + m as i64 + 2)?;
                let lead = -(m as i64) - 2;
                let mut coeffs = Vec::with_capacity((trunc - lead + 1) as usize);
                for e in lead..=trunc {
                    let base_exp = e + m as i64;
                    let base = wp_base_coeff(base_exp)?;
                    if base.is_zero_expr() {
                        coeffs.push(Expr::zero());
                        continue;
                    }
                    // (d/dw)^m w^base_exp = base_exp (base_exp-1) ... w^e
                    let mut fall = 1.0f64;
                    for i in 0..m as i64 {
                        fall *= (base_exp - i) as f64;
                    }
                    coeffs.push(base.scale(s * fall));
                }
                Ok(LaurentSeries::new(lead, coeffs, trunc))
            }
            AtomKind::Zhat => {
                cap_check(trunc + 1)?;
                let mut coeffs = Vec::with_capacity((trunc + 2).max(0) as usize);
                for e in -1..=trunc {
                    coeffs.push(zhat_pole_coeff(e)?.scale(s));
                }
                Ok(LaurentSeries::new(-1, coeffs, trunc))
            }
        }
    } else {
        // Taylor jet around the regular point z_q - z_other.
        if trunc < 0 {
            return Ok(LaurentSeries::zero(trunc));
        }
        match view.kind {
            AtomKind::WpDer(m) => {
                cap_check(m as i64 + trunc)?;
                let mut coeffs = Vec::with_capacity(trunc as usize + 1);
                let mut inv_fact = 1.0f64;
                for j in 0..=trunc as u32 {
                    if j > 0 {
                        inv_fact /= j as f64;
                    }
                    let atom = Expr::atom(AtomKind::WpDer(m + j), q, view.other)?;
                    coeffs.push(atom.scale(Complex64::new(view.sign * inv_fact, 0.0)));
                }
                Ok(LaurentSeries::new(0, coeffs, trunc))
            }
            AtomKind::Zhat => {
                cap_check(trunc)?;
                let mut coeffs = Vec::with_capacity(trunc as usize + 1);
                coeffs.push(Expr::atom(AtomKind::Zhat, q, view.other)?.scale(s));
                if trunc >= 1 {
                    let d = Expr::atom(AtomKind::WpDer(0), q, view.other)?
                        .add(&Expr::const_sym(ConstSym::Eta1Hat))
                        .neg();
                    coeffs.push(d.scale(s));
                }
                let mut inv_fact = 1.0f64;
                for j in 2..=trunc as u32 {
                    inv_fact /= j as f64;
                    // Zhat^(j) = -wp^(j-1), divided by j! for the Taylor coefficient
                    let atom = Expr::atom(AtomKind::WpDer(j - 1), q, view.other)?;
                    coeffs.push(atom.scale(Complex64::new(-view.sign * inv_fact, 0.0)));
                }
                Ok(LaurentSeries::new(0, coeffs, trunc))
            }
        }
    }
}

/// Coefficient of `w^e` in the Laurent expansion of `wp` at 0, as a symbolic
/// expression: 1 at `e = -2`, `2(2k-1) G_{2k}` at `e = 2k-2 >= 2`, else 0.
fn wp_base_coeff(e: i64) -> Result<Expr> {
    if e == -2 {
        return Ok(Expr::one());
    }
    if e < -2 || e == 0 || e % 2 != 0 {
        return Ok(Expr::zero());
    }
    let k = ((e + 2) / 2) as u32;
    Ok(Expr::const_sym(ConstSym::GUpper(k)).scale(Complex64::new(2.0 * (2 * k - 1) as f64, 0.0)))
}

/// Coefficient of `w^e` in the Laurent expansion of `Zhat` at 0 (drop-w̄):
/// 1 at `e = -1`, `-eta1hat` at `e = 1`, `-2 G_{2k}` at `e = 2k-1 >= 3`.
fn zhat_pole_coeff(e: i64) -> Result<Expr> {
    if e == -1 {
        return Ok(Expr::one());
    }
    if e < -1 || e % 2 == 0 {
        return Ok(Expr::zero());
    }
    if e == 1 {
        return Ok(Expr::const_sym(ConstSym::Eta1Hat).neg());
    }
    let k = ((e + 1) / 2) as u32;
    Ok(Expr::const_sym(ConstSym::GUpper(k)).scale(Complex64::new(-2.0, 0.0)))
}

/// Expands a full expression at `z_p = z_q + w`. An internal `order` of -1
/// is allowed and captures exactly the residue.
pub(crate) fn expand_expr(
    expr: &Expr,
    p: Point,
    q: Point,
    order: i64,
    jet_cap: u32,
) -> Result<LaurentSeries<Expr>> {
    let mut acc = LaurentSeries::<Expr>::zero(order);
    for t in expr.terms() {
        let mut views: Vec<FactorView> = Vec::new();
        let mut passive = Term {
            coeff: t.coeff,
            consts: t.consts.clone(),
            atoms: Vec::new(),
        };
        for a in &t.atoms {
            if a.involves(p) {
                views.push(factor_view(a, p));
            } else {
                passive.atoms.push(*a);
            }
        }
        let pole_order: i64 = views
            .iter()
            .filter(|v| v.other == q)
            .map(|v| match v.kind {
                AtomKind::WpDer(m) => m as i64 + 2,
                AtomKind::Zhat => 1,
            })
            .sum();
        if order < 0 && pole_order == 0 {
            // Taylor-only term: no residue contribution.
            continue;
        }
        let factor_trunc = order + pole_order;
        let mut series = LaurentSeries::constant(Expr::from_terms(vec![passive]), factor_trunc);
        for v in &views {
            let fs = factor_series(v, q, factor_trunc, jet_cap)?;
            series = series.mul(&fs)?;
        }
        acc = acc.add(&series.truncate(order))?;
    }
    Ok(acc)
}
