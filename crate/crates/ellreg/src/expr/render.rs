//! Canonical DSL rendering of expressions; `parse(render_expr(e))`
//! normalizes back to `e`.

use num_complex::Complex64;

use super::{Atom, AtomKind, ConstSym, Expr};

fn const_token(s: &ConstSym) -> String {
    match s {
        ConstSym::Eta1Hat => "eta1h".to_string(),
        ConstSym::GUpper(k) => format!("G{}", 2 * k),
        ConstSym::G2Lower => "g2".to_string(),
        ConstSym::G3Lower => "g3".to_string(),
        ConstSym::Pi => "pi".to_string(),
    }
}

fn atom_token(a: &Atom) -> String {
    match a.kind {
        AtomKind::WpDer(m) => format!("wp{}({}-{})", "'".repeat(m as usize), a.a, a.b),
        AtomKind::Zhat => format!("Z({}-{})", a.a, a.b),
    }
}

/// Renders one term as `(sign, magnitude-string)`.
fn render_term(coeff: Complex64, consts: &[(ConstSym, u32)], atoms: &[Atom]) -> (bool, String) {
    let mut parts: Vec<String> = Vec::new();
    let negative;
    if coeff.im == 0.0 {
        negative = coeff.re < 0.0;
        let mag = coeff.re.abs();
        if mag != 1.0 || (consts.is_empty() && atoms.is_empty()) {
            parts.push(format!("{mag}"));
        }
    } else {
        negative = false;
        parts.push(format!("({},{})", coeff.re, coeff.im));
    }
    for (s, p) in consts {
        if *p == 1 {
            parts.push(const_token(s));
        } else {
            parts.push(format!("{}^{}", const_token(s), p));
        }
    }
    // Group repeated atoms into powers.
    let mut i = 0;
    while i < atoms.len() {
        let mut j = i + 1;
        while j < atoms.len() && atoms[j] == atoms[i] {
            j += 1;
        }
        let count = j - i;
        if count == 1 {
            parts.push(atom_token(&atoms[i]));
        } else {
            parts.push(format!("{}^{}", atom_token(&atoms[i]), count));
        }
        i = j;
    }
    (negative, parts.join("*"))
}

/// DSL-parseable canonical text of an expression.
pub fn render_expr(e: &Expr) -> String {
    if e.is_zero_expr() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, t) in e.terms().iter().enumerate() {
        let (neg, body) = render_term(t.coeff, &t.consts, &t.atoms);
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else if neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{parse, AtomKind, ConstSym, Expr};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_rendering() {
        let e = parse("wp(1-2)*wp(2-3)").unwrap();
        assert_eq!(render_expr(&e), "wp(1-2)*wp(2-3)");
        // Negative coefficients render with a leading minus, not "+-".
        let e = parse("-wp(1-2)").unwrap();
        assert_eq!(render_expr(&e), "-wp(1-2)");
        let e = parse("Z(1-2)-wp(1-3)").unwrap();
        assert!(!render_expr(&e).contains("+-"));
        // Constant symbols survive rendering.
        let e = parse("eta1h*wp(2-3)").unwrap();
        assert!(render_expr(&e).contains("eta1h"));
        // Powers group.
        let e = parse("wp(1-2)*wp(1-2)").unwrap();
        assert_eq!(render_expr(&e), "wp(1-2)^2");
    }

    #[test]
    fn zero_renders() {
        assert_eq!(render_expr(&Expr::zero()), "0");
        let e = parse("wp(1-2)-wp(1-2)").unwrap();
        assert_eq!(render_expr(&e), "0");
    }

    fn random_expr(rng: &mut ChaCha8Rng) -> Expr {
        let mut e = Expr::zero();
        for _ in 0..rng.random_range(1..=4usize) {
            let coeff = if rng.random_bool(0.3) {
                num_complex::Complex64::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                )
            } else {
                num_complex::Complex64::new(rng.random_range(-3.0..3.0), 0.0)
            };
            let mut t = Expr::number(coeff);
            if rng.random_bool(0.4) {
                let sym = *[
                    ConstSym::Eta1Hat,
                    ConstSym::G2Lower,
                    ConstSym::G3Lower,
                    ConstSym::GUpper(2),
                    ConstSym::GUpper(3),
                    ConstSym::Pi,
                ]
                .choose(rng)
                .unwrap();
                t = t.mul(&Expr::const_sym(sym));
            }
            for _ in 0..rng.random_range(0..=3usize) {
                let a = rng.random_range(1..=4u32);
                let mut b = rng.random_range(1..=4u32);
                while b == a {
                    b = rng.random_range(1..=4u32);
                }
                let atom = if rng.random_bool(0.7) {
                    Expr::atom(AtomKind::WpDer(rng.random_range(0..=3)), a, b).unwrap()
                } else {
                    Expr::atom(AtomKind::Zhat, a, b).unwrap()
                };
                t = t.mul(&atom);
            }
            e = e.add(&t);
        }
        e
    }

    #[test]
    fn round_trip_on_random_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let e = random_expr(&mut rng);
            let text = render_expr(&e);
            let back = parse(&text).unwrap_or_else(|err| panic!("reparse `{text}`: {err}"));
            assert_eq!(back, e, "round trip through `{text}`");
        }
    }
}
