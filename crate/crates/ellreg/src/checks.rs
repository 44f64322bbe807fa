//! Named verification suites behind `ellreg check`: quantitative regression
//! targets for the integration engine (`paper`), kernel consistency checks
//! (`kernel`), and randomized property suites (`properties`).
//!
//! Deviations are measured relative to `max(|expected|, 1)`, so targets that
//! vanish identically are judged on an absolute scale.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use crate::expr::{parse, render_expr, AtomKind, ConstSym, Expr};
use crate::kernel::{lattice, ModularContext};
use crate::pv::{compare, contour_contact_check, pv_single_step, PvOptions};
use crate::regint::{
    integrate_all, integrate_all_value, integrate_once, polar_decomposition, residue_part,
};
use crate::{Point, Result, DEFAULT_JET_CAP};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub got: Complex64,
    pub want: Complex64,
    pub rel_err: f64,
    pub millis: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The standard modular parameters the suites run at.
pub fn standard_taus() -> Vec<(String, Complex64)> {
    vec![
        ("i".into(), c(0.0, 1.0)),
        ("2i".into(), c(0.0, 2.0)),
        ("0.3+1.7i".into(), c(0.3, 1.7)),
    ]
}

fn ctx_at(tau: Complex64) -> Result<ModularContext> {
    ModularContext::new(tau, None, DEFAULT_JET_CAP)
}

fn rel_err(got: Complex64, want: Complex64) -> f64 {
    (got - want).norm() / want.norm().max(1.0)
}

struct Recorder {
    out: Vec<CheckOutcome>,
}

impl Recorder {
    fn new() -> Self {
        Recorder { out: Vec::new() }
    }

    fn value(&mut self, name: &str, t0: Instant, got: Complex64, want: Complex64, rtol: f64) {
        let rel = rel_err(got, want);
        self.out.push(CheckOutcome {
            name: name.to_string(),
            pass: rel < rtol,
            got,
            want,
            rel_err: rel,
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
    }

    /// Records an aggregate deviation check (`got` is the worst deviation).
    fn deviation(&mut self, name: &str, t0: Instant, worst: f64, tol: f64) {
        self.out.push(CheckOutcome {
            name: name.to_string(),
            pass: worst < tol,
            got: c(worst, 0.0),
            want: c(0.0, 0.0),
            rel_err: worst,
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
    }

    fn boolean(&mut self, name: &str, t0: Instant, ok: bool) {
        self.out.push(CheckOutcome {
            name: name.to_string(),
            pass: ok,
            got: c(if ok { 1.0 } else { 0.0 }, 0.0),
            want: c(1.0, 0.0),
            rel_err: if ok { 0.0 } else { 1.0 },
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
    }
}

/// Random pairwise-separated point assignment in the fundamental domain.
fn random_assignment(
    rng: &mut ChaCha8Rng,
    tau: Complex64,
    points: &[Point],
) -> BTreeMap<Point, Complex64> {
    'outer: loop {
        let vals: Vec<Complex64> = points
            .iter()
            .map(|_| {
                Complex64::new(rng.random_range(0.06..0.94), 0.0)
                    + rng.random_range(0.06..0.94) * tau
            })
            .collect();
        for (i, a) in vals.iter().enumerate() {
            for b in vals.iter().skip(i + 1) {
                let d = a - b;
                let t = d.im / tau.im;
                let s = d.re - t * tau.re;
                let frac = |x: f64| {
                    let f = x - x.floor();
                    f.min(1.0 - f)
                };
                if frac(s).hypot(frac(t)) < 0.15 {
                    continue 'outer;
                }
            }
        }
        return points.iter().cloned().zip(vals).collect();
    }
}

pub fn paper_suite(tau_override: Option<Complex64>) -> Result<Vec<CheckOutcome>> {
    let mut r = Recorder::new();
    let taus: Vec<(String, Complex64)> = match tau_override {
        Some(t) => vec![(format!("{t}"), t)],
        None => standard_taus(),
    };

    // 1. single wp integrates to -eta1hat
    let f_wp = parse("wp(1-2)")?;
    for (tag, tau) in &taus {
        let k = ctx_at(*tau)?;
        let t0 = Instant::now();
        let got = integrate_all_value(&f_wp, &[1, 2], &k)?;
        r.value(&format!("paper.01.wp_single[{tag}]"), t0, got, -k.eta1hat(), 1e-10);
    }

    // 2. Zhat integrates to zero
    {
        let k = ctx_at(c(0.0, 2.0))?;
        let t0 = Instant::now();
        let got = integrate_all_value(&parse("Z(1-2)")?, &[1, 2], &k)?;
        r.value("paper.02.zhat_vanishes", t0, got, c(0.0, 0.0), 1e-10);
    }

    // 3. wp^2 and wp^3
    for (tag, tau) in &taus {
        let k = ctx_at(*tau)?;
        let t0 = Instant::now();
        let got = integrate_all_value(&parse("wp(1-2)^2")?, &[1, 2], &k)?;
        r.value(
            &format!("paper.03.wp_square[{tag}]"),
            t0,
            got,
            k.g2() / 12.0,
            1e-9,
        );
        let t0 = Instant::now();
        let got = integrate_all_value(&parse("wp(1-2)^3")?, &[1, 2], &k)?;
        let want = -0.15 * k.eta1hat() * k.g2() + 0.1 * k.g3();
        r.value(&format!("paper.03.wp_cube[{tag}]"), t0, got, want, 1e-9);
    }

    // 4 and 5. the two-point correlator and the pole-free splitting constant
    {
        let k = ctx_at(c(0.0, 2.0))?;
        let t0 = Instant::now();
        let step = integrate_once(&parse("wp(1-3)*wp(2-3)")?, 3, None, k.jet_cap())?;
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
        let mut worst4 = 0.0f64;
        let mut worst5 = 0.0f64;
        for _ in 0..20 {
            let a = random_assignment(&mut rng, k.tau(), &[1, 2]);
            let engine = step.evaluate(&k, &a)?;
            let u = a[&1] - a[&2];
            let wp_u = k.wp_jet(u, 2)?;
            let zh_u = k.zhat_value(u)?;
            // wp' Zhat + wp Zhat' + wp''/2 - eta1hat wp, with Zhat' = -wp - eta1hat
            let want = wp_u[1] * zh_u + wp_u[0] * (-wp_u[0] - k.eta1hat()) + 0.5 * wp_u[2]
                - k.eta1hat() * wp_u[0];
            worst4 = worst4.max((engine - want).norm() / want.norm().max(1.0));
            // Phi_0 constant of the splitting, written at z2 - z1 as in the
            // splitting formula.
            let v = a[&2] - a[&1];
            let wp_v = k.wp_jet(v, 0)?[0];
            let zh_v = k.zhat_value(v)?;
            let phi0 = -wp_u[1] * zh_v + 2.0 * wp_v * wp_v - 0.25 * k.g2()
                - 2.0 * k.eta1hat() * wp_v;
            worst5 = worst5.max((phi0 - engine).norm() / engine.norm().max(1.0));
        }
        r.deviation("paper.04.two_point_correlator", t0, worst4, 1e-8);
        let t0 = Instant::now();
        r.deviation("paper.05.phi0_splitting", t0, worst5, 1e-8);
    }

    // 6. chain n = 3: eta1hat^2 for all six orders, plus the trace rendering
    let orders: [[Point; 3]; 6] = [
        [1, 2, 3],
        [1, 3, 2],
        [2, 1, 3],
        [2, 3, 1],
        [3, 1, 2],
        [3, 2, 1],
    ];
    {
        let f = parse("wp(1-2)*wp(2-3)")?;
        for (tag, tau) in &taus {
            let k = ctx_at(*tau)?;
            let t0 = Instant::now();
            let want = k.eta1hat() * k.eta1hat();
            let mut worst = 0.0f64;
            for order in &orders {
                let got = integrate_all_value(&f, order, &k)?;
                worst = worst.max(rel_err(got, want));
            }
            r.deviation(&format!("paper.06.chain_eta1hat_sq[{tag}]"), t0, worst, 1e-9);
        }
        let t0 = Instant::now();
        let (_, steps) = integrate_all(&f, &[1, 2, 3], DEFAULT_JET_CAP)?;
        let rendered = render_expr(&steps[0].result);
        r.boolean(
            "paper.06.chain_trace",
            t0,
            rendered == "-eta1h*wp(2-3)",
        );
    }

    // 7. triangle n = 3: g3/4 - g2 eta1hat/4, doubly anchored
    {
        let f = parse("wp(1-2)*wp(2-3)*wp(3-1)")?;
        for (tag, tau) in &taus {
            let k = ctx_at(*tau)?;
            let t0 = Instant::now();
            let want = 0.25 * k.g3() - 0.25 * k.g2() * k.eta1hat();
            let mut worst = 0.0f64;
            let mut got_last = c(0.0, 0.0);
            for order in &orders {
                let got = integrate_all_value(&f, order, &k)?;
                worst = worst.max(rel_err(got, want));
                got_last = got;
            }
            r.deviation(&format!("paper.07.triangle[{tag}]"), t0, worst, 1e-8);
            let t0 = Instant::now();
            let alt = 70.0 * k.big_g(3)? - 60.0 * k.eta1hat() * k.big_g(2)?
                + 0.25 * k.g2() * k.eta1hat();
            r.value(&format!("paper.07.triangle_identity[{tag}]"), t0, got_last, alt, 1e-8);
        }
    }

    // 8. the residue part of the splitting integrates to zero, any anchor
    {
        let k = ctx_at(c(0.0, 2.0))?;
        let t0 = Instant::now();
        let zh31 = Expr::atom(AtomKind::Zhat, 3, 1)?;
        let zh32 = Expr::atom(AtomKind::Zhat, 3, 2)?;
        let f = Expr::atom(AtomKind::WpDer(1), 1, 2)?.mul(&zh31.sub(&zh32));
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_502);
        let mut worst = 0.0f64;
        for anchor in [1u32, 2u32] {
            let res = integrate_once(&f, 3, Some(anchor), k.jet_cap())?;
            for _ in 0..10 {
                let a = random_assignment(&mut rng, k.tau(), &[1, 2]);
                worst = worst.max(res.evaluate(&k, &a)?.norm());
            }
        }
        r.deviation("paper.08.phi_plus_vanishes", t0, worst, 1e-9);
    }

    // 9. principal-value oracle agreement at tau = i
    {
        type PvCase<'a> = (&'a str, Point, &'a [(Point, Complex64)]);
        let k = ctx_at(c(0.0, 1.0))?;
        let cases: [PvCase; 3] = [
            ("wp(1-2)", 1, &[(2, c(0.29, 0.41))]),
            ("wp(1-2)^2", 1, &[(2, c(0.29, 0.41))]),
            (
                "wp(1-3)*wp(2-3)",
                3,
                &[(1, c(0.13, 0.21)), (2, c(0.57, 0.89))],
            ),
        ];
        for (text, active, fixed) in cases {
            let t0 = Instant::now();
            let f = parse(text)?;
            let assign: BTreeMap<Point, Complex64> = fixed.iter().cloned().collect();
            let engine = integrate_once(&f, active, None, k.jet_cap())?.evaluate(&k, &assign)?;
            let rep = pv_single_step(&f, active, &assign, &k, &PvOptions::default())?;
            let verdict = compare(engine, &rep, 1e-3);
            let name = format!("paper.09.pv_agreement[{text}]");
            r.out.push(CheckOutcome {
                name,
                pass: verdict.pass,
                got: rep.value,
                want: engine,
                rel_err: verdict.rel_dev,
                millis: t0.elapsed().as_secs_f64() * 1e3,
            });
        }
    }

    // 10. contour formula for wp at tau = i, judged against the spec target
    // of -pi = -eta1 (i). The faithful formula returns -eta1hat(i), which
    // vanishes by square-lattice symmetry; the lattice-sum oracle below
    // pins eta1(i) = pi, and the discrepancy is documented rather than
    // patched over.
    {
        let k = ctx_at(c(0.0, 1.0))?;
        let t0 = Instant::now();
        let eta1_oracle = lattice::weight2_eisenstein(k.tau());
        let pinned = (eta1_oracle - c(PI, 0.0)).norm() < 1e-10;
        let f = parse("wp(1-2)")?;
        let got = contour_contact_check(&f, 1, &[(2, c(0.33, 0.47))].into_iter().collect(), &k)?;
        let want = c(-PI, 0.0);
        let rel = (got - want).norm() / want.norm();
        r.out.push(CheckOutcome {
            name: "paper.10.contour_wp_at_i".into(),
            pass: pinned && rel < 1e-6,
            got,
            want,
            rel_err: rel,
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
    }

    // 11. weight-6 modularity of the wp^3 integral
    {
        let f = parse("wp(1-2)^3")?;
        let pairs = [
            ("2i->i/2", c(0.0, 2.0), c(0.0, 0.5)),
            ("1+i->(-1+i)/2", c(1.0, 1.0), c(-0.5, 0.5)),
        ];
        for (tag, tau, stau) in pairs {
            let t0 = Instant::now();
            let k = ctx_at(tau)?;
            let ks = ctx_at(stau)?;
            let f_tau = integrate_all_value(&f, &[1, 2], &k)?;
            let f_stau = integrate_all_value(&f, &[1, 2], &ks)?;
            let want = tau.powu(6) * f_tau;
            r.value(&format!("paper.11.modularity[{tag}]"), t0, f_stau, want, 1e-8);
        }
    }

    Ok(r.out)
}

pub fn kernel_suite(tau_override: Option<Complex64>) -> Result<Vec<CheckOutcome>> {
    let mut r = Recorder::new();
    let taus: Vec<(String, Complex64)> = match tau_override {
        Some(t) => vec![(format!("{t}"), t)],
        None => standard_taus(),
    };
    for (tag, tau) in &taus {
        let k = ctx_at(*tau)?;
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_503);

        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let z = c(rng.random_range(0.08..0.92), 0.0) + rng.random_range(0.08..0.92) * tau;
            let d = k.wp_jet(z, 2)?;
            let cubic = d[1] * d[1] - (4.0 * d[0].powu(3) - k.g2() * d[0] - k.g3());
            worst = worst.max(cubic.norm() / (4.0 * d[0].powu(3)).norm().max(1.0));
            let second = d[2] - (6.0 * d[0] * d[0] - 0.5 * k.g2());
            worst = worst.max(second.norm() / (6.0 * d[0] * d[0]).norm().max(1.0));
        }
        r.deviation(&format!("kernel.weierstrass[{tag}]"), t0, worst, 1e-8);

        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let z = c(rng.random_range(0.1..0.9), 0.0) + rng.random_range(0.1..0.9) * tau;
            let v = k.zhat_value(z)?;
            for period in [c(1.0, 0.0), *tau] {
                worst = worst.max((k.zhat_value(z + period)? - v).norm());
            }
            worst = worst.max((k.zhat_value(-z)? + v).norm());
        }
        r.deviation(&format!("kernel.zhat_symmetries[{tag}]"), t0, worst, 1e-8);

        // [Zhat]_3 = -2 G4 by spectral extraction from point values
        let t0 = Instant::now();
        let rho = 0.3f64;
        let n = 32;
        let mut acc = c(0.0, 0.0);
        for j in 0..n {
            let phi = 2.0 * PI * j as f64 / n as f64;
            let w = rho * c(phi.cos(), phi.sin());
            let v = k.zhat_value(w)?;
            let rem = v - 1.0 / w + k.eta1hat() * w + k.pi_over_imtau() * w.conj();
            acc += rem * (-Complex64::i() * 3.0 * phi).exp();
        }
        let got = acc / n as f64 / rho.powi(3);
        r.value(
            &format!("kernel.zhat_w3_coeff[{tag}]"),
            t0,
            got,
            -2.0 * k.big_g(2)?,
            1e-8,
        );

        let t0 = Instant::now();
        let th = k.theta_jet(c(0.5, 0.0), 1)?;
        let zeta_half = k.eta1() * 0.5 + th.coeffs[1] / th.coeffs[0];
        r.value(
            &format!("kernel.zeta_half[{tag}]"),
            t0,
            zeta_half,
            k.eta1() * 0.5,
            1e-8,
        );

        let t0 = Instant::now();
        let e1 = k.wp_jet(c(0.5, 0.0), 0)?[0];
        let e2 = k.wp_jet(tau / 2.0, 0)?[0];
        let e3 = k.wp_jet((c(1.0, 0.0) + tau) / 2.0, 0)?[0];
        r.value(
            &format!("kernel.root_sum[{tag}]"),
            t0,
            e1 + e2 + e3,
            c(0.0, 0.0),
            1e-8,
        );
    }
    Ok(r.out)
}

/// Random integrand over the given points: a short sum of atom monomials.
fn random_integrand(rng: &mut ChaCha8Rng, points: &[Point], meromorphic_in: Option<Point>) -> Expr {
    loop {
        let mut e = Expr::zero();
        for _ in 0..rng.random_range(1..=3usize) {
            let mut t = Expr::number(c(
                rng.random_range(-2.0..2.0),
                if rng.random_bool(0.3) {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                },
            ));
            for _ in 0..rng.random_range(1..=2usize) {
                let a = *points.choose(rng).unwrap();
                let mut b = *points.choose(rng).unwrap();
                while b == a {
                    b = *points.choose(rng).unwrap();
                }
                let force_wp = meromorphic_in
                    .map(|p| a == p || b == p)
                    .unwrap_or(false);
                let atom = if force_wp || rng.random_bool(0.7) {
                    Expr::atom(AtomKind::WpDer(rng.random_range(0..=2)), a, b).unwrap()
                } else {
                    Expr::atom(AtomKind::Zhat, a, b).unwrap()
                };
                t = t.mul(&atom);
            }
            e = e.add(&t);
        }
        if !e.is_zero_expr() {
            return e;
        }
    }
}

pub fn properties_suite(tau_override: Option<Complex64>) -> Result<Vec<CheckOutcome>> {
    let mut r = Recorder::new();
    let tau = tau_override.unwrap_or(c(0.0, 2.0));
    let k = ctx_at(tau)?;
    let cap = DEFAULT_JET_CAP;

    // anchor independence
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1001);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let f = random_integrand(&mut rng, &[1, 2, 3], None);
            if !f.involves(1) {
                continue;
            }
            let base = integrate_once(&f, 1, None, cap)?;
            let a = random_assignment(&mut rng, tau, &[2, 3]);
            let v0 = base.evaluate(&k, &a)?;
            for anchor in [2u32, 3u32] {
                let alt = integrate_once(&f, 1, Some(anchor), cap)?;
                let v1 = alt.evaluate(&k, &a)?;
                worst = worst.max((v0 - v1).norm() / v0.norm().max(1.0));
            }
        }
        r.deviation("properties.anchor_independence", t0, worst, 1e-8);
    }

    // order independence
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1002);
        let orders: [[Point; 3]; 6] = [
            [1, 2, 3],
            [1, 3, 2],
            [2, 1, 3],
            [2, 3, 1],
            [3, 1, 2],
            [3, 2, 1],
        ];
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let f = random_integrand(&mut rng, &[1, 2, 3], None);
            let mut vals = Vec::with_capacity(6);
            for order in &orders {
                vals.push(integrate_all_value(&f, order, &k)?);
            }
            let first = vals[0];
            for v in &vals[1..] {
                worst = worst.max((v - first).norm() / first.norm().max(1.0));
            }
        }
        r.deviation("properties.order_independence", t0, worst, 1e-9);
    }

    // linearity
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1003);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let f = random_integrand(&mut rng, &[1, 2, 3], None);
            let g = random_integrand(&mut rng, &[1, 2, 3], None);
            if !f.involves(1) || !g.involves(1) {
                continue;
            }
            let ca = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let cb = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let lhs = integrate_once(&f.scale(ca).add(&g.scale(cb)), 1, None, cap)?;
            let rhs = integrate_once(&f, 1, None, cap)?
                .scale(ca)
                .add(&integrate_once(&g, 1, None, cap)?.scale(cb));
            let a = random_assignment(&mut rng, tau, &[2, 3]);
            let v1 = lhs.evaluate(&k, &a)?;
            let v2 = rhs.evaluate(&k, &a)?;
            worst = worst.max((v1 - v2).norm() / v1.norm().max(1.0));
        }
        r.deviation("properties.linearity", t0, worst, 1e-10);
    }

    // residue-sum vanishing for meromorphic integrands
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1004);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let f = random_integrand(&mut rng, &[1, 2, 3], Some(1));
            if !f.involves(1) {
                continue;
            }
            let decomp = polar_decomposition(&f, 1, cap)?;
            let mut sum = Expr::zero();
            for (_, res) in &decomp {
                sum = sum.add(res);
            }
            let a = random_assignment(&mut rng, tau, &[2, 3]);
            let scale = residue_part(&decomp, 1)
                .evaluate(&k, &{
                    let mut aa = a.clone();
                    aa.insert(1, c(0.21, 0.0) + c(0.17, 0.0) * tau);
                    aa
                })
                .map(|v| v.norm())
                .unwrap_or(1.0);
            worst = worst.max(sum.evaluate(&k, &a)?.norm() / scale.max(1.0));
        }
        r.deviation("properties.residue_sum_zero", t0, worst, 1e-9);
    }

    // parser round-trip
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1005);
        let mut failures = 0usize;
        for _ in 0..200 {
            let mut f = random_integrand(&mut rng, &[1, 2, 3, 4], None);
            if rng.random_bool(0.4) {
                f = f.mul(&Expr::const_sym(
                    *[
                        ConstSym::Eta1Hat,
                        ConstSym::G2Lower,
                        ConstSym::G3Lower,
                        ConstSym::GUpper(2),
                        ConstSym::Pi,
                    ]
                    .choose(&mut rng)
                    .unwrap(),
                ));
            }
            let text = render_expr(&f);
            match parse(&text) {
                Ok(back) if back == f => {}
                _ => failures += 1,
            }
        }
        r.deviation("properties.parser_round_trip", t0, failures as f64, 0.5);
    }

    Ok(r.out)
}

/// Dispatches a named suite (`paper`, `kernel`, `properties`, or `all`).
pub fn run_suite(suite: &str, tau_override: Option<Complex64>) -> Result<Vec<CheckOutcome>> {
    match suite {
        "paper" => paper_suite(tau_override),
        "kernel" => kernel_suite(tau_override),
        "properties" => properties_suite(tau_override),
        "all" => {
            let mut out = kernel_suite(tau_override)?;
            out.extend(paper_suite(tau_override)?);
            out.extend(properties_suite(tau_override)?);
            Ok(out)
        }
        other => Err(crate::Error::InvalidArgument(format!(
            "unknown suite `{other}` (expected paper|kernel|properties|all)"
        ))),
    }
}
