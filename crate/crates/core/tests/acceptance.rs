//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! line per criterion and exits nonzero if any of them fails.

use kfield_core::cosymplectic::{
    check_cosym_solution, check_cosym_solution_with, cosym_gauge_solution, desuspend, suspend,
};
use kfield_core::expr::parse;
use kfield_core::fields::{convergence_order, Axis, Grid};
use kfield_core::gallery;
use kfield_core::hamiltonian::{check_solution, check_solution_with, gauge_solution, CheckOptions};
use kfield_core::hamjac::{hj_defect, integrate_projected, project_field, verify_lift, ClosedSectionSpec};
use kfield_core::lagrangian::{derive_lagrangian, regularity};
use kfield_core::legendre::{induced_hamiltonian, legendre_forward, pullback_check};
use kfield_core::sampling::SampleBox;
use kfield_core::structures::canonical_forms;
use kfield_core::{Assignment, Expr, Formalism, KVectorField, SystemDef, SystemKind};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

const H: SystemKind = SystemKind::Hamiltonian;
const L: SystemKind = SystemKind::Lagrangian;
const KS: Formalism = Formalism::KSymplectic;
const KC: Formalism = Formalism::KCosymplectic;

const REEB_TOL: f64 = 1e-12;
const GAUGE_TOL: f64 = 1e-10;
const GAUGE_SAMPLES: usize = 100;
const NAVIER_REL_TOL: f64 = 1e-12;
const NAVIER_POINTS: usize = 20;
const LEGENDRE_TOL: f64 = 1e-8;
const LEGENDRE_POINTS: usize = 50;
const ROUND_TRIP_TOL: f64 = 1e-9;
const HJ_DEFECT_TOL: f64 = 1e-12;
const HJ_INTEGRATION_TOL: f64 = 1e-6;
const HJ_ORDER: (f64, f64) = (1.7, 2.3);
const PDE_ORDER: (f64, f64) = (1.7, 2.3);
const EXACT_TOL: f64 = 1e-8;
const SUSPENSION_TOL: f64 = 1e-12;
const REDUCTION_TOL: f64 = 1e-12;
const DIFF_REL_TOL: f64 = 1e-6;
const DIFF_CASES: usize = 500;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn none() -> Assignment {
    Assignment::new()
}

fn halton_box(dim: usize, count: usize) -> Vec<Vec<f64>> {
    SampleBox::cube(dim, -1.0, 1.0).halton(count)
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn structures() -> Outcome {
    let mut worst_reeb: f64 = 0.0;
    for k in 1..=3 {
        for n in 1..=3 {
            let r = canonical_forms(k, n, false).verify().map_err(|e| format!("({n},{k}) ks: {e}"))?;
            if !r.pass || r.kernel_intersection_dim != 0 {
                return Err(format!("({n},{k}) k-symplectic: {r:?}"));
            }
            let c = canonical_forms(k, n, true).verify().map_err(|e| format!("({n},{k}) kc: {e}"))?;
            if !c.pass || c.ker_omega_dim != Some(k) {
                return Err(format!("({n},{k}) k-cosymplectic: {c:?}"));
            }
            let reeb = c.reeb.ok_or(format!("({n},{k}) no Reeb fields"))?;
            for a in 0..k {
                for j in 0..reeb.cols() {
                    let want = if a == j { 1.0 } else { 0.0 };
                    worst_reeb = worst_reeb.max((reeb[(a, j)] - want).abs());
                }
            }
        }
    }
    ensure(worst_reeb <= REEB_TOL, format!("9 (n,k) pairs pass; Reeb deviation {worst_reeb:.1e}"))
}

// Kernel members: zero base and config parts, trace-free fiber part.
fn kernel_offset(s: &SystemDef) -> KVectorField {
    let (k, n) = (s.k(), s.n());
    let mut y = KVectorField::zero(k, n, s.is_cosymplectic());
    let q = Expr::var(s.frame.config(0));
    let wiggle = Expr::mul(Expr::constant(0.7), Expr::unary(kfield_core::expr::UnaryOp::Sin, q.clone()));
    if k > 1 {
        for i in 0..n {
            y.fiber[0][0][i] = wiggle.clone();
            y.fiber[1][1][i] = Expr::neg(wiggle.clone());
            y.fiber[0][1][i] = Expr::add(q.clone(), Expr::constant(2.0));
            y.fiber[1][0][i] = Expr::constant(-1.5);
        }
    }
    y
}

fn gauge() -> Outcome {
    let opts = CheckOptions { samples: GAUGE_SAMPLES, tol: GAUGE_TOL, ..CheckOptions::default() };
    let (mut count, mut worst): (usize, f64) = (0, 0.0);
    for e in gallery::entries() {
        if !e.kinds.contains(&H) {
            continue;
        }
        for &form in e.formalisms {
            let s = gallery::instantiate_variant(e.name, &none(), H, form).map_err(|err| err.to_string())?;
            let reports = if form == KC {
                let x = cosym_gauge_solution(&s).map_err(|err| err.to_string())?;
                let shifted = x.plus(&kernel_offset(&s)).map_err(|err| err.to_string())?;
                [x, shifted].map(|f| check_cosym_solution_with(&f, &s, &opts).map_err(|err| err.to_string()))
            } else {
                let x = gauge_solution(&s).map_err(|err| err.to_string())?;
                let shifted = x.plus(&kernel_offset(&s)).map_err(|err| err.to_string())?;
                [x, shifted].map(|f| check_solution_with(&f, &s, &opts).map_err(|err| err.to_string()))
            };
            for r in reports {
                let r = r?;
                if !r.is_solution || r.samples != GAUGE_SAMPLES {
                    return Err(format!(
                        "{} {}: defect {:.1e} over {} samples",
                        e.name,
                        form.as_str(),
                        r.max_defect,
                        r.samples
                    ));
                }
                worst = worst.max(r.max_defect);
            }
            count += 1;
        }
    }
    ensure(
        worst <= GAUGE_TOL,
        format!("{count} Hamiltonian variants, gauge and kernel-shifted; max defect {worst:.1e}"),
    )
}

fn navier() -> Outcome {
    let base = gallery::instantiate("navier", &none()).map_err(|e| e.to_string())?;
    let d = derive_lagrangian(&base).map_err(|e| e.to_string())?;
    let det_at = |lambda: f64, mu: f64| {
        let at = base.constants().with("lambda", lambda).with("mu", mu);
        regularity(&d, &at).map_err(|e| e.to_string())
    };
    let mut worst: f64 = 0.0;
    for p in SampleBox::new(vec![-2.0, 0.1], vec![3.0, 3.0]).halton(NAVIER_POINTS) {
        let (lambda, mu) = (p[0], p[1]);
        let r = det_at(lambda, mu)?;
        let want = mu.powi(3) * (2.0 * lambda + 3.0 * mu);
        worst = worst.max((r.det - want).abs() / want.abs().max(1e-300));
        if r.regular != (want.abs() > 1e-8) {
            return Err(format!("regularity flag wrong at lambda={lambda}, mu={mu}"));
        }
    }
    let singular = [(1.0, 0.0), (-1.5, 1.0), (-3.0, 2.0)];
    for (lambda, mu) in singular {
        if det_at(lambda, mu)?.regular {
            return Err(format!("lambda={lambda}, mu={mu} not flagged singular"));
        }
    }
    ensure(
        worst <= NAVIER_REL_TOL,
        format!("det = mu^3(2 lambda + 3 mu) to {worst:.1e} relative; {} singular probes flagged", singular.len()),
    )
}

fn legendre() -> Outcome {
    let (mut dworst, mut pworst, mut rworst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for name in ["wave", "sine_gordon", "ginzburg_landau", "laplace", "quadratic"] {
        let e = gallery::entry(name).map_err(|e| e.to_string())?;
        let lag = gallery::instantiate_variant(name, &none(), L, e.formalism()).map_err(|e| e.to_string())?;
        let ham = gallery::instantiate_variant(name, &none(), H, e.formalism()).map_err(|e| e.to_string())?;
        let induced = induced_hamiltonian(&lag).map_err(|e| e.to_string())?;
        let sym = induced.symbolic.ok_or(format!("{name}: no closed form"))?;
        for phase in halton_box(ham.phase_dim(), LEGENDRE_POINTS) {
            let (a, b) = (ham.point(&phase), sym.point(&phase));
            for c in ham.phase_coords() {
                let da = ham.expression.diff(c).eval(&a).map_err(|e| e.to_string())?;
                let db = sym.expression.diff(c).eval(&b).map_err(|e| e.to_string())?;
                dworst = dworst.max((da - db).abs());
            }
        }
    }
    for name in ["wave", "sine_gordon", "ginzburg_landau", "laplace", "quadratic", "navier", "minimal_surface"] {
        let e = gallery::entry(name).map_err(|e| e.to_string())?;
        let lag = gallery::instantiate_variant(name, &none(), L, e.formalism()).map_err(|e| e.to_string())?;
        let map = legendre_forward(&lag).map_err(|e| e.to_string())?;
        let fibers = lag.k() * lag.n();
        let npos = lag.phase_dim() - fibers;
        for phase in halton_box(lag.phase_dim(), LEGENDRE_POINTS) {
            pworst = pworst.max(pullback_check(&lag, &lag.point(&phase)).map_err(|e| format!("{name}: {e}"))?);
            let (pos, v) = phase.split_at(npos);
            let p = map.apply(pos, v).map_err(|e| e.to_string())?;
            let back = map.invert(pos, &p, &vec![0.0; fibers]).map_err(|e| format!("{name}: {e}"))?;
            rworst = back.iter().zip(v).fold(rworst, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    ensure(
        dworst <= LEGENDRE_TOL && pworst <= LEGENDRE_TOL && rworst <= ROUND_TRIP_TOL,
        format!("dH mismatch {dworst:.1e}, pullback {pworst:.1e}, Newton round trip {rworst:.1e}"),
    )
}

fn string_system() -> Result<(SystemDef, ClosedSectionSpec, Assignment), String> {
    let p = none().with("sigma", 1.0).with("tau", 4.0).with("a", 1.0).with("b", 2.0).with("C", 1.0);
    let s = gallery::instantiate_variant("vibrating_string", &p, H, KS).map_err(|e| e.to_string())?;
    let e = gallery::entry("vibrating_string").map_err(|e| e.to_string())?;
    let g = ClosedSectionSpec::parse(&s, e.hj_gamma).map_err(|e| e.to_string())?;
    Ok((s, g, p))
}

fn vibrating_string() -> Outcome {
    let (s, g, p) = string_system()?;
    let d = hj_defect(&s, &g).map_err(|e| e.to_string())?;
    let z = project_field(&s, &g).map_err(|e| e.to_string())?;
    let exact = gallery::analytic_solution("vibrating_string", "exp", &p).map_err(|e| e.to_string())?;
    let run = |count: usize| -> Result<(f64, f64), String> {
        let grid = Grid::uniform(2, 0.0, 1.0, count).map_err(|e| e.to_string())?;
        let out = integrate_projected(&z, &[1.0], &grid).map_err(|e| e.to_string())?;
        let err = out.section.max_error(0, |x| exact.psi(x)[0], false);
        let res = verify_lift(&s, &g, &out.section).map_err(|e| e.to_string())?.max();
        Ok((err, res))
    };
    let (_, r1) = run(17)?;
    let (_, r2) = run(33)?;
    let (err, r3) = run(65)?;
    let (o1, o2) = (convergence_order(r1, r2), convergence_order(r2, r3));
    let in_band = |o: f64| (HJ_ORDER.0..=HJ_ORDER.1).contains(&o);
    ensure(
        d.hj <= HJ_DEFECT_TOL
            && d.closedness <= HJ_DEFECT_TOL
            && err <= HJ_INTEGRATION_TOL
            && in_band(o1)
            && in_band(o2),
        format!("HJ {:.1e}, closedness {:.1e}, 65^2 error {err:.1e}, lift orders {o1:.2}/{o2:.2}", d.hj, d.closedness),
    )
}

fn scalar_field() -> Outcome {
    let p = none().with("C1", 1.0).with("C2", 1.0).with("C3", 0.0).with("C4", 0.0).with("C0", 4.0);
    let s = gallery::instantiate_variant("scalar_field_hj", &p, H, KC).map_err(|e| e.to_string())?;
    let e = gallery::entry("scalar_field_hj").map_err(|e| e.to_string())?;
    let g = ClosedSectionSpec::parse(&s, e.hj_gamma).map_err(|e| e.to_string())?;
    let d = hj_defect(&s, &g).map_err(|e| e.to_string())?;
    let z = project_field(&s, &g).map_err(|e| e.to_string())?;
    let exact = gallery::analytic_solution("scalar_field_hj", "rational", &p).map_err(|e| e.to_string())?;
    let run = |count: usize| -> Result<(f64, f64), String> {
        let unit = |c| Axis::new(0.0, 1.0, c);
        let grid = Grid::new(vec![unit(count), unit(count), unit(3), unit(3)]).map_err(|e| e.to_string())?;
        let q0 = exact.psi(&[0.0; 4]);
        let out = integrate_projected(&z, &q0, &grid).map_err(|e| e.to_string())?;
        let err = out.section.max_error(0, |x| exact.psi(x)[0], false);
        Ok((err, verify_lift(&s, &g, &out.section).map_err(|e| e.to_string())?.max()))
    };
    let (_, r1) = run(17)?;
    let (err, r2) = run(33)?;
    let order = convergence_order(r1, r2);
    ensure(
        d.hj <= HJ_DEFECT_TOL && err <= HJ_INTEGRATION_TOL && (HJ_ORDER.0..=HJ_ORDER.1).contains(&order),
        format!("HJ {:.1e}, error {err:.1e}, lift order {order:.2}", d.hj),
    )
}

fn evolved_error(name: &str, which: &str, space: usize, levels: usize) -> Result<f64, String> {
    let exact = gallery::analytic_solution(name, which, &none()).map_err(|e| e.to_string())?;
    let t = gallery::hyperbolic(name, &none()).map_err(|e| e.to_string())?.time_axis;
    let axes = exact
        .domain()
        .into_iter()
        .enumerate()
        .map(|(a, (lo, hi))| Axis::new(lo, hi, if a == t { levels } else { space }))
        .collect();
    let grid = Grid::new(axes).map_err(|e| e.to_string())?;
    let sec = gallery::evolve_solution(name, which, &none(), &grid).map_err(|e| e.to_string())?;
    Ok(sec.max_error(0, |x| exact.psi(x)[0], false))
}

fn relaxed_error(name: &str, which: &str, count: usize) -> Result<f64, String> {
    let exact = gallery::analytic_solution(name, which, &none()).map_err(|e| e.to_string())?;
    let grid = exact.grid(count).map_err(|e| e.to_string())?;
    let r = gallery::relax_solution(name, which, &none(), &grid, 1e-11, 20_000).map_err(|e| e.to_string())?;
    Ok((0..exact.n).map(|i| r.section.max_error(i, |x| exact.psi(x)[i], true)).fold(0.0, f64::max))
}

fn pde_orders() -> Outcome {
    let band = |o: f64| (PDE_ORDER.0..=PDE_ORDER.1).contains(&o);
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, which, (s1, l1), (s2, l2)) in
        [("wave", "dalembert", (33, 21), (65, 41)), ("sine_gordon", "kink", (81, 21), (161, 41))]
    {
        let order = convergence_order(evolved_error(name, which, s1, l1)?, evolved_error(name, which, s2, l2)?);
        ok &= band(order);
        parts.push(format!("{name} {order:.2}"));
    }
    let order = convergence_order(relaxed_error("laplace", "exp_sin", 17)?, relaxed_error("laplace", "exp_sin", 33)?);
    ok &= band(order);
    parts.push(format!("laplace {order:.2}"));
    for (name, which) in
        [("laplace", "quadratic"), ("navier", "linear"), ("navier", "quadratic"), ("minimal_surface", "plane")]
    {
        let err = relaxed_error(name, which, 17)?;
        ok &= err <= EXACT_TOL;
        parts.push(format!("{name}/{which} exact to {err:.0e}"));
    }
    ensure(ok, parts.join(", "))
}

fn suspension() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["electrostatic", "laplace"] {
        let s = gallery::instantiate_variant(name, &none(), H, KS).map_err(|e| e.to_string())?;
        let x = gauge_solution(&s).map_err(|e| e.to_string())?;
        let (sc, xc) = suspend(&s, &x).map_err(|e| e.to_string())?;
        let up = check_cosym_solution(&xc, &sc).map_err(|e| e.to_string())?;
        let (sd, xd) = desuspend(&sc, &xc).map_err(|e| e.to_string())?;
        let down = check_solution(&xd, &sd).map_err(|e| e.to_string())?;
        if sd.formalism != KS || xd.base.is_some() {
            return Err(format!("{name}: desuspension kept the base"));
        }
        worst = worst.max(up.max_defect).max(down.max_defect);
    }
    ensure(worst <= SUSPENSION_TOL, format!("electrostatic and laplace round trip; max residual {worst:.1e}"))
}

fn reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    for form in [KS, KC] {
        let frame = kfield_core::CoordFrame::new(1, 1).map_err(|e| e.to_string())?;
        let (q, p) = (frame.config(0).to_string(), frame.momentum(0, 0).to_string());
        let t = frame.base(0).to_string();
        let text = format!("0.5*{p}^2 + 0.25*{q}^4 - {q}^2 + {t}*{q}*{p}");
        let text = if form == KS { format!("0.5*{p}^2 + 0.25*{q}^4 - {q}^2") } else { text };
        let s = SystemDef::parse("oscillator", 1, 1, H, form, &text, &[]).map_err(|e| e.to_string())?;
        let x = if form == KC {
            cosym_gauge_solution(&s).map_err(|e| e.to_string())?
        } else {
            gauge_solution(&s).map_err(|e| e.to_string())?
        };
        let h = &s.expression;
        let want_q = h.diff(&p);
        let want_p = Expr::neg(h.diff(&q));
        if x.config[0][0].simplify() != want_q.simplify() || x.fiber[0][0][0].simplify() != want_p.simplify() {
            return Err(format!("{}: gauge field differs symbolically", form.as_str()));
        }
        for phase in halton_box(s.phase_dim(), 50) {
            let at = s.point(&phase);
            let ev = |e: &Expr| e.eval(&at).map_err(|err| err.to_string());
            worst = worst.max((ev(&x.config[0][0])? - ev(&want_q)?).abs());
            worst = worst.max((ev(&x.fiber[0][0][0])? - ev(&want_p)?).abs());
            if let Some(b) = &x.base {
                worst = worst.max((ev(&b[0][0])? - 1.0).abs());
            }
        }
    }
    ensure(
        worst <= REDUCTION_TOL,
        format!("symbolically equal; Hamiltonian and evolution fields matched to {worst:.1e}"),
    )
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("({c:.3})")),
    ];
    leaf.prop_recursive(5, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + sin({b})))")),
            (inner.clone(), 2u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("log(2 + cos({a}))")),
        ]
    })
}

fn richardson(e: &Expr, a: &Assignment, var: &str, h: f64) -> Option<f64> {
    let x0 = a.get(var)?;
    let f = |x: f64| e.eval(&a.clone().with(var, x)).ok();
    let central = |h: f64| Some((f(x0 + h)? - f(x0 - h)?) / (2.0 * h));
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    Some((4.0 * d2 - d1) / 3.0)
}

fn diff_oracle() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let strategy = (arb_expr(), prop::array::uniform3(-1.5f64..1.5), 0usize..3);
    let (mut compared, mut skipped, mut worst): (usize, usize, f64) = (0, 0, 0.0);
    for _ in 0..DIFF_CASES {
        let (text, pt, vi) = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let e = parse(&text).map_err(|err| format!("{text}: {err}"))?;
        let var = ["x", "y", "z"][vi];
        let a = none().with("x", pt[0]).with("y", pt[1]).with("z", pt[2]);
        let exact = e.diff(var).eval(&a);
        let (fine, coarse) = (richardson(&e, &a, var, 1e-4), richardson(&e, &a, var, 2e-4));
        let (Ok(exact), Some(fine), Some(coarse)) = (exact, fine, coarse) else {
            skipped += 1;
            continue;
        };
        // the numeric oracle must itself be settled at this step
        if (fine - coarse).abs() > 1e-7 * (1.0 + fine.abs()) {
            skipped += 1;
            continue;
        }
        compared += 1;
        worst = worst.max((exact - fine).abs() / (1.0 + exact.abs()));
    }
    ensure(
        worst <= DIFF_REL_TOL && compared >= DIFF_CASES / 2,
        format!("{compared} derivatives compared ({skipped} skipped); max relative error {worst:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("canonical structures", structures),
        ("gauge solutions and kernel", gauge),
        ("Navier regularity", navier),
        ("Legendre duality", legendre),
        ("vibrating string Hamilton-Jacobi", vibrating_string),
        ("scalar field Hamilton-Jacobi", scalar_field),
        ("PDE convergence", pde_orders),
        ("suspension round trip", suspension),
        ("k = 1 reduction", reduction),
        ("differentiation oracle", diff_oracle),
    ];
    let mut failed = 0;
    for (idx, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", idx + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", idx + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
