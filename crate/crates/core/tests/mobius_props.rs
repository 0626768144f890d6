use std::f64::consts::PI;

use cftdrive::mobius::*;
use cftdrive::Complex64 as C64;
use proptest::prelude::*;

fn su11(r: f64, phi: f64, psi: f64) -> MobiusMatrix {
    let a = C64::from_polar(r.cosh(), phi);
    let b = C64::from_polar(r.sinh(), psi);
    MobiusMatrix::new(a, b, b.conj(), a.conj())
}

fn su2(r: f64, phi: f64, psi: f64) -> MobiusMatrix {
    let a = C64::from_polar(r.cos(), phi);
    let b = C64::from_polar(r.sin(), psi);
    MobiusMatrix::new(a, b, -b.conj(), a.conj())
}

fn sl2c(a: C64, b: C64, c: C64) -> MobiusMatrix {
    MobiusMatrix::new(a, b, c, (C64::new(1.0, 0.0) + b * c) / a)
}

fn cplx() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| C64::new(x, y))
}

fn nonzero() -> impl Strategy<Value = C64> {
    (0.3..2.0f64, -PI..PI).prop_map(|(r, t)| C64::from_polar(r, t))
}

#[test]
fn table_rows_over_twenty_durations() {
    let rows: [(DeformationParams, &str); 3] = [
        (DeformationParams::real(1.0, 0.0, 0.0), "u0"),
        (DeformationParams::real(1.0, 1.0, 0.0), "u1"),
        (DeformationParams::real(0.0, 0.0, 1.0), "u2"),
    ];
    for k in 0..20 {
        let t = 0.05 + 0.1 * k as f64;
        for (p, name) in &rows {
            let want = match *name {
                "u0" => build_u0(t, 1.0).unwrap(),
                "u1" => build_u1(t, 1.0).unwrap(),
                _ => build_u2(t, 1.0).unwrap(),
            };
            for ch in [Chirality::Holo, Chirality::Antiholo] {
                let got = build_from_deformation(p, t, ch).unwrap();
                assert!(got.max_abs_diff(&want) < 1e-10, "{name} t={t}");
            }
        }
        for gamma in [0.3, PI / 2.0, 2.0] {
            let p = DeformationParams::su2(gamma);
            for ch in [Chirality::Holo, Chirality::Antiholo] {
                let got = build_from_deformation(&p, t, ch).unwrap();
                let want = build_u3(t, 1.0, gamma, ch).unwrap();
                assert!(got.max_abs_diff(&want) < 1e-10, "u3 Γ={gamma} t={t} {ch:?}");
            }
        }
    }
}

#[test]
fn cover_length_enters_every_builder() {
    // l = L/r; a step of duration T on a double cover of L = 2 is the step T on l = 1
    let p = DeformationParams::real(1.0, 1.0, 0.0).with_cover(2, 2.0);
    let got = build_from_deformation(&p, 0.3, Chirality::Holo).unwrap();
    assert!(got.max_abs_diff(&build_u1(0.3, 1.0).unwrap()) < 1e-12);
    let p0 = DeformationParams::uniform().with_cover(2, 2.0);
    let got = build_from_deformation(&p0, 0.3, Chirality::Holo).unwrap();
    assert!(got.max_abs_diff(&build_u0(0.3, 1.0).unwrap()) < 1e-12);
}

#[test]
fn u3_closed_form_entries() {
    let (t, g) = (0.37, 0.8);
    let th = PI * t;
    let m = build_u3(t, 1.0, g, Chirality::Holo).unwrap();
    assert!((m.a - C64::new(th.cos(), g.cos() * th.sin())).norm() < 1e-15);
    assert!((m.b - C64::new(-th.sin() * g.sin(), 0.0)).norm() < 1e-15);
    let n = build_u3(t, 1.0, g, Chirality::Antiholo).unwrap();
    assert_eq!(n.a, m.a);
    assert_eq!(n.b, -m.b);
    assert_eq!(n.c, -m.c);
}

#[test]
fn invalid_lengths_are_rejected() {
    assert!(build_u0(1.0, 0.0).is_err());
    assert!(build_u1(f64::NAN, 1.0).is_err());
    assert!(build_u2(1.0, -1.0).is_err());
    assert!(build_u3(f64::INFINITY, 1.0, 0.0, Chirality::Holo).is_err());
}

#[test]
fn generator_is_traceless() {
    let p = DeformationParams::new(C64::new(0.3, 0.1), C64::new(-0.7, 0.2), C64::new(0.4, -0.5), 1, 1.0).unwrap();
    for ch in [Chirality::Holo, Chirality::Antiholo] {
        assert!(generator(&p, ch).trace().norm() < 1e-15);
        let u = build_from_deformation(&p, 0.8, ch).unwrap();
        assert!((u.det() - 1.0).norm() < 1e-12);
    }
}

proptest! {
    #[test]
    fn unimodularity_closes(a in nonzero(), b in cplx(), c in cplx(), x in nonzero(), y in cplx(), z in cplx()) {
        let m = sl2c(a, b, c) * sl2c(x, y, z);
        prop_assert!((m.det() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn su11_closure(r1 in 0.0..2.0f64, p1 in -PI..PI, q1 in -PI..PI, r2 in 0.0..2.0f64, p2 in -PI..PI, q2 in -PI..PI) {
        let m = su11(r1, p1, q1) * su11(r2, p2, q2);
        prop_assert_eq!(classify_group(&m, 1e-7), GroupClass::SU11);
    }

    #[test]
    fn su2_closure_trace_and_norm(r1 in 0.1..1.4f64, p1 in -PI..PI, q1 in -PI..PI, r2 in 0.1..1.4f64, p2 in -PI..PI, q2 in -PI..PI) {
        let m = su2(r1, p1, q1) * su2(r2, p2, q2);
        prop_assert!(matches!(classify_group(&m, 1e-9), GroupClass::SU2 | GroupClass::SU11));
        let tr = m.trace();
        prop_assert!(tr.im.abs() < 1e-12);
        prop_assert!(tr.re.abs() <= 2.0 + 1e-12);
        prop_assert!((m.frobenius() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn u3_trace_bound(t in -3.0..3.0f64, g in -PI..PI) {
        for ch in [Chirality::Holo, Chirality::Antiholo] {
            let m = build_u3(t, 1.0, g, ch).unwrap();
            let tr = m.trace();
            prop_assert!(tr.im.abs() < 1e-12 && tr.re.abs() <= 2.0 + 1e-12);
            let u = m * m.adjoint();
            prop_assert!(u.max_abs_diff(&MobiusMatrix::IDENTITY) < 1e-12);
        }
    }

    #[test]
    fn u1_classifies_su11(t in -2.0..2.0f64) {
        prop_assert_eq!(classify_group(&build_u1(t, 1.0).unwrap(), DEFAULT_CLASSIFY_TOL), GroupClass::SU11);
    }

    #[test]
    fn apply_composes(r1 in 0.0..1.5f64, p1 in -PI..PI, q1 in -PI..PI, r2 in 0.0..1.5f64, p2 in -PI..PI, q2 in -PI..PI,
                      zr in -0.9..0.9f64, zi in -0.4..0.4f64) {
        let (m1, m2) = (su11(r1, p1, q1), su11(r2, p2, q2));
        let z = C64::new(zr, zi);
        // SU(1,1) maps the unit disc to itself, so no poles
        let inner = match mobius_apply(&m2, z) { MobiusPoint::Finite(w) => w, MobiusPoint::Infinity => unreachable!() };
        let (lhs, rhs) = (mobius_apply(&(m1 * m2), z), mobius_apply(&m1, inner));
        match (lhs, rhs) {
            (MobiusPoint::Finite(a), MobiusPoint::Finite(b)) => prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm())),
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn deformation_exponential_is_a_group(s0 in -1.0..1.0f64, sp in -1.0..1.0f64, sm in -1.0..1.0f64, t in 0.0..1.0f64, u in 0.0..1.0f64) {
        let p = DeformationParams::real(s0, sp, sm);
        let a = build_from_deformation(&p, t, Chirality::Holo).unwrap();
        let b = build_from_deformation(&p, u, Chirality::Holo).unwrap();
        let ab = build_from_deformation(&p, t + u, Chirality::Holo).unwrap();
        prop_assert!((a * b).max_abs_diff(&ab) < 1e-9 * ab.max_abs().max(1.0));
    }
}
