mod common;

use pgopt::problems::linalg::SymMatrix;
use pgopt::problems::qp::BoxQP;
use pgopt::{
    local_curvature, projected_gradient, prox_step, BallSet, BoxSet, DetOracle, FeasibleSet,
    ProductSet, RngStream, Vector,
};
use proptest::prelude::*;

fn sets() -> Vec<FeasibleSet> {
    vec![
        BoxSet::uniform(3, -1.0, 2.0).unwrap().into(),
        BallSet::new(Vector::new(vec![0.5, -0.5, 1.0]).unwrap(), 1.5)
            .unwrap()
            .into(),
        ProductSet::concat(vec![
            BallSet::centered(2, 1.0).unwrap().into(),
            BoxSet::uniform(1, -2.0, 2.0).unwrap().into(),
        ])
        .unwrap()
        .into(),
    ]
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 3)
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_slice(xs).unwrap()
}

proptest! {
    #[test]
    fn projection_is_idempotent(y in vec3()) {
        for s in sets() {
            let p = s.project(&v(&y)).unwrap();
            let pp = s.project(&p).unwrap();
            prop_assert!(p.dist(&pp).unwrap() <= 1e-12);
            prop_assert!(s.contains(&p, 1e-12));
        }
    }

    #[test]
    fn projection_is_non_expansive(a in vec3(), b in vec3()) {
        for s in sets() {
            let pa = s.project(&v(&a)).unwrap();
            let pb = s.project(&v(&b)).unwrap();
            prop_assert!(pa.dist(&pb).unwrap() <= v(&a).dist(&v(&b)).unwrap() + 1e-12);
        }
    }

    #[test]
    fn prox_satisfies_variational_inequality(
        y in vec3(), g in vec3(), gamma in 0.05f64..20.0, seed in 0u64..1000
    ) {
        let mut stream = RngStream::new(seed, 0, "vi");
        for s in sets() {
            let x = s.project(&v(&y)).unwrap();
            let gv = v(&g);
            let xp = prox_step(&s, &x, &gv, gamma).unwrap();
            for _ in 0..10 {
                let z = s.sample_uniform(&mut stream).unwrap();
                let lhs: f64 = (0..3)
                    .map(|i| (gv[i] + gamma * (xp[i] - x[i])) * (z[i] - xp[i]))
                    .sum();
                prop_assert!(lhs >= -1e-9, "{lhs}");
            }
        }
    }

    #[test]
    fn mapping_is_one_lipschitz_in_g(
        y in vec3(), g1 in vec3(), g2 in vec3(), gamma in 0.05f64..20.0
    ) {
        for s in sets() {
            let x = s.project(&v(&y)).unwrap();
            let a = projected_gradient(&s, &x, &v(&g1), gamma).unwrap();
            let b = projected_gradient(&s, &x, &v(&g2), gamma).unwrap();
            prop_assert!(a.value.dist(&b.value).unwrap() <= v(&g1).dist(&v(&g2)).unwrap() + 1e-9);
            // value is reconstructible from x_plus
            for i in 0..3 {
                prop_assert_eq!(a.value[i], gamma * (x[i] - a.x_plus[i]));
            }
        }
    }

    #[test]
    fn interior_mapping_is_the_gradient(g in vec3(), gamma in 1.0f64..10.0) {
        let wide: FeasibleSet = BoxSet::uniform(3, -100.0, 100.0).unwrap().into();
        let pg = projected_gradient(&wide, &Vector::zeros(3), &v(&g), gamma).unwrap();
        for i in 0..3 {
            prop_assert!((pg.value[i] - g[i]).abs() <= 1e-12 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn quadratic_curvature_within_spectrum(a in vec3(), b in vec3(), seed in 0u64..50) {
        let mut s = RngStream::new(seed, 0, "sym");
        let q = SymMatrix::random_symmetric(3, &mut s).unwrap();
        let ev = q.eigenvalues().unwrap();
        let qp = BoxQP::new(q, s.standard_normal(3), BoxSet::uniform(3, -10.0, 10.0).unwrap()).unwrap();
        let (x, y) = (v(&a), v(&b));
        prop_assume!(x.dist(&y).unwrap() > 1e-3);
        let (fx, gx) = qp.value_grad(&x).unwrap();
        let l = local_curvature(fx, qp.value(&y).unwrap(), &gx, &x, &y).unwrap();
        prop_assert!(l >= ev[0] - 1e-8 && l <= ev[2] + 1e-8, "{l} not in [{}, {}]", ev[0], ev[2]);
    }
}

#[test]
fn projection_examples() {
    let b: FeasibleSet = BoxSet::uniform(2, -5.0, 5.0).unwrap().into();
    assert_eq!(b.project(&v(&[7.0, -9.0])).unwrap().as_slice(), &[5.0, -5.0]);
    let ball: FeasibleSet = BallSet::centered(2, 10.0).unwrap().into();
    let inside = v(&[0.0, 4.0]);
    assert_eq!(ball.project(&inside).unwrap(), inside);
    let small: FeasibleSet = BallSet::centered(2, 2.0).unwrap().into();
    let p = small.project(&v(&[3.0, 4.0])).unwrap();
    assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
}

#[test]
fn prox_examples() {
    let wide: FeasibleSet = BoxSet::uniform(1, -10.0, 10.0).unwrap().into();
    assert_eq!(prox_step(&wide, &v(&[0.0]), &v(&[2.0]), 4.0).unwrap().as_slice(), &[-0.5]);
    let pg = projected_gradient(&wide, &v(&[0.0]), &v(&[2.0]), 4.0).unwrap();
    assert_eq!(pg.value.as_slice(), &[2.0]);

    let unit: FeasibleSet = BoxSet::uniform(1, 0.0, 1.0).unwrap().into();
    assert_eq!(prox_step(&unit, &v(&[0.0]), &v(&[1.0]), 1.0).unwrap().as_slice(), &[0.0]);
    assert_eq!(projected_gradient(&unit, &v(&[0.0]), &v(&[1.0]), 1.0).unwrap().norm(), 0.0);

    let sq: FeasibleSet = BoxSet::uniform(2, -1.0, 1.0).unwrap().into();
    let xp = prox_step(&sq, &v(&[0.5, 0.5]), &v(&[3.0, -3.0]), 2.0).unwrap();
    assert_eq!(xp.as_slice(), &[-1.0, 1.0]);

    let seg: FeasibleSet = BoxSet::uniform(1, -1.0, 1.0).unwrap().into();
    let pg = projected_gradient(&seg, &v(&[1.0]), &v(&[-4.0]), 2.0).unwrap();
    assert_eq!(pg.x_plus.as_slice(), &[1.0]);
    assert_eq!(pg.norm(), 0.0);

    assert!(prox_step(&seg, &v(&[0.0]), &v(&[1.0]), 0.0).is_err());
    assert!(prox_step(&seg, &v(&[0.0, 1.0]), &v(&[1.0, 1.0]), 1.0).is_err());
}

#[test]
fn curvature_examples() {
    let x = v(&[0.0, 0.0]);
    let g0 = Vector::zeros(2);
    assert_eq!(local_curvature(1.0, 1.0, &g0, &x, &x).unwrap(), 0.0);
    // f = 1/2 x^T diag(1, 3) x, x = 0, y = e_2
    let y = v(&[0.0, 1.0]);
    assert_eq!(local_curvature(0.0, 1.5, &g0, &x, &y).unwrap(), 3.0);
    // affine f = 2 x_1 - x_2 + 7
    let a = v(&[2.0, -1.0]);
    let (p, q) = (v(&[1.0, 2.0]), v(&[-3.0, 0.5]));
    let f = |z: &Vector| 2.0 * z[0] - z[1] + 7.0;
    assert_eq!(local_curvature(f(&p), f(&q), &a, &p, &q).unwrap(), 0.0);
}

#[test]
fn product_diameter_adds_in_quadrature() {
    let p = ProductSet::concat(vec![
        BallSet::centered(4, 10.0).unwrap().into(),
        BoxSet::uniform(1, -2.0, 2.0).unwrap().into(),
    ])
    .unwrap();
    assert!((p.diameter() - (400.0f64 + 16.0).sqrt()).abs() < 1e-12);
}
