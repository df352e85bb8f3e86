mod common;

use pgopt::oracle::StochOracle;
use pgopt::problems::linalg::SymMatrix;
use pgopt::problems::qp::BoxQP;
use pgopt::problems::svm::{gen_svm_dataset, svm_population_gradient, SmoothedSvm, SvmWeights};
use pgopt::problems::synthetic::NoisyQuadratic;
use pgopt::solvers::det::run_pg;
use pgopt::solvers::stoch::{run_spg, BatchSchedule, SpgConfig};
use pgopt::solvers::vr::{
    pairwise_curvature, run_acvrspg, run_acvrspg_observed, run_vrspg, run_vrspg_observed,
    spider_update, vrspg_sample_total, AcvrConfig, VrConfig, VrInnerBatch,
};
use pgopt::{BoxSet, DetOracle, RngStream, Vector, ZeroNoise};

fn noisy(n: usize, m: usize, seed: u64, offset_std: f64, scale_std: f64) -> NoisyQuadratic {
    let mut s = RngStream::new(seed, 0, "noise");
    NoisyQuadratic::new(common::convex_qp(n, seed), m, offset_std, scale_std, &mut s).unwrap()
}

fn start(set: &pgopt::FeasibleSet, seed: u64) -> Vector {
    set.sample_uniform(&mut RngStream::new(seed, 0, "x0")).unwrap()
}

fn vr(gamma: f64, epoch_len: usize, anchor_batch: usize, k: usize, inner: VrInnerBatch) -> VrConfig {
    VrConfig {
        gamma,
        epoch_len,
        anchor_batch,
        k,
        inner_batch: inner,
        eval: None,
    }
}

#[test]
fn single_step_epochs_reduce_to_spg() {
    let nq = noisy(5, 300, 1, 1.0, 0.3);
    let l = nq.sample_lipschitz();
    let x0 = start(nq.base().set(), 1);
    let stream = RngStream::new(1, 0, "run");
    let v = run_vrspg(&nq, nq.base().set(), &x0, &vr(2.0 * l, 1, 20, 50, VrInnerBatch::EpochAdaptive), &stream).unwrap();
    let spg = SpgConfig {
        gamma: 2.0 * l,
        upper_curvature: l,
        k: 50,
        batch: BatchSchedule::Constant(20),
        eval: None,
    };
    let s = run_spg(&nq, nq.base().set(), &x0, &spg, &stream).unwrap();
    assert_eq!(v.final_x, s.final_x);
    for (a, b) in v.records.iter().zip(&s.records) {
        assert_eq!(a.pg_norm, b.pg_norm);
        assert_eq!(a.samples_cum, b.samples_cum);
    }
}

#[test]
fn zero_noise_vrspg_is_pg_and_estimates_telescope() {
    let qp = common::qp(6, 2);
    let gamma = 1.5 * qp.spectral_norm();
    let x0 = start(qp.set(), 2);
    let oracle = ZeroNoise(qp.clone());
    let mut worst = 0.0f64;
    let tr = run_vrspg_observed(
        &oracle,
        qp.set(),
        &x0,
        &vr(gamma, 7, 3, 60, VrInnerBatch::Constant(2)),
        &RngStream::new(2, 0, "run"),
        |step| {
            let g = qp.gradient(step.point).unwrap();
            worst = worst.max(step.estimate.dist(&g).unwrap() / g.norm().max(1.0));
        },
    )
    .unwrap();
    assert!(worst <= 1e-12, "{worst}");
    let pg = run_pg(&qp, qp.set(), &x0, gamma, 60).unwrap();
    assert!(tr.final_x.dist(&pg.final_x).unwrap() <= 1e-10);
    for (a, b) in tr.records.iter().zip(&pg.records) {
        assert!((a.pg_norm - b.pg_norm).abs() <= 1e-9 * b.pg_norm.max(1.0));
    }
}

#[test]
fn vrspg_output_masses_for_three_steps() {
    let qp = common::qp(2, 3);
    let oracle = ZeroNoise(qp.clone());
    let cfg = vr(2.0 * qp.spectral_norm(), 2, 1, 3, VrInnerBatch::Constant(1));
    let x0 = start(qp.set(), 3);
    let mut counts = [0u64; 3];
    for r in 0..100_000u64 {
        let tr = run_vrspg(&oracle, qp.set(), &x0, &cfg, &RngStream::new(3, r, "out")).unwrap();
        counts[tr.output_index().unwrap()] += 1;
    }
    common::assert_fits(&counts, &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 0.001);
}

#[test]
fn acvr_on_isotropic_quadratic_settles_at_four_times_curvature() {
    let c = 2.5;
    let q = SymMatrix::diagonal(&[c, c]).unwrap();
    let qp = BoxQP::new(q, Vector::new(vec![1.0, -2.0]).unwrap(), BoxSet::uniform(2, -5.0, 5.0).unwrap()).unwrap();
    let oracle = ZeroNoise(qp.clone());
    let x0 = Vector::new(vec![4.0, 4.5]).unwrap();
    for l_bar0 in [0.1, 1.0, 7.0] {
        // short enough that displacements stay far above rounding level
        let cfg = AcvrConfig::new(l_bar0, 5, 2, 20);
        let tr = run_acvrspg(&oracle, qp.set(), &x0, &cfg, &RngStream::new(4, 0, "run")).unwrap();
        let g = tr.gammas();
        assert_eq!(g[0], 4.0 * l_bar0);
        let target = 4.0 * l_bar0.max(c);
        assert!((g[g.len() - 1] - target).abs() <= 1e-9 * target, "{} vs {target}", g[g.len() - 1]);
        assert!((tr.next_gamma - target).abs() <= 1e-9 * target);
    }
}

#[test]
fn acvr_stepsizes_are_monotone() {
    for seed in 0..4 {
        let nq = noisy(6, 500, 10 + seed, 2.0, 1.0);
        let l_bar0 = 0.05;
        let mut cfg = AcvrConfig::new(l_bar0, 6, 40, 90);
        cfg.curvature_batch = 3;
        let mut observed = Vec::new();
        let tr = run_acvrspg_observed(
            &nq,
            nq.base().set(),
            &start(nq.base().set(), seed),
            &cfg,
            &RngStream::new(seed, 0, "run"),
            |step| observed.push((step.index.is_anchor(), step.batch, step.gamma)),
        )
        .unwrap();
        let g = tr.gammas();
        assert_eq!(g[0], 4.0 * l_bar0);
        assert!(g.windows(2).all(|w| w[1] >= w[0]));
        assert!(tr.next_gamma <= 4.0 * nq.sample_lipschitz() * (1.0 + 1e-9));
        assert_eq!(observed.iter().map(|o| o.2).collect::<Vec<_>>(), g);
        for (anchor, b, _) in &observed {
            assert_eq!(*b, if *anchor { 40 } else { 6 });
        }
        // 15 anchors of 40, 75 inner batches of T = 6, 90 curvature batches of 3
        assert_eq!(tr.total_samples(), 15 * 40 + 75 * 6 + 90 * 3);
    }
}

#[test]
fn spider_update_cases() {
    let nq = noisy(4, 200, 5, 1.0, 1.5);
    let mut s = RngStream::new(5, 0, "spider");
    let g_prev = s.standard_normal(4);
    let a = start(nq.base().set(), 1);
    let b = start(nq.base().set(), 2);
    assert_eq!(spider_update(&nq, &g_prev, &a, &a, 10, &mut s).unwrap(), g_prev);

    let det = ZeroNoise(nq.base().clone());
    let g = spider_update(&det, &g_prev, &a, &b, 3, &mut s).unwrap();
    let want = g_prev
        .add(&nq.base().gradient(&b).unwrap().sub(&nq.base().gradient(&a).unwrap()).unwrap())
        .unwrap();
    assert!(g.dist(&want).unwrap() <= 1e-12 * want.norm().max(1.0));
    assert!(spider_update(&nq, &g_prev, &a, &b, 0, &mut s).is_err());
}

#[test]
fn spider_update_is_unbiased() {
    let nq = noisy(4, 200, 6, 1.0, 1.5);
    let mut s = RngStream::new(6, 0, "spider");
    let g_prev = Vector::new(vec![0.3, -0.1, 2.0, 0.0]).unwrap();
    let older = start(nq.base().set(), 1);
    let newer = start(nq.base().set(), 2);
    let truth = nq.base().gradient(&newer).unwrap().sub(&nq.base().gradient(&older).unwrap()).unwrap();
    let reps = 10_000;
    let mut sum = [0.0; 4];
    let mut sq = [0.0; 4];
    for _ in 0..reps {
        let d = spider_update(&nq, &g_prev, &older, &newer, 2, &mut s).unwrap().sub(&g_prev).unwrap();
        for i in 0..4 {
            sum[i] += d[i];
            sq[i] += d[i] * d[i];
        }
    }
    let n = reps as f64;
    for i in 0..4 {
        let mean = sum[i] / n;
        let se = ((sq[i] / n - mean * mean) / n).sqrt();
        assert!((mean - truth[i]).abs() <= 4.0 * se, "coord {i}: {mean} vs {}", truth[i]);
    }
}

#[test]
fn estimator_error_grows_within_epochs_and_resets_at_anchors() {
    let epoch_len = 8;
    let nq = noisy(4, 300, 7, 1.0, 3.0);
    let set = nq.base().set();
    let cfg = vr(3.0 * nq.sample_lipschitz(), epoch_len, 300, 24, VrInnerBatch::Constant(1));
    let x0 = Vector::new(vec![5.0, -5.0, 5.0, -5.0]).unwrap();
    let reps = 1000;
    let mut err = vec![0.0; cfg.k];
    for r in 0..reps {
        run_vrspg_observed(&nq, set, &x0, &cfg, &RngStream::new(7, r, "run"), |step| {
            let g = nq.base().gradient(step.point).unwrap();
            err[step.index.t - 1] += step.estimate.dist_sq(&g).unwrap() / reps as f64;
        })
        .unwrap();
    }
    for t in 1..=cfg.k {
        if (t - 1) % epoch_len == 0 {
            // exhaustive anchor: exact up to rounding
            assert!(err[t - 1] <= 1e-20, "anchor at {t}: {}", err[t - 1]);
        } else {
            assert!(err[t - 1] > err[t - 2], "step {t}: {err:?}");
        }
    }
}

#[test]
fn pairwise_curvature_cases() {
    let nq = noisy(5, 200, 8, 1.0, 1.0);
    let mut s = RngStream::new(8, 0, "pair");
    let bound = nq.sample_lipschitz();
    let a = start(nq.base().set(), 1);
    let smp = nq.draw(4, &mut s).unwrap();
    assert_eq!(pairwise_curvature(&nq, &a, &a, &smp).unwrap(), 0.0);
    for _ in 0..500 {
        let x = start(nq.base().set(), s.index(1 << 30) as u64);
        let y = start(nq.base().set(), s.index(1 << 30) as u64);
        let b = 1 + s.index(8);
        let smp = nq.draw(b, &mut s).unwrap();
        assert!(pairwise_curvature(&nq, &x, &y, &smp).unwrap() <= bound * (1.0 + 1e-12));
    }

    // deterministic quadratic: ||Q d|| / ||d||
    let det = ZeroNoise(nq.base().clone());
    let x = start(nq.base().set(), 5);
    let y = start(nq.base().set(), 6);
    let d = y.sub(&x).unwrap();
    let qd = Vector::new(nq.base().matrix().mul(d.as_slice())).unwrap();
    let got = pairwise_curvature(&det, &x, &y, &[(), ()]).unwrap();
    assert!((got - qd.norm() / d.norm()).abs() <= 1e-12 * got);
}

#[test]
fn exhaustive_anchors_are_exact() {
    let nq = noisy(5, 250, 9, 1.0, 0.5);
    let mut checked = 0;
    run_vrspg_observed(
        &nq,
        nq.base().set(),
        &start(nq.base().set(), 9),
        &vr(2.0 * nq.sample_lipschitz(), 5, 250, 20, VrInnerBatch::Constant(3)),
        &RngStream::new(9, 0, "run"),
        |step| {
            if step.index.is_anchor() {
                let g = nq.base().gradient(step.point).unwrap();
                assert!(step.estimate.dist(&g).unwrap() <= 1e-12 * g.norm().max(1.0));
                checked += 1;
            }
        },
    )
    .unwrap();
    assert_eq!(checked, 4);

    let mut s = RngStream::new(10, 0, "svm");
    let svm = SmoothedSvm::finite(
        gen_svm_dataset(400, 6, &mut s).unwrap(),
        SvmWeights::new(0.5, 0.5, 1.0).unwrap(),
    )
    .unwrap();
    let mut cfg = AcvrConfig::new(1.0, 4, 400, 12);
    cfg.inner_batch = 8;
    let mut checked = 0;
    run_acvrspg_observed(&svm, svm.set(), &Vector::zeros(7), &cfg, &RngStream::new(10, 0, "run"), |step| {
        if step.index.is_anchor() {
            let g = svm_population_gradient(step.point, &svm).unwrap();
            assert!(step.estimate.dist(&g).unwrap() <= 1e-12 * g.norm().max(1.0));
            checked += 1;
        }
    })
    .unwrap();
    assert_eq!(checked, 3);
}

#[test]
fn vrspg_sample_accounting() {
    let nq = noisy(3, 100, 11, 1.0, 0.5);
    let cfg = vr(2.0 * nq.sample_lipschitz(), 4, 50, 10, VrInnerBatch::EpochAdaptive);
    // anchors at t = 1, 5, 9; first epoch inner 16, 8, 6; later inner 26 each
    let expected = 3 * 50 + (16 + 8 + 6) + 3 * 26 + 26;
    assert_eq!(vrspg_sample_total(&cfg).unwrap(), expected);
    let tr = run_vrspg(&nq, nq.base().set(), &start(nq.base().set(), 1), &cfg, &RngStream::new(11, 0, "run")).unwrap();
    assert_eq!(tr.total_samples(), expected);
    assert!(run_vrspg(&nq, nq.base().set(), &Vector::zeros(3), &vr(1.0, 11, 5, 10, VrInnerBatch::EpochAdaptive), &RngStream::new(0, 0, "x")).is_err());
}

#[test]
fn vr_reruns_are_identical() {
    let nq = noisy(4, 120, 12, 1.0, 0.5);
    let x0 = start(nq.base().set(), 12);
    let cfg = AcvrConfig::new(0.2, 5, 30, 40);
    let a = run_acvrspg(&nq, nq.base().set(), &x0, &cfg, &RngStream::new(12, 0, "run")).unwrap();
    let b = run_acvrspg(&nq, nq.base().set(), &x0, &cfg, &RngStream::new(12, 0, "run")).unwrap();
    assert_eq!(a, b);
}
