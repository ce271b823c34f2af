use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use satisfice::model::{builtin, solve_care};
use satisfice::poly::Polynomial;
use satisfice::sim::{check_safety, integrate, DisturbanceProfile, SafetyCheck, SimSettings, BARRIER_TOL};
use satisfice::srpi::{closed_loop_derivative, run_srpi, BetaMode, SrpiConfig};

fn riccati_value(p: &nalgebra::DMatrix<f64>) -> Polynomial {
    let n = p.nrows();
    let mut v = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            v = &v + &(&Polynomial::var(n, i) * &Polynomial::var(n, j)).scale(p[(i, j)]);
        }
    }
    v
}

#[test]
fn double_integrator_run_properties() {
    let (model, _) = builtin("lq_toy_2state").unwrap();
    let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = nalgebra::DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let p = solve_care(&a, &b, &nalgebra::DMatrix::identity(2, 2), &nalgebra::DMatrix::identity(1, 1)).unwrap();
    let oracle = riccati_value(&p);
    let cfg = SrpiConfig {
        beta_mode: BetaMode::Zero,
        k_delta: 1e6,
        stop_early: false,
        max_iter: 6,
        ..SrpiConfig::default()
    };
    let run = run_srpi(&model, None, &cfg).unwrap();
    assert!(run.failure.is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Value functions never rise from one iteration to the next beyond the
    // certified chain slack.
    let mut chained = 0;
    for w in run.records.windows(2) {
        assert!(w[1].objective <= w[0].objective * (1.0 + 1e-6));
        if let Some(c) = w[1].chain_slack {
            chained += 1;
            for _ in 0..10_000 {
                let x = model.state_region.sample(&mut rng);
                assert!(w[0].v.evaluate(&x) >= w[1].v.evaluate(&x) - c - 1e-6);
            }
        }
    }
    assert!(chained >= 4);
    // Upper bound on the optimal value, up to the slack the objective buys.
    for _ in 0..100 {
        let x = model.perf_region.sample(&mut rng);
        assert!(run.value.evaluate(&x) >= oracle.evaluate(&x) - 1e-4, "at {x:?}");
    }
    // Decrease along the improved policy, relaxed by the recorded slack.
    for r in run.records.iter().skip(1) {
        assert!(r.delta <= 1e-5);
        let dv = closed_loop_derivative(&model, &r.v, &r.next_policy.u);
        for _ in 0..1000 {
            let x = model.perf_region.sample(&mut rng);
            assert!(dv.evaluate(&x) <= -model.q.evaluate(&x) + r.delta + 1e-6, "record {} at {x:?}", r.index);
        }
    }
}

#[test]
fn suspension_barrier_holds_under_disturbances() {
    let (model, spec) = builtin("suspension").unwrap();
    let run = run_srpi(&model, spec.as_ref(), &SrpiConfig::default()).unwrap();
    let h = run.barrier.as_ref().unwrap().h.clone();
    let theta = spec.unwrap().initial_box.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut x0s = Vec::new();
    while x0s.len() < 10 {
        let x = theta.sample(&mut rng);
        if h.evaluate(&x) > 0.0 {
            x0s.push(x);
        }
    }
    for (k, x0) in x0s.iter().enumerate() {
        for p in [DisturbanceProfile::sinusoid(2.0), DisturbanceProfile::UniformRandom { seed: k as u64 }] {
            let t = integrate(&model, &run.policy.u, x0, &p, &SimSettings::default()).unwrap();
            let v = check_safety(&t, SafetyCheck::Barrier(&h), BARRIER_TOL);
            assert!(v.safe, "{x0:?} {}: {:?}", p.label(), v.first_violation);
        }
    }
}
