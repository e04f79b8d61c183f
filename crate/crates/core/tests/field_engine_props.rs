use proptest::prelude::*;
use sphereq::dist::{BatchLaw, Family, Law};
use sphereq::engine::*;
use sphereq::fields::*;
use sphereq::rng::stream_rng;
use std::f64::consts::PI;

fn point(n: usize) -> impl Strategy<Value = SpherePoint> {
    prop::collection::vec(0.0f64..PI, 1usize << n).prop_map(move |mut t| {
        let d = t.len();
        t[d - 1] *= 2.0;
        SpherePoint::from_theta(n, t).unwrap()
    })
}

fn class() -> impl Strategy<Value = (ClassSpec, f64, f64)> {
    (
        0usize..3,
        1.0f64..3.0,
        0usize..3,
        0.3f64..2.0,
        0.2f64..1.5,
        0.7f64..1.3,
    )
        .prop_map(|(b, m, p, mean, lambda, load)| {
            let batch = match b {
                0 => BatchLaw::unit(),
                1 => BatchLaw::new("geometric", m).unwrap(),
                _ => BatchLaw::new("poisson-shifted", m).unwrap(),
            };
            let packet = match p {
                0 => Law::exponential(mean),
                1 => Law::deterministic(mean),
                _ => Law::new(Family::LogNormal, mean, 0.7).unwrap(),
            };
            let spec = ClassSpec::new(Family::Exponential, batch, packet);
            let service = spec.m() * lambda * load;
            (spec, lambda, service)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn caps_are_nested(c in (1usize..=3).prop_flat_map(point), rho0 in 0.01f64..0.78, seed in any::<u64>()) {
        let caps = cap_ladder(&c, rho0, 4).unwrap();
        let mut rng = stream_rng(seed, 0, 0);
        for w in caps.windows(2) {
            prop_assert!(w[1].radius < w[0].radius);
            prop_assert!(w[1].log_area < w[0].log_area);
            for _ in 0..20 {
                let step = w[1].radius * 0.999;
                let p = geodesic_walk_step(&w[1].center, step, &mut rng);
                prop_assert!(w[1].contains(&p));
                prop_assert!(w[0].contains(&p));
            }
        }
    }

    #[test]
    fn walk_moves_exactly_one_step(p in (1usize..=3).prop_flat_map(point), step in 0.001f64..1.5, seed in any::<u64>()) {
        let q = geodesic_walk_step(&p, step, &mut stream_rng(seed, 0, 0));
        prop_assert!((geodesic_distance(&p, &q) - step).abs() < 1e-9);
    }

    #[test]
    fn affine_field_is_lipschitz(
        base in -1.0f64..2.0,
        slopes in prop::collection::vec(-1.0f64..1.0, 0..4),
        x in prop::collection::vec(0.0f64..PI, 4),
        y in prop::collection::vec(0.0f64..PI, 4),
    ) {
        let f = ClassField::AffineInAngles { base, slopes, alpha2: 1.0 };
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (lx, _) = f.eval_angles(&x);
        let (ly, _) = f.eval_angles(&y);
        prop_assert!(lx >= 0.0);
        prop_assert!((lx - ly).abs() <= f.lipschitz() * dist + 1e-12);
    }

    #[test]
    fn queue_accounting(classes in prop::collection::vec(class(), 1..4), seed in any::<u64>()) {
        let params: Vec<ClassParams> = classes
            .iter()
            .map(|(s, l, mu)| ClassParams::new(s.clone(), *l, 1.0, *mu).unwrap())
            .collect();
        let grid = 0.125;
        let opts = SimOptions { marks: None, keep_arrivals: true };
        let path = simulate_queues(&params, 40.0, grid, &mut stream_rng(seed, 0, 0), &opts).unwrap();
        let wl = workload(&path, &params);
        for j in 0..params.len() {
            let mut cum = vec![0.0];
            for u in &path.requirements[j] {
                let next = cum[cum.len() - 1] + u;
                cum.push(next);
            }
            for i in 0..path.times.len() {
                // flow conservation
                prop_assert_eq!(path.q[j][i] + path.d[j][i], path.q0[j] + path.a[j][i]);
                prop_assert_eq!(path.a[j][i], path.arrivals.count(j, path.times[i]));
                // departures are the service counting process at the busy time
                let (d, b) = (path.d[j][i] as usize, path.b[j][i]);
                prop_assert!(cum[d] <= b + 1e-9);
                prop_assert!(d + 1 >= cum.len() || cum[d + 1] > b - 1e-9);
                if i > 0 {
                    let db = path.b[j][i] - path.b[j][i - 1];
                    prop_assert!(db >= -1e-12 && db <= grid + 1e-9);
                }
            }
        }
        for i in 0..path.times.len() {
            let v: f64 = (0..params.len()).map(|j| path.q[j][i] as f64 / params[j].spec.mu()).sum();
            prop_assert!((wl.v[i] - v).abs() < 1e-12);
            prop_assert!((path.v[i] - v).abs() < 1e-12);
            prop_assert!(path.idle[i] >= -1e-9);
            if i > 0 {
                let di = path.idle[i] - path.idle[i - 1];
                prop_assert!(di >= -1e-9 && di <= grid + 1e-9);
                // the server idles only across intervals where the system empties
                if di > 1e-9 {
                    let emptied = path.v[i - 1] == 0.0 || path.v[i] == 0.0 || (0..params.len()).any(|j| path.d[j][i] > path.d[j][i - 1]);
                    prop_assert!(emptied);
                }
            }
        }
    }
}

#[test]
fn walk_is_isotropic() {
    let p = SpherePoint::from_theta(2, vec![0.7, 1.1, 0.4, 2.0]).unwrap();
    let x = p.embed();
    let step = 0.3;
    let n = 10_000;
    let mut rng = stream_rng(5, 0, 0);
    let mut mean = vec![0.0; x.len()];
    let mut sq = vec![0.0; x.len()];
    for _ in 0..n {
        let y = geodesic_walk_step(&p, step, &mut rng).embed();
        for k in 0..x.len() {
            let t = y[k] - step.cos() * x[k];
            mean[k] += t / n as f64;
            sq[k] += t * t / n as f64;
        }
    }
    for k in 0..x.len() {
        let sd = (sq[k] - mean[k] * mean[k]).max(0.0).sqrt();
        assert!(
            mean[k].abs() < 4.0 * sd / (n as f64).sqrt() + 1e-12,
            "coord {k}: {}",
            mean[k]
        );
    }
}

#[test]
fn ladder_drift_is_exact() {
    let spec = ClassSpec::new(
        Family::Exponential,
        BatchLaw::new("geometric", 2.0).unwrap(),
        Law::exponential(0.5),
    );
    let field = RateField::new(vec![ClassField::AffineInAngles {
        base: 0.6,
        slopes: vec![0.3, 0.2],
        alpha2: 1.0,
    }])
    .unwrap();
    let point = LimitPoint::new(vec![PI / 4.0; 32]).unwrap();
    let theta_n = default_theta_sequence(-1.0, 4);
    let ladder = build_regime_varying_n(
        &point,
        &field,
        std::slice::from_ref(&spec),
        -1.0,
        &theta_n,
        &[16.0, 64.0],
        &[1, 2, 3, 4],
        0.2,
    )
    .unwrap();
    assert_eq!(ladder.entries.len(), 8);
    for e in &ladder.entries {
        // sqrt(r) * sum_j (m_j lambda_j - Lambda_j) / mu_j against theta^n
        let mu = (spec.m() * e.lambda[0] - e.big_lambda[0]) / spec.mu();
        assert!((e.r.sqrt() * mu - e.theta_k).abs() < 1e-12);
        assert!((e.theta_k - -(1.0 - 0.5f64.powi(e.level as i32))).abs() < 1e-15);
    }
}
