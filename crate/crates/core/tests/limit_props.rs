use proptest::prelude::*;
use sphereq::dist::{BatchLaw, Family, Law};
use sphereq::engine::ClassSpec;
use sphereq::limits::*;
use sphereq::rng::stream_rng;

fn brute(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| x[..=i].iter().fold(0.0f64, |m, v| m.max(-v)))
        .collect()
}

fn path() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..1000).prop_map(|inc| {
        let mut acc = 0.0;
        inc.into_iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect()
    })
}

fn spec() -> impl Strategy<Value = ClassSpec> {
    (0usize..3, 1.0f64..4.0, 0.2f64..3.0, 0usize..3).prop_map(|(b, m, mean, p)| {
        let batch = match b {
            0 => BatchLaw::unit(),
            1 => BatchLaw::new("geometric", m).unwrap(),
            _ => BatchLaw::new("poisson-shifted", m).unwrap(),
        };
        let packet = match p {
            0 => Law::exponential(mean),
            1 => Law::deterministic(mean),
            _ => Law::new(Family::Erlang, mean, 0.5).unwrap(),
        };
        ClassSpec::new(Family::Exponential, batch, packet)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reflection_matches_brute_force(x in path()) {
        let (v, i) = skorohod_reflect(&x);
        prop_assert_eq!(&i, &brute(&x));
        for k in 0..x.len() {
            prop_assert!(v[k] >= 0.0);
            prop_assert_eq!(v[k], x[k] + i[k]);
            if k > 0 {
                prop_assert!(i[k] >= i[k - 1]);
            }
        }
        let c = complementarity_check(&v, &i).unwrap();
        prop_assert_eq!(c.residual, 0.0);
        prop_assert!(c.pass);
    }

    #[test]
    fn reflection_is_minimal(x in path(), inc in prop::collection::vec(0.0f64..0.5, 1000), start in 0.0f64..1.0) {
        let (_, i) = skorohod_reflect(&x);
        // independent nondecreasing regulator, lifted until x + J >= 0
        let mut j: Vec<f64> = Vec::with_capacity(x.len());
        let mut acc = start;
        for d in &inc[..x.len()] {
            acc += d;
            j.push(acc);
        }
        let lift = x.iter().zip(&j).fold(0.0f64, |m, (a, c)| m.max(-(a + c)));
        let mut run = 0.0f64;
        for (c, a) in j.iter_mut().zip(&x) {
            *c += lift;
            while *a + *c < 0.0 {
                *c = c.next_up();
            }
            run = run.max(*c);
            *c = run;
        }
        prop_assert!(x.iter().zip(&j).all(|(a, c)| a + c >= 0.0));
        prop_assert!(i.iter().zip(&j).all(|(a, c)| a <= c));
    }

    #[test]
    fn scaling_identity_and_composition(x in prop::collection::vec(-5.0f64..5.0, 2..200), r1 in 1.0f64..8.0, r2 in 1.0f64..8.0) {
        let t: Vec<f64> = (0..x.len()).map(|k| k as f64 * 0.25).collect();
        let end = t[t.len() - 1];
        let (t1, x1) = scale_series(&t, &x, 1.0, end);
        prop_assert_eq!(&t1, &t);
        prop_assert_eq!(&x1, &x);
        let (ta, xa) = scale_series(&t, &x, r1, end);
        let (tb, xb) = scale_series(&ta, &xa, r2, end);
        let (tc, xc) = scale_series(&t, &x, r1 * r2, end);
        prop_assert_eq!(tb.len(), tc.len());
        for k in 0..tb.len() {
            prop_assert!((tb[k] - tc[k]).abs() <= 1e-12 * (1.0 + tc[k].abs()));
            prop_assert!((xb[k] - xc[k]).abs() <= 1e-12 * (1.0 + xc[k].abs()));
        }
    }

    #[test]
    fn variance_is_linear_and_homogeneous(
        a in spec(), b in spec(),
        la in 0.1f64..3.0, lb in 0.1f64..3.0,
        aa in 0.1f64..2.0, ab in 0.1f64..2.0,
        ba in 0.1f64..3.0, bb in 0.1f64..3.0,
        c in 0.1f64..10.0,
    ) {
        let one_a = aggregate_variance(std::slice::from_ref(&a), &[la], &[aa], &[ba]);
        let one_b = aggregate_variance(std::slice::from_ref(&b), &[lb], &[ab], &[bb]);
        let both = aggregate_variance(&[a.clone(), b], &[la, lb], &[aa, ab], &[ba, bb]);
        prop_assert!((both - one_a - one_b).abs() <= 1e-12 * both);
        let scaled = aggregate_variance(std::slice::from_ref(&a), &[c * la], &[aa], &[c * ba]);
        prop_assert!((scaled - c * one_a).abs() <= 1e-12 * scaled);
        // direct evaluation of the class term
        let (m, mu) = (a.m(), a.mu());
        let direct = (m * m * la * (a.zeta2() + aa) + ba * a.beta2()) / (mu * mu);
        prop_assert!((one_a - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn ks_examples() {
    let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
    assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    let b: Vec<f64> = (0..100).map(|i| 1000.0 + i as f64).collect();
    assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
    assert!((ks_critical_1pct(2000, 2000) - 0.051546).abs() < 1e-5);
}

#[test]
fn oracle_is_self_consistent() {
    let p = RbmParams::new(-0.5, 2.0, 0.0).unwrap();
    let trials = 40;
    let mut pass = 0;
    for t in 0..trials {
        let a = rbm_oracle(
            &p,
            1.0,
            2000,
            MIN_ORACLE_STEPS,
            &mut stream_rng(11, 2 * t, 0),
        )
        .unwrap();
        let b = rbm_oracle(
            &p,
            1.0,
            2000,
            MIN_ORACLE_STEPS,
            &mut stream_rng(11, 2 * t + 1, 0),
        )
        .unwrap();
        if compare_distributions(&a, &b).unwrap().ks_pass {
            pass += 1;
        }
    }
    assert!(pass * 100 >= 95 * trials, "{pass}/{trials}");
}

#[test]
fn oracle_mean_matches_reflected_normal() {
    // driftless reflection from 0 is |N(0, s^2 t)|, mean s sqrt(2 t / pi)
    let p = RbmParams::new(0.0, 4.0, 0.0).unwrap();
    let x = rbm_oracle(&p, 0.5, 40_000, MIN_ORACLE_STEPS, &mut stream_rng(12, 0, 0)).unwrap();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let exact = 2.0 * (2.0 * 0.5 / std::f64::consts::PI).sqrt();
    assert!((m / exact - 1.0).abs() < 0.02, "{m} vs {exact}");
}

#[test]
fn oracle_matches_exact_transition_law() {
    use statrs::distribution::{ContinuousCDF, Normal};
    // P(V(t) <= y) from 0 = Phi((y - th t)/(s sqrt t)) - exp(2 th y / s^2) Phi((-y - th t)/(s sqrt t))
    let (theta, s2, t) = (-1.0f64, 2.0f64, 1.0f64);
    let z = Normal::new(0.0, 1.0).unwrap();
    let sd = (s2 * t).sqrt();
    let cdf = |y: f64| {
        z.cdf((y - theta * t) / sd) - (2.0 * theta * y / s2).exp() * z.cdf((-y - theta * t) / sd)
    };
    // a grid minimum sits about 0.5826 s sqrt(dt) above the continuous one
    let shift = 0.5826 * s2.sqrt() * (t / MIN_ORACLE_STEPS as f64).sqrt();
    let p = RbmParams::new(theta, s2, 0.0).unwrap();
    let mut x = rbm_oracle(&p, t, 5000, MIN_ORACLE_STEPS, &mut stream_rng(13, 0, 0)).unwrap();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let ks = |f: &dyn Fn(f64) -> f64| {
        x.iter()
            .enumerate()
            .map(|(i, &y)| {
                let v = f(y);
                (v - i as f64 / n).abs().max((v - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    };
    let corrected = ks(&|y| cdf(y + shift));
    let raw = ks(&cdf);
    assert!(
        corrected < 1.63 / n.sqrt(),
        "corrected one-sample KS {corrected}"
    );
    assert!(raw < 0.04, "raw one-sample KS {raw}");
}
