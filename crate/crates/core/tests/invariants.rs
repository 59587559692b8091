use nalgebra::DMatrix;
use proptest::prelude::*;

use patchsel::{
    ess_residual, invasion_rate, mean_abundance, simulate_dimorphic, simulate_monomorphic,
    solve_ess, stationary_gamma, stochastic_growth_rate, EssKind, EssOptions, Landscape, SimConfig,
};

fn landscape(n: usize) -> impl Strategy<Value = Landscape> {
    (
        proptest::collection::vec(0.1f64..2.0, n),
        proptest::collection::vec(0.3f64..3.0, n),
        proptest::collection::vec(-0.8f64..0.8, n * n),
    )
        .prop_map(move |(mu, kappa, l)| {
            let l = DMatrix::from_vec(n, n, l);
            let sigma = &l * l.transpose() + DMatrix::identity(n, n) * 0.05;
            Landscape::from_parts(mu, kappa, sigma).unwrap()
        })
}

fn simplex(n: usize) -> impl Strategy<Value = patchsel::Strategy> {
    proptest::collection::vec(0.01f64..1.0, n)
        .prop_map(|w| patchsel::Strategy::from_weights(w).unwrap())
}

fn case() -> impl Strategy<Value = (Landscape, patchsel::Strategy, patchsel::Strategy)> {
    (2usize..5).prop_flat_map(|n| (landscape(n), simplex(n), simplex(n)))
}

fn diff(a: &patchsel::Strategy, b: &patchsel::Strategy) -> Vec<f64> {
    b.alpha()
        .iter()
        .zip(a.alpha())
        .map(|(x, y)| x - y)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn residual_is_orthogonal_to_strategy((l, a, _b) in case()) {
        prop_assume!(stochastic_growth_rate(&l, &a).unwrap() > 0.0);
        let res = ess_residual(&l, &a).unwrap();
        let inner: f64 = a.alpha().iter().zip(&res.values).map(|(x, r)| x * r).sum();
        prop_assert!(inner.abs() < 1e-12, "{inner}");
    }

    #[test]
    fn invasion_rate_is_exact_quadratic_in_invader((l, a, b) in case()) {
        prop_assume!(stochastic_growth_rate(&l, &a).unwrap() > 0.0);
        let res = ess_residual(&l, &a).unwrap();
        let d = diff(&a, &b);
        let linear: f64 = res.values.iter().zip(&d).map(|(r, x)| r * x).sum();
        let quadratic = l.sigma_form(&d, &d) / 2.0;
        let i_ab = invasion_rate(&l, &a, &b).unwrap();
        prop_assert!((i_ab - (linear - quadratic)).abs() < 1e-12, "{} vs {}", i_ab, linear - quadratic);
    }

    #[test]
    fn stationary_mean_matches_mean_abundance((l, a, _b) in case()) {
        prop_assume!(stochastic_growth_rate(&l, &a).unwrap() > 0.0);
        let g = stationary_gamma(&l, &a).unwrap();
        prop_assert!((g.k * g.theta - g.mean).abs() < 1e-12);
        prop_assert!((mean_abundance(&l, &a).unwrap() - g.mean).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solved_ess_is_uninvadable(l in (2usize..5).prop_flat_map(landscape)) {
        let opts = EssOptions { certify_samples: 200, ..EssOptions::default() };
        let r = solve_ess(&l, &opts).unwrap();
        prop_assume!(r.kind != EssKind::NotFound);
        prop_assert!(r.certificate.as_ref().unwrap().passed);
        let res = ess_residual(&l, &r.strategy).unwrap();
        prop_assert!(res.norm < 1e-9, "{}", res.norm);
        // Off the support no direction improves the invader at first order.
        for (i, v) in res.values.iter().enumerate() {
            if !res.support.contains(&i) {
                prop_assert!(*v <= 1e-9, "patch {} residual {}", i, v);
            }
        }
    }

    #[test]
    fn ess_follows_patch_relabelling(l in landscape(3)) {
        let perm = [2usize, 0, 1];
        let sigma = l.sigma();
        let permuted = Landscape::from_parts(
            perm.iter().map(|&i| l.mu()[i]).collect(),
            perm.iter().map(|&i| l.kappa()[i]).collect(),
            DMatrix::from_fn(3, 3, |i, j| sigma[(perm[i], perm[j])]),
        )
        .unwrap();
        let (r, rp) = (solve_ess(&l, &EssOptions::default()).unwrap(), solve_ess(&permuted, &EssOptions::default()).unwrap());
        prop_assume!(r.kind != EssKind::NotFound);
        prop_assert_eq!(r.kind, rp.kind);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((rp.strategy.alpha()[k] - r.strategy.alpha()[i]).abs() < 1e-7);
        }
    }
}

#[test]
fn same_seed_same_path_other_stream_differs() {
    let l = Landscape::symmetric(2, 1.0, 1.0, 1.0).unwrap();
    let a = patchsel::Strategy::uniform(2);
    let cfg = SimConfig::new(1e-2, 20.0).with_seed(3);
    let first = simulate_monomorphic(&l, &a, 1.0, &cfg).unwrap();
    assert_eq!(first, simulate_monomorphic(&l, &a, 1.0, &cfg).unwrap());
    assert_ne!(
        first.states,
        simulate_monomorphic(&l, &a, 1.0, &cfg.with_stream(1))
            .unwrap()
            .states
    );
    assert_ne!(
        first.states,
        simulate_monomorphic(&l, &a, 1.0, &cfg.clone().with_seed(4))
            .unwrap()
            .states
    );
}

#[test]
fn dimorphic_without_invader_is_monomorphic() {
    let l = Landscape::new(
        3,
        vec![1.0, 0.5, 1.5],
        vec![1.0, 2.0, 0.5],
        vec![
            vec![1.0, 0.2, 0.0],
            vec![0.2, 0.5, -0.1],
            vec![0.0, -0.1, 0.8],
        ],
    )
    .unwrap();
    let a = patchsel::Strategy::new(vec![0.2, 0.3, 0.5]).unwrap();
    let b = patchsel::Strategy::vertex(3, 1).unwrap();
    let cfg = SimConfig::new(1e-3, 10.0).with_seed(8);
    let mono = simulate_monomorphic(&l, &a, 0.7, &cfg).unwrap();
    let di = simulate_dimorphic(&l, &a, &b, 0.7, 0.0, &cfg).unwrap();
    assert_eq!(mono.component(0), di.component(0));
    assert!(di.component(1).iter().all(|&y| y == 0.0));
}

#[test]
fn landscape_json_round_trip() {
    let l = Landscape::uncorrelated(vec![1.0, -0.4], vec![1.0, 2.0], vec![1.0, 0.25]).unwrap();
    let back = Landscape::from_json(&l.to_json()).unwrap();
    assert_eq!(l, back);
}
