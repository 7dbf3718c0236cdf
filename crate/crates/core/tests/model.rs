use mhng_core::model::{
    generate, gibbs_fit, posterior_gauss, posterior_theta, GibbsOptions, Hyperparams,
    SufficientStats,
};
use mhng_core::rng::{rng_from_seed, substream};
use mhng_core::stimulus::ColorPoint;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn large_alpha_gives_near_uniform_theta() {
    let hyper = Hyperparams {
        alpha: vec![1e4; 5],
        ..Hyperparams::default()
    };
    let uniform = [0.2; 5];
    let mut total = 0.0;
    let draws = 1000;
    for seed in 0..draws {
        let g = generate(&hyper, 1, seed).unwrap();
        for row in &g.agents[0].theta {
            total += kl(row, &uniform) / 5.0;
        }
    }
    let mean = total / draws as f64;
    assert!(mean < 0.01, "{mean}");
}

#[test]
fn gibbs_round_trip_recovers_peaked_theta() {
    let n = 500;
    let means = [
        [50.0, 40.0, 0.0],
        [50.0, -40.0, 0.0],
        [50.0, 0.0, 40.0],
        [50.0, 0.0, -40.0],
        [50.0, 0.0, 0.0],
    ];
    // sign l mostly produces category l
    let theta: Vec<Vec<f64>> = (0..5)
        .map(|l| (0..5).map(|k| if k == l { 0.96 } else { 0.01 }).collect())
        .collect();
    let mut rng = rng_from_seed(21);
    let mut signs = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let s = rng.random_range(0..5);
        let u: f64 = rng.random();
        let mut c = 0;
        let mut acc = theta[s][0];
        while u > acc && c < 4 {
            c += 1;
            acc += theta[s][c];
        }
        let z: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * 3.0);
        points.push(ColorPoint::new(
            means[c][0] + z[0],
            means[c][1] + z[1],
            means[c][2] + z[2],
        ));
        signs.push(s);
    }
    let fit = gibbs_fit(
        &points,
        None,
        &signs,
        &Hyperparams::default(),
        GibbsOptions::default(),
        4,
    )
    .unwrap();
    // categories are identified only up to relabeling
    let best = permutations(5)
        .into_iter()
        .map(|perm| {
            (0..5)
                .map(|l| {
                    let est: Vec<f64> = (0..5).map(|k| fit.state.theta[l][perm[k]]).collect();
                    total_variation(&est, &theta[l])
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 0.1, "worst row TV {best}");
}

fn stats_strategy() -> impl Strategy<Value = (Vec<ColorPoint>, Vec<usize>, Vec<usize>)> {
    prop::collection::vec(
        (
            (30.0f64..90.0, -60.0f64..60.0, -60.0f64..60.0),
            0usize..5,
            0usize..5,
        ),
        0..40,
    )
    .prop_map(|v| {
        let points = v
            .iter()
            .map(|((l, u, w), _, _)| ColorPoint::new(*l, *u, *w))
            .collect();
        let cats = v.iter().map(|(_, c, _)| *c).collect();
        let signs = v.iter().map(|(_, _, s)| *s).collect();
        (points, cats, signs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_draws_lie_on_the_simplex((points, cats, signs) in stats_strategy(), seed in any::<u64>()) {
        let hyper = Hyperparams::default();
        let stats = SufficientStats::from_data(&points, &cats, &signs, 5, 5).unwrap();
        let post = posterior_theta(&stats.sign_category_counts, &hyper.alpha, &mut substream(seed, 0)).unwrap();
        for row in post.sample.iter().chain(&post.mean) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|t| *t >= 0.0));
        }
    }

    #[test]
    fn precision_draws_are_spd((points, cats, signs) in stats_strategy(), seed in any::<u64>()) {
        let hyper = Hyperparams::default();
        let stats = SufficientStats::from_data(&points, &cats, &signs, 5, 5).unwrap();
        let post = posterior_gauss(&stats, &hyper, &mut substream(seed, 1)).unwrap();
        for g in post.samples.iter().chain(&post.means) {
            prop_assert!((g.precision - g.precision.transpose()).norm() <= 1e-9 * g.precision.norm());
            prop_assert!(g.precision.cholesky().is_some());
        }
    }

    #[test]
    fn generation_is_pure(seed in any::<u64>(), n in 0usize..30) {
        let hyper = Hyperparams::default();
        prop_assert_eq!(generate(&hyper, n, seed).unwrap(), generate(&hyper, n, seed).unwrap());
    }
}
