mod common;

use ase::cli::checkpoint::{decode_checkpoint, encode_checkpoint};
use ase::diffusion::{eps_to_score, kl_vlb_term, linear_beta_schedule, posterior_q, score_to_eps, NoiseSchedule};
use ase::eval::metrics::{gaussian_frechet, sliced_wasserstein};
use ase::net::{Architecture, NetworkConfig, ScoreNetwork};
use ase::schedule::{predicted_acceleration, ExitSchedule};
use ase::train::{ema_update, plateau_check};
use ndarray::Array2;
use proptest::prelude::*;

fn arch_strategy() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        (1usize..6).prop_map(|blocks| Architecture::Stack { blocks }),
        (1usize..4).prop_map(|n| Architecture::USkip { encoder: n, decoder: n }),
    ]
}

fn cloud(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_schedule_invariants(steps in 1usize..1500, b0 in 1e-5f64..0.05, span in 0.0f64..0.3) {
        let ns = linear_beta_schedule(steps, b0, b0 + span).unwrap();
        prop_assert_eq!(ns.beta_tilde(1), 0.0);
        let mut prev = 1.0;
        for t in 1..=steps {
            let ab = ns.alpha_bar(t);
            prop_assert!(ab > 0.0 && ab <= 1.0);
            prop_assert!(ab < prev);
            prop_assert!(ns.beta_tilde(t) <= ns.beta(t));
            prop_assert!((ns.alpha(t) * prev - ab).abs() <= 4.0 * f64::EPSILON * ab);
            prev = ab;
        }
    }

    #[test]
    fn score_conversion_round_trips(eps in prop::collection::vec(-5.0f64..5.0, 1..6), t in 1usize..=1000) {
        let ns = NoiseSchedule::standard();
        let back = score_to_eps(&eps_to_score(&eps, t, &ns).unwrap(), t, &ns).unwrap();
        for (a, b) in eps.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn posterior_at_first_step_is_the_data(x0 in prop::collection::vec(-3.0f64..3.0, 1..5), e in -2.0f64..2.0) {
        let ns = NoiseSchedule::standard();
        let xt: Vec<f64> = x0.iter().map(|v| ns.alpha_bar(1).sqrt() * v + (1.0 - ns.alpha_bar(1)).sqrt() * e).collect();
        let (mu, var) = posterior_q(&xt, &x0, 1, &ns).unwrap();
        prop_assert_eq!(var, 0.0);
        for (m, x) in mu.iter().zip(&x0) {
            prop_assert!((m - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn kl_term_is_nonnegative(
        x0 in -2.0f64..2.0, xt in -3.0f64..3.0, eh in -3.0f64..3.0, v in 0.0f64..=1.0, t in 1usize..=1000,
    ) {
        let ns = NoiseSchedule::standard();
        prop_assert!(kl_vlb_term(&[x0], &[xt], t, &[eh], &[v], &ns).unwrap() >= 0.0);
    }

    #[test]
    fn each_interval_gets_equal_share(k in prop::sample::select(vec![1usize, 2, 4, 5, 8, 10, 20, 25])) {
        let arch = Architecture::Stack { blocks: k };
        let s = ExitSchedule::new("steps", arch, (1..=k).collect()).unwrap();
        let mut counts = vec![0usize; k];
        for t in 1..=1000 {
            counts[s.lookup_blocks(t, 1000) - 1] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c == 1000 / k));
    }

    #[test]
    fn predicted_acceleration_ignores_order(
        row in prop::collection::vec(1usize..=8, 10),
        perm in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let arch = Architecture::Stack { blocks: 8 };
        let a = ExitSchedule::new("a", arch, row.clone()).unwrap();
        let b = ExitSchedule::new("b", arch, perm.iter().map(|&i| row[i]).collect()).unwrap();
        prop_assert_eq!(predicted_acceleration(&a, arch).unwrap(), predicted_acceleration(&b, arch).unwrap());
    }

    #[test]
    fn ema_contracts_toward_student(alpha in 0.0f64..=1.0, seed in 0u64..1000) {
        let cfg = NetworkConfig::new(Architecture::Stack { blocks: 1 }, 4, 2);
        let student = ScoreNetwork::new(cfg.clone(), seed).unwrap();
        let teacher0 = ScoreNetwork::new(cfg, seed + 1).unwrap();
        let mut teacher = teacher0.params().clone();
        ema_update(&mut teacher, student.params(), alpha).unwrap();
        for ((t1, t0), s) in teacher.tensors().iter().zip(teacher0.params().tensors()).zip(student.params().tensors()) {
            for ((a, b), c) in t1.data.iter().zip(&t0.data).zip(&s.data) {
                let before = (b - c).abs();
                prop_assert!((a - c).abs() <= alpha * before + 1e-15 * before.max(1.0));
            }
        }
    }

    #[test]
    fn plateau_never_fires_while_improving(start in 1.0f64..10.0, rate in 0.01f64..0.2, len in 2usize..40) {
        let h: Vec<f64> = (0..len).map(|i| start * (1.0 - rate).powi(i as i32)).collect();
        prop_assert!(!plateau_check(&h, 3, 1e-3));
        prop_assert!(plateau_check(&vec![start; len.max(4)], 3, 1e-3));
    }

    #[test]
    fn sliced_wasserstein_axioms(a in cloud(24, 2), b in cloud(17, 2), dx in -5.0f64..5.0, dy in -5.0f64..5.0, seed in 0u64..100) {
        prop_assert_eq!(sliced_wasserstein(a.view(), a.view(), 16, seed).unwrap(), 0.0);
        let ab = sliced_wasserstein(a.view(), b.view(), 16, seed).unwrap();
        let ba = sliced_wasserstein(b.view(), a.view(), 16, seed).unwrap();
        prop_assert!(ab >= 0.0 && (ab - ba).abs() <= 1e-12 * ab.max(1.0));
        let shift = ndarray::arr1(&[dx, dy]);
        let moved = sliced_wasserstein((&a + &shift).view(), (&b + &shift).view(), 16, seed).unwrap();
        prop_assert!((moved - ab).abs() <= 1e-9 * ab.max(1.0));
    }

    #[test]
    fn frechet_reduces_to_mean_shift(a in cloud(30, 2), dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
        let b = &a + &ndarray::arr1(&[dx, dy]);
        let f = gaussian_frechet(a.view(), b.view()).unwrap();
        let g = gaussian_frechet(b.view(), a.view()).unwrap();
        prop_assert!((f.distance - (dx * dx + dy * dy)).abs() <= 1e-6);
        prop_assert!((f.distance - g.distance).abs() <= 1e-9);
        prop_assert!(gaussian_frechet(a.view(), a.view()).unwrap().distance.abs() <= 1e-8);
    }

    #[test]
    fn network_shapes_and_early_exit_identity(arch in arch_strategy(), lv in any::<bool>(), seed in 0u64..50, n in 1usize..5) {
        let mut cfg = NetworkConfig::new(arch, 8, 3);
        cfg.learned_variance = lv;
        let net = ScoreNetwork::new(cfg.clone(), seed).unwrap();
        prop_assert_eq!(net.param_count(), ScoreNetwork::new(cfg, seed + 1).unwrap().param_count());
        let x = Array2::from_shape_fn((n, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
        let t: Vec<usize> = (0..n).map(|i| 1 + 211 * i).collect();
        let full = net.forward_full(x.view(), &t).unwrap();
        prop_assert_eq!(full.eps.dim(), (n, 3));
        prop_assert_eq!(full.v.as_ref().map(|v| v.dim()), lv.then_some((n, 3)));
        prop_assert_eq!(net.forward_early_exit(x.view(), &t, net.max_depth()).unwrap(), full);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(arch in arch_strategy(), seed in 0u64..50) {
        let net = ScoreNetwork::new(NetworkConfig::new(arch, 6, 2), seed).unwrap();
        let a = encode_checkpoint(&net, Default::default(), "digest", None).unwrap();
        let ck = decode_checkpoint(&a).unwrap();
        let b = encode_checkpoint(&ck.network, ck.manifest.noise, "digest", None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn dropped_u_skip_decoders_train_only_their_merge() {
    let arch = Architecture::USkip { encoder: 2, decoder: 2 };
    let mut net = ScoreNetwork::new(NetworkConfig::new(arch, 6, 2), 3).unwrap();
    common::scramble(&mut net, 9);
    let x = Array2::from_shape_fn((2, 2), |(i, j)| i as f64 + 0.5 * j as f64);
    let (_, g) = net
        .param_gradients(x.view(), &[10, 600], &[1, 1], |o| {
            Ok((o.eps.sum(), ase::net::NetOutputGrad { eps: Array2::ones(o.eps.dim()), v: None }))
        })
        .unwrap();
    // depth 1 keeps the first decoder; the second runs merge only
    let dropped = net.block_prefix(2);
    let mut seen = 0;
    for t in g.tensors().iter().filter(|t| t.name.starts_with(&dropped)) {
        let nonzero = t.data.iter().any(|v| *v != 0.0);
        assert_eq!(nonzero, t.name.contains("merge"), "{}", t.name);
        seen += 1;
    }
    assert!(seen > 1);
}
