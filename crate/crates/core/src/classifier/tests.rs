use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::mask::{BinaryMask, Grid, PixelFeatures, ProbMap, WeightMap};

fn random_frame(seed: u64, w: usize, h: usize, d: usize) -> (PixelFeatures, BinaryMask, WeightMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let feats = PixelFeatures::new(w, h, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap();
    let gt = BinaryMask::new(w, h, (0..n).map(|_| rng.random::<bool>()).collect()).unwrap();
    let wm = WeightMap::new(w, h, (0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
    (feats, gt, wm)
}

fn hand_params() -> (PixelFeatures, PixelClassifier) {
    let feats = PixelFeatures::new(1, 1, 2, vec![0.5, -1.0]).unwrap();
    let mut p = PixelClassifier::zeros(2, 2);
    p.shared_weights = vec![1.0, -1.0, 0.5, 2.0];
    p.shared_bias = vec![0.1, 0.2];
    p.head_f1 = Head { weights: vec![2.0, 3.0], bias: -0.5 };
    p.head_f2 = Head { weights: vec![-1.0, 1.0], bias: 0.25 };
    p.head_fg = Head { weights: vec![4.0, 0.0], bias: 0.0 };
    (feats, p)
}

#[test]
fn zero_params_give_one_half() {
    let (feats, _, _) = random_frame(1, 5, 3, 4);
    let out = classifier_forward(&feats, &PixelClassifier::zeros(4, 8)).unwrap();
    for map in [&out.fg_estimate, &out.f1, &out.f2] {
        assert!(map.values().iter().all(|&v| v == 0.5));
    }
}

#[test]
fn identical_heads_give_identical_maps() {
    let (feats, _, _) = random_frame(2, 6, 6, 6);
    let mut p = PixelClassifier::init(6, 16, 9);
    p.head_f2 = p.head_f1.clone();
    let out = classifier_forward(&feats, &p).unwrap();
    assert_eq!(out.f1, out.f2);
}

#[test]
fn forward_matches_hand_evaluation() {
    let (feats, p) = hand_params();
    // Hidden pre-activations: 0.1 + 0.5*1 - 1*0.5 = 0.1 and 0.2 - 0.5 - 2 = -2.3.
    let act: [f64; 2] = [0.1, 0.0];
    let f1 = 1.0 / (1.0 + (-(-0.5 + 2.0 * act[0])).exp());
    let f2 = 1.0 / (1.0 + (-(0.25 - act[0])).exp());
    let fg = 1.0 / (1.0 + (-(4.0 * act[0])).exp());
    let out = classifier_forward(&feats, &p).unwrap();
    assert!((out.f1.values()[0] - f1).abs() < 1e-12);
    assert!((out.f2.values()[0] - f2).abs() < 1e-12);
    assert!((out.fg_estimate.values()[0] - fg).abs() < 1e-12);

    let w = WeightMap::uniform(1, 1, 0.3).unwrap();
    let pred = predict_frame(&feats, &p, &w).unwrap();
    assert!((pred.values()[0] - (0.3 * f1 + 0.7 * f2)).abs() < 1e-12);
}

#[test]
fn forward_rejects_dim_mismatch() {
    let (feats, _, _) = random_frame(3, 2, 2, 3);
    assert!(matches!(
        classifier_forward(&feats, &PixelClassifier::zeros(4, 2)),
        Err(Error::FeatureDimMismatch { expected: 4, actual: 3 })
    ));
}

#[test]
fn fuse_examples() {
    let f1 = ProbMap::new(1, 1, vec![0.8]).unwrap();
    let f2 = ProbMap::new(1, 1, vec![0.2]).unwrap();
    let half = WeightMap::uniform(1, 1, 0.5).unwrap();
    assert_eq!(fuse_forward(&f1, &f2, &half).unwrap().values(), &[0.5]);
    assert_eq!(fuse_forward(&f1, &f2, &WeightMap::uniform(1, 1, 1.0).unwrap()).unwrap(), f1);
    assert_eq!(fuse_forward(&f1, &f2, &WeightMap::uniform(1, 1, 0.0).unwrap()).unwrap(), f2);
    assert!(fuse_forward(&f1, &f2, &WeightMap::uniform(2, 1, 0.5).unwrap()).is_err());
}

#[test]
fn predict_with_full_weight_is_f1_and_neutral_is_average() {
    let (feats, _, _) = random_frame(4, 7, 5, 6);
    let p = PixelClassifier::init(6, 16, 4);
    let heads = classifier_forward(&feats, &p).unwrap();
    let ones = WeightMap::uniform(7, 5, 1.0).unwrap();
    assert_eq!(predict_frame(&feats, &p, &ones).unwrap(), heads.f1);
    let neutral = WeightMap::uniform(7, 5, 0.5).unwrap();
    let avg = predict_frame(&feats, &p, &neutral).unwrap();
    for ((a, x), y) in avg.values().iter().zip(heads.f1.values()).zip(heads.f2.values()) {
        assert!((a - (x + y) / 2.0).abs() < 1e-15);
    }
}

#[test]
fn fuse_backward_endpoints() {
    let (_, _, w) = random_frame(5, 4, 4, 1);
    let f = ProbMap::uniform(4, 4, 0.4).unwrap();
    let zero = Grid::filled(4, 4, 0.0);
    let g = fuse_backward(&zero, &w, &f, &f).unwrap();
    for grid in [&g.g1, &g.g2, &g.g_w] {
        assert!(grid.as_slice().iter().all(|&v| v == 0.0));
    }
    let top = Grid::from_fn(4, 4, |x, y| x as f64 - y as f64 * 0.5);
    let g = fuse_backward(&top, &WeightMap::uniform(4, 4, 1.0).unwrap(), &f, &f).unwrap();
    assert_eq!(g.g1, top);
    assert!(g.g2.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn fuse_backward_matches_finite_differences() {
    // Scalar objective L = sum c_i * f_out_i^2, so g_top = 2 c f_out.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 64;
    let mk = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect() };
    let (v1, v2, vw) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
    let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let objective = |a: &[f64], b: &[f64], w: &[f64]| -> f64 {
        let out = fuse_forward(
            &ProbMap::new(8, 8, a.to_vec()).unwrap(),
            &ProbMap::new(8, 8, b.to_vec()).unwrap(),
            &WeightMap::new(8, 8, w.to_vec()).unwrap(),
        )
        .unwrap();
        out.values().iter().zip(&c).map(|(f, c)| c * f * f).sum()
    };
    let f1 = ProbMap::new(8, 8, v1.clone()).unwrap();
    let f2 = ProbMap::new(8, 8, v2.clone()).unwrap();
    let w = WeightMap::new(8, 8, vw.clone()).unwrap();
    let out = fuse_forward(&f1, &f2, &w).unwrap();
    let top = Grid::new(8, 8, out.values().iter().zip(&c).map(|(f, c)| 2.0 * c * f).collect()).unwrap();
    let g = fuse_backward(&top, &w, &f1, &f2).unwrap();

    let eps = 1e-6;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
    for i in 0..n {
        for (which, analytic) in [(0, g.g1.as_slice()[i]), (1, g.g2.as_slice()[i]), (2, g.g_w.as_slice()[i])] {
            let (mut a, mut b, mut ww) = (v1.clone(), v2.clone(), vw.clone());
            let target = match which {
                0 => &mut a,
                1 => &mut b,
                _ => &mut ww,
            };
            target[i] += eps;
            let up = objective(&a, &b, &ww);
            let target = match which {
                0 => &mut a,
                1 => &mut b,
                _ => &mut ww,
            };
            target[i] -= 2.0 * eps;
            let down = objective(&a, &b, &ww);
            let numeric = (up - down) / (2.0 * eps);
            assert!(rel(analytic, numeric) < 1e-6, "pixel {i} grad {which}: {analytic} vs {numeric}");
        }
    }
}

#[test]
fn loss_examples() {
    let gt = BinaryMask::from_fn(4, 4, |x, y| (x + y) % 2 == 0);
    let perfect = ProbMap::from_grid_clamped(gt.to_real());
    assert!(loss(&perfect, &perfect, &gt, 0.0).unwrap() < 1e-5);

    let half = ProbMap::uniform(4, 4, 0.5).unwrap();
    let l = loss(&half, &half, &gt, 0.0).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

    let (_, _, w) = random_frame(8, 4, 4, 1);
    let p: ProbMap = w.into();
    let single = loss(&p, &p, &gt, 0.0).unwrap();
    let doubled = loss(&p, &p, &gt, 1.0).unwrap();
    assert!((doubled - 2.0 * single).abs() < 1e-14);
}

#[test]
fn zero_steps_returns_init() {
    let (feats, gt, w) = random_frame(9, 3, 3, 6);
    let init = PixelClassifier::init(6, 4, 1);
    let cfg = TrainConfig { finetune_steps: 0, ..Default::default() };
    let frame = TrainFrame { features: &feats, gt: &gt, weight: &w };
    let out = train(&[frame], &cfg, Stage::Finetune, &init).unwrap();
    assert_eq!(out.params, init);
    assert_eq!(out.losses.len(), 1);
}

#[test]
fn single_pixel_descent_reduces_loss() {
    let feats = PixelFeatures::new(1, 1, 2, vec![0.3, 0.9]).unwrap();
    let gt = BinaryMask::full(1, 1);
    let w = WeightMap::uniform(1, 1, 0.7).unwrap();
    let cfg = TrainConfig { learning_rate: 0.1, finetune_steps: 100, hidden_units: 4, ..Default::default() };
    let init = PixelClassifier::init(2, 4, 5);
    let frame = TrainFrame { features: &feats, gt: &gt, weight: &w };
    let out = train(&[frame], &cfg, Stage::Finetune, &init).unwrap();
    assert_eq!(out.losses.len(), 101);
    assert!(out.losses[100] < out.losses[0]);
}

#[test]
fn training_is_deterministic() {
    let (feats, gt, w) = random_frame(10, 6, 6, 6);
    let cfg = TrainConfig { finetune_steps: 30, ..Default::default() };
    let run = || {
        let frame = TrainFrame { features: &feats, gt: &gt, weight: &w };
        train(&[frame], &cfg, Stage::Finetune, &PixelClassifier::init(6, 16, 42)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(encode_params(&a.params), encode_params(&b.params));
    assert_eq!(a.losses, b.losses);
}

#[test]
fn divergence_reports_the_step() {
    let (feats, gt, w) = random_frame(11, 4, 4, 6);
    let cfg = TrainConfig { learning_rate: 1e300, finetune_steps: 5, ..Default::default() };
    let frame = TrainFrame { features: &feats, gt: &gt, weight: &w };
    let err = train(&[frame], &cfg, Stage::Finetune, &PixelClassifier::init(6, 16, 1)).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { step } if step >= 1));
}

#[test]
fn train_rejects_bad_inputs() {
    let (feats, gt, w) = random_frame(12, 4, 4, 6);
    let init = PixelClassifier::init(6, 16, 1);
    assert!(train(&[], &TrainConfig::default(), Stage::Pretrain, &init).is_err());
    let bad_w = WeightMap::uniform(3, 4, 0.5).unwrap();
    let frame = TrainFrame { features: &feats, gt: &gt, weight: &bad_w };
    assert!(train(&[frame], &TrainConfig::default(), Stage::Pretrain, &init).is_err());
    let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
    let frame = TrainFrame { features: &feats, gt: &gt, weight: &w };
    assert!(train(&[frame], &cfg, Stage::Pretrain, &init).is_err());
}

#[test]
fn grad_check_random_instance() {
    let (feats, gt, w) = random_frame(13, 4, 4, 6);
    let p = PixelClassifier::init(6, 16, 13);
    let err = grad_check(&p, &feats, &gt, &w, 1.0, 1e-5).unwrap();
    assert!(err < 1e-4, "max relative error {err}");
    assert!(grad_check(&p, &feats, &gt, &w, 1.0, 0.0).is_err());
}

#[test]
fn seeded_check_is_reproducible() {
    let a = grad_check_seeded(7, 1e-5).unwrap();
    assert!(a.max_rel_error < 1e-4);
    assert_eq!(a, grad_check_seeded(7, 1e-5).unwrap());
    assert_ne!(a.analytic, grad_check_seeded(8, 1e-5).unwrap().analytic);
}

#[test]
fn saturated_pixels_contribute_nothing() {
    // Every head saturates at 1 and gt is all foreground, so the clamp makes
    // the loss locally constant.
    let (feats, _, w) = random_frame(14, 3, 3, 6);
    let gt = BinaryMask::full(3, 3);
    let mut p = PixelClassifier::init(6, 8, 14);
    p.head_f1.bias = 60.0;
    p.head_f2.bias = 60.0;
    let r = grad_check_report(&p, &feats, &gt, &w, 0.0, 1e-5).unwrap();
    assert!(r.analytic.iter().all(|&g| g == 0.0));
    assert!(r.numeric.iter().all(|&g| g == 0.0));
    assert_eq!(r.max_rel_error, 0.0);
}

#[test]
fn eps_sweep_is_v_shaped() {
    let (feats, gt, w) = random_frame(15, 4, 4, 6);
    let p = PixelClassifier::init(6, 16, 15);
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 1e-10, 1e-12]
        .iter()
        .map(|&e| grad_check_report(&p, &feats, &gt, &w, 1.0, e).unwrap().max_abs_error)
        .collect();
    let (imin, _) = errs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert!(imin > 0 && imin < errs.len() - 1, "errors {errs:?}");
    assert!(errs[0] > errs[imin] * 10.0 && errs[errs.len() - 1] > errs[imin] * 10.0);
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..=1.0, n)
}

proptest! {
    #[test]
    fn fused_output_is_between_heads(a in unit_vec(16), b in unit_vec(16), w in unit_vec(16)) {
        let f1 = ProbMap::new(4, 4, a).unwrap();
        let f2 = ProbMap::new(4, 4, b).unwrap();
        let out = fuse_forward(&f1, &f2, &WeightMap::new(4, 4, w).unwrap()).unwrap();
        for ((o, x), y) in out.values().iter().zip(f1.values()).zip(f2.values()) {
            prop_assert!(*o >= x.min(*y) - 1e-15 && *o <= x.max(*y) + 1e-15);
            prop_assert!((0.0..=1.0).contains(o));
        }
    }

    #[test]
    fn fusion_is_linear_in_heads(
        a in unit_vec(9), b in unit_vec(9), c in unit_vec(9), d in unit_vec(9), w in unit_vec(9),
        alpha in 0.0f64..=1.0,
    ) {
        let beta = 1.0 - alpha;
        let pm = |v: &[f64]| ProbMap::new(3, 3, v.to_vec()).unwrap();
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| alpha * p + beta * q).collect()
        };
        let w = WeightMap::new(3, 3, w).unwrap();
        let lhs = fuse_forward(&pm(&mix(&a, &b)), &pm(&mix(&c, &d)), &w).unwrap();
        let ac = fuse_forward(&pm(&a), &pm(&c), &w).unwrap();
        let bd = fuse_forward(&pm(&b), &pm(&d), &w).unwrap();
        for ((l, x), y) in lhs.values().iter().zip(ac.values()).zip(bd.values()) {
            prop_assert!((l - (alpha * x + beta * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn label_swap_symmetry(a in unit_vec(12), b in unit_vec(12), w in unit_vec(12)) {
        let f1 = ProbMap::new(3, 4, a).unwrap();
        let f2 = ProbMap::new(3, 4, b).unwrap();
        let w = WeightMap::new(3, 4, w).unwrap();
        let direct = fuse_forward(&f1, &f2, &w).unwrap();
        let swapped = fuse_forward(&f2, &f1, &w.complement()).unwrap();
        for (x, y) in direct.values().iter().zip(swapped.values()) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }
}
