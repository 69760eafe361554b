use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavaccel::nn::{block_architecture, ForwardOptions, LayerSpec, ModelSpec, Tensor1D};
use uavaccel::prune::{channel_importance, flatten_dim, prune_channels, PruneConfig};

fn toy(seed: u64) -> ModelSpec {
    ModelSpec::random(&block_architecture(24, &[3, 4], 5, 2), seed).unwrap()
}

#[test]
fn importance_matches_abs_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w: Vec<f32> = (0..7 * 5 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = channel_importance(&w, 7).unwrap();
    for c in 0..7 {
        let mut e = 0.0f64;
        for j in 0..15 {
            e += f64::from(w[c * 15 + j]).abs();
        }
        assert!((s.scores[c] - e).abs() < 1e-12);
    }
}

#[test]
fn removing_a_dead_channel_is_exact() {
    let mut m = toy(9);
    let conv = m.weighted_layers()[1];
    // channel 2 of the last conv: zero filter and zero bias
    for v in &mut m.layers[conv].weights[2 * 9..3 * 9] {
        *v = 0.0;
    }
    m.layers[conv].bias[2] = 0.0;
    let (p, rec) = prune_channels(&m, &PruneConfig::channels(3)).unwrap();
    assert_eq!(rec.removed, vec![(2, 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = ForwardOptions::default();
    for _ in 0..50 {
        let x = Tensor1D::from_vec((0..24).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let a = m.forward(&x, &opts).unwrap().probs;
        let b = p.forward(&x, &opts).unwrap().probs;
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

proptest! {
    #[test]
    fn bookkeeping(seed in 0u64..1000, keep in 1usize..=4) {
        let m = toy(seed);
        let (p, rec) = prune_channels(&m, &PruneConfig::channels(keep)).unwrap();
        let flat = m.flatten_index().unwrap();
        let temporal = m.shapes().unwrap()[flat].1 / 4;
        prop_assert_eq!(flatten_dim(&p).unwrap(), keep * temporal);

        let macs = |m: &ModelSpec| m.layers[flat + 1].weights.len();
        prop_assert_eq!(macs(&p) * 4, macs(&m) * keep);

        let mut all: Vec<usize> = rec.removed.iter().map(|r| r.0).collect();
        prop_assert_eq!(all.len(), 4 - keep);
        let kept_scores = channel_importance(&p.layers[flat - 4].weights, keep).unwrap().scores;
        let orig = channel_importance(&m.layers[flat - 4].weights, 4).unwrap().scores;
        for s in &kept_scores {
            let c = orig.iter().position(|o| o == s).unwrap();
            all.push(c);
        }
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all, vec![0, 1, 2, 3]);

        let (q, again) = prune_channels(&p, &PruneConfig::channels(keep)).unwrap();
        prop_assert!(again.is_empty());
        prop_assert_eq!(q, p.clone());
        let ok = matches!(p.layers[flat - 4].spec, LayerSpec::Conv1D { out_ch, .. } if out_ch == keep);
        prop_assert!(ok);
    }
}
