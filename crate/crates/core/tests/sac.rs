use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rldwa::nn::Activation;
use rldwa::sac::{ActMode, AlphaMode, Batch, GaussianPolicy, ReplayBuffer, SacAgent, SacConfig, Transition};

fn small(hidden: Vec<usize>, batch: usize) -> SacConfig {
    SacConfig {
        hidden,
        batch_size: batch,
        buffer_capacity: 4096,
        ..SacConfig::default()
    }
}

fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
    let mut s = || -> Vec<f64> { vec![rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)] };
    let state = s();
    let next_state = s();
    let action: f64 = rng.random_range(-0.99..0.99);
    Transition {
        reward: 1.0 - 2.0 * state[1].abs().sqrt() - (action - state[2]).abs(),
        state,
        action,
        next_state,
        done: false,
    }
}

#[test]
fn actions_stay_in_bounds_over_a_million_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut draws = 0usize;
    for p in 0..100u64 {
        let (lo, hi) = if p % 3 == 0 { (-0.3, 0.7) } else { (-1.0, 1.0) };
        let mut init = ChaCha8Rng::seed_from_u64(p);
        let mut policy = GaussianPolicy::new(3, &[8, 8], Activation::Relu, lo, hi, &mut init).unwrap();
        if p % 4 == 1 {
            // Push the pre-squash mean far into tanh saturation.
            let scaled: Vec<f64> = policy.backbone.flat_params().iter().map(|w| w * 50.0).collect();
            policy.backbone.set_flat_params(&scaled).unwrap();
        }
        for _ in 0..10_000 {
            let scale = if rng.random::<bool>() { 1.0 } else { 100.0 };
            let state: Vec<f64> = (0..3).map(|_| rng.random_range(-scale..scale)).collect();
            let mode = if rng.random::<bool>() { ActMode::Stochastic } else { ActMode::Deterministic };
            let eps = [0.0, 0.05, 0.5, 1.0][rng.random_range(0..4)];
            let a = policy.act(&state, mode, eps, &mut rng).unwrap();
            assert!(a >= lo && a <= hi, "policy {p}: {a} outside [{lo}, {hi}]");
            draws += 1;
        }
    }
    assert_eq!(draws, 1_000_000);
}

#[test]
fn critic_loss_falls_on_a_fixed_snapshot() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut buf = ReplayBuffer::new(512);
    for _ in 0..512 {
        buf.push(random_transition(&mut rng));
    }
    let batch = buf.sample(128, &mut rng).unwrap();
    let mut agent = SacAgent::new(3, small(vec![32, 32], 128), 3).unwrap();
    let losses: Vec<f64> = (0..100)
        .map(|_| {
            let r = agent.train_step(&batch).unwrap();
            0.5 * (r.critic1 + r.critic2)
        })
        .collect();
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(losses[99] < losses[0], "first {} last {}", losses[0], losses[99]);
}

#[test]
fn single_transition_overfits_to_its_reward() {
    let t = Transition {
        state: vec![0.4, -0.2, 0.1],
        action: 0.3,
        reward: 0.65,
        next_state: vec![0.3, 0.0, 0.3],
        done: true,
    };
    let batch = Batch::from_transitions(&[&t]).unwrap();
    let mut agent = SacAgent::new(3, small(vec![32, 32], 1), 8).unwrap();
    for _ in 0..5000 {
        agent.train_step(&batch).unwrap();
    }
    for q in [&agent.q1, &agent.q2] {
        let v = q.value(batch.states.view(), batch.actions.view()).unwrap()[0];
        assert!((v - t.reward).abs() < 1e-2, "Q = {v}");
    }
}

#[test]
fn higher_fixed_alpha_keeps_more_entropy() {
    let run = |alpha: f64| {
        let cfg = SacConfig {
            alpha_mode: AlphaMode::Fixed(alpha),
            ..small(vec![32, 32], 64)
        };
        let mut agent = SacAgent::new(3, cfg, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut buf = ReplayBuffer::new(1024);
        for _ in 0..1024 {
            buf.push(random_transition(&mut rng));
        }
        let mut tail = Vec::new();
        for i in 0..600 {
            let r = agent.train_step(&buf.sample(64, &mut rng).unwrap()).unwrap();
            assert!(r.entropy.is_finite());
            if i >= 500 {
                tail.push(r.entropy);
            }
        }
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let high = run(1.0);
    let low = run(0.001);
    assert!(high > low, "entropy with high alpha {high}, low alpha {low}");
}

#[test]
fn auto_alpha_moves_toward_target_entropy() {
    // A fresh policy has entropy well above -1, so alpha must shrink.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut buf = ReplayBuffer::new(256);
    for _ in 0..256 {
        buf.push(random_transition(&mut rng));
    }
    let mut agent = SacAgent::new(3, small(vec![16, 16], 32), 2).unwrap();
    let before = agent.alpha();
    for _ in 0..50 {
        agent.train_step(&buf.sample(32, &mut rng).unwrap()).unwrap();
    }
    assert!(agent.alpha() < before);
}
