//! Central finite-difference checks against an independent loop-based
//! forward pass.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rldwa::nn::{Activation, Mlp};
use rldwa::sac::{SacAgent, SacConfig};

pub const H: f64 = 1e-5;

/// Floor on the relative-error denominator. Below it the central difference
/// is dominated by rounding (about 1e-11 absolute here), so the comparison
/// becomes absolute.
pub const FLOOR: f64 = 1e-5;

#[derive(Debug, Default, Clone, Copy)]
pub struct CheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

impl CheckReport {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        let scale = analytic.abs().max(numeric.abs()).max(FLOOR);
        let err = (analytic - numeric).abs() / scale;
        self.max_rel = self.max_rel.max(err);
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.max_rel = self.max_rel.max(other.max_rel);
    }
}

/// Plain nested-loop forward pass. Returns outputs and the sign pattern of
/// every hidden pre-activation, so kink crossings can be detected.
pub fn naive_forward(net: &Mlp, input: &Array2<f64>) -> (Array2<f64>, Vec<bool>) {
    let layers = net.layers();
    let mut signs = Vec::new();
    let mut out = Array2::zeros((input.nrows(), net.output_dim()));
    for r in 0..input.nrows() {
        let mut x: Vec<f64> = input.row(r).to_vec();
        for (l, layer) in layers.iter().enumerate() {
            let last = l + 1 == layers.len();
            let mut y = vec![0.0; layer.outputs()];
            for o in 0..layer.outputs() {
                let mut z = layer.bias[o];
                for i in 0..layer.inputs() {
                    z += layer.weight[[o, i]] * x[i];
                }
                y[o] = if last {
                    z
                } else {
                    signs.push(z > 0.0);
                    match net.hidden_activation() {
                        Activation::Relu => z.max(0.0),
                        Activation::Tanh => z.tanh(),
                    }
                };
            }
            x = y;
        }
        for (c, v) in x.into_iter().enumerate() {
            out[[r, c]] = v;
        }
    }
    (out, signs)
}

fn pick_coords(rng: &mut ChaCha8Rng, count: usize, max_coords: usize) -> Vec<usize> {
    if count <= max_coords {
        (0..count).collect()
    } else {
        rand::seq::index::sample(rng, count, max_coords).into_vec()
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Checks `backward` for the loss `Σ out ⊙ G` with random inputs and `G`,
/// on at most `max_coords` parameter coordinates plus every input coordinate.
pub fn check_mlp(sizes: &[usize], act: Activation, seed: u64, max_coords: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(sizes, act, &mut rng).unwrap();
    // Non-zero biases so every term of the layer is exercised.
    let mut flat = net.flat_params();
    for p in flat.iter_mut() {
        *p += 0.05 * rng.sample::<f64, _>(StandardNormal);
    }
    net.set_flat_params(&flat).unwrap();
    let batch = 3;
    let x = normal_matrix(&mut rng, batch, sizes[0]);
    let g = normal_matrix(&mut rng, batch, *sizes.last().unwrap());
    let loss = |net: &Mlp, x: &Array2<f64>| {
        let (out, signs) = naive_forward(net, x);
        ((&out * &g).sum(), signs)
    };

    let (_, cache) = net.forward_batch(x.view()).unwrap();
    let (grads, dx) = net.backward(&cache, g.view()).unwrap();
    let analytic = grads.flat();
    let (_, base_signs) = loss(&net, &x);

    let mut report = CheckReport::default();
    let mut probe = net.clone();
    for c in pick_coords(&mut rng, flat.len(), max_coords) {
        let mut p = flat.clone();
        p[c] = flat[c] + H;
        probe.set_flat_params(&p).unwrap();
        let (lp, sp) = loss(&probe, &x);
        p[c] = flat[c] - H;
        probe.set_flat_params(&p).unwrap();
        let (lm, sm) = loss(&probe, &x);
        if act == Activation::Relu && (sp != base_signs || sm != base_signs) {
            report.skipped += 1;
            continue;
        }
        report.record(analytic[c], (lp - lm) / (2.0 * H));
    }
    for r in 0..batch {
        for i in 0..sizes[0] {
            let mut xp = x.clone();
            xp[[r, i]] += H;
            let (lp, sp) = loss(&net, &xp);
            xp[[r, i]] -= 2.0 * H;
            let (lm, sm) = loss(&net, &xp);
            if act == Activation::Relu && (sp != base_signs || sm != base_signs) {
                report.skipped += 1;
                continue;
            }
            report.record(dx[[r, i]], (lp - lm) / (2.0 * H));
        }
    }
    report
}

/// Checks the actor gradient of the SAC policy objective, with fixed
/// reparameterization noise, through both critics and the tanh squash.
pub fn check_actor_loss(hidden: &[usize], seed: u64, max_coords: usize) -> CheckReport {
    let cfg = SacConfig {
        hidden: hidden.to_vec(),
        ..SacConfig::default()
    };
    let agent0 = SacAgent::new(3, cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
    let batch = 4;
    let states = normal_matrix(&mut rng, batch, 3) * 0.5;
    let noise = Array1::from_iter((0..batch).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let alpha = 0.3;
    let (_, grads, _) = agent0.actor_loss_and_grad(states.view(), &noise, alpha).unwrap();
    let analytic = grads.flat();
    let flat = agent0.policy.backbone.flat_params();

    // Kinks: critic ReLU pattern, actor ReLU pattern, min(Q1, Q2) switch.
    let fingerprint = |agent: &SacAgent| {
        let (raw, mut signs) = naive_forward(&agent.policy.backbone, &states);
        let mut input = Array2::zeros((batch, 4));
        for r in 0..batch {
            for c in 0..3 {
                input[[r, c]] = states[[r, c]];
            }
            let ls = raw[[r, 1]].clamp(-20.0, 2.0);
            let a = (raw[[r, 0]] + ls.exp() * noise[r]).tanh();
            input[[r, 3]] = a;
            signs.push(raw[[r, 1]] > -20.0 && raw[[r, 1]] < 2.0);
        }
        let (q1, s1) = naive_forward(&agent.q1.net, &input);
        let (q2, s2) = naive_forward(&agent.q2.net, &input);
        signs.extend(s1);
        signs.extend(s2);
        signs.extend((0..batch).map(|r| q1[[r, 0]] <= q2[[r, 0]]));
        signs
    };
    let base = fingerprint(&agent0);

    let mut agent = SacAgent::new(3, agent0.config.clone(), seed).unwrap();
    let mut report = CheckReport::default();
    for c in pick_coords(&mut rng, flat.len(), max_coords) {
        let mut p = flat.clone();
        p[c] = flat[c] + H;
        agent.policy.backbone.set_flat_params(&p).unwrap();
        let (lp, _, _) = agent.actor_loss_and_grad(states.view(), &noise, alpha).unwrap();
        let fp = fingerprint(&agent);
        p[c] = flat[c] - H;
        agent.policy.backbone.set_flat_params(&p).unwrap();
        let (lm, _, _) = agent.actor_loss_and_grad(states.view(), &noise, alpha).unwrap();
        let fm = fingerprint(&agent);
        if fp != base || fm != base {
            report.skipped += 1;
            continue;
        }
        report.record(analytic[c], (lp - lm) / (2.0 * H));
    }
    report
}

/// The network shapes the agent uses, plus a small one, across `networks`
/// seeds. Returns the merged report.
pub fn fidelity_sweep(networks: u64, max_coords: usize) -> CheckReport {
    let mut total = CheckReport::default();
    for seed in 0..networks {
        let r = match seed % 5 {
            0 => check_mlp(&[3, 512, 256, 256, 2], Activation::Relu, seed, max_coords),
            1 => check_mlp(&[4, 512, 256, 256, 1], Activation::Relu, seed, max_coords),
            2 => check_mlp(&[4, 16, 8, 2], Activation::Relu, seed, max_coords),
            3 => check_mlp(&[4, 16, 8, 2], Activation::Tanh, seed, max_coords),
            _ => check_actor_loss(&[32, 16, 16], seed, max_coords),
        };
        total.merge(r);
    }
    total
}
