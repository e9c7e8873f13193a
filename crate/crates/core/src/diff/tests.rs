//! Op-by-op gradient checks against the central finite-difference oracle,
//! plus the straight-through and Gumbel-Softmax contracts.

use rand::Rng as _;

use super::fdcheck::{check_against_fd, rel_err};
use super::graph::{Graph, NodeId, Reduction};
use super::ndarray::{NdArray, Real};
use super::params::{ParamId, ParamSet};
use crate::util::{rng_from_seed, Rng};

const EPS: Real = 1e-5;
const TOL: Real = 1e-4;

fn rand_array(shape: &[usize], rng: &mut Rng) -> NdArray {
    let numel: usize = shape.iter().product();
    NdArray::new(
        shape.to_vec(),
        (0..numel).map(|_| rng.random::<Real>() * 2.0 - 1.0).collect(),
    )
}

/// Build params from shapes, run `build` to a loss node, check grads.
fn gradcheck(shapes: &[&[usize]], seed: u64, build: impl Fn(&mut Graph, &[NodeId]) -> NodeId) {
    let mut rng = rng_from_seed(seed);
    let mut ps = ParamSet::new();
    let ids: Vec<ParamId> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| ps.add(&format!("p{i}"), rand_array(s, &mut rng)))
        .collect();

    ps.zero_grads();
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = ids.iter().map(|&id| g.param(&ps, id)).collect();
    let loss = build(&mut g, &nodes);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);

    let mut check_rng = rng_from_seed(seed ^ 0xABCD);
    let report = check_against_fd(&mut ps, EPS, 6, &mut check_rng, &mut |ps| {
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = ids.iter().map(|&id| g.param(ps, id)).collect();
        let loss = build(&mut g, &nodes);
        g.value(loss).scalar_value()
    });
    report.assert_within(TOL);
}

#[test]
fn grads_sum_of_param_are_ones() {
    let mut ps = ParamSet::new();
    let p = ps.add("p", NdArray::vector(vec![3.0, -1.0, 2.0]));
    let mut g = Graph::new();
    let x = g.param(&ps, p);
    let loss = g.sum(x);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);
    assert_eq!(ps.get(p).grad.data(), &[1.0, 1.0, 1.0]);
}

#[test]
fn grads_squared_norm_are_2x() {
    let mut ps = ParamSet::new();
    let p = ps.add("p", NdArray::vector(vec![3.0, -1.0, 2.0]));
    let mut g = Graph::new();
    let x = g.param(&ps, p);
    let sq = g.mul(x, x);
    let loss = g.sum(sq);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);
    assert_eq!(ps.get(p).grad.data(), &[6.0, -2.0, 4.0]);
}

#[test]
fn unreachable_param_has_zero_gradient() {
    let mut ps = ParamSet::new();
    let a = ps.add("a", NdArray::vector(vec![1.0]));
    let b = ps.add("b", NdArray::vector(vec![5.0]));
    let mut g = Graph::new();
    let xa = g.param(&ps, a);
    let _xb = g.param(&ps, b);
    let loss = g.sum(xa);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);
    assert_eq!(ps.get(b).grad.data(), &[0.0]);
}

#[test]
#[should_panic(expected = "loss must be scalar")]
fn non_scalar_loss_rejected() {
    let mut g = Graph::new();
    let x = g.input(NdArray::vector(vec![1.0, 2.0]));
    g.backward(x);
}

#[test]
fn fd_elementwise_chain() {
    gradcheck(&[&[3, 4], &[3, 4]], 1, |g, p| {
        let s = g.add(p[0], p[1]);
        let m = g.mul(s, p[0]);
        let d = g.sub(m, p[1]);
        let sc = g.scale(d, 0.7);
        g.sum(sc)
    });
}

#[test]
fn fd_matmul_and_transpose() {
    gradcheck(&[&[3, 4], &[4, 2]], 2, |g, p| {
        let y = g.matmul(p[0], p[1]);
        let t = g.transpose(y);
        let sq = g.mul(t, t);
        g.mean(sq)
    });
}

#[test]
fn fd_matmul_tb() {
    gradcheck(&[&[3, 5], &[2, 5]], 3, |g, p| {
        let y = g.matmul_tb(p[0], p[1]);
        let s = g.sigmoid(y);
        g.sum(s)
    });
}

#[test]
fn fd_linear_bias_2d_and_1d() {
    gradcheck(&[&[4, 3], &[5, 3], &[5]], 4, |g, p| {
        let y = g.linear(p[0], p[1], Some(p[2]));
        let a = g.tanh(y);
        g.sum(a)
    });
    gradcheck(&[&[3], &[5, 3], &[5]], 5, |g, p| {
        let y = g.linear(p[0], p[1], Some(p[2]));
        let a = g.leaky_relu(y, 0.2);
        g.sum(a)
    });
}

#[test]
fn fd_conv1d_strided_padded() {
    // length 8, kernel 4, stride 2, padding 1 -> floor((8+2-4)/2)+1 = 4
    gradcheck(&[&[3, 8], &[2, 3, 4], &[2]], 6, |g, p| {
        let y = g.conv1d(p[0], p[1], p[2], 2, 1);
        assert_eq!(g.value(y).shape(), [2, 4]);
        let a = g.leaky_relu(y, 0.2);
        let sq = g.mul(a, a);
        g.sum(sq)
    });
    // kernel 3, stride 1, padding 1 keeps length
    gradcheck(&[&[2, 6], &[2, 2, 3], &[2]], 7, |g, p| {
        let y = g.conv1d(p[0], p[1], p[2], 1, 1);
        assert_eq!(g.value(y).shape(), [2, 6]);
        g.sum(y)
    });
}

#[test]
fn conv1d_identity_kernel_passes_signal() {
    let mut g = Graph::new();
    let x = g.input(NdArray::matrix(1, 5, vec![1.0, -2.0, 3.0, 0.5, 4.0]));
    let w = g.input(NdArray::new(vec![1, 1, 1], vec![1.0]));
    let b = g.input(NdArray::vector(vec![0.0]));
    let y = g.conv1d(x, w, b, 1, 0);
    assert_eq!(g.value(y).data(), &[1.0, -2.0, 3.0, 0.5, 4.0]);
}

#[test]
fn conv1d_sliding_window_oracle() {
    // independent windowed dot-product oracle on random instances
    let mut rng = rng_from_seed(41);
    for _ in 0..20 {
        let ci = rng.random_range(1..4usize);
        let co = rng.random_range(1..4usize);
        let t = rng.random_range(4..12usize);
        let k = rng.random_range(1..=4usize.min(t));
        let stride = rng.random_range(1..3usize);
        let padding = rng.random_range(0..k);
        let x = rand_array(&[ci, t], &mut rng);
        let w = rand_array(&[co, ci, k], &mut rng);
        let b = rand_array(&[co], &mut rng);
        let t_out = (t + 2 * padding - k) / stride + 1;

        let mut g = Graph::new();
        let xn = g.input(x.clone());
        let wn = g.input(w.clone());
        let bn = g.input(b.clone());
        let y = g.conv1d(xn, wn, bn, stride, padding);
        assert_eq!(g.value(y).shape(), [co, t_out]);

        for o in 0..co {
            for j in 0..t_out {
                let mut want = b[o];
                for c in 0..ci {
                    for q in 0..k {
                        let pos = (j * stride + q) as isize - padding as isize;
                        if pos >= 0 && (pos as usize) < t {
                            want += w[(o * ci + c) * k + q] * x[c * t + pos as usize];
                        }
                    }
                }
                let got = g.value(y).at2(o, j);
                assert!((got - want).abs() < 1e-12, "({o},{j}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn fd_upsample_and_slicing() {
    gradcheck(&[&[2, 4]], 8, |g, p| {
        let u = g.upsample2(p[0]);
        assert_eq!(g.value(u).shape(), [2, 8]);
        let c = g.cols(u, 1, 5);
        let sq = g.mul(c, c);
        g.mean(sq)
    });
    gradcheck(&[&[3, 4]], 9, |g, p| {
        let r1 = g.row(p[0], 0);
        let r2 = g.row(p[0], 2);
        let cat = g.concat1(&[r1, r2]);
        let st = g.stack_rows(&[r2, r1]);
        let sum1 = g.sum(cat);
        let sq = g.mul(st, st);
        let sum2 = g.sum(sq);
        g.add(sum1, sum2)
    });
}

#[test]
fn fd_concat_cols() {
    gradcheck(&[&[3, 2], &[3, 4]], 10, |g, p| {
        let c = g.concat_cols(&[p[0], p[1]]);
        assert_eq!(g.value(c).shape(), [3, 6]);
        let s = g.sigmoid(c);
        g.sum(s)
    });
}

#[test]
fn fd_embedding() {
    gradcheck(&[&[6, 3]], 11, |g, p| {
        let e = g.embedding(p[0], &[1, 4, 1, 0]);
        let sq = g.mul(e, e);
        g.sum(sq)
    });
}

#[test]
fn fd_activations_and_softmax() {
    gradcheck(&[&[4, 5]], 12, |g, p| {
        let a = g.leaky_relu(p[0], 0.2);
        let b = g.sigmoid(a);
        let c = g.tanh(b);
        let s = g.softmax(c);
        let sq = g.mul(s, s);
        g.sum(sq)
    });
}

#[test]
fn leaky_relu_slope_value() {
    let mut g = Graph::new();
    let x = g.input(NdArray::vector(vec![-1.0, 2.0]));
    let y = g.leaky_relu(x, 0.2);
    assert_eq!(g.value(y).data(), &[-0.2, 2.0]);
}

#[test]
fn fd_layer_norm() {
    gradcheck(&[&[3, 6], &[6], &[6]], 13, |g, p| {
        let y = g.layer_norm(p[0], p[1], p[2]);
        let sq = g.mul(y, y);
        g.mean(sq)
    });
}

#[test]
fn fd_losses() {
    gradcheck(&[&[3, 4], &[3, 4]], 14, |g, p| g.l1_loss(p[0], p[1]));
    gradcheck(&[&[3, 4], &[3, 4]], 15, |g, p| g.mse_loss(p[0], p[1]));
    gradcheck(&[&[4, 6]], 16, |g, p| {
        g.cross_entropy(p[0], &[2, -1, 0, 5], Reduction::Mean)
    });
    gradcheck(&[&[4, 6]], 17, |g, p| {
        let sc = g.scale(p[0], 3.0);
        g.cross_entropy(sc, &[1, 3, -1, 2], Reduction::Sum)
    });
}

#[test]
fn fd_gru_cell() {
    use crate::nn::GruCell;
    let mut rng = rng_from_seed(18);
    let mut ps = ParamSet::new();
    let cell = GruCell::new(&mut ps, "gru", 4, 5, &mut rng);
    let x_val = rand_array(&[4], &mut rng);
    let x2_val = rand_array(&[4], &mut rng);
    let h_val = rand_array(&[5], &mut rng);

    let build = |g: &mut Graph, ps: &ParamSet| -> NodeId {
        let bound = cell.bind(g, ps, false);
        let x = g.input(x_val.clone());
        let x2 = g.input(x2_val.clone());
        let h = g.input(h_val.clone());
        let h1 = bound.step(g, x, h);
        let h2 = bound.step(g, x2, h1); // two steps exercise the recurrence
        let sq = g.mul(h2, h2);
        g.sum(sq)
    };

    ps.zero_grads();
    let mut g = Graph::new();
    let loss = build(&mut g, &ps);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);

    let mut check_rng = rng_from_seed(99);
    let report = check_against_fd(&mut ps, EPS, 5, &mut check_rng, &mut |ps| {
        let mut g = Graph::new();
        let loss = build(&mut g, ps);
        g.value(loss).scalar_value()
    });
    report.assert_within(TOL);
}

#[test]
fn fd_composite_model_loss() {
    // conv encoder -> layer norm -> linear head -> cross entropy: a
    // miniature of the real stacks.
    gradcheck(&[&[2, 8], &[3, 2, 4], &[3], &[3], &[3], &[5, 3], &[5]], 19, |g, p| {
        let h = g.conv1d(p[0], p[1], p[2], 2, 1);
        let a = g.leaky_relu(h, 0.2);
        let t = g.transpose(a);
        let n = g.layer_norm(t, p[3], p[4]);
        let logits = g.linear(n, p[5], Some(p[6]));
        g.cross_entropy(logits, &[1, 4, 0, 2], Reduction::Mean)
    });
}

// ── straight-through ────────────────────────────────────────────────

#[test]
fn straight_through_forward_takes_quantized_value() {
    let mut g = Graph::new();
    let c = g.input(NdArray::vector(vec![1.0, 2.0]));
    let q = g.input(NdArray::vector(vec![3.0, 4.0]));
    let y = g.straight_through(c, q);
    assert_eq!(g.value(y).data(), &[3.0, 4.0]);
}

#[test]
fn straight_through_copies_gradient_bit_identical() {
    let mut ps = ParamSet::new();
    let c = ps.add("c", NdArray::vector(vec![0.3, -0.8, 1.7]));
    let q = ps.add("q", NdArray::vector(vec![9.0, 9.0, 9.0]));
    let weights = [0.137, -2.25, 0.5]; // arbitrary upstream scaling

    let mut g = Graph::new();
    let cn = g.param(&ps, c);
    let qn = g.param(&ps, q);
    let st = g.straight_through(cn, qn);
    let w = g.input(NdArray::vector(weights.to_vec()));
    let prod = g.mul(st, w);
    let loss = g.sum(prod);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);

    // upstream gradient (the weights) lands on the continuous branch
    // bit-for-bit; the quantized branch gets exactly zero
    assert_eq!(ps.get(c).grad.data(), &weights);
    assert_eq!(ps.get(q).grad.data(), &[0.0, 0.0, 0.0]);
}

#[test]
#[should_panic(expected = "straight_through: shape")]
fn straight_through_shape_mismatch_rejected() {
    let mut g = Graph::new();
    let c = g.input(NdArray::vector(vec![1.0, 2.0]));
    let q = g.input(NdArray::vector(vec![3.0]));
    g.straight_through(c, q);
}

// ── gumbel softmax ──────────────────────────────────────────────────

#[test]
fn gumbel_output_on_simplex() {
    let mut rng = rng_from_seed(21);
    for tau in [0.05, 0.3, 1.0, 4.0] {
        for _ in 0..50 {
            let mut g = Graph::new();
            let logits = g.input(rand_array(&[7], &mut rng));
            let y = g.gumbel_softmax(logits, tau, &mut rng);
            let v = g.value(y);
            let sum: Real = v.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum} at tau {tau}");
            assert!(v.data().iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn gumbel_tau1_argmax_frequencies_match_categorical() {
    // uniform logits: every class should win the argmax equally often
    let k = 5;
    let n = 100_000;
    let mut rng = rng_from_seed(22);
    let mut counts = vec![0usize; k];
    for _ in 0..n {
        let mut g = Graph::new();
        let logits = g.input(NdArray::vector(vec![0.0; k]));
        let y = g.gumbel_softmax(logits, 1.0, &mut rng);
        let v = g.value(y);
        let argmax = v
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        counts[argmax] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let freq = c as Real / n as Real;
        let expect = 1.0 / k as Real;
        assert!(
            (freq - expect).abs() < 0.02,
            "class {i}: frequency {freq} vs {expect}"
        );
    }
}

#[test]
fn gumbel_low_tau_concentrates_on_dominant_logit() {
    // logits [10, 0, 0], tau=0.1: one-hot at index 0 with probability >= 0.99
    let n = 2000;
    let mut rng = rng_from_seed(23);
    let mut hits = 0usize;
    for _ in 0..n {
        let mut g = Graph::new();
        let logits = g.input(NdArray::vector(vec![10.0, 0.0, 0.0]));
        let y = g.gumbel_softmax(logits, 0.1, &mut rng);
        let v = g.value(y);
        let near_onehot = (v[0] - 1.0).abs() < 1e-3 && v[1].abs() < 1e-3 && v[2].abs() < 1e-3;
        if near_onehot {
            hits += 1;
        }
    }
    let rate = hits as Real / n as Real;
    assert!(rate >= 0.99, "one-hot rate {rate}");
}

#[test]
#[should_panic(expected = "temperature must be positive")]
fn gumbel_non_positive_temperature_rejected() {
    let mut rng = rng_from_seed(24);
    let mut g = Graph::new();
    let logits = g.input(NdArray::vector(vec![0.0, 0.0]));
    g.gumbel_softmax(logits, 0.0, &mut rng);
}

#[test]
fn gumbel_gradient_matches_fd_with_common_noise() {
    // same seed across perturbations = common random numbers
    let mut rng = rng_from_seed(25);
    let mut ps = ParamSet::new();
    let p = ps.add("logits", rand_array(&[6], &mut rng));
    let target = rand_array(&[6], &mut rng);

    let noise_seed = 77;
    let run = |ps: &ParamSet, g: &mut Graph| -> NodeId {
        let mut noise_rng = rng_from_seed(noise_seed);
        let logits = g.param(ps, ParamId(0));
        let y = g.gumbel_softmax(logits, 0.7, &mut noise_rng);
        let t = g.input(target.clone());
        g.mse_loss(y, t)
    };

    ps.zero_grads();
    let mut g = Graph::new();
    let loss = run(&ps, &mut g);
    g.backward(loss);
    g.accumulate_param_grads(&mut ps);
    let _ = p;

    let mut check_rng = rng_from_seed(26);
    let report = check_against_fd(&mut ps, EPS, 6, &mut check_rng, &mut |ps| {
        let mut g = Graph::new();
        let loss = run(ps, &mut g);
        g.value(loss).scalar_value()
    });
    report.assert_within(TOL);
}

// ── determinism ─────────────────────────────────────────────────────

#[test]
fn fixed_seed_gives_bit_identical_training_trajectory() {
    let trajectory = |seed: u64| -> Vec<Real> {
        let mut rng = rng_from_seed(seed);
        let mut ps = ParamSet::new();
        let w = ps.add("w", rand_array(&[4, 4], &mut rng));
        let mut opt = super::optim::Adam::new(&ps, 0.01);
        let mut losses = Vec::new();
        for _ in 0..20 {
            ps.zero_grads();
            let mut g = Graph::new();
            let x = g.input(rand_array(&[4], &mut rng));
            let wn = g.param(&ps, w);
            let y = g.linear(x, wn, None);
            let sq = g.mul(y, y);
            let loss = g.sum(sq);
            g.backward(loss);
            g.accumulate_param_grads(&mut ps);
            opt.step(&mut ps).unwrap();
            losses.push(g.value(loss).scalar_value());
        }
        losses
    };
    let a = trajectory(123);
    let b = trajectory(123);
    assert_eq!(a, b, "same seed must give bit-identical trajectories");
    let c = trajectory(124);
    assert_ne!(a, c, "different seeds should diverge");
}

// ── randomized property: every op family, 100+ seeds ────────────────

#[test]
fn fd_property_sweep_over_seeds() {
    for seed in 0..110u64 {
        gradcheck(&[&[2, 5], &[3, 5], &[3]], 1000 + seed, |g, p| {
            let y = g.linear(p[0], p[1], Some(p[2]));
            let s = g.softmax(y);
            let a = g.tanh(s);
            let m = g.matmul(a, p[1]);
            let sq = g.mul(m, m);
            g.mean(sq)
        });
    }
}

#[test]
fn forward_ops_stay_finite_on_finite_input() {
    let mut rng = rng_from_seed(31);
    for _ in 0..50 {
        let mut g = Graph::new();
        let a = g.input(rand_array(&[3, 6], &mut rng));
        let b = g.input(rand_array(&[3, 6], &mut rng));
        let ids: Vec<NodeId> = vec![
            g.add(a, b),
            g.mul(a, b),
            g.softmax(a),
            g.sigmoid(b),
            g.tanh(a),
            g.leaky_relu(b, 0.2),
        ];
        for id in ids {
            assert!(g.value(id).all_finite());
        }
    }
}

#[test]
fn rel_err_floor_behaves() {
    assert!(rel_err(0.0, 0.0) == 0.0);
    assert!(rel_err(1.0, 1.0001) < 2e-4);
}
