//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]` line with the measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture` to see them.

use std::time::Instant;

use rand::Rng as _;

use motiontext::config::RunConfig;
use motiontext::data::{
    crop, mirror_entry, synth_corpus, Corpus, CorpusEntry, PoseFeatureLayout,
    PoseSequence, Split, SynthSpec,
};
use motiontext::diff::{fdcheck, Graph, NdArray, Real, Reduction};
use motiontext::eval::{
    bleu, diversity, fid, multimodality, r_precision, FeatureExtractors, GaussianStats,
};
use motiontext::m2t::MotionToText;
use motiontext::quantizer::{LatentSequence, MotionQuantizer, QuantizerConfig};
use motiontext::t2m::TextToMotion;
use motiontext::tokens::MotionTokenSequence;
use motiontext::transformer::{beam_decode, greedy_decode, Seq2SeqTransformer, TransformerConfig};
use motiontext::util::{derive_seed, rng_from_seed, Rng};
use motiontext::vocab::{Vocabulary, BOS, EOS};

fn gauss(rng: &mut Rng) -> Real {
    let u1: Real = rng.random::<Real>().max(1e-12);
    let u2: Real = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI as Real * u2).cos()
}

fn rand_array(shape: &[usize], rng: &mut Rng) -> NdArray {
    let numel: usize = shape.iter().product();
    NdArray::new(shape.to_vec(), (0..numel).map(|_| rng.random::<Real>() * 2.0 - 1.0).collect())
}

// ════════════════════════════════════════════════════════════════════
// 1. Gradient correctness: ops and all composite losses vs central
//    finite differences (1e-4; 5e-3 on the stochastic path), < 5 min.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();

    // (a) randomized sweep over the full op set
    for seed in 0..30u64 {
        let mut rng = rng_from_seed(9000 + seed);
        let mut ps = motiontext::diff::ParamSet::new();
        let ids = [
            ps.add("conv.w", rand_array(&[3, 2, 4], &mut rng)),
            ps.add("conv.b", rand_array(&[3], &mut rng)),
            ps.add("lin.w", rand_array(&[5, 6], &mut rng)),
            ps.add("lin.b", rand_array(&[5], &mut rng)),
            ps.add("ln.g", rand_array(&[5], &mut rng)),
            ps.add("ln.b", rand_array(&[5], &mut rng)),
            ps.add("emb", rand_array(&[7, 4], &mut rng)),
            ps.add("x", rand_array(&[2, 8], &mut rng)),
        ];
        let build = |g: &mut Graph, ps: &motiontext::diff::ParamSet| {
            let x = g.param(ps, ids[7]);
            let cw = g.param(ps, ids[0]);
            let cb = g.param(ps, ids[1]);
            let h = g.conv1d(x, cw, cb, 2, 1); // [3, 4]
            let h = g.leaky_relu(h, 0.2);
            let u = g.upsample2(h); // [3, 8]
            let t = g.transpose(u); // [8, 3]
            let c = g.cols(t, 0, 3);
            let emb = g.param(ps, ids[6]);
            let e = g.embedding(emb, &[1, 3, 5, 0, 2, 6, 4, 1]); // [8, 4]
            let both = g.concat_cols(&[c, e]); // [8, 7]
            let r0 = g.row(both, 0);
            let r1 = g.row(both, 5);
            let cat = g.concat1(&[r0, r1]); // [14]
            let st = g.stack_rows(&[r1, r0]); // [2, 7]
            let mm = g.matmul_tb(st, both); // [2, 8]
            let sm = g.softmax(mm);
            let sg = g.sigmoid(sm);
            let th = g.tanh(sg);
            let mu = g.mean(th);
            let lw = g.param(ps, ids[2]);
            let lb = g.param(ps, ids[3]);
            let narrowed = g.cols(both, 1, 6); // [8, 6]
            let lin = g.linear(narrowed, lw, Some(lb)); // [8, 5]
            let lg = g.param(ps, ids[4]);
            let lbb = g.param(ps, ids[5]);
            let ln = g.layer_norm(lin, lg, lbb);
            let ce = g.cross_entropy(ln, &[1, -1, 0, 4, 2, 3, -1, 1], Reduction::Mean);
            let l1 = g.l1_loss(r0, r1);
            let s = g.sum(cat);
            let sc = g.scale(s, 0.01);
            let a = g.add(ce, l1);
            let b = g.add(a, mu);
            g.add(b, sc)
        };
        ps.zero_grads();
        let mut g = Graph::new();
        let loss = build(&mut g, &ps);
        g.backward(loss);
        g.accumulate_param_grads(&mut ps);
        let mut check_rng = rng_from_seed(seed);
        let report = fdcheck::check_against_fd(&mut ps, 1e-5, 4, &mut check_rng, &mut |ps| {
            let mut g = Graph::new();
            let loss = build(&mut g, ps);
            g.value(loss).scalar_value()
        });
        report.assert_within(1e-4);
    }

    // (b) quantizer composite loss: reconstruction through the
    // straight-through copy + codebook pull + commitment, with the
    // stopped quantities frozen at their base values for the oracle
    let layout = PoseFeatureLayout::new(8);
    let qcfg = QuantizerConfig {
        channels: layout.channels(),
        hidden: 12,
        code_dim: 6,
        codebook_size: 12,
        beta: 1.0,
        dead_code_steps: 0,
    };
    let mut rng = rng_from_seed(42);
    let motion = PoseSequence::new(rand_array(&[8, layout.channels()], &mut rng), 20.0);
    let model = MotionQuantizer::new(qcfg.clone(), 7);
    let latent0 = model.encode(&motion).unwrap();
    let (q0, idx0) = model.quantize(&latent0).unwrap();
    let offset: Vec<Real> = q0
        .rows
        .data()
        .iter()
        .zip(latent0.rows.data())
        .map(|(q, l)| q - l)
        .collect();

    let mut work = MotionQuantizer::new(qcfg.clone(), 7);
    work.params.zero_grads();
    {
        let mut g = Graph::new();
        let bound = work.bind(&mut g, false);
        let cb_node = g.param(
            &work.params,
            work.params.iter().find(|(_, p)| p.name == "codebook").map(|(i, _)| i).unwrap(),
        );
        let enc_in = g.input(work.encoder_input(&motion));
        let latent_cm = bound.encode(&mut g, enc_in);
        let latent_rows = g.transpose(latent_cm);
        let q_const = g.input(q0.rows.clone());
        let st = g.straight_through(latent_rows, q_const);
        let dec_in = g.transpose(st);
        let recon_cm = bound.decode(&mut g, dec_in);
        let recon = g.transpose(recon_cm);
        let target = g.input(motion.frames.clone());
        let rec = g.l1_loss(recon, target);
        let latent_detached = g.input(latent0.rows.clone());
        let gathered = g.embedding(cb_node, &idx0);
        let cb = g.mse_loss(latent_detached, gathered);
        let commit = g.mse_loss(latent_rows, q_const);
        let commit_w = g.scale(commit, qcfg.beta);
        let partial = g.add(rec, cb);
        let loss = g.add(partial, commit_w);
        g.backward(loss);
        g.accumulate_param_grads(&mut work.params);
    }
    let cfg_probe = qcfg.clone();
    let latent0_rows = latent0.rows.clone();
    let q0_rows = q0.rows.clone();
    let mut check_rng = rng_from_seed(43);
    let report = fdcheck::check_against_fd(&mut work.params, 1e-5, 3, &mut check_rng, &mut |ps| {
        let mut probe = MotionQuantizer::new(cfg_probe.clone(), 7);
        probe.params = ps.clone();
        let latent = probe.encode(&motion).unwrap();
        let shifted = LatentSequence {
            rows: NdArray::new(
                latent.rows.shape().to_vec(),
                latent.rows.data().iter().zip(&offset).map(|(l, o)| l + o).collect(),
            ),
        };
        let recon = probe.decode(&shifted).unwrap();
        let rec = recon
            .frames
            .data()
            .iter()
            .zip(motion.frames.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<Real>()
            / motion.frames.numel() as Real;
        let book = probe.codebook_entries();
        let d = cfg_probe.code_dim;
        let mut cb_term = 0.0;
        for (i, &ix) in idx0.iter().enumerate() {
            for j in 0..d {
                let diff = latent0_rows.data()[i * d + j] - book.row(ix)[j];
                cb_term += diff * diff;
            }
        }
        cb_term /= (idx0.len() * d) as Real;
        let mut commit = 0.0;
        for (l, q) in latent.rows.data().iter().zip(q0_rows.data()) {
            commit += (l - q) * (l - q);
        }
        commit /= latent.rows.numel() as Real;
        rec + cb_term + cfg_probe.beta * commit
    });
    report.assert_within(1e-4);

    // (c) translation NLL
    let vocab = Vocabulary::from_texts(["walk forward then jump", "raise left hand"]);
    let m2t = MotionToText::new(
        motiontext::m2t::M2tConfig {
            codebook_size: 10,
            transformer: TransformerConfig {
                src_vocab: MotionTokenSequence::id_space(10),
                tgt_vocab: vocab.size(),
                d_model: 16,
                heads: 2,
                enc_layers: 1,
                dec_layers: 1,
                d_ff: 32,
                dropout: 0.0,
                max_len: 64,
            },
            max_text_len: 8,
        },
        vocab.clone(),
        11,
    );
    let motion_toks = MotionTokenSequence::from_interior(vec![1, 5, 2], 10).unwrap();
    let (text, _) = vocab.encode("walk forward then jump");
    let mut work = Seq2SeqTransformer::new(m2t.model.config.clone(), 11);
    work.params.zero_grads();
    {
        let mut g = Graph::new();
        let bound = work.bind(&mut g, false);
        let memory = bound.encode(
            &mut g,
            motiontext::transformer::SrcInput::Hard(motion_toks.ids()),
            None,
            None,
        );
        let ids = text.ids();
        let logits = bound.decode_logits(&mut g, memory, &ids[..ids.len() - 1], None, None);
        let targets: Vec<i64> = ids[1..].iter().map(|&t| t as i64).collect();
        let loss = g.cross_entropy(logits, &targets, Reduction::Mean);
        g.backward(loss);
        g.accumulate_param_grads(&mut work.params);
    }
    let tconfig = work.config.clone();
    let mut check_rng = rng_from_seed(44);
    let report = fdcheck::check_against_fd(&mut work.params, 1e-5, 3, &mut check_rng, &mut |ps| {
        let mut probe = Seq2SeqTransformer::new(tconfig.clone(), 11);
        probe.params = ps.clone();
        let ids = text.ids();
        let targets: Vec<i64> = ids[1..].iter().map(|&t| t as i64).collect();
        motiontext::transformer::seq2seq_nll(
            &probe,
            motion_toks.ids(),
            None,
            &ids[..ids.len() - 1],
            &targets,
            Reduction::Mean,
        )
    });
    report.assert_within(1e-4);

    // (d) full generator objective including the Gumbel-relaxed
    // inverse-alignment path, common random numbers, 5e-3
    let t2m_cfg = motiontext::t2m::T2mConfig {
        vocab_size: vocab.size(),
        codebook_size: 10,
        word_emb: 10,
        enc_hidden: 8,
        dec_hidden: 12,
        d_att: 8,
        token_emb: 10,
        max_tokens: 8,
    };
    let mut work = TextToMotion::new(t2m_cfg.clone(), 13);
    let noise_seed = 555;
    let target_tokens = MotionTokenSequence::from_interior(vec![2, 7, 1], 10).unwrap();
    let eq7 = |model: &TextToMotion| -> Real {
        // teacher-forced NLL with full forcing (deterministic) + relaxed
        // inverse term with a fixed noise stream
        let mut g = Graph::new();
        let bound = model.bind(&mut g, true);
        let (words, sentence) = bound.encode_text(&mut g, text.interior());
        let keys = bound.w_k.apply(&mut g, words);
        let values = bound.w_v.apply(&mut g, words);
        let mut h = bound.init_state(&mut g, sentence);
        let mut prev = t2m_cfg.bom();
        let mut targets: Vec<i64> = target_tokens.interior().iter().map(|&t| t as i64).collect();
        targets.push(t2m_cfg.eom() as i64);
        let mut rows = Vec::new();
        for &t in &targets {
            let emb = bound.token_emb.lookup(&mut g, &[prev]);
            let emb_row = g.row(emb, 0);
            let (logits, nh) = bound.step(&mut g, emb_row, h, keys, values);
            rows.push(logits);
            h = nh;
            prev = t as usize;
        }
        let stacked = g.stack_rows(&rows);
        let nll = g.cross_entropy(stacked, &targets, Reduction::Mean);
        let m2t_bound = m2t.model.bind(&mut g, true);
        let mut noise_rng = rng_from_seed(noise_seed);
        let inv = motiontext::t2m::inverse_alignment_loss_graph(
            &mut g, &bound, &t2m_cfg, &m2t, &m2t_bound, &text, 0.9, 6, &mut noise_rng,
        )
        .unwrap();
        let total = g.add(nll, inv);
        g.value(total).scalar_value()
    };
    work.params.zero_grads();
    {
        let mut g = Graph::new();
        let bound = work.bind(&mut g, false);
        let (words, sentence) = bound.encode_text(&mut g, text.interior());
        let keys = bound.w_k.apply(&mut g, words);
        let values = bound.w_v.apply(&mut g, words);
        let mut h = bound.init_state(&mut g, sentence);
        let mut prev = t2m_cfg.bom();
        let mut targets: Vec<i64> = target_tokens.interior().iter().map(|&t| t as i64).collect();
        targets.push(t2m_cfg.eom() as i64);
        let mut rows = Vec::new();
        for &t in &targets {
            let emb = bound.token_emb.lookup(&mut g, &[prev]);
            let emb_row = g.row(emb, 0);
            let (logits, nh) = bound.step(&mut g, emb_row, h, keys, values);
            rows.push(logits);
            h = nh;
            prev = t as usize;
        }
        let stacked = g.stack_rows(&rows);
        let nll = g.cross_entropy(stacked, &targets, Reduction::Mean);
        let m2t_bound = m2t.model.bind(&mut g, true);
        let mut noise_rng = rng_from_seed(noise_seed);
        let inv = motiontext::t2m::inverse_alignment_loss_graph(
            &mut g, &bound, &t2m_cfg, &m2t, &m2t_bound, &text, 0.9, 6, &mut noise_rng,
        )
        .unwrap();
        let total = g.add(nll, inv);
        g.backward(total);
        g.accumulate_param_grads(&mut work.params);
    }
    let t2m_cfg2 = t2m_cfg.clone();
    let mut check_rng = rng_from_seed(45);
    let report = fdcheck::check_against_fd(&mut work.params, 1e-5, 3, &mut check_rng, &mut |ps| {
        let mut probe = TextToMotion::new(t2m_cfg2.clone(), 13);
        probe.params = ps.clone();
        eq7(&probe)
    });
    assert!(
        report.max_rel_err < 5e-3,
        "full objective gradient mismatch: {} at {:?}",
        report.max_rel_err,
        report.worst
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "gradient suite took {elapsed:?} (budget 5 min)");
    println!(
        "[PASS] criterion 1: gradients match finite differences (ops sweep + all composite losses) in {elapsed:.2?}"
    );
}

// ════════════════════════════════════════════════════════════════════
// 2. Quantization oracle: 10^4 random latents, K = 64, exact index
//    equality with the exhaustive scan, lowest-index ties.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_02_quantization_oracle() {
    let layout = PoseFeatureLayout::new(8);
    let cfg = QuantizerConfig {
        channels: layout.channels(),
        hidden: 16,
        code_dim: 8,
        codebook_size: 64,
        beta: 1.0,
        dead_code_steps: 0,
    };
    let model = MotionQuantizer::new(cfg, 2024);
    let book = model.codebook_entries().clone();
    let d = book.shape()[1];
    let mut rng = rng_from_seed(77);
    let mut checked = 0usize;
    while checked < 10_000 {
        let t = rng.random_range(1..9usize).min(10_000 - checked);
        let rows: Vec<Real> = (0..t * d).map(|_| rng.random::<Real>() * 4.0 - 2.0).collect();
        let latent = LatentSequence { rows: NdArray::matrix(t, d, rows) };
        let (q, idx) = model.quantize(&latent).unwrap();
        for i in 0..t {
            // independent exhaustive scan with explicit lowest-index ties
            let mut best = usize::MAX;
            let mut best_d = Real::INFINITY;
            for c in 0..64 {
                let dist: Real = latent
                    .rows
                    .row(i)
                    .iter()
                    .zip(book.row(c))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_d || (dist == best_d && c < best) {
                    best_d = dist;
                    best = c;
                }
            }
            assert_eq!(idx[i], best, "latent {checked}");
            assert_eq!(q.rows.row(i), book.row(best));
        }
        checked += t;
    }
    println!("[PASS] criterion 2: quantize equals exhaustive nearest-neighbor scan on 10^4 latents");
}

// ════════════════════════════════════════════════════════════════════
// 3. Straight-through contract.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_03_straight_through_contract() {
    let mut rng = rng_from_seed(31);
    for _ in 0..50 {
        let n = rng.random_range(1..20usize);
        let upstream: Vec<Real> = (0..n).map(|_| gauss(&mut rng)).collect();
        let mut ps = motiontext::diff::ParamSet::new();
        let c = ps.add("continuous", rand_array(&[n], &mut rng));
        let q = ps.add("quantized", rand_array(&[n], &mut rng));
        let mut g = Graph::new();
        let cn = g.param(&ps, c);
        let qn = g.param(&ps, q);
        let st = g.straight_through(cn, qn);
        let w = g.input(NdArray::vector(upstream.clone()));
        let prod = g.mul(st, w);
        let loss = g.sum(prod);
        g.backward(loss);
        g.accumulate_param_grads(&mut ps);
        // bit-identical upstream gradient on the continuous branch
        assert_eq!(ps.get(c).grad.data(), upstream.as_slice());
        // exactly zero on the quantized branch
        assert!(ps.get(q).grad.data().iter().all(|&g| g == 0.0));
    }
    println!("[PASS] criterion 3: straight-through copies gradients bit-identically; quantized branch gets exactly zero");
}

// ════════════════════════════════════════════════════════════════════
// 4. FID closed forms.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_04_fid_closed_forms() {
    use nalgebra::DMatrix;
    let mut rng = rng_from_seed(4);
    let feats: Vec<Vec<Real>> =
        (0..60).map(|_| (0..4).map(|_| gauss(&mut rng)).collect()).collect();
    let a = GaussianStats::from_features(&feats).unwrap();
    let same = fid(&a, &a).unwrap();
    assert!(same.abs() <= 1e-6, "identical stats: {same}");

    let eye4 = DMatrix::<f64>::identity(4, 4);
    let ga = GaussianStats::from_moments(vec![0.0; 4], eye4.clone());
    let gb = GaussianStats::from_moments(vec![2.0, 1.0, 2.0, 0.0], eye4); // ||mu||^2 = 9
    let shift = fid(&ga, &gb).unwrap();
    assert!((shift - 9.0).abs() <= 1e-6, "mean-shift case: {shift}");

    let gc = GaussianStats::from_moments(vec![0.0; 3], DMatrix::identity(3, 3) * 4.0);
    let gd = GaussianStats::from_moments(vec![0.0; 3], DMatrix::identity(3, 3));
    let scaled = fid(&gc, &gd).unwrap();
    assert!((scaled - 3.0).abs() <= 1e-6, "covariance case: {scaled}");
    println!(
        "[PASS] criterion 4: FID closed forms (identical {same:.2e}, mean-shift {shift:.9}, covariance {scaled:.9})"
    );
}

// ════════════════════════════════════════════════════════════════════
// 5. Diversity / MultiModality.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_05_diversity_multimodality() {
    let mut rng = rng_from_seed(5);
    // zero on constant sets
    let constant = vec![vec![3.0, -1.0]; 100];
    assert_eq!(diversity(&constant, 30, &mut rng).unwrap(), 0.0);
    let per_text: Vec<Vec<Vec<Real>>> = (0..6).map(|i| vec![vec![i as Real; 2]; 24]).collect();
    assert_eq!(multimodality(&per_text, 10, &mut rng).unwrap(), 0.0);

    // Gaussian expectation sqrt(pi) in d=2 within +-0.05 at 10^4 samples
    let s_m = 100;
    let c = 50; // 2 * 100 * 50 = 10^4 feature draws
    let per_text: Vec<Vec<Vec<Real>>> = (0..c)
        .map(|_| (0..2 * s_m).map(|_| vec![gauss(&mut rng), gauss(&mut rng)]).collect())
        .collect();
    let got = multimodality(&per_text, s_m, &mut rng).unwrap();
    let want = (std::f64::consts::PI as Real).sqrt();
    assert!((got - want).abs() < 0.05, "multimodality {got} vs sqrt(pi) {want}");

    // loop-oracle equality for a fixed RNG
    let feats: Vec<Vec<Real>> = (0..80).map(|_| (0..3).map(|_| gauss(&mut rng)).collect()).collect();
    let mut r1 = rng_from_seed(99);
    let got_div = diversity(&feats, 25, &mut r1).unwrap();
    let mut r2 = rng_from_seed(99);
    use rand::seq::SliceRandom;
    let mut i1: Vec<usize> = (0..feats.len()).collect();
    i1.shuffle(&mut r2);
    i1.truncate(25);
    let mut i2: Vec<usize> = (0..feats.len()).collect();
    i2.shuffle(&mut r2);
    i2.truncate(25);
    let mut total = 0.0;
    for (a, b) in i1.iter().zip(&i2) {
        total += motiontext::eval::euclidean(&feats[*a], &feats[*b]);
    }
    assert_eq!(got_div, total / 25.0, "diversity loop oracle");

    println!(
        "[PASS] criterion 5: diversity/multimodality zero on constants, sqrt(pi) Gaussian case {got:.4}, loop-oracle exact"
    );
}

// ════════════════════════════════════════════════════════════════════
// 6. R-precision chance level, oracle features, monotonicity.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_06_r_precision() {
    let mut rng = rng_from_seed(6);
    let n = 10_000;
    let queries: Vec<Vec<Real>> = (0..n).map(|_| (0..4).map(|_| gauss(&mut rng)).collect()).collect();
    let counterparts: Vec<Vec<Real>> =
        (0..n).map(|_| (0..4).map(|_| gauss(&mut rng)).collect()).collect();
    let rp = r_precision(&queries, &counterparts, 3, 31, &mut rng).unwrap();
    let chance = 1.0 / 32.0;
    assert!((rp[0] - chance).abs() < 0.02, "chance top-1 {} vs {chance}", rp[0]);
    assert!(rp[0] <= rp[1] && rp[1] <= rp[2], "monotone in k: {rp:?}");

    let oracle: Vec<Vec<Real>> = (0..500)
        .map(|i| vec![i as Real * 0.37, -(i as Real) * 0.11, i as Real])
        .collect();
    let rp_oracle = r_precision(&oracle, &oracle, 1, 31, &mut rng).unwrap();
    assert_eq!(rp_oracle[0], 1.0, "oracle features retrieve perfectly");
    println!(
        "[PASS] criterion 6: R-precision chance level {:.4} (1/32 = {:.4}), oracle 1.0, monotone in k",
        rp[0], chance
    );
}

// ════════════════════════════════════════════════════════════════════
// 7. BLEU hand cases.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_07_bleu_hand_cases() {
    let words = |s: &str| -> Vec<String> { s.split_whitespace().map(str::to_string).collect() };
    let cand = vec![words("a person walk forward")];
    let refs = vec![vec![words("a person walk forward")]];
    for n in 1..=4 {
        let v = bleu(&cand, &refs, n).unwrap();
        assert!((v - 100.0).abs() < 1e-9, "exact match at order {n}: {v}");
    }
    let cand = vec![words("the the the the")];
    let refs = vec![vec![words("the cat")]];
    let v = bleu(&cand, &refs, 1).unwrap();
    assert!((v - 15.16).abs() <= 0.01, "clipping + brevity case: {v}");
    println!("[PASS] criterion 7: BLEU exact-match 100.0, clipping+brevity case {v:.2}");
}

// ════════════════════════════════════════════════════════════════════
// 8. Gumbel-Softmax distributional checks.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_08_gumbel_distribution() {
    // tau = 1, non-uniform logits: argmax frequencies within +-2% of the
    // exact categorical per class, at 10^5 draws
    let logits = [1.0 as Real, 0.2, -0.5, 0.9, 0.0];
    let k = logits.len();
    let mx = logits.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let z: Real = logits.iter().map(|&l| (l - mx).exp()).sum();
    let probs: Vec<Real> = logits.iter().map(|&l| (l - mx).exp() / z).collect();

    let mut rng = rng_from_seed(8);
    let n = 100_000;
    let mut counts = vec![0usize; k];
    for _ in 0..n {
        let mut g = Graph::new();
        let l = g.input(NdArray::vector(logits.to_vec()));
        let y = g.gumbel_softmax(l, 1.0, &mut rng);
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
        assert!(
            (freq - probs[i]).abs() < 0.02,
            "class {i}: frequency {freq} vs categorical {}",
            probs[i]
        );
    }

    // tau = 0.1 concentration on a dominant logit
    let mut hits = 0usize;
    let trials = 3000;
    for _ in 0..trials {
        let mut g = Graph::new();
        let l = g.input(NdArray::vector(vec![10.0, 0.0, 0.0]));
        let y = g.gumbel_softmax(l, 0.1, &mut rng);
        let v = g.value(y);
        if (v[0] - 1.0).abs() < 1e-3 && v[1].abs() < 1e-3 && v[2].abs() < 1e-3 {
            hits += 1;
        }
    }
    let rate = hits as Real / trials as Real;
    assert!(rate >= 0.99, "one-hot concentration rate {rate}");
    println!(
        "[PASS] criterion 8: Gumbel argmax matches the categorical within 2% at 10^5 draws; tau=0.1 one-hot rate {rate:.4}"
    );
}

// ════════════════════════════════════════════════════════════════════
// 9. Beam-search oracle on 100 random toy models.
// ════════════════════════════════════════════════════════════════════

fn exhaustive_best(
    model: &Seq2SeqTransformer,
    src: &[usize],
    max_len: usize,
) -> (Vec<usize>, Real) {
    fn logprobs(model: &Seq2SeqTransformer, src: &[usize], prefix: &[usize]) -> Vec<Real> {
        let mut g = Graph::new();
        let bound = model.bind(&mut g, true);
        let memory =
            bound.encode(&mut g, motiontext::transformer::SrcInput::Hard(src), None, None);
        let mut input = vec![BOS];
        input.extend_from_slice(prefix);
        let logits = bound.decode_logits(&mut g, memory, &input, None, None);
        let v = g.value(logits);
        let row = v.row(v.rows() - 1);
        let m = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
        let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<Real>().ln();
        row.iter().map(|&x| x - lse).collect()
    }
    fn visit(
        model: &Seq2SeqTransformer,
        src: &[usize],
        max_len: usize,
        prefix: &mut Vec<usize>,
        score: Real,
        best: &mut (Vec<usize>, Real),
    ) {
        let lp = logprobs(model, src, prefix);
        let finished = score + lp[EOS];
        if finished > best.1 {
            *best = (prefix.clone(), finished);
        }
        if prefix.len() == max_len {
            return;
        }
        for tok in 0..lp.len() {
            if tok == EOS {
                continue;
            }
            prefix.push(tok);
            visit(model, src, max_len, prefix, score + lp[tok], best);
            prefix.pop();
        }
    }
    let mut best = (vec![], Real::NEG_INFINITY);
    visit(model, src, max_len, &mut Vec::new(), 0.0, &mut best);
    best
}

#[test]
fn criterion_09_beam_search_oracle() {
    let mut rng = rng_from_seed(9);
    for model_idx in 0..100u64 {
        let cfg = TransformerConfig {
            src_vocab: 5,
            tgt_vocab: 6,
            d_model: 8,
            heads: 2,
            enc_layers: 1,
            dec_layers: 1,
            d_ff: 16,
            dropout: 0.0,
            max_len: 16,
        };
        let model = Seq2SeqTransformer::new(cfg, 5000 + model_idx);
        let src: Vec<usize> = (0..rng.random_range(1..4usize))
            .map(|_| rng.random_range(0..5usize))
            .collect();
        let (oracle_tokens, oracle_score) = exhaustive_best(&model, &src, 4);
        let beam = beam_decode(&model, &src, None, BOS, EOS, 6usize.pow(4), 4).unwrap();
        assert_eq!(beam.tokens, oracle_tokens, "model {model_idx}");
        assert!((beam.log_prob - oracle_score).abs() < 1e-9, "model {model_idx}");

        // beam = 1 always equals greedy
        let b1 = beam_decode(&model, &src, None, BOS, EOS, 1, 6).unwrap();
        let gr = greedy_decode(&model, &src, None, BOS, EOS, 6);
        assert_eq!(b1.tokens, gr.tokens, "model {model_idx}: beam-1 vs greedy");
        assert!((b1.log_prob - gr.log_prob).abs() < 1e-9);
    }
    println!("[PASS] criterion 9: beam with exhaustive width matches enumeration on 100 random models; beam-1 == greedy");
}

// ════════════════════════════════════════════════════════════════════
// 13. Data-pipeline exactness.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_13_data_pipeline_exactness() {
    // layout formula
    assert_eq!(PoseFeatureLayout::new(22).channels(), 263);
    for j in 5..=30 {
        let l = PoseFeatureLayout::new(j);
        assert_eq!(l.channels(), 12 * j - 1);
        assert_eq!(l.contacts_start() + 4, l.channels());
    }

    // mirror involution, bit-exact over a real corpus
    let corpus = synth_corpus(&SynthSpec { entries: 64, ..SynthSpec::default() }, 13).unwrap();
    let spec = motiontext::data::synth::mirror_spec();
    for e in &corpus.entries {
        let twice = mirror_entry(&mirror_entry(e, &corpus.layout, &spec), &corpus.layout, &spec);
        assert_eq!(twice.motion.frames, e.motion.frames);
        assert_eq!(twice.texts, e.texts);
    }

    // crop / divisibility rules
    let layout = PoseFeatureLayout::new(8);
    let mk = |t: usize| PoseSequence::new(NdArray::zeros(&[t, layout.channels()]), 20.0);
    assert_eq!(crop(&mk(24), 0, 0).unwrap().num_frames(), 24);
    assert_eq!(crop(&mk(24), 4, 4).unwrap().num_frames(), 16);
    assert_eq!(crop(&mk(23), 1, 0).unwrap().num_frames(), 20);

    // split ratio on 1000 entries
    let big = synth_corpus(&SynthSpec::default(), 1).unwrap();
    assert_eq!(big.split_counts(), (800, 150, 50));
    println!("[PASS] criterion 13: layout 263 @ J=22, mirror involution bit-exact, crop rules, split 800/150/50");
}

// ════════════════════════════════════════════════════════════════════
// End-to-end criteria: shared pipeline helpers.
// ════════════════════════════════════════════════════════════════════

fn pipeline_config(overrides: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::desk();
    for (k, v) in overrides {
        cfg.set_checked(k, v).unwrap();
    }
    cfg
}

/// Ten training pairs with one description each, all texts distinct.
fn memorization_corpus(seed: u64) -> Corpus {
    let spec = SynthSpec {
        entries: 40,
        min_primitives: 1,
        max_primitives: 1,
        min_duration: 16,
        max_duration: 24,
        ..SynthSpec::default()
    };
    let base = synth_corpus(&spec, seed).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut picked: Vec<CorpusEntry> = Vec::new();
    for e in &base.entries {
        let text = e.texts[0].clone();
        if seen.insert(text.clone()) {
            let mut entry = e.clone();
            entry.texts = vec![text];
            entry.split = Split::Train;
            picked.push(entry);
        }
        if picked.len() == 10 {
            break;
        }
    }
    assert_eq!(picked.len(), 10, "need 10 distinct-text pairs");
    Corpus::from_entries(base.layout, picked)
}

// ════════════════════════════════════════════════════════════════════
// 10. End-to-end memorization on a 10-pair corpus, < 10 min.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_10_memorization() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ck");
    let corpus = memorization_corpus(1001);
    let hash = corpus.content_hash();
    let cfg = pipeline_config(&[
        ("seed", "3"),
        ("augment.mirror", "false"),
        ("augment.crop_variants", "0"),
        ("vq.steps", "2400"),
        ("vq.batch_size", "4"),
        ("vq.lr", "0.002"),
        ("vq.max_frames", "24"),
        ("m2t.steps", "700"),
        ("m2t.batch_size", "4"),
        ("m2t.lr", "0.001"),
        ("m2t.dropout", "0"),
        ("t2m.steps", "700"),
        ("t2m.batch_size", "4"),
        ("t2m.lr", "0.001"),
        ("t2m.teacher_forcing", "0.7"),
        ("log_every", "200"),
    ]);

    // stage 1: quantizer reaches near-lossless reconstruction
    motiontext::pipeline::train_stage_vq(&cfg, &corpus, &hash, &ckpt, false).unwrap();
    let (vq, stats) =
        MotionQuantizer::load(&ckpt.join(motiontext::pipeline::VQ_CKPT)).unwrap();
    let motions: Vec<PoseSequence> = corpus
        .entries
        .iter()
        .map(|e| stats.normalize(&e.motion).unwrap())
        .collect();
    let mae = motiontext::quantizer::eval_reconstruction(&vq, &motions).unwrap();
    assert!(mae < 1e-2, "vq memorization MAE {mae} (want < 0.01 normalized units)");

    // stage 2: captions reproduce exactly
    motiontext::pipeline::train_stage_m2t(&cfg, &corpus, &hash, &ckpt, false).unwrap();
    let m2t = MotionToText::load(&ckpt.join(motiontext::pipeline::M2T_CKPT)).unwrap();
    let mut caption_hits = 0;
    for e in &corpus.entries {
        let norm = stats.normalize(&e.motion).unwrap();
        let tokens = vq.tokenize(&norm).unwrap();
        let (caption, _) = m2t.caption_greedy(&tokens);
        if m2t.vocab.decode(&caption) == e.texts[0] {
            caption_hits += 1;
        }
    }
    assert_eq!(caption_hits, 10, "greedy captions must reproduce all 10 texts");

    // stage 3: argmax rollouts reproduce the token sequences
    motiontext::pipeline::train_stage_t2m(&cfg, &corpus, &hash, &ckpt, false, false).unwrap();
    let t2m = TextToMotion::load(&ckpt.join(motiontext::pipeline::T2M_CKPT)).unwrap();
    let mut rollout_hits = 0;
    for e in &corpus.entries {
        let norm = stats.normalize(&e.motion).unwrap();
        let want = vq.tokenize(&norm).unwrap();
        let (text, _) = corpus.vocab.encode(&e.texts[0]);
        let enc = t2m.encode_text(&text).unwrap();
        let mut state = t2m.init_state(&enc);
        let mut prev = t2m.config.bom();
        let mut out = Vec::new();
        for _ in 0..t2m.config.max_tokens {
            let (probs, ns) = t2m.step(&state, prev, &enc).unwrap();
            state = ns;
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            if argmax == t2m.config.eom() {
                break;
            }
            if argmax >= t2m.config.codebook_size {
                break;
            }
            out.push(argmax);
            prev = argmax;
        }
        if out == want.interior() {
            rollout_hits += 1;
        }
    }
    assert_eq!(rollout_hits, 10, "argmax rollouts must reproduce all 10 token sequences");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "memorization run took {elapsed:?} (budget 10 min)");
    println!(
        "[PASS] criterion 10: 10-pair memorization (vq MAE {mae:.5}, 10/10 captions, 10/10 rollouts) in {elapsed:.2?}"
    );
}

// ════════════════════════════════════════════════════════════════════
// 11. End-to-end synthetic run at desk scale, < 30 min.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_11_end_to_end_synthetic() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ck");
    let corpus = synth_corpus(&SynthSpec::default(), 11).unwrap();
    assert_eq!(corpus.split_counts(), (800, 150, 50));
    let hash = corpus.content_hash();
    let cfg = pipeline_config(&[("seed", "11"), ("log_every", "200")]);

    motiontext::pipeline::train_stage_vq(&cfg, &corpus, &hash, &ckpt, false).unwrap();
    motiontext::pipeline::train_stage_extractors(&cfg, &corpus, &hash, &ckpt, false).unwrap();
    motiontext::pipeline::train_stage_m2t(&cfg, &corpus, &hash, &ckpt, false).unwrap();
    motiontext::pipeline::train_stage_t2m(&cfg, &corpus, &hash, &ckpt, true, false).unwrap();

    let (_, _stats) = MotionQuantizer::load(&ckpt.join(motiontext::pipeline::VQ_CKPT)).unwrap();
    let t2m = TextToMotion::load(&ckpt.join(motiontext::pipeline::T2M_CKPT)).unwrap();
    let test = corpus.split_entries(Split::Test);

    // (a) >= 95% of generations terminate via EOM before the cap
    let mut rng = rng_from_seed(1100);
    let mut eom_terminated = 0;
    let total_gens = 100;
    for i in 0..total_gens {
        let e = test[i % test.len()];
        let (text, _) = corpus.vocab.encode(&e.texts[0]);
        let tokens = t2m.generate(&text, t2m.config.max_tokens, &mut rng).unwrap();
        if tokens.interior_len() < t2m.config.max_tokens {
            eom_terminated += 1;
        }
    }
    let eom_rate = eom_terminated as Real / total_gens as Real;
    assert!(eom_rate >= 0.95, "EOM termination rate {eom_rate}");

    // (b) two seeds per text produce distinct token sequences > 50%
    let mut distinct = 0;
    let texts_checked = 40;
    for (i, e) in test.iter().take(texts_checked).enumerate() {
        let (text, _) = corpus.vocab.encode(&e.texts[0]);
        let mut r1 = rng_from_seed(derive_seed(7000, i as u64));
        let mut r2 = rng_from_seed(derive_seed(8000, i as u64));
        let a = t2m.generate(&text, t2m.config.max_tokens, &mut r1).unwrap();
        let b = t2m.generate(&text, t2m.config.max_tokens, &mut r2).unwrap();
        if a.ids() != b.ids() {
            distinct += 1;
        }
    }
    let distinct_rate = distinct as Real / texts_checked as Real;
    assert!(distinct_rate > 0.5, "cross-seed distinctness {distinct_rate}");

    // (c) top-1 t2m R-precision above chance
    let mut cfg_eval = cfg.clone();
    cfg_eval.set_checked("eval.repetitions", "4").unwrap();
    cfg_eval.set_checked("eval.mm_descriptions", "4").unwrap();
    cfg_eval.set_checked("eval.mm_samples", "5").unwrap();
    let report = motiontext::pipeline::run_evaluate(
        &cfg_eval,
        &corpus,
        &hash,
        &ckpt,
        &dir.path().join("eval"),
    )
    .unwrap();
    let top1 = report.get("t2m_r_precision_top1").unwrap().mean;
    assert!(top1 > 0.10, "t2m top-1 R-precision {top1} (chance 0.031, want > 0.10)");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "end-to-end run took {elapsed:?} (budget 30 min)");
    println!(
        "[PASS] criterion 11: desk-scale pipeline (EOM rate {eom_rate:.2}, distinctness {distinct_rate:.2}, top-1 RP {top1:.3}) in {elapsed:.2?}"
    );
}

// ════════════════════════════════════════════════════════════════════
// 12. Inverse-alignment direction check over 5 paired seeds.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_12_inverse_alignment_direction() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ck");
    let corpus = synth_corpus(&SynthSpec { entries: 320, ..SynthSpec::default() }, 12).unwrap();
    let hash = corpus.content_hash();
    let base_cfg = pipeline_config(&[
        ("seed", "12"),
        ("vq.steps", "1200"),
        ("ex.steps", "600"),
        ("m2t.steps", "900"),
        ("t2m.steps", "350"),
        ("t2m.rollout_cap", "12"),
        ("log_every", "200"),
    ]);
    motiontext::pipeline::train_stage_vq(&base_cfg, &corpus, &hash, &ckpt, false).unwrap();
    motiontext::pipeline::train_stage_extractors(&base_cfg, &corpus, &hash, &ckpt, false).unwrap();
    motiontext::pipeline::train_stage_m2t(&base_cfg, &corpus, &hash, &ckpt, false).unwrap();

    let (vq, stats) = MotionQuantizer::load(&ckpt.join(motiontext::pipeline::VQ_CKPT)).unwrap();
    let m2t = MotionToText::load(&ckpt.join(motiontext::pipeline::M2T_CKPT)).unwrap();
    let extractors =
        FeatureExtractors::load(&ckpt.join(motiontext::pipeline::EXTRACTORS_CKPT)).unwrap();

    // token pairs straight from the train split (no crop variants: both
    // arms of each pair see identical data)
    let vocab = corpus.vocab.clone();
    let mut pairs = Vec::new();
    for e in corpus.split_entries(Split::Train) {
        let norm = stats.normalize(&e.motion).unwrap();
        let tokens = vq.tokenize(&norm).unwrap();
        for t in &e.texts {
            let (enc, _) = vocab.encode(t);
            if !enc.interior().is_empty() {
                pairs.push((enc, tokens.clone()));
            }
        }
    }

    let test = corpus.split_entries(Split::Test);
    let real_text_feats: Vec<Vec<Real>> = test
        .iter()
        .map(|e| extractors.text_feature(&vocab.encode(&e.texts[0]).0).unwrap())
        .collect();

    let top1_of = |model: &TextToMotion, eval_seed: u64| -> Real {
        let mut vals = Vec::new();
        for rep in 0..3u64 {
            let mut rng = rng_from_seed(derive_seed(eval_seed, rep));
            let mut gen_feats = Vec::new();
            for e in test.iter() {
                let (text, _) = vocab.encode(&e.texts[0]);
                let tokens = model.generate(&text, model.config.max_tokens, &mut rng).unwrap();
                if tokens.interior_len() == 0 {
                    gen_feats.push(vec![0.0; extractors.config.feature_dim]);
                } else {
                    let pose = vq.detokenize(&tokens).unwrap();
                    gen_feats.push(extractors.motion_feature(&pose).unwrap());
                }
            }
            let rp = r_precision(&gen_feats, &real_text_feats, 1, 31, &mut rng).unwrap();
            vals.push(rp[0]);
        }
        vals.iter().sum::<Real>() / vals.len() as Real
    };

    let mut with_scores = Vec::new();
    let mut without_scores = Vec::new();
    for seed in 0..5u64 {
        let t2m_cfg = motiontext::t2m::T2mConfig {
            vocab_size: vocab.size(),
            codebook_size: vq.config.codebook_size,
            ..base_cfg.t2m_config(vocab.size(), vq.config.codebook_size).unwrap()
        };
        let mut train_with = base_cfg.t2m_train_config(true).unwrap();
        train_with.seed = 100 + seed;
        let mut model_with = TextToMotion::new(t2m_cfg.clone(), 100 + seed);
        motiontext::t2m::train_t2m(&mut model_with, Some(&m2t), &pairs, &train_with).unwrap();
        with_scores.push(top1_of(&model_with, 40_000 + seed));

        let mut train_without = base_cfg.t2m_train_config(false).unwrap();
        train_without.seed = 100 + seed;
        let mut model_without = TextToMotion::new(t2m_cfg, 100 + seed);
        motiontext::t2m::train_t2m(&mut model_without, None, &pairs, &train_without).unwrap();
        without_scores.push(top1_of(&model_without, 40_000 + seed));
    }
    let mean_with = with_scores.iter().sum::<Real>() / with_scores.len() as Real;
    let mean_without = without_scores.iter().sum::<Real>() / without_scores.len() as Real;
    assert!(
        mean_with >= mean_without,
        "inverse alignment should not hurt mean top-1 R-precision: with {mean_with:.4} ({with_scores:?}) vs without {mean_without:.4} ({without_scores:?})"
    );
    println!(
        "[PASS] criterion 12: inverse alignment direction (top-1 with {mean_with:.4} >= without {mean_without:.4} over 5 paired seeds)"
    );
}

// ════════════════════════════════════════════════════════════════════
// 14. Determinism: same master seed, bit-identical checkpoints/reports.
// ════════════════════════════════════════════════════════════════════

#[test]
fn criterion_14_determinism() {
    let cfg = pipeline_config(&[
        ("seed", "14"),
        ("synth.entries", "260"),
        ("vq.steps", "200"),
        ("ex.steps", "150"),
        ("m2t.steps", "150"),
        ("t2m.steps", "80"),
        ("t2m.rollout_cap", "8"),
        ("eval.repetitions", "2"),
        ("eval.max_entries", "39"),
        ("eval.mm_descriptions", "2"),
        ("eval.mm_samples", "3"),
        ("log_every", "100"),
    ]);

    let run = |tag: &str| -> (Vec<(String, Vec<u8>)>, String) {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join(format!("ck-{tag}"));
        let corpus_path = dir.path().join("corpus.jsonl");
        motiontext::pipeline::cmd_synth_data(&cfg, &corpus_path).unwrap();
        let (corpus, hash) = motiontext::pipeline::load_corpus(&corpus_path).unwrap();
        motiontext::pipeline::train_stage_vq(&cfg, &corpus, &hash, &ckpt, false).unwrap();
        motiontext::pipeline::train_stage_extractors(&cfg, &corpus, &hash, &ckpt, false).unwrap();
        motiontext::pipeline::train_stage_m2t(&cfg, &corpus, &hash, &ckpt, false).unwrap();
        motiontext::pipeline::train_stage_t2m(&cfg, &corpus, &hash, &ckpt, true, false).unwrap();
        let out = dir.path().join("eval");
        motiontext::pipeline::run_evaluate(&cfg, &corpus, &hash, &ckpt, &out).unwrap();
        let mut files = Vec::new();
        for name in [
            motiontext::pipeline::VQ_CKPT,
            motiontext::pipeline::M2T_CKPT,
            motiontext::pipeline::T2M_CKPT,
            motiontext::pipeline::EXTRACTORS_CKPT,
        ] {
            files.push((name.to_string(), std::fs::read(ckpt.join(name)).unwrap()));
        }
        files.push(("corpus".into(), std::fs::read(&corpus_path).unwrap()));
        let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
        (files, report)
    };

    let (files_a, report_a) = run("a");
    let (files_b, report_b) = run("b");
    for ((name_a, bytes_a), (_, bytes_b)) in files_a.iter().zip(&files_b) {
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between identical runs");
    }
    assert_eq!(report_a, report_b, "metric reports differ between identical runs");
    println!("[PASS] criterion 14: bit-identical checkpoints and reports under a fixed master seed");
}
