// Scratch calibration for quantizer memorization (not part of the build).
use motiontext::data::{synth_corpus, Corpus, CorpusEntry, NormStats, PoseSequence, Split, SynthSpec};
use motiontext::quantizer::*;

fn corpus10(seed: u64) -> Corpus {
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
    Corpus::from_entries(base.layout, picked)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2e-3);
    let dead: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(256);
    let batch: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(4);
    let hidden: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(64);

    let corpus = corpus10(1001);
    let stats = NormStats::from_train_split(&corpus);
    let motions: Vec<PoseSequence> =
        corpus.entries.iter().map(|e| stats.normalize(&e.motion).unwrap()).collect();

    let cfg = QuantizerConfig {
        channels: corpus.layout.channels(),
        hidden,
        code_dim: 32,
        codebook_size: 64,
        beta: 1.0,
        dead_code_steps: dead,
    };
    let mut model = MotionQuantizer::new(cfg, 3);
    let t0 = std::time::Instant::now();
    let curve = train_quantizer(
        &mut model,
        &motions,
        &QuantizerTrainConfig {
            steps,
            batch_size: batch,
            lr,
            lr_final_frac: 0.02,
            seed: 3,
            max_frames: 24,
            grad_clip: 1.0,
            log_every: steps / 10,
        },
    )
    .unwrap();
    for r in &curve {
        println!(
            "step {:5}  loss {:.5}  rec {:.5}  cb {:.5}  commit {:.5}",
            r.step, r.loss, r.reconstruction, r.codebook, r.commitment
        );
    }
    let mae = eval_reconstruction(&model, &motions).unwrap();
    let used = model.usage_counts.iter().filter(|&&c| c > 0).count();
    println!("steps={steps} lr={lr} dead={dead} batch={batch} hidden={hidden}");
    println!("final MAE {mae:.5}  codes-used {used}/64  elapsed {:?}", t0.elapsed());
}
