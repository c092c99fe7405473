// scratch experiment: power-conditioned training dynamics (not shipped; deleted before finish)
use gvox_core::model::gated_conv::GatedConvConfig;
use gvox_core::model::rng::DeterministicRng;
use gvox_core::model::train::{train, TrainConfig};
use gvox_core::parametric::{build_conditioning, dequantize_frame, encode_frames, pack_stream, COND_DIM};
use gvox_core::signal::{PcmSignal, RATE_16K};
use gvox_core::synth::synthesize;
use gvox_core::model::teacher_forced;
use gvox_core::signal::mulaw;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(12);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.06);
    let mom: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let res: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(16);

    let mut rng = DeterministicRng::seed_from(61);
    let frame16 = 320usize;
    let mut corpus = Vec::new();
    for _ in 0..2 {
        let n_frames = 120usize;
        let mut samples = Vec::with_capacity(n_frames * frame16);
        let mut i = 0usize;
        for _ in 0..n_frames {
            let db = -30.0 + 26.0 * rng.next_f64();
            let amp = 32768.0 * 10f64.powf(db / 20.0);
            for _ in 0..frame16 {
                let sign = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
                samples.push((sign * amp).clamp(-32000.0, 32000.0) as i16);
                i += 1;
            }
        }
        let signal = PcmSignal::new(samples, RATE_16K);
        let (frames, _) = encode_frames(&signal).unwrap();
        let params: Vec<_> = frames.iter().map(dequantize_frame).collect();
        let track = build_conditioning(&params, RATE_16K);
        corpus.push((signal, track));
    }

    let arch = GatedConvConfig { stacks: 1, layers_per_stack: 2, residual_channels: res, skip_channels: 2*res, conditioning_dim: COND_DIM };
    let cfg = TrainConfig { epochs, learning_rate: lr, momentum: mom, chunk_len: 320, batch_chunks: 2, seed: 13 };
    let t0 = std::time::Instant::now();
    let (model, history) = train(&corpus, arch, &cfg).unwrap();
    println!("train {:.1}s; loss history: {:?}", t0.elapsed().as_secs_f64(),
             history.iter().map(|x| (x*1000.0).round()/1000.0).collect::<Vec<_>>());

    // staircase eval
    let stair_db = [-26.0f64, -18.0, -10.0, -6.0];
    let mut samples = Vec::new();
    let mut i = 0usize;
    for &db in &stair_db {
        let amp = 32768.0 * 10f64.powf(db / 20.0);
        for _ in 0..10 * frame16 {
            let sign = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
            samples.push((sign * amp).clamp(-32000.0, 32000.0) as i16);
            i += 1;
        }
    }
    let signal = PcmSignal::new(samples, RATE_16K);
    let (frames, _) = encode_frames(&signal).unwrap();
    let coded: Vec<_> = frames.iter().map(dequantize_frame).collect();
    let bitstream = pack_stream(&frames);
    // teacher-forced probe: is the conditional learned at all?
    {
        let syms: Vec<u8> = signal.samples.iter().map(|&x| mulaw::encode(x)).collect();
        let track = build_conditioning(&coded, RATE_16K);
        let steps = teacher_forced(&model, &syms, &track).unwrap();
        let n = steps.len();
        let ce: f64 = steps.iter().map(|s| -s.log2_prob).sum::<f64>() / n as f64;
        let h: f64 = steps.iter().map(|s| s.entropy_bits).sum::<f64>() / n as f64;
        println!("teacher-forced: CE {ce:.3} bits, mean predicted entropy {h:.3}");
    }
    let out = synthesize(&bitstream, &model, 99, 1.0).unwrap();
    let mut within = 0usize; let mut total = 0usize; let mut worst: f64 = 0.0;
    for (k, params) in coded.iter().enumerate().skip(1) {
        let seg = &out.signal.samples[k * frame16..(k + 1) * frame16];
        let rms = (seg.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / seg.len() as f64).sqrt().max(1e-6);
        let db = 20.0 * (rms / 32768.0).log10();
        let err = (db - params.power_db).abs();
        worst = worst.max(err);
        if err <= 3.0 { within += 1; }
        total += 1;
        if k % 5 == 1 { println!("frame {k}: coded {:.1} dB, output {db:.1} dB", params.power_db); }
    }
    println!("tracking: {within}/{total} within 3 dB, worst {worst:.2} dB");
}
