mod common;

use zerodiffusion::embedding_io::{synth_benchmark, SynthConfig};

#[test]
fn zero_noise_benchmark_is_perfectly_decodable() {
    for seed in 0..5 {
        let cfg = SynthConfig {
            feature_noise: 0.0,
            coupling_noise: 0.0,
            samples_per_class: 10,
            seed,
            ..SynthConfig::default()
        };
        let acc = common::linear_decoder_accuracy(&synth_benchmark(&cfg).unwrap());
        assert_eq!(acc, 1.0, "seed {seed}");
    }
}

#[test]
fn default_benchmark_oracle_accuracy_at_least_ninety_percent() {
    for seed in 0..10 {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let acc = common::linear_decoder_accuracy(&synth_benchmark(&cfg).unwrap());
        println!("seed {seed}: oracle accuracy {acc:.4}");
        assert!(acc >= 0.9, "seed {seed}: {acc}");
    }
}
