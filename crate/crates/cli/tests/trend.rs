use neurasp::lang::parse_program;
use neurasp::learn::{parse_dataset, train, Learner, OptimizerConfig};
use neurasp::neural::{Architecture, Model, Registry};
use neurasp_cli::gen::digits::{gen_digits, DigitsConfig, DIM};
use neurasp_cli::programs::DIGITS;

#[test]
fn digit_nll_does_not_increase_over_first_epochs() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    for seed in 1..=3u64 {
        let d = gen_digits(&DigitsConfig { count: 1000, test_count: 1, noise: 0.5, seed });
        let text: String = d.train.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
        let data = parse_dataset(&text, Some(&d.tensors)).unwrap();
        let mut reg = Registry::new();
        reg.insert("digit".into(), Model::zeros("digit", DIM, 1, 10, Architecture::Linear, seed));
        let cfg = OptimizerConfig { epochs: 5, seed, ..Default::default() };
        let rep = train(&learner, &mut reg, &data, &cfg, &mut |_, _| Default::default()).unwrap();
        let nll: Vec<f64> = rep.epochs.iter().map(|e| e.mean_nll).collect();
        assert!(nll.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {nll:?}");
    }
}
