//! Synthetic digit images: fixed prototypes plus Gaussian noise.

use std::collections::BTreeMap;

use neurasp::learn::{DatasetRecord, TensorRef};
use neurasp::neural::TensorMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DIM: usize = 16;

#[derive(Clone, Debug)]
pub struct DigitsConfig {
    /// Training pairs.
    pub count: usize,
    pub test_count: usize,
    /// Standard deviation of the per-feature noise.
    pub noise: f64,
    pub seed: u64,
}

/// Prototype of digit `k`: row `k + 1` of the 16x16 Sylvester Hadamard
/// matrix as a 0/1 block pattern. Any two prototypes differ in 8 features.
pub fn prototype(k: usize) -> [f64; DIM] {
    let row = (k + 1) as u32;
    let mut out = [0.0; DIM];
    for (j, x) in out.iter_mut().enumerate() {
        if (row & j as u32).count_ones() % 2 == 0 {
            *x = 1.0;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DigitsData {
    pub tensors: TensorMap,
    pub train: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
    pub baseline_train: Vec<DatasetRecord>,
    pub baseline_test: Vec<DatasetRecord>,
    pub train_pairs: Vec<(usize, usize)>,
    pub test_pairs: Vec<(usize, usize)>,
}

pub fn gen_digits(cfg: &DigitsConfig) -> DigitsData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.noise).expect("noise must be finite and non-negative");
    let mut data = DigitsData {
        tensors: TensorMap::default(),
        train: Vec::new(),
        test: Vec::new(),
        baseline_train: Vec::new(),
        baseline_test: Vec::new(),
        train_pairs: Vec::new(),
        test_pairs: Vec::new(),
    };
    for (split, n) in [("train", cfg.count), ("test", cfg.test_count)] {
        for i in 0..n {
            let (a, b) = (rng.random_range(0..10usize), rng.random_range(0..10usize));
            let mut sample = |d: usize| -> Vec<f64> {
                prototype(d).iter().map(|x| x + normal.sample(&mut rng)).collect()
            };
            let (xa, xb) = (sample(a), sample(b));
            let mut pair = xa.clone();
            pair.extend(&xb);
            let key = |t: &str| format!("{split}/{i}/{t}");
            data.tensors.insert(key("d1"), xa);
            data.tensors.insert(key("d2"), xb);
            data.tensors.insert(key("pair"), pair);
            let s = a + b;
            let labelled = split == "test";
            let labels = |m: &[(&str, String)]| -> BTreeMap<String, String> {
                if labelled {
                    m.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
                } else {
                    BTreeMap::new()
                }
            };
            let rec = DatasetRecord {
                tensors: BTreeMap::from([
                    ("d1".to_string(), TensorRef::Key(format!("@{}", key("d1")))),
                    ("d2".to_string(), TensorRef::Key(format!("@{}", key("d2")))),
                ]),
                observation: format!("addition(d1,d2,{s})"),
                facts: None,
                labels: labels(&[("digit_1(d1)", a.to_string()), ("digit_1(d2)", b.to_string())]),
            };
            let base = DatasetRecord {
                tensors: BTreeMap::from([("p".to_string(), TensorRef::Key(format!("@{}", key("pair"))))]),
                observation: format!("sum_1(p)={s}"),
                facts: None,
                labels: labels(&[("sum_1(p)", s.to_string())]),
            };
            if labelled {
                data.test.push(rec);
                data.baseline_test.push(base);
                data.test_pairs.push((a, b));
            } else {
                data.train.push(rec);
                data.baseline_train.push(base);
                data.train_pairs.push((a, b));
            }
        }
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototypes_are_eight_apart() {
        for a in 0..10 {
            for b in 0..a {
                let d = prototype(a).iter().zip(prototype(b)).filter(|(x, y)| *x != y).count();
                assert_eq!(d, 8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_noise_gives_prototypes() {
        let d = gen_digits(&DigitsConfig { count: 3, test_count: 2, noise: 0.0, seed: 1 });
        for (i, (a, _)) in d.train_pairs.iter().enumerate() {
            assert_eq!(d.tensors.get(&format!("train/{i}/d1")).unwrap(), &prototype(*a));
        }
        assert_eq!(d.test.len(), 2);
        assert!(d.train[0].labels.is_empty());
        assert_eq!(d.test[0].labels.len(), 2);
    }
}
