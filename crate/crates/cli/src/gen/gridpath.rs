//! Shortest paths on a 4x4 grid with missing edges.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write;

use neurasp::learn::{DatasetRecord, TensorRef};
use neurasp::neural::TensorMap;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::programs::GRID_EDGES;

pub const NODES: usize = 16;
pub const EDGES: usize = 24;
/// 24 edge-present flags followed by a 16-node endpoint indicator.
pub const FEATURES: usize = EDGES + NODES;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridInstance {
    /// 0-based edge indices.
    pub removed: Vec<usize>,
    pub start: usize,
    pub end: usize,
    /// Edges of the breadth-first shortest path, 0-based and sorted.
    pub path: Vec<usize>,
}

/// Breadth-first shortest path avoiding `removed`; neighbours are visited in
/// increasing node order. Returns the sorted edge indices.
pub fn shortest_path(removed: &[usize], start: usize, end: usize) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); NODES];
    for (k, &(u, v)) in GRID_EDGES.iter().enumerate() {
        if !removed.contains(&k) {
            adj[u].push((v, k));
            adj[v].push((u, k));
        }
    }
    for a in &mut adj {
        a.sort();
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; NODES];
    let mut seen = [false; NODES];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(v, k) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, k));
                queue.push_back(v);
            }
        }
    }
    if !seen[end] {
        return None;
    }
    let mut path = Vec::new();
    let mut at = end;
    while let Some((p, k)) = parent[at] {
        path.push(k);
        at = p;
    }
    path.sort();
    Some(path)
}

pub fn manhattan(a: usize, b: usize) -> usize {
    (a / 4).abs_diff(b / 4) + (a % 4).abs_diff(b % 4)
}

impl GridInstance {
    pub fn features(&self) -> Vec<f64> {
        let mut x = vec![1.0; EDGES];
        for &k in &self.removed {
            x[k] = 0.0;
        }
        x.extend(std::iter::repeat_n(0.0, NODES));
        x[EDGES + self.start] = 1.0;
        x[EDGES + self.end] = 1.0;
        x
    }

    pub fn facts(&self) -> String {
        let mut s = format!("sp(external, {}). sp(external, {}).", self.start, self.end);
        for k in &self.removed {
            write!(s, " removed({}).", k + 1).unwrap();
        }
        s
    }

    /// Every edge's label: `sp(k,g,true)` on the path, `false` elsewhere.
    pub fn full_observation(&self) -> String {
        (0..EDGES)
            .map(|k| format!("sp({},g,{})", k + 1, self.path.contains(&k)))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Only the path edges.
    pub fn path_observation(&self) -> String {
        self.path
            .iter()
            .map(|k| format!("sp({},g,true)", k + 1))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn labels(&self) -> BTreeMap<String, String> {
        (0..EDGES)
            .map(|k| (format!("sp_{}(g)", k + 1), self.path.contains(&k).to_string()))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct GridConfig {
    pub count: usize,
    /// Removed edges per instance are uniform in `0..=max_removed`.
    pub max_removed: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Instances with a start-to-end path, the first 3/4 for training.
pub fn gen_instances(cfg: &GridConfig) -> Vec<GridInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    while out.len() < cfg.count {
        let n = rng.random_range(0..=cfg.max_removed.min(EDGES));
        let mut removed = sample(&mut rng, EDGES, n).into_vec();
        removed.sort();
        let ends = sample(&mut rng, NODES, 2).into_vec();
        let (start, end) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
        if let Some(path) = shortest_path(&removed, start, end) {
            out.push(GridInstance { removed, start, end, path });
        }
    }
    out
}

pub fn split(count: usize) -> usize {
    count * 3 / 4
}

/// Datasets of the four training settings plus a labelled test split.
#[derive(Clone, Debug)]
pub struct GridData {
    pub instances: Vec<GridInstance>,
    pub tensors: TensorMap,
    /// Full labels; plain supervised training.
    pub mlp_train: Vec<DatasetRecord>,
    /// Shared by the three constrained settings: every instance once with
    /// its path edges as observation, then once with `true`, whose
    /// probability under a constrained program is the mass of the choices
    /// that satisfy it.
    pub constrained_train: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
}

pub fn gen_gridpath(cfg: &GridConfig) -> GridData {
    let instances = gen_instances(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let normal = Normal::new(0.0, cfg.noise).expect("noise must be finite and non-negative");
    let mut data = GridData {
        instances: Vec::new(),
        tensors: TensorMap::default(),
        mlp_train: Vec::new(),
        constrained_train: Vec::new(),
        test: Vec::new(),
    };
    let n_train = split(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let key = format!("inst/{i}");
        let x = inst.features().into_iter().map(|v| v + normal.sample(&mut rng)).collect();
        data.tensors.insert(key.clone(), x);
        let rec = |observation: String, labels: BTreeMap<String, String>| DatasetRecord {
            tensors: BTreeMap::from([("g".to_string(), TensorRef::Key(format!("@{key}")))]),
            observation,
            facts: Some(inst.facts()),
            labels,
        };
        if i < n_train {
            data.mlp_train.push(rec(inst.full_observation(), BTreeMap::new()));
            data.constrained_train.push(rec(inst.path_observation(), BTreeMap::new()));
        } else {
            data.test.push(rec(inst.full_observation(), inst.labels()));
        }
    }
    let unlabelled: Vec<DatasetRecord> = data
        .constrained_train
        .iter()
        .map(|r| DatasetRecord { observation: "true".into(), ..r.clone() })
        .collect();
    data.constrained_train.extend(unlabelled);
    data.instances = instances;
    data
}

/// Degree of every node under the chosen edges, counting the two external
/// edges at the endpoints.
pub fn degrees(inst: &GridInstance, chosen: &[bool]) -> [usize; NODES] {
    let mut deg = [0; NODES];
    for (k, &(u, v)) in GRID_EDGES.iter().enumerate() {
        if chosen[k] {
            deg[u] += 1;
            deg[v] += 1;
        }
    }
    deg[inst.start] += 1;
    deg[inst.end] += 1;
    deg
}
