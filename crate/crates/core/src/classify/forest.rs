use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, ClassifyError};
use crate::corpus::{SectorLabel, N_SECTORS};
use crate::features::FeatureVector;
use crate::scalar::{argmax, total_cmp, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_leaf_nodes: usize,
    /// Candidate columns per split; `None` means `floor(sqrt(dim))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_estimators: 500,
            max_depth: 100,
            max_leaf_nodes: 250,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RfParams {
    fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: &str| Err(ClassifyError::InvalidParam(m.into()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1");
        }
        if self.max_leaf_nodes < 2 {
            return bad("max_leaf_nodes must be at least 2");
        }
        if self.features_per_split == Some(0) {
            return bad("features_per_split must be at least 1");
        }
        Ok(())
    }

    pub fn candidates_for(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode<T> {
    Leaf {
        class: u8,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: T,
        left: u32,
        right: u32,
    },
}

/// Gini decision tree stored as a flat node array rooted at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<TreeNode<T>>,
}

impl<T: Real> Tree<T> {
    /// Checks that child links point forward and classes are in range.
    pub fn from_nodes(nodes: Vec<TreeNode<T>>) -> Result<Self, ClassifyError> {
        if nodes.is_empty() {
            return Err(ClassifyError::Format("empty tree".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            match *n {
                TreeNode::Leaf { class } if class as usize >= N_SECTORS => {
                    return Err(ClassifyError::Format(format!("leaf class {class} out of range")));
                }
                TreeNode::Split { left, right, .. }
                    if left as usize <= i
                        || right as usize <= i
                        || left as usize >= nodes.len()
                        || right as usize >= nodes.len() =>
                {
                    return Err(ClassifyError::Format(format!("bad child link at node {i}")));
                }
                _ => {}
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn predict(&self, x: &FeatureVector<T>) -> usize {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { class } => return class as usize,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x.get(feature as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Length of the longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for i in 0..self.nodes.len() {
            if let TreeNode::Split { left, right, .. } = self.nodes[i] {
                depth[left as usize] = depth[i] + 1;
                depth[right as usize] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    dim: usize,
    trees: Vec<Tree<T>>,
    pub params: RfParams,
}

impl<T: Real> Forest<T> {
    pub fn from_parts(dim: usize, trees: Vec<Tree<T>>, params: RfParams) -> Self {
        Self { dim, trees, params }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn vote_fractions(&self, x: &FeatureVector<T>) -> [T; N_SECTORS] {
        let mut votes = [0usize; N_SECTORS];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        let n = T::of_usize(self.trees.len());
        votes.map(|v| T::of_usize(v) / n)
    }
}

/// Trains `n_estimators` trees in parallel. Per-tree seeds are drawn up front
/// from the master seed, so the forest does not depend on thread count.
pub fn train_random_forest<T: Real>(
    x: &[FeatureVector<T>],
    y: &[SectorLabel],
    params: &RfParams,
) -> Result<Forest<T>, ClassifyError> {
    params.validate()?;
    let dim = check_training_set(x, y)?;
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_estimators).map(|_| master.random()).collect();
    let labels: Vec<u8> = y.iter().map(|l| l.index() as u8).collect();
    let data = Data {
        rows: x,
        labels: &labels,
        dim,
    };
    let trees = seeds
        .par_iter()
        .map(|&s| grow_tree(&data, params, s))
        .collect();
    Ok(Forest::from_parts(dim, trees, params.clone()))
}

struct Data<'a, T> {
    rows: &'a [FeatureVector<T>],
    labels: &'a [u8],
    dim: usize,
}

type Counts = [u64; N_SECTORS];

struct Split<T> {
    feature: usize,
    threshold: T,
    improvement: f64,
}

struct Pending<T> {
    samples: Vec<u32>,
    counts: Counts,
    depth: usize,
    split: Option<Split<T>>,
}

fn weighted_gini(counts: &Counts) -> f64 {
    let w: u64 = counts.iter().sum();
    if w == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    w as f64 - sq / w as f64
}

/// Scratch buffers reused across the nodes of one tree.
struct Workspace<T> {
    mark: Vec<u32>,
    stamp: u32,
    slot: Vec<u32>,
    present: Vec<usize>,
    buckets: Vec<Vec<(T, u32)>>,
}

fn grow_tree<T: Real>(data: &Data<'_, T>, params: &RfParams, seed: u64) -> Tree<T> {
    let n = data.rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weight = vec![0u32; n];
    if params.bootstrap {
        for _ in 0..n {
            weight[rng.random_range(0..n)] += 1;
        }
    } else {
        weight.fill(1);
    }
    let root: Vec<u32> = (0..n as u32).filter(|&s| weight[s as usize] > 0).collect();
    let mut counts = [0u64; N_SECTORS];
    for &s in &root {
        counts[data.labels[s as usize] as usize] += weight[s as usize] as u64;
    }
    let total_weight: u64 = counts.iter().sum();

    let mut ws = Workspace {
        mark: vec![0; data.dim],
        stamp: 0,
        slot: vec![u32::MAX; data.dim],
        present: Vec::new(),
        buckets: Vec::new(),
    };
    let mtry = params.candidates_for(data.dim);
    let mut nodes: Vec<Pending<T>> = Vec::new();
    let mut links: Vec<Option<(usize, T, u32, u32)>> = Vec::new();

    let make = |samples: Vec<u32>, counts: Counts, depth: usize, rng: &mut ChaCha8Rng, ws: &mut Workspace<T>| {
        let split = if depth < params.max_depth {
            find_split(data, &weight, &samples, &counts, total_weight, mtry, rng, ws)
        } else {
            None
        };
        Pending {
            samples,
            counts,
            depth,
            split,
        }
    };

    nodes.push(make(root, counts, 0, &mut rng, &mut ws));
    links.push(None);
    let mut frontier: Vec<usize> = if nodes[0].split.is_some() { vec![0] } else { vec![] };
    let mut leaves = 1;

    while leaves < params.max_leaf_nodes && !frontier.is_empty() {
        // best improvement first, ties to the older node
        let pick = (0..frontier.len())
            .max_by(|&a, &b| {
                let ia = nodes[frontier[a]].split.as_ref().unwrap().improvement;
                let ib = nodes[frontier[b]].split.as_ref().unwrap().improvement;
                ia.total_cmp(&ib).then(frontier[b].cmp(&frontier[a]))
            })
            .unwrap();
        let id = frontier.swap_remove(pick);
        let node = &mut nodes[id];
        let split = node.split.take().unwrap();
        let samples = std::mem::take(&mut node.samples);
        let depth = node.depth;

        let (mut left, mut right) = (Vec::new(), Vec::new());
        let (mut lc, mut rc) = ([0u64; N_SECTORS], [0u64; N_SECTORS]);
        for s in samples {
            let w = weight[s as usize] as u64;
            let class = data.labels[s as usize] as usize;
            if data.rows[s as usize].get(split.feature) <= split.threshold {
                left.push(s);
                lc[class] += w;
            } else {
                right.push(s);
                rc[class] += w;
            }
        }
        let li = nodes.len();
        nodes.push(make(left, lc, depth + 1, &mut rng, &mut ws));
        links.push(None);
        let ri = nodes.len();
        nodes.push(make(right, rc, depth + 1, &mut rng, &mut ws));
        links.push(None);
        links[id] = Some((split.feature, split.threshold, li as u32, ri as u32));
        for c in [li, ri] {
            if nodes[c].split.is_some() {
                frontier.push(c);
            }
        }
        leaves += 1;
    }

    let out = nodes
        .iter()
        .zip(links)
        .map(|(node, link)| match link {
            Some((feature, threshold, left, right)) => TreeNode::Split {
                feature: feature as u32,
                threshold,
                left,
                right,
            },
            None => TreeNode::Leaf {
                class: argmax(&node.counts.map(|c| c as f64)) as u8,
            },
        })
        .collect();
    Tree { nodes: out }
}

/// Best gini split among up to `mtry` non-constant columns drawn without
/// replacement from the columns that are nonzero somewhere in the node.
/// Columns absent from every node sample are constant (all zero) and are
/// never drawn; drawn columns that turn out constant do not count.
#[allow(clippy::too_many_arguments)]
fn find_split<T: Real>(
    data: &Data<'_, T>,
    weight: &[u32],
    samples: &[u32],
    counts: &Counts,
    total_weight: u64,
    mtry: usize,
    rng: &mut ChaCha8Rng,
    ws: &mut Workspace<T>,
) -> Option<Split<T>> {
    if samples.len() < 2 || counts.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    ws.stamp += 1;
    ws.present.clear();
    for &s in samples {
        for &(j, _) in data.rows[s as usize].entries() {
            if ws.mark[j] != ws.stamp {
                ws.mark[j] = ws.stamp;
                ws.present.push(j);
            }
        }
    }
    // canonical order so the draw depends only on the node's sample set
    ws.present.sort_unstable();

    let node_w: u64 = counts.iter().sum();
    let parent = weighted_gini(counts);
    let mut best: Option<(f64, usize, T)> = None;
    let mut drawn = 0usize;
    let mut evaluated = 0usize;
    while evaluated < mtry && drawn < ws.present.len() {
        let batch = (mtry - evaluated).min(ws.present.len() - drawn);
        let mut cands = Vec::with_capacity(batch);
        for k in 0..batch {
            let j = rng.random_range(drawn..ws.present.len());
            ws.present.swap(drawn, j);
            let f = ws.present[drawn];
            ws.slot[f] = k as u32;
            cands.push(f);
            drawn += 1;
        }
        ws.buckets.resize_with(batch.max(ws.buckets.len()), Vec::new);
        for b in ws.buckets.iter_mut().take(batch) {
            b.clear();
        }
        for &s in samples {
            for &(j, v) in data.rows[s as usize].entries() {
                let k = ws.slot[j];
                if k != u32::MAX {
                    ws.buckets[k as usize].push((v, s));
                }
            }
        }
        for (k, &f) in cands.iter().enumerate() {
            ws.slot[f] = u32::MAX;
            let vals = &mut ws.buckets[k];
            match best_threshold(data, weight, vals, counts, node_w, samples.len()) {
                None => {}
                Some((score, thr)) => {
                    evaluated += 1;
                    if best.as_ref().is_none_or(|b| score > b.0) {
                        best = Some((score, f, thr));
                    }
                }
            }
        }
    }
    best.map(|(score, feature, threshold)| Split {
        feature,
        threshold,
        improvement: (parent - (node_w as f64 - score)) / total_weight as f64,
    })
}

/// Scans thresholds for one column. Returns `Σ_L c²/w_L + Σ_R c²/w_R` at the
/// best cut (larger is purer) and the midpoint threshold, or `None` when the
/// column is constant in the node.
fn best_threshold<T: Real>(
    data: &Data<'_, T>,
    weight: &[u32],
    vals: &mut [(T, u32)],
    counts: &Counts,
    node_w: u64,
    node_len: usize,
) -> Option<(f64, T)> {
    vals.sort_unstable_by(|a, b| total_cmp(a.0, b.0).then(a.1.cmp(&b.1)));
    let mut zero = *counts;
    for &(_, s) in vals.iter() {
        zero[data.labels[s as usize] as usize] -= weight[s as usize] as u64;
    }
    let has_zeros = vals.len() < node_len;
    // groups in ascending value order with zeros slotted in place
    let split_at = vals.partition_point(|p| p.0 < T::zero());
    let mut groups: Vec<(T, Counts)> = Vec::new();
    let push = |v: T, c: usize, w: u64, groups: &mut Vec<(T, Counts)>| match groups.last_mut() {
        Some(g) if g.0 == v => g.1[c] += w,
        _ => {
            let mut cs = [0u64; N_SECTORS];
            cs[c] = w;
            groups.push((v, cs));
        }
    };
    for &(v, s) in &vals[..split_at] {
        push(v, data.labels[s as usize] as usize, weight[s as usize] as u64, &mut groups);
    }
    if has_zeros {
        groups.push((T::zero(), zero));
    }
    for &(v, s) in &vals[split_at..] {
        push(v, data.labels[s as usize] as usize, weight[s as usize] as u64, &mut groups);
    }
    if groups.len() < 2 {
        return None;
    }

    let mut left = [0u64; N_SECTORS];
    let mut best: Option<(f64, T)> = None;
    for g in 0..groups.len() - 1 {
        for c in 0..N_SECTORS {
            left[c] += groups[g].1[c];
        }
        let lw: u64 = left.iter().sum();
        let rw = node_w - lw;
        if lw == 0 || rw == 0 {
            continue;
        }
        let lsq: f64 = left.iter().map(|&c| (c as f64).powi(2)).sum();
        let rsq: f64 = (0..N_SECTORS)
            .map(|c| ((counts[c] - left[c]) as f64).powi(2))
            .sum();
        let score = lsq / lw as f64 + rsq / rw as f64;
        if best.is_none_or(|b| score > b.0) {
            let (a, b) = (groups[g].0, groups[g + 1].0);
            let mut thr = a + (b - a) / T::of(2.0);
            if thr >= b {
                thr = a;
            }
            best = Some((score, thr));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector<f64> {
        FeatureVector::from_dense(v)
    }

    #[test]
    fn memorizes_single_feature_classes() {
        let x: Vec<_> = (0..8).map(|i| fv(&[i as f64])).collect();
        let y = SectorLabel::ALL.to_vec();
        let p = RfParams {
            n_estimators: 1,
            bootstrap: false,
            features_per_split: Some(1),
            ..RfParams::default()
        };
        let f = train_random_forest(&x, &y, &p).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.trees()[0].predict(xi), yi.index());
        }
        assert_eq!(f.trees()[0].n_leaves(), 8);
    }

    #[test]
    fn leaf_cap_is_respected() {
        let x: Vec<_> = (0..64).map(|i| fv(&[i as f64, (i * 7 % 13) as f64])).collect();
        let y: Vec<_> = (0..64).map(|i| SectorLabel::ALL[i % 8]).collect();
        let p = RfParams {
            n_estimators: 5,
            max_leaf_nodes: 6,
            max_depth: 3,
            ..RfParams::default()
        };
        for t in train_random_forest(&x, &y, &p).unwrap().trees() {
            assert!(t.n_leaves() <= 6 && t.depth() <= 3);
        }
    }

    #[test]
    fn votes_sum_to_one_and_seed_fixes_forest() {
        let x: Vec<_> = (0..30).map(|i| fv(&[(i % 4) as f64, (i % 3) as f64, 1.0])).collect();
        let y: Vec<_> = (0..30).map(|i| SectorLabel::ALL[i % 3]).collect();
        let p = RfParams {
            n_estimators: 25,
            seed: 9,
            ..RfParams::default()
        };
        let a = train_random_forest(&x, &y, &p).unwrap();
        let b = train_random_forest(&x, &y, &p).unwrap();
        assert_eq!(a, b);
        let s: f64 = a.vote_fractions(&x[0]).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let x: Vec<_> = (0..40).map(|i| fv(&[(i % 5) as f64, (i % 7) as f64, (i % 2) as f64])).collect();
        let y: Vec<_> = (0..40).map(|i| SectorLabel::ALL[i % 4]).collect();
        let p = RfParams {
            n_estimators: 16,
            seed: 3,
            ..RfParams::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train_random_forest(&x, &y, &p).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn tree_validation() {
        assert!(Tree::<f64>::from_nodes(vec![]).is_err());
        assert!(Tree::<f64>::from_nodes(vec![TreeNode::Leaf { class: 9 }]).is_err());
        let loops = vec![TreeNode::Split {
            feature: 0,
            threshold: 0.5,
            left: 0,
            right: 0,
        }];
        assert!(Tree::<f64>::from_nodes(loops).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn positive_rescaling_preserves_predictions(
            rows in proptest::collection::vec((proptest::collection::vec(0u8..5, 5), 0usize..3), 6..40),
            e in -6i32..7,
            seed in any::<u64>(),
        ) {
            // power-of-two factors scale exactly, so a test point sitting on a
            // threshold stays on it
            let k = 2f64.powi(e);
            let x: Vec<_> = rows.iter().map(|r| fv(&r.0.iter().map(|&v| v as f64).collect::<Vec<_>>())).collect();
            let xs: Vec<_> = x.iter().map(|v| v.scaled(k)).collect();
            let mut y: Vec<_> = rows.iter().map(|r| SectorLabel::ALL[r.1]).collect();
            y[0] = SectorLabel::ALL[0];
            y[1] = SectorLabel::ALL[1];
            let p = RfParams { n_estimators: 7, seed, ..RfParams::default() };
            let a = train_random_forest(&x, &y, &p).unwrap();
            let b = train_random_forest(&xs, &y, &p).unwrap();
            for (ta, tb) in a.trees().iter().zip(b.trees()) {
                for (na, nb) in ta.nodes().iter().zip(tb.nodes()) {
                    match (*na, *nb) {
                        (TreeNode::Split { threshold: u, .. }, TreeNode::Split { threshold: v, .. }) => {
                            prop_assert_eq!(u * k, v)
                        }
                        (na, nb) => prop_assert_eq!(na, nb),
                    }
                }
            }
            for (xi, xsi) in x.iter().zip(&xs) {
                prop_assert_eq!(a.vote_fractions(xi), b.vote_fractions(xsi));
            }
        }

        #[test]
        fn default_caps_hold(
            rows in proptest::collection::vec((proptest::collection::vec(0u8..3, 8), 0usize..8), 20..120),
            seed in any::<u64>(),
        ) {
            let x: Vec<_> = rows.iter().map(|r| fv(&r.0.iter().map(|&v| v as f64).collect::<Vec<_>>())).collect();
            let mut y: Vec<_> = rows.iter().map(|r| SectorLabel::ALL[r.1]).collect();
            y[0] = SectorLabel::ALL[0];
            y[1] = SectorLabel::ALL[1];
            let p = RfParams { n_estimators: 4, seed, ..RfParams::default() };
            for t in train_random_forest(&x, &y, &p).unwrap().trees() {
                prop_assert!(t.depth() <= 100);
                prop_assert!(t.n_leaves() <= 250);
            }
        }
    }
}
