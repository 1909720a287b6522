use serde::{Deserialize, Serialize};

const TIE_TOL: f64 = 1e-12;

/// Binary classification tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Tree {
    Leaf {
        fog: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf { fog } => return *fog,
                Tree::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Weighted-Gini CART grown on the rows in `idx`.
    pub fn fit(x: &[Vec<f64>], y: &[bool], w: &[f64], idx: &[usize], max_depth: usize) -> Tree {
        grow(x, y, w, idx.to_vec(), max_depth)
    }
}

fn gini_mass(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t <= 0.0 {
        0.0
    } else {
        // total weight times Gini impurity
        t - (w0 * w0 + w1 * w1) / t
    }
}

fn class_weights(y: &[bool], w: &[f64], idx: &[usize]) -> (f64, f64) {
    idx.iter().fold((0.0, 0.0), |(a, b), &i| if y[i] { (a, b + w[i]) } else { (a + w[i], b) })
}

fn grow(x: &[Vec<f64>], y: &[bool], w: &[f64], idx: Vec<usize>, depth: usize) -> Tree {
    let (w0, w1) = class_weights(y, w, &idx);
    let leaf = Tree::Leaf { fog: w1 > w0 };
    if depth == 0 || w0 <= 0.0 || w1 <= 0.0 {
        return leaf;
    }
    let parent = gini_mass(w0, w1);
    let n_feat = x[idx[0]].len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for f in 0..n_feat {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let (mut l0, mut l1) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let i = order[k];
            if y[i] {
                l1 += w[i];
            } else {
                l0 += w[i];
            }
            let (a, b) = (x[i][f], x[order[k + 1]][f]);
            if a == b {
                continue;
            }
            let gain = parent - gini_mass(l0, l1) - gini_mass(w0 - l0, w1 - l1);
            // near-ties go to the earliest feature and threshold
            if best.is_none_or(|(g, _, _)| gain > g + TIE_TOL * (w0 + w1)) {
                best = Some((gain, f, a + 0.5 * (b - a)));
            }
        }
    }
    match best {
        Some((gain, feature, threshold)) if gain > 1e-12 * parent.max(f64::MIN_POSITIVE) => {
            let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
            Tree::Split {
                feature,
                threshold,
                left: Box::new(grow(x, y, w, li, depth - 1)),
                right: Box::new(grow(x, y, w, ri, depth - 1)),
            }
        }
        _ => leaf,
    }
}
