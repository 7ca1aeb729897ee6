use serde::{Deserialize, Serialize};

use crate::features::NUM_FEATURES;
use crate::scalar::Scalar;

/// Smallest hessian mass a child may carry.
const MIN_CHILD_HESSIAN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "snake_case")]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

/// A regression tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[T; NUM_FEATURES]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Depth of the deepest leaf; a lone root leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks child indices and split features.
    pub fn is_well_formed(&self) -> bool {
        let n = self.nodes.len();
        self.nodes.iter().enumerate().all(|(i, node)| match node {
            Node::Leaf { value } => value.is_finite(),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => *feature < NUM_FEATURES && threshold.is_finite() && *left > i && *right > i && *left < n && *right < n,
        })
    }
}

pub(crate) struct TreeParams<T> {
    pub max_depth: usize,
    pub num_leaves: usize,
    pub min_samples_leaf: usize,
    pub min_split_gain: T,
    pub l1: T,
    pub l2: T,
    pub learning_rate: T,
}

impl<T: Scalar> TreeParams<T> {
    fn threshold_l1(&self, g: T) -> T {
        let a = g.abs() - self.l1;
        if a > T::zero() {
            a * g.signum()
        } else {
            T::zero()
        }
    }

    fn score(&self, g: T, h: T) -> T {
        let t = self.threshold_l1(g);
        t * t / (h + self.l2)
    }

    fn leaf_value(&self, g: T, h: T) -> T {
        -self.threshold_l1(g) / (h + self.l2) * self.learning_rate
    }
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

struct OpenLeaf<T> {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    g: T,
    h: T,
    split: Option<Candidate<T>>,
}

fn sums<T: Scalar>(rows: &[usize], grad: &[T], hess: &[T]) -> (T, T) {
    rows.iter()
        .fold((T::zero(), T::zero()), |(g, h), &r| (g + grad[r], h + hess[r]))
}

#[allow(clippy::too_many_arguments)]
fn best_split<T: Scalar>(
    x: &[[T; NUM_FEATURES]],
    grad: &[T],
    hess: &[T],
    rows: &[usize],
    g: T,
    h: T,
    features: &[usize],
    p: &TreeParams<T>,
) -> Option<Candidate<T>> {
    let n = rows.len();
    if n < 2 * p.min_samples_leaf {
        return None;
    }
    let parent = p.score(g, h);
    let min_h = T::of(MIN_CHILD_HESSIAN);
    let mut best: Option<Candidate<T>> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features").then(a.cmp(&b)));
        let (mut gl, mut hl) = (T::zero(), T::zero());
        for i in 0..n - 1 {
            let r = sorted[i];
            gl = gl + grad[r];
            hl = hl + hess[r];
            let (lo, hi) = (x[r][f], x[sorted[i + 1]][f]);
            if lo == hi {
                continue;
            }
            let left = i + 1;
            if left < p.min_samples_leaf || n - left < p.min_samples_leaf {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < min_h || hr < min_h {
                continue;
            }
            let gain = p.score(gl, hl) + p.score(gr, hr) - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = (lo + hi) * T::half();
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > T::zero() && b.gain >= p.min_split_gain)
}

/// Grows one tree leaf-wise: the open leaf with the largest gain splits next
/// (earliest leaf on ties) until `num_leaves` is reached or nothing splits.
/// `rows` must be sorted ascending.
pub(crate) fn fit_tree<T: Scalar>(
    x: &[[T; NUM_FEATURES]],
    grad: &[T],
    hess: &[T],
    rows: Vec<usize>,
    features: &[usize],
    p: &TreeParams<T>,
) -> Tree<T> {
    let mut nodes = vec![Node::Leaf { value: T::zero() }];
    let make = |node: usize, rows: Vec<usize>, depth: usize| {
        let (g, h) = sums(&rows, grad, hess);
        let split = if depth < p.max_depth {
            best_split(x, grad, hess, &rows, g, h, features, p)
        } else {
            None
        };
        OpenLeaf {
            node,
            rows,
            depth,
            g,
            h,
            split,
        }
    };
    let mut open = vec![make(0, rows, 0)];
    let mut leaves = 1;
    while leaves < p.num_leaves {
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(c) = &leaf.split {
                if pick.is_none_or(|j| c.gain > open[j].split.as_ref().expect("picked leaf has a split").gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let leaf = open.remove(i);
        let c = leaf.split.expect("picked leaf has a split");
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.iter().partition(|&&r| x[r][c.feature] <= c.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: T::zero() });
        nodes.push(Node::Leaf { value: T::zero() });
        nodes[leaf.node] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
        };
        open.insert(i, make(right, r_rows, leaf.depth + 1));
        open.insert(i, make(left, l_rows, leaf.depth + 1));
        leaves += 1;
    }
    for leaf in open {
        nodes[leaf.node] = Node::Leaf {
            value: p.leaf_value(leaf.g, leaf.h),
        };
    }
    Tree { nodes }
}
