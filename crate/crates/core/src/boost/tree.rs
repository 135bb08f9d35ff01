//! Regression trees fit to gradient/hessian pairs with exact greedy split
//! search over midpoint thresholds.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    /// Flat node array; index 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exact greedy search: best (feature, midpoint threshold) by Newton gain
///   gain = G_L^2/H_L + G_R^2/H_R - G^2/H,
/// requiring at least `min_leaf` rows on each side. Ties break toward the
/// lower feature index, then the lower threshold.
pub fn best_split(
    x: &DMatrix<f64>,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let total_g: f64 = rows.iter().map(|&i| grad[i]).sum();
    let total_h: f64 = rows.iter().map(|&i| hess[i]).sum();
    let parent_score = total_g * total_g / total_h.max(1e-12);
    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<usize> = rows.to_vec();

    for feature in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, feature)].total_cmp(&x[(b, feature)]));
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for k in 0..order.len().saturating_sub(1) {
            let i = order[k];
            g_left += grad[i];
            h_left += hess[i];
            let here = x[(i, feature)];
            let next = x[(order[k + 1], feature)];
            if here == next {
                continue;
            }
            if k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                continue;
            }
            let threshold = here + (next - here) / 2.0;
            let g_right = total_g - g_left;
            let h_right = total_h - h_left;
            let gain = g_left * g_left / h_left.max(1e-12)
                + g_right * g_right / h_right.max(1e-12)
                - parent_score;
            let better = match best {
                None => gain > 1e-12,
                Some(b) => gain > b.gain + 1e-12,
            };
            if better {
                best = Some(SplitChoice { feature, threshold, gain });
            }
        }
    }
    best
}

fn leaf_value(rows: &[usize], grad: &[f64], hess: &[f64]) -> f64 {
    let g: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h: f64 = rows.iter().map(|&i| hess[i]).sum();
    -g / h.max(1e-12)
}

/// Fit one regression tree to the given gradient/hessian pairs.
pub fn fit_tree(
    x: &DMatrix<f64>,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Tree {
    let mut tree = Tree::default();
    tree.nodes.push(Node::Leaf { value: 0.0 });
    grow(&mut tree, 0, x, rows, grad, hess, max_depth, min_leaf);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow(
    tree: &mut Tree,
    node: usize,
    x: &DMatrix<f64>,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    depth_left: usize,
    min_leaf: usize,
) {
    if depth_left == 0 || rows.len() < 2 * min_leaf {
        tree.nodes[node] = Node::Leaf { value: leaf_value(rows, grad, hess) };
        return;
    }
    let Some(split) = best_split(x, rows, grad, hess, min_leaf) else {
        tree.nodes[node] = Node::Leaf { value: leaf_value(rows, grad, hess) };
        return;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| x[(i, split.feature)] <= split.threshold);
    let left = tree.nodes.len();
    tree.nodes.push(Node::Leaf { value: 0.0 });
    let right = tree.nodes.len();
    tree.nodes.push(Node::Leaf { value: 0.0 });
    tree.nodes[node] =
        Node::Split { feature: split.feature, threshold: split.threshold, left, right };
    grow(tree, left, x, &left_rows, grad, hess, depth_left - 1, min_leaf);
    grow(tree, right, x, &right_rows, grad, hess, depth_left - 1, min_leaf);
}
