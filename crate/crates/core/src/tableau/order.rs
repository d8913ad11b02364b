//! Rooted-tree order conditions.
//!
//! A method has order `p` iff `Phi(t) = 1/gamma(t)` for every rooted tree `t`
//! with at most `p` vertices, where `Phi` is the elementary weight and `gamma`
//! the tree density.

use std::fmt;

use super::ButcherTableau;

/// Highest order for which conditions are generated.
pub const MAX_ORDER: usize = 8;
const RESIDUAL_TOL: f64 = 1e-10;

/// A rooted tree, stored as the sorted list of indices (into the enclosing
/// forest from [`rooted_trees`]) of the subtrees hanging off its root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    pub order: usize,
    pub children: Vec<usize>,
    pub density: u64,
}

/// All rooted trees with `1..=max_order` vertices, sorted by order. The
/// single-vertex tree is index 0.
pub fn rooted_trees(max_order: usize) -> Vec<RootedTree> {
    let mut trees = vec![RootedTree {
        order: 1,
        children: vec![],
        density: 1,
    }];
    for n in 2..=max_order {
        let mut forests = Vec::new();
        collect_forests(&trees, n - 1, 0, &mut Vec::new(), &mut forests);
        for children in forests {
            let density =
                n as u64 * children.iter().map(|&c| trees[c].density).product::<u64>();
            trees.push(RootedTree {
                order: n,
                children,
                density,
            });
        }
    }
    trees
}

/// Multisets of existing trees (as non-decreasing index lists) whose orders
/// sum to `remaining`.
fn collect_forests(
    trees: &[RootedTree],
    remaining: usize,
    min_index: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for idx in min_index..trees.len() {
        if trees[idx].order > remaining {
            continue;
        }
        current.push(idx);
        collect_forests(trees, remaining - trees[idx].order, idx, current, out);
        current.pop();
    }
}

struct Bracketed<'a>(&'a [RootedTree], usize);

impl fmt::Display for Bracketed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for &c in &self.0[self.1].children {
            write!(f, "{}", Bracketed(self.0, c))?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeResidual {
    pub order: usize,
    /// Bracket notation: `[]` is a single vertex, `[[][]]` a root with two leaves.
    pub tree: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub order: usize,
    pub passed: bool,
    pub residuals: Vec<TreeResidual>,
}

impl OrderCheck {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max)
    }
}

/// Checks every order condition through order `p` (at most 8).
pub fn verify_order_conditions(t: &ButcherTableau, p: usize) -> OrderCheck {
    let p = p.min(MAX_ORDER);
    let trees = rooted_trees(p);
    let s = t.stages();

    // g[t]_i = prod over children u of (alpha g[u])_i
    let mut stage_weights: Vec<Vec<f64>> = Vec::with_capacity(trees.len());
    let mut residuals = Vec::with_capacity(trees.len());
    for (idx, tree) in trees.iter().enumerate() {
        let mut g = vec![1.0; s];
        for &child in &tree.children {
            let inner = &stage_weights[child];
            for (i, gi) in g.iter_mut().enumerate() {
                *gi *= (0..s).map(|j| t.a(i, j) * inner[j]).sum::<f64>();
            }
        }
        let phi: f64 = t.b().iter().zip(&g).map(|(b, gi)| b * gi).sum();
        residuals.push(TreeResidual {
            order: tree.order,
            tree: Bracketed(&trees, idx).to_string(),
            residual: phi - 1.0 / tree.density as f64,
        });
        stage_weights.push(g);
    }
    let passed = residuals.iter().all(|r| r.residual.abs() <= RESIDUAL_TOL);
    OrderCheck {
        order: p,
        passed,
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::gauss_legendre;

    #[test]
    fn tree_counts() {
        // number of rooted trees with n vertices: 1, 1, 2, 4, 9, 20, 48, 115
        let trees = rooted_trees(8);
        let counts: Vec<usize> = (1..=8)
            .map(|n| trees.iter().filter(|t| t.order == n).count())
            .collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48, 115]);
    }

    #[test]
    fn densities_of_small_trees() {
        let trees = rooted_trees(3);
        let d: Vec<u64> = trees.iter().map(|t| t.density).collect();
        // [], [[]], [[][]], [[[]]]
        assert_eq!(d, vec![1, 2, 3, 6]);
    }

    fn classic_rk4() -> ButcherTableau {
        ButcherTableau::new(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
            4,
        )
        .unwrap()
    }

    #[test]
    fn classic_rk4_has_order_four() {
        assert!(verify_order_conditions(&classic_rk4(), 4).passed);
        assert!(!verify_order_conditions(&classic_rk4(), 5).passed);
    }

    #[test]
    fn midpoint_is_second_order_only() {
        let g1 = gauss_legendre(1).unwrap();
        assert!(verify_order_conditions(&g1, 2).passed);
        let third = verify_order_conditions(&g1, 3);
        assert!(!third.passed);
        // sum b c^2 = 1/4 against 1/3
        let bushy = third.residuals.iter().find(|r| r.tree == "[[][]]").unwrap();
        assert!((bushy.residual - (0.25 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn first_order_is_weight_sum() {
        let t = ButcherTableau::new(vec![vec![0.3]], vec![0.9], vec![0.3], 1).unwrap();
        assert!(!verify_order_conditions(&t, 1).passed);
        let t = ButcherTableau::new(vec![vec![0.3]], vec![1.0], vec![0.3], 1).unwrap();
        assert!(verify_order_conditions(&t, 1).passed);
    }

    #[test]
    fn gauss_orders_are_exactly_two_s() {
        for s in 1..=4 {
            let t = gauss_legendre(s).unwrap();
            assert!(verify_order_conditions(&t, 2 * s).passed, "s = {s}");
            if 2 * s < MAX_ORDER {
                assert!(!verify_order_conditions(&t, 2 * s + 1).passed, "s = {s}");
            }
        }
    }
}
