//! Measurement-outcome compression by sibling pruning.
//!
//! At every internal node, while the children's label matrices are linearly
//! dependent, one child can be deleted and the survivors rescaled without
//! changing anything the protocol implements. Writing the dependency as
//! `C^(s1) = sum_{s != s1} q_s C^(s)` and picking `s1` as the coefficient of
//! largest magnitude forces `|q_s| <= 1`, so every survivor's factor
//! `1 + q_s` is nonnegative and the rescaled labels stay PSD. Each surviving
//! sibling's entire subtree is multiplied by its factor, which keeps every
//! deeper measurement complete and leaves deeper dependency structure intact
//! (all of a node's descendants receive the same factor).
//!
//! Two modes share the loop:
//!
//! - **channel mode** ([`prune_tree`]) looks for dependencies among the
//!   children's labels. Rank-one leaves stay rank-one, so the pruned tree
//!   implements the same channel; every measurement ends with at most
//!   kappa^2 outcomes. All of this is verified after pruning, not assumed.
//! - **deterministic mode** ([`prune_tree_deterministic`]) looks for
//!   dependencies among the acting party's local operator factors, which are
//!   d_alpha x d_alpha, leaving at most d_alpha^2 outcomes per measurement.
//!   This preserves the protocol at the node-operator level (every branch of
//!   a deterministic protocol completes the task, and surviving branches are
//!   a subset of the originals) but not the implemented channel, so no
//!   channel check applies and label sums are verified on the operators.

use serde::Serialize;

use crate::channels::channel_distance;
use crate::error::{Error, Result};
use crate::numerics::{
    factor_across_cut, frob_distance, frobenius, is_psd, kernel_basis, re, CMatrix, Tolerances,
};
use crate::trees::{
    implemented_kraus, isometry_residual, node_operator_with, validate, LoccTree, NodeId,
    TreeNode,
};

/// Which dependency structure drives the pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneMode {
    /// Dependencies among sibling labels; preserves the implemented channel.
    Channel,
    /// Dependencies among the acting party's local factors; preserves a
    /// deterministic task.
    Deterministic,
}

/// One dependency elimination.
#[derive(Debug, Clone, Serialize)]
pub struct Removal {
    pub parent: NodeId,
    pub removed_child: NodeId,
    /// Surviving siblings with their dependency coefficients q_s.
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientEntry {
    pub sibling: NodeId,
    pub q: f64,
}

/// A subtree rescaling by `factor = 1 + q_s`.
#[derive(Debug, Clone, Serialize)]
pub struct Rescaling {
    pub node: NodeId,
    pub factor: f64,
}

/// Child count of one internal node before and after pruning.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeCount {
    pub node: NodeId,
    pub before: usize,
    pub after: usize,
}

/// Audit record of a pruning run.
#[derive(Debug, Clone, Serialize)]
pub struct PruneReport {
    pub mode: PruneMode,
    /// Number of dependency eliminations performed.
    pub iterations: usize,
    pub removed_subtrees: Vec<Removal>,
    pub rescalings: Vec<Rescaling>,
    /// Siblings dropped because their factor fell below the weight floor.
    pub dropped_zero_subtrees: Vec<NodeId>,
    /// Surviving internal nodes with child counts before/after.
    pub outcome_histogram: Vec<OutcomeCount>,
    /// Choi distance between input and output implemented channels
    /// (channel mode only).
    pub channel_residual: Option<f64>,
    /// `||sum_l v_l v_l^H - I_kappa||_F` on the output (channel mode only).
    pub isometry_residual: Option<f64>,
    /// Largest surviving measurement size.
    pub max_outcomes_after: usize,
}

/// Events recorded while pruning one sibling set.
#[derive(Debug, Clone, Default)]
pub struct SiblingEvents {
    pub removals: Vec<Removal>,
    pub rescalings: Vec<Rescaling>,
    pub dropped_zero: Vec<NodeId>,
}

/// Prune one sibling set by label dependencies until the surviving labels are
/// linearly independent; survivors still sum to `parent_c`.
pub fn prune_siblings(
    parent_c: &CMatrix,
    siblings: Vec<TreeNode>,
    tol: &Tolerances,
) -> Result<(Vec<TreeNode>, SiblingEvents)> {
    for s in &siblings {
        if !is_psd(&s.c_matrix, tol)? {
            return Err(Error::InvalidTree(format!(
                "sibling {} label is not PSD",
                s.id
            )));
        }
    }
    check_sibling_sum(parent_c, &siblings, tol)?;
    let keys: Vec<CMatrix> = siblings.iter().map(|s| s.c_matrix.clone()).collect();
    let parent_id = NodeId::MAX; // standalone call: no parent id available
    let (out, events) = prune_dependent_siblings(parent_id, siblings, keys, tol)?;
    check_sibling_sum(parent_c, &out, tol)?;
    Ok((out, events))
}

fn check_sibling_sum(parent_c: &CMatrix, siblings: &[TreeNode], tol: &Tolerances) -> Result<()> {
    let mut sum = CMatrix::zeros(parent_c.nrows(), parent_c.ncols());
    for s in siblings {
        if s.c_matrix.shape() != parent_c.shape() {
            return Err(Error::DimensionMismatch(
                "sibling label shape differs from parent".into(),
            ));
        }
        sum += &s.c_matrix;
    }
    let residual = frob_distance(&sum, parent_c);
    if residual > tol.tol_eq * frobenius(parent_c).max(1.0) {
        return Err(Error::InvalidTree(format!(
            "sibling labels sum away from parent: residual {residual:.3e}"
        )));
    }
    Ok(())
}

/// Core elimination loop. `keys` are the matrices whose dependencies are
/// sought (labels in channel mode, local factors in deterministic mode) and
/// are scaled in lockstep with the siblings they describe.
fn prune_dependent_siblings(
    parent: NodeId,
    mut siblings: Vec<TreeNode>,
    mut keys: Vec<CMatrix>,
    tol: &Tolerances,
) -> Result<(Vec<TreeNode>, SiblingEvents)> {
    let mut events = SiblingEvents::default();
    loop {
        let kernel = kernel_basis(&keys, tol)?;
        let Some(a) = kernel.first() else { break };
        if a.iter().any(|z| z.im.abs() > 1e-9) {
            return Err(Error::NumericalFailure(
                "dependency coefficients came out complex for Hermitian inputs".into(),
            ));
        }
        // Judicious choice: s1 = argmax |a_s| guarantees |q_s| <= 1; ties go
        // to the lowest node id for determinism.
        let mut s1 = 0;
        for s in 1..siblings.len() {
            let (c, b) = (a[s].re.abs(), a[s1].re.abs());
            if c > b + 1e-15 || ((c - b).abs() <= 1e-15 && siblings[s].id < siblings[s1].id) {
                s1 = s;
            }
        }
        let pivot = a[s1].re;
        let removed = siblings.remove(s1);
        keys.remove(s1);

        let mut coefficients = Vec::with_capacity(siblings.len());
        let mut factors = Vec::with_capacity(siblings.len());
        for (s, sibling) in siblings.iter().enumerate() {
            let q = -a[if s < s1 { s } else { s + 1 }].re / pivot;
            let factor = (1.0 + q).max(0.0); // >= 0 up to roundoff since |q| <= 1
            coefficients.push(CoefficientEntry {
                sibling: sibling.id,
                q,
            });
            factors.push(factor);
        }
        events.removals.push(Removal {
            parent,
            removed_child: removed.id,
            coefficients,
        });

        let mut surviving = Vec::with_capacity(siblings.len());
        let mut surviving_keys = Vec::with_capacity(keys.len());
        for ((mut sibling, key), factor) in
            siblings.into_iter().zip(keys.into_iter()).zip(factors)
        {
            if factor <= tol.tol_zero {
                events.dropped_zero.push(sibling.id);
                continue;
            }
            sibling.scale_subtree(factor);
            events.rescalings.push(Rescaling {
                node: sibling.id,
                factor,
            });
            surviving_keys.push(key * re(factor));
            surviving.push(sibling);
        }
        siblings = surviving;
        keys = surviving_keys;
    }
    Ok((siblings, events))
}

/// Channel-preserving compression: prune label dependencies at every internal
/// node, parent before descendants, then verify every claim about the result.
///
/// Post-conditions checked at runtime: the output validates, every
/// measurement has at most kappa^2 outcomes, the round count did not grow,
/// the implemented channel is unchanged (Choi distance within `tol_eq`), and
/// the leaf vectors still form an isometry.
pub fn prune_tree(tree: &LoccTree, tol: &Tolerances) -> Result<(LoccTree, PruneReport)> {
    let pre = validate(tree, tol);
    if !pre.all_passed() {
        return Err(Error::InvalidTree(pre.summary()));
    }
    let input_channel = implemented_kraus(tree, tol)?;
    let before_counts = child_counts(tree.root());
    let before_rounds = tree.round_count();
    let before_leaf_ids = leaf_ids(tree.root());

    let (rep, mut root) = tree.clone().into_parts();
    let mut events = SiblingEvents::default();
    // Breadth-first: a node's own prune only rescales whole child subtrees,
    // so deeper sibling sets keep their dependency structure intact.
    let mut level: Vec<&mut TreeNode> = vec![&mut root];
    while !level.is_empty() {
        let mut next: Vec<&mut TreeNode> = Vec::new();
        for node in level {
            if node.is_leaf() {
                continue;
            }
            let parent_id = node.id;
            let parent_c = node.c_matrix.clone();
            let children = std::mem::take(&mut node.children);
            check_sibling_sum(&parent_c, &children, tol)?;
            let keys: Vec<CMatrix> = children.iter().map(|c| c.c_matrix.clone()).collect();
            let (kept, ev) = prune_dependent_siblings(parent_id, children, keys, tol)?;
            node.children = kept;
            events.removals.extend(ev.removals);
            events.rescalings.extend(ev.rescalings);
            events.dropped_zero.extend(ev.dropped_zero);
            next.extend(node.children.iter_mut());
        }
        level = next;
    }

    let pruned = LoccTree::new(rep, root)?;

    // Verify, never assume.
    let post = validate(&pruned, tol);
    if !post.all_passed() {
        return Err(Error::NumericalFailure(format!(
            "pruned tree fails validation ({})",
            post.summary()
        )));
    }
    let kappa_sq = pruned.rep().kappa().pow(2);
    let after_counts = child_counts(pruned.root());
    let max_outcomes_after = after_counts.iter().map(|&(_, n)| n).max().unwrap_or(0);
    if max_outcomes_after > kappa_sq {
        return Err(Error::BoundViolation(format!(
            "a measurement kept {max_outcomes_after} outcomes, above kappa^2 = {kappa_sq}"
        )));
    }
    if pruned.round_count() > before_rounds {
        return Err(Error::NumericalFailure(
            "round count grew while pruning".into(),
        ));
    }
    let after_leaf_ids = leaf_ids(pruned.root());
    if !after_leaf_ids.iter().all(|id| before_leaf_ids.contains(id)) {
        return Err(Error::NumericalFailure(
            "pruned tree contains leaves the input did not have".into(),
        ));
    }
    let output_channel = implemented_kraus(&pruned, tol)?;
    let channel_residual = channel_distance(&input_channel, &output_channel)?;
    let iso_residual = isometry_residual(&pruned, tol)?;
    if channel_residual > tol.tol_eq {
        return Err(Error::NumericalFailure(format!(
            "pruning drifted the channel: Choi residual {channel_residual:.3e}"
        )));
    }
    if iso_residual > tol.tol_eq {
        return Err(Error::NumericalFailure(format!(
            "pruned leaf vectors are not an isometry: residual {iso_residual:.3e}"
        )));
    }

    let report = PruneReport {
        mode: PruneMode::Channel,
        iterations: events.removals.len(),
        removed_subtrees: events.removals,
        rescalings: events.rescalings,
        dropped_zero_subtrees: events.dropped_zero,
        outcome_histogram: histogram(&before_counts, &after_counts),
        channel_residual: Some(channel_residual),
        isometry_residual: Some(iso_residual),
        max_outcomes_after,
    };
    Ok((pruned, report))
}

/// Task-preserving compression: prune dependencies among the acting party's
/// local factors, leaving at most d_alpha^2 outcomes per measurement.
///
/// The input must satisfy conditions 1-4 (rank-one leaves are not required).
/// The output satisfies conditions 1, 2 and 4 with measurement completeness
/// holding on the node operators; label sums are not preserved whenever the
/// channel has label dependencies (chi < kappa^2), which is exactly the
/// freedom this mode exploits. No channel-equality check applies.
pub fn prune_tree_deterministic(
    tree: &LoccTree,
    tol: &Tolerances,
) -> Result<(LoccTree, PruneReport)> {
    let pre = validate(tree, tol);
    if !pre.items_1_to_4_passed() {
        return Err(Error::InvalidTree(pre.summary()));
    }
    let dims = tree.rep().channel().dims().to_vec();
    let products = tree.rep().kraus_products();
    let before_counts = child_counts(tree.root());
    let before_rounds = tree.round_count();
    let before_leaf_ids = leaf_ids(tree.root());

    let (rep, mut root) = tree.clone().into_parts();
    let mut events = SiblingEvents::default();
    let mut level: Vec<&mut TreeNode> = vec![&mut root];
    while !level.is_empty() {
        let mut next: Vec<&mut TreeNode> = Vec::new();
        for node in level {
            if node.is_leaf() {
                continue;
            }
            let parent_id = node.id;
            let party = node.acting_party.expect("internal node");
            let children = std::mem::take(&mut node.children);
            // Keys are the children's local factors on the acting party.
            let mut keys = Vec::with_capacity(children.len());
            for child in &children {
                let e = node_operator_with(&rep, &products, &child.c_matrix)?;
                match factor_across_cut(&e, party, &dims, tol)? {
                    Some((local, _)) => keys.push(local),
                    None => {
                        return Err(Error::FactorizationFailed {
                            node: child.id,
                            party,
                        })
                    }
                }
            }
            let (kept, ev) = prune_dependent_siblings(parent_id, children, keys, tol)?;
            node.children = kept;
            events.removals.extend(ev.removals);
            events.rescalings.extend(ev.rescalings);
            events.dropped_zero.extend(ev.dropped_zero);
            next.extend(node.children.iter_mut());
        }
        level = next;
    }

    let pruned = LoccTree::new(rep, root)?;
    let post = validate(&pruned, tol);
    if !post.deterministic_protocol_passed() {
        return Err(Error::NumericalFailure(format!(
            "deterministically pruned tree lost protocol validity ({})",
            post.summary()
        )));
    }
    let after_counts = child_counts(pruned.root());
    let max_outcomes_after = after_counts.iter().map(|&(_, n)| n).max().unwrap_or(0);
    // d_alpha^2 per acting party
    let mut bound_violation = None;
    let mut stack = vec![pruned.root()];
    while let Some(node) = stack.pop() {
        if let Some(party) = node.acting_party {
            let bound = dims[party] * dims[party];
            if node.children.len() > bound {
                bound_violation = Some((node.id, node.children.len(), bound));
            }
            stack.extend(node.children.iter());
        }
    }
    if let Some((id, n, bound)) = bound_violation {
        return Err(Error::BoundViolation(format!(
            "node {id} kept {n} outcomes, above d_alpha^2 = {bound}"
        )));
    }
    if pruned.round_count() > before_rounds {
        return Err(Error::NumericalFailure(
            "round count grew while pruning".into(),
        ));
    }
    let after_leaf_ids = leaf_ids(pruned.root());
    if !after_leaf_ids.iter().all(|id| before_leaf_ids.contains(id)) {
        return Err(Error::NumericalFailure(
            "pruned tree contains leaves the input did not have".into(),
        ));
    }

    let report = PruneReport {
        mode: PruneMode::Deterministic,
        iterations: events.removals.len(),
        removed_subtrees: events.removals,
        rescalings: events.rescalings,
        dropped_zero_subtrees: events.dropped_zero,
        outcome_histogram: histogram(&before_counts, &after_counts),
        channel_residual: None,
        isometry_residual: None,
        max_outcomes_after,
    };
    Ok((pruned, report))
}

fn child_counts(root: &TreeNode) -> Vec<(NodeId, usize)> {
    let mut out = Vec::new();
    root.walk(&mut |node| {
        if !node.is_leaf() {
            out.push((node.id, node.children.len()));
        }
    });
    out
}

fn leaf_ids(root: &TreeNode) -> Vec<NodeId> {
    let mut out = Vec::new();
    root.walk(&mut |node| {
        if node.is_leaf() {
            out.push(node.id);
        }
    });
    out
}

fn histogram(before: &[(NodeId, usize)], after: &[(NodeId, usize)]) -> Vec<OutcomeCount> {
    after
        .iter()
        .map(|&(id, n_after)| OutcomeCount {
            node: id,
            before: before
                .iter()
                .find(|&&(b, _)| b == id)
                .map(|&(_, n)| n)
                .unwrap_or(n_after),
            after: n_after,
        })
        .collect()
}
