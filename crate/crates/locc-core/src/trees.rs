//! LOCC protocol trees and their structural validator.
//!
//! A protocol tree represents one LOCC implementation of a channel: the root
//! is the situation before any party has acted, each internal node records a
//! local measurement by one party, and each child is one outcome of that
//! measurement. Every node carries a kappa x kappa PSD matrix labeling the
//! node's accumulated operator E_n = sum_{i,i'} C_{ii'} K_i^H K_{i'} in the
//! channel's minimal Kraus basis.
//!
//! The validator checks six conditions on a finite tree:
//!
//! 1. every label is PSD and every node operator is a product across all
//!    single-party cuts;
//! 2. the root label is the identity;
//! 3. the children of each node sum to their parent;
//! 4. the children of each node differ from it in a single party's local
//!    factor, sharing one rest factor (compared by direction, since scale
//!    sits in the local factor);
//! 5a. every leaf label has rank one;
//! 6. the leaf labels sum to the root label.
//!
//! A report also carries the operator-level sums `||sum_s E_s - E_n||` as an
//! auxiliary residual: deterministic-task pruning preserves the protocol at
//! the operator level without keeping label sums exact, and is judged
//! against that residual instead of item 3.

use serde::Serialize;

use crate::channels::{Channel, MinimalRep};
use crate::error::{Error, Result};
use crate::numerics::{
    self, factor_across_cut, frob_distance, frobenius, hermitian_deviation, identity,
    numerical_rank, CMatrix, CVector, Tolerances,
};

/// Node identifier, unique within a tree.
pub type NodeId = u64;

/// One node of a protocol tree.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: NodeId,
    /// kappa x kappa PSD label.
    pub c_matrix: CMatrix,
    /// Party whose measurement produces the children; present iff internal.
    pub acting_party: Option<usize>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    /// Leaf node.
    pub fn leaf(id: NodeId, c_matrix: CMatrix) -> Self {
        Self {
            id,
            c_matrix,
            acting_party: None,
            children: Vec::new(),
        }
    }

    /// Internal node measured by `party`.
    pub fn internal(id: NodeId, c_matrix: CMatrix, party: usize, children: Vec<TreeNode>) -> Self {
        Self {
            id,
            c_matrix,
            acting_party: Some(party),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Multiply every label in the subtree by a real factor.
    pub fn scale_subtree(&mut self, factor: f64) {
        self.c_matrix *= numerics::re(factor);
        for child in &mut self.children {
            child.scale_subtree(factor);
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a TreeNode)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }

    /// Depth of the subtree in edges.
    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a TreeNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for child in &self.children {
                child.collect_leaves(out);
            }
        }
    }
}

/// A protocol tree bound to the minimal representation of its channel.
#[derive(Debug, Clone)]
pub struct LoccTree {
    rep: MinimalRep,
    root: TreeNode,
}

impl LoccTree {
    /// Bind a tree to a representation, enforcing the structural rules:
    /// square kappa-sized labels, unique ids, acting parties in range, and
    /// `leaf <=> no children <=> no acting party`.
    ///
    /// Semantic conditions (PSD labels, sums, products) are deliberately not
    /// enforced here; [`validate`] reports on them so that broken trees can
    /// be represented and diagnosed.
    pub fn new(rep: MinimalRep, root: TreeNode) -> Result<Self> {
        let kappa = rep.kappa();
        let parties = rep.channel().dims().len();
        let mut ids = std::collections::HashSet::new();
        let mut problem = None;
        root.walk(&mut |node| {
            if problem.is_some() {
                return;
            }
            if node.c_matrix.nrows() != kappa || node.c_matrix.ncols() != kappa {
                problem = Some(Error::KappaMismatch {
                    got: node.c_matrix.nrows(),
                    kappa,
                });
                return;
            }
            if !ids.insert(node.id) {
                problem = Some(Error::MalformedTree(format!("duplicate node id {}", node.id)));
                return;
            }
            match node.acting_party {
                Some(p) if node.children.is_empty() => {
                    problem = Some(Error::MalformedTree(format!(
                        "leaf {} carries acting party {p}",
                        node.id
                    )));
                }
                None if !node.children.is_empty() => {
                    problem = Some(Error::MalformedTree(format!(
                        "internal node {} has no acting party",
                        node.id
                    )));
                }
                Some(p) if p >= parties => {
                    problem = Some(Error::MalformedTree(format!(
                        "node {} acts on party {p} of {parties}",
                        node.id
                    )));
                }
                _ => {}
            }
        });
        match problem {
            Some(e) => Err(e),
            None => Ok(Self { rep, root }),
        }
    }

    pub fn rep(&self) -> &MinimalRep {
        &self.rep
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// Consume the tree, returning its parts.
    pub fn into_parts(self) -> (MinimalRep, TreeNode) {
        (self.rep, self.root)
    }

    pub fn find(&self, id: NodeId) -> Option<&TreeNode> {
        let mut found = None;
        self.root.walk(&mut |node| {
            if node.id == id {
                found = Some(node);
            }
        });
        found
    }

    /// All leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// All node ids in pre-order.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.root.walk(&mut |node| out.push(node.id));
        out
    }

    /// Maximum root-to-leaf depth counted in measurements.
    pub fn round_count(&self) -> usize {
        self.root.depth()
    }

    /// The node's accumulated operator E_n = sum_{i,i'} C_{ii'} K_i^H K_{i'}.
    pub fn node_operator(&self, node: &TreeNode) -> Result<CMatrix> {
        let products = self.rep.kraus_products();
        node_operator_with(&self.rep, &products, &node.c_matrix)
    }
}

/// E = sum_{i,i'} C_{ii'} K_i^H K_{i'} given precomputed products.
pub(crate) fn node_operator_with(
    rep: &MinimalRep,
    products: &[CMatrix],
    c: &CMatrix,
) -> Result<CMatrix> {
    let kappa = rep.kappa();
    if c.nrows() != kappa || c.ncols() != kappa {
        return Err(Error::KappaMismatch {
            got: c.nrows(),
            kappa,
        });
    }
    let total = rep.channel().total_dim();
    let mut out = CMatrix::zeros(total, total);
    for i in 0..kappa {
        for j in 0..kappa {
            let w = c[(i, j)];
            if w.norm_sqr() != 0.0 {
                out += &products[i * kappa + j] * w;
            }
        }
    }
    Ok(out)
}

/// Pass/fail record for one validated condition.
#[derive(Debug, Clone, Serialize)]
pub struct ItemReport {
    pub passed: bool,
    pub max_residual: f64,
    /// Offending node ids with their residuals.
    pub failures: Vec<NodeFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeFailure {
    pub node: NodeId,
    pub residual: f64,
}

impl ItemReport {
    fn new() -> Self {
        Self {
            passed: true,
            max_residual: 0.0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, node: NodeId, residual: f64, ok: bool) {
        self.max_residual = self.max_residual.max(residual);
        if !ok {
            self.passed = false;
            self.failures.push(NodeFailure { node, residual });
        }
    }
}

/// Per-condition outcome of [`validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// PSD labels and product node operators.
    pub item1_psd_product: ItemReport,
    /// Root label equals the identity.
    pub item2_root_identity: ItemReport,
    /// Children's labels sum to their parent's.
    pub item3_child_sums: ItemReport,
    /// One acting party per measurement with a shared rest factor.
    pub item4_shared_factor: ItemReport,
    /// Leaf labels have rank one.
    pub item5a_leaf_rank_one: ItemReport,
    /// Leaf labels sum to the root label.
    pub item6_leaf_sum: ItemReport,
    /// Auxiliary: operator-level measurement completeness
    /// `||sum_s E_s - E_n||_F`, the residual deterministic-task pruning is
    /// judged against.
    pub operator_sums: ItemReport,
}

impl ValidationReport {
    /// All six conditions hold.
    pub fn all_passed(&self) -> bool {
        self.item1_psd_product.passed
            && self.item2_root_identity.passed
            && self.item3_child_sums.passed
            && self.item4_shared_factor.passed
            && self.item5a_leaf_rank_one.passed
            && self.item6_leaf_sum.passed
    }

    /// Conditions 1-4 hold (the precondition of deterministic-task pruning,
    /// which does not need rank-one leaves).
    pub fn items_1_to_4_passed(&self) -> bool {
        self.item1_psd_product.passed
            && self.item2_root_identity.passed
            && self.item3_child_sums.passed
            && self.item4_shared_factor.passed
    }

    /// Conditions 1, 2 and 4 with measurement completeness checked on the
    /// node operators instead of the labels. Label sums cannot survive
    /// operator-level pruning when the channel has label dependencies
    /// (chi < kappa^2), but the protocol itself remains exactly complete.
    pub fn deterministic_protocol_passed(&self) -> bool {
        self.item1_psd_product.passed
            && self.item2_root_identity.passed
            && self.item4_shared_factor.passed
            && self.operator_sums.passed
    }

    /// Short summary such as "pass" or "fail: item3, item5a".
    pub fn summary(&self) -> String {
        if self.all_passed() {
            return "pass".into();
        }
        let mut failed = Vec::new();
        if !self.item1_psd_product.passed {
            failed.push("item1");
        }
        if !self.item2_root_identity.passed {
            failed.push("item2");
        }
        if !self.item3_child_sums.passed {
            failed.push("item3");
        }
        if !self.item4_shared_factor.passed {
            failed.push("item4");
        }
        if !self.item5a_leaf_rank_one.passed {
            failed.push("item5a");
        }
        if !self.item6_leaf_sum.passed {
            failed.push("item6");
        }
        format!("fail: {}", failed.join(", "))
    }
}

/// Check every condition on a finite tree. Semantic failures are reported,
/// never raised.
pub fn validate(tree: &LoccTree, tol: &Tolerances) -> ValidationReport {
    let rep = tree.rep();
    let dims = rep.channel().dims().to_vec();
    let parties = dims.len();
    let products = rep.kraus_products();

    let mut item1 = ItemReport::new();
    let mut item2 = ItemReport::new();
    let mut item3 = ItemReport::new();
    let mut item4 = ItemReport::new();
    let mut item5a = ItemReport::new();
    let mut item6 = ItemReport::new();
    let mut op_sums = ItemReport::new();

    // Item 2: root label vs identity.
    {
        let kappa = rep.kappa();
        let residual = frob_distance(&tree.root().c_matrix, &identity(kappa));
        item2.record(
            tree.root().id,
            residual,
            residual <= tol.tol_eq * (kappa as f64).sqrt().max(1.0),
        );
    }

    let mut nodes: Vec<&TreeNode> = Vec::new();
    tree.root().walk(&mut |n| nodes.push(n));

    // Node operators and their per-party factors, computed once.
    let mut operators: std::collections::HashMap<NodeId, CMatrix> = Default::default();
    let mut factors: std::collections::HashMap<(NodeId, usize), Option<(CMatrix, CMatrix)>> =
        Default::default();
    for node in &nodes {
        let e = node_operator_with(rep, &products, &node.c_matrix)
            .expect("structure enforced at construction");
        for party in 0..parties {
            let f = factor_across_cut(&e, party, &dims, tol).expect("dims consistent");
            factors.insert((node.id, party), f);
        }
        operators.insert(node.id, e);
    }

    for node in &nodes {
        let e = &operators[&node.id];
        let e_norm = frobenius(e);

        // Item 1: PSD label, product operator across every cut.
        let psd_residual = hermitian_deviation(&node.c_matrix)
            .max((-numerics::min_eigenvalue(&node.c_matrix)).max(0.0));
        let psd_ok = numerics::is_psd(&node.c_matrix, tol).unwrap_or(false);
        let product_ok = e_norm <= tol.tol_zero
            || (0..parties).all(|p| factors[&(node.id, p)].is_some());
        item1.record(
            node.id,
            psd_residual,
            psd_ok && product_ok,
        );

        // Item 5a: leaves have rank-one labels.
        if node.is_leaf() {
            let rank = numerical_rank(&node.c_matrix, tol);
            item5a.record(node.id, rank as f64, rank == 1);
        }

        if node.is_leaf() {
            continue;
        }
        let party = node.acting_party.expect("internal node has acting party");

        // Item 3: children sum to parent (labels).
        let mut c_sum = CMatrix::zeros(node.c_matrix.nrows(), node.c_matrix.ncols());
        for child in &node.children {
            c_sum += &child.c_matrix;
        }
        let c_residual = frob_distance(&c_sum, &node.c_matrix);
        item3.record(
            node.id,
            c_residual,
            c_residual <= tol.tol_eq * frobenius(&node.c_matrix).max(1.0),
        );

        // Operator-level measurement completeness.
        let mut e_sum = CMatrix::zeros(e.nrows(), e.ncols());
        for child in &node.children {
            e_sum += &operators[&child.id];
        }
        let e_residual = frob_distance(&e_sum, e);
        op_sums.record(node.id, e_residual, e_residual <= tol.tol_eq * e_norm.max(1.0));

        // Item 4: every child shares the parent's rest factor across the
        // acting party's cut. Scale sits in the local factor, so rest factors
        // are compared by direction.
        let parent_factor = factors[&(node.id, party)].as_ref();
        let mut worst = 0.0f64;
        let mut ok = parent_factor.is_some() || e_norm <= tol.tol_zero;
        if let Some((_, parent_rest)) = parent_factor {
            let parent_dir = parent_rest.unscale(frobenius(parent_rest));
            for child in &node.children {
                let child_e_norm = frobenius(&operators[&child.id]);
                if child_e_norm <= tol.tol_zero {
                    continue; // zero-weight outcome constrains nothing
                }
                match factors[&(child.id, party)].as_ref() {
                    Some((_, rest)) => {
                        let dir = rest.unscale(frobenius(rest));
                        let align = numerics::hs_inner(&parent_dir, &dir).re;
                        worst = worst.max(1.0 - align);
                        if align < 1.0 - tol.tol_eq {
                            ok = false;
                        }
                    }
                    None => {
                        worst = worst.max(1.0);
                        ok = false;
                    }
                }
            }
        }
        item4.record(node.id, worst, ok);
    }

    // Item 6: leaves sum to the root label.
    {
        let kappa = rep.kappa();
        let mut leaf_sum = CMatrix::zeros(kappa, kappa);
        for leaf in tree.leaves() {
            leaf_sum += &leaf.c_matrix;
        }
        let residual = frob_distance(&leaf_sum, &tree.root().c_matrix);
        item6.record(
            tree.root().id,
            residual,
            residual <= tol.tol_eq * frobenius(&tree.root().c_matrix).max(1.0),
        );
    }

    ValidationReport {
        item1_psd_product: item1,
        item2_root_identity: item2,
        item3_child_sums: item3,
        item4_shared_factor: item4,
        item5a_leaf_rank_one: item5a,
        item6_leaf_sum: item6,
        operator_sums: op_sums,
    }
}

/// Extract the leaf vectors v_l with C^(l) = v_l v_l^H.
///
/// Each vector comes from the dominant eigenpair of the leaf label; the
/// global phase is fixed by making the largest-magnitude entry real positive
/// so serialization round-trips deterministically. Fails on any leaf whose
/// label has rank above one.
pub fn leaf_vectors(tree: &LoccTree, tol: &Tolerances) -> Result<Vec<(NodeId, CVector)>> {
    let mut out = Vec::new();
    for leaf in tree.leaves() {
        let rank = numerical_rank(&leaf.c_matrix, tol);
        if rank != 1 {
            return Err(Error::InvalidTree(format!(
                "leaf {} has label rank {rank}, expected 1",
                leaf.id
            )));
        }
        let (values, vectors) = numerics::eigh(&leaf.c_matrix);
        out.push((leaf.id, vectors[0].scale(values[0].sqrt())));
    }
    Ok(out)
}

/// The channel this tree implements: one Kraus operator per leaf,
/// K_l = sum_j conj(v_l)_j K_j.
///
/// The conjugation makes K_l^H K_l = sum_{i,i'} C^(l)_{ii'} K_i^H K_{i'}
/// exact for C^(l) = v_l v_l^H; completeness then follows from the leaf sum
/// condition.
pub fn implemented_kraus(tree: &LoccTree, tol: &Tolerances) -> Result<Channel> {
    let vectors = leaf_vectors(tree, tol)?;
    let rep = tree.rep();
    let total = rep.channel().total_dim();
    let mut kraus = Vec::with_capacity(vectors.len());
    for (_, v) in &vectors {
        let mut k = CMatrix::zeros(total, total);
        for (j, kj) in rep.kraus().iter().enumerate() {
            k += kj * v[j].conj();
        }
        kraus.push(k);
    }
    Channel::with_tolerance(rep.channel().dims().to_vec(), kraus, tol.tol_eq)
}

/// `||sum_l v_l v_l^H - I_kappa||_F`: how far the leaf vectors are from
/// forming an isometry.
pub fn isometry_residual(tree: &LoccTree, tol: &Tolerances) -> Result<f64> {
    let vectors = leaf_vectors(tree, tol)?;
    let kappa = tree.rep().kappa();
    let mut sum = CMatrix::zeros(kappa, kappa);
    for (_, v) in &vectors {
        sum += v * v.adjoint();
    }
    Ok(frob_distance(&sum, &identity(kappa)))
}
