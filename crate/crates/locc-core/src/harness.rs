//! Seeded generation of valid protocol trees and redundancy injection.
//!
//! Trees are built from concrete protocols: every internal node draws a
//! complete random instrument for the scheduled party, branch Kraus operators
//! are the products of the embedded local operators, and labels come from
//! expanding each branch operator in the implemented channel's minimal basis.
//! Leaves are rank-one outer products by construction and internal labels are
//! child sums, so generated trees satisfy every validator condition.
//!
//! Everything is deterministic per seed, which makes generated artifacts
//! reproducible byte for byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channels::{expand_in_minimal, Channel, MinimalRep};
use crate::error::{Error, Result};
use crate::numerics::{
    self, eigh, identity, kron_all, CMatrix, Tolerances,
};
use crate::trees::{LoccTree, NodeId, TreeNode};

/// How the acting party is chosen per measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartySchedule {
    /// Party `depth mod P` acts at depth `depth`.
    RoundRobin,
    /// Each internal node draws its party from the seed stream.
    SeededRandom,
}

/// Recipe for one generated tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    /// Per-party dimensions, each at least 2.
    pub dims: Vec<usize>,
    /// Tree depth in measurements, at least 1.
    pub rounds: usize,
    /// Outcomes per measurement: one entry broadcast to all rounds, or one
    /// entry per round. Each at least 2.
    pub outcomes: Vec<usize>,
    pub party_schedule: PartySchedule,
    pub seed: u64,
}

impl GenSpec {
    fn check(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return Err(Error::DimensionMismatch(
                "every party dimension must be at least 2".into(),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::DimensionMismatch("rounds must be at least 1".into()));
        }
        if self.outcomes.is_empty() || self.outcomes.iter().any(|&k| k < 2) {
            return Err(Error::DimensionMismatch(
                "every outcome count must be at least 2".into(),
            ));
        }
        if self.outcomes.len() != 1 && self.outcomes.len() != self.rounds {
            return Err(Error::DimensionMismatch(format!(
                "outcomes list has {} entries for {} rounds",
                self.outcomes.len(),
                self.rounds
            )));
        }
        Ok(())
    }

    fn outcomes_at(&self, depth: usize) -> usize {
        if self.outcomes.len() == 1 {
            self.outcomes[0]
        } else {
            self.outcomes[depth]
        }
    }
}

fn gaussian_matrix(rng: &mut ChaCha12Rng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        num_complex::Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Draw a complete `k`-outcome instrument on a `d`-dimensional party:
/// operators A_s with sum_s A_s^H A_s = I to machine precision, built by
/// normalizing independent Gaussian matrices through the inverse square root
/// of their completeness sum. `k = 1` yields a Haar-ish random unitary.
pub fn random_instrument(d: usize, k: usize, rng: &mut ChaCha12Rng) -> Result<Vec<CMatrix>> {
    const RETRIES: usize = 8;
    for _ in 0..RETRIES {
        let raw: Vec<CMatrix> = (0..k).map(|_| gaussian_matrix(rng, d)).collect();
        let mut sum = CMatrix::zeros(d, d);
        for g in &raw {
            sum += g.adjoint() * g;
        }
        let (values, vectors) = eigh(&sum);
        let lambda_max = values[0];
        let lambda_min = values[values.len() - 1];
        if lambda_min <= 1e-8 * lambda_max {
            continue; // nearly singular draw
        }
        let mut inv_sqrt = CMatrix::zeros(d, d);
        for (lambda, v) in values.iter().zip(&vectors) {
            inv_sqrt += (v * v.adjoint()).scale(1.0 / lambda.sqrt());
        }
        return Ok(raw.iter().map(|g| g * &inv_sqrt).collect());
    }
    Err(Error::DegenerateInstrument { retries: RETRIES })
}

/// Embed a local operator on `party` into the joint space, identities
/// elsewhere.
fn embed_local(local: &CMatrix, party: usize, dims: &[usize]) -> CMatrix {
    let factors: Vec<CMatrix> = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| if k == party { local.clone() } else { identity(d) })
        .collect();
    kron_all(&factors)
}

struct ProtoNode {
    party: Option<usize>,
    branch: CMatrix,
    children: Vec<ProtoNode>,
}

/// Generate a tree that passes every validator condition.
pub fn generate_tree(spec: &GenSpec) -> Result<LoccTree> {
    generate_tree_with(spec, &Tolerances::default())
}

pub fn generate_tree_with(spec: &GenSpec, tol: &Tolerances) -> Result<LoccTree> {
    spec.check()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let dims = spec.dims.clone();
    let parties = dims.len();
    let total: usize = dims.iter().product();

    // Concrete protocol first: branch operators down the tree.
    fn grow(
        spec: &GenSpec,
        dims: &[usize],
        parties: usize,
        branch: CMatrix,
        depth: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<ProtoNode> {
        if depth == spec.rounds {
            return Ok(ProtoNode {
                party: None,
                branch,
                children: Vec::new(),
            });
        }
        let party = match spec.party_schedule {
            PartySchedule::RoundRobin => depth % parties,
            PartySchedule::SeededRandom => rng.random_range(0..parties),
        };
        let k = spec.outcomes_at(depth);
        let instrument = random_instrument(dims[party], k, rng)?;
        let mut children = Vec::with_capacity(k);
        for a in &instrument {
            let next = embed_local(a, party, dims) * &branch;
            children.push(grow(spec, dims, parties, next, depth + 1, rng)?);
        }
        Ok(ProtoNode {
            party: Some(party),
            branch,
            children,
        })
    }
    let proto = grow(spec, &dims, parties, identity(total), 0, &mut rng)?;

    // The channel the protocol implements, and its minimal representation.
    let mut leaves = Vec::new();
    fn collect_leaves(node: &ProtoNode, out: &mut Vec<CMatrix>) {
        if node.children.is_empty() {
            out.push(node.branch.clone());
        }
        for child in &node.children {
            collect_leaves(child, out);
        }
    }
    collect_leaves(&proto, &mut leaves);
    let channel = Channel::with_tolerance(dims.clone(), leaves, tol.tol_eq)?;
    let rep = MinimalRep::from_channel(&channel, tol)?;
    let kappa = rep.kappa();

    // Labels: leaves from expanding branch operators in the minimal basis,
    // internal nodes as child sums; ids in pre-order.
    fn label(
        node: &ProtoNode,
        rep: &MinimalRep,
        kappa: usize,
        tol: &Tolerances,
        next_id: &mut NodeId,
    ) -> Result<TreeNode> {
        let id = *next_id;
        *next_id += 1;
        if node.children.is_empty() {
            let (coeffs, residual) = expand_in_minimal(rep, &node.branch)?;
            if residual > tol.tol_eq {
                return Err(Error::SpanResidual {
                    residual,
                    tolerance: tol.tol_eq,
                });
            }
            let v = coeffs.map(|z| z.conj());
            return Ok(TreeNode::leaf(id, &v * v.adjoint()));
        }
        let mut children = Vec::with_capacity(node.children.len());
        let mut c_sum = CMatrix::zeros(kappa, kappa);
        for child in &node.children {
            let labeled = label(child, rep, kappa, tol, next_id)?;
            c_sum += &labeled.c_matrix;
            children.push(labeled);
        }
        Ok(TreeNode {
            id,
            c_matrix: c_sum,
            acting_party: node.party,
            children,
        })
    }
    let mut next_id = 0;
    let root = label(&proto, &rep, kappa, tol, &mut next_id)?;
    LoccTree::new(rep, root)
}

/// Split random child subtrees into proportional copies, producing a tree
/// that still validates but carries guaranteed-dependent siblings for the
/// pruner to remove. The implemented channel is exactly preserved since the
/// split weights sum to one.
pub fn inject_redundancy(tree: &LoccTree, splits: usize, rng: &mut ChaCha12Rng) -> Result<LoccTree> {
    if splits == 0 {
        return Err(Error::DimensionMismatch("splits must be at least 1".into()));
    }
    let (rep, mut root) = tree.clone().into_parts();
    let mut next_id = fresh_id(&root);
    for _ in 0..splits {
        // choose an internal node uniformly, then one of its children
        let internal = count_internal(&root);
        let target = rng.random_range(0..internal);
        let child_pick = rng.random::<u64>();
        let p = rng.random_range(0.2..0.8);
        split_at(&mut root, &mut 0, target, child_pick, p, &mut next_id);
    }
    LoccTree::new(rep, root)
}

fn count_internal(node: &TreeNode) -> usize {
    let mut n = 0;
    node.walk(&mut |t| {
        if !t.is_leaf() {
            n += 1;
        }
    });
    n
}

fn fresh_id(node: &TreeNode) -> NodeId {
    let mut max = 0;
    node.walk(&mut |t| max = max.max(t.id));
    max + 1
}

fn relabel(node: &mut TreeNode, next_id: &mut NodeId) {
    node.id = *next_id;
    *next_id += 1;
    for child in &mut node.children {
        relabel(child, next_id);
    }
}

fn split_at(
    node: &mut TreeNode,
    seen: &mut usize,
    target: usize,
    child_pick: u64,
    p: f64,
    next_id: &mut NodeId,
) -> bool {
    if !node.is_leaf() {
        if *seen == target {
            let s = (child_pick as usize) % node.children.len();
            let mut kept = node.children.remove(s);
            let mut copy = kept.clone();
            kept.scale_subtree(p);
            copy.scale_subtree(1.0 - p);
            relabel(&mut copy, next_id);
            node.children.insert(s, copy);
            node.children.insert(s, kept);
            return true;
        }
        *seen += 1;
        for child in &mut node.children {
            if split_at(child, seen, target, child_pick, p, next_id) {
                return true;
            }
        }
    }
    false
}

/// Reconstruct the Choi matrix by applying the channel to every matrix unit,
/// an independent code path from [`choi_matrix`]'s vectorized outer products.
pub fn tomographic_channel_oracle(c: &Channel) -> Result<CMatrix> {
    let total = c.total_dim();
    let mut choi = CMatrix::zeros(total * total, total * total);
    for c1 in 0..total {
        for c2 in 0..total {
            let mut unit = CMatrix::zeros(total, total);
            unit[(c1, c2)] = numerics::ONE;
            let image = c.apply(&unit)?;
            for r1 in 0..total {
                for r2 in 0..total {
                    choi[(r1 * total + c1, r2 * total + c2)] = image[(r1, r2)];
                }
            }
        }
    }
    Ok(choi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::choi_matrix;
    use crate::numerics::{frob_distance, ZERO};
    use crate::channels::tests::{dephasing_channel, random_channel};
    use crate::compress::prune_tree;
    use crate::trees::validate;

    fn qubit_pair_spec(seed: u64) -> GenSpec {
        GenSpec {
            dims: vec![2, 2],
            rounds: 2,
            outcomes: vec![3],
            party_schedule: PartySchedule::RoundRobin,
            seed,
        }
    }

    #[test]
    fn instruments_are_complete() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for (d, k) in [(2, 1), (2, 4), (3, 2), (4, 5)] {
            let ops = random_instrument(d, k, &mut rng).unwrap();
            assert_eq!(ops.len(), k);
            let mut sum = CMatrix::zeros(d, d);
            for a in &ops {
                sum += a.adjoint() * a;
            }
            assert!(
                frob_distance(&sum, &identity(d)) <= 1e-12,
                "completeness for d={d}, k={k}"
            );
        }
    }

    #[test]
    fn single_outcome_instrument_is_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let ops = random_instrument(3, 1, &mut rng).unwrap();
        let a = &ops[0];
        assert!(frob_distance(&(a.adjoint() * a), &identity(3)) <= 1e-12);
        assert!(frob_distance(&(a * a.adjoint()), &identity(3)) <= 1e-12);
    }

    #[test]
    fn instruments_are_seed_deterministic() {
        let mut rng1 = ChaCha12Rng::seed_from_u64(77);
        let mut rng2 = ChaCha12Rng::seed_from_u64(77);
        let a = random_instrument(3, 3, &mut rng1).unwrap();
        let b = random_instrument(3, 3, &mut rng2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y, "bit-identical across runs");
        }
    }

    #[test]
    fn generated_tree_validates() {
        let tol = Tolerances::default();
        let tree = generate_tree(&GenSpec {
            dims: vec![2, 2],
            rounds: 2,
            outcomes: vec![3],
            party_schedule: PartySchedule::RoundRobin,
            seed: 7,
        })
        .unwrap();
        let report = validate(&tree, &tol);
        assert!(report.all_passed(), "{}", report.summary());
        assert_eq!(tree.round_count(), 2);
        assert_eq!(tree.leaves().len(), 9);
    }

    #[test]
    fn single_round_star_tree_leaf_sum_is_identity() {
        let tol = Tolerances::default();
        let tree = generate_tree(&GenSpec {
            dims: vec![2],
            rounds: 1,
            outcomes: vec![4],
            party_schedule: PartySchedule::RoundRobin,
            seed: 11,
        })
        .unwrap();
        let kappa = tree.rep().kappa();
        let mut sum = CMatrix::zeros(kappa, kappa);
        for leaf in tree.leaves() {
            sum += &leaf.c_matrix;
        }
        assert!(frob_distance(&sum, &identity(kappa)) <= tol.tol_eq);
        assert_eq!(tree.round_count(), 1);
    }

    #[test]
    fn seeded_random_schedule_validates() {
        let tol = Tolerances::default();
        let tree = generate_tree(&GenSpec {
            dims: vec![2, 3],
            rounds: 3,
            outcomes: vec![2, 3, 2],
            party_schedule: PartySchedule::SeededRandom,
            seed: 19,
        })
        .unwrap();
        assert!(validate(&tree, &tol).all_passed());
        assert_eq!(tree.round_count(), 3);
        assert_eq!(tree.leaves().len(), 12);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_tree(&qubit_pair_spec(23)).unwrap();
        let b = generate_tree(&qubit_pair_spec(23)).unwrap();
        assert_eq!(a.node_ids(), b.node_ids());
        let (la, lb) = (a.leaves(), b.leaves());
        for (x, y) in la.iter().zip(lb.iter()) {
            assert_eq!(x.c_matrix, y.c_matrix);
        }
        let c = generate_tree(&qubit_pair_spec(24)).unwrap();
        assert_ne!(
            a.leaves()[0].c_matrix, c.leaves()[0].c_matrix,
            "different seeds differ"
        );
    }

    #[test]
    fn injection_preserves_validity_and_channel() {
        let tol = Tolerances::default();
        let tree = generate_tree(&qubit_pair_spec(31)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let injected = inject_redundancy(&tree, 3, &mut rng).unwrap();
        assert!(validate(&injected, &tol).all_passed());
        // each split duplicates a subtree, adding at least one leaf
        assert!(injected.leaves().len() >= tree.leaves().len() + 3);
        let a = crate::trees::implemented_kraus(&tree, &tol).unwrap();
        let b = crate::trees::implemented_kraus(&injected, &tol).unwrap();
        assert!(crate::channels::channel_distance(&a, &b).unwrap() <= tol.tol_eq);
    }

    #[test]
    fn leaf_split_keeps_leaf_sum() {
        let tol = Tolerances::default();
        let tree = generate_tree(&GenSpec {
            dims: vec![2],
            rounds: 1,
            outcomes: vec![3],
            party_schedule: PartySchedule::RoundRobin,
            seed: 5,
        })
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let injected = inject_redundancy(&tree, 1, &mut rng).unwrap();
        let report = validate(&injected, &tol);
        assert!(report.all_passed(), "{}", report.summary());
        assert_eq!(injected.leaves().len(), 4);
    }

    #[test]
    fn pruning_injected_tree_shrinks_back() {
        let tol = Tolerances::default();
        let tree = generate_tree(&qubit_pair_spec(37)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let injected = inject_redundancy(&tree, 4, &mut rng).unwrap();
        let (pruned, report) = prune_tree(&injected, &tol).unwrap();
        assert!(report.iterations >= 4);
        assert!(pruned.leaves().len() <= tree.leaves().len());
        assert!(report.channel_residual.unwrap() <= tol.tol_eq);
    }

    #[test]
    fn oracle_matches_choi_on_known_and_random_channels() {
        let deph = dephasing_channel();
        let oracle = tomographic_channel_oracle(&deph).unwrap();
        assert!(frob_distance(&oracle, &choi_matrix(&deph)) <= 1e-10);

        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..3 {
            let c = random_channel(&mut rng, 2, 3);
            let oracle = tomographic_channel_oracle(&c).unwrap();
            assert!(frob_distance(&oracle, &choi_matrix(&c)) <= 1e-10);
        }
        let _ = ZERO;
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = qubit_pair_spec(1);
        spec.dims = vec![1, 2];
        assert!(generate_tree(&spec).is_err());
        let mut spec = qubit_pair_spec(1);
        spec.rounds = 0;
        assert!(generate_tree(&spec).is_err());
        let mut spec = qubit_pair_spec(1);
        spec.outcomes = vec![1];
        assert!(generate_tree(&spec).is_err());
        let mut spec = qubit_pair_spec(1);
        spec.outcomes = vec![3, 3, 3];
        assert!(generate_tree(&spec).is_err());
    }
}
