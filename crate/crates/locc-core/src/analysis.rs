//! Channel invariants and outcome-count bounds.
//!
//! Two numbers control how many outcomes local measurements ever need:
//!
//! - the Kraus rank kappa: sibling labels are kappa x kappa PSD matrices, so
//!   at most kappa^2 of them can be linearly independent and pruning brings
//!   every measurement down to at most kappa^2 outcomes;
//! - chi, the dimension of the span of the kappa^2 operators K_i^H K_j. It is
//!   a property of the channel itself (any Kraus representation gives the
//!   same span), and a measurement by party alpha can have at most
//!   d_alpha^2 + kappa^2 - chi linearly independent labels.
//!
//! chi = kappa^2 characterizes channels that are extreme points of the convex
//! set of channels; for those the per-party bound collapses to d_alpha^2.

use serde::Serialize;

use crate::channels::MinimalRep;
use crate::error::{Error, Result};
use crate::numerics::{
    self, frobenius, hs_inner, numerical_rank, unvec_row_major, vec_row_major, CMatrix, CVector,
    Tolerances,
};
use crate::trees::node_operator_with;

/// The outcome-count bounds of a channel.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub kappa: usize,
    pub chi: usize,
    /// Joint-space dimension D.
    pub total_dim: usize,
    pub dims: Vec<usize>,
    /// kappa^2: no measurement ever needs more outcomes than this.
    pub global_outcome_bound: usize,
    /// d_alpha^2 + kappa^2 - chi per party.
    pub per_party_outcome_bounds: Vec<usize>,
    /// Per party, the smaller of the global and per-party bounds.
    pub effective_outcome_bounds: Vec<usize>,
    /// chi = kappa^2: the channel is an extreme point of the set of channels,
    /// and d_alpha^2 outcomes per party suffice.
    pub is_extreme: bool,
    /// Present when a product-representation size was supplied.
    pub round_lower_bound: Option<RoundLowerBound>,
}

/// Lower bound on the number of rounds from the size of the smallest product
/// Kraus representation: r >= log(N_p) / log(kappa^2).
#[derive(Debug, Clone, Serialize)]
pub struct RoundLowerBound {
    pub product_kraus_count: usize,
    pub raw: f64,
    pub rounds: usize,
}

/// Dimension of the span of the kappa^2 operators K_i^H K_j.
///
/// Computed as the numerical rank of the matrix whose rows are the vectorized
/// products; independent of the Kraus representation the channel came from.
pub fn chi(rep: &MinimalRep, tol: &Tolerances) -> usize {
    let products = rep.kraus_products();
    let d2 = rep.channel().total_dim().pow(2);
    let stacked = CMatrix::from_fn(products.len(), d2, |r, c| {
        let m = &products[r];
        m[(c / m.ncols(), c % m.ncols())]
    });
    numerical_rank(&stacked, tol)
}

/// Compute every bound the channel admits; `product_kraus_count` (when known)
/// adds the round lower bound.
pub fn bounds(
    rep: &MinimalRep,
    product_kraus_count: Option<usize>,
    tol: &Tolerances,
) -> Result<BoundsReport> {
    let kappa = rep.kappa();
    let total_dim = rep.channel().total_dim();
    let chi = chi(rep, tol);
    if chi < 1 || chi > (kappa * kappa).min(total_dim * total_dim) {
        return Err(Error::NumericalFailure(format!(
            "chi = {chi} fell outside [1, min(kappa^2, D^2)]"
        )));
    }
    let global = kappa * kappa;
    let dims = rep.channel().dims().to_vec();
    let per_party: Vec<usize> = dims.iter().map(|d| d * d + global - chi).collect();
    let effective: Vec<usize> = per_party.iter().map(|&b| b.min(global)).collect();
    let round_lower_bound = match product_kraus_count {
        None => None,
        Some(np) => {
            if np < kappa {
                return Err(Error::BoundViolation(format!(
                    "a product representation of size {np} is impossible: kappa = {kappa}"
                )));
            }
            // kappa = 1 leaves the formula singular; a single-Kraus channel
            // needs no branching at all.
            let raw = if kappa == 1 {
                0.0
            } else {
                (np as f64).ln() / ((kappa * kappa) as f64).ln()
            };
            Some(RoundLowerBound {
                product_kraus_count: np,
                raw,
                rounds: ceil_with_snap(raw),
            })
        }
    };
    Ok(BoundsReport {
        kappa,
        chi,
        total_dim,
        dims,
        global_outcome_bound: global,
        per_party_outcome_bounds: per_party,
        effective_outcome_bounds: effective,
        is_extreme: chi == global,
        round_lower_bound,
    })
}

/// Ceiling that forgives floating-point fuzz just below an integer.
fn ceil_with_snap(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// Orthonormal basis of kappa x kappa matrix space whose last
/// `kappa^2 - chi` members span the dependencies of the K_i^H K_j.
///
/// Members `t <= chi` span the complement, so every node operator expands in
/// the first chi image operators `map(Q^(t))` alone. Building the basis costs
/// more than [`chi`]; reuse one instance across the measurements of a channel.
#[derive(Debug, Clone)]
pub struct DependencyBasis {
    chi: usize,
    basis: Vec<CMatrix>,
}

impl DependencyBasis {
    pub fn new(rep: &MinimalRep, tol: &Tolerances) -> Result<Self> {
        let kappa = rep.kappa();
        let k2 = kappa * kappa;
        let d2 = rep.channel().total_dim().pow(2);
        let products = rep.kraus_products();
        // Columns of `map`: vectorized products, so map * vec(Q) = vec of
        // sum_{ij} Q_ij K_i^H K_j.
        let map = CMatrix::from_fn(d2, k2, |r, c| {
            let m = &products[c];
            m[(r / m.ncols(), r % m.ncols())]
        });
        let svd = map.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let sv = &svd.singular_values;
        let s_max = sv.iter().cloned().fold(0.0, f64::max);
        if s_max == 0.0 {
            return Err(Error::NumericalFailure("all Kraus products vanish".into()));
        }
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));
        let chi = order
            .iter()
            .filter(|&&i| sv[i] > tol.tol_rank * s_max)
            .count();

        // Complement of the dependency space: right singular vectors with
        // nonzero singular value (machine-accurate from the thin SVD).
        let mut vectors: Vec<CVector> = order
            .iter()
            .take(chi)
            .map(|&i| v_t.row(i).map(|z| z.conj()).transpose())
            .collect();
        // Dependency space: remaining thin-SVD rows first, then eigenvectors
        // of the Gram matrix when kappa^2 exceeds the thin width; every
        // candidate is re-orthogonalized against what came before, so the
        // image residuals stay at machine precision.
        let mut candidates: Vec<CVector> = order
            .iter()
            .skip(chi)
            .map(|&i| v_t.row(i).map(|z| z.conj()).transpose())
            .collect();
        if v_t.nrows() < k2 {
            let gram = map.adjoint() * &map;
            let (_, eigvecs) = numerics::eigh(&gram);
            // smallest eigenvalues last; walk from the tail
            candidates.extend(eigvecs.into_iter().rev());
        }
        for cand in candidates {
            if vectors.len() == k2 {
                break;
            }
            let mut w = cand;
            for basis_vec in &vectors {
                let overlap = basis_vec.dotc(&w);
                w -= basis_vec * overlap;
            }
            let n = w.norm();
            if n > 0.5 {
                // candidates are near-orthonormal to start with; anything
                // substantially shrunk was already represented
                vectors.push(numerics::canonical_phase(&w.unscale(n)));
            }
        }
        if vectors.len() != k2 {
            return Err(Error::NumericalFailure(format!(
                "dependency basis incomplete: {} of {k2} members",
                vectors.len()
            )));
        }
        let basis = vectors
            .iter()
            .map(|v| unvec_row_major(v, kappa, kappa))
            .collect();
        Ok(Self { chi, basis })
    }

    /// Dimension of the span of the K_i^H K_j.
    pub fn chi(&self) -> usize {
        self.chi
    }

    /// All kappa^2 basis matrices; members after [`Self::chi`] span the
    /// dependency space.
    pub fn matrices(&self) -> &[CMatrix] {
        &self.basis
    }
}

/// Decomposition of one measurement's sibling labels over a
/// [`DependencyBasis`].
#[derive(Debug, Clone)]
pub struct MeasurementAnalysis {
    /// Orthonormal kappa x kappa basis, dependencies last.
    pub q_basis: Vec<CMatrix>,
    /// Coefficients M_st = Tr(Q^(t)H C^(s)), one row per sibling.
    pub m_matrix: CMatrix,
    /// Rank of the stacked sibling labels.
    pub independent_count: usize,
    /// d_alpha^2 + kappa^2 - chi.
    pub bound: usize,
}

/// Decompose a validated measurement's sibling labels and check the per-party
/// independence bound. Builds a fresh basis; see
/// [`analyze_measurement_with`] for batch use.
pub fn analyze_measurement(
    rep: &MinimalRep,
    sibling_cs: &[CMatrix],
    party: usize,
    tol: &Tolerances,
) -> Result<MeasurementAnalysis> {
    let basis = DependencyBasis::new(rep, tol)?;
    analyze_measurement_with(rep, &basis, sibling_cs, party, tol)
}

/// As [`analyze_measurement`], reusing a precomputed basis.
pub fn analyze_measurement_with(
    rep: &MinimalRep,
    basis: &DependencyBasis,
    sibling_cs: &[CMatrix],
    party: usize,
    tol: &Tolerances,
) -> Result<MeasurementAnalysis> {
    let kappa = rep.kappa();
    let k2 = kappa * kappa;
    let dims = rep.channel().dims();
    if party >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "party {party} out of range for {} parties",
            dims.len()
        )));
    }
    if sibling_cs.is_empty() {
        return Err(Error::DimensionMismatch("no sibling labels given".into()));
    }
    for c in sibling_cs {
        if c.nrows() != kappa || c.ncols() != kappa {
            return Err(Error::KappaMismatch {
                got: c.nrows(),
                kappa,
            });
        }
    }
    let m_matrix = CMatrix::from_fn(sibling_cs.len(), k2, |s, t| {
        hs_inner(&basis.matrices()[t], &sibling_cs[s])
    });
    let stacked = CMatrix::from_fn(sibling_cs.len(), k2, |s, c| {
        vec_row_major(&sibling_cs[s])[c]
    });
    let independent_count = if sibling_cs.iter().all(|c| frobenius(c) == 0.0) {
        0
    } else {
        numerical_rank(&stacked, tol)
    };
    let bound = dims[party] * dims[party] + k2 - basis.chi();
    if independent_count > bound {
        return Err(Error::BoundViolation(format!(
            "{independent_count} independent sibling labels exceed the per-party bound {bound}; \
             this should be impossible for a valid measurement and signals a numerical breakdown"
        )));
    }
    Ok(MeasurementAnalysis {
        q_basis: basis.matrices().to_vec(),
        m_matrix,
        independent_count,
        bound,
    })
}

/// Image operators map(Q^(t)) = sum_ij Q^(t)_ij K_i^H K_j for t <= chi; the
/// expansion of any node operator needs only these.
pub fn image_operators(rep: &MinimalRep, basis: &DependencyBasis) -> Result<Vec<CMatrix>> {
    let products = rep.kraus_products();
    basis
        .matrices()
        .iter()
        .take(basis.chi())
        .map(|q| node_operator_with(rep, &products, q))
        .collect()
}
