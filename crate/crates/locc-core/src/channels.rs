//! Quantum channels as Kraus operator sets.
//!
//! A [`Channel`] is a completeness-checked list of square Kraus operators on
//! the joint space of a fixed party dimension list. Channel identity is
//! defined through the Choi matrix: two Kraus sets describe the same channel
//! exactly when their Choi matrices coincide, which absorbs the isometric
//! freedom in operator-sum representations. [`MinimalRep`] fixes that freedom
//! by diagonalizing the Choi matrix, yielding a Hilbert-Schmidt-orthogonal
//! Kraus set of size kappa (the Kraus rank).

use crate::error::{Error, Result};
use crate::numerics::{
    self, eigh, frob_distance, frobenius, identity, re, unvec_row_major, vec_row_major, CMatrix,
    CVector, Tolerances,
};

/// A multipartite quantum channel in Kraus form.
#[derive(Debug, Clone)]
pub struct Channel {
    dims: Vec<usize>,
    kraus: Vec<CMatrix>,
}

impl Channel {
    /// Build a channel, checking shape and Kraus completeness against the
    /// default equality tolerance.
    pub fn new(dims: Vec<usize>, kraus: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(dims, kraus, Tolerances::default().tol_eq)
    }

    /// As [`Channel::new`] with an explicit completeness tolerance.
    pub fn with_tolerance(dims: Vec<usize>, kraus: Vec<CMatrix>, tol_eq: f64) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(
                "party dimensions must be positive".into(),
            ));
        }
        if kraus.is_empty() {
            return Err(Error::DimensionMismatch(
                "a channel needs at least one Kraus operator".into(),
            ));
        }
        let total: usize = dims.iter().product();
        if kraus.iter().any(|k| k.nrows() != total || k.ncols() != total) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operators must be {total}x{total}"
            )));
        }
        let mut sum = CMatrix::zeros(total, total);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let residual = frob_distance(&sum, &identity(total));
        if residual > tol_eq {
            return Err(Error::CompletenessViolation { residual });
        }
        Ok(Self { dims, kraus })
    }

    /// Per-party dimensions d_alpha.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Joint-space dimension D = prod d_alpha.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// The Kraus operators.
    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Apply the channel to a D x D operator: sum_i K_i rho K_i^H.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let total = self.total_dim();
        if rho.nrows() != total || rho.ncols() != total {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, channel acts on {total}x{total}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let mut out = CMatrix::zeros(total, total);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }
}

/// Choi matrix sum_i vec(K_i) vec(K_i)^H with row-major vec.
///
/// PSD with trace D for any completeness-obeying channel; equal Choi matrices
/// mean equal channels.
pub fn choi_matrix(c: &Channel) -> CMatrix {
    let total = c.total_dim();
    let mut choi = CMatrix::zeros(total * total, total * total);
    for k in c.kraus() {
        let v = vec_row_major(k);
        choi += &v * v.adjoint();
    }
    choi
}

/// Frobenius distance between the Choi matrices of two channels on the same
/// joint space; zero (within tolerance) exactly for equal channels.
pub fn channel_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.total_dim() != b.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "channels act on D = {} vs D = {}",
            a.total_dim(),
            b.total_dim()
        )));
    }
    Ok(frob_distance(&choi_matrix(a), &choi_matrix(b)))
}

/// A channel in its minimal, Hilbert-Schmidt-orthogonal Kraus form.
///
/// The Kraus set has exactly kappa members with Tr(K_i^H K_j) = lambda_i
/// delta_ij, where the lambda_i are the nonzero Choi eigenvalues in
/// descending order.
#[derive(Debug, Clone)]
pub struct MinimalRep {
    channel: Channel,
    kappa: usize,
    choi: CMatrix,
    eigenvalues: Vec<f64>,
}

impl MinimalRep {
    /// Diagonalize the Choi matrix of `c` and keep the eigenpairs above the
    /// relative rank cutoff; eigenvector phases are canonical so the minimal
    /// set is deterministic.
    pub fn from_channel(c: &Channel, tol: &Tolerances) -> Result<Self> {
        let total = c.total_dim();
        let choi = choi_matrix(c);
        let (values, vectors) = eigh(&choi);
        let lambda_max = values.first().copied().unwrap_or(0.0);
        if lambda_max <= 0.0 {
            return Err(Error::NumericalFailure(
                "Choi matrix has no positive eigenvalues".into(),
            ));
        }
        let mut kraus = Vec::new();
        let mut eigenvalues = Vec::new();
        for (lambda, v) in values.iter().zip(&vectors) {
            if *lambda > tol.tol_rank * lambda_max {
                kraus.push(unvec_row_major(&v.scale(lambda.sqrt()), total, total));
                eigenvalues.push(*lambda);
            }
        }
        let kappa = kraus.len();
        let channel = Channel::with_tolerance(c.dims().to_vec(), kraus, tol.tol_eq)?;
        let rep = Self {
            channel,
            kappa,
            choi,
            eigenvalues,
        };
        // The reconstruction must reproduce the input channel.
        let residual = frob_distance(&rep.choi, &choi_matrix(&rep.channel));
        if residual > tol.tol_eq {
            return Err(Error::NumericalFailure(format!(
                "minimal representation drifted from its channel: Choi residual {residual:.3e}"
            )));
        }
        Ok(rep)
    }

    /// Accept an already-minimal Kraus set, verifying pairwise
    /// Hilbert-Schmidt orthogonality instead of re-deriving eigenvectors.
    ///
    /// Tree files store their minimal Kraus basis verbatim because node
    /// labels are coordinates in that basis; re-diagonalizing on load could
    /// rotate degenerate eigenspaces and silently invalidate every label.
    pub fn from_orthogonal_kraus(channel: Channel, tol: &Tolerances) -> Result<Self> {
        let mut eigenvalues = Vec::with_capacity(channel.kraus().len());
        let mut scale: f64 = 0.0;
        for k in channel.kraus() {
            scale = scale.max(frobenius(k).powi(2));
        }
        for (i, ki) in channel.kraus().iter().enumerate() {
            for (j, kj) in channel.kraus().iter().enumerate() {
                let overlap = numerics::hs_inner(ki, kj);
                if i == j {
                    eigenvalues.push(overlap.re);
                } else if overlap.norm() > tol.tol_eq * scale.max(1.0) {
                    return Err(Error::NumericalFailure(format!(
                        "Kraus operators {i} and {j} are not Hilbert-Schmidt orthogonal \
                         (overlap {:.3e})",
                        overlap.norm()
                    )));
                }
            }
        }
        let kappa = channel.kraus().len();
        let choi = choi_matrix(&channel);
        Ok(Self {
            channel,
            kappa,
            choi,
            eigenvalues,
        })
    }

    /// The minimal channel (exactly kappa Kraus operators).
    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    /// Kraus rank.
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// The Choi matrix of the channel.
    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    /// Choi eigenvalues lambda_i > 0, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The minimal Kraus operators.
    pub fn kraus(&self) -> &[CMatrix] {
        self.channel.kraus()
    }

    /// All kappa^2 products K_i^H K_j in row-major (i, j) order.
    pub fn kraus_products(&self) -> Vec<CMatrix> {
        let kraus = self.kraus();
        let mut products = Vec::with_capacity(self.kappa * self.kappa);
        for ki in kraus {
            for kj in kraus {
                products.push(ki.adjoint() * kj);
            }
        }
        products
    }
}

/// Expand a D x D operator in the minimal Kraus basis.
///
/// Returns the coefficient vector `v` with `k_prime ~= sum_i v_i K_i`
/// (projection V_i = Tr(K_i^H k') / lambda_i) together with the residual
/// `||k' - sum_i v_i K_i||_F`. Callers that promised span membership should
/// reject residuals above their equality tolerance.
pub fn expand_in_minimal(rep: &MinimalRep, k_prime: &CMatrix) -> Result<(CVector, f64)> {
    let total = rep.channel().total_dim();
    if k_prime.nrows() != total || k_prime.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, expected {total}x{total}",
            k_prime.nrows(),
            k_prime.ncols()
        )));
    }
    let coeffs = CVector::from_fn(rep.kappa(), |i, _| {
        numerics::hs_inner(&rep.kraus()[i], k_prime) / re(rep.eigenvalues()[i])
    });
    let mut recon = CMatrix::zeros(total, total);
    for (i, k) in rep.kraus().iter().enumerate() {
        recon += k * coeffs[i];
    }
    Ok((coeffs, frob_distance(k_prime, &recon)))
}
