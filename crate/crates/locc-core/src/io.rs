//! Versioned JSON documents for channels, trees, reports, and generation
//! recipes.
//!
//! Matrices are stored row-major as nested arrays of `[re, im]` pairs. Tree
//! documents embed their minimal Kraus basis verbatim: node labels are
//! coordinates in that basis, so the loader verifies Hilbert-Schmidt
//! orthogonality rather than re-deriving eigenvectors (which could rotate
//! degenerate eigenspaces and invalidate every label). Serialization is
//! deterministic: equal values produce equal bytes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::BoundsReport;
use crate::channels::{Channel, MinimalRep};
use crate::compress::PruneReport;
use crate::error::{Error, Result};
use crate::harness::GenSpec;
use crate::numerics::{CMatrix, Tolerances};
use crate::trees::{LoccTree, TreeNode, ValidationReport};

pub const CHANNEL_FORMAT: &str = "locc-channel/1";
pub const TREE_FORMAT: &str = "locc-tree/1";
pub const PRUNE_REPORT_FORMAT: &str = "locc-prune-report/1";
pub const BOUNDS_FORMAT: &str = "locc-bounds/1";
pub const GEN_FORMAT: &str = "locc-gen/1";
pub const VALIDATION_FORMAT: &str = "locc-validation/1";

/// Row-major matrix of [re, im] entries.
type MatrixDto = Vec<Vec<[f64; 2]>>;

fn matrix_to_dto(m: &CMatrix) -> MatrixDto {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn matrix_from_dto(dto: &MatrixDto) -> Result<CMatrix> {
    let rows = dto.len();
    if rows == 0 {
        return Err(Error::Parse("matrix has no rows".into()));
    }
    let cols = dto[0].len();
    if cols == 0 || dto.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("matrix rows have uneven lengths".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        Complex64::new(dto[r][c][0], dto[r][c][1])
    }))
}

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    version: String,
    dims: Vec<usize>,
    kraus: Vec<MatrixDto>,
}

#[derive(Serialize, Deserialize)]
struct ChannelBlock {
    dims: Vec<usize>,
    kraus: Vec<MatrixDto>,
}

#[derive(Serialize, Deserialize)]
struct NodeDto {
    id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    acting_party: Option<usize>,
    c_matrix: MatrixDto,
    children: Vec<NodeDto>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    version: String,
    channel: ChannelBlock,
    root: NodeDto,
}

fn check_version(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::UnsupportedVersion {
            found: found.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

fn pretty(value: &impl Serialize) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable value");
    out.push('\n');
    out
}

pub fn channel_to_json(c: &Channel) -> String {
    pretty(&ChannelDoc {
        version: CHANNEL_FORMAT.into(),
        dims: c.dims().to_vec(),
        kraus: c.kraus().iter().map(matrix_to_dto).collect(),
    })
}

pub fn channel_from_json(s: &str, tol: &Tolerances) -> Result<Channel> {
    let doc: ChannelDoc = serde_json::from_str(s)?;
    check_version(&doc.version, CHANNEL_FORMAT)?;
    let kraus = doc
        .kraus
        .iter()
        .map(matrix_from_dto)
        .collect::<Result<Vec<_>>>()?;
    Channel::with_tolerance(doc.dims, kraus, tol.tol_eq)
}

fn node_to_dto(node: &TreeNode) -> NodeDto {
    NodeDto {
        id: node.id,
        acting_party: node.acting_party,
        c_matrix: matrix_to_dto(&node.c_matrix),
        children: node.children.iter().map(node_to_dto).collect(),
    }
}

fn node_from_dto(dto: &NodeDto) -> Result<TreeNode> {
    Ok(TreeNode {
        id: dto.id,
        c_matrix: matrix_from_dto(&dto.c_matrix)?,
        acting_party: dto.acting_party,
        children: dto
            .children
            .iter()
            .map(node_from_dto)
            .collect::<Result<Vec<_>>>()?,
    })
}

pub fn tree_to_json(t: &LoccTree) -> String {
    let c = t.rep().channel();
    pretty(&TreeDoc {
        version: TREE_FORMAT.into(),
        channel: ChannelBlock {
            dims: c.dims().to_vec(),
            kraus: c.kraus().iter().map(matrix_to_dto).collect(),
        },
        root: node_to_dto(t.root()),
    })
}

pub fn tree_from_json(s: &str, tol: &Tolerances) -> Result<LoccTree> {
    let doc: TreeDoc = serde_json::from_str(s)?;
    check_version(&doc.version, TREE_FORMAT)?;
    let kraus = doc
        .channel
        .kraus
        .iter()
        .map(matrix_from_dto)
        .collect::<Result<Vec<_>>>()?;
    let channel = Channel::with_tolerance(doc.channel.dims, kraus, tol.tol_eq)?;
    let rep = MinimalRep::from_orthogonal_kraus(channel, tol)?;
    LoccTree::new(rep, node_from_dto(&doc.root)?)
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    version: &'a str,
    #[serde(flatten)]
    payload: &'a T,
}

pub fn prune_report_to_json(r: &PruneReport) -> String {
    pretty(&Versioned {
        version: PRUNE_REPORT_FORMAT,
        payload: r,
    })
}

pub fn bounds_to_json(b: &BoundsReport) -> String {
    pretty(&Versioned {
        version: BOUNDS_FORMAT,
        payload: b,
    })
}

pub fn validation_to_json(v: &ValidationReport) -> String {
    pretty(&Versioned {
        version: VALIDATION_FORMAT,
        payload: v,
    })
}

pub fn gen_spec_to_json(g: &GenSpec) -> String {
    pretty(&Versioned {
        version: GEN_FORMAT,
        payload: g,
    })
}

pub fn gen_spec_from_json(s: &str) -> Result<GenSpec> {
    #[derive(Deserialize)]
    struct GenDoc {
        version: String,
        #[serde(flatten)]
        spec: GenSpec,
    }
    let doc: GenDoc = serde_json::from_str(s)?;
    check_version(&doc.version, GEN_FORMAT)?;
    Ok(doc.spec)
}

/// A document whose type is chosen by its version tag.
pub enum Document {
    Channel(Channel),
    Tree(LoccTree),
}

/// Parse either a channel or a tree document.
pub fn document_from_json(s: &str, tol: &Tolerances) -> Result<Document> {
    #[derive(Deserialize)]
    struct Tagged {
        version: String,
    }
    let tag: Tagged = serde_json::from_str(s)?;
    match tag.version.as_str() {
        CHANNEL_FORMAT => Ok(Document::Channel(channel_from_json(s, tol)?)),
        TREE_FORMAT => Ok(Document::Tree(tree_from_json(s, tol)?)),
        other => Err(Error::UnsupportedVersion {
            found: other.to_string(),
            expected: format!("{CHANNEL_FORMAT} or {TREE_FORMAT}"),
        }),
    }
}
