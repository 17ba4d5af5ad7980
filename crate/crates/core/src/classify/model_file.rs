//! `CFXP1` model container.
//!
//! All integers and reals are little-endian. Reals are `f32` or `f64` as
//! announced by the width byte.
//!
//! ```text
//! magic        5 bytes  "CFXP1"
//! version      u16      1
//! width        u8       4 | 8
//! config_hash  32 bytes sha256 of the normalization config JSON
//! kind         u8       0 = svc, 1 = rf
//! n_terms      u64, then per term: u32 byte length + UTF-8 bytes
//! has_chi2     u8, then n_terms reals when 1
//! has_select   u8, then u64 count + count u64 column indices when 1
//! n_classes    u8 (8), then one u8 label index per class
//! svc params   f64 C, u64 max_iter, f64 tol, u8 balanced, u64 seed
//!   dim u64, 8*dim reals (row-major weights), 8 reals (bias)
//! rf params    u64 n_estimators, u64 max_depth, u64 max_leaf_nodes,
//!              u64 features_per_split (0 = sqrt), u8 bootstrap, u64 seed
//!   dim u64, n_trees u64, per tree: u64 n_nodes, per node:
//!     u8 0 + u8 class                                     (leaf)
//!     u8 1 + u32 feature + real threshold + u32 left + u32 right (split)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{ClassifyError, Forest, LinearSvc, Model, RfParams, SvcParams, TrainedClassifier, Tree, TreeNode};
use crate::corpus::{SectorLabel, N_SECTORS};
use crate::features::FeatureSpace;
use crate::scalar::Real;

pub const MODEL_MAGIC: &[u8; 5] = b"CFXP1";
pub const MODEL_VERSION: u16 = 1;

fn put_real<T: Real, W: Write>(w: &mut W, v: T) -> std::io::Result<()> {
    if T::WIDTH == 4 {
        w.write_f32::<LE>(v.to_f32().unwrap())
    } else {
        w.write_f64::<LE>(v.as_f64())
    }
}

fn get_real<T: Real, R: Read>(r: &mut R) -> std::io::Result<T> {
    Ok(if T::WIDTH == 4 {
        T::of(r.read_f32::<LE>()? as f64)
    } else {
        T::of(r.read_f64::<LE>()?)
    })
}

fn put_len<W: Write>(w: &mut W, n: usize) -> std::io::Result<()> {
    w.write_u64::<LE>(n as u64)
}

fn get_len<R: Read>(r: &mut R, limit: usize, what: &str) -> Result<usize, ClassifyError> {
    let n = r.read_u64::<LE>()?;
    if n > limit as u64 {
        return Err(ClassifyError::Format(format!("{what} count {n} exceeds {limit}")));
    }
    Ok(n as usize)
}

const LIMIT: usize = 1 << 28;

pub fn write_model<T: Real, W: Write>(mut w: W, m: &TrainedClassifier<T>) -> Result<(), ClassifyError> {
    w.write_all(MODEL_MAGIC)?;
    w.write_u16::<LE>(MODEL_VERSION)?;
    w.write_u8(T::WIDTH)?;
    w.write_all(m.config_hash())?;
    w.write_u8(match m.model() {
        Model::Svc(_) => 0,
        Model::Rf(_) => 1,
    })?;

    let space = m.feature_space();
    put_len(&mut w, space.vocabulary_size())?;
    for t in space.terms() {
        w.write_u32::<LE>(t.len() as u32)?;
        w.write_all(t.as_bytes())?;
    }
    match space.chi2() {
        Some(scores) => {
            w.write_u8(1)?;
            for &s in scores {
                put_real(&mut w, s)?;
            }
        }
        None => w.write_u8(0)?,
    }
    match space.selected() {
        Some(cols) => {
            w.write_u8(1)?;
            put_len(&mut w, cols.len())?;
            for &c in cols {
                w.write_u64::<LE>(c as u64)?;
            }
        }
        None => w.write_u8(0)?,
    }
    w.write_u8(N_SECTORS as u8)?;
    for c in m.classes() {
        w.write_u8(c.index() as u8)?;
    }

    match m.model() {
        Model::Svc(svc) => {
            let p = &svc.params;
            w.write_f64::<LE>(p.c)?;
            w.write_u64::<LE>(p.max_iter as u64)?;
            w.write_f64::<LE>(p.tol)?;
            w.write_u8(p.balanced as u8)?;
            w.write_u64::<LE>(p.seed)?;
            put_len(&mut w, svc.dim())?;
            for &v in svc.weights().iter().chain(svc.bias()) {
                put_real(&mut w, v)?;
            }
        }
        Model::Rf(rf) => {
            let p = &rf.params;
            for v in [p.n_estimators, p.max_depth, p.max_leaf_nodes, p.features_per_split.unwrap_or(0)] {
                w.write_u64::<LE>(v as u64)?;
            }
            w.write_u8(p.bootstrap as u8)?;
            w.write_u64::<LE>(p.seed)?;
            put_len(&mut w, rf.dim())?;
            put_len(&mut w, rf.trees().len())?;
            for t in rf.trees() {
                put_len(&mut w, t.nodes().len())?;
                for n in t.nodes() {
                    match *n {
                        TreeNode::Leaf { class } => {
                            w.write_u8(0)?;
                            w.write_u8(class)?;
                        }
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.write_u8(1)?;
                            w.write_u32::<LE>(feature)?;
                            put_real(&mut w, threshold)?;
                            w.write_u32::<LE>(left)?;
                            w.write_u32::<LE>(right)?;
                        }
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a model. When `expected_hash` is given the embedded normalization
/// hash must match it.
pub fn read_model<T: Real, R: Read>(
    mut r: R,
    expected_hash: Option<&[u8; 32]>,
) -> Result<TrainedClassifier<T>, ClassifyError> {
    let bad = |m: String| ClassifyError::Format(m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(bad("not a CFXP1 model".into()));
    }
    let version = r.read_u16::<LE>()?;
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let width = r.read_u8()?;
    if width != T::WIDTH {
        return Err(bad(format!("scalar width {width}, reader expects {}", T::WIDTH)));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    if expected_hash.is_some_and(|h| *h != hash) {
        return Err(ClassifyError::ConfigMismatch);
    }
    let kind = r.read_u8()?;

    let n_terms = get_len(&mut r, LIMIT, "term")?;
    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let len = r.read_u32::<LE>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        terms.push(String::from_utf8(buf).map_err(|_| bad("term is not UTF-8".into()))?);
    }
    if terms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("vocabulary is not sorted".into()));
    }
    let chi2 = match r.read_u8()? {
        0 => None,
        _ => Some((0..n_terms).map(|_| get_real(&mut r)).collect::<std::io::Result<Vec<T>>>()?),
    };
    let selected = match r.read_u8()? {
        0 => None,
        _ => {
            let k = get_len(&mut r, n_terms, "selected column")?;
            let cols = (0..k)
                .map(|_| r.read_u64::<LE>().map(|c| c as usize))
                .collect::<std::io::Result<Vec<usize>>>()?;
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.last().is_some_and(|&c| c >= n_terms) {
                return Err(bad("bad selected columns".into()));
            }
            Some(cols)
        }
    };
    let space = FeatureSpace::from_parts(terms, chi2, selected);
    let n_classes = r.read_u8()? as usize;
    if n_classes != N_SECTORS {
        return Err(bad(format!("expected {N_SECTORS} classes, found {n_classes}")));
    }
    for i in 0..N_SECTORS {
        if r.read_u8()? as usize != SectorLabel::ALL[i].index() {
            return Err(bad("unexpected class order".into()));
        }
    }

    let model = match kind {
        0 => {
            let c = r.read_f64::<LE>()?;
            let max_iter = r.read_u64::<LE>()? as usize;
            let tol = r.read_f64::<LE>()?;
            let balanced = r.read_u8()? != 0;
            let seed = r.read_u64::<LE>()?;
            let dim = get_len(&mut r, LIMIT, "dimension")?;
            let weights = (0..dim * N_SECTORS)
                .map(|_| get_real(&mut r))
                .collect::<std::io::Result<Vec<T>>>()?;
            let mut bias = [T::zero(); N_SECTORS];
            for b in bias.iter_mut() {
                *b = get_real(&mut r)?;
            }
            let params = SvcParams {
                c,
                max_iter,
                tol,
                balanced,
                seed,
            };
            Model::Svc(LinearSvc::from_parts(dim, weights, bias, params))
        }
        1 => {
            let mut u = [0usize; 4];
            for v in u.iter_mut() {
                *v = r.read_u64::<LE>()? as usize;
            }
            let params = RfParams {
                n_estimators: u[0],
                max_depth: u[1],
                max_leaf_nodes: u[2],
                features_per_split: (u[3] > 0).then_some(u[3]),
                bootstrap: r.read_u8()? != 0,
                seed: r.read_u64::<LE>()?,
            };
            let dim = get_len(&mut r, LIMIT, "dimension")?;
            let n_trees = get_len(&mut r, LIMIT, "tree")?;
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let n_nodes = get_len(&mut r, LIMIT, "node")?;
                let mut nodes = Vec::with_capacity(n_nodes);
                for _ in 0..n_nodes {
                    nodes.push(match r.read_u8()? {
                        0 => TreeNode::Leaf { class: r.read_u8()? },
                        1 => {
                            let feature = r.read_u32::<LE>()?;
                            if feature as usize >= dim {
                                return Err(bad(format!("split feature {feature} out of range")));
                            }
                            TreeNode::Split {
                                feature,
                                threshold: get_real(&mut r)?,
                                left: r.read_u32::<LE>()?,
                                right: r.read_u32::<LE>()?,
                            }
                        }
                        t => return Err(bad(format!("unknown node tag {t}"))),
                    });
                }
                trees.push(Tree::from_nodes(nodes)?);
            }
            Model::Rf(Forest::from_parts(dim, trees, params))
        }
        k => return Err(bad(format!("unknown model kind {k}"))),
    };
    let dim = match &model {
        Model::Svc(m) => m.dim(),
        Model::Rf(m) => m.dim(),
    };
    if dim != space.dim() {
        return Err(bad(format!("model dimension {dim} but feature space has {}", space.dim())));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes".into()));
    }
    Ok(TrainedClassifier::from_parts(space, hash, model))
}
