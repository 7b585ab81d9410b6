//! Versioned little-endian graph cache.
//!
//! Layout: magic `EDGEGRPH`, `u32` version, RBF config (`f64` mu_min, `f64`
//! delta, `u32` k_max), `u32` graph count, then per graph:
//! `u32` nodes, `u32` species[nodes], `u32` segment[nodes], `u32` n_graphs,
//! `u32` unbounded cells, `u32` edges, and per edge `u32` src, `u32` dst,
//! `i32` offset[3], `f64` distance. Edge features are re-expanded on load.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Edge, MolecularGraph, RbfConfig};

pub const MAGIC: &[u8; 8] = b"EDGEGRPH";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a graph cache (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    Version(u32),
    #[error("corrupt cache: {0}")]
    Corrupt(String),
}

fn put_u32<W: Write>(w: &mut W, x: usize) -> Result<(), CacheError> {
    let x = u32::try_from(x).map_err(|_| CacheError::Corrupt(format!("{x} exceeds u32")))?;
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, CacheError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_i32<R: Read>(r: &mut R) -> Result<i32, CacheError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(i32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64, CacheError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_graphs<W: Write>(
    mut w: W,
    rbf: &RbfConfig,
    graphs: &[MolecularGraph],
) -> Result<(), CacheError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&rbf.mu_min.to_le_bytes())?;
    w.write_all(&rbf.delta.to_le_bytes())?;
    put_u32(&mut w, rbf.k_max)?;
    put_u32(&mut w, graphs.len())?;
    for g in graphs {
        if g.rbf != *rbf {
            return Err(CacheError::Corrupt("graph RBF differs from header".into()));
        }
        put_u32(&mut w, g.n_nodes())?;
        for &z in &g.node_species {
            put_u32(&mut w, z as usize)?;
        }
        for &s in &g.segment_ids {
            put_u32(&mut w, s)?;
        }
        put_u32(&mut w, g.n_graphs)?;
        put_u32(&mut w, g.unbounded_cells)?;
        put_u32(&mut w, g.n_edges())?;
        for e in &g.edges {
            put_u32(&mut w, e.src)?;
            put_u32(&mut w, e.dst)?;
            for o in e.offset {
                w.write_all(&o.to_le_bytes())?;
            }
            w.write_all(&e.distance.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_graphs<R: Read>(mut r: R) -> Result<(RbfConfig, Vec<MolecularGraph>), CacheError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(CacheError::Version(version));
    }
    let rbf = RbfConfig {
        mu_min: get_f64(&mut r)?,
        delta: get_f64(&mut r)?,
        k_max: get_u32(&mut r)? as usize,
    };
    if !rbf.is_valid() {
        return Err(CacheError::Corrupt("invalid RBF config".into()));
    }
    let count = get_u32(&mut r)? as usize;
    let mut graphs = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let n = get_u32(&mut r)? as usize;
        let species = (0..n).map(|_| get_u32(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let segments = (0..n)
            .map(|_| get_u32(&mut r).map(|s| s as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n_graphs = get_u32(&mut r)? as usize;
        let unbounded = get_u32(&mut r)? as usize;
        let n_edges = get_u32(&mut r)? as usize;
        let mut edges = Vec::with_capacity(n_edges.min(1 << 24));
        for _ in 0..n_edges {
            let src = get_u32(&mut r)? as usize;
            let dst = get_u32(&mut r)? as usize;
            let offset = [get_i32(&mut r)?, get_i32(&mut r)?, get_i32(&mut r)?];
            let distance = get_f64(&mut r)?;
            if src >= n || dst >= n || !(distance > 0.0) {
                return Err(CacheError::Corrupt(format!("invalid edge {src}->{dst}")));
            }
            edges.push(Edge {
                src,
                dst,
                distance,
                offset,
            });
        }
        if segments.iter().any(|&s| s >= n_graphs) {
            return Err(CacheError::Corrupt("segment id out of range".into()));
        }
        let mut g = MolecularGraph::from_edges(species, edges, rbf);
        g.segment_ids = segments;
        g.n_graphs = n_graphs;
        g.unbounded_cells = unbounded;
        graphs.push(g);
    }
    Ok((rbf, graphs))
}
