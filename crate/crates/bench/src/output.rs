//! CSV reports and the binary solution format.
//!
//! `solution.bin` layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "STIGASOL"
//! version    u32      1
//! blocks     u32      number of slabs (1 for steady problems)
//! transient  u32      0 or 1
//! per block:
//!   dirs     u32
//!   per direction: degree u32, knot count u64, knots f64...
//!   count    u64      number of coefficients
//!   coeffs   f64...   lexicographic order, first direction fastest
//!   kinds    u8...    0 free, 1 Dirichlet, 2 initial
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use stiga::splines::KnotVector;
use stiga::stabilization::DmpReport;
use stiga::tensor::{NodeKind, TensorSpace};
use stiga::timeslabs::Trajectory;

use crate::convergence::{LevelResult, RateRow};
use crate::BenchError;

const MAGIC: &[u8; 8] = b"STIGASOL";
const VERSION: u32 = 1;

pub fn write_errors_csv(rows: &[LevelResult], out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "order,level,h,dt,l2_rel,h1_rel")?;
    for r in rows {
        writeln!(w, "{},{},{:e},{:e},{:e},{:e}", r.order, r.level, r.h, r.dt, r.l2, r.h1)?;
    }
    w.flush()
}

pub fn write_rates_csv(rows: &[RateRow], out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "order,slabs,l2_rate,h1_rate")?;
    for r in rows {
        writeln!(w, "{},{},{:.4},{:.4}", r.order, r.slabs, r.l2_rate, r.h1_rate)?;
    }
    w.flush()
}

/// One row per slab.
pub fn write_dmp_csv(reports: &[DmpReport<f64>], out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "slab,min,max,violation,extrema_count,theorem1_violations")?;
    for (l, r) in reports.iter().enumerate() {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{},{}",
            l,
            r.min,
            r.max,
            r.violation,
            r.extrema.len(),
            r.theorem1_violations
        )?;
    }
    w.flush()
}

/// `coords` names the point components, e.g. `["x", "t"]`.
pub fn write_profile_csv(samples: &[(f64, Vec<f64>, f64)], coords: &[&str], out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "s,{},u", coords.join(","))?;
    for (s, pt, v) in samples {
        write!(w, "{s:e}")?;
        for c in pt {
            write!(w, ",{c:e}")?;
        }
        writeln!(w, ",{v:e}")?;
    }
    w.flush()
}

/// Iteration histories of all slabs.
pub fn write_iterations_csv(traj: &Trajectory<f64>, out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "slab,iter,update,residual,phase")?;
    for (l, s) in traj.slabs.iter().enumerate() {
        for r in &s.history {
            writeln!(w, "{},{},{:e},{:e},{}", l, r.iter, r.update, r.residual, r.phase)?;
        }
    }
    w.flush()
}

/// Coefficient block of one slab as stored in `solution.bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBlock {
    pub space: TensorSpace<f64>,
    pub coeffs: Vec<f64>,
    pub kinds: Vec<NodeKind>,
}

pub fn blocks_of(traj: &Trajectory<f64>) -> Vec<SolutionBlock> {
    traj.slabs
        .iter()
        .map(|s| SolutionBlock {
            space: s.space.clone(),
            coeffs: s.coeffs.clone(),
            kinds: s.constraints.kinds.clone(),
        })
        .collect()
}

fn kind_code(k: NodeKind) -> u8 {
    match k {
        NodeKind::Free => 0,
        NodeKind::Dirichlet => 1,
        NodeKind::Initial => 2,
    }
}

pub fn write_solution(blocks: &[SolutionBlock], out: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let transient = blocks.first().is_some_and(|b| b.space.is_transient());
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    w.write_all(&u32::from(transient).to_le_bytes())?;
    for b in blocks {
        let dirs = b.space.directions();
        w.write_all(&(dirs.len() as u32).to_le_bytes())?;
        for k in dirs {
            w.write_all(&(k.degree() as u32).to_le_bytes())?;
            w.write_all(&(k.knots().len() as u64).to_le_bytes())?;
            for x in k.knots() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.write_all(&(b.coeffs.len() as u64).to_le_bytes())?;
        for c in &b.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        let kinds: Vec<u8> = b.kinds.iter().map(|&k| kind_code(k)).collect();
        w.write_all(&kinds)?;
    }
    w.flush()
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    read_array::<4>(r).map(u32::from_le_bytes)
}

fn read_len(r: &mut impl Read, limit: u64) -> Result<usize, BenchError> {
    let n = u64::from_le_bytes(read_array::<8>(r)?);
    if n > limit {
        return Err(BenchError::Format(format!("length {n} exceeds {limit}")));
    }
    Ok(n as usize)
}

fn read_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| read_array::<8>(r).map(f64::from_le_bytes)).collect()
}

pub fn read_solution(input: impl Read) -> Result<Vec<SolutionBlock>, BenchError> {
    let mut r = BufReader::new(input);
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(BenchError::Format("not a solution file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(BenchError::Format(format!("unsupported version {version}")));
    }
    let n_blocks = read_u32(&mut r)?;
    let transient = read_u32(&mut r)? != 0;
    let mut blocks = Vec::with_capacity(n_blocks.min(1 << 16) as usize);
    for _ in 0..n_blocks {
        let dirs = read_u32(&mut r)? as usize;
        if !(1..=3).contains(&dirs) {
            return Err(BenchError::Format(format!("{dirs} directions")));
        }
        let mut kvs = Vec::with_capacity(dirs);
        for _ in 0..dirs {
            let degree = read_u32(&mut r)? as usize;
            let n = read_len(&mut r, 1 << 32)?;
            kvs.push(KnotVector::from_knots(read_f64s(&mut r, n)?, degree)?);
        }
        let space = TensorSpace::new(kvs, transient)?;
        let n = read_len(&mut r, 1 << 40)?;
        if n != space.len() {
            return Err(BenchError::Format("coefficient count does not match the knot vectors".into()));
        }
        let coeffs = read_f64s(&mut r, n)?;
        let mut codes = vec![0u8; n];
        r.read_exact(&mut codes)?;
        let kinds = codes
            .into_iter()
            .map(|c| match c {
                0 => Ok(NodeKind::Free),
                1 => Ok(NodeKind::Dirichlet),
                2 => Ok(NodeKind::Initial),
                other => Err(BenchError::Format(format!("node kind {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        blocks.push(SolutionBlock { space, coeffs, kinds });
    }
    Ok(blocks)
}

pub fn save_solution(blocks: &[SolutionBlock], path: &Path) -> io::Result<()> {
    write_solution(blocks, File::create(path)?)
}

pub fn load_solution(path: &Path) -> Result<Vec<SolutionBlock>, BenchError> {
    read_solution(File::open(path)?)
}
