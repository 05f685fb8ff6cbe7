use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HurstIndex, TimeGrid, VolterraKernel};
use crate::error::{Error, Result};
use crate::quadrature::{endpoint_power, gl32};

const MAGIC: &[u8; 5] = b"FBMK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureId {
    /// Power substitution with 32-point Gauss–Legendre panels.
    PowerGl32,
}

impl QuadratureId {
    pub fn as_str(self) -> &'static str {
        match self {
            QuadratureId::PowerGl32 => "power_gl32",
        }
    }
}

/// Lower-triangular tabulation of `K_H(t_i, ·)` on grid cells.
///
/// Entry `(i, j)`, `j < i`, is the root-mean-square of `K_H(t_i, s)` over the
/// cell `[t_j, t_{j+1}]`, so that `Σ_j k[i][j]² Δ = ∫_0^{t_i} K_H(t_i, s)² ds`.
/// Entries with `j ≥ i` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    h: HurstIndex,
    grid: TimeGrid,
    quadrature: QuadratureId,
    rows: Vec<f64>,
}

impl KernelTable {
    pub fn compute(h: HurstIndex, grid: TimeGrid) -> Result<Self> {
        let kernel = VolterraKernel::new(h)?;
        let n = grid.n_steps();
        let dt = grid.dt();
        let hv = h.value();
        let mut rows = Vec::with_capacity((n + 1) * (n + 2) / 2);
        for i in 0..=n {
            let t = grid.point(i);
            for j in 0..=i {
                if j == i {
                    rows.push(0.0);
                    continue;
                }
                let (a, b) = (grid.point(j), grid.point(j + 1));
                let sq = |s: f64| {
                    let k = kernel.value_unchecked(t, s);
                    k * k
                };
                let pa = if j == 0 { 1.0 - 2.0 * hv } else { 0.0 };
                let pb = if j + 1 == i { 2.0 * hv - 1.0 } else { 0.0 };
                let integral = if pa == 0.0 && pb == 0.0 {
                    gl32().integrate(a, b, sq)
                } else {
                    endpoint_power(sq, a, b, pa, pb, 1)
                };
                rows.push((integral / dt).sqrt());
            }
        }
        Ok(Self { h, grid, quadrature: QuadratureId::PowerGl32, rows })
    }

    pub fn hurst(&self) -> HurstIndex {
        self.h
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn quadrature(&self) -> QuadratureId {
        self.quadrature
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i * (i + 1) / 2 + j]
        }
    }

    /// `Σ_j k[i][j]² Δ`, which approximates `t_i^{2H}`.
    pub fn row_square_sum(&self, i: usize) -> f64 {
        let dt = self.grid.dt();
        (0..=i).map(|j| self.get(i, j).powi(2) * dt).sum()
    }

    /// Cache file name keyed by `(H, T, n, quadrature)`.
    pub fn cache_path(dir: &Path, h: HurstIndex, grid: TimeGrid, quadrature: QuadratureId) -> PathBuf {
        dir.join(format!(
            "kernel_H{}_T{}_n{}_{}.fbmk",
            h.value(),
            grid.t_end(),
            grid.n_steps(),
            quadrature.as_str()
        ))
    }

    /// Load from `dir` if a matching file exists, otherwise compute and store.
    pub fn cached(dir: &Path, h: HurstIndex, grid: TimeGrid) -> Result<Self> {
        let path = Self::cache_path(dir, h, grid, QuadratureId::PowerGl32);
        if path.exists() {
            let table = Self::read_from(&mut std::fs::File::open(&path)?)?;
            if table.h == h && table.grid == grid {
                return Ok(table);
            }
            log::warn!("kernel cache {} does not match its key; recomputing", path.display());
        }
        let table = Self::compute(h, grid)?;
        std::fs::create_dir_all(dir)?;
        table.write_to(&mut std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        Ok(table)
    }

    /// `FBMK1` format: magic, `H` (f64), `T` (f64), `n` (u64), then the
    /// row-major lower triangle `(i, j ≤ i)` for `i = 0..=n`, little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.h.value().to_le_bytes())?;
        w.write_all(&self.grid.t_end().to_le_bytes())?;
        w.write_all(&(self.grid.n_steps() as u64).to_le_bytes())?;
        for v in &self.rows {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::KernelFile("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let h = HurstIndex::new(f64::from_le_bytes(b8))?;
        r.read_exact(&mut b8)?;
        let t_end = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let grid = TimeGrid::new(t_end, n)?;
        let len = (n + 1) * (n + 2) / 2;
        let mut rows = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8).map_err(|_| Error::KernelFile("truncated table".into()))?;
            rows.push(f64::from_le_bytes(b8));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::KernelFile(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { h, grid, quadrature: QuadratureId::PowerGl32, rows })
    }
}
