//! Regular periodic grids, grid fields, stencils and FFT convolution.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::model::{ball_volume, ModelError, RateKernel};

/// Regular periodic grid with `n` nodes per axis on `[-L/2, L/2)^dim`.
/// Node `i` along an axis sits at `-L/2 + i h`, `h = L / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, ModelError> {
        if !(1..=3).contains(&dim) {
            return Err(ModelError::InvalidParameter(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 2 {
            return Err(ModelError::InvalidParameter(format!("grid needs at least 2 nodes per axis, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("grid length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.h()
    }

    /// Multi-index of a flat index (last axis fastest).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of a node given by flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim).map(|a| self.coord(idx[a])).collect()
    }

    pub fn from_fn(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.node(k))).collect()
    }

    /// `Σ field · h^d`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        pairwise_sum(field) * self.cell_volume()
    }

    /// Lower node index and fractional offset of `x` along one axis.
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = (x + 0.5 * self.length) / self.h();
        let i = u.floor();
        let f = u - i;
        let n = self.n as i64;
        ((i as i64).rem_euclid(n) as usize, f)
    }

    /// Cloud-in-cell weights of a point: `2^dim` (flat index, weight) pairs.
    pub fn cic(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut lo = [0usize; 3];
        let mut fr = [0.0; 3];
        for a in 0..self.dim {
            let (i, f) = self.locate(x[a]);
            lo[a] = i;
            fr[a] = f;
        }
        let mut out = Vec::with_capacity(1 << self.dim);
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..self.dim {
                if corner >> a & 1 == 1 {
                    idx[a] = (lo[a] + 1) % self.n;
                    w *= fr[a];
                } else {
                    idx[a] = lo[a];
                    w *= 1.0 - fr[a];
                }
            }
            out.push((self.flatten(&idx), w));
        }
        out
    }

    /// Periodic multilinear interpolation.
    pub fn interp(&self, field: &[f64], x: &[f64]) -> f64 {
        self.cic(x).into_iter().map(|(k, w)| w * field[k]).sum()
    }

    /// Adds a point mass, spread by cloud-in-cell, as density.
    pub fn deposit(&self, field: &mut [f64], x: &[f64], mass: f64) {
        let inv = 1.0 / self.cell_volume();
        for (k, w) in self.cic(x) {
            field[k] += mass * w * inv;
        }
    }

    /// Flat index of the node shifted by an integer offset (periodic).
    pub fn shifted(&self, flat: usize, offset: &[i64]) -> usize {
        let idx = self.unflatten(flat);
        let n = self.n as i64;
        let mut out = 0usize;
        for a in 0..self.dim {
            out = out * self.n + (idx[a] as i64 + offset[a]).rem_euclid(n) as usize;
        }
        out
    }
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Per-species densities on a shared grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub time: f64,
    pub species: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl GridField {
    pub fn zeros(grid: Grid, species: Vec<String>) -> Self {
        let data = vec![vec![0.0; grid.len()]; species.len()];
        Self { grid, time: 0.0, species, data }
    }

    pub fn mass(&self, species: usize) -> f64 {
        self.grid.integrate(&self.data[species])
    }

    /// Writes rows `time,species,x[,y[,z]],density`.
    pub fn write_csv_rows<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (s, name) in self.species.iter().enumerate() {
            for (k, v) in self.data[s].iter().enumerate() {
                write!(w, "{},{}", self.time, name)?;
                for c in self.grid.node(k) {
                    write!(w, ",{c}")?;
                }
                writeln!(w, ",{v}")?;
            }
        }
        Ok(())
    }
}

pub fn field_csv_header(dim: usize) -> String {
    let axes = ["x", "y", "z"];
    format!("time,species,{},density", axes[..dim].join(","))
}

/// Sparse convolution stencil: `(offset in cells, weight)` where the weight
/// already includes the cell volume, so `Σ_m w_m f(x + m h) ≈ ∫ K(w) f(x + w) dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub dim: usize,
    pub entries: Vec<(Vec<i64>, f64)>,
}

impl Stencil {
    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: vec![(vec![0; dim], 1.0)] }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Largest offset along any axis.
    pub fn reach(&self) -> i64 {
        self.entries.iter().flat_map(|(o, _)| o.iter().map(|c| c.abs())).max().unwrap_or(0)
    }

    /// Cell-averaged stencil of a radial function `f(r)` supported in `r <= support`.
    ///
    /// Each weight is the integral of `f` over the offset cell, computed
    /// exactly for step functions in 1D and by midpoint subsampling
    /// otherwise. When `exact_total` is given the weights are rescaled to
    /// sum to it.
    pub fn radial(
        grid: &Grid,
        support: f64,
        f: impl Fn(f64) -> f64,
        step_value: Option<f64>,
        exact_total: Option<f64>,
    ) -> Result<Self, ModelError> {
        let h = grid.h();
        let d = grid.dim;
        let max_off = (grid.n as i64 - 1) / 2;
        let reach = ((support / h) + 0.5 + 1e-9).ceil() as i64;
        if reach > max_off {
            return Err(ModelError::InvalidParameter(format!(
                "kernel support {support} too wide for a periodic grid of length {}",
                grid.length
            )));
        }
        let sub = match d {
            1 => 64,
            2 => 16,
            _ => 8,
        };
        let mut entries = Vec::new();
        let span = (2 * reach + 1) as usize;
        for k in 0..span.pow(d as u32) {
            let mut off = vec![0i64; d];
            let mut rem = k;
            for a in (0..d).rev() {
                off[a] = (rem % span) as i64 - reach;
                rem /= span;
            }
            let w = match (d, step_value) {
                (1, Some(v)) => {
                    let lo = (off[0] as f64 - 0.5) * h;
                    let hi = (off[0] as f64 + 0.5) * h;
                    v * (hi.min(support) - lo.max(-support)).max(0.0)
                }
                _ => cell_average(d, &off, h, sub, &f) * grid.cell_volume(),
            };
            if w != 0.0 {
                entries.push((off, w));
            }
        }
        let mut s = Self { dim: d, entries };
        if let Some(t) = exact_total {
            let total = s.total();
            if total > 0.0 {
                for e in s.entries.iter_mut() {
                    e.1 *= t / total;
                }
            }
        }
        Ok(s)
    }

    /// Stencil of a bimolecular rate kernel as a function of `x - y`.
    pub fn for_kernel(grid: &Grid, kernel: &RateKernel) -> Result<Self, ModelError> {
        match kernel {
            RateKernel::Constant { rate } => {
                // covers every cell offset once
                let n = grid.n as i64;
                let w = rate * grid.cell_volume();
                let entries = (0..grid.len())
                    .map(|k| {
                        let idx = grid.unflatten(k);
                        let off = (0..grid.dim).map(|a| centred(idx[a] as i64, n)).collect();
                        (off, w)
                    })
                    .collect();
                Ok(Self { dim: grid.dim, entries })
            }
            RateKernel::Doi { rate, radius } => Self::radial(
                grid,
                *radius,
                |r| if r <= *radius { *rate } else { 0.0 },
                Some(*rate),
                Some(rate * ball_volume(grid.dim, *radius)),
            ),
            RateKernel::TabulatedRadial { .. } => {
                let support = kernel.support().unwrap_or(f64::INFINITY);
                Self::radial(grid, support, |r| kernel.at_distance(r), None, kernel.integral(grid.dim))
            }
        }
    }

    /// Stencil of the mollifier `G_η`; identity when η is below half a cell.
    pub fn for_mollifier(grid: &Grid, m: &crate::model::Mollifier) -> Result<Self, ModelError> {
        if m.eta < 0.5 * grid.h() {
            return Ok(Self::identity(grid.dim));
        }
        Self::radial(grid, m.eta, |r| m.radial_density(r), None, Some(1.0))
    }

    /// Scatter stencil: each `(point, weight)` deposited by cloud-in-cell
    /// relative to the origin node.
    pub fn from_points(grid: &Grid, points: &[(Vec<f64>, f64)]) -> Self {
        let h = grid.h();
        let d = grid.dim;
        let mut map: std::collections::BTreeMap<Vec<i64>, f64> = Default::default();
        for (p, w) in points {
            let mut lo = vec![0i64; d];
            let mut fr = vec![0.0; d];
            for a in 0..d {
                let u = p[a] / h;
                lo[a] = u.floor() as i64;
                fr[a] = u - u.floor();
            }
            for corner in 0..(1usize << d) {
                let mut cw = *w;
                let mut off = lo.clone();
                for a in 0..d {
                    if corner >> a & 1 == 1 {
                        off[a] += 1;
                        cw *= fr[a];
                    } else {
                        cw *= 1.0 - fr[a];
                    }
                }
                if cw != 0.0 {
                    *map.entry(off).or_insert(0.0) += cw;
                }
            }
        }
        Self { dim: d, entries: map.into_iter().collect() }
    }

    /// Stencil with every offset negated.
    pub fn reflected(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|(o, w)| (o.iter().map(|c| -c).collect(), *w)).collect(),
        }
    }
}

fn centred(i: i64, n: i64) -> i64 {
    if i >= (n + 1) / 2 {
        i - n
    } else {
        i
    }
}

fn cell_average(d: usize, off: &[i64], h: f64, sub: usize, f: &impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let count = sub.pow(d as u32);
    for k in 0..count {
        let mut rem = k;
        let mut r2 = 0.0;
        for &o in off.iter().take(d) {
            let j = rem % sub;
            rem /= sub;
            let x = (o as f64 - 0.5 + (j as f64 + 0.5) / sub as f64) * h;
            r2 += x * x;
        }
        total += f(r2.sqrt());
    }
    total / count as f64
}

/// Multi-dimensional complex FFT over a row-major tensor (last axis fastest).
pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total = self.len();
        assert_eq!(buf.len(), total);
        let mut stride = 1;
        for a in (0..self.shape.len()).rev() {
            let n = self.shape[a];
            let plan = &plans[a];
            if stride == 1 {
                plan.process(buf);
            } else {
                let mut line = vec![Complex64::default(); n];
                let block = n * stride;
                for outer in (0..total).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = buf[base + i * stride];
                        }
                        plan.process(&mut line);
                        for (i, v) in line.iter().enumerate() {
                            buf[base + i * stride] = *v;
                        }
                    }
                }
            }
            stride *= n;
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.forward);
    }

    /// Inverse transform including the `1/len` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inverse);
        let s = 1.0 / self.len() as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    /// Frequency index of position `i` along `axis`, in `(-n/2, n/2]`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        centred(i as i64, self.shape[axis] as i64)
    }
}

/// Eigenvalue of the periodic second-difference operator for mode `k`.
pub fn laplacian_symbol(k: usize, n: usize, h: f64) -> f64 {
    (2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos() - 2.0) / (h * h)
}

/// Applies `out(x) = Σ_m w_m f(x + m h)` on a periodic grid, directly for
/// narrow stencils and by FFT otherwise.
#[derive(Debug)]
pub struct Convolver {
    grid: Grid,
    stencil: Stencil,
    spectrum: Option<(FftNd, Vec<Complex64>)>,
}

/// Stencils reaching further than this many cells use the FFT path.
pub const FFT_REACH: i64 = 8;

impl Convolver {
    pub fn new(grid: Grid, stencil: Stencil) -> Self {
        let spectrum = (stencil.reach() > FFT_REACH).then(|| {
            let fft = FftNd::new(&grid.shape());
            // out = f ⋆ s, so place weight w_m at index -m
            let mut k = vec![Complex64::default(); grid.len()];
            for (off, w) in &stencil.entries {
                let neg: Vec<i64> = off.iter().map(|c| -c).collect();
                k[grid.shifted(0, &neg)] += w;
            }
            fft.forward(&mut k);
            (fft, k)
        });
        Self { grid, stencil, spectrum }
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        match &self.spectrum {
            Some((fft, k)) => {
                let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut buf);
                for (b, s) in buf.iter_mut().zip(k) {
                    *b *= s;
                }
                fft.inverse(&mut buf);
                buf.into_iter().map(|c| c.re).collect()
            }
            None => self.apply_direct(f),
        }
    }

    pub fn apply_direct(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for (off, w) in &self.stencil.entries {
            for (k, o) in out.iter_mut().enumerate() {
                *o += w * f[g.shifted(k, off)];
            }
        }
        out
    }
}
