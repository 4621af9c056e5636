//! Cubical cochain complex on the spatial box Σ.
//!
//! The complex is staggered. Primal `k`-cells carry `(legs, position)` where
//! `legs` is the set of axes the cell extends along. Dual `j`-cochains live on
//! the dual cells of primal `(d-j)`-cells and share their storage layout, so
//! the diagonal Hodge maps between the two are elementwise.
//!
//! Along axis `a`, a cell with `a ∈ legs` has positions `0..N_a`; otherwise
//! `0..=N_a`, or `0..N_a` when the axis is periodic. Blocks are ordered by
//! leg set (lexicographic), positions row-major with axis 0 slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{basis, basis_rank, binomial, shuffle_sign, AlgebraForm, MultiIndex};
use crate::metric::MetricField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spacetime dimension; Σ has `n - 1` axes.
    pub n: usize,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    /// Per-axis periodic flag, for interior-only tests.
    pub periodic: Vec<bool>,
    pub dt: f64,
    pub t0: f64,
}

impl GridSpec {
    /// Cubic box `[0, length]^{n-1}` with `cells` per axis and no periodic axes.
    pub fn cube(n: usize, cells: usize, length: f64, dt: f64) -> Self {
        let d = n.saturating_sub(1);
        GridSpec { n, cells: vec![cells; d], lengths: vec![length; d], periodic: vec![false; d], dt, t0: 0.0 }
    }

    pub fn periodic_cube(n: usize, cells: usize, length: f64, dt: f64) -> Self {
        let mut g = Self::cube(n, cells, length, dt);
        g.periodic.iter_mut().for_each(|p| *p = true);
        g
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.n) {
            return Err(Error::InvalidArgument(format!("n={} out of supported range [2,5]", self.n)));
        }
        let d = self.n - 1;
        if self.cells.len() != d || self.lengths.len() != d || self.periodic.len() != d {
            return Err(Error::InvalidArgument(format!("grid needs {d} spatial axes")));
        }
        if self.cells.iter().any(|&c| c < 4) {
            return Err(Error::InvalidArgument("cells_per_axis must be at least 4".into()));
        }
        if self.lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("axis lengths must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidArgument("t0 must be finite".into()));
        }
        Ok(())
    }
}

/// Storage block of one leg set.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub legs: MultiIndex,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn index(&self, pos: &[usize]) -> usize {
        self.offset + pos.iter().zip(&self.strides).map(|(p, s)| p * s).sum::<usize>()
    }
}

/// Cell bookkeeping for a cubical complex of any dimension (including the
/// zero-dimensional face of a one-dimensional box).
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    dim: usize,
    cells: Vec<usize>,
    periodic: Vec<bool>,
    blocks: Vec<Vec<Block>>,
    lens: Vec<usize>,
}

impl Layout {
    pub fn new(cells: Vec<usize>, periodic: Vec<bool>) -> Self {
        let dim = cells.len();
        let mut blocks = Vec::with_capacity(dim + 1);
        let mut lens = Vec::with_capacity(dim + 1);
        for k in 0..=dim {
            let mut offset = 0;
            let mut row = Vec::new();
            for legs in basis(dim, k) {
                let shape: Vec<usize> = (0..dim)
                    .map(|a| if legs.contains(a) || periodic[a] { cells[a] } else { cells[a] + 1 })
                    .collect();
                let mut strides = vec![1; dim];
                for a in (0..dim.saturating_sub(1)).rev() {
                    strides[a] = strides[a + 1] * shape[a + 1];
                }
                let len = shape.iter().product();
                row.push(Block { legs, shape, strides, offset, len });
                offset += len;
            }
            blocks.push(row);
            lens.push(offset);
        }
        Layout { dim, cells, periodic, blocks, lens }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    /// Number of primal `k`-cells.
    pub fn len(&self, k: usize) -> usize {
        self.lens[k]
    }

    pub fn blocks(&self, k: usize) -> &[Block] {
        &self.blocks[k]
    }

    pub fn block(&self, legs: MultiIndex) -> &Block {
        &self.blocks[legs.degree()][basis_rank(self.dim, legs)]
    }

    /// Whether a primal cell lies in the (non-periodic) boundary of the box.
    pub fn on_boundary(&self, legs: MultiIndex, pos: &[usize]) -> bool {
        (0..self.dim).any(|a| !self.periodic[a] && !legs.contains(a) && (pos[a] == 0 || pos[a] == self.cells[a]))
    }

    /// Visit every primal `k`-cell in storage order.
    pub fn for_each_cell<F: FnMut(usize, MultiIndex, &[usize])>(&self, k: usize, mut f: F) {
        let mut pos = vec![0usize; self.dim];
        for blk in &self.blocks[k] {
            pos.iter_mut().for_each(|p| *p = 0);
            for i in 0..blk.len {
                f(blk.offset + i, blk.legs, &pos);
                advance(&mut pos, &blk.shape);
            }
        }
    }

    /// Primal coboundary from degree `k` to `k + 1`.
    pub fn d_primal(&self, k: usize, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.lens[k]);
        debug_assert_eq!(out.len(), self.lens[k + 1]);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut pos = vec![0usize; self.dim];
        for blk in &self.blocks[k + 1] {
            for (p, a) in blk.legs.axes().enumerate() {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                let src = self.block(blk.legs.without(a));
                let wrap = self.periodic[a];
                let n_a = self.cells[a];
                pos.iter_mut().for_each(|q| *q = 0);
                for i in 0..blk.len {
                    let lo = src.index(&pos);
                    let hi = if wrap && pos[a] + 1 == n_a { lo - (n_a - 1) * src.strides[a] } else { lo + src.strides[a] };
                    out[blk.offset + i] += sign * (x[hi] - x[lo]);
                    advance(&mut pos, &blk.shape);
                }
            }
        }
    }

    /// Transpose of [`Layout::d_primal`] from degree `k + 1` to `k`
    /// (the cellular boundary operator).
    pub fn d_primal_transpose(&self, k: usize, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.lens[k + 1]);
        debug_assert_eq!(out.len(), self.lens[k]);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut pos = vec![0usize; self.dim];
        for blk in &self.blocks[k] {
            for a in (0..self.dim).filter(|&a| !blk.legs.contains(a)) {
                let up = blk.legs.with(a);
                let sign = if up.position(a).unwrap() % 2 == 0 { 1.0 } else { -1.0 };
                let src = self.block(up);
                let wrap = self.periodic[a];
                let n_a = self.cells[a];
                pos.iter_mut().for_each(|q| *q = 0);
                for i in 0..blk.len {
                    let mut acc = 0.0;
                    let pa = pos[a];
                    if pa > 0 {
                        pos[a] = pa - 1;
                        acc += y[src.index(&pos)];
                        pos[a] = pa;
                    } else if wrap {
                        pos[a] = n_a - 1;
                        acc += y[src.index(&pos)];
                        pos[a] = pa;
                    }
                    if pa < n_a {
                        acc -= y[src.index(&pos)];
                    }
                    out[blk.offset + i] += sign * acc;
                    advance(&mut pos, &blk.shape);
                }
            }
        }
    }
}

fn advance(pos: &mut [usize], shape: &[usize]) {
    for a in (0..pos.len()).rev() {
        pos[a] += 1;
        if pos[a] < shape[a] {
            return;
        }
        pos[a] = 0;
    }
}

pub(crate) fn parity(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Whether a cochain lives on primal cells or on their duals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Primal,
    Dual,
}

/// Discrete `k`-form on Σ. A dual `k`-cochain is stored on the layout of
/// primal `(d-k)`-cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cochain {
    pub kind: Kind,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl Cochain {
    pub fn zeros(grid: &Grid, kind: Kind, degree: usize) -> Self {
        let len = grid.cochain_len(kind, degree);
        Cochain { kind, degree, values: vec![0.0; len] }
    }

    pub fn from_values(grid: &Grid, kind: Kind, degree: usize, values: Vec<f64>) -> Result<Self> {
        if degree > grid.d() {
            return Err(Error::DegreeOverflow { degree, max: grid.d() });
        }
        let len = grid.cochain_len(kind, degree);
        if values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: values.len() });
        }
        Ok(Cochain { kind, degree, values })
    }

    pub fn scale(&self, s: f64) -> Self {
        Cochain { kind: self.kind, degree: self.degree, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn axpy(&mut self, alpha: f64, x: &Cochain) {
        debug_assert_eq!((self.kind, self.degree), (x.kind, x.degree));
        self.values.iter_mut().zip(&x.values).for_each(|(y, x)| *y += alpha * x);
    }

    pub fn add(&self, other: &Cochain) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.axpy(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &Cochain) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Unweighted Euclidean norm of the value vector.
    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_same(&self, other: &Cochain) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch(format!("{:?} vs {:?}", self.kind, other.kind)));
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { left: self.degree, right: other.degree });
        }
        if self.values.len() != other.values.len() {
            return Err(Error::LengthMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Low,
    High,
}

impl Side {
    /// Sign of the outward normal along the axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

/// One face `{x_axis = 0}` or `{x_axis = L_axis}` of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

/// Cochain on one face, over the face's own cubical complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCochain {
    pub face: Face,
    pub kind: Kind,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl BoundaryCochain {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-face bookkeeping of boundary cells: for each face and degree, the
/// tangential cells (lying in the face) and the cells carrying a normal leg
/// that touch it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub faces: Vec<Face>,
    /// `tangential[f][k]`: primal `k`-cells lying in face `f`.
    pub tangential: Vec<Vec<Vec<usize>>>,
    /// `normal[f][k]`: primal `k`-cells with a leg along the normal of face
    /// `f` and an endpoint on it.
    pub normal: Vec<Vec<Vec<usize>>>,
}

/// A validated grid with precomputed cell weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    h: Vec<f64>,
    layout: Layout,
    /// `weight[k][i] = Π_{b∉S} ℓ*_b / Π_{b∈S} h_b` for primal `k`-cell `i`.
    weight: Vec<Vec<f64>>,
    boundary_mask: Vec<Vec<bool>>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let h: Vec<f64> = spec.lengths.iter().zip(&spec.cells).map(|(l, n)| l / *n as f64).collect();
        let layout = Layout::new(spec.cells.clone(), spec.periodic.clone());
        let d = layout.dim();
        let mut weight = Vec::with_capacity(d + 1);
        let mut boundary_mask = Vec::with_capacity(d + 1);
        for k in 0..=d {
            let mut w = vec![0.0; layout.len(k)];
            let mut m = vec![false; layout.len(k)];
            layout.for_each_cell(k, |i, legs, pos| {
                let mut v = 1.0;
                for b in 0..d {
                    if legs.contains(b) {
                        v /= h[b];
                    } else {
                        v *= dual_length(&spec, &h, b, pos[b]);
                    }
                }
                w[i] = v;
                m[i] = layout.on_boundary(legs, pos);
            });
            weight.push(w);
            boundary_mask.push(m);
        }
        Ok(Grid { spec, h, layout, weight, boundary_mask })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Spatial dimension `d = n - 1`.
    pub fn d(&self) -> usize {
        self.layout.dim()
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cochain_len(&self, kind: Kind, degree: usize) -> usize {
        self.layout.len(self.layout_degree(kind, degree))
    }

    /// Degree of the primal cells that index a cochain.
    pub fn layout_degree(&self, kind: Kind, degree: usize) -> usize {
        match kind {
            Kind::Primal => degree,
            Kind::Dual => self.d() - degree,
        }
    }

    /// `Π_{b∉S} ℓ*_b / Π_{b∈S} h_b` on primal `k`-cells.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weight[k]
    }

    /// Whether each primal `k`-cell lies in `∂Σ`.
    pub fn boundary_mask(&self, k: usize) -> &[bool] {
        &self.boundary_mask[k]
    }

    /// Length of the dual edge along `axis` through vertex position `pos`.
    pub fn dual_length(&self, axis: usize, pos: usize) -> f64 {
        dual_length(&self.spec, &self.h, axis, pos)
    }

    /// Centre of a primal cell.
    pub fn center(&self, legs: MultiIndex, pos: &[usize]) -> Vec<f64> {
        (0..self.d()).map(|a| (pos[a] as f64 + if legs.contains(a) { 0.5 } else { 0.0 }) * self.h[a]).collect()
    }

    pub fn primal_measure(&self, legs: MultiIndex) -> f64 {
        legs.axes().map(|a| self.h[a]).product()
    }

    pub fn dual_measure(&self, legs: MultiIndex, pos: &[usize]) -> f64 {
        (0..self.d()).filter(|&a| !legs.contains(a)).map(|a| self.dual_length(a, pos[a])).product()
    }

    /// Geometric centres of every primal `k`-cell, in storage order.
    pub fn centers(&self, k: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.layout.len(k));
        self.layout.for_each_cell(k, |_, legs, pos| out.push(self.center(legs, pos)));
        out
    }

    pub fn faces(&self) -> Vec<Face> {
        let mut out = Vec::new();
        for axis in 0..self.d() {
            if !self.spec.periodic[axis] {
                out.push(Face { axis, side: Side::Low });
                out.push(Face { axis, side: Side::High });
            }
        }
        out
    }

    pub fn boundary_data(&self) -> BoundaryData {
        let faces = self.faces();
        let d = self.d();
        let mut tangential = Vec::new();
        let mut normal = Vec::new();
        for f in &faces {
            let wall = match f.side {
                Side::Low => 0,
                Side::High => self.spec.cells[f.axis],
            };
            let mut tang = vec![Vec::new(); d + 1];
            let mut norm = vec![Vec::new(); d + 1];
            for (k, (t, nrm)) in tang.iter_mut().zip(norm.iter_mut()).enumerate() {
                self.layout.for_each_cell(k, |i, legs, pos| {
                    if legs.contains(f.axis) {
                        let touches = match f.side {
                            Side::Low => pos[f.axis] == 0,
                            Side::High => pos[f.axis] + 1 == wall,
                        };
                        if touches {
                            nrm.push(i);
                        }
                    } else if pos[f.axis] == wall {
                        t.push(i);
                    }
                });
            }
            tangential.push(tang);
            normal.push(norm);
        }
        BoundaryData { faces, tangential, normal }
    }

    fn check_face(&self, face: Face) -> Result<()> {
        if face.axis >= self.d() || self.spec.periodic[face.axis] {
            return Err(Error::InvalidArgument(format!("invalid face {face:?}")));
        }
        Ok(())
    }

    /// Complex of a face: the remaining axes with their periodic flags.
    pub fn face_layout(&self, face: Face) -> Result<Layout> {
        self.check_face(face)?;
        let axes = face_axes(self.d(), face.axis);
        Ok(Layout::new(
            axes.iter().map(|&a| self.spec.cells[a]).collect(),
            axes.iter().map(|&a| self.spec.periodic[a]).collect(),
        ))
    }

    fn check(&self, c: &Cochain) -> Result<()> {
        if c.degree > self.d() {
            return Err(Error::DegreeOverflow { degree: c.degree, max: self.d() });
        }
        let len = self.cochain_len(c.kind, c.degree);
        if c.values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: c.values.len() });
        }
        Ok(())
    }

    // ---- differentials ----

    /// Primal coboundary.
    pub fn d_primal(&self, c: &Cochain) -> Result<Cochain> {
        self.check(c)?;
        if c.kind != Kind::Primal {
            return Err(Error::KindMismatch("d_primal needs a primal cochain".into()));
        }
        if c.degree >= self.d() {
            return Err(Error::DegreeOverflow { degree: c.degree + 1, max: self.d() });
        }
        let mut out = Cochain::zeros(self, Kind::Primal, c.degree + 1);
        self.layout.d_primal(c.degree, &c.values, &mut out.values);
        Ok(out)
    }

    /// Dual coboundary without the boundary projection:
    /// `(-1)^{d-j} ∂`, with `∂` the transpose of the primal coboundary.
    pub fn d_dual_full(&self, c: &Cochain) -> Result<Cochain> {
        self.check(c)?;
        if c.kind != Kind::Dual {
            return Err(Error::KindMismatch("d_dual needs a dual cochain".into()));
        }
        let d = self.d();
        let j = c.degree;
        if j >= d {
            return Err(Error::DegreeOverflow { degree: j + 1, max: d });
        }
        let mut out = Cochain::zeros(self, Kind::Dual, j + 1);
        self.layout.d_primal_transpose(d - j - 1, &c.values, &mut out.values);
        if (d - j) % 2 == 1 {
            out.values.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(out)
    }

    /// Dual coboundary of the relative complex: [`Grid::d_dual_full`]
    /// followed by [`Grid::project_relative`].
    pub fn d_dual(&self, c: &Cochain) -> Result<Cochain> {
        let mut out = self.d_dual_full(c)?;
        self.project_relative(&mut out);
        Ok(out)
    }

    /// Zero dual values on primal cells in `∂Σ`, i.e. the components with a
    /// leg normal to the boundary. Primal cochains are left untouched.
    pub fn project_relative(&self, c: &mut Cochain) {
        if c.kind != Kind::Dual {
            return;
        }
        let k = self.layout_degree(c.kind, c.degree);
        for (v, &b) in c.values.iter_mut().zip(&self.boundary_mask[k]) {
            if b {
                *v = 0.0;
            }
        }
    }

    /// Coboundary of either kind; dual cochains use the relative complex.
    pub fn d_sigma(&self, c: &Cochain) -> Result<Cochain> {
        match c.kind {
            Kind::Primal => self.d_primal(c),
            Kind::Dual => self.d_dual(c),
        }
    }

    // ---- Hodge ----

    /// Hodge dual with respect to `h_t = a(t)² δ`: primal `k` to dual `d-k`
    /// and dual `j` to primal `d-j`.
    pub fn hodge_sigma(&self, c: &Cochain, t: f64, m: &MetricField) -> Result<Cochain> {
        self.check(c)?;
        let d = self.d();
        let a = m.a(t);
        match c.kind {
            Kind::Primal => {
                let k = c.degree;
                let s = a.powi(d as i32 - 2 * k as i32);
                let w = &self.weight[k];
                Ok(Cochain {
                    kind: Kind::Dual,
                    degree: d - k,
                    values: c.values.iter().zip(w).map(|(v, w)| v * w * s).collect(),
                })
            }
            Kind::Dual => {
                let j = c.degree;
                let s = parity(j * (d - j)) * a.powi(d as i32 - 2 * j as i32);
                let w = &self.weight[d - j];
                Ok(Cochain {
                    kind: Kind::Primal,
                    degree: d - j,
                    values: c.values.iter().zip(w).map(|(v, w)| v * s / w).collect(),
                })
            }
        }
    }

    /// Inverse of [`Grid::hodge_sigma`].
    pub fn hodge_sigma_inv(&self, c: &Cochain, t: f64, m: &MetricField) -> Result<Cochain> {
        let d = self.d();
        let out = self.hodge_sigma(c, t, m)?;
        // ** = (-1)^{k(d-k)} on Σ
        let k = c.degree;
        Ok(if (k * (d - k)).is_multiple_of(2) { out } else { out.scale(-1.0) })
    }

    /// `δ = (-1)^k *^{-1} d *`, with the relative dual complex.
    pub fn codiff_sigma(&self, c: &Cochain, t: f64, m: &MetricField) -> Result<Cochain> {
        self.check(c)?;
        if c.degree == 0 {
            return Err(Error::DegreeUnderflow { op: "codifferential", degree: 0 });
        }
        let star = self.hodge_sigma(c, t, m)?;
        let dstar = self.d_sigma(&star)?;
        Ok(self.hodge_sigma_inv(&dstar, t, m)?.scale(parity(c.degree)))
    }

    /// Boundary term of summation by parts for primal `a` (degree `k-1`) and
    /// primal `b` (degree `k`):
    /// `⟨d a, b⟩ - ⟨a, δ b⟩ = (-1)^k Σ_{∂Σ cells} a · (d_full * b)`.
    pub fn sbp_boundary_term(&self, a: &Cochain, b: &Cochain, t: f64, m: &MetricField) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        if a.kind != Kind::Primal || b.kind != Kind::Primal || a.degree + 1 != b.degree {
            return Err(Error::InvalidArgument("boundary term needs primal (k-1, k) cochains".into()));
        }
        let full = self.d_dual_full(&self.hodge_sigma(b, t, m)?)?;
        let mask = &self.boundary_mask[a.degree];
        let mut acc = 0.0;
        for ((x, y), &on) in a.values.iter().zip(&full.values).zip(mask) {
            if on {
                acc += x * y;
            }
        }
        Ok(parity(b.degree) * acc)
    }

    // ---- pairings ----

    /// `Σ ⟨a, b⟩ · measure`, positive definite for either kind.
    pub fn pair_sigma(&self, a: &Cochain, b: &Cochain, t: f64, m: &MetricField) -> Result<f64> {
        self.check(a)?;
        a.check_same(b)?;
        let d = self.d();
        let k = self.layout_degree(a.kind, a.degree);
        let w = &self.weight[k];
        let am = m.a(t);
        let mut acc = 0.0;
        match a.kind {
            Kind::Primal => {
                for i in 0..a.values.len() {
                    acc += a.values[i] * b.values[i] * w[i];
                }
                Ok(acc * am.powi(d as i32 - 2 * a.degree as i32))
            }
            Kind::Dual => {
                for i in 0..a.values.len() {
                    acc += a.values[i] * b.values[i] / w[i];
                }
                Ok(acc * am.powi(d as i32 - 2 * a.degree as i32))
            }
        }
    }

    /// Pairing with a pointwise positive weight function of the cell index.
    pub fn pair_weighted(&self, a: &Cochain, b: &Cochain, t: f64, m: &MetricField, rho: &[f64]) -> Result<f64> {
        self.check(a)?;
        a.check_same(b)?;
        let d = self.d();
        let k = self.layout_degree(a.kind, a.degree);
        let w = &self.weight[k];
        let mut acc = 0.0;
        for i in 0..a.values.len() {
            let wi = if a.kind == Kind::Primal { w[i] } else { 1.0 / w[i] };
            acc += a.values[i] * b.values[i] * wi * rho[i];
        }
        Ok(acc * m.a(t).powi(d as i32 - 2 * a.degree as i32))
    }

    pub fn norm_sigma(&self, a: &Cochain, t: f64, m: &MetricField) -> Result<f64> {
        Ok(self.pair_sigma(a, a, t, m)?.max(0.0).sqrt())
    }

    // ---- sampling ----

    /// Midpoint sample of a smooth spatial form on primal `k`-cells:
    /// `ω_S(centre) · Π_{S} h`. `f` returns coordinate-basis coefficients.
    pub fn sample_primal<F: Fn(&[f64]) -> AlgebraForm>(&self, k: usize, f: F) -> Cochain {
        let mut out = Cochain::zeros(self, Kind::Primal, k);
        self.layout.for_each_cell(k, |i, legs, pos| {
            let x = self.center(legs, pos);
            out.values[i] = f(&x).coeff(legs) * self.primal_measure(legs);
        });
        out
    }

    /// Midpoint sample on dual `j`-cells: `ε(P, C) · ω_C(centre) · Π_C ℓ*`
    /// for primal cell `P` with complement `C`.
    pub fn sample_dual<F: Fn(&[f64]) -> AlgebraForm>(&self, j: usize, f: F) -> Cochain {
        let d = self.d();
        let mut out = Cochain::zeros(self, Kind::Dual, j);
        self.layout.for_each_cell(d - j, |i, legs, pos| {
            let x = self.center(legs, pos);
            let comp = legs.complement(d);
            out.values[i] = shuffle_sign(legs, comp) * f(&x).coeff(comp) * self.dual_measure(legs, pos);
        });
        out
    }

    /// Inverse of the sampling maps at cell centres: coordinate-basis
    /// coefficient density of each cell value.
    pub fn densities(&self, c: &Cochain) -> Vec<f64> {
        let d = self.d();
        let k = self.layout_degree(c.kind, c.degree);
        let mut out = vec![0.0; c.values.len()];
        self.layout.for_each_cell(k, |i, legs, pos| {
            out[i] = match c.kind {
                Kind::Primal => c.values[i] / self.primal_measure(legs),
                Kind::Dual => {
                    shuffle_sign(legs, legs.complement(d)) * c.values[i] / self.dual_measure(legs, pos)
                }
            };
        });
        out
    }

    // ---- boundary operators ----

    /// Pull-back of a primal cochain to a face.
    pub fn trace_pullback(&self, c: &Cochain, face: Face) -> Result<BoundaryCochain> {
        self.check(c)?;
        let fl = self.face_layout(face)?;
        if c.kind != Kind::Primal {
            return Err(Error::KindMismatch("trace_pullback needs a primal cochain".into()));
        }
        if c.degree > fl.dim() {
            return Err(Error::DegreeOverflow { degree: c.degree, max: fl.dim() });
        }
        let axes = face_axes(self.d(), face.axis);
        let wall = wall_position(&self.spec, face);
        let mut values = vec![0.0; fl.len(c.degree)];
        let mut full = vec![0usize; self.d()];
        fl.for_each_cell(c.degree, |i, flegs, fpos| {
            let legs = embed_legs(flegs, &axes);
            embed_pos(fpos, &axes, face.axis, wall, &mut full);
            values[i] = c.values[self.layout.block(legs).index(&full)];
        });
        Ok(BoundaryCochain { face, kind: Kind::Primal, degree: c.degree, values })
    }

    /// Contraction of a dual `k`-cochain with the outward unit normal
    /// `𝚗 = ±a(t)^{-1} ∂_axis`, giving a face dual `(k-1)`-cochain.
    pub fn normal_contract(&self, c: &Cochain, face: Face, t: f64, m: &MetricField) -> Result<BoundaryCochain> {
        self.check(c)?;
        let fl = self.face_layout(face)?;
        if c.kind != Kind::Dual {
            return Err(Error::KindMismatch("normal_contract needs a dual cochain".into()));
        }
        if c.degree == 0 {
            return Err(Error::DegreeUnderflow { op: "normal contraction", degree: 0 });
        }
        let d = self.d();
        let fd = fl.dim();
        let k = c.degree;
        let axes = face_axes(d, face.axis);
        let wall = wall_position(&self.spec, face);
        let inv_a = 1.0 / m.a(t);
        let l_normal = self.dual_length(face.axis, wall);
        let mut values = vec![0.0; fl.len(fd - (k - 1))];
        let mut full = vec![0usize; d];
        fl.for_each_cell(d - k, |i, flegs, fpos| {
            let legs = embed_legs(flegs, &axes);
            embed_pos(fpos, &axes, face.axis, wall, &mut full);
            let comp = legs.complement(d);
            let p = comp.position(face.axis).expect("normal leg");
            let y = c.values[self.layout.block(legs).index(&full)];
            let eps_full = shuffle_sign(legs, comp);
            let eps_face = shuffle_sign(flegs, flegs.complement(fd));
            values[i] = eps_face * eps_full * face.side.sign() * parity(p) * inv_a * y / l_normal;
        });
        Ok(BoundaryCochain { face, kind: Kind::Dual, degree: k - 1, values })
    }

    /// Hodge dual on a face with the induced orientation (outward normal
    /// first), face dual `j` to face primal `(d-1)-j`.
    pub fn boundary_hodge(&self, c: &BoundaryCochain, t: f64, m: &MetricField) -> Result<BoundaryCochain> {
        let fl = self.face_layout(c.face)?;
        let fd = fl.dim();
        if c.kind != Kind::Dual || c.degree > fd {
            return Err(Error::InvalidArgument("boundary_hodge needs a face dual cochain".into()));
        }
        let j = c.degree;
        if c.values.len() != fl.len(fd - j) {
            return Err(Error::LengthMismatch { expected: fl.len(fd - j), got: c.values.len() });
        }
        let axes = face_axes(self.d(), c.face.axis);
        let o_face = c.face.side.sign() * parity(c.face.axis);
        let s = o_face * parity(j * (fd - j)) * m.a(t).powi(fd as i32 - 2 * j as i32);
        let mut values = vec![0.0; c.values.len()];
        fl.for_each_cell(fd - j, |i, flegs, fpos| {
            let prim: f64 = flegs.axes().map(|b| self.h[axes[b]]).product();
            let dual: f64 =
                (0..fd).filter(|&b| !flegs.contains(b)).map(|b| self.dual_length(axes[b], fpos[b])).product();
            values[i] = s * c.values[i] * prim / dual;
        });
        Ok(BoundaryCochain { face: c.face, kind: Kind::Primal, degree: fd - j, values })
    }

    /// Largest trace of a primal cochain over all faces.
    pub fn max_trace(&self, c: &Cochain) -> Result<f64> {
        let mut m = 0.0f64;
        for f in self.faces() {
            if c.degree < self.d() {
                m = m.max(self.trace_pullback(c, f)?.max_abs());
            }
        }
        Ok(m)
    }

    /// Euclidean norm of the traces of a primal cochain over all faces.
    pub fn trace_norm(&self, c: &Cochain) -> Result<f64> {
        let mut acc = 0.0;
        for f in self.faces() {
            if c.degree < self.d() {
                acc += self.trace_pullback(c, f)?.l2().powi(2);
            }
        }
        Ok(acc.sqrt())
    }
}

fn dual_length(spec: &GridSpec, h: &[f64], axis: usize, pos: usize) -> f64 {
    if !spec.periodic[axis] && (pos == 0 || pos == spec.cells[axis]) {
        0.5 * h[axis]
    } else {
        h[axis]
    }
}

fn face_axes(d: usize, normal: usize) -> Vec<usize> {
    (0..d).filter(|&a| a != normal).collect()
}

fn wall_position(spec: &GridSpec, face: Face) -> usize {
    match face.side {
        Side::Low => 0,
        Side::High => spec.cells[face.axis],
    }
}

fn embed_legs(flegs: MultiIndex, axes: &[usize]) -> MultiIndex {
    flegs.axes().fold(MultiIndex(0), |acc, b| acc.with(axes[b]))
}

fn embed_pos(fpos: &[usize], axes: &[usize], normal: usize, wall: usize, full: &mut [usize]) {
    full[normal] = wall;
    for (b, &a) in axes.iter().enumerate() {
        full[a] = fpos[b];
    }
}

/// Number of cells of each degree, for reporting.
pub fn cell_counts(grid: &Grid) -> Vec<usize> {
    (0..=grid.d()).map(|k| grid.layout().len(k)).collect()
}

/// `C(d, k)` blocks per degree.
pub fn block_counts(d: usize) -> Vec<usize> {
    (0..=d).map(|k| binomial(d, k)).collect()
}
