//! Uniform cell-centered finite-volume grids on a box with homogeneous
//! Neumann (no-flux) boundary conditions.
//!
//! Cell values live in [`Field`], values on interior faces in [`FaceField`].
//! Boundary faces are never stored: their flux is zero by construction, which
//! is what makes every discrete divergence integrate to zero.
//!
//! Cells are numbered row-major with `x` fastest: cell `(ix, iy)` has index
//! `ix + nx * iy`. Interior faces are numbered x-faces first (row by row),
//! then y-faces.

use crate::error::{Error, Result};
use crate::scalar::{ordered_sum, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    dim: usize,
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
    hx: T,
    hy: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new_1d(cells: usize, length: T) -> Result<Self> {
        Self::build(1, cells, 1, length, T::one())
    }

    pub fn new_2d(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        Self::build(2, nx, ny, lx, ly)
    }

    /// Builds a 1D or 2D grid from per-axis slices (`cells.len() == lengths.len() == dim`).
    pub fn from_axes(cells: &[usize], lengths: &[T]) -> Result<Self> {
        match (cells, lengths) {
            ([n], [l]) => Self::new_1d(*n, *l),
            ([nx, ny], [lx, ly]) => Self::new_2d(*nx, *ny, *lx, *ly),
            _ => Err(Error::InvalidGrid(format!(
                "need one or two axes with matching lengths, got {} cell counts and {} lengths",
                cells.len(),
                lengths.len()
            ))),
        }
    }

    fn build(dim: usize, nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid("cell counts must be positive".into()));
        }
        if !(lx > T::zero() && ly > T::zero() && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid("lengths must be positive and finite".into()));
        }
        let hx = lx / T::from_usize_lossy(nx);
        let hy = if dim == 1 { T::one() } else { ly / T::from_usize_lossy(ny) };
        Ok(Self { dim, nx, ny, lx, ly, hx, hy })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `[nx, ny]`; `ny == 1` in 1D.
    pub fn cells_per_axis(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    pub fn axis_cells(&self) -> Vec<usize> {
        self.cells_per_axis()[..self.dim].to_vec()
    }

    pub fn lengths(&self) -> Vec<T> {
        [self.lx, self.ly][..self.dim].to_vec()
    }

    /// `[hx, hy]`; `hy` is a unit placeholder in 1D.
    pub fn spacing(&self) -> [T; 2] {
        [self.hx, self.hy]
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> T {
        self.hx * self.hy
    }

    /// |Ω|.
    pub fn measure(&self) -> T {
        self.cell_volume() * T::from_usize_lossy(self.num_cells())
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.nx * iy
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Physical coordinates of a cell center (`y = 0` in 1D).
    pub fn cell_center(&self, cell: usize) -> (T, T) {
        let (ix, iy) = self.coords(cell);
        let x = (T::from_usize_lossy(ix) + T::half()) * self.hx;
        let y = if self.dim == 1 {
            T::zero()
        } else {
            (T::from_usize_lossy(iy) + T::half()) * self.hy
        };
        (x, y)
    }

    pub fn num_x_faces(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    pub fn num_y_faces(&self) -> usize {
        if self.dim == 1 {
            0
        } else {
            self.nx * (self.ny - 1)
        }
    }

    pub fn num_faces(&self) -> usize {
        self.num_x_faces() + self.num_y_faces()
    }

    /// Interior faces in storage order.
    pub fn faces(&self) -> impl Iterator<Item = Face> + '_ {
        let nx = self.nx;
        let x_faces = (0..self.ny).flat_map(move |iy| {
            (0..nx - 1).map(move |ix| Face { axis: 0, left: ix + nx * iy, right: ix + 1 + nx * iy })
        });
        let ny = if self.dim == 1 { 1 } else { self.ny };
        let y_faces = (0..ny - 1).flat_map(move |iy| {
            (0..nx).map(move |ix| Face { axis: 1, left: ix + nx * iy, right: ix + nx * (iy + 1) })
        });
        x_faces.chain(y_faces)
    }

    pub fn face_spacing(&self, face: &Face) -> T {
        if face.axis == 0 {
            self.hx
        } else {
            self.hy
        }
    }

    /// Off-diagonal couplings of `-Δ_h` for one cell: `(neighbor, 1/h²)`.
    /// The diagonal entry is the sum of the weights.
    pub fn neighbors(&self, cell: usize, out: &mut Vec<(usize, T)>) {
        out.clear();
        let (ix, iy) = self.coords(cell);
        let wx = (self.hx * self.hx).recip();
        if ix > 0 {
            out.push((cell - 1, wx));
        }
        if ix + 1 < self.nx {
            out.push((cell + 1, wx));
        }
        if self.dim == 2 {
            let wy = (self.hy * self.hy).recip();
            if iy > 0 {
                out.push((cell - self.nx, wy));
            }
            if iy + 1 < self.ny {
                out.push((cell + self.nx, wy));
            }
        }
    }

    /// Half bandwidth of the cell-coupling matrix of `-Δ_h`.
    pub fn stencil_bandwidth(&self) -> usize {
        if self.dim == 1 || self.ny == 1 {
            1
        } else {
            self.nx
        }
    }

    /// True if `fine` refines `self` by the same integer factor on every axis
    /// over the same box.
    pub fn refinement_factor(&self, fine: &GridSpec<T>) -> Option<usize> {
        if self.dim != fine.dim || fine.nx % self.nx != 0 {
            return None;
        }
        let r = fine.nx / self.nx;
        if self.dim == 2 && (fine.ny % self.ny != 0 || fine.ny / self.ny != r) {
            return None;
        }
        let tol = T::lit(1e-12);
        let same = |a: T, b: T| (a - b).abs() <= tol * a.abs().max(b.abs());
        if !same(self.lx, fine.lx) || (self.dim == 2 && !same(self.ly, fine.ly)) {
            return None;
        }
        Some(r)
    }
}

/// An interior face between two cells, `left` having the smaller coordinate
/// along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub left: usize,
    pub right: usize,
}

/// Cell-centered values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::ShapeMismatch { expected: grid.num_cells(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DomainViolation(format!("non-finite value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: GridSpec<T>, value: T) -> Self {
        Self { grid, values: vec![value; grid.num_cells()] }
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let values = (0..grid.num_cells())
            .map(|i| {
                let (x, y) = grid.cell_center(i);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: GridSpec<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.num_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn try_map(&self, f: impl Fn(usize, T) -> Result<T>) -> Result<Self> {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect::<Result<_>>()?;
        Ok(Self { grid: self.grid, values })
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sum(&self) -> T {
        ordered_sum(self.values.iter().copied())
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize_lossy(self.len())
    }

    /// Copy with the cell mean removed.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &Field<T>) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: other.len() });
        }
        Ok(())
    }
}

/// Values on interior faces, x-faces first.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> FaceField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self { grid, values: vec![T::zero(); grid.num_faces()] }
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.num_faces() {
            return Err(Error::ShapeMismatch { expected: grid.num_faces(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn zip_map(&self, other: &FaceField<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }
}

/// Face-valued difference quotient. Boundary faces are implicit zeros.
pub fn grad<T: Real>(u: &Field<T>) -> FaceField<T> {
    let grid = *u.grid();
    let v = u.values();
    let values = grid.faces().map(|f| (v[f.right] - v[f.left]) / grid.face_spacing(&f)).collect();
    FaceField { grid, values }
}

/// Discrete divergence with zero flux through the boundary.
pub fn div<T: Real>(flux: &FaceField<T>) -> Field<T> {
    let grid = *flux.grid();
    let mut out = vec![T::zero(); grid.num_cells()];
    for (f, &j) in grid.faces().zip(flux.values()) {
        let q = j / grid.face_spacing(&f);
        out[f.left] = out[f.left] + q;
        out[f.right] = out[f.right] - q;
    }
    Field::from_vec_unchecked(grid, out)
}

/// Neumann Laplacian, defined as `div(grad(u))`.
pub fn laplacian<T: Real>(u: &Field<T>) -> Field<T> {
    div(&grad(u))
}

/// `∫_Ω u` by midpoint quadrature.
pub fn integrate<T: Real>(u: &Field<T>) -> T {
    u.sum() * u.grid().cell_volume()
}

/// `(u, v)_{L²}` by midpoint quadrature.
pub fn inner<T: Real>(u: &Field<T>, v: &Field<T>) -> T {
    debug_assert_eq!(u.len(), v.len());
    ordered_sum(u.values().iter().zip(v.values()).map(|(&a, &b)| a * b)) * u.grid().cell_volume()
}

/// Face quadrature: every interior face carries the dual volume `hx * hy`.
pub fn face_inner<T: Real>(a: &FaceField<T>, b: &FaceField<T>) -> T {
    debug_assert_eq!(a.values().len(), b.values().len());
    ordered_sum(a.values().iter().zip(b.values()).map(|(&x, &y)| x * y)) * a.grid().cell_volume()
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions<T> {
    /// Relative residual tolerance `‖r‖ ≤ tol ‖b‖`.
    pub tol: T,
    /// Iteration cap as a multiple of the number of cells.
    pub max_iter_factor: usize,
}

impl<T: Real> Default for KrylovOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter_factor: 10 }
    }
}

/// Zero-mean solution of `-Δ_h u = f`, i.e. `(-Δ)^{-1}` on `V₀'`.
pub fn inv_neumann_laplacian<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    inv_neumann_laplacian_with(f, &KrylovOptions::default())
}

pub fn inv_neumann_laplacian_with<T: Real>(f: &Field<T>, opts: &KrylovOptions<T>) -> Result<Field<T>> {
    let grid = *f.grid();
    let n = grid.num_cells();
    check_zero_mean(f)?;

    let mut r: Vec<T> = f.centered().into_values();
    let b_norm = norm2(&r);
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(Field::from_vec_unchecked(grid, x));
    }

    let mut p = r.clone();
    let mut ap = vec![T::zero(); n];
    let mut nbrs = Vec::with_capacity(4);
    let mut rr = dot(&r, &r);
    let max_iter = opts.max_iter_factor * n.max(1);
    let target = opts.tol * b_norm;

    for _ in 0..max_iter {
        apply_neg_laplacian(&grid, &p, &mut ap, &mut nbrs);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::SolverDiverged(format!("non-positive curvature p·Ap = {:e}", pap.to_f64_lossy())));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        project_zero_mean(&mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            project_zero_mean(&mut x);
            return Ok(Field::from_vec_unchecked(grid, x));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::SolverDiverged(format!(
        "CG reached {max_iter} iterations with relative residual {:e}",
        (rr.sqrt() / b_norm).to_f64_lossy()
    )))
}

/// `‖f‖²_{V₀'} = (f, (-Δ)^{-1} f)`.
pub fn v0dual_norm_sq<T: Real>(f: &Field<T>) -> Result<T> {
    let u = inv_neumann_laplacian(f)?;
    Ok(inner(f, &u))
}

/// Zero-mean tolerance used by every `V₀'` operation: `|mean| ≤ 1e-10 · rms(f)`.
pub fn check_zero_mean<T: Real>(f: &Field<T>) -> Result<()> {
    let mean = f.mean();
    let rms = (dot(f.values(), f.values()) / T::from_usize_lossy(f.len())).sqrt();
    let tol = T::lit(1e-10) * rms;
    if mean.abs() > tol {
        return Err(Error::NonZeroMean { mean: mean.to_f64_lossy(), tol: tol.to_f64_lossy() });
    }
    Ok(())
}

fn apply_neg_laplacian<T: Real>(grid: &GridSpec<T>, x: &[T], out: &mut [T], nbrs: &mut Vec<(usize, T)>) {
    for i in 0..x.len() {
        grid.neighbors(i, nbrs);
        let mut acc = T::zero();
        for &(j, w) in nbrs.iter() {
            acc = acc + w * (x[i] - x[j]);
        }
        out[i] = acc;
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    ordered_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn project_zero_mean<T: Real>(a: &mut [T]) {
    let m = ordered_sum(a.iter().copied()) / T::from_usize_lossy(a.len());
    for v in a.iter_mut() {
        *v = *v - m;
    }
}
