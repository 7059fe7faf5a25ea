use crate::error::{Error, Result};
use crate::fields::grid::Grid;
use crate::scalar::{lit, Real};

/// A real function sampled on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Length {
                what: "scalar field",
                got: values.len(),
                expected: grid.len(),
            });
        }
        ensure_finite("scalar field", &values)?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Construct without the finiteness scan; lengths are still asserted.
    pub(crate) fn from_raw(grid: &Grid<T>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Grid<T>, value: T) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_raw(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("scalar field", &self.values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + s * b;
        }
    }

    /// Grid quadrature of the field over the periodic box.
    pub fn integral(&self) -> T {
        self.sum() * self.grid.cell_volume()
    }

    pub fn sum(&self) -> T {
        // pairwise summation keeps round-off at O(log n)
        pairwise_sum(&self.values)
    }

    pub fn mean(&self) -> T {
        self.sum() / crate::scalar::count(self.values.len())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Minimum value and its flat index.
    pub fn min_with_index(&self) -> (T, usize) {
        let mut best = (T::infinity(), 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn min(&self) -> T {
        self.min_with_index().0
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// L² inner product over the box.
    pub fn inner(&self, other: &Self) -> T {
        let prod: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .collect();
        pairwise_sum(&prod) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }
}

/// A vector field with `dim` components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T: Real> {
    grid: Grid<T>,
    components: Vec<Vec<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: &Grid<T>, components: Vec<Vec<T>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::Length {
                what: "vector components",
                got: components.len(),
                expected: grid.dim(),
            });
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(Error::Length {
                    what: "vector component",
                    got: c.len(),
                    expected: grid.len(),
                });
            }
            ensure_finite("vector field", c)?;
        }
        Ok(Self {
            grid: grid.clone(),
            components,
        })
    }

    pub(crate) fn from_raw(grid: &Grid<T>, components: Vec<Vec<T>>) -> Self {
        assert_eq!(components.len(), grid.dim());
        Self {
            grid: grid.clone(),
            components,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_raw(grid, vec![vec![T::zero(); grid.len()]; grid.dim()])
    }

    pub fn constant(grid: &Grid<T>, value: &[T]) -> Self {
        let comps = (0..grid.dim())
            .map(|a| vec![value.get(a).copied().unwrap_or(T::zero()); grid.len()])
            .collect();
        Self::from_raw(grid, comps)
    }

    pub fn from_scalars(fields: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = fields
            .first()
            .map(|f| f.grid().clone())
            .ok_or_else(|| Error::arg("vector field needs at least one component"))?;
        if fields.iter().any(|f| !f.grid().same_as(&grid)) {
            return Err(Error::GridMismatch);
        }
        Self::new(&grid, fields.into_iter().map(|f| f.into_values()).collect())
    }

    /// Samples `f` (returning up to three components) at every grid point.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let d = grid.dim();
        let mut comps = vec![Vec::with_capacity(grid.len()); d];
        for i in 0..grid.len() {
            let v = f(grid.point(i));
            for a in 0..d {
                comps[a].push(v[a]);
            }
        }
        Self::from_raw(grid, comps)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn component(&self, a: usize) -> &[T] {
        &self.components[a]
    }

    #[inline]
    pub fn component_mut(&mut self, a: usize) -> &mut [T] {
        &mut self.components[a]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn component_field(&self, a: usize) -> ScalarField<T> {
        ScalarField::from_raw(&self.grid, self.components[a].clone())
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            ensure_finite("vector field", c)?;
        }
        Ok(())
    }

    /// Value at one grid point, padded to three components.
    #[inline]
    pub fn at(&self, i: usize) -> [T; 3] {
        let mut v = [T::zero(); 3];
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c[i];
        }
        v
    }

    pub fn map_components(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        )
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_components(|v| v * s)
    }

    /// Multiplies every component pointwise by a scalar field.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Self {
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .map(|c| c.iter().zip(s.values()).map(|(&v, &w)| v * w).collect())
                .collect(),
        )
    }

    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + s * y;
            }
        }
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let mut out = vec![T::zero(); self.grid.len()];
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o = *o + x * y;
            }
        }
        ScalarField::from_raw(&self.grid, out)
    }

    pub fn norm_squared(&self) -> ScalarField<T> {
        self.dot(self)
    }

    pub fn mean(&self) -> Vec<T> {
        self.components
            .iter()
            .map(|c| pairwise_sum(c) / crate::scalar::count(c.len()))
            .collect()
    }

    pub fn integral(&self) -> Vec<T> {
        let w = self.grid.cell_volume();
        self.components.iter().map(|c| pairwise_sum(c) * w).collect()
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> T {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> T {
        self.norm_squared().max().max(T::zero()).sqrt()
    }

    pub fn inner(&self, other: &Self) -> T {
        self.dot(other).integral()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).max(T::zero()).sqrt()
    }
}

/// Position of the unordered pair `(i, j)` in upper-triangle storage.
#[inline]
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

/// A symmetric rank-two tensor field stored once per unordered index pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField<T: Real> {
    grid: Grid<T>,
    components: Vec<Vec<T>>,
    traceless: bool,
}

impl<T: Real> SymTensorField<T> {
    /// Number of stored components for dimension `dim`.
    #[inline]
    pub fn storage_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn new(grid: &Grid<T>, components: Vec<Vec<T>>, traceless: bool) -> Result<Self> {
        let expected = Self::storage_len(grid.dim());
        if components.len() != expected {
            return Err(Error::Length {
                what: "tensor components",
                got: components.len(),
                expected,
            });
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(Error::Length {
                    what: "tensor component",
                    got: c.len(),
                    expected: grid.len(),
                });
            }
            ensure_finite("tensor field", c)?;
        }
        let t = Self {
            grid: grid.clone(),
            components,
            traceless,
        };
        if traceless {
            t.check_traceless()?;
        }
        Ok(t)
    }

    pub(crate) fn from_raw(grid: &Grid<T>, components: Vec<Vec<T>>, traceless: bool) -> Self {
        assert_eq!(components.len(), Self::storage_len(grid.dim()));
        Self {
            grid: grid.clone(),
            components,
            traceless,
        }
    }

    pub fn zeros(grid: &Grid<T>, traceless: bool) -> Self {
        Self::from_raw(
            grid,
            vec![vec![T::zero(); grid.len()]; Self::storage_len(grid.dim())],
            traceless,
        )
    }

    /// `c · I` (never traceless unless `c = 0`).
    pub fn scaled_identity(grid: &Grid<T>, c: T) -> Self {
        let d = grid.dim();
        let mut t = Self::zeros(grid, false);
        for a in 0..d {
            t.components[sym_index(d, a, a)] = vec![c; grid.len()];
        }
        t
    }

    /// Samples a symmetric matrix function; only the upper triangle is read.
    pub fn from_fn(grid: &Grid<T>, traceless: bool, f: impl Fn([T; 3]) -> [[T; 3]; 3]) -> Self {
        let d = grid.dim();
        let mut comps = vec![Vec::with_capacity(grid.len()); Self::storage_len(d)];
        for p in 0..grid.len() {
            let m = f(grid.point(p));
            for i in 0..d {
                for j in i..d {
                    comps[sym_index(d, i, j)].push(m[i][j]);
                }
            }
        }
        Self::from_raw(grid, comps, traceless)
    }

    /// Pointwise outer product `a ⊗ b + b ⊗ a` halved, i.e. the symmetric part.
    pub fn outer(a: &VectorField<T>, b: &VectorField<T>) -> Self {
        let grid = a.grid().clone();
        let d = grid.dim();
        let half = lit::<T>(0.5);
        let mut comps = Vec::with_capacity(Self::storage_len(d));
        for i in 0..d {
            for j in i..d {
                let (ai, aj, bi, bj) = (a.component(i), a.component(j), b.component(i), b.component(j));
                comps.push(
                    (0..grid.len())
                        .map(|p| half * (ai[p] * bj[p] + bi[p] * aj[p]))
                        .collect(),
                );
            }
        }
        Self::from_raw(&grid, comps, false)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn is_traceless(&self) -> bool {
        self.traceless
    }

    /// Storage for entry `(i, j)`, identical to `(j, i)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &[T] {
        &self.components[sym_index(self.dim(), i, j)]
    }

    #[inline]
    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [T] {
        let d = self.dim();
        &mut self.components[sym_index(d, i, j)]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    /// Matrix at one grid point, padded with zeros to 3×3.
    pub fn at(&self, p: usize) -> [[T; 3]; 3] {
        let d = self.dim();
        let mut m = [[T::zero(); 3]; 3];
        for i in 0..d {
            for j in i..d {
                let v = self.components[sym_index(d, i, j)][p];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn trace(&self) -> ScalarField<T> {
        let d = self.dim();
        let mut out = vec![T::zero(); self.grid.len()];
        for a in 0..d {
            for (o, &v) in out.iter_mut().zip(self.entry(a, a)) {
                *o = *o + v;
            }
        }
        ScalarField::from_raw(&self.grid, out)
    }

    /// Enforces the traceless flag's pointwise bound.
    pub fn check_traceless(&self) -> Result<()> {
        let d = self.dim();
        let tr = self.trace();
        for p in 0..self.grid.len() {
            let scale = self
                .components
                .iter()
                .fold(T::zero(), |m, c| m.max(c[p].abs()));
            if tr.values()[p].abs() > lit::<T>(1e-12).max(T::epsilon() * lit(16.0)) * (scale + T::one())
            {
                return Err(Error::arg(format!(
                    "tensor flagged traceless has trace {} at index {p} (dim {d})",
                    tr.values()[p]
                )));
            }
        }
        Ok(())
    }

    /// Removes the trace pointwise and sets the traceless flag.
    pub fn deviatoric(&self) -> Self {
        let d = self.dim();
        let tr = self.trace();
        let inv_d = T::one() / crate::scalar::count(d);
        let mut out = self.clone();
        for a in 0..d {
            for (v, &t) in out.entry_mut(a, a).iter_mut().zip(tr.values()) {
                *v = *v - t * inv_d;
            }
        }
        out.traceless = true;
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b, self.traceless && other.traceless)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b, self.traceless && other.traceless)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .map(|c| c.iter().map(|&v| v * s).collect())
                .collect(),
            self.traceless,
        )
    }

    /// Pointwise multiplication by a scalar field; keeps the traceless flag.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Self {
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .map(|c| c.iter().zip(s.values()).map(|(&v, &w)| v * w).collect())
                .collect(),
            self.traceless,
        )
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T, traceless: bool) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        Self::from_raw(
            &self.grid,
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
            traceless,
        )
    }

    pub fn max_abs(&self) -> T {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            ensure_finite("tensor field", c)?;
        }
        if self.traceless {
            self.check_traceless()?;
        }
        Ok(())
    }
}

pub(crate) fn ensure_finite<T: Real>(what: &'static str, values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= 64 {
        values.iter().fold(T::zero(), |a, &b| a + b)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}
