//! Tensor-product spectral-element meshes with Gauss–Lobatto–Legendre nodes,
//! nodal grid functions and barycentric point interpolation.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Gauss–Lobatto–Legendre rule of degree `p` on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GllRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    bary: Vec<T>,
    /// `deriv[q][j]` is the derivative of the j-th Lagrange cardinal at node q.
    deriv: Vec<Vec<T>>,
}

impl<T: Real> GllRule<T> {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("GLL degree must be at least 1".into()));
        }
        let n = degree;
        let pi = T::PI();
        // Newton iteration started from Chebyshev–Gauss–Lobatto points
        let mut x: Vec<T> = (0..=n)
            .map(|i| (pi * lit::<T>(i as f64) / lit::<T>(n as f64)).cos())
            .collect();
        let mut p_n = vec![T::zero(); n + 1];
        let mut p_nm1 = vec![T::zero(); n + 1];
        let tol = T::epsilon() * lit(4.0);
        for _ in 0..200 {
            let mut delta = T::zero();
            for i in 0..=n {
                let (pn, pnm1) = legendre_pair(n, x[i]);
                p_n[i] = pn;
                p_nm1[i] = pnm1;
                let step = (x[i] * pn - pnm1) / (lit::<T>((n + 1) as f64) * pn);
                x[i] -= step;
                delta = delta.max(step.abs());
            }
            if delta <= tol {
                break;
            }
        }
        for i in 0..=n {
            p_n[i] = legendre_pair(n, x[i]).0;
        }
        let scale = lit::<T>(2.0) / lit::<T>((n * (n + 1)) as f64);
        let mut pairs: Vec<(T, T)> = x
            .iter()
            .zip(&p_n)
            .map(|(&xi, &pi_)| (xi, scale / (pi_ * pi_)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite GLL nodes"));
        let mut nodes: Vec<T> = pairs.iter().map(|p| p.0).collect();
        // endpoints are exact by construction
        nodes[0] = -T::one();
        nodes[n] = T::one();
        let weights = pairs.iter().map(|p| p.1).collect();

        let bary: Vec<T> = (0..=n)
            .map(|j| {
                let prod = (0..=n)
                    .filter(|&k| k != j)
                    .fold(T::one(), |acc, k| acc * (nodes[j] - nodes[k]));
                T::one() / prod
            })
            .collect();
        let mut deriv = vec![vec![T::zero(); n + 1]; n + 1];
        for q in 0..=n {
            let mut diag = T::zero();
            for j in 0..=n {
                if j != q {
                    let d = (bary[j] / bary[q]) / (nodes[q] - nodes[j]);
                    deriv[q][j] = d;
                    diag -= d;
                }
            }
            deriv[q][q] = diag;
        }
        Ok(Self {
            nodes,
            weights,
            bary,
            deriv,
        })
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn barycentric_weights(&self) -> &[T] {
        &self.bary
    }

    pub fn derivative_matrix(&self) -> &[Vec<T>] {
        &self.deriv
    }

    /// Lagrange cardinal values at reference coordinate `xi`, written into `out`.
    pub fn cardinals_at(&self, xi: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        let mut sum = T::zero();
        for (j, &node) in self.nodes.iter().enumerate() {
            let diff = xi - node;
            if diff == T::zero() {
                out.iter_mut().for_each(|o| *o = T::zero());
                out[j] = T::one();
                return;
            }
            let t = self.bary[j] / diff;
            out[j] = t;
            sum += t;
        }
        out.iter_mut().for_each(|o| *o /= sum);
    }
}

/// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
fn legendre_pair<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p_prev = T::one();
    let mut p = x;
    for k in 2..=n {
        let kf = lit::<T>(k as f64);
        let next = ((lit::<T>(2.0) * kf - T::one()) * x * p - (kf - T::one()) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// One direction of a spectral-element mesh: `elements` uniform elements on `[0, length]`.
#[derive(Debug, Clone)]
pub struct Axis<T> {
    length: T,
    elements: usize,
    rule: GllRule<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Axis<T> {
    pub fn new(length: T, elements: usize, degree: usize) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidInput(format!(
                "axis length must be positive, got {length}"
            )));
        }
        if elements == 0 {
            return Err(Error::InvalidInput("at least one element required".into()));
        }
        let rule = GllRule::new(degree)?;
        let p = degree;
        let h = length / lit(elements as f64);
        let half = h / lit(2.0);
        let count = elements * p + 1;
        let mut nodes = vec![T::zero(); count];
        let mut weights = vec![T::zero(); count];
        for e in 0..elements {
            let left = h * lit(e as f64);
            for j in 0..=p {
                let g = e * p + j;
                if j > 0 || e == 0 {
                    nodes[g] = left + (rule.nodes[j] + T::one()) * half;
                }
                weights[g] += rule.weights[j] * half;
            }
        }
        nodes[0] = T::zero();
        nodes[count - 1] = length;
        Ok(Self {
            length,
            elements,
            rule,
            nodes,
            weights,
        })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.rule.degree()
    }

    pub fn element_width(&self) -> T {
        self.length / lit(self.elements as f64)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Assembled (lumped) GLL quadrature weights.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn rule(&self) -> &GllRule<T> {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn tolerance(&self) -> T {
        let scale = self.length.max(T::one());
        (lit::<T>(1e-12) * scale).max(T::epsilon() * lit(8.0) * scale)
    }

    /// Locates `x` and fills the local cardinal values; returns the global index
    /// of the element's first node.
    pub fn basis_at(&self, axis: usize, x: T, out: &mut [T]) -> Result<usize> {
        let tol = self.tolerance();
        if !x.is_finite() || x < -tol || x > self.length + tol {
            return Err(Error::OutOfDomain {
                axis,
                value: to_f64(x),
                upper: to_f64(self.length),
            });
        }
        let x = x.max(T::zero()).min(self.length);
        let p = self.degree();
        let h = self.element_width();
        let e = (x / h)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.elements - 1);
        let first = e * p;
        if let Some(j) = self.nodes[first..=first + p].iter().position(|&n| n == x) {
            out.iter_mut().for_each(|o| *o = T::zero());
            out[j] = T::one();
            return Ok(first);
        }
        let left = h * lit(e as f64);
        let xi = lit::<T>(2.0) * (x - left) / h - T::one();
        self.rule.cardinals_at(xi, out);
        Ok(first)
    }
}

/// A point in one or two space dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    coords: [T; 2],
    dim: usize,
}

impl<T: Real> Point<T> {
    pub fn new_1d(x: T) -> Self {
        Self {
            coords: [x, T::zero()],
            dim: 1,
        }
    }

    pub fn new_2d(x: T, y: T) -> Self {
        Self {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn from_slice(c: &[T]) -> Self {
        match c.len() {
            1 => Self::new_1d(c[0]),
            2 => Self::new_2d(c[0], c[1]),
            n => panic!("points must have 1 or 2 coordinates, got {n}"),
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_sq(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |a, &c| a + c * c)
    }
}

/// Tensor-product spectral-element mesh on `[0, X]` or `[0, X] x [0, Y]`.
///
/// Nodes are numbered lexicographically with the first coordinate running
/// fastest: node `(ix, iy)` has index `iy * nx + ix`.
#[derive(Debug, Clone)]
pub struct SpectralMesh<T> {
    axes: Vec<Axis<T>>,
}

impl<T: Real> SpectralMesh<T> {
    /// Two-dimensional mesh with `elements` uniform elements of degree `degree`
    /// per direction.
    pub fn build(x_max: T, y_max: T, elements: usize, degree: usize) -> Result<Self> {
        Ok(Self {
            axes: vec![
                Axis::new(x_max, elements, degree)?,
                Axis::new(y_max, elements, degree)?,
            ],
        })
    }

    pub fn build_1d(x_max: T, elements: usize, degree: usize) -> Result<Self> {
        Ok(Self {
            axes: vec![Axis::new(x_max, elements, degree)?],
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis<T> {
        &self.axes[i]
    }

    pub fn degree(&self) -> usize {
        self.axes[0].degree()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// Upper corner of the domain box.
    pub fn upper(&self) -> Point<T> {
        let c: Vec<T> = self.axes.iter().map(Axis::length).collect();
        Point::from_slice(&c)
    }

    pub fn node(&self, index: usize) -> Point<T> {
        match self.axes.as_slice() {
            [ax] => Point::new_1d(ax.nodes[index]),
            [ax, ay] => {
                let nx = ax.len();
                Point::new_2d(ax.nodes[index % nx], ay.nodes[index / nx])
            }
            _ => unreachable!("meshes are 1D or 2D"),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point<T>> + '_ {
        (0..self.node_count()).map(move |i| self.node(i))
    }

    /// Lumped mass (product of per-axis GLL weights) at a node.
    pub fn mass(&self, index: usize) -> T {
        match self.axes.as_slice() {
            [ax] => ax.weights[index],
            [ax, ay] => {
                let nx = ax.len();
                ax.weights[index % nx] * ay.weights[index / nx]
            }
            _ => unreachable!("meshes are 1D or 2D"),
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.axes)
                .all(|(&c, ax)| c >= -ax.tolerance() && c <= ax.length + ax.tolerance())
    }
}

/// Complex nodal values on a mesh.
#[derive(Debug, Clone)]
pub struct GridFunction<T> {
    mesh: Arc<SpectralMesh<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(mesh: Arc<SpectralMesh<T>>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                found: values.len(),
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<SpectralMesh<T>>) -> Self {
        let n = mesh.node_count();
        Self {
            mesh,
            values: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    /// Samples a real field at every node.
    pub fn sample<F>(mesh: Arc<SpectralMesh<T>>, g: F) -> Result<Self>
    where
        F: Fn(&[T]) -> T,
    {
        Self::sample_complex(mesh, |x| Complex::new(g(x), T::zero()))
    }

    pub fn sample_complex<F>(mesh: Arc<SpectralMesh<T>>, g: F) -> Result<Self>
    where
        F: Fn(&[T]) -> Complex<T>,
    {
        let values = mesh
            .nodes()
            .enumerate()
            .map(|(i, p)| {
                let v = g(p.as_slice());
                if v.re.is_finite() && v.im.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { index: i })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<SpectralMesh<T>> {
        &self.mesh
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    /// Same mesh, new values.
    pub fn with_values(&self, values: Vec<Complex<T>>) -> Result<Self> {
        Self::new(self.mesh.clone(), values)
    }

    pub fn max_imag(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, z| m.max(z.im.abs()))
    }

    /// Evaluates the piecewise tensor-polynomial interpolant at `x`.
    pub fn interpolate(&self, x: &[T]) -> Result<Complex<T>> {
        let mut scratch = InterpScratch::new(self.mesh.degree());
        self.interpolate_with(x, &mut scratch)
    }

    pub(crate) fn interpolate_with(
        &self,
        x: &[T],
        scratch: &mut InterpScratch<T>,
    ) -> Result<Complex<T>> {
        if x.len() != self.mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.mesh.dim(),
                found: x.len(),
            });
        }
        let zero = Complex::new(T::zero(), T::zero());
        match self.mesh.axes() {
            [ax] => {
                let first = ax.basis_at(0, x[0], &mut scratch.wx)?;
                Ok(scratch
                    .wx
                    .iter()
                    .zip(&self.values[first..])
                    .fold(zero, |acc, (&w, &u)| acc + u * w))
            }
            [ax, ay] => {
                let fx = ax.basis_at(0, x[0], &mut scratch.wx)?;
                let fy = ay.basis_at(1, x[1], &mut scratch.wy)?;
                let nx = ax.len();
                let mut acc = zero;
                for (jy, &wy) in scratch.wy.iter().enumerate() {
                    if wy == T::zero() {
                        continue;
                    }
                    let row = (fy + jy) * nx + fx;
                    let line = scratch
                        .wx
                        .iter()
                        .zip(&self.values[row..])
                        .fold(zero, |a, (&w, &u)| a + u * w);
                    acc += line * wy;
                }
                Ok(acc)
            }
            _ => unreachable!("meshes are 1D or 2D"),
        }
    }

    /// Writes a snapshot as CSV with header `x,y,re,im` in node order.
    /// One-dimensional meshes report `y = 0`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x", "y", "re", "im"]).map_err(csv_err)?;
        for (p, v) in self.mesh.nodes().zip(&self.values) {
            let c = p.as_slice();
            let y = c.get(1).copied().unwrap_or_else(T::zero);
            w.write_record(&[
                to_f64(c[0]).to_string(),
                to_f64(y).to_string(),
                to_f64(v.re).to_string(),
                to_f64(v.im).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Reusable buffers for repeated interpolation.
#[derive(Debug, Clone)]
pub(crate) struct InterpScratch<T> {
    wx: Vec<T>,
    wy: Vec<T>,
}

impl<T: Real> InterpScratch<T> {
    pub(crate) fn new(degree: usize) -> Self {
        Self {
            wx: vec![T::zero(); degree + 1],
            wy: vec![T::zero(); degree + 1],
        }
    }
}
