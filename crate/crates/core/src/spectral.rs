//! Dirichlet-Laplacian sine bases on intervals and rectangles.
//!
//! Fields are stored as coefficients against the orthonormal eigenfunctions
//! `e_j`, ordered by increasing eigenvalue. Nonlinear terms are evaluated on an
//! interior uniform grid whose trapezoidal weights make the discrete sine
//! transform exactly orthonormal for every retained mode.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<S> {
    Interval { length: S },
    Rectangle { lx: S, ly: S },
}

impl<S: Scalar> Domain<S> {
    pub fn unit_interval() -> Self {
        Domain::Interval { length: S::one() }
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            lx: S::one(),
            ly: S::one(),
        }
    }

    /// Lebesgue measure |Ω|.
    pub fn measure(&self) -> S {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }

    fn extents(&self) -> Vec<S> {
        match *self {
            Domain::Interval { length } => vec![length],
            Domain::Rectangle { lx, ly } => vec![lx, ly],
        }
    }
}

/// Lebesgue/Sobolev norm selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm<S> {
    L2,
    /// `‖∇u‖₂`
    H10,
    /// Spectral dual norm `(Σ |c_j|²/λ_j)^{1/2}`.
    Hneg1,
    /// `‖u‖_q` by nodal quadrature, `1 ≤ q < ∞`.
    Lp(S),
}

/// Spectral coefficients `(u, e_j)` of a function on the domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Field<S> {
    pub fn zeros(len: usize) -> Self {
        Field {
            coeffs: vec![S::zero(); len],
        }
    }

    pub fn from_coeffs(coeffs: Vec<S>) -> Self {
        Field { coeffs }
    }

    /// Unit coefficient vector of mode `j` (zero-based, sorted order).
    pub fn unit(len: usize, j: usize) -> Self {
        let mut f = Self::zeros(len);
        f.coeffs[j] = S::one();
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [S] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn set_zero(&mut self) {
        self.coeffs.iter_mut().for_each(|c| *c = S::zero());
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: S, x: &Field<S>) {
        debug_assert_eq!(self.len(), x.len());
        for (a, &b) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: S) -> Field<S> {
        Field {
            coeffs: self.coeffs.iter().map(|&c| alpha * c).collect(),
        }
    }

    /// Euclidean coefficient inner product, i.e. the L² inner product.
    pub fn dot(&self, other: &Field<S>) -> S {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a * b)
            .sum()
    }
}

impl<S: Scalar> Add for &Field<S> {
    type Output = Field<S>;
    fn add(self, rhs: &Field<S>) -> Field<S> {
        Field {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for &Field<S> {
    type Output = Field<S>;
    fn sub(self, rhs: &Field<S>) -> Field<S> {
        Field {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<S: Scalar> Mul<S> for &Field<S> {
    type Output = Field<S>;
    fn mul(self, rhs: S) -> Field<S> {
        self.scaled(rhs)
    }
}

impl<S: Scalar> Neg for &Field<S> {
    type Output = Field<S>;
    fn neg(self) -> Field<S> {
        self.scaled(-S::one())
    }
}

#[derive(Debug, Clone)]
struct Axis<S> {
    length: S,
    modes: usize,
    nodes: Vec<S>,
    weight: S,
    /// `table[j * q + a] = e_{j+1}(x_a)` for the one-dimensional basis.
    table: Vec<S>,
}

impl<S: Scalar> Axis<S> {
    fn new(length: S, modes: usize, quad: usize) -> Self {
        let h = length / S::from_usize_lossy(quad + 1);
        let nodes: Vec<S> = (1..=quad).map(|a| h * S::from_usize_lossy(a)).collect();
        let norm = (S::lit(2.0) / length).sqrt();
        let mut table = Vec::with_capacity(modes * quad);
        for j in 1..=modes {
            let k = S::from_usize_lossy(j) * S::PI() / length;
            table.extend(nodes.iter().map(|&x| norm * (k * x).sin()));
        }
        Axis {
            length,
            modes,
            nodes,
            weight: h,
            table,
        }
    }

    fn quad(&self) -> usize {
        self.nodes.len()
    }

    fn eigenvalue(&self, j: usize) -> S {
        let k = S::from_usize_lossy(j) * S::PI() / self.length;
        k * k
    }

    fn eigenfunction(&self, j: usize, x: S) -> S {
        let k = S::from_usize_lossy(j) * S::PI() / self.length;
        (S::lit(2.0) / self.length).sqrt() * (k * x).sin()
    }

    #[inline]
    fn row(&self, j: usize) -> &[S] {
        let q = self.quad();
        &self.table[j * q..(j + 1) * q]
    }
}

/// Dirichlet-Laplacian eigenbasis with its collocation grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis<S> {
    domain: Domain<S>,
    axes: Vec<Axis<S>>,
    /// One-based per-axis mode indices of each sorted mode.
    modes: Vec<[usize; 2]>,
    eigenvalues: Vec<S>,
    /// Rectangle only: `tensor_to_sorted[(jx-1) * n + (jy-1)]`.
    tensor_to_sorted: Vec<usize>,
}

impl<S: Scalar> SpectralBasis<S> {
    /// Basis with `modes` modes per axis and `2·modes` quadrature nodes per axis.
    pub fn new(domain: Domain<S>, modes: usize) -> Result<Self> {
        Self::with_quadrature(domain, modes, 2 * modes)
    }

    /// Basis whose grid resolves power nonlinearities up to `max_exponent`
    /// (at least `⌈(max_exponent + 1)/2⌉·modes` nodes per axis, never fewer than `2·modes`).
    pub fn for_nonlinearity(domain: Domain<S>, modes: usize, max_exponent: f64) -> Result<Self> {
        let factor = ((max_exponent + 1.0) / 2.0).ceil().max(2.0) as usize;
        Self::with_quadrature(domain, modes, factor * modes)
    }

    pub fn with_quadrature(domain: Domain<S>, modes: usize, quad: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidBasis("mode count must be positive".into()));
        }
        if quad < modes {
            return Err(Error::InvalidBasis(format!(
                "{quad} quadrature nodes cannot resolve {modes} modes"
            )));
        }
        let extents = domain.extents();
        if extents.iter().any(|&l| !(l > S::zero()) || !l.is_finite()) {
            return Err(Error::InvalidBasis("domain extents must be positive".into()));
        }
        let axes: Vec<Axis<S>> = extents
            .iter()
            .map(|&l| Axis::new(l, modes, quad))
            .collect();

        let (modes_list, eigenvalues, tensor_to_sorted) = match axes.len() {
            1 => {
                let list: Vec<[usize; 2]> = (1..=modes).map(|j| [j, 0]).collect();
                let ev = (1..=modes).map(|j| axes[0].eigenvalue(j)).collect();
                (list, ev, Vec::new())
            }
            _ => {
                let mut pairs: Vec<([usize; 2], S)> = Vec::with_capacity(modes * modes);
                for jx in 1..=modes {
                    for jy in 1..=modes {
                        pairs.push(([jx, jy], axes[0].eigenvalue(jx) + axes[1].eigenvalue(jy)));
                    }
                }
                pairs.sort_by(|a, b| {
                    a.1.partial_cmp(&b.1)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.0.cmp(&b.0))
                });
                let mut map = vec![0; modes * modes];
                for (sorted, (m, _)) in pairs.iter().enumerate() {
                    map[(m[0] - 1) * modes + (m[1] - 1)] = sorted;
                }
                let list = pairs.iter().map(|p| p.0).collect();
                let ev = pairs.iter().map(|p| p.1).collect();
                (list, ev, map)
            }
        };

        Ok(SpectralBasis {
            domain,
            axes,
            modes: modes_list,
            eigenvalues,
            tensor_to_sorted,
        })
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    /// Total number of retained modes.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn modes_per_axis(&self) -> usize {
        self.axes[0].modes
    }

    pub fn quadrature_per_axis(&self) -> usize {
        self.axes[0].quad()
    }

    /// Number of collocation nodes.
    pub fn nodal_len(&self) -> usize {
        self.axes.iter().map(|a| a.quad()).product()
    }

    pub fn eigenvalues(&self) -> &[S] {
        &self.eigenvalues
    }

    /// One-based per-axis indices of sorted mode `j` (second entry is 0 on an interval).
    pub fn mode_indices(&self, j: usize) -> [usize; 2] {
        self.modes[j]
    }

    pub fn zeros(&self) -> Field<S> {
        Field::zeros(self.dim())
    }

    pub fn unit(&self, j: usize) -> Field<S> {
        Field::unit(self.dim(), j)
    }

    /// Collocation points in nodal order (`[x, 0]` on an interval).
    pub fn grid_points(&self) -> Vec<[S; 2]> {
        match self.axes.len() {
            1 => self.axes[0].nodes.iter().map(|&x| [x, S::zero()]).collect(),
            _ => {
                let mut pts = Vec::with_capacity(self.nodal_len());
                for &x in &self.axes[0].nodes {
                    for &y in &self.axes[1].nodes {
                        pts.push([x, y]);
                    }
                }
                pts
            }
        }
    }

    /// Closed-form eigenfunction `e_j` at a point.
    pub fn eigenfunction(&self, j: usize, point: [S; 2]) -> S {
        let [jx, jy] = self.modes[j];
        let mut v = self.axes[0].eigenfunction(jx, point[0]);
        if self.axes.len() == 2 {
            v *= self.axes[1].eigenfunction(jy, point[1]);
        }
        v
    }

    /// Quadrature weight shared by every node.
    pub fn node_weight(&self) -> S {
        self.axes.iter().map(|a| a.weight).fold(S::one(), |p, w| p * w)
    }

    /// `∫_Ω` of a nodal function by the grid rule.
    pub fn integrate(&self, nodal: &[S]) -> S {
        self.node_weight() * nodal.iter().copied().sum::<S>()
    }

    pub fn check(&self, u: &Field<S>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Mismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Nodal values `u(x_a)` of a band-limited field.
    pub fn to_nodal(&self, u: &Field<S>) -> Result<Vec<S>> {
        self.check(u)?;
        let mut out = vec![S::zero(); self.nodal_len()];
        self.to_nodal_into(u.coeffs(), &mut out);
        Ok(out)
    }

    pub(crate) fn to_nodal_into(&self, c: &[S], out: &mut [S]) {
        out.iter_mut().for_each(|x| *x = S::zero());
        match self.axes.len() {
            1 => {
                let ax = &self.axes[0];
                for (j, &cj) in c.iter().enumerate() {
                    if cj == S::zero() {
                        continue;
                    }
                    for (o, &phi) in out.iter_mut().zip(ax.row(j)) {
                        *o += cj * phi;
                    }
                }
            }
            _ => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let n = ax.modes;
                let (qx, qy) = (ax.quad(), ay.quad());
                // r[a * n + jy] = Σ_jx φx_jx(a) c[jx, jy]
                let mut r = vec![S::zero(); qx * n];
                for jx in 0..n {
                    let row = ax.row(jx);
                    for jy in 0..n {
                        let cj = c[self.tensor_to_sorted[jx * n + jy]];
                        if cj == S::zero() {
                            continue;
                        }
                        for a in 0..qx {
                            r[a * n + jy] += row[a] * cj;
                        }
                    }
                }
                for a in 0..qx {
                    let out_row = &mut out[a * qy..(a + 1) * qy];
                    for jy in 0..n {
                        let ra = r[a * n + jy];
                        if ra == S::zero() {
                            continue;
                        }
                        for (o, &phi) in out_row.iter_mut().zip(ay.row(jy)) {
                            *o += ra * phi;
                        }
                    }
                }
            }
        }
    }

    /// Discrete projection of nodal values onto the retained modes.
    pub fn from_nodal(&self, nodal: &[S]) -> Result<Field<S>> {
        if nodal.len() != self.nodal_len() {
            return Err(Error::Mismatch {
                expected: self.nodal_len(),
                found: nodal.len(),
            });
        }
        let mut c = vec![S::zero(); self.dim()];
        self.from_nodal_into(nodal, &mut c);
        Ok(Field::from_coeffs(c))
    }

    #[allow(clippy::wrong_self_convention)]
    pub(crate) fn from_nodal_into(&self, nodal: &[S], c: &mut [S]) {
        let w = self.node_weight();
        match self.axes.len() {
            1 => {
                let ax = &self.axes[0];
                for (j, cj) in c.iter_mut().enumerate() {
                    let s: S = ax.row(j).iter().zip(nodal).map(|(&p, &u)| p * u).sum();
                    *cj = w * s;
                }
            }
            _ => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let n = ax.modes;
                let (qx, qy) = (ax.quad(), ay.quad());
                // t[a * n + jy] = Σ_b φy_jy(b) U[a, b]
                let mut t = vec![S::zero(); qx * n];
                for a in 0..qx {
                    let u_row = &nodal[a * qy..(a + 1) * qy];
                    for jy in 0..n {
                        t[a * n + jy] = ay.row(jy).iter().zip(u_row).map(|(&p, &u)| p * u).sum();
                    }
                }
                for jx in 0..n {
                    let row = ax.row(jx);
                    for jy in 0..n {
                        let s: S = (0..qx).map(|a| row[a] * t[a * n + jy]).sum();
                        c[self.tensor_to_sorted[jx * n + jy]] = w * s;
                    }
                }
            }
        }
    }

    /// Samples a pointwise function on the grid and projects it.
    pub fn project<F: Fn([S; 2]) -> S>(&self, f: F) -> Field<S> {
        let nodal: Vec<S> = self.grid_points().into_iter().map(f).collect();
        let mut c = vec![S::zero(); self.dim()];
        self.from_nodal_into(&nodal, &mut c);
        Field::from_coeffs(c)
    }

    pub fn l2_inner(&self, a: &Field<S>, b: &Field<S>) -> S {
        a.dot(b)
    }

    /// `(∇a, ∇b)`
    pub fn h1_inner(&self, a: &Field<S>, b: &Field<S>) -> S {
        self.eigenvalues
            .iter()
            .zip(a.coeffs().iter().zip(b.coeffs()))
            .map(|(&l, (&x, &y))| l * x * y)
            .sum()
    }

    /// `‖∇u‖₂²`
    pub fn h1_norm_sq(&self, u: &Field<S>) -> S {
        self.eigenvalues
            .iter()
            .zip(u.coeffs())
            .map(|(&l, &c)| l * c * c)
            .sum()
    }

    pub fn norm(&self, u: &Field<S>, which: Norm<S>) -> Result<S> {
        self.check(u)?;
        let cs = u.coeffs();
        Ok(match which {
            Norm::L2 => cs.iter().map(|&c| c * c).sum::<S>().sqrt(),
            Norm::H10 => self.h1_norm_sq(u).sqrt(),
            Norm::Hneg1 => self
                .eigenvalues
                .iter()
                .zip(cs)
                .map(|(&l, &c)| c * c / l)
                .sum::<S>()
                .sqrt(),
            Norm::Lp(q) => {
                if !(q >= S::one()) || !q.is_finite() {
                    return Err(Error::UnsupportedExponent(q.to_f64_lossy()));
                }
                let nodal = self.to_nodal(u)?;
                lp_norm_nodal(self, &nodal, q)
            }
        })
    }

    /// `T_ε u = (I − εΔ)⁻¹ u`, acting diagonally as `c_j / (1 + ε λ_j)`.
    pub fn regularize(&self, u: &Field<S>, eps: S) -> Result<Field<S>> {
        self.check(u)?;
        if eps < S::zero() || !eps.is_finite() {
            return Err(Error::NegativeRegularization(eps.to_f64_lossy()));
        }
        Ok(Field::from_coeffs(
            u.coeffs()
                .iter()
                .zip(&self.eigenvalues)
                .map(|(&c, &l)| c / (S::one() + eps * l))
                .collect(),
        ))
    }
}

/// `(∫ |U|^q)^{1/q}` of nodal values by the grid rule.
pub fn lp_norm_nodal<S: Scalar>(basis: &SpectralBasis<S>, nodal: &[S], q: S) -> S {
    if q == S::lit(2.0) {
        return basis.integrate_map(nodal, |x| x * x).sqrt();
    }
    basis
        .integrate_map(nodal, |x| x.abs().powf(q))
        .powf(S::one() / q)
}

impl<S: Scalar> SpectralBasis<S> {
    pub(crate) fn integrate_map<F: Fn(S) -> S>(&self, nodal: &[S], f: F) -> S {
        self.node_weight() * nodal.iter().map(|&x| f(x)).sum::<S>()
    }
}
