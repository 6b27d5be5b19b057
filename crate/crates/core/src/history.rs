//! The history variable `w(t, s) = u(t) − u(t − s)` on a uniform `s`-grid.
//!
//! With `Δs = Δt`, the transport equation `w_t + w_s = v` is advanced along its
//! characteristics by an exact shift of the grid plus the displacement increment
//! `∫ v dτ`; `w(t, 0) = 0` is re-imposed after every shift.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{KernelFamily, MemoryKernel};
use crate::scalar::Scalar;
use crate::spectral::{Field, SpectralBasis};

/// Scalar time factor of a closed-form history.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile<S> {
    Constant,
    /// `Σ_k a_k t^k`
    Polynomial(Vec<S>),
    /// `cos(ω t + φ)`
    Trig { omega: S, phase: S },
    /// `e^{r t}`
    Exponential { rate: S },
}

impl<S: Scalar> TimeProfile<S> {
    pub fn value(&self, t: S) -> S {
        match self {
            TimeProfile::Constant => S::one(),
            TimeProfile::Polynomial(a) => a.iter().rev().fold(S::zero(), |acc, &c| acc * t + c),
            TimeProfile::Trig { omega, phase } => (*omega * t + *phase).cos(),
            TimeProfile::Exponential { rate } => (*rate * t).exp(),
        }
    }

    pub fn derivative(&self, t: S) -> S {
        match self {
            TimeProfile::Constant => S::zero(),
            TimeProfile::Polynomial(a) => a
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(S::zero(), |acc, (k, &c)| acc * t + S::from_usize_lossy(k) * c),
            TimeProfile::Trig { omega, phase } => -*omega * (*omega * t + *phase).sin(),
            TimeProfile::Exponential { rate } => *rate * (*rate * t).exp(),
        }
    }
}

/// One time profile multiplying a combination of eigenmodes (one-based mode numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTerm<S> {
    pub profile: TimeProfile<S>,
    pub modes: Vec<(usize, S)>,
}

/// Closed-form function of time valued in the spectral space; used for past
/// histories and for manufactured trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModalSeries<S> {
    pub terms: Vec<ModalTerm<S>>,
}

impl<S: Scalar> ModalSeries<S> {
    pub fn single(profile: TimeProfile<S>, modes: Vec<(usize, S)>) -> Self {
        ModalSeries {
            terms: vec![ModalTerm { profile, modes }],
        }
    }

    pub fn zero() -> Self {
        ModalSeries { terms: Vec::new() }
    }

    pub fn plus(mut self, other: &ModalSeries<S>) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    fn combine(&self, t: S, dim: usize, derivative: bool) -> Result<Field<S>> {
        let mut out = Field::zeros(dim);
        for term in &self.terms {
            let factor = if derivative {
                term.profile.derivative(t)
            } else {
                term.profile.value(t)
            };
            for &(j, amp) in &term.modes {
                if j == 0 || j > dim {
                    return Err(Error::InvalidParameter {
                        name: "mode",
                        reason: format!("mode {j} outside 1..={dim}"),
                    });
                }
                out.coeffs_mut()[j - 1] += factor * amp;
            }
        }
        if !out.is_finite() {
            return Err(Error::PastNotEvaluable(t.to_f64_lossy()));
        }
        Ok(out)
    }
}

/// Prescribed displacement `u₀(·, t)` for `t ≤ 0`, expanded in the Dirichlet basis.
pub trait PastHistory<S>: Send + Sync {
    fn displacement(&self, t: S, basis: &SpectralBasis<S>) -> Result<Field<S>>;
    fn velocity(&self, t: S, basis: &SpectralBasis<S>) -> Result<Field<S>>;
}

impl<S: Scalar> PastHistory<S> for ModalSeries<S> {
    fn displacement(&self, t: S, basis: &SpectralBasis<S>) -> Result<Field<S>> {
        self.combine(t, basis.dim(), false)
    }

    fn velocity(&self, t: S, basis: &SpectralBasis<S>) -> Result<Field<S>> {
        self.combine(t, basis.dim(), true)
    }
}

/// Uniform `s`-grid with its kernel weights.
#[derive(Debug, Clone)]
pub struct HistoryGrid<S> {
    ds: S,
    /// Node weights `ω_i = ½(C_i + C_{i+1})` with `C_i = ∫_{s_{i−1}}^{s_i} μ`.
    weights: Vec<S>,
    /// `cells[i] = C_i` for `i ≥ 1`; `cells[0] = 0`.
    cells: Vec<S>,
    /// `−½ μ′(s_i)` times the trapezoidal weight in `s`.
    dissipation: Vec<S>,
}

impl<S: Scalar> HistoryGrid<S> {
    /// Grid covering `[0, s_max]` with `M = ⌈s_max/Δs⌉` intervals.
    pub fn new(kernel: &MemoryKernel<S>, ds: S) -> Result<Self> {
        if !(ds > S::zero()) || !ds.is_finite() {
            return Err(Error::InvalidParameter {
                name: "ds",
                reason: format!("history spacing must be positive, got {ds}"),
            });
        }
        let intervals = if kernel.is_memoryless() {
            0
        } else {
            let ratio = (kernel.horizon() / ds).to_f64_lossy();
            (ratio - 1e-9).ceil().max(1.0) as usize
        };
        let node = |i: usize| ds * S::from_usize_lossy(i);
        let mut cells = vec![S::zero(); intervals + 1];
        for (i, c) in cells.iter_mut().enumerate().skip(1) {
            *c = kernel.cell_mass(node(i - 1), node(i));
        }
        let half = S::lit(0.5);
        let weights = (0..=intervals)
            .map(|i| {
                let left = cells[i];
                let right = if i < intervals { cells[i + 1] } else { S::zero() };
                half * (left + right)
            })
            .collect();
        let dissipation = (0..=intervals)
            .map(|i| {
                let trap = if i == 0 || i == intervals { half * ds } else { ds };
                -half * kernel.derivative(node(i)) * trap
            })
            .collect();
        Ok(HistoryGrid {
            ds,
            weights,
            cells,
            dissipation,
        })
    }

    pub fn spacing(&self) -> S {
        self.ds
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn node(&self, i: usize) -> S {
        self.ds * S::from_usize_lossy(i)
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn cell_masses(&self) -> &[S] {
        &self.cells
    }

    /// `Σ ω_i = ∫₀^{s_M} μ`.
    pub fn total_weight(&self) -> S {
        self.weights.iter().copied().sum()
    }

    pub(crate) fn dissipation_weights(&self) -> &[S] {
        &self.dissipation
    }
}

/// `w(·, s_i)` for every node, plus the time index `n` with `t = n·Δs`.
#[derive(Debug, Clone)]
pub struct HistoryField<S> {
    grid: Arc<HistoryGrid<S>>,
    slices: VecDeque<Field<S>>,
    step: i64,
}

impl<S: Scalar> HistoryField<S> {
    pub fn zeros(grid: Arc<HistoryGrid<S>>, dim: usize) -> Self {
        let slices = (0..=grid.intervals()).map(|_| Field::zeros(dim)).collect();
        HistoryField {
            grid,
            slices,
            step: 0,
        }
    }

    /// Builds a field from explicit slices; slice 0 must vanish.
    pub fn from_slices(grid: Arc<HistoryGrid<S>>, slices: Vec<Field<S>>, step: i64) -> Result<Self> {
        if slices.len() != grid.intervals() + 1 {
            return Err(Error::Mismatch {
                expected: grid.intervals() + 1,
                found: slices.len(),
            });
        }
        if slices[0].coeffs().iter().any(|&c| c != S::zero()) {
            return Err(Error::InvalidParameter {
                name: "w(0)",
                reason: "history must vanish at s = 0".into(),
            });
        }
        Ok(HistoryField {
            grid,
            slices: slices.into(),
            step,
        })
    }

    pub fn grid(&self) -> &Arc<HistoryGrid<S>> {
        &self.grid
    }

    pub fn slices(&self) -> impl ExactSizeIterator<Item = &Field<S>> {
        self.slices.iter()
    }

    pub fn slice(&self, i: usize) -> &Field<S> {
        &self.slices[i]
    }

    pub fn step_index(&self) -> i64 {
        self.step
    }

    pub fn time(&self) -> S {
        self.grid.ds * S::lit(self.step as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(Field::is_finite)
    }

    /// `∫ μ(s) w(s) ds ≈ Σ ω_i w_i`.
    pub fn memory_integral(&self) -> Field<S> {
        let dim = self.slices[0].len();
        let mut acc = Field::zeros(dim);
        for (w, &om) in self.slices.iter().zip(&self.grid.weights).skip(1) {
            acc.axpy(om, w);
        }
        acc
    }

    /// `𝓛(w) = ∫ μ(s) Δw(s) ds`; mode `j` is `−λ_j Σ_i ω_i w_j(s_i)`.
    pub fn memory_operator(&self, basis: &SpectralBasis<S>) -> Field<S> {
        laplacian(basis, &self.memory_integral())
    }

    /// `‖w‖²_μ = Σ ω_i ‖∇w(s_i)‖₂²`.
    pub fn weighted_norm_sq(&self, basis: &SpectralBasis<S>) -> S {
        self.slices
            .iter()
            .zip(&self.grid.weights)
            .skip(1)
            .map(|(w, &om)| om * basis.h1_norm_sq(w))
            .sum()
    }

    /// `(w, φ)_μ` for `φ ∈ H¹₀` constant in `s`.
    pub fn weighted_inner_const(&self, basis: &SpectralBasis<S>, phi: &Field<S>) -> S {
        self.slices
            .iter()
            .zip(&self.grid.weights)
            .skip(1)
            .map(|(w, &om)| om * basis.h1_inner(w, phi))
            .sum()
    }

    /// `(w, ŵ)_μ`
    pub fn weighted_inner(&self, basis: &SpectralBasis<S>, other: &HistoryField<S>) -> S {
        self.slices
            .iter()
            .zip(&other.slices)
            .zip(&self.grid.weights)
            .skip(1)
            .map(|((a, b), &om)| om * basis.h1_inner(a, b))
            .sum()
    }

    /// `−½ ∫ μ′(s) ‖∇w(s)‖₂² ds` by the trapezoidal rule with the analytic `μ′`.
    pub fn kernel_dissipation_rate(&self, basis: &SpectralBasis<S>) -> S {
        self.slices
            .iter()
            .zip(self.grid.dissipation_weights())
            .skip(1)
            .map(|(w, &d)| d * basis.h1_norm_sq(w))
            .sum()
    }

    /// `(‖w‖²_μ, −½∫μ′‖∇w‖²)` in one pass over the nodes.
    pub fn energy_terms(&self, basis: &SpectralBasis<S>) -> (S, S) {
        let mut weighted = S::zero();
        let mut rate = S::zero();
        for ((w, &om), &d) in self
            .slices
            .iter()
            .zip(&self.grid.weights)
            .zip(self.grid.dissipation_weights())
            .skip(1)
        {
            let g = basis.h1_norm_sq(w);
            weighted += om * g;
            rate += d * g;
        }
        (weighted, rate)
    }

    /// `Σ_{i≥1} C_i w(s_{i−1})`: the memory integral along characteristics
    /// entering the next step.
    pub(crate) fn characteristic_sum(&self) -> Field<S> {
        let dim = self.slices[0].len();
        let mut acc = Field::zeros(dim);
        for (w, &c) in self.slices.iter().zip(self.grid.cells.iter().skip(1)) {
            acc.axpy(c, w);
        }
        acc
    }

    /// Discrete `(∂_s w, w)_μ` with the backward difference and `w(0) = 0`.
    pub fn transport_pairing(&self, basis: &SpectralBasis<S>) -> S {
        let inv = S::one() / self.grid.ds;
        (1..self.slices.len())
            .map(|i| {
                let w = &self.slices[i];
                let diff = w - &self.slices[i - 1];
                self.grid.weights[i] * inv * basis.h1_inner(&diff, w)
            })
            .sum()
    }

    pub fn difference(&self, other: &HistoryField<S>) -> HistoryField<S> {
        HistoryField {
            grid: self.grid.clone(),
            slices: self
                .slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a - b)
                .collect(),
            step: self.step,
        }
    }

    /// Advances by one step of length `dt = Δs`.
    ///
    /// Shifts every slice one node along the characteristic, adds `increment =
    /// ∫_t^{t+Δt} v`, resets `w(0) = 0`, then overwrites every node for which
    /// `recent` stores both `u(t+Δt)` and `u(t+Δt−s_i)` with their difference.
    pub fn advance(&mut self, increment: &Field<S>, dt: S, recent: Option<&Trajectory<S>>) -> Result<()> {
        let ds = self.grid.ds;
        if (dt - ds).abs() > S::lit(64.0) * S::epsilon() * ds {
            return Err(Error::StepMismatch {
                dt: dt.to_f64_lossy(),
                ds: ds.to_f64_lossy(),
            });
        }
        self.step += 1;
        let m = self.grid.intervals();
        if m == 0 {
            return Ok(());
        }
        let mut recycled = self.slices.pop_back().expect("grid has nodes");
        recycled.set_zero();
        self.slices.push_front(recycled);
        for w in self.slices.iter_mut().skip(1) {
            w.axpy(S::one(), increment);
        }
        if let Some(traj) = recent {
            if let Some(now) = traj.at_index(self.step) {
                for i in 1..=m {
                    let Some(past) = traj.at_index(self.step - i as i64) else {
                        break;
                    };
                    let slot = self.slices[i].coeffs_mut();
                    for ((o, &a), &b) in slot.iter_mut().zip(now.coeffs()).zip(past.coeffs()) {
                        *o = a - b;
                    }
                }
            }
        }
        Ok(())
    }

    /// Little-endian dump: `M: u64`, `N: u64`, `Δs: f64`, then the
    /// `(M+1) × N` coefficient matrix row by row as `f64`.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = self.grid.intervals() as u64;
        let n = self.slices[0].len() as u64;
        out.write_all(&m.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&self.grid.ds.to_f64_lossy().to_le_bytes())?;
        for w in &self.slices {
            for &c in w.coeffs() {
                out.write_all(&c.to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Decoded history snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub intervals: usize,
    pub modes: usize,
    pub ds: f64,
    /// Row-major `(intervals + 1) × modes`.
    pub coefficients: Vec<f64>,
}

pub fn read_snapshot<R: Read>(mut input: R) -> io::Result<Snapshot> {
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let intervals = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let modes = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let ds = f64::from_le_bytes(b8);
    let count = (intervals + 1)
        .checked_mul(modes)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "snapshot header overflow"))?;
    let mut coefficients = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut b8)?;
        coefficients.push(f64::from_le_bytes(b8));
    }
    Ok(Snapshot {
        intervals,
        modes,
        ds,
        coefficients,
    })
}

/// `Δ` on the spectral space: `c_j ↦ −λ_j c_j`.
pub fn laplacian<S: Scalar>(basis: &SpectralBasis<S>, u: &Field<S>) -> Field<S> {
    Field::from_coeffs(
        u.coeffs()
            .iter()
            .zip(basis.eigenvalues())
            .map(|(&c, &l)| -l * c)
            .collect(),
    )
}

/// Samples `u(t_k)`, `t_k = k·Δt`, over a contiguous index window.
///
/// With a capacity it acts as a ring buffer that keeps the most recent samples.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    dt: S,
    first: i64,
    samples: VecDeque<Field<S>>,
    capacity: Option<usize>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(dt: S, first_index: i64, capacity: Option<usize>) -> Self {
        Trajectory {
            dt,
            first: first_index,
            samples: VecDeque::new(),
            capacity,
        }
    }

    /// Samples the past on `t = −K·Δt, …, 0` with `K = ⌈s_max/Δt⌉`.
    pub fn from_past(
        past: &dyn PastHistory<S>,
        basis: &SpectralBasis<S>,
        dt: S,
        s_max: S,
    ) -> Result<Self> {
        let k = (s_max / dt).to_f64_lossy().ceil().max(0.0) as i64;
        let mut traj = Trajectory::new(dt, -k, None);
        for i in -k..=0 {
            traj.push(past.displacement(dt * S::lit(i as f64), basis)?);
        }
        Ok(traj)
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_index(&self) -> i64 {
        self.first
    }

    /// Index of the most recent sample.
    pub fn last_index(&self) -> i64 {
        self.first + self.samples.len() as i64 - 1
    }

    pub fn push(&mut self, u: Field<S>) {
        self.samples.push_back(u);
        if let Some(cap) = self.capacity {
            while self.samples.len() > cap.max(1) {
                self.samples.pop_front();
                self.first += 1;
            }
        }
    }

    pub fn at_index(&self, k: i64) -> Option<&Field<S>> {
        if k < self.first {
            return None;
        }
        self.samples.get((k - self.first) as usize)
    }

    /// Sample at a grid-aligned time.
    pub fn at_time(&self, t: S) -> Option<&Field<S>> {
        let k = (t / self.dt).to_f64_lossy().round();
        if (t - self.dt * S::lit(k)).abs() > S::lit(1e-6) * self.dt {
            return None;
        }
        self.at_index(k as i64)
    }

    pub fn latest(&self) -> Option<&Field<S>> {
        self.samples.back()
    }
}

/// `w(0, s_i) = u₀(0) − u₀(−s_i)`, `u(0) = u₀(0)`, `v(0) = ∂_t u₀(0)`.
pub fn init_history<S: Scalar>(
    past: &dyn PastHistory<S>,
    basis: &SpectralBasis<S>,
    grid: Arc<HistoryGrid<S>>,
) -> Result<(HistoryField<S>, Field<S>, Field<S>)> {
    let u0 = past.displacement(S::zero(), basis)?;
    let v0 = past.velocity(S::zero(), basis)?;
    let mut slices = Vec::with_capacity(grid.intervals() + 1);
    slices.push(Field::zeros(basis.dim()));
    for i in 1..=grid.intervals() {
        let back = past.displacement(-grid.node(i), basis)?;
        slices.push(&u0 - &back);
    }
    let w = HistoryField {
        grid,
        slices: slices.into(),
        step: 0,
    };
    Ok((w, u0, v0))
}

/// Brute-force `∫₀^{s_max} μ(s)(u(t) − u(t−s)) ds` from stored samples, by the
/// trapezoidal rule with `μ` sampled at `s_i = i·Δt`.
///
/// The trajectory must cover `t − s_max … t` (negative indices hold the past).
pub fn direct_convolution_oracle<S: Scalar>(
    trajectory: &Trajectory<S>,
    kernel: &MemoryKernel<S>,
    step: i64,
) -> Result<Field<S>> {
    let dt = trajectory.dt();
    let now = trajectory
        .at_index(step)
        .ok_or(Error::TrajectoryGap((dt * S::lit(step as f64)).to_f64_lossy()))?;
    let mut acc = Field::zeros(now.len());
    if kernel.is_memoryless() {
        return Ok(acc);
    }
    let m = ((kernel.horizon() / dt).to_f64_lossy() - 1e-9).ceil().max(1.0) as i64;
    for i in 1..=m {
        let past = trajectory
            .at_index(step - i)
            .ok_or(Error::TrajectoryGap((dt * S::lit((step - i) as f64)).to_f64_lossy()))?;
        let mut weight = kernel.value(dt * S::lit(i as f64)) * dt;
        if i == m {
            weight *= S::lit(0.5);
        }
        let diff = now - past;
        acc.axpy(weight, &diff);
    }
    Ok(acc)
}

/// Recursive convolution for Prony kernels:
/// `J_k(t) = ∫₀^∞ e^{−θ_k s} u(t − s) ds` obeys
/// `J_k(t+Δt) = e^{−θ_kΔt} J_k(t) + ∫₀^{Δt} e^{−θ_k s} u(t+Δt−s) ds`,
/// the last integral taken exactly for the linear interpolant of `u`.
#[derive(Debug, Clone)]
pub struct PronyConvolution<S> {
    amplitudes: Vec<S>,
    rates: Vec<S>,
    states: Vec<Field<S>>,
    current: Field<S>,
}

impl<S: Scalar> PronyConvolution<S> {
    /// Initializes `J_k(0)` by composite Simpson quadrature of the past.
    pub fn new(kernel: &MemoryKernel<S>, past: &dyn PastHistory<S>, basis: &SpectralBasis<S>) -> Result<Self> {
        let KernelFamily::Prony { amplitudes, rates } = kernel.family() else {
            return Err(Error::InvalidKernel(
                "recursive convolution requires a prony kernel".into(),
            ));
        };
        let current = past.displacement(S::zero(), basis)?;
        let mut states = Vec::with_capacity(rates.len());
        for &theta in rates {
            let span = S::lit(46.0) / theta;
            let panels = 20_000usize;
            let h = span / S::from_usize_lossy(2 * panels);
            let mut acc = Field::zeros(basis.dim());
            for i in 0..=2 * panels {
                let s = h * S::from_usize_lossy(i);
                let w = if i == 0 || i == 2 * panels {
                    S::one()
                } else if i % 2 == 1 {
                    S::lit(4.0)
                } else {
                    S::lit(2.0)
                };
                let u = past.displacement(-s, basis)?;
                acc.axpy(w * h / S::lit(3.0) * (-theta * s).exp(), &u);
            }
            states.push(acc);
        }
        Ok(PronyConvolution {
            amplitudes: amplitudes.clone(),
            rates: rates.clone(),
            states,
            current,
        })
    }

    pub fn advance(&mut self, next: &Field<S>, dt: S) {
        for (state, &theta) in self.states.iter_mut().zip(&self.rates) {
            let x = theta * dt;
            let decay = (-x).exp();
            // ∫₀^Δt e^{−θs} ds and ∫₀^Δt e^{−θs} s/Δt ds
            let i0 = -(-x).exp_m1() / theta;
            let i1 = (-(-x).exp_m1() - x * decay) / (theta * x);
            let mut updated = state.scaled(decay);
            updated.axpy(i0 - i1, next);
            updated.axpy(i1, &self.current);
            *state = updated;
        }
        self.current = next.clone();
    }

    /// `∫₀^∞ μ(s)(u(t) − u(t−s)) ds = Σ c_k (u(t)/θ_k − J_k(t))`.
    pub fn memory_integral(&self) -> Field<S> {
        let mut acc = Field::zeros(self.current.len());
        for ((&c, &theta), j) in self.amplitudes.iter().zip(&self.rates).zip(&self.states) {
            acc.axpy(c / theta, &self.current);
            acc.axpy(-c, j);
        }
        acc
    }
}

/// `max_i ‖∇(w(s_i) − (u(t) − u(t − s_i)))‖₂` against a reference displacement.
pub fn reconstruct_check<S: Scalar>(
    w: &HistoryField<S>,
    basis: &SpectralBasis<S>,
    u_at: &dyn Fn(S) -> Result<Field<S>>,
) -> Result<S> {
    let t = w.time();
    let now = u_at(t)?;
    let mut worst = S::zero();
    for (i, slice) in w.slices().enumerate() {
        let past = u_at(t - w.grid().node(i))?;
        let exact = &now - &past;
        let err = basis.h1_norm_sq(&(slice - &exact)).sqrt();
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Domain;
    use approx::assert_relative_eq;

    fn setup(ds: f64) -> (SpectralBasis<f64>, MemoryKernel<f64>, Arc<HistoryGrid<f64>>) {
        let basis = SpectralBasis::new(Domain::unit_interval(), 4).unwrap();
        let kernel = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let grid = Arc::new(HistoryGrid::new(&kernel, ds).unwrap());
        (basis, kernel, grid)
    }

    #[test]
    fn weights_reproduce_mass() {
        let (_, kernel, grid) = setup(1.0 / 64.0);
        let total = grid.total_weight();
        let kappa = kernel.mass();
        let tau = kernel.tail_tolerance();
        assert!(total <= kappa);
        assert!(total >= kappa * (1.0 - tau * kernel.horizon()));
        let w = grid.weights();
        assert!(w[1..].windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn cosine_past() {
        let (basis, _, grid) = setup(0.05);
        let past = ModalSeries::single(TimeProfile::Trig { omega: 1.0, phase: 0.0 }, vec![(1, 1.0)]);
        let (w, u0, v0) = init_history(&past, &basis, grid.clone()).unwrap();
        assert_eq!(u0, basis.unit(0));
        assert_eq!(v0, basis.zeros());
        for i in 0..=grid.intervals() {
            let s = grid.node(i);
            assert_relative_eq!(w.slice(i).coeffs()[0], 1.0 - s.cos(), epsilon = 1e-14);
            assert_eq!(w.slice(i).coeffs()[1], 0.0);
        }
    }

    #[test]
    fn constant_past_has_no_history() {
        let (basis, _, grid) = setup(0.1);
        let past = ModalSeries::single(TimeProfile::Constant, vec![(1, 1.0)]);
        let (w, _, _) = init_history(&past, &basis, grid).unwrap();
        assert_eq!(w.weighted_norm_sq(&basis), 0.0);
        assert!(reconstruct_check(&w, &basis, &|t| past.displacement(t, &basis)).unwrap() == 0.0);
    }

    #[test]
    fn unevaluable_past_is_a_fault() {
        let (basis, _, grid) = setup(0.1);
        let past = ModalSeries::single(TimeProfile::Exponential { rate: -100.0 }, vec![(1, 1.0)]);
        assert!(matches!(
            init_history(&past, &basis, grid),
            Err(Error::PastNotEvaluable(_))
        ));
        let bad_mode = ModalSeries::single(TimeProfile::Constant, vec![(9, 1.0)]);
        assert!(bad_mode.displacement(0.0, &basis).is_err());
    }

    #[test]
    fn single_node_operator() {
        let (basis, _, grid) = setup(0.5);
        let mut slices = vec![basis.zeros(); grid.intervals() + 1];
        slices[1] = basis.unit(0);
        let w = HistoryField::from_slices(grid.clone(), slices, 0).unwrap();
        let l = w.memory_operator(&basis);
        let pairing = l.dot(&basis.unit(0));
        assert_relative_eq!(pairing, -grid.weights()[1] * basis.eigenvalues()[0], epsilon = 1e-14);
        let zero = HistoryField::zeros(grid, basis.dim());
        assert!(zero.memory_operator(&basis).coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn pure_shift() {
        let (basis, _, grid) = setup(0.25);
        let past = ModalSeries::single(TimeProfile::Polynomial(vec![0.0, 1.0, 0.5]), vec![(2, 1.0)]);
        let (mut w, _, _) = init_history(&past, &basis, grid.clone()).unwrap();
        let before: Vec<_> = w.slices().cloned().collect();
        w.advance(&basis.zeros(), 0.25, None).unwrap();
        assert_eq!(w.slice(0), &basis.zeros());
        for i in 1..=grid.intervals() {
            assert_eq!(w.slice(i), &before[i - 1]);
        }
    }

    #[test]
    fn frozen_displacement_keeps_zero_history() {
        let (basis, _, grid) = setup(0.25);
        let mut w = HistoryField::zeros(grid, basis.dim());
        for _ in 0..10 {
            w.advance(&basis.zeros(), 0.25, None).unwrap();
        }
        assert_eq!(w.weighted_norm_sq(&basis), 0.0);
    }

    #[test]
    fn step_mismatch_is_a_fault() {
        let (basis, _, grid) = setup(0.25);
        let mut w = HistoryField::zeros(grid, basis.dim());
        assert!(matches!(
            w.advance(&basis.zeros(), 0.2, None),
            Err(Error::StepMismatch { .. })
        ));
    }

    #[test]
    fn ramp_from_rest() {
        // u(t) = t·e₁ for t ≥ 0 and 0 before: w(t, s) = min(s, t)·e₁.
        let dt = 0.125;
        let (basis, _, grid) = setup(dt);
        let mut w = HistoryField::zeros(grid.clone(), basis.dim());
        let inc = basis.unit(0).scaled(dt);
        for n in 1..=20 {
            w.advance(&inc, dt, None).unwrap();
            let t = dt * n as f64;
            for i in 0..=grid.intervals() {
                let expect = grid.node(i).min(t);
                assert_relative_eq!(w.slice(i).coeffs()[0], expect, epsilon = 1e-12);
            }
            let u_at = |tt: f64| Ok(basis.unit(0).scaled(tt.max(0.0)));
            assert!(reconstruct_check(&w, &basis, &u_at).unwrap() < 1e-11);
        }
    }

    #[test]
    fn window_overwrite_uses_stored_samples() {
        let dt = 0.5;
        let (basis, _, grid) = setup(dt);
        let mut w = HistoryField::zeros(grid, basis.dim());
        let mut traj = Trajectory::new(dt, 0, Some(8));
        traj.push(basis.zeros());
        traj.push(basis.unit(1).scaled(3.0));
        // a deliberately wrong increment; stored samples take precedence on the window
        w.advance(&basis.unit(0), dt, Some(&traj)).unwrap();
        assert_eq!(w.slice(1), &basis.unit(1).scaled(3.0));
        assert_eq!(w.slice(2), &basis.unit(0));
    }

    #[test]
    fn ring_buffer_capacity() {
        let mut traj = Trajectory::<f64>::new(0.1, 0, Some(3));
        for k in 0..5 {
            traj.push(Field::from_coeffs(vec![k as f64]));
        }
        assert_eq!(traj.first_index(), 2);
        assert_eq!(traj.last_index(), 4);
        assert!(traj.at_index(1).is_none());
        assert_eq!(traj.at_time(0.3).unwrap().coeffs()[0], 3.0);
        assert!(traj.at_time(0.35).is_none());
    }

    #[test]
    fn oracle_trivial_cases() {
        let dt = 0.05;
        let (basis, kernel, _) = setup(dt);
        let zero = ModalSeries::zero();
        let traj = Trajectory::from_past(&zero, &basis, dt, kernel.horizon()).unwrap();
        assert_eq!(direct_convolution_oracle(&traj, &kernel, 0).unwrap(), basis.zeros());
        let frozen = ModalSeries::single(TimeProfile::Constant, vec![(1, 1.0)]);
        let traj = Trajectory::from_past(&frozen, &basis, dt, kernel.horizon()).unwrap();
        assert_eq!(direct_convolution_oracle(&traj, &kernel, 0).unwrap(), basis.zeros());
        let short = Trajectory::from_past(&frozen, &basis, dt, 1.0).unwrap();
        assert!(matches!(
            direct_convolution_oracle(&short, &kernel, 0),
            Err(Error::TrajectoryGap(_))
        ));
    }

    #[test]
    fn snapshot_layout() {
        let (basis, _, grid) = setup(2.0);
        let past = ModalSeries::single(TimeProfile::Exponential { rate: 1.0 }, vec![(1, 1.0), (3, -0.5)]);
        let (w, _, _) = init_history(&past, &basis, grid.clone()).unwrap();
        let mut bytes = Vec::new();
        w.write_snapshot(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 8 * (grid.intervals() + 1) * basis.dim());
        assert_eq!(&bytes[0..8], &(grid.intervals() as u64).to_le_bytes());
        assert_eq!(&bytes[16..24], &2.0f64.to_le_bytes());
        let snap = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(snap.modes, 4);
        assert_eq!(snap.coefficients[4], w.slice(1).coeffs()[0]);
    }
}
