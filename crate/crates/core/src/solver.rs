//! Time integration of `(u, v, w)` and the local-existence certificate.
//!
//! One step is a Strang splitting: half a step of damping (implicit midpoint,
//! solved node by node), a full conservative step (midpoint in the stiffness and
//! memory terms, source explicit at the extrapolated midpoint, history moved
//! along characteristics), and another half step of damping.

use std::sync::Arc;

use rand::Rng;

use crate::energy::{observe, EnergyLedger, LedgerRow};
use crate::error::{Error, Result};
use crate::history::{init_history, HistoryField, HistoryGrid, PastHistory, Trajectory};
use crate::model::{source_nodal, DampingSpec, Model, SourceMode, SourceSpec};
use crate::roots::{solve_increasing, Root};
use crate::scalar::Scalar;
use crate::spectral::{lp_norm_nodal, Field, SpectralBasis};

/// Modified energy above which a run reports the blow-up indicator.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig<S> {
    pub dt: S,
    /// Residual tolerance of the damping solve.
    pub damping_tol: S,
    pub max_damping_iter: usize,
    pub source_mode: SourceMode<S>,
}

impl<S: Scalar> StepperConfig<S> {
    pub fn new(dt: S) -> Self {
        StepperConfig {
            dt,
            damping_tol: S::lit(1e-13),
            max_damping_iter: 200,
            source_mode: SourceMode::Full,
        }
    }

    pub fn with_source_mode(mut self, mode: SourceMode<S>) -> Self {
        self.source_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive, got {}", self.dt),
            });
        }
        if !(self.damping_tol > S::zero()) || self.max_damping_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "damping_tol",
                reason: "damping solve needs a positive tolerance and iteration budget".into(),
            });
        }
        match self.source_mode {
            SourceMode::Truncated { k } if !(k > S::zero()) => Err(Error::InvalidParameter {
                name: "K",
                reason: format!("truncation radius must be positive, got {k}"),
            }),
            SourceMode::Cutoff { n: 0 } => Err(Error::InvalidParameter {
                name: "n",
                reason: "cutoff level must be positive".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// Borrowed view of a phase-space point.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint<'a, S> {
    pub u: &'a Field<S>,
    pub v: &'a Field<S>,
    pub w: &'a HistoryField<S>,
}

#[derive(Debug, Clone)]
pub struct SimState<S> {
    pub t: S,
    pub u: Field<S>,
    pub v: Field<S>,
    pub w: HistoryField<S>,
    /// Displacement one step back, for the source extrapolation.
    pub prev_u: Field<S>,
    /// Recent displacements, long enough to rebuild every history node.
    pub recent: Trajectory<S>,
}

impl<S: Scalar> SimState<S> {
    /// State at `t = 0` from a past history; the step equals the grid spacing.
    pub fn from_past(past: &dyn PastHistory<S>, basis: &SpectralBasis<S>, grid: Arc<HistoryGrid<S>>) -> Result<Self> {
        let dt = grid.spacing();
        let m = grid.intervals();
        let (w, u, v) = init_history(past, basis, grid)?;
        let prev_u = past.displacement(-dt, basis)?;
        let mut recent = Trajectory::new(dt, -(m as i64), Some(m + 1));
        for i in (1..=m).rev() {
            recent.push(&u - w.slice(i));
        }
        recent.push(u.clone());
        Ok(SimState {
            t: S::zero(),
            u,
            v,
            w,
            prev_u,
            recent,
        })
    }

    /// State from explicit components; `u(t − Δt)` is taken as `u − Δt·v`.
    pub fn from_parts(u: Field<S>, v: Field<S>, w: HistoryField<S>) -> Self {
        let dt = w.grid().spacing();
        let m = w.grid().intervals();
        let mut prev_u = u.clone();
        prev_u.axpy(-dt, &v);
        let mut recent = Trajectory::new(dt, w.step_index(), Some(m + 1));
        recent.push(u.clone());
        SimState {
            t: w.time(),
            u,
            v,
            w,
            prev_u,
            recent,
        }
    }

    pub fn zero(basis: &SpectralBasis<S>, grid: Arc<HistoryGrid<S>>) -> Self {
        let w = HistoryField::zeros(grid, basis.dim());
        Self::from_parts(basis.zeros(), basis.zeros(), w)
    }

    pub fn phase(&self) -> PhasePoint<'_, S> {
        PhasePoint {
            u: &self.u,
            v: &self.v,
            w: &self.w,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

/// Unique root of `y + λ g(y) = r`, bracketed by `[min(0,r), max(0,r)]`.
pub fn resolvent_damping<S: Scalar>(
    r: S,
    lambda: S,
    damping: &DampingSpec<S>,
    tol: S,
    max_iter: usize,
) -> Result<Root<S>> {
    if !(lambda > S::zero()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("resolvent parameter must be positive, got {lambda}"),
        });
    }
    let h = |y: S| {
        let (g, dg) = damping.eval(y);
        (y + lambda * g - r, dg.map(|d| S::one() + lambda * d))
    };
    let lo = r.min(S::zero());
    let hi = r.max(S::zero());
    solve_increasing(h, lo, hi, tol, max_iter)
}

/// Blow-up indicator raised by the stepper; never a proof of blow-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp<S> {
    pub t: S,
    pub modified_energy: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepStatus<S> {
    Advanced,
    BlowUp(BlowUp<S>),
}

pub struct Stepper<S> {
    basis: Arc<SpectralBasis<S>>,
    model: Model<S>,
    cfg: StepperConfig<S>,
    nodal: Vec<S>,
    nodal_src: Vec<S>,
    max_residual: S,
}

impl<S: Scalar> Stepper<S> {
    pub fn new(basis: Arc<SpectralBasis<S>>, model: Model<S>, cfg: StepperConfig<S>) -> Result<Self> {
        cfg.validate()?;
        let n = basis.nodal_len();
        Ok(Stepper {
            basis,
            model,
            cfg,
            nodal: vec![S::zero(); n],
            nodal_src: vec![S::zero(); n],
            max_residual: S::zero(),
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis<S>> {
        &self.basis
    }

    pub fn model(&self) -> &Model<S> {
        &self.model
    }

    pub fn config(&self) -> &StepperConfig<S> {
        &self.cfg
    }

    /// Largest damping-solve residual seen so far.
    pub fn max_resolvent_residual(&self) -> S {
        self.max_residual
    }

    fn damping_half(&mut self, v: &mut Field<S>) -> Result<()> {
        if self.model.damping.is_zero() {
            return Ok(());
        }
        let lambda = self.cfg.dt * S::lit(0.25);
        self.basis.to_nodal_into(v.coeffs(), &mut self.nodal);
        for x in self.nodal.iter_mut() {
            let root = resolvent_damping(
                *x,
                lambda,
                &self.model.damping,
                self.cfg.damping_tol,
                self.cfg.max_damping_iter,
            )?;
            self.max_residual = self.max_residual.max(root.residual);
            *x = root.x + root.x - *x;
        }
        self.basis.from_nodal_into(&self.nodal, v.coeffs_mut());
        Ok(())
    }

    fn source_coeffs(&mut self, u: &Field<S>) -> Field<S> {
        let mut out = self.basis.zeros();
        if self.model.source.is_zero() {
            return out;
        }
        self.basis.to_nodal_into(u.coeffs(), &mut self.nodal);
        let grad = self.basis.h1_norm_sq(u).sqrt();
        source_nodal(
            &self.model.source,
            self.cfg.source_mode,
            &self.nodal,
            grad,
            &mut self.nodal_src,
        );
        self.basis.from_nodal_into(&self.nodal_src, out.coeffs_mut());
        out
    }

    fn conservative(&mut self, state: &mut SimState<S>) -> Result<()> {
        let dt = self.cfg.dt;
        let half = S::lit(0.5);
        let mut mid = state.u.scaled(S::lit(1.5));
        mid.axpy(-half, &state.prev_u);
        let forcing = self.source_coeffs(&mid);
        let carried = state.w.characteristic_sum();
        let kappa_h: S = state.w.grid().cell_masses().iter().copied().sum();
        let mut delta = self.basis.zeros();
        let quarter = dt * dt * S::lit(0.25);
        for (j, &lam) in self.basis.eigenvalues().iter().enumerate() {
            let v = state.v.coeffs()[j];
            let rhs = -lam * (state.u.coeffs()[j] + carried.coeffs()[j]) + forcing.coeffs()[j];
            let vbar = (v + half * dt * rhs) / (S::one() + quarter * lam * (S::one() + kappa_h));
            state.v.coeffs_mut()[j] = vbar + vbar - v;
            delta.coeffs_mut()[j] = dt * vbar;
        }
        let next = &state.u + &delta;
        state.prev_u = std::mem::replace(&mut state.u, next);
        state.recent.push(state.u.clone());
        state.w.advance(&delta, dt, Some(&state.recent))?;
        Ok(())
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut SimState<S>) -> Result<StepStatus<S>> {
        self.basis.check(&state.u)?;
        self.basis.check(&state.v)?;
        let mut v = std::mem::replace(&mut state.v, Field::zeros(0));
        self.damping_half(&mut v)?;
        state.v = v;
        self.conservative(state)?;
        let mut v = std::mem::replace(&mut state.v, Field::zeros(0));
        self.damping_half(&mut v)?;
        state.v = v;
        state.t = state.w.time();
        let modified = self.modified_energy(state);
        if !state.is_finite() || !modified.is_finite() || modified > S::lit(BLOW_UP_THRESHOLD) {
            return Ok(StepStatus::BlowUp(BlowUp {
                t: state.t,
                modified_energy: modified,
            }));
        }
        Ok(StepStatus::Advanced)
    }

    fn modified_energy(&mut self, state: &SimState<S>) -> S {
        let e = crate::energy::quadratic_energy(&self.basis, state.phase());
        self.basis.to_nodal_into(state.u.coeffs(), &mut self.nodal);
        let q = self.model.source.p + S::one();
        e + lp_norm_nodal(&self.basis, &self.nodal, q).powf(q) / q
    }
}

/// Receives every ledger row of a run together with the state it describes.
pub trait RunObserver<S> {
    fn observe(&mut self, state: &SimState<S>, row: &LedgerRow<S>) -> Result<()>;
}

impl<S> RunObserver<S> for () {
    fn observe(&mut self, _: &SimState<S>, _: &LedgerRow<S>) -> Result<()> {
        Ok(())
    }
}

impl<S, F: FnMut(&SimState<S>, &LedgerRow<S>) -> Result<()>> RunObserver<S> for F {
    fn observe(&mut self, state: &SimState<S>, row: &LedgerRow<S>) -> Result<()> {
        self(state, row)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport<S> {
    pub ledger: EnergyLedger<S>,
    pub steps: usize,
    pub blow_up: Option<BlowUp<S>>,
    pub max_resolvent_residual: S,
}

/// Steps until `t_end` (rounded to whole steps) or the blow-up indicator.
pub fn run<S: Scalar>(
    stepper: &mut Stepper<S>,
    state: &mut SimState<S>,
    t_end: S,
    observer: &mut dyn RunObserver<S>,
) -> Result<RunReport<S>> {
    let dt = stepper.cfg.dt;
    let steps = ((t_end - state.t) / dt).to_f64_lossy().round().max(0.0) as usize;
    let mode = stepper.cfg.source_mode;
    let mut ledger = EnergyLedger::new();
    let first = observe(&stepper.basis, &stepper.model, mode, state.phase(), state.t)?;
    observer.observe(state, ledger.push(first))?;
    let mut blow_up = None;
    let mut taken = 0;
    for _ in 0..steps {
        let status = stepper.step(state)?;
        taken += 1;
        if let StepStatus::BlowUp(signal) = status {
            blow_up = Some(signal);
            break;
        }
        let obs = observe(&stepper.basis, &stepper.model, mode, state.phase(), state.t)?;
        observer.observe(state, ledger.push(obs))?;
    }
    Ok(RunReport {
        ledger,
        steps: taken,
        blow_up,
        max_resolvent_residual: stepper.max_residual,
    })
}

/// Field with coefficients uniform in `[−1, 1]/j`, rescaled to `‖∇u‖₂ = radius`.
pub fn random_field<S: Scalar, R: Rng + ?Sized>(basis: &SpectralBasis<S>, rng: &mut R, radius: S) -> Field<S> {
    random_field_with_decay(basis, rng, radius, 1.0)
}

/// As [`random_field`] with coefficients uniform in `[−1, 1]/j^decay`.
pub fn random_field_with_decay<S: Scalar, R: Rng + ?Sized>(
    basis: &SpectralBasis<S>,
    rng: &mut R,
    radius: S,
    decay: f64,
) -> Field<S> {
    let mut u = Field::from_coeffs(
        (0..basis.dim())
            .map(|j| S::lit(rng.gen_range(-1.0..1.0) / ((j + 1) as f64).powf(decay)))
            .collect(),
    );
    let norm = basis.h1_norm_sq(&u).sqrt();
    if norm > S::zero() {
        u = u.scaled(radius / norm);
    }
    u
}

/// Norm in which a Lipschitz quotient of the source is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzTarget<S> {
    L2,
    Lq(S),
}

/// Largest sampled `‖f̃(u) − f̃(û)‖ / ‖∇(u − û)‖₂` for the source in `mode`, over
/// pairs with `‖∇u‖₂ ≤ radius` and `û` a small displacement of `u`.
///
/// Samples are spent in short random-ascent chains: each chain starts from a
/// fresh random pair with a random spectral decay and keeps perturbations that
/// raise the quotient.
pub fn sample_lipschitz<S: Scalar, R: Rng + ?Sized>(
    basis: &SpectralBasis<S>,
    source: &SourceSpec<S>,
    mode: SourceMode<S>,
    radius: S,
    target: LipschitzTarget<S>,
    samples: usize,
    rng: &mut R,
) -> Result<S> {
    const CHAIN: usize = 128;
    let n = basis.nodal_len();
    let q = match target {
        LipschitzTarget::L2 => S::lit(2.0),
        LipschitzTarget::Lq(q) => q,
    };
    let h = radius * S::lit(1e-5);
    let mut fa = vec![S::zero(); n];
    let mut fb = vec![S::zero(); n];
    let mut quotient = |a: &Field<S>, d: &Field<S>| -> Result<S> {
        let mut b = a.clone();
        b.axpy(h, d);
        let na = basis.to_nodal(a)?;
        let nb = basis.to_nodal(&b)?;
        source_nodal(source, mode, &na, basis.h1_norm_sq(a).sqrt(), &mut fa);
        source_nodal(source, mode, &nb, basis.h1_norm_sq(&b).sqrt(), &mut fb);
        let diff: Vec<S> = fa.iter().zip(&fb).map(|(x, y)| *x - *y).collect();
        Ok(lp_norm_nodal(basis, &diff, q) / (h * basis.h1_norm_sq(d).sqrt()))
    };
    let mut best = S::zero();
    let mut used = 0;
    while used < samples {
        let mut r = radius * S::lit(rng.gen_range(0.0f64..1.0).powf(0.25));
        let decay = rng.gen_range(0.5..4.0);
        let mut a = random_field_with_decay(basis, rng, r, decay);
        let mut d = random_field_with_decay(basis, rng, S::one(), decay);
        let mut value = quotient(&a, &d)?;
        used += 1;
        let mut spread = 0.5;
        for _ in 1..CHAIN {
            if used >= samples {
                break;
            }
            let r2 = (r * S::lit(1.0 + spread * rng.gen_range(-0.5..1.0))).min(radius);
            let mut a2 = random_field(basis, rng, r * S::lit(spread));
            a2.axpy(S::one(), &a);
            let norm = basis.h1_norm_sq(&a2).sqrt();
            if norm > S::zero() {
                a2 = a2.scaled(r2 / norm);
            }
            let mut d2 = random_field(basis, rng, S::lit(spread));
            d2.axpy(S::one(), &d);
            let norm = basis.h1_norm_sq(&d2).sqrt();
            if norm > S::zero() {
                d2 = d2.scaled(S::one() / norm);
            }
            let v2 = quotient(&a2, &d2)?;
            used += 1;
            if v2 > value {
                value = v2;
                a = a2;
                d = d2;
                r = r2;
            } else {
                spread *= 0.95;
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Constants of the local-existence certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeEstimate<S> {
    /// Truncation radius `K = 2√(E₀+1)`.
    pub k: S,
    /// Certified time `min(1/C₀, ln 2 / C(L_K))`.
    pub t: S,
    pub c0: S,
    /// Growth rate `C(L_K)` of the Gronwall bound.
    pub c_lk: S,
    /// Sampled Lipschitz constant of `f_K: H¹₀ → L^{(m+1)/m}`.
    pub l_k: S,
    /// Young constant for `ε = a`.
    pub c_eps: S,
}

/// Certificate for the truncated problem with the smallest admissible `K`.
///
/// With `P = (m+1)/m`, Young's inequality with `ε = a` gives
/// `C_ε = (ε(m+1))^{−1/m} m/(m+1)`, and convexity of `x^P` contributes `2^{1/m}`:
/// `C(L_K) = 2^{1+1/m} C_ε L_K^P`, `C₀ = 2^{1/m} C_ε (L_K^P + |f(0)|^P |Ω|) + a|Ω|`.
pub fn estimate_local_time<S: Scalar, R: Rng + ?Sized>(
    e0: S,
    basis: &SpectralBasis<S>,
    model: &Model<S>,
    samples: usize,
    rng: &mut R,
) -> Result<LocalTimeEstimate<S>> {
    if !(e0 >= S::zero()) {
        return Err(Error::InvalidParameter {
            name: "E0",
            reason: format!("initial energy must be nonnegative, got {e0}"),
        });
    }
    let k = S::lit(2.0) * (e0 + S::one()).sqrt();
    let m = model.damping.m;
    let a = model.damping.a;
    if !(a > S::zero()) {
        return Err(Error::InvalidParameter {
            name: "a",
            reason: "local-time estimate needs a positive damping constant".into(),
        });
    }
    let conj = (m + S::one()) / m;
    let l_k = sample_lipschitz(
        basis,
        &model.source,
        SourceMode::Truncated { k },
        k,
        LipschitzTarget::Lq(conj),
        samples,
        rng,
    )?;
    let eps = a;
    let c_eps = (eps * (m + S::one())).powf(-S::one() / m) * m / (m + S::one());
    let convex = S::lit(2.0).powf(S::one() / m);
    let area = basis.domain().measure();
    let f0 = model.source.value(S::zero()).abs();
    let c_lk = S::lit(2.0) * convex * c_eps * l_k.powf(conj);
    let c0 = convex * c_eps * (l_k.powf(conj) + f0.powf(conj) * area) + a * area;
    let t = (S::one() / c0).min(S::LN_2() / c_lk);
    Ok(LocalTimeEstimate {
        k,
        t,
        c0,
        c_lk,
        l_k,
        c_eps,
    })
}

/// `((𝒜+αI)U − (𝒜+αI)Û, U − Û)_H` with every term evaluated separately.
///
/// `𝒜(u, v, w) = (−v, −Δu + g(v) − 𝓛w − f̃(u), −v + ∂_s w)`, with `∂_s` the
/// backward difference on the history grid.
pub fn accretivity_check<S: Scalar>(
    basis: &SpectralBasis<S>,
    model: &Model<S>,
    mode: SourceMode<S>,
    alpha: S,
    lhs: PhasePoint<'_, S>,
    rhs: PhasePoint<'_, S>,
) -> Result<S> {
    if !Arc::ptr_eq(lhs.w.grid(), rhs.w.grid())
        && (lhs.w.grid().intervals() != rhs.w.grid().intervals()
            || lhs.w.grid().spacing() != rhs.w.grid().spacing())
    {
        return Err(Error::Mismatch {
            expected: lhs.w.grid().intervals() + 1,
            found: rhs.w.grid().intervals() + 1,
        });
    }
    for f in [lhs.u, lhs.v, rhs.u, rhs.v] {
        basis.check(f)?;
    }
    let du = lhs.u - rhs.u;
    let dv = lhs.v - rhs.v;
    let dw = lhs.w.difference(rhs.w);

    let first = -basis.h1_inner(&dv, &du);

    let stiffness = basis.h1_inner(&du, &dv);
    let va = basis.to_nodal(lhs.v)?;
    let vb = basis.to_nodal(rhs.v)?;
    let damping: Vec<S> = va
        .iter()
        .zip(&vb)
        .map(|(&x, &y)| (model.damping.eval(x).0 - model.damping.eval(y).0) * (x - y))
        .collect();
    let damping = basis.integrate(&damping);
    let memory = -basis.l2_inner(&dw.memory_operator(basis), &dv);
    let ua = basis.to_nodal(lhs.u)?;
    let ub = basis.to_nodal(rhs.u)?;
    let mut fa = vec![S::zero(); ua.len()];
    let mut fb = vec![S::zero(); ub.len()];
    source_nodal(&model.source, mode, &ua, basis.h1_norm_sq(lhs.u).sqrt(), &mut fa);
    source_nodal(&model.source, mode, &ub, basis.h1_norm_sq(rhs.u).sqrt(), &mut fb);
    let source: Vec<S> = fa
        .iter()
        .zip(&fb)
        .zip(va.iter().zip(&vb))
        .map(|((&x, &y), (&p, &q))| (x - y) * (p - q))
        .collect();
    let source = -basis.integrate(&source);

    let coupling = -dw.weighted_inner_const(basis, &dv);
    let transport = dw.transport_pairing(basis);

    let norm_sq = basis.h1_norm_sq(&du) + basis.l2_inner(&dv, &dv) + dw.weighted_norm_sq(basis);
    Ok(first + stiffness + damping + memory + source + coupling + transport + alpha * norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{ModalSeries, TimeProfile};
    use crate::model::{MemoryKernel, SourceSpec};
    use crate::spectral::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cubic() -> DampingSpec<f64> {
        DampingSpec::power(3.0)
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent_damping(2.0, 1.0, &cubic(), 1e-13, 100).unwrap();
        assert!((r.x - 1.0).abs() < 1e-13);
        let z = resolvent_damping(0.0, 0.7, &cubic(), 1e-13, 100).unwrap();
        assert_eq!(z.x, 0.0);
        let lin = DampingSpec::power(1.0);
        for &(r, lam) in &[(3.0f64, 0.5f64), (-2.0, 4.0), (1e-3, 1e3)] {
            let y = resolvent_damping(r, lam, &lin, 1e-13, 100).unwrap();
            assert!((y.x - r / (1.0 + lam)).abs() <= 1e-13);
        }
        assert!(resolvent_damping(1.0, 0.0, &cubic(), 1e-13, 100).is_err());
    }

    fn setup(kernel: MemoryKernel<f64>, dt: f64) -> (Arc<SpectralBasis<f64>>, Arc<HistoryGrid<f64>>) {
        let basis = Arc::new(SpectralBasis::new(Domain::unit_interval(), 8).unwrap());
        let grid = Arc::new(HistoryGrid::new(&kernel, dt).unwrap());
        (basis, grid)
    }

    #[test]
    fn zero_state_is_fixed() {
        let kernel = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let (basis, grid) = setup(kernel.clone(), 0.1);
        let model = Model {
            kernel,
            damping: cubic(),
            source: SourceSpec::power(3.0),
        };
        let mut stepper = Stepper::new(basis.clone(), model, StepperConfig::new(0.1)).unwrap();
        let mut state = SimState::zero(&basis, grid);
        for _ in 0..5 {
            assert_eq!(stepper.step(&mut state).unwrap(), StepStatus::Advanced);
        }
        assert_eq!(state.u, basis.zeros());
        assert_eq!(state.v, basis.zeros());
        assert_eq!(state.w.weighted_norm_sq(&basis), 0.0);
    }

    #[test]
    fn linear_oscillator_conserves_energy() {
        let kernel = MemoryKernel::memoryless();
        let dt = 0.01;
        let (basis, grid) = setup(kernel.clone(), dt);
        let model = Model {
            kernel,
            damping: DampingSpec::none(),
            source: SourceSpec::none(),
        };
        let mut stepper = Stepper::new(basis.clone(), model, StepperConfig::new(dt)).unwrap();
        let w = HistoryField::zeros(grid, basis.dim());
        let mut state = SimState::from_parts(basis.unit(0), basis.unit(0).scaled(0.3), w);
        let lam = basis.eigenvalues()[0];
        let energy = |s: &SimState<f64>| 0.5 * (s.v.coeffs()[0].powi(2) + lam * s.u.coeffs()[0].powi(2));
        let e0 = energy(&state);
        for _ in 0..500 {
            let before = energy(&state);
            stepper.step(&mut state).unwrap();
            assert!((energy(&state) - before).abs() <= 1e-12 * e0);
        }
    }

    #[test]
    fn bad_config_rejected() {
        let kernel = MemoryKernel::memoryless();
        let (basis, _) = setup(kernel.clone(), 0.1);
        let model = Model {
            kernel,
            damping: cubic(),
            source: SourceSpec::none(),
        };
        assert!(Stepper::new(basis.clone(), model.clone(), StepperConfig::new(0.0)).is_err());
        let cfg = StepperConfig::new(0.1).with_source_mode(SourceMode::Truncated { k: -1.0 });
        assert!(Stepper::new(basis, model, cfg).is_err());
    }

    #[test]
    fn past_state_is_consistent() {
        let kernel = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let (basis, grid) = setup(kernel, 0.25);
        let past = ModalSeries::single(TimeProfile::Trig { omega: 2.0, phase: 0.3 }, vec![(1, 1.0), (2, 0.5)]);
        let state = SimState::from_past(&past, &basis, grid.clone()).unwrap();
        assert_eq!(state.recent.len(), grid.intervals() + 1);
        let back = past.displacement(-0.25, &basis).unwrap();
        assert!((&state.prev_u - &back).coeffs().iter().all(|c| c.abs() < 1e-15));
        let oldest = state.recent.at_index(-(grid.intervals() as i64)).unwrap();
        let exact = past.displacement(-grid.node(grid.intervals()), &basis).unwrap();
        assert!((oldest - &exact).coeffs().iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn zero_energy_gives_k_two() {
        let kernel = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let (basis, _) = setup(kernel.clone(), 0.1);
        let model = Model {
            kernel,
            damping: cubic(),
            source: SourceSpec::power(3.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_local_time(0.0, &basis, &model, 200, &mut rng).unwrap();
        assert_eq!(est.k, 2.0);
        assert!(est.t > 0.0 && est.t.is_finite());
        assert!(est.t <= 1.0 / est.c0 && est.t <= std::f64::consts::LN_2 / est.c_lk);
    }

    #[test]
    fn accretivity_of_identical_points_vanishes() {
        let kernel = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let (basis, grid) = setup(kernel.clone(), 0.5);
        let model = Model {
            kernel,
            damping: cubic(),
            source: SourceSpec::power(3.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&basis, &mut rng, 1.0);
        let v = random_field(&basis, &mut rng, 1.0);
        let w = HistoryField::zeros(grid, basis.dim());
        let p = PhasePoint { u: &u, v: &v, w: &w };
        let val = accretivity_check(&basis, &model, SourceMode::Truncated { k: 2.0 }, 1.0, p, p).unwrap();
        assert_eq!(val, 0.0);
    }
}
