//! Energies, the energy-identity ledger, weak-form residuals and Gronwall ceilings.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::history::{HistoryField, TimeProfile};
use crate::model::{source_nodal, Model, SourceMode};
use crate::scalar::Scalar;
use crate::solver::{PhasePoint, RunObserver, SimState};
use crate::spectral::{lp_norm_nodal, Field, SpectralBasis};

/// `E = ½(‖v‖₂² + ‖∇u‖₂² + ‖w‖²_μ)`
pub fn quadratic_energy<S: Scalar>(basis: &SpectralBasis<S>, x: PhasePoint<'_, S>) -> S {
    S::lit(0.5) * (x.v.dot(x.v) + basis.h1_norm_sq(x.u) + x.w.weighted_norm_sq(basis))
}

/// `𝓔 = E + ‖u‖_{p+1}^{p+1}/(p+1)`
pub fn modified_energy<S: Scalar>(basis: &SpectralBasis<S>, p: S, x: PhasePoint<'_, S>) -> Result<S> {
    let nodal = basis.to_nodal(x.u)?;
    let q = p + S::one();
    Ok(quadratic_energy(basis, x) + lp_norm_nodal(basis, &nodal, q).powf(q) / q)
}

/// Energy of the difference of two phase points.
pub fn difference_energy<S: Scalar>(basis: &SpectralBasis<S>, a: PhasePoint<'_, S>, b: PhasePoint<'_, S>) -> S {
    let du = a.u - b.u;
    let dv = a.v - b.v;
    let dw = a.w.difference(b.w);
    quadratic_energy(
        basis,
        PhasePoint {
            u: &du,
            v: &dv,
            w: &dw,
        },
    )
}

/// Instantaneous energies and rates at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<S> {
    pub t: S,
    pub energy: S,
    pub modified_energy: S,
    /// `∫ g(u_t) u_t`
    pub damping_rate: S,
    /// `−½ ∫ μ′(s) ‖∇w(s)‖₂² ds`
    pub kernel_rate: S,
    /// `∫ f(u) u_t` with the source in the stepper's mode.
    pub source_rate: S,
}

pub fn observe<S: Scalar>(
    basis: &SpectralBasis<S>,
    model: &Model<S>,
    mode: SourceMode<S>,
    x: PhasePoint<'_, S>,
    t: S,
) -> Result<Observation<S>> {
    let nu = basis.to_nodal(x.u)?;
    let nv = basis.to_nodal(x.v)?;
    let (weighted, kernel_rate) = x.w.energy_terms(basis);
    let energy = S::lit(0.5) * (x.v.dot(x.v) + basis.h1_norm_sq(x.u) + weighted);
    let q = model.source.p + S::one();
    let modified_energy = energy + lp_norm_nodal(basis, &nu, q).powf(q) / q;
    let damping_rate = if model.damping.is_zero() {
        S::zero()
    } else {
        basis.integrate_map(&nv, |y| model.damping.eval(y).0 * y)
    };
    let source_rate = if model.source.is_zero() {
        S::zero()
    } else {
        let mut f = vec![S::zero(); nu.len()];
        source_nodal(&model.source, mode, &nu, basis.h1_norm_sq(x.u).sqrt(), &mut f);
        let prod: Vec<S> = f.iter().zip(&nv).map(|(&a, &b)| a * b).collect();
        basis.integrate(&prod)
    };
    Ok(Observation {
        t,
        energy,
        modified_energy,
        damping_rate,
        kernel_rate,
        source_rate,
    })
}

/// One ledger line: energies, trapezoidal accumulations and the identity residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow<S> {
    pub t: S,
    pub energy: S,
    pub modified_energy: S,
    pub damping: S,
    pub kernel: S,
    pub source_work: S,
    pub residual: S,
}

/// `R(t) = E(t) + D_g(t) + D_μ(t) − E(0) − W_f(t)`
pub fn identity_residual<S: Scalar>(row: &LedgerRow<S>, initial_energy: S) -> S {
    row.energy + row.damping + row.kernel - initial_energy - row.source_work
}

#[derive(Debug, Clone, Default)]
pub struct EnergyLedger<S> {
    rows: Vec<LedgerRow<S>>,
    last: Option<Observation<S>>,
}

impl<S: Scalar> EnergyLedger<S> {
    pub fn new() -> Self {
        EnergyLedger {
            rows: Vec::new(),
            last: None,
        }
    }

    /// Appends an observation; time integrals advance by the trapezoidal rule.
    pub fn push(&mut self, obs: Observation<S>) -> &LedgerRow<S> {
        let row = match (self.last, self.rows.last()) {
            (Some(prev), Some(row)) => {
                let h = S::lit(0.5) * (obs.t - prev.t);
                LedgerRow {
                    t: obs.t,
                    energy: obs.energy,
                    modified_energy: obs.modified_energy,
                    damping: row.damping + h * (prev.damping_rate + obs.damping_rate),
                    kernel: row.kernel + h * (prev.kernel_rate + obs.kernel_rate),
                    source_work: row.source_work + h * (prev.source_rate + obs.source_rate),
                    residual: S::zero(),
                }
            }
            _ => LedgerRow {
                t: obs.t,
                energy: obs.energy,
                modified_energy: obs.modified_energy,
                damping: S::zero(),
                kernel: S::zero(),
                source_work: S::zero(),
                residual: S::zero(),
            },
        };
        let e0 = self.rows.first().map_or(obs.energy, |r| r.energy);
        let row = LedgerRow {
            residual: identity_residual(&row, e0),
            ..row
        };
        self.last = Some(obs);
        self.rows.push(row);
        self.rows.last().expect("just pushed")
    }

    pub fn rows(&self) -> &[LedgerRow<S>] {
        &self.rows
    }

    pub fn initial_energy(&self) -> Option<S> {
        self.rows.first().map(|r| r.energy)
    }

    pub fn max_abs_residual(&self) -> S {
        self.rows.iter().fold(S::zero(), |m, r| m.max(r.residual.abs()))
    }

    pub fn max_modified_energy(&self) -> S {
        self.rows.iter().fold(S::zero(), |m, r| m.max(r.modified_energy))
    }

    /// Writes `t,E,modE,D_g,D_mu,W_f,residual` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,E,modE,D_g,D_mu,W_f,residual")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t.to_f64_lossy(),
                r.energy.to_f64_lossy(),
                r.modified_energy.to_f64_lossy(),
                r.damping.to_f64_lossy(),
                r.kernel.to_f64_lossy(),
                r.source_work.to_f64_lossy(),
                r.residual.to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// `(E₀ + C₀·T)·e^{C t}`
pub fn gronwall_bound<S: Scalar>(e0: S, c0: S, growth: S, horizon: S, t: S) -> S {
    (e0 + c0 * horizon) * (growth * t).exp()
}

/// Constants of the modified-energy Gronwall ceiling for `m ≥ p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalConstants<S> {
    /// Young parameter `ε = a / (4β)`, `β = |Ω|^{1−(p+1)/(m+1)}`.
    pub eps: S,
    /// `Y(ε) = (ε(p+1))^{−1/p}·p/(p+1)`
    pub young: S,
    /// `|f(s)| ≤ C_f(|s|^p + 1)`
    pub source_bound: S,
    /// Rate `C_ε` multiplying `∫𝓔`.
    pub growth: S,
    /// Additive constant `C_{T,ε}` over the horizon.
    pub offset: S,
    pub horizon: S,
}

impl<S: Scalar> GlobalConstants<S> {
    /// `m ≥ p` is required; `growth_constant` is `C` in `|f′(s)| ≤ C(|s|^{p−1}+1)`.
    pub fn new(model: &Model<S>, growth_constant: S, area: S, horizon: S) -> Result<Self> {
        let p = model.source.p;
        let m = model.damping.m;
        let a = model.damping.a;
        if m < p {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("ceiling needs m ≥ p, got m = {m}, p = {p}"),
            });
        }
        if !(a > S::zero()) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: "ceiling needs a positive damping constant".into(),
            });
        }
        let one = S::one();
        let beta = area.powf(one - (p + one) / (m + one));
        let eps = a / (S::lit(4.0) * beta);
        let young = (eps * (p + one)).powf(-one / p) * p / (p + one);
        let f0 = model.source.value(S::zero()).abs();
        let source_bound = (growth_constant * (one + one / p)).max(growth_constant + f0);
        let conj = (p + one) / p;
        let spread = S::lit(2.0).powf(one / p);
        let lifted = source_bound.powf(conj) * spread;
        let growth = young * (lifted + one) * (p + one);
        let offset = horizon * (a * area + S::lit(0.5) * a + young * lifted * area);
        Ok(GlobalConstants {
            eps,
            young,
            source_bound,
            growth,
            offset,
            horizon,
        })
    }

    /// `(𝓔(0) + C_{T,ε})·e^{C_ε t}`
    pub fn ceiling(&self, initial: S, t: S) -> S {
        gronwall_bound(initial, self.offset / self.horizon, self.growth, self.horizon, t)
    }
}

/// Time-dependent test function `φ(t)` with its time derivative.
pub trait TestFunction<S> {
    fn at(&self, t: S) -> (Field<S>, Field<S>);
}

/// `φ(x, t) = θ(t)·ψ(x)` with `ψ` in the spectral space.
#[derive(Debug, Clone)]
pub struct SeparableTest<S> {
    pub space: Field<S>,
    pub profile: TimeProfile<S>,
}

impl<S: Scalar> TestFunction<S> for SeparableTest<S> {
    fn at(&self, t: S) -> (Field<S>, Field<S>) {
        (
            self.space.scaled(self.profile.value(t)),
            self.space.scaled(self.profile.derivative(t)),
        )
    }
}

/// What the weak form needs from one instant of a run.
#[derive(Debug, Clone)]
pub struct WeakSample<S> {
    pub t: S,
    pub u: Field<S>,
    pub v: Field<S>,
    /// `Σ ω_i w(s_i)`
    pub memory: Field<S>,
}

impl<S: Scalar> WeakSample<S> {
    pub fn of(t: S, u: &Field<S>, v: &Field<S>, w: &HistoryField<S>) -> Self {
        WeakSample {
            t,
            u: u.clone(),
            v: v.clone(),
            memory: w.memory_integral(),
        }
    }
}

/// Run observer collecting weak-form samples at every step.
#[derive(Debug, Clone, Default)]
pub struct WeakRecorder<S> {
    pub samples: Vec<WeakSample<S>>,
}

impl<S: Scalar> RunObserver<S> for WeakRecorder<S> {
    fn observe(&mut self, state: &SimState<S>, _: &LedgerRow<S>) -> Result<()> {
        self.samples.push(WeakSample::of(state.t, &state.u, &state.v, &state.w));
        Ok(())
    }
}

/// Signed residual of the variational identity at the last sample time:
///
/// `(v,φ)(t) − (v,φ)(0) + ∫₀ᵗ [−(v,φ_t) + k(0)(∇u,∇φ) + ∫k′(s)(∇u(τ−s),∇φ)ds +
/// (g(v),φ) − (f(u),φ)] dτ`, with `∫k′ ∇u(τ−s) = Σω_i ∇w_i − (Σω_i) ∇u` on the
/// history grid. Time integrals are trapezoidal over the samples.
pub fn weak_form_residual<S: Scalar>(
    samples: &[WeakSample<S>],
    basis: &SpectralBasis<S>,
    model: &Model<S>,
    mode: SourceMode<S>,
    retained_mass: S,
    phi: &dyn TestFunction<S>,
) -> Result<S> {
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(S::zero()),
    };
    let k0 = model.kernel.relaxation_at_zero();
    let mut fnodal = vec![S::zero(); basis.nodal_len()];
    let mut integrand = |s: &WeakSample<S>| -> Result<S> {
        let (p, pt) = phi.at(s.t);
        if p.len() != basis.dim() || pt.len() != basis.dim() || !p.is_finite() || !pt.is_finite() {
            return Err(Error::InvalidTestFunction(format!(
                "test function at t = {} is not a finite field on the basis",
                s.t
            )));
        }
        let nphi = basis.to_nodal(&p)?;
        let nv = basis.to_nodal(&s.v)?;
        let nu = basis.to_nodal(&s.u)?;
        let damping: Vec<S> = nv
            .iter()
            .zip(&nphi)
            .map(|(&y, &f)| model.damping.eval(y).0 * f)
            .collect();
        source_nodal(&model.source, mode, &nu, basis.h1_norm_sq(&s.u).sqrt(), &mut fnodal);
        let source: Vec<S> = fnodal.iter().zip(&nphi).map(|(&a, &b)| a * b).collect();
        let stiff = basis.h1_inner(&s.u, &p);
        let memory = basis.h1_inner(&s.memory, &p) - retained_mass * stiff;
        Ok(-s.v.dot(&pt) + k0 * stiff + memory + basis.integrate(&damping) - basis.integrate(&source))
    };
    let mut integral = S::zero();
    let mut prev = integrand(first)?;
    for pair in samples.windows(2) {
        let cur = integrand(&pair[1])?;
        integral += S::lit(0.5) * (pair[1].t - pair[0].t) * (prev + cur);
        prev = cur;
    }
    let (p_end, _) = phi.at(last.t);
    let (p_start, _) = phi.at(first.t);
    Ok(last.v.dot(&p_end) - first.v.dot(&p_start) + integral)
}
