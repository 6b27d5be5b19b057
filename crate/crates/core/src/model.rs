//! Memory kernels, damping feedbacks and sources, with the structural checks
//! the well-posedness theory requires of them.

use std::fmt::{self, Debug};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::roots;
use crate::scalar::Scalar;

/// Default relative tail tolerance `μ(s_max) ≤ τ·μ(0⁺)`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily<S> {
    /// `μ(s) = Σ c_k e^{−θ_k s}`
    Prony { amplitudes: Vec<S>, rates: Vec<S> },
    /// `μ(s) = c (1 + s)^{−α}`, `α > 1`
    PowerDecay { amplitude: S, exponent: S },
    /// `μ ≡ 0`: the purely elastic wave equation.
    Memoryless,
}

/// Relaxation kernel `μ = −k′` with `k(∞) = 1`, truncated at `s_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel<S> {
    family: KernelFamily<S>,
    s_max: S,
    tail_tolerance: S,
}

impl<S: Scalar> MemoryKernel<S> {
    pub fn prony(amplitudes: Vec<S>, rates: Vec<S>, tail_tolerance: S) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.len() != rates.len() {
            return Err(Error::InvalidKernel(format!(
                "prony sum needs matching nonempty amplitude/rate lists (got {} and {})",
                amplitudes.len(),
                rates.len()
            )));
        }
        if amplitudes
            .iter()
            .chain(&rates)
            .any(|&x| !(x > S::zero()) || !x.is_finite())
        {
            return Err(Error::InvalidKernel(
                "prony amplitudes and rates must be positive and finite".into(),
            ));
        }
        check_tail_tolerance(tail_tolerance)?;
        let mut k = MemoryKernel {
            family: KernelFamily::Prony { amplitudes, rates },
            s_max: S::zero(),
            tail_tolerance,
        };
        k.s_max = k.horizon_for_tolerance()?;
        Ok(k)
    }

    /// Single exponential `c e^{−θ s}` with the default tail tolerance.
    pub fn exponential(amplitude: S, rate: S) -> Result<Self> {
        Self::prony(vec![amplitude], vec![rate], S::lit(DEFAULT_TAIL_TOLERANCE))
    }

    pub fn power_decay(amplitude: S, exponent: S, tail_tolerance: S) -> Result<Self> {
        if !(exponent > S::one()) {
            return Err(Error::DivergentMass {
                exponent: exponent.to_f64_lossy(),
            });
        }
        if !(amplitude > S::zero()) || !amplitude.is_finite() {
            return Err(Error::InvalidKernel("power-decay amplitude must be positive".into()));
        }
        check_tail_tolerance(tail_tolerance)?;
        let mut k = MemoryKernel {
            family: KernelFamily::PowerDecay { amplitude, exponent },
            s_max: S::zero(),
            tail_tolerance,
        };
        k.s_max = k.horizon_for_tolerance()?;
        Ok(k)
    }

    pub fn memoryless() -> Self {
        MemoryKernel {
            family: KernelFamily::Memoryless,
            s_max: S::zero(),
            tail_tolerance: S::zero(),
        }
    }

    /// Overrides the truncation horizon.
    pub fn with_horizon(mut self, s_max: S) -> Result<Self> {
        if self.is_memoryless() {
            return Ok(self);
        }
        if !(s_max > S::zero()) || !s_max.is_finite() {
            return Err(Error::InvalidKernel("truncation horizon must be positive".into()));
        }
        self.s_max = s_max;
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily<S> {
        &self.family
    }

    pub fn is_memoryless(&self) -> bool {
        matches!(self.family, KernelFamily::Memoryless)
    }

    pub fn horizon(&self) -> S {
        self.s_max
    }

    pub fn tail_tolerance(&self) -> S {
        self.tail_tolerance
    }

    /// `μ(s)`
    pub fn value(&self, s: S) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => amplitudes
                .iter()
                .zip(rates)
                .map(|(&c, &r)| c * (-r * s).exp())
                .sum(),
            KernelFamily::PowerDecay { amplitude, exponent } => {
                *amplitude * (S::one() + s).powf(-*exponent)
            }
            KernelFamily::Memoryless => S::zero(),
        }
    }

    /// `μ′(s)`
    pub fn derivative(&self, s: S) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => amplitudes
                .iter()
                .zip(rates)
                .map(|(&c, &r)| -c * r * (-r * s).exp())
                .sum(),
            KernelFamily::PowerDecay { amplitude, exponent } => {
                -*amplitude * *exponent * (S::one() + s).powf(-*exponent - S::one())
            }
            KernelFamily::Memoryless => S::zero(),
        }
    }

    /// `∫₀^s μ`
    pub fn truncated_mass(&self, s: S) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => amplitudes
                .iter()
                .zip(rates)
                .map(|(&c, &r)| c / r * -(-r * s).exp_m1())
                .sum(),
            KernelFamily::PowerDecay { amplitude, exponent } => {
                let e1 = *exponent - S::one();
                *amplitude / e1 * (S::one() - (S::one() + s).powf(-e1))
            }
            KernelFamily::Memoryless => S::zero(),
        }
    }

    /// `κ = ∫₀^∞ μ = k(0) − 1`, exact for both families.
    pub fn mass(&self) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => {
                amplitudes.iter().zip(rates).map(|(&c, &r)| c / r).sum()
            }
            KernelFamily::PowerDecay { amplitude, exponent } => *amplitude / (*exponent - S::one()),
            KernelFamily::Memoryless => S::zero(),
        }
    }

    /// `k(0) = 1 + κ`
    pub fn relaxation_at_zero(&self) -> S {
        S::one() + self.mass()
    }

    /// `∫_a^b μ`
    pub fn cell_mass(&self, a: S, b: S) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => amplitudes
                .iter()
                .zip(rates)
                .map(|(&c, &r)| c / r * (-r * a).exp() * -(-r * (b - a)).exp_m1())
                .sum(),
            _ => self.truncated_mass(b) - self.truncated_mass(a),
        }
    }

    /// `∫_{s_max}^∞ μ`
    pub fn tail_mass(&self) -> S {
        match &self.family {
            KernelFamily::Prony { amplitudes, rates } => amplitudes
                .iter()
                .zip(rates)
                .map(|(&c, &r)| c / r * (-r * self.s_max).exp())
                .sum(),
            KernelFamily::PowerDecay { amplitude, exponent } => {
                let e1 = *exponent - S::one();
                *amplitude / e1 * (S::one() + self.s_max).powf(-e1)
            }
            KernelFamily::Memoryless => S::zero(),
        }
    }

    fn horizon_for_tolerance(&self) -> Result<S> {
        let tol = self.tail_tolerance;
        match &self.family {
            KernelFamily::Prony { rates, .. } => {
                let mu0 = self.value(S::zero());
                let slowest = rates.iter().copied().fold(S::infinity(), S::min);
                let hi = (S::one() / tol).ln() / slowest;
                let target = tol * mu0;
                let root = roots::solve_increasing(
                    |s| (target - self.value(s), Some(-self.derivative(s))),
                    S::zero(),
                    hi,
                    target * S::lit(1e-10),
                    200,
                )?;
                Ok(root.x)
            }
            KernelFamily::PowerDecay { exponent, .. } => {
                Ok(tol.powf(-S::one() / *exponent) - S::one())
            }
            KernelFamily::Memoryless => Ok(S::zero()),
        }
    }
}

fn check_tail_tolerance<S: Scalar>(tol: S) -> Result<()> {
    if !(tol > S::zero() && tol < S::one()) {
        return Err(Error::InvalidKernel(format!(
            "tail tolerance must lie in (0, 1), got {tol}"
        )));
    }
    Ok(())
}

/// `κ` and `k(0)` of a kernel.
pub fn kernel_mass<S: Scalar>(kernel: &MemoryKernel<S>) -> (S, S) {
    (kernel.mass(), kernel.relaxation_at_zero())
}

/// A user-supplied monotone damping profile.
pub trait DampingShape<S>: Send + Sync {
    /// `(g(s), g′(s))`; the derivative may be omitted where `g` is not differentiable.
    fn eval(&self, s: S) -> (S, Option<S>);
}

#[derive(Clone)]
pub enum DampingLaw<S> {
    /// `g(s) = c·s|s|^{m−1}`
    Power { coefficient: S },
    Custom(Arc<dyn DampingShape<S>>),
}

impl<S: Debug> Debug for DampingLaw<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DampingLaw::Power { coefficient } => {
                f.debug_struct("Power").field("coefficient", coefficient).finish()
            }
            DampingLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Monotone feedback `g` with `a|s|^{m+1} ≤ g(s)s ≤ b|s|^{m+1}` for `|s| ≥ 1`.
#[derive(Debug, Clone)]
pub struct DampingSpec<S> {
    pub m: S,
    pub a: S,
    pub b: S,
    pub law: DampingLaw<S>,
}

impl<S: Scalar> DampingSpec<S> {
    /// Reference shape `g(s) = s|s|^{m−1}` (so `a = b = 1`).
    pub fn power(m: S) -> Self {
        Self::scaled_power(m, S::one())
    }

    pub fn scaled_power(m: S, coefficient: S) -> Self {
        DampingSpec {
            m,
            a: coefficient,
            b: coefficient,
            law: DampingLaw::Power { coefficient },
        }
    }

    /// Zero feedback; not admissible, used for conservative test runs.
    pub fn none() -> Self {
        Self::scaled_power(S::one(), S::zero())
    }

    pub fn custom(m: S, a: S, b: S, shape: Arc<dyn DampingShape<S>>) -> Self {
        DampingSpec {
            m,
            a,
            b,
            law: DampingLaw::Custom(shape),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.law, DampingLaw::Power { coefficient } if coefficient == S::zero())
    }

    /// `(g(s), g′(s))`
    #[inline]
    pub fn eval(&self, s: S) -> (S, Option<S>) {
        match &self.law {
            DampingLaw::Power { coefficient } => {
                let c = *coefficient;
                if self.m == S::one() {
                    return (c * s, Some(c));
                }
                if self.m == S::lit(3.0) {
                    return (c * s * s * s, Some(S::lit(3.0) * c * s * s));
                }
                let abs = s.abs();
                let pow = abs.powf(self.m - S::one());
                (c * s * pow, Some(c * self.m * pow))
            }
            DampingLaw::Custom(shape) => shape.eval(s),
        }
    }
}

/// `g(s)` and `g′(s)` where defined.
pub fn eval_damping<S: Scalar>(damping: &DampingSpec<S>, s: S) -> (S, Option<S>) {
    damping.eval(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSign {
    /// `f(s) = |s|^{p−1}s`
    EnergyBuilding,
    /// `f(s) = −|s|^{p−1}s`
    Dissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceClass {
    Subcritical,
    Critical,
    Supercritical,
    SuperSupercritical,
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceClass::Subcritical => "subcritical",
            SourceClass::Critical => "critical",
            SourceClass::Supercritical => "supercritical",
            SourceClass::SuperSupercritical => "super-supercritical",
        })
    }
}

/// Criticality relative to `H¹ ↪ L⁶` in three dimensions.
pub fn classify_source(p: f64) -> Result<SourceClass> {
    if !(1.0..6.0).contains(&p) {
        return Err(Error::ExponentOutOfRange(p));
    }
    Ok(if p < 3.0 {
        SourceClass::Subcritical
    } else if p == 3.0 {
        SourceClass::Critical
    } else if p <= 5.0 {
        SourceClass::Supercritical
    } else {
        SourceClass::SuperSupercritical
    })
}

/// Values of `f`, `f′`, `f″` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceValue<S> {
    pub value: S,
    pub d1: S,
    pub d2: S,
}

/// Power-type source `f(s) = ±|s|^{p−1}s` with `|f′(s)| ≤ C(|s|^{p−1}+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec<S> {
    pub p: S,
    pub growth: S,
    pub sign: SourceSign,
}

impl<S: Scalar> SourceSpec<S> {
    /// Reference shape with `C = p`.
    pub fn power(p: S) -> Self {
        SourceSpec {
            p,
            growth: p,
            sign: SourceSign::EnergyBuilding,
        }
    }

    pub fn dissipative(p: S) -> Self {
        SourceSpec {
            sign: SourceSign::Dissipative,
            ..Self::power(p)
        }
    }

    /// Zero source, represented as a dissipative power with vanishing output.
    pub fn none() -> Self {
        SourceSpec {
            p: S::one(),
            growth: S::zero(),
            sign: SourceSign::EnergyBuilding,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.growth == S::zero()
    }

    pub fn class(&self) -> Result<SourceClass> {
        classify_source(self.p.to_f64_lossy())
    }

    #[inline]
    fn sigma(&self) -> S {
        match self.sign {
            SourceSign::EnergyBuilding => S::one(),
            SourceSign::Dissipative => -S::one(),
        }
    }

    /// `f(s)`
    #[inline]
    pub fn value(&self, s: S) -> S {
        if self.is_zero() {
            return S::zero();
        }
        let p = self.p;
        let core = if p == S::one() {
            s
        } else if p == S::lit(3.0) {
            s * s * s
        } else {
            s * s.abs().powf(p - S::one())
        };
        self.sigma() * core
    }

    pub fn eval(&self, s: S) -> SourceValue<S> {
        if self.is_zero() {
            return SourceValue {
                value: S::zero(),
                d1: S::zero(),
                d2: S::zero(),
            };
        }
        let p = self.p;
        let sig = self.sigma();
        let abs = s.abs();
        let d2 = if p == S::one() {
            S::zero()
        } else if abs == S::zero() {
            if p >= S::lit(2.0) {
                S::zero()
            } else {
                S::infinity()
            }
        } else {
            p * (p - S::one()) * abs.powf(p - S::lit(2.0)) * s.signum()
        };
        SourceValue {
            value: self.value(s),
            d1: sig * p * abs.powf(p - S::one()),
            d2: sig * d2,
        }
    }
}

/// `f(s)`, `f′(s)`, `f″(s)`.
pub fn eval_source<S: Scalar>(source: &SourceSpec<S>, s: S) -> SourceValue<S> {
    source.eval(s)
}

/// `f_K(u)` at the nodes: `f(u)` inside the ball `‖∇u‖₂ ≤ K`, `f(Ku/‖∇u‖₂)` outside.
pub fn truncate_source_k<S: Scalar>(source: &SourceSpec<S>, nodal_u: &[S], grad_norm: S, k: S) -> Vec<S> {
    let scale = truncation_scale(grad_norm, k);
    nodal_u.iter().map(|&x| source.value(scale * x)).collect()
}

#[inline]
pub(crate) fn truncation_scale<S: Scalar>(grad_norm: S, k: S) -> S {
    if grad_norm <= k {
        S::one()
    } else {
        k / grad_norm
    }
}

/// Slope constant of the quintic cutoff: `|η_n′| ≤ CUTOFF_SLOPE / n`.
pub const CUTOFF_SLOPE: f64 = 15.0 / 8.0;

/// Smooth cutoff `η_n`: one on `|s| ≤ n`, zero on `|s| ≥ 2n`, a mirrored C² quintic
/// smoothstep in between. Returns `(η_n(s), η_n′(s))`.
pub fn cutoff<S: Scalar>(n: u32, s: S) -> (S, S) {
    let n = S::lit(n as f64);
    let abs = s.abs();
    if abs <= n {
        return (S::one(), S::zero());
    }
    if abs >= n + n {
        return (S::zero(), S::zero());
    }
    let x = (abs - n) / n;
    let x2 = x * x;
    let step = x2 * x * (S::lit(10.0) - S::lit(15.0) * x + S::lit(6.0) * x2);
    let dstep = S::lit(30.0) * x2 * (S::one() - x) * (S::one() - x) / n;
    (S::one() - step, -dstep * s.signum())
}

/// `f_n(s) = f(s)·η_n(s)`
pub fn cutoff_source_n<S: Scalar>(source: &SourceSpec<S>, n: u32, s: S) -> S {
    let (eta, _) = cutoff(n, s);
    if eta == S::zero() {
        return S::zero();
    }
    source.value(s) * eta
}

/// How the stepper evaluates the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceMode<S> {
    Full,
    Truncated { k: S },
    Cutoff { n: u32 },
}

/// Source in the given mode at the nodes of `u`; `grad_norm = ‖∇u‖₂` is only used by `f_K`.
pub fn source_nodal<S: Scalar>(
    source: &SourceSpec<S>,
    mode: SourceMode<S>,
    nodal_u: &[S],
    grad_norm: S,
    out: &mut [S],
) {
    match mode {
        SourceMode::Full => {
            for (o, &x) in out.iter_mut().zip(nodal_u) {
                *o = source.value(x);
            }
        }
        SourceMode::Truncated { k } => {
            let scale = truncation_scale(grad_norm, k);
            for (o, &x) in out.iter_mut().zip(nodal_u) {
                *o = source.value(scale * x);
            }
        }
        SourceMode::Cutoff { n } => {
            for (o, &x) in out.iter_mut().zip(nodal_u) {
                *o = cutoff_source_n(source, n, x);
            }
        }
    }
}

/// Kernel, damping and source of one problem instance.
#[derive(Debug, Clone)]
pub struct Model<S> {
    pub kernel: MemoryKernel<S>,
    pub damping: DampingSpec<S>,
    pub source: SourceSpec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bullet {
    Damping,
    Source,
    ExponentBalance,
    Kernel,
}

impl fmt::Display for Bullet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bullet::Damping => "damping",
            Bullet::Source => "source",
            Bullet::ExponentBalance => "exponent-balance",
            Bullet::Kernel => "kernel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub bullet: Bullet,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Smallest `C` with `|f′(s)| ≤ C(|s|^{p−1}+1)` over the sample set.
    pub sampled_growth_constant: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn bullet_passed(&self, bullet: Bullet) -> bool {
        self.checks
            .iter()
            .filter(|c| c.bullet == bullet)
            .all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}/{}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.bullet,
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Symmetric sample set: zero, a log-spaced sweep over `[1e-6, 1e3]` and a linear sweep on `[−4, 4]`.
fn sample_points() -> Vec<f64> {
    let mut pts = vec![0.0];
    for i in 0..=180 {
        let x = 10f64.powf(-6.0 + 9.0 * i as f64 / 180.0);
        pts.push(x);
        pts.push(-x);
    }
    for i in 0..=160 {
        pts.push(-4.0 + 8.0 * i as f64 / 160.0);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Checks each structural hypothesis separately; failures are entries, not errors.
pub fn validate_assumptions<S: Scalar>(
    kernel: &MemoryKernel<S>,
    damping: &DampingSpec<S>,
    source: &SourceSpec<S>,
) -> ValidationReport {
    let mut checks = Vec::new();
    let pts = sample_points();
    let mut push = |bullet, name, passed, detail: String| {
        checks.push(Check {
            bullet,
            name,
            passed,
            detail,
        })
    };

    // damping
    let m = damping.m.to_f64_lossy();
    let (a, b) = (damping.a.to_f64_lossy(), damping.b.to_f64_lossy());
    push(Bullet::Damping, "exponent", m >= 1.0, format!("m = {m}"));
    push(
        Bullet::Damping,
        "constants",
        a > 0.0 && a <= b,
        format!("a = {a}, b = {b}"),
    );
    let g = |s: f64| damping.eval(S::lit(s)).0.to_f64_lossy();
    let g0 = g(0.0);
    push(Bullet::Damping, "vanishes-at-origin", g0 == 0.0, format!("g(0) = {g0}"));
    let mut mono_violation = None;
    for w in pts.windows(2) {
        if g(w[0]) > g(w[1]) {
            mono_violation = Some((w[0], w[1]));
            break;
        }
    }
    push(
        Bullet::Damping,
        "monotone",
        mono_violation.is_none(),
        match mono_violation {
            None => "nondecreasing on sample set".into(),
            Some((x, y)) => format!("g({x}) > g({y})"),
        },
    );
    let mut growth_violation = None;
    for &s in pts.iter().filter(|s| s.abs() >= 1.0) {
        let gs = g(s) * s;
        let pow = s.abs().powf(m + 1.0);
        let slack = 1e-12 * pow;
        if gs < a * pow - slack || gs > b * pow + slack {
            growth_violation = Some((s, gs, pow));
            break;
        }
    }
    push(
        Bullet::Damping,
        "growth",
        growth_violation.is_none(),
        match growth_violation {
            None => "a|s|^(m+1) <= g(s)s <= b|s|^(m+1) for sampled |s| >= 1".into(),
            Some((s, gs, pow)) => format!("s = {s}: g(s)s = {gs}, |s|^(m+1) = {pow}"),
        },
    );

    // source
    let p = source.p.to_f64_lossy();
    push(
        Bullet::Source,
        "exponent-range",
        (1.0..6.0).contains(&p),
        format!("p = {p}"),
    );
    let c = source.growth.to_f64_lossy();
    let mut c_min: f64 = 0.0;
    for &s in &pts {
        let d1 = source.eval(S::lit(s)).d1.to_f64_lossy().abs();
        c_min = c_min.max(d1 / (s.abs().powf(p - 1.0) + 1.0));
    }
    push(
        Bullet::Source,
        "derivative-growth",
        c_min <= c * (1.0 + 1e-12),
        format!("smallest sampled C = {c_min}, declared C = {c}"),
    );

    // exponent balance
    let balance = p * (m + 1.0) / m;
    push(
        Bullet::ExponentBalance,
        "p(m+1)/m < 6",
        balance < 6.0,
        format!("p(m+1)/m = {balance}"),
    );

    // kernel
    let kappa = kernel.mass().to_f64_lossy();
    push(
        Bullet::Kernel,
        "finite-positive-mass",
        kappa.is_finite() && kappa > 0.0,
        format!("kappa = {kappa}, k(0) = {}", 1.0 + kappa),
    );
    let s_max = kernel.horizon().to_f64_lossy();
    let mut pos_violation = None;
    let mut decr_violation = None;
    if let KernelFamily::Prony { amplitudes, rates } = kernel.family() {
        if amplitudes.iter().chain(rates).any(|&x| !(x > S::zero())) {
            pos_violation = Some(0.0);
        }
    }
    let n_samples = 400;
    let mut prev = f64::INFINITY;
    for i in 1..=n_samples {
        let s = s_max * i as f64 / n_samples as f64;
        let mu = kernel.value(S::lit(s)).to_f64_lossy();
        let dmu = kernel.derivative(S::lit(s)).to_f64_lossy();
        if !(mu > 0.0) && pos_violation.is_none() {
            pos_violation = Some(s);
        }
        if (dmu > 0.0 || mu > prev) && decr_violation.is_none() {
            decr_violation = Some(s);
        }
        prev = mu;
    }
    if kernel.is_memoryless() {
        pos_violation = Some(0.0);
    }
    push(
        Bullet::Kernel,
        "positive",
        pos_violation.is_none(),
        match pos_violation {
            None => format!("mu > 0 on (0, {s_max}]"),
            Some(s) => format!("mu({s}) <= 0"),
        },
    );
    push(
        Bullet::Kernel,
        "nonincreasing",
        decr_violation.is_none(),
        match decr_violation {
            None => "mu' <= 0 on sample set".into(),
            Some(s) => format!("mu increases near s = {s}"),
        },
    );
    let mu0 = kernel.value(S::zero()).to_f64_lossy();
    let mu_end = kernel.value(kernel.horizon()).to_f64_lossy();
    let tau = kernel.tail_tolerance().to_f64_lossy();
    push(
        Bullet::Kernel,
        "tail",
        mu_end <= tau * mu0 * (1.0 + 1e-6),
        format!("mu(s_max) = {mu_end:e}, tau*mu(0) = {:e}", tau * mu0),
    );

    ValidationReport {
        checks,
        sampled_growth_constant: c_min,
    }
}
