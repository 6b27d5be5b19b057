//! Turning a parsed config into a model, running it, and writing the outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viscowave::{
    estimate_local_time, run, validate_assumptions, Basis64, DampingSpec, Domain, HistoryGrid, LocalTimeEstimate,
    MemoryKernel, ModalSeries, Model64, Norm, PastHistory, RunObserver, RunReport, SourceMode, SourceSpec, State64, Stepper64,
    StepperConfig, ValidationReport,
};

use crate::config::{KernelConfig, ModeConfig, ScenarioConfig};
use crate::{num, LabError, LabResult};

/// A validated problem instance ready to be stepped.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub basis: Arc<Basis64>,
    pub model: Model64,
    pub mode: SourceMode<f64>,
    pub past: ModalSeries<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub lipschitz_samples: usize,
    pub validation: ValidationReport,
}

pub fn kernel_from(cfg: &ScenarioConfig) -> LabResult<MemoryKernel<f64>> {
    Ok(match &cfg.kernel {
        KernelConfig::Prony { amplitudes, rates } => {
            MemoryKernel::prony(amplitudes.clone(), rates.clone(), cfg.tail_tolerance)?
        }
        KernelConfig::Power { amplitude, exponent } => {
            MemoryKernel::power_decay(*amplitude, *exponent, cfg.tail_tolerance)?
        }
        KernelConfig::None => MemoryKernel::memoryless(),
    })
}

pub fn model_from(cfg: &ScenarioConfig) -> LabResult<Model64> {
    let source = if cfg.source_on {
        let mut s = SourceSpec::power(cfg.source_p);
        s.sign = cfg.source_sign;
        if let Some(c) = cfg.source_growth {
            s.growth = c;
        }
        s
    } else {
        SourceSpec::none()
    };
    Ok(Model64 {
        kernel: kernel_from(cfg)?,
        damping: DampingSpec::scaled_power(cfg.damping_m, cfg.damping_coefficient),
        source,
    })
}

fn mode_from(mode: ModeConfig) -> SourceMode<f64> {
    match mode {
        ModeConfig::Full => SourceMode::Full,
        ModeConfig::Truncated { k } => SourceMode::Truncated { k },
        ModeConfig::Cutoff { n } => SourceMode::Cutoff { n },
    }
}

/// `Err(Invalid)` listing every failed check, unless overridden.
pub fn gate(report: &ValidationReport, allow_invalid: bool) -> LabResult<()> {
    if report.passed() || allow_invalid {
        return Ok(());
    }
    let lines: Vec<String> = report
        .failures()
        .map(|c| format!("  {} bullet, {}: {}", c.bullet, c.name, c.detail))
        .collect();
    Err(LabError::Invalid(lines.join("\n")))
}

fn failed_bullets(report: &ValidationReport) -> String {
    let mut names: Vec<String> = report.failures().map(|c| c.bullet.to_string()).collect();
    names.dedup();
    names.join(",")
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig, allow_invalid: bool) -> LabResult<Self> {
        Self::new(
            cfg.domain,
            cfg.modes,
            model_from(cfg)?,
            mode_from(cfg.source_mode),
            cfg.past.clone(),
            cfg.dt,
            cfg.horizon,
            cfg.lipschitz_samples,
            allow_invalid,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        domain: Domain<f64>,
        modes: usize,
        model: Model64,
        mode: SourceMode<f64>,
        past: ModalSeries<f64>,
        dt: f64,
        horizon: f64,
        lipschitz_samples: usize,
        allow_invalid: bool,
    ) -> LabResult<Self> {
        let validation = validate_assumptions(&model.kernel, &model.damping, &model.source);
        gate(&validation, allow_invalid)?;
        let exponent = model.damping.m.max(model.source.p);
        let basis = Arc::new(Basis64::for_nonlinearity(domain, modes, exponent)?);
        StepperConfig::new(dt).with_source_mode(mode).validate()?;
        Ok(Scenario {
            basis,
            model,
            mode,
            past,
            dt,
            horizon,
            lipschitz_samples,
            validation,
        })
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Scenario { dt, ..self.clone() }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn grid(&self) -> LabResult<Arc<HistoryGrid<f64>>> {
        Ok(Arc::new(HistoryGrid::new(&self.model.kernel, self.dt)?))
    }

    pub fn start(&self, past: &ModalSeries<f64>) -> LabResult<(Stepper64, State64)> {
        let state = State64::from_past(past, &self.basis, self.grid()?)?;
        let cfg = StepperConfig::new(self.dt).with_source_mode(self.mode);
        let stepper = Stepper64::new(self.basis.clone(), self.model.clone(), cfg)?;
        Ok((stepper, state))
    }

    pub fn simulate(
        &self,
        past: &ModalSeries<f64>,
        observer: &mut dyn RunObserver<f64>,
    ) -> LabResult<(State64, RunReport<f64>)> {
        let (mut stepper, mut state) = self.start(past)?;
        let report = run(&mut stepper, &mut state, self.dt * self.steps() as f64, observer)?;
        Ok((state, report))
    }
}

/// Everything written to `summary.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_modified_energy: f64,
    pub max_modified_energy: f64,
    pub max_abs_residual: f64,
    pub blow_up: Option<(f64, f64)>,
    pub local_time: Option<LocalTimeEstimate<f64>>,
    pub max_resolvent_residual: f64,
    pub source_class: String,
    pub validation: String,
    /// `‖u(0)‖_q` for `q = p+1` and, when `p > 3`, `q = 3(p−1)/2`.
    pub initial_lebesgue: Vec<(f64, f64)>,
}

impl RunSummary {
    pub fn lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            (
                "status".into(),
                if self.blow_up.is_some() { "blow-up-indicator" } else { "ok" }.to_string(),
            ),
            ("steps".into(), self.steps.to_string()),
            ("t_final".into(), num(self.t_final)),
            ("initial_E".into(), num(self.initial_energy)),
            ("final_E".into(), num(self.final_energy)),
            ("final_modE".into(), num(self.final_modified_energy)),
            ("max_modE".into(), num(self.max_modified_energy)),
            ("max_abs_residual".into(), num(self.max_abs_residual)),
            ("max_resolvent_residual".into(), num(self.max_resolvent_residual)),
        ];
        if let Some((t, e)) = self.blow_up {
            out.push(("blow_up_t".into(), num(t)));
            out.push(("blow_up_modE".into(), num(e)));
        }
        match &self.local_time {
            Some(lt) => {
                out.push(("local_K".into(), num(lt.k)));
                out.push(("local_T".into(), num(lt.t)));
                out.push(("local_C0".into(), num(lt.c0)));
                out.push(("local_C_LK".into(), num(lt.c_lk)));
                out.push(("local_L_K".into(), num(lt.l_k)));
            }
            None => out.push(("local_T".into(), "n/a".into())),
        }
        for (q, v) in &self.initial_lebesgue {
            out.push((format!("u0_L{q}"), num(*v)));
        }
        out.push(("source_class".into(), self.source_class.clone()));
        out.push(("validation".into(), self.validation.clone()));
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in self.lines() {
            writeln!(w, "{k}: {v}")?;
        }
        Ok(())
    }
}

/// Runs one scenario and writes `ledger.csv`, `summary.txt` and `history.bin` into `out`.
///
/// A blow-up indicator is reported through the summary, not as an error.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, seed: u64, allow_invalid: bool) -> LabResult<RunSummary> {
    let sc = Scenario::from_config(cfg, allow_invalid)?;
    fs::create_dir_all(out)?;
    let (state, report) = sc.simulate(&sc.past, &mut ())?;
    report.ledger.write_csv(BufWriter::new(File::create(out.join("ledger.csv"))?))?;
    state.w.write_snapshot(BufWriter::new(File::create(out.join("history.bin"))?))?;

    let rows = report.ledger.rows();
    let first = rows.first().expect("ledger always holds the initial row");
    let last = rows.last().expect("ledger always holds the initial row");
    let local_time = if sc.model.damping.a > 0.0 && first.energy.is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Some(estimate_local_time(
            first.energy,
            &sc.basis,
            &sc.model,
            sc.lipschitz_samples,
            &mut rng,
        )?)
    } else {
        None
    };
    let u0 = sc.past.displacement(0.0, &sc.basis)?;
    let p = sc.model.source.p;
    let mut exponents = vec![p + 1.0];
    if p > 3.0 {
        exponents.push(1.5 * (p - 1.0));
    }
    let initial_lebesgue = exponents
        .into_iter()
        .map(|q| Ok((q, sc.basis.norm(&u0, Norm::Lp(q))?)))
        .collect::<LabResult<Vec<_>>>()?;
    let summary = RunSummary {
        steps: report.steps,
        t_final: report.blow_up.map_or(last.t, |b| b.t),
        initial_energy: first.energy,
        final_energy: last.energy,
        final_modified_energy: last.modified_energy,
        max_modified_energy: report.ledger.max_modified_energy(),
        max_abs_residual: report.ledger.max_abs_residual(),
        blow_up: report.blow_up.map(|b| (b.t, b.modified_energy)),
        local_time,
        max_resolvent_residual: report.max_resolvent_residual,
        source_class: if sc.model.source.is_zero() {
            "none".into()
        } else {
            sc.model.source.class().map_or_else(|e| e.to_string(), |c| c.to_string())
        },
        validation: if sc.validation.passed() {
            "passed".into()
        } else {
            format!("overridden ({})", failed_bullets(&sc.validation))
        },
        initial_lebesgue,
    };
    summary.write(BufWriter::new(File::create(out.join("summary.txt"))?))?;
    Ok(summary)
}
