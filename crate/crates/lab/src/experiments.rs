//! Continuous dependence, the global-vs-blow-up sweep and the convergence study.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use viscowave::{
    difference_energy, direct_convolution_oracle, weak_form_residual, Field64, GlobalConstants, LedgerRow,
    ModalSeries, ModalTerm, SeparableTest, SimState, SourceSign, StepStatus, TimeProfile, Trajectory, WeakSample,
};

use crate::config::ScenarioConfig;
use crate::scenario::Scenario;
use crate::{num, LabError, LabResult};

pub fn scaled_series(series: &ModalSeries<f64>, factor: f64) -> ModalSeries<f64> {
    ModalSeries {
        terms: series
            .terms
            .iter()
            .map(|t| ModalTerm {
                profile: t.profile.clone(),
                modes: t.modes.iter().map(|&(j, a)| (j, a * factor)).collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependRow {
    pub delta: f64,
    /// Difference energy at `t = 0`.
    pub initial: f64,
    pub sup: f64,
    /// `sup Ẽ / Ẽ(0)`, zero when `Ẽ(0) = 0`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependTable {
    pub rows: Vec<DependRow>,
}

impl DependTable {
    /// `max/min` of the ratios over the last `count` rows with a nonzero perturbation.
    pub fn spread(&self, count: usize) -> Option<f64> {
        let tail: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.initial > 0.0)
            .map(|r| r.ratio)
            .collect();
        if tail.len() < count {
            return None;
        }
        let tail = &tail[tail.len() - count..];
        let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
        let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
        Some(hi / lo)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "delta,E0_diff,sup_diff,ratio")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", num(r.delta), num(r.initial), num(r.sup), num(r.ratio))?;
        }
        Ok(())
    }
}

/// Steps the base history and every `base + δ·direction` in lockstep, tracking
/// the difference energy against the base.
pub fn continuous_dependence(
    sc: &Scenario,
    deltas: &[f64],
    direction: &ModalSeries<f64>,
) -> LabResult<DependTable> {
    let (mut base_stepper, mut base) = sc.start(&sc.past)?;
    let mut runs = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let past = sc.past.clone().plus(&scaled_series(direction, delta));
        runs.push(sc.start(&past)?);
    }
    let diff = |a: &SimState<f64>, b: &SimState<f64>| difference_energy(&sc.basis, a.phase(), b.phase());
    let initial: Vec<f64> = runs.iter().map(|(_, s)| diff(s, &base)).collect();
    let mut sup = initial.clone();
    let check = |status: StepStatus<f64>, what: String| match status {
        StepStatus::Advanced => Ok(()),
        StepStatus::BlowUp(b) => Err(LabError::BlowUp {
            t: b.t,
            modified_energy: b.modified_energy,
            context: what,
        }),
    };
    for _ in 0..sc.steps() {
        check(base_stepper.step(&mut base)?, "the base run".into())?;
        for (k, (stepper, state)) in runs.iter_mut().enumerate() {
            check(stepper.step(state)?, format!("the run with delta = {}", deltas[k]))?;
            sup[k] = sup[k].max(diff(state, &base));
        }
    }
    let rows = deltas
        .iter()
        .zip(initial.iter().zip(&sup))
        .map(|(&delta, (&e0, &s))| DependRow {
            delta,
            initial: e0,
            sup: s,
            ratio: if e0 > 0.0 { s / e0 } else { 0.0 },
        })
        .collect();
    Ok(DependTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub m: f64,
    pub p: f64,
    pub amplitude: f64,
    pub sign: SourceSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Bounded,
    BlowUpIndicator,
    /// Failed validation and no override was given.
    Rejected,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Bounded => "bounded",
            Outcome::BlowUpIndicator => "blow-up-indicator",
            Outcome::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub outcome: Outcome,
    pub max_modified_energy: f64,
    pub end_time: f64,
    /// Gronwall ceiling at the end time, for cells with `m ≥ p`.
    pub ceiling: Option<f64>,
    /// Whether the modified energy stayed under the ceiling at every step.
    pub below_ceiling: Option<bool>,
}

fn sign_name(sign: SourceSign) -> &'static str {
    match sign {
        SourceSign::EnergyBuilding => "building",
        SourceSign::Dissipative => "dissipative",
    }
}

pub fn sweep_cells(cfg: &ScenarioConfig) -> Vec<SweepCell> {
    let s = &cfg.sweep;
    let mut cells = Vec::new();
    for &m in &s.m {
        for &p in &s.p {
            for &amplitude in &s.amplitude {
                for &sign in &s.signs {
                    cells.push(SweepCell { m, p, amplitude, sign });
                }
            }
        }
    }
    cells
}

fn run_cell(cfg: &ScenarioConfig, cell: SweepCell, allow_invalid: bool) -> LabResult<SweepRow> {
    let mut cell_cfg = cfg.clone();
    cell_cfg.damping_m = cell.m;
    cell_cfg.source_p = cell.p;
    cell_cfg.source_sign = cell.sign;
    cell_cfg.horizon = cfg.sweep.horizon;
    cell_cfg.past = scaled_series(&cfg.past, cell.amplitude);
    let sc = match Scenario::from_config(&cell_cfg, allow_invalid) {
        Ok(sc) => sc,
        Err(LabError::Invalid(_)) => {
            return Ok(SweepRow {
                cell,
                outcome: Outcome::Rejected,
                max_modified_energy: f64::NAN,
                end_time: 0.0,
                ceiling: None,
                below_ceiling: None,
            })
        }
        Err(e) => return Err(e),
    };
    let constants = if cell.m >= cell.p && sc.model.damping.a > 0.0 && !sc.model.source.is_zero() {
        let area = sc.basis.domain().measure();
        Some(GlobalConstants::new(&sc.model, sc.model.source.growth, area, sc.horizon)?)
    } else {
        None
    };
    let mut initial = None;
    let mut below = true;
    let mut watch = |_: &SimState<f64>, row: &LedgerRow<f64>| {
        let e0 = *initial.get_or_insert(row.modified_energy);
        if let Some(c) = &constants {
            below &= row.modified_energy <= c.ceiling(e0, row.t);
        }
        Ok(())
    };
    let (_, report) = sc.simulate(&sc.past, &mut watch)?;
    let last = report.ledger.rows().last().expect("initial row");
    let (outcome, end_time, max_e) = match report.blow_up {
        Some(b) => (Outcome::BlowUpIndicator, b.t, b.modified_energy),
        None => (Outcome::Bounded, last.t, report.ledger.max_modified_energy()),
    };
    let e0 = report.ledger.rows()[0].modified_energy;
    Ok(SweepRow {
        cell,
        outcome,
        max_modified_energy: max_e,
        end_time,
        ceiling: constants.map(|c| c.ceiling(e0, end_time)),
        below_ceiling: constants.map(|_| below && outcome == Outcome::Bounded),
    })
}

/// One row per cell, in cell order whether run serially or on the worker pool.
pub fn sweep(cfg: &ScenarioConfig, allow_invalid: bool, parallel: bool) -> LabResult<Vec<SweepRow>> {
    let cells = sweep_cells(cfg);
    if parallel {
        cells.par_iter().map(|&c| run_cell(cfg, c, allow_invalid)).collect()
    } else {
        cells.iter().map(|&c| run_cell(cfg, c, allow_invalid)).collect()
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "m,p,amplitude,sign,class,max_modE,end_time,ceiling,below_ceiling")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(r.cell.m),
            num(r.cell.p),
            num(r.cell.amplitude),
            sign_name(r.cell.sign),
            r.outcome,
            num(r.max_modified_energy),
            num(r.end_time),
            r.ceiling.map_or("n/a".into(), num),
            r.below_ceiling.map_or("n/a".into(), |b| b.to_string()),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Slope(f64),
    /// Every value sits at or below the round-off floor.
    RoundOffFloor,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Slope(s) => write!(f, "{s:.4}"),
            Order::RoundOffFloor => f.write_str("round-off floor"),
        }
    }
}

/// Least-squares slope of `−log₂ value` against the level index, over values above `floor`.
pub fn fitted_order(values: &[f64], floor: f64) -> Order {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(i, &v)| (i as f64, -v.log2()))
        .collect();
    if pts.len() < 2 {
        return Order::RoundOffFloor;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Order::Slope(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub identity: f64,
    pub weak: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub identity_order: Order,
    pub weak_order: Order,
    pub oracle_order: Order,
    /// Columns whose values fail to decrease from one level to the next.
    pub non_monotone: Vec<&'static str>,
}

impl ConvergenceStudy {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "dt,identity_residual,weak_residual,oracle_discrepancy")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", num(r.dt), num(r.identity), num(r.weak), num(r.oracle))?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "levels: {}", self.rows.len())?;
        writeln!(out, "identity_order: {}", self.identity_order)?;
        writeln!(out, "weak_order: {}", self.weak_order)?;
        writeln!(out, "oracle_order: {}", self.oracle_order)?;
        for pair in self.rows.windows(2) {
            let ratio = pair[0].identity / pair[1].identity;
            writeln!(out, "identity_ratio_dt_{}: {}", num(pair[1].dt), num(ratio))?;
        }
        let flags = if self.non_monotone.is_empty() {
            "none".to_string()
        } else {
            self.non_monotone.join(",")
        };
        writeln!(out, "non_monotone: {flags}")
    }
}

/// Test function used by the study: a fixed mode combination times `sin(ωt)`.
pub fn study_test_function(sc: &Scenario, modes: &[(usize, f64)], omega: f64) -> LabResult<SeparableTest<f64>> {
    let mut space = sc.basis.zeros();
    for &(j, a) in modes {
        if j == 0 || j > sc.basis.dim() {
            return Err(LabError::Config(crate::ConfigError::key(
                "converge.test.modes",
                format!("mode {j} outside 1..={}", sc.basis.dim()),
            )));
        }
        space.axpy(a, &sc.basis.unit(j - 1));
    }
    Ok(SeparableTest {
        space,
        profile: TimeProfile::Trig { omega, phase: 0.0 },
    })
}

const CHECKPOINTS: usize = 4;

fn level(sc: &Scenario, phi: &SeparableTest<f64>) -> LabResult<ConvergenceRow> {
    let steps = sc.steps();
    let grid = sc.grid()?;
    let checkpoints: Vec<usize> = (1..=CHECKPOINTS).map(|c| c * steps / CHECKPOINTS).collect();
    let mut trajectory = Trajectory::from_past(&sc.past, &sc.basis, sc.dt, sc.model.kernel.horizon())?;
    let memoryless = sc.model.kernel.is_memoryless();
    let mut samples: Vec<WeakSample<f64>> = Vec::with_capacity(steps + 1);
    let mut oracle: f64 = 0.0;
    let basis = sc.basis.clone();
    let kernel = sc.model.kernel.clone();
    let mut watch = |state: &SimState<f64>, _: &LedgerRow<f64>| {
        samples.push(WeakSample::of(state.t, &state.u, &state.v, &state.w));
        let k = samples.len() - 1;
        if k > 0 {
            trajectory.push(state.u.clone());
        }
        if !memoryless && checkpoints.contains(&k) {
            let exact: Field64 = direct_convolution_oracle(&trajectory, &kernel, k as i64)?;
            let gap = &state.w.memory_integral() - &exact;
            oracle = oracle.max(basis.h1_norm_sq(&gap).sqrt());
        }
        Ok(())
    };
    let (_, report) = sc.simulate(&sc.past, &mut watch)?;
    if let Some(b) = report.blow_up {
        return Err(LabError::BlowUp {
            t: b.t,
            modified_energy: b.modified_energy,
            context: format!("the convergence level dt = {}", sc.dt),
        });
    }
    let mass = grid.total_weight();
    let mut weak: f64 = 0.0;
    for &k in &checkpoints {
        let r = weak_form_residual(&samples[..=k], &sc.basis, &sc.model, sc.mode, mass, phi)?;
        weak = weak.max(r.abs());
    }
    Ok(ConvergenceRow {
        dt: sc.dt,
        identity: report.ledger.max_abs_residual(),
        weak,
        oracle,
    })
}

/// Runs `levels` levels with `Δt` (and so `Δs`) halved each time.
pub fn convergence_study(
    sc: &Scenario,
    levels: usize,
    test_modes: &[(usize, f64)],
    test_omega: f64,
) -> LabResult<ConvergenceStudy> {
    let phi = study_test_function(sc, test_modes, test_omega)?;
    let rows = (0..levels)
        .map(|l| level(&sc.with_dt(sc.dt / 2f64.powi(l as i32)), &phi))
        .collect::<LabResult<Vec<_>>>()?;
    let e0 = {
        let (_, state) = sc.start(&sc.past)?;
        viscowave::quadratic_energy(&sc.basis, state.phase())
    };
    let floor = 1e-12 * (1.0 + e0);
    let column = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let identity = column(|r| r.identity);
    let weak = column(|r| r.weak);
    let oracle = column(|r| r.oracle);
    let mut non_monotone = Vec::new();
    for (name, col) in [("identity", &identity), ("weak", &weak), ("oracle", &oracle)] {
        if col.windows(2).any(|w| w[1] > w[0] && w[1] > floor) {
            non_monotone.push(name);
        }
    }
    Ok(ConvergenceStudy {
        identity_order: fitted_order(&identity, floor),
        weak_order: fitted_order(&weak, floor),
        oracle_order: fitted_order(&oracle, floor),
        rows,
        non_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit() {
        let v: Vec<f64> = (0..4).map(|k| 3.0 * 0.25f64.powi(k)).collect();
        assert!(matches!(fitted_order(&v, 1e-14), Order::Slope(s) if (s - 2.0).abs() < 1e-12));
        assert_eq!(fitted_order(&[1e-16, 2e-16, 0.0], 1e-14), Order::RoundOffFloor);
        assert_eq!(Order::RoundOffFloor.to_string(), "round-off floor");
    }

    #[test]
    fn spread_skips_zero_perturbation() {
        let row = |delta, initial, ratio| DependRow { delta, initial, sup: ratio * initial, ratio };
        let t = DependTable {
            rows: vec![row(0.0, 0.0, 0.0), row(0.2, 1.0, 3.0), row(0.1, 0.25, 1.5), row(0.05, 0.1, 2.0)],
        };
        assert_eq!(t.spread(3), Some(2.0));
        assert_eq!(t.spread(4), None);
    }

    #[test]
    fn cells_cover_the_grid() {
        let cfg = ScenarioConfig::parse("sweep.m = 1,3\nsweep.p = 2,3\nsweep.amplitude = 1\nsweep.sign = building, dissipative").unwrap();
        let cells = sweep_cells(&cfg);
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[1].sign, SourceSign::Dissipative);
    }
}
