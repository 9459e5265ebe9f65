//! Engine cycles, per-cycle thermodynamic bookkeeping, steady-state
//! detection and the piston adiabaticity scan.
//!
//! One cycle visits four piston/bath configurations in the order advanced
//! cold → advanced hot → retracted hot → retracted cold, and ends with the
//! advance stroke that returns the piston to y_advanced. Each phase energy is
//! ⟨H0 + Φ(y)⟩ at the piston position of that phase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, conjugate, AdvanceModel, HermitianSpectrum, Numerics};
use crate::error::{Error, Result};
use crate::model::{EngineModel, EngineParams, PistonTrajectory};
use crate::operator::{DensityOperator, HermitianOperator, UnitaryOperator};
use crate::thermo::{self, checked_thermal, CollisionChannel, CutoffPolicy};

/// Default steady-state window in cycles.
pub const STEADY_WINDOW: usize = 10;
/// Default steady-state tolerance on each phase energy (ħΩ).
pub const STEADY_TOL: f64 = 1e-3;
/// Tolerance of the per-cycle energy bookkeeping identity.
pub const CLOSURE_TOL: f64 = 1e-9;

/// What heats the working fluid while the piston is advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// A fresh hot-bath oscillator per collision.
    Bath,
    /// An unselective number-basis measurement.
    Measurement,
}

impl Mode {
    /// Number of strokes of duration τ_p per cycle.
    pub fn strokes(self) -> f64 {
        match self {
            Mode::Bath => 4.0,
            Mode::Measurement => 3.0,
        }
    }
}

/// Energies and energy transfers of one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 1-based cycle number.
    pub cycle_index: usize,
    pub e_advanced_cold: f64,
    pub e_advanced_hot: f64,
    pub e_retracted_hot: f64,
    pub e_retracted_cold: f64,
    /// Energy after the closing advance stroke (start of the next cycle).
    pub e_next_advanced_cold: f64,
    pub q_in: f64,
    /// Work done on the fluid during retraction.
    pub w_retract: f64,
    pub q_out: f64,
    /// Work done by the fluid during the advance.
    pub w_advance: f64,
    pub net_work: f64,
    /// `net_work / q_in`; absent when no heat enters.
    pub efficiency: Option<f64>,
    pub power: f64,
}

impl CycleRecord {
    /// Builds a record from the five phase energies.
    pub fn from_energies(cycle_index: usize, e: [f64; 5], mode: Mode, tau_p: f64) -> Self {
        let q_in = e[1] - e[0];
        let w_retract = e[2] - e[1];
        let q_out = e[2] - e[3];
        let w_advance = e[3] - e[4];
        let net_work = w_advance - w_retract;
        CycleRecord {
            cycle_index,
            e_advanced_cold: e[0],
            e_advanced_hot: e[1],
            e_retracted_hot: e[2],
            e_retracted_cold: e[3],
            e_next_advanced_cold: e[4],
            q_in,
            w_retract,
            q_out,
            w_advance,
            net_work,
            efficiency: if q_in != 0.0 { Some(net_work / q_in) } else { None },
            power: net_work / (mode.strokes() * tau_p),
        }
    }

    /// q_in − q_out − net_work − (E_next − E_start); zero up to rounding.
    pub fn closure_residual(&self) -> f64 {
        self.q_in - self.q_out - self.net_work - (self.e_next_advanced_cold - self.e_advanced_cold)
    }

    pub fn phase_energies(&self) -> [f64; 4] {
        [
            self.e_advanced_cold,
            self.e_advanced_hot,
            self.e_retracted_hot,
            self.e_retracted_cold,
        ]
    }
}

/// net_work / q_in.
pub fn cycle_efficiency(record: &CycleRecord) -> Result<f64> {
    if record.q_in == 0.0 {
        return Err(Error::UndefinedEfficiency("no heat enters during the cycle"));
    }
    Ok(record.net_work / record.q_in)
}

/// net_work divided by the cycle duration (4τ_p with a bath, 3τ_p with an
/// instantaneous measurement).
pub fn cycle_power(record: &CycleRecord, mode: Mode, tau_p: f64) -> Result<f64> {
    if !(tau_p > 0.0) {
        return Err(Error::invalid("tau_p", format!("must be positive, got {tau_p}")));
    }
    Ok(record.net_work / (mode.strokes() * tau_p))
}

/// Eigendecompositions of the composite fluid–bath Hamiltonian at the two
/// piston positions. They depend on the piston and coupling parameters but
/// not on τ_p or τ_b, so one set serves a whole sweep over durations.
#[derive(Clone, Debug)]
pub struct BathSpectra {
    hot: Option<HermitianSpectrum>,
    cold: HermitianSpectrum,
}

impl BathSpectra {
    /// Decomposes H_bath at y_retracted, and at y_advanced when `mode` needs
    /// a hot bath.
    pub fn new(model: &EngineModel, mode: Mode) -> Result<Self> {
        let p = model.params();
        let hot = match mode {
            Mode::Bath => Some(HermitianSpectrum::from_real_symmetric(
                &model.composite_bath_real(p.y_advanced),
            )?),
            Mode::Measurement => None,
        };
        let cold = HermitianSpectrum::from_real_symmetric(&model.composite_bath_real(p.y_retracted))?;
        Ok(BathSpectra { hot, cold })
    }
}

/// Everything a cycle needs, computed once per parameter set.
#[derive(Clone, Debug)]
pub struct EngineAssets {
    params: EngineParams,
    mode: Mode,
    policy: CutoffPolicy,
    h_advanced: HermitianOperator,
    h_retracted: HermitianOperator,
    u_retract: UnitaryOperator,
    u_advance: UnitaryOperator,
    hot: Option<CollisionChannel>,
    cold: CollisionChannel,
}

impl EngineAssets {
    pub fn build(params: &EngineParams, mode: Mode, numerics: &Numerics) -> Result<Self> {
        let model = EngineModel::new(params)?;
        let spectra = BathSpectra::new(&model, mode)?;
        Self::with_spectra(&model, mode, numerics, &spectra)
    }

    /// Builds the assets from precomputed bath spectra of the same model.
    pub fn with_spectra(model: &EngineModel, mode: Mode, numerics: &Numerics, spectra: &BathSpectra) -> Result<Self> {
        numerics.validate()?;
        let params = model.params().clone();
        let n = model.space().dim();
        let policy = numerics.cutoff_policy;
        let u_retract = retraction_propagator(model, numerics.dtau)?;
        let u_advance = match numerics.advance {
            AdvanceModel::ReversedRetraction => u_retract.adjoint(),
            AdvanceModel::Integrated => {
                dynamics::propagator(&model.ramp(params.advance()?), (0.0, params.tau_p), numerics.dtau)?
            }
        };
        let hot = match mode {
            Mode::Bath => {
                let spectrum = spectra
                    .hot
                    .as_ref()
                    .ok_or_else(|| Error::invalid("spectra", "bath mode needs the advanced-piston spectrum"))?;
                let rho_hot = checked_thermal(&params, params.omega_hot, &policy, "hot bath")?;
                let b = spectrum.exp_unitary(params.tau_b)?;
                Some(CollisionChannel::from_bath_state(&b, &rho_hot, n)?)
            }
            Mode::Measurement => None,
        };
        let rho_cold = checked_thermal(&params, params.omega_cold, &policy, "cold bath")?;
        let b = spectra.cold.exp_unitary(params.tau_b)?;
        let cold = CollisionChannel::from_bath_state(&b, &rho_cold, n)?;
        Ok(EngineAssets {
            h_advanced: model.hamiltonian(params.y_advanced),
            h_retracted: model.hamiltonian(params.y_retracted),
            params,
            mode,
            policy,
            u_retract,
            u_advance,
            hot,
            cold,
        })
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.h_advanced.dim()
    }

    pub fn h_advanced(&self) -> &HermitianOperator {
        &self.h_advanced
    }

    pub fn h_retracted(&self) -> &HermitianOperator {
        &self.h_retracted
    }

    pub fn u_retract(&self) -> &UnitaryOperator {
        &self.u_retract
    }

    pub fn u_advance(&self) -> &UnitaryOperator {
        &self.u_advance
    }

    pub fn hot_channel(&self) -> Option<&CollisionChannel> {
        self.hot.as_ref()
    }

    pub fn cold_channel(&self) -> &CollisionChannel {
        &self.cold
    }
}

/// Û for the retraction stroke y_advanced → y_retracted over τ_p.
pub fn retraction_propagator(model: &EngineModel, dtau: f64) -> Result<UnitaryOperator> {
    let p = model.params();
    dynamics::propagator(&model.ramp(p.retraction()?), (0.0, p.tau_p), dtau)
}

fn check_cutoff(rho: &DensityOperator, policy: &CutoffPolicy, cycle: usize) -> Result<f64> {
    let top = rho.top_population();
    if let Some(limit) = policy.fail {
        if top > limit {
            return Err(Error::CutoffExceeded {
                population: top,
                limit,
                cycle: Some(cycle),
            });
        }
    }
    Ok(top)
}

struct CycleOutcome {
    state: DensityOperator,
    record: CycleRecord,
    top_population: f64,
}

fn run_cycle(rho: &DensityOperator, assets: &EngineAssets, cycle_index: usize) -> Result<CycleOutcome> {
    if rho.dim() != assets.dim() {
        return Err(Error::DimensionMismatch {
            context: "engine cycle",
            expected: assets.dim(),
            found: rho.dim(),
        });
    }
    let energy = |r: &DensityOperator, h: &HermitianOperator| thermo::expected_energy(r, h);
    let e1 = energy(rho, &assets.h_advanced)?;
    let heated = match (&assets.hot, assets.mode) {
        (Some(channel), Mode::Bath) => channel.apply(rho)?,
        (_, Mode::Measurement) => thermo::measure(rho),
        (None, Mode::Bath) => return Err(Error::invalid("assets", "bath mode without a hot channel")),
    };
    let mut top = check_cutoff(&heated, &assets.policy, cycle_index)?;
    let e2 = energy(&heated, &assets.h_advanced)?;
    let retracted = DensityOperator::from_mat_unchecked(conjugate(heated.as_mat(), assets.u_retract.as_mat(), false));
    let e3 = energy(&retracted, &assets.h_retracted)?;
    let cooled = assets.cold.apply(&retracted)?;
    let e4 = energy(&cooled, &assets.h_retracted)?;
    let advanced = DensityOperator::from_mat_unchecked(conjugate(cooled.as_mat(), assets.u_advance.as_mat(), false));
    advanced.validate("engine cycle")?;
    top = top.max(check_cutoff(&advanced, &assets.policy, cycle_index)?);
    let e5 = energy(&advanced, &assets.h_advanced)?;
    let record = CycleRecord::from_energies(cycle_index, [e1, e2, e3, e4, e5], assets.mode, assets.params.tau_p);
    let residual = record.closure_residual();
    if !(residual.abs() <= CLOSURE_TOL) {
        return Err(Error::Numerical(format!(
            "cycle {cycle_index}: energy bookkeeping residual {residual:.3e}"
        )));
    }
    Ok(CycleOutcome {
        state: advanced,
        record,
        top_population: top,
    })
}

/// One bath-powered cycle:
/// ρ' = Û† tr_b[B_c(Û tr_b[B_h(ρ ⊗ ρ_h)B_h†] Û† ⊗ ρ_c)B_c†] Û.
pub fn run_bath_cycle(
    rho: &DensityOperator,
    assets: &EngineAssets,
    cycle_index: usize,
) -> Result<(DensityOperator, CycleRecord)> {
    if assets.mode != Mode::Bath {
        return Err(Error::invalid("assets", "built for measurement mode"));
    }
    let out = run_cycle(rho, assets, cycle_index)?;
    Ok((out.state, out.record))
}

/// One measurement-powered cycle: the hot collision is replaced by diag(ρ).
/// q_in is the energy change across the measurement alone.
pub fn run_measurement_cycle(
    rho: &DensityOperator,
    assets: &EngineAssets,
    cycle_index: usize,
) -> Result<(DensityOperator, CycleRecord)> {
    if assets.mode != Mode::Measurement {
        return Err(Error::invalid("assets", "built for bath mode"));
    }
    let out = run_cycle(rho, assets, cycle_index)?;
    Ok((out.state, out.record))
}

/// Result of a multi-cycle simulation.
#[derive(Clone, Debug)]
pub struct EngineRun {
    pub params: EngineParams,
    pub mode: Mode,
    pub n_cycles: usize,
    pub records: Vec<CycleRecord>,
    pub final_state: DensityOperator,
    /// ‖ρ_{n+1} − ρ_n‖_max per cycle.
    pub state_changes: Vec<f64>,
    /// Largest top-Fock-state population seen during the run.
    pub max_top_population: f64,
}

/// Thermal state at ω_cold of the bare oscillator.
pub fn initial_state(params: &EngineParams) -> Result<DensityOperator> {
    params.validate()?;
    Ok(thermo::thermal_state(
        &params.space()?,
        &thermo::ThermalSpec::new(params.omega_cold)?,
    ))
}

/// Builds the assets and runs `n_cycles` cycles from `initial`.
pub fn run_engine(
    params: &EngineParams,
    mode: Mode,
    n_cycles: usize,
    initial: &DensityOperator,
    numerics: &Numerics,
) -> Result<EngineRun> {
    let assets = EngineAssets::build(params, mode, numerics)?;
    run_with_assets(&assets, n_cycles, initial)
}

pub fn run_with_assets(assets: &EngineAssets, n_cycles: usize, initial: &DensityOperator) -> Result<EngineRun> {
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles", "must be positive"));
    }
    if initial.dim() != assets.dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: assets.dim(),
            found: initial.dim(),
        });
    }
    initial.validate("initial state")?;
    let mut rho = initial.clone();
    let mut records = Vec::with_capacity(n_cycles);
    let mut state_changes = Vec::with_capacity(n_cycles);
    let mut max_top = rho.top_population();
    for cycle in 1..=n_cycles {
        let out = run_cycle(&rho, assets, cycle)?;
        state_changes.push(out.state.max_abs_diff(&rho));
        max_top = max_top.max(out.top_population);
        records.push(out.record);
        rho = out.state;
        log::debug!("cycle {cycle}: net work {:.6e}", records[cycle - 1].net_work);
    }
    if max_top > assets.policy.warn {
        log::warn!(
            "fluid top Fock population reached {max_top:.3e} (warning level {:.1e})",
            assets.policy.warn
        );
    }
    Ok(EngineRun {
        params: assets.params.clone(),
        mode: assets.mode,
        n_cycles,
        records,
        final_state: rho,
        state_changes,
        max_top_population: max_top,
    })
}

/// Cycle index of the first record at which every phase energy has varied
/// by less than `tol` (max − min) over that record and the `window`
/// records before it.
pub fn detect_steady_state(records: &[CycleRecord], window: usize, tol: f64) -> Result<Option<usize>> {
    if window == 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    if window > records.len() {
        return Err(Error::invalid(
            "window",
            format!("{window} exceeds the {} available records", records.len()),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    for i in window..records.len() {
        let span = &records[i - window..=i];
        let flat = (0..4).all(|q| {
            let (lo, hi) = span.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                let e = r.phase_energies()[q];
                (lo.min(e), hi.max(e))
            });
            hi - lo < tol
        });
        if flat {
            return Ok(Some(records[i].cycle_index));
        }
    }
    Ok(None)
}

/// Least-squares slope of y against x; `None` for fewer than two distinct x.
pub fn linear_fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Steady-state averages of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub n_cycles: usize,
    pub steady_state_window: usize,
    pub steady_state_tol: f64,
    /// Cycle at which the detector fired.
    pub steady_state_index: Option<usize>,
    /// First cycle included in the averages: the steady-state index, or the
    /// start of the final window when the detector never fires.
    pub averaged_from: usize,
    pub mean_q_in: f64,
    pub mean_net_work: f64,
    /// Mean of the per-cycle efficiencies.
    pub mean_efficiency: Option<f64>,
    /// Σ net_work / Σ q_in over the averaged cycles.
    pub cumulative_efficiency: Option<f64>,
    pub mean_power: f64,
}

impl RunSummary {
    pub fn new(records: &[CycleRecord], mode: Mode, window: usize, tol: f64) -> Result<Self> {
        let steady = detect_steady_state(records, window, tol)?;
        let from = steady.unwrap_or_else(|| records[records.len() - window].cycle_index);
        let tail: Vec<&CycleRecord> = records.iter().filter(|r| r.cycle_index >= from).collect();
        let n = tail.len() as f64;
        let q_in: f64 = tail.iter().map(|r| r.q_in).sum();
        let net: f64 = tail.iter().map(|r| r.net_work).sum();
        let effs: Vec<f64> = tail.iter().filter_map(|r| r.efficiency).collect();
        Ok(RunSummary {
            mode,
            n_cycles: records.len(),
            steady_state_window: window,
            steady_state_tol: tol,
            steady_state_index: steady,
            averaged_from: from,
            mean_q_in: q_in / n,
            mean_net_work: net / n,
            mean_efficiency: if effs.len() == tail.len() {
                Some(effs.iter().sum::<f64>() / n)
            } else {
                None
            },
            cumulative_efficiency: if q_in != 0.0 { Some(net / q_in) } else { None },
            mean_power: tail.iter().map(|r| r.power).sum::<f64>() / n,
        })
    }

    pub fn of_run(run: &EngineRun) -> Result<Self> {
        Self::new(&run.records, run.mode, STEADY_WINDOW.min(run.records.len()), STEADY_TOL)
    }
}

/// Exact and Φ_far → 0 forms of the adiabatic efficiency estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalEfficiency {
    /// (tr[Δρ Φ_close] − tr[Δρ Φ_far]) / (tr[Δρ H0] + tr[Δρ Φ_close])
    pub exact: f64,
    /// tr[Δρ Φ_close] / (tr[Δρ H0] + tr[Δρ Φ_close])
    pub approximate: f64,
}

/// Adiabatic efficiency estimate with Δρ = ρ_H − ρ_L.
pub fn theoretical_efficiency(
    rho_h: &DensityOperator,
    rho_l: &DensityOperator,
    phi_close: &HermitianOperator,
    phi_far: &HermitianOperator,
    h0: &HermitianOperator,
) -> Result<TheoreticalEfficiency> {
    let n = h0.dim();
    for (what, d) in [
        ("rho_h", rho_h.dim()),
        ("rho_l", rho_l.dim()),
        ("phi_close", phi_close.dim()),
        ("phi_far", phi_far.dim()),
    ] {
        if d != n {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: n,
                found: d,
            });
        }
    }
    let contrast = |op: &HermitianOperator| -> Result<f64> {
        Ok(thermo::expected_energy(rho_h, op)? - thermo::expected_energy(rho_l, op)?)
    };
    let close = contrast(phi_close)?;
    let far = contrast(phi_far)?;
    let bare = contrast(h0)?;
    let den = bare + close;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedEfficiency("the two states carry the same energy"));
    }
    Ok(TheoreticalEfficiency {
        exact: (close - far) / den,
        approximate: close / den,
    })
}

/// The estimate with thermal ρ_H(ω_hot), ρ_L(ω_cold), Φ_close = Φ(y_advanced)
/// and Φ_far = Φ(y_retracted).
pub fn theoretical_efficiency_for(params: &EngineParams) -> Result<TheoreticalEfficiency> {
    let model = EngineModel::new(params)?;
    let space = model.space();
    let rho_h = thermo::thermal_state(&space, &thermo::ThermalSpec::new(params.omega_hot)?);
    let rho_l = thermo::thermal_state(&space, &thermo::ThermalSpec::new(params.omega_cold)?);
    theoretical_efficiency(
        &rho_h,
        &rho_l,
        &model.interaction(params.y_advanced),
        &model.interaction(params.y_retracted),
        &model.bare_hamiltonian(),
    )
}

/// Direction of the piston stroke in an adiabaticity scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrokeDirection {
    /// y_advanced → y_retracted, starting in the ground state of H_A.
    Retract,
    /// y_retracted → y_advanced, starting in the ground state of H_R.
    Advance,
}

impl StrokeDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            StrokeDirection::Retract => "retract",
            StrokeDirection::Advance => "advance",
        }
    }
}

/// Final energies of single strokes and their two limiting values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityScan {
    pub direction: StrokeDirection,
    /// (τ_p, final ⟨H⟩) in input order.
    pub points: Vec<(f64, f64)>,
    /// Ground-state energy of the final Hamiltonian.
    pub adiabatic_bound: f64,
    /// Initial ground state measured with the final Hamiltonian.
    pub sudden_bound: f64,
}

impl AdiabaticityScan {
    /// (E − E_adiabatic)/(E_sudden − E_adiabatic) per point.
    pub fn gap_fractions(&self) -> Vec<f64> {
        let span = self.sudden_bound - self.adiabatic_bound;
        self.points
            .iter()
            .map(|&(_, e)| (e - self.adiabatic_bound) / span)
            .collect()
    }
}

/// Evolves the initial ground state through a constant-speed stroke for each
/// τ_p and records the final energy.
pub fn adiabaticity_scan(
    params: &EngineParams,
    tau_p_values: &[f64],
    direction: StrokeDirection,
    dtau: f64,
) -> Result<AdiabaticityScan> {
    if tau_p_values.is_empty() {
        return Err(Error::invalid("tau_p_values", "must not be empty"));
    }
    if let Some(t) = tau_p_values.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("tau_p_values", format!("must be positive, got {t}")));
    }
    let model = EngineModel::new(params)?;
    let (y0, y1) = match direction {
        StrokeDirection::Retract => (params.y_advanced, params.y_retracted),
        StrokeDirection::Advance => (params.y_retracted, params.y_advanced),
    };
    let h_start = model.hamiltonian(y0);
    let h_end = model.hamiltonian(y1);
    let (_, psi0) = h_start.ground_state()?;
    let (adiabatic, _) = h_end.ground_state()?;
    let sudden = h_end.expectation(&psi0);
    let points = tau_p_values
        .par_iter()
        .map(|&tau_p| {
            let ramp = model.ramp(PistonTrajectory::new(y0, y1, tau_p)?);
            let psi = dynamics::evolve_state(&psi0, &ramp, (0.0, tau_p), dtau)?;
            Ok((tau_p, h_end.expectation(&psi)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdiabaticityScan {
        direction,
        points,
        adiabatic_bound: adiabatic,
        sudden_bound: sudden,
    })
}
