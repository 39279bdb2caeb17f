//! The ε sign-flip cascade and discrete fractional Floquet evolution.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{intensities_from, transfer_max_from, uniform_grid, Direction, IntensityMap, MapSource};
use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, shifted_resonance_epsilon, LatticeParams};
use crate::linalg::{apply, eig_hermitian, propagator, SpectralDecomposition, StateVector};
use crate::spectrum::{delta_min, delta_min_pair};

/// Stages predicting less than this target intensity are rejected as off-resonant.
pub const MIN_STAGE_INTENSITY: f64 = 0.5;
pub const DEFAULT_SUBSTEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStage {
    pub params: LatticeParams,
    pub source: usize,
    pub target: usize,
    pub t_star: f64,
    pub predicted_intensity: f64,
    #[serde(default)]
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSchedule {
    pub stages: Vec<CascadeStage>,
    pub direction: Direction,
    pub order_m: u32,
}

impl CascadeSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidParameter { name: "stages", reason: "empty schedule".into() });
        }
        let expected = self.direction.sign() * (2 * self.order_m as i64 + 1);
        for (k, st) in self.stages.iter().enumerate() {
            st.params.validate()?;
            st.params.check_site(st.source)?;
            st.params.check_site(st.target)?;
            let step = st.target as i64 - st.source as i64;
            if step != expected {
                return Err(Error::ChainStep { step, order_m: self.order_m, expected });
            }
            if !(st.t_star > 0.0) {
                return Err(Error::InvalidParameter { name: "t_star", reason: format!("stage {k}: {}", st.t_star) });
            }
            if let Some(next) = self.stages.get(k + 1) {
                if next.source != st.target {
                    return Err(Error::InvalidParameter {
                        name: "stages",
                        reason: format!(
                            "stage {k} ends on {} but stage {} starts on {}",
                            st.target,
                            k + 1,
                            next.source
                        ),
                    });
                }
                if next.params.epsilon != -st.params.epsilon {
                    return Err(Error::InvalidParameter {
                        name: "stages",
                        reason: format!("ε does not flip after stage {k}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.stages.iter().map(|s| s.t_star).sum()
    }
}

/// Plans one stage per hop of `chain`, with ε·(−1)^k on stage `k`.
///
/// `horizon_per_stage = None` uses 1.5 × π/gap of the stage's resonant pair.
pub fn plan_cascade(base: &LatticeParams, chain: &[usize], horizon_per_stage: Option<f64>) -> Result<CascadeSchedule> {
    base.validate()?;
    let m = base
        .order_m
        .ok_or(Error::InvalidParameter { name: "order_m", reason: "cascade needs a resonance order".into() })?;
    if chain.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "chain",
            reason: format!("need at least two sites, got {}", chain.len()),
        });
    }
    for &s in chain {
        base.check_site(s)?;
    }
    let jump = 2 * m as i64 + 1;
    let first = chain[1] as i64 - chain[0] as i64;
    let expected = if first < 0 { -jump } else { jump };
    for w in chain.windows(2) {
        let step = w[1] as i64 - w[0] as i64;
        if step != expected {
            return Err(Error::ChainStep { step, order_m: m, expected });
        }
    }
    let direction = if expected > 0 { Direction::Right } else { Direction::Left };

    let mut stages = Vec::with_capacity(chain.len() - 1);
    for (k, w) in chain.windows(2).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let params = base.with_epsilon(sign * base.epsilon);
        let spec = eig_hermitian(&build_hamiltonian(&params)?);
        let horizon = match horizon_per_stage {
            Some(h) => h,
            None => 1.5 * PI / delta_min_pair(&spec, w[0], w[1])?.delta_min,
        };
        let peak = transfer_max_from(&spec, &StateVector::basis(params.n_sites, w[0])?, w[1], horizon)?;
        if peak.intensity < MIN_STAGE_INTENSITY {
            return Err(Error::StageNotResonant { stage: k, intensity: peak.intensity });
        }
        stages.push(CascadeStage {
            params,
            source: w[0],
            target: w[1],
            t_star: peak.t_star,
            predicted_intensity: peak.intensity,
            at_boundary: peak.at_boundary,
        });
    }
    Ok(CascadeSchedule { stages, direction, order_m: m })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRun {
    pub map: IntensityMap,
    /// Stage index of every map row; a flip row belongs to the stage it starts.
    pub stage_of_row: Vec<usize>,
    /// Target intensity of the carried state at the end of each stage.
    pub per_stage_fidelity: Vec<f64>,
    /// For stages `k ≥ 1`, the peak intensity back on stage `k−1`'s source
    /// during stage `k`; entry 0 is always 0.
    pub reverse_leakage: Vec<f64>,
    /// Cumulative times at which ε is inverted.
    pub flip_times: Vec<f64>,
}

/// Evolves a delta state on the first source through every stage, carrying the
/// state across flips. Each stage contributes `samples_per_stage` intervals.
pub fn run_cascade(schedule: &CascadeSchedule, samples_per_stage: usize) -> Result<CascadeRun> {
    schedule.validate()?;
    if samples_per_stage == 0 {
        return Err(Error::InvalidParameter { name: "samples_per_stage", reason: "must be positive".into() });
    }
    let first = &schedule.stages[0];
    let n = first.params.n_sites;
    let mut psi = StateVector::basis(n, first.source)?;
    let mut map: Option<IntensityMap> = None;
    let mut stage_of_row = Vec::new();
    let mut per_stage_fidelity = Vec::new();
    let mut reverse_leakage = Vec::new();
    let mut flip_times = Vec::new();
    let mut elapsed = 0.0;

    for (k, st) in schedule.stages.iter().enumerate() {
        let spec = eig_hermitian(&build_hamiltonian(&st.params)?);
        let grid = uniform_grid(st.t_star, samples_per_stage);
        let rows = intensities_from(&spec, &psi, &grid);
        reverse_leakage.push(if k == 0 {
            0.0
        } else {
            let back = schedule.stages[k - 1].source;
            rows.column(back).iter().copied().fold(0.0, f64::max)
        });
        let piece = IntensityMap {
            times: grid,
            n_sites: n,
            intensities: rows,
            input_site: st.source,
            source: MapSource::Unspecified,
        };
        match map.as_mut() {
            None => {
                stage_of_row.extend(std::iter::repeat_n(k, piece.rows()));
                map = Some(piece);
            }
            Some(m) => {
                // the flip row is shared with the previous stage's last row
                let last = stage_of_row.len() - 1;
                stage_of_row[last] = k;
                stage_of_row.extend(std::iter::repeat_n(k, piece.rows() - 1));
                m.append(&piece, elapsed, true);
            }
        }
        psi = apply(&propagator(&spec, st.t_star), &psi)?;
        per_stage_fidelity.push(psi.intensities()[st.target]);
        elapsed += st.t_star;
        if k + 1 < schedule.stages.len() {
            flip_times.push(elapsed);
        }
    }
    let mut map = map.expect("non-empty schedule");
    map.input_site = first.source;
    map.source = MapSource::Protocol(format!("cascade m={} {:?}", schedule.order_m, schedule.direction).to_lowercase());
    Ok(CascadeRun { map, stage_of_row, per_stage_fidelity, reverse_leakage, flip_times })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetPlan {
    pub order_m: u32,
    pub r: f64,
    pub n_blocks: usize,
    #[serde(default = "default_substeps")]
    pub substeps_per_block: usize,
    pub params: LatticeParams,
    /// Invert ε on every other block.
    #[serde(default)]
    pub alternate_sign: bool,
    /// Explicit per-block orders; each block then uses the shifted resonance ε
    /// of its order (keeping the sign of `params.epsilon`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_orders: Option<Vec<u32>>,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl FloquetPlan {
    pub fn new(order_m: u32, r: f64, n_blocks: usize, params: LatticeParams) -> Self {
        Self {
            order_m,
            r,
            n_blocks,
            substeps_per_block: DEFAULT_SUBSTEPS,
            params,
            alternate_sign: false,
            block_orders: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidParameter { name: "r", reason: format!("must lie in [0, 1], got {}", self.r) });
        }
        if self.n_blocks == 0 {
            return Err(Error::InvalidParameter { name: "n_blocks", reason: "must be at least 1".into() });
        }
        if self.substeps_per_block == 0 {
            return Err(Error::InvalidParameter { name: "substeps_per_block", reason: "must be at least 1".into() });
        }
        if let Some(orders) = &self.block_orders {
            if orders.len() != self.n_blocks {
                return Err(Error::DimensionMismatch { expected: self.n_blocks, got: orders.len() });
            }
        }
        Ok(())
    }

    /// Lattice parameters of block `b` and its resonance period `T`.
    pub fn block(&self, b: usize) -> Result<(LatticeParams, f64)> {
        let base = match &self.block_orders {
            Some(orders) => {
                let m = orders[b];
                let sign = if self.params.epsilon < 0.0 { -1.0 } else { 1.0 };
                self.params
                    .with_order(m)
                    .with_epsilon(sign * shifted_resonance_epsilon(m, self.params.v, self.params.f))
            }
            None => self.params.with_order(self.order_m),
        };
        let period = delta_min(&eig_hermitian(&build_hamiltonian(&base)?), None)?.period;
        let flip = self.alternate_sign && b % 2 == 1;
        Ok((if flip { base.with_epsilon(-base.epsilon) } else { base }, period))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetRun {
    pub map: IntensityMap,
    /// Map row at the end of each block (row 0 is the input).
    pub boundary_rows: Vec<usize>,
    pub block_periods: Vec<f64>,
}

/// Applies `exp(−i H_b r T_b)` block by block, recording `substeps_per_block`
/// rows per block; `n_blocks·substeps + 1` rows in total.
pub fn run_floquet(plan: &FloquetPlan, input_site: usize) -> Result<FloquetRun> {
    plan.validate()?;
    let n = plan.params.n_sites;
    let mut psi = StateVector::basis(n, input_site)?;
    let s = plan.substeps_per_block;
    let rows = plan.n_blocks * s + 1;
    let mut times = Vec::with_capacity(rows);
    let mut intensities = Array2::zeros((rows, n));
    times.push(0.0);
    intensities.row_mut(0).assign(&psi.intensities());
    let mut boundary_rows = Vec::with_capacity(plan.n_blocks);
    let mut block_periods = Vec::with_capacity(plan.n_blocks);
    let mut elapsed = 0.0;
    let mut cache: Option<(LatticeParams, SpectralDecomposition)> = None;

    for b in 0..plan.n_blocks {
        let (params, period) = plan.block(b)?;
        let spec = match cache.take() {
            Some((p, spec)) if p == params => spec,
            _ => eig_hermitian(&build_hamiltonian(&params)?),
        };
        let duration = plan.r * period;
        let grid: Vec<f64> = (1..=s).map(|j| duration * j as f64 / s as f64).collect();
        let block = intensities_from(&spec, &psi, &grid);
        let start = 1 + b * s;
        intensities.slice_mut(ndarray::s![start..start + s, ..]).assign(&block);
        times.extend(grid.iter().map(|t| elapsed + t));
        psi = apply(&propagator(&spec, duration), &psi)?;
        elapsed += duration;
        boundary_rows.push(start + s - 1);
        block_periods.push(period);
        cache = Some((params, spec));
    }
    let map = IntensityMap {
        times,
        n_sites: n,
        intensities,
        input_site,
        source: MapSource::Protocol(format!("floquet m={} r={}", plan.order_m, plan.r)),
    };
    Ok(FloquetRun { map, boundary_rows, block_periods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::flip_epsilon;

    fn m0_base() -> LatticeParams {
        LatticeParams::new(12, 0.05, 1.0, shifted_resonance_epsilon(0, 0.05, 1.0)).unwrap().with_order(0)
    }

    // figure labels 2, 5, 8, 11 sit at indices 1, 4, 7, 10
    fn m1_base() -> LatticeParams {
        LatticeParams::new(12, 0.25, 1.0, 2.905).unwrap().with_order(1).with_origin(1)
    }

    #[test]
    fn schedule_invariants_hold() {
        let s = plan_cascade(&m0_base(), &[7, 6, 5, 4, 3, 2], None).unwrap();
        assert_eq!(s.stages.len(), 5);
        assert_eq!(s.direction, Direction::Left);
        s.validate().unwrap();
        for w in s.stages.windows(2) {
            assert_eq!(w[1].params, flip_epsilon(&w[0].params));
            assert_eq!(
                build_hamiltonian(&w[1].params).unwrap(),
                build_hamiltonian(&flip_epsilon(&w[0].params)).unwrap()
            );
        }
        for st in &s.stages {
            assert!((st.t_star - 31.0).abs() < 3.1, "{}", st.t_star);
            assert!(!st.at_boundary);
        }
    }

    #[test]
    fn single_hop_is_one_transfer() {
        let (v, f) = (0.9, 0.9);
        let probe = LatticeParams::new(12, v, f, 0.0).unwrap();
        let eps =
            crate::spectrum::locate_anticrossing(&probe, 2, 4, 9, crate::spectrum::default_search_halfwidth(2, v, f))
                .unwrap()
                .epsilon_star;
        let base = probe.with_epsilon(eps).with_order(2);
        let s = plan_cascade(&base, &[4, 9], None).unwrap();
        assert_eq!(s.stages.len(), 1);
        let direct = crate::dynamics::transfer_max(
            &build_hamiltonian(&base).unwrap(),
            4,
            9,
            1.5 * PI / delta_min_pair(&eig_hermitian(&build_hamiltonian(&base).unwrap()), 4, 9).unwrap().delta_min,
        )
        .unwrap();
        assert_eq!(s.stages[0].t_star, direct.t_star);
    }

    #[test]
    fn inconsistent_chain_rejected() {
        assert!(matches!(
            plan_cascade(&m1_base(), &[2, 5, 7], None),
            Err(Error::ChainStep { step: 2, order_m: 1, expected: 3 })
        ));
        assert!(matches!(plan_cascade(&m1_base(), &[2, 4], None), Err(Error::ChainStep { .. })));
        assert!(plan_cascade(&m1_base(), &[2], None).is_err());
        assert!(plan_cascade(&m1_base(), &[8, 11, 14], None).is_err());
    }

    #[test]
    fn detuned_stage_is_not_resonant() {
        let base = m0_base().with_epsilon(1.3);
        assert!(matches!(plan_cascade(&base, &[7, 6], Some(60.0)), Err(Error::StageNotResonant { stage: 0, .. })));
    }

    #[test]
    fn m0_cascade_runs_leftward() {
        let s = plan_cascade(&m0_base(), &[7, 6, 5, 4, 3, 2], None).unwrap();
        let run = run_cascade(&s, 200).unwrap();
        assert_eq!(run.map.rows(), 5 * 200 + 1);
        assert_eq!(run.stage_of_row.len(), run.map.rows());
        assert_eq!(run.flip_times.len(), 4);
        assert!(run.map.max_row_sum_error() < 1e-9);
        for f in &run.per_stage_fidelity {
            assert!(*f > 0.98, "{:?}", run.per_stage_fidelity);
        }
        for l in &run.reverse_leakage {
            assert!(*l < 0.05, "{:?}", run.reverse_leakage);
        }
        assert!((run.map.horizon() - s.total_time()).abs() < 1e-9);
    }

    #[test]
    fn rightward_argmax_never_retreats_at_boundaries() {
        let s = plan_cascade(&m1_base(), &[1, 4, 7, 10], None).unwrap();
        let run = run_cascade(&s, 64).unwrap();
        let argmax =
            |row: usize| run.map.intensities.row(row).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let mut boundaries = vec![0];
        boundaries.extend((1..=s.stages.len()).map(|k| k * 64));
        let mut best = 0;
        for b in boundaries {
            let a = argmax(b);
            assert!(a >= best);
            best = a;
        }
        assert!(run.per_stage_fidelity[0] > 0.95);
    }

    #[test]
    fn m1_stages_are_slower_than_m0() {
        let slow = plan_cascade(&m1_base(), &[1, 4], None).unwrap().stages[0].t_star;
        let fast = plan_cascade(&m0_base(), &[7, 6], None).unwrap().stages[0].t_star;
        assert!(slow > 10.0 * fast);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let run = run_floquet(&FloquetPlan::new(0, 0.0, 3, m0_base()), 5).unwrap();
        assert_eq!(run.map.rows(), 3 * 50 + 1);
        for row in run.map.intensities.rows() {
            for (n, &i) in row.iter().enumerate() {
                assert!((i - if n == 5 { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_blocks_compose() {
        let plan = FloquetPlan { substeps_per_block: 7, ..FloquetPlan::new(0, 0.37, 2, m0_base()) };
        let run = run_floquet(&plan, 4).unwrap();
        let (params, period) = plan.block(0).unwrap();
        let u = propagator(&eig_hermitian(&build_hamiltonian(&params).unwrap()), 0.37 * period);
        let psi = StateVector::basis(12, 4).unwrap();
        let twice = apply(&u, &apply(&u, &psi).unwrap()).unwrap().intensities();
        let last = run.map.intensities.row(*run.boundary_rows.last().unwrap());
        for n in 0..12 {
            assert!((last[n] - twice[n]).abs() < 1e-10);
        }
        assert_eq!(run.boundary_rows, vec![7, 14]);
    }

    #[test]
    fn alternating_blocks_flip_epsilon() {
        let plan = FloquetPlan { alternate_sign: true, ..FloquetPlan::new(0, 0.5, 3, m0_base()) };
        let (p0, t0) = plan.block(0).unwrap();
        let (p1, t1) = plan.block(1).unwrap();
        assert_eq!(p1, flip_epsilon(&p0));
        assert_eq!(t0, t1);
    }

    #[test]
    fn block_orders_use_shifted_resonance() {
        let params = LatticeParams::new(12, 0.18, 0.9, 0.8).unwrap();
        let plan = FloquetPlan { block_orders: Some(vec![0, 1]), ..FloquetPlan::new(0, 1.0, 2, params) };
        let (p1, _) = plan.block(1).unwrap();
        assert_eq!(p1.epsilon, shifted_resonance_epsilon(1, 0.18, 0.9));
        assert_eq!(p1.order_m, Some(1));
        let bad = FloquetPlan { block_orders: Some(vec![0]), ..plan };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn plan_validation() {
        assert!(FloquetPlan::new(0, 1.5, 1, m0_base()).validate().is_err());
        assert!(FloquetPlan::new(0, 0.5, 0, m0_base()).validate().is_err());
    }
}
