//! Genetic-algorithm recovery of `{r₀, NA, Δ, Δₚ}` and per-peak process
//! assignments from measured signal/idler peak positions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{angular_frequency, is_guided};
use crate::error::{Error, Result};
use crate::fiber::{CladdingMaterial, FiberParams, LpMode, Parity, Polarization};
use crate::phasematch::{nearest_phasematch, pm_roots, NonlinearPhase, PmSearch, WavenumberCache};
use crate::processes::{enumerate_processes, PolarizationFilter, ProcessSpec};

/// One measured signal/idler peak pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakObservation {
    #[serde(rename = "pump_nm")]
    pub pump_wavelength_nm: f64,
    pub peak_label: String,
    #[serde(rename = "signal_nm")]
    pub signal_wavelength_nm: f64,
    #[serde(rename = "idler_nm")]
    pub idler_wavelength_nm: f64,
    #[serde(default)]
    pub signal_mode: Option<LpMode>,
    #[serde(default)]
    pub idler_mode: Option<LpMode>,
    #[serde(default)]
    pub signal_width_nm: f64,
    #[serde(default)]
    pub idler_width_nm: f64,
    #[serde(default, rename = "pump_bw_nm")]
    pub pump_bandwidth_nm: f64,
}

impl PeakObservation {
    /// `|1/λ_s + 1/λ_i − 2/λ_p| · λ_p / 2`; reported, never enforced.
    pub fn energy_residual(&self) -> f64 {
        (1.0 / self.signal_wavelength_nm + 1.0 / self.idler_wavelength_nm - 2.0 / self.pump_wavelength_nm).abs()
            * self.pump_wavelength_nm
            / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.idler_wavelength_nm > 0.0
            && self.idler_wavelength_nm < self.pump_wavelength_nm
            && self.pump_wavelength_nm < self.signal_wavelength_nm
            && self.signal_wavelength_nm.is_finite();
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "peak {} at pump {} nm: expected idler < pump < signal",
                self.peak_label, self.pump_wavelength_nm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessVariant {
    /// `Σ |Δk|`.
    #[default]
    SumOfAbs,
    /// `|Σ Δk|`.
    AbsOfSum,
}

impl std::str::FromStr for FitnessVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sum_of_abs" => Ok(Self::SumOfAbs),
            "abs_of_sum" => Ok(Self::AbsOfSum),
            _ => Err(Error::Parse(format!("unknown fitness variant `{s}`"))),
        }
    }
}

/// Closed intervals for the four genes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBounds {
    pub core_radius_um: (f64, f64),
    pub na: (f64, f64),
    pub delta: (f64, f64),
    pub delta_p: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            core_radius_um: (1.0, 2.5),
            na: (0.10, 0.30),
            delta: (0.5e-4, 5e-4),
            delta_p: (0.5e-4, 10e-4),
        }
    }
}

impl ParameterBounds {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.core_radius_um, self.na, self.delta, self.delta_p]
    }

    pub fn contains(&self, genes: &[f64; 4]) -> bool {
        self.as_array().iter().zip(genes).all(|(&(lo, hi), &g)| g >= lo && g <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    pub elite_fraction: f64,
    pub tournament_size: usize,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation σ per gene, as a fraction of the bound width.
    pub mutation_scale: [f64; 4],
    /// Factor applied to the mutation σ by the final generation, reached
    /// geometrically; 1 keeps it constant.
    pub mutation_decay: f64,
    pub parameter_bounds: ParameterBounds,
    pub fitness_variant: FitnessVariant,
    pub seed: u64,
    /// Relative tolerance below which two solutions are merged.
    pub merge_tolerance: f64,
    /// Ranked solutions returned (with peak deviations evaluated).
    pub report_limit: usize,
    /// Levenberg–Marquardt iterations applied to each reported solution
    /// after the last generation; 0 disables the polish.
    pub polish_iterations: usize,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            generations: 300,
            elite_fraction: 0.05,
            tournament_size: 3,
            mutation_rate: 0.15,
            mutation_scale: [0.02; 4],
            mutation_decay: 1.0,
            parameter_bounds: ParameterBounds::default(),
            fitness_variant: FitnessVariant::SumOfAbs,
            seed: 0,
            merge_tolerance: 0.005,
            report_limit: 20,
            polish_iterations: 100,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.population_size < 4 {
            return bad("population_size must be >= 4");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return bad("elite_fraction must lie in (0, 1)");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if self.mutation_scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("mutation_scale must be non-negative");
        }
        if !(self.mutation_decay > 0.0 && self.mutation_decay <= 1.0) {
            return bad("mutation_decay must lie in (0, 1]");
        }
        if self.report_limit == 0 {
            return bad("report_limit must be >= 1");
        }
        for (lo, hi) in self.parameter_bounds.as_array() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad("parameter bounds must be finite with lower <= upper");
            }
        }
        let [r, na, _, _] = self.parameter_bounds.as_array();
        if r.0 <= 0.0 || na.0 <= 0.0 || na.1 >= 1.0 {
            return bad("core radius must be positive and NA within (0, 1)");
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population_size as f64).ceil() as usize).clamp(1, self.population_size - 1)
    }
}

/// LP01 and LP11 unfolded into their six birefringent modes.
pub fn six_mode_set() -> Vec<LpMode> {
    let mut modes = Vec::with_capacity(6);
    for polarization in [Polarization::X, Polarization::Y] {
        modes.push(LpMode::fundamental_family(1, polarization));
        for parity in [Parity::Even, Parity::Odd] {
            modes.push(LpMode { l: 1, m: 1, polarization, parity });
        }
    }
    modes.sort();
    modes
}

/// Observations plus the process catalogue they are matched against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub observations: Vec<PeakObservation>,
    pub viable: Vec<ProcessSpec>,
    pub use_mode_constraints: bool,
    pub length_m: f64,
    pub cladding_material: CladdingMaterial,
}

impl FitProblem {
    /// Defaults to the viable xx–yy processes over the six LP01/LP11 modes.
    pub fn new(observations: Vec<PeakObservation>) -> Result<Self> {
        let viable = enumerate_processes(&six_mode_set(), Some(PolarizationFilter::CrossXxYy))?.viable_processes();
        let problem = Self {
            observations,
            viable,
            use_mode_constraints: true,
            length_m: 0.145,
            cladding_material: CladdingMaterial::FusedSilica,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::InvalidArgument("no peak observations".into()));
        }
        self.observations.iter().try_for_each(PeakObservation::validate)
    }

    pub fn fiber(&self, genes: &[f64; 4]) -> FiberParams {
        FiberParams {
            core_radius_um: genes[0],
            na: genes[1],
            delta: genes[2],
            delta_p: genes[3],
            length_m: self.length_m,
            cladding_material: self.cladding_material,
        }
    }

    /// Peak labels in first-seen order, with observation indices.
    fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, obs) in self.observations.iter().enumerate() {
            match groups.iter_mut().find(|(label, _)| *label == obs.peak_label) {
                Some((_, idx)) => idx.push(i),
                None => groups.push((obs.peak_label.clone(), vec![i])),
            }
        }
        groups
    }
}

/// Candidate processes per peak label.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    pub labels: Vec<String>,
    pub observations: Vec<Vec<usize>>,
    pub candidates: Vec<Vec<ProcessSpec>>,
}

pub fn candidate_table(problem: &FitProblem, use_mode_constraints: bool) -> Result<CandidateTable> {
    if problem.viable.is_empty() {
        return Err(Error::InvalidArgument("viable process set is empty".into()));
    }
    let mut table = CandidateTable { labels: Vec::new(), observations: Vec::new(), candidates: Vec::new() };
    for (label, idx) in problem.groups() {
        let first = &problem.observations[idx[0]];
        let (signal, idler) = if use_mode_constraints {
            (first.signal_mode, first.idler_mode)
        } else {
            (None, None)
        };
        if use_mode_constraints {
            for &i in &idx {
                let o = &problem.observations[i];
                if o.signal_mode != signal || o.idler_mode != idler {
                    return Err(Error::Assignment { label: format!("{label} (inconsistent mode constraints)") });
                }
            }
        }
        let candidates: Vec<ProcessSpec> = problem
            .viable
            .iter()
            .filter(|p| signal.is_none_or(|s| p.signal == s) && idler.is_none_or(|m| p.idler == m))
            .copied()
            .collect();
        if candidates.is_empty() {
            return Err(Error::Assignment { label });
        }
        table.labels.push(label);
        table.observations.push(idx);
        table.candidates.push(candidates);
    }
    Ok(table)
}

fn observation_mismatch(
    cache: &mut WavenumberCache<'_>,
    process: &ProcessSpec,
    obs: &PeakObservation,
) -> Option<f64> {
    let wp = angular_frequency(obs.pump_wavelength_nm);
    let ws = angular_frequency(obs.signal_wavelength_nm);
    let wi = angular_frequency(obs.idler_wavelength_nm);
    // both pumps at the pump center, outputs at the measured peaks
    let k = cache.k_per_m(&process.pump1, wp).ok()? + cache.k_per_m(&process.pump2, wp).ok()?
        - cache.k_per_m(&process.signal, ws).ok()?
        - cache.k_per_m(&process.idler, wi).ok()?;
    Some(k)
}

/// Fitness `Δk_T` in 1/m of a given assignment; `+∞` if any assigned wave
/// is not guided at its observation frequency.
pub fn fitness(
    fiber: &FiberParams,
    observations: &[PeakObservation],
    assignment: &BTreeMap<String, ProcessSpec>,
    variant: FitnessVariant,
) -> f64 {
    let mut cache = WavenumberCache::new(fiber);
    let mut sum = 0.0;
    let mut sum_abs = 0.0;
    for obs in observations {
        let Some(process) = assignment.get(&obs.peak_label) else { return f64::INFINITY };
        match observation_mismatch(&mut cache, process, obs) {
            Some(dk) => {
                sum += dk;
                sum_abs += dk.abs();
            }
            None => return f64::INFINITY,
        }
    }
    match variant {
        FitnessVariant::SumOfAbs => sum_abs,
        FitnessVariant::AbsOfSum => sum.abs(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub processes: BTreeMap<String, ProcessSpec>,
    pub fitness: f64,
}

fn assign_with_table(fiber: &FiberParams, problem: &FitProblem, table: &CandidateTable, variant: FitnessVariant) -> Assignment {
    let mut cache = WavenumberCache::new(fiber);
    // per label and candidate: (Σ Δk, Σ |Δk|)
    let sums: Vec<Vec<(f64, f64)>> = table
        .candidates
        .iter()
        .zip(&table.observations)
        .map(|(cands, idx)| {
            cands
                .iter()
                .map(|p| {
                    let mut s = 0.0;
                    let mut a = 0.0;
                    for &i in idx {
                        match observation_mismatch(&mut cache, p, &problem.observations[i]) {
                            Some(dk) => {
                                s += dk;
                                a += dk.abs();
                            }
                            None => return (f64::INFINITY, f64::INFINITY),
                        }
                    }
                    (s, a)
                })
                .collect()
        })
        .collect();

    let choice: Vec<usize> = match variant {
        FitnessVariant::SumOfAbs => sums
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (j, &(_, a))| if a < best.1 { (j, a) } else { best })
                    .0
            })
            .collect(),
        FitnessVariant::AbsOfSum => {
            let mut best = (vec![0; sums.len()], f64::INFINITY);
            let mut current = vec![0usize; sums.len()];
            loop {
                let total: f64 = current.iter().zip(&sums).map(|(&j, c)| c[j].0).sum();
                if total.is_finite() && total.abs() < best.1 {
                    best = (current.clone(), total.abs());
                }
                // odometer increment
                let mut pos = 0;
                loop {
                    if pos == current.len() {
                        break;
                    }
                    current[pos] += 1;
                    if current[pos] < sums[pos].len() {
                        break;
                    }
                    current[pos] = 0;
                    pos += 1;
                }
                if pos == current.len() {
                    break;
                }
            }
            best.0
        }
    };

    let processes: BTreeMap<String, ProcessSpec> = table
        .labels
        .iter()
        .zip(&choice)
        .zip(&table.candidates)
        .map(|((label, &j), cands)| (label.clone(), cands[j]))
        .collect();
    let fitness = {
        let (s, a) = choice
            .iter()
            .zip(&sums)
            .fold((0.0, 0.0), |(s, a), (&j, c)| (s + c[j].0, a + c[j].1));
        match variant {
            FitnessVariant::SumOfAbs => a,
            FitnessVariant::AbsOfSum if s.is_finite() => s.abs(),
            FitnessVariant::AbsOfSum => f64::INFINITY,
        }
    };
    Assignment { processes, fitness }
}

/// Exhaustive per-label search for the fittest process assignment.
pub fn assign_processes(
    fiber: &FiberParams,
    problem: &FitProblem,
    use_mode_constraints: bool,
    variant: FitnessVariant,
) -> Result<Assignment> {
    let table = candidate_table(problem, use_mode_constraints)?;
    Ok(assign_with_table(fiber, problem, &table, variant))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDeviation {
    pub peak_label: String,
    pub pump_nm: f64,
    pub predicted_signal_nm: Option<f64>,
    pub predicted_idler_nm: Option<f64>,
    /// Larger of the signal and idler deviations, nm (`∞` if no root nearby).
    pub deviation_nm: f64,
}

/// Search half-window around each measured peak for the predicted root.
pub const DEVIATION_WINDOW_NM: f64 = 40.0;

pub fn peak_deviations(fiber: &FiberParams, problem: &FitProblem, assignment: &BTreeMap<String, ProcessSpec>) -> Vec<PeakDeviation> {
    problem
        .observations
        .iter()
        .map(|obs| {
            let predicted = assignment.get(&obs.peak_label).and_then(|p| {
                nearest_phasematch(
                    fiber,
                    p,
                    obs.pump_wavelength_nm,
                    obs.signal_wavelength_nm,
                    DEVIATION_WINDOW_NM,
                    NonlinearPhase::None,
                )
            });
            let deviation_nm = predicted.map_or(f64::INFINITY, |(s, i)| {
                (s - obs.signal_wavelength_nm).abs().max((i - obs.idler_wavelength_nm).abs())
            });
            PeakDeviation {
                peak_label: obs.peak_label.clone(),
                pump_nm: obs.pump_wavelength_nm,
                predicted_signal_nm: predicted.map(|p| p.0),
                predicted_idler_nm: predicted.map(|p| p.1),
                deviation_nm,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSolution {
    pub params: FiberParams,
    pub assignment: BTreeMap<String, ProcessSpec>,
    /// `Δk_T`, 1/m.
    pub fitness: f64,
    pub max_peak_deviation_nm: f64,
    pub peak_deviations: Vec<PeakDeviation>,
}

impl FitSolution {
    pub fn evaluate(problem: &FitProblem, genes: &[f64; 4], variant: FitnessVariant) -> Result<Self> {
        let params = problem.fiber(genes);
        let assignment = assign_processes(&params, problem, problem.use_mode_constraints, variant)?;
        let peak_deviations = peak_deviations(&params, problem, &assignment.processes);
        let max_peak_deviation_nm = peak_deviations.iter().map(|d| d.deviation_nm).fold(0.0, f64::max);
        Ok(Self {
            params,
            assignment: assignment.processes,
            fitness: assignment.fitness,
            max_peak_deviation_nm,
            peak_deviations,
        })
    }

    pub fn genes(&self) -> [f64; 4] {
        [self.params.core_radius_um, self.params.na, self.params.delta, self.params.delta_p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    /// Final population, ranked by fitness, duplicates merged.
    pub solutions: Vec<FitSolution>,
    /// Best fitness before each generation and after the last.
    pub best_history: Vec<f64>,
    /// Per-gene minimum and maximum over every evaluated individual.
    pub evaluated_envelope: [(f64, f64); 4],
    pub evaluations: usize,
}

impl GaResult {
    pub fn best(&self) -> &FitSolution {
        &self.solutions[0]
    }
}

fn sample_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order
}

fn is_duplicate(a: &[f64; 4], b: &[f64; 4], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

/// Runs the seeded genetic algorithm.
pub fn ga_run(problem: &FitProblem, config: &GAConfig) -> Result<GaResult> {
    problem.validate()?;
    config.validate()?;
    let table = candidate_table(problem, problem.use_mode_constraints)?;
    let bounds = config.parameter_bounds.as_array();
    let variant = config.fitness_variant;
    let evaluate = |pop: &[[f64; 4]]| -> Vec<f64> {
        pop.par_iter()
            .map(|g| {
                let fiber = problem.fiber(g);
                assign_with_table(&fiber, problem, &table, variant).fitness
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut population: Vec<[f64; 4]> = (0..config.population_size)
        .map(|_| std::array::from_fn(|k| sample_uniform(&mut rng, bounds[k])))
        .collect();
    let mut fitness = evaluate(&population);
    let mut evaluations = population.len();
    let mut envelope = bounds.map(|_| (f64::INFINITY, f64::NEG_INFINITY));
    let track = |env: &mut [(f64, f64); 4], pop: &[[f64; 4]]| {
        for g in pop {
            for k in 0..4 {
                env[k].0 = env[k].0.min(g[k]);
                env[k].1 = env[k].1.max(g[k]);
            }
        }
    };
    track(&mut envelope, &population);

    let base_sigma: [f64; 4] = std::array::from_fn(|k| config.mutation_scale[k] * (bounds[k].1 - bounds[k].0));
    let n_elite = config.elite_count();
    let mut best_history = Vec::with_capacity(config.generations + 1);

    for generation in 0..config.generations {
        let shrink = config.mutation_decay.powf(generation as f64 / config.generations.max(2).saturating_sub(1) as f64);
        let normals: Vec<Option<Normal<f64>>> = base_sigma
            .iter()
            .map(|&s| (s > 0.0).then(|| Normal::new(0.0, s * shrink).expect("finite sigma")))
            .collect();
        let order = ranking(&fitness);
        best_history.push(fitness[order[0]]);
        let mut next: Vec<[f64; 4]> = order[..n_elite].iter().map(|&i| population[i]).collect();
        let elite_fitness: Vec<f64> = order[..n_elite].iter().map(|&i| fitness[i]).collect();
        while next.len() < config.population_size {
            let a = population[tournament(&mut rng, &fitness, config.tournament_size)];
            let b = population[tournament(&mut rng, &fitness, config.tournament_size)];
            let mut child = [0.0; 4];
            for k in 0..4 {
                // blend crossover with a small extension beyond the parents
                let alpha: f64 = rng.gen_range(-0.5..=1.5);
                let mut g = a[k] + alpha * (b[k] - a[k]);
                if rng.gen::<f64>() < config.mutation_rate {
                    if let Some(n) = &normals[k] {
                        g += n.sample(&mut rng);
                    }
                }
                child[k] = g.clamp(bounds[k].0, bounds[k].1);
            }
            next.push(child);
        }
        let offspring_fitness = evaluate(&next[n_elite..]);
        evaluations += offspring_fitness.len();
        track(&mut envelope, &next[n_elite..]);
        population = next;
        fitness = elite_fitness.into_iter().chain(offspring_fitness).collect();
    }
    let order = ranking(&fitness);
    best_history.push(fitness[order[0]]);

    let mut kept: Vec<[f64; 4]> = Vec::new();
    for &i in &order {
        if kept.len() == config.report_limit {
            break;
        }
        if !kept.iter().any(|k| is_duplicate(k, &population[i], config.merge_tolerance)) {
            kept.push(population[i]);
        }
    }
    if config.polish_iterations > 0 {
        let polished: Vec<([f64; 4], f64)> = kept
            .par_iter()
            .map(|g| polish(problem, &table, g, &config.parameter_bounds, variant, config.polish_iterations))
            .collect();
        let fit: Vec<f64> = polished.iter().map(|p| p.1).collect();
        let mut merged: Vec<[f64; 4]> = Vec::new();
        for i in ranking(&fit) {
            if !merged.iter().any(|k| is_duplicate(k, &polished[i].0, config.merge_tolerance)) {
                merged.push(polished[i].0);
            }
        }
        kept = merged;
    }
    let solutions = kept
        .par_iter()
        .map(|g| FitSolution::evaluate(problem, g, variant))
        .collect::<Result<Vec<_>>>()?;
    Ok(GaResult { solutions, best_history, evaluated_envelope: envelope, evaluations })
}

fn residuals(problem: &FitProblem, table: &CandidateTable, assignment: &[ProcessSpec], genes: &[f64; 4]) -> Option<Vec<f64>> {
    let fiber = problem.fiber(genes);
    let mut cache = WavenumberCache::new(&fiber);
    let mut out = Vec::with_capacity(problem.observations.len());
    for (idx, process) in table.observations.iter().zip(assignment) {
        for &i in idx {
            out.push(observation_mismatch(&mut cache, process, &problem.observations[i])?);
        }
    }
    Some(out)
}

/// Solves the small dense system `a x = b` by Gaussian elimination.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg–Marquardt on the per-observation mismatches with the
/// assignment held fixed, in bound-normalized coordinates. Returns the
/// starting point unless the configured fitness improves.
fn polish(
    problem: &FitProblem,
    table: &CandidateTable,
    start: &[f64; 4],
    bounds: &ParameterBounds,
    variant: FitnessVariant,
    iterations: usize,
) -> ([f64; 4], f64) {
    let score = |g: &[f64; 4]| assign_with_table(&problem.fiber(g), problem, table, variant);
    let initial = score(start);
    if !initial.fitness.is_finite() {
        return (*start, initial.fitness);
    }
    let assignment: Vec<ProcessSpec> = table.labels.iter().map(|l| initial.processes[l]).collect();
    let b = bounds.as_array();
    let free: Vec<usize> = (0..4).filter(|&k| b[k].1 > b[k].0).collect();
    if free.is_empty() {
        return (*start, initial.fitness);
    }
    let width: Vec<f64> = free.iter().map(|&k| b[k].1 - b[k].0).collect();
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut genes = *start;
    let Some(mut r) = residuals(problem, table, &assignment, &genes) else {
        return (*start, initial.fitness);
    };
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        // central-difference Jacobian in normalized coordinates
        let mut jac = vec![vec![0.0; free.len()]; r.len()];
        for (c, &k) in free.iter().enumerate() {
            let h = 1e-7 * width[c];
            let (mut up, mut down) = (genes, genes);
            up[k] += h;
            down[k] -= h;
            let (Some(ru), Some(rd)) = (
                residuals(problem, table, &assignment, &up),
                residuals(problem, table, &assignment, &down),
            ) else {
                return finish(&genes, start, &initial, score);
            };
            for (row, (a, d)) in jac.iter_mut().zip(ru.iter().zip(&rd)) {
                row[c] = (a - d) / 2e-7;
            }
        }
        let n = free.len();
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..n {
                jtr[a] -= row[a] * ri;
                for c in 0..n {
                    jtj[a][c] += row[a] * row[c];
                }
            }
        }
        let current = cost(&r);
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a][a] += lambda * jtj[a][a].max(1e-30);
            }
            let Some(step) = solve_dense(damped, jtr.clone()) else { break };
            let mut trial = genes;
            for (c, &k) in free.iter().enumerate() {
                trial[k] = (genes[k] + step[c] * width[c]).clamp(b[k].0, b[k].1);
            }
            match residuals(problem, table, &assignment, &trial) {
                Some(rt) if cost(&rt) < current => {
                    genes = trial;
                    r = rt;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved || cost(&r) < 1e-24 {
            break;
        }
    }
    finish(&genes, start, &initial, score)
}

fn finish(genes: &[f64; 4], start: &[f64; 4], initial: &Assignment, score: impl Fn(&[f64; 4]) -> Assignment) -> ([f64; 4], f64) {
    let polished = score(genes);
    if polished.fitness < initial.fitness {
        (*genes, polished.fitness)
    } else {
        (*start, initial.fitness)
    }
}

/// Best solution at each fixed core radius.
pub fn solution_family(problem: &FitProblem, r0_grid_um: &[f64], config: &GAConfig) -> Result<Vec<FitSolution>> {
    if r0_grid_um.is_empty() || r0_grid_um.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument("core-radius grid must be nonempty and positive".into()));
    }
    r0_grid_um
        .iter()
        .map(|&r0| {
            let mut cfg = *config;
            cfg.parameter_bounds.core_radius_um = (r0, r0);
            cfg.report_limit = 1;
            ga_run(problem, &cfg).map(|r| r.solutions.into_iter().next().expect("nonempty population"))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    /// `L |Δk| ≤ 2π`.
    Phasematched,
    Mismatched,
    /// Some wave is not guided, or LP11 is cut off at the pump.
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMap {
    pub process: ProcessSpec,
    pub core_radius_um: Vec<f64>,
    pub na: Vec<f64>,
    /// Row-major `[r₀][NA]`.
    pub cells: Vec<Feasibility>,
    /// `L |Δk|` per cell (`NaN` when unsupported).
    pub l_delta_k: Vec<f64>,
}

impl FeasibilityMap {
    pub fn count(&self, kind: Feasibility) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    pub fn cell(&self, i: usize, j: usize) -> Feasibility {
        self.cells[i * self.na.len() + j]
    }
}

/// Inclusive uniform axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.end - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Classifies each `(r₀, NA)` cell for one process at fixed wavelengths.
pub fn feasibility_map(
    process: &ProcessSpec,
    wavelengths_nm: (f64, f64, f64),
    r0_axis: Axis,
    na_axis: Axis,
    delta: f64,
    delta_p: f64,
    length_m: f64,
) -> Result<FeasibilityMap> {
    let (pump_nm, signal_nm, idler_nm) = wavelengths_nm;
    if r0_axis.points == 0 || na_axis.points == 0 {
        return Err(Error::InvalidArgument("feasibility axes need at least one point".into()));
    }
    let r0s = r0_axis.values();
    let nas = na_axis.values();
    let obs = PeakObservation {
        pump_wavelength_nm: pump_nm,
        peak_label: String::new(),
        signal_wavelength_nm: signal_nm,
        idler_wavelength_nm: idler_nm,
        signal_mode: None,
        idler_mode: None,
        signal_width_nm: 0.0,
        idler_width_nm: 0.0,
        pump_bandwidth_nm: 0.0,
    };
    let rows: Vec<Vec<(Feasibility, f64)>> = r0s
        .par_iter()
        .map(|&r0| {
            nas.iter()
                .map(|&na| {
                    let fiber = FiberParams::new(r0, na, delta, delta_p, length_m)?;
                    let waves = [
                        (process.pump1, pump_nm),
                        (process.pump2, pump_nm),
                        (process.signal, signal_nm),
                        (process.idler, idler_nm),
                    ];
                    let supported = is_guided(&fiber, 1, 1, pump_nm)
                        && waves.iter().all(|(m, l)| is_guided(&fiber, m.l, m.m, *l));
                    if !supported {
                        return Ok((Feasibility::Unsupported, f64::NAN));
                    }
                    let mut cache = WavenumberCache::new(&fiber);
                    let Some(dk) = observation_mismatch(&mut cache, process, &obs) else {
                        return Ok((Feasibility::Unsupported, f64::NAN));
                    };
                    let ldk = (length_m * dk).abs();
                    let kind = if ldk <= 2.0 * std::f64::consts::PI {
                        Feasibility::Phasematched
                    } else {
                        Feasibility::Mismatched
                    };
                    Ok((kind, ldk))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<(Feasibility, f64)> = rows.into_iter().flatten().collect();
    Ok(FeasibilityMap {
        process: *process,
        core_radius_um: r0s,
        na: nas,
        cells: flat.iter().map(|c| c.0).collect(),
        l_delta_k: flat.iter().map(|c| c.1).collect(),
    })
}

/// Synthetic peak pairs: one red-signal phase-matching root per process and
/// pump wavelength, with sinc-lobe FWHM widths for a fiber of length `L`.
pub fn synthesize_observations(
    fiber: &FiberParams,
    processes: &[(String, ProcessSpec)],
    pumps_nm: &[f64],
    pump_bandwidth_nm: f64,
    with_modes: bool,
) -> Result<Vec<PeakObservation>> {
    let search = PmSearch::default();
    let mut out = Vec::new();
    for &pump in pumps_nm {
        for (label, process) in processes {
            let root = pm_roots(fiber, process, pump, &search)
                .into_iter()
                .filter(|p| p.signal_above_pump())
                .min_by(|a, b| a.signal_wavelength_nm.total_cmp(&b.signal_wavelength_nm))
                .ok_or_else(|| Error::Assignment { label: format!("{label}: no phase-matched pair at {pump} nm") })?;
            let (signal_width_nm, idler_width_nm) = sinc_widths(fiber, process, pump, root.signal_wavelength_nm)?;
            out.push(PeakObservation {
                pump_wavelength_nm: pump,
                peak_label: label.clone(),
                signal_wavelength_nm: root.signal_wavelength_nm,
                idler_wavelength_nm: root.idler_wavelength_nm,
                signal_mode: with_modes.then_some(process.signal),
                idler_mode: with_modes.then_some(process.idler),
                signal_width_nm,
                idler_width_nm,
                pump_bandwidth_nm,
            });
        }
    }
    Ok(out)
}

/// FWHM in wavelength of `sinc²(L Δk / 2)` along the monochromatic-pump
/// energy-conservation line, from the local slope of `Δk`.
fn sinc_widths(fiber: &FiberParams, process: &ProcessSpec, pump_nm: f64, signal_nm: f64) -> Result<(f64, f64)> {
    // sinc²(x) = 1/2 at x ≈ 1.391557
    const HALF_POWER_X: f64 = 1.391_557_377_5;
    let mut cache = WavenumberCache::new(fiber);
    let wp = angular_frequency(pump_nm);
    let ws = angular_frequency(signal_nm);
    let h = ws * 1e-6;
    let mut dk = |w: f64| cache.mismatch(process, wp, w, 2.0 * wp - w, NonlinearPhase::None);
    let slope = (dk(ws + h)? - dk(ws - h)?) / (2.0 * h);
    let d_omega = 4.0 * HALF_POWER_X / (fiber.length_m * slope.abs());
    let wi = 2.0 * wp - ws;
    let to_nm = |w: f64| 2.0 * std::f64::consts::PI * crate::dispersion::SPEED_OF_LIGHT / (w * w) * 1e9;
    Ok((d_omega * to_nm(ws), d_omega * to_nm(wi)))
}
