use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;
use sfwm_core::dispersion::{
    angular_frequency, cutoff_v_number, mode_field_diameter, supported_modes, wavelength_nm, MfdDefinition, ModeSolution,
};
use sfwm_core::gafit::{
    feasibility_map, ga_run, solution_family, synthesize_observations, Axis, Feasibility, FitProblem,
    FitSolution, FitnessVariant, PeakObservation,
};
use sfwm_core::phasematch::{assemble_state, pm_curve, FrequencyAxis, JsaGrid, PmSearch, StateOptions};
use sfwm_core::processes::{enumerate_processes, PolarizationFilter, ProcessSpec};
use sfwm_core::LpMode;

use crate::config::RunConfig;
use crate::output::{num, opt, to_value, Document, Table};
use crate::Failure;

/// `LABEL=SPEC` or a bare process spec (labelled by position).
#[derive(Debug, Clone, Serialize)]
pub struct LabeledProcess {
    pub label: String,
    pub process: ProcessSpec,
}

fn parse_labeled(s: &str) -> Result<LabeledProcess, String> {
    let (label, spec) = match s.split_once('=') {
        Some((l, p)) => (l.trim().to_string(), p),
        None => (String::new(), s),
    };
    let process = spec.parse::<ProcessSpec>().map_err(|e| e.to_string())?;
    Ok(LabeledProcess { label, process })
}

fn labeled_defaults() -> Vec<LabeledProcess> {
    [("A", "01x+11ex->01y+11ey"), ("B", "01x+11ox->01y+11oy"), ("C", "01x+01x->01y+01y")]
        .iter()
        .map(|(l, p)| LabeledProcess { label: l.to_string(), process: p.parse().expect("valid literal") })
        .collect()
}

fn with_labels(given: &[LabeledProcess]) -> Vec<LabeledProcess> {
    if given.is_empty() {
        return labeled_defaults();
    }
    given
        .iter()
        .enumerate()
        .map(|(i, p)| LabeledProcess {
            label: if p.label.is_empty() { format!("P{}", i + 1) } else { p.label.clone() },
            process: p.process,
        })
        .collect()
}

fn parse_mfd(s: &str) -> Result<MfdDefinition, String> {
    match s {
        "petermann-i" | "petermann1" => Ok(MfdDefinition::PetermannI),
        "petermann-ii" | "petermann2" => Ok(MfdDefinition::PetermannII),
        _ => Err(format!("expected petermann-i or petermann-ii, got `{s}`")),
    }
}

fn mode_label(m: &LpMode) -> String {
    m.to_string()
}

#[derive(Debug, Args, Serialize)]
pub struct ModesArgs {
    /// Evaluation wavelength, nm (defaults to the pump)
    #[arg(long)]
    pub wavelength_nm: Option<f64>,
    /// Mode-field-diameter definition: petermann-i or petermann-ii
    #[arg(long, default_value = "petermann-i", value_parser = parse_mfd)]
    #[serde(skip)]
    pub mfd: MfdDefinition,
}

pub fn modes(config: &RunConfig, args: &ModesArgs) -> Result<Document, Failure> {
    let lambda = args.wavelength_nm.unwrap_or(config.pump.center_wavelength_nm);
    let fiber = &config.fiber;
    let modes = supported_modes(fiber, lambda)?;
    let mfd = mode_field_diameter(fiber, lambda, args.mfd)?;
    let v = fiber.v_number(lambda);
    let mut doc = Document::new("modes", config, &json!({ "wavelength_nm": lambda, "mfd_definition": format!("{:?}", args.mfd) }))?;
    let mut table = Table::new(&[
        "mode", "l", "m", "polarization", "parity", "n_eff", "n0", "u_per_um", "w_per_um", "v_number", "cutoff_v", "cutoff_wavelength_nm",
    ]);
    let mut records = Vec::new();
    for mode in &modes {
        let sol = ModeSolution::solve(fiber, mode, lambda)?;
        let vc = cutoff_v_number(mode.l, mode.m);
        // V scales as 1/λ at fixed NA
        let cutoff_nm = if vc > 0.0 { lambda * v / vc } else { f64::INFINITY };
        table.push(vec![
            mode_label(mode),
            mode.l.to_string(),
            mode.m.to_string(),
            format!("{:?}", mode.polarization).to_lowercase(),
            format!("{:?}", mode.parity).to_lowercase(),
            num(sol.n_eff),
            num(sol.n0),
            num(sol.u),
            num(sol.v),
            num(v),
            num(vc),
            opt(cutoff_nm.is_finite().then_some(cutoff_nm)),
        ]);
        records.push(json!({
            "mode": mode_label(mode), "n_eff": sol.n_eff, "n0": sol.n0, "u_per_um": sol.u, "w_per_um": sol.v,
            "cutoff_v": vc, "cutoff_wavelength_nm": if cutoff_nm.is_finite() { json!(cutoff_nm) } else { json!(null) },
        }));
    }
    doc.summary("guided_modes", modes.len());
    doc.summary("v_number", v);
    doc.summary("mfd_um", mfd);
    doc.table = table;
    doc.data = json!({ "modes": records, "v_number": v, "mfd_um": mfd });
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterArg {
    XxYy,
    None,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    #[arg(long, value_enum, default_value = "xx-yy")]
    pub filter: FilterArg,
    /// Mode labels to enumerate over (default: modes guided at the pump)
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<String>,
    /// List forbidden processes as well
    #[arg(long)]
    pub all: bool,
}

pub fn enumerate(config: &RunConfig, args: &EnumerateArgs) -> Result<Document, Failure> {
    let modes: Vec<LpMode> = if args.modes.is_empty() {
        supported_modes(&config.fiber, config.pump.center_wavelength_nm)?
    } else {
        args.modes.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    let filter = match args.filter {
        FilterArg::XxYy => Some(PolarizationFilter::CrossXxYy),
        FilterArg::None => None,
    };
    let e = enumerate_processes(&modes, filter)?;
    let mut doc = Document::new("enumerate", config, args)?;
    let mut table = Table::new(&[
        "process", "pump1", "pump2", "signal", "idler", "delta_q", "min_abs_delta_l", "viable", "azimuthal_overlap",
    ]);
    for entry in e.entries.iter().filter(|x| args.all || x.conservation.viable) {
        let p = entry.process;
        table.push(vec![
            p.to_string(),
            p.pump1.to_string(),
            p.pump2.to_string(),
            p.signal.to_string(),
            p.idler.to_string(),
            entry.conservation.delta_q.to_string(),
            entry.conservation.min_abs_delta_l().to_string(),
            entry.conservation.viable.to_string(),
            num(entry.azimuthal_overlap),
        ]);
    }
    let filter_name = match args.filter {
        FilterArg::XxYy => "xx-yy",
        FilterArg::None => "unfiltered",
    };
    let line = format!(
        "{} total, {} {}, {} viable",
        e.total_ordered,
        e.filtered_ordered,
        filter_name,
        e.viable().count()
    );
    eprintln!("{line}");
    doc.summary("counts", line);
    doc.summary("viable_ordered", e.viable_ordered);
    doc.table = table;
    doc.data = to_value(&e)?;
    Ok(doc)
}

#[derive(Debug, Args, Serialize)]
pub struct PhasematchArgs {
    /// Process (`LABEL=SPEC` or `SPEC`), repeatable; default: all viable xx-yy processes
    #[arg(long = "process", value_parser = parse_labeled)]
    pub processes: Vec<LabeledProcess>,
    #[arg(long, default_value_t = 690.0)]
    pub pump_start_nm: f64,
    #[arg(long, default_value_t = 720.0)]
    pub pump_end_nm: f64,
    #[arg(long, default_value_t = 7)]
    pub pump_points: usize,
    /// Signal search half-window on each side of the pump, nm
    #[arg(long, default_value_t = 150.0)]
    pub window_nm: f64,
    #[arg(long, default_value_t = 10_000)]
    pub scan_points: usize,
}

pub fn phasematch(config: &RunConfig, args: &PhasematchArgs) -> Result<Document, Failure> {
    let processes: Vec<LabeledProcess> = if args.processes.is_empty() {
        let modes = supported_modes(&config.fiber, config.pump.center_wavelength_nm)?;
        enumerate_processes(&modes, Some(PolarizationFilter::CrossXxYy))?
            .viable_processes()
            .into_iter()
            .map(|process| LabeledProcess { label: process.to_string(), process })
            .collect()
    } else {
        with_labels(&args.processes)
    };
    let search = PmSearch { window_nm: args.window_nm, scan_points: args.scan_points, ..Default::default() };
    let mut doc = Document::new("phasematch", config, args)?;
    let mut table = Table::new(&["process_id", "process", "pump_nm", "signal_nm", "idler_nm", "signal_above_pump", "residual_per_m"]);
    let mut records = Vec::new();
    for lp in &processes {
        config.log(format!("phase matching {}", lp.process));
        let curve = pm_curve(&lp.process, &config.fiber, (args.pump_start_nm, args.pump_end_nm), args.pump_points, &search)?;
        for q in &curve {
            table.push(vec![
                lp.label.clone(),
                q.process.to_string(),
                num(q.pump_wavelength_nm),
                num(q.signal_wavelength_nm),
                num(q.idler_wavelength_nm),
                q.signal_above_pump().to_string(),
                num(q.residual_per_m),
            ]);
        }
        records.push(json!({ "label": lp.label, "process": lp.process.to_string(), "points": to_value(&curve)? }));
    }
    doc.summary("points", table.rows.len());
    doc.table = table;
    doc.data = json!({ "curves": records });
    Ok(doc)
}

#[derive(Debug, Args, Serialize)]
pub struct JsiArgs {
    /// Process (`LABEL=SPEC` or `SPEC`), repeatable; default: the three reference processes A, B and C
    #[arg(long = "process", value_parser = parse_labeled)]
    pub processes: Vec<LabeledProcess>,
    /// Signal wavelength range, nm
    #[arg(long, num_args = 2)]
    pub signal_nm: Option<Vec<f64>>,
    /// Idler wavelength range, nm (default: energy-conserving partner of the signal range)
    #[arg(long, num_args = 2)]
    pub idler_nm: Option<Vec<f64>>,
    /// Grid points per axis
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Drop the factor 2 for distinct pump modes
    #[arg(long)]
    pub no_pump_multiplicity: bool,
}

pub fn jsi(config: &RunConfig, args: &JsiArgs) -> Result<Document, Failure> {
    let processes = with_labels(&args.processes);
    let lp = config.pump.center_wavelength_nm;
    let signal = args.signal_nm.clone().unwrap_or_else(|| vec![lp + 60.0, lp + 130.0]);
    let idler = args.idler_nm.clone().unwrap_or_else(|| {
        let wp = angular_frequency(lp);
        signal.iter().map(|&s| wavelength_nm(2.0 * wp - angular_frequency(s))).collect()
    });
    let grid = JsaGrid {
        signal: FrequencyAxis::from_wavelengths(signal[0], signal[1], args.points)?,
        idler: FrequencyAxis::from_wavelengths(idler[0], idler[1], args.points)?,
    };
    let specs: Vec<ProcessSpec> = processes.iter().map(|p| p.process).collect();
    let powers = vec![(config.pump_power_w, config.pump_power_w); specs.len()];
    let options = StateOptions { pump_multiplicity: !args.no_pump_multiplicity, ..Default::default() };
    let state = assemble_state(&specs, &config.fiber, &config.pump, &grid, &powers, &options)?;
    let mut doc = Document::new("jsi", config, &json!({ "args": to_value(args)?, "signal_nm": signal, "idler_nm": idler }))?;
    for (lp, c) in processes.iter().zip(&state.components) {
        if c.spectrum.misses_phasematching {
            eprintln!("warning: {} ({}) is not phase-matched anywhere on the grid", lp.label, lp.process);
        }
        doc.summary(
            &format!("process.{}", lp.label),
            json!({ "process": lp.process.to_string(), "overlap": c.overlap, "weight": c.weight, "misses_phasematching": c.spectrum.misses_phasematching }),
        );
    }
    let intensity = state.composite_intensity();
    let amplitude = state.composite_amplitude();
    let mut table = Table::new(&[
        "signal_nm", "idler_nm", "signal_omega_rad_per_s", "idler_omega_rad_per_s", "jsi_incoherent", "jsa_re", "jsa_im",
    ]);
    let n_idler = state.idler_omega.len();
    for (i, &ws) in state.signal_omega.iter().enumerate() {
        for (j, &wi) in state.idler_omega.iter().enumerate() {
            let k = i * n_idler + j;
            table.push(vec![
                num(wavelength_nm(ws)),
                num(wavelength_nm(wi)),
                num(ws),
                num(wi),
                num(intensity[k]),
                num(amplitude[k].re),
                num(amplitude[k].im),
            ]);
        }
    }
    doc.table = table;
    doc.data = json!({
        "signal_omega_rad_per_s": state.signal_omega,
        "idler_omega_rad_per_s": state.idler_omega,
        "jsi_incoherent": intensity,
        "signal_marginal": state.signal_marginal,
        "idler_marginal": state.idler_marginal,
        "components": state.components.iter().map(|c| json!({
            "process": c.process.to_string(), "overlap": c.overlap, "weight": c.weight,
        })).collect::<Vec<_>>(),
    });
    Ok(doc)
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Peak-observation CSV
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub gens: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = |s: &str| s.parse::<FitnessVariant>().map_err(|e| e.to_string()))]
    pub fitness_variant: Option<FitnessVariant>,
    /// Ignore measured signal/idler modes when assigning processes
    #[arg(long)]
    pub no_mode_constraints: bool,
    /// Core-radius sweep for the solution family: START END POINTS
    #[arg(long, num_args = 3, value_names = ["START_UM", "END_UM", "POINTS"])]
    pub family_r0: Option<Vec<f64>>,
}

pub fn read_observations(path: &PathBuf) -> Result<Vec<PeakObservation>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<PeakObservation>, _>>()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn solution_row(kind: &str, rank: usize, s: &FitSolution) -> Vec<String> {
    let assignment = s.assignment.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
    vec![
        kind.to_string(),
        rank.to_string(),
        num(s.params.core_radius_um),
        num(s.params.na),
        num(s.params.delta),
        num(s.params.delta_p),
        num(s.fitness),
        num(s.max_peak_deviation_nm),
        assignment,
    ]
}

pub fn fit(config: &RunConfig, args: &FitArgs) -> Result<Document, Failure> {
    let observations = read_observations(&args.observations)?;
    let mut problem = FitProblem::new(observations)?;
    problem.use_mode_constraints = !args.no_mode_constraints;
    problem.length_m = config.fiber.length_m;
    problem.cladding_material = config.fiber.cladding_material;
    let mut ga = config.ga;
    ga.population_size = args.pop.unwrap_or(ga.population_size);
    ga.generations = args.gens.unwrap_or(ga.generations);
    ga.seed = args.seed.unwrap_or(ga.seed);
    ga.fitness_variant = args.fitness_variant.unwrap_or(ga.fitness_variant);
    ga.validate()?;
    let family_grid: Option<Vec<f64>> = match &args.family_r0 {
        None => None,
        Some(v) => {
            let points = v[2];
            if !(points >= 1.0 && points.fract() == 0.0) {
                return Err(Failure::Config("--family-r0 POINTS must be a positive integer".into()));
            }
            Some(Axis { start: v[0], end: v[1], points: points as usize }.values())
        }
    };

    config.log(format!("GA: population {} for {} generations, seed {}", ga.population_size, ga.generations, ga.seed));
    let result = ga_run(&problem, &ga)?;
    let family = match &family_grid {
        Some(grid) => {
            config.log(format!("solution family over {} core radii", grid.len()));
            Some(solution_family(&problem, grid, &ga)?)
        }
        None => None,
    };

    let mut doc = Document::new(
        "fit",
        config,
        &json!({
            "observations": args.observations.display().to_string(),
            "ga": to_value(&ga)?,
            "use_mode_constraints": problem.use_mode_constraints,
            "family_r0_um": family_grid,
        }),
    )?;
    let mut table = Table::new(&[
        "kind", "rank", "core_radius_um", "na", "delta", "delta_p", "fitness_per_m", "max_peak_deviation_nm", "assignment",
    ]);
    for (rank, s) in result.solutions.iter().enumerate() {
        table.push(solution_row("ga", rank + 1, s));
    }
    for (i, s) in family.iter().flatten().enumerate() {
        table.push(solution_row("family", i + 1, s));
    }
    let best = result.best();
    doc.summary("best_fitness_per_m", best.fitness);
    doc.summary("best_max_peak_deviation_nm", best.max_peak_deviation_nm);
    doc.summary("evaluations", result.evaluations);
    let assignment: BTreeMap<String, String> = best.assignment.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
    doc.summary("best_assignment", assignment);
    doc.table = table;
    doc.data = json!({
        "solutions": to_value(&result.solutions)?,
        "best_history": result.best_history,
        "family": to_value(&family)?,
    });
    Ok(doc)
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Process (`LABEL=SPEC` or `SPEC`), repeatable; default: the three reference processes A, B and C
    #[arg(long = "process", value_parser = parse_labeled)]
    pub processes: Vec<LabeledProcess>,
    /// Pump wavelengths, nm
    #[arg(long, value_delimiter = ',', default_value = "690,695,700,705,710,715,720")]
    pub pumps_nm: Vec<f64>,
    /// Leave the signal/idler mode columns empty
    #[arg(long)]
    pub no_modes: bool,
}

pub fn simulate_peaks(config: &RunConfig, args: &SimulateArgs) -> Result<Document, Failure> {
    let processes = with_labels(&args.processes);
    let labeled: Vec<(String, ProcessSpec)> = processes.iter().map(|p| (p.label.clone(), p.process)).collect();
    let obs = synthesize_observations(&config.fiber, &labeled, &args.pumps_nm, config.pump.bandwidth_fwhm_nm, !args.no_modes)?;
    let mut doc = Document::new("simulate-peaks", config, args)?;
    let mut table = Table::new(&[
        "pump_nm", "peak_label", "signal_nm", "idler_nm", "signal_mode", "idler_mode", "signal_width_nm", "idler_width_nm", "pump_bw_nm",
    ]);
    for o in &obs {
        table.push(vec![
            num(o.pump_wavelength_nm),
            o.peak_label.clone(),
            num(o.signal_wavelength_nm),
            num(o.idler_wavelength_nm),
            o.signal_mode.map(|m| m.to_string()).unwrap_or_default(),
            o.idler_mode.map(|m| m.to_string()).unwrap_or_default(),
            num(o.signal_width_nm),
            num(o.idler_width_nm),
            num(o.pump_bandwidth_nm),
        ]);
    }
    doc.summary("observations", obs.len());
    doc.table = table;
    doc.data = to_value(&obs)?;
    Ok(doc)
}

#[derive(Debug, Args, Serialize)]
pub struct FeasibilityArgs {
    /// Process to classify
    #[arg(long, value_parser = parse_labeled)]
    pub process: LabeledProcess,
    /// Signal wavelength, nm
    #[arg(long)]
    pub signal_nm: f64,
    /// Idler wavelength, nm (default: energy-conserving partner)
    #[arg(long)]
    pub idler_nm: Option<f64>,
    /// Core radius axis: START END POINTS
    #[arg(long, num_args = 3, default_values_t = [1.0, 2.0, 41.0])]
    pub r0_um: Vec<f64>,
    /// NA axis: START END POINTS
    #[arg(long, num_args = 3, default_values_t = [0.12, 0.28, 41.0])]
    pub na: Vec<f64>,
}

fn axis(v: &[f64], name: &str) -> Result<Axis, Failure> {
    if !(v[2] >= 1.0 && v[2].fract() == 0.0) {
        return Err(Failure::Config(format!("--{name} POINTS must be a positive integer")));
    }
    Ok(Axis { start: v[0], end: v[1], points: v[2] as usize })
}

pub fn feasibility(config: &RunConfig, args: &FeasibilityArgs) -> Result<Document, Failure> {
    let lp = config.pump.center_wavelength_nm;
    let idler = args
        .idler_nm
        .unwrap_or_else(|| wavelength_nm(2.0 * angular_frequency(lp) - angular_frequency(args.signal_nm)));
    let map = feasibility_map(
        &args.process.process,
        (lp, args.signal_nm, idler),
        axis(&args.r0_um, "r0-um")?,
        axis(&args.na, "na")?,
        config.fiber.delta,
        config.fiber.delta_p,
        config.fiber.length_m,
    )?;
    let mut doc = Document::new("feasibility", config, &json!({ "args": to_value(args)?, "idler_nm": idler }))?;
    let mut table = Table::new(&["core_radius_um", "na", "class", "l_delta_k"]);
    for (i, &r0) in map.core_radius_um.iter().enumerate() {
        for (j, &na) in map.na.iter().enumerate() {
            let class = match map.cell(i, j) {
                Feasibility::Phasematched => "phasematched",
                Feasibility::Mismatched => "mismatched",
                Feasibility::Unsupported => "unsupported",
            };
            let ldk = map.l_delta_k[i * map.na.len() + j];
            table.push(vec![num(r0), num(na), class.to_string(), opt(ldk.is_finite().then_some(ldk))]);
        }
    }
    doc.summary("phasematched_cells", map.count(Feasibility::Phasematched));
    doc.summary("mismatched_cells", map.count(Feasibility::Mismatched));
    doc.summary("unsupported_cells", map.count(Feasibility::Unsupported));
    doc.table = table;
    doc.data = to_value(&map)?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sfwm_core::gafit::six_mode_set;

    #[test]
    fn labeled_process_parsing() {
        let lp = parse_labeled("A=01x+11ex->01y+11ey").unwrap();
        assert_eq!(lp.label, "A");
        assert_eq!(lp.process.to_string(), "01x+11ex->01y+11ey");
        assert!(parse_labeled("01x+01x->01y").is_err());
        let unlabeled = with_labels(&[parse_labeled("01x+01x->01y+01y").unwrap()]);
        assert_eq!(unlabeled[0].label, "P1");
    }

    #[test]
    fn default_processes_are_in_the_six_mode_catalogue() {
        let viable = enumerate_processes(&six_mode_set(), Some(PolarizationFilter::CrossXxYy)).unwrap().viable_processes();
        for lp in labeled_defaults() {
            assert!(viable.contains(&lp.process));
        }
    }
}
