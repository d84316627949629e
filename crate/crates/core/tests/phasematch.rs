use sfwm_core::dispersion::{angular_frequency, wavelength_nm};
use sfwm_core::phasematch::*;
use sfwm_core::processes::ProcessSpec;
use sfwm_core::FiberParams;

fn fiber() -> FiberParams {
    FiberParams::new(1.45, 0.20, 2.38e-4, 4.57e-4, 0.145).unwrap()
}

fn p(s: &str) -> ProcessSpec {
    s.parse().unwrap()
}

const A: &str = "01x+11ex->01y+11ey";
const B: &str = "01x+11ox->01y+11oy";
const C: &str = "01x+01x->01y+01y";

// Red-side roots from an independent scipy brentq solver.
const REFERENCE_ROOTS: [(&str, f64, f64, f64); 9] = [
    (A, 690.0, 793.67, 610.29),
    (B, 690.0, 788.35, 613.47),
    (C, 690.0, 776.28, 620.98),
    (A, 705.0, 821.14, 617.64),
    (B, 705.0, 815.20, 621.05),
    (C, 705.0, 795.39, 633.06),
    (A, 720.0, 850.96, 623.97),
    (B, 720.0, 844.34, 627.58),
    (C, 720.0, 814.57, 645.11),
];

#[test]
fn red_side_roots_match_reference() {
    for (process, pump, signal, idler) in REFERENCE_ROOTS {
        let roots = pm_roots(&fiber(), &p(process), pump, &PmSearch::default());
        let red: Vec<_> = roots.iter().filter(|r| r.signal_above_pump()).collect();
        assert_eq!(red.len(), 1, "{process} at {pump}");
        assert!((red[0].signal_wavelength_nm - signal).abs() < 0.01, "{process} {pump}: {}", red[0].signal_wavelength_nm);
        assert!((red[0].idler_wavelength_nm - idler).abs() < 0.01);
        assert!(red[0].residual_per_m < 1e-3);
        assert!(red[0].energy_residual() < 1e-10);
    }
}

#[test]
fn curve_points_are_phasematched_and_energy_conserving() {
    let search = PmSearch { scan_points: 2000, ..Default::default() };
    for process in [A, B, C] {
        let curve = pm_curve(&p(process), &fiber(), (690.0, 700.0), 3, &search).unwrap();
        for pump in [690.0, 695.0, 700.0] {
            let at: Vec<_> = curve.iter().filter(|q| q.pump_wavelength_nm == pump).collect();
            assert!(at.iter().any(|q| q.signal_above_pump()), "{process} {pump}");
            for q in at {
                assert!(q.residual_per_m < 1e-3);
                assert!(q.energy_residual() < 1e-10);
            }
        }
    }
}

#[test]
fn empty_curve_beyond_cutoff_is_not_an_error() {
    // LP11 is cut off well below 900 nm for this fiber
    let curve = pm_curve(&p(A), &fiber(), (900.0, 910.0), 2, &PmSearch { scan_points: 500, ..Default::default() }).unwrap();
    assert!(curve.is_empty());
}

#[test]
fn nearest_root_search_recovers_reference() {
    let (s, i) = nearest_phasematch(&fiber(), &p(C), 705.0, 797.0, 20.0, NonlinearPhase::None).unwrap();
    assert!((s - 795.39).abs() < 0.01 && (i - 633.06).abs() < 0.01);
}

fn mono_grid(center_signal_nm: f64, step: f64, points: usize, pump_nm: f64) -> JsaGrid {
    let ws = angular_frequency(center_signal_nm);
    let wi = 2.0 * angular_frequency(pump_nm) - ws;
    JsaGrid {
        signal: FrequencyAxis::centered(ws, step, points).unwrap(),
        idler: FrequencyAxis::centered(wi, step, points).unwrap(),
    }
}

#[test]
fn monochromatic_ridge_lies_on_energy_conservation() {
    let started = std::time::Instant::now();
    let pump = PumpEnvelope::monochromatic(705.0);
    let wp = pump.center_omega();
    let grid = mono_grid(795.0, 5e10, 201, 705.0);
    let spec = jsa(&p(C), &fiber(), &pump, &grid, NonlinearPhase::None).unwrap();
    assert!(!spec.misses_phasematching);
    let cell = grid.signal.step().max(grid.idler.step());
    let (ns, ni) = spec.shape();
    for i in 0..ns {
        for j in 0..ni {
            if spec.intensity_at(i, j) > 0.0 {
                assert!((spec.signal_omega[i] + spec.idler_omega[j] - 2.0 * wp).abs() <= cell);
            }
        }
    }
    // ridge maximum versus the pm_curve root
    let (i, j) = spec.argmax();
    let root = pm_roots(&fiber(), &p(C), 705.0, &PmSearch::default())
        .into_iter()
        .find(|r| r.signal_above_pump())
        .unwrap();
    assert!((spec.signal_omega[i] - angular_frequency(root.signal_wavelength_nm)).abs() <= grid.signal.step());
    assert!((spec.idler_omega[j] - angular_frequency(root.idler_wavelength_nm)).abs() <= grid.idler.step());
    assert!(started.elapsed().as_secs_f64() < 30.0);
}

fn fwhm(x: &[f64], y: &[f64]) -> f64 {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = ymax / 2.0;
    let crossing = |range: Box<dyn Iterator<Item = usize>>| {
        let mut prev = imax;
        for k in range {
            if y[k] < half {
                let t = (y[prev] - half) / (y[prev] - y[k]);
                return x[prev] + t * (x[k] - x[prev]);
            }
            prev = k;
        }
        panic!("no half-maximum crossing");
    };
    (crossing(Box::new(imax + 1..y.len())) - crossing(Box::new((0..imax).rev()))).abs()
}

#[test]
fn sinc_width_scales_inversely_with_length() {
    let pump = PumpEnvelope::monochromatic(705.0);
    let grid = mono_grid(795.39, 2e9, 801, 705.0);
    let short = fiber();
    let long = FiberParams { length_m: 2.0 * short.length_m, ..short };
    let w = |f: &FiberParams| {
        let spec = jsa(&p(C), f, &pump, &grid, NonlinearPhase::None).unwrap();
        fwhm(&spec.signal_omega, &spec.signal_marginal())
    };
    let ratio = w(&short) / w(&long);
    assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn gaussian_pump_jsi_peaks_at_phasematching() {
    let pump = PumpEnvelope::gaussian(705.0, 0.5).unwrap();
    let grid = JsaGrid {
        signal: FrequencyAxis::from_wavelengths(792.0, 799.0, 61).unwrap(),
        idler: FrequencyAxis::from_wavelengths(630.5, 635.5, 61).unwrap(),
    };
    let spec = jsa(&p(C), &fiber(), &pump, &grid, NonlinearPhase::None).unwrap();
    let (i, j) = spec.argmax();
    let sum = spec.signal_omega[i] + spec.idler_omega[j];
    // within the two-photon pump bandwidth of 2ω_p
    assert!((sum - 2.0 * pump.center_omega()).abs() < 2.0 * pump.sigma_omega());
    assert!((wavelength_nm(spec.signal_omega[i]) - 795.39).abs() < 0.5);
    let normalized = spec.normalized().unwrap();
    let total: f64 = normalized.intensity.iter().sum::<f64>() * normalized.cell_area();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn grid_far_from_phasematching_is_flagged() {
    let pump = PumpEnvelope::monochromatic(705.0);
    let grid = mono_grid(760.0, 5e10, 41, 705.0);
    let spec = jsa(&p(C), &fiber(), &pump, &grid, NonlinearPhase::None).unwrap();
    assert!(spec.misses_phasematching);
}

#[test]
fn three_process_state_has_disjoint_marginal_peaks() {
    let pump = PumpEnvelope::gaussian(705.0, 0.5).unwrap();
    let grid = JsaGrid {
        signal: FrequencyAxis::from_wavelengths(790.0, 826.0, 240).unwrap(),
        idler: FrequencyAxis::from_wavelengths(615.0, 636.0, 240).unwrap(),
    };
    let processes = [p(A), p(B), p(C)];
    let state = assemble_state(&processes, &fiber(), &pump, &grid, &[(0.05, 0.05); 3], &StateOptions::default()).unwrap();
    assert_eq!(state.components.len(), 3);
    // distinct pump modes carry the multiplicity factor
    let c = &state.components;
    assert!((c[0].weight / (2.0 * 0.05 * c[0].overlap) - 1.0).abs() < 1e-12);
    assert!((c[2].weight / (0.05 * c[2].overlap) - 1.0).abs() < 1e-12);
    let peaks: Vec<f64> = c
        .iter()
        .map(|comp| {
            let m = comp.spectrum.signal_marginal();
            let (k, _) = m.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            wavelength_nm(state.signal_omega[k])
        })
        .collect();
    assert!((peaks[0] - 821.14).abs() < 0.5 && (peaks[1] - 815.20).abs() < 0.5 && (peaks[2] - 795.39).abs() < 0.5, "{peaks:?}");
    // incoherent marginal: sum of weighted per-process marginals
    let recon: f64 = c
        .iter()
        .map(|comp| comp.weight * comp.weight * comp.spectrum.signal_marginal().iter().sum::<f64>())
        .sum();
    let total: f64 = state.signal_marginal.iter().sum();
    assert!(((recon - total) / total).abs() < 1e-12);
}

#[test]
fn antidiagonal_width_follows_pump_bandwidth() {
    // project the JSI onto ω_s + ω_i; the sinc factor integrates out along the difference
    let root = pm_roots(&fiber(), &p(C), 705.0, &PmSearch::default()).into_iter().find(|r| r.signal_above_pump()).unwrap();
    let step = 1e11;
    let grid = JsaGrid {
        signal: FrequencyAxis::centered(angular_frequency(root.signal_wavelength_nm), step, 201).unwrap(),
        idler: FrequencyAxis::centered(angular_frequency(root.idler_wavelength_nm), step, 201).unwrap(),
    };
    let sum_profile = |bw: f64| {
        let spec = jsa(&p(C), &fiber(), &PumpEnvelope::gaussian(705.0, bw).unwrap(), &grid, NonlinearPhase::None).unwrap();
        let (ns, ni) = spec.shape();
        let mut bins = vec![0.0; ns + ni - 1];
        for i in 0..ns {
            for j in 0..ni {
                bins[i + j] += spec.intensity_at(i, j);
            }
        }
        let x: Vec<f64> = (0..bins.len()).map(|k| k as f64 * step).collect();
        fwhm(&x, &bins)
    };
    let ratio = sum_profile(1.0) / sum_profile(0.5);
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
}
