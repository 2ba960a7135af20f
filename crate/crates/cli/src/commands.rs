//! Implementations of the CLI subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_bigint::BigUint;
use serde::Serialize;

use triband_core::enumeration::Enumerator;
use triband_core::io::{read_scene_csv, read_sensor_csv, synthetic_rgb_sensor};
use triband_core::{
    block_diag_factor, build_design_matrix, check_feasibility, conditioning, count_feasible,
    count_minimum, monte_carlo_snr, optimize, simulate_exact, solve_per_block, stack_system,
    worst_case_snr_demo, Allocation, ConditioningReport, DesignMatrix, FilterSpec, IndexTable,
    LeastSquares, NoiseModel, OptimizeOptions, RankedAllocation, RankingResult, SceneSpectrum,
    SearchSpaceSpec, SensorModel, SnrSummary, SpectralCurve, WavelengthSet,
};

use crate::config::{RunConfig, BUILTIN_SENSOR};
use crate::error::CliError;

pub const RANKING_FILE: &str = "ranking.json";
pub const KAPPA_CSV_FILE: &str = "kappas.csv";
pub const SIMULATION_FILE: &str = "simulation.json";

fn spec_of(cfg: &RunConfig) -> Result<SearchSpaceSpec, CliError> {
    cfg.validate()?;
    Ok(SearchSpaceSpec::new(cfg.p(), cfg.k, cfg.n_cam)?)
}

/// Exact number of feasible allocations. In the minimum case the closed form
/// is cross-checked against the inclusion–exclusion sum.
pub fn count(cfg: &RunConfig) -> Result<BigUint, CliError> {
    let spec = spec_of(cfg)?;
    let n = count_feasible(&spec);
    if spec.is_minimum_case() {
        let closed = count_minimum(&spec)?;
        assert_eq!(closed, n, "counting formulas disagree");
    }
    Ok(n)
}

pub fn load_sensor(cfg: &RunConfig) -> Result<SensorModel, CliError> {
    let raw = if cfg.sensor_file == BUILTIN_SENSOR {
        synthetic_rgb_sensor()
    } else {
        read_sensor_csv(&cfg.sensor_file)?
    };
    Ok(raw.normalized()?)
}

/// Normalized sensor, targets and design matrix for a config.
pub fn load_design(
    cfg: &RunConfig,
) -> Result<(SensorModel, WavelengthSet, DesignMatrix), CliError> {
    cfg.validate()?;
    let sensor = load_sensor(cfg)?;
    let targets = WavelengthSet::new(cfg.targets_nm.clone())?;
    let d = build_design_matrix(&sensor, &targets, cfg.fwhm_nm, cfg.peak_transmittance)?;
    Ok((sensor, targets, d))
}

/// The design matrix as CSV: one row per channel, one column per target.
pub fn matrix(cfg: &RunConfig) -> Result<String, CliError> {
    let (sensor, targets, d) = load_design(cfg)?;
    let mut out = String::from("channel");
    for w in targets.as_slice() {
        write!(out, ",{w}").expect("write to string");
    }
    out.push('\n');
    for (c, name) in sensor.channel_names().iter().enumerate() {
        out.push_str(name);
        for i in 0..d.p() {
            write!(out, ",{}", d.entries()[(c, i)]).expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpaceEcho {
    pub p: usize,
    pub k: usize,
    pub n_cam: usize,
    pub minimum_case: bool,
    pub feasible_allocations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingEntry {
    /// 1-based row of the index table.
    pub index: u64,
    /// 1-based target indices per filter.
    pub indices: Vec<Vec<usize>>,
    pub wavelengths_nm: Vec<Vec<f64>>,
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub snr_worst_factor: f64,
    pub frame_lower: f64,
    pub frame_upper: f64,
}

impl RankingEntry {
    fn new(r: &RankedAllocation, targets: &WavelengthSet) -> Self {
        Self {
            index: r.rank + 1,
            indices: r
                .allocation
                .subsets()
                .iter()
                .map(|s| s.iter().map(|i| i + 1).collect())
                .collect(),
            wavelengths_nm: r.allocation.wavelengths_nm(targets),
            kappa: r.report.kappa,
            sigma_max: r.report.sigma_max,
            sigma_min: r.report.sigma_min,
            snr_worst_factor: r.report.snr_worst_factor,
            frame_lower: r.report.frame_lower,
            frame_upper: r.report.frame_upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub config: RunConfig,
    pub search_space: SearchSpaceEcho,
    pub targets_nm: Vec<f64>,
    /// Targets whose band lost more than 1% of its mass off the sensor grid.
    pub truncated_targets_nm: Vec<f64>,
    pub evaluated_count: u64,
    pub infeasible_rank_count: u64,
    pub best: RankingEntry,
    pub top_m: Vec<RankingEntry>,
}

pub struct OptimizeOutput {
    pub report: RankingReport,
    pub ranking: RankingResult,
    pub json_path: PathBuf,
    pub csv_path: Option<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn run_search(
    cfg: &RunConfig,
    d: &DesignMatrix,
    threads: Option<usize>,
    record_all: bool,
) -> Result<(SearchSpaceSpec, RankingResult), CliError> {
    let spec = spec_of(cfg)?;
    let opts = OptimizeOptions {
        top_m: cfg.top_m.max(1),
        threads,
        chunks: 0,
        record_all,
    };
    let ranking = optimize(std::slice::from_ref(d), &spec, &opts)?;
    Ok((spec, ranking))
}

/// Exhaustive search; writes `ranking.json` and optionally `kappas.csv` into
/// the output directory.
pub fn optimize_cmd(
    cfg: &RunConfig,
    threads: Option<usize>,
    kappa_csv: bool,
) -> Result<OptimizeOutput, CliError> {
    let (_, targets, d) = load_design(cfg)?;
    let (spec, ranking) = run_search(cfg, &d, threads, kappa_csv)?;
    let report = RankingReport {
        config: cfg.clone(),
        search_space: SearchSpaceEcho {
            p: spec.p,
            k: spec.k,
            n_cam: spec.n_cam,
            minimum_case: spec.is_minimum_case(),
            feasible_allocations: ranking.evaluated_count,
        },
        targets_nm: targets.as_slice().to_vec(),
        truncated_targets_nm: d
            .truncated_columns()
            .iter()
            .map(|&i| targets.as_slice()[i])
            .collect(),
        evaluated_count: ranking.evaluated_count,
        infeasible_rank_count: ranking.infeasible_rank_count,
        best: RankingEntry::new(&ranking.best, &targets),
        top_m: ranking
            .top_m
            .iter()
            .map(|r| RankingEntry::new(r, &targets))
            .collect(),
    };
    let dir = cfg.output_dir();
    let json_path = dir.join(RANKING_FILE);
    write_file(&json_path, &to_json(&report))?;
    let csv_path = match &ranking.kappas {
        Some(kappas) => {
            let mut csv = String::from("index,kappa\n");
            for (i, k) in kappas.iter().enumerate() {
                writeln!(csv, "{},{:.16e}", i + 1, k).expect("write to string");
            }
            let path = dir.join(KAPPA_CSV_FILE);
            write_file(&path, &csv)?;
            Some(path)
        }
        None => None,
    };
    Ok(OptimizeOutput {
        report,
        ranking,
        json_path,
        csv_path,
    })
}

/// Which allocation `simulate` runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AllocationChoice {
    /// The minimiser of kappa.
    Best,
    /// The feasible allocation with the largest kappa.
    Worst,
    /// 1-based indices, one list per camera.
    Explicit(Vec<Vec<usize>>),
}

impl std::str::FromStr for AllocationChoice {
    type Err = CliError;

    /// `best`, `worst`, or `1,8,11;2,5,10;...` (1-based target indices,
    /// cameras separated by `;`).
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "best" => Ok(Self::Best),
            "worst" => Ok(Self::Worst),
            other => other
                .split(';')
                .map(|cam| {
                    cam.split(',')
                        .map(|i| {
                            i.trim().parse::<usize>().map_err(|_| {
                                CliError::Config(format!("bad allocation index `{i}` in `{s}`"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Self::Explicit),
        }
    }
}

fn select_allocation(
    cfg: &RunConfig,
    d: &DesignMatrix,
    choice: &AllocationChoice,
    threads: Option<usize>,
) -> Result<(Allocation, Option<u64>), CliError> {
    match choice {
        AllocationChoice::Best => {
            let (_, r) = run_search(cfg, d, threads, false)?;
            Ok((r.best.allocation, Some(r.best.rank)))
        }
        AllocationChoice::Worst => {
            let (spec, r) = run_search(cfg, d, threads, true)?;
            let kappas = r.kappas.expect("requested all kappas");
            let (rank, _) = kappas
                .iter()
                .enumerate()
                .filter(|(_, k)| k.is_finite())
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &k)| {
                        if k > acc.1 {
                            (i, k)
                        } else {
                            acc
                        }
                    },
                );
            let alloc = Enumerator::new(spec)?
                .unrank(rank as u64)
                .expect("rank within range");
            Ok((alloc, Some(rank as u64)))
        }
        AllocationChoice::Explicit(subsets) => {
            let alloc = Allocation::from_one_based(subsets)?;
            if alloc.n_cam() != cfg.n_cam || alloc.k() != cfg.k {
                return Err(CliError::Infeasible(format!(
                    "allocation has {} filters of {} bands, config asks for n_cam = {}, k = {}",
                    alloc.n_cam(),
                    alloc.k(),
                    cfg.n_cam,
                    cfg.k
                )));
            }
            let spec = spec_of(cfg)?;
            let rank = Enumerator::new(spec).ok().and_then(|mut e| e.rank(&alloc));
            Ok((alloc.canonical(), rank))
        }
    }
}

/// Smooth positive test spectrum used when the config names no scene.
pub fn default_scene(sensor: &SensorModel) -> SceneSpectrum {
    let grid = sensor.wavelengths_nm().to_vec();
    let lo = sensor.min_nm();
    let values = grid
        .iter()
        .map(|&w| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * (w - lo) / 300.0).sin())
        .collect();
    SceneSpectrum::new(SpectralCurve::new("synthetic-scene", grid, values).expect("valid scene"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub wavelength_nm: f64,
    pub x_true: f64,
    /// Reconstruction of the first (seeded) trial.
    pub x_hat: f64,
    pub relative_error: f64,
    /// RMS error over all trials divided by `x_true`.
    pub relative_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEcho {
    pub index: Option<u64>,
    pub indices: Vec<Vec<usize>>,
    pub wavelengths_nm: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    pub conditioning: ConditioningReport,
    pub solver: triband_core::SolveMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: RunConfig,
    pub seed: u64,
    pub system: SystemEcho,
    pub noise: NoiseModel,
    pub scene: String,
    pub snr: SnrSummary,
    /// Predicted and constructed worst-case SNR degradation.
    pub worst_case: triband_core::SnrDemo,
    pub bands: Vec<BandResult>,
    /// Relative gap between the exact overlap-integral measurements and the
    /// narrowband mixing model; absent when the scene does not span the
    /// sensor range.
    pub narrowband_gap: Option<f64>,
    /// Largest difference between per-camera and global solutions (minimum
    /// case only).
    pub per_block_max_diff: Option<f64>,
}

pub struct SimulateOutput {
    pub report: SimulationReport,
    pub json_path: PathBuf,
}

pub fn simulate_cmd(
    cfg: &RunConfig,
    choice: &AllocationChoice,
    threads: Option<usize>,
) -> Result<SimulateOutput, CliError> {
    let (sensor, targets, d) = load_design(cfg)?;
    let (alloc, index) = select_allocation(cfg, &d, choice, threads)?;
    let system = stack_system(std::slice::from_ref(&d), &alloc)?;
    let feas = check_feasibility(&alloc, system.entries());
    if !feas.is_feasible() {
        return Err(CliError::Infeasible(format!(
            "allocation {alloc} violates {}",
            feas.violations().join(", ")
        )));
    }
    let report = conditioning(&system);

    let (scene, scene_name) = match &cfg.scene_file {
        Some(path) => (read_scene_csv(path)?, path.clone()),
        None => (default_scene(&sensor), "synthetic-scene".to_owned()),
    };
    let x_true = scene.sample_targets(targets.as_slice())?;
    let noise = NoiseModel::from_sigma(cfg.noise_sigma, cfg.seed)?;
    let snr = monte_carlo_snr(&system, &x_true, &noise, cfg.trials)?;

    let solver = LeastSquares::new(&system)?;
    let y0 = system.entries() * &x_true + noise.for_trial(0).sample(system.nrows());
    let first = solver.solve(&y0)?;
    let bands = (0..targets.len())
        .map(|i| {
            let truth = x_true[i];
            BandResult {
                wavelength_nm: targets.as_slice()[i],
                x_true: truth,
                x_hat: first.x_hat[i],
                relative_error: (first.x_hat[i] - truth).abs() / truth.abs(),
                relative_rmse: snr.per_band_rmse[i] / truth.abs(),
            }
        })
        .collect();

    let narrowband_gap = narrowband_gap(&scene, &sensor, &targets, cfg, &alloc, &system, &x_true);
    let per_block_max_diff = match block_diag_factor(&system) {
        Ok((b, p)) => {
            let y = system.entries() * &x_true;
            let blockwise = solve_per_block(&b, &p, &y)?;
            let global = solver.solve(&y)?;
            Some((blockwise.x_hat - global.x_hat).amax())
        }
        Err(_) => None,
    };
    let demo_sigma = if cfg.noise_sigma > 0.0 {
        cfg.noise_sigma
    } else {
        1.0
    };
    let worst_case = worst_case_snr_demo(&system, demo_sigma)?;

    let sim = SimulationReport {
        config: cfg.clone(),
        seed: cfg.seed,
        system: SystemEcho {
            index: index.map(|r| r + 1),
            indices: alloc
                .subsets()
                .iter()
                .map(|s| s.iter().map(|i| i + 1).collect())
                .collect(),
            wavelengths_nm: alloc.wavelengths_nm(&targets),
            rows: system.nrows(),
            cols: system.ncols(),
            conditioning: report,
            solver: solver.method(),
        },
        noise,
        scene: scene_name,
        snr,
        worst_case,
        bands,
        narrowband_gap,
        per_block_max_diff,
    };
    let json_path = cfg.output_dir().join(SIMULATION_FILE);
    write_file(&json_path, &to_json(&sim))?;
    Ok(SimulateOutput {
        report: sim,
        json_path,
    })
}

fn narrowband_gap(
    scene: &SceneSpectrum,
    sensor: &SensorModel,
    targets: &WavelengthSet,
    cfg: &RunConfig,
    alloc: &Allocation,
    system: &triband_core::SystemMatrix,
    x_true: &DVector<f64>,
) -> Option<f64> {
    let mut exact = Vec::with_capacity(system.nrows());
    for subset in alloc.subsets() {
        let centers: Vec<f64> = subset.iter().map(|&i| targets.as_slice()[i]).collect();
        let filter = FilterSpec::uniform(&centers, cfg.fwhm_nm, cfg.peak_transmittance).ok()?;
        exact.extend(simulate_exact(scene, sensor, &filter).ok()?.iter().copied());
    }
    let exact = DVector::from_vec(exact);
    let mixed = system.entries() * x_true;
    Some((&exact - mixed).norm() / exact.norm())
}

/// Writes the index table to `path`, or with `validate` loads and checks an
/// existing one. Returns the number of rows.
pub fn table_cmd(cfg: &RunConfig, path: &Path, validate: bool) -> Result<usize, CliError> {
    let spec = spec_of(cfg)?;
    if validate {
        return Ok(IndexTable::load(path, &spec)?.len());
    }
    let table = triband_core::build_index_table(&spec)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    table.save(path)?;
    Ok(table.len())
}
