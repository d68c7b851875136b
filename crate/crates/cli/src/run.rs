//! Executing a validated plan and emitting its files.

use crate::config::{Mode, RunManifest, RunPlan, SeedSpec};
use crate::error::Result;
use crate::output;
use dirpart::init::Metric;
use dirpart::solver::{region_eigenvalues, EigenLevel, PartitionOutcome};
use dirpart::{
    eigen_solve, make_mask, relaxed_energy, solve, voronoi_init, DomainMask, HeatOperator,
    MultiField, Partition, ScalarField,
};
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Command-line overrides applied on top of a manifest.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the first seed; an explicit seed list becomes a count of the same length.
    pub seed: Option<u64>,
    /// Replaces the number of seeds.
    pub seeds: Option<usize>,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    /// Worker threads for independent seeds.
    pub jobs: usize,
}

impl RunOptions {
    pub fn apply(&self, manifest: &RunManifest) -> RunManifest {
        let mut m = manifest.clone();
        if let Some(seed) = self.seed {
            m.seed = seed;
            if let Some(SeedSpec::List(list)) = &m.seeds {
                m.seeds = Some(SeedSpec::Count(list.len()));
            }
        }
        if let Some(count) = self.seeds {
            m.seeds = Some(SeedSpec::Count(count));
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub total_energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionSummary {
    pub name: String,
    pub mode: &'static str,
    pub shape: String,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub variant: String,
    pub adaptive: bool,
    pub tau_schedule: Vec<f64>,
    /// Seed of the lowest-energy run, whose state the other fields describe.
    pub seed: u64,
    pub converged: bool,
    pub total_energy: f64,
    pub per_region: Vec<f64>,
    pub region_cells: Vec<usize>,
    pub iterations: usize,
    pub projections: usize,
    pub reseeds: usize,
    pub best_energy: f64,
    pub mean_energy: f64,
    pub all_converged: bool,
    pub seeds: Vec<SeedResult>,
    /// First eigenvalue of each final region, when `refine_tol` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_total: Option<f64>,
}

/// The best of several independently seeded runs.
#[derive(Debug, Clone)]
pub struct BestOf {
    pub best: PartitionOutcome,
    pub best_seed: u64,
    pub per_seed: Vec<SeedResult>,
}

impl BestOf {
    pub fn mean_energy(&self) -> f64 {
        self.per_seed.iter().map(|s| s.total_energy).sum::<f64>() / self.per_seed.len() as f64
    }
}

/// Runs one partition per seed on up to `jobs` threads and keeps the lowest final energy
/// (earliest seed on ties), so the choice does not depend on `jobs`.
pub fn best_of_seeds(plan: &RunPlan, mask: &DomainMask, k: usize, jobs: usize) -> Result<BestOf> {
    let metric = Metric::for_mask(mask);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SeedResult>>> = Mutex::new(vec![None; plan.seeds.len()]);
    let best: Mutex<Option<(f64, usize, PartitionOutcome)>> = Mutex::new(None);
    let failure: Mutex<Option<crate::error::CliError>> = Mutex::new(None);

    let worker = || loop {
        let pos = next.fetch_add(1, Ordering::SeqCst);
        if pos >= plan.seeds.len() || failure.lock().unwrap().is_some() {
            break;
        }
        let seed = plan.seeds[pos];
        let start = Instant::now();
        let attempt = voronoi_init(k, mask, seed, metric).and_then(|u0| {
            let cfg = dirpart::SolverConfig {
                rng_seed: seed,
                ..plan.solver.clone()
            };
            solve(&cfg, mask, &u0)
        });
        match attempt {
            Ok(outcome) => {
                let e = outcome.energy.total;
                results.lock().unwrap()[pos] = Some(SeedResult {
                    seed,
                    total_energy: e,
                    converged: outcome.converged,
                    iterations: outcome.iterations(),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
                let mut b = best.lock().unwrap();
                let better = match &*b {
                    None => true,
                    Some((be, bp, _)) => e < *be || (e == *be && pos < *bp),
                };
                if better {
                    *b = Some((e, pos, outcome));
                }
            }
            Err(err) => {
                failure.lock().unwrap().get_or_insert(err.into());
            }
        }
    };
    std::thread::scope(|s| {
        for _ in 1..jobs.max(1).min(plan.seeds.len()) {
            s.spawn(worker);
        }
        worker();
    });
    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    let (_, pos, best) = best.into_inner().unwrap().expect("at least one seed");
    Ok(BestOf {
        best,
        best_seed: plan.seeds[pos],
        per_seed: results.into_inner().unwrap().into_iter().map(Option::unwrap).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub tau: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub outside_mass: f64,
    pub converged: bool,
}

impl From<&EigenLevel> for LevelRow {
    fn from(l: &EigenLevel) -> Self {
        Self {
            tau: l.tau,
            lambda: l.lambda,
            iterations: l.iterations,
            outside_mass: l.outside_mass,
            converged: l.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub tol: f64,
    pub lambda: f64,
    pub tau_final: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    pub levels: Vec<LevelRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub name: String,
    pub mode: &'static str,
    pub shape: String,
    pub dim: usize,
    pub n: usize,
    pub size: f64,
    pub converged: bool,
    pub results: Vec<EigenResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationRow {
    pub tau: f64,
    pub energy: f64,
    /// `(1 − e^{−2τ})/τ`, exact for the smooth eigenfunction.
    pub analytic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationSummary {
    pub name: String,
    pub mode: &'static str,
    pub n: usize,
    pub results: Vec<RelaxationRow>,
}

/// Result of a manifest run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub converged: bool,
    pub summary: serde_json::Value,
    pub out_dir: Option<PathBuf>,
}

/// Validates `manifest` (after overrides) and executes it.
pub fn run_manifest(manifest: &RunManifest, opts: &RunOptions) -> Result<RunReport> {
    let plan = opts.apply(manifest).validate()?;
    let mask = make_mask(plan.grid, plan.shape, plan.params)?;
    let out = opts.out.as_deref();
    match plan.mode {
        Mode::Partition => run_partitions(&plan, &mask, out, opts.jobs),
        Mode::Eigen => run_eigen(&plan, &mask, out),
        Mode::Relaxation => run_relaxation(&plan, &mask, out),
    }
}

fn run_partitions(plan: &RunPlan, mask: &DomainMask, out: Option<&Path>, jobs: usize) -> Result<RunReport> {
    let mut summaries = Vec::new();
    for &k in &plan.ks {
        let result = best_of_seeds(plan, mask, k, jobs)?;
        let o = &result.best;
        let refined = match &plan.refine {
            Some(cfg) => Some(
                region_eigenvalues(&o.partition, cfg)?
                    .iter()
                    .map(|e| e.lambda)
                    .collect::<Vec<f64>>(),
            ),
            None => None,
        };
        let summary = PartitionSummary {
            name: plan.name.clone(),
            mode: "partition",
            shape: plan.shape.to_string(),
            dim: plan.grid.dim(),
            n: plan.grid.n(),
            k,
            variant: plan.solver.variant.to_string(),
            adaptive: plan.solver.adaptive,
            tau_schedule: o.tau_schedule.clone(),
            seed: result.best_seed,
            converged: o.converged,
            total_energy: o.energy.total,
            per_region: o.energy.per_region.clone(),
            region_cells: o.partition.region_sizes(),
            iterations: o.iterations(),
            projections: o.trace.projections(),
            reseeds: o.reseeds,
            best_energy: o.energy.total,
            mean_energy: result.mean_energy(),
            all_converged: result.per_seed.iter().all(|s| s.converged),
            seeds: result.per_seed.clone(),
            refined_total: refined.as_ref().map(|r| r.iter().sum()),
            refined_eigenvalues: refined,
        };
        if let Some(dir) = out {
            let dir = if plan.ks.len() > 1 { dir.join(format!("k{k}")) } else { dir.to_path_buf() };
            write_partition(&dir, &o.partition, plan.overlay)?;
            output::write_file(&dir.join("trace.csv"), output::trace_csv(&o.trace).as_bytes())?;
            output::write_json(&dir.join("summary.json"), &summary)?;
        }
        summaries.push(summary);
    }
    let converged = summaries.iter().all(|s| s.all_converged);
    let summary = if summaries.len() == 1 {
        serde_json::to_value(&summaries[0])?
    } else {
        let v = serde_json::json!({ "name": plan.name, "mode": "partition", "runs": summaries });
        if let Some(dir) = out {
            output::write_json(&dir.join("summary.json"), &v)?;
        }
        v
    };
    Ok(RunReport {
        converged,
        summary,
        out_dir: out.map(Path::to_path_buf),
    })
}

fn write_partition(dir: &Path, phi: &Partition, overlay: bool) -> Result<()> {
    if phi.spec().dim() == 2 {
        output::write_file(&dir.join("labels.pgm"), &output::pgm_bytes(phi)?)?;
        if overlay {
            output::write_file(&dir.join("overlay.ppm"), &output::overlay_ppm_bytes(phi)?)?;
        }
    } else {
        let (raw, meta) = output::raw_bytes(phi)?;
        output::write_file(&dir.join("labels.raw"), &raw)?;
        output::write_file(&dir.join("labels.meta.json"), meta.as_bytes())?;
    }
    Ok(())
}

fn run_eigen(plan: &RunPlan, mask: &DomainMask, out: Option<&Path>) -> Result<RunReport> {
    let mut results = Vec::new();
    let mut last = None;
    for cfg in &plan.eigen {
        let start = Instant::now();
        let o = eigen_solve(mask, cfg)?;
        results.push(EigenResult {
            tol: cfg.tol,
            lambda: o.lambda,
            tau_final: o.tau_final,
            iterations: o.iterations(),
            converged: o.converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            levels: o.levels.iter().map(LevelRow::from).collect(),
        });
        last = Some(o);
    }
    let summary = EigenSummary {
        name: plan.name.clone(),
        mode: "eigen",
        shape: plan.shape.to_string(),
        dim: plan.grid.dim(),
        n: plan.grid.n(),
        size: mask.size(),
        converged: results.iter().all(|r| r.converged),
        results,
    };
    if let (Some(dir), Some(o)) = (out, last) {
        if plan.grid.dim() == 2 {
            output::write_file(&dir.join("eigenfunction.pgm"), &output::field_pgm_bytes(&o.u)?)?;
        }
        let mut csv = String::from("iter,tau,energy,changed_cells,wall_ms\n");
        let mut iter = 0;
        for l in &o.levels {
            iter += l.iterations;
            csv += &format!("{iter},{},{},0,0\n", l.tau, l.lambda);
        }
        output::write_file(&dir.join("trace.csv"), csv.as_bytes())?;
        output::write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunReport {
        converged: summary.converged,
        summary: serde_json::to_value(&summary)?,
        out_dir: out.map(Path::to_path_buf),
    })
}

/// Periodic first eigenfunction of the square `[-π/2, π/2]²`, `(2/π) cos x cos y`.
pub fn square_eigenfunction(grid: dirpart::GridSpec) -> ScalarField {
    ScalarField::from_fn(grid, |p| 2.0 / PI * p[0].cos() * p[1].cos())
}

fn run_relaxation(plan: &RunPlan, mask: &DomainMask, out: Option<&Path>) -> Result<RunReport> {
    let u = MultiField::new(vec![square_eigenfunction(plan.grid)])?;
    let phi = Partition::single(mask, 1)?;
    let mut results = Vec::new();
    for &tau in &plan.taus {
        let op = HeatOperator::new(plan.grid, tau)?;
        results.push(RelaxationRow {
            tau,
            energy: relaxed_energy(&phi, &u, &op)?.total,
            analytic: (1.0 - (-2.0 * tau).exp()) / tau,
        });
    }
    let summary = RelaxationSummary {
        name: plan.name.clone(),
        mode: "relaxation",
        n: plan.grid.n(),
        results,
    };
    if let Some(dir) = out {
        output::write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunReport {
        converged: true,
        summary: serde_json::to_value(&summary)?,
        out_dir: out.map(Path::to_path_buf),
    })
}
