//! Repeated releases over an (ε, ρ) grid, scored by fidelity.

use std::io::Write;

use cathist::numerics::derive_seed;
use cathist::{cat_hist, fidelity, CatHistConfig, DomainSampler, Histogram, PrivacyParams, TrialsConvention};
use rayon::prelude::*;

pub const CSV_HEADER: [&str; 8] =
    ["epsilon", "rho", "mean_f", "stddev_f", "mean_injected", "mean_surviving", "repetitions", "status"];

/// Axis values used when none are given.
pub const DEFAULT_EPSILONS: [f64; 3] = [0.01, 0.1, 1.0];
pub const DEFAULT_RHOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub rhos: Vec<f64>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub trials: TrialsConvention,
    pub allow_out_of_domain_active: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl SweepConfig {
    pub fn new(base_seed: u64) -> Self {
        SweepConfig {
            epsilons: DEFAULT_EPSILONS.to_vec(),
            rhos: DEFAULT_RHOS.to_vec(),
            repetitions: 100,
            base_seed,
            trials: TrialsConvention::FullN,
            allow_out_of_domain_active: false,
            jobs: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub mean_f: f64,
    pub stddev_f: f64,
    pub mean_injected: f64,
    pub mean_surviving: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub rho: f64,
    pub repetitions: u32,
    /// `Err` carries why the cell failed the τ validity gate.
    pub outcome: Result<CellStats, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn cell(&self, epsilon: f64, rho: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.epsilon == epsilon && r.rho == rho)
    }

    pub fn invalid(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.outcome.is_err())
    }
}

/// Seed of one repetition, a function of the cell's coordinates only.
pub fn repetition_seed(base_seed: u64, epsilon: f64, rho: f64, rep: u32) -> u64 {
    derive_seed(base_seed, &[epsilon.to_bits(), rho.to_bits(), u64::from(rep)])
}

fn sorted_axis(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn run_cell(
    config: &SweepConfig,
    domain: &DomainSampler,
    truth: &Histogram,
    params: PrivacyParams,
) -> cathist::Result<CellStats> {
    let reps = config.repetitions.max(1);
    let mut fs = Vec::with_capacity(reps as usize);
    let mut injected = 0usize;
    let mut surviving = 0usize;
    for rep in 0..reps {
        let seed = repetition_seed(config.base_seed, params.epsilon(), params.rho(), rep);
        let release_config = CatHistConfig::new(params, seed)
            .with_trials(config.trials)
            .allow_out_of_domain_active(config.allow_out_of_domain_active);
        let released = cat_hist(&release_config, domain, truth)?;
        fs.push(fidelity(truth, &released)?.value);
        injected += released.injected_count();
        surviving += released.active_count();
    }
    let n = f64::from(reps);
    let mean_f = fs.iter().sum::<f64>() / n;
    let stddev_f =
        if reps > 1 { (fs.iter().map(|f| (f - mean_f).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Ok(CellStats { mean_f, stddev_f, mean_injected: injected as f64 / n, mean_surviving: surviving as f64 / n })
}

/// Runs every grid cell. Cells whose τ is undefined for this domain size are
/// kept as invalid rows; any other failure aborts the sweep.
///
/// Output is independent of `jobs`: each repetition's seed comes from its
/// (ε, ρ, repetition) coordinates and rows are reassembled in grid order.
pub fn run_sweep(config: &SweepConfig, domain: &DomainSampler, truth: &Histogram) -> cathist::Result<SweepResult> {
    let n = domain.size();
    let mut cells = Vec::new();
    for &epsilon in &sorted_axis(&config.epsilons) {
        for &rho in &sorted_axis(&config.rhos) {
            cells.push((epsilon, rho));
        }
    }

    let evaluate = |&(epsilon, rho): &(f64, f64)| -> cathist::Result<SweepRow> {
        let params = PrivacyParams::new(epsilon, rho)?;
        let outcome = match params.tau(n) {
            Ok(_) => Ok(run_cell(config, domain, truth, params)?),
            Err(e) if e.is_validity() => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        Ok(SweepRow { epsilon, rho, repetitions: config.repetitions, outcome })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| cathist::Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(evaluate).collect::<cathist::Result<Vec<_>>>())?;
    Ok(SweepResult { rows })
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &result.rows {
        let (stats, status) = match &row.outcome {
            Ok(s) => (
                [s.mean_f.to_string(), s.stddev_f.to_string(), s.mean_injected.to_string(), s.mean_surviving.to_string()],
                "ok",
            ),
            Err(_) => (Default::default(), "invalid"),
        };
        let [mean_f, stddev_f, mean_injected, mean_surviving] = stats;
        w.write_record([
            row.epsilon.to_string(),
            row.rho.to_string(),
            mean_f,
            stddev_f,
            mean_injected,
            mean_surviving,
            row.repetitions.to_string(),
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use cathist::DomainSpec;

    use super::*;

    fn setup() -> (DomainSampler, Histogram) {
        let domain = DomainSampler::load(DomainSpec::size_only(1000, "v")).unwrap();
        let truth = Histogram::from_counts([("v-1", 500.0), ("v-2", 200.0), ("v-3", 8.0)]).unwrap();
        (domain, truth)
    }

    #[test]
    fn rows_follow_sorted_grid_and_flag_invalid_cells() {
        let (_, truth) = setup();
        let tiny = DomainSampler::load(DomainSpec::size_only(1, "v")).unwrap();
        let mut config = SweepConfig::new(1);
        config.epsilons = vec![1.0, 0.1];
        config.rhos = vec![0.9, 0.2, 0.9];
        config.repetitions = 5;
        config.allow_out_of_domain_active = true;
        let result = run_sweep(&config, &tiny, &truth).unwrap();
        let grid: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.epsilon, r.rho)).collect();
        assert_eq!(grid, [(0.1, 0.2), (0.1, 0.9), (1.0, 0.2), (1.0, 0.9)]);
        // ρ = 0.2 with n = 1 violates ρ^(1/n) ≥ ½
        assert_eq!(result.invalid().count(), 2);
        assert!(result.cell(1.0, 0.2).unwrap().outcome.as_ref().unwrap_err().contains("tau undefined"));
        assert!(result.cell(1.0, 0.9).unwrap().outcome.is_ok());

        let mut out = Vec::new();
        write_sweep_csv(&result, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,rho,mean_f,stddev_f,mean_injected,mean_surviving,repetitions,status");
        assert_eq!(lines[1], "0.1,0.2,,,,,5,invalid");
        assert!(lines[2].ends_with(",5,ok"));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let (domain, truth) = setup();
        let mut config = SweepConfig::new(42);
        config.repetitions = 20;
        config.jobs = 1;
        let serial = run_sweep(&config, &domain, &truth).unwrap();
        config.jobs = 4;
        assert_eq!(run_sweep(&config, &domain, &truth).unwrap(), serial);
        assert!(serial.rows.iter().all(|r| {
            let s = r.outcome.as_ref().unwrap();
            (0.0..=1.0).contains(&s.mean_f)
        }));
    }

    #[test]
    fn adding_grid_points_keeps_existing_cells() {
        let (domain, truth) = setup();
        let mut config = SweepConfig::new(3);
        config.repetitions = 10;
        config.epsilons = vec![1.0];
        config.rhos = vec![0.5];
        let small = run_sweep(&config, &domain, &truth).unwrap();
        config.epsilons = vec![0.5, 1.0];
        config.rhos = vec![0.3, 0.5, 0.8];
        let big = run_sweep(&config, &domain, &truth).unwrap();
        assert_eq!(big.cell(1.0, 0.5), small.cell(1.0, 0.5));
    }

    #[test]
    fn out_of_domain_truth_aborts() {
        let (domain, _) = setup();
        let truth = Histogram::from_counts([("Male", 5.0)]).unwrap();
        let mut config = SweepConfig::new(0);
        config.repetitions = 1;
        assert!(matches!(run_sweep(&config, &domain, &truth), Err(cathist::Error::OutOfDomain(_))));
    }
}
