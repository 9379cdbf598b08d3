//! Monte-Carlo trial orchestration: seeded sampling, both estimators,
//! excess-risk measurement, and deterministic result files.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::densities::{add_noise, DensityModel, NoiseModel};
use crate::erm::{self, CandidateNetwork};
use crate::error::{Error, Result};
use crate::fragments::{self, BoundaryFragment};
use crate::kernel::DeconvolutionKernel;
use crate::risk;
use crate::scalar::Real;

use super::config::ExperimentConfig;
use super::fit::{fit_rate, RateFit};

/// One Monte-Carlo trial outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub lambda: [f64; 2],
    pub seed: u64,
    pub estimator: String,
    pub excess_dfg: f64,
    pub excess_ddelta: f64,
    pub runtime_ms: u64,
}

pub const CSV_HEADER: &str = "n,m,lambda1,lambda2,seed,estimator,excess_dfg,excess_ddelta,runtime_ms";

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m,
            self.lambda[0],
            self.lambda[1],
            self.seed,
            self.estimator,
            self.excess_dfg,
            self.excess_ddelta,
            self.runtime_ms
        )
    }
}

/// SplitMix64 step, used to derive independent per-trial seeds from the
/// master seed by counter.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Prebuilt per-configuration state shared across trials.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub f: DensityModel<f64>,
    pub g: DensityModel<f64>,
    pub noise: NoiseModel<f64>,
    /// Reference Bayes boundary on a fine grid.
    pub bayes: BoundaryFragment<f64>,
}

impl Experiment {
    pub fn build(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let f = config.model.f.build()?;
        let g = config.model.g.build()?;
        let noise = config.noise_model()?;
        let bayes = fragments::bayes_set(&f, &g, 512)?;
        Ok(Experiment {
            config,
            f,
            g,
            noise,
            bayes,
        })
    }

    pub fn kernel_for(&self, n: usize) -> Result<DeconvolutionKernel<f64>> {
        let lambda = self.config.lambda(n)?;
        DeconvolutionKernel::build(
            self.config.base_kernel()?,
            self.noise.clone(),
            &lambda,
            self.config.grid_spec(),
        )
    }

    pub fn network_for(&self, n: usize) -> Result<CandidateNetwork<f64>> {
        CandidateNetwork::new(
            self.config.j_bins(n)?,
            self.config.class.v_levels,
            self.config.class.gamma,
            self.config.class.holder_l,
        )
    }

    /// Run one seeded trial; returns the deconvolution and naive records.
    pub fn run_trial(
        &self,
        kernel: &DeconvolutionKernel<f64>,
        network: &CandidateNetwork<f64>,
        n: usize,
        m: usize,
        seed: u64,
    ) -> Result<(TrialRecord, TrialRecord)> {
        let start = Instant::now();
        let s1 = self.f.sample(n, split_seed(seed, 1))?;
        let s2 = self.g.sample(m, split_seed(seed, 2))?.labeled(2);
        let z1 = add_noise(&s1, &self.noise, split_seed(seed, 3))?;
        let z2 = add_noise(&s2, &self.noise, split_seed(seed, 4))?;

        let deconv = erm::minimize(&z1, &z2, kernel, network)
            .map_err(|e| Error::Numeric(format!("trial seed {seed}, n {n}: {e}")))?;
        let t_deconv = start.elapsed().as_millis() as u64;

        let t2 = Instant::now();
        let naive = erm::naive_minimize(&z1, &z2, network)
            .map_err(|e| Error::Numeric(format!("trial seed {seed}, n {n}: {e}")))?;
        let t_naive = t2.elapsed().as_millis() as u64;

        let excess = |b: &BoundaryFragment<f64>| -> Result<(f64, f64)> {
            let bc = b.curve();
            let star = self.bayes.curve();
            let dfg = fragments::d_fg_curves(&self.f, &self.g, &bc, &star)?;
            let dd = fragments::d_delta_curves(&bc, &star)?;
            Ok((dfg, dd))
        };
        let (dfg_d, dd_d) = excess(&deconv.boundary)?;
        let (dfg_n, dd_n) = excess(&naive.boundary)?;
        let lambda = [kernel.lambda()[0].f64(), kernel.lambda()[1].f64()];
        Ok((
            TrialRecord {
                n,
                m,
                lambda,
                seed,
                estimator: "deconv".into(),
                excess_dfg: dfg_d,
                excess_ddelta: dd_d,
                runtime_ms: t_deconv,
            },
            TrialRecord {
                n,
                m,
                lambda,
                seed,
                estimator: "naive".into(),
                excess_dfg: dfg_n,
                excess_ddelta: dd_n,
                runtime_ms: t_naive,
            },
        ))
    }
}

/// Full simulation output.
pub struct SimulationOutput {
    pub records: Vec<TrialRecord>,
    pub summary: serde_json::Value,
}

/// Run the whole ladder with `replications` trials per rung on a bounded
/// worker pool. Records come back sorted by `(n, seed, estimator)` so the
/// statistical content of the output is reproducible bit for bit.
pub fn simulate(config: ExperimentConfig, workers: Option<usize>) -> Result<SimulationOutput> {
    let exp = Experiment::build(config)?;
    let reps = exp.config.replications;
    let master = exp.config.seed;

    // Kernels and networks are immutable and shared across the rung's trials.
    let mut shared = Vec::new();
    for &n in &exp.config.ladder {
        shared.push((n, exp.kernel_for(n)?, exp.network_for(n)?));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Configuration(format!("worker pool: {e}")))?;

    let mut tasks = Vec::new();
    for (idx, (n, _, _)) in shared.iter().enumerate() {
        for rep in 0..reps {
            let trial_index = (idx * reps + rep) as u64;
            tasks.push((idx, *n, split_seed(master, trial_index)));
        }
    }
    let results: Vec<Result<(TrialRecord, TrialRecord)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(idx, n, seed)| {
                let (_, kernel, network) = &shared[*idx];
                exp.run_trial(kernel, network, *n, *n, *seed)
            })
            .collect()
    });
    let mut records = Vec::with_capacity(results.len() * 2);
    for r in results {
        let (a, b) = r?;
        records.push(a);
        records.push(b);
    }
    records.sort_by(|a, b| {
        (a.n, a.seed, &a.estimator)
            .partial_cmp(&(b.n, b.seed, &b.estimator))
            .unwrap()
    });

    // Edge-mass diagnostic for the largest rung (kernel mass outside K).
    let (n_last, kernel_last, _) = shared.last().unwrap();
    let probe = exp.f.sample(*n_last.min(&500), split_seed(master, u64::MAX - 1))?;
    let probe_noisy = add_noise(&probe, &exp.noise, split_seed(master, u64::MAX - 2))?;
    let edge_mass = risk::mean_edge_mass(&probe_noisy, kernel_last)?;

    let summary = summarize(&exp, &records, edge_mass)?;
    Ok(SimulationOutput { records, summary })
}

fn summarize(
    exp: &Experiment,
    records: &[TrialRecord],
    edge_mass: f64,
) -> Result<serde_json::Value> {
    let mut per = serde_json::Map::new();
    for estimator in ["deconv", "naive"] {
        let subset: Vec<TrialRecord> = records
            .iter()
            .filter(|r| r.estimator == estimator)
            .cloned()
            .collect();
        let mut rows = Vec::new();
        for &n in &exp.config.ladder {
            let vals: Vec<f64> = subset
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.excess_dfg)
                .collect();
            let count = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / count;
            let se = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0) / count)
                    .sqrt()
            } else {
                0.0
            };
            rows.push(json!({ "n": n, "mean_excess_dfg": mean, "se": se, "count": vals.len() }));
        }
        let fit = if exp.config.ladder.len() >= 3 {
            fit_rate(&subset, |r| r.excess_dfg)
                .map(|f| json!({ "slope": f.slope, "stderr": f.stderr, "r2": f.r2 }))
                .unwrap_or(json!(null))
        } else {
            json!(null)
        };
        per.insert(
            estimator.to_string(),
            json!({ "ladder": rows, "fit_dfg": fit }),
        );
    }
    Ok(json!({
        "seed": exp.config.seed,
        "replications": exp.config.replications,
        "edge_mass_diagnostic": edge_mass,
        "estimators": per,
    }))
}

/// Write records as CSV with the pinned header and column order.
pub fn write_records_csv<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Read records back from CSV.
pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::InvalidInput(format!("bad csv: {e}")))?;
        if row.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "expected 9 columns, got {}",
                row.len()
            )));
        }
        let parse_f = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("column {i}: {e}")))
        };
        out.push(TrialRecord {
            n: row[0].parse().map_err(|e| Error::InvalidInput(format!("{e}")))?,
            m: row[1].parse().map_err(|e| Error::InvalidInput(format!("{e}")))?,
            lambda: [parse_f(2)?, parse_f(3)?],
            seed: row[4].parse().map_err(|e| Error::InvalidInput(format!("{e}")))?,
            estimator: row[5].to_string(),
            excess_dfg: parse_f(6)?,
            excess_ddelta: parse_f(7)?,
            runtime_ms: row[8].parse().map_err(|e| Error::InvalidInput(format!("{e}")))?,
        });
    }
    Ok(out)
}

/// Compare a fitted slope against a target exponent: the verdict string used
/// by the CLI report.
pub fn rate_verdict(fit: &RateFit, target_exponent: f64, tolerance: f64) -> (bool, String) {
    let expect = -target_exponent;
    let gap = (fit.slope - expect).abs();
    let ok = gap <= tolerance * target_exponent.abs();
    (
        ok,
        format!(
            "fitted slope {:.4} +- {:.4} vs expected {:.4} (|gap| {:.4}, tolerance {:.4}): {}",
            fit.slope,
            fit.stderr,
            expect,
            gap,
            tolerance * target_exponent.abs(),
            if ok { "PASS" } else { "FAIL" }
        ),
    )
}
