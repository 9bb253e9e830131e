//! The six `etcd` commands. Each reads a [`BenchmarkConfig`], writes CSV files
//! and a manifest into the output directory, and returns a printable summary.

use etcd_core::data::{self, DataMatrices};
use etcd_core::ets::{
    decrease_violations, lyapunov_decrease_report, replay_decisions, simulate_closed_loop, EtsConfig, SimulationLog,
    TriggerParams, CONVERGENCE_FLOOR,
};
use etcd_core::lmi::recover::{codesign, Design};
use etcd_core::lmi::solver::{ClarabelBackend, DesignResult};
use etcd_core::lmi::theorems::{assemble_theorem2, assemble_theorem3, GainPattern, LmiProblem};
use etcd_core::network::NetworkSystem;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{BenchmarkConfig, DesignMode, Variant};
use crate::error::BenchError;
use crate::io::{self, Manifest, OutDir};

/// A solved co-design problem.
#[derive(Debug, Clone)]
pub struct DesignRun {
    pub problem: LmiProblem,
    pub result: DesignResult,
    pub design: Design,
}

/// Summary of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub counts: Vec<usize>,
    pub total: usize,
    pub settling: Option<usize>,
}

impl RunSummary {
    pub fn of(log: &SimulationLog, fraction: f64) -> Self {
        Self { counts: log.transmission_counts(), total: log.total_transmissions(), settling: log.settling_time(fraction) }
    }

    fn settling_cell(&self) -> String {
        self.settling.map_or_else(|| "none".into(), |t| t.to_string())
    }

    fn cells(&self) -> Vec<String> {
        let mut row: Vec<String> = self.counts.iter().map(usize::to_string).collect();
        row.push(self.total.to_string());
        row.push(self.settling_cell());
        row
    }
}

fn count_header(n_agents: usize, first: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.extend((1..=n_agents).map(|i| format!("agent{i}")));
    h.push("total".into());
    h.push("settling".into());
    h
}

fn header_refs(h: &[String]) -> Vec<&str> {
    h.iter().map(String::as_str).collect()
}

/// A loaded configuration bound to its network and output directory.
pub struct Bench {
    pub config: BenchmarkConfig,
    pub system: NetworkSystem,
    pub out: OutDir,
    pub backend: ClarabelBackend,
}

impl Bench {
    pub fn new(config: BenchmarkConfig, out: &std::path::Path) -> Result<Self, BenchError> {
        let system = config.network()?;
        Ok(Self { config, system, out: OutDir::create(out)?, backend: ClarabelBackend::default() })
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, &self.config)
    }

    pub fn generate_data(&self) -> Result<DataMatrices, BenchError> {
        let ecfg = self.config.experiment_config(&self.system)?;
        Ok(data::run_experiment(&self.system, &ecfg)?)
    }

    /// Data from a previous `gen-data` run with the same seed, or a fresh
    /// experiment written to the output directory.
    pub fn data(&self) -> Result<DataMatrices, BenchError> {
        if self.out.exists(io::DATA_FILE) {
            let d = data::from_csv(&self.out.read(io::DATA_FILE)?)
                .map_err(|e| BenchError::Parse { path: self.out.path(io::DATA_FILE), message: e.to_string() })?;
            if d.seed == self.config.experiment.seed && d.horizon() == self.config.experiment.horizon {
                return Ok(d);
            }
        }
        let d = self.generate_data()?;
        self.out.write(io::DATA_FILE, &data::to_csv(&d))?;
        Ok(d)
    }

    /// Co-design for `params` with the configured mode; `data` is only read
    /// in data-driven mode.
    pub fn co_design(
        &self,
        params: &TriggerParams,
        pattern: GainPattern,
        data: Option<&DataMatrices>,
    ) -> Result<DesignRun, BenchError> {
        let settings = self.config.lmi_settings();
        let problem = match self.config.design.mode {
            DesignMode::Theorem2Model => assemble_theorem2(&self.system, params, &settings, pattern)?,
            DesignMode::Theorem3Data => {
                let owned;
                let d = match data {
                    Some(d) => d,
                    None => {
                        owned = self.data()?;
                        &owned
                    }
                };
                let bound = data::box_noise_bound(self.config.experiment.w_max, d.horizon(), self.system.n_disturbances());
                let theta = data::build_theta(d, &bound, &self.system.bw)?;
                assemble_theorem3(&theta, &self.system, params, &settings, pattern)?
            }
        };
        let (result, design) = codesign(&problem, &self.backend, self.config.solve_options())?;
        Ok(DesignRun { problem, result, design })
    }

    pub fn simulate_with(&self, k: &DMatrix<f64>, omegas: &[DMatrix<f64>], params: &TriggerParams) -> Result<SimulationLog, BenchError> {
        let cfg = EtsConfig::new(&self.system, params.clone(), omegas.to_vec(), self.config.neighbor_source())?;
        let x0 = self.config.simulation_x0(&self.system)?;
        Ok(simulate_closed_loop(&self.system, k, &cfg, &x0, self.config.simulation.horizon)?)
    }

    fn summary(&self, log: &SimulationLog) -> RunSummary {
        RunSummary::of(log, self.config.simulation.settling_fraction)
    }

    fn data_if_needed(&self) -> Result<Option<DataMatrices>, BenchError> {
        Ok(match self.config.design.mode {
            DesignMode::Theorem3Data => Some(self.data()?),
            DesignMode::Theorem2Model => None,
        })
    }

    pub fn gen_data(&self) -> Result<String, BenchError> {
        let d = self.generate_data()?;
        self.out.write(io::DATA_FILE, &data::to_csv(&d))?;
        let mut m = self.manifest("gen-data");
        m.outputs.push(io::DATA_FILE.into());
        m.summarize("columns", d.horizon() as i64);
        m.summarize("rng", data::RNG_NAME);
        let residual = d.residual(&self.system.a, &self.system.b, &self.system.bw).amax();
        m.summarize("consistency_residual", residual);
        if let Some(w) = self.config.experiment_config(&self.system)?.informativity_warning(&self.system) {
            m.summarize("warning", w);
        }
        m.write(&self.out)?;
        Ok(format!("wrote {} samples (seed {}), consistency residual {residual:e}\n", d.horizon(), d.seed))
    }

    pub fn design(&self) -> Result<String, BenchError> {
        let params = self.config.params(&self.system, self.config.variant)?;
        let d = self.data_if_needed()?;
        let run = self.co_design(&params, self.config.design.pattern.into(), d.as_ref())?;
        let mut m = self.manifest("design");
        self.out.write_matrix(io::GAIN_FILE, &run.design.k)?;
        m.outputs.push(io::GAIN_FILE.into());
        for (i, om) in run.design.omegas.iter().enumerate() {
            self.out.write_matrix(&io::omega_file(i), om)?;
            m.outputs.push(io::omega_file(i));
        }
        self.out.write_matrix(io::LYAPUNOV_FILE, &run.design.p_x)?;
        self.out.write(io::CERTIFICATE_FILE, &run.result.manifest(&run.problem))?;
        m.outputs.extend([io::LYAPUNOV_FILE.into(), io::CERTIFICATE_FILE.into()]);
        m.summarize("certificate_margin", run.result.certificate_margin);
        m.summarize("regularized_blocks", run.design.regularized.len() as i64);
        m.write(&self.out)?;
        Ok(format!(
            "feasible, certificate margin {:e}\nK =\n{}",
            run.result.certificate_margin,
            io::matrix_to_csv(&run.design.k)
        ))
    }

    /// `K` and `Ω_i` written by a previous `design` run.
    pub fn load_design(&self) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), BenchError> {
        let k = self.out.read_matrix(io::GAIN_FILE)?;
        let omegas = (0..self.system.n_agents()).map(|i| self.out.read_matrix(&io::omega_file(i))).collect::<Result<_, _>>()?;
        Ok((k, omegas))
    }

    pub fn simulate(&self) -> Result<String, BenchError> {
        let (k, omegas) = self.load_design()?;
        let params = self.config.params(&self.system, self.config.variant)?;
        let log = self.simulate_with(&k, &omegas, &params)?;
        let s = self.summary(&log);
        let mut m = self.manifest("simulate");
        for (name, text) in [("states.csv", log.states_csv()), ("events.csv", log.events_csv()), ("eta.csv", log.eta_csv())] {
            self.out.write(name, &text)?;
            m.outputs.push(name.into());
        }
        let header = count_header(self.system.n_agents(), &["variant"]);
        let mut row = vec![self.config.variant.name().to_string()];
        row.extend(s.cells());
        let summary = io::table(&header_refs(&header), &[row]);
        self.out.write("summary.csv", &summary)?;
        m.outputs.push("summary.csv".into());
        if self.out.exists(io::LYAPUNOV_FILE) {
            let p = self.out.read_matrix(io::LYAPUNOV_FILE)?;
            let report = lyapunov_decrease_report(&log, &p);
            m.summarize("lyapunov_violations", decrease_violations(&report, CONVERGENCE_FLOOR).len() as i64);
        }
        m.summarize("total", s.total as i64);
        m.summarize("settling", s.settling_cell());
        m.write(&self.out)?;
        Ok(summary)
    }

    pub fn sweep_theta(&self, thetas: &[f64]) -> Result<String, BenchError> {
        let base = self.config.params(&self.system, self.config.variant)?;
        let mut thetas = thetas.to_vec();
        thetas.sort_by(f64::total_cmp);
        thetas.dedup();
        let with_theta = |theta: f64| -> Result<TriggerParams, BenchError> {
            let mut p = base.clone();
            p.agents.iter_mut().for_each(|a| a.theta = theta);
            p.validate(&self.system)?;
            Ok(p)
        };
        let sweep: Vec<TriggerParams> = thetas.iter().map(|&t| with_theta(t)).collect::<Result<_, _>>()?;
        let d = self.data_if_needed()?;
        let run = self.co_design(&base, self.config.design.pattern.into(), d.as_ref())?;
        let (k, omegas) = (&run.design.k, &run.design.omegas);
        let recorded = self.simulate_with(k, omegas, &base)?;
        let recorded_cfg = EtsConfig::new(&self.system, base.clone(), omegas.clone(), self.config.neighbor_source())?;
        let rows: Vec<Vec<String>> = sweep
            .par_iter()
            .map(|p| -> Result<Vec<Vec<String>>, BenchError> {
                let theta = p.agents[0].theta;
                let full = self.summary(&self.simulate_with(k, omegas, p)?);
                let replay = replay_decisions(&recorded.states, &recorded_cfg.with_theta(theta));
                let mut full_row = vec!["full_loop".to_string(), format!("{theta}")];
                full_row.extend(full.counts.iter().map(usize::to_string));
                full_row.push(full.total.to_string());
                let mut replay_row = vec!["replay".to_string(), format!("{theta}")];
                replay_row.extend(replay.iter().map(|ev| ev.len().to_string()));
                replay_row.push(replay.iter().map(Vec::len).sum::<usize>().to_string());
                Ok(vec![full_row, replay_row])
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        let mut header = vec!["mode".to_string(), "theta".to_string()];
        header.extend((1..=self.system.n_agents()).map(|i| format!("agent{i}")));
        header.push("total".into());
        let text = io::table(&header_refs(&header), &rows);
        self.out.write("theta_sweep.csv", &text)?;
        let mut m = self.manifest("sweep-theta");
        m.outputs.push("theta_sweep.csv".into());
        m.summarize("thetas", thetas);
        m.write(&self.out)?;
        Ok(text)
    }

    /// Dynamic, distributed (`σ₁ = 0`), decentralized (`σ₂ = 0`) and periodic
    /// rules, each with its own co-designed gain.
    pub fn compare_ets(&self) -> Result<String, BenchError> {
        let d = self.data_if_needed()?;
        let pattern: GainPattern = self.config.design.pattern.into();
        let rows: Vec<Vec<String>> = Variant::ALL
            .par_iter()
            .map(|&v| -> Result<Vec<String>, BenchError> {
                let params = self.config.params(&self.system, v)?;
                let run = self.co_design(&params, pattern, d.as_ref())?;
                let s = self.summary(&self.simulate_with(&run.design.k, &run.design.omegas, &params)?);
                let mut row = vec![v.name().to_string()];
                row.extend(s.cells());
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        let header = count_header(self.system.n_agents(), &["variant"]);
        let text = io::table(&header_refs(&header), &rows);
        self.out.write("compare_ets.csv", &text)?;
        let mut m = self.manifest("compare-ets");
        m.outputs.push("compare_ets.csv".into());
        m.write(&self.out)?;
        Ok(text)
    }

    /// Distributed and decentralized gains designed and simulated with
    /// periodic transmission (`σ₁ = σ₂ = 0`).
    pub fn compare_controllers(&self) -> Result<String, BenchError> {
        let d = self.data_if_needed()?;
        let periodic = self.config.params(&self.system, Variant::Periodic)?;
        let rows: Vec<Vec<String>> = [("distributed", GainPattern::Distributed), ("decentralized", GainPattern::Decentralized)]
            .par_iter()
            .map(|&(name, pattern)| -> Result<Vec<String>, BenchError> {
                let run = self.co_design(&periodic, pattern, d.as_ref())?;
                let s = self.summary(&self.simulate_with(&run.design.k, &run.design.omegas, &periodic)?);
                let mut row = vec![name.to_string()];
                row.extend(s.cells());
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        let header = count_header(self.system.n_agents(), &["controller"]);
        let text = io::table(&header_refs(&header), &rows);
        self.out.write("compare_controllers.csv", &text)?;
        let mut m = self.manifest("compare-controllers");
        m.outputs.push("compare_controllers.csv".into());
        m.write(&self.out)?;
        Ok(text)
    }
}
