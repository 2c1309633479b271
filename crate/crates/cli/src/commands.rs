//! Subcommand implementations. Each returns a [`Table`].
//!
//! Ensembles that must be independent of each other draw their master seeds
//! from [`sub_seed`]`(master_seed, stream)` with a fixed stream id per role.

use diffapprox::ctmc::functional_integral_grid;
use diffapprox::ctmc::{
    functional_integral_queue, scale, scale_with, simulate_queue, simulate_queue_on_grid,
    QueueState,
};
use diffapprox::model::{delta, ModelParams};
use diffapprox::path::{SamplePath, TimeGrid};
use diffapprox::rng::mix64;
use diffapprox::sde::{
    alt_scaling_q, alt_scaling_sde, euler_maruyama_strided, fluid_ode, limit_sde, step_count,
    FluidParams, SdeSpec,
};
use diffapprox::stats::{
    krylov_ratio, ks_noise_floor, ks_per_coordinate, martingale_residual, mean_and_std_error,
    occupation_near_g, run_ensemble, summarize, test_family, CoeffSource, Ensemble, TestFunction,
    Weight,
};

use crate::config::ExperimentConfig;
use crate::table::{Cell, Table};
use crate::CliError;

/// Stream ids for [`sub_seed`].
pub mod streams {
    pub const QUEUE: u64 = 0x0100_0000;
    pub const SDE_REFERENCE: u64 = 0x0200_0000;
    pub const SDE_SELF: u64 = 0x0300_0000;
}

/// Master seed of a derived ensemble.
pub fn sub_seed(master_seed: u64, stream: u64) -> u64 {
    mix64(master_seed, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SimulateQueue,
    SimulateSde,
    Fluid,
    Compare,
    Occupation,
    MartingaleCheck,
    KrylovCheck,
    Functional,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateQueue => "simulate-queue",
            Command::SimulateSde => "simulate-sde",
            Command::Fluid => "fluid",
            Command::Compare => "compare",
            Command::Occupation => "occupation",
            Command::MartingaleCheck => "martingale-check",
            Command::KrylovCheck => "krylov-check",
            Command::Functional => "functional",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<Table, CliError> {
        match self {
            Command::SimulateQueue => simulate_queue_cmd(cfg),
            Command::SimulateSde => simulate_sde_cmd(cfg),
            Command::Fluid => fluid_cmd(cfg),
            Command::Compare => compare_cmd(cfg),
            Command::Occupation => occupation_cmd(cfg),
            Command::MartingaleCheck => martingale_cmd(cfg),
            Command::KrylovCheck => krylov_cmd(cfg),
            Command::Functional => functional_cmd(cfg),
        }
    }
}

fn coord_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn reals(v: &[f64]) -> impl Iterator<Item = Cell> + '_ {
    v.iter().map(|&x| Cell::Real(x))
}

/// Initial queue: the explicit `q0` if given, else
/// `round(n * c / alpha_i + x0_i * sqrt(n))` with `c = gamma` (or 1).
pub fn initial_queue(
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
    gamma: Option<f64>,
) -> Result<QueueState, CliError> {
    if let Some(q0) = &cfg.q0 {
        return Ok(QueueState::new(q0.clone()));
    }
    let level = gamma.unwrap_or(1.0);
    let n = params.n as f64;
    let q = params
        .alpha
        .iter()
        .zip(&cfg.x0)
        .map(|(&a, &x)| (n * level / a + x * n.sqrt()).round().max(0.0) as u64)
        .collect();
    Ok(QueueState::new(q))
}

/// SDE matching the configuration: the limit SDE, or the alternative
/// scaling when `gamma` is set.
pub fn sde_for(
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
) -> Result<SdeSpec<f64>, CliError> {
    match cfg.gamma {
        Some(g) => Ok(alt_scaling_sde(params, g)?),
        None => Ok(limit_sde(params)),
    }
}

fn record_stride(cfg: &ExperimentConfig) -> usize {
    (step_count(cfg.horizon, cfg.h) / cfg.grid_points).max(1)
}

/// Scaled queue paths on the configured grid.
pub fn queue_paths(
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
    seed: u64,
) -> Result<Ensemble<SamplePath<f64>>, CliError> {
    let rates = params.derived_rates();
    let q0 = initial_queue(cfg, params, cfg.gamma)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.grid_points)?;
    let gamma = cfg.gamma;
    Ok(run_ensemble(cfg.replicas, seed, cfg.digest(), |_, rng| {
        let raw = simulate_queue_on_grid(params, &rates, &q0, &grid, rng)?;
        Ok(match gamma {
            Some(g) => scale_with(&raw, params, |t| alt_scaling_q(g, t)),
            None => scale(&raw, params),
        })
    })?)
}

/// Euler–Maruyama paths recorded every `stride` steps.
pub fn sde_paths(
    cfg: &ExperimentConfig,
    spec: &SdeSpec<f64>,
    seed: u64,
    stride: usize,
) -> Result<Ensemble<SamplePath<f64>>, CliError> {
    Ok(run_ensemble(cfg.replicas, seed, cfg.digest(), |_, rng| {
        euler_maruyama_strided(spec, &cfg.x0, cfg.horizon, cfg.h, stride, rng)
    })?)
}

fn path_table(
    cfg: &ExperimentConfig,
    ensemble: &Ensemble<SamplePath<f64>>,
    prefix: &str,
) -> Result<Table, CliError> {
    let d = cfg.d;
    if cfg.summarize {
        let mut cols = vec!["t".to_string()];
        for i in 1..=d {
            cols.push(format!("mean_{prefix}{i}"));
            cols.push(format!("var_{prefix}{i}"));
        }
        let mut table = Table::new(cols);
        let first = &ensemble.replicas[0];
        for k in 0..first.len() {
            let rows: Vec<&[f64]> = ensemble.replicas.iter().map(|p| p.row(k)).collect();
            let s = summarize(&rows)?;
            let mut row = vec![Cell::Real(first.times()[k])];
            for i in 0..d {
                row.push(Cell::Real(s.mean[i]));
                row.push(Cell::Real(s.variance[i]));
            }
            table.push(row);
        }
        return Ok(table);
    }
    let mut cols = vec!["replica".to_string(), "t".to_string()];
    cols.extend(coord_columns(prefix, d));
    let mut table = Table::new(cols);
    for (r, path) in ensemble.replicas.iter().enumerate() {
        for (k, x) in path.rows().enumerate() {
            let mut row = vec![Cell::Int(r as u64), Cell::Real(path.times()[k])];
            row.extend(reals(x));
            table.push(row);
        }
    }
    Ok(table)
}

fn simulate_queue_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let prefix = if cfg.gamma.is_some() { "y" } else { "x" };
    let ensemble = queue_paths(cfg, &params, cfg.master_seed)?;
    path_table(cfg, &ensemble, prefix)
}

fn simulate_sde_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let spec = sde_for(cfg, &params)?;
    let prefix = if cfg.gamma.is_some() { "y" } else { "x" };
    let ensemble = sde_paths(cfg, &spec, cfg.master_seed, record_stride(cfg))?;
    path_table(cfg, &ensemble, prefix)
}

fn fluid_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let beta = cfg
        .beta
        .clone()
        .unwrap_or_else(|| params.alpha.iter().map(|a| 1.0 / a).collect());
    let q0 = match &cfg.fluid_q0 {
        Some(q) => q.clone(),
        None => initial_queue(cfg, &params, cfg.gamma)?
            .q
            .iter()
            .map(|&q| q as f64 / params.n as f64)
            .collect(),
    };
    let path = fluid_ode(&FluidParams { beta, q0 }, cfg.horizon, cfg.h)?;
    let stride = record_stride(cfg);
    let mut cols = vec!["t".to_string()];
    cols.extend(coord_columns("q", cfg.d));
    let mut table = Table::new(cols);
    for k in (0..path.len()).filter(|k| k % stride == 0 || k + 1 == path.len()) {
        let mut row = vec![Cell::Real(path.times()[k])];
        row.extend(reals(path.row(k)));
        table.push(row);
    }
    Ok(table)
}

/// One terminal vector per replica.
pub type Terminals = Vec<Vec<f64>>;

/// Terminal scaled queue states `x^n_T` for `M` replicas.
pub fn queue_terminals(cfg: &ExperimentConfig, n: u64) -> Result<Terminals, CliError> {
    let params = cfg.model_at(n);
    let rates = params.derived_rates();
    let q0 = initial_queue(cfg, &params, None)?;
    let grid = TimeGrid::new(cfg.horizon, 1)?;
    let seed = sub_seed(cfg.master_seed, streams::QUEUE ^ n);
    let ensemble = run_ensemble(cfg.replicas, seed, cfg.digest(), |_, rng| {
        let raw = simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)?;
        Ok(scale(&raw, &params).terminal().to_vec())
    })?;
    Ok(ensemble.replicas)
}

/// Terminal states of `M` Euler–Maruyama paths of the limit SDE.
pub fn sde_terminals(cfg: &ExperimentConfig, seed: u64) -> Result<Terminals, CliError> {
    let spec = limit_sde(&cfg.model());
    let steps = step_count(cfg.horizon, cfg.h);
    let ensemble = run_ensemble(cfg.replicas, seed, cfg.digest(), |_, rng| {
        Ok(
            euler_maruyama_strided(&spec, &cfg.x0, cfg.horizon, cfg.h, steps, rng)?
                .terminal()
                .to_vec(),
        )
    })?;
    Ok(ensemble.replicas)
}

fn compare_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    if cfg.n_list.is_empty() {
        return Err(CliError::Config(
            "`n_list` must be nonempty for compare".into(),
        ));
    }
    let d = cfg.d;
    let floor = ks_noise_floor::<f64>(cfg.replicas);
    let reference = sde_terminals(cfg, sub_seed(cfg.master_seed, streams::SDE_REFERENCE))?;
    let mut cols = vec!["kind".to_string(), "n".to_string()];
    cols.extend(coord_columns("ks_x", d));
    cols.push("ks_max".into());
    cols.push("noise_floor".into());
    let mut table = Table::new(cols);
    for &n in &cfg.n_list {
        let queue = queue_terminals(cfg, n)?;
        let ks = ks_per_coordinate(&queue, &reference)?;
        let mut row = vec![Cell::from("data"), Cell::Int(n)];
        row.extend(reals(&ks.per_coordinate));
        row.push(Cell::Real(ks.max));
        row.push(Cell::Real(floor));
        table.push(row);
    }
    let other = sde_terminals(cfg, sub_seed(cfg.master_seed, streams::SDE_SELF))?;
    let ks = ks_per_coordinate(&other, &reference)?;
    let mut row = vec![Cell::from("noise_floor"), Cell::from("sde")];
    row.extend(reals(&ks.per_coordinate));
    row.push(Cell::Real(ks.max));
    row.push(Cell::Real(floor));
    table.push(row);
    Ok(table)
}

fn occupation_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let spec = limit_sde(&params);
    let ensemble = sde_paths(cfg, &spec, cfg.master_seed, record_stride(cfg))?;
    let mut table = Table::new(["eps", "fraction", "std_error"]);
    for &eps in &cfg.eps_ladder {
        let fractions = ensemble
            .replicas
            .iter()
            .map(|p| occupation_near_g(p, &params, eps))
            .collect::<Result<Vec<_>, _>>()?;
        let (mean, se) = mean_and_std_error(&fractions)?;
        table.push(vec![eps.into(), mean.into(), se.into()]);
    }
    Ok(table)
}

fn martingale_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let spec = sde_for(cfg, &params)?;
    let family = test_family(cfg.d, cfg.plateau_radius);
    let sde = sde_paths(
        cfg,
        &spec,
        sub_seed(cfg.master_seed, streams::SDE_REFERENCE),
        record_stride(cfg),
    )?;
    let queue = queue_paths(
        cfg,
        &params,
        sub_seed(cfg.master_seed, streams::QUEUE ^ params.n),
    )?;
    let limit = match cfg.gamma {
        Some(_) => CoeffSource::Sde(&spec),
        None => CoeffSource::Limit(&params),
    };
    let prelimit = CoeffSource::Prelimit(&params);
    let queue_label = format!("queue(n={})", params.n);
    type Run<'a> = (&'a str, &'a Ensemble<SamplePath<f64>>, CoeffSource<'a, f64>);
    let mut runs: Vec<Run<'_>> = vec![("sde", &sde, limit), (&queue_label, &queue, limit)];
    if cfg.gamma.is_none() {
        runs.push((&queue_label, &queue, prelimit));
    }
    let mut table = Table::new([
        "paths",
        "coefficients",
        "test_function",
        "estimate",
        "std_error",
        "M",
    ]);
    for (label, ensemble, coeffs) in runs {
        for u in &family {
            let rep = martingale_residual(
                &ensemble.replicas,
                u,
                0.0,
                cfg.horizon,
                &Weight::One,
                &coeffs,
            )?;
            table.push(vec![
                label.into(),
                coeffs.label().into(),
                u.id().into(),
                rep.estimate.into(),
                rep.std_error.into(),
                rep.m.into(),
            ]);
        }
    }
    Ok(table)
}

fn krylov_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = cfg.model();
    let spec = limit_sde(&params);
    let ensemble = sde_paths(cfg, &spec, cfg.master_seed, record_stride(cfg))?;
    let mut table = Table::new(["eps", "lhs", "lhs_std_error", "rhs", "ratio"]);
    for &eps in &cfg.eps_ladder {
        let rep = krylov_ratio(
            &ensemble.replicas,
            &params,
            eps,
            cfg.krylov_radius,
            cfg.horizon,
        )?;
        table.push(vec![
            eps.into(),
            rep.lhs.into(),
            rep.lhs_std_error.into(),
            rep.rhs.into(),
            rep.ratio().into(),
        ]);
    }
    Ok(table)
}

/// Terminal `y_T = int_0^T delta(x_s) ds` for queue replicas (exact) and
/// limit-SDE replicas (left Riemann sum at the Euler step).
pub fn functional_terminals(cfg: &ExperimentConfig) -> Result<(Terminals, Terminals), CliError> {
    let params = cfg.model();
    let rates = params.derived_rates();
    let d = cfg.d;
    let q0 = initial_queue(cfg, &params, None)?;
    let grid = TimeGrid::new(cfg.horizon, 1)?;
    let alpha = params.alpha.clone();
    let route = |x: &[f64], out: &mut [f64]| {
        let dx = delta(x, &alpha).expect("dimensions match");
        out.copy_from_slice(&dx);
    };
    let queue = run_ensemble(
        cfg.replicas,
        sub_seed(cfg.master_seed, streams::QUEUE ^ params.n),
        cfg.digest(),
        |_, rng| {
            let path = simulate_queue(&params, &rates, &q0, cfg.horizon, rng)?;
            let y = functional_integral_queue(&path, &params, &grid, d, route)?;
            Ok(y.terminal().to_vec())
        },
    )?;
    let spec = limit_sde(&params);
    let sde = run_ensemble(
        cfg.replicas,
        sub_seed(cfg.master_seed, streams::SDE_REFERENCE),
        cfg.digest(),
        |_, rng| {
            let path = euler_maruyama_strided(&spec, &cfg.x0, cfg.horizon, cfg.h, 1, rng)?;
            let y = functional_integral_grid(&path, d, route)?;
            Ok(y.terminal().to_vec())
        },
    )?;
    Ok((queue.replicas, sde.replicas))
}

fn functional_cmd(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let (queue, sde) = functional_terminals(cfg)?;
    let mut cols = vec!["replica".to_string(), "source".to_string()];
    cols.extend(coord_columns("y", cfg.d));
    cols.push("y_sum".into());
    let mut table = Table::new(cols);
    for (source, ys) in [("queue", &queue), ("sde", &sde)] {
        for (r, y) in ys.iter().enumerate() {
            let mut row = vec![Cell::Int(r as u64), source.into()];
            row.extend(reals(y));
            row.push(Cell::Real(y.iter().sum()));
            table.push(row);
        }
    }
    Ok(table)
}
