//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use diffapprox::ctmc::{scale, scale_with, simulate_queue_on_grid, QueueSimulator, QueueState};
use diffapprox::model::ModelParams;
use diffapprox::path::{SamplePath, TimeGrid};
use diffapprox::rng::replica_rng;
use diffapprox::sde::{
    alt_scaling_q, alt_scaling_sde, euler_maruyama, euler_maruyama_strided, fluid_ode, limit_sde,
    step_count, FluidParams,
};
use diffapprox::stats::{
    krylov_ratio, ks_distance, ks_noise_floor, martingale_residual, occupation_near_g,
    run_ensemble, run_ensemble_in_order, summarize, test_family, CoeffSource, Weight,
};
use diffapprox_cli::commands::{
    functional_terminals, queue_terminals, sde_terminals, streams, sub_seed,
};
use diffapprox_cli::{Command, ExperimentConfig, Overrides, RawConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(json: &str) -> ExperimentConfig {
    RawConfig::from_json(json)
        .and_then(|raw| raw.resolve(Overrides::default()))
        .expect("valid acceptance config")
}

fn ensemble<T: Send>(
    m: usize,
    seed: u64,
    f: impl Fn(usize, &mut diffapprox::rng::ReplicaRng) -> diffapprox::Result<T> + Sync,
) -> Vec<T> {
    run_ensemble(m, seed, "acceptance", f)
        .expect("ensemble runs")
        .replicas
}

/// d = 2 setup shared by criteria 3, 4, 5 and 10.
const TWO_STATION: &str = r#"{"d":2,"alpha":[1,1],"mu0":1,"mu":[0.5,0.5],"nu":[0,0],"n":1600,"T":1,
  "x0":[0,0],"h":0.001,"M":20000,"master_seed":20260101,"n_list":[100,400,1600]}"#;

fn c1_mean_oracle() -> Outcome {
    let params = ModelParams::new(vec![1.0], 0.5, vec![0.5], vec![0.0], 400).unwrap();
    let rates = params.derived_rates();
    let lambda = rates.lambda0 + rates.lambda[0];
    let q0 = QueueState::new(vec![400]);
    let grid = TimeGrid::new(2.0, 4).unwrap();
    let paths = ensemble(5000, 1, |_, rng| {
        simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)
    });
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (k, t) in [(1, 0.5f64), (2, 1.0), (4, 2.0)] {
        let rows: Vec<&[f64]> = paths.iter().map(|p| p.row(k)).collect();
        let s = summarize(&rows).unwrap();
        let exact = lambda + (400.0 - lambda) * (-t).exp();
        let z = (s.mean[0] - exact).abs() / s.std_error[0];
        worst = worst.max(z);
        detail.push(format!(
            "t={t}: mean {:.3} vs {exact:.3} ({z:.2} SE)",
            s.mean[0]
        ));
    }
    check(worst <= 3.0, detail.join("; "))
}

fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    let mut p = (-lambda).exp();
    for j in 1..=k {
        p *= lambda / j as f64;
    }
    p
}

fn c2_stationary_law() -> Outcome {
    let params = ModelParams::new(vec![1.0], 0.25, vec![0.25], vec![1e6], 4).unwrap();
    let rates = params.derived_rates();
    let lambda = rates.lambda0 + rates.lambda[0];
    let sim = QueueSimulator::new(&params, &rates).unwrap();
    let mut rng = replica_rng(2, 0);
    let mut q = vec![5u64];
    let mut occupancy = vec![0.0f64; 64];
    let mut last = (0.0f64, 5usize);
    let horizon = 1.05e5;
    let events = sim
        .run(&mut q, horizon, &mut rng, |t, _, state| {
            occupancy[last.1.min(63)] += t - last.0;
            last = (t, state[0] as usize);
            Ok(())
        })
        .unwrap();
    occupancy[last.1.min(63)] += horizon - last.0;
    let total: f64 = occupancy.iter().sum();
    let mut tv = 0.0;
    let mut mass = 0.0;
    for (k, &w) in occupancy.iter().enumerate().take(63) {
        let p = poisson_pmf(lambda, k);
        mass += p;
        tv += (w / total - p).abs();
    }
    tv += (occupancy[63] / total - (1.0 - mass)).abs();
    tv *= 0.5;
    check(
        tv < 0.02 && events >= 1_000_000,
        format!("TV to Poisson({lambda}) = {tv:.5} over {events} events"),
    )
}

fn c3_weak_convergence() -> Outcome {
    let cfg = config(TWO_STATION);
    let floor = ks_noise_floor::<f64>(cfg.replicas);
    let reference = sde_terminals(&cfg, sub_seed(cfg.master_seed, streams::SDE_REFERENCE)).unwrap();
    let other = sde_terminals(&cfg, sub_seed(cfg.master_seed, streams::SDE_SELF)).unwrap();
    let mut ks = vec![Vec::new(); cfg.d];
    for &n in &cfg.n_list {
        let queue = queue_terminals(&cfg, n).unwrap();
        for (i, col) in ks.iter_mut().enumerate() {
            let a: Vec<f64> = queue.iter().map(|x| x[i]).collect();
            let b: Vec<f64> = reference.iter().map(|x| x[i]).collect();
            col.push(ks_distance(&a, &b).unwrap());
        }
    }
    let mut pass = true;
    for col in &ks {
        let increases: Vec<f64> = col
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&d| d > 0.0)
            .collect();
        pass &= increases.len() <= 1 && increases.iter().all(|&d| d <= floor);
        pass &= col[col.len() - 1] <= floor + 0.02;
    }
    let self_ks: Vec<f64> = (0..cfg.d)
        .map(|i| {
            let a: Vec<f64> = other.iter().map(|x| x[i]).collect();
            let b: Vec<f64> = reference.iter().map(|x| x[i]).collect();
            ks_distance(&a, &b).unwrap()
        })
        .collect();
    check(
        pass,
        format!(
            "KS per coordinate over n={:?}: {ks:.4?}; floor {floor:.4}, SDE self-KS {self_ks:.4?}",
            cfg.n_list
        ),
    )
}

fn two_station_sde_paths(cfg: &ExperimentConfig, m: usize, seed: u64) -> Vec<SamplePath<f64>> {
    let spec = limit_sde(&cfg.model());
    ensemble(m, seed, |_, rng| {
        euler_maruyama(&spec, &cfg.x0, cfg.horizon, cfg.h, rng)
    })
}

fn c4_occupation() -> Outcome {
    let cfg = config(TWO_STATION);
    let params = cfg.model();
    let paths = two_station_sde_paths(&cfg, 10_000, 4);
    let fractions: Vec<f64> = cfg
        .eps_ladder
        .iter()
        .map(|&eps| {
            paths
                .iter()
                .map(|p| occupation_near_g(p, &params, eps).unwrap())
                .sum::<f64>()
                / paths.len() as f64
        })
        .collect();
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    let k = fractions.len();
    let ratios = [
        fractions[k - 2] / fractions[k - 3],
        fractions[k - 1] / fractions[k - 2],
    ];
    let in_band = ratios.iter().all(|r| (0.3..=0.7).contains(r));
    check(
        monotone && in_band,
        format!(
            "fractions {fractions:.4?} over eps {:?}; finest ratios {ratios:.3?}",
            cfg.eps_ladder
        ),
    )
}

fn c5_martingale() -> Outcome {
    let ou = ModelParams::new(vec![1.0], 0.0, vec![0.0], vec![1e6], 100).unwrap();
    let spec = limit_sde(&ou);
    let x0 = [0.5];
    let ou_paths = ensemble(10_000, 5, |_, rng| {
        euler_maruyama(&spec, &x0, 1.0, 1e-3, rng)
    });
    let mut worst_ou = 0.0f64;
    let mut pass = true;
    for u in &test_family(1, 6.0) {
        let r = martingale_residual::<f64>(
            &ou_paths,
            u,
            0.0,
            1.0,
            &Weight::One,
            &CoeffSource::Limit(&ou),
        )
        .unwrap();
        pass &= r.within(3.0, 0.0);
        if r.std_error > 0.0 {
            worst_ou = worst_ou.max(r.estimate.abs() / r.std_error);
        }
    }
    drop(ou_paths);

    let cfg = config(TWO_STATION);
    let params = cfg.model();
    let rates = params.derived_rates();
    let q0 = QueueState::new(params.initial_queue(&cfg.x0).unwrap());
    let grid = TimeGrid::new(cfg.horizon, 1000).unwrap();
    let queue_paths = ensemble(4000, 55, |_, rng| {
        Ok(scale(
            &simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)?,
            &params,
        ))
    });
    let (mut worst_queue, mut worst_queue_z) = (0.0f64, 0.0f64);
    for u in &test_family(2, cfg.plateau_radius) {
        let r = martingale_residual::<f64>(
            &queue_paths,
            u,
            0.0,
            1.0,
            &Weight::One,
            &CoeffSource::Limit(&params),
        )
        .unwrap();
        pass &= r.within(3.0, 0.05);
        worst_queue = worst_queue.max(r.estimate.abs());
        if r.std_error > 0.0 {
            worst_queue_z = worst_queue_z.max(r.estimate.abs() / r.std_error);
        }
    }
    check(
        pass,
        format!("OU worst |est|/SE = {worst_ou:.2}; queue n=1600 worst |est| = {worst_queue:.4}, worst |est|/SE = {worst_queue_z:.2}"),
    )
}

fn c6_fluid() -> Outcome {
    let n = 10_000u64;
    let params = ModelParams::new(vec![1.0, 2.0], 0.0, vec![0.0, 0.0], vec![0.0, 0.0], n).unwrap();
    let rates = params.derived_rates();
    let fp: FluidParams<f64> = FluidParams {
        beta: vec![1.0, 0.5],
        q0: vec![0.0, 1.5],
    };
    let h = 0.01;
    let fluid = fluid_ode(&fp, 3.0, h).unwrap();
    let rk4_err = fluid
        .rows()
        .zip(fluid.times())
        .flat_map(|(q, &t)| {
            q.iter()
                .zip(fp.exact(t))
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0f64, f64::max);
    let grid = TimeGrid::new(3.0, 300).unwrap();
    let q0 = QueueState::new(fp.q0.iter().map(|&q| (q * n as f64) as u64).collect());
    let paths = ensemble(20, 6, |_, rng| {
        simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)
    });
    let mut sup = 0.0f64;
    for path in &paths {
        for (k, row) in path.rows().enumerate() {
            for (i, &q) in row.iter().enumerate() {
                sup = sup.max((q / n as f64 - fluid.row(k)[i]).abs());
            }
        }
    }
    check(
        sup <= 0.05 && rk4_err <= 1e-6,
        format!("sup |Q/n - q| = {sup:.4} over 20 replicas; RK4 error {rk4_err:.2e}"),
    )
}

fn c7_alternative_scaling() -> Outcome {
    let gamma = 0.0;
    let params = ModelParams::new(vec![1.0], 0.0, vec![0.0], vec![0.0], 1600).unwrap();
    let rates = params.derived_rates();
    let m = 20_000;
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let q0 = QueueState::zeros(1);
    let queue = ensemble(m, 7, |_, rng| {
        let raw = simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)?;
        Ok(scale_with(&raw, &params, |t| alt_scaling_q(gamma, t))
            .terminal()
            .to_vec())
    });
    let spec = alt_scaling_sde(&params, gamma).unwrap();
    let steps = step_count(1.0, 1e-3);
    let sde = ensemble(m, 77, |_, rng| {
        Ok(
            euler_maruyama_strided(&spec, &[0.0], 1.0, 1e-3, steps, rng)?
                .terminal()
                .to_vec(),
        )
    });
    let (a, b) = (
        summarize::<f64, _>(&queue).unwrap(),
        summarize::<f64, _>(&sde).unwrap(),
    );
    let z_mean = (a.mean[0] - b.mean[0]).abs() / a.std_error[0].hypot(b.std_error[0]);
    let z_var = (a.variance[0] - b.variance[0]).abs()
        / a.variance_std_error[0].hypot(b.variance_std_error[0]);
    check(
        z_mean <= 3.0 && z_var <= 3.0,
        format!(
            "mean {:.4} vs {:.4} ({z_mean:.2} SE); variance {:.4} vs {:.4} ({z_var:.2} SE)",
            a.mean[0], b.mean[0], a.variance[0], b.variance[0]
        ),
    )
}

fn c8_krylov() -> Outcome {
    let params = ModelParams::new(vec![1.0], 0.5, vec![0.5], vec![0.0], 100).unwrap();
    let spec = limit_sde(&params);
    let paths = ensemble(5000, 8, |_, rng| {
        euler_maruyama(&spec, &[0.0], 1.0, 1e-3, rng)
    });
    let ladder = [0.4, 0.2, 0.1, 0.05];
    let reports: Vec<_> = ladder
        .iter()
        .map(|&eps| krylov_ratio(&paths, &params, eps, 6.0, 1.0).unwrap())
        .collect();
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio()).collect();
    let (coarse, fine) = (&reports[0], &reports[ladder.len() - 1]);
    let separated = fine.ratio() + 3.0 * fine.ratio_std_error()
        < coarse.ratio() - 3.0 * coarse.ratio_std_error();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    check(
        separated && decreasing,
        format!("ratios {ratios:.4?} over eps {ladder:?}"),
    )
}

fn c9_determinism() -> Outcome {
    let cfg = config(
        r#"{"d":2,"alpha":[1,2],"mu0":1,"mu":[0.5,0.25],"nu":[0,0.5],"n":200,"T":0.5,"h":0.005,
            "grid_points":20,"M":24,"master_seed":99,"n_list":[50,200],"eps_ladder":[0.4,0.1]}"#,
    );
    let dir = std::env::temp_dir().join(format!("diffapprox-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let commands = [
        Command::SimulateQueue,
        Command::SimulateSde,
        Command::Fluid,
        Command::Compare,
        Command::Occupation,
        Command::MartingaleCheck,
        Command::KrylovCheck,
        Command::Functional,
    ];
    let mut identical = true;
    for command in commands {
        let mut files = Vec::new();
        for (k, threads) in [1usize, 3].into_iter().enumerate() {
            let mut run_cfg = cfg.clone();
            let path = dir.join(format!("{}-{k}.csv", command.name()));
            run_cfg.out = Some(path.clone());
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let text = pool
                .install(|| diffapprox_cli::execute(command, &run_cfg))
                .unwrap();
            diffapprox_cli::emit(&run_cfg, &text).unwrap();
            files.push(std::fs::read(&path).unwrap());
        }
        identical &= files[0] == files[1];
    }
    let _ = std::fs::remove_dir_all(&dir);

    let params = cfg.model();
    let rates = params.derived_rates();
    let q0 = QueueState::new(params.initial_queue(&cfg.x0).unwrap());
    let grid = TimeGrid::new(cfg.horizon, cfg.grid_points).unwrap();
    let spec = limit_sde(&params);
    let gen = |_: usize, rng: &mut diffapprox::rng::ReplicaRng| {
        let q = simulate_queue_on_grid(&params, &rates, &q0, &grid, rng)?;
        let x = euler_maruyama(&spec, &cfg.x0, cfg.horizon, cfg.h, rng)?;
        Ok((q, x))
    };
    let forward = run_ensemble(cfg.replicas, 5, "", gen).unwrap().replicas;
    let mut order: Vec<usize> = (0..cfg.replicas).rev().collect();
    order.rotate_left(7);
    let permuted = run_ensemble_in_order(&order, 5, "", gen).unwrap().replicas;
    let schedule_free = forward == permuted;
    check(
        identical && schedule_free,
        format!(
            "8 subcommands byte-identical across runs and thread counts: {identical}; permuted schedule identical: {schedule_free}"
        ),
    )
}

fn c10_functional() -> Outcome {
    let cfg = config(TWO_STATION);
    let (queue, sde) = functional_terminals(&cfg).unwrap();
    let worst_sum = queue
        .iter()
        .map(|y| (y.iter().sum::<f64>() - cfg.horizon).abs())
        .fold(0.0f64, f64::max);
    let a: Vec<f64> = queue.iter().map(|y| y[0]).collect();
    let b: Vec<f64> = sde.iter().map(|y| y[0]).collect();
    let ks = ks_distance(&a, &b).unwrap();
    let floor = ks_noise_floor::<f64>(cfg.replicas);
    check(
        worst_sum <= 1e-9 * cfg.horizon && ks <= floor + 0.03,
        format!("max |sum y - T| = {worst_sum:.1e}; KS(y1) = {ks:.4} vs floor {floor:.4} + 0.03"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 mean oracle", c1_mean_oracle),
        ("2 stationary law", c2_stationary_law),
        ("3 weak convergence", c3_weak_convergence),
        ("4 occupation near G", c4_occupation),
        ("5 martingale residual", c5_martingale),
        ("6 fluid limit", c6_fluid),
        ("7 alternative scaling", c7_alternative_scaling),
        ("8 Krylov diagnostic", c8_krylov),
        ("9 determinism", c9_determinism),
        ("10 functional convergence", c10_functional),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
