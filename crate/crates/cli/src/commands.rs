//! Subcommand execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bellsense::evolution::{RotationAngles, VectorField};
use bellsense::experiments::{
    bell_probe_fisher, compare_strategies, fit_reports, optimal_qfim, optimize_rotation,
    projection_vs_shot, sensitivity_map, sensitivity_vs_n, sweep_signal, zero_field_objective,
};
use bellsense::fisher::Mat3;

use crate::config::{map_angles, AxisName, ConfigDocument};
use crate::error::CliError;
use crate::table::{Cell, Table};
use crate::units::{quantity, to_deg, to_mhz, Dim};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    IdealQfim,
    RotatedOptimum,
    NvSweep,
    Scaling,
    Compare,
    Maps,
    ProjectionVsShot,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::IdealQfim,
        Subcommand::RotatedOptimum,
        Subcommand::NvSweep,
        Subcommand::Scaling,
        Subcommand::Compare,
        Subcommand::Maps,
        Subcommand::ProjectionVsShot,
    ];

    /// Bundled configuration used when `--config` is absent.
    pub fn default_config(self) -> &'static str {
        match self {
            Subcommand::IdealQfim => include_str!("../configs/ideal-qfim.toml"),
            Subcommand::RotatedOptimum => include_str!("../configs/rotated-optimum.toml"),
            Subcommand::NvSweep => include_str!("../configs/nv-sweep.toml"),
            Subcommand::Scaling => include_str!("../configs/scaling.toml"),
            Subcommand::Compare => include_str!("../configs/compare.toml"),
            Subcommand::Maps => include_str!("../configs/maps.toml"),
            Subcommand::ProjectionVsShot => include_str!("../configs/projection-vs-shot.toml"),
        }
    }
}

pub fn run_scenario(
    cmd: Subcommand,
    config: &ConfigDocument,
    seed: u64,
) -> Result<Table, CliError> {
    match cmd {
        Subcommand::IdealQfim => ideal_qfim(config, seed),
        Subcommand::RotatedOptimum => rotated_optimum(config, seed),
        Subcommand::NvSweep => nv_sweep(config),
        Subcommand::Scaling => scaling(config),
        Subcommand::Compare => compare(config, seed),
        Subcommand::Maps => maps(config),
        Subcommand::ProjectionVsShot => projection(config),
    }
}

fn positive(x: f64, key: &str) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(format!("`{key}` must be positive")))
    }
}

fn rel_dev(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

fn ideal_qfim(config: &ConfigDocument, seed: u64) -> Result<Table, CliError> {
    let s = config.section(&config.ideal, "ideal")?;
    let b_range = (
        quantity(&s.b_min, Dim::Frequency, "ideal.b_min")?,
        quantity(&s.b_max, Dim::Frequency, "ideal.b_max")?,
    );
    let t_range = (
        quantity(&s.t_min, Dim::Time, "ideal.t_min")?,
        quantity(&s.t_max, Dim::Time, "ideal.t_max")?,
    );
    if s.points == 0
        || !(0.0 < b_range.0 && b_range.0 < b_range.1)
        || !(0.0 < t_range.0 && t_range.0 < t_range.1)
    {
        return Err(CliError::config(
            "[ideal] needs points ≥ 1 and 0 < min < max for B and T",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Table::new(&[
        "b_mhz",
        "alpha_deg",
        "beta_deg",
        "t_us",
        "qfim_bb_us2",
        "qfim_aa",
        "qfim_pp",
        "closed_bb_us2",
        "closed_aa",
        "closed_pp",
        "cfim_bb_us2",
        "cfim_aa",
        "cfim_pp",
        "qfim_rel_dev",
        "cfim_rel_dev",
    ]);
    for _ in 0..s.points {
        let f = VectorField::new(
            rng.random_range(b_range.0..b_range.1),
            rng.random_range(0.1..std::f64::consts::PI - 0.1),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )?;
        let t = rng.random_range(t_range.0..t_range.1);
        let m = bell_probe_fisher(f, t)?;
        let (q, c) = (m.qfim.expect("computed"), m.cfim.expect("computed"));
        let exact = optimal_qfim(f, t);
        let mut row: Vec<Cell> = vec![
            to_mhz(f.b).into(),
            to_deg(f.alpha).into(),
            to_deg(f.beta).into(),
            t.into(),
        ];
        for mat in [&q, &exact, &c] {
            row.extend((0..3).map(|i| Cell::Num(mat[(i, i)])));
        }
        row.push(rel_dev(&q, &exact).into());
        row.push(rel_dev(&c, &q).into());
        table.push(row);
    }
    Ok(table)
}

fn rotated_optimum(config: &ConfigDocument, seed: u64) -> Result<Table, CliError> {
    let s = config.section(&config.optimize, "optimize")?;
    let sigma0 = positive(s.sigma0, "optimize.sigma0")?;
    let t = positive(
        quantity(&s.time, Dim::Time, "optimize.time")?,
        "optimize.time",
    )?;
    if s.shots == 0 || s.starts == 0 {
        return Err(CliError::config(
            "optimize.shots and optimize.starts must be ≥ 1",
        ));
    }
    let opt = optimize_rotation(sigma0, s.shots, t, s.starts, seed)?;
    let unit = sigma0 * sigma0 / (s.shots as f64 * t * t);
    let uniform = zero_field_objective(RotationAngles::uniform(), sigma0, s.shots, t);
    let mut table = Table::new(&[
        "a_deg",
        "b_deg",
        "c_pi",
        "value_per_us2",
        "value_normalized",
        "uniform_normalized",
        "converged_starts",
    ]);
    table.push(vec![
        to_deg(opt.angles.a).into(),
        to_deg(opt.angles.b).into(),
        opt.angles.c.into(),
        opt.value.into(),
        (opt.value / unit).into(),
        (uniform / unit).into(),
        (opt.converged_starts as f64).into(),
    ]);
    Ok(table)
}

fn nv_sweep(config: &ConfigDocument) -> Result<Table, CliError> {
    let sweep = config.section(&config.sweep, "sweep")?;
    let grid = sweep.grid()?;
    let scenario = config.scenario()?;
    let rows = sweep_signal(&scenario, sweep.axis.axis(), &grid)?;
    let (name, convert): (&str, fn(f64) -> f64) = match sweep.axis {
        AxisName::Omega => ("omega_t_mhz", to_mhz),
        AxisName::Delta => ("delta_t_mhz", to_mhz),
        AxisName::Phi => ("phi_t_deg", to_deg),
        AxisName::RotationFraction => ("rotation_c_pi", |x| x),
    };
    let mut table = Table::new(&[name, "p1", "p2", "p3"]);
    for r in rows {
        table.push(vec![
            convert(r.value).into(),
            r.p1.into(),
            r.p2.into(),
            r.p3.into(),
        ]);
    }
    Ok(table)
}

fn scaling(config: &ConfigDocument) -> Result<Table, CliError> {
    let loops = &config.section(&config.scaling, "scaling")?.loops;
    if loops.is_empty() {
        return Err(CliError::config("scaling.loops is empty"));
    }
    let scenario = config.scenario()?;
    let reports = sensitivity_vs_n(&scenario, loops)?;
    let fits = fit_reports(&reports)?;
    let mut table = Table::new(&[
        "n",
        "delta_omega_mhz",
        "delta_delta_mhz",
        "delta_phi_deg",
        "m_omega",
        "m_delta",
        "m_phi",
    ]);
    for r in &reports {
        table.push(vec![
            (r.n_loops as f64).into(),
            to_mhz(r.std[0]).into(),
            to_mhz(r.std[1]).into(),
            to_deg(r.std[2]).into(),
            fits[0].exponent.into(),
            fits[1].exponent.into(),
            fits[2].exponent.into(),
        ]);
    }
    Ok(table)
}

fn compare(config: &ConfigDocument, seed: u64) -> Result<Table, CliError> {
    let s = config.section(&config.compare, "compare")?;
    let sigma0 = positive(s.sigma0, "compare.sigma0")?;
    let t = positive(
        quantity(&s.time, Dim::Time, "compare.time")?,
        "compare.time",
    )?;
    if s.shots == 0 {
        return Err(CliError::config("compare.shots must be ≥ 1"));
    }
    let rep = compare_strategies(sigma0, s.shots, t, seed)?;
    let [seq, uni, opt] = rep.averaged_units();
    let [sim, sq] = rep.projection_units();
    let mut table = Table::new(&[
        "strategy",
        "readout",
        "value_per_us2",
        "value_normalized",
        "normalization",
    ]);
    let rows: [(&str, &str, f64, f64, &str); 5] = [
        (
            "sequential-single",
            "averaged",
            rep.sequential_single,
            seq,
            "sigma0^2/(n T^2)",
        ),
        (
            "uniform-rotation",
            "averaged",
            rep.uniform_rotated,
            uni,
            "sigma0^2/(n T^2)",
        ),
        (
            "optimal-rotation",
            "averaged",
            rep.optimal_rotated,
            opt,
            "sigma0^2/(n T^2)",
        ),
        (
            "simultaneous-bell",
            "projection",
            rep.projection_simultaneous,
            sim,
            "1/(n T^2)",
        ),
        (
            "sequential-single",
            "projection",
            rep.projection_sequential,
            sq,
            "1/(n T^2)",
        ),
    ];
    for (strategy, readout, value, normalized, unit) in rows {
        table.push(vec![
            strategy.into(),
            readout.into(),
            value.into(),
            normalized.into(),
            unit.into(),
        ]);
    }
    Ok(table)
}

fn maps(config: &ConfigDocument) -> Result<Table, CliError> {
    let s = config.section(&config.maps, "maps")?;
    if s.points == 0 {
        return Err(CliError::config("maps.points must be ≥ 1"));
    }
    let b_max = positive(
        quantity(&s.b_max, Dim::Frequency, "maps.b_max")?,
        "maps.b_max",
    )?;
    let t_max = positive(quantity(&s.t_max, Dim::Time, "maps.t_max")?, "maps.t_max")?;
    let angles = map_angles(s)?;
    let rotation = s.rotation.as_ref().map(|r| r.resolve()).transpose()?;
    let step = |max: f64, k: usize| max * k as f64 / (s.points + 1) as f64;
    let mut b_grid: Vec<f64> = (1..=s.points).map(|k| step(b_max, k)).collect();
    if s.include_zero {
        b_grid.insert(0, 0.0);
    }
    let t_grid: Vec<f64> = (1..=s.points).map(|k| step(t_max, k)).collect();
    let points = sensitivity_map(config.noise()?, rotation, &b_grid, &t_grid, angles)?;
    let mut table = Table::new(&["b_mhz", "t_us", "bt_rad", "fom_rad2_per_us2"]);
    for p in points {
        table.push(vec![
            to_mhz(p.b).into(),
            p.t.into(),
            (p.b * p.t).into(),
            p.value.into(),
        ]);
    }
    Ok(table)
}

fn projection(config: &ConfigDocument) -> Result<Table, CliError> {
    let s = config.section(&config.projection, "projection")?;
    let scenario = config.scenario()?;
    if s.shots == 0 {
        return Err(CliError::config("projection.shots must be ≥ 1"));
    }
    let sigma = positive(s.sigma, "projection.sigma")?;
    let rows = projection_vs_shot(&scenario, &s.loops, s.shots, sigma)?;
    let mut table = Table::new(&[
        "n",
        "projection_omega_mhz",
        "shot_omega_mhz",
        "projection_delta_mhz",
        "shot_delta_mhz",
        "projection_phi_deg",
        "shot_phi_deg",
    ]);
    for r in rows {
        table.push(vec![
            (r.n_loops as f64).into(),
            to_mhz(r.projection[0]).into(),
            to_mhz(r.shot[0]).into(),
            to_mhz(r.projection[1]).into(),
            to_mhz(r.shot[1]).into(),
            to_deg(r.projection[2]).into(),
            to_deg(r.shot[2]).into(),
        ]);
    }
    Ok(table)
}
