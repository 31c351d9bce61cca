use std::collections::BTreeMap;

use homopolymer::field::{critical_eigenfunction, eigenfunction, far_field_amplitude, stationary_measure, EigenPair};
use homopolymer::kernel::solve_pinned_diag;
use homopolymer::laplace::{inverse_laplace_diag, inverse_laplace_partition};
use homopolymer::lattice::{LatticePoint, TimeGrid};
use homopolymer::montecarlo::{
    endpoint_statistics, estimate_escape_probability, mixture_variance_ratio, sample_free_paths, sample_gibbs_paths,
    sigma_distribution, simulate_h_chain, WeightedEnsemble,
};
use homopolymer::spectral::{asymptotic_expansion_check, critical_beta, i_lambda, SpectralTable};
use homopolymer::Error as CoreError;
use serde_json::Value;

use crate::config::{BetaSpec, Command, RunConfig, SamplerKind};
use crate::error::Result;
use crate::output::{column, described, Cell, ColumnInfo, Described, Experiment, Table};

/// Above this many grid nodes the kernel commands switch from the Volterra
/// solve to contour inversion.
pub const VOLTERRA_MAX_NODES: f64 = 1e5;
/// Kernel curves are thinned to about this many rows.
const CURVE_ROWS: usize = 1000;
const LAPLACE_POINTS_PER_DECADE: usize = 10;

pub fn run(config: &RunConfig) -> Result<Experiment> {
    let table = critical_beta(config.dim)?;
    let beta = match config.beta {
        BetaSpec::Critical => table.beta_c,
        BetaSpec::Value(b) => b,
    };
    let mut exp = match config.command {
        Command::CriticalBeta => critical(&table),
        Command::ILambda => i_lambda_table(config),
        Command::Asymptotics => asymptotics(config, &table),
        Command::Eigenfunction => eigen(config, &table, beta),
        Command::HeatKernel => kernel_curve(config, &table, beta, Curve::HeatKernel),
        Command::Partition => kernel_curve(config, &table, beta, Curve::Partition),
        Command::SigmaDist => sigma(config, beta),
        Command::Clt => clt(config, beta),
        Command::HChain => h_chain(config, &table, beta),
        Command::Moments => moments(config, &table, beta),
        Command::Escape => escape(config, &table),
    }?;
    let uses_beta = !matches!(
        config.command,
        Command::CriticalBeta | Command::ILambda | Command::Asymptotics | Command::Escape
    );
    exp.resolved_beta = uses_beta.then_some(beta);
    exp.constants.extend(spectral_constants(&table));
    Ok(exp)
}

fn experiment(data: Table, plot: Option<Table>) -> Experiment {
    Experiment {
        data,
        plot,
        resolved_beta: None,
        constants: BTreeMap::new(),
        summary: BTreeMap::new(),
    }
}

fn num_value(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn spectral_constants(t: &SpectralTable) -> BTreeMap<String, Described> {
    let mut m = BTreeMap::new();
    m.insert("beta_c".into(), described(num_value(t.beta_c), "1/time", "critical coupling 1 / I(0)"));
    if let Some(i0) = t.i0 {
        m.insert("i0".into(), described(num_value(i0), "time", "I(0) = int_0^inf p_0(t, 0, 0) dt"));
        m.insert("e_d".into(), described(num_value(t.escape_prob), "probability", "escape probability beta_c / (2d)"));
    }
    m
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num_value)
}

fn plot_table(x: (&str, &str, &str), observed: (&str, &str, &str), predicted: (&str, &str, &str)) -> Table {
    Table::new(vec![
        column("series", "label", "name of the compared curve"),
        column(x.0, x.1, x.2),
        column(observed.0, observed.1, observed.2),
        column(predicted.0, predicted.1, predicted.2),
        column("ratio", "dimensionless", "observed / predicted"),
    ])
}

fn plot_row(series: &str, x: f64, observed: f64, predicted: Option<f64>) -> Vec<Cell> {
    vec![
        Cell::Text(series.into()),
        Cell::Num(x),
        Cell::Num(observed),
        Cell::opt(predicted),
        Cell::opt(predicted.map(|p| observed / p)),
    ]
}

fn critical(t: &SpectralTable) -> Result<Experiment> {
    let mut data = Table::new(vec![
        column("dim", "count", "lattice dimension d"),
        column("beta_c", "1/time", "critical coupling beta_d = 1 / I(0), zero when I(0) is infinite"),
        column("i0", "time", "I(0) = int_0^inf p_0(t, 0, 0) dt, blank when infinite"),
        column("e_d", "probability", "escape probability e_d = beta_d / (2d)"),
        column("c_d", "varies", "heat-kernel constant as conventionally stated (8 sqrt(pi)/beta^2, 8 pi/beta^2, 1/(beta^2 kappa))"),
        column("d_d", "varies", "partition constant as conventionally stated (16 sqrt(pi)/beta, 8 pi/beta, c_d beta)"),
        column("heat_kernel_constant", "varies", "limit of sqrt(t) p, ln(t) p or p at beta_d (d = 3, 4, >= 5)"),
        column("partition_constant", "varies", "limit of Z / sqrt(t), Z ln(t) / t or Z / t at beta_d"),
        column("note", "text", "remarks"),
    ]);
    let note = if t.is_transient() { "" } else { "recurrent: I(0) infinite" };
    data.push(vec![
        Cell::Int(t.dim as i64),
        Cell::Num(t.beta_c),
        Cell::opt(t.i0),
        Cell::Num(t.escape_prob),
        Cell::opt(t.c_d),
        Cell::opt(t.d_d),
        Cell::opt(t.heat_kernel_constant),
        Cell::opt(t.partition_constant),
        Cell::Text(note.into()),
    ]);
    let mut exp = experiment(data, None);
    if let Some(k) = t.resolvent_slope {
        exp.summary.insert(
            "kappa".into(),
            described(num_value(k), "time^2", "lim (I(0) - I(lambda)) / lambda, Richardson fitted"),
        );
    }
    Ok(exp)
}

fn i_lambda_table(config: &RunConfig) -> Result<Experiment> {
    let d = config.dim;
    let mut data = Table::new(vec![
        column("lambda", "1/time", "spectral parameter"),
        column("i_lambda", "time", "I(lambda) = int_0^inf e^{-lambda t} p_0(t, 0, 0) dt"),
        column("closed_form", "time", "1 / sqrt(lambda^2 + 4 lambda), d = 1 only"),
    ]);
    let mut plot = plot_table(
        ("lambda", "1/time", "spectral parameter"),
        ("i_lambda", "time", "I(lambda)"),
        ("closed_form", "time", "1 / sqrt(lambda^2 + 4 lambda)"),
    );
    for &l in &config.lambdas {
        let v = i_lambda(l, d)?;
        let exact = (d == 1).then(|| 1.0 / (l * l + 4.0 * l).sqrt());
        data.push(vec![Cell::Num(l), Cell::Num(v), Cell::opt(exact)]);
        plot.push(plot_row("d1_closed_form", l, v, exact));
    }
    Ok(experiment(data, (d == 1).then_some(plot)))
}

fn asymptotics(config: &RunConfig, table: &SpectralTable) -> Result<Experiment> {
    let d = config.dim;
    if d < 3 {
        return Err(CoreError::Divergent { d, lambda: 0.0 }.into());
    }
    let rows = asymptotic_expansion_check(d, &config.lambdas)?;
    let mut data = Table::new(vec![
        column("lambda", "1/time", "spectral parameter"),
        column("deficit", "time", "I(0) - I(lambda)"),
        column("predicted", "time", "leading term sqrt(lambda)/(4 pi), lambda ln(1/lambda)/(16 pi^2) or kappa lambda"),
        column("ratio", "dimensionless", "deficit / predicted"),
        column("predicted_nominal", "time", "leading term as conventionally stated; differs in d = 4 (lambda ln(1/lambda)/(8 pi))"),
        column("ratio_nominal", "dimensionless", "deficit / predicted_nominal"),
    ]);
    let mut plot = plot_table(
        ("lambda", "1/time", "spectral parameter"),
        ("deficit", "time", "I(0) - I(lambda)"),
        ("predicted", "time", "leading small-lambda term"),
    );
    for r in rows {
        let nominal = if d == 4 && r.lambda > 0.0 {
            r.lambda * (1.0 / r.lambda).ln() / (8.0 * std::f64::consts::PI)
        } else {
            r.predicted
        };
        let nominal_ratio = if nominal > 0.0 { r.deficit / nominal } else { 1.0 };
        data.push(vec![
            Cell::Num(r.lambda),
            Cell::Num(r.deficit),
            Cell::Num(r.predicted),
            Cell::Num(r.ratio),
            Cell::Num(nominal),
            Cell::Num(nominal_ratio),
        ]);
        if r.lambda > 0.0 {
            plot.push(plot_row("leading", r.lambda, r.deficit, Some(r.predicted)));
        }
    }
    let mut exp = experiment(data, Some(plot));
    exp.summary.insert(
        "i0".into(),
        described(opt_num(table.i0), "time", "I(0)"),
    );
    Ok(exp)
}

fn pair_for(table: &SpectralTable, beta: f64, box_radius: i64) -> Result<EigenPair> {
    if table.is_critical(beta) {
        Ok(critical_eigenfunction(table.dim, box_radius)?)
    } else {
        Ok(eigenfunction(beta, table.dim, box_radius)?)
    }
}

fn coord_columns(d: usize) -> Vec<ColumnInfo> {
    (1..=d)
        .map(|i| column(&format!("x{i}"), "lattice units", "orbit representative: |coordinates| in decreasing order"))
        .collect()
}

fn rep_norm(rep: &[u32]) -> f64 {
    rep.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

fn eigen(config: &RunConfig, table: &SpectralTable, beta: f64) -> Result<Experiment> {
    let d = config.dim;
    let pair = pair_for(table, beta, config.box_radius)?;
    let norm_sq = pair.parseval_norm_sq().ok();
    let mut cols = coord_columns(d);
    cols.extend([
        column("sup_norm", "lattice units", "|x|_inf"),
        column("orbit_size", "count", "number of sites related by permutations and sign flips"),
        column("psi", "dimensionless", "ground state psi(x), normalised by psi(0) = 1"),
        column("pi", "probability", "stationary law psi(x)^2 / ||psi||^2 per site, blank when not normalisable"),
    ]);
    let mut data = Table::new(cols);
    let far = (pair.lambda0 == 0.0 && d >= 3).then(|| far_field_amplitude(beta, d));
    let mut plot = plot_table(
        ("radius", "lattice units", "|x|_2"),
        ("psi", "dimensionless", "psi(x)"),
        ("far_field", "dimensionless", "A |x|^{2-d} with A = beta Gamma(d/2 - 1) / (4 pi^{d/2})"),
    );
    for (rep, v, size) in pair.field.orbits() {
        let mut row: Vec<Cell> = rep.iter().map(|&c| Cell::Int(c as i64)).collect();
        row.extend([
            Cell::Int(rep[0] as i64),
            Cell::Num(size),
            Cell::Num(v),
            Cell::opt(norm_sq.map(|n| v * v / n)),
        ]);
        data.push(row);
        let r = rep_norm(rep);
        if let (Some(a), true) = (far, r > 0.0) {
            plot.push(plot_row("far_field", r, v, Some(a * r.powf(2.0 - d as f64))));
        }
    }
    let mut exp = experiment(data, far.map(|_| plot));
    exp.summary.insert("lambda0".into(), described(num_value(pair.lambda0), "1/time", "ground-state energy: largest eigenvalue of Delta + beta delta_0"));
    exp.summary.insert(
        "max_residual".into(),
        described(num_value(pair.max_residual()), "1/time", "max over the box interior of |Delta psi + beta delta_0 psi - lambda0 psi|"),
    );
    exp.summary.insert("norm_sq".into(), described(opt_num(norm_sq), "dimensionless", "||psi||^2 by Parseval"));
    Ok(exp)
}

#[derive(Clone, Copy, PartialEq)]
enum Curve {
    HeatKernel,
    Partition,
}

/// Printed and verified predictions at criticality for a time `t`.
fn critical_prediction(table: &SpectralTable, curve: Curve, t: f64) -> Option<(f64, f64)> {
    let d = table.dim;
    if !table.is_transient() || t <= 0.0 || (d == 4 && t <= 1.0) {
        return None;
    }
    let (nominal, verified) = match curve {
        Curve::HeatKernel => (table.c_d?, table.heat_kernel_constant?),
        Curve::Partition => (table.d_d?, table.partition_constant?),
    };
    let (p_scale, v_scale) = match (curve, d) {
        (Curve::HeatKernel, 3) => (t.sqrt().recip(), t.sqrt().recip()),
        (Curve::HeatKernel, 4) => (t.ln().recip(), t.ln().recip()),
        // The conventional statement reads t p -> c_d; the limit is p -> c_d.
        (Curve::HeatKernel, _) => (t.recip(), 1.0),
        (Curve::Partition, 3) => (t.sqrt(), t.sqrt()),
        (Curve::Partition, 4) => (t / t.ln(), t / t.ln()),
        (Curve::Partition, _) => (t, t),
    };
    Some((nominal * p_scale, verified * v_scale))
}

fn kernel_curve(config: &RunConfig, table: &SpectralTable, beta: f64, curve: Curve) -> Result<Experiment> {
    let d = config.dim;
    let t_max = config.t;
    let nodes = t_max / config.step;
    let use_volterra = nodes <= VOLTERRA_MAX_NODES;
    let points: Vec<(f64, f64)> = if use_volterra {
        let grid = TimeGrid::new(t_max, config.step)?;
        let kernel = solve_pinned_diag(beta, &grid, d)?;
        let values = match curve {
            Curve::HeatKernel => kernel.pbeta_diag.clone(),
            Curve::Partition => kernel.partition_curve().z_values,
        };
        let n = values.len();
        let stride = n.div_ceil(CURVE_ROWS).max(1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        idx.into_iter().map(|j| (grid.values()[j], values[j])).collect()
    } else {
        laplace_times(t_max)
            .into_iter()
            .map(|t| {
                let v = match curve {
                    Curve::HeatKernel => inverse_laplace_diag(beta, t, d)?,
                    Curve::Partition => inverse_laplace_partition(beta, t, d)?,
                };
                Ok((t, v))
            })
            .collect::<Result<_>>()?
    };
    let critical_now = table.is_critical(beta);
    let (obs_name, obs_units, obs_def) = match curve {
        Curve::HeatKernel => ("p_beta", "probability", "p_beta(t, 0, 0) = E^0[e^{beta L_t}; x_t = 0]"),
        Curve::Partition => ("z", "dimensionless", "Z_{beta,t}(0) = E^0[e^{beta L_t}]"),
    };
    let mut data = Table::new(vec![
        column("t", "time", "time"),
        column(obs_name, obs_units, obs_def),
        column("predicted_nominal", obs_units, "critical asymptotics with the conventionally stated constant (c_d or d_d)"),
        column("ratio_nominal", "dimensionless", "observed / predicted_nominal"),
        column("predicted", obs_units, "critical asymptotics with the limit constant actually attained"),
        column("ratio", "dimensionless", "observed / predicted"),
    ]);
    let mut plot = plot_table(("t", "time", "time"), (obs_name, obs_units, obs_def), ("predicted", obs_units, "critical asymptotics"));
    for (t, v) in points {
        let pred = if critical_now { critical_prediction(table, curve, t) } else { None };
        data.push(vec![
            Cell::Num(t),
            Cell::Num(v),
            Cell::opt(pred.map(|p| p.0)),
            Cell::opt(pred.map(|p| v / p.0)),
            Cell::opt(pred.map(|p| p.1)),
            Cell::opt(pred.map(|p| v / p.1)),
        ]);
        if let Some((nominal, verified)) = pred {
            plot.push(plot_row("nominal_constant", t, v, Some(nominal)));
            plot.push(plot_row("limit_constant", t, v, Some(verified)));
        }
    }
    let has_plot = !plot.rows.is_empty();
    let mut exp = experiment(data, has_plot.then_some(plot));
    exp.summary.insert(
        "method".into(),
        described(if use_volterra { "volterra" } else { "inverse-laplace" }, "label", "volterra: renewal equation on the grid; inverse-laplace: contour inversion at log-spaced times"),
    );
    Ok(exp)
}

/// Ten log-spaced times per decade from 1 (or `t_max` when smaller) up to `t_max`.
fn laplace_times(t_max: f64) -> Vec<f64> {
    if t_max <= 1.0 {
        return vec![t_max];
    }
    let decades = t_max.log10();
    let n = (decades * LAPLACE_POINTS_PER_DECADE as f64).floor() as usize;
    let mut out: Vec<f64> = (0..=n)
        .map(|k| 10f64.powf(k as f64 / LAPLACE_POINTS_PER_DECADE as f64))
        .filter(|&t| t < t_max * (1.0 - 1e-12))
        .collect();
    out.push(t_max);
    out
}

fn ensemble(config: &RunConfig, beta: f64) -> Result<WeightedEnsemble> {
    let (t, n, d, seed) = (config.t, config.samples, config.dim, config.seed);
    Ok(match config.sampler {
        SamplerKind::Renewal => sample_gibbs_paths(t, n, beta, d, seed, config.step)?,
        SamplerKind::Free => sample_free_paths(t, n, beta, d, seed)?,
    })
}

fn ensemble_summary(exp: &mut Experiment, ens: &WeightedEnsemble) {
    let (z, se) = ens.partition_estimate();
    exp.summary.insert("ess".into(), described(num_value(ens.ess), "count", "effective sample size (sum w)^2 / sum w^2"));
    exp.summary.insert("z_estimate".into(), described(num_value(z), "dimensionless", "mean weight, an unbiased estimate of Z_{beta,t}(0)"));
    exp.summary.insert("z_stderr".into(), described(num_value(se), "dimensionless", "standard error of z_estimate"));
}

fn sigma(config: &RunConfig, beta: f64) -> Result<Experiment> {
    let ens = ensemble(config, beta)?;
    let report = sigma_distribution(&ens)?;
    let mut data = Table::new(vec![
        column("u_bin", "dimensionless", "bin centre of u = sigma_t / t"),
        column("u_lo", "dimensionless", "bin lower edge"),
        column("u_hi", "dimensionless", "bin upper edge"),
        column("weighted_density", "dimensionless", "weighted histogram density of sigma_t / t"),
        column("limit_density", "dimensionless", "bin average of the limit density 1/(2 sqrt(u)) (d = 3) or 1 (d = 4)"),
        column("ks_stat", "dimensionless", "weighted Kolmogorov-Smirnov distance to the limit CDF (same on every row)"),
    ]);
    let mut plot = plot_table(
        ("u_bin", "dimensionless", "bin centre of sigma_t / t"),
        ("weighted_density", "dimensionless", "weighted histogram density"),
        ("limit_density", "dimensionless", "limit density averaged over the bin"),
    );
    for b in &report.bins {
        let mid = 0.5 * (b.u_lo + b.u_hi);
        data.push(vec![
            Cell::Num(mid),
            Cell::Num(b.u_lo),
            Cell::Num(b.u_hi),
            Cell::Num(b.weighted_density),
            Cell::Num(b.limit_density),
            Cell::Num(report.ks),
        ]);
        plot.push(plot_row("density", mid, b.weighted_density, Some(b.limit_density)));
    }
    let mut exp = experiment(data, Some(plot));
    ensemble_summary(&mut exp, &ens);
    exp.summary.insert("ks".into(), described(num_value(report.ks), "dimensionless", "weighted Kolmogorov-Smirnov distance"));
    exp.summary.insert("mean".into(), described(num_value(report.mean), "dimensionless", "weighted mean of sigma_t / t"));
    let limit_mean = if config.dim == 3 { 1.0 / 3.0 } else { 0.5 };
    exp.summary.insert("limit_mean".into(), described(num_value(limit_mean), "dimensionless", "mean of the limit law"));
    Ok(exp)
}

fn clt(config: &RunConfig, beta: f64) -> Result<Experiment> {
    let d = config.dim;
    let ens = ensemble(config, beta)?;
    let mut zeta = vec![0.0; d];
    zeta[0] = 1.0;
    let report = endpoint_statistics(&ens, &zeta)?;
    let mut data = Table::new(vec![
        column("direction", "label", "axis: e_1; diagonal: (1, ..., 1) / sqrt(d)"),
        column("phi_norm", "dimensionless", "|phi|; the argument is phi_norm times the direction"),
        column("ecf_real", "dimensionless", "real part of the weighted empirical characteristic function of x_t / sqrt(t)"),
        column("ecf_imag", "dimensionless", "imaginary part of the same"),
        column("limit_cf", "dimensionless", "characteristic function of the Gaussian-mixture limit"),
    ]);
    let mut plot = plot_table(
        ("phi_norm", "dimensionless", "|phi|"),
        ("ecf_real", "dimensionless", "real part of the empirical characteristic function"),
        ("limit_cf", "dimensionless", "limit characteristic function"),
    );
    for row in &report.cf {
        let dir = if row.direction.iter().filter(|&&c| c != 0.0).count() == 1 { "axis" } else { "diagonal" };
        data.push(vec![
            Cell::Text(dir.into()),
            Cell::Num(row.phi_norm),
            Cell::Num(row.ecf_real),
            Cell::Num(row.ecf_imag),
            Cell::Num(row.limit_cf),
        ]);
        plot.push(plot_row(dir, row.phi_norm, row.ecf_real, Some(row.limit_cf)));
    }
    let mut exp = experiment(data, Some(plot));
    ensemble_summary(&mut exp, &ens);
    let s = &mut exp.summary;
    s.insert("variance_ratio".into(), described(num_value(report.variance_ratio), "dimensionless", "E<e_1, x_t>^2 / t"));
    s.insert(
        "normalized_variance_ratio".into(),
        described(num_value(report.normalized_variance_ratio), "dimensionless", "variance_ratio / 2, relative to the free walk's 2t"),
    );
    s.insert(
        "limit_variance_ratio".into(),
        described(opt_num(mixture_variance_ratio(d).ok()), "dimensionless", "limit of variance_ratio"),
    );
    s.insert("max_offdiag".into(), described(num_value(report.max_offdiag), "dimensionless", "max |Cov(x_t)_{ij}| / t over i != j"));
    s.insert("cf_sup_error".into(), described(num_value(report.cf_sup_error), "dimensionless", "sup over the grid of |ecf - limit_cf|"));
    s.insert("covariance".into(), described(serde_json::json!(report.covariance), "dimensionless", "Cov(x_t) / t"));
    Ok(exp)
}

fn h_chain(config: &RunConfig, table: &SpectralTable, beta: f64) -> Result<Experiment> {
    let d = config.dim;
    let pair = pair_for(table, beta, config.box_radius)?;
    let norm_sq = pair.parseval_norm_sq()?;
    let run = simulate_h_chain(&pair, config.t, config.seed)?;
    let mut orbits: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (x, occ) in &run.state.occupation {
        *orbits.entry(x.canonical()).or_insert(0.0) += occ / run.state.clock;
    }
    let mut cols = coord_columns(d);
    cols.extend([
        column("orbit_size", "count", "number of sites in the orbit"),
        column("occupation", "probability", "fraction of the run spent in the orbit"),
        column("pi_orbit", "probability", "stationary probability of the orbit, orbit_size psi^2 / ||psi||^2"),
    ]);
    let mut data = Table::new(cols);
    let mut plot = plot_table(
        ("radius", "lattice units", "|x|_2 of the orbit"),
        ("occupation", "probability", "fraction of time in the orbit"),
        ("pi_orbit", "probability", "stationary probability of the orbit"),
    );
    for (rep, occ) in &orbits {
        let x = LatticePoint::new(rep.iter().map(|&c| c as i64).collect())?;
        let size = homopolymer::field::orbit_size(rep);
        let psi = pair.psi(&x)?;
        let pi = size * psi * psi / norm_sq;
        let mut row: Vec<Cell> = rep.iter().map(|&c| Cell::Int(c as i64)).collect();
        row.extend([Cell::Num(size), Cell::Num(*occ), Cell::Num(pi)]);
        data.push(row);
        plot.push(plot_row("occupation", rep_norm(rep), *occ, Some(pi)));
    }
    let mut exp = experiment(data, Some(plot));
    let s = &mut exp.summary;
    let target = 1.0 / norm_sq;
    s.insert("origin_fraction".into(), described(num_value(run.origin_fraction), "probability", "fraction of time at the origin"));
    s.insert("origin_stderr".into(), described(num_value(run.origin_stderr), "probability", "batch-means standard error of origin_fraction"));
    s.insert("pi_origin".into(), described(num_value(target), "probability", "1 / ||psi||^2"));
    s.insert(
        "z_score".into(),
        described(num_value((run.origin_fraction - target) / run.origin_stderr), "dimensionless", "(origin_fraction - pi_origin) / origin_stderr"),
    );
    s.insert("jumps".into(), described(run.jumps, "count", "number of jumps"));
    s.insert("max_excursion".into(), described(run.max_excursion, "lattice units", "largest |x|_inf reached"));
    s.insert(
        "max_exit_rate_error".into(),
        described(num_value(run.max_exit_rate_error), "1/time", "largest deviation of the total jump rate from 2d - beta delta_0 + lambda0"),
    );
    let radii: Vec<i64> = [2, 4, 8, 16, 32, 64].into_iter().filter(|&r| r <= run.max_excursion).collect();
    if radii.len() >= 3 {
        for k in 0..=2u32 {
            let g = run.radial_moment_growth(k, &radii)?;
            s.insert(
                format!("moment_growth_k{k}"),
                described(num_value(g.increment_ratio), "dimensionless", "fitted growth factor of the radial occupation moment increments per doubling of radius; above 0.75 reads as divergent"),
            );
        }
    }
    Ok(exp)
}

fn moments(config: &RunConfig, table: &SpectralTable, beta: f64) -> Result<Experiment> {
    let d = config.dim;
    let pair = pair_for(table, beta, config.box_radius)?;
    let measure = stationary_measure(&pair)?;
    let mut radii: Vec<i64> = (0..).map(|k| 1i64 << k).take_while(|&r| r < config.box_radius).collect();
    radii.push(config.box_radius);
    let mut data = Table::new(vec![
        column("k", "count", "moment order"),
        column("radius", "lattice units", "partial sums cover |x|_inf <= radius"),
        column("partial_sum", "lattice units^k", "sum of |x|_2^k pi(x) over the box"),
    ]);
    let mut exp_summary = BTreeMap::new();
    for k in 0..=3u32 {
        let sums = measure.moment_partial_sums(k, &radii)?;
        for (r, s) in radii.iter().zip(&sums) {
            data.push(vec![Cell::Int(k as i64), Cell::Int(*r), Cell::Num(*s)]);
        }
        if radii.len() >= 3 {
            let g = measure.moment_growth(k, &radii)?;
            exp_summary.insert(
                format!("growth_k{k}"),
                described(num_value(g.increment_ratio), "dimensionless", "fitted growth factor of partial-sum increments per doubling of radius"),
            );
            exp_summary.insert(format!("diverges_k{k}"), described(g.diverges(), "boolean", "growth factor at or above 0.75"));
        }
        if table.is_critical(beta) {
            exp_summary.insert(
                format!("finite_k{k}"),
                described(d >= k as usize + 5, "boolean", "the k-th moment of pi at beta_d is finite iff d >= k + 5"),
            );
        }
    }
    let mut exp = experiment(data, None);
    exp.summary = exp_summary;
    exp.summary.insert("box_mass".into(), described(num_value(measure.box_mass()), "probability", "pi mass inside the box"));
    Ok(exp)
}

fn escape(config: &RunConfig, table: &SpectralTable) -> Result<Experiment> {
    let e = estimate_escape_probability(config.dim, config.t, config.samples, config.seed)?;
    let mut data = Table::new(vec![
        column("dim", "count", "lattice dimension"),
        column("t_cut", "time", "horizon of each trial"),
        column("samples", "count", "number of trials"),
        column("raw", "probability", "fraction of walks from a random neighbour of 0 that avoid 0 up to t_cut"),
        column("value", "probability", "raw corrected for returns after t_cut"),
        column("stderr", "probability", "binomial standard error"),
        column("bias_bound", "count", "expected arrivals at 0 after t_cut, an upper bound on raw - e_d"),
        column("spectral_e_d", "probability", "beta_d / (2d) from the Green function"),
        column("z_score", "dimensionless", "(value - spectral_e_d) / stderr"),
        column("note", "text", "remarks"),
    ]);
    let z = (e.stderr > 0.0).then(|| (e.value - table.escape_prob) / e.stderr);
    data.push(vec![
        Cell::Int(e.dim as i64),
        Cell::Num(e.t_cut),
        Cell::Int(e.samples as i64),
        Cell::Num(e.raw),
        Cell::Num(e.value),
        Cell::Num(e.stderr),
        Cell::Num(e.bias_bound),
        Cell::Num(table.escape_prob),
        Cell::opt(z),
        Cell::Text(e.note.unwrap_or_default()),
    ]);
    Ok(experiment(data, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_times_end_at_the_horizon() {
        let ts = laplace_times(1e3);
        assert_eq!(ts.len(), 31);
        assert_eq!(*ts.last().unwrap(), 1e3);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(laplace_times(0.5), vec![0.5]);
    }

    #[test]
    fn critical_predictions_use_the_right_scale() {
        let t3 = critical_beta(3).unwrap();
        let (p, v) = critical_prediction(&t3, Curve::HeatKernel, 100.0).unwrap();
        assert!((p / v - 2.0).abs() < 1e-12);
        let t5 = critical_beta(5).unwrap();
        let (p, v) = critical_prediction(&t5, Curve::HeatKernel, 10.0).unwrap();
        assert!((v / p - 10.0).abs() < 1e-12);
        assert!(critical_prediction(&critical_beta(4).unwrap(), Curve::Partition, 1.0).is_none());
    }
}
