//! The subcommands. Each writes its artifacts and a `manifest.toml` into the
//! output directory.

use std::io::Write;
use std::path::Path;

use deltadual::experiment::initial_frame;
use deltadual::forward::{
    solve_forward_linear, solve_forward_nonlinear, ForwardError, ForwardTrajectory, IterationDiagnostic,
};
use deltadual::validation::{run_all, CheckResult};
use deltadual::volatility::{load_surface, VolSurface};
use deltadual::PdeSolution;
use serde::Serialize;

use crate::config::RunConfig;
use crate::svg::{heatmap, line_plot, Series};
use crate::CliError;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_at_money: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_c_star_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_c_star_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_step_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<usize>,
    /// Last Picard change of each step.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub final_changes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<Divergence>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub step: usize,
    pub iterations: usize,
    pub last_change: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    artifacts: Vec<String>,
    run: &'a RunConfig,
    results: &'a Results,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    diagnostics: &'a [IterationDiagnostic],
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Out<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn file(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
        let path = self.dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(std::io::BufWriter::new(f))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut w = self.file(name)?;
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::Io(e.to_string()))
    }

    fn manifest(
        mut self,
        command: &str,
        run: &RunConfig,
        results: &Results,
        diagnostics: &[IterationDiagnostic],
    ) -> Result<(), CliError> {
        self.written.push("manifest.toml".into());
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            artifacts: self.written.clone(),
            run,
            results,
            diagnostics,
        };
        let body = toml::to_string(&m).map_err(|e| CliError::Io(format!("manifest: {e}")))?;
        std::fs::write(self.dir.join("manifest.toml"), body).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn surface(cfg: &RunConfig) -> Result<VolSurface<f64>, CliError> {
    match &cfg.surface {
        Some(p) => Ok(load_surface::<f64>(p)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            .recentered(cfg.strike)),
        None => cfg
            .experiment()
            .default_surface()
            .map_err(|e| CliError::Config(e.to_string())),
    }
}

fn backward_solution(cfg: &RunConfig, s: &VolSurface<f64>) -> Result<PdeSolution<f64>, CliError> {
    cfg.experiment().backward(s).map_err(|e| CliError::Solver(e.to_string()))
}

fn spot_axis(cfg: &RunConfig, sol: &PdeSolution<f64>) -> Vec<f64> {
    sol.grid.nodes().iter().map(|&x| x + cfg.strike).collect()
}

fn write_backward(out: &mut Out, cfg: &RunConfig, sol: &PdeSolution<f64>) -> Result<(), CliError> {
    sol.write_csv(out.file("backward.csv")?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let s = spot_axis(cfg, sol);
    let last = sol.levels() - 1;
    out.text(
        "value.svg",
        &line_plot(
            "Call value",
            "spot",
            "value",
            &[
                Series::new("t = 0", &s, &sol.values[0]),
                Series::new("t = T", &s, &sol.values[last]),
            ],
        ),
    )?;
    out.text(
        "delta.svg",
        &line_plot("Delta at t = 0", "spot", "delta", &[Series::new("delta", &s, &sol.deltas[0])]),
    )?;
    out.text(
        "gamma.svg",
        &line_plot("Gamma at t = 0", "spot", "gamma", &[Series::new("gamma", &s, &sol.gammas[0])]),
    )
}

fn at_money(sol: &PdeSolution<f64>) -> f64 {
    let x = sol.grid.nodes();
    let i = x
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    sol.values[0][i]
}

pub fn backward(cfg: &RunConfig) -> Result<(), CliError> {
    let s = surface(cfg)?;
    let sol = backward_solution(cfg, &s)?;
    let mut out = Out::new(&cfg.out)?;
    write_backward(&mut out, cfg, &sol)?;
    let results = Results {
        value_at_money: Some(at_money(&sol)),
        space_nodes: Some(sol.grid.len()),
        levels: Some(sol.levels()),
        ..Default::default()
    };
    out.manifest("backward", cfg, &results, &[])
}

fn write_trajectory_csv<W: Write>(tr: &ForwardTrajectory<f64>, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["t", "p", "c_star", "x_map", "v"]).map_err(io)?;
    for (f, v) in tr.frames.iter().zip(&tr.delta_vol) {
        for i in 0..f.len() {
            w.write_record(&[
                f.t.to_string(),
                f.p.nodes()[i].to_string(),
                f.c_star[i].to_string(),
                f.x_map[i].to_string(),
                v[i].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn write_forward(out: &mut Out, cfg: &RunConfig, tr: &ForwardTrajectory<f64>, family: bool) -> Result<(), CliError> {
    write_trajectory_csv(tr, out.file("forward.csv")?)?;
    let p = tr.frames[0].p.nodes().to_vec();
    let times = tr.times();
    let last = tr.frames.len() - 1;
    let picks: Vec<usize> = if family {
        let stride = (last / 10).max(1);
        let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
        if *v.last().unwrap() != last {
            v.push(last);
        }
        v
    } else {
        vec![0, last]
    };
    let series: Vec<Series> = picks
        .iter()
        .map(|&k| Series::new(format!("t = {:.2}", times[k]), &p, &tr.frames[k].c_star))
        .collect();
    out.text("c_star.svg", &line_plot("Conjugate price c*(p, t)", "p", "c*", &series))?;
    out.text(
        "delta_vol.svg",
        &heatmap("Delta volatility v(p, t)", "p", "t", &p, &times, &tr.delta_vol),
    )?;
    let maps: Vec<Vec<f64>> = tr
        .frames
        .iter()
        .map(|f| f.x_map.iter().map(|&x| x + cfg.strike).collect())
        .collect();
    out.text("x_map.svg", &heatmap("Map S(p, t)", "p", "t", &p, &times, &maps))?;
    let steps: Vec<f64> = (1..=tr.report.counts.len()).map(|k| k as f64).collect();
    let counts: Vec<f64> = tr.report.counts.iter().map(|&c| c as f64).collect();
    if !counts.is_empty() {
        out.text(
            "iterations.svg",
            &line_plot("Picard iterations per step", "step", "iterations", &[Series::new("count", &steps, &counts)]),
        )?;
    }
    Ok(())
}

fn forward_results(tr: &ForwardTrajectory<f64>, sol: &PdeSolution<f64>) -> Results {
    Results {
        value_at_money: Some(at_money(sol)),
        space_nodes: Some(sol.grid.len()),
        delta_nodes: Some(tr.frames[0].len()),
        levels: Some(tr.frames.len()),
        max_abs_c_star_initial: Some(max_abs(&tr.frames[0].c_star)),
        max_abs_c_star_final: tr.frames.last().map(|f| max_abs(&f.c_star)),
        first_step_iterations: tr.report.counts.first().copied(),
        steady_state_iterations: (!tr.report.counts.is_empty()).then(|| tr.report.steady_state()),
        iterations: tr.report.counts.clone(),
        final_changes: tr
            .report
            .residuals
            .iter()
            .map(|h| h.last().copied().unwrap_or(0.0))
            .collect(),
        diverged: None,
    }
}

fn forward(cfg: &RunConfig, linear: bool) -> Result<(), CliError> {
    let s = surface(cfg)?;
    let sol = backward_solution(cfg, &s)?;
    let f0 = initial_frame(&sol).map_err(|e| CliError::Solver(e.to_string()))?;
    let fc = cfg.forward();
    let run = if linear {
        solve_forward_linear(&f0, &sol, &s, cfg.maturity, cfg.n_time, &fc)
    } else {
        solve_forward_nonlinear(&f0, &s, cfg.maturity, cfg.n_time, &fc)
    };
    let (tr, failure) = match run {
        Ok(tr) => (tr, None),
        Err(ForwardError::Diverged {
            step,
            iterations,
            last,
            partial,
            ..
        }) => (
            *partial,
            Some(Divergence {
                step,
                iterations,
                last_change: last,
            }),
        ),
        Err(ForwardError::Core(e)) => return Err(CliError::Solver(e.to_string())),
    };
    let mut out = Out::new(&cfg.out)?;
    write_backward(&mut out, cfg, &sol)?;
    write_forward(&mut out, cfg, &tr, !linear)?;
    if linear {
        let x = sol.grid.nodes();
        let spot = spot_axis(cfg, &sol);
        let a: Vec<Vec<f64>> = sol
            .times
            .iter()
            .map(|&t| x.iter().map(|&xi| s.vol_at(xi, t)).collect())
            .collect();
        let mut w = csv::Writer::from_writer(out.file("local_vol.csv")?);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(["t", "x", "a"]).map_err(io)?;
        for (k, &t) in sol.times.iter().enumerate() {
            for (i, &xi) in x.iter().enumerate() {
                w.write_record(&[t.to_string(), xi.to_string(), a[k][i].to_string()])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        drop(w);
        out.text(
            "local_vol.svg",
            &heatmap("Local volatility a(S, t)", "spot", "t", &spot, &sol.times, &a),
        )?;
        out.text(
            "p_map.svg",
            &line_plot("Delta map p(S, 0)", "spot", "p", &[Series::new("p", &spot, &sol.deltas[0])]),
        )?;
    }
    let mut results = forward_results(&tr, &sol);
    results.diverged = failure.clone();
    let name = if linear { "forward-linear" } else { "forward-nonlinear" };
    out.manifest(name, cfg, &results, &tr.diagnostics)?;
    match failure {
        Some(d) => Err(CliError::Diverged(format!(
            "Picard iteration diverged at step {} after {} iterations (last change {:e}); partial results in {}",
            d.step,
            d.iterations,
            d.last_change,
            cfg.out.display()
        ))),
        None => Ok(()),
    }
}

pub fn forward_linear(cfg: &RunConfig) -> Result<(), CliError> {
    forward(cfg, true)
}

pub fn forward_nonlinear(cfg: &RunConfig) -> Result<(), CliError> {
    forward(cfg, false)
}

#[derive(Serialize)]
struct ValidationFile<'a> {
    passed: usize,
    failed: usize,
    checks: &'a [CheckResult],
}

/// Runs the acceptance checks, printing one line each.
pub fn validate(out_dir: &Path) -> Result<(), CliError> {
    let checks = run_all();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let file = ValidationFile {
        passed: checks.len() - failed,
        failed,
        checks: &checks,
    };
    let mut out = Out::new(out_dir)?;
    let body = toml::to_string(&file).map_err(|e| CliError::Io(e.to_string()))?;
    out.text("validation.toml", &body)?;
    println!("{} passed, {} failed", checks.len() - failed, failed);
    if failed > 0 {
        return Err(CliError::Validation(failed));
    }
    Ok(())
}
