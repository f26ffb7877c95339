use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use subharmonic::bloch::{self, QuadratureRule};
use subharmonic::experiments;
use subharmonic::grids::{periodize, zero_extend, LineFunction};
use subharmonic::io::{self as sio, SampledFunction};
use subharmonic::lle::{self, LLEParams, NewtonOptions, PeriodicWave, StabilityOptions};
use subharmonic::semigroup::{self, LineResolution, OperatorSpec};

#[derive(Parser)]
#[command(name = "subharmonic", version, about = "Bloch-transform experiments for subharmonic and localized data")]
struct Cli {
    /// Directory for (x, y) series files.
    #[arg(long, global = true)]
    plot_data: Option<PathBuf>,
    /// Worker threads for the ξ and n sweeps.
    #[arg(long, env = "BLOCH_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ResolutionArgs {
    /// Fourier modes kept on each side of each Bloch block.
    #[arg(long, default_value_t = semigroup::DEFAULT_MODES)]
    modes: usize,
    #[arg(long, default_value_t = 256)]
    xi_nodes: usize,
    /// midpoint, trapezoid or gauss.
    #[arg(long, default_value = "midpoint")]
    rule: QuadratureRule,
}

impl From<ResolutionArgs> for LineResolution {
    fn from(r: ResolutionArgs) -> Self {
        LineResolution { modes: r.modes, xi_nodes: r.xi_nodes, rule: r.rule }
    }
}

#[derive(Args)]
struct Problem {
    #[arg(long)]
    operator: PathBuf,
    #[arg(long)]
    datum: PathBuf,
    /// Background period; defaults to the period of the operator coefficient.
    #[arg(long)]
    period: Option<f64>,
    #[command(flatten)]
    res: ResolutionArgs,
}

#[derive(Args)]
struct LleArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    forcing: f64,
    #[arg(long)]
    period: f64,
}

impl LleArgs {
    fn params(&self) -> Result<LLEParams> {
        let p = LLEParams::new(self.alpha, self.beta, self.forcing, self.period)?;
        warn_dispersion(&p);
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bloch transform of a function JSON; emits family JSON.
    Bloch {
        #[arg(long)]
        input: PathBuf,
        /// Period for line data.
        #[arg(long)]
        period: Option<f64>,
        #[arg(long, default_value_t = 256)]
        xi_nodes: usize,
        #[arg(long, default_value = "midpoint")]
        rule: QuadratureRule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// e^{tA} applied to a function JSON; emits a JSON array, one function per t.
    Evolve {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence over a period for a schedule of n; emits CSV.
    Converge {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// sup over a dense time grid of the convergence error; emits CSV.
    Uniformity {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<usize>,
        #[arg(long, default_value_t = 4.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.1)]
        t_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averages of an oscillatory sequence built from the datum; emits CSV.
    Average {
        #[command(flatten)]
        problem: Problem,
        /// n_j of the sequence members.
        #[arg(long, value_delimiter = ',', required = true)]
        periods: Vec<usize>,
        /// q_j of the sequence members; defaults to 1, 2, 3, ...
        #[arg(long, value_delimiter = ',')]
        frequencies: Vec<f64>,
        /// w in the envelope exp(-x²/w).
        #[arg(long, default_value_t = 8.0)]
        envelope_width: f64,
        #[arg(long = "m", value_delimiter = ',', required = true)]
        m_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Envelope diagnostic for the family of evolved periodic solutions; emits CSV.
    Domination {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All constant states; emits a JSON array of waves.
    LleConstant {
        #[command(flatten)]
        params: LleArgs,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Newton solve for a periodic profile; emits wave JSON.
    LleProfile {
        #[command(flatten)]
        params: LleArgs,
        /// Initial guess as wave JSON; otherwise a seeded constant state.
        #[arg(long)]
        guess: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Which constant state to seed from, by increasing intensity.
        #[arg(long, default_value_t = 0)]
        base_index: usize,
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        seed_amplitude: f64,
        #[arg(long, default_value_t = 1)]
        seed_mode: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectra of the Bloch operators at the given ξ; emits JSON.
    LleSpectrum {
        #[arg(long)]
        wave: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xi: Vec<f64>,
        #[arg(long, default_value_t = semigroup::DEFAULT_MODES)]
        modes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral stability verdict; emits verdict JSON and a (ξ, max Re λ) CSV.
    LleStability {
        #[arg(long)]
        wave: PathBuf,
        #[arg(long, default_value_t = semigroup::DEFAULT_MODES)]
        modes: usize,
        #[arg(long, default_value_t = 129)]
        xi_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn warn_dispersion(p: &LLEParams) {
    if !p.is_standard_dispersion() {
        eprintln!("warning: beta = {} is not ±1; results are outside the usual normalization", p.beta);
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = sink(path)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    sio::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

struct Plot(Option<PathBuf>);

impl Plot {
    fn series(&self, name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
        let Some(dir) = &self.0 else { return Ok(()) };
        fs::create_dir_all(dir)?;
        let mut w = io::BufWriter::new(File::create(dir.join(format!("{name}.dat")))?);
        for (x, y) in points {
            writeln!(w, "{x:e} {y:e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

fn load_problem(p: &Problem) -> Result<(OperatorSpec, SampledFunction, f64)> {
    let op = sio::operator_from_json(&read(&p.operator)?)?;
    let datum = SampledFunction::from_json(&read(&p.datum)?)?;
    let period = match (p.period, op.coefficient(), &datum) {
        (Some(t), _, _) => t,
        (None, Some(c), _) => c.period(),
        (None, None, SampledFunction::Periodic(g)) => g.grid().period(),
        (None, None, SampledFunction::Line(_)) => bail!("--period is required for line data and a constant-coefficient operator"),
    };
    Ok((op, datum, period))
}

fn load_line(p: &Problem) -> Result<(OperatorSpec, LineFunction, f64)> {
    let (op, datum, period) = load_problem(p)?;
    Ok((op, datum.into_line().context("this command needs a line datum")?, period))
}

#[derive(Serialize)]
struct AverageRow {
    m: usize,
    n_m: usize,
    strong: f64,
    t: f64,
    evolved: f64,
}

#[derive(Serialize)]
struct DominationRow {
    t: f64,
    norm: f64,
    half_norm: f64,
    plausible: bool,
}

#[derive(Serialize)]
struct SpectrumJson {
    xi: f64,
    eigenvalues: Vec<[f64; 2]>,
}

fn run(cli: Cli) -> Result<bool> {
    let plot = Plot(cli.plot_data);
    match cli.command {
        Command::Bloch { input, period, xi_nodes, rule, out } => {
            let fam = match SampledFunction::from_json(&read(&input)?)? {
                SampledFunction::Periodic(g) => bloch::bloch_torus(&g),
                SampledFunction::Line(f) => {
                    let t = period.context("--period is required for line data")?;
                    bloch::bloch_line(&f, t, xi_nodes, rule, None)?
                }
            };
            plot.series("bloch_slice_norm", (0..fam.len()).map(|i| (fam.xi()[i], fam.slice_norm(i))))?;
            emit(out.as_deref(), &sio::family_to_json(&fam)?)?;
            Ok(true)
        }
        Command::Evolve { problem, times, out } => {
            let (op, datum, period) = load_problem(&problem)?;
            let outputs: Vec<String> = match datum {
                SampledFunction::Periodic(g) => semigroup::evolve_periodic_times(&op, &g, &times, problem.res.modes)?
                    .into_iter()
                    .map(|v| SampledFunction::Periodic(v).to_json())
                    .collect::<subharmonic::Result<_>>()?,
                SampledFunction::Line(f) => semigroup::evolve_line_times(&op, &f, period, &times, problem.res.into())?
                    .into_iter()
                    .map(|v| SampledFunction::Line(v).to_json())
                    .collect::<subharmonic::Result<_>>()?,
            };
            emit(out.as_deref(), &format!("[{}]", outputs.join(",")))?;
            Ok(true)
        }
        Command::Converge { problem, schedule, times, out, report } => {
            let (op, g, period) = load_line(&problem)?;
            let rep = experiments::run_convergence(&op, &g, period, &schedule, &times, problem.res.into())?;
            rep.write_csv(sink(out.as_deref())?)?;
            if let Some(path) = report {
                emit(Some(&path), &serde_json::to_string_pretty(&rep)?)?;
            }
            for (i, n) in rep.schedule.iter().enumerate() {
                plot.series(&format!("converge_n{n}"), rep.times.iter().copied().zip(rep.errors[i].iter().copied()))?;
            }
            let checks = rep.check_invariants();
            eprintln!("invariants: {checks:?}");
            Ok(checks.all())
        }
        Command::Uniformity { problem, schedule, t_max, t_step, out } => {
            if !(t_step > 0.0 && t_max >= 0.0) {
                bail!("need t_step > 0 and t_max >= 0");
            }
            let steps = (t_max / t_step).round() as usize;
            let t_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * t_step).collect();
            let (op, g, period) = load_line(&problem)?;
            let rep = experiments::run_uniformity(&op, &g, period, &schedule, &t_grid, problem.res.into())?;
            rep.report.write_csv(sink(out.as_deref())?)?;
            let ns = || rep.schedule.iter().map(|&n| n as f64);
            plot.series("uniformity_sup", ns().zip(rep.sup_errors.iter().copied()))?;
            plot.series("uniformity_delta", ns().zip(rep.baseline.iter().copied()))?;
            for (n, (s, d)) in rep.schedule.iter().zip(rep.sup_errors.iter().zip(&rep.baseline)) {
                eprintln!("n = {n}: sup_t E = {s:.6e}, delta_n = {d:.6e}");
            }
            eprintln!("spectral abscissa: {:.6e}", rep.spectral_abscissa);
            let checks = rep.report.check_invariants();
            eprintln!("invariants: {checks:?}, sup errors decreasing: {}", rep.decreasing());
            Ok(checks.all() && rep.decreasing())
        }
        Command::Average { problem, periods, frequencies, envelope_width, m_values, times, out } => {
            let (op, g, period) = load_line(&problem)?;
            let freqs = if frequencies.is_empty() {
                (1..=periods.len()).map(|j| j as f64).collect()
            } else {
                frequencies
            };
            let seq = experiments::oscillatory_sequence(&g, period, &periods, &freqs, |x| (-x * x / envelope_width).exp())?;
            let rep = experiments::run_averaged_convergence(&op, &seq, &g, &m_values, &times, problem.res.into())?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            for (i, &m) in rep.m_values.iter().enumerate() {
                for (k, &t) in rep.times.iter().enumerate() {
                    w.serialize(AverageRow {
                        m,
                        n_m: rep.periods[i],
                        strong: rep.strong_errors[i],
                        t,
                        evolved: rep.evolved_errors[i][k],
                    })?;
                }
            }
            w.flush()?;
            let ms: Vec<f64> = rep.m_values.iter().map(|&m| m as f64).collect();
            plot.series("average_strong", ms.iter().copied().zip(rep.strong_errors.iter().copied()))?;
            let (c, p) = rep.strong_rate();
            eprintln!("strong error fit: {c:.4} m^-{p:.4}");
            Ok(rep.strong_errors.windows(2).all(|w| w[1] < w[0]))
        }
        Command::Domination { problem, schedule, times, out } => {
            let (op, g, period) = load_line(&problem)?;
            let grid = *g.grid();
            let per_n: Vec<Vec<LineFunction>> = schedule
                .iter()
                .map(|&n| {
                    let gn = periodize(&g, n, period)?;
                    semigroup::evolve_periodic_times(&op, &gn, &times, problem.res.modes)?
                        .iter()
                        .map(|v| zero_extend(v, &grid))
                        .collect::<subharmonic::Result<Vec<_>>>()
                })
                .collect::<subharmonic::Result<_>>()?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            let mut all = true;
            for (k, &t) in times.iter().enumerate() {
                let family: Vec<LineFunction> = per_n.iter().map(|r| r[k].clone()).collect();
                let d = experiments::check_domination(&family)?;
                all &= d.plausible;
                let xs = grid.points();
                plot.series(&format!("domination_t{k}"), xs.into_iter().zip(d.envelope.values().iter().map(|z| z.re)))?;
                w.serialize(DominationRow { t, norm: d.norm, half_norm: d.half_norm, plausible: d.plausible })?;
            }
            w.flush()?;
            Ok(all)
        }
        Command::LleConstant { params, points, out } => {
            let p = params.params()?;
            let waves = lle::solve_constant_state(&p, points)?;
            let parts = waves.iter().map(sio::wave_to_json).collect::<subharmonic::Result<Vec<_>>>()?;
            for w in &waves {
                eprintln!("psi = {:+.12} {:+.12}i, residual {:.3e}", w.u()[0], w.v()[0], w.residual());
            }
            emit(out.as_deref(), &format!("[{}]", parts.join(",")))?;
            Ok(true)
        }
        Command::LleProfile { params, guess, points, base_index, seed_amplitude, seed_mode, out } => {
            let p = params.params()?;
            let start = match guess {
                Some(path) => sio::wave_from_json(&read(&path)?)?.phi().clone(),
                None => {
                    let states = lle::constant_amplitudes(&p)?;
                    let base = *states
                        .get(base_index)
                        .with_context(|| format!("only {} constant states exist", states.len()))?;
                    lle::seeded_guess(&p, base, seed_amplitude, seed_mode, points)?
                }
            };
            let report = lle::newton_profile(&p, &start, NewtonOptions::default())?;
            eprintln!(
                "Newton: {} iterations, residual {:.3e}, converged {}",
                report.iterations,
                report.wave.residual(),
                report.converged
            );
            emit(out.as_deref(), &sio::wave_to_json(&report.wave)?)?;
            Ok(report.converged)
        }
        Command::LleSpectrum { wave, xi, modes, out } => {
            let wave = load_wave(&wave)?;
            let rows = xi
                .iter()
                .map(|&x| {
                    let eig = lle::bloch_spectrum(&wave, x, modes)?;
                    Ok(SpectrumJson { xi: x, eigenvalues: eig.iter().map(|z: &Complex64| [z.re, z.im]).collect() })
                })
                .collect::<Result<Vec<_>>>()?;
            for r in &rows {
                plot.series(&format!("spectrum_xi{:+.6}", r.xi), r.eigenvalues.iter().map(|z| (z[0], z[1])))?;
            }
            emit(out.as_deref(), &serde_json::to_string(&rows)?)?;
            Ok(true)
        }
        Command::LleStability { wave, modes, xi_samples, out, csv: csv_path } => {
            let wave = load_wave(&wave)?;
            let opts = StabilityOptions { modes, xi_samples, ..Default::default() };
            let v = lle::stability_check(&wave, opts)?;
            if let Some(path) = csv_path {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["xi", "max_re"])?;
                for s in &v.samples {
                    w.write_record([s.xi.to_string(), s.max_re.to_string()])?;
                }
                w.flush()?;
            }
            plot.series("stability", v.samples.iter().map(|s| (s.xi, s.max_re)))?;
            eprintln!("verdict: {:?}", v.verdict);
            emit(out.as_deref(), &serde_json::to_string_pretty(&v)?)?;
            Ok(true)
        }
    }
}

fn load_wave(path: &Path) -> Result<PeriodicWave> {
    let wave = sio::wave_from_json(&read(path)?)?;
    warn_dispersion(wave.params());
    if !wave.is_accepted() {
        eprintln!("warning: wave residual {:.3e} is above the acceptance tolerance", wave.residual());
    }
    Ok(wave)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
