use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mtpsk::config::ExperimentFile;
use mtpsk::freqplan::PlanDocument;
use mtpsk::harness::{papr_table, sweep, ModelKind, SweepAxes, TrialConfig, TrialRunner};
use mtpsk::modem_tx::{encode_bits, papr, phases_from_symbols, synthesize, PhaseVector};
use mtpsk::phase_stats::{analytic_bin_probabilities, empirical_phase_histogram, phase_density};
use mtpsk::{io as mio, plan_frequencies, RectifierConfig};

#[derive(Parser, Debug)]
#[command(name = "mtpsk", version, about = "Multitone PSK waveform and SWIPT link simulator")]
struct Cli {
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Experiment file (TOML, keys named after the trial config fields).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory. Without it, reports go to stdout and sample files
    /// to the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    SquareLaw,
    DiodeOde,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the frequency plan for a carrier and tone count.
    Plan(PlanArgs),
    /// Encode bits into a waveform file.
    Modulate {
        #[command(flatten)]
        trial: TrialArgs,
        /// Bit string such as 0110...; random bits from the seed otherwise.
        #[arg(long)]
        bits: Option<String>,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Run one stream through the full link and report it.
    Simulate {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Also write the constellation scatter CSV to the output directory.
        #[arg(long)]
        scatter: bool,
    },
    /// Run the grid from the config file's [sweep] table.
    Sweep {
        #[command(flatten)]
        trial: TrialArgs,
    },
    /// Mean PAPR against phase range for several tone counts.
    Papr {
        #[command(flatten)]
        trial: TrialArgs,
        /// Tone counts to tabulate.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        tone_counts: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,90,180,360")]
        deltas: Vec<f64>,
    },
    /// Analytic and empirical tone-phase densities.
    PhasePdf {
        /// Tone index n (the phase of tone n is the sum of n - 1 symbols).
        #[arg(long, default_value_t = 3)]
        tone: usize,
        #[arg(long, default_value_t = 4)]
        m_order: usize,
        #[arg(long, default_value_t = 360.0)]
        delta: f64,
        #[arg(long, default_value_t = 720)]
        points: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Evaluate the density before wrapping.
        #[arg(long)]
        unwrapped: bool,
    },
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long, default_value_t = 2_450_000_000)]
    fc: u64,
    #[arg(long, short = 'n', default_value_t = 6)]
    tones: usize,
    #[arg(long, default_value_t = 1_000_000)]
    gcd: u64,
    #[arg(long, short = 'r', default_value_t = 0)]
    spread: u32,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Default)]
struct TrialArgs {
    #[arg(long)]
    fc: Option<u64>,
    #[arg(long, short = 'n')]
    tones: Option<usize>,
    #[arg(long)]
    gcd: Option<u64>,
    #[arg(long, short = 'r')]
    spread: Option<u32>,
    #[arg(long, short = 'm')]
    m_order: Option<usize>,
    /// Phase range in degrees; 0 selects the aligned waveform.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    streams: Option<usize>,
    #[arg(long)]
    attenuation: Option<f64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    timing_offset: Option<f64>,
}

impl TrialArgs {
    fn apply(&self, cfg: &mut TrialConfig) {
        if let Some(v) = self.fc {
            cfg.f_c_hz = v;
        }
        if let Some(v) = self.tones {
            cfg.n_tones = v;
        }
        if let Some(v) = self.gcd {
            cfg.gcd_hz = v;
        }
        if let Some(v) = self.spread {
            cfg.r = v;
        }
        if let Some(v) = self.m_order {
            cfg.m_order = v;
        }
        if let Some(v) = self.delta {
            cfg.delta_deg = v;
        }
        if let Some(v) = self.p_in {
            cfg.p_in_dbm = v;
        }
        if let Some(m) = self.model {
            let kind = match m {
                Model::SquareLaw => ModelKind::SquareLaw,
                Model::DiodeOde => ModelKind::DiodeOde,
            };
            if ModelKind::of(&cfg.rectifier.model) != kind {
                let fresh = match kind {
                    ModelKind::SquareLaw => RectifierConfig::square_law(),
                    ModelKind::DiodeOde => RectifierConfig::diode(),
                };
                cfg.rectifier.model = fresh.model;
            }
        }
        if let Some(v) = self.streams {
            cfg.streams = v;
        }
        if let Some(v) = self.attenuation {
            cfg.impairments.attenuation_db = v;
        }
        if self.snr.is_some() {
            cfg.impairments.awgn_snr_db = self.snr;
        }
        if self.timing_offset.is_some() {
            cfg.impairments.timing_offset_s = self.timing_offset;
        }
    }
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentFile> {
        match &self.config {
            Some(p) => ExperimentFile::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(ExperimentFile::default()),
        }
    }

    fn trial(&self, args: &TrialArgs) -> Result<(TrialConfig, Option<SweepAxes>)> {
        let ExperimentFile { mut trial, sweep } = self.experiment()?;
        args.apply(&mut trial);
        if let Some(s) = self.seed {
            trial.seed = s;
        }
        Ok((trial, sweep))
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(d) = &self.out {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(self.out.as_deref())
    }

    /// Path for a sample or side file; falls back to the working directory.
    fn file_path(&self, name: &str) -> Result<PathBuf> {
        Ok(self.out_dir()?.unwrap_or(Path::new(".")).join(name))
    }

    /// Writes a report to `<out>/<name>` or stdout.
    fn emit(&self, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match self.out_dir()? {
            Some(d) => {
                let path = d.join(name);
                let mut f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
                write(&mut f)?;
                f.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)?;
                lock.flush()?;
            }
        }
        Ok(())
    }

    /// One-row CSV summary. Values must not contain commas.
    fn emit_row(&self, name: &str, fields: &[(&str, String)]) -> Result<()> {
        self.emit(name, |w| {
            let (head, vals): (Vec<&str>, Vec<&str>) = fields.iter().map(|(k, v)| (*k, v.as_str())).unzip();
            writeln!(w, "{}", head.join(","))?;
            writeln!(w, "{}", vals.join(","))?;
            Ok(())
        })
    }

    fn emit_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.emit(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => bail!("bit string may only contain 0 and 1, found {other:?}"),
        })
        .collect()
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Plan(a) => {
            let plan = plan_frequencies(a.fc, a.tones, a.gcd, a.spread)?;
            let doc = PlanDocument::from(plan);
            match cli.format {
                Format::Json => cli.emit_json("plan.json", &doc),
                Format::Csv => cli.emit("plan.csv", |w| {
                    writeln!(w, "tone,freq_hz,spacing_to_next_hz")?;
                    for (i, f) in doc.tones_hz.iter().enumerate() {
                        let k = doc.spacings_gcd_units.get(i).map(|k| (k * doc.gcd_hz).to_string());
                        writeln!(w, "{},{},{}", i + 1, f, k.unwrap_or_default())?;
                    }
                    Ok(())
                }),
            }
        }
        Cmd::Modulate { trial, bits, stream } => {
            let (cfg, _) = cli.trial(trial)?;
            let runner = TrialRunner::new(&cfg)?;
            let (bits, phases) = match bits {
                Some(s) => {
                    let bits = parse_bits(s)?;
                    let phases = match runner.constellation() {
                        Some(c) => phases_from_symbols(&encode_bits(&bits, c, cfg.n_tones)?, c),
                        None => PhaseVector::aligned(cfg.n_tones),
                    };
                    (bits, phases)
                }
                None => runner.stream_phases(*stream)?,
            };
            let w = synthesize(runner.plan(), &phases, cfg.p_in_dbm, runner.sample_rate_hz(), cfg.z0_ohm)?;
            let path = cli.file_path("waveform.bin")?;
            mio::write_waveform(BufWriter::new(File::create(&path)?), &w)
                .with_context(|| format!("writing {}", path.display()))?;
            let bit_string: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let papr_lin = papr(&w)?;
            match cli.format {
                Format::Json => cli.emit_json(
                    "waveform.json",
                    &serde_json::json!({
                        "file": path,
                        "bits": bit_string,
                        "phases_deg": phases,
                        "papr": papr_lin,
                        "sample_rate_hz": w.sample_rate_hz,
                        "n_samples": w.samples.len(),
                    }),
                ),
                Format::Csv => cli.emit_row(
                    "waveform.csv",
                    &[
                        ("file", path.display().to_string()),
                        ("bits", bit_string),
                        (
                            "phases_deg",
                            phases.0.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";"),
                        ),
                        ("papr", papr_lin.to_string()),
                        ("sample_rate_hz", w.sample_rate_hz.to_string()),
                        ("n_samples", w.samples.len().to_string()),
                    ],
                ),
            }
        }
        Cmd::Simulate { trial, stream, scatter } => {
            let (cfg, _) = cli.trial(trial)?;
            let runner = TrialRunner::new(&cfg)?;
            let report = runner.run(*stream)?;
            if *scatter {
                match (&report.demod, runner.constellation()) {
                    (Some(d), Some(c)) => {
                        let symbols = encode_bits(&report.bits, c, cfg.n_tones)?.symbols;
                        let path = cli.file_path("scatter.csv")?;
                        mio::write_scatter_csv(File::create(&path)?, &symbols, d, c)?;
                    }
                    _ => bail!("the aligned waveform carries no symbols to scatter"),
                }
            }
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            match cli.format {
                Format::Json => cli.emit_json("trial.json", &report),
                Format::Csv => cli.emit_row(
                    "trial.csv",
                    &[
                        ("stream_index", report.stream_index.to_string()),
                        ("papr", report.papr.to_string()),
                        ("papr_db", report.papr_db.to_string()),
                        ("p_rx_dbm", report.p_rx_dbm.to_string()),
                        ("dc_v", report.dc_v.to_string()),
                        ("pce_pct", report.pce_pct.to_string()),
                        ("ber", opt(report.ber)),
                        ("ber_strict", opt(report.ber_strict)),
                        ("bit_errors", report.bit_errors.to_string()),
                        ("strict_bit_errors", report.strict_bit_errors.to_string()),
                        ("erasures", report.erasures.to_string()),
                    ],
                ),
            }
        }
        Cmd::Sweep { trial } => {
            let (cfg, axes) = cli.trial(trial)?;
            let axes = axes.context("sweep needs a [sweep] table in the --config file")?;
            let report = sweep(&cfg, &axes)?;
            for r in report.records.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "point n_tones={} m_order={} delta_deg={} p_in_dbm={} model={} failed: {}",
                    r.n_tones,
                    r.m_order,
                    r.delta_deg,
                    r.p_in_dbm,
                    r.model,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            match cli.out_dir()? {
                Some(d) => {
                    report.write_csv(File::create(d.join("sweep.csv"))?)?;
                    let mut f = File::create(d.join("sweep.json"))?;
                    serde_json::to_writer_pretty(&mut f, &report)?;
                    writeln!(f)?;
                    Ok(())
                }
                None => match cli.format {
                    Format::Csv => cli.emit("sweep.csv", |w| Ok(report.write_csv(w)?)),
                    Format::Json => cli.emit_json("sweep.json", &report),
                },
            }
        }
        Cmd::Papr {
            trial,
            tone_counts,
            deltas,
        } => {
            let (cfg, _) = cli.trial(trial)?;
            let rows = papr_table(&cfg, tone_counts, deltas)?;
            match cli.format {
                Format::Json => cli.emit_json("papr.json", &rows),
                Format::Csv => cli.emit("papr.csv", |w| {
                    writeln!(w, "n_tones,m_order,delta_deg,streams,mean_papr,mean_papr_db,max_papr")?;
                    for r in &rows {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            r.n_tones, r.m_order, r.delta_deg, r.streams, r.mean_papr, r.mean_papr_db, r.max_papr
                        )?;
                    }
                    Ok(())
                }),
            }
        }
        Cmd::PhasePdf {
            tone,
            m_order,
            delta,
            points,
            trials,
            unwrapped,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let density = phase_density(*tone, *delta, *points, !unwrapped);
            let hist = empirical_phase_histogram(*tone, *m_order, *delta, *trials, seed)?;
            let analytic = analytic_bin_probabilities(*tone, *delta);
            match cli.format {
                Format::Json => cli.emit_json(
                    "phase_pdf.json",
                    &serde_json::json!({
                        "density": density,
                        "histogram": hist,
                        "analytic_bin_probabilities": analytic,
                        "seed": seed,
                    }),
                ),
                Format::Csv => match cli.out_dir()? {
                    Some(d) => {
                        mio::write_density_csv(File::create(d.join("phase_density.csv"))?, &density)?;
                        mio::write_histogram_csv(File::create(d.join("phase_histogram.csv"))?, &hist, Some(&analytic))?;
                        Ok(())
                    }
                    None => cli.emit("", |w| {
                        mio::write_density_csv(&mut *w, &density)?;
                        writeln!(w)?;
                        mio::write_histogram_csv(&mut *w, &hist, Some(&analytic))?;
                        Ok(())
                    }),
                },
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        let broken_pipe = e
            .chain()
            .filter_map(|c| c.downcast_ref::<io::Error>())
            .any(|io| io.kind() == io::ErrorKind::BrokenPipe);
        if broken_pipe {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
