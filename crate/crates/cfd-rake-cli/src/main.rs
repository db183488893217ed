use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfd_rake::audio_io::{write_results, ResultFormat};
use cfd_rake::config::RakeConfig;
use cfd_rake::error::Error;
use cfd_rake::rake::Engine;
use cfd_rake_cli::{
    load_config, parse_engine, rtf_table, run_bench, run_estimate, run_eval, run_pitch,
    run_pitch_cdf, run_simulate, SimulateOpts,
};

#[derive(Parser)]
#[command(
    name = "cfd-rake",
    version,
    about = "Carrier frequency difference estimation for demodulated SSB speech"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// FFT size (2048, 4096 or 8192).
    #[arg(long)]
    fft: Option<usize>,
    /// Energy engine: direct | pc.
    #[arg(long, default_value = "pc")]
    engine: String,
    /// Worker threads for file- and frame-level parallelism; the thread
    /// pool uses every core when unset.
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonOpts {
    fn config(&self) -> Result<RakeConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RakeConfig::default(),
        };
        if let Some(fft) = self.fft {
            cfg.fft_size = fft;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn engine(&self) -> Result<Engine, Error> {
        parse_engine(&self.engine, self.threads.unwrap_or(1))
    }

    fn install_thread_pool(&self) {
        if let Some(n) = self.threads {
            // A failed install means a pool already exists (tests); the
            // default pool is fine then.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    fn parallel_files(&self) -> bool {
        self.threads.unwrap_or(1) > 1
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the carrier frequency difference of 8 kHz mono WAV files.
    Estimate {
        /// Input WAV paths.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
        /// Output file for the result records.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Output format: csv | json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Write the per-frame pitch trace of one WAV file as CSV.
    Pitch {
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "pitch.csv")]
        out: PathBuf,
    },
    /// Generate a synthetic shifted-voice corpus with a JSON-lines manifest.
    Simulate {
        /// Output directory for WAVs and manifest.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
        /// Voices per shift value.
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Comma-separated carrier frequency differences, Hz.
        #[arg(long, value_delimiter = ',', default_value = "0,100,300,500,1000")]
        cfd: Vec<f64>,
        /// SNR in dB; omit for a noiseless corpus.
        #[arg(long)]
        snr: Option<f64>,
        /// Segment length in seconds.
        #[arg(long, default_value_t = 12.0)]
        duration: f64,
        /// RNG seed for voices and noise.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Measure real-time factors per engine and FFT size.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// WAV file to process; default is a synthetic voice.
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Synthetic audio length when no file is given.
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        /// Comma-separated FFT sizes.
        #[arg(long, value_delimiter = ',', default_value = "2048,4096,8192")]
        ffts: Vec<usize>,
        /// Benchmark all three engines instead of only the selected one.
        #[arg(long)]
        all_engines: bool,
        /// Optional CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a results file against a simulation manifest.
    Eval {
        /// Results file from `estimate`.
        #[arg(long)]
        results: PathBuf,
        /// Format of the results file: csv | json.
        #[arg(long, default_value = "csv")]
        format: String,
        /// manifest.jsonl from `simulate`.
        #[arg(long)]
        manifest: PathBuf,
        /// Histogram CSV output.
        #[arg(long, default_value = "histogram.csv")]
        out: PathBuf,
        /// Optional gnuplot-compatible data file.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
        /// Directory of per-file pitch traces (from `pitch`) to score as a CDF.
        #[arg(long)]
        pitch_dir: Option<PathBuf>,
        /// Pitch-error CDF CSV output (requires --pitch-dir).
        #[arg(long, default_value = "cdf.csv")]
        cdf: PathBuf,
        /// FFT size the traces were produced with.
        #[arg(long, default_value_t = 4096)]
        fft: usize,
    },
}

fn parse_format(name: &str) -> Result<ResultFormat, Error> {
    ResultFormat::from_name(name)
        .ok_or_else(|| Error::Config(format!("unknown format '{name}', expected csv|json")))
}

fn run() -> Result<ExitCode, Error> {
    match Cli::parse().command {
        Command::Estimate { inputs, common, out, format } => {
            let cfg = common.config()?;
            let engine = common.engine()?;
            common.install_thread_pool();
            let format = parse_format(&format)?;
            let outcome = run_estimate(&inputs, &cfg, engine, common.parallel_files());
            write_results(&outcome.records, &out, format)?;
            for (path, err) in &outcome.failures {
                eprintln!("error: {}: {err}", path.display());
            }
            println!(
                "{} of {} file(s) estimated -> {}",
                outcome.records.len(),
                inputs.len(),
                out.display()
            );
            Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Pitch { input, common, out } => {
            let cfg = common.config()?;
            let engine = common.engine()?;
            common.install_thread_pool();
            let rows = run_pitch(&input, &cfg, engine)?;
            let mut text = String::from("time_s,pitch_hz,smoothed_hz\n");
            for (t, raw, smooth) in rows {
                text.push_str(&format!("{t},{raw},{smooth}\n"));
            }
            std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
            println!("pitch trace -> {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { out_dir, count, cfd, snr, duration, seed } => {
            let opts = SimulateOpts {
                out_dir,
                count_per_shift: count,
                cfds_hz: cfd,
                snr_db: snr,
                duration_s: duration,
                seed,
            };
            let records = run_simulate(&opts)?;
            println!(
                "{} file(s) written under {} (manifest.jsonl included)",
                records.len(),
                opts.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { common, audio, seconds, ffts, all_engines, out } => {
            common.install_thread_pool();
            let engines = if all_engines {
                vec![Engine::Direct, Engine::PcSingle, Engine::PcMulti]
            } else {
                vec![common.engine()?]
            };
            let reports = run_bench(audio.as_deref(), seconds, &ffts, &engines)?;
            let table = rtf_table(&reports);
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { results, format, manifest, out, gnuplot, pitch_dir, cdf, fft } => {
            let format = parse_format(&format)?;
            let (csv, dat, matched) = run_eval(&results, format, &manifest)?;
            std::fs::write(&out, &csv).map_err(|e| Error::io(&out, e))?;
            if let Some(path) = gnuplot {
                std::fs::write(&path, &dat).map_err(|e| Error::io(&path, e))?;
            }
            println!("{matched} record(s) scored -> {}", out.display());
            if let Some(dir) = pitch_dir {
                let cfg = RakeConfig::with_fft_size(fft);
                cfg.validate()?;
                let cdf_csv = run_pitch_cdf(&dir, &manifest, &cfg)?;
                std::fs::write(&cdf, cdf_csv).map_err(|e| Error::io(&cdf, e))?;
                println!("pitch-error CDF -> {}", cdf.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
