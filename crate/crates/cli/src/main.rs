use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lzrobust::bitcodes::{stream_from_bytes, write_stream_file};
use lzrobust::coder::{compression_ratio, ratio_curve, ratio_f64, stride_checkpoints, Coder};
use lzrobust::cutstack::{well_distributedness, SymbolicGadget, CLASS_CAP};
use lzrobust::deficiency::deficiency_curve;
use lzrobust::harness::{make_coder, make_source, run_experiment, stream_rng, ExperimentConfig};
use lzrobust::kt::MixtureMeasure;
use lzrobust::measure::{format_rational, parse_rational};
use lzrobust::sources::robustness_experiment;
use lzrobust::theorem1::{
    build_alpha, AlignedMeasure, AlphaOptions, Construction, ConstructionParams, Mode, Sigma,
};
use lzrobust::BitString;

#[derive(Parser)]
#[command(name = "lzrobust", version, about = "Universal codes, cutting-and-stacking measures and ratio experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode (or decode) a bit sequence with one coder
    Encode {
        #[command(flatten)]
        coder: CoderArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat the input as a codeword and write the decoded sequence
        #[arg(long)]
        decode: bool,
    },
    /// Prefix compression ratios at multiples of the stride
    RatioCurve {
        #[command(flatten)]
        coder: CoderArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stride: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Mixture log-loss and code length of prefixes
    Mixture {
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to the full length
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Inspect gadgets of the construction or from a dump file
    Gadget {
        #[command(subcommand)]
        op: GadgetOp,
    },
    Theorem1 {
        #[command(subcommand)]
        op: Theorem1Op,
    },
    /// Surrogate deficiency curve -log P(x^n) - L(x^n)
    Deficiency {
        /// theorem1, bernoulli:P or markov:FILE
        #[arg(long)]
        measure: String,
        /// lz78 or mixture[:K]
        #[arg(long, default_value = "lz78")]
        code: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stride: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        construction: ConstructionArgs,
    },
    Source {
        #[command(subcommand)]
        op: SourceOp,
    },
    Experiment {
        #[command(subcommand)]
        op: ExperimentOp,
    },
}

#[derive(Args)]
struct CoderArgs {
    /// lz78, lz78-coord, lzwin, block, mixture, verbatim, or a full spec such as block:4096:lzwin:64
    #[arg(long, default_value = "lz78")]
    coder: String,
    /// Window length for lzwin (0 for unbounded)
    #[arg(long)]
    window: Option<usize>,
    /// Block length for block
    #[arg(long)]
    block: Option<usize>,
    /// Coder used inside each block
    #[arg(long)]
    inner: Option<String>,
}

impl CoderArgs {
    fn spec(&self) -> Result<String> {
        Ok(match (self.coder.as_str(), self.window, self.block) {
            ("lzwin", Some(0), _) => "lzwin:inf".into(),
            ("lzwin", Some(w), _) => format!("lzwin:{w}"),
            ("block", _, Some(n)) => match &self.inner {
                Some(inner) => format!("block:{n}:{inner}"),
                None => format!("block:{n}"),
            },
            ("block", None, _) => bail!("--coder block needs --block N"),
            (c, _, _) => c.to_string(),
        })
    }

    fn build(&self) -> Result<Box<dyn Coder>> {
        Ok(make_coder(&self.spec()?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Faithful,
    Empirical,
}

#[derive(Args)]
struct ConstructionArgs {
    #[arg(long, default_value = "1/256")]
    r: String,
    /// id, log, or a JSON file with the values sigma(0), sigma(1), ...
    /// Defaults to id (faithful) or log (empirical)
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, value_enum, default_value = "empirical")]
    mode: ModeArg,
    /// Defaults to 3 (faithful) or the number of folds (empirical)
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    h0: usize,
    #[arg(long, default_value = "2,2,8,2,8,2", value_delimiter = ',')]
    folds: Vec<usize>,
    #[arg(long, default_value = "1/10")]
    epsilon: String,
}

impl ConstructionArgs {
    fn params(&self) -> Result<ConstructionParams> {
        let (mode, stages) = match self.mode {
            ModeArg::Faithful => (Mode::Faithful, self.stages.unwrap_or(3)),
            ModeArg::Empirical => (
                Mode::Empirical {
                    h0: self.h0,
                    folds: self.folds.clone(),
                },
                self.stages.unwrap_or(self.folds.len()),
            ),
        };
        Ok(ConstructionParams {
            r: parse_rational(&self.r)?,
            sigma: Sigma::parse(self.sigma.as_deref().unwrap_or(match self.mode {
                ModeArg::Faithful => "id",
                ModeArg::Empirical => "log",
            }))?,
            epsilon: parse_rational(&self.epsilon)?,
            mode,
            stages,
            ..Default::default()
        })
    }

    fn build(&self) -> Result<Construction> {
        Ok(Construction::build(self.params()?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Phi,
    Pi,
    Delta,
    Lambda,
}

#[derive(Args)]
struct GadgetArgs {
    /// A gadget dump to read instead of building the construction
    #[arg(long = "in", conflicts_with = "stage")]
    input: Option<PathBuf>,
    #[arg(long)]
    stage: Option<usize>,
    #[arg(long, value_enum, default_value = "phi")]
    part: Part,
    #[command(flatten)]
    construction: ConstructionArgs,
}

impl GadgetArgs {
    fn load(&self) -> Result<(SymbolicGadget, Option<Construction>)> {
        if let Some(path) = &self.input {
            let v: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
            return Ok((SymbolicGadget::from_json(&v)?, None));
        }
        let c = self.construction.build()?;
        let s = self.stage.unwrap_or(c.stages().len() - 1);
        let st = c.stage(s)?;
        let g = match self.part {
            Part::Phi => st.phi.clone(),
            Part::Pi => st.pi.clone(),
            Part::Delta => st.delta.clone(),
            Part::Lambda => st.lambda.clone().ok_or_else(|| anyhow!("stage 0 has no lambda"))?,
        };
        Ok((g, Some(c)))
    }
}

#[derive(Subcommand)]
enum GadgetOp {
    /// JSON tree of the composition with exact base interval tables
    Dump {
        #[command(flatten)]
        gadget: GadgetArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Stats {
        #[command(flatten)]
        gadget: GadgetArgs,
    },
    /// Well-distributedness of the gadget in Pi of another stage
    Wd {
        #[command(flatten)]
        gadget: GadgetArgs,
        #[arg(long)]
        against: usize,
    },
}

#[derive(Subcommand)]
enum Theorem1Op {
    /// Build the stages and print their diagnostics
    Build {
        #[command(flatten)]
        construction: ConstructionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build alpha and write it as a bitstream, with the fragment trace as JSON
    Alpha {
        #[command(flatten)]
        construction: ConstructionArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        candidates: usize,
        #[arg(long, default_value = "1/2")]
        mu: String,
    },
    /// Sample a trajectory name of a stage
    Sample {
        #[command(flatten)]
        construction: ConstructionArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        len: usize,
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SourceOp {
    Sample {
        /// bernoulli:P, flip:P, chain:P0,P1,... or markov:FILE
        #[arg(long)]
        spec: String,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Entropy {
        #[arg(long)]
        spec: String,
    },
    /// Full-sequence and block-LZ78 ratio curves on one sample
    Robustness {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 1 << 20)]
        n: usize,
        #[arg(long, default_value = "64,1024,16384", value_delimiter = ',')]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 1 << 16)]
        stride: usize,
        #[arg(long, default_value = "lz78")]
        coder: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentOp {
    /// Run the experiment(s) named in a JSON config
    Run {
        config: PathBuf,
        /// Override the configured output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Reads a bitstream file, or a text file of `0`/`1` characters.
fn read_bits(path: &Path) -> Result<BitString> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(s) = stream_from_bytes(&bytes) {
        return Ok(s);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| anyhow!("{} is not a bitstream", path.display()))?;
    let bits: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    bits.parse::<BitString>()
        .map_err(|_| anyhow!("{} is neither a bitstream nor a 0/1 text file", path.display()))
}

fn write_bits(path: &Path, s: &BitString) -> Result<()> {
    write_stream_file(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Writes to the file if given, otherwise to stdout.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn emit_json(path: Option<&Path>, v: &serde_json::Value) -> Result<()> {
    emit(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn encode(coder: &CoderArgs, input: &Path, out: &Path, decode: bool) -> Result<()> {
    let c = coder.build()?;
    let x = read_bits(input)?;
    if decode {
        let y = c.decode(&x)?;
        write_bits(out, &y)?;
        println!("coder={} code_bits={} n={}", c.name(), x.len(), y.len());
    } else {
        let code = c.encode(&x);
        write_bits(out, &code)?;
        let ratio = if x.is_empty() { f64::NAN } else { ratio_f64(compression_ratio(&c, &x)?) };
        println!("coder={} n={} bits={} ratio={ratio:.6}", c.name(), x.len(), code.len());
    }
    Ok(())
}

fn mixture(kmax: usize, input: &Path, stride: Option<usize>, csv: Option<&Path>) -> Result<()> {
    let x = read_bits(input)?;
    if x.is_empty() {
        bail!("empty input");
    }
    let cps = stride_checkpoints(x.len(), stride.unwrap_or(x.len()).max(1));
    let m = MixtureMeasure::new(kmax);
    let lp = m.log2_prefix_probs(&x, &cps);
    let coder = make_coder(&format!("mixture:{kmax}"))?;
    let bits = coder.prefix_code_lens(&x, &cps);
    let mut out = String::from("n,neg_log_rho_per_symbol,code_bits\n");
    for ((n, l), b) in cps.iter().zip(&lp).zip(&bits) {
        out += &format!("{n},{:.9},{b}\n", -l / *n as f64);
    }
    emit(csv, &out)
}

fn gadget(op: &GadgetOp) -> Result<()> {
    match op {
        GadgetOp::Dump { gadget, out } => {
            let (g, _) = gadget.load()?;
            emit_json(out.as_deref(), &g.to_json())
        }
        GadgetOp::Stats { gadget } => {
            let (g, _) = gadget.load()?;
            let v = serde_json::json!({
                "width": format_rational(g.width()),
                "support": format_rational(g.support()),
                "height": g.height(),
                "max_height": g.max_height(),
                "columns": g.column_count().to_string(),
                "cube": g.is_cube(),
            });
            emit_json(None, &v)
        }
        GadgetOp::Wd { gadget, against } => {
            let (g, c) = gadget.load()?;
            let c = match c {
                Some(c) => c,
                None => gadget.construction.build()?,
            };
            let u = &c.stage(*against)?.pi;
            let wd = well_distributedness(&g, u, CLASS_CAP)?;
            println!("{}", format_rational(&wd));
            Ok(())
        }
    }
}

fn theorem1(op: &Theorem1Op) -> Result<()> {
    match op {
        Theorem1Op::Build { construction, out } => {
            let c = construction.build()?;
            emit_json(out.as_deref(), &c.summary())
        }
        Theorem1Op::Alpha {
            construction,
            steps,
            out,
            trace,
            seed,
            candidates,
            mu,
        } => {
            let c = construction.build()?;
            let steps = steps.unwrap_or(c.stages().len() - 1);
            let opts = AlphaOptions {
                seed: *seed,
                candidates: *candidates,
                mu: parse_rational(mu)?,
                ..Default::default()
            };
            let t = build_alpha(&c, steps, &opts)?;
            write_bits(out, &t.word)?;
            if let Some(p) = trace {
                emit_json(Some(p), &t.to_json())?;
            }
            println!("length={} fragments={}", t.word.len(), t.fragments.len());
            Ok(())
        }
        Theorem1Op::Sample {
            construction,
            seed,
            len,
            stage,
            out,
        } => {
            let c = construction.build()?;
            let s = stage.unwrap_or(c.stages().len() - 1);
            let x = c.sample_sequence(*seed, *len, s)?;
            write_bits(out, &x)?;
            println!("stage={s} len={} ones={}", x.len(), x.count_ones());
            Ok(())
        }
    }
}

fn deficiency(
    measure: &str,
    code: &str,
    input: &Path,
    stride: usize,
    csv: Option<&Path>,
    construction: &ConstructionArgs,
) -> Result<()> {
    let coder = match code {
        "lz78" => make_coder("lz78")?,
        c if c == "mixture" || c.starts_with("mixture:") => make_coder(c)?,
        other => bail!("unknown code {other:?}, expected lz78 or mixture[:K]"),
    };
    let x = read_bits(input)?;
    let curve = if measure == "theorem1" {
        let c = construction.build()?;
        deficiency_curve(&x, &AlignedMeasure(&c), &coder, stride)?
    } else {
        let src = make_source(measure)?;
        deficiency_curve(&x, &src, &coder, stride)?
    };
    emit(csv, &curve.to_csv())
}

fn source(op: &SourceOp) -> Result<()> {
    match op {
        SourceOp::Sample { spec, len, seed, out } => {
            let src = make_source(spec)?;
            let x = src.sample(&mut stream_rng(*seed, &format!("source/{spec}")), *len);
            write_bits(out, &x)?;
            println!("len={} ones={}", x.len(), x.count_ones());
            Ok(())
        }
        SourceOp::Entropy { spec } => {
            println!("{:.12}", make_source(spec)?.entropy_rate());
            Ok(())
        }
        SourceOp::Robustness {
            spec,
            n,
            blocks,
            stride,
            coder,
            seed,
            csv,
        } => {
            let src = make_source(spec)?;
            let x = src.sample(&mut stream_rng(*seed, &format!("robustness/{spec}")), *n);
            let coder = make_coder(coder)?;
            let rep = robustness_experiment(&src, &x, &coder, blocks, *stride)?;
            let mut out = String::from("coder,block,n,bits,ratio\n");
            let mut rows = |label: &str, block: usize, curve: &lzrobust::coder::RatioCurve| {
                for p in &curve.points {
                    out += &format!("{label},{block},{},{},{:.9}\n", p.n, p.bits, ratio_f64(p.ratio));
                }
            };
            rows(&rep.coder, 0, &rep.curve);
            for b in &rep.blocks {
                rows("block-lz78", b.block, &b.curve);
            }
            emit(csv.as_deref(), &out)?;
            eprintln!("{}", serde_json::to_string(&rep)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Encode {
            coder,
            input,
            out,
            decode,
        } => encode(&coder, &input, &out, decode),
        Cmd::RatioCurve {
            coder,
            input,
            stride,
            csv,
        } => {
            let c = coder.build()?;
            let curve = ratio_curve(&c, &read_bits(&input)?, stride)?;
            emit(csv.as_deref(), &curve.to_csv())
        }
        Cmd::Mixture {
            kmax,
            input,
            stride,
            csv,
        } => mixture(kmax, &input, stride, csv.as_deref()),
        Cmd::Gadget { op } => gadget(&op),
        Cmd::Theorem1 { op } => theorem1(&op),
        Cmd::Deficiency {
            measure,
            code,
            input,
            stride,
            csv,
            construction,
        } => deficiency(&measure, &code, &input, stride, csv.as_deref(), &construction),
        Cmd::Source { op } => source(&op),
        Cmd::Experiment {
            op: ExperimentOp::Run { config, out },
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let summary = run_experiment(&cfg)?;
            emit_json(None, &summary)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
