//! The `shadownet` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::costmodel::{network_cost, CostParams, CostReport};
use crate::error::{Error, Result};
use crate::netgraph::{
    eval_plaintext, fold_batchnorm, gen_input, gen_weights, parse_graph, rewrite, Array, EvalMode, Evaluated, NetworkGraph,
    Pass, WeightStore,
};
use crate::ring::{decode_fixed, RingParams};
use crate::secure::{compare, run_party, secure_run, summarize, PartyInputs};
use crate::transport::{PartyId, Session, TransportKind};

/// Name of the single entry an input file holds.
pub const INPUT_ENTRY: &str = "input";

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_WARNING: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "shadownet", version, about = "Three-party secure inference and its cost model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price every layer of a graph.
    Analyze(AnalyzeArgs),
    /// Apply rewrite passes to a graph.
    Rewrite(RewriteArgs),
    /// Run a graph securely.
    Run(RunArgs),
    /// Check secure outputs against the plaintext fixed-point oracle.
    Compare(CompareArgs),
    /// Generate random weights (and optionally an input) for a graph.
    GenWeights(GenWeightsArgs),
    /// Evaluate a graph in plaintext.
    Eval(EvalArgs),
    /// Fold batch-norm layers into the preceding convolutions.
    Fold(FoldArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct RingArgs {
    /// Ring bit width.
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Prime of the comparison field.
    #[arg(long, default_value_t = 67)]
    field: u64,
    /// Fixed-point fractional bits.
    #[arg(long, default_value_t = 13)]
    scale: u32,
}

impl RingArgs {
    fn params(&self) -> Result<RingParams> {
        RingParams::new(self.bits, self.field, self.scale)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Transport {
    Inproc,
    Tcp,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Float,
    Fixed,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    ring: RingArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RewriteArgs {
    #[arg(long)]
    graph: PathBuf,
    /// A pass such as `pa_replace(second,0.5)`; repeat to chain.
    #[arg(long = "pass")]
    passes: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Weights file (required for P0).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Input file holding one entry named `input` (required for P1).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ring: RingArgs,
    #[arg(long, value_enum, default_value_t = Transport::Inproc)]
    transport: Transport,
    /// This process's party in tcp mode.
    #[arg(long)]
    party: Option<u8>,
    /// Comma-separated `host:port` of P0, P1 and P2. Falls back to
    /// SHADOWNET_P0, SHADOWNET_P1 and SHADOWNET_P2.
    #[arg(long)]
    endpoints: Option<String>,
    /// Seconds to wait for peers to connect.
    #[arg(long, default_value_t = 30)]
    connect_timeout: u64,
    /// Write the transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Weights file; random weights from `--seed` when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Number of random inputs.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ring: RingArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenWeightsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write a random input tensor here.
    #[arg(long)]
    emit_input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Fixed)]
    mode: Mode,
    #[command(flatten)]
    ring: RingArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FoldArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Where to write the folded graph.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the folded weights.
    #[arg(long)]
    weights_out: PathBuf,
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::Rewrite(a) => cmd_rewrite(a, stdout, stderr),
        Command::Run(a) => cmd_run(a, stdout),
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::GenWeights(a) => cmd_gen_weights(a, stdout),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Fold(a) => cmd_fold(a, stdout),
    }
}

pub fn load_graph(path: &Path) -> Result<NetworkGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_graph(&text)
}

/// Read an input file: a weight container with a single `input` entry.
pub fn load_input(path: &Path) -> Result<Array> {
    let mut store = WeightStore::load(path)?;
    let input = store
        .remove(INPUT_ENTRY)
        .ok_or_else(|| Error::Format(format!("{} has no `{INPUT_ENTRY}` entry", path.display())))?;
    if !store.is_empty() {
        return Err(Error::Format(format!(
            "{} must hold only the `{INPUT_ENTRY}` entry",
            path.display()
        )));
    }
    Ok(input)
}

pub fn save_input(input: &Array, path: &Path) -> Result<()> {
    let mut store = WeightStore::new();
    store.insert(INPUT_ENTRY, input.clone());
    store.save(path)
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<i32> {
    let graph = load_graph(&a.graph)?;
    let report = network_cost(&graph, &CostParams::from_ring(&a.ring.params()?))?;
    let text = match a.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
    };
    emit(&text, a.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_rewrite(a: RewriteArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let passes = a.passes.iter().map(|s| Pass::parse(s)).collect::<Result<Vec<_>>>()?;
    let mut graph = load_graph(&a.graph)?;
    let mut code = EXIT_OK;
    for pass in &passes {
        match rewrite(&graph, pass) {
            Ok(g) => graph = g,
            Err(Error::SelectorMiss(p)) => {
                writeln!(stderr, "warning: pass `{p}` matched nothing")?;
                code = EXIT_WARNING;
            }
            Err(e) => return Err(e),
        }
    }
    fs::write(&a.out, graph.to_json())?;
    writeln!(stdout, "wrote {} ({} layers)", a.out.display(), graph.layers.len())?;
    Ok(code)
}

fn parse_endpoints(flag: Option<&str>) -> Result<[SocketAddr; 3]> {
    let raw: Vec<String> = match flag {
        Some(s) => s.split(',').map(|p| p.trim().to_string()).collect(),
        None => (0..3)
            .map(|i| {
                std::env::var(format!("SHADOWNET_P{i}"))
                    .map_err(|_| Error::Params(format!("tcp mode needs --endpoints or SHADOWNET_P{i}")))
            })
            .collect::<Result<_>>()?,
    };
    if raw.len() != 3 {
        return Err(Error::Params(format!("expected 3 endpoints, got {}", raw.len())));
    }
    let mut out = Vec::with_capacity(3);
    for r in &raw {
        let addr = r
            .to_socket_addrs()
            .map_err(|e| Error::Params(format!("bad endpoint `{r}`: {e}")))?
            .next()
            .ok_or_else(|| Error::Params(format!("endpoint `{r}` does not resolve")))?;
        out.push(addr);
    }
    Ok([out[0], out[1], out[2]])
}

fn cmd_run(a: RunArgs, stdout: &mut dyn Write) -> Result<i32> {
    let params = a.ring.params()?;
    let graph = load_graph(&a.graph)?;
    let modeled = network_cost(&graph, &CostParams::from_ring(&params))?;
    let weights = a.weights.as_deref().map(WeightStore::load).transpose()?;
    let input = a.input.as_deref().map(load_input).transpose()?;

    let (output, transcript, layers, party) = match a.transport {
        Transport::Inproc => {
            if a.party.is_some() {
                return Err(Error::Params("--party is only valid with --transport tcp".into()));
            }
            let weights = weights.ok_or_else(|| Error::Params("--weights is required".into()))?;
            let input = input.ok_or_else(|| Error::Params("--input is required".into()))?;
            weights.check_against(&graph)?;
            let r = secure_run(&graph, &weights, &input, TransportKind::InProcess, a.seed, params)?;
            (Some(r.output), r.transcript, r.layers, None)
        }
        Transport::Tcp => {
            let id = PartyId::new(
                a.party
                    .ok_or_else(|| Error::Params("--transport tcp needs --party".into()))?,
            )?;
            let endpoints = parse_endpoints(a.endpoints.as_deref())?;
            if id == PartyId::P0 {
                let w = weights
                    .as_ref()
                    .ok_or_else(|| Error::Params("party 0 needs --weights".into()))?;
                w.check_against(&graph)?;
            }
            if id == PartyId::P1 && input.is_none() {
                return Err(Error::Params("party 1 needs --input".into()));
            }
            let mut sess = Session::connect_tcp(id, &endpoints, params, a.seed, Duration::from_secs(a.connect_timeout))?;
            let mine = PartyInputs {
                weights: if id == PartyId::P0 { weights.as_ref() } else { None },
                input: if id == PartyId::P1 { input.as_ref() } else { None },
            };
            let r = run_party(&mut sess, &graph, mine)?;
            let transcript = sess.transcript().clone();
            let (layers, _) = summarize(&transcript, &r.layer_rounds);
            (r.output, transcript, layers, Some(id))
        }
    };
    if let Some(path) = &a.transcript {
        transcript.write_jsonl(fs::File::create(path)?)?;
    }
    let (_, totals) = summarize(&transcript, &[]);
    let mut report = modeled.clone();
    for (row, (_, m)) in report.layers.iter_mut().zip(&layers) {
        row.measured = Some(*m);
    }
    report.measured = Some(totals);
    let values: Option<Vec<f64>> = output
        .as_ref()
        .map(|o| o.data().iter().map(|&v| decode_fixed(v, &params)).collect());

    let text = match a.format {
        Format::Json => {
            let mut v = json!({
                "graph": graph.name,
                "seed": a.seed,
                "party": party.map(|p| p.as_u8()),
                "output_shape": output.as_ref().map(|o| o.shape().to_vec()),
                "output": values,
                "measured": totals,
                "modeled": {
                    "rounds": modeled.total_rounds,
                    "bytes": modeled.total_bytes(),
                    "mb": modeled.total_mb(),
                },
            });
            v["layers"] = serde_json::from_str(&report.to_json())
                .map(|r: serde_json::Value| r["layers"].clone())
                .expect("report is valid json");
            let mut s = serde_json::to_string_pretty(&v).expect("json value serializes");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            if let Some(p) = party {
                s.push_str(&format!("party: {p} (transcript covers this party's messages only)\n"));
            }
            if let (Some(vals), Some(o)) = (&values, &output) {
                let shown: Vec<String> = vals.iter().map(|v| format!("{v:.6}")).collect();
                s.push_str(&format!("output {:?}: [{}]\n", o.shape(), shown.join(", ")));
            }
            s.push_str(&report.to_text());
            s.push_str(&format!(
                "modeled: {} rounds, {:.0} bytes\n",
                modeled.total_rounds,
                modeled.total_bytes()
            ));
            s
        }
    };
    emit(&text, a.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_compare(a: CompareArgs, stdout: &mut dyn Write) -> Result<i32> {
    let params = a.ring.params()?;
    let graph = load_graph(&a.graph)?;
    let weights = match &a.weights {
        Some(p) => WeightStore::load(p)?,
        None => gen_weights(&graph, a.seed)?,
    };
    let report = compare(&graph, &weights, a.n, a.seed, params)?;
    let text = match a.format {
        Format::Text => report.to_text(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
    };
    emit(&text, a.out.as_deref(), stdout)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_gen_weights(a: GenWeightsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let graph = load_graph(&a.graph)?;
    let w = gen_weights(&graph, a.seed)?;
    w.save(&a.out)?;
    writeln!(stdout, "wrote {} ({} entries)", a.out.display(), w.len())?;
    if let Some(p) = &a.emit_input {
        save_input(&gen_input(&graph.input_shape, a.seed.wrapping_add(1)), p)?;
        writeln!(stdout, "wrote {}", p.display())?;
    }
    Ok(EXIT_OK)
}

fn cmd_eval(a: EvalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let params = a.ring.params()?;
    let graph = load_graph(&a.graph)?;
    let weights = WeightStore::load(&a.weights)?;
    weights.check_against(&graph)?;
    let input = load_input(&a.input)?;
    let mode = match a.mode {
        Mode::Float => EvalMode::Float,
        Mode::Fixed => EvalMode::Fixed(params),
    };
    let out = eval_plaintext(&graph, &weights, &input, mode)?;
    let values = out.to_f64(&params);
    let shape = match &out {
        Evaluated::Float(t) => t.shape.clone(),
        Evaluated::Fixed(t) => t.shape().to_vec(),
    };
    let text = match a.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({ "shape": shape, "output": values }))?;
            s.push('\n');
            s
        }
        Format::Text => {
            let shown: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
            format!("output {:?}: [{}]\n", shape, shown.join(", "))
        }
    };
    emit(&text, a.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_fold(a: FoldArgs, stdout: &mut dyn Write) -> Result<i32> {
    let graph = load_graph(&a.graph)?;
    let weights = WeightStore::load(&a.weights)?;
    let (g, w) = fold_batchnorm(&graph, &weights)?;
    fs::write(&a.out, g.to_json())?;
    w.save(&a.weights_out)?;
    writeln!(
        stdout,
        "folded {} batchnorm layers",
        graph.layers.len() - g.layers.len()
    )?;
    Ok(EXIT_OK)
}

/// Report for a graph file, as `analyze` computes it.
pub fn analyze_file(path: &Path, params: &RingParams) -> Result<CostReport> {
    network_cost(&load_graph(path)?, &CostParams::from_ring(params))
}
