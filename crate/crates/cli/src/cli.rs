use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gridbn_core::{
    assemble_network, divorce, AggregationPolicy, AvailabilityProfile, ClassificationPresets, CostTable,
    Layout, Network, Survey, Target, Weighting, Weights,
};

use crate::api::{self, PosteriorRequest, ReportOptions};
use crate::error::{ApiError, Result};
use crate::render;
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "gridbn", version, about = "Capacity scenario networks from expert surveys")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a network from a survey and a layout.
    Compile(CompileArgs),
    /// Posterior probabilities and GW values under evidence.
    Infer(InferArgs),
    /// Greedy plan of component states that raises a target probability.
    Optimize(OptimizeArgs),
    /// Capacity buckets and peak availability.
    Report(ReportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub survey: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = Weighting::ConfidenceLinear)]
    pub weighting: Weighting,
    /// Divorce nodes with more parents than this.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub max_parents: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvidenceArgs {
    /// Observed state, as Node=state. Repeatable.
    #[arg(long = "set", value_name = "NODE=STATE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    /// Node to report. Repeatable; all visible nodes by default.
    #[arg(long)]
    pub query: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("weights must be > 0".into())
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub costs: PathBuf,
    /// Target as Node=state.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub w1: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub w2: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub w3: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    /// Classification presets file; the bundled presets by default.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Availability profile file; the bundled default profile by default.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub import_gw: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, env = "GRIDBN_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Cost table used by optimize requests with `costs_ref: "default"`.
    #[arg(long)]
    pub costs: Option<PathBuf>,
}

fn load_network(path: &Path) -> Result<Network> {
    let network = Network::load(path)?;
    network.validate().into_result()?;
    Ok(network)
}

fn output<T: Serialize>(value: &T, json: bool, text: impl FnOnce(&T) -> String) -> Result<String> {
    if json {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| ApiError::domain("internal", e.to_string()))?;
        s.push('\n');
        Ok(s)
    } else {
        Ok(text(value))
    }
}

pub fn compile(args: &CompileArgs) -> Result<String> {
    let survey = Survey::load(&args.survey)?;
    let layout = Layout::load(&args.layout)?;
    let policy = AggregationPolicy {
        weighting: args.weighting,
    };
    let mut network = assemble_network(&survey, &layout, policy)?;
    if let Some(k) = args.max_parents {
        network = divorce(&network, k as usize)?.0;
    }
    let report = network.validate();
    report.clone().into_result()?;
    let text = network.to_json()?;
    std::fs::write(&args.out, text).map_err(|e| ApiError::domain("io", format!("{}: {e}", args.out.display())))?;
    Ok(render::compile_summary(&network, &report, &args.out.display().to_string()))
}

pub fn infer(args: &InferArgs) -> Result<String> {
    let network = load_network(&args.network)?;
    let request = PosteriorRequest {
        evidence: api::parse_evidence(&args.evidence.set)?,
        query: args.query.clone(),
    };
    let response = api::posteriors(&network, &request)?;
    output(&response, args.json, render::posteriors)
}

pub fn optimize(args: &OptimizeArgs) -> Result<String> {
    let network = load_network(&args.network)?;
    let costs = CostTable::load(&args.costs)?;
    let target: Target = args.target.parse()?;
    let weights = Weights {
        w1: args.w1,
        w2: args.w2,
        w3: args.w3,
    };
    let response = api::optimize_plan(&network, &target, weights, &costs)?;
    output(&response, args.json, render::plan)
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let network = load_network(&args.network)?;
    let evidence = api::parse_evidence(&args.evidence.set)?;
    let presets = match &args.rules {
        Some(p) => ClassificationPresets::load(p)?,
        None => api::default_classification(),
    };
    let profile = match &args.profile {
        Some(p) => AvailabilityProfile::load(p)?,
        None => api::default_profile(),
    };
    let options = ReportOptions {
        presets: &presets,
        preset: args.preset.as_deref(),
        profile: &profile,
        import_gw: args.import_gw,
    };
    let response = api::report(&network, &evidence, &options)?;
    output(&response, args.json, render::report)
}

pub fn serve(args: &ServeArgs) -> Result<String> {
    let network = load_network(&args.network)?;
    let costs = args.costs.as_deref().map(CostTable::load).transpose()?;
    let state = Arc::new(AppState::new(network, costs));
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ApiError::domain("io", e.to_string()))?;
    runtime
        .block_on(server::serve(state, addr))
        .map_err(|e| ApiError::domain("bind_failed", format!("{addr}: {e}")))?;
    Ok(String::new())
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Compile(a) => compile(a),
        Command::Infer(a) => infer(a),
        Command::Optimize(a) => optimize(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    }
}
