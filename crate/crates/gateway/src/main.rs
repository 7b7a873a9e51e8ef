use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meter_client::MeterClient;
use meter_core::card::Uid;
use meter_core::event::to_jsonl;
use meter_core::money::Money;
use meter_core::sim::fit::{fit_tariff, table1_credit, table1_observations, TariffFit};
use meter_core::sim::trace::export_trace_csv;
use meter_core::sim::{builtin_scenario, run_scenario, Scenario, SimError};
use meter_core::station::TopupStation;
use meter_core::store::CardStore;
use meter_gateway::{Gateway, GatewayConfig};

#[derive(Parser)]
#[command(name = "prepaid-meter", version, about = "Prepaid electricity meter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long, env = "PREPAID_METER_PORT")]
        port: Option<u16>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Address to bind.
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Run a scenario file (or a builtin such as `table1-bulb1`) and write its trace.
    Run {
        #[arg(long)]
        scenario: String,
        /// CSV trace output.
        #[arg(long)]
        out: PathBuf,
        /// JSONL event log; defaults to the CSV path with a .jsonl extension.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Also print the tariff fitted to the light-bulb table.
        #[arg(long)]
        fit_table1: bool,
    },
    /// Write a credit balance onto a card, either in a local store file or through a gateway.
    Topup {
        #[arg(long, conflicts_with = "server", required_unless_present = "server")]
        store: Option<PathBuf>,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        card: Uid,
        /// Amount in ringgit, e.g. `5` or `12.50`.
        #[arg(long)]
        amount: String,
    },
    /// Fit the tariff to the light-bulb cutoff table and print it.
    FitTable1,
    /// Show the live meter.
    Status(ServerArg),
    /// Mint a blank card.
    Mint(ServerArg),
    /// List cards.
    Cards(ServerArg),
    /// Insert a card into the meter.
    Insert {
        #[command(flatten)]
        server: ServerArg,
        card: Uid,
    },
    /// Switch a load on or off.
    Load {
        #[command(flatten)]
        server: ServerArg,
        name: String,
        #[arg(value_parser = parse_on_off, action = clap::ArgAction::Set)]
        state: bool,
    },
    /// List sent SMS messages.
    Sms(ServerArg),
}

#[derive(clap::Args)]
struct ServerArg {
    #[arg(long, env = "PREPAID_METER_URL", default_value = "http://127.0.0.1:8080")]
    server: String,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

/// A failure with the process exit code it maps to.
struct Failure(u8, String);

impl Failure {
    fn validation(msg: impl ToString) -> Self {
        Failure(1, msg.to_string())
    }

    fn runtime(msg: impl ToString) -> Self {
        Failure(2, msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { scenario, out, events, fit_table1 } => cmd_run(&scenario, &out, events.as_deref(), fit_table1),
        Cmd::FitTable1 => table1_fit().map(|f| print_fit(&f)),
        Cmd::Topup { store: Some(store), card, amount, .. } => cmd_topup_offline(&store, card, &amount),
        other => async_main(other),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn table1_fit() -> Result<TariffFit, Failure> {
    fit_tariff(&table1_observations(), table1_credit()).map_err(Failure::runtime)
}

fn print_fit(fit: &TariffFit) {
    println!("base_rm_per_second = {:.3e}", fit.base_rm_per_second());
    println!("rate_rm_per_watt_second = {:.3e}", fit.rate_rm_per_watt_second());
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        return builtin_scenario(arg).ok_or_else(|| Failure::validation(format!("{arg}: file not found")));
    }
    Scenario::load(path).map_err(|e| Failure::validation(format!("{arg}: {e}")))
}

fn cmd_run(scenario: &str, out: &Path, events: Option<&Path>, fit: bool) -> Result<(), Failure> {
    let scenario = load_scenario(scenario)?;
    scenario.validate().map_err(Failure::validation)?;
    scenario.steps().map_err(Failure::validation)?;
    if fit {
        print_fit(&table1_fit()?);
    }
    let trace = run_scenario(&scenario).map_err(|e| match e {
        SimError::ScenarioInvalid { .. } => Failure::validation(e),
        other => Failure::runtime(other),
    })?;
    let events = events.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("jsonl"));
    std::fs::write(out, export_trace_csv(&trace)).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    std::fs::write(&events, to_jsonl(&trace)).map_err(|e| Failure::runtime(format!("{}: {e}", events.display())))?;
    Ok(())
}

fn cmd_topup_offline(store_path: &Path, uid: Uid, amount: &str) -> Result<(), Failure> {
    let amount = Money::parse_rm(amount).map_err(Failure::validation)?;
    let mut store = CardStore::load(store_path).map_err(Failure::validation)?;
    let card = store.get(&uid).cloned().ok_or_else(|| Failure::validation(format!("unknown card {uid}")))?;
    let mut station = TopupStation::new();
    station.dock(card).map_err(Failure::runtime)?;
    let written = station.write_credit(amount);
    let card = station.undock().map_err(Failure::runtime)?;
    written.map_err(Failure::runtime)?;
    store.put(card.clone()).map_err(Failure::runtime)?;
    store.save(store_path).map_err(Failure::runtime)?;
    println!("{uid} {}", card.credit());
    Ok(())
}

fn async_main(cmd: Cmd) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    rt.block_on(async move {
        match cmd {
            Cmd::Serve { port, config, host } => serve(port, config, host).await,
            Cmd::Topup { server: Some(server), card, amount, .. } => {
                let amount = Money::parse_rm(&amount).map_err(Failure::validation)?;
                let view = MeterClient::new(server).topup(card, amount.sen()).await.map_err(Failure::runtime)?;
                print_json(&view)
            }
            Cmd::Status(s) => print_json(&client(s).meter().await.map_err(Failure::runtime)?),
            Cmd::Mint(s) => print_json(&client(s).mint_card().await.map_err(Failure::runtime)?),
            Cmd::Cards(s) => print_json(&client(s).cards().await.map_err(Failure::runtime)?),
            Cmd::Sms(s) => print_json(&client(s).sms().await.map_err(Failure::runtime)?),
            Cmd::Insert { server, card } => {
                print_json(&client(server).insert_card(card).await.map_err(Failure::runtime)?)
            }
            Cmd::Load { server, name, state } => {
                print_json(&client(server).set_load(&name, state).await.map_err(Failure::runtime)?)
            }
            Cmd::Run { .. } | Cmd::FitTable1 | Cmd::Topup { .. } => unreachable!("handled synchronously"),
        }
    })
}

fn client(s: ServerArg) -> MeterClient {
    MeterClient::new(s.server)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value).map_err(Failure::runtime)?);
    Ok(())
}

async fn serve(port: Option<u16>, config: Option<PathBuf>, host: std::net::IpAddr) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let cfg = match &config {
        Some(path) => GatewayConfig::load(path).map_err(|e| Failure::validation(format!("{e:#}")))?,
        None => GatewayConfig::default(),
    };
    let port = port.unwrap_or(cfg.port);
    let gateway = Gateway::start(&cfg, SocketAddr::new(host, port))
        .await
        .map_err(|e| Failure::runtime(format!("startup failed: {e:#}")))?;
    println!("listening on {}", gateway.url());
    let stop = gateway.stopper();
    tokio::spawn(async move {
        let _ = tokio::signal::ctrl_c().await;
        stop.send_replace(true);
    });
    gateway.wait().await.map_err(|e| Failure::runtime(format!("{e:#}")))
}
