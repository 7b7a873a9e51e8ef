//! The single writer that owns the meter, the top-up station and the card store.
//!
//! HTTP handlers send [`Command`]s and await the reply; reads go through the
//! latest published [`View`]. Every state change is appended to the event log
//! before the reply is sent.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::MissedTickBehavior;

use meter_client::{CardView, LoadView, MeterView};
use meter_core::analog::sense_vout;
use meter_core::card::{RfidCard, Uid};
use meter_core::event::{EventKind, EventRecord};
use meter_core::meter::Meter;
use meter_core::money::Money;
use meter_core::peripherals::{GsmModem, Peripherals, SmsMessage};
use meter_core::sim::{LoadProfile, Rig};
use meter_core::station::TopupStation;
use meter_core::store::CardStore;

use crate::config::{GatewayConfig, Pacing};
use crate::error::ApiError;
use crate::events::EventHub;

pub const CARDS_FILE: &str = "cards.jsonl";
pub const SMS_FILE: &str = "sms.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";

type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

#[derive(Debug)]
pub enum Command {
    MintCard { reply: Reply<CardView> },
    Topup { uid: Uid, amount_sen: u64, reply: Reply<CardView> },
    InsertCard { uid: Uid, reply: Reply<MeterView> },
    SetLoad { name: String, on: bool, reply: Reply<LoadView> },
}

/// Immutable read model, republished after every change.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub meter: MeterView,
    pub cards: Vec<CardView>,
    pub loads: Vec<LoadView>,
    pub sms: Vec<SmsMessage>,
}

pub fn load_outbox(path: &Path) -> anyhow::Result<Vec<SmsMessage>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), i + 1)))
        .collect()
}

pub struct Session {
    rig: Rig,
    station: TopupStation,
    store: CardStore,
    cards_path: PathBuf,
    sms_path: PathBuf,
    sms_persisted: usize,
    loads: Vec<(LoadProfile, bool)>,
    pacing: Pacing,
    hub: Arc<EventHub>,
    view_tx: watch::Sender<Arc<View>>,
}

impl Session {
    /// Restores persisted state from `config.data_dir`.
    pub fn open(config: &GatewayConfig) -> anyhow::Result<(Self, Arc<EventHub>, watch::Receiver<Arc<View>>)> {
        let meter_config = config.meter_config()?;
        std::fs::create_dir_all(&config.data_dir)?;
        let cards_path = config.data_dir.join(CARDS_FILE);
        let sms_path = config.data_dir.join(SMS_FILE);
        let store = CardStore::load(&cards_path)?;
        let outbox = load_outbox(&sms_path)?;
        let sms_persisted = outbox.len();
        let hub = Arc::new(EventHub::open(&config.data_dir.join(EVENTS_FILE))?);

        let meter = Meter::new(meter_config)?;
        let rig =
            Rig::resume(meter, Peripherals::with_modem(GsmModem::with_outbox(outbox)), hub.next_seq(), hub.last_t());
        let loads = config.loads.iter().cloned().map(|l| (l, false)).collect();
        let (view_tx, view_rx) = watch::channel(Arc::new(View {
            meter: MeterView::new(&rig.meter().snapshot(), &rig.peripherals().lcd),
            cards: vec![],
            loads: vec![],
            sms: vec![],
        }));
        let session = Session {
            rig,
            station: TopupStation::new(),
            store,
            cards_path,
            sms_path,
            sms_persisted,
            loads,
            pacing: config.pacing,
            hub: hub.clone(),
            view_tx,
        };
        session.publish();
        Ok((session, hub, view_rx))
    }

    fn view(&self) -> View {
        View {
            meter: MeterView::new(&self.rig.meter().snapshot(), &self.rig.peripherals().lcd),
            cards: self.store.cards().map(CardView::from).collect(),
            loads: self.loads.iter().map(|(l, on)| load_view(l, *on)).collect(),
            sms: self.rig.peripherals().modem.outbox().to_vec(),
        }
    }

    fn publish(&self) {
        self.view_tx.send_replace(Arc::new(self.view()));
    }

    fn record(&mut self, events: Vec<EventRecord>) -> Result<(), ApiError> {
        self.persist_sms().map_err(ApiError::internal)?;
        self.hub.append(events).map_err(ApiError::internal)?;
        self.publish();
        Ok(())
    }

    fn persist_sms(&mut self) -> std::io::Result<()> {
        let outbox = self.rig.peripherals().modem.outbox();
        if outbox.len() == self.sms_persisted {
            return Ok(());
        }
        let mut buf = String::new();
        for m in &outbox[self.sms_persisted..] {
            buf.push_str(&serde_json::to_string(m).expect("sms serializes"));
            buf.push('\n');
        }
        OpenOptions::new().create(true).append(true).open(&self.sms_path)?.write_all(buf.as_bytes())?;
        self.sms_persisted = outbox.len();
        Ok(())
    }

    fn save_store(&self) -> Result<(), ApiError> {
        self.store.save(&self.cards_path).map_err(ApiError::internal)
    }

    fn on_watts(&self) -> f64 {
        self.loads.iter().filter(|(_, on)| *on).map(|(l, _)| l.measured_watts).sum()
    }

    fn sense(&self, watts: f64) -> Result<f64, ApiError> {
        let cfg = self.rig.meter().config();
        sense_vout(watts, &cfg.calibration, cfg.mains_voltage)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "over_calibration", e))
    }

    fn card(&self, uid: &Uid) -> Result<RfidCard, ApiError> {
        self.store
            .get(uid)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_card", format!("unknown card {uid}")))
    }

    fn mint(&mut self) -> Result<CardView, ApiError> {
        let uid = loop {
            let uid = Uid(rand::random());
            if !self.store.contains(&uid) {
                break uid;
            }
        };
        let card = RfidCard::blank(uid);
        self.store.insert_new(card.clone())?;
        self.save_store()?;
        let ev = self.rig.note(EventKind::CardMinted { uid });
        self.record(vec![ev])?;
        Ok(CardView::from(&card))
    }

    fn topup(&mut self, uid: Uid, amount_sen: u64) -> Result<CardView, ApiError> {
        let amount = Money::from_sen(amount_sen)?;
        let card = self.card(&uid)?;
        self.station.dock(card)?;
        let result = self.station.write_credit(amount);
        let after = self.station.undock()?;
        self.store.put(after.clone())?;
        self.save_store()?;
        result?;
        let ev = self.rig.note(EventKind::Topup { uid, amount_sen });
        self.record(vec![ev])?;
        Ok(CardView::from(&after))
    }

    fn insert(&mut self, uid: Uid) -> Result<MeterView, ApiError> {
        let card = self.card(&uid)?;
        let credit_sen = card.credit().sen();
        let (returned, events) = self.rig.insert_card(&card)?;
        self.store.put(returned)?;
        self.save_store()?;
        // the insertion is logged ahead of the state change it caused
        let mut all = vec![self.rig.note(EventKind::CardInserted { uid, credit_sen })];
        all.extend(events);
        let first = all.iter().map(|e| e.seq).min().expect("non-empty");
        for (i, e) in all.iter_mut().enumerate() {
            e.seq = first + i as u64;
        }
        self.record(all)?;
        Ok(self.view().meter)
    }

    fn set_load(&mut self, name: &str, on: bool) -> Result<LoadView, ApiError> {
        let idx =
            self.loads.iter().position(|(l, _)| l.name == name).ok_or_else(|| {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_load", format!("unknown load {name:?}"))
            })?;
        if on && !self.loads[idx].1 {
            self.sense(self.on_watts() + self.loads[idx].0.measured_watts)?;
        }
        self.loads[idx].1 = on;
        let ev = self.rig.note(EventKind::Load { name: name.to_string(), on });
        self.record(vec![ev])?;
        Ok(load_view(&self.loads[idx].0, on))
    }

    fn tick(&mut self) {
        let result = self.sense(self.on_watts()).and_then(|vout| self.rig.tick(vout).map_err(ApiError::from));
        match result.and_then(|events| self.record(events)) {
            Ok(()) => {}
            Err(e) => tracing::error!(code = e.code, "tick failed: {}", e.message),
        }
    }

    fn wants_fast_tick(&self) -> bool {
        self.rig.meter().state().relay_closed() && self.loads.iter().any(|(_, on)| *on)
    }

    fn handle(&mut self, cmd: Command) {
        // a dropped reply channel means the client went away; the change stands
        match cmd {
            Command::MintCard { reply } => {
                let _ = reply.send(self.mint());
            }
            Command::Topup { uid, amount_sen, reply } => {
                let _ = reply.send(self.topup(uid, amount_sen));
            }
            Command::InsertCard { uid, reply } => {
                let _ = reply.send(self.insert(uid));
            }
            Command::SetLoad { name, on, reply } => {
                let _ = reply.send(self.set_load(&name, on));
            }
        }
    }

    pub async fn run(mut self, mut commands: mpsc::Receiver<Command>, mut shutdown: watch::Receiver<bool>) {
        let tick_seconds = self.rig.meter().config().tick_seconds;
        let (wall_clock, period) = match self.pacing {
            Pacing::WallClock { multiplier } => (true, Duration::from_secs_f64(tick_seconds / multiplier)),
            Pacing::AsFastAsPossible => (false, Duration::from_secs(3600)),
        };
        let mut ticker = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

        loop {
            let fast = !wall_clock && self.wants_fast_tick();
            tokio::select! {
                biased;
                _ = shutdown.changed() => break,
                cmd = commands.recv() => match cmd {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                },
                _ = ticker.tick(), if wall_clock => {
                    if self.rig.meter().state().relay_closed() {
                        self.tick();
                    }
                }
                _ = tokio::task::yield_now(), if fast => self.tick(),
            }
        }
    }
}

fn load_view(l: &LoadProfile, on: bool) -> LoadView {
    LoadView { name: l.name.clone(), rated_watts: l.rated_watts, measured_watts: l.measured_watts, on }
}
