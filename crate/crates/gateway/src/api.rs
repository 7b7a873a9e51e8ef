use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use futures::Stream;
use serde::Deserialize;
use tokio::sync::{broadcast, mpsc, oneshot, watch};

use meter_client::{CardView, InsertCardRequest, LoadRequest, LoadView, MeterView, TopupRequest};
use meter_core::event::EventRecord;
use meter_core::peripherals::SmsMessage;

use crate::error::ApiError;
use crate::events::EventHub;
use crate::session::{Command, View};

#[derive(Clone)]
pub struct AppState {
    pub commands: mpsc::Sender<Command>,
    pub view: watch::Receiver<Arc<View>>,
    pub hub: Arc<EventHub>,
    pub shutdown: watch::Receiver<bool>,
}

/// `Json` whose rejections use the API error body.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Json<T>(pub T);

impl<T: serde::Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> axum::response::Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct Query<T>(pub T);

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/meter", get(meter))
        .route("/meter/card", post(insert_card))
        .route("/meter/loads/{name}", post(set_load))
        .route("/loads", get(loads))
        .route("/topup", post(topup))
        .route("/cards", get(cards).post(mint_card))
        .route("/sms", get(sms))
        .route("/events", get(events))
        .route("/events/stream", get(event_stream))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

async fn call<T>(
    state: &AppState,
    make: impl FnOnce(oneshot::Sender<Result<T, ApiError>>) -> Command,
) -> Result<T, ApiError> {
    let (tx, rx) = oneshot::channel();
    let unavailable = || ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "meter session stopped");
    state.commands.send(make(tx)).await.map_err(|_| unavailable())?;
    rx.await.map_err(|_| unavailable())?
}

async fn meter(State(s): State<AppState>) -> Json<MeterView> {
    Json(s.view.borrow().meter.clone())
}

async fn insert_card(
    State(s): State<AppState>,
    Json(req): Json<InsertCardRequest>,
) -> Result<Json<MeterView>, ApiError> {
    call(&s, |reply| Command::InsertCard { uid: req.card_uid, reply }).await.map(Json)
}

async fn set_load(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Json(req): Json<LoadRequest>,
) -> Result<Json<LoadView>, ApiError> {
    call(&s, |reply| Command::SetLoad { name, on: req.on, reply }).await.map(Json)
}

async fn loads(State(s): State<AppState>) -> Json<Vec<LoadView>> {
    Json(s.view.borrow().loads.clone())
}

async fn topup(State(s): State<AppState>, Json(req): Json<TopupRequest>) -> Result<Json<CardView>, ApiError> {
    call(&s, |reply| Command::Topup { uid: req.card_uid, amount_sen: req.amount_sen, reply }).await.map(Json)
}

async fn cards(State(s): State<AppState>) -> Json<Vec<CardView>> {
    Json(s.view.borrow().cards.clone())
}

async fn mint_card(State(s): State<AppState>) -> Result<(StatusCode, Json<CardView>), ApiError> {
    let card = call(&s, |reply| Command::MintCard { reply }).await?;
    Ok((StatusCode::CREATED, Json(card)))
}

async fn sms(State(s): State<AppState>) -> Json<Vec<SmsMessage>> {
    Json(s.view.borrow().sms.clone())
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn events(State(s): State<AppState>, Query(q): Query<SinceQuery>) -> Json<Vec<EventRecord>> {
    Json(s.hub.since(q.since))
}

fn sse_event(rec: &EventRecord) -> Event {
    Event::default()
        .id(rec.seq.to_string())
        .event(rec.kind.name())
        .data(serde_json::to_string(rec).expect("event serializes"))
}

/// Backlog after the resume point, then live events until shutdown.
async fn event_stream(
    State(s): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<SinceQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let last_id = match headers.get("last-event-id") {
        Some(v) => Some(
            v.to_str()
                .ok()
                .and_then(|v| v.trim().parse::<u64>().ok())
                .ok_or_else(|| ApiError::bad_request("Last-Event-ID must be an event sequence number"))?,
        ),
        None => None,
    };
    let since = last_id.or(q.since);
    // subscribe before reading the backlog so nothing falls in between
    let mut live = s.hub.subscribe();
    let backlog = s.hub.since(since);
    let hub = s.hub.clone();
    let mut shutdown = s.shutdown.clone();

    let stream = async_stream::stream! {
        let mut last = since;
        for rec in backlog {
            last = Some(rec.seq);
            yield Ok(sse_event(&rec));
        }
        loop {
            let rec = tokio::select! {
                _ = shutdown.wait_for(|stop| *stop) => break,
                r = live.recv() => r,
            };
            match rec {
                Ok(rec) => {
                    if last.is_some_and(|l| rec.seq <= l) {
                        continue;
                    }
                    last = Some(rec.seq);
                    yield Ok(sse_event(&rec));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    // fell behind the channel: catch up from the log
                    for rec in hub.since(last) {
                        last = Some(rec.seq);
                        yield Ok(sse_event(&rec));
                    }
                }
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    };
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
