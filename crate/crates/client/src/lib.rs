//! Thin async client for the prepaid meter gateway.

pub mod types;

use reqwest::{Response, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use meter_core::card::Uid;
use meter_core::event::EventRecord;
use meter_core::peripherals::SmsMessage;

pub use types::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{status} {}: {}", body.code, body.message)]
    Api { status: StatusCode, body: ErrorBody },
}

impl ClientError {
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            ClientError::Http(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeterClient {
    base: String,
    http: reqwest::Client,
}

impl MeterClient {
    /// `base` is e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        MeterClient { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody { code: "http_error".into(), message: text });
        Err(ClientError::Api { status, body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        Self::decode(self.http.post(self.url(path)).json(body).send().await?).await
    }

    pub async fn meter(&self) -> Result<MeterView, ClientError> {
        self.get("/meter").await
    }

    pub async fn insert_card(&self, card_uid: Uid) -> Result<MeterView, ClientError> {
        self.post("/meter/card", &InsertCardRequest { card_uid }).await
    }

    pub async fn set_load(&self, name: &str, on: bool) -> Result<LoadView, ClientError> {
        self.post(&format!("/meter/loads/{name}"), &LoadRequest { on }).await
    }

    pub async fn loads(&self) -> Result<Vec<LoadView>, ClientError> {
        self.get("/loads").await
    }

    pub async fn topup(&self, card_uid: Uid, amount_sen: u64) -> Result<CardView, ClientError> {
        self.post("/topup", &TopupRequest { card_uid, amount_sen }).await
    }

    pub async fn cards(&self) -> Result<Vec<CardView>, ClientError> {
        self.get("/cards").await
    }

    pub async fn mint_card(&self) -> Result<CardView, ClientError> {
        Self::decode(self.http.post(self.url("/cards")).send().await?).await
    }

    pub async fn sms(&self) -> Result<Vec<SmsMessage>, ClientError> {
        self.get("/sms").await
    }

    /// Events with sequence number greater than `since`, or all of them.
    pub async fn events(&self, since: Option<u64>) -> Result<Vec<EventRecord>, ClientError> {
        match since {
            Some(s) => self.get(&format!("/events?since={s}")).await,
            None => self.get("/events").await,
        }
    }
}
