use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use meter_client::ErrorBody;
use meter_core::meter::MeterError;
use meter_core::money::MoneyError;
use meter_core::sim::SimError;
use meter_core::station::StationError;
use meter_core::store::StoreError;

/// A failed request: HTTP status plus a machine-readable `{code, message}` body.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        ApiError { status, code, message: message.to_string() }
    }

    pub fn bad_request(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<MoneyError> for ApiError {
    fn from(e: MoneyError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "value_out_of_range", e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownCard(_) => Self::new(StatusCode::NOT_FOUND, "unknown_card", e),
            _ => Self::internal(e),
        }
    }
}

impl From<StationError> for ApiError {
    fn from(e: StationError) -> Self {
        match e {
            StationError::ValueOutOfRange(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "value_out_of_range", e),
            StationError::Protocol(_) | StationError::VerifyMismatch { .. } => {
                Self::new(StatusCode::BAD_GATEWAY, "protocol_error", e)
            }
            StationError::AlreadyDocked | StationError::NoCard => Self::new(StatusCode::CONFLICT, "station_busy", e),
        }
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Meter(MeterError::InvalidCard) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_card", e),
            SimError::Meter(MeterError::WrongState(_)) => Self::new(StatusCode::CONFLICT, "wrong_state", e),
            other => Self::internal(other),
        }
    }
}
