//! Telemetry wire format and the non-blocking fan-out to socket clients.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use tremorlab_core::assist::ClampFlag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Frame,
    SafetyEvent,
    SessionState,
}

/// `{type, seq, payload}`. `seq` counts every message the hub publishes, so
/// a client that fell behind sees the gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub seq: u64,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyEventKind {
    Disengaged,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyEvent {
    pub event: SafetyEventKind,
    pub tick_index: u64,
    pub t_s: f64,
    pub flags: Vec<ClampFlag>,
    pub engaged: bool,
}

/// Broadcast hub. Publishing never waits: each client has a bounded queue
/// and a client that falls behind loses its oldest messages.
#[derive(Debug, Clone)]
pub struct TelemetryHub {
    tx: broadcast::Sender<Arc<str>>,
    seq: Arc<AtomicU64>,
}

impl TelemetryHub {
    pub fn new(client_queue: usize) -> Self {
        let (tx, _) = broadcast::channel(client_queue.max(1));
        Self {
            tx,
            seq: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.tx.subscribe()
    }

    /// Serializes and queues one message; returns its sequence number.
    pub fn publish<T: Serialize>(&self, kind: MessageKind, payload: &T) -> u64 {
        let seq = self.seq.fetch_add(1, Ordering::Relaxed);
        let msg = WireMessage {
            kind,
            seq,
            payload: serde_json::to_value(payload).unwrap_or(serde_json::Value::Null),
        };
        let text: Arc<str> = serde_json::to_string(&msg).unwrap_or_default().into();
        // No subscribers is not an error.
        let _ = self.tx.send(text);
        seq
    }
}
