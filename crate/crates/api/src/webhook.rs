//! Signed delivery of notification events to configured webhook targets.

use std::time::Duration;

use chrono::{DateTime, Utc};
use depgate_core::store::{DeliveryStatus, Event, EventKind, Store, StoreError, WebhookDelivery};
use hmac::{Hmac, Mac};
use sha2::Sha256;

use crate::config::WebhookTarget;

pub const SIGNATURE_HEADER: &str = "x-depgate-signature";
pub const SEQ_HEADER: &str = "x-depgate-event-seq";
pub const MAX_ATTEMPTS: u32 = 3;

/// `sha256=<hex>` of HMAC-SHA256(secret, body).
pub fn sign(secret: &str, body: &[u8]) -> String {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret.as_bytes()).expect("hmac accepts any key length");
    mac.update(body);
    format!("sha256={}", hex::encode(mac.finalize().into_bytes()))
}

pub fn verify(secret: &str, body: &[u8], signature: &str) -> bool {
    let Some(hex_sig) = signature.strip_prefix("sha256=") else {
        return false;
    };
    let Ok(raw) = hex::decode(hex_sig) else {
        return false;
    };
    let mut mac = Hmac::<Sha256>::new_from_slice(secret.as_bytes()).expect("hmac accepts any key length");
    mac.update(body);
    mac.verify_slice(&raw).is_ok()
}

/// Delay before retry `attempt` (1-based): base * 2^(attempt-1), capped.
pub fn backoff(base: Duration, cap: Duration, attempt: u32) -> Duration {
    let factor = 1u32 << attempt.saturating_sub(1).min(16);
    base.saturating_mul(factor).min(cap)
}

#[derive(Debug, Clone)]
pub struct Dispatcher {
    pub targets: Vec<WebhookTarget>,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub timeout: Duration,
}

impl Dispatcher {
    pub fn new(targets: Vec<WebhookTarget>) -> Self {
        Dispatcher {
            targets,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(5),
            timeout: Duration::from_secs(10),
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.targets.iter().any(|t| t.enabled)
    }

    /// Delivers every notification event after `since_seq` to every enabled
    /// target and records one delivery row per (event, target). Blocking.
    pub fn dispatch_since(&self, store: &Store, since_seq: i64, now: impl Fn() -> DateTime<Utc>) -> Result<Vec<WebhookDelivery>, StoreError> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let events: Vec<Event> = store
            .events_since(since_seq)?
            .into_iter()
            .filter(|e| matches!(e.kind, EventKind::Notification(_)))
            .collect();
        if events.is_empty() {
            return Ok(Vec::new());
        }
        let client = match reqwest::blocking::Client::builder().timeout(self.timeout).build() {
            Ok(c) => c,
            Err(e) => {
                tracing::error!("webhook client: {e}");
                return Ok(Vec::new());
            }
        };
        let mut out = Vec::new();
        for event in &events {
            let body = serde_json::to_vec(event).expect("event serializes");
            for target in self.targets.iter().filter(|t| t.enabled) {
                let d = self.deliver(&client, target, event.seq, &body, &now);
                store.record_delivery(&d)?;
                out.push(d);
            }
        }
        Ok(out)
    }

    fn deliver(
        &self,
        client: &reqwest::blocking::Client,
        target: &WebhookTarget,
        seq: i64,
        body: &[u8],
        now: &impl Fn() -> DateTime<Utc>,
    ) -> WebhookDelivery {
        let signature = sign(&target.secret, body);
        let mut last_error = None;
        for attempt in 1..=MAX_ATTEMPTS {
            let result = client
                .post(&target.url)
                .header("content-type", "application/json")
                .header(SIGNATURE_HEADER, &signature)
                .header(SEQ_HEADER, seq.to_string())
                .body(body.to_vec())
                .send();
            match result {
                Ok(resp) if resp.status().is_success() => {
                    return WebhookDelivery {
                        event_seq: seq,
                        url: target.url.clone(),
                        status: DeliveryStatus::Delivered,
                        attempts: attempt,
                        last_error: None,
                        at: now(),
                    };
                }
                Ok(resp) => last_error = Some(format!("HTTP {}", resp.status())),
                Err(e) => last_error = Some(e.to_string()),
            }
            if attempt < MAX_ATTEMPTS {
                std::thread::sleep(backoff(self.base_delay, self.max_delay, attempt));
            }
        }
        tracing::warn!(url = %target.url, seq, "webhook delivery failed");
        WebhookDelivery {
            event_seq: seq,
            url: target.url.clone(),
            status: DeliveryStatus::Failed,
            attempts: MAX_ATTEMPTS,
            last_error,
            at: now(),
        }
    }
}
