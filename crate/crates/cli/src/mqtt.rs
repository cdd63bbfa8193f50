use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use aifml_core::netlink::{Delivery, NetError, Transport};
use rumqttc::{Client, Connection, ConnectionError, Event, MqttOptions, Packet, Publish, QoS};

/// Connection settings for [`MqttTransport::connect`].
#[derive(Debug, Clone)]
pub struct MqttSettings {
    pub host: String,
    pub port: u16,
    pub client_id: String,
    /// Consecutive connection failures tolerated before giving up.
    pub retries: u32,
    /// First retry delay; doubles per failure up to 5 s.
    pub backoff: Duration,
    /// How long one `poll` waits for traffic.
    pub poll_timeout: Duration,
}

impl MqttSettings {
    /// Parses `host:port` (port defaults to 1883).
    pub fn parse(broker: &str, client_id: &str) -> Result<Self, String> {
        let (host, port) = match broker.rsplit_once(':') {
            Some((h, p)) => (h, p.parse::<u16>().map_err(|_| format!("invalid broker port in '{broker}'"))?),
            None => (broker, 1883),
        };
        if host.is_empty() {
            return Err(format!("invalid broker address '{broker}'"));
        }
        Ok(Self {
            host: host.to_owned(),
            port,
            client_id: client_id.to_owned(),
            retries: 5,
            backoff: Duration::from_millis(200),
            poll_timeout: Duration::from_millis(200),
        })
    }
}

/// QoS 1 transport over an MQTT 3.1.1 broker with a persistent session.
/// Acknowledgements are sent only when [`Transport::ack`] is called.
pub struct MqttTransport {
    client: Client,
    connection: Connection,
    settings: MqttSettings,
    inflight: HashMap<u64, Publish>,
    next_token: u64,
    failures: u32,
}

impl MqttTransport {
    /// Connects and waits for the broker's CONNACK, retrying with backoff.
    pub fn connect(settings: MqttSettings) -> Result<Self, NetError> {
        let mut opts = MqttOptions::new(&settings.client_id, &settings.host, settings.port);
        opts.set_keep_alive(Duration::from_secs(30));
        opts.set_clean_session(false);
        opts.set_manual_acks(true);
        let (client, connection) = Client::new(opts, 64);
        let mut t = Self {
            client,
            connection,
            settings,
            inflight: HashMap::new(),
            next_token: 1,
            failures: 0,
        };
        loop {
            match t.connection.recv_timeout(Duration::from_secs(5)) {
                Ok(Ok(Event::Incoming(Packet::ConnAck(_)))) => {
                    log::info!("connected to {}:{}", t.settings.host, t.settings.port);
                    return Ok(t);
                }
                Ok(Ok(_)) => {}
                Ok(Err(e)) => t.failed(e)?,
                Err(_) => t.failed_with(format!("no answer from {}:{}", t.settings.host, t.settings.port))?,
            }
        }
    }

    fn failed(&mut self, e: ConnectionError) -> Result<(), NetError> {
        self.failed_with(e.to_string())
    }

    fn failed_with(&mut self, why: String) -> Result<(), NetError> {
        self.failures += 1;
        // Anything inflight will be redelivered by the broker.
        self.inflight.clear();
        if self.failures > self.settings.retries {
            return Err(NetError::BrokerDisconnected(format!(
                "{}:{} unreachable after {} attempts: {why}",
                self.settings.host, self.settings.port, self.failures
            )));
        }
        let delay = self
            .settings
            .backoff
            .saturating_mul(1 << (self.failures - 1).min(16))
            .min(Duration::from_secs(5));
        log::warn!("broker connection failed ({why}); retrying in {delay:?}");
        thread::sleep(delay);
        Ok(())
    }

    pub fn disconnect(mut self) {
        if self.client.disconnect().is_ok() {
            // Let the event loop flush pending acks and the DISCONNECT.
            for _ in 0..10 {
                match self.connection.recv_timeout(Duration::from_millis(100)) {
                    Ok(Ok(_)) => {}
                    _ => break,
                }
            }
        }
    }
}

fn client_err(e: rumqttc::ClientError) -> NetError {
    NetError::BrokerDisconnected(e.to_string())
}

impl Transport for MqttTransport {
    fn subscribe(&mut self, filter: &str) -> Result<(), NetError> {
        self.client.subscribe(filter, QoS::AtLeastOnce).map_err(client_err)
    }

    fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<(), NetError> {
        self.client
            .publish(topic, QoS::AtLeastOnce, false, payload.to_vec())
            .map_err(client_err)
    }

    fn poll(&mut self) -> Result<Option<Delivery>, NetError> {
        match self.connection.recv_timeout(self.settings.poll_timeout) {
            Ok(Ok(Event::Incoming(Packet::Publish(p)))) => {
                self.failures = 0;
                let token = self.next_token;
                self.next_token += 1;
                let d = Delivery {
                    topic: p.topic.clone(),
                    payload: p.payload.to_vec(),
                    token,
                };
                self.inflight.insert(token, p);
                Ok(Some(d))
            }
            Ok(Ok(Event::Incoming(Packet::ConnAck(_)))) => {
                log::info!("reconnected");
                self.failures = 0;
                Ok(None)
            }
            Ok(Ok(_)) => Ok(None),
            Ok(Err(e)) => self.failed(e).map(|_| None),
            Err(rumqttc::RecvTimeoutError::Timeout) => Ok(None),
            Err(rumqttc::RecvTimeoutError::Disconnected) => {
                Err(NetError::BrokerDisconnected("event loop stopped".into()))
            }
        }
    }

    fn ack(&mut self, delivery: &Delivery) -> Result<(), NetError> {
        match self.inflight.remove(&delivery.token) {
            Some(p) => self.client.ack(&p).map_err(client_err),
            // Lost with a dropped connection; the broker redelivers it.
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broker_address() {
        let s = MqttSettings::parse("localhost:1884", "x").unwrap();
        assert_eq!((s.host.as_str(), s.port), ("localhost", 1884));
        assert_eq!(MqttSettings::parse("10.0.0.2", "x").unwrap().port, 1883);
        assert!(MqttSettings::parse("host:abc", "x").is_err());
        assert!(MqttSettings::parse(":1883", "x").is_err());
    }
}
