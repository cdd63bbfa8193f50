use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{topic_matches, Delivery, NetError, Transport};

/// Redelivery faults applied to every subscriber queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeliveryFaults {
    /// Extra copies of each message.
    pub duplicates: u32,
    /// A copy lands after up to this many later messages to the same
    /// subscriber. Copies never overtake their original.
    pub max_delay: usize,
}

/// One publish as seen on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireRecord {
    pub topic: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone)]
struct Queued {
    topic: String,
    payload: Vec<u8>,
}

#[derive(Debug, Default)]
struct Session {
    filters: Vec<String>,
    queue: VecDeque<Queued>,
    /// Copies waiting for their delay to run out.
    delayed: Vec<(usize, Queued)>,
    inflight: BTreeMap<u64, Queued>,
    connected: bool,
}

impl Session {
    fn enqueue(&mut self, msg: Queued, faults: DeliveryFaults, rng: &mut ChaCha8Rng) {
        self.queue.push_back(msg.clone());
        let mut waiting = Vec::new();
        for (d, m) in self.delayed.drain(..) {
            if d <= 1 {
                self.queue.push_back(m);
            } else {
                waiting.push((d - 1, m));
            }
        }
        self.delayed = waiting;
        for _ in 0..faults.duplicates {
            let delay = rng.gen_range(0..=faults.max_delay);
            if delay == 0 {
                self.queue.push_back(msg.clone());
            } else {
                self.delayed.push((delay, msg.clone()));
            }
        }
    }

    fn pending(&self) -> usize {
        self.queue.len() + self.delayed.len() + self.inflight.len()
    }
}

#[derive(Debug)]
struct State {
    sessions: BTreeMap<String, Session>,
    trace: Vec<WireRecord>,
    faults: DeliveryFaults,
    rng: ChaCha8Rng,
    next_token: u64,
}

/// In-process publish/subscribe broker with persistent sessions and QoS 1
/// delivery. Cloning yields another handle to the same broker.
#[derive(Debug, Clone)]
pub struct Broker {
    state: Arc<Mutex<State>>,
}

impl Default for Broker {
    fn default() -> Self {
        Self::new()
    }
}

impl Broker {
    pub fn new() -> Self {
        Self::with_faults(DeliveryFaults::default(), 0)
    }

    pub fn with_faults(faults: DeliveryFaults, seed: u64) -> Self {
        Self {
            state: Arc::new(Mutex::new(State {
                sessions: BTreeMap::new(),
                trace: Vec::new(),
                faults,
                rng: ChaCha8Rng::seed_from_u64(seed),
                next_token: 1,
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Opens or resumes the session of `client_id`. Messages queued while
    /// it was away are kept.
    pub fn connect(&self, client_id: &str) -> Result<BrokerClient, NetError> {
        let mut st = self.lock();
        let s = st.sessions.entry(client_id.to_owned()).or_default();
        if s.connected {
            return Err(NetError::BrokerDisconnected(format!(
                "client '{client_id}' is already connected"
            )));
        }
        s.connected = true;
        Ok(BrokerClient {
            broker: self.clone(),
            client_id: client_id.to_owned(),
        })
    }

    /// Every publish so far, in order.
    pub fn trace(&self) -> Vec<WireRecord> {
        self.lock().trace.clone()
    }

    /// Messages not yet acknowledged, summed over all sessions.
    pub fn pending(&self) -> usize {
        self.lock().sessions.values().map(Session::pending).sum()
    }
}

/// A connected session. Dropping it disconnects; unacknowledged deliveries
/// go back to the front of the queue.
#[derive(Debug)]
pub struct BrokerClient {
    broker: Broker,
    client_id: String,
}

impl BrokerClient {
    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn disconnect(self) {}
}

impl Drop for BrokerClient {
    fn drop(&mut self) {
        let mut st = self.broker.lock();
        if let Some(s) = st.sessions.get_mut(&self.client_id) {
            let inflight = std::mem::take(&mut s.inflight);
            for (_, m) in inflight.into_iter().rev() {
                s.queue.push_front(m);
            }
            s.connected = false;
        }
    }
}

impl Transport for BrokerClient {
    fn subscribe(&mut self, filter: &str) -> Result<(), NetError> {
        let mut st = self.broker.lock();
        let s = st.sessions.get_mut(&self.client_id).expect("session exists while connected");
        if !s.filters.iter().any(|f| f == filter) {
            s.filters.push(filter.to_owned());
        }
        Ok(())
    }

    fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<(), NetError> {
        let mut guard = self.broker.lock();
        let st = &mut *guard;
        st.trace.push(WireRecord {
            topic: topic.to_owned(),
            payload: payload.to_vec(),
        });
        let msg = Queued {
            topic: topic.to_owned(),
            payload: payload.to_vec(),
        };
        for s in st.sessions.values_mut() {
            if s.filters.iter().any(|f| topic_matches(f, topic)) {
                s.enqueue(msg.clone(), st.faults, &mut st.rng);
            }
        }
        Ok(())
    }

    fn poll(&mut self) -> Result<Option<Delivery>, NetError> {
        let mut guard = self.broker.lock();
        let st = &mut *guard;
        let s = st.sessions.get_mut(&self.client_id).expect("session exists while connected");
        if s.queue.is_empty() {
            s.queue.extend(s.delayed.drain(..).map(|(_, m)| m));
        }
        let Some(m) = s.queue.pop_front() else {
            return Ok(None);
        };
        let token = st.next_token;
        st.next_token += 1;
        let d = Delivery {
            topic: m.topic.clone(),
            payload: m.payload.clone(),
            token,
        };
        s.inflight.insert(token, m);
        Ok(Some(d))
    }

    fn ack(&mut self, delivery: &Delivery) -> Result<(), NetError> {
        let mut st = self.broker.lock();
        let s = st.sessions.get_mut(&self.client_id).expect("session exists while connected");
        s.inflight.remove(&delivery.token);
        Ok(())
    }
}
