use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::endpoint::{process_next, CrashPoint, DeviceRole, DeviceSim, Endpoint, RaaService};
use super::{
    encode_event, session_rows, AgentEvent, Broker, BrokerClient, DeliveryFaults, EventBody,
    MemoryStore, NetError, Roster, SessionStore, Transport, WireRecord,
};
use crate::raa::{write_log, LogRow, RaaConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDistribution {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
    /// Clamped to `[0, 1]`.
    Normal { mean: f64, std_dev: f64 },
}

impl ScoreDistribution {
    /// Draws a score rounded to three decimals.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let raw = match *self {
            ScoreDistribution::Fixed(v) => v,
            ScoreDistribution::Uniform { low, high } => rng.gen_range(low..=high),
            ScoreDistribution::Normal { mean, std_dev } => Normal::new(mean, std_dev)
                .map(|n| n.sample(rng))
                .unwrap_or(mean),
        };
        ((raw.clamp(0.0, 1.0)) * 1000.0).round() / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfig {
    pub class_id: String,
    pub students: usize,
    pub sentences: usize,
    pub scores: ScoreDistribution,
    pub seed: u64,
    /// Split students into this many contiguous teams `T1..`; `None`
    /// puts everyone in a team named after the class.
    pub teams: Option<usize>,
    pub raa: RaaConfig,
}

impl ClassConfig {
    pub fn new(class_id: impl Into<String>, students: usize, sentences: usize, seed: u64) -> Self {
        Self {
            class_id: class_id.into(),
            students,
            sentences,
            scores: ScoreDistribution::Uniform { low: 0.0, high: 1.0 },
            seed,
            teams: None,
            raa: RaaConfig::default(),
        }
    }

    fn width(n: usize) -> usize {
        n.to_string().len().max(2)
    }

    pub fn student_id(&self, i: usize) -> String {
        format!("s{:0w$}", i + 1, w = Self::width(self.students))
    }

    pub fn sentence_id(&self, j: usize) -> String {
        format!("n{:0w$}", j + 1, w = Self::width(self.sentences))
    }

    pub fn roster(&self) -> Roster {
        let mut roster = Roster::single(self.class_id.clone());
        if let Some(t) = self.teams.filter(|&t| t > 0) {
            roster.teams = (0..self.students)
                .map(|i| (self.student_id(i), format!("T{}", i * t / self.students + 1)))
                .collect::<BTreeMap<_, _>>();
        }
        roster
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaultPlan {
    pub delivery: DeliveryFaults,
    /// Crash every endpoint on every k-th delivery it handles (k >= 2), at
    /// a crash point drawn from the seed, then restart it from its durable
    /// state.
    pub restart_every: Option<usize>,
    pub seed: u64,
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRun {
    pub rows: Vec<LogRow>,
    pub trace: Vec<WireRecord>,
    pub display_log: Vec<String>,
    pub robot_log: Vec<String>,
    pub restarts: usize,
}

impl ClassRun {
    /// The session log CSV.
    pub fn log_csv(&self) -> String {
        let mut buf = Vec::new();
        write_log(&self.rows, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// One JSON object per publish: `{"topic":...,"payload":{...}}`.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str("{\"topic\":");
            out.push_str(&serde_json::to_string(&r.topic).expect("string serializes"));
            out.push_str(",\"payload\":");
            out.push_str(&String::from_utf8_lossy(&r.payload));
            out.push_str("}\n");
        }
        out
    }
}

enum Node {
    Service(RaaService<MemoryStore>),
    Device(DeviceSim),
}

impl Node {
    fn endpoint(&mut self) -> &mut dyn Endpoint {
        match self {
            Node::Service(s) => s,
            Node::Device(d) => d,
        }
    }

    /// Throws away everything but durable state.
    fn restart(self, class_id: &str) -> Node {
        match self {
            Node::Service(s) => Node::Service(RaaService::new(class_id, s.into_store())),
            Node::Device(d) => Node::Device(DeviceSim::from_log(d.role(), class_id, d.into_lines())),
        }
    }
}

struct Harness {
    class_id: String,
    broker: Broker,
    nodes: Vec<(String, Option<Node>, Option<BrokerClient>, usize)>,
    plan: FaultPlan,
    rng: ChaCha8Rng,
    restarts: usize,
}

impl Harness {
    fn connect(broker: &Broker, name: &str, node: &mut Node) -> Result<BrokerClient, NetError> {
        let mut c = broker.connect(name)?;
        for f in node.endpoint().filters() {
            c.subscribe(&f)?;
        }
        Ok(c)
    }

    /// Gives each endpoint one delivery, if it has one.
    fn pump(&mut self) -> Result<(), NetError> {
        for (name, node, client, handled) in &mut self.nodes {
            let n = node.as_mut().expect("node present");
            let crash_at = match self.plan.restart_every {
                Some(k) if (*handled + 1) % k == 0 => {
                    Some(CrashPoint::ALL[self.rng.gen_range(0..CrashPoint::ALL.len())])
                }
                _ => None,
            };
            let c = client.as_mut().expect("client connected");
            match process_next(n.endpoint(), c, crash_at) {
                Ok(None) => {}
                Ok(Some(_)) => *handled += 1,
                Err(NetError::Crashed(at)) => {
                    *handled += 1;
                    self.restarts += 1;
                    log::debug!("{name} crashed at {at:?}");
                    drop(client.take());
                    let restarted = node.take().expect("node present").restart(&self.class_id);
                    let mut restarted = restarted;
                    *client = Some(Self::connect(&self.broker, name, &mut restarted)?);
                    *node = Some(restarted);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// [`run_with_faults`] with a clean network.
pub fn run_class_simulation(config: &ClassConfig) -> Result<ClassRun, NetError> {
    run_with_faults(config, &FaultPlan::none())
}

/// Drives every student through every sentence over an in-process broker.
/// Each round publishes one utterance per student; endpoints take turns
/// handling one delivery each until the broker is drained.
pub fn run_with_faults(config: &ClassConfig, plan: &FaultPlan) -> Result<ClassRun, NetError> {
    if config.students == 0 || config.sentences == 0 {
        return Err(NetError::InvalidConfig("a class needs at least one student and one sentence".into()));
    }
    if plan.restart_every.is_some_and(|k| k < 2) {
        return Err(NetError::InvalidConfig("restart_every must be at least 2".into()));
    }
    let class = config.class_id.clone();
    let broker = Broker::with_faults(plan.delivery, plan.seed);
    let mut nodes = Vec::new();
    for (name, mut node) in [
        ("raa-service", Node::Service(RaaService::new(&class, MemoryStore::new(config.raa)))),
        ("display", Node::Device(DeviceSim::new(DeviceRole::Display, &class))),
        ("robot", Node::Device(DeviceSim::new(DeviceRole::Robot, &class))),
    ] {
        let client = Harness::connect(&broker, name, &mut node)?;
        nodes.push((name.to_owned(), Some(node), Some(client), 0));
    }
    let mut h = Harness {
        class_id: class.clone(),
        broker: broker.clone(),
        nodes,
        plan: *plan,
        rng: ChaCha8Rng::seed_from_u64(plan.seed ^ 0xc4a5_11ed),
        restarts: 0,
    };

    let mut tablet = broker.connect("tablet")?;
    let mut scores = ChaCha8Rng::seed_from_u64(config.seed);
    let mut clock = 0u64;
    for j in 0..config.sentences {
        for i in 0..config.students {
            let student_id = config.student_id(i);
            let sentence_id = config.sentence_id(j);
            let e = AgentEvent {
                event_id: format!("{class}-{student_id}-{sentence_id}"),
                class_id: class.clone(),
                student_id,
                sentence_id,
                timestamp_ms: clock,
                body: EventBody::UtteranceScored {
                    fuzzy_score: config.scores.sample(&mut scores),
                },
            };
            clock += 1500;
            tablet.publish(&e.topic(), &encode_event(&e))?;
            h.pump()?;
        }
    }
    drop(tablet);
    while broker.pending() > 0 {
        h.pump()?;
    }

    let mut display_log = Vec::new();
    let mut robot_log = Vec::new();
    let mut rows = Vec::new();
    for (_, node, _, _) in &mut h.nodes {
        match node.take().expect("node present") {
            Node::Service(s) => rows = session_rows(s.store() as &dyn SessionStore, &config.roster()),
            Node::Device(d) if d.role() == DeviceRole::Display => display_log = d.into_lines(),
            Node::Device(d) => robot_log = d.into_lines(),
        }
    }
    Ok(ClassRun {
        rows,
        trace: broker.trace(),
        display_log,
        robot_log,
        restarts: h.restarts,
    })
}
