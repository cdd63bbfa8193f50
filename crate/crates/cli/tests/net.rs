use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use aifml_cli::net::{LoggedDevice, Service};
use aifml_core::netlink::{
    encode_event, serve, AgentEvent, Broker, DeviceRole, Endpoint, EventBody, Handled, RobotAction, Transport,
};
use aifml_core::raa::{RaaConfig, RaaSession, Utterance};

fn score(i: usize, j: usize) -> f64 {
    ((i * 37 + j * 11) % 100) as f64 / 100.0
}

fn spawn<E: Endpoint + Send + 'static>(
    broker: &Broker,
    name: &str,
    mut endpoint: E,
    stop: &Arc<AtomicBool>,
) -> thread::JoinHandle<E> {
    let mut client = broker.connect(name).unwrap();
    for f in endpoint.filters() {
        client.subscribe(&f).unwrap();
    }
    let stop = stop.clone();
    thread::spawn(move || {
        serve(&mut endpoint, &mut client, &stop, Duration::from_millis(1)).unwrap();
        endpoint
    })
}

fn read_lines(p: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(p).unwrap_or_default().lines().map(str::to_owned).collect()
}

#[test]
fn serve_and_devices_match_offline_replay() {
    let (students, sentences) = (6, 9);
    let dir = tempfile::tempdir().unwrap();
    let display_log = dir.path().join("display.log");
    let robot_log = dir.path().join("robot.log");
    let broker = Broker::new();
    let stop = Arc::new(AtomicBool::new(false));

    let service = Service::open("c7", Some(&dir.path().join("store.jsonl")), RaaConfig::default()).unwrap();
    let threads = (
        spawn(&broker, "raa", service, &stop),
        spawn(&broker, "display", LoggedDevice::open(DeviceRole::Display, "c7", Some(&display_log), false).unwrap(), &stop),
        spawn(&broker, "robot", LoggedDevice::open(DeviceRole::Robot, "c7", Some(&robot_log), false).unwrap(), &stop),
    );

    let mut tablet = broker.connect("tablet").unwrap();
    let mut sessions: BTreeMap<String, RaaSession> = BTreeMap::new();
    let (mut want_display, mut want_robot) = (Vec::new(), Vec::new());
    for j in 0..sentences {
        for i in 0..students {
            let (sid, nid) = (format!("s{i}"), format!("n{j}"));
            let id = format!("c7-{sid}-{nid}");
            let e = AgentEvent {
                event_id: id.clone(),
                class_id: "c7".into(),
                student_id: sid.clone(),
                sentence_id: nid.clone(),
                timestamp_ms: (j * students + i) as u64,
                body: EventBody::UtteranceScored { fuzzy_score: score(i, j) },
            };
            tablet.publish(&e.topic(), &encode_event(&e)).unwrap();
            let o = sessions
                .entry(sid.clone())
                .or_insert_with(|| RaaSession::new(sid.clone()))
                .step(
                    &RaaConfig::default(),
                    Utterance {
                        student_id: sid.clone(),
                        sentence_id: nid.clone(),
                        fuzzy_score: score(i, j),
                        timestamp_ms: 0,
                    },
                )
                .unwrap();
            want_display.push(format!(
                "{id}/display_update\t{sid}\t{nid}\t{}\t{}\t{}",
                o.recognition.as_str(),
                o.message.text(),
                score(i, j)
            ));
            want_robot.push(format!("{id}/robot_action\t{sid}\t{nid}\t{}", RobotAction::for_message(o.message).as_str()));
        }
    }

    let deadline = Instant::now() + Duration::from_secs(20);
    while read_lines(&robot_log).len() < want_robot.len() || read_lines(&display_log).len() < want_display.len() {
        assert!(Instant::now() < deadline, "devices did not catch up");
        thread::sleep(Duration::from_millis(5));
    }
    while broker.pending() > 0 {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(5));
    }
    stop.store(true, Ordering::SeqCst);
    let svc = threads.0.join().unwrap();
    threads.1.join().unwrap();
    threads.2.join().unwrap();

    assert_eq!(read_lines(&display_log), want_display);
    assert_eq!(read_lines(&robot_log), want_robot);

    let csv = dir.path().join("sessions.csv");
    assert_eq!(svc.export("c7", &csv).unwrap(), students * sentences);

    // A restarted device remembers what it already showed.
    let mut robot = LoggedDevice::open(DeviceRole::Robot, "c7", Some(&robot_log), false).unwrap();
    assert_eq!(robot.lines().len(), want_robot.len());
    let trace = broker.trace();
    let replayed = trace.iter().find(|r| r.topic.ends_with("/robot/action")).unwrap();
    let mut sink = broker.connect("sink").unwrap();
    let d = aifml_core::netlink::Delivery {
        topic: replayed.topic.clone(),
        payload: replayed.payload.clone(),
        token: 0,
    };
    assert_eq!(robot.handle(&d, &mut sink, None).unwrap(), Handled::Duplicate);
    assert_eq!(read_lines(&robot_log).len(), want_robot.len());
}

#[test]
fn device_kind_and_broker_errors() {
    let bin = env!("CARGO_BIN_EXE_aifml");
    let o = Command::new(bin)
        .args(["net", "device", "speaker", "--broker", "127.0.0.1:1883", "--class", "c1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    // Grab a free port, then close it so connections are refused.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = Command::new(bin)
        .args(["net", "serve", "--broker", &format!("127.0.0.1:{port}"), "--class", "c1", "--retries", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_packet(s: &mut TcpStream) -> Option<(u8, Vec<u8>)> {
    let mut head = [0u8; 1];
    s.read_exact(&mut head).ok()?;
    let (mut len, mut mul) = (0usize, 1usize);
    loop {
        let mut b = [0u8; 1];
        s.read_exact(&mut b).ok()?;
        len += (b[0] & 0x7f) as usize * mul;
        if b[0] & 0x80 == 0 {
            break;
        }
        mul *= 128;
    }
    let mut body = vec![0u8; len];
    s.read_exact(&mut body).ok()?;
    Some((head[0], body))
}

/// Just enough of an MQTT broker to accept one client, confirm its
/// subscriptions and optionally push one QoS 1 publish after subscribing.
fn fake_broker(listener: TcpListener, events: mpsc::Sender<u8>, push: Option<(String, Vec<u8>)>) {
    let (mut s, _) = listener.accept().unwrap();
    while let Some((head, body)) = read_packet(&mut s) {
        let _ = events.send(head >> 4);
        let mut reply: Vec<u8> = match head >> 4 {
            1 => vec![0x20, 0x02, 0x00, 0x00],
            8 => vec![0x90, 0x03, body[0], body[1], 0x01],
            12 => vec![0xd0, 0x00],
            14 => break,
            _ => continue,
        };
        if head >> 4 == 8 {
            if let Some((topic, payload)) = &push {
                let mut len = 2 + topic.len() + 2 + payload.len();
                reply.push(0x32);
                while len >= 128 {
                    reply.push((len % 128) as u8 | 0x80);
                    len /= 128;
                }
                reply.extend([len as u8, 0, topic.len() as u8]);
                reply.extend(topic.as_bytes());
                reply.extend([0x00, 0x07]);
                reply.extend(payload);
            }
        }
        if s.write_all(&reply).is_err() {
            break;
        }
    }
}

fn run_device(push: Option<(String, Vec<u8>)>, wait_for: u8) -> (i32, Vec<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let (tx, rx) = mpsc::channel();
    let broker = thread::spawn(move || fake_broker(listener, tx, push));
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("display.log");
    let mut child = Command::new(env!("CARGO_BIN_EXE_aifml"))
        .args(["net", "device", "display", "--broker", &format!("127.0.0.1:{port}"), "--class", "c1", "--log"])
        .arg(&log)
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    loop {
        let kind = rx.recv_timeout(Duration::from_secs(10)).expect("device talks to the broker");
        if kind == wait_for {
            break;
        }
    }
    if wait_for == 4 {
        // The acknowledgement only goes out once the line is on disk.
        assert_eq!(read_lines(&log).len(), 1);
    }
    thread::sleep(Duration::from_millis(300));
    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(st) = child.try_wait().unwrap() {
            break st;
        }
        assert!(Instant::now() < deadline, "device ignored the interrupt");
        thread::sleep(Duration::from_millis(20));
    };
    broker.join().unwrap();
    assert!(log.exists());
    (status.code().unwrap(), read_lines(&log))
}

#[test]
fn interrupt_while_idle_exits_cleanly() {
    let (code, lines) = run_device(None, 8);
    assert_eq!(code, 0);
    assert!(lines.is_empty());
}

#[test]
fn device_logs_then_acks_over_mqtt() {
    let e = AgentEvent {
        event_id: "c1-s01-n01/display_update".into(),
        class_id: "c1".into(),
        student_id: "s01".into(),
        sentence_id: "n01".into(),
        timestamp_ms: 0,
        body: EventBody::DisplayUpdate {
            fuzzy_score: 0.8,
            recognition: aifml_core::raa::Recognition::CorrectlyRecognized,
            message: aifml_core::raa::RaaMessage::Congratulations,
        },
    };
    let (code, lines) = run_device(Some((e.topic(), encode_event(&e))), 4);
    assert_eq!(code, 0);
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("c1-s01-n01/display_update\ts01\tn01\tcorrectly_recognized\t"), "{}", lines[0]);
}
