//! Ground-station API over real sockets.

use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::time::Duration;

use futures_util::StreamExt;
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;

use sbsim::service::{router, RawView, Service, Status, StreamEvent};
use sbsim_core::defenses::{Alert, AlertRule};
use sbsim_core::downlink::split_frames;
use sbsim_core::ground::{parse_hex_dump, CommandLogRecord, GroundDatabase, GroundStation, HkSnapshot, IndexRow};
use sbsim_core::interface::star_tracker::{CMD_MID, DATA_TLM_MID, HK_TLM_MID};
use sbsim_core::scenario::{simulate, Scenario};
use sbsim_core::spacepacket::SpacePacket;

fn scenario(name: &str) -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.json"));
    Scenario::load(&p).unwrap()
}

/// A station that has already received a full replacement run.
fn replayed_station() -> (GroundStation, Vec<Vec<u8>>) {
    let (a, _) = simulate(&scenario("replacement")).unwrap();
    let mut g = GroundStation::new(GroundDatabase::builtin());
    g.send_named(400, "ST_ENABLE", &[]).unwrap();
    g.ingest_stream(0, &a.downlink);
    g.end_tick();
    (g, split_frames(&a.downlink).unwrap())
}

async fn serve(service: Arc<Service>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(service)).await.unwrap() });
    format!("127.0.0.1:{}", addr.port())
}

fn with_uplink(ground: GroundStation, depth: usize) -> (Arc<Service>, Receiver<Vec<u8>>) {
    let (tx, rx) = mpsc::sync_channel(depth);
    (Service::new(ground, Some(tx), Status::default()), rx)
}

async fn get<T: serde::de::DeserializeOwned>(base: &str, path: &str) -> T {
    let r = reqwest::get(format!("http://{base}{path}")).await.unwrap();
    assert!(r.status().is_success(), "{path}: {}", r.status());
    r.json().await.unwrap()
}

async fn post_cmd(base: &str, body: Value) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("http://{base}/cmd"))
        .json(&body)
        .send()
        .await
        .unwrap()
}

#[tokio::test]
async fn read_views_match_the_station() {
    let (ground, _) = replayed_station();
    let expected_index = ground.index().to_vec();
    let (service, _rx) = with_uplink(ground, 4);
    let base = serve(service).await;

    let hk: Vec<HkSnapshot> = get(&base, "/hk").await;
    assert_eq!(hk.len(), 1);
    assert_eq!(hk[0].mid, HK_TLM_MID);
    assert_eq!(hk[0].fields["ENABLED"], Value::from(1));

    let all: Vec<IndexRow> = get(&base, "/archive").await;
    assert_eq!(all, expected_index);
    let tail: Vec<IndexRow> = get(&base, "/archive?from=10").await;
    assert_eq!(tail, expected_index[10..]);
    let page: Vec<IndexRow> = get(&base, "/archive?from=3&limit=2").await;
    assert_eq!(page.iter().map(|r| r.row).collect::<Vec<_>>(), vec![3, 4]);
    assert_eq!(expected_index.iter().filter(|r| r.mid == DATA_TLM_MID).count(), 24);

    let log: Vec<CommandLogRecord> = get(&base, "/cmdlog").await;
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].name, "ST_ENABLE");
    assert_eq!(log[0].origin, "GROUND");
}

#[tokio::test]
async fn raw_view_is_the_archived_bytes() {
    let (ground, frames) = replayed_station();
    let (service, _rx) = with_uplink(ground, 4);
    let base = serve(service).await;
    let raw: RawView = get(&base, "/raw/1").await;
    assert_eq!(raw.row, 1);
    assert_eq!(parse_hex_dump(&raw.dump).unwrap(), frames[1]);
    let first_line = raw.dump.lines().next().unwrap();
    assert_eq!(first_line.split_whitespace().count(), 17);

    let r = reqwest::get(format!("http://{base}/raw/100000")).await.unwrap();
    assert_eq!(r.status(), reqwest::StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn commands_are_logged_and_uplinked() {
    let (service, rx) = with_uplink(GroundStation::new(GroundDatabase::builtin()), 4);
    let base = serve(service.clone()).await;

    let r = post_cmd(&base, serde_json::json!({"mid": "0x18D0", "function_code": 2})).await;
    assert_eq!(r.status(), reqwest::StatusCode::OK);
    let rec: CommandLogRecord = r.json().await.unwrap();
    assert_eq!(rec.name, "ST_ENABLE");
    let sent = SpacePacket::decode(&rx.try_recv().unwrap()).unwrap();
    assert_eq!((sent.mid(), sent.function_code()), (CMD_MID, Some(2)));
    assert!(sent.checksum_ok());

    // numeric MID works too
    let r = post_cmd(&base, serde_json::json!({"mid": CMD_MID.value(), "function_code": 0})).await;
    assert_eq!(r.status(), reqwest::StatusCode::OK);
    assert_eq!(
        SpacePacket::decode(&rx.try_recv().unwrap()).unwrap().sequence_count(),
        1
    );

    for bad in [
        serde_json::json!({"mid": "0x18D0", "function_code": 99}),
        serde_json::json!({"mid": "0x08D1", "function_code": 2}),
        serde_json::json!({"mid": "0x18D0", "function_code": 2, "args": [1]}),
    ] {
        let r = post_cmd(&base, bad.clone()).await;
        assert_eq!(r.status(), reqwest::StatusCode::BAD_REQUEST, "{bad}");
    }
    assert!(rx.try_recv().is_err());
    assert_eq!(service.with_ground(|g| g.cmdlog().len()), 2);
}

#[tokio::test]
async fn refused_uplink_leaves_no_log_record() {
    let (service, _rx) = with_uplink(GroundStation::new(GroundDatabase::builtin()), 1);
    let base = serve(service.clone()).await;
    assert!(
        post_cmd(&base, serde_json::json!({"mid": "0x18D0", "function_code": 0}))
            .await
            .status()
            .is_success()
    );
    let r = post_cmd(&base, serde_json::json!({"mid": "0x18D0", "function_code": 0})).await;
    assert_eq!(r.status(), reqwest::StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(service.with_ground(|g| g.cmdlog().len()), 1);

    let detached = Service::new(GroundStation::new(GroundDatabase::builtin()), None, Status::default());
    let base = serve(detached).await;
    let r = post_cmd(&base, serde_json::json!({"mid": "0x18D0", "function_code": 0})).await;
    assert_eq!(r.status(), reqwest::StatusCode::SERVICE_UNAVAILABLE);
}

async fn next_event<S>(ws: &mut S) -> StreamEvent
where
    S: futures_util::Stream<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .unwrap()
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn stream_pushes_records_as_they_arrive() {
    let (_, frames) = replayed_station();
    let (service, _rx) = with_uplink(GroundStation::new(GroundDatabase::builtin()), 4);
    let base = serve(service.clone()).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{base}/stream"))
        .await
        .unwrap();
    // the subscription is registered once the upgrade completes
    tokio::time::sleep(Duration::from_millis(50)).await;

    service.set_tick(3);
    service.ingest(&frames[0]);
    match next_event(&mut ws).await {
        StreamEvent::Telemetry { row } => {
            assert_eq!(row.row, 0);
            assert_eq!(row.tick, 3);
        }
        e => panic!("unexpected {e:?}"),
    }

    let mut truncated = frames[1].clone();
    truncated.pop();
    service.ingest(&truncated);
    assert!(matches!(next_event(&mut ws).await, StreamEvent::Violation { .. }));
    assert_eq!(service.with_ground(|g| g.index().len()), 1);

    post_cmd(&base, serde_json::json!({"mid": "0x18D0", "function_code": 4})).await;
    match next_event(&mut ws).await {
        StreamEvent::Command { record } => assert_eq!(record.name, "ST_REQ_HK"),
        e => panic!("unexpected {e:?}"),
    }

    let alert = Alert {
        tick: 3,
        rule: AlertRule::DupPublisher,
        mid: DATA_TLM_MID,
        detail: "test".into(),
        record: 0,
    };
    service.push_alert(alert.clone());
    assert_eq!(next_event(&mut ws).await, StreamEvent::Alert { alert: alert.clone() });
    let alerts: Vec<Alert> = get(&base, "/alerts").await;
    assert_eq!(alerts, vec![alert]);
}
