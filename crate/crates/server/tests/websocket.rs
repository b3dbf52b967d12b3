mod common;

use std::time::Duration;

use assistlab_core::envs::Task;
use assistlab_core::robot::RobotProfileId;
use assistlab_eval::record::read_records;
use assistlab_eval::{replay, QuestionnaireRecord};
use assistlab_server::{AppState, ClientMessage, PolicyRegistry, ServerConfig, ServerMessage};
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

async fn spawn(tick: Duration, record: Option<std::path::PathBuf>) -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let policies: PolicyRegistry = (*common::registry()).clone();
    let state = AppState::new(common::lab(), policies, ServerConfig { tick, seed: 1, record_dir: record, ui_dir: None });
    tokio::spawn(assistlab_server::serve(listener, state));
    addr
}

fn with_sid(msg: ClientMessage, sid: &str) -> String {
    let mut v = serde_json::to_value(msg).unwrap();
    v["sid"] = sid.into();
    v.to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn full_session_over_a_socket() {
    let dir = tempfile::tempdir().unwrap();
    let addr = spawn(Duration::from_millis(2), Some(dir.path().to_owned())).await;
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session")).await.unwrap();
    let (mut tx, mut rx) = ws.split();

    tx.send(Message::text(serde_json::to_string(&common::hello()).unwrap())).await.unwrap();
    let config: ServerMessage = loop {
        if let Message::Text(t) = rx.next().await.unwrap().unwrap() {
            break serde_json::from_str(&t).unwrap();
        }
    };
    let ServerMessage::Config { sid, .. } = config else { panic!("{config:?}") };

    tx.send(Message::text(with_sid(common::start(Task::Feeding, RobotProfileId::ArmA, "feed-a", false), &sid)))
        .await
        .unwrap();

    // flood poses far faster than the simulation clock while reading
    let flood_sid = sid.clone();
    let flood = tokio::spawn(async move {
        let mut t = 0.0;
        for i in 0..4000 {
            t += 0.001;
            if tx.send(Message::text(with_sid(common::pose(Task::Feeding, t), &flood_sid))).await.is_err() {
                break;
            }
            if i % 8 == 0 {
                tokio::task::yield_now().await;
            }
        }
        tx
    });

    let mut states = 0;
    let result = loop {
        let Message::Text(t) = rx.next().await.unwrap().unwrap() else { continue };
        match serde_json::from_str::<ServerMessage>(&t).unwrap() {
            ServerMessage::State { .. } => states += 1,
            r @ ServerMessage::Result { .. } => break r,
            ServerMessage::Error { message, .. } => panic!("{message}"),
            other => panic!("{other:?}"),
        }
    };
    assert_eq!(states, 200);
    assert!(matches!(result, ServerMessage::Result { steps: 200, practice: false, .. }));

    let mut tx = flood.await.unwrap();
    let q = ClientMessage::Questionnaire { sid: sid.clone(), l1: 5, l2: 6, l3: 7, l4: 4 };
    tx.send(Message::text(serde_json::to_string(&q).unwrap())).await.unwrap();
    // the server closes the socket once the session is done; poses sent
    // after the trial ended come back as errors
    while let Some(Ok(msg)) = rx.next().await {
        if let Message::Text(t) = msg {
            let m: ServerMessage = serde_json::from_str(&t).unwrap();
            assert_eq!(m.kind(), "error", "{m:?}");
        }
    }

    let rec_path = dir.path().join(format!("{sid}-0.jsonl"));
    let records = read_records(std::io::BufReader::new(std::fs::File::open(&rec_path).unwrap())).unwrap();
    assert_eq!(records.len(), 1);
    assert!(replay(&records[0], &common::lab(), None).unwrap().clean());
    let qs = QuestionnaireRecord::read_csv(std::fs::File::open(dir.path().join(format!("{sid}-questionnaire.csv"))).unwrap())
        .unwrap();
    assert_eq!(qs.len(), 1);
    assert_eq!((qs[0].l1, qs[0].l4), (5, 4));
}

#[tokio::test]
async fn index_is_served() {
    let addr = spawn(Duration::from_millis(100), None).await;
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    stream.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("/session"));
}

#[tokio::test]
async fn ui_directory_is_served_when_given() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<p>bundle</p>").unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = ServerConfig { ui_dir: Some(ui.path().to_owned()), ..ServerConfig::default() };
    tokio::spawn(assistlab_server::serve(listener, AppState::new(common::lab(), PolicyRegistry::new(), cfg)));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    stream.read_to_string(&mut body).await.unwrap();
    assert!(body.contains("<p>bundle</p>"), "{body}");
}
