use std::sync::Arc;
use std::time::Duration;

use futures_util::StreamExt;
use rskill::planning::GoalLiteral;
use rskill::task_manager::{Goal, MissionState};
use rskill_api::{router, ApiEvent, Deployment, DeploymentConfig, EventPayload};
use rskill::skill_manager::ManagerEvent;
use tokio_tungstenite::tungstenite::Message;

async fn serve(d: Arc<Deployment>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(d)).await.unwrap() });
    format!("ws://{addr}/v1/events")
}

/// Reads text frames until one with `seq == until` arrives.
async fn read_until(url: &str, until: u64) -> Vec<ApiEvent> {
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let mut out: Vec<ApiEvent> = Vec::new();
    while out.last().is_none_or(|e| e.seq < until) {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("event in time")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            out.push(serde_json::from_str(&t).unwrap());
        }
    }
    out
}

async fn settle(d: &Deployment) -> u64 {
    let mut head = d.hub().head();
    loop {
        tokio::time::sleep(Duration::from_millis(50)).await;
        let now = d.hub().head();
        if now == head {
            return now;
        }
        head = now;
    }
}

fn goal() -> Goal {
    Goal::new(vec![GoalLiteral::relation("skiros:contain", "skiros:locationB", "skiros:objectA")])
}

async fn run_mission(d: &Arc<Deployment>) {
    let d = d.clone();
    tokio::task::spawn_blocking(move || {
        let id = d.task_manager().submit_goal(goal()).unwrap();
        for _ in 0..400 {
            if d.task_manager().mission(&id).unwrap().state.is_terminal() {
                break;
            }
            d.step().unwrap();
        }
        assert_eq!(d.task_manager().mission(&id).unwrap().state, MissionState::Succeeded);
    })
    .await
    .unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_mirrors_manager_transcripts() {
    let d = Arc::new(Deployment::build(&DeploymentConfig::default()).unwrap());
    let url = serve(d.clone()).await;
    run_mission(&d).await;
    let head = settle(&d).await;
    let events = read_until(&format!("{url}?from=0"), head).await;
    assert_eq!(events.len() as u64, head);
    assert!(events.windows(2).all(|w| w[1].seq == w[0].seq + 1));

    let m = d.manager("robot1").unwrap();
    let transcript_len: usize = m.tasks().iter().map(|t| m.transcript(&t.id).unwrap().len()).sum();
    let node_events = events
        .iter()
        .filter(|e| matches!(e.payload, EventPayload::TaskUpdate(ManagerEvent::NodeChanged { .. })))
        .count();
    assert_eq!(node_events, transcript_len);

    let versions: Vec<u64> = events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::WmChange(c) => Some(c.version),
            _ => None,
        })
        .collect();
    assert!(versions.windows(2).all(|w| w[1] == w[0] + 1));
    assert_eq!(versions.last().copied(), Some(d.wm().version()));
    assert!(events.iter().any(|e| matches!(
        &e.payload,
        EventPayload::MissionUpdate(rskill::task_manager::MissionEvent::MissionFinished { state: MissionState::Succeeded, .. })
    )));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn reconnect_resumes_without_loss() {
    let d = Arc::new(Deployment::build(&DeploymentConfig::default()).unwrap());
    let url = serve(d.clone()).await;
    run_mission(&d).await;
    let head = settle(&d).await;
    let full = read_until(&format!("{url}?from=0"), head).await;
    let cut = head / 3;
    let first = read_until(&format!("{url}?from=0"), cut).await;
    let rest = read_until(&format!("{url}?from={cut}"), head).await;
    let joined: Vec<ApiEvent> = first.into_iter().chain(rest).collect();
    assert_eq!(joined, full);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_events_arrive_after_connect() {
    let d = Arc::new(Deployment::build(&DeploymentConfig::default()).unwrap());
    let url = serve(d.clone()).await;
    let start = d.hub().head();
    let reader = tokio::spawn({
        let url = format!("{url}?from={start}");
        async move { read_until(&url, start + 1).await }
    });
    tokio::time::sleep(Duration::from_millis(100)).await;
    d.wm()
        .commit(|wm| {
            wm.set_relation(
                &rskill::ontology::Iri::must("skiros:robot1"),
                &rskill::ontology::vocab::at(),
                &rskill::ontology::Iri::must("skiros:workstationA"),
                true,
            )
        })
        .unwrap();
    let got = reader.await.unwrap();
    assert!(matches!(got[0].payload, EventPayload::WmChange(_)));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn truncated_history_is_reported() {
    let cfg = DeploymentConfig {
        history: 5,
        ..DeploymentConfig::default()
    };
    let d = Arc::new(Deployment::build(&cfg).unwrap());
    let url = serve(d.clone()).await;
    run_mission(&d).await;
    settle(&d).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("{url}?from=0")).await.unwrap();
    let msg = ws.next().await.unwrap().unwrap();
    let v: serde_json::Value = serde_json::from_str(msg.to_text().unwrap()).unwrap();
    assert_eq!(v["error"]["code"], "history_truncated");
    assert_eq!(v["error"]["detail"]["requested"], 0);
}
