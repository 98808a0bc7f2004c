//! Serves a deployment on an ephemeral port with a manual clock, then
//! drives a mission through the blocking client.

use std::sync::Arc;

use reqwest::Method;
use rskill_api::client::Client;
use rskill_api::routes::{MissionCreated, Stepped};
use rskill_api::{router, Deployment, DeploymentConfig};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = DeploymentConfig {
        realtime: false,
        ..DeploymentConfig::default()
    };
    let d = Arc::new(Deployment::build(&cfg)?);
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let url = format!("http://{}", listener.local_addr()?);
    rt.spawn(async move { axum::serve(listener, router(d)).await });

    let c = Client::new(&url)?;
    let body = json!({ "goal": "skiros:contain skiros:locationB skiros:objectA" });
    let m: MissionCreated = c.send_json(Method::POST, "/v1/missions", &body)?;
    println!("submitted {} ({:?})", m.id, m.state);
    loop {
        let s: Stepped = c.send_json(Method::POST, "/v1/clock/step?ticks=20", &json!({}))?;
        let info: Value = c.get(&format!("/v1/missions/{}", m.id))?;
        let state = info["state"].as_str().unwrap_or_default().to_string();
        println!("tick {:>4}: {state}", s.tick);
        if state != "planning" && state != "executing" {
            for step in info["steps"].as_array().into_iter().flatten() {
                println!("  {} {}", step["summary"], step["state"]);
            }
            break;
        }
    }
    Ok(())
}
