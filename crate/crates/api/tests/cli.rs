use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const GOAL: &str = "skiros:contain skiros:locationB skiros:objectA\n";

fn rskill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rskill"))
        .args(args)
        .env_remove("RSKILL_SERVER")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn plan_prints_steps_and_emits_pddl() {
    let dir = tempfile::tempdir().unwrap();
    let goal = write(dir.path(), "goal.txt", GOAL);
    let out_dir = dir.path().join("out");
    let o = rskill(&["plan", "--goal", &goal, "--emit-pddl", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(
        lines,
        ["1. drive(workstationA)", "2. pick(objectA)", "3. drive(workstationB)", "4. place(locationB)"]
    );
    let domain = std::fs::read_to_string(out_dir.join("domain.pddl")).unwrap();
    let problem = std::fs::read_to_string(out_dir.join("problem.pddl")).unwrap();
    let d = rskill::planning::parse_domain(&domain).unwrap();
    let p = rskill::planning::parse_problem(&problem).unwrap();
    assert_eq!(rskill::planning::plan(&d, &p).unwrap().len(), 4);
}

#[test]
fn plan_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let ghost = write(dir.path(), "ghost.txt", "skiros:contain skiros:locationB skiros:ghost\n");
    assert_eq!(rskill(&["plan", "--goal", &ghost]).status.code(), Some(2));
    let far = write(dir.path(), "far.txt", "skiros:contain skiros:workstationB skiros:objectA\n");
    let o = rskill(&["plan", "--goal", &far]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let done = write(dir.path(), "done.txt", "skiros:contain skiros:workstationA skiros:objectA\n");
    let o = rskill(&["plan", "--goal", &done]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("empty plan"));
}

#[test]
fn wait_zero_exits_immediately() {
    let o = rskill(&["skill", "run", "wait", "Duration=0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Succeeded"), "{}", stdout(&o));
}

#[test]
fn failing_skill_is_a_runtime_error() {
    let o = rskill(&["skill", "run", "pick", "Object=skiros:objectA", "Arm=skiros:arm1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ended Failed"));
    let o = rskill(&["skill", "run", "fly"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = rskill(&["skill", "run", "wait", "Duration=soon"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_reports_subclass_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(
        dir.path(),
        "cycle.ttl",
        "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
         @prefix skiros: <http://rvmi.aau.dk/ontologies/skiros.owl#> .\n\
         skiros:Crate rdfs:subClassOf skiros:Box .\n\
         skiros:Box rdfs:subClassOf skiros:Bin .\n\
         skiros:Bin rdfs:subClassOf skiros:Crate .\n",
    );
    let o = rskill(&["validate", "--scene", &scene]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("cycle"), "{err}");
    for c in ["skiros:Crate", "skiros:Box", "skiros:Bin"] {
        assert!(err.contains(c), "{err}");
    }
}

#[test]
fn validate_accepts_bundled_setup() {
    let o = rskill(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("ok\n"));
    let dir = tempfile::tempdir().unwrap();
    let skills = write(
        dir.path(),
        "bad.toml",
        "[[skill]]\nname = \"hover\"\n[[primitive]]\nname = \"hover_impl\"\nimplements = \"hover\"\nfactory = \"no_such\"\n",
    );
    let o = rskill(&["validate", "--skills", &skills]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no_such"));
}

#[test]
fn usage_errors() {
    assert_eq!(rskill(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rskill(&["wm", "load", "x.ttl"]).status.code(), Some(1));
    assert_eq!(rskill(&["skill", "run", "wait", "Duration"]).status.code(), Some(1));
    assert_eq!(rskill(&["--help"]).status.code(), Some(0));
}

#[test]
fn local_mission() {
    let dir = tempfile::tempdir().unwrap();
    let goal = write(dir.path(), "goal.txt", GOAL);
    let o = rskill(&["mission", "submit", "--goal", &goal]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mission-1 Succeeded after 0 replans"), "{text}");
    assert!(text.contains("4. place(locationB) Succeeded"), "{text}");
    let ghost = write(dir.path(), "ghost.txt", "skiros:contain skiros:locationB skiros:ghost\n");
    let o = rskill(&["mission", "submit", "--goal", &ghost]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("Unsatisfiable"));
}

#[test]
fn local_dump() {
    let o = rskill(&["wm", "dump"]);
    assert_eq!(o.status.code(), Some(0));
    let g = rskill::ontology::parse_turtle(&stdout(&o)).unwrap();
    assert!(g.len() > 50);
    let o = rskill(&["wm", "dump", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["elements"][0]["id"], "skiros:Scene-0");
}

struct Server {
    child: Child,
    url: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(config: &str) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rskill"))
        .args(["--config", config, "serve", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").unwrap().to_string();
    Server { child, url }
}

#[test]
fn remote_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "deploy.toml",
        "scene = \"scene_two_ws.ttl\"\nrate = 50\n[durations]\ndrive = 0.2\npick = 0.1\nplace = 0.1\n",
    );
    let server = start_server(&cfg);
    let s = server.url.as_str();

    let o = rskill(&["--server", s, "skill", "list"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("pick (Container:skiros:Location:inferred"), "{}", stdout(&o));

    let o = rskill(&["--server", s, "skill", "run", "wait", "Duration=0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = rskill(&["--server", s, "skill", "run", "wait", "Duration=30", "--detach"]);
    assert_eq!(o.status.code(), Some(0));
    let id = stdout(&o).split_whitespace().nth(1).unwrap().to_string();
    let o = rskill(&["--server", s, "skill", "stop", &id]);
    assert_eq!(stdout(&o).trim(), format!("{id} Preempted"));
    assert_eq!(rskill(&["--server", s, "skill", "stop", "robot1-99"]).status.code(), Some(3));

    let o = rskill(&["--server", s, "wm", "set", "skiros:objectA", "skiros:Color", "red"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = rskill(&["--server", s, "wm", "dump", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let obj = v["elements"].as_array().unwrap().iter().find(|e| e["id"] == "skiros:objectA").unwrap();
    assert_eq!(obj["properties"]["skiros:Color"][0]["value"], "red");

    let goal = write(dir.path(), "goal.txt", GOAL);
    let o = rskill(&["--server", s, "plan", "--goal", &goal]);
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = rskill(&["--server", s, "mission", "submit", "--goal", &goal, "--timeout", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("mission-1 Succeeded"));
    let o = rskill(&["--server", s, "mission", "watch", "mission-1"]);
    assert_eq!(o.status.code(), Some(0));

    let scene = write(dir.path(), "single.ttl", rskill::sim::SCENE_SINGLE_WS);
    let o = rskill(&["--server", s, "wm", "load", &scene]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = rskill(&["--server", s, "wm", "dump"]);
    assert!(!stdout(&o).contains("skiros:workstationB"));
}
