//! OpenAI-compatible chat backend with strict JSON replies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompt::{PromptTemplate, BREAK_TEMPLATE, LOCATE_TEMPLATE, STATUS_TEMPLATE};
use super::{
    validate_status, DecisionBackend, DecisionError, LocateContext, LocateDecision, StatusContext, StatusDecision,
    Subtask, FRONTIER_TARGET,
};
use crate::geometry::Point2;
use crate::masmap::MemoryBank;

pub const ENV_ENDPOINT: &str = "TPNAV_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "TPNAV_LLM_API_KEY";
pub const ENV_MODEL: &str = "TPNAV_LLM_MODEL";

const DEFAULT_MODEL: &str = "gpt-4o";
/// Replies naming a position farther than this from every known entry are rejected.
pub const SNAP_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    pub attempts: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model: model.into(),
            timeout: Duration::from_secs(30),
            attempts: 3,
        }
    }

    pub fn from_env() -> Result<Self, DecisionError> {
        let get = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let endpoint = get(ENV_ENDPOINT).ok_or_else(|| DecisionError::BackendUnavailable(format!("{ENV_ENDPOINT} is not set")))?;
        let key = get(ENV_API_KEY).ok_or_else(|| DecisionError::BackendUnavailable(format!("{ENV_API_KEY} is not set")))?;
        Ok(Self::new(endpoint, key, get(ENV_MODEL).unwrap_or_else(|| DEFAULT_MODEL.into())))
    }

    /// Full completion URL; a bare base URL gets `/chat/completions` appended.
    pub fn chat_url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
}

fn map_ureq(e: ureq::Error) -> DecisionError {
    match e {
        ureq::Error::Timeout(_) => DecisionError::Timeout,
        ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            DecisionError::Timeout
        }
        ureq::Error::StatusCode(s) => DecisionError::HttpError(s),
        other => DecisionError::Transport(other.to_string()),
    }
}

/// One request/response exchange without retries.
fn chat_once(cfg: &RemoteConfig, request: &ChatRequest) -> Result<ChatResponse, DecisionError> {
    // A fresh agent per call: parallel episodes never share a connection.
    let agent: ureq::Agent =
        ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).http_status_as_error(false).build().into();
    let mut resp = agent
        .post(&cfg.chat_url())
        .header("Authorization", &format!("Bearer {}", cfg.api_key))
        .send_json(request)
        .map_err(map_ureq)?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(DecisionError::HttpError(status));
    }
    let body = resp.body_mut().read_to_string().map_err(map_ureq)?;
    let v: Value = serde_json::from_str(&body).map_err(|e| DecisionError::ParseError(format!("response body: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(|c| ChatResponse { content: c.to_string() })
        .ok_or_else(|| DecisionError::ParseError("missing choices[0].message.content".into()))
}

/// Run `attempt` up to `attempts` times, returning the first success and
/// how many attempts failed before it.
fn with_retries<T>(
    attempts: usize,
    what: &str,
    mut attempt: impl FnMut() -> Result<T, DecisionError>,
) -> (Result<T, DecisionError>, usize) {
    let attempts = attempts.max(1);
    let mut last = DecisionError::Transport("no attempt made".into());
    for k in 0..attempts {
        match attempt() {
            Ok(v) => return (Ok(v), k),
            Err(e) => {
                log::warn!("{what}: attempt {} of {attempts} failed: {e}", k + 1);
                last = e;
            }
        }
    }
    (Err(last), attempts)
}

/// Send a chat request, retrying transport, status and envelope failures.
pub fn remote_chat(cfg: &RemoteConfig, request: &ChatRequest) -> Result<ChatResponse, DecisionError> {
    with_retries(cfg.attempts, "chat", || chat_once(cfg, request)).0
}

/// The single JSON object in a reply, tolerating a Markdown code fence
/// or prose around it.
pub fn extract_json_object(text: &str) -> Result<Value, DecisionError> {
    let start = text.find('{').ok_or_else(|| DecisionError::ParseError("no JSON object in reply".into()))?;
    let end = text.rfind('}').filter(|e| *e > start).ok_or_else(|| DecisionError::ParseError("unterminated JSON object".into()))?;
    let v: Value = serde_json::from_str(&text[start..=end]).map_err(|e| DecisionError::ParseError(e.to_string()))?;
    if v.is_object() {
        Ok(v)
    } else {
        Err(DecisionError::ParseError("reply is not a JSON object".into()))
    }
}

fn from_reply<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, DecisionError> {
    serde_json::from_value(extract_json_object(text)?).map_err(|e| DecisionError::ParseError(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BreakItem {
    requirement: String,
    #[serde(default)]
    preference: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BreakReply {
    subtasks: Vec<BreakItem>,
}

pub fn parse_break_reply(text: &str) -> Result<Vec<Subtask>, DecisionError> {
    let r: BreakReply = from_reply(text)?;
    if r.subtasks.is_empty() {
        return Err(DecisionError::ParseError("empty subtask list".into()));
    }
    r.subtasks
        .into_iter()
        .map(|s| {
            if s.requirement.trim().is_empty() {
                Err(DecisionError::ParseError("subtask without requirement".into()))
            } else {
                Ok(Subtask { requirement: s.requirement, preference: s.preference, satisfying_classes: vec![] })
            }
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LocateReply {
    target_object: String,
    target_position: [f64; 2],
    #[serde(default)]
    rationale: String,
}

pub fn parse_locate_reply(text: &str) -> Result<LocateDecision, DecisionError> {
    let r: LocateReply = from_reply(text)?;
    let p = Point2::new(r.target_position[0], r.target_position[1]);
    if r.target_object.trim().is_empty() || !p.is_finite() {
        return Err(DecisionError::ParseError("empty target or non-finite position".into()));
    }
    Ok(LocateDecision { target_object: r.target_object, target_position: p, rationale: r.rationale })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatusReply {
    completed_subtask: Option<usize>,
    #[serde(default)]
    reason: String,
    updated_status: Vec<bool>,
}

pub fn parse_status_reply(text: &str) -> Result<StatusDecision, DecisionError> {
    let r: StatusReply = from_reply(text)?;
    Ok(StatusDecision { completed_subtask: r.completed_subtask, reason: r.reason, updated_status: r.updated_status })
}

fn subtask_lines(subtasks: &[Subtask], status: &[bool]) -> String {
    let mut s = String::new();
    for (i, t) in subtasks.iter().enumerate() {
        let done = status.get(i).copied().unwrap_or(false);
        let _ = writeln!(s, "{i}. [{}] {} ({})", if done { "done" } else { "open" }, t.requirement, t.preference);
    }
    s
}

fn target_lines(bank: &MemoryBank) -> String {
    if bank.target_memory.is_empty() {
        return "(none)\n".into();
    }
    let mut s = String::new();
    for t in &bank.target_memory {
        let _ = writeln!(s, "{}, {:.2}, {:.2}, {:?}", t.target, t.position.x, t.position.y, t.feedback);
    }
    s
}

fn render(template: &str, values: BTreeMap<&str, String>) -> String {
    PromptTemplate::parse(template)
        .and_then(|t| t.render(&values))
        .expect("shipped templates parse and every placeholder is filled")
}

/// Decisions from a remote chat model. Each call is independent, so one
/// backend may serve parallel episodes.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub config: RemoteConfig,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        Self { config }
    }

    fn ask<T>(&self, what: &str, prompt: &str, parse: impl Fn(&str) -> Result<T, DecisionError>) -> (Result<T, DecisionError>, usize) {
        let request = ChatRequest { model: self.config.model.clone(), messages: vec![ChatMessage::user(prompt)], temperature: 0.0 };
        with_retries(self.config.attempts, what, || parse(&chat_once(&self.config, &request)?.content))
    }

    /// Decomposition plus the number of failed attempts before success.
    pub fn break_counted(&self, instruction: &str) -> Result<(Vec<Subtask>, Vec<bool>, usize), DecisionError> {
        if instruction.trim().is_empty() {
            return Err(DecisionError::DecompositionFailed { attempts: 0 });
        }
        let prompt = render(BREAK_TEMPLATE, BTreeMap::from([("instruction", instruction.to_string())]));
        match self.ask("break", &prompt, parse_break_reply) {
            (Ok(subs), retries) => {
                let status = vec![false; subs.len()];
                Ok((subs, status, retries))
            }
            (Err(DecisionError::ParseError(_)), n) => Err(DecisionError::DecompositionFailed { attempts: n }),
            (Err(e), _) => Err(e),
        }
    }

    /// Replace the reply's position by the nearest known entry within the
    /// snap radius and reject excluded targets.
    fn ground(&self, ctx: &LocateContext<'_>, d: LocateDecision) -> Result<LocateDecision, DecisionError> {
        let nearest = |pts: &mut dyn Iterator<Item = (String, Point2)>| {
            pts.map(|(c, p)| (p.distance(d.target_position), c, p))
                .filter(|(dist, _, _)| *dist <= SNAP_RADIUS)
                .min_by(|a, b| a.0.total_cmp(&b.0))
        };
        let snapped = if d.is_frontier() {
            nearest(&mut ctx.frontiers.iter().map(|f| (FRONTIER_TARGET.to_string(), f.position)))
        } else {
            nearest(&mut ctx.bank.object_memory.iter().map(|e| (e.class.clone(), e.center)))
        };
        let (_, class, position) = snapped.ok_or_else(|| {
            DecisionError::ParseError(format!(
                "({:.2}, {:.2}) is not within {SNAP_RADIUS} m of a known {}",
                d.target_position.x,
                d.target_position.y,
                if d.is_frontier() { "frontier" } else { "object" }
            ))
        })?;
        if ctx.extra_info.is_some_and(|x| x.excludes(&class, position) || x.excludes(&d.target_object, position)) {
            return Err(DecisionError::ParseError(format!("reply repeats the excluded target {class}")));
        }
        Ok(LocateDecision { target_object: class, target_position: position, rationale: d.rationale })
    }
}

impl DecisionBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn break_instruction(&self, instruction: &str, _authored: &[Subtask]) -> Result<(Vec<Subtask>, Vec<bool>), DecisionError> {
        self.break_counted(instruction).map(|(s, st, _)| (s, st))
    }

    fn locate_next(&self, ctx: &LocateContext<'_>) -> Result<LocateDecision, DecisionError> {
        if ctx.bank.object_memory.is_empty() && ctx.frontiers.is_empty() {
            return Err(DecisionError::NoCandidates);
        }
        let mut objects = String::new();
        for e in &ctx.bank.object_memory {
            let _ = writeln!(objects, "{}, {:.2}, {:.2}", e.class, e.center.x, e.center.y);
        }
        let mut frontiers = String::new();
        for f in ctx.frontiers {
            let _ = writeln!(frontiers, "{:.2}, {:.2}, {}", f.position.x, f.position.y, f.size);
        }
        let prompt = render(
            LOCATE_TEMPLATE,
            BTreeMap::from([
                ("instruction", ctx.instruction.to_string()),
                ("subtasks", subtask_lines(ctx.subtasks, ctx.status)),
                ("agent", format!("({:.2}, {:.2})", ctx.agent.x, ctx.agent.y)),
                ("object_memory", if objects.is_empty() { "(none)\n".into() } else { objects }),
                ("target_memory", target_lines(ctx.bank)),
                ("frontiers", if frontiers.is_empty() { "(none)\n".into() } else { frontiers }),
                ("extra_info", ctx.extra_info.map(|x| x.text()).unwrap_or_default()),
            ]),
        );
        self.ask("locate", &prompt, |text| self.ground(ctx, parse_locate_reply(text)?)).0
    }

    fn assess_status(&self, ctx: &StatusContext<'_>) -> Result<StatusDecision, DecisionError> {
        let mut seen = String::new();
        for o in ctx.observation {
            let _ = writeln!(seen, "{}, {:.2}, {:.2}, {:.2}", o.class, o.position.x, o.position.y, o.distance);
        }
        let prompt = render(
            STATUS_TEMPLATE,
            BTreeMap::from([
                ("instruction", ctx.instruction.to_string()),
                ("subtasks", subtask_lines(ctx.subtasks, ctx.status)),
                ("target_memory", target_lines(ctx.bank)),
                ("observation", if seen.is_empty() { "(nothing)\n".into() } else { seen }),
            ]),
        );
        self.ask("status", &prompt, |text| {
            let d = parse_status_reply(text)?;
            validate_status(ctx.status, &d)?;
            Ok(d)
        })
        .0
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ExtraInfo, FrontierCandidate};
    use super::*;
    use crate::masmap::ObjectMemoryEntry;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};
    use std::thread;

    enum Reply {
        Content(String),
        Status(u16),
        Stall(Duration),
    }

    /// A local HTTP server answering each connection with the next scripted
    /// reply; records request bodies.
    fn stub(replies: Vec<Reply>) -> (RemoteConfig, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let seen = bodies.clone();
        thread::spawn(move || {
            for reply in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                seen.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
                let mut stream = stream;
                let (code, payload) = match reply {
                    Reply::Content(c) => (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": c}}]}).to_string()),
                    Reply::Status(s) => (s, "{}".to_string()),
                    Reply::Stall(d) => {
                        thread::sleep(d);
                        continue;
                    }
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
            }
        });
        let mut cfg = RemoteConfig::new(format!("http://{addr}/v1"), "test-key", "stub-model");
        cfg.timeout = Duration::from_millis(400);
        (cfg, bodies)
    }

    const BREAK_OK: &str = r#"{"subtasks": [{"requirement": "rest", "preference": "soft"}, {"requirement": "light", "preference": ""}]}"#;

    #[test]
    fn url_and_env() {
        assert_eq!(RemoteConfig::new("http://h/v1/", "k", "m").chat_url(), "http://h/v1/chat/completions");
        assert_eq!(RemoteConfig::new("http://h/v1/chat/completions", "k", "m").chat_url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn reply_parsing() {
        let fenced = format!("Here you go:\n```json\n{BREAK_OK}\n```");
        let subs = parse_break_reply(&fenced).unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].requirement, "rest");
        assert!(parse_break_reply(r#"{"subtasks": []}"#).is_err());
        assert!(parse_break_reply(r#"{"subtasks": [{"requirement": "a", "extra": 1}]}"#).is_err());
        assert!(parse_break_reply("no json here").is_err());
        let l = parse_locate_reply(r#"{"target_object": "sofa", "target_position": [1.5, 2], "rationale": "r"}"#).unwrap();
        assert_eq!(l.target_position, Point2::new(1.5, 2.0));
        assert!(parse_locate_reply(r#"{"target_object": "sofa", "target_position": [1.5]}"#).is_err());
        let s = parse_status_reply(r#"{"completed_subtask": null, "reason": "", "updated_status": [false]}"#).unwrap();
        assert_eq!(s.completed_subtask, None);
        assert!(matches!(extract_json_object("[1, 2]"), Err(DecisionError::ParseError(_))));
    }

    #[test]
    fn malformed_twice_then_valid() {
        let (cfg, bodies) = stub(vec![
            Reply::Content("sure! subtasks are rest and light".into()),
            Reply::Content(r#"{"subtasks": "rest"}"#.into()),
            Reply::Content(BREAK_OK.into()),
        ]);
        let (subs, status, retries) = RemoteBackend::new(cfg).break_counted("rest and then light").unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(status, vec![false, false]);
        assert_eq!(retries, 2);
        let req: Value = serde_json::from_str(&bodies.lock().unwrap()[0]).unwrap();
        assert_eq!(req["model"], "stub-model");
        assert_eq!(req["temperature"], 0.0);
        assert_eq!(req["messages"][0]["role"], "user");
        assert!(req["messages"][0]["content"].as_str().unwrap().contains("rest and then light"));
    }

    #[test]
    fn malformed_thrice_fails_decomposition() {
        let (cfg, _) = stub((0..3).map(|_| Reply::Content("{}".into())).collect());
        assert_eq!(RemoteBackend::new(cfg).break_counted("x"), Err(DecisionError::DecompositionFailed { attempts: 3 }));
    }

    #[test]
    fn http_500_thrice() {
        let (cfg, bodies) = stub((0..3).map(|_| Reply::Status(500)).collect());
        let req = ChatRequest { model: "m".into(), messages: vec![ChatMessage::user("hi")], temperature: 0.0 };
        assert_eq!(remote_chat(&cfg, &req), Err(DecisionError::HttpError(500)));
        assert_eq!(bodies.lock().unwrap().len(), 3);
    }

    #[test]
    fn stalled_server_times_out() {
        let (mut cfg, _) = stub((0..3).map(|_| Reply::Stall(Duration::from_secs(2))).collect());
        cfg.attempts = 1;
        let req = ChatRequest { model: "m".into(), messages: vec![ChatMessage::user("hi")], temperature: 0.0 };
        assert_eq!(remote_chat(&cfg, &req), Err(DecisionError::Timeout));
    }

    #[test]
    fn locate_snaps_and_rejects_exclusions() {
        let mut bank = MemoryBank::default();
        for (c, x) in [("fridge", 2.0), ("cabinet", 5.0)] {
            bank.object_memory.push(ObjectMemoryEntry { class: c.into(), center: Point2::new(x, 1.0), bbox: [x - 0.3, x + 0.3, 0.7, 1.3] });
        }
        let extra = ExtraInfo { object: "fridge".into(), position: Point2::new(2.0, 1.0) };
        let subs = vec![Subtask { requirement: "cold drink".into(), preference: String::new(), satisfying_classes: vec![] }];
        let frontiers: Vec<FrontierCandidate> = vec![];
        let ctx = LocateContext {
            instruction: "get a cold drink",
            subtasks: &subs,
            status: &[false],
            bank: &bank,
            agent: Point2::new(0.0, 0.0),
            extra_info: Some(&extra),
            frontiers: &frontiers,
        };
        let (cfg, bodies) = stub(vec![
            Reply::Content(r#"{"target_object": "fridge", "target_position": [2.0, 1.0], "rationale": "cold"}"#.into()),
            Reply::Content(r#"{"target_object": "cabinet", "target_position": [9.0, 9.0], "rationale": "made up"}"#.into()),
            Reply::Content(r#"{"target_object": "cabinet", "target_position": [5.3, 1.1], "rationale": "maybe"}"#.into()),
        ]);
        let d = RemoteBackend::new(cfg).locate_next(&ctx).unwrap();
        assert_eq!(d.target_object, "cabinet");
        assert_eq!(d.target_position, Point2::new(5.0, 1.0));
        assert!(bodies.lock().unwrap()[0].contains("Do not select fridge or (2.00, 1.00) in the next step"));
    }
}
