//! In-process clients for tests and dry runs.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use super::client::{ClientError, LlmClient, LlmRequest, LlmResponse};
use super::prompts::{CAPTION_TEMPLATE, CLIP_QA_TEMPLATE};

fn hash64(bytes: &[u8], seed: u64) -> u64 {
    // splitmix64 over FNV-1a
    let mut h = bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64 ^ seed, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let s = text.find(start)? + start.len();
    let e = text[s..].find(end)? + s;
    Some(&text[s..e])
}

/// Answers every prompt with a well-formed synthetic payload: captions for
/// caption prompts, one QA pair per listed category (every third one null)
/// for QA prompts. Output depends only on the request.
#[derive(Debug, Default, Clone, Copy)]
pub struct SyntheticClient;

const CAPTION_PREFIX_LEN: usize = 60;

impl SyntheticClient {
    fn caption(req: &LlmRequest) -> String {
        let title = between(&req.prompt, "titled \"", "\".\n").unwrap_or("untitled");
        let n = req.image_refs.len();
        let body = serde_json::json!({
            "Brief Caption": format!("A short scene about {title} shown over {n} frames."),
            "Detailed Caption": format!(
                "The clip begins with an establishing view of {title}, progresses by following the main subject, and concludes with a wide shot ({n} frames)."
            ),
        });
        format!("```json\n{body}```")
    }

    fn qa(req: &LlmRequest) -> String {
        let cats = between(&req.prompt, "#### Question Categories:\n", "\n\n#### Important Criteria").unwrap_or("");
        let mut map = serde_json::Map::new();
        for (i, line) in cats.lines().enumerate() {
            let name = line.split(':').next().unwrap_or(line).trim();
            if name.is_empty() {
                continue;
            }
            let value = if i % 3 == 2 {
                serde_json::Value::Null
            } else {
                let tag = hash64(req.prompt.as_bytes(), i as u64) % 10_000;
                serde_json::json!({
                    "Q": format!("Which {} detail is shown here?", name.replace('_', " ")),
                    "A": format!("detail {tag}"),
                })
            };
            map.insert(name.to_string(), value);
        }
        format!("```json\n{}```", serde_json::Value::Object(map))
    }
}

impl LlmClient for SyntheticClient {
    fn submit(&self, req: &LlmRequest) -> Result<LlmResponse, ClientError> {
        let text = if req.prompt.starts_with(&CAPTION_TEMPLATE[..CAPTION_PREFIX_LEN]) {
            Self::caption(req)
        } else if req.prompt.starts_with(&CLIP_QA_TEMPLATE[..20]) {
            Self::qa(req)
        } else {
            return Err(ClientError::Permanent("unrecognised prompt".into()));
        };
        Ok(LlmResponse {
            prompt_tokens: req.prompt.len() as u64 / 4,
            completion_tokens: text.len() as u64 / 4,
            text,
        })
    }
}

/// Wraps a client and fails a fixed fraction of calls with a transient
/// error. Whether a call fails depends on the prompt and how many times that
/// prompt has been seen, so results do not depend on thread scheduling.
pub struct FlakyClient<C> {
    inner: C,
    failure_rate: f64,
    seed: u64,
    seen: Mutex<HashMap<u64, u32>>,
}

impl<C> FlakyClient<C> {
    pub fn new(inner: C, failure_rate: f64, seed: u64) -> Self {
        Self {
            inner,
            failure_rate,
            seed,
            seen: Mutex::new(HashMap::new()),
        }
    }
}

impl<C: LlmClient> LlmClient for FlakyClient<C> {
    fn submit(&self, req: &LlmRequest) -> Result<LlmResponse, ClientError> {
        let key = hash64(req.prompt.as_bytes(), self.seed);
        let attempt = {
            let mut seen = self.seen.lock().expect("flaky client lock");
            let n = seen.entry(key).or_insert(0);
            *n += 1;
            *n
        };
        let roll = hash64(&attempt.to_le_bytes(), key) as f64 / u64::MAX as f64;
        if roll < self.failure_rate {
            return Err(ClientError::Transient(format!("injected failure (attempt {attempt})")));
        }
        self.inner.submit(req)
    }
}

/// Replays a fixed sequence of outcomes and records every request.
pub struct ScriptedClient {
    script: Mutex<VecDeque<Result<LlmResponse, ClientError>>>,
    pub requests: Mutex<Vec<LlmRequest>>,
}

impl ScriptedClient {
    pub fn new(script: impl IntoIterator<Item = Result<LlmResponse, ClientError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }
}

impl LlmClient for ScriptedClient {
    fn submit(&self, req: &LlmRequest) -> Result<LlmResponse, ClientError> {
        self.requests.lock().expect("scripted client lock").push(req.clone());
        self.script
            .lock()
            .expect("scripted client lock")
            .pop_front()
            .unwrap_or_else(|| Err(ClientError::Permanent("script exhausted".into())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::parse::{parse_caption_response, parse_qa_response};
    use crate::annotator::prompts::{question_type_pool, render_caption_prompt, render_clip_qa_prompt};
    use crate::curator::Span;

    fn req(prompt: String) -> LlmRequest {
        LlmRequest {
            prompt,
            image_refs: vec!["a".into(), "b".into()],
            temperature: 0.0,
            max_output_tokens: 100,
        }
    }

    #[test]
    fn synthetic_payloads_parse() {
        let c = SyntheticClient;
        let cap = c.submit(&req(render_caption_prompt("Dog park").unwrap())).unwrap();
        let pair = parse_caption_response(&cap.text).unwrap();
        assert!(pair.brief.contains("Dog park") && pair.brief.contains("2 frames"));

        let types = &question_type_pool()[..5];
        let qa = c.submit(&req(render_clip_qa_prompt("d", "b", types).unwrap())).unwrap();
        let span = Span { start_s: 0.0, end_s: 1.0 };
        let parsed = parse_qa_response(&qa.text, types, span).unwrap();
        assert_eq!(parsed.len(), 4);
        assert!(c.submit(&req("hello".into())).is_err());
    }

    #[test]
    fn flaky_rate_is_roughly_honoured() {
        let c = FlakyClient::new(SyntheticClient, 0.1, 9);
        let fails = (0..2000)
            .filter(|i| c.submit(&req(render_caption_prompt(&format!("t{i}")).unwrap())).is_err())
            .count();
        assert!((120..=280).contains(&fails), "{fails}");
    }
}
