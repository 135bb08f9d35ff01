//! Toxicity scoring with three interchangeable modes: an external scoring
//! service, an offline offensive-lexicon fallback, and echoing precomputed
//! scores carried on the input records.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::tokenize::tokenize_lower;
use super::TextScoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToxicityMode {
    Service,
    Lexicon,
    Precomputed,
}

#[derive(Debug, Clone)]
pub struct ToxicityScorerConfig {
    pub mode: ToxicityMode,
    pub endpoint: Option<String>,
    /// Bearer token sent with service requests, if the endpoint needs one.
    pub api_key: Option<String>,
    /// Maximum requests per second against the service endpoint.
    pub request_rate_limit: f64,
    pub offensive_lexicon: BTreeSet<String>,
    pub squash_scale: f64,
    pub timeout: Duration,
}

impl Default for ToxicityScorerConfig {
    fn default() -> Self {
        ToxicityScorerConfig {
            mode: ToxicityMode::Lexicon,
            endpoint: None,
            api_key: None,
            request_rate_limit: 10.0,
            offensive_lexicon: BTreeSet::new(),
            squash_scale: 10.0,
            timeout: Duration::from_secs(10),
        }
    }
}

impl ToxicityScorerConfig {
    pub fn load_lexicon(&mut self, path: &Path) -> Result<(), TextScoreError> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            self.offensive_lexicon.insert(trimmed.to_lowercase());
        }
        Ok(())
    }
}

pub struct ToxicityScorer {
    config: ToxicityScorerConfig,
    agent: Option<ureq::Agent>,
    last_request: Mutex<Option<Instant>>,
}

impl ToxicityScorer {
    pub fn new(config: ToxicityScorerConfig) -> Result<Self, TextScoreError> {
        let agent = match config.mode {
            ToxicityMode::Service => {
                if config.endpoint.is_none() {
                    return Err(TextScoreError::MissingInput("an endpoint URL in service mode"));
                }
                Some(
                    ureq::AgentBuilder::new()
                        .timeout(config.timeout)
                        .build(),
                )
            }
            _ => None,
        };
        Ok(ToxicityScorer { config, agent, last_request: Mutex::new(None) })
    }

    /// Score one post body. `precomputed` carries the record's score field in
    /// precomputed mode.
    pub fn score(&self, body: &str, precomputed: Option<f64>) -> Result<f64, TextScoreError> {
        match self.config.mode {
            ToxicityMode::Lexicon => Ok(lexicon_toxicity(
                body,
                &self.config.offensive_lexicon,
                self.config.squash_scale,
            )),
            ToxicityMode::Precomputed => {
                precomputed.ok_or(TextScoreError::MissingInput("a precomputed toxicity field"))
            }
            ToxicityMode::Service => self.score_via_service(body),
        }
    }

    fn throttle(&self) {
        let min_interval = Duration::from_secs_f64(1.0 / self.config.request_rate_limit.max(1e-6));
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < min_interval {
                std::thread::sleep(min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn score_via_service(&self, body: &str) -> Result<f64, TextScoreError> {
        let endpoint = self.config.endpoint.as_deref().expect("checked in new()");
        let agent = self.agent.as_ref().expect("checked in new()");
        let mut backoff = Duration::from_millis(100);
        let mut last_err = String::new();
        for attempt in 0..3 {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            self.throttle();
            let mut request = agent.post(endpoint);
            if let Some(key) = &self.config.api_key {
                request = request.set("Authorization", &format!("Bearer {key}"));
            }
            let response = request.send_json(serde_json::json!({ "text": body }));
            match response {
                Ok(resp) => {
                    let value: serde_json::Value = resp
                        .into_json()
                        .map_err(|e| TextScoreError::Service(format!("bad response body: {e}")))?;
                    return extract_score(&value)
                        .ok_or_else(|| TextScoreError::Service("no score field in response".into()));
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(TextScoreError::Service(format!("3 attempts failed: {last_err}")))
    }
}

fn extract_score(value: &serde_json::Value) -> Option<f64> {
    if let Some(s) = value.get("score").and_then(|v| v.as_f64()) {
        return Some(s);
    }
    // Fall back to the first numeric field of an object response.
    value.as_object()?.values().find_map(|v| v.as_f64())
}

fn lexicon_toxicity(body: &str, lexicon: &BTreeSet<String>, squash_scale: f64) -> f64 {
    let tokens = tokenize_lower(body);
    if tokens.is_empty() {
        return 0.0;
    }
    let offensive = tokens.iter().filter(|t| lexicon.contains(t.as_str())).count();
    let density = offensive as f64 / tokens.len() as f64;
    1.0 - (-squash_scale * density).exp()
}

/// Convenience wrapper for one-shot scoring.
pub fn score_toxicity(
    body: &str,
    config: &ToxicityScorerConfig,
    precomputed: Option<f64>,
) -> Result<f64, TextScoreError> {
    ToxicityScorer::new(config.clone())?.score(body, precomputed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lexicon_config(scale: f64) -> ToxicityScorerConfig {
        let mut cfg = ToxicityScorerConfig::default();
        cfg.squash_scale = scale;
        cfg.offensive_lexicon.insert("scum".into());
        cfg.offensive_lexicon.insert("trash".into());
        cfg
    }

    #[test]
    fn zero_density_scores_zero() {
        let cfg = lexicon_config(7.0);
        assert_eq!(score_toxicity("nice words here", &cfg, None).unwrap(), 0.0);
    }

    #[test]
    fn density_half_scale_two() {
        let cfg = lexicon_config(2.0);
        // density 0.5 -> 1 - e^{-1}
        let score = score_toxicity("scum trash kind words", &cfg, None).unwrap();
        assert_relative_eq!(score, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(score, 0.6321, epsilon = 1e-4);
    }

    #[test]
    fn monotone_in_density() {
        let cfg = lexicon_config(5.0);
        let s1 = score_toxicity("scum a b c", &cfg, None).unwrap();
        let s2 = score_toxicity("scum trash b c", &cfg, None).unwrap();
        assert!(s2 > s1);
    }

    #[test]
    fn precomputed_echoes_field() {
        let cfg = ToxicityScorerConfig { mode: ToxicityMode::Precomputed, ..Default::default() };
        assert_eq!(score_toxicity("anything", &cfg, Some(0.78)).unwrap(), 0.78);
        assert!(score_toxicity("anything", &cfg, None).is_err());
    }

    #[test]
    fn service_mode_requires_endpoint() {
        let cfg = ToxicityScorerConfig { mode: ToxicityMode::Service, ..Default::default() };
        assert!(ToxicityScorer::new(cfg).is_err());
    }

    #[test]
    fn service_mode_round_trip() {
        use std::io::{Read, Write};
        use std::net::TcpListener;

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf).unwrap();
            let body = r#"{"score": 0.42}"#;
            let resp = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(resp.as_bytes()).unwrap();
        });

        let cfg = ToxicityScorerConfig {
            mode: ToxicityMode::Service,
            endpoint: Some(format!("http://{addr}/score")),
            ..Default::default()
        };
        let scorer = ToxicityScorer::new(cfg).unwrap();
        assert_eq!(scorer.score("some text", None).unwrap(), 0.42);
        handle.join().unwrap();
    }

    #[test]
    fn service_unreachable_fails_after_retries() {
        let cfg = ToxicityScorerConfig {
            mode: ToxicityMode::Service,
            // Reserved port with nothing listening.
            endpoint: Some("http://127.0.0.1:9/".into()),
            timeout: Duration::from_millis(100),
            request_rate_limit: 1000.0,
            ..Default::default()
        };
        let scorer = ToxicityScorer::new(cfg).unwrap();
        assert!(matches!(scorer.score("x", None), Err(TextScoreError::Service(_))));
    }
}
