//! Merging the agent's open-ended answer with a closed-vocabulary model's
//! top-k candidates through one more model call.

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

pub const ANSWER_MARKER: &str = "Reasonable answers:";
const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnsembleError {
    #[error("top-k list is empty")]
    EmptyTopK,
    #[error("ensemble response is empty")]
    EmptyResponse,
    #[error("malformed top-k record: {0}")]
    Malformed(String),
}

/// One candidate. `text` keeps the probability exactly as it was written so
/// that it can be echoed into the prompt unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub answer: String,
    pub probability: f64,
    pub text: String,
}

impl Candidate {
    pub fn new(answer: impl Into<String>, text: &str) -> Result<Self, EnsembleError> {
        let probability: f64 =
            text.trim().parse().map_err(|_| EnsembleError::Malformed(format!("probability '{text}' is not a number")))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(EnsembleError::Malformed(format!("probability {text} outside [0, 1]")));
        }
        Ok(Candidate { answer: answer.into(), probability, text: text.trim().to_string() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKPrediction {
    pub qid: String,
    pub entries: Vec<Candidate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopK<'a> {
    qid: String,
    #[serde(borrow)]
    entries: Vec<(String, &'a RawValue)>,
}

#[derive(Serialize)]
struct OutTopK<'a> {
    qid: &'a str,
    entries: Vec<(&'a str, &'a RawValue)>,
}

impl TopKPrediction {
    pub fn new(qid: impl Into<String>, entries: Vec<Candidate>) -> Result<Self, EnsembleError> {
        if entries.len() > MAX_CANDIDATES {
            return Err(EnsembleError::Malformed(format!("{} entries, at most {MAX_CANDIDATES} allowed", entries.len())));
        }
        if entries.windows(2).any(|w| w[1].probability > w[0].probability) {
            return Err(EnsembleError::Malformed("probabilities must be non-increasing".into()));
        }
        Ok(TopKPrediction { qid: qid.into(), entries })
    }

    pub fn from_json(line: &str) -> Result<Self, EnsembleError> {
        let raw: RawTopK = serde_json::from_str(line).map_err(|e| EnsembleError::Malformed(e.to_string()))?;
        let entries = raw
            .entries
            .into_iter()
            .map(|(answer, p)| Candidate::new(answer, p.get()))
            .collect::<Result<Vec<_>, _>>()?;
        TopKPrediction::new(raw.qid, entries)
    }

    pub fn to_json(&self) -> String {
        let raws: Vec<Box<RawValue>> =
            self.entries.iter().map(|c| RawValue::from_string(c.text.clone()).expect("validated number")).collect();
        let out = OutTopK {
            qid: &self.qid,
            entries: self.entries.iter().zip(&raws).map(|(c, r)| (c.answer.as_str(), r.as_ref())).collect(),
        };
        serde_json::to_string(&out).expect("serializable")
    }
}

/// Fill `{name}` slots; unknown braces are left alone.
fn render(template: &str, slots: &[(String, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = tail.find('}').and_then(|close| {
            let name = &tail[1..close];
            slots.iter().find(|(k, _)| k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Instantiate the ensemble template. Candidate lines referring to slots
/// beyond the available entries are dropped.
pub fn build_ensemble_prompt(
    question: &str,
    llm_answer: &str,
    topk: &TopKPrediction,
    template: &str,
) -> Result<String, EnsembleError> {
    if topk.entries.is_empty() {
        return Err(EnsembleError::EmptyTopK);
    }
    let n = topk.entries.len();
    let mut slots: Vec<(String, &str)> = vec![("question".into(), question), ("ans".into(), llm_answer)];
    for (i, c) in topk.entries.iter().enumerate() {
        slots.push((format!("ans{}", i + 1), c.answer.as_str()));
        slots.push((format!("prob{}", i + 1), c.text.as_str()));
    }
    let unused: Vec<String> = (n + 1..=MAX_CANDIDATES).map(|i| format!("{{ans{i}}}")).collect();
    let kept: Vec<&str> = template.split('\n').filter(|line| !unused.iter().any(|u| line.contains(u.as_str()))).collect();
    Ok(render(&kept.join("\n"), &slots))
}

pub fn parse_ensemble_response(text: &str) -> Result<String, EnsembleError> {
    let answer = match text.rfind(ANSWER_MARKER) {
        Some(i) => text[i + ANSWER_MARKER.len()..].trim(),
        None => text.trim(),
    };
    if answer.is_empty() {
        return Err(EnsembleError::EmptyResponse);
    }
    Ok(answer.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PromptAssets;

    fn topk(items: &[(&str, &str)]) -> TopKPrediction {
        TopKPrediction::new("q", items.iter().map(|(a, p)| Candidate::new(*a, p).unwrap()).collect()).unwrap()
    }

    #[test]
    fn candidate_lines_follow_entries() {
        let t = PromptAssets::default().ensemble;
        let p = build_ensemble_prompt("Q?", "chair", &topk(&[("a", "0.5"), ("b", "0.30"), ("c", "0.2")]), &t).unwrap();
        let tail: Vec<&str> = p.rsplit("Question: Q?").next().unwrap().lines().collect();
        assert_eq!(
            tail,
            [
                "",
                "LLM's answers with their associated probabilities:",
                " - chair: 1.0",
                "End-to-end model's top 5 answer with their associated probabilities:",
                " - a: 0.5",
                " - b: 0.30",
                " - c: 0.2",
                "Reasonable answers: ",
            ]
        );
        assert!(p.contains(" - left: 0.89\n"));
    }

    #[test]
    fn empty_topk() {
        let empty = TopKPrediction { qid: "q".into(), entries: vec![] };
        assert_eq!(build_ensemble_prompt("q", "a", &empty, "{ans}"), Err(EnsembleError::EmptyTopK));
    }

    #[test]
    fn slot_values_are_not_rescanned() {
        let p = build_ensemble_prompt("{ans}", "x", &topk(&[("{question}", "1")]), "{question}|{ans}|{ans1}|{other}").unwrap();
        assert_eq!(p, "{ans}|x|{question}|{other}");
    }

    #[test]
    fn responses() {
        assert_eq!(parse_ensemble_response("Reasonable answers: left front forward").unwrap(), "left front forward");
        assert_eq!(parse_ensemble_response("Reasonable answers: a\nReasonable answers:  b \n").unwrap(), "b");
        assert_eq!(parse_ensemble_response("  rectangular\n").unwrap(), "rectangular");
        assert_eq!(parse_ensemble_response(""), Err(EnsembleError::EmptyResponse));
        assert_eq!(parse_ensemble_response("Reasonable answers:   "), Err(EnsembleError::EmptyResponse));
    }

    #[test]
    fn json_keeps_probability_text() {
        let line = r#"{"qid":"q1","entries":[["left",0.89],["forward",0.10],["door",1e-2]]}"#;
        let t = TopKPrediction::from_json(line).unwrap();
        assert_eq!(t.entries[1].text, "0.10");
        assert_eq!(t.entries[2].probability, 0.01);
        assert_eq!(t.to_json(), line);
        assert!(TopKPrediction::from_json(r#"{"qid":"q","entries":[["a",0.1],["b",0.2]]}"#).is_err());
        assert!(TopKPrediction::from_json(r#"{"qid":"q","entries":[["a",1.5]]}"#).is_err());
        assert!(TopKPrediction::from_json(r#"{"qid":"q","entries":[["a","0.5"]]}"#).is_err());
    }
}
