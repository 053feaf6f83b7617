//! Parsing of model replies in the Thought / Action / Action Input format.

use super::AgentAction;

/// Fence info strings accepted on a program block.
const FENCE_LANGUAGES: [&str; 2] = ["", "python"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{reason}")]
pub struct ParseFailure {
    pub reason: String,
}

fn failure<T>(reason: impl Into<String>) -> Result<T, ParseFailure> {
    Err(ParseFailure { reason: reason.into() })
}

/// Value of a `Key: value` line, case-insensitive on the key.
fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let t = line.trim_start();
    let head = t.get(..key.len())?;
    if head.eq_ignore_ascii_case(key) {
        Some(t[key.len()..].trim())
    } else {
        None
    }
}

fn fence_info(line: &str) -> Option<&str> {
    line.trim().strip_prefix("```").map(str::trim)
}

fn action_line(lines: &[&str]) -> Option<usize> {
    lines.iter().rposition(|l| field(l, "Action:").is_some())
}

fn input_line(lines: &[&str], from: usize) -> Option<usize> {
    (from..lines.len()).find(|&i| field(lines[i], "Action Input:").is_some())
}

pub fn parse_agent_response(text: &str) -> Result<AgentAction, ParseFailure> {
    let lines: Vec<&str> = text.lines().collect();
    let Some(a) = action_line(&lines) else {
        return failure("missing 'Action:' line");
    };
    let action = field(lines[a], "Action:").unwrap().trim_end_matches('.').trim().to_lowercase();
    match action.as_str() {
        "program" => {
            let start = input_line(&lines, a + 1).map_or(a + 1, |i| i);
            let Some(open) = (start..lines.len()).find(|&i| fence_info(lines[i]).is_some()) else {
                return failure("missing code block after 'Action Input:'");
            };
            let info = fence_info(lines[open]).unwrap();
            if !FENCE_LANGUAGES.iter().any(|l| l.eq_ignore_ascii_case(info)) {
                return failure(format!("unexpected code block language '{info}'"));
            }
            let Some(close) = (open + 1..lines.len()).find(|&i| lines[i].trim() == "```") else {
                return failure("unterminated code block");
            };
            let mut source = lines[open + 1..close].join("\n");
            source.push('\n');
            Ok(AgentAction::Program { source })
        }
        "final answer" => {
            let Some(i) = input_line(&lines, a + 1) else {
                return failure("missing 'Action Input:' for Final Answer");
            };
            let inline = field(lines[i], "Action Input:").unwrap();
            let answer = if inline.is_empty() {
                lines[i + 1..].iter().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("")
            } else {
                inline
            };
            if answer.is_empty() {
                return failure("empty final answer");
            }
            Ok(AgentAction::FinalAnswer { text: answer.to_string() })
        }
        other => failure(format!("unknown action '{other}'; expected one of [Final Answer, Program]")),
    }
}

/// Answer extraction that never fails: a well-formed final answer if there is
/// one, else the `Action Input` value (or the first line after it), else the
/// last non-empty line.
pub fn best_effort_answer(text: &str) -> String {
    if let Ok(AgentAction::FinalAnswer { text }) = parse_agent_response(text) {
        return text;
    }
    let lines: Vec<&str> = text.lines().collect();
    if let Some(i) = lines.iter().rposition(|l| field(l, "Action Input:").is_some()) {
        let inline = field(lines[i], "Action Input:").unwrap();
        if !inline.is_empty() {
            return inline.to_string();
        }
        if let Some(next) = lines[i + 1..].iter().map(|l| l.trim()).find(|l| !l.is_empty() && fence_info(l).is_none()) {
            return next.to_string();
        }
    }
    lines.iter().rev().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PromptAssets;

    #[test]
    fn example_program_turn() {
        let assets = PromptAssets::default();
        let turn = &assets.examples[0].1;
        let AgentAction::Program { source } = parse_agent_response(turn).unwrap() else { panic!() };
        assert!(source.starts_with("# Get object set in the scene\nobject_set = scene()\n"));
        assert!(source.ends_with("print(f\"Objects directly behind me: {category_behind_by_distance}\")\n"));
    }

    #[test]
    fn final_answer() {
        assert_eq!(
            parse_agent_response("Thought: done\nAction: Final Answer\nAction Input: coffee table").unwrap(),
            AgentAction::FinalAnswer { text: "coffee table".into() }
        );
        assert_eq!(
            parse_agent_response("action: final answer\naction input:\n\n  left  \nmore").unwrap(),
            AgentAction::FinalAnswer { text: "left".into() }
        );
    }

    #[test]
    fn failures() {
        let r = parse_agent_response("Action: Lookup\nAction Input: x").unwrap_err();
        assert!(r.reason.contains("unknown action"));
        assert!(parse_agent_response("Thought: hmm").unwrap_err().reason.contains("missing 'Action:'"));
        assert!(parse_agent_response("Action: Program\nAction Input:\nprint(1)").is_err());
        assert!(parse_agent_response("Action: Program\nAction Input:\n```python\nprint(1)\n").is_err());
        assert!(parse_agent_response("Action: Program\nAction Input:\n```js\nx\n```").is_err());
        assert!(parse_agent_response("Action: Final Answer\nAction Input:   ").is_err());
    }

    #[test]
    fn last_action_line_wins() {
        let text = "Action: Program\nAction Input:\n```\nprint(1)\n```\nThought: changed my mind\nAction: Final Answer\nAction Input: two";
        assert_eq!(parse_agent_response(text).unwrap(), AgentAction::FinalAnswer { text: "two".into() });
    }

    #[test]
    fn best_effort() {
        assert_eq!(best_effort_answer("Action: Final Answer\nAction Input: red"), "red");
        assert_eq!(best_effort_answer("blah\nAction Input: the lamp\n"), "the lamp");
        assert_eq!(best_effort_answer("I think\n\nit is the sofa\n\n"), "it is the sofa");
        assert_eq!(best_effort_answer(""), "");
    }
}
