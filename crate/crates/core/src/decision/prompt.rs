//! Plain-text prompt templates with `{{name}}` placeholders.

use std::collections::BTreeMap;

use thiserror::Error;

pub const BREAK_TEMPLATE: &str = include_str!("../../prompts/break_v1.txt");
pub const LOCATE_TEMPLATE: &str = include_str!("../../prompts/locate_v1.txt");
pub const STATUS_TEMPLATE: &str = include_str!("../../prompts/status_v1.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("placeholder opened at byte {0} is never closed")]
    Unclosed(usize),
    #[error("invalid placeholder name {0:?}")]
    BadName(String),
    #[error("no value supplied for placeholder {0:?}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    segments: Vec<Segment>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut rest = text;
        let mut offset = 0;
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                segments.push(Segment::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or(TemplateError::Unclosed(offset + open))?;
            let name = after[..close].trim();
            if !valid_name(name) {
                return Err(TemplateError::BadName(after[..close].to_string()));
            }
            segments.push(Segment::Slot(name.to_string()));
            let consumed = open + 2 + close + 2;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.to_string()));
        }
        Ok(Self { segments })
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.segments {
            if let Segment::Slot(n) = s {
                if !out.contains(&n.as_str()) {
                    out.push(n);
                }
            }
        }
        out
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::new();
        for s in &self.segments {
            match s {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(n) => {
                    out.push_str(values.get(n.as_str()).ok_or_else(|| TemplateError::Missing(n.clone()))?)
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_parse() {
        for (t, names) in [
            (BREAK_TEMPLATE, vec!["instruction"]),
            (LOCATE_TEMPLATE, vec!["instruction", "subtasks", "agent", "object_memory", "target_memory", "frontiers", "extra_info"]),
            (STATUS_TEMPLATE, vec!["instruction", "subtasks", "target_memory", "observation"]),
        ] {
            assert_eq!(PromptTemplate::parse(t).unwrap().placeholders(), names);
        }
    }

    #[test]
    fn render_and_errors() {
        let t = PromptTemplate::parse("a {{x}} b {{ y }} {{x}}").unwrap();
        let mut v = BTreeMap::new();
        v.insert("x", "1".to_string());
        assert_eq!(t.render(&v), Err(TemplateError::Missing("y".into())));
        v.insert("y", "{{z}}".to_string());
        assert_eq!(t.render(&v).unwrap(), "a 1 b {{z}} 1");
        assert_eq!(PromptTemplate::parse("ab {{x"), Err(TemplateError::Unclosed(3)));
        assert_eq!(PromptTemplate::parse("{{X}}"), Err(TemplateError::BadName("X".into())));
        assert_eq!(PromptTemplate::parse("{{}}"), Err(TemplateError::BadName(String::new())));
        // A JSON brace in the text is plain content.
        assert_eq!(PromptTemplate::parse("{\"a\": 1}").unwrap().render(&BTreeMap::new()).unwrap(), "{\"a\": 1}");
    }
}
