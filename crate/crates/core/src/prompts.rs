//! Prompt templates with `{slot}` placeholders, stored as TOML files.
//!
//! `{{` and `}}` render as literal braces. Rendering fails on any slot
//! without a value.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::ChatRequest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template {path}: {message}")]
    Load { path: String, message: String },
    #[error("template {template}: no value for slot {{{slot}}}")]
    MissingSlot { template: String, slot: String },
    #[error("template {template}: unbalanced brace at byte {offset}")]
    Syntax { template: String, offset: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub name: String,
    pub version: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system: String,
    pub user: String,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces<'a>(template: &str, src: &'a str) -> Result<Vec<Piece<'a>>, TemplateError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut start = 0;
    let syntax = |offset| TemplateError::Syntax {
        template: template.to_string(),
        offset,
    };
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Piece::Text(&src[start..i + 1]));
                i += 2;
                start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Piece::Text(&src[start..i + 1]));
                i += 2;
                start = i;
            }
            b'{' => {
                let close = src[i + 1..].find('}').ok_or_else(|| syntax(i))? + i + 1;
                let name = &src[i + 1..close];
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(syntax(i));
                }
                out.push(Piece::Text(&src[start..i]));
                out.push(Piece::Slot(name));
                i = close + 1;
                start = i;
            }
            b'}' => return Err(syntax(i)),
            _ => i += 1,
        }
    }
    out.push(Piece::Text(&src[start..]));
    Ok(out)
}

impl PromptTemplate {
    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self, TemplateError> {
        let t: Self = toml::from_str(s).map_err(|e| TemplateError::Load {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        pieces(&t.name, &t.system)?;
        pieces(&t.name, &t.user)?;
        Ok(t)
    }

    pub fn from_file(path: &Path) -> Result<Self, TemplateError> {
        let s = std::fs::read_to_string(path).map_err(|e| TemplateError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&s, &path.display().to_string())
    }

    fn render_one(&self, src: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(src.len());
        for p in pieces(&self.name, src)? {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let v = values
                        .iter()
                        .find(|(k, _)| *k == name)
                        .ok_or_else(|| TemplateError::MissingSlot {
                            template: self.name.clone(),
                            slot: name.to_string(),
                        })?;
                    out.push_str(v.1);
                }
            }
        }
        Ok(out)
    }

    /// Renders `(system, user)`.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<(String, String), TemplateError> {
        Ok((
            self.render_one(&self.system, values)?,
            self.render_one(&self.user, values)?,
        ))
    }

    /// Occurrences of `{slot}` across both prompts.
    pub fn slot_count(&self, slot: &str) -> usize {
        [&self.system, &self.user]
            .iter()
            .filter_map(|s| pieces(&self.name, s).ok())
            .flatten()
            .filter(|p| matches!(p, Piece::Slot(n) if *n == slot))
            .count()
    }

    /// Builds a chat request with the template's sampling settings.
    pub fn request(&self, values: &[(&str, &str)], model: &str) -> Result<ChatRequest, TemplateError> {
        let (system_prompt, user_prompt) = self.render(values)?;
        Ok(ChatRequest {
            system_prompt,
            user_prompt,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            model_name: model.to_string(),
        })
    }
}

/// The four prompts the pipeline uses.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateSet {
    pub ai_review: PromptTemplate,
    pub refine_review: PromptTemplate,
    pub clean_review: PromptTemplate,
    pub extract_claims: PromptTemplate,
}

const BUILTIN: [(&str, &str); 4] = [
    ("ai_review", include_str!("../templates/ai_review.toml")),
    ("refine_review", include_str!("../templates/refine_review.toml")),
    ("clean_review", include_str!("../templates/clean_review.toml")),
    ("extract_claims", include_str!("../templates/extract_claims.toml")),
];

impl TemplateSet {
    pub fn builtin() -> Self {
        let load =
            |i: usize| PromptTemplate::from_toml_str(BUILTIN[i].1, BUILTIN[i].0).expect("builtin template parses");
        Self {
            ai_review: load(0),
            refine_review: load(1),
            clean_review: load(2),
            extract_claims: load(3),
        }
    }

    /// Loads `<name>.toml` files from `dir`; missing files fall back to the
    /// built-in versions.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for (name, slot) in [
            ("ai_review", &mut set.ai_review),
            ("refine_review", &mut set.refine_review),
            ("clean_review", &mut set.clean_review),
            ("extract_claims", &mut set.extract_claims),
        ] {
            let path = dir.join(format!("{name}.toml"));
            if path.exists() {
                *slot = PromptTemplate::from_file(&path)?;
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub;

    #[test]
    fn builtins_parse_and_carry_expected_settings() {
        let t = TemplateSet::builtin();
        assert_eq!((t.ai_review.temperature, t.ai_review.max_tokens), (1.0, 3072));
        assert_eq!((t.refine_review.temperature, t.refine_review.max_tokens), (0.8, 3072));
        assert_eq!((t.clean_review.temperature, t.clean_review.max_tokens), (0.3, 3072));
        assert_eq!(t.ai_review.slot_count("score"), 1);
        assert!(t.ai_review.system.starts_with(stub::REVIEW_MARKER));
        assert!(t.refine_review.system.contains(stub::REFINE_MARKER));
        assert!(t.clean_review.system.contains(stub::CLEAN_MARKER));
        assert!(t.extract_claims.system.contains(stub::EXTRACT_MARKER));
    }

    #[test]
    fn escapes_and_missing_slots() {
        let t = PromptTemplate::from_toml_str(
            "name='t'\nversion=1\ntemperature=0.0\nmax_tokens=1\nsystem='{{literal}} {a}'\nuser='{b}'",
            "inline",
        )
        .unwrap();
        let (s, u) = t.render(&[("a", "x"), ("b", "y")]).unwrap();
        assert_eq!(s, "{literal} x");
        assert_eq!(u, "y");
        assert_eq!(
            t.render(&[("a", "x")]).unwrap_err(),
            TemplateError::MissingSlot {
                template: "t".into(),
                slot: "b".into()
            }
        );
    }

    #[test]
    fn unbalanced_braces_rejected() {
        let r = PromptTemplate::from_toml_str(
            "name='t'\nversion=1\ntemperature=0.0\nmax_tokens=1\nsystem='oops {'\nuser='u'",
            "inline",
        );
        assert!(matches!(r, Err(TemplateError::Syntax { .. })));
    }

    #[test]
    fn rendering_is_byte_stable() {
        let t = TemplateSet::builtin().ai_review;
        let v = [("score", "6"), ("title", "T"), ("body", "B")];
        assert_eq!(t.render(&v).unwrap(), t.render(&v).unwrap());
    }
}
