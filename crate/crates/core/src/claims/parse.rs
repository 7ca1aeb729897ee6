//! The extraction output grammar.
//!
//! ```text
//! output    := (heading | bullet | continuation | blank)*
//! heading   := unindented line naming one of the five categories; leading
//!              '#', numbering ("1." / "1)" / "(1)"), bold markers, a trailing
//!              ':' and a trailing description after a dash are tolerated
//! bullet    := ('-' | '*' | '•') whitespace text
//! continuation := indented non-bullet line directly inside a bullet
//! ```
//!
//! Bullets become claims of the most recent heading; continuation lines are
//! joined to their bullet with single spaces; blank lines close a bullet.

use super::{Claim, ClaimCategory, ClaimError};

const BULLETS: [char; 3] = ['-', '*', '•'];

fn bullet_text(trimmed: &str) -> Option<&str> {
    let mut chars = trimmed.chars();
    let first = chars.next()?;
    if !BULLETS.contains(&first) {
        return None;
    }
    let rest = chars.as_str();
    if rest.is_empty() {
        return Some("");
    }
    if rest.starts_with(char::is_whitespace) {
        Some(rest.trim())
    } else {
        None
    }
}

fn strip_numbering(s: &str) -> &str {
    let s = s.trim_start();
    let inner = s.strip_prefix('(').unwrap_or(s);
    let digits = inner.len() - inner.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return s;
    }
    let after = &inner[digits..];
    match after.chars().next() {
        Some('.') | Some(')') => after[1..].trim_start(),
        _ => s,
    }
}

/// Cleans a heading line down to its bare name.
fn heading_name(line: &str) -> String {
    let mut s = line.trim().trim_start_matches('#').trim();
    s = strip_numbering(s);
    let unbolded = s.replace("**", "").replace("__", "");
    let mut s = strip_numbering(unbolded.trim_matches(|c| c == '*' || c == '_')).to_string();
    for sep in [" – ", " — ", " - ", ":"] {
        if let Some(pos) = s.find(sep) {
            s.truncate(pos);
        }
    }
    s.trim().trim_matches(|c| c == '*' || c == '_').trim().to_string()
}

fn match_heading(name: &str) -> Option<ClaimCategory> {
    let norm = name
        .to_lowercase()
        .replace(['-', '–', '_'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    ClaimCategory::ALL
        .into_iter()
        .find(|c| c.heading().to_lowercase().replace('-', " ") == norm)
}

pub fn parse_claim_output(raw: &str) -> Result<Vec<Claim>, ClaimError> {
    let mut claims: Vec<Claim> = Vec::new();
    let mut heading: Option<ClaimCategory> = None;
    let mut open = false;
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            open = false;
            continue;
        }
        if let Some(text) = bullet_text(trimmed) {
            let Some(category) = heading else {
                return Err(ClaimError::BulletBeforeHeading { line: line_no });
            };
            if text.is_empty() {
                return Err(ClaimError::EmptyBullet { line: line_no });
            }
            claims.push(Claim::new(category, text));
            open = true;
            continue;
        }
        let name = heading_name(trimmed);
        if let Some(category) = match_heading(&name) {
            heading = Some(category);
            open = false;
            continue;
        }
        let indented = line.starts_with(char::is_whitespace);
        if indented && open {
            let last = claims.last_mut().expect("open bullet exists");
            last.text.push(' ');
            last.text.push_str(trimmed);
        } else if indented {
            return Err(ClaimError::OrphanContinuation { line: line_no });
        } else {
            return Err(ClaimError::UnknownHeading {
                line: line_no,
                heading: name,
            });
        }
    }
    Ok(claims)
}

/// Renders claims as headed bullets; a heading is emitted whenever the
/// category changes, so parsing the result restores the original order.
pub fn render_claims<T>(claims: &[Claim<T>]) -> String {
    let mut out = String::new();
    let mut prev: Option<ClaimCategory> = None;
    for c in claims {
        if prev != Some(c.category) {
            if prev.is_some() {
                out.push('\n');
            }
            out.push_str(c.category.heading());
            out.push('\n');
            prev = Some(c.category);
        }
        out.push_str("- ");
        out.push_str(&c.text);
        out.push('\n');
    }
    out
}
