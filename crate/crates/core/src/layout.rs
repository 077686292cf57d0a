//! Tolerant parser for the sectioned layout agents are asked to answer in.
//!
//! A section starts at a line of the form `## NAME argument`. Text before the
//! first header is kept as preamble and otherwise ignored. Section names are
//! matched case-insensitively; a trailing colon on the header is dropped.
//!
//! ```text
//! ## ANALYSIS
//! Overall reading of the article.
//! ## QUESTIONS
//! - @Law: What does the ruling change?
//! ## CLARIFICATIONS
//! - @R0Q1: The ruling ...
//! ```

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// Upper-cased first word of the header.
    pub name: String,
    /// Rest of the header line, trimmed.
    pub arg: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    pub preamble: String,
    pub sections: Vec<Section>,
}

impl Layout {
    pub fn parse(text: &str) -> Self {
        let mut layout = Layout::default();
        let mut current: Option<(String, String, Vec<&str>)> = None;
        let mut preamble: Vec<&str> = Vec::new();
        for line in text.lines() {
            if let Some((name, arg)) = header(line) {
                if let Some((n, a, body)) = current.take() {
                    layout.sections.push(section(n, a, &body));
                }
                current = Some((name, arg, Vec::new()));
            } else if let Some((_, _, body)) = current.as_mut() {
                body.push(line);
            } else {
                preamble.push(line);
            }
        }
        if let Some((n, a, body)) = current {
            layout.sections.push(section(n, a, &body));
        }
        layout.preamble = preamble.join("\n").trim().to_owned();
        layout
    }

    pub fn first(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    /// Bullet items of every section called `name`, concatenated.
    pub fn items(&self, name: &str) -> Vec<String> {
        self.all(name).flat_map(|s| bullet_items(&s.body)).collect()
    }
}

fn header(line: &str) -> Option<(String, String)> {
    let rest = line.trim_start().strip_prefix("##")?;
    if rest.starts_with('#') {
        return None;
    }
    let rest = rest.trim().trim_end_matches(':').trim();
    let mut parts = rest.splitn(2, char::is_whitespace);
    let name = parts.next().filter(|n| !n.is_empty())?;
    let name = name.trim_end_matches(':').to_uppercase();
    let arg = parts
        .next()
        .unwrap_or("")
        .trim()
        .trim_end_matches(':')
        .trim()
        .to_owned();
    Some((name, arg))
}

fn section(name: String, arg: String, body: &[&str]) -> Section {
    Section {
        name,
        arg,
        body: body.join("\n").trim().to_owned(),
    }
}

/// Splits a body into list items. Lines starting with `-`, `*` or `1.` open an
/// item; other non-blank lines continue the previous one. A body without any
/// bullet markers is a single item (or none when blank). Placeholder items
/// such as `none` or `n/a` are dropped.
pub fn bullet_items(body: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut saw_marker = false;
    for line in body.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = strip_marker(t) {
            saw_marker = true;
            items.push(rest.trim().to_owned());
        } else if let Some(last) = items.last_mut() {
            last.push(' ');
            last.push_str(t);
        } else {
            items.push(t.to_owned());
        }
    }
    if !saw_marker && items.len() > 1 {
        items = vec![items.join(" ")];
    }
    items.retain(|i| !is_placeholder(i));
    items
}

fn strip_marker(line: &str) -> Option<&str> {
    if let Some(r) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) {
        return Some(r);
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(r);
        }
    }
    None
}

fn is_placeholder(item: &str) -> bool {
    let t = item.trim().trim_end_matches('.').to_lowercase();
    t.is_empty() || t == "none" || t == "n/a" || t == "no questions" || t == "nothing"
}

/// Splits `@target: text` into its parts. Items without the prefix return
/// `None` for the target.
pub fn addressed(item: &str) -> (Option<String>, String) {
    let t = item.trim();
    if let Some(rest) = t.strip_prefix('@') {
        if let Some((target, text)) = rest.split_once(':') {
            return (Some(target.trim().to_owned()), text.trim().to_owned());
        }
    }
    (None, t.to_owned())
}
