//! Prompt rendering for the basic and pattern-guided parallelization prompts.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{PatternDecision, PatternLabel};

pub const BASIC_TEMPLATE: &str = "Act as a C++ OpenMP Parallelization Tool. You will be given a code. Your task is to parallelize the code using OpenMP. You can add any OpenMP clauses if necessary. If the code is not parallalizable, output the original given code.\n Code: {code}\n Output code: ";

pub const GUIDED_TEMPLATE: &str = "Act as a C++ OpenMP Parallelization Tool. You will be given a code. Your task is to parallelize the code using OpenMP and only output the code. Add {clause} to the loop.\n Code: {code}\n Output Code:";

pub const CODELLAMA_GUIDED_TEMPLATE: &str = "<s>[INST] <<SYS>> Act as a C++ OpenMP Parallelization Tool. You will be given a code. Your task is to parallelize the code using OpenMP and only output the code. Add {clause} to the loop. <</SYS>>\n\n Code: {code}\n Output Code: [/INST]";

/// Basic instruction in the same chat wrapping as [`CODELLAMA_GUIDED_TEMPLATE`].
pub const CODELLAMA_BASIC_TEMPLATE: &str = "<s>[INST] <<SYS>> Act as a C++ OpenMP Parallelization Tool. You will be given a code. Your task is to parallelize the code using OpenMP. You can add any OpenMP clauses if necessary. If the code is not parallalizable, output the original given code. <</SYS>>\n\n Code: {code}\n Output code: [/INST]";

const CLAUSE_SENTENCE: &str = "Add {clause} to the loop.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("guided prompts require a parallel decision")]
    NotParallel,
    #[error("cannot read template {path}: {message}")]
    Template { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Basic,
    Guided,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    #[default]
    Generic,
    CodellamaChat,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Generic => "generic",
            ModelFamily::CodellamaChat => "codellama-chat",
        })
    }
}

/// How much of the decision the `{clause}` placeholder carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseDetail {
    /// Concrete clauses with variables, e.g. `private(i)`.
    #[default]
    Full,
    /// Only the clause names, e.g. `private and reduction`.
    NameOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub kind: PromptKind,
    pub model_family: ModelFamily,
    pub clause_text: Option<String>,
    pub code: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub basic: String,
    pub guided: String,
    pub codellama_basic: String,
    pub codellama_guided: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            basic: BASIC_TEMPLATE.into(),
            guided: GUIDED_TEMPLATE.into(),
            codellama_basic: CODELLAMA_BASIC_TEMPLATE.into(),
            codellama_guided: CODELLAMA_GUIDED_TEMPLATE.into(),
        }
    }
}

impl PromptTemplates {
    pub fn read_template(path: &Path) -> Result<String, PromptError> {
        std::fs::read_to_string(path).map_err(|e| PromptError::Template {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    fn get(&self, kind: PromptKind, family: ModelFamily) -> &str {
        match (kind, family) {
            (PromptKind::Basic, ModelFamily::Generic) => &self.basic,
            (PromptKind::Guided, ModelFamily::Generic) => &self.guided,
            (PromptKind::Basic, ModelFamily::CodellamaChat) => &self.codellama_basic,
            (PromptKind::Guided, ModelFamily::CodellamaChat) => &self.codellama_guided,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptBuilder {
    pub templates: PromptTemplates,
    pub clause_detail: ClauseDetail,
    pub corrected_spelling: bool,
}

impl PromptBuilder {
    pub fn render_basic(&self, code: &str, family: ModelFamily) -> PromptSpec {
        let template = self.template(PromptKind::Basic, family);
        PromptSpec {
            kind: PromptKind::Basic,
            model_family: family,
            clause_text: None,
            code: code.to_string(),
            rendered: substitute(&template, code, ""),
        }
    }

    pub fn render_guided(
        &self,
        code: &str,
        d: &PatternDecision,
        family: ModelFamily,
    ) -> Result<PromptSpec, PromptError> {
        let clause = match self.clause_detail {
            ClauseDetail::Full => render_clause_text(d)?,
            ClauseDetail::NameOnly => clause_names(d)?,
        };
        let mut template = self.template(PromptKind::Guided, family);
        if clause.is_empty() {
            template = drop_clause_sentence(&template);
        }
        Ok(PromptSpec {
            kind: PromptKind::Guided,
            model_family: family,
            clause_text: Some(clause.clone()),
            code: code.to_string(),
            rendered: substitute(&template, code, &clause),
        })
    }

    fn template(&self, kind: PromptKind, family: ModelFamily) -> String {
        let t = self.templates.get(kind, family);
        if self.corrected_spelling {
            t.replace("parallalizable", "parallelizable")
        } else {
            t.to_string()
        }
    }
}

pub fn render_basic(code: &str) -> PromptSpec {
    PromptBuilder::default().render_basic(code, ModelFamily::Generic)
}

pub fn render_guided(code: &str, d: &PatternDecision, family: ModelFamily) -> Result<PromptSpec, PromptError> {
    PromptBuilder::default().render_guided(code, d, family)
}

/// `private(a,b) reduction(op:x,y)`; empty for a do-all loop.
pub fn render_clause_text(d: &PatternDecision) -> Result<String, PromptError> {
    if !d.parallel {
        return Err(PromptError::NotParallel);
    }
    let mut parts = Vec::new();
    if d.has_private() {
        parts.push(format!("private({})", d.private_vars.join(",")));
    }
    for (op, vars) in &d.reductions {
        parts.push(format!("reduction({op}:{})", vars.join(",")));
    }
    Ok(parts.join(" "))
}

fn clause_names(d: &PatternDecision) -> Result<String, PromptError> {
    Ok(match d.label() {
        PatternLabel::NonParallel => return Err(PromptError::NotParallel),
        PatternLabel::DoAll => String::new(),
        PatternLabel::Private => "private".into(),
        PatternLabel::Reduction => "reduction".into(),
        PatternLabel::ReductionAndPrivate => "private and reduction".into(),
    })
}

/// Removes the clause sentence (and the space before it) for do-all loops.
fn drop_clause_sentence(template: &str) -> String {
    if let Some(pos) = template.find(CLAUSE_SENTENCE) {
        let start = if template[..pos].ends_with(' ') { pos - 1 } else { pos };
        format!("{}{}", &template[..start], &template[pos + CLAUSE_SENTENCE.len()..])
    } else {
        template.to_string()
    }
}

/// Single left-to-right pass; substituted text is never rescanned.
fn substitute(template: &str, code: &str, clause: &str) -> String {
    let mut out = String::with_capacity(template.len() + code.len() + clause.len());
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{code}") {
            out.push_str(code);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{clause}") {
            out.push_str(clause);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}
