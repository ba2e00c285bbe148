//! The pipeline stages as plain functions from request body to response
//! body. HTTP handlers and the command line both call these, so the two
//! produce the same bytes.

use std::collections::BTreeMap;

use norma_core::checker::{CheckError, CheckOptions, Outcome};
use norma_core::cnl::{verbalize, Lexicon};
use norma_core::codsh::print_codsh;
use norma_core::coml::{emit_coml, parse_coml, ComlError};
use norma_core::contract::ContractModel;
use norma_core::extraction::{extract, RuleSet};
use norma_core::nta::{emit_uppaal_xml, encode_property, render_queries, translate, NtaError, SemanticQuery};
use norma_core::query::{complete_slots, list_templates, run_semantic, run_syntactic, QueryError, QueryInstance};
use norma_core::tsv::{emit_tsv, parse_tsv, rows_to_model, ConvertError, TsvError};
use serde::{Deserialize, Serialize};

/// A failure with a machine-readable code and the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub location: Option<String>,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into(), location: None }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(400, code, message)
    }

    fn at(mut self, location: Option<String>) -> Self {
        self.location = location;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)?;
        if let Some(l) = &self.location {
            write!(f, " (at {l})")?;
        }
        Ok(())
    }
}

impl From<TsvError> for ApiError {
    fn from(e: TsvError) -> Self {
        ApiError::bad_request(e.code(), e.to_string()).at(e.location())
    }
}

impl From<ConvertError> for ApiError {
    fn from(e: ConvertError) -> Self {
        ApiError::bad_request(e.code(), e.to_string()).at(e.location())
    }
}

impl From<ComlError> for ApiError {
    fn from(e: ComlError) -> Self {
        ApiError::bad_request(e.code(), e.to_string()).at(e.location())
    }
}

impl From<NtaError> for ApiError {
    fn from(e: NtaError) -> Self {
        ApiError::bad_request(e.code(), e.to_string())
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = match &e {
            QueryError::Check(CheckError::StateLimit { .. }) => 422,
            QueryError::Check(CheckError::Unstable { .. }) => 500,
            _ => 400,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

/// JSON as the service sends it: pretty printed with a final newline.
pub fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn load(coml: &str) -> Result<ContractModel, ApiError> {
    Ok(parse_coml(coml)?)
}

pub fn nl_to_tsv(text: &str) -> Result<String, ApiError> {
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("EMPTY_BODY", "no text to extract clauses from"));
    }
    Ok(emit_tsv(&extract(text, RuleSet::english())))
}

pub fn tsv_to_coml(tsv: &str) -> Result<String, ApiError> {
    let model = rows_to_model(&parse_tsv(tsv)?)?;
    Ok(emit_coml(&model)?)
}

pub fn coml_to_codsh(coml: &str) -> Result<String, ApiError> {
    Ok(print_codsh(&load(coml)?))
}

/// The verbalization and the words missing from the lexicon.
pub fn coml_to_cnl(coml: &str) -> Result<(String, Vec<String>), ApiError> {
    let v = verbalize(&load(coml)?, Lexicon::english());
    Ok((v.text, v.misses))
}

pub fn coml_to_uppaal(coml: &str) -> Result<String, ApiError> {
    Ok(emit_uppaal_xml(&translate(&load(coml)?)?))
}

/// A UPPAAL query file for the contract: completability, then for every
/// action whether it can be avoided and whether it is ever in conflict.
pub fn uppaal_queries(coml: &str) -> Result<String, ApiError> {
    let model = load(coml)?;
    let net = translate(&model)?;
    let mut queries = vec![SemanticQuery::Completable];
    for k in &net.keys {
        queries.push(SemanticQuery::CanAvoid { agent: k.agent.clone(), action: k.action.clone() });
        queries.push(SemanticQuery::NoConflict { agent: k.agent.clone(), action: k.action.clone() });
    }
    let props = queries.iter().map(|q| encode_property(q, &net)).collect::<Result<Vec<_>, _>>()?;
    Ok(render_queries(&props))
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueryRequest {
    pub coml: String,
    pub query: QueryInstance,
    #[serde(default)]
    pub horizon: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompletionRequest {
    pub coml: String,
    pub template: u32,
}

pub fn syntactic(coml: &str, query: &QueryInstance) -> Result<String, ApiError> {
    Ok(pretty(&run_syntactic(&load(coml)?, query)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceItem {
    pub agent: String,
    pub action: String,
    pub time: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictBody {
    pub outcome: String,
    pub property: String,
    pub answer: String,
    pub trace: Option<Vec<TraceItem>>,
    pub states_explored: usize,
}

pub fn semantic_verdict(coml: &str, query: &QueryInstance, horizon: Option<u32>, state_limit: usize) -> Result<VerdictBody, ApiError> {
    let model = load(coml)?;
    let r = run_semantic(&model, query, CheckOptions { horizon, state_limit })?;
    Ok(VerdictBody {
        outcome: match r.verdict.outcome {
            Outcome::Satisfied => "Satisfied",
            Outcome::NotSatisfied => "NotSatisfied",
        }
        .to_string(),
        property: r.property.to_string(),
        answer: r.answer,
        trace: r.verdict.trace.map(|t| {
            t.0.iter().map(|e| TraceItem { agent: e.agent.to_string(), action: e.action.label(), time: e.time }).collect()
        }),
        states_explored: r.verdict.states_explored,
    })
}

pub fn semantic(coml: &str, query: &QueryInstance, horizon: Option<u32>, state_limit: usize) -> Result<String, ApiError> {
    Ok(pretty(&semantic_verdict(coml, query, horizon, state_limit)?))
}

pub fn templates() -> String {
    pretty(&list_templates())
}

pub fn completions(coml: &str, template: u32) -> Result<String, ApiError> {
    let slots: BTreeMap<String, Vec<String>> = complete_slots(&load(coml)?, template)?;
    Ok(pretty(&slots))
}
