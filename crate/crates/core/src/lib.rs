//! Modelling and analysis of normative documents ("contracts").
//!
//! The pipeline runs from English text to a tabular clause listing
//! ([`extraction`], [`tsv`]), into a formal [`contract`] model persisted as
//! [`coml`], viewable as [`cnl`] or [`codsh`], and queried either
//! syntactically or by translating to timed automata ([`nta`]) and model
//! checking ([`checker`]) through [`query`].

pub mod checker;
pub mod cnl;
pub mod codsh;
pub mod coml;
pub mod contract;
pub mod extraction;
pub mod notation;
pub mod nta;
pub mod query;
pub mod tsv;
