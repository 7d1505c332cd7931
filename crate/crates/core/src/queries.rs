//! The bundled benchmark queries: the six core questions and the fourteen
//! extended mechanism-study questions.

use serde::{Deserialize, Serialize};

use crate::pipeline::Query;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub id: String,
    /// `core` or `extended`.
    pub set: String,
    pub text: String,
}

impl QuerySpec {
    pub fn query(&self) -> Query {
        Query::new(self.id.clone(), self.text.clone())
    }
}

pub fn bundled_queries() -> Vec<QuerySpec> {
    serde_json::from_str(include_str!("../fixtures/queries.json")).expect("bundled queries parse")
}

/// Case-insensitive lookup by id.
pub fn find_query(id: &str) -> Option<QuerySpec> {
    bundled_queries().into_iter().find(|q| q.id.eq_ignore_ascii_case(id))
}

/// Queries of one set, or all of them for `all`.
pub fn query_set(set: &str) -> Vec<QuerySpec> {
    bundled_queries()
        .into_iter()
        .filter(|q| set == "all" || q.set == set)
        .collect()
}
