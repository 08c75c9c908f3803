use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Risk, MAX_AGE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Collecting,
    Escalated,
    Concluded,
}

impl Status {
    pub fn is_final(self) -> bool {
        self != Status::Collecting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Yes,
    No,
}

impl FromStr for Response {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yes" => Ok(Response::Yes),
            "no" => Ok(Response::No),
            _ => Err(Error::Session(format!("response must be yes or no, got {s:?}"))),
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Response::Yes => "yes",
            Response::No => "no",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: u32,
    pub gender: Gender,
}

impl Demographics {
    pub fn validate(&self) -> Result<()> {
        if self.age > MAX_AGE {
            return Err(Error::Session(format!("age {} outside 0..={MAX_AGE}", self.age)));
        }
        Ok(())
    }
}

/// One question and its answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub concept: String,
    pub response: Response,
}

/// Live dialog state. Only the engine mutates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub demographics: Demographics,
    pub affirmed: Vec<String>,
    pub denied: Vec<String>,
    /// Answered questions in order.
    pub log: Vec<Exchange>,
    /// The question awaiting an answer.
    pub pending: Option<String>,
    pub status: Status,
    pub budget: usize,
    /// Confident class after the previous answer, for the stability stop.
    pub(crate) last_confident: Option<Risk>,
}

impl Session {
    pub(crate) fn new(id: String, demographics: Demographics, affirmed: Vec<String>, budget: usize) -> Self {
        Session {
            id,
            demographics,
            affirmed,
            denied: Vec::new(),
            log: Vec::new(),
            pending: None,
            status: Status::Collecting,
            budget,
            last_confident: None,
        }
    }

    /// Every concept asked so far, including the pending one.
    pub fn asked(&self) -> impl Iterator<Item = &str> {
        self.log.iter().map(|e| e.concept.as_str()).chain(self.pending.as_deref())
    }

    pub(crate) fn record(&mut self, concept: String, response: Response) {
        match response {
            Response::Yes => self.affirmed.push(concept.clone()),
            Response::No => self.denied.push(concept.clone()),
        }
        self.log.push(Exchange { concept, response });
        self.budget = self.budget.saturating_sub(1);
    }

    pub(crate) fn finish(&mut self, status: Status) {
        debug_assert!(status.is_final());
        if self.status == Status::Collecting {
            self.status = status;
        }
        self.pending = None;
    }

    /// Checks the structural invariants.
    pub fn check(&self) -> Result<()> {
        let a: BTreeSet<&String> = self.affirmed.iter().collect();
        if self.denied.iter().any(|d| a.contains(d)) {
            return Err(Error::Session("a concept is both affirmed and denied".into()));
        }
        let mut seen = BTreeSet::new();
        if !self.asked().all(|c| seen.insert(c)) {
            return Err(Error::Session("a question was asked twice".into()));
        }
        if self.status.is_final() && self.pending.is_some() {
            return Err(Error::Session("finished session has a pending question".into()));
        }
        Ok(())
    }
}
