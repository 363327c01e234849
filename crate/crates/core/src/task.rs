//! Task kinds, verification label sets, and gold answers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Label vocabulary of a fact-verification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSet {
    /// TabFact-style `{true, false}`.
    TrueFalse,
    /// FEVEROUS-style `{SUPPORTS, REFUTES, NOT ENOUGH INFO}`.
    ThreeWay,
}

impl LabelSet {
    pub fn labels(self) -> &'static [Label] {
        match self {
            LabelSet::TrueFalse => &[Label::True, Label::False],
            LabelSet::ThreeWay => &[Label::Supports, Label::Refutes, Label::NotEnoughInfo],
        }
    }

    pub fn contains(self, label: Label) -> bool {
        self.labels().contains(&label)
    }

    /// Parses a label name into this set. Verdict synonyms from the other
    /// vocabulary are folded in where the mapping is unambiguous
    /// (`SUPPORTS` is `true` in a two-way set, and vice versa).
    pub fn parse(self, text: &str) -> Option<Label> {
        let label = Label::parse(text)?;
        match (self, label) {
            (LabelSet::TrueFalse, Label::Supports) => Some(Label::True),
            (LabelSet::TrueFalse, Label::Refutes) => Some(Label::False),
            (LabelSet::TrueFalse, Label::NotEnoughInfo) => None,
            (LabelSet::ThreeWay, Label::True) => Some(Label::Supports),
            (LabelSet::ThreeWay, Label::False) => Some(Label::Refutes),
            (_, l) => Some(l),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSet::TrueFalse => "true_false",
            LabelSet::ThreeWay => "three_way",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "true_false" | "tabfact" | "binary" => Some(LabelSet::TrueFalse),
            "three_way" | "feverous" | "three_class" => Some(LabelSet::ThreeWay),
            _ => None,
        }
    }
}

/// A verification verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    True,
    False,
    Supports,
    Refutes,
    NotEnoughInfo,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "true",
            Label::False => "false",
            Label::Supports => "SUPPORTS",
            Label::Refutes => "REFUTES",
            Label::NotEnoughInfo => "NOT ENOUGH INFO",
        }
    }

    pub fn parse(text: &str) -> Option<Label> {
        let norm = crate::text::collapse_whitespace(text).to_ascii_lowercase();
        match norm.as_str() {
            "true" => Some(Label::True),
            "false" => Some(Label::False),
            "supports" | "supported" => Some(Label::Supports),
            "refutes" | "refuted" => Some(Label::Refutes),
            "not enough info" | "not enough information" => Some(Label::NotEnoughInfo),
            _ => None,
        }
    }

    /// Maps two-way labels onto the three-way vocabulary, for reports that
    /// put every verification task on one scale.
    pub fn unified(self) -> Label {
        match self {
            Label::True => Label::Supports,
            Label::False => Label::Refutes,
            other => other,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Label::parse(&s).ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown label {s:?}")))
    }
}

/// What kind of answer an instance expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    ShortQa,
    FactVerification(LabelSet),
    FreeQa,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ShortQa => "short_qa",
            TaskKind::FactVerification(_) => "fact_verification",
            TaskKind::FreeQa => "free_qa",
        }
    }

    pub fn label_set(self) -> Option<LabelSet> {
        match self {
            TaskKind::FactVerification(set) => Some(set),
            _ => None,
        }
    }
}

/// Reference answer of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldAnswer {
    Answers { answers: Vec<String> },
    Label { label: Label },
}
