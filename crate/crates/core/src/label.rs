use std::fmt;
use std::str::FromStr;

/// Binary class of an application. Malicious is the positive class (+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Malicious,
    Benign,
}

impl Label {
    /// Maps a decision value to a label; exactly zero goes to `Malicious`.
    pub fn from_margin(margin: f64) -> Label {
        if margin >= 0.0 {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn from_sign(value: i64) -> Label {
        if value >= 0 {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Malicious => 1,
            Label::Benign => -1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Malicious => Label::Benign,
            Label::Benign => Label::Malicious,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "+1",
            Label::Benign => "-1",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid label {0:?}, expected +1 or -1")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+1" | "1" => Ok(Label::Malicious),
            "-1" => Ok(Label::Benign),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}

/// Formats an optional label the way record and dataset files expect it.
pub fn format_optional(label: Option<Label>) -> &'static str {
    label.map_or("?", Label::as_str)
}

/// Parses `+1`, `-1` or `?`.
pub fn parse_optional(s: &str) -> Result<Option<Label>, ParseLabelError> {
    if s == "?" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}
