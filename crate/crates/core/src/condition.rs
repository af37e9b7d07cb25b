use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// The nine mental health conditions tracked by the pipeline.
///
/// The declaration order is the canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Depression,
    Adhd,
    Anxiety,
    Bipolar,
    Ptsd,
    Autism,
    Ocd,
    Schizophrenia,
    Eating,
}

impl Condition {
    pub const ALL: [Condition; 9] = [
        Condition::Depression,
        Condition::Adhd,
        Condition::Anxiety,
        Condition::Bipolar,
        Condition::Ptsd,
        Condition::Autism,
        Condition::Ocd,
        Condition::Schizophrenia,
        Condition::Eating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Depression => "depression",
            Condition::Adhd => "adhd",
            Condition::Anxiety => "anxiety",
            Condition::Bipolar => "bipolar",
            Condition::Ptsd => "ptsd",
            Condition::Autism => "autism",
            Condition::Ocd => "ocd",
            Condition::Schizophrenia => "schizophrenia",
            Condition::Eating => "eating",
        }
    }

    /// Position in [`Condition::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown condition `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
            assert_eq!(Condition::ALL[c.index()], c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
        assert!("flu".parse::<Condition>().is_err());
    }
}
