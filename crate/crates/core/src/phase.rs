//! The hierarchical combat-phase label: a match may be running, a running
//! match may be active (timer ticking), and active combat is either standing
//! or on the ground.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-second `(match, active, standing)` flags.
///
/// Only the four rows allowed by `standing => active => match` can be
/// constructed, so every value in circulation satisfies the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "RawTriple", into = "RawTriple")]
pub struct PhaseTriple {
    is_match: bool,
    is_active: bool,
    is_standing: bool,
}

#[derive(Serialize, Deserialize)]
struct RawTriple {
    is_match: bool,
    is_active: bool,
    is_standing: bool,
}

impl TryFrom<RawTriple> for PhaseTriple {
    type Error = Error;

    fn try_from(raw: RawTriple) -> Result<Self> {
        PhaseTriple::new(raw.is_match, raw.is_active, raw.is_standing)
    }
}

impl From<PhaseTriple> for RawTriple {
    fn from(t: PhaseTriple) -> Self {
        RawTriple {
            is_match: t.is_match,
            is_active: t.is_active,
            is_standing: t.is_standing,
        }
    }
}

impl PhaseTriple {
    pub const NO_MATCH: PhaseTriple = PhaseTriple::from_state(PhaseState::NoMatch);
    pub const PAUSED: PhaseTriple = PhaseTriple::from_state(PhaseState::Paused);
    pub const STANDING: PhaseTriple = PhaseTriple::from_state(PhaseState::Standing);
    pub const GROUND: PhaseTriple = PhaseTriple::from_state(PhaseState::Ground);

    /// Fails with [`Error::Chain`] for the four illegal combinations.
    pub fn new(is_match: bool, is_active: bool, is_standing: bool) -> Result<Self> {
        if (is_standing && !is_active) || (is_active && !is_match) {
            return Err(Error::Chain);
        }
        Ok(PhaseTriple {
            is_match,
            is_active,
            is_standing,
        })
    }

    /// Top-down gating: a child flag only survives if its parent is set.
    /// Used to turn independent per-target predictions into a legal triple.
    pub fn project(is_match: bool, is_active: bool, is_standing: bool) -> Self {
        let is_active = is_active && is_match;
        PhaseTriple {
            is_match,
            is_active,
            is_standing: is_standing && is_active,
        }
    }

    pub const fn from_state(state: PhaseState) -> Self {
        let (is_match, is_active, is_standing) = match state {
            PhaseState::NoMatch => (false, false, false),
            PhaseState::Paused => (true, false, false),
            PhaseState::Standing => (true, true, true),
            PhaseState::Ground => (true, true, false),
        };
        PhaseTriple {
            is_match,
            is_active,
            is_standing,
        }
    }

    pub fn is_match(&self) -> bool {
        self.is_match
    }

    pub fn is_active(&self) -> bool {
        self.is_active
    }

    pub fn is_standing(&self) -> bool {
        self.is_standing
    }

    pub fn state(&self) -> PhaseState {
        match (self.is_match, self.is_active, self.is_standing) {
            (false, _, _) => PhaseState::NoMatch,
            (true, false, _) => PhaseState::Paused,
            (true, true, true) => PhaseState::Standing,
            (true, true, false) => PhaseState::Ground,
        }
    }

    /// Value of one of the three binary targets.
    pub fn get(&self, target: Target) -> bool {
        match target {
            Target::IsMatch => self.is_match,
            Target::IsActive => self.is_active,
            Target::IsStanding => self.is_standing,
        }
    }
}

/// The four-state encoding of a [`PhaseTriple`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseState {
    NoMatch,
    Paused,
    Standing,
    Ground,
}

impl PhaseState {
    pub const ALL: [PhaseState; 4] = [
        PhaseState::NoMatch,
        PhaseState::Paused,
        PhaseState::Standing,
        PhaseState::Ground,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseState::NoMatch => "no_match",
            PhaseState::Paused => "paused",
            PhaseState::Standing => "standing",
            PhaseState::Ground => "ground",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for PhaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the three binary classification targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    IsMatch,
    IsActive,
    IsStanding,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::IsMatch, Target::IsActive, Target::IsStanding];

    pub fn as_str(&self) -> &'static str {
        match self {
            Target::IsMatch => "is_match",
            Target::IsActive => "is_active",
            Target::IsStanding => "is_standing",
        }
    }

    /// The target this one is conditioned on in the label hierarchy.
    pub fn parent(&self) -> Option<Target> {
        match self {
            Target::IsMatch => None,
            Target::IsActive => Some(Target::IsMatch),
            Target::IsStanding => Some(Target::IsActive),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "is_match" | "match" => Ok(Target::IsMatch),
            "is_active" | "active" => Ok(Target::IsActive),
            "is_standing" | "standing" => Ok(Target::IsStanding),
            other => Err(Error::Config(format!("unknown target `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_four_rows_are_legal() {
        let mut legal = 0;
        for bits in 0..8u8 {
            let (m, a, s) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
            if PhaseTriple::new(m, a, s).is_ok() {
                legal += 1;
            }
        }
        assert_eq!(legal, 4);
    }

    #[test]
    fn projection_is_legal_and_identity_on_legal_rows() {
        for bits in 0..8u8 {
            let (m, a, s) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
            let p = PhaseTriple::project(m, a, s);
            assert!(PhaseTriple::new(p.is_match(), p.is_active(), p.is_standing()).is_ok());
            if let Ok(t) = PhaseTriple::new(m, a, s) {
                assert_eq!(p, t);
            }
        }
    }

    #[test]
    fn state_round_trip() {
        for state in PhaseState::ALL {
            assert_eq!(PhaseTriple::from_state(state).state(), state);
        }
    }

    #[test]
    fn deserialize_rejects_illegal_rows() {
        let bad = r#"{"is_match":false,"is_active":true,"is_standing":false}"#;
        assert!(serde_json::from_str::<PhaseTriple>(bad).is_err());
        let good = r#"{"is_match":true,"is_active":true,"is_standing":false}"#;
        assert_eq!(serde_json::from_str::<PhaseTriple>(good).unwrap(), PhaseTriple::GROUND);
    }
}
