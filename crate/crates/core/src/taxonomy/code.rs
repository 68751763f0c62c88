//! The 8-bit manipulation code.
//!
//! Bits are read left to right:
//!
//! | position | attribute                          |
//! |----------|------------------------------------|
//! | 1        | contact (0 non-contact, 1 contact) |
//! | 2        | engagement (0 rigid, 1 soft)       |
//! | 3-4      | engagement sub-class               |
//! | 5        | prismatic trajectory               |
//! | 6        | revolute trajectory                |
//! | 7        | duration (0 discontinuous, 1 continuous) |
//! | 8        | manual (0 unimanual, 1 bimanual)   |
//!
//! Rigid sub-classes are `00` stationary and `11` moving. Soft sub-classes
//! are `00` admitting/penetrative, `10` manipulator-deforming and `11`
//! manipulatee-deforming.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("manipulation code must have 8 characters, got {0}")]
    WrongLength(usize),
    #[error("non-binary character {ch:?} at position {position}")]
    NonBinary { ch: char, position: usize },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("conflicting attributes {0:?} and {1:?}")]
    ConflictingAttributes(String, String),
}

/// A structured manipulation code. Parsing does not enforce legality; see
/// [`MotionCode::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MotionCode {
    pub contact: bool,
    /// `false` is rigid, `true` is soft.
    pub soft: bool,
    /// Two-bit sub-class, bit 3 is the high bit.
    pub subclass: u8,
    pub prismatic: bool,
    pub revolute: bool,
    pub continuous: bool,
    pub bimanual: bool,
}

const BIT_CONTACT: u8 = 0x80;
const BIT_SOFT: u8 = 0x40;
const SUBCLASS_SHIFT: u8 = 4;
const BIT_PRISMATIC: u8 = 0x08;
const BIT_REVOLUTE: u8 = 0x04;
const BIT_CONTINUOUS: u8 = 0x02;
const BIT_BIMANUAL: u8 = 0x01;

/// Named engagement sub-class of a contact code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engagement {
    RigidStationary,
    RigidMoving,
    SoftAdmitting,
    SoftManipulatorDeforming,
    SoftManipulateeDeforming,
}

impl Engagement {
    pub fn name(self) -> &'static str {
        match self {
            Engagement::RigidStationary => "rigid engagement, stationary",
            Engagement::RigidMoving => "rigid engagement, moving",
            Engagement::SoftAdmitting => "soft engagement, admitting/penetrative",
            Engagement::SoftManipulatorDeforming => "soft engagement, manipulator-deforming",
            Engagement::SoftManipulateeDeforming => "soft engagement, manipulatee-deforming",
        }
    }

    fn bits(self) -> (bool, u8) {
        match self {
            Engagement::RigidStationary => (false, 0b00),
            Engagement::RigidMoving => (false, 0b11),
            Engagement::SoftAdmitting => (true, 0b00),
            Engagement::SoftManipulatorDeforming => (true, 0b10),
            Engagement::SoftManipulateeDeforming => (true, 0b11),
        }
    }
}

/// One broken legality rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    /// A non-contact code sets an engagement, sub-class or duration bit.
    NonContactEngagement,
    NonContactDuration,
    IllegalRigidSubclass,
    IllegalSoftSubclass,
}

impl Violation {
    /// The attribute the violation is about.
    pub fn attribute(self) -> &'static str {
        match self {
            Violation::NonContactEngagement => "engagement",
            Violation::NonContactDuration => "duration",
            Violation::IllegalRigidSubclass | Violation::IllegalSoftSubclass => {
                "engagement_subclass"
            }
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Violation::NonContactEngagement => {
                "non-contact must zero engagement bits (bits 2-4)"
            }
            Violation::NonContactDuration => "non-contact must zero the duration bit (bit 7)",
            Violation::IllegalRigidSubclass => "illegal rigid subclass (allowed: 00, 11)",
            Violation::IllegalSoftSubclass => "illegal soft subclass (allowed: 00, 10, 11)",
        };
        write!(f, "{}: {msg}", self.attribute())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warning {
    /// A contact code with neither trajectory bit set.
    NoTrajectory,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NoTrajectory => {
                write!(f, "trajectory: contact motion is neither prismatic nor revolute")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MotionCode {
    pub const fn from_bits(bits: u8) -> Self {
        MotionCode {
            contact: bits & BIT_CONTACT != 0,
            soft: bits & BIT_SOFT != 0,
            subclass: (bits >> SUBCLASS_SHIFT) & 0b11,
            prismatic: bits & BIT_PRISMATIC != 0,
            revolute: bits & BIT_REVOLUTE != 0,
            continuous: bits & BIT_CONTINUOUS != 0,
            bimanual: bits & BIT_BIMANUAL != 0,
        }
    }

    pub const fn bits(&self) -> u8 {
        let mut b = (self.subclass & 0b11) << SUBCLASS_SHIFT;
        if self.contact {
            b |= BIT_CONTACT;
        }
        if self.soft {
            b |= BIT_SOFT;
        }
        if self.prismatic {
            b |= BIT_PRISMATIC;
        }
        if self.revolute {
            b |= BIT_REVOLUTE;
        }
        if self.continuous {
            b |= BIT_CONTINUOUS;
        }
        if self.bimanual {
            b |= BIT_BIMANUAL;
        }
        b
    }

    /// Parses an 8-character binary string.
    pub fn parse(text: &str) -> Result<Self, CodeError> {
        let n = text.chars().count();
        if n != 8 {
            return Err(CodeError::WrongLength(n));
        }
        let mut bits = 0u8;
        for (i, ch) in text.chars().enumerate() {
            let bit = match ch {
                '0' => 0,
                '1' => 1,
                _ => return Err(CodeError::NonBinary { ch, position: i + 1 }),
            };
            bits = (bits << 1) | bit;
        }
        Ok(Self::from_bits(bits))
    }

    pub fn render(&self) -> String {
        format!("{:08b}", self.bits())
    }

    /// Named engagement, if the code is a legal contact code.
    pub fn engagement(&self) -> Option<Engagement> {
        if !self.contact {
            return None;
        }
        match (self.soft, self.subclass) {
            (false, 0b00) => Some(Engagement::RigidStationary),
            (false, 0b11) => Some(Engagement::RigidMoving),
            (true, 0b00) => Some(Engagement::SoftAdmitting),
            (true, 0b10) => Some(Engagement::SoftManipulatorDeforming),
            (true, 0b11) => Some(Engagement::SoftManipulateeDeforming),
            _ => None,
        }
    }

    pub fn validate(&self) -> Validation {
        let mut v = Validation::default();
        if !self.contact {
            if self.soft || self.subclass != 0 {
                v.violations.push(Violation::NonContactEngagement);
            }
            if self.continuous {
                v.violations.push(Violation::NonContactDuration);
            }
        } else {
            match (self.soft, self.subclass) {
                (false, 0b01 | 0b10) => v.violations.push(Violation::IllegalRigidSubclass),
                (true, 0b01) => v.violations.push(Violation::IllegalSoftSubclass),
                _ => {}
            }
            if !self.prismatic && !self.revolute {
                v.warnings.push(Warning::NoTrajectory);
            }
        }
        v
    }

    pub fn is_legal(&self) -> bool {
        self.validate().is_ok()
    }

    /// Builds a code from attribute words such as
    /// `contact rigid moving prismatic continuous unimanual`.
    ///
    /// Unmentioned flags default to 0. Sub-class words imply contact and the
    /// matching engagement type.
    pub fn from_attributes<S: AsRef<str>>(words: &[S]) -> Result<Self, CodeError> {
        let mut code = MotionCode::default();
        let mut contact: Option<(bool, String)> = None;
        let mut engagement: Option<(bool, String)> = None;
        let mut subclass: Option<(Engagement, String)> = None;
        let mut duration: Option<(bool, String)> = None;
        let mut manual: Option<(bool, String)> = None;

        fn set<T: PartialEq + Copy>(
            slot: &mut Option<(T, String)>,
            value: T,
            word: &str,
        ) -> Result<(), CodeError> {
            match slot {
                Some((prev, prev_word)) if *prev != value => Err(
                    CodeError::ConflictingAttributes(prev_word.clone(), word.to_string()),
                ),
                _ => {
                    *slot = Some((value, word.to_string()));
                    Ok(())
                }
            }
        }

        for raw in words {
            let word = raw.as_ref().trim().to_lowercase();
            match word.as_str() {
                "contact" => set(&mut contact, true, &word)?,
                "non-contact" | "noncontact" => set(&mut contact, false, &word)?,
                "rigid" => set(&mut engagement, false, &word)?,
                "soft" => set(&mut engagement, true, &word)?,
                "stationary" => set(&mut subclass, Engagement::RigidStationary, &word)?,
                "moving" => set(&mut subclass, Engagement::RigidMoving, &word)?,
                "admitting" | "penetrative" => {
                    set(&mut subclass, Engagement::SoftAdmitting, &word)?
                }
                "manipulator-deforming" => {
                    set(&mut subclass, Engagement::SoftManipulatorDeforming, &word)?
                }
                "manipulatee-deforming" => {
                    set(&mut subclass, Engagement::SoftManipulateeDeforming, &word)?
                }
                "prismatic" => code.prismatic = true,
                "revolute" => code.revolute = true,
                "continuous" => set(&mut duration, true, &word)?,
                "discontinuous" => set(&mut duration, false, &word)?,
                "unimanual" => set(&mut manual, false, &word)?,
                "bimanual" => set(&mut manual, true, &word)?,
                "" => {}
                _ => return Err(CodeError::UnknownAttribute(raw.as_ref().to_string())),
            }
        }

        if let Some((eng, word)) = &subclass {
            let (soft, bits) = eng.bits();
            set(&mut engagement, soft, word)?;
            set(&mut contact, true, word)?;
            code.subclass = bits;
        }
        if let Some((soft, word)) = &engagement {
            set(&mut contact, true, word)?;
            code.soft = *soft;
        }
        code.contact = contact.map(|(c, _)| c).unwrap_or(false);
        code.continuous = duration.map(|(c, _)| c).unwrap_or(false);
        code.bimanual = manual.map(|(c, _)| c).unwrap_or(false);
        Ok(code)
    }

    /// Human-readable attribute listing, one attribute per line.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let contact = if self.contact { "contact (1)" } else { "non-contact (0)" };
        let engagement = match (self.contact, self.engagement()) {
            (false, _) => "none (non-contact)".to_string(),
            (true, Some(e)) => format!(
                "{} ({}{:02b})",
                e.name(),
                u8::from(self.soft),
                self.subclass
            ),
            (true, None) => format!(
                "{} engagement, illegal sub-class {:02b}",
                if self.soft { "soft" } else { "rigid" },
                self.subclass
            ),
        };
        let trajectory = match (self.prismatic, self.revolute) {
            (true, true) => "prismatic and revolute (11)",
            (true, false) => "prismatic, non-revolute (10)",
            (false, true) => "revolute, non-prismatic (01)",
            (false, false) => "neither prismatic nor revolute (00)",
        };
        let duration = if self.continuous {
            "continuous (1)"
        } else {
            "discontinuous (0)"
        };
        let manual = if self.bimanual { "bimanual (1)" } else { "unimanual (0)" };
        vec![
            ("contact", contact.to_string()),
            ("engagement", engagement),
            ("trajectory", trajectory.to_string()),
            ("duration", duration.to_string()),
            ("manual", manual.to_string()),
        ]
    }

    /// The same code with the prismatic and revolute bits exchanged.
    pub fn with_trajectory_swapped(&self) -> Self {
        MotionCode {
            prismatic: self.revolute,
            revolute: self.prismatic,
            ..*self
        }
    }
}

impl fmt::Display for MotionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08b}", self.bits())
    }
}

impl FromStr for MotionCode {
    type Err = CodeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MotionCode::parse(s)
    }
}

impl Serialize for MotionCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for MotionCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        MotionCode::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Every code that passes validation, in ascending bit order.
pub fn enumerate_legal_codes() -> Vec<MotionCode> {
    (0..=u8::MAX)
        .map(MotionCode::from_bits)
        .filter(MotionCode::is_legal)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("code distance weights must be finite, nonnegative and not all zero")]
pub struct InvalidWeights;

/// Per-bit weights for [`code_distance`], indexed by bit position 1..=8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeDistanceWeights([f64; 8]);

impl CodeDistanceWeights {
    pub fn new(weights: [f64; 8]) -> Result<Self, InvalidWeights> {
        let valid = weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            && weights.iter().any(|w| *w > 0.0);
        if valid {
            Ok(CodeDistanceWeights(weights))
        } else {
            Err(InvalidWeights)
        }
    }

    pub fn uniform() -> Self {
        CodeDistanceWeights([1.0; 8])
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

impl Default for CodeDistanceWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Weighted Hamming distance over the 8 bit positions.
pub fn code_distance(a: MotionCode, b: MotionCode, w: &CodeDistanceWeights) -> f64 {
    let diff = a.bits() ^ b.bits();
    (0..8)
        .filter(|i| diff & (0x80 >> i) != 0)
        .map(|i| w.0[i])
        .sum()
}
