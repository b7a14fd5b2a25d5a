//! Direction quantization: left/forward/right, 13 clock positions over the
//! frontal half-plane, and whole degrees.
//!
//! Deviations are signed degrees with 0 straight ahead and positive to the
//! right, limited to `[-90, +90]`.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::search::NavPath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("deviation {0} deg is outside the frontal field [-90, 90]")]
    OutOfField(f64),
    #[error("path has no moves")]
    ZeroLengthPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid clock position {0:?}; expected one of 9:00, 9:30, ..., 3:00")]
pub struct ParseClockError(pub String);

/// Clock-hand positions from 9:00 (hard left) to 3:00 (hard right) in
/// 15 degree steps. Ordering follows the dial left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockDirection {
    Nine,
    NineThirty,
    Ten,
    TenThirty,
    Eleven,
    ElevenThirty,
    Twelve,
    TwelveThirty,
    One,
    OneThirty,
    Two,
    TwoThirty,
    Three,
}

impl ClockDirection {
    pub const ALL: [ClockDirection; 13] = [
        ClockDirection::Nine,
        ClockDirection::NineThirty,
        ClockDirection::Ten,
        ClockDirection::TenThirty,
        ClockDirection::Eleven,
        ClockDirection::ElevenThirty,
        ClockDirection::Twelve,
        ClockDirection::TwelveThirty,
        ClockDirection::One,
        ClockDirection::OneThirty,
        ClockDirection::Two,
        ClockDirection::TwoThirty,
        ClockDirection::Three,
    ];

    const LABELS: [&'static str; 13] = [
        "9:00", "9:30", "10:00", "10:30", "11:00", "11:30", "12:00", "12:30", "1:00", "1:30",
        "2:00", "2:30", "3:00",
    ];

    /// Position on the dial, 0 for 9:00 through 12 for 3:00.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Canonical `H:MM` form.
    pub fn label(self) -> &'static str {
        Self::LABELS[self.index()]
    }

    pub fn hour(self) -> u32 {
        (8 + self.index() as u32 / 2) % 12 + 1
    }

    pub fn is_half_hour(self) -> bool {
        self.index() % 2 == 1
    }

    /// Signed bearing, `-90..=90`.
    pub fn deviation_deg(self) -> f64 {
        (self.index() as f64 - 6.0) * 15.0
    }

    /// Compass-style degrees in `[0, 360)`: hour x 30 (+15 on the half hour),
    /// with 12:00 at 0.
    pub fn degrees(self) -> f64 {
        let d = self.deviation_deg();
        if d < 0.0 {
            d + 360.0
        } else {
            d
        }
    }
}

impl fmt::Display for ClockDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClockDirection {
    type Err = ParseClockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::LABELS
            .iter()
            .position(|l| *l == t)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| ParseClockError(String::from(s)))
    }
}

impl Serialize for ClockDirection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for ClockDirection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = ClockDirection;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a clock position such as \"12:30\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ClockDirection, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof3 {
    Left,
    Forward,
    Right,
}

impl Dof3 {
    pub fn label(self) -> &'static str {
        match self {
            Dof3::Left => "left",
            Dof3::Forward => "forward",
            Dof3::Right => "right",
        }
    }
}

impl fmt::Display for Dof3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn check_field(deviation_deg: f64) -> Result<(), SchemeError> {
    if (-90.0..=90.0).contains(&deviation_deg) {
        Ok(())
    } else {
        Err(SchemeError::OutOfField(deviation_deg))
    }
}

/// Nearest 15 degree step; exact half-steps round toward straight ahead.
pub fn quantize_clock(deviation_deg: f64) -> Result<ClockDirection, SchemeError> {
    check_field(deviation_deg)?;
    let steps = libm::fabs(deviation_deg) / 15.0;
    let whole = libm::floor(steps);
    let k = if steps - whole > 0.5 {
        whole + 1.0
    } else {
        whole
    } as isize;
    let signed = if deviation_deg < 0.0 { -k } else { k };
    Ok(ClockDirection::ALL[(signed + 6) as usize])
}

/// Three 60 degree sectors; the +-30 boundaries belong to `Forward`.
pub fn quantize_dof3(deviation_deg: f64) -> Result<Dof3, SchemeError> {
    check_field(deviation_deg)?;
    Ok(if deviation_deg < -30.0 {
        Dof3::Left
    } else if deviation_deg > 30.0 {
        Dof3::Right
    } else {
        Dof3::Forward
    })
}

/// Shortest distance on the circle between two bearings in `[0, 360)`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = libm::fabs(a - b);
    d.min(360.0 - d)
}

/// One bearing rendered under all three schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub deviation_deg: f64,
    pub clock: ClockDirection,
    pub dof3: Dof3,
    pub raw_deg: i32,
}

impl DirectionEstimate {
    pub fn from_deviation(deviation_deg: f64) -> Result<Self, SchemeError> {
        Ok(Self {
            deviation_deg,
            clock: quantize_clock(deviation_deg)?,
            dof3: quantize_dof3(deviation_deg)?,
            raw_deg: libm::round(deviation_deg) as i32,
        })
    }

    /// Bearing from the first to the last cell of `path`, treating cells as
    /// square.
    pub fn from_path(path: &NavPath) -> Result<Self, SchemeError> {
        if path.length_steps() == 0 {
            return Err(SchemeError::ZeroLengthPath);
        }
        let (start, end) = (path.start(), path.end());
        let dcol = end.col as f64 - start.col as f64;
        let drow = start.row as f64 - end.row as f64;
        Self::from_deviation(libm::atan2(dcol, drow).to_degrees())
    }
}

/// Output scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Dof3,
    #[default]
    Clock,
    Degree,
}

impl Scheme {
    /// Canonical text: `left`/`forward`/`right`, `H:MM`, or e.g. `-23deg`.
    pub fn render(self, d: &DirectionEstimate) -> String {
        match self {
            Scheme::Dof3 => String::from(d.dof3.label()),
            Scheme::Clock => String::from(d.clock.label()),
            Scheme::Degree => format!("{}deg", d.raw_deg),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dof3" => Ok(Scheme::Dof3),
            "clock" => Ok(Scheme::Clock),
            "degree" => Ok(Scheme::Degree),
            other => Err(format!("unknown scheme {other:?} (dof3, clock, degree)")),
        }
    }
}
