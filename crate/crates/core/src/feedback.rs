//! Voice, haptic and visual encodings of a [`DirectionEstimate`].
//!
//! Haptic timings alternate off/on durations in milliseconds starting with
//! an immediate (0 ms) off interval. Short 200 ms pulses cover 12:00-3:00,
//! long 600 ms pulses cover 9:00-11:30, and the pulse count grows away from
//! straight ahead; half hours share their hour's pattern.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::schemes::{ClockDirection, DirectionEstimate, Dof3};

const SINGLE_SHORT: &[u32] = &[0, 200];
const DOUBLE_SHORT: &[u32] = &[0, 200, 100, 200];
const TRIPLE_SHORT: &[u32] = &[0, 200, 100, 200, 100, 200];
const QUAD_SHORT: &[u32] = &[0, 200, 100, 200, 100, 200, 100, 200];
const SINGLE_LONG: &[u32] = &[0, 600];
const DOUBLE_LONG: &[u32] = &[0, 600, 100, 600];
const TRIPLE_LONG: &[u32] = &[0, 600, 100, 600, 100, 600];

/// Pattern table, indexed by [`ClockDirection::index`].
const HAPTIC_TABLE: [(&[u32], &str); 13] = [
    (TRIPLE_LONG, "Triple Long Pulse"),   // 9:00
    (TRIPLE_LONG, "Triple Long Pulse"),   // 9:30
    (DOUBLE_LONG, "Double Long Pulse"),   // 10:00
    (DOUBLE_LONG, "Double Long Pulse"),   // 10:30
    (SINGLE_LONG, "Single Long Pulse"),   // 11:00
    (SINGLE_LONG, "Single Long Pulse"),   // 11:30
    (SINGLE_SHORT, "Single Short Pulse"), // 12:00
    (SINGLE_SHORT, "Single Short Pulse"), // 12:30
    (DOUBLE_SHORT, "Double Short Pulse"), // 1:00
    (DOUBLE_SHORT, "Double Short Pulse"), // 1:30
    (TRIPLE_SHORT, "Triple Short Pulse"), // 2:00
    (TRIPLE_SHORT, "Triple Short Pulse"), // 2:30
    (QUAD_SHORT, "Quad Short Pulse"),     // 3:00
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HapticPattern {
    pub timings_ms: Vec<u32>,
    #[serde(rename = "type")]
    pub type_name: String,
}

pub fn haptic_for(clock: ClockDirection) -> HapticPattern {
    let (timings, name) = HAPTIC_TABLE[clock.index()];
    HapticPattern {
        timings_ms: timings.to_vec(),
        type_name: String::from(name),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Voice {
    pub short: String,
    pub clock: String,
}

/// "move left/forward/right" plus "<H> o'clock" or "<H> thirty".
pub fn voice_for(d: &DirectionEstimate) -> Voice {
    let short = match d.dof3 {
        Dof3::Left => "move left",
        Dof3::Forward => "move forward",
        Dof3::Right => "move right",
    };
    let hour = d.clock.hour();
    let clock = if d.clock.is_half_hour() {
        format!("{hour} thirty")
    } else {
        format!("{hour} o'clock")
    };
    Voice {
        short: String::from(short),
        clock,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visual {
    pub arrow_deg: f64,
    pub clock_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub voice_short: String,
    pub voice_clock: String,
    pub haptic: HapticPattern,
    pub visual: Visual,
}

pub fn bundle(d: &DirectionEstimate) -> FeedbackBundle {
    let Voice { short, clock } = voice_for(d);
    FeedbackBundle {
        voice_short: short,
        voice_clock: clock,
        haptic: haptic_for(d.clock),
        visual: Visual {
            arrow_deg: d.deviation_deg,
            clock_label: String::from(d.clock.label()),
        },
    }
}
