use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::blimp::BlimpState;
use crate::world::{raycast, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LidarMount {
    Forward,
    /// Left of the heading.
    Side,
    Down,
    /// Right of the heading; used by right-hand wall following.
    SideRight,
}

impl LidarMount {
    pub fn direction(self, heading_rad: f64) -> [f64; 3] {
        let horiz = |a: f64| [a.cos(), a.sin(), 0.0];
        match self {
            LidarMount::Forward => horiz(heading_rad),
            LidarMount::Side => horiz(heading_rad + std::f64::consts::FRAC_PI_2),
            LidarMount::SideRight => horiz(heading_rad - std::f64::consts::FRAC_PI_2),
            LidarMount::Down => [0.0, 0.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarModel {
    pub min_range_m: f64,
    pub max_range_m: f64,
    pub resolution_m: f64,
    pub accuracy_m: f64,
    pub mount: LidarMount,
}

impl LidarModel {
    pub fn new(mount: LidarMount) -> Self {
        Self { min_range_m: 0.2, max_range_m: 8.0, resolution_m: 0.01, accuracy_m: 0.06, mount }
    }

    pub fn validate(&self) -> Result<(), super::SensorError> {
        if !(self.min_range_m < self.max_range_m && self.resolution_m > 0.0 && self.accuracy_m >= 0.0) {
            return Err(super::SensorError::Contract(
                "lidar needs min < max range, positive resolution and non-negative accuracy".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LidarModel {
    fn default() -> Self {
        Self::new(LidarMount::Forward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LidarReading {
    Distance(f64),
    OutOfRange,
    TooClose,
}

impl LidarReading {
    pub fn distance(self) -> Option<f64> {
        match self {
            LidarReading::Distance(d) => Some(d),
            _ => None,
        }
    }
}

/// Reading plus the mount it came from. Serialized as
/// `{"mount": .., "value_cm": <int> | "oor" | "close"}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarSample {
    pub mount: LidarMount,
    pub reading: LidarReading,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireValue {
    Cm(i64),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSample {
    mount: LidarMount,
    value_cm: WireValue,
}

impl Serialize for LidarSample {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let value_cm = match self.reading {
            LidarReading::Distance(d) => WireValue::Cm((d * 100.0).round() as i64),
            LidarReading::OutOfRange => WireValue::Tag("oor".into()),
            LidarReading::TooClose => WireValue::Tag("close".into()),
        };
        WireSample { mount: self.mount, value_cm }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LidarSample {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = WireSample::deserialize(d)?;
        let reading = match w.value_cm {
            WireValue::Cm(cm) => LidarReading::Distance(cm as f64 / 100.0),
            WireValue::Tag(t) if t == "oor" => LidarReading::OutOfRange,
            WireValue::Tag(t) if t == "close" => LidarReading::TooClose,
            WireValue::Tag(t) => return Err(D::Error::custom(format!("unknown lidar value `{t}`"))),
        };
        Ok(LidarSample { mount: w.mount, reading })
    }
}

/// Ranges along the mount direction: raycast truth plus seeded uniform noise
/// within the accuracy, quantized to the resolution. Range limits are
/// applied to the true distance.
pub fn lidar_read(scene: &Scene, state: &BlimpState, model: &LidarModel, seed: u64) -> LidarReading {
    let dir = model.mount.direction(state.heading_rad);
    let truth = match raycast(scene, state.position_m.to_array(), dir) {
        Ok(Some(d)) => d,
        Ok(None) => return LidarReading::OutOfRange,
        // origin on a surface: the target is closer than any measurable range
        Err(_) => return LidarReading::TooClose,
    };
    reading_from_truth(truth, model, seed)
}

pub fn reading_from_truth(truth: f64, model: &LidarModel, seed: u64) -> LidarReading {
    if truth > model.max_range_m {
        return LidarReading::OutOfRange;
    }
    if truth < model.min_range_m {
        return LidarReading::TooClose;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if model.accuracy_m > 0.0 {
        rng.random_range(-model.accuracy_m..=model.accuracy_m)
    } else {
        0.0
    };
    let steps = ((truth + noise) / model.resolution_m).round();
    // divide by the inverse so cm readings survive an integer round trip
    LidarReading::Distance(steps / (1.0 / model.resolution_m).round())
}
