//! Road features relevant to traffic-stress assessment and their discretization.
//!
//! Every feature is stored as a small categorical code starting at 1, matching
//! the label codes used in the per-feature prediction files. Any feature may be
//! missing, which lets data-availability scenarios be expressed as masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Daily motor-traffic volume at or below which a road counts as low volume.
pub const LOW_VOLUME_MAX: f64 = 3000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("unknown value {value:?} for field {field}")]
    UnknownCategory { field: &'static str, value: String },
    #[error("invalid value {value} for field {field}: {reason}")]
    InvalidValue {
        field: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error("code {code} out of range for feature {feature}")]
    CodeOutOfRange { feature: Feature, code: u8 },
    #[error("missing field {0}")]
    Missing(Feature),
}

/// The seven discretized road features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    RoadType,
    Direction,
    Lanes,
    Speed,
    Infra,
    Parking,
    Volume,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::RoadType,
        Feature::Direction,
        Feature::Lanes,
        Feature::Speed,
        Feature::Infra,
        Feature::Parking,
        Feature::Volume,
    ];

    /// Number of categories in the feature's alphabet.
    pub fn cardinality(self) -> usize {
        match self {
            Feature::RoadType => 3,
            Feature::Direction => 2,
            Feature::Lanes => 5,
            Feature::Speed => 4,
            Feature::Infra => 4,
            Feature::Parking => 2,
            Feature::Volume => 2,
        }
    }

    /// Ordinal features are split on thresholds by the tree learner; the rest
    /// are split one category against the rest.
    pub fn is_ordinal(self) -> bool {
        matches!(self, Feature::Lanes | Feature::Speed)
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::RoadType => "road_type",
            Feature::Direction => "direction",
            Feature::Lanes => "lanes",
            Feature::Speed => "speed",
            Feature::Infra => "infra",
            Feature::Parking => "parking",
            Feature::Volume => "volume",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or(FeatureError::UnknownCategory {
                field: "feature",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoadType {
    /// Major/minor arterials and arterial ramps.
    Arterial = 1,
    /// Collectors, access roads, laneways, local roads and others.
    Local = 2,
    /// Trails and walkways.
    Trail = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    OneWay = 1,
    TwoWay = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Infra {
    BikeLane = 1,
    CycleTrack = 2,
    MultiUsePath = 3,
    /// Other or no cycling infrastructure.
    None = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parking {
    Yes = 1,
    No = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Volume {
    Low = 1,
    High = 2,
}

impl FromStr for RoadType {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arterial" | "arterial_ramp" => Ok(RoadType::Arterial),
            "collector" | "access" | "laneway" | "local" | "other" => Ok(RoadType::Local),
            "trail" | "walkway" => Ok(RoadType::Trail),
            _ => Err(FeatureError::UnknownCategory {
                field: "road_type",
                value: s.to_string(),
            }),
        }
    }
}

impl FromStr for Direction {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oneway" => Ok(Direction::OneWay),
            "twoway" => Ok(Direction::TwoWay),
            _ => Err(FeatureError::UnknownCategory {
                field: "direction",
                value: s.to_string(),
            }),
        }
    }
}

impl FromStr for Infra {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bike_lane" => Ok(Infra::BikeLane),
            "cycle_track" => Ok(Infra::CycleTrack),
            "multiuse_path" => Ok(Infra::MultiUsePath),
            "none" | "other" => Ok(Infra::None),
            _ => Err(FeatureError::UnknownCategory {
                field: "infra",
                value: s.to_string(),
            }),
        }
    }
}

impl FromStr for Parking {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Parking::Yes),
            "no" => Ok(Parking::No),
            _ => Err(FeatureError::UnknownCategory {
                field: "parking",
                value: s.to_string(),
            }),
        }
    }
}

impl RoadType {
    pub fn label(self) -> &'static str {
        match self {
            RoadType::Arterial => "arterial",
            RoadType::Local => "local",
            RoadType::Trail => "trail",
        }
    }
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::OneWay => "oneway",
            Direction::TwoWay => "twoway",
        }
    }
}

impl Infra {
    pub fn label(self) -> &'static str {
        match self {
            Infra::BikeLane => "bike_lane",
            Infra::CycleTrack => "cycle_track",
            Infra::MultiUsePath => "multiuse_path",
            Infra::None => "none",
        }
    }
}

impl Parking {
    pub fn label(self) -> &'static str {
        match self {
            Parking::Yes => "yes",
            Parking::No => "no",
        }
    }
}

/// Undiscretized feature values as they appear in segment files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub road_type: Option<String>,
    pub direction: Option<String>,
    pub n_lanes_total: Option<u32>,
    pub speed_kmh: Option<f64>,
    pub infra: Option<String>,
    pub parking: Option<String>,
    pub daily_volume: Option<f64>,
}

/// Discretized features of one road segment. `None` marks a missing value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub road_type: Option<RoadType>,
    pub direction: Option<Direction>,
    /// Total lanes in both directions, 1..=5 where 5 means five or more.
    pub lanes_bin: Option<u8>,
    /// 1: <=40 km/h, 2: (40,48], 3: (48,56], 4: >56.
    pub speed_bin: Option<u8>,
    pub infra: Option<Infra>,
    pub parking: Option<Parking>,
    pub volume: Option<Volume>,
}

pub fn speed_bin(speed_kmh: f64) -> Result<u8, FeatureError> {
    if !(speed_kmh >= 0.0) || !speed_kmh.is_finite() {
        return Err(FeatureError::InvalidValue {
            field: "speed_kmh",
            value: speed_kmh.to_string(),
            reason: "must be finite and non-negative",
        });
    }
    Ok(if speed_kmh <= 40.0 {
        1
    } else if speed_kmh <= 48.0 {
        2
    } else if speed_kmh <= 56.0 {
        3
    } else {
        4
    })
}

pub fn lanes_bin(n_lanes_total: u32) -> Result<u8, FeatureError> {
    match n_lanes_total {
        0 => Err(FeatureError::InvalidValue {
            field: "n_lanes_total",
            value: "0".into(),
            reason: "must be at least 1",
        }),
        n => Ok(n.min(5) as u8),
    }
}

pub fn volume_bin(daily_volume: f64) -> Result<Volume, FeatureError> {
    if !(daily_volume >= 0.0) || !daily_volume.is_finite() {
        return Err(FeatureError::InvalidValue {
            field: "daily_volume",
            value: daily_volume.to_string(),
            reason: "must be finite and non-negative",
        });
    }
    Ok(if daily_volume <= LOW_VOLUME_MAX {
        Volume::Low
    } else {
        Volume::High
    })
}

fn parse_opt<T: FromStr<Err = FeatureError>>(raw: &Option<String>) -> Result<Option<T>, FeatureError> {
    raw.as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .transpose()
}

/// Bins a raw feature record. Missing raw values stay missing.
pub fn discretize(raw: &RawFeatures) -> Result<FeatureRecord, FeatureError> {
    Ok(FeatureRecord {
        road_type: parse_opt(&raw.road_type)?,
        direction: parse_opt(&raw.direction)?,
        lanes_bin: raw.n_lanes_total.map(lanes_bin).transpose()?,
        speed_bin: raw.speed_kmh.map(speed_bin).transpose()?,
        infra: parse_opt(&raw.infra)?,
        parking: parse_opt(&raw.parking)?,
        volume: raw.daily_volume.map(volume_bin).transpose()?,
    })
}

/// Lanes in each direction derived from the binned total. Two-way roads take
/// the ceiling of half the total.
pub fn lanes_per_direction(rec: &FeatureRecord) -> Result<u8, FeatureError> {
    let total = rec.lanes_bin.ok_or(FeatureError::Missing(Feature::Lanes))?;
    let direction = rec.direction.ok_or(FeatureError::Missing(Feature::Direction))?;
    Ok(match direction {
        Direction::OneWay => total,
        Direction::TwoWay => total.div_ceil(2),
    })
}

impl FeatureRecord {
    /// Code of a feature (1-based), or `None` when missing.
    pub fn code(&self, feature: Feature) -> Option<u8> {
        match feature {
            Feature::RoadType => self.road_type.map(|v| v as u8),
            Feature::Direction => self.direction.map(|v| v as u8),
            Feature::Lanes => self.lanes_bin,
            Feature::Speed => self.speed_bin,
            Feature::Infra => self.infra.map(|v| v as u8),
            Feature::Parking => self.parking.map(|v| v as u8),
            Feature::Volume => self.volume.map(|v| v as u8),
        }
    }

    pub fn set_code(&mut self, feature: Feature, code: Option<u8>) -> Result<(), FeatureError> {
        if let Some(c) = code {
            if c == 0 || c as usize > feature.cardinality() {
                return Err(FeatureError::CodeOutOfRange { feature, code: c });
            }
        }
        match feature {
            Feature::RoadType => {
                self.road_type = code.map(|c| match c {
                    1 => RoadType::Arterial,
                    2 => RoadType::Local,
                    _ => RoadType::Trail,
                })
            }
            Feature::Direction => {
                self.direction = code.map(|c| if c == 1 { Direction::OneWay } else { Direction::TwoWay })
            }
            Feature::Lanes => self.lanes_bin = code,
            Feature::Speed => self.speed_bin = code,
            Feature::Infra => {
                self.infra = code.map(|c| match c {
                    1 => Infra::BikeLane,
                    2 => Infra::CycleTrack,
                    3 => Infra::MultiUsePath,
                    _ => Infra::None,
                })
            }
            Feature::Parking => self.parking = code.map(|c| if c == 1 { Parking::Yes } else { Parking::No }),
            Feature::Volume => self.volume = code.map(|c| if c == 1 { Volume::Low } else { Volume::High }),
        }
        Ok(())
    }

    pub fn from_codes(codes: [Option<u8>; 7]) -> Result<Self, FeatureError> {
        let mut rec = FeatureRecord::default();
        for (feature, code) in Feature::ALL.into_iter().zip(codes) {
            rec.set_code(feature, code)?;
        }
        Ok(rec)
    }

    pub fn codes(&self) -> [Option<u8>; 7] {
        Feature::ALL.map(|f| self.code(f))
    }

    /// Keeps only the features selected by `keep`.
    pub fn masked(&self, keep: impl Fn(Feature) -> bool) -> Self {
        let mut out = FeatureRecord::default();
        for f in Feature::ALL {
            if keep(f) {
                out.set_code(f, self.code(f)).expect("codes of a valid record");
            }
        }
        out
    }

    /// A raw record whose discretization reproduces this one. Used when
    /// writing binned records back to segment files.
    pub fn representative_raw(&self) -> RawFeatures {
        RawFeatures {
            road_type: self.road_type.map(|v| v.label().to_string()),
            direction: self.direction.map(|v| v.label().to_string()),
            n_lanes_total: self.lanes_bin.map(u32::from),
            speed_kmh: self.speed_bin.map(|b| [30.0, 45.0, 50.0, 60.0][b as usize - 1]),
            infra: self.infra.map(|v| v.label().to_string()),
            parking: self.parking.map(|v| v.label().to_string()),
            daily_volume: self.volume.map(|v| match v {
                Volume::Low => 1500.0,
                Volume::High => 6000.0,
            }),
        }
    }
}

/// Every fully specified record on the discretized grid (1,920 combinations).
pub fn full_grid() -> Vec<FeatureRecord> {
    let mut out = Vec::with_capacity(1920);
    for rt in 1..=3u8 {
        for dir in 1..=2u8 {
            for lanes in 1..=5u8 {
                for speed in 1..=4u8 {
                    for infra in 1..=4u8 {
                        for parking in 1..=2u8 {
                            for volume in 1..=2u8 {
                                let codes = [rt, dir, lanes, speed, infra, parking, volume].map(Some);
                                out.push(FeatureRecord::from_codes(codes).expect("grid codes in range"));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
