//! Rule-based level-of-traffic-stress (LTS) labels.
//!
//! Rules are evaluated strictly in order and the first match wins. A field is
//! only required once a rule needs to test it, so e.g. a trail never needs a
//! speed.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{lanes_per_direction, Feature, FeatureError, FeatureRecord, Infra, Parking, RoadType, Volume};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtsError {
    #[error("missing field {0} required by the matched rule")]
    MissingField(Feature),
    #[error("LTS label must be in 1..=4, got {0}")]
    OutOfRange(i64),
}

/// Ordinal stress class, 1 (lowest) to 4 (highest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LtsLabel(u8);

impl LtsLabel {
    pub const LTS1: LtsLabel = LtsLabel(1);
    pub const LTS2: LtsLabel = LtsLabel(2);
    pub const LTS3: LtsLabel = LtsLabel(3);
    pub const LTS4: LtsLabel = LtsLabel(4);
    pub const ALL: [LtsLabel; 4] = [Self::LTS1, Self::LTS2, Self::LTS3, Self::LTS4];

    pub fn new(value: i64) -> Result<Self, LtsError> {
        if (1..=4).contains(&value) {
            Ok(LtsLabel(value as u8))
        } else {
            Err(LtsError::OutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based class index, 0..4.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(idx: usize) -> Result<Self, LtsError> {
        Self::new(idx as i64 + 1)
    }

    pub fn stress_class(self) -> StressClass {
        stress_class(self)
    }
}

impl TryFrom<u8> for LtsLabel {
    type Error = LtsError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        LtsLabel::new(v as i64)
    }
}

impl From<LtsLabel> for u8 {
    fn from(l: LtsLabel) -> u8 {
        l.0
    }
}

impl fmt::Display for LtsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary coarsening of LTS. The numeric value follows the indicator used by
/// the evaluation metrics: 1 for low stress, 0 for high stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StressClass {
    High = 0,
    Low = 1,
}

impl StressClass {
    pub fn indicator(self) -> u8 {
        self as u8
    }
}

pub fn stress_class(y: LtsLabel) -> StressClass {
    if y.0 <= 2 {
        StressClass::Low
    } else {
        StressClass::High
    }
}

fn need<T>(v: Option<T>, f: Feature) -> Result<T, LtsError> {
    v.ok_or(LtsError::MissingField(f))
}

fn lanes_each_way(rec: &FeatureRecord) -> Result<u8, LtsError> {
    lanes_per_direction(rec).map_err(|e| match e {
        FeatureError::Missing(f) => LtsError::MissingField(f),
        _ => unreachable!("lanes_per_direction only reports missing fields"),
    })
}

pub fn compute_lts(rec: &FeatureRecord) -> Result<LtsLabel, LtsError> {
    use LtsLabel as L;

    // Separated facilities.
    if rec.road_type == Some(RoadType::Trail) || rec.infra == Some(Infra::MultiUsePath) {
        return Ok(L::LTS1);
    }
    if rec.infra == Some(Infra::CycleTrack) {
        return Ok(L::LTS1);
    }
    // Neither a trail nor a separated facility can be ruled out without these.
    need(rec.road_type, Feature::RoadType)?;
    let infra = need(rec.infra, Feature::Infra)?;

    let speed = || need(rec.speed_bin, Feature::Speed);

    match infra {
        Infra::BikeLane => {
            let parking = need(rec.parking, Feature::Parking)?;
            let per_dir = lanes_each_way(rec)?;
            match parking {
                Parking::Yes => {
                    if per_dir == 1 && speed()? <= 1 {
                        Ok(L::LTS1)
                    } else if per_dir == 1 && speed()? <= 2 {
                        Ok(L::LTS2)
                    } else if speed()? <= 3 {
                        Ok(L::LTS3)
                    } else {
                        Ok(L::LTS4)
                    }
                }
                Parking::No => {
                    if per_dir == 1 && speed()? <= 2 {
                        Ok(L::LTS1)
                    } else if per_dir <= 2 {
                        Ok(L::LTS2)
                    } else if speed()? <= 3 {
                        Ok(L::LTS3)
                    } else {
                        Ok(L::LTS4)
                    }
                }
            }
        }
        Infra::None => {
            let speed = speed()?;
            let lanes = need(rec.lanes_bin, Feature::Lanes)?;
            let volume = || need(rec.volume, Feature::Volume);
            if speed <= 1 && lanes <= 3 {
                Ok(if volume()? == Volume::Low { L::LTS1 } else { L::LTS2 })
            } else if speed <= 2 && lanes <= 3 {
                Ok(if volume()? == Volume::Low { L::LTS2 } else { L::LTS3 })
            } else if speed <= 1 && lanes <= 5 {
                Ok(L::LTS3)
            } else {
                Ok(L::LTS4)
            }
        }
        Infra::CycleTrack | Infra::MultiUsePath => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{full_grid, Direction};

    fn bike_lane(parking: Parking, lanes_total: u8, dir: Direction, speed: u8) -> FeatureRecord {
        FeatureRecord {
            road_type: Some(RoadType::Arterial),
            direction: Some(dir),
            lanes_bin: Some(lanes_total),
            speed_bin: Some(speed),
            infra: Some(Infra::BikeLane),
            parking: Some(parking),
            volume: None,
        }
    }

    fn no_infra(speed: u8, lanes: u8, volume: Option<Volume>) -> FeatureRecord {
        FeatureRecord {
            road_type: Some(RoadType::Local),
            direction: Some(Direction::TwoWay),
            lanes_bin: Some(lanes),
            speed_bin: Some(speed),
            infra: Some(Infra::None),
            parking: Some(Parking::No),
            volume,
        }
    }

    #[test]
    fn separated_facilities() {
        let trail = FeatureRecord {
            road_type: Some(RoadType::Trail),
            ..Default::default()
        };
        assert_eq!(compute_lts(&trail).unwrap(), LtsLabel::LTS1);
        let track = FeatureRecord {
            infra: Some(Infra::CycleTrack),
            ..Default::default()
        };
        assert_eq!(compute_lts(&track).unwrap(), LtsLabel::LTS1);
    }

    #[test]
    fn bike_lane_examples() {
        let r = bike_lane(Parking::Yes, 2, Direction::TwoWay, 1);
        assert_eq!(compute_lts(&r).unwrap(), LtsLabel::LTS1);
        let r = bike_lane(Parking::No, 4, Direction::TwoWay, 2);
        assert_eq!(compute_lts(&r).unwrap(), LtsLabel::LTS2);
    }

    #[test]
    fn no_infra_examples() {
        assert_eq!(compute_lts(&no_infra(1, 3, Some(Volume::Low))).unwrap(), LtsLabel::LTS1);
        assert_eq!(compute_lts(&no_infra(4, 5, None)).unwrap(), LtsLabel::LTS4);
        assert_eq!(compute_lts(&no_infra(1, 4, None)).unwrap(), LtsLabel::LTS3);
        // Literal reading: 40-48 km/h on 4+ lanes falls through to the last rule.
        assert_eq!(compute_lts(&no_infra(2, 4, None)).unwrap(), LtsLabel::LTS4);
    }

    #[test]
    fn missing_fields_are_reported_only_when_needed() {
        let r = no_infra(1, 2, None);
        assert_eq!(compute_lts(&r), Err(LtsError::MissingField(Feature::Volume)));
        let mut r = bike_lane(Parking::Yes, 2, Direction::TwoWay, 1);
        r.parking = None;
        assert_eq!(compute_lts(&r), Err(LtsError::MissingField(Feature::Parking)));
        let r = FeatureRecord {
            road_type: Some(RoadType::Local),
            ..Default::default()
        };
        assert_eq!(compute_lts(&r), Err(LtsError::MissingField(Feature::Infra)));
        let r = FeatureRecord {
            infra: Some(Infra::None),
            ..Default::default()
        };
        assert_eq!(compute_lts(&r), Err(LtsError::MissingField(Feature::RoadType)));
    }

    #[test]
    fn stress_classes() {
        assert_eq!(stress_class(LtsLabel::LTS1).indicator(), 1);
        assert_eq!(stress_class(LtsLabel::LTS2).indicator(), 1);
        assert_eq!(stress_class(LtsLabel::LTS3).indicator(), 0);
        assert_eq!(stress_class(LtsLabel::LTS4), StressClass::High);
    }

    #[test]
    fn label_range() {
        assert!(LtsLabel::new(0).is_err());
        assert!(LtsLabel::new(5).is_err());
        assert_eq!(LtsLabel::from_index(3).unwrap(), LtsLabel::LTS4);
    }

    #[test]
    fn speed_monotone_within_branches() {
        for rec in full_grid() {
            if rec.speed_bin != Some(1) || rec.road_type == Some(RoadType::Trail) {
                continue;
            }
            if !matches!(rec.infra, Some(Infra::None) | Some(Infra::BikeLane)) {
                continue;
            }
            let mut prev = compute_lts(&rec).unwrap();
            for s in 2..=4 {
                let next = compute_lts(&FeatureRecord {
                    speed_bin: Some(s),
                    ..rec
                })
                .unwrap();
                assert!(next >= prev, "{rec:?} speed {s}");
                prev = next;
            }
        }
    }
}
