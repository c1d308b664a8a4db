//! The four prediction tasks and the 13-class land-use hierarchy.

use std::fmt;
use std::str::FromStr;

use crate::error::{bail, Error};

/// One of the four jointly learned tasks. Doubles as the sample-type
/// indicator: a sample of a given task activates only that task's loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Land,
    Bd,
    Far,
    Pop,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Land, Task::Bd, Task::Far, Task::Pop];

    /// Number of softmax outputs of the head serving this task.
    pub fn classes(self) -> usize {
        match self {
            Task::Land => LandUse::COUNT,
            Task::Bd => 25,
            Task::Far => 32,
            Task::Pop => 40,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Land => "land",
            Task::Bd => "bd",
            Task::Far => "far",
            Task::Pop => "pop",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "land" => Ok(Task::Land),
            "bd" => Ok(Task::Bd),
            "far" => Ok(Task::Far),
            "pop" => Ok(Task::Pop),
            _ => bail!(InvalidArgument, "unknown task {s:?}"),
        }
    }
}

/// Land-use classes in table order. Index 0 is class 1 ("Commercial").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandUse {
    Commercial,
    WaterRiverLake,
    Agriculture,
    GreenSpace,
    RegionalTransport,
    Industrial,
    ResidentialOne,
    ResidentialTwo,
    ResidentialThree,
    Road,
    Administration,
    WaterPond,
    Others,
}

impl LandUse {
    pub const COUNT: usize = 13;

    pub const ALL: [LandUse; 13] = [
        LandUse::Commercial,
        LandUse::WaterRiverLake,
        LandUse::Agriculture,
        LandUse::GreenSpace,
        LandUse::RegionalTransport,
        LandUse::Industrial,
        LandUse::ResidentialOne,
        LandUse::ResidentialTwo,
        LandUse::ResidentialThree,
        LandUse::Road,
        LandUse::Administration,
        LandUse::WaterPond,
        LandUse::Others,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<LandUse> {
        Self::ALL.get(index).copied()
    }

    /// 1-based code used in vector data and reports.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<LandUse> {
        code.checked_sub(1).and_then(|i| Self::from_index(i as usize))
    }

    pub fn name(self) -> &'static str {
        match self {
            LandUse::Commercial => "Commercial",
            LandUse::WaterRiverLake => "Water area - river and lake",
            LandUse::Agriculture => "Agriculture",
            LandUse::GreenSpace => "Green space and square",
            LandUse::RegionalTransport => "Regional transport facilities",
            LandUse::Industrial => "Industrial",
            LandUse::ResidentialOne => "Residential one",
            LandUse::ResidentialTwo => "Residential two",
            LandUse::ResidentialThree => "Residential three",
            LandUse::Road => "Road, street and transportation",
            LandUse::Administration => "Administration and public services",
            LandUse::WaterPond => "Water area - pond",
            LandUse::Others => "Others",
        }
    }

    /// Machine-friendly identifier accepted in GeoJSON `class` properties.
    pub fn slug(self) -> &'static str {
        match self {
            LandUse::Commercial => "commercial",
            LandUse::WaterRiverLake => "water_river_lake",
            LandUse::Agriculture => "agriculture",
            LandUse::GreenSpace => "green_space",
            LandUse::RegionalTransport => "regional_transport",
            LandUse::Industrial => "industrial",
            LandUse::ResidentialOne => "residential_one",
            LandUse::ResidentialTwo => "residential_two",
            LandUse::ResidentialThree => "residential_three",
            LandUse::Road => "road",
            LandUse::Administration => "administration",
            LandUse::WaterPond => "water_pond",
            LandUse::Others => "others",
        }
    }

    /// Display color for the colorized land map.
    pub fn color(self) -> [u8; 3] {
        match self {
            LandUse::Commercial => [230, 25, 75],
            LandUse::WaterRiverLake => [0, 92, 230],
            LandUse::Agriculture => [255, 225, 25],
            LandUse::GreenSpace => [60, 180, 75],
            LandUse::RegionalTransport => [128, 128, 128],
            LandUse::Industrial => [145, 30, 180],
            LandUse::ResidentialOne => [250, 190, 212],
            LandUse::ResidentialTwo => [245, 130, 48],
            LandUse::ResidentialThree => [170, 110, 40],
            LandUse::Road => [0, 0, 0],
            LandUse::Administration => [70, 240, 240],
            LandUse::WaterPond => [0, 0, 128],
            LandUse::Others => [210, 245, 60],
        }
    }
}

impl fmt::Display for LandUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandUse {
    type Err = Error;

    /// Accepts the 1-based numeric code or the slug.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Ok(code) = s.parse::<u8>() {
            return LandUse::from_code(code)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown land-use code {code}")));
        }
        LandUse::ALL
            .iter()
            .copied()
            .find(|c| c.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown land-use class {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_widths() {
        let widths: Vec<_> = Task::ALL.iter().map(|t| t.classes()).collect();
        assert_eq!(widths, vec![13, 25, 32, 40]);
    }

    #[test]
    fn codes_and_slugs_round_trip() {
        for c in LandUse::ALL {
            assert_eq!(LandUse::from_code(c.code()), Some(c));
            assert_eq!(c.slug().parse::<LandUse>().unwrap(), c);
            assert_eq!(c.code().to_string().parse::<LandUse>().unwrap(), c);
        }
        assert!("0".parse::<LandUse>().is_err());
        assert!("14".parse::<LandUse>().is_err());
        assert!("swamp".parse::<LandUse>().is_err());
    }

    #[test]
    fn colors_are_distinct() {
        let mut colors: Vec<_> = LandUse::ALL.iter().map(|c| c.color()).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 13);
    }
}
