//! Per-stop records and their aggregation into cell counts.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CellCounts, Layout};

/// One pedestrian stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStopRecord {
    pub race: String,
    pub precinct: String,
    pub frisked: bool,
    pub weapon_found: bool,
    /// Optional columns such as year, hour, age, gender or suspected crime.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// Cell counts together with the category labels behind the indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedData {
    pub races: Vec<String>,
    pub locations: Vec<String>,
    /// One entry per (race, location) in `Layout::cell_index` order.
    pub cells: Vec<CellCounts>,
}

impl AggregatedData {
    pub fn layout(&self) -> Result<Layout> {
        Layout::new(self.races.len(), self.locations.len())
    }

    pub fn total_stops(&self) -> u64 {
        self.cells.iter().map(|c| c.stops).sum()
    }
}

fn first_seen<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = Vec::new();
    let mut index = HashMap::new();
    for v in values {
        if !index.contains_key(v) {
            index.insert(v, seen.len());
            seen.push(v.to_string());
        }
    }
    seen
}

/// Groups records by (race, precinct), with levels in order of first
/// appearance.
pub fn aggregate(records: &[RawStopRecord]) -> Result<AggregatedData> {
    let races = first_seen(records.iter().map(|r| r.race.as_str()));
    let locations = first_seen(records.iter().map(|r| r.precinct.as_str()));
    aggregate_with_levels(records, &races, &locations)
}

/// Groups records onto fixed race and precinct levels. Levels without
/// records yield zero-stop cells; records outside the levels are an error.
pub fn aggregate_with_levels(
    records: &[RawStopRecord],
    races: &[String],
    locations: &[String],
) -> Result<AggregatedData> {
    let layout = Layout::new(races.len(), locations.len())?;
    let race_ix: HashMap<&str, usize> = races.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let loc_ix: HashMap<&str, usize> = locations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut cells: Vec<CellCounts> = (0..races.len())
        .flat_map(|r| {
            (0..locations.len()).map(move |d| CellCounts { race: r, location: d, stops: 0, searches: 0, hits: 0 })
        })
        .collect();
    for (i, rec) in records.iter().enumerate() {
        if rec.race.is_empty() || rec.precinct.is_empty() {
            return Err(Error::InvalidData(format!("record {i}: empty race or precinct")));
        }
        if rec.weapon_found && !rec.frisked {
            return Err(Error::InvalidData(format!("record {i}: weapon found without a frisk")));
        }
        let r = *race_ix
            .get(rec.race.as_str())
            .ok_or_else(|| Error::InvalidData(format!("record {i}: unknown race '{}'", rec.race)))?;
        let d = *loc_ix
            .get(rec.precinct.as_str())
            .ok_or_else(|| Error::InvalidData(format!("record {i}: unknown precinct '{}'", rec.precinct)))?;
        let c = &mut cells[layout.cell_index(r, d)];
        c.stops += 1;
        c.searches += rec.frisked as u64;
        c.hits += rec.weapon_found as u64;
    }
    Ok(AggregatedData { races: races.to_vec(), locations: locations.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(race: &str, precinct: &str, frisked: bool, weapon: bool) -> RawStopRecord {
        RawStopRecord {
            race: race.into(),
            precinct: precinct.into(),
            frisked,
            weapon_found: weapon,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn three_records_two_cells() {
        let data = aggregate(&[rec("b", "1", true, false), rec("b", "1", false, false), rec("w", "1", true, true)])
            .unwrap();
        assert_eq!(data.races, vec!["b", "w"]);
        let stops: Vec<u64> = data.cells.iter().map(|c| c.stops).collect();
        assert_eq!(stops, vec![2, 1]);
        assert_eq!(data.cells[1].hits, 1);
    }

    #[test]
    fn rejects_hit_without_frisk_and_unknown_levels() {
        assert!(aggregate(&[rec("b", "1", false, true)]).is_err());
        let err = aggregate_with_levels(&[rec("x", "1", false, false)], &["b".into()], &["1".into()]);
        assert!(err.is_err());
    }
}
