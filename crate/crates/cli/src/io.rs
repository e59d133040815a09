//! CSV ingestion and the plot-ready tables written by every command.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fastthresh::model::{PrecinctStopData, ThresholdSummary};
use fastthresh::robustness::PpcReport;
use fastthresh::{Diagnostics, PosteriorDraws, RawStopRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, ColumnMap, Filter};

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "y" | "yes" => Some(true),
        "0" | "false" | "f" | "n" | "no" => Some(false),
        _ => None,
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| anyhow!("{}: no column named '{name}'", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

/// Reads stop records. Columns not named in `columns` are kept as extra
/// fields for filters, placebos and subsets.
pub fn read_records(path: &Path, columns: &ColumnMap, filters: &[Filter]) -> Result<Vec<RawStopRecord>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let race = column_index(&headers, &columns.race, path)?;
    let precinct = column_index(&headers, &columns.precinct, path)?;
    let frisked = column_index(&headers, &columns.frisked, path)?;
    let weapon = column_index(&headers, &columns.weapon_found, path)?;
    for f in filters {
        column_index(&headers, &f.column, path)?;
    }
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for (i, row) in rdr.records().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        let line = i + 2;
        let flag = |idx: usize, name: &str| {
            parse_bool(&row[idx]).ok_or_else(|| anyhow!("{}:{line}: '{}' is not a boolean {name}", path.display(), &row[idx]))
        };
        let mut extra = BTreeMap::new();
        for (j, h) in headers.iter().enumerate() {
            if ![race, precinct, frisked, weapon].contains(&j) {
                extra.insert(h.to_string(), row[j].to_string());
            }
        }
        if !filters.iter().all(|f| extra.get(&f.column).is_some_and(|v| *v == f.equals)) {
            dropped += 1;
            continue;
        }
        if row[race].is_empty() || row[precinct].is_empty() {
            bail!("{}:{line}: empty race or precinct", path.display());
        }
        out.push(RawStopRecord {
            race: row[race].to_string(),
            precinct: row[precinct].to_string(),
            frisked: flag(frisked, "frisked")?,
            weapon_found: flag(weapon, "weapon_found")?,
            extra,
        });
    }
    if dropped > 0 {
        log::info!("filters dropped {dropped} of {} records", dropped + out.len());
    }
    if out.is_empty() {
        bail!("{}: no records left after filtering", path.display());
    }
    Ok(out)
}

/// Stop counts by (race, precinct), in first-seen order.
pub struct StopCounts {
    pub races: Vec<String>,
    pub precincts: Vec<String>,
    /// `(race, precinct) -> (stops, hits)`.
    pub counts: HashMap<(usize, usize), (u64, u64)>,
}

fn intern(names: &mut Vec<String>, v: &str) -> usize {
    names.iter().position(|n| n == v).unwrap_or_else(|| {
        names.push(v.to_string());
        names.len() - 1
    })
}

pub fn read_aggregated(path: &Path, columns: &ColumnMap) -> Result<StopCounts> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let race = column_index(&headers, &columns.race, path)?;
    let precinct = column_index(&headers, &columns.precinct, path)?;
    let stops = column_index(&headers, &columns.stops, path)?;
    let hits = column_index(&headers, &columns.hits, path)?;
    let mut out = StopCounts { races: Vec::new(), precincts: Vec::new(), counts: HashMap::new() };
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let count = |j: usize| -> Result<u64> {
            row[j].parse().map_err(|_| anyhow!("{}:{line}: '{}' is not a count", path.display(), &row[j]))
        };
        let (s, h) = (count(stops)?, count(hits)?);
        if h > s {
            bail!("{}:{line}: more hits than stops", path.display());
        }
        let r = intern(&mut out.races, &row[race]);
        let d = intern(&mut out.precincts, &row[precinct]);
        let e = out.counts.entry((r, d)).or_default();
        e.0 += s;
        e.1 += h;
    }
    Ok(out)
}

/// Counts from raw records: every stop counts, hits are weapons found.
pub fn count_records(records: &[RawStopRecord]) -> StopCounts {
    let mut out = StopCounts { races: Vec::new(), precincts: Vec::new(), counts: HashMap::new() };
    for r in records {
        let ri = intern(&mut out.races, &r.race);
        let di = intern(&mut out.precincts, &r.precinct);
        let e = out.counts.entry((ri, di)).or_default();
        e.0 += 1;
        e.1 += r.weapon_found as u64;
    }
    out
}

/// Census fractions keyed by `(precinct, race)`.
pub fn read_census(path: &Path, columns: &ColumnMap) -> Result<HashMap<(String, String), f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let precinct = column_index(&headers, &columns.precinct, path)?;
    let race = column_index(&headers, &columns.race, path)?;
    let fraction = column_index(&headers, &columns.fraction, path)?;
    let mut out = HashMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let v: f64 = row[fraction]
            .parse()
            .map_err(|_| anyhow!("{}:{}: '{}' is not a number", path.display(), i + 2, &row[fraction]))?;
        if !(v >= 0.0 && v.is_finite()) {
            bail!("{}:{}: census fraction must be finite and >= 0", path.display(), i + 2);
        }
        out.insert((row[precinct].to_string(), row[race].to_string()), v);
    }
    Ok(out)
}

/// Joins stop counts with the census. Races present only in the census
/// become levels with zero stops.
pub fn stop_data(
    mut counts: StopCounts,
    census: &HashMap<(String, String), f64>,
) -> Result<(Vec<String>, Vec<String>, Vec<PrecinctStopData>)> {
    let mut census_races: Vec<&String> = census.keys().map(|k| &k.1).collect();
    census_races.sort();
    census_races.dedup();
    for r in census_races {
        intern(&mut counts.races, r);
    }
    let precincts = counts
        .precincts
        .iter()
        .enumerate()
        .map(|(d, name)| {
            if !counts.races.iter().any(|r| census.contains_key(&(name.clone(), r.clone()))) {
                bail!("no census rows for precinct '{name}'");
            }
            let (mut stops, mut hits, mut shares) = (Vec::new(), Vec::new(), Vec::new());
            for (r, race) in counts.races.iter().enumerate() {
                let (s, h) = counts.counts.get(&(r, d)).copied().unwrap_or((0, 0));
                stops.push(s);
                hits.push(h);
                shares.push(census.get(&(name.clone(), race.clone())).copied().unwrap_or(0.0));
            }
            let total: f64 = shares.iter().sum();
            if total <= 0.0 {
                bail!("census fractions for precinct '{name}' are all zero");
            }
            Ok(PrecinctStopData { location: d, stops, hits, census: shares.iter().map(|c| c / total).collect() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((counts.races, counts.precincts, precincts))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

/// Output directory that records every file written to it.
pub struct Outputs {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv<S: AsRef<str>>(&mut self, name: &str, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|s| s.as_ref()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn threshold_rows(t: &ThresholdSummary, races: &[String], locations: &[String]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let cells = t
        .cells
        .iter()
        .map(|c| {
            vec![
                races[c.race].clone(),
                locations[c.location].clone(),
                c.mean.to_string(),
                c.lower.to_string(),
                c.upper.to_string(),
            ]
        })
        .collect();
    let groups = t
        .races
        .iter()
        .map(|g| vec![races[g.race].clone(), g.mean.to_string(), g.lower.to_string(), g.upper.to_string()])
        .collect();
    (cells, groups)
}

pub fn write_thresholds(out: &mut Outputs, t: &ThresholdSummary, races: &[String], locations: &[String]) -> Result<()> {
    let (cells, groups) = threshold_rows(t, races, locations);
    out.csv("thresholds_cells.csv", &["race", "location", "mean", "lower", "upper"], &cells)?;
    out.csv("thresholds_races.csv", &["race", "mean", "lower", "upper"], &groups)
}

pub fn write_parameters(out: &mut Outputs, draws: &PosteriorDraws, diag: Option<&Diagnostics>) -> Result<()> {
    let mean = draws.mean();
    let rows: Vec<Vec<String>> = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let (rhat, neff) = diag.map_or((f64::NAN, f64::NAN), |d| (d.rhat[i], d.n_eff[i]));
            vec![n.clone(), mean[i].to_string(), rhat.to_string(), neff.to_string()]
        })
        .collect();
    out.csv("parameters.csv", &["parameter", "mean", "rhat", "n_eff"], &rows)
}

pub fn write_ppc(out: &mut Outputs, report: &PpcReport, races: &[String], locations: &[String]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                races[c.race].clone(),
                locations[c.location].clone(),
                c.stops.to_string(),
                c.observed_rate.to_string(),
                c.predicted_rate.to_string(),
                opt(c.observed_hit_rate),
                c.predicted_hit_rate.to_string(),
            ]
        })
        .collect();
    out.csv(
        "ppc.csv",
        &["race", "location", "stops", "observed_rate", "predicted_rate", "observed_hit_rate", "predicted_hit_rate"],
        &rows,
    )?;
    out.json("ppc.json", report)
}
