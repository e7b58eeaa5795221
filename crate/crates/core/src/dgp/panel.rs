//! The contest-level panel and its CSV form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::DataTable;

/// One contest, seen from the favorite (higher measured ability) and the
/// underdog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestRecord {
    pub tournament_id: u32,
    pub year: u32,
    pub stage: u32,
    pub n_stages: u32,
    /// 0 in the final.
    pub stages_to_final: u32,
    /// Pairing index within the stage.
    pub contest_id: u32,
    /// Position in the stage's playing order, from 0.
    pub schedule_position: u32,
    pub k: u32,
    pub favorite_id: u32,
    pub underdog_id: u32,
    pub favorite_ability: f64,
    pub underdog_ability: f64,
    pub ability_ratio: f64,
    pub ability_difference: f64,
    pub log_ability_difference: f64,
    pub performance_favorite: f64,
    pub performance_underdog: f64,
    pub performance_mean: f64,
    pub performance_first_half_favorite: f64,
    pub performance_first_half_underdog: f64,
    pub performance_second_half_favorite: f64,
    pub performance_second_half_underdog: f64,
    pub performance6_favorite: f64,
    pub performance6_underdog: f64,
    pub favorite_wins: u8,
    pub contest_length_fraction: f64,
    pub legs_played: u32,
    pub n_180s: u32,
    pub n_100plus_favorite: f64,
    pub n_100plus_underdog: f64,
    pub n_140plus_favorite: f64,
    pub n_140plus_underdog: f64,
    pub n_180_favorite: f64,
    pub n_180_underdog: f64,
    pub favorite_starts: u8,
    pub underdog_starts: u8,
    /// Empty in the final.
    pub expected_ability_next: Option<f64>,
    /// Empty in the final.
    pub opponent_known: Option<u8>,
    pub favorite_ranking: f64,
    pub underdog_ranking: f64,
    pub favorite_experience: f64,
    pub underdog_experience: f64,
    pub favorite_home: u8,
    pub underdog_home: u8,
    pub prize_money: f64,
    /// Simulated pre-contest win probability of the favorite, when odds
    /// emulation is switched on.
    pub favorite_win_prob: Option<f64>,
}

/// CSV header, in column order.
pub const COLUMNS: &[&str] = &[
    "tournament_id",
    "year",
    "stage",
    "n_stages",
    "stages_to_final",
    "contest_id",
    "schedule_position",
    "k",
    "favorite_id",
    "underdog_id",
    "favorite_ability",
    "underdog_ability",
    "ability_ratio",
    "ability_difference",
    "log_ability_difference",
    "performance_favorite",
    "performance_underdog",
    "performance_mean",
    "performance_first_half_favorite",
    "performance_first_half_underdog",
    "performance_second_half_favorite",
    "performance_second_half_underdog",
    "performance6_favorite",
    "performance6_underdog",
    "favorite_wins",
    "contest_length_fraction",
    "legs_played",
    "n_180s",
    "n_100plus_favorite",
    "n_100plus_underdog",
    "n_140plus_favorite",
    "n_140plus_underdog",
    "n_180_favorite",
    "n_180_underdog",
    "favorite_starts",
    "underdog_starts",
    "expected_ability_next",
    "opponent_known",
    "favorite_ranking",
    "underdog_ranking",
    "favorite_experience",
    "underdog_experience",
    "favorite_home",
    "underdog_home",
    "prize_money",
    "favorite_win_prob",
];

/// Columns that may be empty.
const OPTIONAL: &[&str] = &["expected_ability_next", "opponent_known", "favorite_win_prob"];

impl ContestRecord {
    /// Values in [`COLUMNS`] order, missing as `NaN`.
    pub fn values(&self) -> [f64; 46] {
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        [
            self.tournament_id as f64,
            self.year as f64,
            self.stage as f64,
            self.n_stages as f64,
            self.stages_to_final as f64,
            self.contest_id as f64,
            self.schedule_position as f64,
            self.k as f64,
            self.favorite_id as f64,
            self.underdog_id as f64,
            self.favorite_ability,
            self.underdog_ability,
            self.ability_ratio,
            self.ability_difference,
            self.log_ability_difference,
            self.performance_favorite,
            self.performance_underdog,
            self.performance_mean,
            self.performance_first_half_favorite,
            self.performance_first_half_underdog,
            self.performance_second_half_favorite,
            self.performance_second_half_underdog,
            self.performance6_favorite,
            self.performance6_underdog,
            self.favorite_wins as f64,
            self.contest_length_fraction,
            self.legs_played as f64,
            self.n_180s as f64,
            self.n_100plus_favorite,
            self.n_100plus_underdog,
            self.n_140plus_favorite,
            self.n_140plus_underdog,
            self.n_180_favorite,
            self.n_180_underdog,
            self.favorite_starts as f64,
            self.underdog_starts as f64,
            opt(self.expected_ability_next),
            opt(self.opponent_known.map(f64::from)),
            self.favorite_ranking,
            self.underdog_ranking,
            self.favorite_experience,
            self.underdog_experience,
            self.favorite_home as f64,
            self.underdog_home as f64,
            self.prize_money,
            opt(self.favorite_win_prob),
        ]
    }

    pub fn is_final(&self) -> bool {
        self.stages_to_final == 0
    }
}

/// Numeric table with one column per [`COLUMNS`] entry plus
/// `tournament_year` (same as `tournament_id`, which is unique per year).
pub fn to_table(records: &[ContestRecord]) -> DataTable {
    let mut columns = vec![Vec::with_capacity(records.len()); COLUMNS.len()];
    for r in records {
        for (c, v) in columns.iter_mut().zip(r.values()) {
            c.push(v);
        }
    }
    let mut table = DataTable::new(records.len());
    for (name, values) in COLUMNS.iter().zip(columns) {
        table.insert(*name, values).expect("columns have equal length");
    }
    let ty = table.column("tournament_id").expect("present").to_vec();
    table.insert("tournament_year", ty).expect("same length");
    table
}

pub fn write_panel<W: Write>(records: &[ContestRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    if records.is_empty() {
        writer.write_record(COLUMNS)?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn export_panel(records: &[ContestRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_panel(records, BufWriter::new(file))
}

pub fn read_panel<R: Read>(input: R) -> Result<Vec<ContestRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    for &required in COLUMNS {
        if !headers.iter().any(|h| h == required) && !OPTIONAL.contains(&required) {
            return Err(Error::MissingColumn(required.to_string()));
        }
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let get = |name: &str| -> Option<&str> {
            headers.iter().position(|h| h == name).and_then(|p| row.get(p))
        };
        let record = parse_row(&get, line)?;
        records.push(record);
    }
    Ok(records)
}

pub fn import_panel(path: impl AsRef<Path>) -> Result<Vec<ContestRecord>> {
    let file = File::open(path)?;
    read_panel(BufReader::new(file))
}

fn parse_row<'a>(get: &dyn Fn(&str) -> Option<&'a str>, row: usize) -> Result<ContestRecord> {
    fn err(row: usize, column: &str, message: String) -> Error {
        Error::Parse {
            row,
            column: column.to_string(),
            message,
        }
    }
    let text = |name: &str| -> Result<&'a str> {
        get(name).ok_or_else(|| err(row, name, "missing cell".into()))
    };
    let float = |name: &str| -> Result<f64> {
        let s = text(name)?;
        s.trim()
            .parse::<f64>()
            .map_err(|e| err(row, name, format!("`{s}`: {e}")))
    };
    let int = |name: &str| -> Result<u32> {
        let s = text(name)?;
        s.trim().parse::<u32>().map_err(|e| err(row, name, format!("`{s}`: {e}")))
    };
    let flag = |name: &str| -> Result<u8> {
        match text(name)?.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(err(row, name, format!("`{other}` is not 0 or 1"))),
        }
    };
    let opt_float = |name: &str| -> Result<Option<f64>> {
        match get(name).map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|e| err(row, name, format!("`{s}`: {e}"))),
        }
    };
    let opt_flag = |name: &str| -> Result<Option<u8>> {
        match get(name).map(str::trim) {
            None | Some("") => Ok(None),
            Some("0") => Ok(Some(0)),
            Some("1") => Ok(Some(1)),
            Some(other) => Err(err(row, name, format!("`{other}` is not 0 or 1"))),
        }
    };
    Ok(ContestRecord {
        tournament_id: int("tournament_id")?,
        year: int("year")?,
        stage: int("stage")?,
        n_stages: int("n_stages")?,
        stages_to_final: int("stages_to_final")?,
        contest_id: int("contest_id")?,
        schedule_position: int("schedule_position")?,
        k: int("k")?,
        favorite_id: int("favorite_id")?,
        underdog_id: int("underdog_id")?,
        favorite_ability: float("favorite_ability")?,
        underdog_ability: float("underdog_ability")?,
        ability_ratio: float("ability_ratio")?,
        ability_difference: float("ability_difference")?,
        log_ability_difference: float("log_ability_difference")?,
        performance_favorite: float("performance_favorite")?,
        performance_underdog: float("performance_underdog")?,
        performance_mean: float("performance_mean")?,
        performance_first_half_favorite: float("performance_first_half_favorite")?,
        performance_first_half_underdog: float("performance_first_half_underdog")?,
        performance_second_half_favorite: float("performance_second_half_favorite")?,
        performance_second_half_underdog: float("performance_second_half_underdog")?,
        performance6_favorite: float("performance6_favorite")?,
        performance6_underdog: float("performance6_underdog")?,
        favorite_wins: flag("favorite_wins")?,
        contest_length_fraction: float("contest_length_fraction")?,
        legs_played: int("legs_played")?,
        n_180s: int("n_180s")?,
        n_100plus_favorite: float("n_100plus_favorite")?,
        n_100plus_underdog: float("n_100plus_underdog")?,
        n_140plus_favorite: float("n_140plus_favorite")?,
        n_140plus_underdog: float("n_140plus_underdog")?,
        n_180_favorite: float("n_180_favorite")?,
        n_180_underdog: float("n_180_underdog")?,
        favorite_starts: flag("favorite_starts")?,
        underdog_starts: flag("underdog_starts")?,
        expected_ability_next: opt_float("expected_ability_next")?,
        opponent_known: opt_flag("opponent_known")?,
        favorite_ranking: float("favorite_ranking")?,
        underdog_ranking: float("underdog_ranking")?,
        favorite_experience: float("favorite_experience")?,
        underdog_experience: float("underdog_experience")?,
        favorite_home: flag("favorite_home")?,
        underdog_home: flag("underdog_home")?,
        prize_money: float("prize_money")?,
        favorite_win_prob: opt_float("favorite_win_prob")?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample_record(i: u32) -> ContestRecord {
        ContestRecord {
            tournament_id: i / 31,
            year: 2010 + i % 11,
            stage: 1 + i % 5,
            n_stages: 5,
            stages_to_final: 4 - i % 5,
            contest_id: i % 16,
            schedule_position: i % 7,
            k: 11,
            favorite_id: i % 400,
            underdog_id: (i + 17) % 400,
            favorite_ability: 95.0 + 0.1 * i as f64,
            underdog_ability: 91.123456789,
            ability_ratio: 1.0 + 1.0 / 3.0,
            ability_difference: 3.9,
            log_ability_difference: 0.04,
            performance_favorite: 101.0,
            performance_underdog: 97.5,
            performance_mean: 99.25,
            performance_first_half_favorite: 100.0,
            performance_first_half_underdog: 98.0,
            performance_second_half_favorite: 102.0,
            performance_second_half_underdog: 97.0,
            performance6_favorite: 101.5,
            performance6_underdog: 96.0,
            favorite_wins: (i % 2) as u8,
            contest_length_fraction: 8.0 / 11.0,
            legs_played: 8,
            n_180s: 5,
            n_100plus_favorite: 1.25,
            n_100plus_underdog: 1.0,
            n_140plus_favorite: 0.5,
            n_140plus_underdog: 0.375,
            n_180_favorite: 0.25,
            n_180_underdog: 0.125,
            favorite_starts: 1,
            underdog_starts: 0,
            expected_ability_next: (i % 5 != 4).then_some(94.2),
            opponent_known: (i % 5 != 4).then_some((i % 3 == 0) as u8),
            favorite_ranking: 0.01,
            underdog_ranking: 0.3,
            favorite_experience: 21.0,
            underdog_experience: 12.0,
            favorite_home: 0,
            underdog_home: 1,
            prize_money: 0.5,
            favorite_win_prob: None,
        }
    }

    #[test]
    fn header_matches_columns() {
        let mut buf = Vec::new();
        write_panel(&[sample_record(0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        let empty = {
            let mut b = Vec::new();
            write_panel(&[], &mut b).unwrap();
            String::from_utf8(b).unwrap()
        };
        assert_eq!(empty.trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn round_trip() {
        let records: Vec<_> = (0..50).map(sample_record).collect();
        let mut buf = Vec::new();
        write_panel(&records, &mut buf).unwrap();
        let back = read_panel(buf.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn missing_column_is_named() {
        let mut buf = Vec::new();
        write_panel(&[sample_record(1)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let drop = header.iter().position(|h| *h == "ability_ratio").unwrap();
        let keep = |v: &Vec<&str>| {
            v.iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, s)| *s)
                .collect::<Vec<_>>()
                .join(",")
        };
        let broken = format!("{}\n{}\n", keep(&header), keep(&row));
        match read_panel(broken.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "ability_ratio"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let mut buf = Vec::new();
        write_panel(&[sample_record(1), sample_record(2)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("101.5", "abc", 2);
        match read_panel(text.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "performance6_favorite");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn table_has_every_column() {
        let records: Vec<_> = (0..5).map(sample_record).collect();
        let t = to_table(&records);
        for c in COLUMNS {
            assert_eq!(t.column(c).unwrap().len(), 5);
        }
        assert!(t.column("expected_ability_next").unwrap()[4].is_nan());
    }
}
