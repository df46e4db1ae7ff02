use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::algos::Lookahead;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoId {
    /// RHIG initialized by OGD.
    Rhig,
    /// RHIG fed exact predictions.
    Rhgd,
    /// The OGD initialization alone.
    Ogd,
    Afhc,
    Chc,
}

impl AlgoId {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgoId::Rhig => "rhig",
            AlgoId::Rhgd => "rhgd",
            AlgoId::Ogd => "ogd",
            AlgoId::Afhc => "afhc",
            AlgoId::Chc => "chc",
        }
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rhig" => Ok(AlgoId::Rhig),
            "rhgd" => Ok(AlgoId::Rhgd),
            "ogd" => Ok(AlgoId::Ogd),
            "afhc" => Ok(AlgoId::Afhc),
            "chc" => Ok(AlgoId::Chc),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// One algorithm configuration of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgoSpec {
    pub algo: AlgoId,
    pub lookahead: Lookahead,
    /// CHC commitment level v.
    pub commitment: Option<usize>,
}

impl AlgoSpec {
    pub fn new(algo: AlgoId, lookahead: Lookahead) -> Self {
        AlgoSpec { algo, lookahead, commitment: None }
    }

    pub fn chc(lookahead: Lookahead, v: usize) -> Self {
        AlgoSpec { algo: AlgoId::Chc, lookahead, commitment: Some(v) }
    }

    /// The W recorded in reports; plain OGD always reports 0.
    pub fn reported_lookahead(&self) -> Lookahead {
        match self.algo {
            AlgoId::Ogd => Lookahead::Finite(0),
            _ => self.lookahead,
        }
    }
}

/// A CSV row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub algorithm: AlgoId,
    pub lookahead: Lookahead,
    pub extra_param: Option<usize>,
    pub seed: u64,
    pub realized_cost: f64,
    pub offline_cost: f64,
    pub regret: f64,
    pub bound_theorem1: f64,
    pub bound_theorem5: f64,
    pub wall_ms: f64,
}

impl ReportRow {
    fn sort_key(&self) -> (&'static str, Lookahead, Option<usize>, u64) {
        (self.algorithm.as_str(), self.lookahead, self.extra_param, self.seed)
    }
}

/// Result of one algorithm on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub row: ReportRow,
    /// f(x_t; θ_t) + d(…) for t = 1..T.
    pub stage_costs: Vec<f64>,
    /// Reg(φ) of the initialization, for RHIG-type runs.
    pub init_regret: Option<f64>,
    /// Set when the run failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 11] = [
    "scenario",
    "algorithm",
    "W",
    "extra_param",
    "seed",
    "realized_cost",
    "offline_cost",
    "regret",
    "bound_theorem1",
    "bound_theorem5",
    "wall_ms",
];

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn sort_rows<T, F: Fn(&T) -> &ReportRow>(items: &mut [T], row: F) {
    items.sort_by(|a, b| row(a).sort_key().cmp(&row(b).sort_key()));
}

pub fn write_reports_csv<'a, W, I>(rows: I, out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ReportRow>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.algorithm.to_string(),
            r.lookahead.to_string(),
            r.extra_param.map(|v| v.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            format_float(r.realized_cost),
            format_float(r.offline_cost),
            format_float(r.regret),
            format_float(r.bound_theorem1),
            format_float(r.bound_theorem5),
            format_float(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a run CSV written by [`write_reports_csv`].
pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Parse { line: 1, msg: "empty run file".into() }),
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header, expected {}", CSV_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec?;
        let err = |msg: String| Error::Parse { line, msg };
        if rec.len() != CSV_HEADER.len() {
            return Err(err(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        let float = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|_| err(format!("{} is not a number: {:?}", CSV_HEADER[j], &rec[j])))
        };
        let extra = rec[3].trim();
        rows.push(ReportRow {
            scenario: rec[0].to_string(),
            algorithm: rec[1].trim().parse().map_err(|e: Error| err(e.to_string()))?,
            lookahead: rec[2].trim().parse().map_err(|e: Error| err(e.to_string()))?,
            extra_param: if extra.is_empty() {
                None
            } else {
                Some(extra.parse().map_err(|_| err(format!("extra_param is not an integer: {extra:?}")))?)
            },
            seed: rec[4].trim().parse().map_err(|_| err(format!("seed is not an integer: {:?}", &rec[4])))?,
            realized_cost: float(5)?,
            offline_cost: float(6)?,
            regret: float(7)?,
            bound_theorem1: float(8)?,
            bound_theorem5: float(9)?,
            wall_ms: float(10)?,
        });
    }
    Ok(rows)
}

/// Monte Carlo summary of one (scenario, algorithm, W, extra_param) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub scenario: String,
    pub algorithm: AlgoId,
    pub lookahead: Lookahead,
    pub extra_param: Option<usize>,
    /// Rows with a finite regret.
    pub seeds: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_bound_theorem1: f64,
    pub bound_theorem5: f64,
}

impl GroupSummary {
    /// (bound_name, value) pairs.
    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("mean_regret", self.mean_regret),
            ("stderr_regret", self.stderr_regret),
            ("theorem1_mean", self.mean_bound_theorem1),
            ("theorem5", self.bound_theorem5),
        ]
    }
}

/// Sample mean and standard error; NaN when empty.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(rows: &[ReportRow]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(String, &'static str, Lookahead, Option<usize>), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario.clone(), r.algorithm.as_str(), r.lookahead, r.extra_param)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|members| {
            let ok: Vec<&ReportRow> = members.iter().copied().filter(|r| r.regret.is_finite()).collect();
            let regrets: Vec<f64> = ok.iter().map(|r| r.regret).collect();
            let (mean, se) = mean_and_stderr(&regrets);
            let b1: Vec<f64> = ok.iter().map(|r| r.bound_theorem1).collect();
            let first = members[0];
            GroupSummary {
                scenario: first.scenario.clone(),
                algorithm: first.algorithm,
                lookahead: first.lookahead,
                extra_param: first.extra_param,
                seeds: ok.len(),
                mean_regret: mean,
                stderr_regret: se,
                mean_bound_theorem1: mean_and_stderr(&b1).0,
                bound_theorem5: ok.first().map_or(f64::NAN, |r| r.bound_theorem5),
            }
        })
        .collect()
}

/// Rows `scenario,algorithm,W,extra_param,seeds,bound_name,value`.
pub fn write_summary_csv<W: Write>(summaries: &[GroupSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "algorithm", "W", "extra_param", "seeds", "bound_name", "value"])?;
    for s in summaries {
        for (name, value) in s.entries() {
            w.write_record([
                s.scenario.clone(),
                s.algorithm.to_string(),
                s.lookahead.to_string(),
                s.extra_param.map(|v| v.to_string()).unwrap_or_default(),
                s.seeds.to_string(),
                name.to_string(),
                format_float(value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algo: AlgoId, w: Lookahead, seed: u64, regret: f64) -> ReportRow {
        ReportRow {
            scenario: "planning".into(),
            algorithm: algo,
            lookahead: w,
            extra_param: None,
            seed,
            realized_cost: 1.0 + regret,
            offline_cost: 1.0,
            regret,
            bound_theorem1: 0.1 * seed as f64,
            bound_theorem5: f64::NAN,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row(AlgoId::Rhig, Lookahead::Infinite, 3, 1.0 / 3.0),
            row(AlgoId::Chc, Lookahead::Finite(2), 4, f64::NAN),
        ];
        let mut buf = Vec::new();
        write_reports_csv(&rows, &mut buf).unwrap();
        let back = read_reports_csv(&buf[..]).unwrap();
        assert_eq!(back[0].regret.to_bits(), rows[0].regret.to_bits());
        assert_eq!(back[0].bound_theorem1.to_bits(), rows[0].bound_theorem1.to_bits());
        assert_eq!(back[0].lookahead, Lookahead::Infinite);
        let mut again = Vec::new();
        write_reports_csv(&back, &mut again).unwrap();
        assert_eq!(again, buf);
        assert!(back[1].regret.is_nan());
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert!(text.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn reader_rejects_bad_input() {
        assert!(read_reports_csv(&b""[..]).is_err());
        assert!(read_reports_csv(&b"a,b\n"[..]).is_err());
        let mut buf = Vec::new();
        write_reports_csv(&[row(AlgoId::Ogd, Lookahead::Finite(0), 0, 0.5)], &mut buf).unwrap();
        let bad = String::from_utf8(buf).unwrap().replace("ogd", "sgd");
        match read_reports_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sorting_and_summary() {
        let mut rows = vec![
            row(AlgoId::Rhig, Lookahead::Finite(2), 1, 2.0),
            row(AlgoId::Afhc, Lookahead::Finite(2), 0, 1.0),
            row(AlgoId::Rhig, Lookahead::Finite(2), 0, 4.0),
            row(AlgoId::Rhig, Lookahead::Finite(1), 5, 3.0),
        ];
        sort_rows(&mut rows, |r| r);
        let order: Vec<(AlgoId, u64)> = rows.iter().map(|r| (r.algorithm, r.seed)).collect();
        assert_eq!(order, vec![(AlgoId::Afhc, 0), (AlgoId::Rhig, 5), (AlgoId::Rhig, 0), (AlgoId::Rhig, 1)]);
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        let last = &s[2];
        assert_eq!(last.seeds, 2);
        assert!((last.mean_regret - 3.0).abs() < 1e-15);
        assert!((last.stderr_regret - 1.0).abs() < 1e-15);
    }
}
