use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::problem::{sq_dist, ParamTrajectory};

/// Every prediction θ_{τ|s} an agent could receive, for 1 ≤ τ ≤ T and
/// 0 ≤ s < τ, together with the true parameters.
///
/// Reads follow the convention θ_{τ|s} = θ_{τ|0} for s ≤ 0 and θ_{τ|s} = θ_τ
/// for s ≥ τ, so δ_t(k) = δ_t(t) for every k ≥ t.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    truth: ParamTrajectory,
    // row τ starts at τ(τ−1)/2 and holds s = 0..τ−1, each entry `dim` wide
    preds: Vec<f64>,
}

fn row_start(tau: usize) -> usize {
    tau * (tau - 1) / 2
}

impl PredictionTable {
    /// Builds a table from `f(τ, s) = θ_{τ|s}` for 1 ≤ τ ≤ T, 0 ≤ s < τ.
    pub fn from_fn<F>(truth: ParamTrajectory, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let horizon = truth.horizon();
        let dim = truth.dim();
        let mut preds = Vec::with_capacity(row_start(horizon + 1) * dim);
        for tau in 1..=horizon {
            for s in 0..tau {
                let v = f(tau, s);
                if v.len() != dim {
                    return Err(Error::Dimension { expected: dim, got: v.len() });
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::invalid(format!("non-finite prediction {bad} for stage {tau}")));
                }
                preds.extend_from_slice(&v);
            }
        }
        Ok(PredictionTable { truth, preds })
    }

    /// Predictions that always equal the truth.
    pub fn exact(truth: ParamTrajectory) -> Self {
        let mut preds = Vec::with_capacity(row_start(truth.horizon() + 1) * truth.dim());
        for (i, th) in truth.iter().enumerate() {
            for _ in 0..=i {
                preds.extend_from_slice(th);
            }
        }
        PredictionTable { truth, preds }
    }

    pub fn truth(&self) -> &ParamTrajectory {
        &self.truth
    }

    pub fn horizon(&self) -> usize {
        self.truth.horizon()
    }

    pub fn dim(&self) -> usize {
        self.truth.dim()
    }

    /// θ_{τ|s}: the prediction of θ_τ available after observing θ_1..θ_s.
    pub fn prediction(&self, tau: usize, s: i64) -> &[f64] {
        assert!(tau >= 1 && tau <= self.horizon(), "stage {tau} out of range");
        if s >= tau as i64 {
            return self.truth.stage(tau);
        }
        let s = s.max(0) as usize;
        let dim = self.dim();
        let at = (row_start(tau) + s) * dim;
        &self.preds[at..at + dim]
    }

    /// The whole trajectory as predicted after stage `s`: (θ_{τ|s})_τ.
    pub fn predicted_trajectory(&self, s: i64) -> ParamTrajectory {
        let values = (1..=self.horizon()).flat_map(|tau| self.prediction(tau, s).to_vec()).collect();
        ParamTrajectory::new(self.dim(), values).expect("table entries are finite")
    }

    /// The stacked k-step errors δ(k), with δ_t(k) = θ_t − θ_{t|t−k}.
    pub fn delta(&self, k: usize) -> Result<Vec<f64>> {
        if k < 1 {
            return Err(Error::invalid("lookahead k must be at least 1"));
        }
        let mut out = Vec::with_capacity(self.truth.stacked().len());
        for tau in 1..=self.horizon() {
            let pred = self.prediction(tau, tau as i64 - k as i64);
            out.extend(self.truth.stage(tau).iter().zip(pred).map(|(a, b)| a - b));
        }
        Ok(out)
    }

    /// θ − δ(j) = (θ_{t|t−j})_t, the parameters seen by an update that is j
    /// stages ahead of its target. j = 0 gives the truth.
    pub fn lagged_trajectory(&self, j: usize) -> ParamTrajectory {
        let values =
            (1..=self.horizon()).flat_map(|tau| self.prediction(tau, tau as i64 - j as i64).to_vec()).collect();
        ParamTrajectory::new(self.dim(), values).expect("table entries are finite")
    }

    /// ‖δ(k)‖² for k = 1..=k_max.
    pub fn delta_sq_norms(&self, k_max: usize) -> Vec<f64> {
        (1..=k_max)
            .map(|k| {
                let lagged = self.lagged_trajectory(k);
                sq_dist(self.truth.stacked(), lagged.stacked())
            })
            .collect()
    }

    /// Whether ‖δ(k)‖ ≥ ‖δ(k−1)‖ for k = 2..T on this realization.
    /// Informational; the model does not guarantee it pathwise.
    pub fn errors_nondecreasing(&self) -> bool {
        self.delta_sq_norms(self.horizon()).windows(2).all(|w| w[1] >= w[0])
    }

    /// Adds a known component to the truth and to every prediction.
    pub fn offset(&self, known: &ParamTrajectory) -> Result<Self> {
        if known.horizon() != self.horizon() {
            return Err(Error::Horizon { expected: self.horizon(), got: known.horizon() });
        }
        if known.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: known.dim() });
        }
        let truth_values = self.truth.stacked().iter().zip(known.stacked()).map(|(a, b)| a + b).collect();
        let truth = ParamTrajectory::new(self.dim(), truth_values)?;
        Self::from_fn(truth, |tau, s| {
            self.prediction(tau, s as i64).iter().zip(known.stage(tau)).map(|(a, b)| a + b).collect()
        })
    }

    /// Writes rows `t,tau,component,value` for θ_{τ|t−1}, 1 ≤ t ≤ τ + 1; the
    /// row with t = τ + 1 carries the true θ_τ.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "tau", "component", "value"])?;
        for tau in 1..=self.horizon() {
            for t in 1..=tau + 1 {
                for (c, v) in self.prediction(tau, t as i64 - 1).iter().enumerate() {
                    w.write_record([t.to_string(), tau.to_string(), c.to_string(), format!("{v:.16e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the format written by [`PredictionTable::write_csv`]. Every
    /// (t, τ, component) cell must appear exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "tau", "component", "value"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "expected header t,tau,component,value, got {}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut cells = Vec::new();
        let (mut horizon, mut dim) = (0usize, 0usize);
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Parse { line, msg: format!("expected 4 fields, got {}", rec.len()) });
            }
            let int = |j: usize| -> Result<usize> {
                rec[j]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse { line, msg: format!("field {j} ({:?}): {e}", &rec[j]) })
            };
            let (t, tau, c) = (int(0)?, int(1)?, int(2)?);
            let value: f64 =
                rec[3].parse().map_err(|e| Error::Parse { line, msg: format!("value {:?}: {e}", &rec[3]) })?;
            if !value.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value {value}") });
            }
            if tau == 0 || t == 0 || t > tau + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("need 1 <= t <= tau + 1 and tau >= 1, got t={t} tau={tau}"),
                });
            }
            // guard the dense allocation below against absurd indices
            if tau > 100_000 || c > 10_000 {
                return Err(Error::Parse { line, msg: "stage or component index too large".into() });
            }
            horizon = horizon.max(tau);
            dim = dim.max(c + 1);
            cells.push((line, t, tau, c, value));
        }
        if horizon == 0 {
            return Err(Error::Parse { line: 1, msg: "empty prediction table".into() });
        }
        let expected = (row_start(horizon + 1) + horizon) * dim;
        if cells.len() != expected {
            return Err(Error::Parse {
                line: cells.len() + 1,
                msg: format!("expected {expected} cells for T={horizon}, p={dim}, got {}", cells.len()),
            });
        }
        // slots: predictions (τ, s) then truth per τ
        let mut slots = vec![None; expected];
        let truth_base = row_start(horizon + 1) * dim;
        for (line, t, tau, c, value) in cells {
            let at = if t == tau + 1 { truth_base + (tau - 1) * dim + c } else { (row_start(tau) + t - 1) * dim + c };
            if slots[at].replace(value).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate cell t={t} tau={tau} component={c}") });
            }
        }
        let values: Vec<f64> = slots.into_iter().map(|v| v.expect("count matched and no duplicates")).collect();
        let truth = ParamTrajectory::new(dim, values[truth_base..].to_vec())?;
        Ok(PredictionTable { truth, preds: values[..truth_base].to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    fn ramp_table() -> PredictionTable {
        let truth = ParamTrajectory::scalar(vec![1.0, 2.0, 3.0]).unwrap();
        // θ_{τ|s} = τ − (τ − s)/10
        PredictionTable::from_fn(truth, |tau, s| vec![tau as f64 - (tau - s) as f64 / 10.0]).unwrap()
    }

    #[test]
    fn exact_predictions_have_zero_error() {
        let t = PredictionTable::exact(ParamTrajectory::scalar(vec![1.0, -1.0, 4.0]).unwrap());
        for k in 1..5 {
            assert!(t.delta(k).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn conventions_outside_the_stored_range() {
        let t = ramp_table();
        assert_eq!(t.prediction(3, -4), t.prediction(3, 0));
        assert_eq!(t.prediction(2, 2), &[2.0]);
        assert_eq!(t.prediction(2, 9), &[2.0]);
        assert!(t.delta(0).is_err());
    }

    #[test]
    fn truncation_beyond_horizon() {
        let t = ramp_table();
        let full = t.delta(3).unwrap();
        for k in 3..8 {
            assert_eq!(t.delta(k).unwrap(), full);
        }
        // δ_t(k) = (min(k, t))/10
        close(&t.delta(2).unwrap(), &[0.1, 0.2, 0.2]);
        assert!(t.errors_nondecreasing());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let truth = ParamTrajectory::from_stages(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]]).unwrap();
        let t = PredictionTable::from_fn(truth, |tau, s| vec![tau as f64 / 7.0, (s as f64).exp()]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = PredictionTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_incomplete_and_duplicate_tables() {
        let mut buf = Vec::new();
        ramp_table().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(3);
        assert!(PredictionTable::read_csv(lines.join("\n").as_bytes()).is_err());
        lines.insert(3, lines[2]);
        assert!(matches!(PredictionTable::read_csv(lines.join("\n").as_bytes()), Err(Error::Parse { .. })));
        assert!(PredictionTable::read_csv("t,tau,component,value\n".as_bytes()).is_err());
        assert!(PredictionTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn offset_shifts_truth_and_predictions() {
        let t = ramp_table();
        let d = ParamTrajectory::scalar(vec![10.0, 20.0, 30.0]).unwrap();
        let s = t.offset(&d).unwrap();
        close(s.prediction(3, 1), &[33.0 - 0.2]);
        close(&s.delta(2).unwrap(), &t.delta(2).unwrap());
    }
}
