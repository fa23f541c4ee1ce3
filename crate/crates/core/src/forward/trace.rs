use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSource {
    Laplace,
    MlClosedForm,
    L1Scheme,
    Synthetic,
    /// Read from a CSV file.
    File,
}

/// Samples `u(x0, t_k)` at a single monitoring point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTrace {
    pub x0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: TraceSource,
}

impl ObservationTrace {
    pub fn new(x0: f64, times: Vec<f64>, values: Vec<f64>, meta: TraceSource) -> Result<Self> {
        let trace = Self { x0, times, values, meta };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::GridMismatch { expected: self.times.len(), got: self.values.len() });
        }
        if self.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParameter("trace times must be finite and nonnegative".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("trace times must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("trace values must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at `t = 0` when the trace carries it.
    pub fn initial_value(&self) -> Option<f64> {
        match self.times.first() {
            Some(&t) if t == 0.0 => Some(self.values[0]),
            _ => None,
        }
    }

    /// `(t, u)` pairs with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| (*t, *v))
            .unzip()
    }

    /// CSV with header `t,u` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u\n");
        for (t, u) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.16e},{u:.16e}");
        }
        out
    }

    pub fn from_csv(text: &str, x0: f64, meta: TraceSource) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("t,u") => {}
            other => return Err(Error::Config(format!("trace CSV must start with header `t,u`, found {other:?}"))),
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.map(str::trim)
                    .ok_or_else(|| Error::Config(format!("trace row {} has fewer than two columns", row + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("trace row {}: {e}", row + 1)))
            };
            times.push(parse(cols.next())?);
            values.push(parse(cols.next())?);
        }
        Self::new(x0, times, values, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let tr = ObservationTrace::new(
            1.0,
            vec![0.0, 1e-6, 0.1, 1.0 / 3.0],
            vec![1.0, -2.5e-300, std::f64::consts::PI, 1e10 / 7.0],
            TraceSource::Synthetic,
        )
        .unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,u\n0.0000000000000000e0,1.0000000000000000e0\n"));
        let back = ObservationTrace::from_csv(&csv, 1.0, TraceSource::Synthetic).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ObservationTrace::new(1.0, vec![0.1, 0.1], vec![1.0, 1.0], TraceSource::Synthetic).is_err());
        assert!(ObservationTrace::new(1.0, vec![0.1], vec![f64::NAN], TraceSource::Synthetic).is_err());
        assert!(ObservationTrace::from_csv("x,y\n1,2\n", 1.0, TraceSource::Synthetic).is_err());
        assert!(ObservationTrace::from_csv("t,u\n1\n", 1.0, TraceSource::Synthetic).is_err());
    }
}
