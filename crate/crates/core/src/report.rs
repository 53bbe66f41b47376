//! Ratio tables across horizons and their CSV/JSON forms.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::game::{opt_det_ratio, GameError};
use crate::lp::{opt_rand_ratio, LpError};
use crate::metric::ConfigSpace;
use crate::par::{self, Execution};
use crate::rational::{format_rational, serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(with = "serde_rational")]
    pub det: Rational,
    #[serde(with = "serde_rational")]
    pub rand_low: Rational,
    #[serde(with = "serde_rational")]
    pub rand_high: Rational,
    /// Wall-clock time for both solves; 0 unless timing was requested.
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("horizon {horizon}: {source}")]
    Lp { horizon: usize, source: LpError },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("unknown format {0:?} (expected csv or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub tolerance: Rational,
    pub var_cap: usize,
    pub timing: bool,
    pub exec: Execution,
}

/// One row per horizon `1..=t_max`; rows are solved independently.
pub fn sweep_horizons(
    space: &ConfigSpace,
    c0: usize,
    t_max: usize,
    opts: &SweepOptions,
) -> Result<RatioTable, ReportError> {
    if t_max == 0 {
        return Err(ReportError::ZeroHorizon);
    }
    let rows = par::map_range(opts.exec, t_max, |i| {
        let horizon = i + 1;
        let start = Instant::now();
        let det = opt_det_ratio(space, c0, horizon)?;
        let rand = opt_rand_ratio(space, c0, horizon, &opts.tolerance, opts.var_cap)
            .map_err(|source| ReportError::Lp { horizon, source })?;
        let runtime_ms = if opts.timing { start.elapsed().as_millis() as u64 } else { 0 };
        Ok(RatioRow {
            horizon,
            det: det.value,
            rand_low: rand.tau_low,
            rand_high: rand.tau_high,
            runtime_ms,
        })
    });
    Ok(RatioTable { rows: rows.into_iter().collect::<Result<_, ReportError>>()? })
}

pub fn emit(table: &RatioTable, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut s = String::from("T,det,rand_low,rand_high,runtime_ms\n");
            for r in &table.rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.horizon,
                    format_rational(&r.det),
                    format_rational(&r.rand_low),
                    format_rational(&r.rand_high),
                    r.runtime_ms
                ));
            }
            s.into_bytes()
        }
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(table).expect("table serializes");
            v.push(b'\n');
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Configuration, Metric};
    use crate::rational::{frac, int};

    fn sample() -> RatioTable {
        RatioTable {
            rows: vec![RatioRow {
                horizon: 2,
                det: int(2),
                rand_low: frac(1535, 1024),
                rand_high: frac(3, 2),
                runtime_ms: 0,
            }],
        }
    }

    #[test]
    fn csv_shape() {
        let text = String::from_utf8(emit(&sample(), Format::Csv)).unwrap();
        assert_eq!(text, "T,det,rand_low,rand_high,runtime_ms\n2,2,1535/1024,3/2,0\n");
        assert!(!text.contains("1.5"));
    }

    #[test]
    fn json_round_trip() {
        let bytes = emit(&sample(), Format::Json);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\"rand_high\": \"3/2\""));
        assert!(text.contains("\"T\": 2"));
        let back: RatioTable = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!(emit(&back, Format::Json), bytes);
    }

    #[test]
    fn unknown_format() {
        assert_eq!("xml".parse::<Format>(), Err(ReportError::UnknownFormat("xml".into())));
    }

    #[test]
    fn sweep_small() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = s.index_of(&Configuration::new(vec![0, 1])).unwrap();
        let opts = SweepOptions {
            tolerance: frac(1, 1024),
            var_cap: crate::lp::DEFAULT_VAR_CAP,
            timing: false,
            exec: Execution::default(),
        };
        let t = sweep_horizons(&s, c0, 2, &opts).unwrap();
        let det: Vec<_> = t.rows.iter().map(|r| r.det.clone()).collect();
        assert_eq!(det, vec![int(1), int(2)]);
        assert!(t.rows.iter().all(|r| r.rand_low <= r.det));

        let err = sweep_horizons(&s, c0, 2, &SweepOptions { var_cap: 10, ..opts }).unwrap_err();
        assert!(matches!(err, ReportError::Lp { horizon: 2, .. }));
    }
}
