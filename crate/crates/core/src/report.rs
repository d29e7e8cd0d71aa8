//! CSV emission for analysis results.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{schedulability_check, AnalysisReport, FlowAnalysis};
use crate::netcalc::to_f64;
use crate::platform::{Config, FlowId};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub flow_id: FlowId,
    pub method: String,
    #[serde(rename = "T_P")]
    pub t_p: f64,
    #[serde(rename = "T_hp")]
    pub t_hp: f64,
    #[serde(rename = "T_sp")]
    pub t_sp: f64,
    #[serde(rename = "T_lp")]
    pub t_lp: f64,
    #[serde(rename = "T_IB")]
    pub t_ib: f64,
    #[serde(rename = "R_f")]
    pub rate: f64,
    #[serde(rename = "D_f")]
    pub delay: f64,
    pub period: u64,
    pub schedulable: bool,
    #[serde(rename = "I_DB")]
    pub i_db: usize,
    #[serde(rename = "I_IB")]
    pub i_ib: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentationRow {
    pub flow_id: FlowId,
    pub method: String,
    pub n_e2e: u64,
    pub n_iter: u64,
    /// Seconds.
    pub dt_total: f64,
    pub dt_ib: f64,
    pub dt_e2e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub flow_id: FlowId,
    #[serde(rename = "D_bata")]
    pub delay_bata: Option<f64>,
    #[serde(rename = "D_gbata")]
    pub delay_gbata: Option<f64>,
    /// `D_gbata / D_bata`.
    pub ratio: Option<f64>,
    #[serde(rename = "T_IB_bata")]
    pub t_ib_bata: Option<f64>,
    #[serde(rename = "T_IB_gbata")]
    pub t_ib_gbata: Option<f64>,
    #[serde(rename = "I_IB_bata")]
    pub i_ib_bata: Option<usize>,
    #[serde(rename = "I_IB_gbata")]
    pub i_ib_gbata: Option<usize>,
    pub n_e2e_bata: Option<u64>,
    pub n_e2e_gbata: Option<u64>,
    /// False whenever some flow releases more than one packet per burst.
    pub bata_cpq_safe: bool,
}

pub fn bound_rows(report: &AnalysisReport, config: &Config) -> Vec<BoundRow> {
    let schedulable = schedulability_check(report, config);
    report
        .flows
        .iter()
        .zip(schedulable)
        .map(|(a, (_, ok))| {
            let b = &a.bound;
            BoundRow {
                flow_id: a.flow,
                method: report.method.name().to_string(),
                t_p: to_f64(&b.t_p),
                t_hp: to_f64(&b.t_hp),
                t_sp: to_f64(&b.t_sp),
                t_lp: to_f64(&b.t_lp),
                t_ib: to_f64(&b.t_ib),
                rate: to_f64(&b.rate),
                delay: to_f64(&b.delay),
                period: config.flow(a.flow).map_or(0, |f| f.period),
                schedulable: ok,
                i_db: a.db.len(),
                i_ib: a.ib.len(),
            }
        })
        .collect()
}

pub fn instrumentation_rows(report: &AnalysisReport) -> Vec<InstrumentationRow> {
    report
        .flows
        .iter()
        .map(|a| InstrumentationRow {
            flow_id: a.flow,
            method: report.method.name().to_string(),
            n_e2e: a.counters.n_e2e,
            n_iter: a.counters.n_iter,
            dt_total: a.counters.dt_total.as_secs_f64(),
            dt_ib: a.counters.dt_ib.as_secs_f64(),
            dt_e2e: a.counters.dt_e2e.as_secs_f64(),
        })
        .collect()
}

pub fn comparison_rows(bata: &AnalysisReport, gbata: &AnalysisReport, config: &Config) -> Vec<ComparisonRow> {
    let bata_cpq_safe = config.flows.iter().all(|f| f.burst <= 1);
    config
        .flows
        .iter()
        .map(|f| {
            let b = bata.flow(f.id);
            let g = gbata.flow(f.id);
            let delay = |a: Option<&FlowAnalysis>| a.map(|a| to_f64(&a.bound.delay));
            let ratio = match (b, g) {
                (Some(b), Some(g)) if b.bound.delay > num_traits::Zero::zero() => {
                    Some(to_f64(&(&g.bound.delay / &b.bound.delay)))
                }
                _ => None,
            };
            ComparisonRow {
                flow_id: f.id,
                delay_bata: delay(b),
                delay_gbata: delay(g),
                ratio,
                t_ib_bata: b.map(|a| to_f64(&a.bound.t_ib)),
                t_ib_gbata: g.map(|a| to_f64(&a.bound.t_ib)),
                i_ib_bata: b.map(|a| a.ib.len()),
                i_ib_gbata: g.map(|a| a.ib.len()),
                n_e2e_bata: b.map(|a| a.counters.n_e2e),
                n_e2e_gbata: g.map(|a| a.counters.n_e2e),
                bata_cpq_safe,
            }
        })
        .collect()
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_bounds<R: Read>(input: R) -> Result<Vec<BoundRow>, ReportError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|row| row.map_err(ReportError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{analyze_all, AnalysisOptions, Method};
    use crate::fixtures::cpq_chain;

    #[test]
    fn bounds_round_trip() {
        let cfg = cpq_chain(2);
        let report = analyze_all(&cfg, AnalysisOptions::new(Method::Gbata), None);
        let rows = bound_rows(&report, &cfg);
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("flow_id,method,T_P,T_hp,T_sp,T_lp,T_IB,R_f,D_f,period,schedulable,I_DB,I_IB\n"));
        assert_eq!(read_bounds(buf.as_slice()).unwrap(), rows);
        assert_eq!(rows[0].t_ib, 11.0);
        assert_eq!(rows[0].i_ib, 2);
    }

    #[test]
    fn instrumentation_header() {
        let cfg = cpq_chain(1);
        let report = analyze_all(&cfg, AnalysisOptions::new(Method::Bata), None);
        let mut buf = Vec::new();
        write_rows(&instrumentation_rows(&report), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("flow_id,method,n_e2e,n_iter,dt_total,dt_ib,dt_e2e\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn comparison_flags_bursty_configs() {
        for (burst, safe) in [(1, true), (2, false)] {
            let cfg = cpq_chain(burst);
            let b = analyze_all(&cfg, AnalysisOptions::new(Method::Bata), None);
            let g = analyze_all(&cfg, AnalysisOptions::new(Method::Gbata), None);
            let rows = comparison_rows(&b, &g, &cfg);
            assert_eq!(rows.len(), 3);
            assert!(rows.iter().all(|r| r.bata_cpq_safe == safe));
            assert!(rows[0].ratio.unwrap() > 1.0);
        }
    }
}
