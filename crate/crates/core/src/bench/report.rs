use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{mean_se, SuiteDetails, SuiteReport};
use crate::error::{Error, Result};
use crate::io::write_files_atomic;
use crate::svg::{error_bar_chart, Panel, Series};

/// One line of `results.csv`: one trial, method and iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub method: String,
    pub iter: usize,
    pub u_obs_dense: f64,
    pub smoothness: f64,
    pub success: bool,
    pub support_size: usize,
    pub ms: f64,
}

/// Aggregate of one method at one iteration across trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub iter: usize,
    pub n: usize,
    pub u_obs_dense_mean: f64,
    pub u_obs_dense_se: f64,
    pub smoothness_mean: f64,
    pub smoothness_se: f64,
    pub success_rate: f64,
    pub support_size_mean: f64,
}

impl SuiteReport {
    /// Rows for iterations `1..=n` of every run, trials in order.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for t in &self.trials {
            for m in &t.methods {
                for it in m.iterates.iter().skip(1) {
                    rows.push(ResultRow {
                        trial: t.trial,
                        method: m.method.clone(),
                        iter: it.iter,
                        u_obs_dense: it.u_obs_dense,
                        smoothness: it.smoothness,
                        success: it.success(),
                        support_size: it.support_size,
                        ms: if self.config.timing { it.ms } else { 0.0 },
                    });
                }
            }
        }
        rows
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(rows)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("results.csv: {e}")))
}

/// Per-(method, iteration) means and standard errors. Methods keep their
/// order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let k = match order.iter().position(|m| *m == r.method) {
            Some(k) => k,
            None => {
                order.push(&r.method);
                order.len() - 1
            }
        };
        groups.entry((k, r.iter)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((k, iter), g)| {
            let col = |f: fn(&ResultRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (u, u_se) = mean_se(&col(|r| r.u_obs_dense));
            let (s, s_se) = mean_se(&col(|r| r.smoothness));
            let n = g.len();
            SummaryRow {
                method: order[k].to_string(),
                iter,
                n,
                u_obs_dense_mean: u,
                u_obs_dense_se: u_se,
                smoothness_mean: s,
                smoothness_se: s_se,
                success_rate: g.iter().filter(|r| r.success).count() as f64 / n as f64,
                support_size_mean: g.iter().map(|r| r.support_size as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(&summarize(rows))
}

fn chart(title: &str, summary: &[SummaryRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in summary {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let series = |f: fn(&SummaryRow) -> (f64, f64)| -> Vec<Series> {
        methods
            .iter()
            .map(|m| Series {
                name: m.to_string(),
                points: summary
                    .iter()
                    .filter(|r| r.method == *m)
                    .map(|r| {
                        let (mean, se) = f(r);
                        (r.iter as f64, mean, se)
                    })
                    .collect(),
            })
            .collect()
    };
    let panels = [
        Panel {
            title: "obstacle cost (dense)".into(),
            x_label: "iteration".into(),
            y_label: "U_obs".into(),
            series: series(|r| (r.u_obs_dense_mean, r.u_obs_dense_se)),
        },
        Panel {
            title: "smoothness (waypoint metric)".into(),
            x_label: "iteration".into(),
            y_label: "smoothness".into(),
            series: series(|r| (r.smoothness_mean, r.smoothness_se)),
        },
    ];
    error_bar_chart(title, &panels)
}

fn details_csv(details: &SuiteDetails) -> Option<(&'static str, String)> {
    match details {
        SuiteDetails::KernelComparison => None,
        SuiteDetails::CostFormulation(g) => Some((
            "gaps.csv",
            format!(
                "trials,mean_max,se_max,mean_quadrature,se_quadrature,max_vs_quadrature,max_vs_quadrature_ci_lo,max_vs_quadrature_ci_hi,quadrature_vs_max,quadrature_vs_max_ci_lo,quadrature_vs_max_ci_hi,max_wins\n\
                 {},{},{},{},{},{},{},{},{},{},{},{}\n",
                g.trials,
                g.mean_max,
                g.se_max,
                g.mean_quadrature,
                g.se_quadrature,
                g.max_vs_quadrature,
                g.max_vs_quadrature_ci.0,
                g.max_vs_quadrature_ci.1,
                g.quadrature_vs_max,
                g.quadrature_vs_max_ci.0,
                g.quadrature_vs_max_ci.1,
                g.max_wins
            ),
        )),
        SuiteDetails::LargeStep(outcomes) => {
            let mut s = String::from("method,lambda,iterations_to_clear,u_obs_dense,smoothness,velocity_tv\n");
            for o in outcomes {
                let clear = o.iterations_to_clear.map_or_else(|| "none".to_string(), |n| n.to_string());
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    o.method, o.lambda, clear, o.u_obs_dense, o.smoothness, o.velocity_tv
                ));
            }
            Some(("large_step.csv", s))
        }
    }
}

/// Write `results.csv`, `summary.csv`, the suite plot, any suite-specific
/// table, the failure list and `effective_config.toml` into `out_dir`.
/// Nothing is written unless every file could be produced.
pub fn emit_report(report: &SuiteReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = report.rows();
    if rows.is_empty() {
        return Err(Error::Bench("no completed trials to report".into()));
    }
    let summary = summarize(&rows);
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (out_dir.join("results.csv"), results_csv(&rows)?.into_bytes()),
        (out_dir.join("summary.csv"), to_csv(&summary)?.into_bytes()),
        (
            out_dir.join(format!("{}.svg", report.suite.name())),
            chart(report.suite.name(), &summary).into_bytes(),
        ),
        (
            out_dir.join("effective_config.toml"),
            toml::to_string(&report.config)
                .map_err(|e| Error::Parse(e.to_string()))?
                .into_bytes(),
        ),
    ];
    if let Some((name, text)) = details_csv(&report.details) {
        files.push((out_dir.join(name), text.into_bytes()));
    }
    if !report.failures.is_empty() {
        let mut s = String::from("trial,message\n");
        for f in &report.failures {
            s.push_str(&format!("{},\"{}\"\n", f.trial, f.message.replace('"', "'")));
        }
        files.push((out_dir.join("failures.csv"), s.into_bytes()));
    }
    write_files_atomic(&files)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, method: &str, iter: usize, u: f64) -> ResultRow {
        ResultRow {
            trial,
            method: method.into(),
            iter,
            u_obs_dense: u,
            smoothness: 2.0 * u,
            success: u < 0.25,
            support_size: 4 * iter,
            ms: 0.0,
        }
    }

    #[test]
    fn summary_matches_hand_aggregation() {
        let rows: Vec<_> = (0..5)
            .flat_map(|t| {
                let u = 0.1 * (t + 1) as f64;
                [row(t, "b", 1, u), row(t, "a", 1, u * u)]
            })
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].method, "b");
        let us: Vec<f64> = (0..5).map(|t| 0.1 * (t + 1) as f64).collect();
        let mean = us.iter().sum::<f64>() / 5.0;
        let sd = (us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((s[0].u_obs_dense_mean - mean).abs() < 1e-15);
        assert!((s[0].u_obs_dense_se - sd / 5f64.sqrt()).abs() < 1e-15);
        assert!((s[0].success_rate - 0.4).abs() < 1e-15);
        assert_eq!(s[0].n, 5);
    }

    #[test]
    fn csv_round_trip_preserves_summary() {
        let rows: Vec<_> = (0..3)
            .flat_map(|t| (1..=4).map(move |i| row(t, "gaussian", i, 1.0 / (3.0 + t as f64 + i as f64))))
            .collect();
        let text = results_csv(&rows).unwrap();
        assert!(text.starts_with("trial,method,iter,u_obs_dense,smoothness,success,support_size,ms\n"));
        let back = parse_results_csv(&text).unwrap();
        assert_eq!(back, rows);
        assert_eq!(summary_csv(&back).unwrap(), summary_csv(&rows).unwrap());
    }
}
