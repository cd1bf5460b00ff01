use crate::error::Result;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TestRatio {
    pub test_id: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SkipEntry {
    pub test_id: String,
    pub reason: String,
}

/// Outcome of one check at one resolution.
#[derive(Clone, Debug, Default)]
pub struct SingleRun {
    pub per_test_ratios: Vec<TestRatio>,
    pub sup_ratio: f64,
    pub certificates: BTreeMap<String, f64>,
    pub skipped: Vec<SkipEntry>,
    pub gated: Option<String>,
}

impl SingleRun {
    pub fn gated(reason: String, certificates: BTreeMap<String, f64>) -> SingleRun {
        SingleRun {
            gated: Some(reason),
            certificates,
            ..SingleRun::default()
        }
    }

    pub fn push_ratio(&mut self, test_id: String, ratio: f64) {
        self.sup_ratio = self.sup_ratio.max(ratio);
        self.per_test_ratios.push(TestRatio { test_id, ratio });
    }

    pub fn push_skip(&mut self, test_id: String, reason: String) {
        self.skipped.push(SkipEntry { test_id, reason });
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct RefinementTrend {
    pub coarse_sup: f64,
    pub fine_sup: f64,
    #[serde(serialize_with = "lossless_f64")]
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioStatus {
    Pass,
    Fail,
    Gated(String),
}

/// Full record of one scenario: ratios, certificates, refinement trend,
/// verdict, and the exact configuration text that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub scenario: String,
    pub sup_ratio: f64,
    pub refinement: Option<RefinementTrend>,
    pub pass: Option<bool>,
    pub gated: Option<String>,
    pub tau: f64,
    pub per_test_ratios: Vec<TestRatio>,
    #[serde(serialize_with = "lossless_map")]
    pub certificates: BTreeMap<String, f64>,
    pub skipped: Vec<SkipEntry>,
    pub config_echo: String,
}

fn lossless_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format!("{v}"))
    }
}

fn lossless_map<S: Serializer>(
    m: &BTreeMap<String, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        if v.is_finite() {
            map.serialize_entry(k, v)?;
        } else {
            map.serialize_entry(k, &format!("{v}"))?;
        }
    }
    map.end()
}

impl InequalityReport {
    /// One-resolution report; passes when the sup ratio is finite.
    pub fn single(scenario: &str, run: SingleRun, tau: f64, config_echo: &str) -> InequalityReport {
        let pass = if run.gated.is_some() {
            None
        } else {
            Some(run.sup_ratio.is_finite())
        };
        InequalityReport {
            scenario: scenario.to_string(),
            sup_ratio: run.sup_ratio,
            refinement: None,
            pass,
            gated: run.gated,
            tau,
            per_test_ratios: run.per_test_ratios,
            certificates: run.certificates,
            skipped: run.skipped,
            config_echo: config_echo.to_string(),
        }
    }

    /// Merge a coarse and a fine run: the fine sup is the headline number,
    /// and the verdict requires the two sups to agree within tau.
    pub fn two_resolution(
        scenario: &str,
        coarse: SingleRun,
        fine: SingleRun,
        tau: f64,
        config_echo: &str,
    ) -> InequalityReport {
        if coarse.gated.is_some() || fine.gated.is_some() {
            let reason = coarse.gated.or(fine.gated).unwrap();
            let mut certificates = fine.certificates;
            for (k, v) in coarse.certificates {
                certificates.entry(format!("coarse.{k}")).or_insert(v);
            }
            return InequalityReport {
                scenario: scenario.to_string(),
                sup_ratio: f64::NAN,
                refinement: None,
                pass: None,
                gated: Some(reason),
                tau,
                per_test_ratios: Vec::new(),
                certificates,
                skipped: Vec::new(),
                config_echo: config_echo.to_string(),
            };
        }
        let drift = if coarse.sup_ratio == 0.0 && fine.sup_ratio == 0.0 {
            1.0
        } else {
            fine.sup_ratio / coarse.sup_ratio
        };
        let stable = drift.is_finite() && drift >= 1.0 / (1.0 + tau) && drift <= 1.0 + tau;
        let pass = fine.sup_ratio.is_finite() && coarse.sup_ratio.is_finite() && stable;
        let mut certificates = fine.certificates;
        for (k, v) in coarse.certificates {
            certificates.entry(format!("coarse.{k}")).or_insert(v);
        }
        let mut skipped = fine.skipped;
        for s in coarse.skipped {
            skipped.push(SkipEntry {
                test_id: format!("coarse/{}", s.test_id),
                reason: s.reason,
            });
        }
        InequalityReport {
            scenario: scenario.to_string(),
            sup_ratio: fine.sup_ratio,
            refinement: Some(RefinementTrend {
                coarse_sup: coarse.sup_ratio,
                fine_sup: fine.sup_ratio,
                drift,
            }),
            pass: Some(pass),
            gated: None,
            tau,
            per_test_ratios: fine.per_test_ratios,
            certificates,
            skipped,
            config_echo: config_echo.to_string(),
        }
    }

    pub fn status(&self) -> ScenarioStatus {
        match (&self.gated, self.pass) {
            (Some(reason), _) => ScenarioStatus::Gated(reason.clone()),
            (None, Some(true)) => ScenarioStatus::Pass,
            _ => ScenarioStatus::Fail,
        }
    }
}

fn csv_field(v: f64) -> String {
    format!("{v}")
}

pub fn reports_to_csv(reports: &[InequalityReport]) -> String {
    let mut out = String::from("scenario,test_id,ratio,certificates\n");
    for rep in reports {
        let certs: Vec<String> = rep
            .certificates
            .iter()
            .map(|(k, v)| format!("{k}={}", csv_field(*v)))
            .collect();
        let certs = certs.join(";");
        for row in &rep.per_test_ratios {
            out.push_str(&format!(
                "{},{},{},{}\n",
                rep.scenario,
                row.test_id,
                csv_field(row.ratio),
                certs
            ));
        }
    }
    out
}

/// Write report.json (full) and ratios.csv (flat) into the directory.
pub fn emit_report(reports: &[InequalityReport], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(reports)?;
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, json.as_bytes())?;
    let csv_path = dir.join("ratios.csv");
    std::fs::write(&csv_path, reports_to_csv(reports).as_bytes())?;
    Ok((json_path, csv_path))
}
