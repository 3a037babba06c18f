use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Pixels the metrics are computed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricRegion {
    #[default]
    FullFrame,
    /// Only the entry's foreground mask. Perceptual and embedding scores
    /// see both images with the outside set to black.
    Masked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMetrics {
    pub psnr_db: f64,
    pub lpips: f64,
    pub clip_sim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EntryMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Means over successful entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub psnr_db: f64,
    pub lpips: f64,
    pub clip_sim: f64,
}

impl Aggregates {
    /// `None` when nothing succeeded.
    pub fn of<'a>(metrics: impl IntoIterator<Item = &'a EntryMetrics>) -> Option<Aggregates> {
        let mut n = 0usize;
        let mut sums = [0.0f64; 3];
        for m in metrics {
            n += 1;
            sums[0] += m.psnr_db;
            sums[1] += m.lpips;
            sums[2] += m.clip_sim;
        }
        (n > 0).then(|| Aggregates {
            count: n,
            psnr_db: sums[0] / n as f64,
            lpips: sums[1] / n as f64,
            clip_sim: sums[2] / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Role → `id@version` of every backend involved.
    pub pipeline: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
    pub metric_region: MetricRegion,
    pub manifest_digest: String,
    pub timestamp: String,
    pub entries: Vec<EntryReport>,
    pub aggregates: Option<Aggregates>,
    pub failed: usize,
    /// False when more than half of the entries failed.
    pub valid: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_material: BTreeMap<String, Aggregates>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_mesh: BTreeMap<String, Aggregates>,
}

impl EvalReport {
    pub(crate) fn assemble(
        pipeline: BTreeMap<String, String>,
        params: BTreeMap<String, String>,
        metric_region: MetricRegion,
        manifest_digest: String,
        entries: Vec<EntryReport>,
        breakdowns: bool,
    ) -> EvalReport {
        let ok = || entries.iter().filter_map(|e| e.metrics.as_ref().map(|m| (e, m)));
        let failed = entries.len() - ok().count();
        let group = |key: fn(&EntryReport) -> Option<&String>| {
            let mut groups: BTreeMap<String, Vec<&EntryMetrics>> = BTreeMap::new();
            if breakdowns {
                for (e, m) in ok() {
                    if let Some(k) = key(e) {
                        groups.entry(k.clone()).or_default().push(m);
                    }
                }
            }
            groups
                .into_iter()
                .filter_map(|(k, ms)| Aggregates::of(ms).map(|a| (k, a)))
                .collect::<BTreeMap<_, _>>()
        };
        let by_material = group(|e| e.material.as_ref());
        let by_mesh = group(|e| e.mesh.as_ref());
        EvalReport {
            aggregates: Aggregates::of(ok().map(|(_, m)| m)),
            valid: failed * 2 <= entries.len(),
            failed,
            pipeline,
            params,
            metric_region,
            manifest_digest,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            entries,
            by_material,
            by_mesh,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let method = self.pipeline.get("generator").map(String::as_str).unwrap_or("pipeline");
        let _ = writeln!(out, "{:<28} {:>9} {:>9} {:>9}", "Method", "PSNR↑", "LPIPS↓", "CLIP↑");
        let row = |out: &mut String, name: &str, a: Option<&Aggregates>| {
            let _ = match a {
                Some(a) => writeln!(
                    out,
                    "{:<28} {:>9.3} {:>9.4} {:>9.4}",
                    name, a.psnr_db, a.lpips, a.clip_sim
                ),
                None => writeln!(out, "{:<28} {:>9} {:>9} {:>9}", name, "-", "-", "-"),
            };
        };
        row(&mut out, method, self.aggregates.as_ref());
        for (title, groups) in [("material", &self.by_material), ("mesh", &self.by_mesh)] {
            if groups.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\nper {title}:");
            for (k, a) in groups {
                row(&mut out, &format!("  {k}"), Some(a));
            }
        }
        let _ = writeln!(
            out,
            "\nentries: {}  failed: {}  region: {}  valid: {}",
            self.entries.len(),
            self.failed,
            match self.metric_region {
                MetricRegion::FullFrame => "full-frame",
                MetricRegion::Masked => "masked",
            },
            self.valid
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, material: &str, m: Option<(f64, f64, f64)>) -> EntryReport {
        EntryReport {
            id: id.into(),
            material: Some(material.into()),
            mesh: None,
            status: if m.is_some() {
                EntryStatus::Ok
            } else {
                EntryStatus::Failed
            },
            metrics: m.map(|(p, l, c)| EntryMetrics {
                psnr_db: p,
                lpips: l,
                clip_sim: c,
            }),
            request_digest: None,
            output_digest: None,
            error: m.is_none().then(|| "boom".to_string()),
        }
    }

    #[test]
    fn aggregates_exclude_failures() {
        let entries = vec![
            entry("a", "wood", Some((20.0, 0.1, 0.8))),
            entry("b", "wood", Some((30.0, 0.3, 0.9))),
            entry("c", "gold", None),
        ];
        let r = EvalReport::assemble(
            BTreeMap::new(),
            BTreeMap::new(),
            MetricRegion::FullFrame,
            "d".into(),
            entries,
            true,
        );
        let a = r.aggregates.unwrap();
        assert_eq!(a.count, 2);
        assert_eq!(a.psnr_db, 25.0);
        assert!((a.lpips - 0.2).abs() < 1e-15);
        assert_eq!(r.failed, 1);
        assert!(r.valid);
        assert_eq!(r.by_material.len(), 1);
        assert!(r.render_table().contains("25.000"));
    }

    #[test]
    fn majority_failure_invalidates() {
        let entries = vec![
            entry("a", "x", None),
            entry("b", "x", None),
            entry("c", "x", Some((1.0, 0.0, 1.0))),
        ];
        let r = EvalReport::assemble(
            BTreeMap::new(),
            BTreeMap::new(),
            MetricRegion::FullFrame,
            "d".into(),
            entries,
            false,
        );
        assert!(!r.valid);
        assert!(r.by_material.is_empty());
        let half = vec![entry("a", "x", None), entry("b", "x", Some((1.0, 0.0, 1.0)))];
        let r = EvalReport::assemble(
            BTreeMap::new(),
            BTreeMap::new(),
            MetricRegion::FullFrame,
            "d".into(),
            half,
            false,
        );
        assert!(r.valid);
    }
}
