use serde::{Deserialize, Serialize};

/// Metrics and bookkeeping for one (seed, corruption fraction, method) run.
///
/// Non-finite floats are written as the strings `inf`, `-inf` and `NaN` so
/// that diverged runs survive a round trip through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_name: String,
    pub seed: u64,
    pub corruption_fraction: f64,
    pub method: String,
    /// Trajectory error needs per-step estimates and is empty when none
    /// were recorded.
    pub te_translation_mean: Option<f64>,
    pub te_translation_sd: Option<f64>,
    pub te_rotation_mean_deg: Option<f64>,
    pub te_rotation_sd_deg: Option<f64>,
    #[serde(with = "lenient_f64")]
    pub me_translation_mean: f64,
    #[serde(with = "lenient_f64")]
    pub me_translation_sd: f64,
    #[serde(with = "lenient_f64")]
    pub me_rotation_mean_deg: f64,
    #[serde(with = "lenient_f64")]
    pub me_rotation_sd_deg: f64,
    #[serde(with = "lenient_f64")]
    pub rme_translation_mean: f64,
    #[serde(with = "lenient_f64")]
    pub rme_translation_sd: f64,
    #[serde(with = "lenient_f64")]
    pub rme_rotation_mean_deg: f64,
    #[serde(with = "lenient_f64")]
    pub rme_rotation_sd_deg: f64,
    #[serde(with = "lenient_f64")]
    pub rme_mean_pair_distance: f64,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub corrupted_before: usize,
    pub corrupted_after: usize,
    pub converged: bool,
    pub prune_seconds: f64,
    pub optimize_seconds: f64,
}

impl RunReport {
    /// Column order of the CSV export.
    pub const FIELDS: [&'static str; 26] = [
        "config_name",
        "seed",
        "corruption_fraction",
        "method",
        "te_translation_mean",
        "te_translation_sd",
        "te_rotation_mean_deg",
        "te_rotation_sd_deg",
        "me_translation_mean",
        "me_translation_sd",
        "me_rotation_mean_deg",
        "me_rotation_sd_deg",
        "rme_translation_mean",
        "rme_translation_sd",
        "rme_rotation_mean_deg",
        "rme_rotation_sd_deg",
        "rme_mean_pair_distance",
        "vertices_before",
        "vertices_after",
        "edges_before",
        "edges_after",
        "corrupted_before",
        "corrupted_after",
        "converged",
        "prune_seconds",
        "optimize_seconds",
    ];

    /// Equality that treats NaN as equal to NaN.
    pub fn same_values(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        let mut a = self.clone();
        let mut b = other.clone();
        let floats = |r: &mut RunReport| {
            [
                &mut r.me_translation_mean,
                &mut r.me_translation_sd,
                &mut r.me_rotation_mean_deg,
                &mut r.me_rotation_sd_deg,
                &mut r.rme_translation_mean,
                &mut r.rme_translation_sd,
                &mut r.rme_rotation_mean_deg,
                &mut r.rme_rotation_sd_deg,
                &mut r.rme_mean_pair_distance,
            ]
            .map(|x| std::mem::replace(x, 0.0))
        };
        let (fa, fb) = (floats(&mut a), floats(&mut b));
        a == b && fa.iter().zip(&fb).all(|(x, y)| eq(*x, *y))
    }
}

mod lenient_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct F64Visitor;

    impl Visitor<'_> for F64Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of inf, -inf, NaN")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.parse().map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(F64Visitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{export_report, import_report, ReportFormat};

    fn sample(seed: u64, me: f64) -> RunReport {
        RunReport {
            config_name: "p_aggressive".into(),
            seed,
            corruption_fraction: 0.1,
            method: "sid".into(),
            te_translation_mean: None,
            te_translation_sd: None,
            te_rotation_mean_deg: None,
            te_rotation_sd_deg: None,
            me_translation_mean: me,
            me_translation_sd: 0.012_345_678_901_234_5,
            me_rotation_mean_deg: 0.5,
            me_rotation_sd_deg: 0.25,
            rme_translation_mean: 0.01,
            rme_translation_sd: 0.002,
            rme_rotation_mean_deg: 0.3,
            rme_rotation_sd_deg: 0.1,
            rme_mean_pair_distance: 0.6,
            vertices_before: 900,
            vertices_after: 412,
            edges_before: 3363,
            edges_after: 1500,
            corrupted_before: 246,
            corrupted_after: 120,
            converged: true,
            prune_seconds: 0.125,
            optimize_seconds: 0.5,
        }
    }

    #[test]
    fn empty_exports() {
        let csv = export_report(&[], ReportFormat::Csv).unwrap();
        assert_eq!(csv.trim_end(), RunReport::FIELDS.join(","));
        assert_eq!(export_report(&[], ReportFormat::JsonLines).unwrap(), "");
    }

    #[test]
    fn header_matches_serialized_field_order() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(sample(1, 0.1)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), RunReport::FIELDS.join(","));
    }

    #[test]
    fn round_trips_including_divergence() {
        let mut diverged = sample(2, f64::INFINITY);
        diverged.rme_translation_mean = f64::NAN;
        diverged.te_translation_mean = Some(0.25);
        let reports = vec![sample(1, 0.031_415_926_535_897_93), diverged];
        for format in [ReportFormat::Csv, ReportFormat::JsonLines] {
            let text = export_report(&reports, format).unwrap();
            let back = import_report(&text, format).unwrap();
            assert_eq!(back.len(), 2);
            for (a, b) in reports.iter().zip(&back) {
                assert!(a.same_values(b), "{format:?}: {a:?} vs {b:?}");
            }
            assert_eq!(export_report(&back, format).unwrap(), text);
        }
    }
}
