//! Cluster growth from recent primary HIV infections (PHIs).
//!
//! A PHI collected inside the reliable window marks a transmission event
//! within the study period, so the number of such cases in a cluster is a
//! lower bound on its growth.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use thiserror::Error;

use crate::io::metadata::{CaseMetadata, Stage};
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum GrowthError {
    #[error("no metadata for id {0}")]
    MissingMetadata(String),
    #[error("window dates must satisfy start < PHI start < end")]
    InvalidWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthWindow {
    pub window_start: NaiveDate,
    pub phi_reliable_start: NaiveDate,
    pub window_end: NaiveDate,
}

impl Default for GrowthWindow {
    fn default() -> Self {
        Self {
            window_start: NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date"),
            phi_reliable_start: NaiveDate::from_ymd_opt(2012, 7, 1).expect("valid date"),
            window_end: NaiveDate::from_ymd_opt(2016, 2, 1).expect("valid date"),
        }
    }
}

impl GrowthWindow {
    pub fn new(window_start: NaiveDate, phi_reliable_start: NaiveDate, window_end: NaiveDate) -> Result<Self, GrowthError> {
        if !(window_start < phi_reliable_start && phi_reliable_start < window_end) {
            return Err(GrowthError::InvalidWindow);
        }
        Ok(Self {
            window_start,
            phi_reliable_start,
            window_end,
        })
    }

    pub fn is_recent_phi(&self, m: &CaseMetadata) -> bool {
        m.stage == Stage::Phi && m.collection_date >= self.phi_reliable_start && m.collection_date <= self.window_end
    }

    fn is_established(&self, m: &CaseMetadata) -> bool {
        m.stage.is_chronic() && m.collection_date < self.phi_reliable_start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterGrowthRow {
    pub cluster_label: String,
    pub total_size: usize,
    /// Chronic cases collected before the PHI start date.
    pub min_size_before: usize,
    pub recent_phi_count: usize,
    pub other_count: usize,
    pub first_recent_phi_date: Option<NaiveDate>,
    pub last_recent_phi_date: Option<NaiveDate>,
}

impl ClusterGrowthRow {
    /// Bar label: the first and last recent PHI dates, or the single date.
    pub fn date_label(&self) -> Option<String> {
        match (self.first_recent_phi_date, self.last_recent_phi_date) {
            (Some(a), _) if self.recent_phi_count == 1 => Some(a.to_string()),
            (Some(a), Some(b)) => Some(format!("{a} to {b}")),
            _ => None,
        }
    }
}

fn lookup<'m>(meta: &'m [CaseMetadata]) -> HashMap<&'m str, &'m CaseMetadata> {
    meta.iter().map(|m| (m.id.as_str(), m)).collect()
}

/// Numeric labels compare as numbers, anything else as text.
fn label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Growth rows for the `top_k` largest clusters, largest first, ties by
/// label.
pub fn growth_report(
    p: &Partition,
    meta: &[CaseMetadata],
    w: &GrowthWindow,
    top_k: usize,
) -> Result<Vec<ClusterGrowthRow>, GrowthError> {
    let by_id = lookup(meta);
    let mut rows: Vec<ClusterGrowthRow> = Vec::new();
    for cluster in p.clusters() {
        let label = p.label(&cluster[0]).expect("cluster member").to_string();
        let mut row = ClusterGrowthRow {
            cluster_label: label,
            total_size: cluster.len(),
            min_size_before: 0,
            recent_phi_count: 0,
            other_count: 0,
            first_recent_phi_date: None,
            last_recent_phi_date: None,
        };
        for id in &cluster {
            let m = by_id.get(id.as_str()).ok_or_else(|| GrowthError::MissingMetadata(id.clone()))?;
            if w.is_recent_phi(m) {
                row.recent_phi_count += 1;
                let d = m.collection_date;
                row.first_recent_phi_date = Some(row.first_recent_phi_date.map_or(d, |x| x.min(d)));
                row.last_recent_phi_date = Some(row.last_recent_phi_date.map_or(d, |x| x.max(d)));
            } else if w.is_established(m) {
                row.min_size_before += 1;
            } else {
                row.other_count += 1;
            }
        }
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        b.total_size
            .cmp(&a.total_size)
            .then_with(|| label_order(&a.cluster_label, &b.cluster_label))
    });
    rows.truncate(top_k);
    Ok(rows)
}

pub fn growth_tsv(rows: &[ClusterGrowthRow]) -> String {
    let mut out = String::from(
        "cluster\ttotal_size\tmin_size_before\trecent_phi_count\tother_count\tfirst_recent_phi\tlast_recent_phi\n",
    );
    let date = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.cluster_label,
            r.total_size,
            r.min_size_before,
            r.recent_phi_count,
            r.other_count,
            date(r.first_recent_phi_date),
            date(r.last_recent_phi_date)
        );
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhiBreakdown {
    pub singleton_count: usize,
    pub pair_count: usize,
    pub ge5_count: usize,
    /// PHIs in clusters of three or four.
    pub other_count: usize,
    pub total_recent_phi: usize,
}

/// Recent PHIs classified by the size of the cluster holding them.
pub fn phi_breakdown(p: &Partition, meta: &[CaseMetadata], w: &GrowthWindow) -> Result<PhiBreakdown, GrowthError> {
    let by_id = lookup(meta);
    let sizes = p.cluster_sizes();
    let mut b = PhiBreakdown::default();
    for (id, label) in p.iter() {
        let m = by_id.get(id).ok_or_else(|| GrowthError::MissingMetadata(id.to_string()))?;
        if !w.is_recent_phi(m) {
            continue;
        }
        b.total_recent_phi += 1;
        match sizes[label] {
            1 => b.singleton_count += 1,
            2 => b.pair_count += 1,
            s if s >= 5 => b.ge5_count += 1,
            _ => b.other_count += 1,
        }
    }
    Ok(b)
}

const BAR_AREA: f64 = 600.0;
const BAR_HEIGHT: f64 = 14.0;
const ROW_STEP: f64 = 20.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 30.0;
const COLOURS: [(&str, &str); 3] = [
    ("#8b0000", "chronic cases before PHI start"),
    ("#f4a582", "recent PHIs"),
    ("#bababa", "other"),
];

/// Horizontal stacked bars, one per row in the given order.
pub fn emit_growth_svg(rows: &[ClusterGrowthRow]) -> String {
    let max = rows.iter().map(|r| r.total_size).max().unwrap_or(1).max(1) as f64;
    let scale = BAR_AREA / max;
    let width = LEFT + BAR_AREA + 220.0;
    let height = TOP + ROW_STEP * rows.len() as f64 + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (k, (colour, name)) in COLOURS.iter().enumerate() {
        let x = LEFT + 180.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{x}" y="6" width="10" height="10" fill="{colour}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="15">{name}</text>"#, x + 14.0);
    }
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + ROW_STEP * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + BAR_HEIGHT - 3.0,
            escape(&r.cluster_label)
        );
        let mut x = LEFT;
        for (count, (colour, _)) in [r.min_size_before, r.recent_phi_count, r.other_count].iter().zip(COLOURS) {
            if *count == 0 {
                continue;
            }
            let w = *count as f64 * scale;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y}" width="{w:.3}" height="{BAR_HEIGHT}" fill="{colour}" data-count="{count}"/>"#
            );
            x += w;
        }
        if let Some(label) = r.date_label() {
            let _ = writeln!(s, r#"<text x="{:.3}" y="{}">{label}</text>"#, x + 4.0, y + BAR_HEIGHT - 3.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn case(id: &str, d: NaiveDate, stage: Stage) -> CaseMetadata {
        CaseMetadata {
            id: id.into(),
            collection_date: d,
            stage,
            risk_group: "MSM".into(),
        }
    }

    /// 20-member cluster: 8 PHIs in 2014, 10 chronic cases in 2010 and two
    /// chronic cases in 2013; plus two singletons.
    fn cohort() -> (Partition, Vec<CaseMetadata>) {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut meta = Vec::new();
        for i in 0..20 {
            let id = format!("c{i:02}");
            let m = match i {
                0..=7 => case(&id, date(2014, 1 + i as u32, 3), Stage::Phi),
                8..=17 => case(&id, date(2010, 5, 1), Stage::ChronicUntreated),
                _ => case(&id, date(2013, 2, 1), Stage::ChronicTreated),
            };
            ids.push(id);
            labels.push("7");
            meta.push(m);
        }
        for (i, stage) in [Stage::Phi, Stage::Unknown].into_iter().enumerate() {
            let id = format!("s{i}");
            meta.push(case(&id, date(2015, 1, 1), stage));
            ids.push(id);
            labels.push(if i == 0 { "12" } else { "3" });
        }
        (Partition::from_labels(&ids, &labels).unwrap(), meta)
    }

    #[test]
    fn eight_recent_phis() {
        let (p, meta) = cohort();
        let rows = growth_report(&p, &meta, &GrowthWindow::default(), 30).unwrap();
        let big = &rows[0];
        assert_eq!(big.cluster_label, "7");
        assert_eq!(big.total_size, 20);
        assert_eq!(big.recent_phi_count, 8);
        assert_eq!(big.min_size_before, 10);
        assert_eq!(big.other_count, 2);
        assert_eq!(big.first_recent_phi_date, Some(date(2014, 1, 3)));
        assert_eq!(big.last_recent_phi_date, Some(date(2014, 8, 3)));
        assert_eq!(big.date_label().unwrap(), "2014-01-03 to 2014-08-03");
        // singletons tie on size and sort by numeric label
        assert_eq!(rows[1].cluster_label, "3");
        assert_eq!(rows[2].cluster_label, "12");
        assert_eq!(rows[2].date_label().unwrap(), "2015-01-01");
        assert_eq!(rows[1].date_label(), None);
        assert_eq!(growth_report(&p, &meta, &GrowthWindow::default(), 1).unwrap().len(), 1);
    }

    #[test]
    fn early_2012_phi_is_other() {
        let p = Partition::from_labels(&["a", "b"], &[1, 1]).unwrap();
        let meta = vec![
            case("a", date(2012, 3, 1), Stage::Phi),
            case("b", date(2011, 3, 1), Stage::ChronicUntreated),
        ];
        let r = &growth_report(&p, &meta, &GrowthWindow::default(), 30).unwrap()[0];
        assert_eq!((r.min_size_before, r.recent_phi_count, r.other_count), (1, 0, 1));
        assert_eq!(r.first_recent_phi_date, None);
    }

    #[test]
    fn missing_metadata() {
        let (p, mut meta) = cohort();
        meta.retain(|m| m.id != "c05");
        assert_eq!(
            growth_report(&p, &meta, &GrowthWindow::default(), 30).unwrap_err(),
            GrowthError::MissingMetadata("c05".into())
        );
        assert!(phi_breakdown(&p, &meta, &GrowthWindow::default()).is_err());
    }

    #[test]
    fn invalid_window() {
        assert_eq!(
            GrowthWindow::new(date(2012, 1, 1), date(2012, 1, 1), date(2016, 1, 1)).unwrap_err(),
            GrowthError::InvalidWindow
        );
    }

    fn random_cohort(seed: u64) -> (Partition, Vec<CaseMetadata>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..120);
        let stages = [Stage::Phi, Stage::ChronicUntreated, Stage::ChronicTreated, Stage::Unknown];
        let ids: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n / 3 + 1)).collect();
        let meta = ids
            .iter()
            .map(|id| {
                let d = date(2009, 1, 1) + chrono::Days::new(rng.random_range(0..2600));
                case(id, d, stages[rng.random_range(0..4)])
            })
            .collect();
        (Partition::from_labels(&ids, &labels).unwrap(), meta)
    }

    #[test]
    fn report_matches_recount() {
        let w = GrowthWindow::default();
        for seed in 0..40 {
            let (p, meta) = random_cohort(seed);
            let rows = growth_report(&p, &meta, &w, usize::MAX).unwrap();
            assert_eq!(rows.len(), p.num_clusters());
            let cohort_phi = meta.iter().filter(|m| w.is_recent_phi(m)).count();
            assert_eq!(rows.iter().map(|r| r.recent_phi_count).sum::<usize>(), cohort_phi);
            for r in &rows {
                assert_eq!(r.min_size_before + r.recent_phi_count + r.other_count, r.total_size);
                assert_eq!(r.first_recent_phi_date.is_some(), r.recent_phi_count > 0);
                let members: Vec<&CaseMetadata> = meta.iter().filter(|m| p.label(&m.id) == Some(r.cluster_label.as_str())).collect();
                let phi = members
                    .iter()
                    .filter(|m| m.stage == Stage::Phi && m.collection_date >= date(2012, 7, 1) && m.collection_date <= date(2016, 2, 1))
                    .count();
                assert_eq!(r.recent_phi_count, phi);
            }
            assert!(rows.windows(2).all(|x| x[0].total_size >= x[1].total_size));

            let b = phi_breakdown(&p, &meta, &w).unwrap();
            assert_eq!(b.total_recent_phi, cohort_phi);
            assert_eq!(b.singleton_count + b.pair_count + b.ge5_count + b.other_count, cohort_phi);
            let sizes = p.cluster_sizes();
            let count = |f: &dyn Fn(usize) -> bool| {
                meta.iter()
                    .filter(|m| w.is_recent_phi(m) && f(sizes[p.label(&m.id).unwrap()]))
                    .count()
            };
            assert_eq!(b.singleton_count, count(&|s| s == 1));
            assert_eq!(b.pair_count, count(&|s| s == 2));
            assert_eq!(b.ge5_count, count(&|s| s >= 5));
        }
    }

    #[test]
    fn wider_window_never_lowers_counts() {
        let narrow = GrowthWindow::new(date(2012, 1, 1), date(2013, 1, 1), date(2014, 1, 1)).unwrap();
        let wide = GrowthWindow::new(date(2012, 1, 1), date(2012, 7, 1), date(2016, 2, 1)).unwrap();
        for seed in 0..20 {
            let (p, meta) = random_cohort(seed);
            let a = growth_report(&p, &meta, &narrow, usize::MAX).unwrap();
            let b = growth_report(&p, &meta, &wide, usize::MAX).unwrap();
            for ra in &a {
                let rb = b.iter().find(|r| r.cluster_label == ra.cluster_label).unwrap();
                assert!(rb.recent_phi_count >= ra.recent_phi_count);
            }
        }
    }

    #[test]
    fn breakdown_small() {
        let ids = ["a", "b", "c", "d", "e", "f"];
        let p = Partition::from_labels(&ids, &[1, 1, 1, 1, 1, 2]).unwrap();
        let meta: Vec<CaseMetadata> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| case(id, date(2014, 1, 1), if i < 3 { Stage::Phi } else { Stage::ChronicTreated }))
            .collect();
        let b = phi_breakdown(&p, &meta, &GrowthWindow::default()).unwrap();
        assert_eq!((b.ge5_count, b.total_recent_phi, b.singleton_count), (3, 3, 0));
    }

    #[test]
    fn svg_widths_are_proportional() {
        let (p, meta) = random_cohort(3);
        let rows = growth_report(&p, &meta, &GrowthWindow::default(), 30).unwrap();
        let svg = emit_growth_svg(&rows);
        assert_eq!(svg, emit_growth_svg(&rows));
        let scale = BAR_AREA / rows[0].total_size as f64;
        let mut seen = 0;
        for line in svg.lines().filter(|l| l.contains("data-count")) {
            let attr = |name: &str| -> f64 {
                let start = line.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                line[start..].split('"').next().unwrap().parse().unwrap()
            };
            assert!((attr("width") - attr("data-count") * scale).abs() <= 0.5);
            seen += 1;
        }
        let expected: usize = rows
            .iter()
            .map(|r| [r.min_size_before, r.recent_phi_count, r.other_count].iter().filter(|&&c| c > 0).count())
            .sum();
        assert_eq!(seen, expected);
    }

    #[test]
    fn svg_single_segment() {
        let row = ClusterGrowthRow {
            cluster_label: "1".into(),
            total_size: 4,
            min_size_before: 0,
            recent_phi_count: 0,
            other_count: 4,
            first_recent_phi_date: None,
            last_recent_phi_date: None,
        };
        let svg = emit_growth_svg(&[row]);
        assert_eq!(svg.matches("data-count").count(), 1);
        assert!(svg.contains(r#"width="600.000""#));
    }
}
