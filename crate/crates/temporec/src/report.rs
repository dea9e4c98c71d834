//! Cross-run reporting: side-by-side metric tables as text and CSV, merged
//! Pareto-front point files for plotting, and a dominance verdict between
//! two fronts. Reporting is read-only over bundle contents.

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::pipeline::ParetoPoint;
use crate::trainer::dominates;

/// A run's name with the reports it contributed.
pub type NamedReports<'a> = (&'a str, &'a [MetricReport]);

fn depth_set(reports: &[MetricReport]) -> Vec<usize> {
    let mut ks: Vec<usize> = reports.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// All bundles must report the same depths, or rows would not line up.
fn common_depths(named: &[NamedReports]) -> Result<Vec<usize>> {
    if named.is_empty() {
        return Err(Error::InvalidConfig("no bundles to report".into()));
    }
    let ks = depth_set(named[0].1);
    if ks.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "bundle `{}` reports no metrics",
            named[0].0
        )));
    }
    for (name, reports) in &named[1..] {
        let other = depth_set(reports);
        if other != ks {
            return Err(Error::InvalidConfig(format!(
                "bundle `{name}` reports depths {other:?}, expected {ks:?}"
            )));
        }
    }
    Ok(ks)
}

/// Fixed-width table with one section per depth and one row per
/// (run, split) pair, in input order.
pub fn metric_table_text(named: &[NamedReports]) -> Result<String> {
    let ks = common_depths(named)?;
    let name_width = named
        .iter()
        .map(|(name, _)| name.len())
        .chain(["run".len()])
        .max()
        .expect("nonempty");
    let split_width = named
        .iter()
        .flat_map(|(_, reports)| reports.iter().map(|r| r.protocol.len()))
        .chain(["split".len()])
        .max()
        .expect("nonempty");

    let mut out = String::new();
    for &k in &ks {
        out.push_str(&format!("K = {k}\n"));
        out.push_str(&format!(
            "{:<name_width$}  {:<split_width$}  {:>7}  {:>10}  {:>10}  {:>10}  {:>12}\n",
            "run", "split", "users", "recall", "precision", "recency", "recency_norm"
        ));
        for (name, reports) in named {
            for r in reports.iter().filter(|r| r.k == k) {
                out.push_str(&format!(
                    "{:<name_width$}  {:<split_width$}  {:>7}  {:>10.4}  {:>10.4}  {:>10.4}  {:>12.4}\n",
                    name, r.protocol, r.n_users, r.recall, r.precision, r.recency,
                    r.recency_normalized
                ));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Same rows as the text table, full precision, one record per line.
pub fn metric_table_csv(named: &[NamedReports]) -> Result<String> {
    let ks = common_depths(named)?;
    let mut out = String::from("run,split,K,n_users,recall,precision,recency,recency_normalized\n");
    for &k in &ks {
        for (name, reports) in named {
            for r in reports.iter().filter(|r| r.k == k) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    name,
                    r.protocol,
                    r.k,
                    r.n_users,
                    r.recall,
                    r.precision,
                    r.recency,
                    r.recency_normalized
                ));
            }
        }
    }
    Ok(out)
}

/// Merge named fronts into one plot-ready file.
pub fn combined_pareto_csv(named: &[(&str, &[ParetoPoint])]) -> String {
    let mut out = String::from("run,epoch,recall,recency\n");
    for (name, points) in named {
        for p in *points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                name, p.epoch, p.recall, p.recency
            ));
        }
    }
    out
}

fn front_covers(covering: &[ParetoPoint], covered: &[ParetoPoint]) -> Result<bool> {
    for p in covered {
        let mut beaten = false;
        for q in covering {
            if dominates(&[q.recall, q.recency], &[p.recall, p.recency])? {
                beaten = true;
                break;
            }
        }
        if !beaten {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Compare two fronts on (recall, recency). A front dominates when every
/// point of the other is strictly dominated by one of its points, and the
/// converse does not hold. Equal fronts are "neither".
pub fn dominance_verdict(
    name_a: &str,
    front_a: &[ParetoPoint],
    name_b: &str,
    front_b: &[ParetoPoint],
) -> Result<String> {
    if front_a.is_empty() || front_b.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "cannot compare empty fronts ({name_a}: {} points, {name_b}: {} points)",
            front_a.len(),
            front_b.len()
        )));
    }
    let a_over_b = front_covers(front_a, front_b)?;
    let b_over_a = front_covers(front_b, front_a)?;
    Ok(match (a_over_b, b_over_a) {
        (true, false) => format!("{name_a} dominates {name_b}"),
        (false, true) => format!("{name_b} dominates {name_a}"),
        _ => "neither".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(epoch: usize, recall: f64, recency: f64) -> ParetoPoint {
        ParetoPoint {
            epoch,
            recall,
            recency,
        }
    }

    fn report(protocol: &str, k: usize, recall: f64) -> MetricReport {
        MetricReport {
            protocol: protocol.into(),
            k,
            n_users: 100,
            recall,
            precision: recall / 2.0,
            recency: recall * 3.0,
            recency_normalized: recall / 3.0,
        }
    }

    #[test]
    fn a_front_of_larger_points_dominates() {
        let a = vec![point(1, 0.13, 0.47)];
        let b = vec![point(1, 0.11, 0.23)];
        assert_eq!(
            dominance_verdict("A", &a, "B", &b).unwrap(),
            "A dominates B"
        );
        assert_eq!(
            dominance_verdict("B", &b, "A", &a).unwrap(),
            "A dominates B"
        );
    }

    #[test]
    fn identical_fronts_compare_as_neither() {
        let a = vec![point(1, 0.2, 0.4), point(2, 0.3, 0.1)];
        assert_eq!(
            dominance_verdict("A", &a, "B", &a.clone()).unwrap(),
            "neither"
        );
    }

    #[test]
    fn crossing_fronts_compare_as_neither() {
        let a = vec![point(1, 0.3, 0.1)];
        let b = vec![point(1, 0.1, 0.3)];
        assert_eq!(dominance_verdict("A", &a, "B", &b).unwrap(), "neither");
    }

    #[test]
    fn empty_fronts_are_an_error() {
        let a = vec![point(1, 0.2, 0.4)];
        assert!(dominance_verdict("A", &a, "B", &[]).is_err());
        assert!(dominance_verdict("A", &[], "B", &a).is_err());
    }

    #[test]
    fn tables_align_runs_side_by_side() {
        let a = vec![
            report("val_traditional", 20, 0.13),
            report("test_strict_cutoff", 20, 0.08),
        ];
        let b = vec![
            report("val_strict_cutoff", 20, 0.09),
            report("test_strict_cutoff", 20, 0.08),
        ];
        let named: Vec<NamedReports> = vec![("trad", &a), ("cutoff", &b)];
        let text = metric_table_text(&named).unwrap();
        assert!(text.contains("K = 20"));
        assert!(text.contains("trad"));
        assert!(text.contains("val_strict_cutoff"));
        let csv = metric_table_csv(&named).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("trad,val_traditional,20,100,0.13,"));
    }

    #[test]
    fn mismatched_depths_are_rejected() {
        let a = vec![report("val_traditional", 20, 0.13)];
        let b = vec![report("val_traditional", 50, 0.2)];
        let named: Vec<NamedReports> = vec![("a", &a), ("b", &b)];
        assert!(metric_table_text(&named).is_err());
        assert!(metric_table_csv(&named).is_err());
    }

    #[test]
    fn no_bundles_is_an_error() {
        assert!(metric_table_text(&[]).is_err());
    }

    #[test]
    fn combined_front_tags_each_run() {
        let a = [point(1, 0.2, 0.4)];
        let b = [point(3, 0.25, 0.3)];
        let csv = combined_pareto_csv(&[("single", &a), ("multi", &b)]);
        assert_eq!(
            csv,
            "run,epoch,recall,recency\nsingle,1,0.2,0.4\nmulti,3,0.25,0.3\n"
        );
    }
}
