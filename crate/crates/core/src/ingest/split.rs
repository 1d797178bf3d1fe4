use chrono::{DateTime, NaiveDate};

use crate::motion::Trajectory;

/// Local calendar day of an epoch time.
pub fn day_of(t: f64, utc_offset: f64) -> Option<NaiveDate> {
    let local = t + utc_offset;
    let secs = local.floor();
    DateTime::from_timestamp(secs as i64, ((local - secs) * 1e9) as u32).map(|d| d.date_naive())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DaySplit {
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    /// Trajectories on days in neither set.
    pub unassigned: usize,
    pub warnings: Vec<String>,
}

/// Partitions by the local day of each trajectory's first sample. With
/// `test_days = None`, every day not used for training is a test day.
pub fn split_by_day(
    trajs: &[Trajectory],
    train_days: &[NaiveDate],
    test_days: Option<&[NaiveDate]>,
    utc_offset: f64,
) -> DaySplit {
    let mut out = DaySplit::default();
    let mut seen = std::collections::BTreeSet::new();
    for t in trajs {
        let Some(day) = t.start_time().and_then(|s| day_of(s, utc_offset)) else {
            out.unassigned += 1;
            continue;
        };
        seen.insert(day);
        if train_days.contains(&day) {
            out.train.push(t.clone());
        } else if test_days.is_none_or(|d| d.contains(&day)) {
            out.test.push(t.clone());
        } else {
            out.unassigned += 1;
        }
    }
    for d in train_days.iter().chain(test_days.unwrap_or(&[])) {
        if !seen.contains(d) {
            out.warnings.push(format!("no trajectories on {d}"));
        }
    }
    if out.train.is_empty() {
        out.warnings.push("training set is empty".into());
    }
    if out.test.is_empty() {
        out.warnings.push("test set is empty".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::resample::from_positions;

    const DAY: f64 = 86_400.0;
    // 2012-10-24 00:00 UTC
    const T0: f64 = 1_351_036_800.0;

    fn at(id: &str, t: f64) -> Trajectory {
        from_positions(id, &[t, t + 3600.0], &[(0.0, 0.0), (1.0, 0.0)]).unwrap()
    }

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 10, d).unwrap()
    }

    #[test]
    fn ten_days_first_for_training() {
        let trajs: Vec<_> = (0..10).map(|d| at(&d.to_string(), T0 + d as f64 * DAY + 36_000.0)).collect();
        let s = split_by_day(&trajs, &[date(24)], None, 0.0);
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.test.len(), 9);
        assert!(s.warnings.is_empty());
        let only = split_by_day(&trajs, &[date(24)], Some(&[date(25), date(26)]), 0.0);
        assert_eq!((only.train.len(), only.test.len(), only.unassigned), (1, 2, 7));
    }

    #[test]
    fn single_day_leaves_test_empty() {
        let trajs = vec![at("a", T0 + 100.0), at("b", T0 + 200.0)];
        let s = split_by_day(&trajs, &[date(24)], None, 0.0);
        assert_eq!(s.train.len(), 2);
        assert!(s.test.is_empty());
        assert!(!s.warnings.is_empty());
        let absent = split_by_day(&trajs, &[date(30)], None, 0.0);
        assert!(absent.warnings.iter().any(|w| w.contains("2012-10-30")));
    }

    #[test]
    fn midnight_crossing_uses_first_sample() {
        let t = at("late", T0 + DAY - 60.0);
        let s = split_by_day(&[t], &[date(24)], None, 0.0);
        assert_eq!(s.train.len(), 1);
        // a +9 h local clock moves it to the next day
        assert_eq!(day_of(T0 + DAY - 60.0, 9.0 * 3600.0), Some(date(25)));
    }
}
