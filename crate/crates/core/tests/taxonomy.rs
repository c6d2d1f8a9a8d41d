use presence_core::model::{DayClass, Period, PeriodTable, PeriodWindow, Timestamp};

const MONDAY: i64 = 19_723 * 86_400;

fn window_contains(start: u32, end: u32, sec: u32) -> bool {
    if start < end {
        start <= sec && sec < end
    } else {
        sec >= start || sec < end
    }
}

fn check_week(table: &PeriodTable, windows: &[(Period, u32, u32)], offset: i64) {
    for s in 0..7 * 86_400 {
        let ts = MONDAY + s;
        let local = ts + offset;
        let sec = local.rem_euclid(86_400) as u32;
        // 1970-01-01 was a Thursday; Monday is index 0
        let dow = (local.div_euclid(86_400) + 3).rem_euclid(7) as usize;
        let expected: Vec<Period> =
            windows.iter().filter(|w| window_contains(w.1, w.2, sec)).map(|w| w.0).collect();
        assert_eq!(expected.len(), 1, "windows must tile the day at second {sec}");
        let tp = table.classify(Timestamp::from_unix(ts));
        assert_eq!(tp.period, expected[0], "period at {ts}");
        assert_eq!(tp.day_of_week.index(), dow, "weekday at {ts}");
        let class = if dow >= 5 { DayClass::Weekend } else { DayClass::Weekday };
        assert_eq!(tp.day_class, class, "day class at {ts}");
    }
}

fn default_windows() -> Vec<(Period, u32, u32)> {
    let h = |hh: u32, mm: u32| hh * 3600 + mm * 60;
    vec![
        (Period::Morning, h(6, 0), h(11, 30)),
        (Period::Lunchtime, h(11, 30), h(13, 30)),
        (Period::Afternoon, h(13, 30), h(17, 30)),
        (Period::Evening, h(17, 30), h(22, 0)),
        (Period::Night, h(22, 0), h(6, 0)),
    ]
}

fn table(windows: &[(Period, u32, u32)], offset: i32) -> PeriodTable {
    PeriodTable::new(
        windows.iter().map(|&(period, start, end)| PeriodWindow { period, start, end }).collect(),
        offset,
    )
    .unwrap()
}

#[test]
fn default_table_matches_brute_force_over_a_week() {
    let w = default_windows();
    assert_eq!(table(&w, 0), PeriodTable::default());
    check_week(&PeriodTable::default(), &w, 0);
}

#[test]
fn shifted_table_matches_brute_force_over_a_week() {
    let w = default_windows();
    check_week(&table(&w, -8 * 3600), &w, -8 * 3600);
    check_week(&table(&w, 5 * 3600 + 1800), &w, 5 * 3600 + 1800);
}

#[test]
fn gaps_and_overlaps_are_rejected() {
    let mut w = default_windows();
    w[1].2 -= 60;
    let windows = w.iter().map(|&(period, start, end)| PeriodWindow { period, start, end }).collect();
    assert!(PeriodTable::new(windows, 0).is_err());
}
