use presence_core::cases::{extract_cases, proximal_context, Landmark, Target, UserHistory};
use presence_core::model::{Duration, PeriodTable, PresenceState, Timestamp};
use presence_core::sim::{generate_user, SplitMix64, UserProfile};
use rand_core::RngCore;

fn history(days: u32, seed: u64) -> UserHistory {
    generate_user(&UserProfile::default_profile(seed), days)
        .unwrap()
        .history(Duration::from_secs(300))
        .unwrap()
}

#[test]
fn every_departure_yields_exactly_one_case() {
    let h = history(60, 4);
    let segs = &h.timeline.segments;
    let table = PeriodTable::default();
    for (target, onset_state) in [
        (Target::Return { min_stay: Duration::ZERO }, PresenceState::Absent),
        (Target::Leave { min_absence: Duration::ZERO }, PresenceState::Present),
    ] {
        let cases = extract_cases(&h, &target, &table).unwrap();
        let onsets: Vec<usize> =
            (1..segs.len()).filter(|&i| segs[i].state == onset_state).collect();
        assert_eq!(cases.len(), onsets.len());
        for (c, &i) in cases.iter().zip(&onsets) {
            assert_eq!(c.onset, segs[i].start);
            if i + 1 < segs.len() {
                assert!(!c.censored);
                assert_eq!(c.wait, segs[i].len());
            } else {
                assert!(c.censored);
                assert_eq!(c.onset + c.wait, h.timeline.horizon.1);
            }
        }
        let covered: u64 = cases.iter().map(|c| c.wait.secs()).sum();
        let total: u64 = onsets.iter().map(|&i| segs[i].len().secs()).sum();
        assert_eq!(covered, total, "waits partition the time spent in the onset state");
    }
}

#[test]
fn minimum_stay_skips_short_returns() {
    let h = history(60, 5);
    let segs = &h.timeline.segments;
    let min_stay = Duration::from_mins(15);
    let cases = extract_cases(&h, &Target::Return { min_stay }, &PeriodTable::default()).unwrap();
    for c in cases.iter().filter(|c| !c.censored) {
        let back = c.onset + c.wait;
        let j = segs.iter().position(|s| s.start == back).unwrap();
        assert_eq!(segs[j].state, PresenceState::Present);
        assert!(segs[j].len() >= min_stay);
        let skipped = segs
            .iter()
            .filter(|s| s.start > c.onset && s.start < back && s.state == PresenceState::Present);
        assert!(skipped.into_iter().all(|s| s.len() < min_stay));
    }
}

#[test]
fn proximal_context_grows_with_the_clock() {
    let h = history(30, 6);
    let segs = &h.timeline.segments;
    let mut rng = SplitMix64::new(8);
    let mut checked = 0;
    for _ in 0..2000 {
        let i = 1 + (rng.next_u64() % (segs.len() as u64 - 1)) as usize;
        let s = &segs[i];
        let len = s.len().secs();
        if len < 2 {
            continue;
        }
        let a = rng.next_u64() % len;
        let b = a + rng.next_u64() % (len - a);
        let landmark = match s.state {
            PresenceState::Absent => Landmark::PresentToAbsent,
            PresenceState::Present => Landmark::AbsentToPresent,
        };
        let at = s.start + Duration::from_secs(a);
        let later = s.start + Duration::from_secs(b);
        let p = proximal_context(&h.timeline, &[], at, landmark).unwrap();
        let q = proximal_context(&h.timeline, &[], later, landmark).unwrap();
        assert_eq!(p.secs(), a);
        assert_eq!(q.secs() - p.secs(), b - a);
        checked += 1;
    }
    assert!(checked > 1000);
    let first = h.timeline.segments[0].start;
    assert!(proximal_context(&h.timeline, &[], first, Landmark::PresentToAbsent).is_err());
    assert!(proximal_context(&h.timeline, &[], Timestamp::from_unix(0), Landmark::AbsentToPresent).is_err());
}
