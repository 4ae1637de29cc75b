//! Converting weekly-hour targets into weekday and weekend slot counts.
//!
//! A week is five weekdays and two weekend days, so `a` weekday slots and `b`
//! weekend slots give `(5a + 2b)/6` hours. One "unit" is a sixth of an hour.

use crate::ingest::SLOTS_PER_DAY;

/// Weekday/weekend slot counts with `5a + 2b = units`, spreading the time
/// as evenly across the week as the parity constraint allows.
pub fn split_units(units: usize) -> Option<(usize, usize)> {
    let target = units as f64 / 7.0;
    let mut best: Option<(usize, usize)> = None;
    for a in 0..=SLOTS_PER_DAY.min(units / 5) {
        let rest = units - 5 * a;
        if rest % 2 != 0 || rest / 2 > SLOTS_PER_DAY {
            continue;
        }
        let candidate = (a, rest / 2);
        let closer = match best {
            None => true,
            Some((ba, _)) => (a as f64 - target).abs() < (ba as f64 - target).abs(),
        };
        if closer {
            best = Some(candidate);
        }
    }
    best
}

/// Nearest representable unit count to `hours`. One and three units cannot
/// be written as `5a + 2b`, so the result can be up to a third of an hour
/// off the target.
pub fn feasible_units(hours: f64) -> Option<usize> {
    if !(0.0..=168.0).contains(&hours) {
        return None;
    }
    let k = (hours * 6.0).round() as usize;
    [k, k + 1, k.wrapping_sub(1), k + 2, k.wrapping_sub(2)]
        .into_iter()
        .filter(|&c| c <= 168 * 6)
        .find(|&c| split_units(c).is_some())
}
