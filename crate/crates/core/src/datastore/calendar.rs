use chrono::{DateTime, Datelike, Timelike, Utc};

fn seconds_of_day(t: DateTime<Utc>) -> f64 {
    t.num_seconds_from_midnight() as f64 + t.nanosecond() as f64 * 1e-9
}

/// Local solar time as a fraction of the day in [0, 1), with local time
/// taken as UTC + lon/15 hours.
pub fn local_time_fraction(t: DateTime<Utc>, lon_deg: f64) -> f64 {
    ((seconds_of_day(t) / 3600.0 + lon_deg / 15.0) / 24.0).rem_euclid(1.0)
}

/// Elapsed fraction of the calendar year in [0, 1).
pub fn year_fraction(t: DateTime<Utc>) -> f64 {
    let days = if chrono::NaiveDate::from_ymd_opt(t.year(), 2, 29).is_some() { 366.0 } else { 365.0 };
    (t.ordinal0() as f64 + seconds_of_day(t) / 86400.0) / days
}

/// Zero-based day of year, 0..=365.
pub fn day_of_year(t: DateTime<Utc>) -> usize {
    t.ordinal0() as usize
}

/// Slot of 29 February in [`calendar_day`] numbering.
pub const LEAP_DAY: usize = 59;

/// Zero-based position of the month and day in a leap-year calendar, so a
/// date maps to the same slot in every year and 29 February owns slot 59.
pub fn calendar_day(t: DateTime<Utc>) -> usize {
    let d = t.ordinal0() as usize;
    if d >= LEAP_DAY && chrono::NaiveDate::from_ymd_opt(t.year(), 2, 29).is_none() {
        d + 1
    } else {
        d
    }
}
