//! UTC instants at second precision, and injectable clocks.

use std::sync::Mutex;

use chrono::{DateTime, Duration, NaiveDateTime, SubsecRound, Utc};

pub type Timestamp = DateTime<Utc>;

const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// `2010-06-01T12:00:00Z`.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format(FORMAT).to_string()
}

/// Parses exactly the form produced by [`format_timestamp`].
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    if text.len() != 20 {
        return None;
    }
    NaiveDateTime::parse_from_str(text, FORMAT).ok().map(|n| n.and_utc())
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now().trunc_subsecs(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<Timestamp>);

impl ManualClock {
    pub fn new(at: Timestamp) -> Self {
        ManualClock(Mutex::new(at.trunc_subsecs(0)))
    }

    pub fn at(text: &str) -> Self {
        Self::new(parse_timestamp(text).expect("valid timestamp literal"))
    }

    pub fn set(&self, at: Timestamp) {
        *self.0.lock().unwrap() = at.trunc_subsecs(0);
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().unwrap();
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().unwrap()
    }
}

impl<C: Clock + ?Sized> Clock for std::sync::Arc<C> {
    fn now(&self) -> Timestamp {
        (**self).now()
    }
}
