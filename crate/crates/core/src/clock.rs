use chrono::{DateTime, Utc};

/// Source of timestamps written into specs and revisions.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        // Specs store whole seconds.
        DateTime::from_timestamp(Utc::now().timestamp(), 0).expect("current time is representable")
    }
}

/// Always returns the same instant; used for reproducible runs.
#[derive(Clone, Copy, Debug)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}
