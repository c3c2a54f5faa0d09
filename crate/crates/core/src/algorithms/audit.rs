use std::collections::BTreeMap;

use serde::Serialize;

use super::{Observer, VariationEvent};

/// Records every variation event of a run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub events: Vec<VariationEvent>,
}

impl Observer for Trace {
    fn on_variation(&mut self, event: VariationEvent) {
        self.events.push(event);
    }
}

impl Trace {
    pub fn audit(&self, max_arity: usize) -> AuditReport {
        let mut auditor = ArityAuditor::new(max_arity);
        for &e in &self.events {
            auditor.on_variation(e);
        }
        auditor.report()
    }
}

/// Streaming check that no variation reads more than `max_arity` stored
/// strings and that no operator outside the unbiased catalogue is used.
#[derive(Clone, Debug)]
pub struct ArityAuditor {
    max_arity: usize,
    events: u64,
    observed_max: usize,
    counts: BTreeMap<&'static str, u64>,
    violations: Vec<VariationEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub max_arity: usize,
    pub events: u64,
    pub observed_max_arity: usize,
    pub counts: BTreeMap<&'static str, u64>,
    /// Distinct offending operators.
    pub violations: Vec<VariationEvent>,
    pub passed: bool,
}

impl ArityAuditor {
    pub fn new(max_arity: usize) -> Self {
        Self {
            max_arity,
            events: 0,
            observed_max: 0,
            counts: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    pub fn report(&self) -> AuditReport {
        AuditReport {
            max_arity: self.max_arity,
            events: self.events,
            observed_max_arity: self.observed_max,
            counts: self.counts.clone(),
            violations: self.violations.clone(),
            passed: self.violations.is_empty(),
        }
    }
}

impl Observer for ArityAuditor {
    fn on_variation(&mut self, event: VariationEvent) {
        self.events += 1;
        self.observed_max = self.observed_max.max(event.arity);
        *self.counts.entry(event.operator).or_default() += 1;
        if (event.arity > self.max_arity || !event.unbiased) && !self.violations.contains(&event) {
            self.violations.push(event);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_biased_and_wide_operators() {
        let mut a = ArityAuditor::new(3);
        a.on_variation(VariationEvent::FLIP_DISAGREEMENT);
        a.on_variation(VariationEvent::FLIP_WHERE_EQUAL);
        assert!(a.report().passed);
        a.on_variation(VariationEvent::FLIP_POSITIONS);
        a.on_variation(VariationEvent::FLIP_POSITIONS);
        let r = a.report();
        assert!(!r.passed);
        assert_eq!(r.violations, vec![VariationEvent::FLIP_POSITIONS]);
        assert_eq!(r.events, 4);

        let mut b = ArityAuditor::new(2);
        b.on_variation(VariationEvent::FLIP_DISAGREEMENT);
        assert!(!b.report().passed);
        assert_eq!(b.report().observed_max_arity, 3);
    }
}
