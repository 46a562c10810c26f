use serde::{Deserialize, Serialize};

use crate::env::ActionId;
use crate::monitor::DetectionVerdict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    StaticIds,
    Tadm,
}

/// Fixed response: restart on an IDS alert, isolate on a TADM alert.
pub fn baseline_remediate(verdict: &DetectionVerdict, kind: BaselineKind) -> ActionId {
    match (verdict.alert, kind) {
        (false, _) => ActionId::NoOp,
        (true, BaselineKind::StaticIds) => ActionId::RestartService,
        (true, BaselineKind::Tadm) => ActionId::IsolateContainer,
    }
}

/// Suppresses a remediation if the previous one was fewer than `window`
/// steps ago.
#[derive(Clone, Debug)]
pub struct Cooldown {
    window: u64,
    last: Option<u64>,
}

impl Cooldown {
    pub fn new(window: u64) -> Self {
        Cooldown { window, last: None }
    }

    pub fn gate(&mut self, step: u64, action: ActionId) -> ActionId {
        if action == ActionId::NoOp {
            return action;
        }
        if self.last.is_some_and(|l| step < l + self.window) {
            return ActionId::NoOp;
        }
        self.last = Some(step);
        action
    }
}
