use rand::Rng;

use super::discrete::DiscreteState;
use super::qtable::QTable;
use super::replay::Transition;
use crate::env::ActionId;

/// Epsilon-greedy choice. Exploration picks uniformly among all actions;
/// exploitation ties go to the lowest ordinal.
pub fn select_action<R: Rng>(q: &QTable, s: &DiscreteState, epsilon: f64, rng: &mut R) -> ActionId {
    if rng.gen::<f64>() < epsilon {
        ActionId::ALL[rng.gen_range(0..ActionId::COUNT)]
    } else {
        q.greedy(s)
    }
}

pub fn q_update(q: &mut QTable, t: &Transition, learning_rate: f64, discount: f64) {
    let b = *q.bounds();
    q.update_at(
        b.index(&t.state),
        t.action.index(),
        t.reward,
        b.index(&t.next_state),
        t.terminal,
        learning_rate,
        discount,
    );
}
