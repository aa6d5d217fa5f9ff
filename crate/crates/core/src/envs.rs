//! Desk-scale example MDPs.
//!
//! All three are layered — every path reaches the terminal state within the
//! horizon cap — so the enumeration oracle is exact (zero residual mass).
//! They double as the reference environments of the acceptance suite and of
//! the bundled CLI spec files.

use crate::mdp::{MdpSpec, Transition};

/// Two-armed bandit: one decision state, arm 0 pays 0 and arm 1 pays 1,
/// then the episode ends. Uniform policy value 0.5.
pub fn two_armed_bandit() -> MdpSpec {
    MdpSpec {
        num_states: 2,
        num_actions: 2,
        r_max: 1.0,
        gamma: 0.9,
        start_state: 1,
        horizon_cap: 2,
        transitions: vec![
            Transition { s: 1, a: 0, next: 0, p: 1.0, r: 0.0 },
            Transition { s: 1, a: 1, next: 0, p: 1.0, r: 1.0 },
        ],
    }
}

/// Two decision states, two actions. State 1 trades a safe continuation
/// against a risky exit; state 2 picks between a sure reward and a penalty.
/// Episodes last at most two steps.
pub fn two_state_two_action() -> MdpSpec {
    MdpSpec {
        num_states: 3,
        num_actions: 2,
        r_max: 2.0,
        gamma: 0.8,
        start_state: 1,
        horizon_cap: 4,
        transitions: vec![
            Transition { s: 1, a: 0, next: 2, p: 0.7, r: 0.5 },
            Transition { s: 1, a: 0, next: 0, p: 0.3, r: -0.2 },
            Transition { s: 1, a: 1, next: 2, p: 0.2, r: -1.0 },
            Transition { s: 1, a: 1, next: 0, p: 0.8, r: 1.0 },
            Transition { s: 2, a: 0, next: 0, p: 1.0, r: 1.0 },
            Transition { s: 2, a: 1, next: 0, p: 1.0, r: -0.5 },
        ],
    }
}

/// Five-state layered chain 1 -> 2 -> 3 -> 4 -> 0 with early-exit branches;
/// every action either advances one layer or terminates, so all paths end
/// within four steps.
pub fn layered_chain() -> MdpSpec {
    MdpSpec {
        num_states: 5,
        num_actions: 2,
        r_max: 1.0,
        gamma: 0.9,
        start_state: 1,
        horizon_cap: 6,
        transitions: vec![
            Transition { s: 1, a: 0, next: 2, p: 0.6, r: 0.3 },
            Transition { s: 1, a: 0, next: 0, p: 0.4, r: -0.5 },
            Transition { s: 1, a: 1, next: 2, p: 0.3, r: 0.8 },
            Transition { s: 1, a: 1, next: 0, p: 0.7, r: 0.1 },
            Transition { s: 2, a: 0, next: 3, p: 0.7, r: 0.5 },
            Transition { s: 2, a: 0, next: 0, p: 0.3, r: -0.4 },
            Transition { s: 2, a: 1, next: 3, p: 0.5, r: -0.2 },
            Transition { s: 2, a: 1, next: 0, p: 0.5, r: 0.9 },
            Transition { s: 3, a: 0, next: 4, p: 0.8, r: 0.2 },
            Transition { s: 3, a: 0, next: 0, p: 0.2, r: -0.7 },
            Transition { s: 3, a: 1, next: 4, p: 0.4, r: 1.0 },
            Transition { s: 3, a: 1, next: 0, p: 0.6, r: -0.1 },
            Transition { s: 4, a: 0, next: 0, p: 1.0, r: 0.6 },
            Transition { s: 4, a: 1, next: 0, p: 1.0, r: -0.3 },
        ],
    }
}
