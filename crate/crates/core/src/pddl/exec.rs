use super::model::{GroundAction, State};
use super::PddlError;

/// `pre_pos ⊆ state` and `pre_neg ∩ state = ∅`.
pub fn applicable(state: &State, action: &GroundAction) -> bool {
    state.satisfies(&action.pre_pos, &action.pre_neg)
}

/// `(state \ del) ∪ add`; the input state is left untouched.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, PddlError> {
    if !applicable(state, action) {
        return Err(PddlError::InapplicableAction(action.signature()));
    }
    let mut next = state.clone();
    for d in &action.del {
        next.atoms.remove(d);
    }
    for a in &action.add {
        next.atoms.insert(a.clone());
    }
    Ok(next)
}
