use crate::episode::{SequenceSample, TactileFrame};

/// Replaces every tactile frame, context and target, with `baseline`.
pub fn anaesthetise(sample: &SequenceSample, baseline: &TactileFrame) -> SequenceSample {
    SequenceSample {
        context_tactile: vec![*baseline; sample.context_tactile.len()],
        target_tactile: vec![*baseline; sample.target_tactile.len()],
        ..sample.clone()
    }
}
