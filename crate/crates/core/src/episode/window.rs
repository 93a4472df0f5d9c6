use super::types::{Episode, RobotState, SceneFrame, TactileFrame};
use crate::error::{Error, Result};

/// A training/evaluation window cut from one episode.
///
/// Frames `0..context` are observed; frames `context..=last` are targets.
/// `actions` covers the whole window, `0..=last`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub context_scene: Vec<SceneFrame>,
    pub context_tactile: Vec<TactileFrame>,
    pub actions: Vec<RobotState>,
    pub target_scene: Vec<SceneFrame>,
    pub target_tactile: Vec<TactileFrame>,
    pub context: usize,
    pub last: usize,
}

impl SequenceSample {
    /// Number of predicted frames, `last - context + 1`.
    pub fn horizon(&self) -> usize {
        self.last + 1 - self.context
    }

    pub fn len(&self) -> usize {
        self.last + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scene(&self, t: usize) -> &SceneFrame {
        if t < self.context {
            &self.context_scene[t]
        } else {
            &self.target_scene[t - self.context]
        }
    }

    pub fn tactile(&self, t: usize) -> &TactileFrame {
        if t < self.context {
            &self.context_tactile[t]
        } else {
            &self.target_tactile[t - self.context]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context < 1 || self.last < self.context {
            return Err(Error::Contract(format!(
                "window needs 1 <= context <= last, got context={} last={}",
                self.context, self.last
            )));
        }
        let horizon = self.horizon();
        let ok = self.context_scene.len() == self.context
            && self.context_tactile.len() == self.context
            && self.target_scene.len() == horizon
            && self.target_tactile.len() == horizon
            && self.actions.len() == self.last + 1;
        if !ok {
            return Err(Error::Contract("window stream lengths disagree with context/last".into()));
        }
        Ok(())
    }
}

/// Number of windows `make_windows` produces.
pub fn window_count(len: usize, last: usize, stride: usize) -> usize {
    if stride == 0 || len < last + 1 {
        0
    } else {
        (len - last - 1) / stride + 1
    }
}

/// Slides a `last + 1` frame window over the episode. An episode shorter than
/// the window yields no samples.
pub fn make_windows(episode: &Episode, context: usize, last: usize, stride: usize) -> Vec<SequenceSample> {
    let n = window_count(episode.len(), last, stride);
    (0..n)
        .map(|w| {
            let s = w * stride;
            SequenceSample {
                context_scene: episode.scene[s..s + context].to_vec(),
                context_tactile: episode.tactile[s..s + context].to_vec(),
                actions: episode.robot[s..=s + last].to_vec(),
                target_scene: episode.scene[s + context..=s + last].to_vec(),
                target_tactile: episode.tactile[s + context..=s + last].to_vec(),
                context,
                last,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::episode::types::{EpisodeMeta, FrictionLayout};

    fn episode(len: usize) -> Episode {
        let scene = (0..len).map(|i| SceneFrame::filled(2, 2, [(i % 256) as f32 / 255.0; 3])).collect();
        let tactile = (0..len).map(|i| TactileFrame::filled(i as f32)).collect();
        let robot = (0..len).map(|i| RobotState::new([i as f32; 7])).collect();
        let meta = EpisodeMeta {
            sample_rate_hz: 10.0,
            friction_layout: FrictionLayout::Center,
            seed: 0,
            split_tag: "train".into(),
            length: len,
            no_contact: false,
        };
        Episode::new(scene, tactile, robot, meta).unwrap()
    }

    /// Enumerates window starts directly: every start `s` on the stride grid
    /// whose last frame `s + last` is inside the episode.
    fn enumerate_starts(len: usize, last: usize, stride: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut s = 0;
        while s + last < len {
            starts.push(s);
            s += stride;
        }
        starts
    }

    #[test]
    fn twenty_frames_context_two_last_seven() {
        assert_eq!(enumerate_starts(20, 7, 1).len(), 13);
        let windows = make_windows(&episode(20), 2, 7, 1);
        assert_eq!(windows.len(), 13);
        for (w, s) in windows.iter().enumerate() {
            s.validate().unwrap();
            assert_eq!(s.actions[0].pose[0], w as f32);
            assert_eq!(s.target_tactile.last().unwrap().taxels[0], (w + 7) as f32);
        }
    }

    #[test]
    fn too_short_episode_gives_nothing() {
        assert!(make_windows(&episode(7), 2, 7, 1).is_empty());
    }

    #[test]
    fn stride_equal_to_length_gives_one_window() {
        assert_eq!(make_windows(&episode(20), 2, 7, 20).len(), 1);
    }

    proptest! {
        #[test]
        fn count_matches_enumeration(len in 1usize..80, context in 1usize..4, extra in 0usize..10, stride in 1usize..12) {
            let last = context + extra;
            let windows = make_windows(&episode(len), context, last, stride);
            prop_assert_eq!(windows.len(), enumerate_starts(len, last, stride).len());
            if len > last {
                prop_assert_eq!(windows.len(), (len - last - 1) / stride + 1);
            }
            for w in &windows {
                prop_assert!(w.validate().is_ok());
                prop_assert_eq!(w.horizon(), extra + 1);
            }
        }
    }
}
