use serde::{Deserialize, Serialize};

use crate::config::CurriculumConfig;

/// Scale applied to negative reward terms, adapted from episode lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub s: f64,
    pub config: CurriculumConfig,
}

impl CurriculumState {
    pub fn new(config: CurriculumConfig) -> Self {
        Self {
            s: config.init.min(config.cap),
            config,
        }
    }

    /// Scale to use for rewards; 1 when the curriculum is disabled.
    pub fn scale(&self) -> f64 {
        if self.config.enabled {
            self.s
        } else {
            1.0
        }
    }
}

/// Shrinks `s` for short episodes, grows it for long ones, caps it.
pub fn curriculum_step(state: CurriculumState, mean_episode_length: f64) -> CurriculumState {
    let c = state.config;
    let s = if mean_episode_length < c.low_threshold {
        state.s * c.down
    } else if mean_episode_length > c.high_threshold {
        state.s * c.up
    } else {
        state.s
    };
    CurriculumState {
        s: s.min(c.cap),
        config: c,
    }
}

/// Sums reward terms, scaling only the negative ones by `s`.
pub fn apply_curriculum(terms: &[f64], s: f64) -> f64 {
    terms.iter().map(|&r| if r < 0.0 { s * r } else { r }).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_curriculum_scales_by_one() {
        let st = CurriculumState::new(CurriculumConfig {
            enabled: false,
            ..CurriculumConfig::default()
        });
        assert_eq!(st.scale(), 1.0);
    }
}
