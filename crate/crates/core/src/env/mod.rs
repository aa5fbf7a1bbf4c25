//! Benchmark environments and the metadata the harness and the live service
//! need on top of the bare model: start distributions, initial beliefs,
//! agent positions and belief marginals.

pub mod rocksample;
pub mod tag;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{Belief, DiscretePomdp};

pub use rocksample::{make_rocksample, sensor_accuracy, RockSampleSpec};
pub use tag::{make_tag, opponent_transition, TagGrid, TagSpec};

/// Environment spec file contents: `{"env": "tag" | "rocksample", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "lowercase")]
pub enum EnvSpec {
    Tag(TagSpec),
    #[serde(rename = "rocksample")]
    RockSample(RockSampleSpec),
}

impl EnvSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn name(&self) -> String {
        match self {
            EnvSpec::Tag(_) => "tag".into(),
            EnvSpec::RockSample(s) => format!("rocksample({},{},{},{})", s.n, s.k, s.sr, s.sp),
        }
    }
}

/// How the agent's belief starts out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeliefInit {
    /// Uniform over every non-terminal state.
    UniformFull,
    /// Known start position, uniform over rock qualities.
    UniformRocks,
}

#[derive(Debug, Clone)]
enum Layout {
    Tag(TagGrid),
    RockSample(RockSampleSpec),
}

/// A built environment: model plus geometry.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    model: DiscretePomdp,
    layout: Layout,
}

impl Environment {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        let (model, layout) = match &spec {
            EnvSpec::Tag(t) => (make_tag(t)?, Layout::Tag(TagGrid::new(t)?)),
            EnvSpec::RockSample(r) => (make_rocksample(r)?, Layout::RockSample(r.clone())),
        };
        Ok(Self {
            spec,
            model,
            layout,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn model(&self) -> &DiscretePomdp {
        &self.model
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    pub fn default_max_steps(&self) -> usize {
        match &self.spec {
            EnvSpec::Tag(t) => t.max_steps,
            EnvSpec::RockSample(_) => 200,
        }
    }

    pub fn default_belief_init(&self) -> BeliefInit {
        match self.layout {
            Layout::Tag(_) => BeliefInit::UniformFull,
            Layout::RockSample(_) => BeliefInit::UniformRocks,
        }
    }

    fn non_terminal_states(&self) -> Vec<usize> {
        (0..self.model.num_states())
            .filter(|s| !self.model.is_terminal(*s))
            .collect()
    }

    /// Distribution the true start state is drawn from: uniform over agent
    /// and opponent cells in Tag; start cell with uniformly random rocks in
    /// RockSample.
    pub fn start_distribution(&self) -> Belief {
        match &self.layout {
            Layout::Tag(_) => {
                Belief::uniform_over(self.model.num_states(), &self.non_terminal_states())
                    .expect("tag has non-terminal states")
            }
            Layout::RockSample(spec) => self.uniform_rocks(spec),
        }
    }

    fn uniform_rocks(&self, spec: &RockSampleSpec) -> Belief {
        let start = spec.start_pos();
        let states: Vec<usize> = (0..spec.num_rock_states())
            .map(|bits| spec.state(start, bits))
            .collect();
        Belief::uniform_over(self.model.num_states(), &states).expect("valid start states")
    }

    pub fn initial_belief(&self, init: BeliefInit) -> Result<Belief> {
        match (init, &self.layout) {
            (BeliefInit::UniformFull, _) => {
                Belief::uniform_over(self.model.num_states(), &self.non_terminal_states())
            }
            (BeliefInit::UniformRocks, Layout::RockSample(spec)) => Ok(self.uniform_rocks(spec)),
            (BeliefInit::UniformRocks, Layout::Tag(_)) => Err(Error::Config(
                "uniform-rocks belief initialization needs a rocksample environment".into(),
            )),
        }
    }

    /// Fully observable agent position of a state, `None` for terminal states.
    pub fn agent_position(&self, s: usize) -> Option<(i32, i32)> {
        match &self.layout {
            Layout::Tag(grid) => grid.decode(s).map(|(agent, _)| grid.cells()[agent]),
            Layout::RockSample(spec) => spec.decode(s).map(|(pos, _)| pos),
        }
    }

    /// Most likely agent position under a belief.
    pub fn belief_agent_position(&self, b: &Belief) -> Option<(i32, i32)> {
        let mut mass: Vec<((i32, i32), f64)> = Vec::new();
        for (s, p) in b.support() {
            if let Some(pos) = self.agent_position(s) {
                match mass.iter_mut().find(|(q, _)| *q == pos) {
                    Some((_, m)) => *m += p,
                    None => mass.push((pos, p)),
                }
            }
        }
        mass.into_iter()
            .fold(None, |best: Option<((i32, i32), f64)>, x| match best {
                Some(b) if b.1 >= x.1 => Some(b),
                _ => Some(x),
            })
            .map(|(pos, _)| pos)
    }

    /// What a human watching the belief sees: the opponent-cell marginal in
    /// Tag, per-rock probability of being good in RockSample.
    ///
    /// Tag marginals are renormalized over non-terminal mass so they sum to
    /// one while the episode runs.
    pub fn belief_marginal(&self, b: &Belief) -> Vec<f64> {
        match &self.layout {
            Layout::Tag(grid) => {
                let mut m = vec![0.0; grid.len()];
                for (s, p) in b.support() {
                    if let Some((_, opp)) = grid.decode(s) {
                        m[opp] += p;
                    }
                }
                let total: f64 = m.iter().sum();
                if total > 0.0 {
                    m.iter_mut().for_each(|x| *x /= total);
                }
                m
            }
            Layout::RockSample(spec) => {
                let mut m = vec![0.0; spec.k];
                let mut total = 0.0;
                for (s, p) in b.support() {
                    if let Some((_, bits)) = spec.decode(s) {
                        total += p;
                        for (i, x) in m.iter_mut().enumerate() {
                            if bits & (1 << i) != 0 {
                                *x += p;
                            }
                        }
                    }
                }
                if total > 0.0 {
                    m.iter_mut().for_each(|x| *x /= total);
                }
                m
            }
        }
    }

    /// Cells for Tag, the full grid for RockSample.
    pub fn cells(&self) -> Vec<(i32, i32)> {
        match &self.layout {
            Layout::Tag(grid) => grid.cells().to_vec(),
            Layout::RockSample(spec) => {
                let n = spec.n as i32;
                (0..n).flat_map(|y| (0..n).map(move |x| (x, y))).collect()
            }
        }
    }

    pub fn rock_positions(&self) -> Option<Vec<(i32, i32)>> {
        match &self.layout {
            Layout::RockSample(spec) => spec.rocks().ok(),
            Layout::Tag(_) => None,
        }
    }

    pub fn tag_grid(&self) -> Option<&TagGrid> {
        match &self.layout {
            Layout::Tag(grid) => Some(grid),
            Layout::RockSample(_) => None,
        }
    }

    pub fn rocksample_spec(&self) -> Option<&RockSampleSpec> {
        match &self.layout {
            Layout::RockSample(spec) => Some(spec),
            Layout::Tag(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shapes() {
        let tag: EnvSpec = serde_json::from_str(r#"{"env": "tag"}"#).unwrap();
        assert_eq!(tag, EnvSpec::Tag(TagSpec::default()));
        let rs: EnvSpec =
            serde_json::from_str(r#"{"env": "rocksample", "n": 8, "k": 4, "sr": 10, "sp": -1}"#)
                .unwrap();
        assert_eq!(rs, EnvSpec::RockSample(RockSampleSpec::new(8, 4, 10.0, -1.0)));
        assert!(serde_json::from_str::<EnvSpec>(r#"{"env": "maze"}"#).is_err());
    }

    #[test]
    fn tag_marginal_is_uniform_at_start() {
        let env = Environment::new(EnvSpec::Tag(TagSpec::default())).unwrap();
        let b = env.initial_belief(BeliefInit::UniformFull).unwrap();
        let m = env.belief_marginal(&b);
        assert_eq!(m.len(), 29);
        for x in m {
            assert!((x - 1.0 / 29.0).abs() < 1e-12);
        }
        assert!(env.initial_belief(BeliefInit::UniformRocks).is_err());
    }

    #[test]
    fn rocksample_start_and_marginal() {
        let spec = RockSampleSpec::new(8, 4, 10.0, -1.0);
        let env = Environment::new(EnvSpec::RockSample(spec.clone())).unwrap();
        let b = env.initial_belief(BeliefInit::UniformRocks).unwrap();
        assert_eq!(b.support().len(), 16);
        assert_eq!(env.belief_agent_position(&b), Some(spec.start_pos()));
        for x in env.belief_marginal(&b) {
            assert!((x - 0.5).abs() < 1e-12);
        }
        assert_eq!(env.start_distribution(), b);
    }
}
