//! RockSample(n, k, sr, sp).
//!
//! States are `(y * n + x) * 2^k + rocks` plus one terminal state, where bit
//! `i` of `rocks` is set when rock `i` is good. Moving east off the grid
//! exits with +10. Checking rock `i` costs `sp` and reports its quality
//! correctly with probability `(1 + 2^(-d/sr)) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{DiscretePomdp, PomdpBuilder};

pub type Pos = (i32, i32);

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const SAMPLE: usize = 4;
pub const FIRST_CHECK: usize = 5;

pub const OBS_GOOD: usize = 0;
pub const OBS_BAD: usize = 1;
pub const OBS_NONE: usize = 2;

const MAX_ROCKS: usize = 16;

fn default_discount() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockSampleSpec {
    pub n: usize,
    pub k: usize,
    pub sr: f64,
    pub sp: f64,
    /// Rock cells as `(x, y)`; defaults to a known layout for (7, 8) and (8, 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rock_positions: Option<Vec<Pos>>,
    /// Robot start cell; defaults to `(0, n / 2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Pos>,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl RockSampleSpec {
    pub fn new(n: usize, k: usize, sr: f64, sp: f64) -> Self {
        Self {
            n,
            k,
            sr,
            sp,
            rock_positions: None,
            start: None,
            discount: default_discount(),
        }
    }

    /// The standard RockSample(7, 8) layout.
    pub fn classic_7_8() -> Vec<Pos> {
        vec![(2, 0), (0, 1), (3, 1), (6, 3), (2, 4), (3, 4), (5, 5), (1, 6)]
    }

    /// Rocks near the corners of the 8×8 grid.
    pub fn corners_8_4() -> Vec<Pos> {
        vec![(1, 1), (6, 1), (1, 6), (6, 6)]
    }

    pub fn rocks(&self) -> Result<Vec<Pos>> {
        match (&self.rock_positions, self.n, self.k) {
            (Some(r), _, _) => Ok(r.clone()),
            (None, 7, 8) => Ok(Self::classic_7_8()),
            (None, 8, 4) => Ok(Self::corners_8_4()),
            (None, n, k) => Err(Error::InvalidArgument(format!(
                "no default rock layout for RockSample({n}, {k}); give rock_positions"
            ))),
        }
    }

    pub fn start_pos(&self) -> Pos {
        self.start.unwrap_or((0, (self.n / 2) as i32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("grid size must be positive".into()));
        }
        if self.k == 0 || self.k > MAX_ROCKS {
            return Err(Error::InvalidArgument(format!(
                "rock count {} not in 1..={MAX_ROCKS}",
                self.k
            )));
        }
        if !(self.sr > 0.0) {
            return Err(Error::InvalidArgument("sr must be positive".into()));
        }
        if !(self.sp <= 0.0) {
            return Err(Error::InvalidArgument("sp must be non-positive".into()));
        }
        let rocks = self.rocks()?;
        if rocks.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "{} rock positions for k = {}",
                rocks.len(),
                self.k
            )));
        }
        for (i, r) in rocks.iter().enumerate() {
            if !self.in_grid(*r) {
                return Err(Error::InvalidArgument(format!("rock {i} at {r:?} is off the grid")));
            }
            if rocks[..i].contains(r) {
                return Err(Error::InvalidArgument(format!("two rocks at {r:?}")));
            }
        }
        if !self.in_grid(self.start_pos()) {
            return Err(Error::InvalidArgument("start position is off the grid".into()));
        }
        Ok(())
    }

    fn in_grid(&self, (x, y): Pos) -> bool {
        let n = self.n as i32;
        (0..n).contains(&x) && (0..n).contains(&y)
    }

    pub fn num_rock_states(&self) -> usize {
        1 << self.k
    }

    pub fn state(&self, pos: Pos, rocks: usize) -> usize {
        ((pos.1 as usize) * self.n + pos.0 as usize) * self.num_rock_states() + rocks
    }

    pub fn terminal_state(&self) -> usize {
        self.n * self.n * self.num_rock_states()
    }

    pub fn decode(&self, s: usize) -> Option<(Pos, usize)> {
        if s >= self.terminal_state() {
            return None;
        }
        let cell = s / self.num_rock_states();
        Some((
            ((cell % self.n) as i32, (cell / self.n) as i32),
            s % self.num_rock_states(),
        ))
    }

    pub fn action_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = ["north", "south", "east", "west", "sample"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        labels.extend((1..=self.k).map(|i| format!("check_{i}")));
        labels
    }
}

/// Probability that a check at Euclidean distance `d` reports correctly.
pub fn sensor_accuracy(d: f64, sr: f64) -> f64 {
    (1.0 + (-d / sr).exp2()) / 2.0
}

pub fn make_rocksample(spec: &RockSampleSpec) -> Result<DiscretePomdp> {
    spec.validate()?;
    let rocks = spec.rocks()?;
    let k = spec.k;
    let n = spec.n as i32;
    let terminal = spec.terminal_state();
    let num_actions = FIRST_CHECK + k;
    let mut b = PomdpBuilder::new(terminal + 1, num_actions, 3, spec.discount);
    b.action_labels(spec.action_labels());
    for y in 0..n {
        for x in 0..n {
            for bits in 0..spec.num_rock_states() {
                let s = spec.state((x, y), bits);
                let rock_here = rocks.iter().position(|r| *r == (x, y));
                for a in 0..num_actions {
                    let (next, reward) = match a {
                        NORTH => (spec.state((x, (y + 1).min(n - 1)), bits), 0.0),
                        SOUTH => (spec.state((x, (y - 1).max(0)), bits), 0.0),
                        EAST if x + 1 >= n => (terminal, 10.0),
                        EAST => (spec.state((x + 1, y), bits), 0.0),
                        WEST => (spec.state(((x - 1).max(0), y), bits), 0.0),
                        SAMPLE => match rock_here {
                            Some(i) if bits & (1 << i) != 0 => {
                                (spec.state((x, y), bits & !(1 << i)), 10.0)
                            }
                            _ => (s, -10.0),
                        },
                        _ => (s, spec.sp),
                    };
                    b.transition(s, a, vec![(next, 1.0)]).reward(s, a, reward);

                    let obs_row = if a >= FIRST_CHECK {
                        let i = a - FIRST_CHECK;
                        let (rx, ry) = rocks[i];
                        let d = f64::from((rx - x).pow(2) + (ry - y).pow(2)).sqrt();
                        let acc = sensor_accuracy(d, spec.sr);
                        let good = bits & (1 << i) != 0;
                        let (correct, wrong) = if good {
                            (OBS_GOOD, OBS_BAD)
                        } else {
                            (OBS_BAD, OBS_GOOD)
                        };
                        vec![(correct, acc), (wrong, 1.0 - acc)]
                    } else {
                        vec![(OBS_NONE, 1.0)]
                    };
                    b.observation(s, a, obs_row);
                }
            }
        }
    }
    b.terminal(terminal, OBS_NONE);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let spec = RockSampleSpec::new(8, 4, 10.0, -1.0);
        let m = make_rocksample(&spec).unwrap();
        assert_eq!(m.num_states(), 1025);
        assert_eq!(m.num_actions(), 9);
        assert_eq!(m.num_observations(), 3);
    }

    #[test]
    fn sensor_curve() {
        assert_eq!(sensor_accuracy(0.0, 10.0), 1.0);
        assert!((sensor_accuracy(20.0, 20.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn exit_sample_and_check() {
        let spec = RockSampleSpec::new(8, 4, 10.0, -1.0);
        let m = make_rocksample(&spec).unwrap();
        let t = spec.terminal_state();
        let s = spec.state((7, 3), 0b1010);
        assert_eq!(m.transition_distribution(s, EAST).unwrap(), &[(t, 1.0)]);
        assert_eq!(m.reward(s, EAST), 10.0);
        assert_eq!(m.reward(s, NORTH), 0.0);

        // Rock 1 sits at (6, 1).
        let s = spec.state((6, 1), 0b0010);
        assert_eq!(m.reward(s, SAMPLE), 10.0);
        assert_eq!(
            m.transition_distribution(s, SAMPLE).unwrap(),
            &[(spec.state((6, 1), 0), 1.0)]
        );
        let s = spec.state((6, 1), 0b0001);
        assert_eq!(m.reward(s, SAMPLE), -10.0);
        assert_eq!(m.transition_distribution(s, SAMPLE).unwrap(), &[(s, 1.0)]);
        let s = spec.state((3, 3), 0b1111);
        assert_eq!(m.reward(s, SAMPLE), -10.0);

        assert_eq!(m.reward(s, FIRST_CHECK), -1.0);
        let at_rock = spec.state((1, 1), 0b0001);
        assert_eq!(m.observation_distribution(at_rock, FIRST_CHECK).unwrap(), &[(OBS_GOOD, 1.0)]);
        assert_eq!(m.observation_distribution(at_rock, NORTH).unwrap(), &[(OBS_NONE, 1.0)]);
    }

    #[test]
    fn off_grid_moves_are_noops() {
        let spec = RockSampleSpec::new(8, 4, 10.0, -1.0);
        let m = make_rocksample(&spec).unwrap();
        let s = spec.state((0, 0), 3);
        assert_eq!(m.transition_distribution(s, WEST).unwrap(), &[(s, 1.0)]);
        assert_eq!(m.transition_distribution(s, SOUTH).unwrap(), &[(s, 1.0)]);
        let s = spec.state((0, 7), 3);
        assert_eq!(m.transition_distribution(s, NORTH).unwrap(), &[(s, 1.0)]);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = RockSampleSpec::new(5, 2, 10.0, -1.0);
        assert!(make_rocksample(&spec).is_err(), "no default layout");
        spec.rock_positions = Some(vec![(0, 0), (0, 0)]);
        assert!(make_rocksample(&spec).is_err());
        spec.rock_positions = Some(vec![(0, 0), (5, 0)]);
        assert!(make_rocksample(&spec).is_err());
        spec.rock_positions = Some(vec![(0, 0), (4, 0)]);
        assert!(make_rocksample(&spec).is_ok());
        spec.sp = 1.0;
        assert!(make_rocksample(&spec).is_err());
    }

    #[test]
    fn decode_round_trip() {
        let spec = RockSampleSpec::new(7, 8, 20.0, 0.0);
        let s = spec.state((3, 5), 0b1011_0001);
        assert_eq!(spec.decode(s), Some(((3, 5), 0b1011_0001)));
        assert_eq!(spec.decode(spec.terminal_state()), None);
        assert_eq!(spec.terminal_state() + 1, 12_545);
    }
}
