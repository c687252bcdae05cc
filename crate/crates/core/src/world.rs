//! Karel grid world: state, transition function and perception primitives.
//!
//! Coordinates are `(row, col)` with row 0 at the top. North decreases the
//! row, East increases the column. Cells outside the grid behave as walls.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default side length of the square grid.
pub const GRID_SIDE: usize = 8;
/// Default upper bound on the number of markers in a single cell.
pub const MARKER_CAP: u8 = 10;
/// Number of perception primitives.
pub const NUM_PERCEPTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    /// Row/column offset of one step in this direction.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (-1, 0),
            Heading::East => (0, 1),
            Heading::South => (1, 0),
            Heading::West => (0, -1),
        }
    }

    fn letter(self) -> &'static str {
        match self {
            Heading::North => "N",
            Heading::East => "E",
            Heading::South => "S",
            Heading::West => "W",
        }
    }
}

impl Serialize for Heading {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.letter())
    }
}

impl<'de> Deserialize<'de> for Heading {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "N" => Ok(Heading::North),
            "E" => Ok(Heading::East),
            "S" => Ok(Heading::South),
            "W" => Ok(Heading::West),
            other => Err(serde::de::Error::custom(format!("unknown heading `{other}`"))),
        }
    }
}

/// Agent actions. `End` terminates a demonstration and is never applied to a
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Move,
    TurnLeft,
    TurnRight,
    PickMarker,
    PutMarker,
    End,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Move,
        Action::TurnLeft,
        Action::TurnRight,
        Action::PickMarker,
        Action::PutMarker,
        Action::End,
    ];

    /// The five actions that can appear in a program body.
    pub const BODY: [Action; 5] = [
        Action::Move,
        Action::TurnLeft,
        Action::TurnRight,
        Action::PickMarker,
        Action::PutMarker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Move => "move",
            Action::TurnLeft => "turnLeft",
            Action::TurnRight => "turnRight",
            Action::PickMarker => "pickMarker",
            Action::PutMarker => "putMarker",
            Action::End => "end",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown action `{0}`")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAction(s.to_string()))
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Perception primitives, in the column order used by perception matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Perception {
    FrontIsClear,
    LeftIsClear,
    RightIsClear,
    MarkersPresent,
    NoMarkersPresent,
}

impl Perception {
    pub const ALL: [Perception; NUM_PERCEPTIONS] = [
        Perception::FrontIsClear,
        Perception::LeftIsClear,
        Perception::RightIsClear,
        Perception::MarkersPresent,
        Perception::NoMarkersPresent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Perception::FrontIsClear => "frontIsClear",
            Perception::LeftIsClear => "leftIsClear",
            Perception::RightIsClear => "rightIsClear",
            Perception::MarkersPresent => "markersPresent",
            Perception::NoMarkersPresent => "noMarkersPresent",
        }
    }
}

impl fmt::Display for Perception {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perception {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Perception::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown perception `{s}`"))
    }
}

impl Serialize for Perception {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Perception {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Truth values of the five perception primitives in one state.
pub type PerceptionVector = [bool; NUM_PERCEPTIONS];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidAction {
    #[error("move blocked by a wall or the grid boundary")]
    Blocked,
    #[error("pickMarker on a cell without markers")]
    NoMarker,
    #[error("putMarker on a cell already holding {0} markers")]
    MarkerCap(u8),
    #[error("`end` cannot be applied to a state")]
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("{0} rows do not match the declared grid shape")]
    Shape(&'static str),
    #[error("agent at ({0}, {1}) is outside the grid")]
    AgentOutside(usize, usize),
    #[error("agent at ({0}, {1}) stands on a wall")]
    AgentOnWall(usize, usize),
    #[error("cell ({0}, {1}) holds {2} markers, above the cap")]
    MarkerCap(usize, usize, u8),
}

/// A complete Karel world state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct WorldState {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    markers: Vec<u8>,
    agent: (usize, usize),
    heading: Heading,
    marker_cap: u8,
}

impl WorldState {
    /// An empty `height x width` grid with the agent at `agent`.
    pub fn open(width: usize, height: usize, agent: (usize, usize), heading: Heading) -> Result<Self, StateError> {
        Self::new(
            width,
            height,
            vec![false; width * height],
            vec![0; width * height],
            agent,
            heading,
        )
    }

    /// Builds a state from row-major wall and marker grids.
    pub fn new(
        width: usize,
        height: usize,
        walls: Vec<bool>,
        markers: Vec<u8>,
        agent: (usize, usize),
        heading: Heading,
    ) -> Result<Self, StateError> {
        let state = WorldState {
            width,
            height,
            walls,
            markers,
            agent,
            heading,
            marker_cap: MARKER_CAP,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if self.width == 0 || self.height == 0 {
            return Err(StateError::EmptyGrid);
        }
        let cells = self.width * self.height;
        if self.walls.len() != cells {
            return Err(StateError::Shape("wall"));
        }
        if self.markers.len() != cells {
            return Err(StateError::Shape("marker"));
        }
        let (r, c) = self.agent;
        if r >= self.height || c >= self.width {
            return Err(StateError::AgentOutside(r, c));
        }
        if self.walls[self.idx(r, c)] {
            return Err(StateError::AgentOnWall(r, c));
        }
        for (i, &m) in self.markers.iter().enumerate() {
            if m > self.marker_cap {
                return Err(StateError::MarkerCap(i / self.width, i % self.width, m));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn heading(&self) -> Heading {
        self.heading
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        self.walls[self.idx(row, col)]
    }

    pub fn markers_at(&self, row: usize, col: usize) -> u8 {
        self.markers[self.idx(row, col)]
    }

    pub fn set_wall(&mut self, row: usize, col: usize, wall: bool) {
        let i = self.idx(row, col);
        self.walls[i] = wall;
    }

    pub fn set_markers(&mut self, row: usize, col: usize, count: u8) {
        let i = self.idx(row, col);
        self.markers[i] = count.min(self.marker_cap);
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// The in-grid, wall-free cell one step from the agent in `dir`.
    fn neighbour(&self, dir: Heading) -> Option<(usize, usize)> {
        let (dr, dc) = dir.delta();
        let r = self.agent.0.checked_add_signed(dr)?;
        let c = self.agent.1.checked_add_signed(dc)?;
        (r < self.height && c < self.width && !self.is_wall(r, c)).then_some((r, c))
    }

    /// Applies the transition function. The receiver is left untouched.
    pub fn apply(&self, action: Action) -> Result<WorldState, InvalidAction> {
        let mut next = self.clone();
        let here = self.idx(self.agent.0, self.agent.1);
        match action {
            Action::Move => {
                next.agent = self.neighbour(self.heading).ok_or(InvalidAction::Blocked)?;
            }
            Action::TurnLeft => next.heading = self.heading.left(),
            Action::TurnRight => next.heading = self.heading.right(),
            Action::PickMarker => {
                if self.markers[here] == 0 {
                    return Err(InvalidAction::NoMarker);
                }
                next.markers[here] -= 1;
            }
            Action::PutMarker => {
                if self.markers[here] >= self.marker_cap {
                    return Err(InvalidAction::MarkerCap(self.markers[here]));
                }
                next.markers[here] += 1;
            }
            Action::End => return Err(InvalidAction::End),
        }
        Ok(next)
    }

    pub fn perceive(&self) -> PerceptionVector {
        let markers = self.markers_at(self.agent.0, self.agent.1) > 0;
        [
            self.neighbour(self.heading).is_some(),
            self.neighbour(self.heading.left()).is_some(),
            self.neighbour(self.heading.right()).is_some(),
            markers,
            !markers,
        ]
    }
}

/// Wire format of a state.
#[derive(Serialize, Deserialize)]
struct RawState {
    width: usize,
    height: usize,
    walls: Vec<Vec<bool>>,
    markers: Vec<Vec<u8>>,
    agent: [usize; 2],
    heading: Heading,
}

impl From<WorldState> for RawState {
    fn from(s: WorldState) -> Self {
        RawState {
            width: s.width,
            height: s.height,
            walls: s.walls.chunks(s.width).map(<[bool]>::to_vec).collect(),
            markers: s.markers.chunks(s.width).map(<[u8]>::to_vec).collect(),
            agent: [s.agent.0, s.agent.1],
            heading: s.heading,
        }
    }
}

impl TryFrom<RawState> for WorldState {
    type Error = StateError;

    fn try_from(raw: RawState) -> Result<Self, Self::Error> {
        if raw.walls.len() != raw.height || raw.walls.iter().any(|r| r.len() != raw.width) {
            return Err(StateError::Shape("wall"));
        }
        if raw.markers.len() != raw.height || raw.markers.iter().any(|r| r.len() != raw.width) {
            return Err(StateError::Shape("marker"));
        }
        WorldState::new(
            raw.width,
            raw.height,
            raw.walls.into_iter().flatten().collect(),
            raw.markers.into_iter().flatten().collect(),
            (raw.agent[0], raw.agent[1]),
            raw.heading,
        )
    }
}
