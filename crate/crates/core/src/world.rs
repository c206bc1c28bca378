//! The research-centre floor: a rectangular grid of walkable and blocked
//! cells, with interactive stations and one spawn list per team slot.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const TEAM_SLOTS: usize = 4;
pub const MAX_STATIONS: usize = 32;
pub const MAX_SIDE: u32 = 1024;

const DEFAULT_MAP: &str = include_str!("../assets/default_map.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl From<[u32; 2]> for Cell {
    fn from([x, y]: [u32; 2]) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for [u32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    /// Tie-break order for paths of equal length.
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

pub type StationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationDef {
    pub id: StationId,
    pub cell: Cell,
}

/// On-disk and on-wire shape of a map, before invariant checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapFile {
    pub width: u32,
    pub height: u32,
    pub blocked: Vec<Cell>,
    pub stations: Vec<StationDef>,
    pub spawns: [Vec<Cell>; TEAM_SLOTS],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("malformed map file: {0}")]
    MalformedFile(String),
    #[error("map invariant violated: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MapFile", into = "MapFile")]
pub struct WorldMap {
    width: u32,
    height: u32,
    blocked: BTreeSet<Cell>,
    stations: Vec<StationDef>,
    spawns: [Vec<Cell>; TEAM_SLOTS],
}

impl TryFrom<MapFile> for WorldMap {
    type Error = MapError;

    fn try_from(file: MapFile) -> Result<Self, MapError> {
        let violation = |rule: String| Err(MapError::InvariantViolation(rule));
        if file.width == 0 || file.height == 0 {
            return violation("width and height must be positive".into());
        }
        if file.width > MAX_SIDE || file.height > MAX_SIDE {
            return violation(format!("width and height must not exceed {MAX_SIDE}"));
        }
        let in_bounds = |c: Cell| c.x < file.width && c.y < file.height;
        if let Some(c) = file.blocked.iter().find(|c| !in_bounds(**c)) {
            return violation(format!("blocked cell {:?} out of bounds", <[u32; 2]>::from(*c)));
        }
        let blocked: BTreeSet<Cell> = file.blocked.iter().copied().collect();
        if file.stations.is_empty() || file.stations.len() > MAX_STATIONS {
            return violation(format!("station count must be within 1..{MAX_STATIONS}"));
        }
        let mut ids = BTreeSet::new();
        let mut cells = BTreeSet::new();
        for s in &file.stations {
            if !in_bounds(s.cell) {
                return violation(format!("station {} out of bounds", s.id));
            }
            if blocked.contains(&s.cell) {
                return violation(format!("station {} on a blocked cell", s.id));
            }
            if !ids.insert(s.id) {
                return violation(format!("station id {} repeated", s.id));
            }
            if !cells.insert(s.cell) {
                return violation(format!("station {} shares its cell", s.id));
            }
        }
        for (team, list) in file.spawns.iter().enumerate() {
            if list.is_empty() {
                return violation(format!("team slot {team} has no spawn cell"));
            }
            for &c in list {
                if !in_bounds(c) {
                    return violation(format!("spawn of team slot {team} out of bounds"));
                }
                if blocked.contains(&c) {
                    return violation(format!("spawn of team slot {team} on a blocked cell"));
                }
            }
        }
        Ok(WorldMap { width: file.width, height: file.height, blocked, stations: file.stations, spawns: file.spawns })
    }
}

impl From<WorldMap> for MapFile {
    fn from(map: WorldMap) -> Self {
        MapFile {
            width: map.width,
            height: map.height,
            blocked: map.blocked.into_iter().collect(),
            stations: map.stations,
            spawns: map.spawns,
        }
    }
}

/// Parses a map file and checks its invariants.
pub fn load_map(bytes: &[u8]) -> Result<WorldMap, MapError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let file: MapFile =
        serde_path_to_error::deserialize(&mut de).map_err(|e| MapError::MalformedFile(e.to_string()))?;
    de.end().map_err(|e| MapError::MalformedFile(e.to_string()))?;
    WorldMap::try_from(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("target cell is unreachable")]
pub struct Unreachable;

impl WorldMap {
    /// The bundled 24×16 laboratory floor with 8 stations.
    pub fn default_map() -> WorldMap {
        load_map(DEFAULT_MAP.as_bytes()).expect("bundled map is valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn stations(&self) -> &[StationDef] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> Option<&StationDef> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn spawns(&self, team_slot: usize) -> &[Cell] {
        &self.spawns[team_slot]
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked.contains(&cell)
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    pub fn is_walkable(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.is_blocked(cell)
    }

    /// The in-bounds neighbour of `cell` in `dir`, walkable or not.
    pub fn neighbor(&self, cell: Cell, dir: Direction) -> Option<Cell> {
        let next = match dir {
            Direction::Up => Cell::new(cell.x, cell.y.checked_sub(1)?),
            Direction::Down => Cell::new(cell.x, cell.y + 1),
            Direction::Left => Cell::new(cell.x.checked_sub(1)?, cell.y),
            Direction::Right => Cell::new(cell.x + 1, cell.y),
        };
        self.in_bounds(next).then_some(next)
    }

    /// One step in `dir`, or no movement at all when the step would leave
    /// the map or enter a blocked cell.
    pub fn apply_move(&self, pos: Cell, dir: Direction) -> Cell {
        match self.neighbor(pos, dir) {
            Some(next) if !self.is_blocked(next) => next,
            _ => pos,
        }
    }

    /// Station within Chebyshev distance 1 of `pos`, lowest id first.
    pub fn reachable_station(&self, pos: Cell) -> Option<StationId> {
        self.stations.iter().filter(|s| s.cell.chebyshev(pos) <= 1).map(|s| s.id).min()
    }

    /// Minimum-length 4-neighbour path from `from` to `to`. Among equally
    /// short paths the one preferring Up, Down, Left, Right at each step wins.
    pub fn shortest_path(&self, from: Cell, to: Cell) -> Result<Vec<Direction>, Unreachable> {
        if !self.is_walkable(from) || !self.is_walkable(to) {
            return Err(Unreachable);
        }
        // Distances to `to`; moves are symmetric so this equals the forward
        // distance field.
        let dist = self.distance_field(to);
        let at = |c: Cell| dist[self.index(c)];
        if at(from) == u32::MAX {
            return Err(Unreachable);
        }
        let mut path = Vec::with_capacity(at(from) as usize);
        let mut pos = from;
        while pos != to {
            let here = at(pos);
            let (dir, next) = Direction::ALL
                .iter()
                .filter_map(|&d| {
                    let n = self.neighbor(pos, d)?;
                    (!self.is_blocked(n) && at(n) + 1 == here).then_some((d, n))
                })
                .next()
                .ok_or(Unreachable)?;
            path.push(dir);
            pos = next;
        }
        Ok(path)
    }

    /// Breadth-first distances from `origin`; `u32::MAX` marks unreachable.
    pub fn distance_field(&self, origin: Cell) -> Vec<u32> {
        let mut dist = vec![u32::MAX; (self.width * self.height) as usize];
        if !self.is_walkable(origin) {
            return dist;
        }
        let mut queue = VecDeque::from([origin]);
        dist[self.index(origin)] = 0;
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)];
            for dir in Direction::ALL {
                if let Some(n) = self.neighbor(c, dir) {
                    let i = self.index(n);
                    if !self.is_blocked(n) && dist[i] == u32::MAX {
                        dist[i] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    /// Closest cell (by path length) from which `station` is the reachable
    /// station, together with the path to it.
    pub fn path_to_station(&self, from: Cell, station: StationId) -> Result<(Cell, Vec<Direction>), Unreachable> {
        let dist = self.distance_field(from);
        let goal = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|&c| dist[self.index(c)] != u32::MAX && self.reachable_station(c) == Some(station))
            .min_by_key(|&c| (dist[self.index(c)], c.y, c.x))
            .ok_or(Unreachable)?;
        Ok((goal, self.shortest_path(from, goal)?))
    }

    fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(width: u32, height: u32) -> WorldMap {
        let corner = vec![Cell::new(0, 0)];
        WorldMap::try_from(MapFile {
            width,
            height,
            blocked: vec![],
            stations: vec![StationDef { id: 0, cell: Cell::new(width - 1, height - 1) }],
            spawns: [corner.clone(), corner.clone(), corner.clone(), corner],
        })
        .unwrap()
    }

    #[test]
    fn default_map_is_valid_and_sized() {
        let map = WorldMap::default_map();
        assert_eq!((map.width(), map.height()), (24, 16));
        assert_eq!(map.stations().len(), 8);
        for slot in 0..TEAM_SLOTS {
            for &spawn in map.spawns(slot) {
                for s in map.stations() {
                    assert!(map.path_to_station(spawn, s.id).is_ok(), "slot {slot} to {}", s.id);
                }
            }
        }
    }

    #[test]
    fn moves_and_clamps() {
        let map = open(3, 3);
        assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Right), Cell::new(1, 0));
        assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Left), Cell::new(0, 0));
        assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Up), Cell::new(0, 0));
        assert_eq!(map.apply_move(Cell::new(2, 2), Direction::Down), Cell::new(2, 2));
    }

    #[test]
    fn walls_block_movement() {
        let mut file = MapFile::from(open(3, 3));
        file.blocked.push(Cell::new(1, 0));
        let map = WorldMap::try_from(file).unwrap();
        assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Right), Cell::new(0, 0));
    }

    #[test]
    fn reach_is_chebyshev_one_with_lowest_id() {
        let corner = vec![Cell::new(0, 0)];
        let map = WorldMap::try_from(MapFile {
            width: 8,
            height: 3,
            blocked: vec![],
            stations: vec![
                StationDef { id: 3, cell: Cell::new(4, 1) },
                StationDef { id: 2, cell: Cell::new(0, 2) },
                StationDef { id: 1, cell: Cell::new(2, 1) },
            ],
            spawns: [corner.clone(), corner.clone(), corner.clone(), corner],
        })
        .unwrap();
        assert_eq!(map.reachable_station(Cell::new(1, 1)), Some(1));
        assert!(map.reachable_station(Cell::new(1, 1)).is_some());
        assert_eq!(map.reachable_station(Cell::new(3, 0)), Some(1));
        assert_eq!(map.reachable_station(Cell::new(6, 0)), None);
        assert_eq!(map.reachable_station(Cell::new(7, 1)), None);
        assert_eq!(map.reachable_station(Cell::new(5, 2)), Some(3));
    }

    #[test]
    fn diagonal_neighbour_reaches_station() {
        let map = open(3, 3);
        assert_eq!(map.reachable_station(Cell::new(1, 1)), Some(0));
        assert_eq!(map.reachable_station(Cell::new(0, 0)), None);
    }

    #[test]
    fn invariant_violations() {
        let mut file = MapFile::from(open(3, 3));
        file.blocked.push(Cell::new(2, 2));
        assert!(matches!(WorldMap::try_from(file), Err(MapError::InvariantViolation(_))));

        let mut file = MapFile::from(open(3, 3));
        file.width = 0;
        file.height = 0;
        assert!(matches!(WorldMap::try_from(file), Err(MapError::InvariantViolation(_))));

        let mut file = MapFile::from(open(3, 3));
        file.spawns[2].clear();
        assert!(matches!(WorldMap::try_from(file), Err(MapError::InvariantViolation(_))));

        assert!(matches!(load_map(b"{\"width\":3"), Err(MapError::MalformedFile(_))));
        let zero = br#"{"width":0,"height":0,"blocked":[],"stations":[{"id":0,"cell":[0,0]}],"spawns":[[[0,0]],[[0,0]],[[0,0]],[[0,0]]]}"#;
        assert!(matches!(load_map(zero), Err(MapError::InvariantViolation(_))));
    }

    #[test]
    fn paths_on_open_row() {
        let map = open(6, 1);
        assert_eq!(map.shortest_path(Cell::new(0, 0), Cell::new(0, 0)), Ok(vec![]));
        assert_eq!(map.shortest_path(Cell::new(0, 0), Cell::new(5, 0)).unwrap().len(), 5);
    }

    #[test]
    fn tie_break_prefers_up_then_down_then_left() {
        let map = open(3, 3);
        let path = map.shortest_path(Cell::new(2, 2), Cell::new(0, 0)).unwrap();
        assert_eq!(path, vec![Direction::Up, Direction::Up, Direction::Left, Direction::Left]);
    }

    #[test]
    fn walled_off_target_is_unreachable() {
        let mut file = MapFile::from(open(3, 3));
        file.blocked.extend([Cell::new(1, 0), Cell::new(1, 1), Cell::new(1, 2)]);
        file.stations[0].cell = Cell::new(0, 2);
        let map = WorldMap::try_from(file).unwrap();
        assert_eq!(map.shortest_path(Cell::new(0, 0), Cell::new(2, 2)), Err(Unreachable));
    }

    #[test]
    fn map_serializes_in_file_shape() {
        let map = open(2, 2);
        let json = serde_json::to_string(&map).unwrap();
        assert_eq!(
            json,
            r#"{"width":2,"height":2,"blocked":[],"stations":[{"id":0,"cell":[1,1]}],"spawns":[[[0,0]],[[0,0]],[[0,0]],[[0,0]]]}"#
        );
        assert_eq!(load_map(json.as_bytes()).unwrap(), map);
    }
}
