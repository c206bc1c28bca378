//! Movement and pathfinding checked against a separate breadth-first search.

use proptest::prelude::*;
use spacerace_core::world::{load_map, Cell, Direction, MapFile, WorldMap};
use spacerace_testkit::{gen, oracle};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn cells(map: &WorldMap) -> Vec<Cell> {
    (0..map.height()).flat_map(|y| (0..map.width()).map(move |x| Cell::new(x, y))).collect()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn moves_stay_on_walkable_cells(map in gen::world_map(), x in 0u32..12, y in 0u32..12, dirs in prop::collection::vec(gen::direction(), 0..40)) {
        let start = Cell::new(x % map.width(), y % map.height());
        prop_assume!(map.is_walkable(start));
        let mut pos = start;
        for dir in dirs {
            let next = map.apply_move(pos, dir);
            prop_assert!(map.is_walkable(next));
            prop_assert!(next == pos || pos.x.abs_diff(next.x) + pos.y.abs_diff(next.y) == 1);
            if next != pos {
                prop_assert_eq!(map.apply_move(next, dir.opposite()), pos);
            }
            pos = next;
        }
    }

    #[test]
    fn map_files_round_trip(map in gen::world_map()) {
        let bytes = serde_json::to_vec(&map).unwrap();
        prop_assert_eq!(load_map(&bytes).unwrap(), map.clone());
        let file = MapFile::from(map.clone());
        prop_assert_eq!(WorldMap::try_from(file).unwrap(), map);
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn shortest_paths_match_bfs(map in gen::world_map()) {
        let all = cells(&map);
        for &from in &all {
            for &to in &all {
                let expected = oracle::bfs_distance(&map, from, to).filter(|_| map.is_walkable(to));
                match map.shortest_path(from, to) {
                    Ok(path) => {
                        prop_assert_eq!(Some(path.len() as u32), expected);
                        let end = path.iter().fold(from, |p, &d| {
                            let n = map.apply_move(p, d);
                            assert_ne!(n, p, "path walks into a wall");
                            n
                        });
                        prop_assert_eq!(end, to);
                    }
                    Err(_) => prop_assert_eq!(expected, None),
                }
            }
        }
    }

    #[test]
    fn station_paths_end_in_reach(map in gen::world_map()) {
        for from in cells(&map).into_iter().filter(|&c| map.is_walkable(c)) {
            prop_assert_eq!(map.reachable_station(from), oracle::station_in_reach(&map, from));
            for station in map.stations() {
                let best = cells(&map)
                    .into_iter()
                    .filter(|&c| oracle::station_in_reach(&map, c) == Some(station.id))
                    .filter_map(|c| oracle::bfs_distance(&map, from, c).filter(|_| map.is_walkable(c)))
                    .min();
                match map.path_to_station(from, station.id) {
                    Ok((goal, path)) => {
                        prop_assert_eq!(Some(path.len() as u32), best);
                        let end = path.iter().fold(from, |p, &d| map.apply_move(p, d));
                        prop_assert_eq!(end, goal);
                        prop_assert_eq!(map.reachable_station(end), Some(station.id));
                    }
                    Err(_) => prop_assert_eq!(best, None),
                }
            }
        }
    }
}

#[test]
fn default_map_reaches_every_station_from_every_spawn() {
    let map = WorldMap::default_map();
    for team in 0..4 {
        for &spawn in map.spawns(team) {
            for station in map.stations() {
                assert!(
                    map.path_to_station(spawn, station.id).is_ok(),
                    "team {team} spawn {spawn:?} station {}",
                    station.id
                );
            }
        }
    }
}

#[test]
fn moving_off_the_edge_is_a_no_op() {
    let map = WorldMap::default_map();
    assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Up), Cell::new(0, 0));
    assert_eq!(map.apply_move(Cell::new(0, 0), Direction::Left), Cell::new(0, 0));
}
