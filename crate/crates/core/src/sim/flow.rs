use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::grid::{GridSpec, Network, Side, Turn};
use crate::error::{Error, Result};

/// A path through the grid: enter intersection `origin` from boundary side
/// `entry`, then apply `turns` at each intersection reached. The last turn
/// must lead off the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RouteSpec {
    pub origin: (usize, usize),
    pub entry: Side,
    pub turns: Vec<Turn>,
}

impl RouteSpec {
    /// Enter at `origin` from `entry`, take `first` there, then go straight
    /// until leaving the grid.
    pub fn straight_after(
        grid: &GridSpec,
        origin: (usize, usize),
        entry: Side,
        first: Turn,
    ) -> Self {
        let mut turns = vec![first];
        let mut side = entry.exit_for(first);
        let (mut x, mut y) = (origin.0 as isize, origin.1 as isize);
        loop {
            let (dx, dy) = side.offset();
            x += dx;
            y += dy;
            if x < 0 || y < 0 || x as usize >= grid.cols || y as usize >= grid.rows {
                break;
            }
            turns.push(Turn::Through);
            side = side.opposite().exit_for(Turn::Through);
        }
        Self {
            origin,
            entry,
            turns,
        }
    }

    /// Resolves to the sequence of link indices, entry link first.
    pub fn resolve(&self, net: &Network) -> Result<Vec<usize>> {
        let invalid = |why: &str| Error::Config(format!("invalid route {self:?}: {why}"));
        let start = net
            .index_of(self.origin)
            .ok_or_else(|| invalid("origin off the grid"))?;
        let entry_link = net.intersections[start].incoming[self.entry as usize];
        if net.links[entry_link].from.is_some() {
            return Err(invalid("entry side is not on the grid boundary"));
        }
        if self.turns.is_empty() {
            return Err(invalid("no turns"));
        }
        let mut links = vec![entry_link];
        let mut node = start;
        let mut approach = self.entry;
        for (k, &turn) in self.turns.iter().enumerate() {
            let out = net.intersections[node].outgoing[approach.exit_for(turn) as usize];
            links.push(out);
            match net.links[out].to {
                Some(next) => {
                    if k + 1 == self.turns.len() {
                        return Err(invalid("route ends inside the grid"));
                    }
                    node = next;
                    approach = net.links[out].to_side;
                }
                None => {
                    if k + 1 != self.turns.len() {
                        return Err(invalid("route leaves the grid before its last turn"));
                    }
                }
            }
        }
        Ok(links)
    }
}

/// Deterministic arrivals: `count` vehicles at `start + k * headway`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowEntry {
    pub route: RouteSpec,
    pub start: f64,
    pub headway: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowSpec {
    pub entries: Vec<FlowEntry>,
    /// Seed for arrival jitter.
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    /// Uniform arrival jitter as a fraction of the headway (0 = none).
    #[cfg_attr(feature = "serde", serde(default))]
    pub jitter: f64,
}

impl FlowSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Reference demand used by the experiments: straight flows along every
    /// row (heavier) and column, plus left/right turning flows from every
    /// boundary entry, all running for `duration` seconds.
    pub fn reference(grid: &GridSpec, duration: f64) -> Self {
        const ROW_HEADWAY: f64 = 10.0;
        const COLUMN_HEADWAY: f64 = 15.0;
        const TURN_HEADWAY: f64 = 36.0;
        let count = |h: f64| libm::ceil(duration / h).max(0.0) as u32;
        let mut entries = Vec::new();
        let mut push = |route: RouteSpec, headway: f64, start: f64| {
            entries.push(FlowEntry {
                route,
                start,
                headway,
                count: count(headway),
            })
        };
        let boundary = |grid: &GridSpec| {
            let mut out = Vec::new();
            for y in 0..grid.rows {
                out.push(((0, y), Side::West));
                out.push(((grid.cols - 1, y), Side::East));
            }
            for x in 0..grid.cols {
                out.push(((x, 0), Side::North));
                out.push(((x, grid.rows - 1), Side::South));
            }
            out
        };
        for (origin, entry) in boundary(grid) {
            let straight = RouteSpec::straight_after(grid, origin, entry, Turn::Through);
            let headway = match entry {
                Side::West | Side::East => ROW_HEADWAY,
                Side::North | Side::South => COLUMN_HEADWAY,
            };
            push(straight, headway, 0.0);
        }
        for (origin, entry) in boundary(grid) {
            push(
                RouteSpec::straight_after(grid, origin, entry, Turn::Left),
                TURN_HEADWAY,
                3.0,
            );
            push(
                RouteSpec::straight_after(grid, origin, entry, Turn::Right),
                TURN_HEADWAY,
                11.0,
            );
        }
        Self {
            entries,
            seed: 0,
            jitter: 0.0,
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!(
                "jitter must be in [0, 1), got {}",
                self.jitter
            )));
        }
        for e in &self.entries {
            if !(e.headway > 0.0 && e.headway.is_finite()) {
                return Err(Error::Config(format!(
                    "headway must be positive, got {}",
                    e.headway
                )));
            }
            if !(e.start >= 0.0 && e.start.is_finite()) {
                return Err(Error::Config(format!(
                    "start must be nonnegative, got {}",
                    e.start
                )));
            }
            e.route.resolve(net)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_route_spans_row() {
        let grid = GridSpec::new(1, 3);
        let net = Network::build(grid).unwrap();
        let r = RouteSpec::straight_after(&grid, (0, 0), Side::West, Turn::Through);
        assert_eq!(r.turns.len(), 3);
        assert_eq!(r.resolve(&net).unwrap().len(), 4);
        // left from the west entry of a single-row grid exits north immediately
        let l = RouteSpec::straight_after(&grid, (0, 0), Side::West, Turn::Left);
        assert_eq!(l.turns, vec![Turn::Left]);
        l.resolve(&net).unwrap();
    }

    #[test]
    fn invalid_routes_rejected() {
        let grid = GridSpec::new(1, 3);
        let net = Network::build(grid).unwrap();
        let short = RouteSpec {
            origin: (0, 0),
            entry: Side::West,
            turns: vec![Turn::Through],
        };
        assert!(short.resolve(&net).is_err());
        let interior = RouteSpec {
            origin: (1, 0),
            entry: Side::West,
            turns: vec![Turn::Through, Turn::Through],
        };
        assert!(interior.resolve(&net).is_err());
        let long = RouteSpec {
            origin: (0, 0),
            entry: Side::North,
            turns: vec![Turn::Through, Turn::Through],
        };
        assert!(long.resolve(&net).is_err());
    }

    #[test]
    fn reference_flow_is_valid() {
        for (rows, cols) in [(1, 1), (1, 3), (4, 4)] {
            let grid = GridSpec::new(rows, cols);
            let net = Network::build(grid).unwrap();
            FlowSpec::reference(&grid, 600.0).validate(&net).unwrap();
        }
    }

    #[test]
    fn zero_headway_rejected() {
        let grid = GridSpec::new(1, 1);
        let net = Network::build(grid).unwrap();
        let mut flow = FlowSpec::reference(&grid, 60.0);
        flow.entries[0].headway = 0.0;
        assert!(flow.validate(&net).is_err());
    }
}
