use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const LANES_PER_LINK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::North, Side::East, Side::South, Side::West];

    pub fn from_index(i: usize) -> Side {
        Self::ALL[i % 4]
    }

    pub fn opposite(self) -> Side {
        Self::from_index(self as usize + 2)
    }

    /// Side through which a vehicle arriving from `self` leaves after `turn`
    /// (right-hand traffic).
    pub fn exit_for(self, turn: Turn) -> Side {
        match turn {
            Turn::Left => Self::from_index(self as usize + 1),
            Turn::Through => Self::from_index(self as usize + 2),
            Turn::Right => Self::from_index(self as usize + 3),
        }
    }

    /// Grid offset toward this side; rows grow southward.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Side::North => (0, -1),
            Side::East => (1, 0),
            Side::South => (0, 1),
            Side::West => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Turn {
    Left = 0,
    Through = 1,
    Right = 2,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Left, Turn::Through, Turn::Right];
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// meters
    pub link_length: f64,
    /// m/s
    pub speed_limit: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config(format!(
                "grid must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.link_length > 0.0 && self.link_length.is_finite()) {
            return Err(Error::Config("link_length must be positive".into()));
        }
        if !(self.speed_limit > 0.0 && self.speed_limit.is_finite()) {
            return Err(Error::Config("speed_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn agent_count(&self) -> usize {
        self.rows * self.cols
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 1,
            cols: 3,
            link_length: 300.0,
            speed_limit: 15.0,
        }
    }
}

/// A directed road segment. `from`/`to` are intersection indices, `None` at
/// the network boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub from: Option<usize>,
    pub to: Option<usize>,
    /// Approach side at `to` (meaningful when `to` is set).
    pub to_side: Side,
    /// Exit side at `from` (meaningful when `from` is set).
    pub from_side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Intersection {
    /// (x, y) = (column, row).
    pub coord: (usize, usize),
    /// Incoming link per approach side, indexed by `Side as usize`.
    pub incoming: [usize; 4],
    /// Outgoing link per exit side.
    pub outgoing: [usize; 4],
}

/// Static topology: intersections indexed row-major by `y * cols + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: GridSpec,
    pub intersections: Vec<Intersection>,
    pub links: Vec<Link>,
}

impl Network {
    pub fn build(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.agent_count();
        let mut links = Vec::new();
        let mut intersections: Vec<Intersection> = (0..n)
            .map(|i| Intersection {
                coord: (i % spec.cols, i / spec.cols),
                incoming: [usize::MAX; 4],
                outgoing: [usize::MAX; 4],
            })
            .collect();

        let neighbor = |i: usize, side: Side| -> Option<usize> {
            let (x, y) = (i % spec.cols, i / spec.cols);
            let (dx, dy) = side.offset();
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            (nx >= 0 && ny >= 0 && (nx as usize) < spec.cols && (ny as usize) < spec.rows)
                .then(|| ny as usize * spec.cols + nx as usize)
        };

        for i in 0..n {
            for side in Side::ALL {
                let to = neighbor(i, side);
                intersections[i].outgoing[side as usize] = links.len();
                links.push(Link {
                    from: Some(i),
                    to,
                    to_side: side.opposite(),
                    from_side: side,
                });
            }
        }
        for i in 0..n {
            for side in Side::ALL {
                intersections[i].incoming[side as usize] = match neighbor(i, side) {
                    Some(j) => intersections[j].outgoing[side.opposite() as usize],
                    None => {
                        links.push(Link {
                            from: None,
                            to: Some(i),
                            to_side: side,
                            from_side: side.opposite(),
                        });
                        links.len() - 1
                    }
                };
            }
        }
        Ok(Self {
            spec,
            intersections,
            links,
        })
    }

    pub fn index_of(&self, coord: (usize, usize)) -> Option<usize> {
        (coord.0 < self.spec.cols && coord.1 < self.spec.rows)
            .then(|| coord.1 * self.spec.cols + coord.0)
    }

    pub fn lane_count(&self) -> usize {
        self.links.len() * LANES_PER_LINK
    }

    pub fn lane(link: usize, turn: Turn) -> usize {
        link * LANES_PER_LINK + turn as usize
    }

    /// Boundary links that feed vehicles into the grid.
    pub fn entry_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.from.is_none())
            .map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_three_layout() {
        let net = Network::build(GridSpec::new(1, 3)).unwrap();
        let coords: Vec<_> = net.intersections.iter().map(|i| i.coord).collect();
        assert_eq!(coords, [(0, 0), (1, 0), (2, 0)]);
        // 12 outgoing links (4 internal, 8 to the boundary) plus 8 entries
        assert_eq!(net.links.len(), 20);
        assert_eq!(net.entry_links().count(), 8);
    }

    #[test]
    fn four_by_four_and_single() {
        assert_eq!(
            Network::build(GridSpec::new(4, 4))
                .unwrap()
                .intersections
                .len(),
            16
        );
        let single = Network::build(GridSpec::new(1, 1)).unwrap();
        assert_eq!(single.intersections.len(), 1);
        for side in Side::ALL {
            let inc = single.links[single.intersections[0].incoming[side as usize]];
            assert!(inc.from.is_none());
            let out = single.links[single.intersections[0].outgoing[side as usize]];
            assert!(out.to.is_none());
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Network::build(GridSpec::new(0, 3)).is_err());
        assert!(Network::build(GridSpec::new(2, 0)).is_err());
    }

    #[test]
    fn internal_links_connect_opposite_sides() {
        let net = Network::build(GridSpec::new(2, 2)).unwrap();
        for (i, node) in net.intersections.iter().enumerate() {
            for side in Side::ALL {
                let link = net.links[node.incoming[side as usize]];
                assert_eq!(link.to, Some(i));
                assert_eq!(link.to_side, side);
                if let Some(j) = link.from {
                    assert_eq!(
                        net.intersections[j].outgoing[side.opposite() as usize],
                        node.incoming[side as usize]
                    );
                }
            }
        }
    }

    #[test]
    fn turn_exits() {
        assert_eq!(Side::North.exit_for(Turn::Left), Side::East);
        assert_eq!(Side::North.exit_for(Turn::Through), Side::South);
        assert_eq!(Side::North.exit_for(Turn::Right), Side::West);
        assert_eq!(Side::East.exit_for(Turn::Left), Side::South);
        assert_eq!(Side::West.exit_for(Turn::Right), Side::South);
    }
}
