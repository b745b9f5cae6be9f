use super::grid::{Side, Turn};

pub const PHASE_COUNT: usize = 8;

/// Permitted movements of each phase as a 12-bit mask over
/// `approach * 3 + turn` (approaches N, E, S, W; turns left, through, right).
///
/// | index | movements                      |
/// |-------|--------------------------------|
/// | 0     | N, S through + right           |
/// | 1     | E, W through + right           |
/// | 2     | N, S protected left            |
/// | 3     | E, W protected left            |
/// | 4     | N all movements                |
/// | 5     | E all movements                |
/// | 6     | S all movements                |
/// | 7     | W all movements                |
const PHASE_TABLE: [u16; PHASE_COUNT] = [
    mv(Side::North, Turn::Through)
        | mv(Side::North, Turn::Right)
        | mv(Side::South, Turn::Through)
        | mv(Side::South, Turn::Right),
    mv(Side::East, Turn::Through)
        | mv(Side::East, Turn::Right)
        | mv(Side::West, Turn::Through)
        | mv(Side::West, Turn::Right),
    mv(Side::North, Turn::Left) | mv(Side::South, Turn::Left),
    mv(Side::East, Turn::Left) | mv(Side::West, Turn::Left),
    approach(Side::North),
    approach(Side::East),
    approach(Side::South),
    approach(Side::West),
];

const fn mv(side: Side, turn: Turn) -> u16 {
    1 << (side as usize * 3 + turn as usize)
}

const fn approach(side: Side) -> u16 {
    mv(side, Turn::Left) | mv(side, Turn::Through) | mv(side, Turn::Right)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignalPhase(u8);

impl SignalPhase {
    pub fn new(index: usize) -> Option<Self> {
        (index < PHASE_COUNT).then_some(Self(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn mask(self) -> u16 {
        PHASE_TABLE[self.index()]
    }

    pub fn permits(self, side: Side, turn: Turn) -> bool {
        self.mask() & mv(side, turn) != 0
    }

    pub fn all() -> impl Iterator<Item = SignalPhase> {
        (0..PHASE_COUNT as u8).map(SignalPhase)
    }
}
