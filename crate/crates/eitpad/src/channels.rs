//! Four-electrode measurement channels and channel plans.
//!
//! A channel injects current through one electrode pair and senses the
//! voltage across a disjoint pair. Swapping the roles gives a *different*
//! channel (reciprocity makes the readings equal on an unperturbed medium,
//! which the tests exploit, but plans keep both orientations).
//!
//! Electrode indices refer to row-major grid positions, matching
//! [`crate::electrodes::place_grid`].

use crate::electrodes::GridLayout;
use crate::error::{Error, Result};

/// One tetrapolar measurement: drive `inject`, read `sense`. Pairs are
/// unordered; all four electrodes must be distinct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Channel {
    pub inject: (usize, usize),
    pub sense: (usize, usize),
}

impl Channel {
    pub fn new(inject: (usize, usize), sense: (usize, usize)) -> Result<Channel> {
        let ch = Channel { inject, sense };
        ch.validate(usize::MAX)?;
        Ok(ch)
    }

    /// Check distinctness and (if `electrode_count` is not `usize::MAX`)
    /// index bounds.
    pub fn validate(&self, electrode_count: usize) -> Result<()> {
        let ids = [self.inject.0, self.inject.1, self.sense.0, self.sense.1];
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                if a == b {
                    return Err(Error::InvalidChannel(format!(
                        "electrode {a} appears twice in {self:?}"
                    )));
                }
            }
        }
        if electrode_count != usize::MAX {
            if let Some(&bad) = ids.iter().find(|&&i| i >= electrode_count) {
                return Err(Error::InvalidChannel(format!(
                    "electrode {bad} out of range (plan covers {electrode_count})"
                )));
            }
        }
        Ok(())
    }

    /// Identity under unordered pairs: each pair sorted ascending. Two
    /// channels are the same measurement iff their canonical forms match.
    pub fn canonical(&self) -> ((usize, usize), (usize, usize)) {
        let sort = |(a, b): (usize, usize)| if a <= b { (a, b) } else { (b, a) };
        (sort(self.inject), sort(self.sense))
    }
}

/// An ordered, duplicate-free list of channels over a fixed electrode count.
#[derive(Clone, Debug)]
pub struct ChannelPlan {
    channels: Vec<Channel>,
    electrode_count: usize,
}

impl ChannelPlan {
    pub fn new(channels: Vec<Channel>, electrode_count: usize) -> Result<ChannelPlan> {
        let mut seen = std::collections::HashSet::new();
        for ch in &channels {
            ch.validate(electrode_count)?;
            if !seen.insert(ch.canonical()) {
                return Err(Error::InvalidChannel(format!(
                    "duplicate channel {ch:?} in plan"
                )));
            }
        }
        if channels.is_empty() {
            return Err(Error::InvalidChannel("plan has no channels".into()));
        }
        Ok(ChannelPlan {
            channels,
            electrode_count,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrode_count
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> Channel {
        self.channels[i]
    }
}

/// Every tetrapolar channel over `n` electrodes: choose 4, split them into
/// two unordered pairs (3 ways), assign roles (2 ways) -- `C(n,4) * 6`.
/// Lexicographic in (combination, split, role), so the order is stable.
pub fn enumerate_all_channels(n: usize) -> Result<ChannelPlan> {
    if n < 4 {
        return Err(Error::param(format!(
            "need at least 4 electrodes to form a channel, got {n}"
        )));
    }
    let mut channels = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                for d in (c + 1)..n {
                    let splits = [
                        ((a, b), (c, d)),
                        ((a, c), (b, d)),
                        ((a, d), (b, c)),
                    ];
                    for (p, q) in splits {
                        channels.push(Channel { inject: p, sense: q });
                        channels.push(Channel { inject: q, sense: p });
                    }
                }
            }
        }
    }
    ChannelPlan::new(channels, n)
}

/// All axis-aligned rectangles in the grid, each contributing four channels:
/// drive one pair of opposite edges and sense the other, in both the
/// horizontal/vertical pairing and both role assignments.
/// Count: `4 * C(rows,2) * C(cols,2)`.
pub fn rectangle_channels(layout: &GridLayout) -> Result<ChannelPlan> {
    let (rows, cols) = (layout.rows, layout.cols);
    if rows < 2 || cols < 2 {
        return Err(Error::param(format!(
            "rectangle channels need a 2-D grid, got {rows}x{cols}"
        )));
    }
    let mut channels = Vec::new();
    for r1 in 0..rows {
        for r2 in (r1 + 1)..rows {
            for c1 in 0..cols {
                for c2 in (c1 + 1)..cols {
                    let tl = layout.index_of(r1, c1);
                    let tr = layout.index_of(r1, c2);
                    let bl = layout.index_of(r2, c1);
                    let br = layout.index_of(r2, c2);
                    // horizontal edge pairing, both roles
                    channels.push(Channel { inject: (tl, tr), sense: (bl, br) });
                    channels.push(Channel { inject: (bl, br), sense: (tl, tr) });
                    // vertical edge pairing, both roles
                    channels.push(Channel { inject: (tl, bl), sense: (tr, br) });
                    channels.push(Channel { inject: (tr, br), sense: (tl, bl) });
                }
            }
        }
    }
    ChannelPlan::new(channels, layout.electrode_count())
}

/// Which square sub-structures the diagonal construction reads out of a
/// grid. Kept as a named strategy so alternative constructions can slot in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiagonalConstruction {
    /// Unit 2x2 sub-squares (crossed diagonals), the full-span corner
    /// square, and -- when the grid is square with an even span -- the
    /// inscribed diamond of edge midpoints.
    #[default]
    UnitCornerMidpoint,
}

/// Diagonal channels for a grid under the given construction. For the
/// classic 3x3 pad this yields 12 channels: 8 from the four unit squares,
/// 2 from the corner square, 2 from the midpoint diamond.
pub fn diagonal_channels(
    layout: &GridLayout,
    construction: DiagonalConstruction,
) -> Result<ChannelPlan> {
    let DiagonalConstruction::UnitCornerMidpoint = construction;
    let (rows, cols) = (layout.rows, layout.cols);
    if rows < 2 || cols < 2 {
        return Err(Error::param(format!(
            "diagonal channels need a 2-D grid, got {rows}x{cols}"
        )));
    }
    let mut channels = Vec::new();
    let mut push_cross = |p: (usize, usize), q: (usize, usize)| {
        channels.push(Channel { inject: p, sense: q });
        channels.push(Channel { inject: q, sense: p });
    };

    // Unit 2x2 sub-squares: inject one diagonal, sense the other.
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let tl = layout.index_of(r, c);
            let tr = layout.index_of(r, c + 1);
            let bl = layout.index_of(r + 1, c);
            let br = layout.index_of(r + 1, c + 1);
            push_cross((tl, br), (tr, bl));
        }
    }

    if rows == cols {
        let m = rows - 1;
        // Full-span corner square.
        let tl = layout.index_of(0, 0);
        let tr = layout.index_of(0, m);
        let bl = layout.index_of(m, 0);
        let br = layout.index_of(m, m);
        push_cross((tl, br), (tr, bl));
        // Inscribed diamond of edge midpoints (exists when the span is
        // even, i.e. odd grid side).
        if m % 2 == 0 && m >= 2 {
            let h = m / 2;
            let north = layout.index_of(0, h);
            let west = layout.index_of(h, 0);
            let east = layout.index_of(h, m);
            let south = layout.index_of(m, h);
            push_cross((north, south), (west, east));
        }
    }

    dedup_in_order(&mut channels);
    ChannelPlan::new(channels, layout.electrode_count())
}

/// The default measurement plan: rectangle channels followed by diagonal
/// channels, duplicates removed keeping first occurrence. 48 channels on
/// the 3x3 pad.
pub fn default_plan(layout: &GridLayout) -> Result<ChannelPlan> {
    let mut channels = rectangle_channels(layout)?.channels().to_vec();
    channels.extend_from_slice(
        diagonal_channels(layout, DiagonalConstruction::default())?.channels(),
    );
    dedup_in_order(&mut channels);
    ChannelPlan::new(channels, layout.electrode_count())
}

fn dedup_in_order(channels: &mut Vec<Channel>) {
    let mut seen = std::collections::HashSet::new();
    channels.retain(|ch| seen.insert(ch.canonical()));
}

/// Named plan constructions, selectable from configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStrategy {
    Rectangles,
    Diagonals,
    RectanglesAndDiagonals,
    AllFourPole,
}

impl PlanStrategy {
    pub fn from_name(name: &str) -> Result<PlanStrategy> {
        match name {
            "rectangles" => Ok(PlanStrategy::Rectangles),
            "diagonals" => Ok(PlanStrategy::Diagonals),
            "rectangles+diagonals" => Ok(PlanStrategy::RectanglesAndDiagonals),
            "all" => Ok(PlanStrategy::AllFourPole),
            other => Err(Error::Config(format!(
                "unknown channel strategy '{other}' \
                 (expected rectangles, diagonals, rectangles+diagonals, or all)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlanStrategy::Rectangles => "rectangles",
            PlanStrategy::Diagonals => "diagonals",
            PlanStrategy::RectanglesAndDiagonals => "rectangles+diagonals",
            PlanStrategy::AllFourPole => "all",
        }
    }

    pub fn build(self, layout: &GridLayout) -> Result<ChannelPlan> {
        match self {
            PlanStrategy::Rectangles => rectangle_channels(layout),
            PlanStrategy::Diagonals => {
                diagonal_channels(layout, DiagonalConstruction::default())
            }
            PlanStrategy::RectanglesAndDiagonals => default_plan(layout),
            PlanStrategy::AllFourPole => enumerate_all_channels(layout.electrode_count()),
        }
    }
}
