//! Work/profit class partitioning and random class selection.
//!
//! A value `x >= 1` belongs to class 1 when `x <= 2` and to class
//! `ceil(log2 x)` otherwise, so class `i > 1` covers `[2^(i-1) + 1, 2^i]`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::Packet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassError {
    #[error("class ({i}, {j}) outside [1, {max_i}] x [1, {max_j}]")]
    OutOfRange {
        i: u32,
        j: u32,
        max_i: u32,
        max_j: u32,
    },
    #[error("small-sets regime needs non-empty work and profit value sets")]
    EmptySet,
    #[error("({work}, {profit}) is not in the declared value sets")]
    NotInSet { work: u32, profit: u32 },
    #[error("selection {0:?} does not fit the regime")]
    RegimeMismatch(SelectedClass),
}

fn ceil_log2(x: u32) -> u32 {
    debug_assert!(x >= 1);
    32 - (x - 1).leading_zeros()
}

pub fn work_class(work: u32) -> u32 {
    ceil_log2(work).max(1)
}

pub fn profit_class(profit: u32) -> u32 {
    ceil_log2(profit).max(1)
}

/// Number of classes for values in `[1, max]`; non-powers of two round up.
pub fn class_count(max: u32) -> u32 {
    ceil_log2(max).max(1)
}

/// Combined class index `(i, j)`: work class `i`, profit class `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClassId {
    pub work: u32,
    pub profit: u32,
}

impl ClassId {
    pub const fn new(work: u32, profit: u32) -> Self {
        Self { work, profit }
    }

    pub fn of(work: u32, profit: u32) -> Self {
        Self::new(work_class(work), profit_class(profit))
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.work, self.profit)
    }
}

/// How the selected class is interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regime {
    /// Packets of exactly the selected combined class.
    Exact,
    /// Packets at least as good as the selected class:
    /// `work <= 2^i` and `profit >= 2^(j-1)`.
    Closure,
    /// A single concrete `(work, profit)` pair drawn from small value sets.
    SmallSets {
        work_values: Vec<u32>,
        profit_values: Vec<u32>,
    },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Exact => "exact",
            Regime::Closure => "closure",
            Regime::SmallSets { .. } => "small-sets",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SelectedClass {
    Indexed(ClassId),
    Values { work: u32, profit: u32 },
}

/// The selected class plus, in values-oblivious mode, the set of classes
/// uncovered so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSelector {
    regime: Regime,
    selected: Option<SelectedClass>,
    oblivious: Option<BTreeSet<SelectedClass>>,
}

impl ClassSelector {
    /// A selector pinned to `selected`.
    pub fn fixed(regime: Regime, selected: SelectedClass) -> Result<Self, ClassError> {
        match (&regime, selected) {
            (Regime::Exact | Regime::Closure, SelectedClass::Indexed(_)) => {}
            (
                Regime::SmallSets {
                    work_values,
                    profit_values,
                },
                SelectedClass::Values { work, profit },
            ) => {
                if !work_values.contains(&work) || !profit_values.contains(&profit) {
                    return Err(ClassError::NotInSet { work, profit });
                }
            }
            _ => return Err(ClassError::RegimeMismatch(selected)),
        }
        Ok(Self {
            regime,
            selected: Some(selected),
            oblivious: None,
        })
    }

    /// A fixed indexed selection, range-checked against `W` and `V`.
    pub fn indexed(
        regime: Regime,
        class: ClassId,
        max_work: u32,
        max_profit: u32,
    ) -> Result<Self, ClassError> {
        let (max_i, max_j) = (class_count(max_work), class_count(max_profit));
        if !(1..=max_i).contains(&class.work) || !(1..=max_j).contains(&class.profit) {
            return Err(ClassError::OutOfRange {
                i: class.work,
                j: class.profit,
                max_i,
                max_j,
            });
        }
        Self::fixed(regime, SelectedClass::Indexed(class))
    }

    /// Draws the selected class uniformly: over `log2 W x log2 V` index
    /// pairs, or over the declared value sets in the small-sets regime.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        max_work: u32,
        max_profit: u32,
        regime: Regime,
    ) -> Result<Self, ClassError> {
        let selected = match &regime {
            Regime::Exact | Regime::Closure => {
                let i = rng.random_range(1..=class_count(max_work));
                let j = rng.random_range(1..=class_count(max_profit));
                SelectedClass::Indexed(ClassId::new(i, j))
            }
            Regime::SmallSets {
                work_values,
                profit_values,
            } => {
                if work_values.is_empty() || profit_values.is_empty() {
                    return Err(ClassError::EmptySet);
                }
                let work = work_values[rng.random_range(0..work_values.len())];
                let profit = profit_values[rng.random_range(0..profit_values.len())];
                SelectedClass::Values { work, profit }
            }
        };
        Ok(Self {
            regime,
            selected: Some(selected),
            oblivious: None,
        })
    }

    /// A values-oblivious selector: nothing is selected until the first
    /// class is uncovered.
    pub fn oblivious(regime: Regime) -> Self {
        Self {
            regime,
            selected: None,
            oblivious: Some(BTreeSet::new()),
        }
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn selected(&self) -> Option<SelectedClass> {
        self.selected
    }

    pub fn is_oblivious(&self) -> bool {
        self.oblivious.is_some()
    }

    /// Number of distinct classes uncovered (oblivious mode only).
    pub fn uncovered_count(&self) -> usize {
        self.oblivious.as_ref().map_or(0, BTreeSet::len)
    }

    /// The class key a `(work, profit)` pair reveals under this regime.
    pub fn class_key(&self, work: u32, profit: u32) -> SelectedClass {
        match self.regime {
            Regime::Exact | Regime::Closure => SelectedClass::Indexed(ClassId::of(work, profit)),
            Regime::SmallSets { .. } => SelectedClass::Values { work, profit },
        }
    }

    pub fn matches(&self, work: u32, profit: u32) -> bool {
        let Some(selected) = self.selected else {
            return false;
        };
        match (&self.regime, selected) {
            (Regime::Exact, SelectedClass::Indexed(c)) => ClassId::of(work, profit) == c,
            (Regime::Closure, SelectedClass::Indexed(c)) => {
                u64::from(work) <= 1u64 << c.work && u64::from(profit) >= 1u64 << (c.profit - 1)
            }
            (Regime::SmallSets { .. }, SelectedClass::Values { work: w, profit: v }) => {
                work == w && profit == v
            }
            // uncovered keys always follow the regime, and fixed ones are checked
            _ => unreachable!("selection does not fit regime"),
        }
    }

    /// Whether a known packet belongs to the selected class.
    ///
    /// # Panics
    ///
    /// If `packet` is still unknown: its class is not observable yet.
    pub fn is_selected(&self, packet: &Packet) -> bool {
        assert!(
            packet.known,
            "class of unknown packet {} queried",
            packet.id
        );
        self.matches(packet.total_work, packet.profit)
    }

    /// Reservoir step on the uncovering of a class. A class not seen before
    /// becomes the selection with probability `1/N`, `N` counting distinct
    /// classes uncovered so far. Returns whether the selection changed.
    pub fn uncover<R: Rng + ?Sized>(&mut self, revealed: SelectedClass, rng: &mut R) -> bool {
        let Some(seen) = self.oblivious.as_mut() else {
            return false;
        };
        if !seen.insert(revealed) {
            return false;
        }
        let n = seen.len() as u32;
        if n == 1 || rng.random_ratio(1, n) {
            let changed = self.selected != Some(revealed);
            self.selected = Some(revealed);
            changed
        } else {
            false
        }
    }

    /// `(i*, j*)` or `(w*, v*)` for reporting.
    pub fn selected_pair(&self) -> Option<(u32, u32)> {
        self.selected.map(|s| match s {
            SelectedClass::Indexed(c) => (c.work, c.profit),
            SelectedClass::Values { work, profit } => (work, profit),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PacketSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn known(work: u32, profit: u32) -> Packet {
        Packet::new(0, 0, PacketSpec::known(work, profit))
    }

    #[test]
    fn class_indices() {
        assert_eq!(work_class(1), 1);
        assert_eq!(work_class(2), 1);
        assert_eq!(work_class(5), 3);
        assert_eq!(work_class(256), 8);
        assert_eq!(profit_class(1), 1);
        assert_eq!(profit_class(3), 2);
        assert_eq!(profit_class(16), 4);
        assert_eq!(class_count(256) * class_count(16), 32);
        assert_eq!(class_count(100), 7);
    }

    #[test]
    fn closure_membership() {
        let sel = ClassSelector::indexed(Regime::Closure, ClassId::new(3, 3), 256, 16).unwrap();
        assert!(sel.is_selected(&known(4, 8)));
        assert!(!sel.is_selected(&known(9, 8)));
        assert!(!sel.is_selected(&known(4, 3)));
    }

    #[test]
    fn exact_membership_follows_class_functions() {
        let sel = ClassSelector::indexed(Regime::Exact, ClassId::new(3, 2), 256, 16).unwrap();
        assert!(sel.is_selected(&known(5, 3)));
        for w in 1..=256 {
            for v in 1..=16 {
                let expected = work_class(w) == 3 && profit_class(v) == 2;
                assert_eq!(sel.is_selected(&known(w, v)), expected);
            }
        }
    }

    #[test]
    #[should_panic(expected = "unknown packet")]
    fn querying_unknown_packet_panics() {
        let sel = ClassSelector::indexed(Regime::Exact, ClassId::new(1, 1), 2, 2).unwrap();
        sel.is_selected(&Packet::new(0, 0, PacketSpec::unknown(1, 1)));
    }

    #[test]
    fn degenerate_ranges_always_pick_first_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let sel = ClassSelector::random(&mut rng, 2, 2, Regime::Exact).unwrap();
            assert_eq!(sel.selected_pair(), Some((1, 1)));
        }
    }

    #[test]
    fn small_sets_singletons() {
        let regime = Regime::SmallSets {
            work_values: vec![3],
            profit_values: vec![7],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let sel = ClassSelector::random(&mut rng, 256, 16, regime.clone()).unwrap();
            assert_eq!(
                sel.selected(),
                Some(SelectedClass::Values { work: 3, profit: 7 })
            );
        }
        assert!(
            ClassSelector::fixed(regime, SelectedClass::Values { work: 4, profit: 7 }).is_err()
        );
        let empty = Regime::SmallSets {
            work_values: vec![],
            profit_values: vec![1],
        };
        assert_eq!(
            ClassSelector::random(&mut rng, 4, 4, empty),
            Err(ClassError::EmptySet)
        );
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(ClassSelector::indexed(Regime::Exact, ClassId::new(9, 1), 256, 16).is_err());
        assert!(ClassSelector::indexed(Regime::Exact, ClassId::new(1, 0), 256, 16).is_err());
    }

    #[test]
    fn first_uncovered_class_is_selected() {
        let mut sel = ClassSelector::oblivious(Regime::Exact);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(!sel.matches(1, 1));
        let c = SelectedClass::Indexed(ClassId::new(2, 2));
        assert!(sel.uncover(c, &mut rng));
        assert_eq!(sel.selected(), Some(c));
        assert_eq!(sel.uncovered_count(), 1);
    }

    #[test]
    fn re_revealing_a_seen_class_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sel = ClassSelector::oblivious(Regime::Closure);
        for k in 1..=4 {
            sel.uncover(SelectedClass::Indexed(ClassId::new(k, 1)), &mut rng);
        }
        let before = sel.clone();
        for k in 1..=4 {
            assert!(!sel.uncover(SelectedClass::Indexed(ClassId::new(k, 1)), &mut rng));
        }
        assert_eq!(sel, before);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let (wc, vc) = (class_count(256), class_count(16));
        let selectors: Vec<_> = (1..=wc)
            .flat_map(|i| (1..=vc).map(move |j| ClassId::new(i, j)))
            .map(|c| ClassSelector::indexed(Regime::Exact, c, 256, 16).unwrap())
            .collect();
        for w in 1..=256 {
            for v in 1..=16 {
                let hits = selectors.iter().filter(|s| s.matches(w, v)).count();
                assert_eq!(hits, 1, "({w},{v})");
            }
        }
    }

    #[test]
    fn closure_contains_better_classes() {
        for is in 1..=8 {
            for js in 1..=4 {
                let closure =
                    ClassSelector::indexed(Regime::Closure, ClassId::new(is, js), 256, 16).unwrap();
                for w in 1..=256 {
                    for v in 1..=16 {
                        let c = ClassId::of(w, v);
                        if c.work <= is && c.profit >= js {
                            assert!(closure.matches(w, v), "({w},{v}) in C*({is},{js})");
                        }
                    }
                }
            }
        }
    }
}
