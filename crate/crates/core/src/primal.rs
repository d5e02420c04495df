//! Real-valued fields on primal sites over a disk-shaped window.

use crate::grid::IndexBox;
use crate::lattice::{bond_present, Bond, Direction, PrimalSite};
use serde::{Deserialize, Serialize};

/// Sites whose position lies in the closed disk of the given radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub radius: f64,
}

impl Window {
    pub fn new(radius: f64) -> Self {
        Window { radius }
    }

    pub fn contains(&self, l: PrimalSite) -> bool {
        // |position|² = norm_sq_x4 / 4
        (l.norm_sq_x4() as f64) <= 4.0 * self.radius * self.radius
    }

    /// Both endpoints inside.
    pub fn contains_bond(&self, b: Bond) -> bool {
        self.contains(b.tail) && self.contains(b.head())
    }
}

/// Values on primal sites; `NaN` marks unstored sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalField {
    boxed: IndexBox,
    values: Vec<f64>,
}

impl PrimalField {
    /// Zeros on every site of `window`.
    pub fn zeros(window: Window) -> Self {
        Self::from_fn(window, |_| 0.0)
    }

    pub fn from_fn(window: Window, mut f: impl FnMut(PrimalSite) -> f64) -> Self {
        let boxed = IndexBox::new(window.radius.max(0.0).ceil() as i32 + 1);
        let values = (0..boxed.len())
            .map(|k| {
                let (i, j) = boxed.coords(k);
                let l = PrimalSite::new(i, j);
                if window.contains(l) {
                    f(l)
                } else {
                    f64::NAN
                }
            })
            .collect();
        PrimalField { boxed, values }
    }

    /// Field storing exactly the listed sites.
    pub fn from_entries(entries: &[(PrimalSite, f64)]) -> Self {
        let half = entries
            .iter()
            .map(|(l, _)| l.i.abs().max(l.j.abs()))
            .max()
            .unwrap_or(0);
        let boxed = IndexBox::new(half);
        let mut values = vec![f64::NAN; boxed.len()];
        for &(l, v) in entries {
            values[boxed.index(l.i, l.j).expect("inside box")] = v;
        }
        PrimalField { boxed, values }
    }

    /// Same stored sites, values from `f`.
    pub fn map_sites(&self, mut f: impl FnMut(PrimalSite, f64) -> f64) -> PrimalField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if v.is_nan() {
                    v
                } else {
                    let (i, j) = self.boxed.coords(k);
                    f(PrimalSite::new(i, j), v)
                }
            })
            .collect();
        PrimalField {
            boxed: self.boxed,
            values,
        }
    }

    pub fn get(&self, l: PrimalSite) -> Option<f64> {
        let v = self.values[self.boxed.index(l.i, l.j)?];
        (!v.is_nan()).then_some(v)
    }

    pub fn contains(&self, l: PrimalSite) -> bool {
        self.get(l).is_some()
    }

    /// Overwrite a stored site. Returns `false` (and does nothing) for
    /// unstored sites.
    pub fn set(&mut self, l: PrimalSite, v: f64) -> bool {
        match self.boxed.index(l.i, l.j) {
            Some(k) if !self.values[k].is_nan() => {
                self.values[k] = v;
                true
            }
            _ => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (PrimalSite, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(k, &v)| {
            (!v.is_nan()).then(|| {
                let (i, j) = self.boxed.coords(k);
                (PrimalSite::new(i, j), v)
            })
        })
    }

    pub fn sites(&self) -> impl Iterator<Item = PrimalSite> + '_ {
        self.iter().map(|(l, _)| l)
    }

    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `y(head) − y(tail)` for a present bond with both ends stored.
    pub fn bond_difference(&self, b: Bond) -> Option<f64> {
        if !b.is_present() {
            return None;
        }
        Some(self.get(b.head())? - self.get(b.tail)?)
    }

    /// Present bonds in `window`, each unordered bond once (along `+e₁` or
    /// `+e₂`), with both ends stored.
    pub fn positive_bonds(&self, window: Window) -> impl Iterator<Item = Bond> + '_ {
        self.sites()
            .filter(move |&l| window.contains(l))
            .flat_map(|l| {
                [
                    Bond::new(l, Direction::PlusE1),
                    Bond::new(l, Direction::PlusE2),
                ]
            })
            .filter(move |b| {
                bond_present(b.tail, b.direction)
                    && window.contains(b.head())
                    && self.contains(b.head())
            })
    }

    /// `self + weight · other` on sites stored in `self`; sites missing from
    /// `other` count as zero.
    pub fn add_scaled(&mut self, weight: f64, other: &PrimalField) {
        for k in 0..self.values.len() {
            if self.values[k].is_nan() {
                continue;
            }
            let (i, j) = self.boxed.coords(k);
            if let Some(v) = other.get(PrimalSite::new(i, j)) {
                self.values[k] += weight * v;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_membership_uses_positions() {
        let w = Window::new(1.0);
        assert!(w.contains(PrimalSite::new(0, 0)));
        assert!(w.contains(PrimalSite::new(-1, -1)));
        assert!(!w.contains(PrimalSite::new(1, 0)));
        let f = PrimalField::zeros(w);
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn positive_bonds_skip_the_crack() {
        let f = PrimalField::zeros(Window::new(5.0));
        let bonds: Vec<_> = f.positive_bonds(Window::new(5.0)).collect();
        assert!(bonds.iter().all(|b| b.is_present()));
        let crossing = Bond::new(PrimalSite::new(-2, -1), Direction::PlusE2);
        assert!(!bonds.contains(&crossing));
        assert!(bonds.contains(&Bond::new(PrimalSite::new(0, -1), Direction::PlusE2)));
    }

    #[test]
    fn set_ignores_unstored_sites() {
        let mut f = PrimalField::zeros(Window::new(2.0));
        assert!(!f.set(PrimalSite::new(10, 10), 1.0));
        assert!(f.set(PrimalSite::new(0, 0), 1.0));
        assert_eq!(f.get(PrimalSite::new(0, 0)), Some(1.0));
        assert_eq!(
            f.bond_difference(Bond::new(PrimalSite::new(0, 0), Direction::MinusE1)),
            Some(-1.0)
        );
    }
}
