//! Geometry of the cracked square lattice and its dual.
//!
//! Primal sites (atoms) sit at `(i + ½, j + ½)`; dual sites (plaquette
//! centres) sit at the integer points `(i, j)`. The crack occupies the
//! half-line `{x₂ = 0, x₁ ≤ 0}`: primal bonds crossing it are erased and the
//! dual sites lying on it (`Γ*`) carry a homogeneous Dirichlet condition.
//!
//! The complex square root `ω` straightens the crack onto the imaginary axis
//! and gives the second notion of distance used for core separation.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("the complex square root is undefined at the origin")]
    OmegaAtOrigin,
    #[error("duplicate dislocation core at ({0}, {1})")]
    DuplicateCore(i32, i32),
    #[error("dislocation core ({0}, {1}) lies on the dual crack line")]
    CoreOnCrack(i32, i32),
}

/// Nearest-neighbour lattice direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+e1")]
    PlusE1,
    #[serde(rename = "-e1")]
    MinusE1,
    #[serde(rename = "+e2")]
    PlusE2,
    #[serde(rename = "-e2")]
    MinusE2,
}

impl Direction {
    /// Canonical order; also the tie-break order for spanning trees.
    pub const ALL: [Direction; 4] = [
        Direction::PlusE1,
        Direction::MinusE1,
        Direction::PlusE2,
        Direction::MinusE2,
    ];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Direction::PlusE1 => (1, 0),
            Direction::MinusE1 => (-1, 0),
            Direction::PlusE2 => (0, 1),
            Direction::MinusE2 => (0, -1),
        }
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::PlusE1 => Direction::MinusE1,
            Direction::MinusE1 => Direction::PlusE1,
            Direction::PlusE2 => Direction::MinusE2,
            Direction::MinusE2 => Direction::PlusE2,
        }
    }

    /// Clockwise quarter turn (a right-hand turn when walking along the bond).
    pub fn right_turn(self) -> Direction {
        match self {
            Direction::PlusE1 => Direction::MinusE2,
            Direction::MinusE2 => Direction::MinusE1,
            Direction::MinusE1 => Direction::PlusE2,
            Direction::PlusE2 => Direction::PlusE1,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Direction::PlusE1 | Direction::PlusE2)
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::PlusE1 => "+e1",
            Direction::MinusE1 => "-e1",
            Direction::PlusE2 => "+e2",
            Direction::MinusE2 => "-e2",
        }
    }

    pub fn from_label(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.label() == s)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Anything with a location in the plane.
pub trait Located {
    fn position(&self) -> [f64; 2];
}

/// Atom of the primal lattice, at `(i + ½, j + ½)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimalSite {
    pub i: i32,
    pub j: i32,
}

impl PrimalSite {
    pub const fn new(i: i32, j: i32) -> Self {
        PrimalSite { i, j }
    }

    /// Upper crack flank `Γ₊`: positions `(x, ½)` with `x < 0`.
    pub fn on_upper_flank(&self) -> bool {
        self.j == 0 && self.i <= -1
    }

    /// Lower crack flank `Γ₋`: positions `(x, -½)` with `x < 0`.
    pub fn on_lower_flank(&self) -> bool {
        self.j == -1 && self.i <= -1
    }

    pub fn on_flank(&self) -> bool {
        self.on_upper_flank() || self.on_lower_flank()
    }

    pub fn step(&self, dir: Direction) -> PrimalSite {
        let (di, dj) = dir.offset();
        PrimalSite::new(self.i + di, self.j + dj)
    }

    /// Squared distance of the position from the origin, times four (exact).
    pub fn norm_sq_x4(&self) -> i64 {
        let x = 2 * self.i as i64 + 1;
        let y = 2 * self.j as i64 + 1;
        x * x + y * y
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq_x4() as f64).sqrt() / 2.0
    }
}

impl Located for PrimalSite {
    fn position(&self) -> [f64; 2] {
        [self.i as f64 + 0.5, self.j as f64 + 0.5]
    }
}

/// Plaquette centre of the dual lattice, at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualSite {
    pub i: i32,
    pub j: i32,
}

impl DualSite {
    pub const fn new(i: i32, j: i32) -> Self {
        DualSite { i, j }
    }

    /// Membership in the dual crack line `Γ*`.
    pub fn on_crack(&self) -> bool {
        self.i <= 0 && self.j == 0
    }

    pub fn step(&self, dir: Direction) -> DualSite {
        let (di, dj) = dir.offset();
        DualSite::new(self.i + di, self.j + dj)
    }

    pub fn offset(&self, di: i32, dj: i32) -> DualSite {
        DualSite::new(self.i + di, self.j + dj)
    }

    pub fn norm_sq(&self) -> i64 {
        let (i, j) = (self.i as i64, self.j as i64);
        i * i + j * j
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Euclidean distance to the nearest point of `Γ*`, squared.
    pub fn crack_distance_sq(&self) -> i64 {
        let (i, j) = (self.i as i64, self.j as i64);
        if i <= 0 {
            j * j
        } else {
            i * i + j * j
        }
    }

    /// Nearest point of `Γ*`.
    pub fn nearest_crack_site(&self) -> DualSite {
        DualSite::new(self.i.min(0), 0)
    }
}

impl Located for DualSite {
    fn position(&self) -> [f64; 2] {
        [self.i as f64, self.j as f64]
    }
}

impl fmt::Display for DualSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

impl fmt::Display for PrimalSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y] = self.position();
        write!(f, "({x}, {y})")
    }
}

/// Oriented primal bond `tail → tail + direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub tail: PrimalSite,
    pub direction: Direction,
}

impl Bond {
    pub fn new(tail: PrimalSite, direction: Direction) -> Self {
        Bond { tail, direction }
    }

    pub fn head(&self) -> PrimalSite {
        self.tail.step(self.direction)
    }

    pub fn reversed(&self) -> Bond {
        Bond::new(self.head(), self.direction.reversed())
    }

    /// Same bond written from its tail along `+e₁` or `+e₂`; the flag is
    /// `true` when this required a reversal.
    pub fn canonical(&self) -> (Bond, bool) {
        if self.direction.is_positive() {
            (*self, false)
        } else {
            (self.reversed(), true)
        }
    }

    /// Whether the bond belongs to the interaction set (does not cross the
    /// crack).
    pub fn is_present(&self) -> bool {
        bond_present(self.tail, self.direction)
    }

    pub fn midpoint(&self) -> [f64; 2] {
        let [x, y] = self.tail.position();
        let (dx, dy) = self.direction.offset();
        [x + 0.5 * dx as f64, y + 0.5 * dy as f64]
    }

    /// The dual bond crossing this one, obtained by a clockwise quarter turn
    /// about the midpoint. Returns `(tail, head)` dual sites.
    pub fn dual(&self) -> (DualSite, DualSite) {
        let [mx, my] = self.midpoint();
        let (rx, ry) = self.direction.right_turn().offset();
        let tail = DualSite::new(
            (mx - 0.5 * rx as f64).round() as i32,
            (my - 0.5 * ry as f64).round() as i32,
        );
        let head = DualSite::new(
            (mx + 0.5 * rx as f64).round() as i32,
            (my + 0.5 * ry as f64).round() as i32,
        );
        (tail, head)
    }
}

impl fmt::Display for Bond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.tail, self.head())
    }
}

/// Oriented bond of the dual lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualBond {
    pub tail: DualSite,
    pub direction: Direction,
}

impl DualBond {
    pub fn new(tail: DualSite, direction: Direction) -> Self {
        DualBond { tail, direction }
    }

    pub fn head(&self) -> DualSite {
        self.tail.step(self.direction)
    }

    pub fn midpoint(&self) -> [f64; 2] {
        let (dx, dy) = self.direction.offset();
        [
            self.tail.i as f64 + 0.5 * dx as f64,
            self.tail.j as f64 + 0.5 * dy as f64,
        ]
    }

    /// Both endpoints on `Γ*`.
    pub fn inside_crack(&self) -> bool {
        self.tail.on_crack() && self.head().on_crack()
    }
}

impl fmt::Display for DualBond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.tail, self.head())
    }
}

const BULK: [Direction; 4] = Direction::ALL;
const UPPER: [Direction; 3] = [Direction::PlusE1, Direction::MinusE1, Direction::PlusE2];
const LOWER: [Direction; 3] = [Direction::PlusE1, Direction::MinusE1, Direction::MinusE2];

/// Interaction directions `R(l)` of a primal site.
pub fn neighbor_directions(l: PrimalSite) -> &'static [Direction] {
    if l.on_upper_flank() {
        &UPPER
    } else if l.on_lower_flank() {
        &LOWER
    } else {
        &BULK
    }
}

/// `false` exactly for the vertical bonds crossing `{x₂ = 0, x₁ < 0}`.
pub fn bond_present(tail: PrimalSite, dir: Direction) -> bool {
    !((tail.on_upper_flank() && dir == Direction::MinusE2)
        || (tail.on_lower_flank() && dir == Direction::PlusE2))
}

/// Complex square root `ω(z) = √r (cos θ/2, sin θ/2)` with `θ ∈ (−π, π]`.
pub fn omega(p: [f64; 2]) -> Result<[f64; 2], LatticeError> {
    let [x, y] = p;
    if x == 0.0 && y == 0.0 {
        return Err(LatticeError::OmegaAtOrigin);
    }
    let r = x.hypot(y);
    // Cancellation-free branches; a signed zero on the negative axis still
    // takes θ = π.
    if x >= 0.0 {
        let w1 = ((r + x) / 2.0).sqrt();
        Ok([w1, y / (2.0 * w1)])
    } else {
        let w2 = ((r - x) / 2.0).sqrt();
        let w1 = y.abs() / (2.0 * w2);
        Ok([w1, if y < 0.0 { -w2 } else { w2 }])
    }
}

/// `ω` extended by `ω(0) = 0`.
pub fn omega_ext(p: [f64; 2]) -> [f64; 2] {
    omega(p).unwrap_or([0.0, 0.0])
}

/// The three distances between two lattice points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// Euclidean distance.
    pub d: f64,
    /// Distance between the `ω`-images.
    pub d_w: f64,
    /// `|ω(a) + ω(b)|`; satisfies `d = d_w · d_tilde_w`.
    pub d_tilde_w: f64,
}

impl Separation {
    pub fn max_d(&self) -> f64 {
        self.d.max(self.d_w)
    }
}

/// Squared Euclidean distance computed in exact arithmetic where the
/// coordinates allow it (half-integer or integer lattices).
fn exact_dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx2 = ((a[0] - b[0]) * 2.0).round() as i64;
    let dy2 = ((a[1] - b[1]) * 2.0).round() as i64;
    (dx2 * dx2 + dy2 * dy2) as f64 / 4.0
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn separation<T: Located>(a: &T, b: &T) -> Separation {
    separation_of_points(a.position(), b.position(), true)
}

/// Separation of arbitrary points; `lattice` enables the exact squared
/// distance for lattice coordinates.
pub fn separation_of_points(a: [f64; 2], b: [f64; 2], lattice: bool) -> Separation {
    let wa = omega_ext(a);
    let wb = omega_ext(b);
    let d = if lattice {
        exact_dist_sq(a, b).sqrt()
    } else {
        dist(a, b)
    };
    Separation {
        d,
        d_w: dist(wa, wb),
        d_tilde_w: (wa[0] + wb[0]).hypot(wa[1] + wb[1]),
    }
}

/// Minimum-separation test: every pair of cores must have
/// `max{d, d_w} ≥ threshold`. No core-to-crack distance is required.
pub fn min_separation_ok(cores: &[DualSite], threshold: f64) -> Result<bool, LatticeError> {
    let mut seen = HashSet::with_capacity(cores.len());
    for c in cores {
        if c.on_crack() {
            return Err(LatticeError::CoreOnCrack(c.i, c.j));
        }
        if !seen.insert(*c) {
            return Err(LatticeError::DuplicateCore(c.i, c.j));
        }
    }
    for (k, a) in cores.iter().enumerate() {
        for b in &cores[k + 1..] {
            if separation(a, b).max_d() < threshold {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest threshold at which [`min_separation_ok`] passes (`∞` for fewer
/// than two cores).
pub fn separation_certificate(cores: &[DualSite]) -> f64 {
    let mut best = f64::INFINITY;
    for (k, a) in cores.iter().enumerate() {
        for b in &cores[k + 1..] {
            best = best.min(separation(a, b).max_d());
        }
    }
    best
}

/// Closed loop of four primal bonds around a dual site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaquette {
    pub center: DualSite,
    /// Clockwise traversal starting from the lower-left atom.
    pub bonds: [Bond; 4],
    /// Some bond of the loop crosses the crack.
    pub on_crack: bool,
}

pub fn plaquette(center: DualSite) -> Plaquette {
    let ll = PrimalSite::new(center.i - 1, center.j - 1);
    let ul = PrimalSite::new(center.i - 1, center.j);
    let ur = PrimalSite::new(center.i, center.j);
    let lr = PrimalSite::new(center.i, center.j - 1);
    let bonds = [
        Bond::new(ll, Direction::PlusE2),
        Bond::new(ul, Direction::PlusE1),
        Bond::new(ur, Direction::MinusE2),
        Bond::new(lr, Direction::MinusE1),
    ];
    let on_crack = bonds.iter().any(|b| !b.is_present());
    Plaquette {
        center,
        bonds,
        on_crack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site_at(x: f64, y: f64) -> PrimalSite {
        PrimalSite::new((x - 0.5).round() as i32, (y - 0.5).round() as i32)
    }

    #[test]
    fn neighbor_sets() {
        use Direction::*;
        assert_eq!(
            neighbor_directions(site_at(0.5, 0.5)),
            &[PlusE1, MinusE1, PlusE2, MinusE2]
        );
        assert_eq!(
            neighbor_directions(site_at(-1.5, 0.5)),
            &[PlusE1, MinusE1, PlusE2]
        );
        assert_eq!(
            neighbor_directions(site_at(-0.5, -0.5)),
            &[PlusE1, MinusE1, MinusE2]
        );
        // just ahead of the tip nothing is cut
        assert_eq!(neighbor_directions(site_at(0.5, -0.5)).len(), 4);
    }

    #[test]
    fn bond_set_is_symmetric() {
        for i in -6..6 {
            for j in -6..6 {
                let l = PrimalSite::new(i, j);
                for &d in neighbor_directions(l) {
                    let head = l.step(d);
                    assert!(neighbor_directions(head).contains(&d.reversed()));
                    // no bond crosses {x2 = 0, x1 < 0}
                    let b = Bond::new(l, d);
                    let [mx, my] = b.midpoint();
                    assert!(!(my == 0.0 && mx < 0.0));
                }
            }
        }
    }

    #[test]
    fn omega_examples() {
        let w = omega([1.0, 0.0]).unwrap();
        assert_eq!(w, [1.0, 0.0]);
        let w = omega([-1.0, 0.0]).unwrap();
        assert!(w[0].abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        let w = omega([-1.0, -0.0]).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-15);
        let w = omega([0.0, 4.0]).unwrap();
        assert!((w[0] - 2f64.sqrt()).abs() < 1e-15 && (w[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(omega([0.0, 0.0]), Err(LatticeError::OmegaAtOrigin));
        assert_eq!(omega_ext([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn omega_matches_polar_form() {
        for &(x, y) in &[
            (3.0, 2.0),
            (-3.0, 1.0),
            (-3.0, -1.0),
            (0.25, -7.0),
            (-1e-9, 5.0),
        ] {
            let r: f64 = f64::hypot(x, y);
            let th: f64 = f64::atan2(y, x);
            let w = omega([x, y]).unwrap();
            assert!((w[0] - r.sqrt() * (th / 2.0).cos()).abs() < 1e-13);
            assert!((w[1] - r.sqrt() * (th / 2.0).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn separation_examples() {
        let s = separation(&DualSite::new(-3, 1), &DualSite::new(-3, -1));
        assert_eq!(s.d, 2.0);
        // closed form: 2 Im ω(-3 + i) = 2 sqrt((sqrt(10) + 3) / 2)
        let expected = 2.0 * ((10f64.sqrt() + 3.0) / 2.0).sqrt();
        assert!((s.d_w - expected).abs() < 1e-13);
        assert!((s.d_w - 3.5107).abs() < 1e-4);
        assert!((s.d - s.d_w * s.d_tilde_w).abs() < 1e-12);

        let s = separation(&DualSite::new(4, 4), &DualSite::new(4, 4));
        assert_eq!((s.d, s.d_w), (0.0, 0.0));
    }

    #[test]
    fn min_separation_examples() {
        let across = [DualSite::new(-5, 1), DualSite::new(-5, -1)];
        assert!(min_separation_ok(&across, 3.0).unwrap());
        let ahead = [DualSite::new(4, 1), DualSite::new(5, 1)];
        assert!(!min_separation_ok(&ahead, 3.0).unwrap());
        assert!(min_separation_ok(&[DualSite::new(2, 2)], 100.0).unwrap());
        assert_eq!(
            min_separation_ok(&[DualSite::new(2, 2), DualSite::new(2, 2)], 1.0),
            Err(LatticeError::DuplicateCore(2, 2))
        );
        assert_eq!(
            min_separation_ok(&[DualSite::new(-2, 0)], 1.0),
            Err(LatticeError::CoreOnCrack(-2, 0))
        );
    }

    #[test]
    fn plaquette_geometry() {
        let p = plaquette(DualSite::new(1, 1));
        let path: Vec<[f64; 2]> = p.bonds.iter().map(|b| b.tail.position()).collect();
        assert_eq!(path, vec![[0.5, 0.5], [0.5, 1.5], [1.5, 1.5], [1.5, 0.5]]);
        assert_eq!(p.bonds[3].head().position(), [0.5, 0.5]);
        for w in p.bonds.windows(2) {
            assert_eq!(w[0].head(), w[1].tail);
        }
        assert!(!p.on_crack);
        assert!(plaquette(DualSite::new(0, 0)).on_crack);
        assert!(plaquette(DualSite::new(-4, 0)).on_crack);
        assert!(!plaquette(DualSite::new(1, 0)).on_crack);
        assert!(!plaquette(DualSite::new(-3, 2)).on_crack);
    }

    #[test]
    fn dual_bond_is_right_turn() {
        let b = Bond::new(PrimalSite::new(0, 0), Direction::PlusE1);
        assert_eq!(b.dual(), (DualSite::new(1, 1), DualSite::new(1, 0)));
        let b = Bond::new(PrimalSite::new(0, 0), Direction::PlusE2);
        assert_eq!(b.dual(), (DualSite::new(0, 1), DualSite::new(1, 1)));
        // reversal swaps the dual endpoints
        let (t, h) = b.reversed().dual();
        assert_eq!((h, t), b.dual());
        // crack-crossing bonds map into Γ*
        let cut = Bond::new(PrimalSite::new(-3, -1), Direction::PlusE2);
        assert!(!cut.is_present());
        let (t, h) = cut.dual();
        assert!(t.on_crack() && h.on_crack());
    }
}
