//! Dense square index box `[-half, half]²` used for every lattice field.

/// Row-major indexing of integer pairs `(i, j)` with `|i|, |j| ≤ half`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    half: i32,
    side: usize,
}

impl IndexBox {
    pub fn new(half: i32) -> Self {
        assert!(half >= 0);
        IndexBox {
            half,
            side: (2 * half + 1) as usize,
        }
    }

    pub fn half(&self) -> i32 {
        self.half
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: i32, j: i32) -> bool {
        i.abs() <= self.half && j.abs() <= self.half
    }

    pub fn index(&self, i: i32, j: i32) -> Option<usize> {
        if self.contains(i, j) {
            Some((i + self.half) as usize * self.side + (j + self.half) as usize)
        } else {
            None
        }
    }

    pub fn coords(&self, idx: usize) -> (i32, i32) {
        let i = (idx / self.side) as i32 - self.half;
        let j = (idx % self.side) as i32 - self.half;
        (i, j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let h = self.half;
        (-h..=h).flat_map(move |i| (-h..=h).map(move |j| (i, j)))
    }
}
