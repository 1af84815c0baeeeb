//! The eight symmetries of the square.
//!
//! A variant is `F^flip R^turns` applied to the image: first `turns`
//! counter-clockwise quarter rotations, then an optional horizontal mirror.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dihedral {
    pub flip: bool,
    /// Counter-clockwise quarter turns, `0..4`.
    pub turns: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        flip: false,
        turns: 0,
    };

    pub fn new(flip: bool, turns: u8) -> Self {
        Self {
            flip,
            turns: turns % 4,
        }
    }

    /// All eight variants, identity first.
    pub fn all() -> [Dihedral; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = Self::new(i >= 4, (i % 4) as u8);
        }
        out
    }

    /// `self` after `first`: applying the result equals applying `first`
    /// and then `self`.
    pub fn after(self, first: Dihedral) -> Dihedral {
        // R F = F R^-1, so F^a R^x F^b R^y = F^(a+b) R^(y + (b ? -x : x))
        let turns = if first.flip {
            4 + first.turns as i32 - self.turns as i32
        } else {
            (first.turns + self.turns) as i32
        };
        Self::new(self.flip ^ first.flip, turns.rem_euclid(4) as u8)
    }

    pub fn inverse(self) -> Dihedral {
        if self.flip {
            self
        } else {
            Self::new(false, (4 - self.turns) % 4)
        }
    }

    /// Where pixel `(r, c)` of an `h x w` plane lands.
    pub fn map_coord(
        self,
        (mut r, mut c): (usize, usize),
        (mut h, mut w): (usize, usize),
    ) -> (usize, usize) {
        for _ in 0..self.turns {
            (r, c) = (w - 1 - c, r);
            (h, w) = (w, h);
        }
        if self.flip {
            c = w - 1 - c;
        }
        let _ = h;
        (r, c)
    }

    pub fn apply_plane(self, plane: ArrayView2<f32>) -> Array2<f32> {
        let mut p = plane.to_owned();
        for _ in 0..self.turns {
            p = p.reversed_axes().slice(s![..;-1, ..]).to_owned();
        }
        if self.flip {
            p = p.slice(s![.., ..;-1]).to_owned();
        }
        p
    }

    pub fn apply_stack(self, stack: &Array3<f32>) -> Array3<f32> {
        let planes: Vec<Array2<f32>> = stack
            .axis_iter(Axis(0))
            .map(|p| self.apply_plane(p))
            .collect();
        let views: Vec<_> = planes.iter().map(|p| p.view()).collect();
        ndarray::stack(Axis(0), &views).expect("planes share a shape")
    }
}

/// Applies the same symmetry to image, mask and edge mask.
pub fn augment(sample: &Sample, variant: Dihedral) -> Sample {
    Sample {
        image: variant.apply_stack(&sample.image),
        gt: variant.apply_plane(sample.gt.view()),
        edge_gt: variant.apply_plane(sample.edge_gt.view()),
        id: sample.id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Array2<f32> {
        Array2::from_shape_fn((h, w), |(r, c)| (r * w + c) as f32)
    }

    #[test]
    fn quarter_turn_is_counter_clockwise() {
        let a = ramp(2, 3);
        let r = Dihedral::new(false, 1).apply_plane(a.view());
        // [[0,1,2],[3,4,5]] -> [[2,5],[1,4],[0,3]]
        assert_eq!(r, ndarray::array![[2.0, 5.0], [1.0, 4.0], [0.0, 3.0]]);
    }

    #[test]
    fn pixel_map_agrees_with_planes() {
        let a = ramp(3, 5);
        for d in Dihedral::all() {
            let out = d.apply_plane(a.view());
            for r in 0..3 {
                for c in 0..5 {
                    let (r2, c2) = d.map_coord((r, c), (3, 5));
                    assert_eq!(out[[r2, c2]], a[[r, c]], "{d:?}");
                }
            }
        }
    }

    #[test]
    fn composition_and_inverse() {
        let a = ramp(4, 4);
        for x in Dihedral::all() {
            assert_eq!(x.inverse().apply_plane(x.apply_plane(a.view()).view()), a);
            for y in Dihedral::all() {
                let seq = y.apply_plane(x.apply_plane(a.view()).view());
                assert_eq!(y.after(x).apply_plane(a.view()), seq, "{y:?} after {x:?}");
            }
        }
    }

    #[test]
    fn variants_are_distinct() {
        let a = ramp(4, 4);
        let outs: Vec<_> = Dihedral::all()
            .iter()
            .map(|d| d.apply_plane(a.view()))
            .collect();
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(outs[i], outs[j]);
            }
        }
    }
}
