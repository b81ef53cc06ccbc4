//! Spread of a set of augmented views, and the geometric-only baseline they
//! are compared against.

use rand::Rng;

use crate::image::{Field, Image};

/// Mean Euclidean distance over all unordered pairs.
pub fn mean_pairwise_l2(views: &[Image]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..views.len() {
        for j in i + 1..views.len() {
            let d2: f64 = views[i]
                .data()
                .iter()
                .zip(views[j].data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d2.sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Shape-preserving dihedral transforms: flips and 180 degree rotation always,
/// plus transposes and quarter turns on square images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dihedral {
    Identity,
    FlipH,
    FlipV,
    Rot180,
    Transpose,
    AntiTranspose,
    Rot90,
    Rot270,
}

impl Dihedral {
    pub fn available(height: usize, width: usize) -> &'static [Dihedral] {
        use Dihedral::*;
        if height == width {
            &[Identity, FlipH, FlipV, Rot180, Transpose, AntiTranspose, Rot90, Rot270]
        } else {
            &[Identity, FlipH, FlipV, Rot180]
        }
    }

    /// Source coordinate for output `(row, col)` of an `n x n` (or `h x w`) image.
    fn source(self, row: usize, col: usize, h: usize, w: usize) -> (usize, usize) {
        use Dihedral::*;
        match self {
            Identity => (row, col),
            FlipH => (row, w - 1 - col),
            FlipV => (h - 1 - row, col),
            Rot180 => (h - 1 - row, w - 1 - col),
            Transpose => (col, row),
            AntiTranspose => (w - 1 - col, h - 1 - row),
            Rot90 => (w - 1 - col, row),
            Rot270 => (col, h - 1 - row),
        }
    }

    pub fn apply(self, img: &Image) -> Image {
        let (h, w, c) = img.shape();
        let field = Field::from_fn(h, w, c, |ch, row, col| {
            let (r, cc) = self.source(row, col, h, w);
            img.get(ch, r, cc)
        });
        Image::try_from(field).expect("permutation preserves range")
    }
}

/// `k` views, each a uniformly drawn shape-preserving flip or rotation.
pub fn geometric_views<R: Rng + ?Sized>(rng: &mut R, img: &Image, k: usize) -> Vec<Image> {
    let ops = Dihedral::available(img.height(), img.width());
    (0..k)
        .map(|_| ops[rng.random_range(0..ops.len())].apply(img))
        .collect()
}
