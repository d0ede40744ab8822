//! Dense (unhashed) tile coding over a bounded box.

use crate::mdp::StateVec;

#[derive(Clone, Debug, PartialEq)]
pub struct TileCoder {
    lo: Vec<f64>,
    width: Vec<f64>,
    tilings: usize,
    tiles_per_dim: usize,
    // tiles along each dimension of one tiling, including the overhang column
    side: usize,
    tiles_per_tiling: usize,
}

impl TileCoder {
    pub fn new(lo: &[f64], hi: &[f64], tilings: usize, tiles_per_dim: usize) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(tilings > 0 && tiles_per_dim > 0);
        let width = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| {
                assert!(h > l, "empty tile-coding range");
                (h - l) / tiles_per_dim as f64
            })
            .collect();
        let side = tiles_per_dim + 1;
        TileCoder {
            lo: lo.to_vec(),
            width,
            tilings,
            tiles_per_dim,
            side,
            tiles_per_tiling: side.pow(lo.len() as u32),
        }
    }

    pub fn tilings(&self) -> usize {
        self.tilings
    }

    pub fn tiles_per_dim(&self) -> usize {
        self.tiles_per_dim
    }

    /// Total number of features.
    pub fn size(&self) -> usize {
        self.tilings * self.tiles_per_tiling
    }

    /// Writes the active feature of every tiling into `out`.
    ///
    /// Tilings are displaced asymmetrically: tiling `t` is shifted by
    /// `t * (2d + 1) / T` tile widths in dimension `d`, modulo one tile.
    pub fn active(&self, state: &StateVec, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.tilings);
        let t_f = self.tilings as f64;
        for (t, slot) in out.iter_mut().enumerate() {
            let mut index = 0usize;
            for d in (0..self.lo.len()).rev() {
                let shift = ((t * (2 * d + 1)) % self.tilings) as f64 / t_f;
                let pos = (state[d] - self.lo[d]) / self.width[d] + shift;
                let cell = (pos.floor().max(0.0) as usize).min(self.side - 1);
                index = index * self.side + cell;
            }
            *slot = t * self.tiles_per_tiling + index;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_feature_per_tiling() {
        let coder = TileCoder::new(&[0.0, 0.0], &[1.0, 1.0], 4, 8);
        let mut out = [0usize; 4];
        coder.active(&StateVec::new(&[0.3, 0.7]), &mut out);
        for (t, f) in out.iter().enumerate() {
            assert!(*f >= t * 81 && *f < (t + 1) * 81);
        }
        assert_eq!(coder.size(), 4 * 81);
    }

    #[test]
    fn nearby_states_share_tiles_far_ones_do_not() {
        let coder = TileCoder::new(&[0.0], &[1.0], 8, 8);
        let mut a = [0usize; 8];
        let mut b = [0usize; 8];
        let mut c = [0usize; 8];
        coder.active(&StateVec::new(&[0.50]), &mut a);
        coder.active(&StateVec::new(&[0.51]), &mut b);
        coder.active(&StateVec::new(&[0.90]), &mut c);
        let shared = |x: &[usize], y: &[usize]| x.iter().zip(y).filter(|(p, q)| p == q).count();
        assert!(shared(&a, &b) >= 7);
        assert_eq!(shared(&a, &c), 0);
    }

    #[test]
    fn out_of_range_inputs_are_clamped() {
        let coder = TileCoder::new(&[0.0], &[1.0], 2, 4);
        let mut out = [0usize; 2];
        coder.active(&StateVec::new(&[-5.0]), &mut out);
        assert_eq!(out, [0, 5]);
        coder.active(&StateVec::new(&[7.0]), &mut out);
        assert_eq!(out, [4, 9]);
    }
}
