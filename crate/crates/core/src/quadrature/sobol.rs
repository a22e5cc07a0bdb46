//! Sobol sequence in up to 32 dimensions (Joe-Kuo direction numbers) with
//! linear matrix scrambling and a random digital shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_SOBOL_DIM: usize = 32;
const BITS: usize = 32;

/// `(primitive polynomial, initial direction integers)` for dimensions 2..=32;
/// bit `j` of the polynomial is the coefficient of `x^j`.
static JOE_KUO: [(u32, &[u32]); 31] = [
    (3, &[1]),
    (7, &[1, 3]),
    (11, &[1, 3, 1]),
    (13, &[1, 1, 1]),
    (19, &[1, 1, 3, 3]),
    (25, &[1, 3, 5, 13]),
    (37, &[1, 1, 5, 5, 17]),
    (41, &[1, 1, 5, 5, 5]),
    (47, &[1, 1, 7, 11, 19]),
    (55, &[1, 1, 5, 1, 1]),
    (59, &[1, 1, 1, 3, 11]),
    (61, &[1, 3, 5, 5, 31]),
    (67, &[1, 3, 3, 9, 7, 49]),
    (91, &[1, 1, 1, 15, 21, 21]),
    (97, &[1, 3, 1, 13, 27, 49]),
    (103, &[1, 1, 1, 15, 7, 5]),
    (109, &[1, 3, 1, 15, 13, 25]),
    (115, &[1, 1, 5, 5, 19, 61]),
    (131, &[1, 3, 7, 11, 23, 15, 103]),
    (137, &[1, 3, 7, 13, 13, 15, 69]),
    (143, &[1, 1, 3, 13, 7, 35, 63]),
    (145, &[1, 3, 5, 9, 1, 25, 53]),
    (157, &[1, 3, 1, 13, 9, 35, 107]),
    (167, &[1, 3, 1, 5, 27, 61, 31]),
    (171, &[1, 1, 5, 11, 19, 41, 61]),
    (185, &[1, 3, 5, 3, 3, 13, 69]),
    (191, &[1, 1, 7, 13, 1, 19, 1]),
    (193, &[1, 3, 7, 5, 13, 19, 59]),
    (203, &[1, 1, 3, 9, 25, 29, 41]),
    (211, &[1, 3, 5, 13, 23, 1, 55]),
    (213, &[1, 3, 7, 3, 13, 59, 17]),
];

/// Direction numbers `v_1..v_32` of one dimension, MSB = first binary digit.
fn directions(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (poly, m) = JOE_KUO[dim - 1];
    let s = m.len();
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (poly >> (s - l)) & 1 == 1 {
                x ^= v[k - l];
            }
        }
        v[k] = x;
    }
    v
}

#[derive(Debug, Clone)]
pub struct Sobol {
    dirs: Vec<[u32; BITS]>,
    shift: Vec<u32>,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(Error::InvalidInput(format!("Sobol dimension must be in 1..={MAX_SOBOL_DIM}, got {dim}")));
        }
        Ok(Self { dirs: (0..dim).map(directions).collect(), shift: vec![0; dim] })
    }

    /// Left-multiplies each dimension's generator matrix by a random unit
    /// lower-triangular binary matrix and draws a digital shift.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..dim {
            // row r acts on digit r (bit 31 - r); it sees digits 0..=r
            let rows: Vec<u32> = (0..BITS)
                .map(|r| {
                    let diag = 1u32 << (BITS - 1 - r);
                    let above = if r == 0 { 0 } else { rng.gen::<u32>() & !(u32::MAX >> r) };
                    above | diag
                })
                .collect();
            for vk in s.dirs[j].iter_mut() {
                let mut out = 0u32;
                for (r, row) in rows.iter().enumerate() {
                    if (row & *vk).count_ones() % 2 == 1 {
                        out |= 1 << (BITS - 1 - r);
                    }
                }
                *vk = out;
            }
            s.shift[j] = rng.gen();
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    /// First `n` points as 32-bit integers, point-major, Gray-code order.
    pub fn integers(&self, n: usize) -> Result<Vec<u32>> {
        if n as u64 > 1u64 << BITS {
            return Err(Error::InvalidInput("too many Sobol points requested".into()));
        }
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        let mut x = vec![0u32; d];
        for i in 0..n {
            if i > 0 {
                let c = i.trailing_zeros() as usize;
                for (xj, dir) in x.iter_mut().zip(&self.dirs) {
                    *xj ^= dir[c];
                }
            }
            out.extend(x.iter().zip(&self.shift).map(|(a, s)| a ^ s));
        }
        Ok(out)
    }

    /// First `n` points in `(0, 1)^d`, centred in their `2^-32` cells.
    pub fn uniforms(&self, n: usize) -> Result<Vec<f64>> {
        Ok(self.integers(n)?.into_iter().map(|x| (x as f64 + 0.5) / 4294967296.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_first_points() {
        let s = Sobol::new(32).unwrap();
        let x = s.integers(16).unwrap();
        let col = |j: usize| -> Vec<u32> { (0..16).map(|i| x[i * 32 + j]).collect() };
        let g = 1u32 << 28;
        assert_eq!(col(0), [0, 8, 12, 4, 6, 14, 10, 2, 3, 11, 15, 7, 5, 13, 9, 1].map(|k| k * g));
        assert_eq!(col(1), [0, 8, 4, 12, 6, 14, 2, 10, 5, 13, 1, 9, 3, 11, 7, 15].map(|k| k * g));
        assert_eq!(col(2), [0, 8, 4, 12, 10, 2, 14, 6, 15, 7, 11, 3, 5, 13, 1, 9].map(|k| k * g));
        assert_eq!(col(5), [0, 8, 12, 4, 2, 10, 14, 6, 5, 13, 9, 1, 7, 15, 11, 3].map(|k| k * g));
        assert_eq!(col(31), [0, 8, 4, 12, 2, 10, 6, 14, 13, 5, 9, 1, 15, 7, 11, 3].map(|k| k * g));
    }

    #[test]
    fn matches_reference_deep_points() {
        let s = Sobol::new(32).unwrap();
        let x = s.integers(4096).unwrap();
        let row777: [u32; 32] = [
            2973761536, 4022337536, 700448768, 1178599424, 2730491904, 1530920960, 817889280, 3275751424, 1497366528,
            1388314624, 3200253952, 2990538752, 1648361472, 2034237440, 2445279232, 2210398208, 1732247552, 3711959040,
            1589641216, 3233808384, 1019215872, 1170210816, 4064280576, 2067791872, 1480589312, 624951296, 255852544,
            3351248896, 272629760, 473956352, 2327838720, 3862953984,
        ];
        let row4095: [u32; 32] = [
            1048576, 4042260480, 1435500544, 3872391168, 4038066176, 338690048, 4077912064, 1678770176, 823132160,
            1058013184, 2446327808, 1380974592, 1584398336, 2232418304, 2366636032, 1789919232, 267386880, 2616197120,
            3492806656, 2238709760, 969932800, 3144679424, 2911895552, 1913651200, 787480576, 2289041408, 1626341376,
            122683392, 4012900352, 3673161728, 1552941056, 376438784,
        ];
        assert_eq!(&x[777 * 32..778 * 32], &row777);
        assert_eq!(&x[4095 * 32..4096 * 32], &row4095);
    }

    #[test]
    fn scrambled_keeps_stratification() {
        // each of the 2^k elementary intervals in every coordinate holds one point
        let s = Sobol::scrambled(5, 42).unwrap();
        let n = 256;
        let x = s.integers(n).unwrap();
        for j in 0..5 {
            let mut seen = vec![false; n];
            for i in 0..n {
                seen[(x[i * 5 + j] >> 24) as usize] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
        let again = Sobol::scrambled(5, 42).unwrap().integers(n).unwrap();
        assert_eq!(x, again);
        assert_ne!(x, Sobol::scrambled(5, 43).unwrap().integers(n).unwrap());
    }

    #[test]
    fn dimension_limits() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(33).is_err());
    }
}
