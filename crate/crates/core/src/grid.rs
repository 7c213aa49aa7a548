//! Regular grid on the belief simplex.
//!
//! Grid points are the beliefs whose coordinates are multiples of `1/m`. A
//! point with integer coordinates `c` (summing to `m`) is identified with the
//! stars-and-bars bar positions `b_k = c_0 + .. + c_k + k`, and points are
//! stored in colex order of those bar sets. The colex rank is
//! `sum_k C(b_k, k + 1)`, which gives exact O(nx) reverse lookup. For two
//! states this lists `(0, m), (1, m - 1), .., (m, 0)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::filter::Belief;

pub const DEFAULT_MAX_POINTS: usize = 2_000_000;

/// Fractional parts closer than this are treated as tied during projection.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum GridError {
    ResourceLimit { points: Option<u64>, cap: usize },
    Degenerate,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::ResourceLimit { points: Some(p), cap } => {
                write!(f, "grid would have {} points, cap is {}", p, cap)
            }
            GridError::ResourceLimit { points: None, cap } => {
                write!(f, "grid size overflows, cap is {}", cap)
            }
            GridError::Degenerate => write!(f, "grid needs nx >= 1 and m >= 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GridError {}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexGrid {
    nx: usize,
    m: u32,
    /// Integer coordinates, `nx` per point, in rank order.
    coords: Vec<u32>,
    /// Beliefs, `nx` per point.
    probs: Vec<f64>,
    /// `binom[k][n] = C(n, k)` for `k < nx`, `n <= m + nx`.
    binom: Vec<Vec<u64>>,
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

impl SimplexGrid {
    pub fn build(nx: usize, m: u32) -> Result<SimplexGrid, GridError> {
        SimplexGrid::build_with_cap(nx, m, DEFAULT_MAX_POINTS)
    }

    pub fn build_with_cap(nx: usize, m: u32, cap: usize) -> Result<SimplexGrid, GridError> {
        if nx == 0 || m == 0 {
            return Err(GridError::Degenerate);
        }
        let count = binomial(m as u64 + nx as u64 - 1, nx as u64 - 1);
        match count {
            Some(c) if c <= cap as u64 => {}
            _ => return Err(GridError::ResourceLimit { points: count, cap }),
        }
        let count = count.unwrap() as usize;

        let top = m as usize + nx;
        let binom: Vec<Vec<u64>> = (0..nx)
            .map(|k| (0..=top).map(|n| binomial(n as u64, k as u64 + 1).unwrap_or(u64::MAX)).collect())
            .collect();

        let mut grid = SimplexGrid {
            nx,
            m,
            coords: vec![0; count * nx],
            probs: vec![0.0; count * nx],
            binom,
        };

        // walk all compositions of m into nx parts
        let mut c = vec![0u32; nx];
        c[nx - 1] = m;
        loop {
            let r = grid.rank(&c);
            grid.coords[r * nx..(r + 1) * nx].copy_from_slice(&c);
            for (p, &ci) in grid.probs[r * nx..(r + 1) * nx].iter_mut().zip(&c) {
                *p = ci as f64 / m as f64;
            }
            if !next_composition(&mut c) {
                break;
            }
        }
        Ok(grid)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn resolution(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, i: usize) -> &[u32] {
        &self.coords[i * self.nx..(i + 1) * self.nx]
    }

    /// Grid point `i` as a probability slice.
    pub fn probs(&self, i: usize) -> &[f64] {
        &self.probs[i * self.nx..(i + 1) * self.nx]
    }

    pub fn point(&self, i: usize) -> Belief {
        Belief::new(self.probs(i).to_vec()).expect("grid points are beliefs")
    }

    /// Index of the vertex `e_x`.
    pub fn vertex(&self, x: usize) -> usize {
        let mut c = vec![0u32; self.nx];
        c[x] = self.m;
        self.rank(&c)
    }

    /// Colex rank of integer coordinates summing to `m`.
    pub fn rank(&self, c: &[u32]) -> usize {
        let mut r: u64 = 0;
        let mut bar: usize = 0;
        for (k, &ck) in c.iter().take(self.nx - 1).enumerate() {
            bar += ck as usize + if k == 0 { 0 } else { 1 };
            r += self.binom[k][bar];
        }
        r as usize
    }

    /// Exact lookup of integer coordinates; `None` if they are not a grid
    /// point.
    pub fn index_of(&self, c: &[u32]) -> Option<usize> {
        if c.len() != self.nx || c.iter().map(|&x| x as u64).sum::<u64>() != self.m as u64 {
            return None;
        }
        Some(self.rank(c))
    }

    /// Index of an L1-nearest grid point, ties to the smallest index.
    pub fn project(&self, psi: &[f64]) -> usize {
        let coords = self.project_coords(psi);
        self.rank(&coords)
    }

    /// L1-nearest integer coordinates. Every L1-optimal lattice point rounds
    /// each scaled coordinate down or up, with the `r` round-ups going to the
    /// largest fractional parts. Among tied fractional parts the round-ups go
    /// to the highest coordinates, which minimizes the colex rank.
    pub fn project_coords(&self, psi: &[f64]) -> Vec<u32> {
        let nx = self.nx;
        let m = self.m as f64;
        let mut base = vec![0u32; nx];
        let mut frac = vec![0.0f64; nx];
        let mut floor_sum: i64 = 0;
        for i in 0..nx {
            let t = (psi[i] * m).clamp(0.0, m);
            let f = libm::floor(t);
            base[i] = f as u32;
            frac[i] = t - f;
            floor_sum += f as i64;
        }
        let mut remaining = (self.m as i64 - floor_sum).clamp(0, nx as i64) as usize;
        if remaining > 0 {
            let mut order: Vec<usize> = (0..nx).collect();
            // descending fractional part, then descending coordinate
            order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(b.cmp(&a)));
            let cut = frac[order[remaining - 1]];
            let above = order.iter().copied().filter(|&i| frac[i] > cut + TIE_EPS);
            let tied = order.iter().copied().filter(|&i| (frac[i] - cut).abs() <= TIE_EPS);
            let mut up: Vec<usize> = above.collect();
            let mut tied: Vec<usize> = tied.collect();
            tied.sort_unstable_by(|a, b| b.cmp(a));
            let need = remaining - up.len();
            up.extend(tied.into_iter().take(need));
            for &i in &up {
                base[i] += 1;
            }
            remaining -= up.len();
            debug_assert_eq!(remaining, 0);
        }
        let mut sum: i64 = base.iter().map(|&b| b as i64).sum();
        // clamped inputs can overshoot; trim from the lowest coordinates
        let mut i = 0;
        while sum > self.m as i64 && i < nx {
            if base[i] > 0 {
                base[i] -= 1;
                sum -= 1;
            } else {
                i += 1;
            }
        }
        base
    }

    pub fn projection_distance(&self, psi: &[f64]) -> f64 {
        let i = self.project(psi);
        self.probs(i).iter().zip(psi).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Advances `c` to its lexicographic successor among compositions of the
/// same sum; returns false after the last one `(m, 0, .., 0)`.
fn next_composition(c: &mut [u32]) -> bool {
    let n = c.len();
    let mut tail: u32 = 0;
    for j in (0..n.saturating_sub(1)).rev() {
        tail += c[j + 1];
        if tail > 0 {
            c[j] += 1;
            for x in c[j + 1..].iter_mut() {
                *x = 0;
            }
            c[n - 1] = tail - 1;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_project(grid: &SimplexGrid, psi: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..grid.len() {
            let d: f64 = grid.probs(i).iter().zip(psi).map(|(a, b)| (a - b).abs()).sum();
            if d < best.1 - 1e-12 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn two_state_listing() {
        let g = SimplexGrid::build(2, 4).unwrap();
        let want = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1.0, 0.0]];
        assert_eq!(g.len(), 5);
        for (i, w) in want.iter().enumerate() {
            assert_eq!(g.probs(i), w);
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(SimplexGrid::build(3, 2).unwrap().len(), 6);
        let g = SimplexGrid::build(2, 1).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.probs(0), &[0.0, 1.0]);
        assert_eq!(g.probs(1), &[1.0, 0.0]);
        assert_eq!(SimplexGrid::build(4, 10).unwrap().len(), 286);
    }

    #[test]
    fn every_point_visited_once() {
        for (nx, m) in [(1, 3), (2, 7), (3, 5), (4, 6), (5, 3)] {
            let g = SimplexGrid::build(nx, m).unwrap();
            for i in 0..g.len() {
                let c = g.coords(i);
                assert_eq!(c.iter().sum::<u32>(), m, "nx={} m={} i={}", nx, m, i);
                assert_eq!(g.index_of(c), Some(i));
            }
            for x in 0..nx {
                let v = g.vertex(x);
                assert_eq!(g.probs(v)[x], 1.0);
            }
        }
    }

    #[test]
    fn points_are_in_colex_order() {
        let g = SimplexGrid::build(3, 4).unwrap();
        let bars = |c: &[u32]| [c[0], c[0] + c[1] + 1];
        for i in 1..g.len() {
            let (a, b) = (bars(g.coords(i - 1)), bars(g.coords(i)));
            assert!((a[1], a[0]) < (b[1], b[0]));
        }
    }

    #[test]
    fn resource_limit() {
        assert!(matches!(
            SimplexGrid::build_with_cap(10, 100, 1000),
            Err(GridError::ResourceLimit { .. })
        ));
        assert!(matches!(SimplexGrid::build(30, 1000), Err(GridError::ResourceLimit { .. })));
    }

    #[test]
    fn projection_examples() {
        let g = SimplexGrid::build(2, 4).unwrap();
        let i = g.project(&[0.6, 0.4]);
        assert_eq!(g.probs(i), &[0.5, 0.5]);
        assert!((g.projection_distance(&[0.6, 0.4]) - 0.2).abs() < 1e-12);
        let i = g.project(&[0.625, 0.375]);
        assert_eq!(g.probs(i), &[0.5, 0.5]);
        for j in 0..g.len() {
            assert_eq!(g.project(g.probs(j)), j);
        }
    }

    #[test]
    fn projection_matches_exhaustive_search() {
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (nx, m) in [(2, 4), (3, 5), (3, 8), (4, 3)] {
            let g = SimplexGrid::build(nx, m).unwrap();
            for trial in 0..500 {
                let mut p: Vec<f64> = (0..nx).map(|_| next()).collect();
                if trial % 5 == 0 {
                    // snap to a finer lattice to provoke ties
                    for x in p.iter_mut() {
                        *x = libm::floor(*x * 2.0 * m as f64) / (2.0 * m as f64);
                    }
                }
                let s: f64 = p.iter().sum();
                if s == 0.0 {
                    continue;
                }
                p.iter_mut().for_each(|x| *x /= s);
                let (want, dist) = brute_project(&g, &p);
                let got = g.project(&p);
                let got_dist: f64 = g.probs(got).iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                assert!((got_dist - dist).abs() < 1e-9, "nx={} m={} p={:?}", nx, m, p);
                if (got_dist - dist).abs() < 1e-13 {
                    assert_eq!(got, want, "tie-break nx={} m={} p={:?}", nx, m, p);
                }
                assert!(got_dist <= nx as f64 / m as f64 + 1e-12);
            }
        }
    }
}
