//! SBS pairing for spectrum bargaining: a symmetric benefit matrix over
//! candidate pairs and a maximum-weight perfect pairing found by the
//! Hungarian method.

use thiserror::Error;

use crate::allocator::{solve, Instance, Participant, SolveOptions};

#[derive(Debug, Error, PartialEq)]
pub enum PairingError {
    #[error("benefit matrix is not square ({rows} rows, row {row} has {cols} columns)")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },
    #[error("benefit matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("perfect pairing needs an even number of SBSs, got {0}")]
    OddSize(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenefitMatrix {
    /// Symmetric with a zero diagonal.
    pub c_tilde: Vec<Vec<f64>>,
    pub n_real: usize,
    /// When set, the last row and column belong to the virtual SBS.
    pub has_virtual: bool,
}

impl BenefitMatrix {
    pub fn size(&self) -> usize {
        self.c_tilde.len()
    }

    /// Averages `(i, j)` and `(j, i)` and zeroes the diagonal.
    pub fn symmetrized(raw: Vec<Vec<f64>>, n_real: usize, has_virtual: bool) -> Self {
        let n = raw.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
                }
            }
        }
        BenefitMatrix {
            c_tilde: c,
            n_real,
            has_virtual,
        }
    }

    pub fn check(&self) -> Result<(), PairingError> {
        let rows = self.c_tilde.len();
        for (i, row) in self.c_tilde.iter().enumerate() {
            if row.len() != rows {
                return Err(PairingError::NotSquare {
                    rows,
                    row: i,
                    cols: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(PairingError::NonFinite(i, j));
            }
        }
        if rows % 2 == 1 {
            return Err(PairingError::OddSize(rows));
        }
        Ok(())
    }

    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs
            .iter()
            .map(|&(i, j)| self.c_tilde[i][j] + self.c_tilde[j][i])
            .sum()
    }
}

/// Disjoint unordered pairs `(i, j)` with `i < j` covering every index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatching {
    pub pairs: Vec<(usize, usize)>,
    /// `Σ a_ij Ĉ_ij`, counting each pair in both orientations.
    pub total_benefit: f64,
}

impl PairMatching {
    /// The partner of `i`, if any.
    pub fn partner(&self, i: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// Maximum-weight assignment (row to column permutation) on a square matrix.
/// `forbidden` entries are never chosen unless unavoidable. O(n³).
pub fn hungarian_max(weights: &[Vec<f64>], forbidden: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let finite_max = weights
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let big = (finite_max + 1.0) * (n as f64 + 1.0) * 4.0;
    // Minimize cost = -weight, with forbidden cells priced out.
    let cost = |i: usize, j: usize| {
        if forbidden(i, j) {
            big
        } else {
            -weights[i][j]
        }
    };
    // Shortest augmenting path formulation with 1-based potentials.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Largest size for which a non-involutive Hungarian result is resolved by
/// exact subset dynamic programming.
pub const EXACT_FALLBACK_MAX: usize = 20;

/// Maximum-weight perfect pairing.
///
/// The Hungarian method solves the assignment relaxation with self-pairs
/// forbidden. For a symmetric matrix, when the optimal permutation is an
/// involution its 2-cycles are an optimal pairing. Otherwise the
/// relaxation contains longer cycles and the pairing is recovered exactly
/// by dynamic programming over subsets (greedy beyond
/// [`EXACT_FALLBACK_MAX`]).
pub fn match_pairs(benefits: &BenefitMatrix) -> Result<PairMatching, PairingError> {
    benefits.check()?;
    let n = benefits.size();
    let c = &benefits.c_tilde;
    let sigma = hungarian_max(c, |i, j| i == j);
    let involution = (0..n).all(|i| sigma[i] != i && sigma[sigma[i]] == i);
    let pairs = if involution {
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .filter(|&i| i < sigma[i])
            .map(|i| (i, sigma[i]))
            .collect();
        pairs.sort_unstable();
        pairs
    } else if n <= EXACT_FALLBACK_MAX {
        log::debug!("Hungarian permutation has odd cycles, using exact pairing");
        exact_pairing(c)
    } else {
        log::debug!("Hungarian permutation has odd cycles, using greedy pairing");
        greedy_pairing(c)
    };
    Ok(PairMatching {
        total_benefit: benefits.total(&pairs),
        pairs,
    })
}

fn pair_value(c: &[Vec<f64>], i: usize, j: usize) -> f64 {
    c[i][j] + c[j][i]
}

/// Exact maximum-weight perfect pairing by DP over subsets, always pairing
/// the lowest unpaired index first.
fn exact_pairing(c: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = c.len();
    let full = (1usize << n) - 1;
    let mut best = vec![f64::NEG_INFINITY; 1 << n];
    let mut choice = vec![(0usize, 0usize); 1 << n];
    best[0] = 0.0;
    // `best[mask]` is the best pairing of the indices in `mask`.
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let v = best[rest & !(1 << j)] + pair_value(c, i, j);
            if v > best[mask] {
                best[mask] = v;
                choice[mask] = (i, j);
            }
        }
    }
    let mut pairs = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        pairs.push((i, j));
        mask &= !(1 << i) & !(1 << j);
    }
    pairs.sort_unstable();
    pairs
}

/// Descending-benefit greedy pairing.
fn greedy_pairing(c: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = c.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((pair_value(c, i, j), i, j));
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut taken = vec![false; n];
    let mut pairs = Vec::new();
    for (_, i, j) in edges {
        if !taken[i] && !taken[j] {
            taken[i] = true;
            taken[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Builds the benefit matrix `Ĉ_ij = joint_ij - solo_i - solo_j`, where
/// `solo(i)` is the no-trade instance of index `i` on its own band and
/// `joint(i, j)` the two-SBS instance on the pooled band with prices set.
/// Solver calls run in parallel.
pub fn estimate_benefits<S, J>(
    size: usize,
    n_real: usize,
    opts: &SolveOptions,
    solo: S,
    joint: J,
) -> BenefitMatrix
where
    S: Fn(usize) -> Instance + Sync,
    J: Fn(usize, usize) -> Instance + Sync,
{
    use rayon::prelude::*;
    let solo_values: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|i| solve(&solo(i), opts).objective_value)
        .collect();
    let candidates: Vec<(usize, usize)> = (0..size)
        .flat_map(|i| (i + 1..size).map(move |j| (i, j)))
        .collect();
    let joint_values: Vec<f64> = candidates
        .par_iter()
        .map(|&(i, j)| solve(&joint(i, j), opts).objective_value)
        .collect();
    let mut raw = vec![vec![0.0; size]; size];
    for (&(i, j), v) in candidates.iter().zip(joint_values) {
        let benefit = v - solo_values[i] - solo_values[j];
        raw[i][j] = benefit;
        raw[j][i] = benefit;
    }
    BenefitMatrix::symmetrized(raw, n_real, size > n_real)
}

/// A participant whose statistics are the arithmetic means of `members`.
pub fn average_participant(members: &[&Participant]) -> Participant {
    let k = members.len().max(1) as f64;
    let mean = |f: &dyn Fn(&Participant) -> f64| members.iter().map(|p| f(p)).sum::<f64>() / k;
    let users = (members.iter().map(|p| p.users()).sum::<usize>() as f64 / k)
        .round()
        .max(1.0) as usize;
    let queue_bits = (0..users)
        .map(|u| {
            members
                .iter()
                .map(|p| {
                    p.queue_bits
                        .get(u)
                        .copied()
                        .unwrap_or_else(|| mean_of(&p.queue_bits))
                })
                .sum::<f64>()
                / k
        })
        .collect();
    Participant {
        sbs: None,
        queue_bits,
        w: mean(&|p| p.w),
        energy_offset: mean(&|p| p.energy_offset),
        grid_price: mean(&|p| p.grid_price),
        p_max_w: mean(&|p| p.p_max_w),
        static_power_w: mean(&|p| p.static_power_w),
        power_slope: mean(&|p| p.power_slope),
        alpha: 0.0,
        beta: 0.0,
        initial_band_hz: mean(&|p| p.initial_band_hz),
    }
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(c: Vec<Vec<f64>>) -> BenefitMatrix {
        let n = c.len();
        BenefitMatrix::symmetrized(c, n, false)
    }

    #[test]
    fn two_sbs() {
        let m = match_pairs(&matrix(vec![vec![0.0, 3.0], vec![3.0, 0.0]])).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.total_benefit, 6.0);
    }

    #[test]
    fn dominant_pair_is_kept() {
        let mut c = vec![vec![1.0; 4]; 4];
        c[1][3] = 50.0;
        c[3][1] = 50.0;
        let m = match_pairs(&matrix(c)).unwrap();
        assert_eq!(m.pairs, vec![(0, 2), (1, 3)]);
        assert_eq!(m.partner(3), Some(1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            match_pairs(&BenefitMatrix {
                c_tilde: vec![vec![0.0, 1.0]],
                n_real: 1,
                has_virtual: false
            }),
            Err(PairingError::NotSquare { .. })
        ));
        let mut c = vec![vec![0.0; 2]; 2];
        c[0][1] = f64::NAN;
        let bm = BenefitMatrix {
            c_tilde: c,
            n_real: 2,
            has_virtual: false,
        };
        assert_eq!(match_pairs(&bm), Err(PairingError::NonFinite(0, 1)));
        assert_eq!(
            match_pairs(&matrix(vec![vec![0.0; 3]; 3])),
            Err(PairingError::OddSize(3))
        );
    }

    #[test]
    fn hungarian_solves_assignment() {
        let w = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian_max(&w, |_, _| false);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
        assert_eq!(total, 11.0);
    }

    #[test]
    fn odd_cycles_fall_back_to_exact() {
        // Two triangles of strong ties: the assignment relaxation prefers
        // 3-cycles but a pairing must cross between them.
        let mut c = vec![vec![0.0; 6]; 6];
        for &(i, j) in &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            c[i][j] = 10.0;
            c[j][i] = 10.0;
        }
        c[2][3] = 1.0;
        c[3][2] = 1.0;
        let bm = matrix(c);
        let m = match_pairs(&bm).unwrap();
        assert_eq!(m.total_benefit, 42.0);
        assert_eq!(exact_pairing(&bm.c_tilde), m.pairs);
    }
}
