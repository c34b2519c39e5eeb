//! Stratified train/validation/test split.
//!
//! Split sizes come from the largest-remainder method (ties go to train,
//! then validation). Each class's share of a split is the exact quota
//! `n_c * N_s / n` rounded down or up, chosen so that every class and every
//! split total comes out exact; a tiny max-flow picks which cells round up,
//! preferring the largest remainders. Class members are shuffled with a
//! seeded ChaCha8 generator and dealt out in that order.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledQuery};
use crate::domain::TemplateId;

/// Smallest class size that can be stratified.
pub const MIN_CLASS_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Spec(format!(
                "fractions {f:?} must be in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<LabeledQuery>,
    pub validation: Vec<LabeledQuery>,
    pub test: Vec<LabeledQuery>,
}

/// Global split sizes for `n` items.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> Result<[usize; 3], DatasetError> {
    spec.validate()?;
    let quotas = spec.fractions().map(|f| f * n as f64);
    // The epsilon absorbs binary noise such as 0.7 * 1000 = 699.9999....
    let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
    let mut order = [0usize, 1, 2];
    let rem = |i: usize| quotas[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut left = n - sizes.iter().sum::<usize>().min(n);
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    Ok(sizes)
}

/// Indices of each split, ascending.
pub fn stratified_split_indices(labels: &[TemplateId], spec: &SplitSpec) -> Result<[Vec<usize>; 3], DatasetError> {
    let n = labels.len();
    let sizes = split_sizes(n, spec)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); TemplateId::K];
    for (i, l) in labels.iter().enumerate() {
        let c = l
            .canonical_index()
            .ok_or_else(|| DatasetError::Stratification(format!("item {i} has unknown label `{l}`")))?;
        members[c].push(i);
    }
    let classes: Vec<usize> = (0..TemplateId::K).filter(|&c| !members[c].is_empty()).collect();
    if let Some(&c) = classes.iter().find(|&&c| members[c].len() < MIN_CLASS_SIZE) {
        return Err(DatasetError::Stratification(format!(
            "class `{}` has {} members, need at least {MIN_CLASS_SIZE}",
            TemplateId::CANONICAL[c],
            members[c].len()
        )));
    }

    let counts: Vec<usize> = classes.iter().map(|&c| members[c].len()).collect();
    let alloc = round_matrix(&counts, &sizes, n);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out: [Vec<usize>; 3] = Default::default();
    for (row, &c) in classes.iter().enumerate() {
        let mut m = members[c].clone();
        m.shuffle(&mut rng);
        let mut start = 0;
        for s in 0..3 {
            out[s].extend_from_slice(&m[start..start + alloc[row][s]]);
            start += alloc[row][s];
        }
    }
    out.iter_mut().for_each(|v| v.sort_unstable());
    Ok(out)
}

pub fn stratified_split(items: &[LabeledQuery], spec: &SplitSpec) -> Result<Split, DatasetError> {
    let labels: Vec<TemplateId> = items.iter().map(|q| q.label.clone()).collect();
    let [train, validation, test] = stratified_split_indices(&labels, spec)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| items[i].clone()).collect();
    Ok(Split {
        train: pick(train),
        validation: pick(validation),
        test: pick(test),
    })
}

/// Integer matrix with row sums `counts`, column sums `sizes`, and every cell
/// equal to floor or ceil of `counts[r] * sizes[s] / n`.
fn round_matrix(counts: &[usize], sizes: &[usize; 3], n: usize) -> Vec<[usize; 3]> {
    let rows = counts.len();
    let mut alloc: Vec<[usize; 3]> = counts
        .iter()
        .map(|&c| sizes.map(|s| c * s / n))
        .collect();
    let rem = |r: usize, s: usize| counts[r] * sizes[s] % n;

    // Nodes: source 0, rows 1..=rows, columns rows+1..=rows+3, sink rows+4.
    let nodes = rows + 5;
    let (src, sink) = (0, rows + 4);
    let col = |s: usize| rows + 1 + s;
    let mut cap = vec![vec![0i64; nodes]; nodes];
    for r in 0..rows {
        cap[src][r + 1] = (counts[r] - alloc[r].iter().sum::<usize>()) as i64;
        for s in 0..3 {
            if rem(r, s) > 0 {
                cap[r + 1][col(s)] = 1;
            }
        }
    }
    for s in 0..3 {
        cap[col(s)][sink] = (sizes[s] - alloc.iter().map(|a| a[s]).sum::<usize>()) as i64;
    }

    // Greedy pass by largest remainder, then augmenting paths for the rest.
    for r in 0..rows {
        let mut by_rem = [0usize, 1, 2];
        by_rem.sort_by(|&a, &b| rem(r, b).cmp(&rem(r, a)).then(a.cmp(&b)));
        for s in by_rem {
            if cap[src][r + 1] > 0 && cap[r + 1][col(s)] > 0 && cap[col(s)][sink] > 0 {
                push(&mut cap, &[src, r + 1, col(s), sink]);
            }
        }
    }
    while let Some(path) = augmenting_path(&cap, src, sink) {
        push(&mut cap, &path);
    }
    for r in 0..rows {
        for s in 0..3 {
            // Unit edge used iff its reverse residual is positive.
            if rem(r, s) > 0 && cap[col(s)][r + 1] > 0 {
                alloc[r][s] += 1;
            }
        }
    }
    debug_assert!(alloc.iter().zip(counts).all(|(a, &c)| a.iter().sum::<usize>() == c));
    alloc
}

fn push(cap: &mut [Vec<i64>], path: &[usize]) {
    for w in path.windows(2) {
        cap[w[0]][w[1]] -= 1;
        cap[w[1]][w[0]] += 1;
    }
}

fn augmenting_path(cap: &[Vec<i64>], src: usize, sink: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; cap.len()];
    prev[src] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for v in 0..cap.len() {
            if prev[v] == usize::MAX && cap[u][v] > 0 {
                prev[v] = u;
                if v == sink {
                    let mut path = vec![sink];
                    let mut cur = sink;
                    while cur != src {
                        cur = prev[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_thousand() {
        assert_eq!(split_sizes(1000, &SplitSpec::default()).unwrap(), [700, 100, 200]);
    }

    #[test]
    fn leftovers_go_to_largest_remainder() {
        // Quotas 7.7 / 1.1 / 2.2: one leftover, train has the largest remainder.
        assert_eq!(split_sizes(11, &SplitSpec::default()).unwrap(), [8, 1, 2]);
        assert_eq!(split_sizes(3, &SplitSpec::default()).unwrap(), [2, 0, 1]);
    }

    #[test]
    fn bad_spec() {
        let spec = SplitSpec {
            train: 0.8,
            ..SplitSpec::default()
        };
        assert!(split_sizes(10, &spec).is_err());
    }

    #[test]
    fn matrix_rounding_hits_margins() {
        let counts = [518, 285, 104, 74, 19];
        let sizes = [700, 100, 200];
        let m = round_matrix(&counts, &sizes, 1000);
        for (r, &c) in counts.iter().enumerate() {
            assert_eq!(m[r].iter().sum::<usize>(), c);
        }
        for s in 0..3 {
            assert_eq!(m.iter().map(|a| a[s]).sum::<usize>(), sizes[s]);
            for (r, &c) in counts.iter().enumerate() {
                let exact = c as f64 * sizes[s] as f64 / 1000.0;
                assert!((m[r][s] as f64 - exact).abs() < 1.0);
            }
        }
    }
}
