//! Genetic minimization over fixed-size index subsets.
//!
//! Chromosomes are sorted `k`-subsets of `0..n`. Crossover keeps the
//! intersection of the parents and fills the remaining slots from their
//! symmetric difference; mutation swaps one member for one non-member.
//! Tournament selection plus elitism; early stop on a stagnant best.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Genetic-algorithm tuning knobs.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub mutation_rate: f64,
    pub elitism: usize,
    /// Stop after this many generations without improvement.
    pub stagnation_limit: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            tournament: 3,
            mutation_rate: 0.1,
            elitism: 2,
            stagnation_limit: 25,
        }
    }
}

fn random_subset(n: usize, k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut s: Vec<usize> = sample(rng, n, k).into_vec();
    s.sort_unstable();
    s
}

fn crossover(a: &[usize], b: &[usize], k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    let sb: BTreeSet<usize> = b.iter().copied().collect();
    let mut child: Vec<usize> = sa.intersection(&sb).copied().collect();
    let mut pool: Vec<usize> = sa.symmetric_difference(&sb).copied().collect();
    while child.len() < k {
        let i = rng.random_range(0..pool.len());
        child.push(pool.swap_remove(i));
    }
    child.sort_unstable();
    child
}

fn mutate(subset: &mut Vec<usize>, n: usize, rng: &mut ChaCha12Rng) {
    if subset.len() == n {
        return;
    }
    let member: BTreeSet<usize> = subset.iter().copied().collect();
    let outside: Vec<usize> = (0..n).filter(|i| !member.contains(i)).collect();
    let out = rng.random_range(0..subset.len());
    let inn = rng.random_range(0..outside.len());
    subset[out] = outside[inn];
    subset.sort_unstable();
    subset.dedup();
    // dedup cannot shrink: the incoming index was not a member
    debug_assert_eq!(subset.len(), member.len());
}

/// Steepest-descent refinement over single index swaps: repeatedly moves
/// to the best strictly improving neighbor until none exists. Returns the
/// refined score.
fn swap_descent<F>(subset: &mut Vec<usize>, n: usize, score: f64, objective: &mut F) -> f64
where
    F: FnMut(&[usize]) -> f64,
{
    let k = subset.len();
    let mut current = score;
    loop {
        let members: BTreeSet<usize> = subset.iter().copied().collect();
        let mut best_move: Option<(usize, usize, f64)> = None;
        for pos in 0..k {
            let old = subset[pos];
            for cand in 0..n {
                if members.contains(&cand) {
                    continue;
                }
                subset[pos] = cand;
                let s = objective(subset);
                if s < current && best_move.map_or(true, |(_, _, b)| s < b) {
                    best_move = Some((pos, cand, s));
                }
            }
            subset[pos] = old;
        }
        match best_move {
            Some((pos, cand, s)) => {
                subset[pos] = cand;
                subset.sort_unstable();
                current = s;
            }
            None => return current,
        }
    }
}

/// Minimizes `objective` over all size-`k` subsets of `0..n`.
///
/// Tournament selection with elitism, intersection-preserving crossover
/// and single-swap mutation; each generation a slice of the population is
/// replaced by fresh random subsets (so no index can go extinct), and a
/// new incumbent is refined by steepest single-swap descent. Returns the
/// best subset found (sorted); ties prefer the lexicographically smaller
/// subset for determinism.
pub fn minimize_subset<F>(
    n: usize,
    k: usize,
    params: &GaParams,
    rng: &mut ChaCha12Rng,
    mut objective: F,
) -> Vec<usize>
where
    F: FnMut(&[usize]) -> f64,
{
    assert!(k <= n && k > 0, "subset size must satisfy 0 < k <= n");
    if k == n {
        return (0..n).collect();
    }
    let pop_size = params.population.max(2);
    let immigrants = (pop_size / 10).max(1);
    let mut population: Vec<Vec<usize>> = (0..pop_size).map(|_| random_subset(n, k, rng)).collect();
    let mut scores: Vec<f64> = population.iter().map(|s| objective(s)).collect();

    let better =
        |sa: f64, ca: &[usize], sb: f64, cb: &[usize]| -> bool { sa < sb || (sa == sb && ca < cb) };

    let mut best_idx = 0;
    for i in 1..pop_size {
        if better(
            scores[i],
            &population[i],
            scores[best_idx],
            &population[best_idx],
        ) {
            best_idx = i;
        }
    }
    let mut best = population[best_idx].clone();
    let mut best_score = swap_descent(&mut best, n, scores[best_idx], &mut objective);
    let mut stagnant = 0usize;

    for _ in 0..params.generations {
        let mut order: Vec<usize> = (0..pop_size).collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then_with(|| population[a].cmp(&population[b]))
        });

        let mut next: Vec<Vec<usize>> = Vec::with_capacity(pop_size);
        for &i in order.iter().take(params.elitism.min(pop_size)) {
            next.push(population[i].clone());
        }
        while next.len() + immigrants < pop_size {
            let pick = |rng: &mut ChaCha12Rng| -> usize {
                let mut winner = rng.random_range(0..pop_size);
                for _ in 1..params.tournament.max(1) {
                    let c = rng.random_range(0..pop_size);
                    if scores[c] < scores[winner] {
                        winner = c;
                    }
                }
                winner
            };
            let pa = pick(rng);
            let pb = pick(rng);
            let mut child = crossover(&population[pa], &population[pb], k, rng);
            if rng.random::<f64>() < params.mutation_rate {
                mutate(&mut child, n, rng);
            }
            next.push(child);
        }
        while next.len() < pop_size {
            next.push(random_subset(n, k, rng));
        }
        population = next;
        scores = population.iter().map(|s| objective(s)).collect();

        let mut improved = false;
        for i in 0..pop_size {
            if better(scores[i], &population[i], best_score, &best) {
                best_score = scores[i];
                best = population[i].clone();
                improved = true;
            }
        }
        if improved {
            best_score = swap_descent(&mut best, n, best_score, &mut objective);
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= params.stagnation_limit {
                break;
            }
        }
    }
    best
}

/// Exhaustive minimization over all size-`k` subsets, in lexicographic
/// order (ties keep the first optimum).
pub fn exhaustive_minimum<F>(n: usize, k: usize, mut objective: F) -> Vec<usize>
where
    F: FnMut(&[usize]) -> f64,
{
    assert!(k <= n && k > 0);
    let mut subset: Vec<usize> = (0..k).collect();
    let mut best = subset.clone();
    let mut best_score = objective(&subset);
    loop {
        // next lexicographic combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + n - k {
                break;
            }
        }
        if subset[i] == i + n - k {
            return best;
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
        let s = objective(&subset);
        if s < best_score {
            best_score = s;
            best = subset.clone();
        }
    }
}

/// Number of size-`k` subsets of `n` items, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(16, 3), 560);
        assert_eq!(binomial(16, 9), 11440);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(4, 5), 0);
    }

    #[test]
    fn exhaustive_enumerates_all_combinations() {
        // separable objective: minimum is the k smallest weights
        let weights = [5.0, 1.0, 4.0, 0.5, 3.0, 2.0];
        let best = exhaustive_minimum(6, 3, |s| s.iter().map(|&i| weights[i]).sum());
        assert_eq!(best, alloc::vec![1, 3, 5]);
    }

    #[test]
    fn ga_finds_the_separable_optimum() {
        let mut rng = crate::seed::rng(42, &[]);
        let weights: Vec<f64> = (0..20).map(|i| ((i * 7) % 13) as f64).collect();
        let best = minimize_subset(20, 4, &GaParams::default(), &mut rng, |s| {
            s.iter().map(|&i| weights[i]).sum()
        });
        let oracle = exhaustive_minimum(20, 4, |s| s.iter().map(|&i| weights[i]).sum());
        assert_eq!(
            best.iter().map(|&i| weights[i]).sum::<f64>(),
            oracle.iter().map(|&i| weights[i]).sum::<f64>()
        );
    }

    #[test]
    fn ga_is_deterministic_for_a_seed() {
        let run = || {
            let mut rng = crate::seed::rng(7, &[1]);
            minimize_subset(15, 5, &GaParams::default(), &mut rng, |s| {
                s.iter().map(|&i| ((i as f64) - 7.3).abs()).sum()
            })
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn full_size_subset_is_identity() {
        let mut rng = crate::seed::rng(1, &[]);
        let best = minimize_subset(6, 6, &GaParams::default(), &mut rng, |_| 0.0);
        assert_eq!(best, alloc::vec![0, 1, 2, 3, 4, 5]);
    }
}
