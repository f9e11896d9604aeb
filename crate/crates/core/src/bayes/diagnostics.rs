//! Split, rank-normalized R̂ and bulk effective sample size.

use crate::rngdist::std_quantile;

/// Split each chain in half, dropping a trailing odd draw.
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(c[..h].to_vec());
        out.push(c[c.len() - h..].to_vec());
    }
    out
}

/// Normal scores of the pooled ranks (average rank for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut idx: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let s = total as f64;
    let mut k = 0;
    while k < idx.len() {
        let mut j = k;
        while j + 1 < idx.len() && idx[j + 1].0 == idx[k].0 {
            j += 1;
        }
        let rank = (k + j) as f64 / 2.0 + 1.0;
        let z = std_quantile((rank - 0.375) / (s + 0.25));
        for e in &idx[k..=j] {
            out[e.1][e.2] = z;
        }
        k = j + 1;
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// (W, var⁺) of equal-length chains.
fn variances(chains: &[Vec<f64>]) -> (f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / chains.len() as f64;
    let gm = mean(&means);
    let b_over_n = if chains.len() > 1 {
        means.iter().map(|m| (m - gm).powi(2)).sum::<f64>() / (chains.len() - 1) as f64
    } else {
        0.0
    };
    (w, (n - 1.0) / n * w + b_over_n)
}

fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let (w, var_plus) = variances(chains);
    if w <= 0.0 {
        return if var_plus <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

fn autocov(c: &[f64], m: f64, lag: usize) -> f64 {
    let n = c.len();
    (0..n - lag).map(|i| (c[i] - m) * (c[i + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let (w, var_plus) = variances(chains);
    if !(w > 0.0) || n < 4 {
        return if var_plus == 0.0 { total } else { 1.0 };
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let rho = |t: usize| {
        let ac = chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, t)).sum::<f64>() / m as f64;
        1.0 - (w - ac) / var_plus
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev);
        sum += pair;
        prev = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / total.log10());
    total / tau
}

/// max(rank-normalized split R̂, folded rank-normalized split R̂).
pub fn rhat(chains: &[Vec<f64>]) -> f64 {
    let s = split(chains);
    let bulk = rhat_basic(&rank_normalize(&s));
    let all: Vec<f64> = s.iter().flatten().copied().collect();
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[sorted.len() / 2];
    let folded: Vec<Vec<f64>> = s.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    bulk.max(rhat_basic(&rank_normalize(&folded)))
}

pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    ess_basic(&rank_normalize(&split(chains)))
}

/// ESS of the raw draws, used for the Monte Carlo error of the posterior mean.
pub fn ess_mean(chains: &[Vec<f64>]) -> f64 {
    ess_basic(&split(chains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngdist::{sample_standard_normal, RngStream};

    fn iid(chains: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..chains)
            .map(|c| {
                let mut s = RngStream::new(seed, c as u64);
                (0..n).map(|_| sample_standard_normal(&mut s)).collect()
            })
            .collect()
    }

    #[test]
    fn iid_draws_look_converged() {
        let ch = iid(4, 1000, 1);
        assert!(rhat(&ch) < 1.01);
        let e = ess_bulk(&ch);
        assert!(e > 3000.0 && e < 5500.0, "{e}");
    }

    #[test]
    fn shifted_chain_flags_rhat() {
        let mut ch = iid(4, 1000, 2);
        ch[0].iter_mut().for_each(|x| *x += 3.0);
        assert!(rhat(&ch) > 1.1);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        let phi: f64 = 0.9;
        let ch: Vec<Vec<f64>> = (0..4)
            .map(|c| {
                let mut s = RngStream::new(3, c);
                let mut x = 0.0;
                (0..5000)
                    .map(|_| {
                        x = phi * x + (1.0 - phi * phi).sqrt() * sample_standard_normal(&mut s);
                        x
                    })
                    .collect()
            })
            .collect();
        let theory = 20000.0 * (1.0 - phi) / (1.0 + phi);
        let e = ess_mean(&ch);
        assert!((e / theory - 1.0).abs() < 0.25, "{e} vs {theory}");
    }
}
