//! Delay characteristics as networks of delay nodes.
//!
//! Nodes synchronized to the same round timer compose like filters: a
//! cascade convolves the node characteristics, a probability-weighted split
//! mixes them. The exponential mix is the first-order recursive special case,
//! and `simulate_decentralized` checks that its parallel implementation has
//! the same delay distribution as a single node.

use rand::RngExt;

use crate::characteristic::{project_simplex, DelayCharacteristic};
use crate::{rng, Error, Result};

/// A composition tree of delay nodes.
#[derive(Debug, Clone)]
pub enum FilterNetwork {
    /// A single delay node.
    Leaf(DelayCharacteristic),
    /// Nodes traversed in sequence; the overall delay adds.
    Cascade(Vec<FilterNetwork>),
    /// A probabilistic split across branches with the given weights.
    Parallel(Vec<FilterNetwork>, Vec<f64>),
}

impl FilterNetwork {
    /// The overall delay characteristic realized by the tree.
    pub fn characteristic(&self) -> Result<DelayCharacteristic> {
        match self {
            FilterNetwork::Leaf(f) => Ok(f.clone()),
            FilterNetwork::Cascade(children) => {
                let parts: Vec<DelayCharacteristic> = children
                    .iter()
                    .map(|c| c.characteristic())
                    .collect::<Result<_>>()?;
                cascade(&parts)
            }
            FilterNetwork::Parallel(children, weights) => {
                let parts: Vec<DelayCharacteristic> = children
                    .iter()
                    .map(|c| c.characteristic())
                    .collect::<Result<_>>()?;
                parallel(&parts, weights)
            }
        }
    }
}

/// Convolve node characteristics: the delay of nodes in sequence.
pub fn cascade(fs: &[DelayCharacteristic]) -> Result<DelayCharacteristic> {
    if fs.is_empty() {
        return Err(Error::InvalidParameter("cascade of zero filters".into()));
    }
    let mut acc = fs[0].taps().to_vec();
    for f in &fs[1..] {
        acc = convolve(&acc, f.taps());
    }
    DelayCharacteristic::new(acc)
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Mixture of node characteristics: a weighted split across branches.
pub fn parallel(fs: &[DelayCharacteristic], weights: &[f64]) -> Result<DelayCharacteristic> {
    if fs.is_empty() || fs.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} filters, {} weights",
            fs.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter("negative mixture weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > crate::PMF_TOL {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {total}"
        )));
    }
    let len = fs.iter().map(|f| f.len()).max().unwrap();
    let mut taps = vec![0.0; len];
    for (f, w) in fs.iter().zip(weights) {
        for (k, t) in f.taps().iter().enumerate() {
            taps[k] += w * t;
        }
    }
    DelayCharacteristic::new(taps)
}

/// How to fold the infinite geometric tail into a finite tap vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailMode {
    /// Put the whole residual tail mass on the last tap (exact unit sum,
    /// matches a simulator that clips delays at L-1).
    #[default]
    LumpLast,
    /// Rescale all taps by the truncated total.
    Renormalize,
}

/// Truncated exponential mix `f_k = α(1-α)^k`, the delay of a node that
/// releases each pooled message with probability `α` per round.
pub fn exponential_mix(alpha: f64, len: usize, tail: TailMode) -> Result<DelayCharacteristic> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    if len == 0 {
        return Err(Error::InvalidParameter("need at least one tap".into()));
    }
    let mut taps: Vec<f64> = (0..len)
        .map(|k| alpha * (1.0 - alpha).powi(k as i32))
        .collect();
    match tail {
        TailMode::LumpLast => {
            taps[len - 1] = (1.0 - alpha).powi(len as i32 - 1);
        }
        TailMode::Renormalize => {
            let total: f64 = taps.iter().sum();
            for t in &mut taps {
                *t /= total;
            }
        }
    }
    DelayCharacteristic::new(taps)
}

/// Empirical delay counts from a decentralized run; index = delay in rounds.
#[derive(Debug, Clone)]
pub struct DelayHistogram {
    pub counts: Vec<u64>,
    /// Messages that exceeded the round budget.
    pub censored: u64,
}

impl DelayHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.censored
    }

    /// Normalized pmf over the uncensored support.
    pub fn pmf(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|c| *c as f64 / total).collect()
    }

    /// Mean of the uncensored delays.
    pub fn mean(&self) -> f64 {
        let observed: u64 = self.counts.iter().sum();
        if observed == 0 {
            return 0.0;
        }
        self.counts
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * *c as f64)
            .sum::<f64>()
            / observed as f64
    }

    /// CSV with header `delay,count`; a final `censored` row when non-empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{k},{c}\n"));
        }
        if self.censored > 0 {
            out.push_str(&format!("censored,{}\n", self.censored));
        }
        out
    }
}

/// Total variation distance between a histogram's pmf and a reference pmf
/// (reference mass beyond the histogram support counts in full).
pub fn tv_distance(hist: &DelayHistogram, reference: &[f64]) -> f64 {
    let p = hist.pmf();
    let len = p.len().max(reference.len());
    let mut tv = 0.0;
    for k in 0..len {
        let a = p.get(k).copied().unwrap_or(0.0);
        let b = reference.get(k).copied().unwrap_or(0.0);
        tv += (a - b).abs();
    }
    // censored mass has no reference counterpart
    tv += hist.censored as f64 / hist.total() as f64;
    0.5 * tv
}

/// Random-walk simulation of the parallel exponential mix: in each round a
/// message exits to its recipient with probability `alpha`, otherwise it is
/// fed to a uniformly random node for another round of unit delay.
pub fn simulate_decentralized(
    n_nodes: usize,
    alpha: f64,
    n_messages: usize,
    max_rounds: usize,
    seed: u64,
) -> Result<DelayHistogram> {
    if n_nodes == 0 || n_messages == 0 {
        return Err(Error::InvalidParameter(
            "need at least one node and one message".into(),
        ));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    let mut counts = vec![0u64; max_rounds.max(1)];
    let mut censored = 0u64;
    let mut gen = rng::stream(seed, "decentralized-mix", 0);
    for _ in 0..n_messages {
        let mut delay = 0usize;
        loop {
            if gen.random::<f64>() < alpha {
                counts[delay] += 1;
                break;
            }
            // stays in the network: route to a random node for one round
            let _node = gen.random_range(0..n_nodes);
            delay += 1;
            if delay >= max_rounds {
                censored += 1;
                break;
            }
        }
    }
    Ok(DelayHistogram { counts, censored })
}

/// Options for [`decompose_cascade`]'s block-coordinate descent.
#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub max_sweeps: usize,
    pub inner_iterations: usize,
    /// Stop sweeping when the squared error improves by less than this.
    pub tolerance: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            inner_iterations: 300,
            tolerance: 1e-16,
        }
    }
}

/// Stage filters approximating `target` as their cascade.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub stages: Vec<DelayCharacteristic>,
    pub achieved: DelayCharacteristic,
    /// Squared tap error between achieved and target.
    pub squared_error: f64,
}

/// Factor `target` into `stages` filters of at most `per_stage_len` taps,
/// minimizing the squared tap error of their convolution, by block-coordinate
/// descent with simplex projection.
///
/// Stage 0 starts from the best single-stage approximation (the projected
/// truncation of the target), so the result never does worse than that
/// baseline.
pub fn decompose_cascade(
    target: &DelayCharacteristic,
    stages: usize,
    per_stage_len: usize,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    if stages == 0 || per_stage_len == 0 {
        return Err(Error::InvalidParameter(
            "need at least one stage of at least one tap".into(),
        ));
    }
    let reachable = stages * (per_stage_len - 1) + 1;
    if reachable < target.len() {
        return Err(Error::InfeasibleDecomposition {
            stages,
            per_stage_len,
            reachable,
            required: target.len(),
        });
    }

    // zero-padded target over the reachable support
    let mut t = target.taps().to_vec();
    t.resize(reachable, 0.0);

    // initialize: projected truncation of the target, then deltas
    let mut stage_taps: Vec<Vec<f64>> = Vec::with_capacity(stages);
    let head = &target.taps()[..per_stage_len.min(target.len())];
    let mut first = project_simplex(head);
    first.resize(per_stage_len, 0.0);
    stage_taps.push(first);
    for _ in 1..stages {
        let mut d = vec![0.0; per_stage_len];
        d[0] = 1.0;
        stage_taps.push(d);
    }

    let achieved = |parts: &[Vec<f64>]| -> Vec<f64> {
        let mut acc = parts[0].clone();
        for p in &parts[1..] {
            acc = convolve(&acc, p);
        }
        acc.resize(reachable, 0.0);
        acc
    };
    let sq_err = |parts: &[Vec<f64>]| -> f64 {
        achieved(parts)
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    let mut err = sq_err(&stage_taps);
    for _ in 0..opts.max_sweeps {
        for s in 0..stages {
            // convolution of all other stages
            let mut g = vec![1.0];
            for (idx, taps) in stage_taps.iter().enumerate() {
                if idx != s {
                    g = convolve(&g, taps);
                }
            }
            // warm start keeps every sweep monotone
            stage_taps[s] = solve_stage(&g, &t, &stage_taps[s], opts.inner_iterations);
        }
        let new_err = sq_err(&stage_taps);
        let gain = err - new_err;
        err = new_err;
        if gain < opts.tolerance {
            break;
        }
    }

    let final_taps = trim_trailing_zeros(achieved(&stage_taps));
    Ok(Decomposition {
        stages: stage_taps
            .into_iter()
            .map(DelayCharacteristic::new)
            .collect::<Result<_>>()?,
        achieved: DelayCharacteristic::new(final_taps)?,
        squared_error: err,
    })
}

fn trim_trailing_zeros(mut v: Vec<f64>) -> Vec<f64> {
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    v
}

/// Least squares `min ‖conv(g, s) − t‖²` over the simplex in `s`, by
/// projected gradient from `init`. The operator norm of convolution with a
/// pmf is at most 1, so a unit step with halving on non-descent converges.
fn solve_stage(g: &[f64], t: &[f64], init: &[f64], iterations: usize) -> Vec<f64> {
    let len = init.len();
    let residual = |s: &[f64]| -> Vec<f64> {
        let mut r = convolve(g, s);
        r.resize(t.len().max(r.len()), 0.0);
        for (k, rv) in r.iter_mut().enumerate() {
            *rv -= t.get(k).copied().unwrap_or(0.0);
        }
        r
    };
    let objective = |s: &[f64]| -> f64 { residual(s).iter().map(|r| r * r).sum() };

    let mut s = init.to_vec();
    let mut value = objective(&s);
    for _ in 0..iterations {
        let r = residual(&s);
        // gradient = 2 Gᵀ r, a correlation of the residual with g
        let grad: Vec<f64> = (0..len)
            .map(|j| {
                2.0 * g
                    .iter()
                    .enumerate()
                    .map(|(i, gv)| gv * r.get(i + j).copied().unwrap_or(0.0))
                    .sum::<f64>()
            })
            .collect();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = s.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let cand = project_simplex(&cand);
            let cand_value = objective(&cand);
            if cand_value < value - 1e-16 {
                s = cand;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    s
}

/// Write stage filters as `stage_00.filter`, `stage_01.filter`, ... plus a
/// `manifest.txt` listing the composition order.
pub fn write_stage_dir(dir: &std::path::Path, stages: &[DelayCharacteristic]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from("composition=cascade\n");
    for (idx, stage) in stages.iter().enumerate() {
        let name = format!("stage_{idx:02}.filter");
        stage.write_file(&dir.join(&name))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Read back a directory written by [`write_stage_dir`].
pub fn read_stage_dir(dir: &std::path::Path) -> Result<Vec<DelayCharacteristic>> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let mut lines = manifest.lines();
    match lines.next() {
        Some("composition=cascade") => {}
        other => {
            return Err(Error::Parse(format!(
                "unsupported manifest header {other:?}"
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|name| DelayCharacteristic::read_file(&dir.join(name.trim())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chr(taps: &[f64]) -> DelayCharacteristic {
        DelayCharacteristic::new(taps.to_vec()).unwrap()
    }

    #[test]
    fn cascade_identity_and_binomial() {
        let f = chr(&[0.3, 0.7]);
        let out = cascade(&[DelayCharacteristic::delta(), f.clone()]).unwrap();
        assert_eq!(out.taps(), f.taps());

        let out = cascade(&[chr(&[0.5, 0.5]), chr(&[0.5, 0.5])]).unwrap();
        let expect = [0.25, 0.5, 0.25];
        for (a, b) in out.taps().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }

        assert!(cascade(&[]).is_err());
    }

    #[test]
    fn cascade_mean_adds() {
        let mut gen = crate::rng::stream(3, "cascade-mean", 0);
        for _ in 0..50 {
            let make = |gen: &mut rand_chacha::ChaCha8Rng| {
                let len = 1 + gen.random_range(0..6);
                let raw: Vec<f64> = (0..len).map(|_| gen.random_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                chr(&raw.iter().map(|v| v / total).collect::<Vec<_>>())
            };
            let a = make(&mut gen);
            let b = make(&mut gen);
            let c = make(&mut gen);
            let combined = cascade(&[a.clone(), b.clone(), c.clone()]).unwrap();
            let expect = a.mean_delay() + b.mean_delay() + c.mean_delay();
            assert!((combined.mean_delay() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cascade_is_associative_and_commutative() {
        let mut gen = crate::rng::stream(29, "cascade-assoc", 0);
        for _ in 0..100 {
            let make = |gen: &mut rand_chacha::ChaCha8Rng| {
                let len = 1 + gen.random_range(0..5);
                let raw: Vec<f64> = (0..len).map(|_| gen.random_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                chr(&raw.iter().map(|v| v / total).collect::<Vec<_>>())
            };
            let a = make(&mut gen);
            let b = make(&mut gen);
            let c = make(&mut gen);

            let ab_c = cascade(&[cascade(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
            let a_bc = cascade(&[a.clone(), cascade(&[b.clone(), c.clone()]).unwrap()]).unwrap();
            for (x, y) in ab_c.taps().iter().zip(a_bc.taps()) {
                assert!((x - y).abs() <= 1e-12);
            }

            let ab = cascade(&[a.clone(), b.clone()]).unwrap();
            let ba = cascade(&[b, a]).unwrap();
            for (x, y) in ab.taps().iter().zip(ba.taps()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parallel_mixtures() {
        let a = DelayCharacteristic::delta();
        let b = chr(&[0.0, 1.0]);
        let out = parallel(&[a.clone(), b.clone()], &[0.5, 0.5]).unwrap();
        assert_eq!(out.taps(), &[0.5, 0.5]);

        let keep = parallel(&[a.clone(), b], &[1.0, 0.0]).unwrap();
        assert_eq!(keep.taps(), &[1.0, 0.0]);

        let same = chr(&[0.25, 0.75]);
        let out = parallel(&[same.clone(), same.clone()], &[0.3, 0.7]).unwrap();
        for (x, y) in out.taps().iter().zip(same.taps()) {
            assert!((x - y).abs() < 1e-15);
        }

        assert!(parallel(&[a], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn network_tree_composes() {
        let tree = FilterNetwork::Cascade(vec![
            FilterNetwork::Leaf(chr(&[0.5, 0.5])),
            FilterNetwork::Parallel(
                vec![
                    FilterNetwork::Leaf(DelayCharacteristic::delta()),
                    FilterNetwork::Leaf(chr(&[0.0, 1.0])),
                ],
                vec![0.5, 0.5],
            ),
        ]);
        let f = tree.characteristic().unwrap();
        let expect = [0.25, 0.5, 0.25];
        for (a, b) in f.taps().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_mix_taps() {
        let d = exponential_mix(1.0, 5, TailMode::LumpLast).unwrap();
        assert_eq!(d.taps()[0], 1.0);
        assert!(d.taps()[1..].iter().all(|t| *t == 0.0));

        let e = exponential_mix(0.5, 3, TailMode::LumpLast).unwrap();
        let expect = [0.5, 0.25, 0.25];
        for (a, b) in e.taps().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let m = exponential_mix(0.5, 64, TailMode::LumpLast).unwrap();
        assert!((m.mean_delay() - 1.0).abs() < 1e-9);

        assert!(exponential_mix(0.0, 3, TailMode::LumpLast).is_err());
        assert!(exponential_mix(1.2, 3, TailMode::LumpLast).is_err());
    }

    #[test]
    fn exponential_taps_decrease_strictly() {
        let e = exponential_mix(0.3, 20, TailMode::LumpLast).unwrap();
        for w in e.taps()[..19].windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn decentralized_alpha_one_is_instant() {
        let h = simulate_decentralized(4, 1.0, 1000, 50, 5).unwrap();
        assert_eq!(h.counts[0], 1000);
        assert_eq!(h.censored, 0);
    }

    #[test]
    fn decentralized_matches_geometric_for_any_node_count() {
        let alpha = 0.3;
        let reference: Vec<f64> = (0..200)
            .map(|k| alpha * (1.0f64 - alpha).powi(k))
            .collect();
        let one = simulate_decentralized(1, alpha, 100_000, 200, 77).unwrap();
        let five = simulate_decentralized(5, alpha, 100_000, 200, 78).unwrap();
        assert!(tv_distance(&one, &reference) < 0.02);
        assert!(tv_distance(&five, &reference) < 0.02);

        // same distribution across node counts
        let p1 = one.pmf();
        let p5 = five.pmf();
        let tv: f64 = (0..p1.len().max(p5.len()))
            .map(|k| {
                (p1.get(k).copied().unwrap_or(0.0) - p5.get(k).copied().unwrap_or(0.0)).abs()
            })
            .sum::<f64>()
            * 0.5;
        assert!(tv < 0.02);
    }

    #[test]
    fn decentralized_mean_matches_geometric_moments() {
        let alpha = 0.3f64;
        let n = 100_000;
        let h = simulate_decentralized(3, alpha, n, 400, 91).unwrap();
        let expect = (1.0 - alpha) / alpha;
        let sd = ((1.0 - alpha) / (alpha * alpha)).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((h.mean() - expect).abs() < 3.0 * se);
    }

    #[test]
    fn decompose_exact_cases() {
        let target = chr(&[0.25, 0.5, 0.25]);
        let d = decompose_cascade(&target, 1, 3, &DecomposeOptions::default()).unwrap();
        assert!(d.squared_error < 1e-20);
        for (a, b) in d.achieved.taps().iter().zip(target.taps()) {
            assert!((a - b).abs() < 1e-12);
        }

        // Exactly factorable targets have a degenerate optimum: opposite
        // perturbations of two stages cancel to first order, so the descent
        // crawls once the residual is tiny. The product still matches the
        // target closely even though stage taps carry ~1e-2 slack.
        let d = decompose_cascade(&target, 2, 2, &DecomposeOptions::default()).unwrap();
        assert!(d.squared_error < 1e-7, "err {}", d.squared_error);
        for (a, b) in d.achieved.taps().iter().zip(target.taps()) {
            assert!((a - b).abs() < 1e-3);
        }
        for stage in &d.stages {
            for (a, b) in stage.taps().iter().zip(&[0.5, 0.5]) {
                assert!((a - b).abs() < 3e-2, "{:?}", stage.taps());
            }
        }
    }

    #[test]
    fn decompose_rejects_short_reach() {
        let target = chr(&[0.25, 0.5, 0.25]);
        assert!(matches!(
            decompose_cascade(&target, 1, 2, &DecomposeOptions::default()),
            Err(Error::InfeasibleDecomposition { .. })
        ));
    }

    #[test]
    fn stage_dir_round_trip() {
        let dir = std::env::temp_dir().join(format!("mixdelay-stages-{}", std::process::id()));
        let stages = vec![chr(&[0.5, 0.5]), chr(&[0.25, 0.5, 0.25])];
        write_stage_dir(&dir, &stages).unwrap();
        let back = read_stage_dir(&dir).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in stages.iter().zip(&back) {
            for (x, y) in a.taps().iter().zip(b.taps()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
