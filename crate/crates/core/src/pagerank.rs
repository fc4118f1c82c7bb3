//! Personalized PageRank on an undirected weighted graph.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PprParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PprParams {
    fn default() -> Self {
        PprParams {
            damping: 0.85,
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub residual: f64,
}

/// Power iteration with the transition matrix obtained by normalizing each
/// node's incident edge weights. Teleport and start distribution are
/// `teleport` normalized (uniform if it sums to zero). Nodes without positive
/// incident weight are dangling and restart via the teleport distribution.
///
/// `edges` are undirected `(u, v, weight)` triples with `u != v`; non-positive
/// weights are ignored.
pub fn personalized_pagerank(
    n: usize,
    edges: &[(usize, usize, f64)],
    teleport: &[f64],
    params: PprParams,
) -> PprResult {
    assert_eq!(teleport.len(), n, "teleport length must match node count");
    if n == 0 {
        return PprResult {
            scores: Vec::new(),
            iterations: 0,
            residual: 0.0,
        };
    }
    let mass: f64 = teleport.iter().sum();
    let t: Vec<f64> = if mass > 0.0 {
        teleport.iter().map(|x| x / mass).collect()
    } else {
        vec![1.0 / n as f64; n]
    };

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        if w > 0.0 && u != v {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
    }
    let out_weight: Vec<f64> = adj.iter().map(|a| a.iter().map(|&(_, w)| w).sum()).collect();

    let d = params.damping;
    let mut r = t.clone();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&u| out_weight[u] <= 0.0).map(|u| r[u]).sum();
        for (x, &tv) in next.iter_mut().zip(&t) {
            *x = ((1.0 - d) + d * dangling) * tv;
        }
        for u in 0..n {
            if out_weight[u] > 0.0 {
                let share = d * r[u] / out_weight[u];
                for &(v, w) in &adj[u] {
                    next[v] += share * w;
                }
            }
        }
        residual = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut next);
        if residual < params.tolerance {
            break;
        }
    }
    let total: f64 = r.iter().sum();
    if total > 0.0 {
        r.iter_mut().for_each(|x| *x /= total);
    }
    PprResult {
        scores: r,
        iterations,
        residual,
    }
}
