//! Density-based outlier detection over a distance matrix.
//!
//! Mutual-reachability distances (core distance = distance to the
//! `min_pts - 1`-th nearest other point), a minimum spanning tree over them,
//! and a cut of every tree edge heavier than `cut_distance`. Connected
//! components of the cut tree are clusters; singletons are noise.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub min_pts: usize,
    pub cut_distance: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_pts: 3,
            cut_distance: 0.9,
        }
    }
}

/// Cluster label per point; `None` marks noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
}

impl Clustering {
    pub fn noise(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_none())
            .map(|(i, _)| i)
    }

    pub fn noise_count(&self) -> usize {
        self.noise().count()
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }
}

/// Clusters `n` points under the symmetric distance `dist`. With `n <=
/// min_pts` there is too little data for density estimates and every point
/// lands in one cluster.
pub fn mst_density_clustering(
    n: usize,
    dist: impl Fn(usize, usize) -> f64,
    params: ClusterParams,
) -> Clustering {
    if n == 0 {
        return Clustering { labels: Vec::new() };
    }
    if n <= params.min_pts.max(1) {
        return Clustering {
            labels: vec![Some(0); n],
        };
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist(i, j);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let k = params.min_pts.saturating_sub(1);
    let core: Vec<f64> = (0..n)
        .map(|i| {
            if k == 0 {
                return 0.0;
            }
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
            row.sort_by(f64::total_cmp);
            row[(k - 1).min(row.len() - 1)]
        })
        .collect();
    let reach = |i: usize, j: usize| d[i * n + j].max(core[i]).max(core[j]);

    // Prim over the dense mutual-reachability graph
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut tree = Vec::with_capacity(n - 1);
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("unvisited vertex");
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            tree.push((parent[u], u, best[u]));
        }
        for v in 0..n {
            if !in_tree[v] {
                let w = reach(u, v);
                if w < best[v] {
                    best[v] = w;
                    parent[v] = u;
                }
            }
        }
    }

    let mut uf = UnionFind::new(n);
    for &(a, b, w) in &tree {
        if w <= params.cut_distance {
            uf.union(a, b);
        }
    }
    let mut sizes = vec![0usize; n];
    for i in 0..n {
        sizes[uf.find(i)] += 1;
    }
    let mut label_of_root = vec![None; n];
    let mut next = 0;
    let labels = (0..n)
        .map(|i| {
            let r = uf.find(i);
            if sizes[r] < 2 {
                return None;
            }
            Some(*label_of_root[r].get_or_insert_with(|| {
                next += 1;
                next - 1
            }))
        })
        .collect();
    Clustering { labels }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
