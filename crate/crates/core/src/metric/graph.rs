//! Collar point cloud at dyadic heights with `K̃`-weighted edges, searched
//! with Dijkstra.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::quadrature::{segment_length, QuadratureConfig};
use crate::geometry::Domain;
use crate::point::C2;

pub(crate) struct Graph {
    pub nodes: Vec<C2>,
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn nearest(points: &[C2], x: &C2, k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> =
        points.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(i, p)| ((*p - *x).norm_sqr(), i)).collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<(f64, usize)> = d[..k].to_vec();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out.into_iter().map(|(_, i)| i).collect()
}

impl Graph {
    /// `levels` heights `ε₀·2^{-j}` over `n_nodes / levels` boundary feet.
    pub fn build(dom: &Domain, n_nodes: usize, levels: usize, k: usize, quad: &QuadratureConfig) -> Graph {
        let levels = levels.max(1);
        let n_feet = (n_nodes / levels).max(1);
        let mesh = dom.mesh();
        let step = (mesh.points.len() / n_feet).max(1);
        let mut nodes = Vec::with_capacity(n_feet * levels);
        for f in 0..n_feet {
            let Some(p) = mesh.points.get(f * step) else { break };
            let Ok(n) = dom.outward_normal(p) else { continue };
            for j in 0..levels {
                let h = dom.eps0() * 0.5f64.powi(j as i32);
                let x = *p - n * h;
                if dom.is_inside(&x) {
                    nodes.push(x);
                }
            }
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        for i in 0..nodes.len() {
            for j in nearest(&nodes, &nodes[i], k, Some(i)) {
                if adj[i].iter().any(|(t, _)| *t == j) {
                    continue;
                }
                if let Ok(w) = segment_length(dom, &nodes[i], &nodes[j], quad, 0) {
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }
        Graph { nodes, adj }
    }

    /// Shortest path `p → q` through the cloud, with `p` and `q` joined to
    /// their `k` nearest nodes. `None` when disconnected.
    pub fn shortest(&self, dom: &Domain, p: &C2, q: &C2, k: usize, quad: &QuadratureConfig) -> Option<(Vec<C2>, f64)> {
        let n = self.nodes.len();
        let (src, dst) = (n, n + 1);
        let link = |x: &C2| -> Vec<(usize, f64)> {
            nearest(&self.nodes, x, k, None)
                .into_iter()
                .filter_map(|j| segment_length(dom, x, &self.nodes[j], quad, 0).ok().map(|w| (j, w)))
                .collect()
        };
        let from_p = link(p);
        let to_q = link(q);
        let mut into_dst = vec![f64::INFINITY; n];
        for (j, w) in &to_q {
            into_dst[*j] = *w;
        }
        let mut dist = vec![f64::INFINITY; n + 2];
        let mut prev = vec![usize::MAX; n + 2];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        for (j, w) in &from_p {
            if *w < dist[*j] {
                dist[*j] = *w;
                prev[*j] = src;
                heap.push(Item(*w, *j));
            }
        }
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == dst {
                break;
            }
            if into_dst[u].is_finite() && d + into_dst[u] < dist[dst] {
                dist[dst] = d + into_dst[u];
                prev[dst] = u;
                heap.push(Item(dist[dst], dst));
            }
            for (v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[*v] {
                    dist[*v] = nd;
                    prev[*v] = u;
                    heap.push(Item(nd, *v));
                }
            }
        }
        if !dist[dst].is_finite() {
            return None;
        }
        let mut path = vec![*q];
        let mut u = prev[dst];
        while u != src {
            path.push(self.nodes[u]);
            u = prev[u];
        }
        path.push(*p);
        path.reverse();
        Some((path, dist[dst]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;

    #[test]
    fn small_cloud_connects_collar_points() {
        let b = load_domain("ball").unwrap();
        let quad = QuadratureConfig::trial();
        let g = Graph::build(&b, 240, 6, 8, &quad);
        assert!(g.nodes.len() >= 200);
        let p = C2::from_real([0.0, 0.0, 0.99, 0.0]);
        let q = C2::from_real([0.99, 0.0, 0.0, 0.0]);
        let (path, len) = g.shortest(&b, &p, &q, 8, &quad).unwrap();
        assert_eq!(path[0], p);
        assert_eq!(*path.last().unwrap(), q);
        assert!(len.is_finite() && len > 0.0);
        let direct: f64 = path.windows(2).map(|w| segment_length(&b, &w[0], &w[1], &quad, 0).unwrap()).sum();
        assert!((direct - len).abs() < 1e-9 * len);
    }
}
