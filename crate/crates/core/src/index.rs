//! Exact k-d tree for radius and k-nearest-neighbor queries.
//!
//! Results are ordered by ascending distance with ties broken by lower point
//! id, which makes every query reproducible and directly comparable with a
//! brute-force scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{Channel, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// A query hit: id of the point in the source cloud and its Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Copy)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

/// Builds an index over `cloud`, optionally restricted to one channel.
pub fn build_index(cloud: &PointCloud, channel_filter: Option<Channel>) -> Result<SpatialIndex> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot index an empty cloud".into()));
    }
    let mut points = Vec::with_capacity(cloud.len());
    let mut ids = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        if channel_filter.is_none_or(|c| cloud.channel[i] == c) {
            points.push(cloud.position(i));
            ids.push(i);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no points of channel {:?} to index",
            channel_filter.unwrap()
        )));
    }
    Ok(SpatialIndex::from_points(points, ids))
}

impl SpatialIndex {
    /// Builds from raw positions; `ids[i]` is reported for `points[i]`.
    pub fn from_points(points: Vec<[f64; 3]>, ids: Vec<usize>) -> Self {
        assert_eq!(points.len(), ids.len());
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            build_node(&points, &ids, &mut order, 0, n, &mut nodes);
        }
        let coords = order.iter().map(|&i| points[i]).collect();
        let ids = order.iter().map(|&i| ids[i]).collect();
        SpatialIndex { coords, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// All indexed points within `r` of `q` (inclusive), nearest first,
    /// truncated to `k_max` when given.
    pub fn radius_neighbors(&self, q: [f64; 3], r: f64, k_max: Option<usize>) -> Vec<Neighbor> {
        let mut out: Vec<Candidate> = Vec::new();
        if self.nodes.is_empty() || !(r > 0.0) {
            return Vec::new();
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for j in start..end {
                        let d2 = dist2(&self.coords[j], &q);
                        if d2 <= r2 {
                            out.push(Candidate { d2, id: self.ids[j] });
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let diff = q[axis] - value;
                    let plane2 = diff * diff;
                    let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                    if plane2 <= r2 {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        out.sort_unstable();
        if let Some(k) = k_max {
            out.truncate(k);
        }
        out.into_iter().map(|c| Neighbor { id: c.id, dist: c.d2.sqrt() }).collect()
    }

    /// The `k` nearest indexed points (fewer if the index is smaller).
    pub fn knn(&self, q: [f64; 3], k: usize) -> Vec<Neighbor> {
        if self.nodes.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, &q, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| Neighbor { id: c.id, dist: c.d2.sqrt() }).collect()
    }

    fn knn_node(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for j in start..end {
                    let cand = Candidate { d2: dist2(&self.coords[j], q), id: self.ids[j] };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                let worst = if heap.len() < k { f64::INFINITY } else { heap.peek().unwrap().d2 };
                if diff * diff <= worst {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }
}

fn build_node(
    points: &[[f64; 3]],
    ids: &[usize],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return me;
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // all points coincide
        nodes.push(Node::Leaf { start, end });
        return me;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(ids[a].cmp(&ids[b]))
    });
    let value = points[slice[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(points, ids, order, start, start + mid, nodes);
    let right = build_node(points, ids, order, start + mid, end, nodes);
    nodes[me] = Node::Split { axis, value, left, right };
    me
}
