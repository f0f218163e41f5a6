//! A compact kd-tree over the support points, used for ball queries,
//! nearest neighbors, and the resolution floor.

use crate::geometry::dist_sq;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: usize,
}

impl KdTree {
    pub fn build(dim: usize, coords: &[f64]) -> Self {
        let n = coords.len() / dim.max(1);
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        let root = if n == 0 {
            nodes.push(Node::Leaf { start: 0, end: 0 });
            0
        } else {
            Self::build_rec(dim, coords, &mut order, 0, n, &mut nodes)
        };
        KdTree { dim, coords: coords.to_vec(), order, nodes, root }
    }

    fn build_rec(
        dim: usize,
        coords: &[f64],
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return nodes.len() - 1;
        }
        // split on the axis with the widest spread
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for axis in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &order[start..end] {
                let v = coords[i as usize * dim + axis];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_axis = axis;
            }
        }
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let va = coords[a as usize * dim + best_axis];
            let vb = coords[b as usize * dim + best_axis];
            va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let value = coords[order[mid] as usize * dim + best_axis];
        let placeholder = nodes.len();
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build_rec(dim, coords, order, start, mid, nodes);
        let right = Self::build_rec(dim, coords, order, mid, end, nodes);
        nodes[placeholder] = Node::Split { axis: best_axis, value, left, right };
        placeholder
    }

    fn point(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices of points with |p - center| < radius (strict, open ball).
    pub fn within_open_ball(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.coords.is_empty() || radius <= 0.0 {
            return out;
        }
        let r2 = radius * radius;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[*start..*end] {
                        if dist_sq(self.point(i), center) < r2 {
                            out.push(i as usize);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let c = center[*axis];
                    if c - radius < *value {
                        stack.push(*left);
                    }
                    if c + radius >= *value {
                        stack.push(*right);
                    }
                }
            }
        }
        out
    }

    /// Nearest point to `query`, optionally rejecting indices via `skip`.
    pub fn nearest_where<F: Fn(usize) -> bool>(
        &self,
        query: &[f64],
        keep: F,
    ) -> Option<(usize, f64)> {
        if self.coords.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        self.nearest_rec(self.root, query, &keep, &mut best);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn nearest_rec<F: Fn(usize) -> bool>(
        &self,
        id: usize,
        query: &[f64],
        keep: &F,
        best: &mut Option<(usize, f64)>,
    ) {
        match &self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if !keep(i as usize) {
                        continue;
                    }
                    let d2 = dist_sq(self.point(i), query);
                    let better = match best {
                        None => true,
                        Some((bi, bd2)) => {
                            d2 < *bd2 || (d2 == *bd2 && (i as usize) < *bi)
                        }
                    };
                    if better {
                        *best = Some((i as usize, d2));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff < 0.0 { (*left, *right) } else { (*right, *left) };
                self.nearest_rec(near, query, keep, best);
                let need_far = match best {
                    None => true,
                    Some((_, bd2)) => diff * diff <= *bd2,
                };
                if need_far {
                    self.nearest_rec(far, query, keep, best);
                }
            }
        }
    }

    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        self.nearest_where(query, |_| true)
    }

    /// Minimum over all points of the distance to their nearest neighbor.
    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.coords.len() / self.dim.max(1);
        if n < 2 {
            return 0.0;
        }
        let mut floor = f64::INFINITY;
        for i in 0..n {
            let p = &self.coords[i * self.dim..(i + 1) * self.dim];
            if let Some((_, d)) = self.nearest_where(p, |j| j != i) {
                floor = floor.min(d);
            }
        }
        floor
    }
}
