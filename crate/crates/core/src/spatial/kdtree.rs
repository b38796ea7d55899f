use crate::Point;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over a point set.
///
/// Results match an exhaustive scan exactly: among points at equal distance
/// the smallest index wins, and radius queries return indices in ascending
/// order.
#[derive(Clone, Debug)]
pub struct NnIndex {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NnIndex {
    pub fn new(points: Vec<Point>) -> NnIndex {
        let mut index = NnIndex { order: (0..points.len()).collect(), points, nodes: Vec::new() };
        if !index.points.is_empty() {
            index.build(0, index.points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &self.order[start..end];
        let mut lo = self.points[slice[0]];
        let mut hi = lo;
        for &i in slice {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let extent = hi - lo;
        let axis = extent.imax();
        if extent[axis] == 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[start + mid]][axis];
        self.nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Nearest point to `q` as `(index, distance)`.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(0, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_in(&self, node: usize, q: &Point, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                // equal-distance candidates may still lower the index
                if diff * diff <= best.1 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    pub fn within_radius(&self, q: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_in(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    /// Number of points within `radius` of `q`, stopping early at `cap`.
    pub fn count_within(&self, q: &Point, radius: f64, cap: usize) -> usize {
        let mut n = 0;
        if !self.points.is_empty() {
            self.count_in(0, q, radius * radius, cap, &mut n);
        }
        n
    }

    fn radius_in(&self, node: usize, q: &Point, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
                );
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_in(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_in(right, q, r2, out);
                }
            }
        }
    }

    fn count_in(&self, node: usize, q: &Point, r2: f64, cap: usize, n: &mut usize) {
        if *n >= cap {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if (self.points[i] - q).norm_squared() <= r2 {
                        *n += 1;
                        if *n >= cap {
                            return;
                        }
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.count_in(left, q, r2, cap, n);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.count_in(right, q, r2, cap, n);
                }
            }
        }
    }
}
