//! Density clustering over a uniform grid.
//!
//! Cells have side `eps / sqrt(3)`, so every pair of points sharing a cell is
//! within `eps`. A cell holding `min_pts` points is all core, and two core
//! cells are linked as soon as one pair of their core points is close enough.

use std::collections::HashMap;

use super::DetectError;
use crate::union_find::UnionFind;
use crate::Point;

type Key = [i64; 3];

struct Grid {
    side: f64,
    cells: HashMap<Key, Vec<usize>>,
    offsets: Vec<Key>,
}

impl Grid {
    fn new(points: &[Point], eps: f64) -> Grid {
        // shrunk a hair so rounding cannot push a same-cell pair past eps
        let side = eps / 3f64.sqrt() * (1.0 - 1e-9);
        let mut cells: HashMap<Key, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(p, side)).or_default().push(i);
        }
        // neighbour cells whose closest points can be within eps
        let mut offsets = Vec::new();
        for dx in -2i64..=2 {
            for dy in -2i64..=2 {
                for dz in -2i64..=2 {
                    let gap: f64 = [dx, dy, dz]
                        .iter()
                        .map(|&d| {
                            let g = (d.abs() - 1).max(0) as f64 * side;
                            g * g
                        })
                        .sum();
                    if gap <= eps * eps {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        Grid { side, cells, offsets }
    }

    fn key_of(p: &Point, side: f64) -> Key {
        [0, 1, 2].map(|k| (p[k] / side).floor() as i64)
    }

    fn neighbour_cells(&self, key: Key) -> impl Iterator<Item = (Key, &Vec<usize>)> + '_ {
        self.offsets.iter().filter_map(move |o| {
            let k = [key[0] + o[0], key[1] + o[1], key[2] + o[2]];
            self.cells.get(&k).map(|c| (k, c))
        })
    }
}

/// Labels every point with its cluster, or `None` for noise.
///
/// Core points have at least `min_pts` points (themselves included) within
/// `eps`. Clusters are the connected components of core points, and each
/// border point joins the cluster of its nearest core point (lowest index on
/// ties). Clusters are numbered by their smallest member.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<Vec<Option<usize>>, DetectError> {
    if !(eps > 0.0 && eps.is_finite()) || min_pts == 0 {
        return Err(DetectError::BadParameter(format!("dbscan needs eps > 0 and min_pts >= 1, got {eps} and {min_pts}")));
    }
    let n = points.len();
    let grid = Grid::new(points, eps);
    let eps2 = eps * eps;
    let close = |a: usize, b: usize| (points[a] - points[b]).norm_squared() <= eps2;

    let mut core = vec![false; n];
    for (&key, members) in &grid.cells {
        if members.len() >= min_pts {
            for &i in members {
                core[i] = true;
            }
            continue;
        }
        for &i in members {
            let mut count = 0;
            'cells: for (_, cell) in grid.neighbour_cells(key) {
                for &j in cell {
                    if close(i, j) {
                        count += 1;
                        if count >= min_pts {
                            break 'cells;
                        }
                    }
                }
            }
            core[i] = count >= min_pts;
        }
    }

    let mut uf = UnionFind::new(n);
    let core_of = |cell: &Vec<usize>| -> Vec<usize> { cell.iter().copied().filter(|&i| core[i]).collect() };
    let core_cells: HashMap<Key, Vec<usize>> = grid
        .cells
        .iter()
        .map(|(&k, c)| (k, core_of(c)))
        .filter(|(_, c)| !c.is_empty())
        .collect();
    for (&key, mine) in &core_cells {
        for w in mine.windows(2) {
            uf.union(w[0], w[1]);
        }
        for o in &grid.offsets {
            let other_key = [key[0] + o[0], key[1] + o[1], key[2] + o[2]];
            if other_key <= key {
                continue;
            }
            let Some(theirs) = core_cells.get(&other_key) else { continue };
            if uf.find(mine[0]) == uf.find(theirs[0]) {
                continue;
            }
            if mine.iter().any(|&a| theirs.iter().any(|&b| close(a, b))) {
                uf.union(mine[0], theirs[0]);
            }
        }
    }

    let mut root = vec![None; n];
    for i in 0..n {
        if core[i] {
            root[i] = Some(uf.find(i));
            continue;
        }
        let key = Grid::key_of(&points[i], grid.side);
        let mut best: Option<(f64, usize)> = None;
        for (_, cell) in grid.neighbour_cells(key) {
            for &j in cell {
                if !core[j] {
                    continue;
                }
                let d = (points[i] - points[j]).norm_squared();
                if d <= eps2 && best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                    best = Some((d, j));
                }
            }
        }
        root[i] = best.map(|(_, j)| uf.find(j));
    }

    // number clusters by first appearance in index order
    let mut ids: HashMap<usize, usize> = HashMap::new();
    Ok(root
        .into_iter()
        .map(|r| {
            r.map(|r| {
                let next = ids.len();
                *ids.entry(r).or_insert(next)
            })
        })
        .collect())
}

/// Groups labelled points and drops clusters smaller than `min_size`.
pub fn clusters_from_labels(labels: &[Option<usize>], min_size: usize) -> Vec<Vec<usize>> {
    let count = labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0);
    let mut groups = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            groups[*l].push(i);
        }
    }
    groups.retain(|g| g.len() >= min_size);
    groups
}
