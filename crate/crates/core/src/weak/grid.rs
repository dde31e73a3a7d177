use serde::{Deserialize, Serialize};

use super::WeakError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Union of closed axis-aligned rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub rects: Vec<Rect>,
}

impl Domain {
    pub fn new(rects: Vec<Rect>) -> Result<Self, WeakError> {
        if rects.is_empty() {
            return Err(WeakError::InvalidDomain("at least one rectangle is required".into()));
        }
        for r in &rects {
            let finite = [r.x0, r.x1, r.y0, r.y1].iter().all(|v| v.is_finite());
            if !finite || r.x0 >= r.x1 || r.y0 >= r.y1 {
                return Err(WeakError::InvalidDomain(format!("degenerate rectangle {r:?}")));
            }
        }
        Ok(Domain { rects })
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, WeakError> {
        Domain::new(vec![Rect::new(x0, x1, y0, y1)])
    }

    pub fn bounds(&self) -> Rect {
        self.rects.iter().skip(1).fold(self.rects[0], |a, r| Rect {
            x0: a.x0.min(r.x0),
            x1: a.x1.max(r.x1),
            y0: a.y0.min(r.y0),
            y1: a.y1.max(r.y1),
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(0.0, 0.0)
    }

    /// Whether `x - y²` changes sign on a sample of the domain.
    pub fn contains_sonic_arc(&self) -> bool {
        let (mut pos, mut neg) = (false, false);
        for r in &self.rects {
            for i in 0..=64 {
                for j in 0..=64 {
                    let x = r.x0 + (r.x1 - r.x0) * i as f64 / 64.0;
                    let y = r.y0 + (r.y1 - r.y0) * j as f64 / 64.0;
                    let k = x - y * y;
                    pos |= k > 0.0;
                    neg |= k < 0.0;
                }
            }
        }
        pos && neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Outside,
    Interior,
    Boundary,
}

/// Uniform tensor grid over the bounding box of a domain.
///
/// Node `(i, j)` has index `i + nx * j`. A cell belongs to the domain when
/// its centre does; a node is interior when all four cells around it do.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    cells: Vec<bool>,
    kinds: Vec<NodeKind>,
}

impl Grid2D {
    pub fn new(domain: &Domain, nx: usize, ny: usize) -> Result<Self, WeakError> {
        if nx < 3 || ny < 3 {
            return Err(WeakError::InvalidGrid(format!("need at least 3 nodes per axis, got {nx}x{ny}")));
        }
        let b = domain.bounds();
        let hx = (b.x1 - b.x0) / (nx - 1) as f64;
        let hy = (b.y1 - b.y0) / (ny - 1) as f64;
        let aligned = |v: f64, o: f64, h: f64| {
            let t = (v - o) / h;
            (t - t.round()).abs() < 1e-9
        };
        for r in &domain.rects {
            if !(aligned(r.x0, b.x0, hx) && aligned(r.x1, b.x0, hx) && aligned(r.y0, b.y0, hy) && aligned(r.y1, b.y0, hy)) {
                return Err(WeakError::InvalidGrid(format!("rectangle {r:?} is not aligned with a {nx}x{ny} grid")));
            }
        }
        let mut cells = vec![false; (nx - 1) * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let cx = b.x0 + (i as f64 + 0.5) * hx;
                let cy = b.y0 + (j as f64 + 0.5) * hy;
                cells[i + (nx - 1) * j] = domain.contains(cx, cy);
            }
        }
        let mut grid = Grid2D { nx, ny, x0: b.x0, y0: b.y0, hx, hy, cells, kinds: vec![NodeKind::Outside; nx * ny] };
        for j in 0..ny {
            for i in 0..nx {
                let around = [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)];
                let inside = around.iter().filter(|&&(ci, cj)| grid.cell_in(ci, cj)).count();
                grid.kinds[i + nx * j] = match inside {
                    0 => NodeKind::Outside,
                    4 => NodeKind::Interior,
                    _ => NodeKind::Boundary,
                };
            }
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    /// Cell `(i, j)` spans nodes `i..=i+1`, `j..=j+1`; out-of-range is outside.
    pub fn cell_in(&self, i: usize, j: usize) -> bool {
        i < self.nx - 1 && j < self.ny - 1 && self.cells[i + (self.nx - 1) * j]
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }

    /// Whether node `(i, j)` exists and lies in the closed domain.
    pub fn in_domain(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.kinds[i as usize + self.nx * j as usize] != NodeKind::Outside
    }

    pub fn domain_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k] != NodeKind::Outside).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k] == NodeKind::Interior).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k] == NodeKind::Boundary).collect()
    }

    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    /// Field sampled at every node; zero outside the domain.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| if self.kinds[k] == NodeKind::Outside { 0.0 } else { let (x, y) = self.coords(k); f(x, y) })
            .collect()
    }

    /// Maximal straight runs of the boundary, each loop traversed with the
    /// domain on the left and started at its lowest, then leftmost, corner.
    /// For a rectangle the ids are bottom 0, right 1, top 2, left 3.
    pub fn boundary_segments(&self) -> Vec<BoundarySegment> {
        use std::collections::BTreeMap;
        // directed unit edges between grid vertices
        let mut outgoing: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                if !self.cell_in(i, j) {
                    continue;
                }
                let out = |di: isize, dj: isize| !self.cell_in((i as isize + di) as usize, (j as isize + dj) as usize);
                if j == 0 || out(0, -1) {
                    outgoing.entry((i, j)).or_default().push((i + 1, j));
                }
                if out(1, 0) {
                    outgoing.entry((i + 1, j)).or_default().push((i + 1, j + 1));
                }
                if out(0, 1) {
                    outgoing.entry((i + 1, j + 1)).or_default().push((i, j + 1));
                }
                if i == 0 || out(-1, 0) {
                    outgoing.entry((i, j + 1)).or_default().push((i, j));
                }
            }
        }

        let mut loops: Vec<Vec<(usize, usize)>> = Vec::new();
        while let Some((&first, _)) = outgoing.iter().min_by_key(|(&(i, j), _)| (j, i)) {
            let mut chain = vec![first];
            let mut at = first;
            loop {
                let next = {
                    let edges = outgoing.get_mut(&at).expect("boundary edges form closed loops");
                    let n = edges.remove(0);
                    if edges.is_empty() {
                        outgoing.remove(&at);
                    }
                    n
                };
                if next == first {
                    break;
                }
                chain.push(next);
                at = next;
            }
            loops.push(chain);
        }

        let mut segments = Vec::new();
        for chain in loops {
            let n = chain.len();
            let dir = |a: (usize, usize), b: (usize, usize)| (b.0 as isize - a.0 as isize, b.1 as isize - a.1 as isize);
            let corners: Vec<usize> = (0..n).filter(|&k| dir(chain[(k + n - 1) % n], chain[k]) != dir(chain[k], chain[(k + 1) % n])).collect();
            // the chain starts at its lowest-leftmost vertex, which is a corner
            for (c, &start) in corners.iter().enumerate() {
                let end = corners[(c + 1) % corners.len()];
                let mut vertices = vec![chain[start]];
                let mut k = start;
                loop {
                    k = (k + 1) % n;
                    vertices.push(chain[k]);
                    if k == end {
                        break;
                    }
                }
                let nodes = vertices.iter().map(|&(i, j)| self.index(i, j)).collect::<Vec<_>>();
                let (s, e) = (vertices[0], vertices[vertices.len() - 1]);
                segments.push(BoundarySegment {
                    id: segments.len(),
                    start: (self.x(s.0), self.y(s.1)),
                    end: (self.x(e.0), self.y(e.1)),
                    nodes,
                });
            }
        }
        segments
    }
}

/// A straight piece of the boundary from `start` to `end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySegment {
    pub id: usize,
    pub start: (f64, f64),
    pub end: (f64, f64),
    /// Grid nodes along the segment, in traversal order.
    pub nodes: Vec<usize>,
}

impl BoundarySegment {
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        BoundarySegment { id: self.id, start: self.end, end: self.start, nodes }
    }

    pub fn delta(&self) -> (f64, f64) {
        (self.end.0 - self.start.0, self.end.1 - self.start.1)
    }

    pub fn length(&self) -> f64 {
        let (dx, dy) = self.delta();
        dx.hypot(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_masks_and_segments() {
        let d = Domain::rectangle(0.0, 1.0, 0.0, 2.0).unwrap();
        let g = Grid2D::new(&d, 5, 9).unwrap();
        assert_eq!(g.interior_nodes().len(), 3 * 7);
        assert_eq!(g.boundary_nodes().len(), 45 - 21);
        let segs = g.boundary_segments();
        assert_eq!(segs.len(), 4);
        assert_eq!((segs[0].start, segs[0].end), ((0.0, 0.0), (1.0, 0.0)));
        assert_eq!((segs[1].start, segs[1].end), ((1.0, 0.0), (1.0, 2.0)));
        assert_eq!((segs[2].start, segs[2].end), ((1.0, 2.0), (0.0, 2.0)));
        assert_eq!((segs[3].start, segs[3].end), ((0.0, 2.0), (0.0, 0.0)));
        assert_eq!(segs[1].nodes.len(), 9);
        let covered: std::collections::BTreeSet<usize> = segs.iter().flat_map(|s| s.nodes.clone()).collect();
        assert_eq!(covered.len(), g.boundary_nodes().len());
    }

    #[test]
    fn l_shaped_union() {
        let d = Domain::new(vec![Rect::new(0.0, 2.0, 0.0, 1.0), Rect::new(0.0, 1.0, 1.0, 2.0)]).unwrap();
        let g = Grid2D::new(&d, 9, 9).unwrap();
        let segs = g.boundary_segments();
        assert_eq!(segs.len(), 6);
        let perimeter: f64 = segs.iter().map(|s| s.length()).sum();
        assert!((perimeter - 8.0).abs() < 1e-12);
        assert_eq!(g.kind(g.index(6, 6)), NodeKind::Outside);
        assert_eq!(g.kind(g.index(4, 4)), NodeKind::Boundary);
    }

    #[test]
    fn misaligned_rectangles_are_rejected() {
        let d = Domain::new(vec![Rect::new(0.0, 1.0, 0.0, 1.0), Rect::new(0.0, 0.33, 1.0, 2.0)]).unwrap();
        assert!(Grid2D::new(&d, 9, 9).is_err());
    }
}
