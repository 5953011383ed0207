use crate::model::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.inf(&o.lo),
            hi: self.hi.sup(&o.hi),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|a| self.lo[a] <= o.hi[a] && o.lo[a] <= self.hi[a])
    }

    /// Entry distance of the ray into the box, if it enters before `tmax`.
    #[inline]
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, tmax: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = tmax;
        for a in 0..3 {
            let mut near = (self.lo[a] - origin[a]) * inv_dir[a];
            let mut far = (self.hi[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0·inf leaves the bound unchanged
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive slot; inner: index of the left child (right = left + 1).
    start: usize,
    count: usize,
}

/// Bounding volume hierarchy over primitive boxes.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    boxes: Vec<Aabb>,
}

const LEAF: usize = 4;

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len().max(1));
        nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: boxes.len(),
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start, nodes[ni].count);
            let slice = &mut order[start..start + count];
            let bounds = slice
                .iter()
                .fold(Aabb::empty(), |acc, &i| acc.union(&boxes[i]));
            nodes[ni].bounds = bounds;
            if count <= LEAF {
                continue;
            }
            let cb = Aabb::from_points(slice.iter().map(|&i| boxes[i].center()).collect::<Vec<_>>().iter());
            let ext = cb.hi - cb.lo;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            if !(ext[axis] > 0.0) {
                continue;
            }
            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                boxes[a].center()[axis]
                    .total_cmp(&boxes[b].center()[axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                start,
                count: mid,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: start + mid,
                count: count - mid,
            });
            nodes[ni].start = left;
            nodes[ni].count = 0;
            stack.push(left + 1);
            stack.push(left);
        }
        Bvh {
            nodes,
            order,
            boxes: boxes.to_vec(),
        }
    }

    fn is_leaf(&self, n: &Node) -> bool {
        n.count > 0 || self.order.is_empty()
    }

    /// Calls `f` for every primitive whose box overlaps `query`.
    pub fn query(&self, query: &Aabb, mut f: impl FnMut(usize)) {
        if self.order.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if !n.bounds.overlaps(query) {
                continue;
            }
            if self.is_leaf(n) {
                for &p in &self.order[n.start..n.start + n.count] {
                    if self.boxes[p].overlaps(query) {
                        f(p);
                    }
                }
            } else {
                stack.push(n.start + 1);
                stack.push(n.start);
            }
        }
    }

    /// Calls `f` for every primitive whose box the ray `origin + t·dir`,
    /// `t ≥ 0`, passes through.
    pub fn ray_candidates(&self, origin: &Vec3, dir: &Vec3, mut f: impl FnMut(usize)) {
        if self.order.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if n.bounds.ray_entry(origin, &inv, f64::INFINITY).is_none() {
                continue;
            }
            if self.is_leaf(n) {
                for &p in &self.order[n.start..n.start + n.count] {
                    if self.boxes[p].ray_entry(origin, &inv, f64::INFINITY).is_some() {
                        f(p);
                    }
                }
            } else {
                stack.push(n.start + 1);
                stack.push(n.start);
            }
        }
    }

    /// Closest hit along a ray. `hit(prim, tmax)` returns the hit distance
    /// of a primitive if it is below `tmax`. Ties keep the lower index.
    pub fn closest_hit(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        mut tmax: f64,
        mut hit: impl FnMut(usize, f64) -> Option<f64>,
    ) -> Option<(f64, usize)> {
        if self.order.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            match n.bounds.ray_entry(origin, &inv, tmax) {
                None => continue,
                Some(_) => {}
            }
            if self.is_leaf(n) {
                for &p in &self.order[n.start..n.start + n.count] {
                    if let Some(t) = hit(p, tmax) {
                        let better = match best {
                            None => true,
                            Some((bt, bp)) => t < bt || (t == bt && p < bp),
                        };
                        if better && t <= tmax {
                            best = Some((t, p));
                            tmax = t;
                        }
                    }
                }
            } else {
                let (l, r) = (n.start, n.start + 1);
                let tl = self.nodes[l].bounds.ray_entry(origin, &inv, tmax);
                let tr = self.nodes[r].bounds.ray_entry(origin, &inv, tmax);
                match (tl, tr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(r);
                        stack.push(l);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(l);
                        stack.push(r);
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_boxes(n: usize, seed: u64) -> Vec<Aabb> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let h = Vec3::new(rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5));
                Aabb { lo: c - h, hi: c + h }
            })
            .collect()
    }

    #[test]
    fn query_matches_brute_force() {
        let boxes = random_boxes(500, 1);
        let bvh = Bvh::build(&boxes);
        for q in random_boxes(50, 2) {
            let mut got = Vec::new();
            bvh.query(&q, |i| got.push(i));
            got.sort();
            let want: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].overlaps(&q)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn closest_hit_matches_brute_force() {
        let boxes = random_boxes(300, 3);
        let bvh = Bvh::build(&boxes);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let o = Vec3::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), -10.0);
            let d = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 1.0);
            let inv = d.map(|v| 1.0 / v);
            let hit = |i: usize, tmax: f64| boxes[i].ray_entry(&o, &inv, tmax);
            let got = bvh.closest_hit(&o, &d, f64::INFINITY, hit);
            let want = (0..boxes.len())
                .filter_map(|i| hit(i, f64::INFINITY).map(|t| (t, i)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_tree() {
        let bvh = Bvh::build(&[]);
        let mut n = 0;
        bvh.query(&Aabb { lo: Vec3::zeros(), hi: Vec3::repeat(1.0) }, |_| n += 1);
        assert_eq!(n, 0);
        assert!(bvh.closest_hit(&Vec3::zeros(), &Vec3::x(), 1.0, |_, _| Some(0.0)).is_none());
    }
}
