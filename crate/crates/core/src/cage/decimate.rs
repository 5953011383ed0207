use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::geom::ray::ParityTester;
use crate::geom::selfint::{face_box, intersecting_pairs};
use crate::geom::tritri::{closest_point, triangles_intersect, Tri};
use crate::geom::{Aabb, Bvh};
use crate::model::{CageMesh, Mat3, Vec3};
use crate::mvc::{mvc_loss, mvc_weight_gradients};

use super::qp::{self, HalfSpace};
use super::CageBuildConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecimationReport {
    pub initial_vertices: usize,
    pub final_vertices: usize,
    pub collapses: usize,
    pub rejected_collapses: usize,
    pub stage2_cycles: usize,
    pub stage2_steps: usize,
    pub rejected_steps: usize,
    pub reached_target: bool,
    /// Smallest `n_fᵀ(v − p_f)` over accepted collapses, divided by the
    /// bounding-box diagonal.
    pub min_constraint_slack: f64,
    /// Loss before and after each gradient cycle.
    pub stage2_losses: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
struct Candidate {
    penalized: bool,
    cost: f64,
    i: usize,
    j: usize,
    vi: u32,
    vj: u32,
    pos: Vec3,
}

impl Candidate {
    fn key(&self) -> (bool, f64, usize, usize) {
        (self.penalized, self.cost, self.i, self.j)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // Reversed: the heap pops the cheapest unpenalized edge first.
    fn cmp(&self, o: &Self) -> Ordering {
        let (a, b) = (self.key(), o.key());
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
    }
}

/// Face boxes for intersection queries: a BVH over faces present at the
/// last rebuild plus a short list of faces created since.
struct FaceIndex {
    bvh: Bvh,
    ids: Vec<usize>,
    recent: Vec<(usize, Aabb)>,
}

struct Decimator {
    verts: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vf: Vec<Vec<usize>>,
    vert_alive: Vec<bool>,
    version: Vec<u32>,
    alive_vertices: usize,
    alive_faces: usize,
    heap: BinaryHeap<Candidate>,
    index: FaceIndex,
    diag: f64,
    min_slack: f64,
    rejected: usize,
}

fn unit_normal(t: &Tri) -> Option<Vec3> {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let l = n.norm();
    (l > 0.0 && l.is_finite()).then(|| n / l)
}

impl Decimator {
    fn new(m: &CageMesh) -> Self {
        let nv = m.vertices.len();
        let mut vf = vec![Vec::new(); nv];
        for (f, face) in m.faces.iter().enumerate() {
            for &v in face {
                vf[v].push(f);
            }
        }
        let vert_alive: Vec<bool> = vf.iter().map(|l| !l.is_empty()).collect();
        let mut d = Self {
            verts: m.vertices.clone(),
            faces: m.faces.clone(),
            face_alive: vec![true; m.faces.len()],
            vf,
            alive_vertices: vert_alive.iter().filter(|&&a| a).count(),
            vert_alive,
            version: vec![0; nv],
            alive_faces: m.faces.len(),
            heap: BinaryHeap::new(),
            index: FaceIndex { bvh: Bvh::build(&[]), ids: Vec::new(), recent: Vec::new() },
            diag: m.bbox_diagonal().max(f64::MIN_POSITIVE),
            min_slack: f64::INFINITY,
            rejected: 0,
        };
        d.rebuild_index();
        let mut edges = BTreeSet::new();
        for f in &m.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        for (a, b) in edges {
            d.push_edge(a, b);
        }
        d
    }

    fn tri(&self, f: &[usize; 3]) -> Tri {
        [self.verts[f[0]], self.verts[f[1]], self.verts[f[2]]]
    }

    fn rebuild_index(&mut self) {
        let ids: Vec<usize> = (0..self.faces.len()).filter(|&f| self.face_alive[f]).collect();
        let boxes: Vec<Aabb> = ids.iter().map(|&f| face_box(&self.tri(&self.faces[f]))).collect();
        self.index = FaceIndex { bvh: Bvh::build(&boxes), ids, recent: Vec::new() };
    }

    fn alive_faces_of(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.vf[v].iter().copied().filter(|&f| self.face_alive[f])
    }

    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.alive_faces_of(v)
            .flat_map(|f| self.faces[f])
            .filter(|&w| w != v)
            .collect()
    }

    /// Optimal collapse position of edge (i, j) and its quadric cost.
    fn plan(&self, i: usize, j: usize) -> Option<(f64, Vec3)> {
        let eu: BTreeSet<usize> = self.alive_faces_of(i).chain(self.alive_faces_of(j)).collect();
        let mut a = Mat3::zeros();
        let mut b = Vec3::zeros();
        let mut c = 0.0;
        let mut cons = Vec::with_capacity(eu.len());
        for &f in &eu {
            let t = self.tri(&self.faces[f]);
            let Some(n) = unit_normal(&t) else { continue };
            let d = n.dot(&t[0]);
            a += n * n.transpose();
            b -= n * d;
            c += d * d;
            cons.push(HalfSpace { n, d });
        }
        let cost = |x: &Vec3| (x.dot(&(a * x)) + 2.0 * b.dot(x) + c).max(0.0);
        let mid = (self.verts[i] + self.verts[j]) * 0.5;
        let lambda = 1e-6 * a.trace().max(1e-300);
        let tol = 1e-12 * self.diag;
        let solved = qp::solve(&(a + Mat3::identity() * lambda), &(b - mid * lambda), &cons, tol);
        let feasible = |x: &Vec3| cons.iter().all(|h| h.slack(x) >= -tol);
        let x = match solved {
            Some(x) if feasible(&x) => x,
            _ => [self.verts[i], self.verts[j], mid]
                .into_iter()
                .filter(|x| feasible(x))
                .min_by(|p, q| cost(p).total_cmp(&cost(q)))?,
        };
        Some((cost(&x), x))
    }

    fn push_edge(&mut self, a: usize, b: usize) {
        let (i, j) = (a.min(b), a.max(b));
        match self.plan(i, j) {
            Some((cost, pos)) => self.heap.push(Candidate {
                penalized: false,
                cost,
                i,
                j,
                vi: self.version[i],
                vj: self.version[j],
                pos,
            }),
            None => {
                // Infeasible now; it is planned again when its neighbourhood changes.
                self.rejected += 1;
            }
        }
    }

    /// Checks every collapse condition and returns the rewritten faces.
    fn try_collapse(&self, i: usize, j: usize, pos: &Vec3) -> Option<(Vec<usize>, Vec<(usize, [usize; 3])>)> {
        let shared: Vec<usize> = self.alive_faces_of(i).filter(|&f| self.faces[f].contains(&j)).collect();
        if shared.len() != 2 {
            return None;
        }
        let ni = self.neighbors(i);
        let nj = self.neighbors(j);
        if ni.intersection(&nj).count() != 2 {
            return None;
        }
        let touched: BTreeSet<usize> = self.alive_faces_of(i).chain(self.alive_faces_of(j)).collect();
        let mut moved = Vec::new();
        for &f in &touched {
            if shared.contains(&f) {
                continue;
            }
            let old = self.faces[f];
            let new = old.map(|v| if v == j { i } else { v });
            let old_n = unit_normal(&self.tri(&old))?;
            let t = new.map(|v| if v == i { *pos } else { self.verts[v] });
            let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
            if n.norm() <= 1e-12 * self.diag * self.diag || n.dot(&old_n) <= 0.0 {
                return None;
            }
            moved.push((f, new));
        }
        let tri_of = |face: &[usize; 3]| face.map(|v| if v == i || v == j { *pos } else { self.verts[v] });
        for (_, new) in &moved {
            let t = tri_of(new);
            let bx = face_box(&t);
            let mut hit = false;
            let mut test = |g: usize| {
                if hit || !self.face_alive[g] || touched.contains(&g) {
                    return;
                }
                let other = self.faces[g].map(|v| if v == j { i } else { v });
                if other.iter().any(|v| new.contains(v)) {
                    return;
                }
                if triangles_intersect(&t, &self.tri(&self.faces[g])) {
                    hit = true;
                }
            };
            self.index.bvh.query(&bx, |p| test(self.index.ids[p]));
            for (g, gb) in &self.index.recent {
                if gb.overlaps(&bx) {
                    test(*g);
                }
            }
            if hit {
                return None;
            }
        }
        Some((shared, moved))
    }

    fn commit(&mut self, i: usize, j: usize, pos: Vec3, shared: Vec<usize>, moved: Vec<(usize, [usize; 3])>) {
        let eu: Vec<HalfSpace> = self
            .alive_faces_of(i)
            .chain(self.alive_faces_of(j))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter_map(|f| {
                let t = self.tri(&self.faces[f]);
                unit_normal(&t).map(|n| HalfSpace { n, d: n.dot(&t[0]) })
            })
            .collect();
        let slack = eu.iter().map(|h| h.slack(&pos)).fold(f64::INFINITY, f64::min);
        self.min_slack = self.min_slack.min(slack / self.diag);

        for f in shared {
            self.face_alive[f] = false;
            self.alive_faces -= 1;
        }
        self.verts[i] = pos;
        let mut fresh = Vec::with_capacity(moved.len());
        for (old, new) in moved {
            self.face_alive[old] = false;
            let id = self.faces.len();
            self.faces.push(new);
            self.face_alive.push(true);
            for &v in &new {
                if v != i {
                    self.vf[v].retain(|&g| g != old && self.face_alive[g]);
                    self.vf[v].push(id);
                }
            }
            fresh.push(id);
        }
        for &id in &fresh {
            let bx = face_box(&self.tri(&self.faces[id]));
            self.index.recent.push((id, bx));
        }
        self.vf[i] = fresh;
        self.vf[j].clear();
        self.vert_alive[j] = false;
        self.alive_vertices -= 1;
        if self.index.recent.len() > 256 + self.alive_faces / 32 {
            self.rebuild_index();
        }

        let ring = self.neighbors(i);
        self.version[i] += 1;
        self.version[j] += 1;
        for &v in &ring {
            self.version[v] += 1;
        }
        let mut edges = BTreeSet::new();
        for &a in std::iter::once(&i).chain(ring.iter()) {
            for b in self.neighbors(a) {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        for (a, b) in edges {
            self.push_edge(a, b);
        }
    }

    /// Collapses edges until `target` vertices remain or `budget` collapses
    /// are done. Returns the number of collapses.
    fn run(&mut self, target: usize, budget: usize) -> usize {
        let mut done = 0;
        while self.alive_vertices > target && done < budget {
            let Some(c) = self.heap.pop() else { break };
            if !self.vert_alive[c.i]
                || !self.vert_alive[c.j]
                || self.version[c.i] != c.vi
                || self.version[c.j] != c.vj
            {
                continue;
            }
            match self.try_collapse(c.i, c.j, &c.pos) {
                Some((shared, moved)) => {
                    self.commit(c.i, c.j, c.pos, shared, moved);
                    done += 1;
                }
                None => {
                    self.rejected += 1;
                    if !c.penalized {
                        self.heap.push(Candidate { penalized: true, ..c });
                    }
                }
            }
        }
        done
    }

    fn compact(&self) -> CageMesh {
        let mut map = vec![usize::MAX; self.verts.len()];
        let mut vertices = Vec::with_capacity(self.alive_vertices);
        for (v, &alive) in self.vert_alive.iter().enumerate() {
            if alive {
                map[v] = vertices.len();
                vertices.push(self.verts[v]);
            }
        }
        let faces = (0..self.faces.len())
            .filter(|&f| self.face_alive[f])
            .map(|f| self.faces[f].map(|v| map[v]))
            .collect();
        CageMesh { vertices, faces }
    }
}

fn face_normals(m: &CageMesh) -> Vec<Vec3> {
    (0..m.faces.len()).map(|f| m.face_area_normal(f)).collect()
}

/// Vertices of `cand` whose motion from the current mesh breaks validity:
/// corners of flipped or degenerate faces, of intersecting face pairs, and
/// of the face nearest to any sample that left the cage.
fn blocking_vertices(cand: &CageMesh, normals: &[Vec3], min_area: f64, samples: &[Vec3], inside: &[bool]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for (f, (a, b)) in face_normals(cand).iter().zip(normals).enumerate() {
        if a.norm() <= min_area || a.dot(b) <= 0.0 {
            out.extend(cand.faces[f]);
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (f, g) in intersecting_pairs(cand) {
        out.extend(cand.faces[f]);
        out.extend(cand.faces[g]);
    }
    if !out.is_empty() {
        return out;
    }
    let tester = ParityTester::new(cand);
    for (p, _) in samples.iter().zip(inside).filter(|(p, was)| **was && !tester.strictly_inside(p)) {
        let nearest = (0..cand.faces.len())
            .min_by(|&f, &g| {
                let df = (closest_point(p, &cand.triangle(f)) - p).norm_squared();
                let dg = (closest_point(p, &cand.triangle(g)) - p).norm_squared();
                df.total_cmp(&dg)
            })
            .expect("a closed cage has faces");
        out.extend(cand.faces[nearest]);
    }
    out
}

/// One cycle of Adam steps on the MVC negativity loss. A step may not
/// flip a face, create an intersection, let an enclosed sample escape or
/// raise the loss. Vertices that cause a violation are held in place and
/// the rest of the step is retried; a step that still raises the loss is
/// halved a few times and finally skipped.
fn stage2(mesh: &mut CageMesh, samples: &[Vec3], cfg: &CageBuildConfig, report: &mut DecimationReport) -> Result<()> {
    let params = cfg.loss();
    let reference = mesh.vertices.clone();
    let n = reference.len();
    let (mut m1, mut m2) = (vec![Vec3::zeros(); n], vec![Vec3::zeros(); n]);
    let (b1, b2) = (0.9f64, 0.999f64);
    let mut eval = mvc_weight_gradients(samples, mesh, &reference, params)?;
    let start = eval.value;
    let mut cur = start;
    let diag = mesh.bbox_diagonal();
    let min_area = 1e-12 * diag * diag;
    let inside = {
        let tester = ParityTester::new(mesh);
        samples.iter().map(|p| tester.strictly_inside(p)).collect::<Vec<_>>()
    };
    for t in 1..=cfg.gd_steps_per_cycle {
        let mut dir = vec![Vec3::zeros(); n];
        for k in 0..n {
            let g = eval.gradient[k];
            m1[k] = m1[k] * b1 + g * (1.0 - b1);
            m2[k] = m2[k] * b2 + g.component_mul(&g) * (1.0 - b2);
            let mh = m1[k] / (1.0 - b1.powi(t as i32));
            let vh = m2[k] / (1.0 - b2.powi(t as i32));
            dir[k] = mh.zip_map(&vh, |a, b| a / (b.sqrt() + 1e-12));
        }
        report.stage2_steps += 1;
        let normals = face_normals(mesh);
        let mut scale = cfg.learning_rate;
        let mut halvings = 0;
        let mut accepted = false;
        while halvings < 6 && dir.iter().any(|d| *d != Vec3::zeros()) {
            let mut cand = mesh.clone();
            for (v, d) in cand.vertices.iter_mut().zip(&dir) {
                *v -= d * scale;
            }
            let blocked = blocking_vertices(&cand, &normals, min_area, samples, &inside);
            if !blocked.is_empty() {
                let fresh: Vec<usize> = blocked.into_iter().filter(|&v| dir[v] != Vec3::zeros()).collect();
                if fresh.is_empty() {
                    scale *= 0.5;
                    halvings += 1;
                }
                for v in fresh {
                    dir[v] = Vec3::zeros();
                }
                continue;
            }
            let l = mvc_loss(samples, &cand, &reference, params)?;
            if l <= cur + 1e-12 {
                *mesh = cand;
                cur = l;
                accepted = true;
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if !accepted {
            report.rejected_steps += 1;
        } else if t < cfg.gd_steps_per_cycle {
            eval = mvc_weight_gradients(samples, mesh, &reference, params)?;
        }
    }
    report.stage2_cycles += 1;
    report.stage2_losses.push((start, cur));
    Ok(())
}

/// Quadric edge-collapse decimation whose new vertices stay on the outer
/// side of every plane of the surrounding faces, optionally alternated
/// with gradient steps that reduce negative MVC weights of `samples`.
pub fn decimate_two_stage(m: &CageMesh, samples: &[Vec3], cfg: &CageBuildConfig) -> Result<(CageMesh, DecimationReport)> {
    if !m.is_closed_manifold() {
        return Err(Error::OpenCage("decimation input is not a closed manifold".into()));
    }
    let target = cfg.target_vertices;
    let mut report = DecimationReport {
        initial_vertices: m.vertices.len(),
        min_constraint_slack: f64::INFINITY,
        ..Default::default()
    };
    let two_stage = cfg.two_stage && !samples.is_empty();
    let first_stop = if two_stage { target.max(cfg.alternate_start_vertices) } else { target };
    let mut d = Decimator::new(m);
    report.collapses += d.run(first_stop, usize::MAX);
    let mut stalled = d.alive_vertices > first_stop;
    let mut mesh = d.compact();
    report.rejected_collapses += d.rejected;
    report.min_constraint_slack = report.min_constraint_slack.min(d.min_slack);

    if two_stage && !stalled {
        loop {
            if mesh.vertices.len() > target {
                let mut d = Decimator::new(&mesh);
                let done = d.run(target, cfg.collapses_per_cycle);
                report.collapses += done;
                report.rejected_collapses += d.rejected;
                report.min_constraint_slack = report.min_constraint_slack.min(d.min_slack);
                mesh = d.compact();
                stalled = done == 0;
            }
            stage2(&mut mesh, samples, cfg, &mut report)?;
            if mesh.vertices.len() <= target || stalled {
                break;
            }
        }
    }
    report.final_vertices = mesh.vertices.len();
    report.reached_target = mesh.vertices.len() <= target;
    if !report.reached_target {
        log::warn!(
            "decimation stopped at {} vertices (target {}): no admissible collapse left",
            mesh.vertices.len(),
            target
        );
    }
    Ok((mesh, report))
}
