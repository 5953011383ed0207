//! Exact triangle–triangle intersection built on Shewchuk's adaptive
//! predicates. Touching counts as intersecting.

use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::model::Vec3;

pub type Tri = [Vec3; 3];

fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

fn o3(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

type P2 = (f64, f64);

fn o2(a: P2, b: P2, c: P2) -> i8 {
    sign(orient2d(
        Coord { x: a.0, y: a.1 },
        Coord { x: b.0, y: b.1 },
        Coord { x: c.0, y: c.1 },
    ))
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_2d(a: P2, b: P2, c: P2, d: P2) -> bool {
    let (d1, d2) = (o2(a, b, c), o2(a, b, d));
    let (d3, d4) = (o2(c, d, a), o2(c, d, b));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && on_segment(a, b, c))
        || (d2 == 0 && on_segment(a, b, d))
        || (d3 == 0 && on_segment(c, d, a))
        || (d4 == 0 && on_segment(c, d, b))
}

fn point_in_tri_2d(p: P2, t: &[P2; 3]) -> bool {
    let s = [o2(t[0], t[1], p), o2(t[1], t[2], p), o2(t[2], t[0], p)];
    !(s.contains(&1) && s.contains(&-1))
}

/// Drops the coordinate along which `n` is largest.
fn project(n: &Vec3) -> impl Fn(&Vec3) -> P2 {
    let (na, nb, nc) = (n.x.abs(), n.y.abs(), n.z.abs());
    let drop = if na >= nb && na >= nc {
        0
    } else if nb >= nc {
        1
    } else {
        2
    };
    move |p: &Vec3| match drop {
        0 => (p.y, p.z),
        1 => (p.x, p.z),
        _ => (p.x, p.y),
    }
}

fn plane_normal(a: &Tri, b: &Tri) -> Vec3 {
    let n = (a[1] - a[0]).cross(&(a[2] - a[0]));
    if n.norm_squared() > 0.0 {
        n
    } else {
        (b[1] - b[0]).cross(&(b[2] - b[0]))
    }
}

fn coplanar_tris(a: &Tri, b: &Tri) -> bool {
    let pr = project(&plane_normal(a, b));
    let pa = [pr(&a[0]), pr(&a[1]), pr(&a[2])];
    let pb = [pr(&b[0]), pr(&b[1]), pr(&b[2])];
    for i in 0..3 {
        for j in 0..3 {
            if segments_2d(pa[i], pa[(i + 1) % 3], pb[j], pb[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_tri_2d(pa[0], &pb) || point_in_tri_2d(pb[0], &pa)
}

fn coplanar_segment_tri(p: &Vec3, q: &Vec3, t: &Tri) -> bool {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let pr = project(&n);
    let pt = [pr(&t[0]), pr(&t[1]), pr(&t[2])];
    let (pp, pq) = (pr(p), pr(q));
    if point_in_tri_2d(pp, &pt) || point_in_tri_2d(pq, &pt) {
        return true;
    }
    (0..3).any(|i| segments_2d(pp, pq, pt[i], pt[(i + 1) % 3]))
}

/// Closed segment vs closed triangle.
pub fn segment_triangle(p: &Vec3, q: &Vec3, t: &Tri) -> bool {
    let (sp, sq) = (sign(o3(&t[0], &t[1], &t[2], p)), sign(o3(&t[0], &t[1], &t[2], q)));
    if sp == 0 && sq == 0 {
        return coplanar_segment_tri(p, q, t);
    }
    if sp * sq > 0 {
        return false;
    }
    let s = [
        sign(o3(p, q, &t[0], &t[1])),
        sign(o3(p, q, &t[1], &t[2])),
        sign(o3(p, q, &t[2], &t[0])),
    ];
    !(s.contains(&1) && s.contains(&-1))
}

pub fn triangles_intersect(a: &Tri, b: &Tri) -> bool {
    let sb: Vec<i8> = b.iter().map(|q| sign(o3(&a[0], &a[1], &a[2], q))).collect();
    if sb.iter().all(|&s| s > 0) || sb.iter().all(|&s| s < 0) {
        return false;
    }
    let sa: Vec<i8> = a.iter().map(|p| sign(o3(&b[0], &b[1], &b[2], p))).collect();
    if sa.iter().all(|&s| s > 0) || sa.iter().all(|&s| s < 0) {
        return false;
    }
    if sb.iter().all(|&s| s == 0) && sa.iter().all(|&s| s == 0) {
        return coplanar_tris(a, b);
    }
    (0..3).any(|i| segment_triangle(&a[i], &a[(i + 1) % 3], b))
        || (0..3).any(|i| segment_triangle(&b[i], &b[(i + 1) % 3], a))
}

/// Point of triangle `t` nearest to `p`.
pub fn closest_point(p: &Vec3, t: &Tri) -> Vec3 {
    let [a, b, c] = t;
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // degenerate triangle
        return [*a, *b, *c].into_iter().min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm())).unwrap();
    }
    a + ab * (vb / denom) + ac * (vc / denom)
}
