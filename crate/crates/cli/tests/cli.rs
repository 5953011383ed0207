use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsdeform::model::mesh_io::encode_obj;
use gsdeform::{load_gaussian_ply, save_gaussian_ply, synthetic, CageMesh, Vec3};
use tempfile::TempDir;

fn gsdeform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsdeform"))
        .args(args)
        .env_remove("GSD_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), stderr(o));
}

/// Exit code 2 with exactly one `error:` line on stderr.
fn assert_usage_error(o: &Output, needle: &str) {
    assert_eq!(o.status.code(), Some(2), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    assert!(lines[0].starts_with("error: "), "stderr: {err}");
    assert!(lines[0].contains(needle), "`{needle}` not in: {err}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn sphere_scene(&self) -> PathBuf {
        let p = self.path("sphere.ply");
        save_gaussian_ply(&synthetic::sphere_shell(1500, 1.0, 7), &p).unwrap();
        p
    }

    fn mesh(&self, name: &str, m: &CageMesh) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, encode_obj(m)).unwrap();
        p
    }
}

const SMALL_BUILD: &[&str] = &[
    "--voxel-res", "32", "--target-vertices", "60", "--image-width", "96", "--image-height", "96",
    "--num-rings", "4", "--cameras-per-ring", "8",
];

#[test]
fn build_cage_end_to_end_and_deterministic() {
    let fx = Fixture::new();
    let scene = fx.sphere_scene();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let cage = fx.path(&format!("cage{run}.obj"));
        let json = fx.path(&format!("report{run}.json"));
        let threads = if run == 0 { "1" } else { "0" };
        let mut args = vec!["build-cage", s(&scene), "-o", s(&cage), "--json", s(&json), "--threads", threads];
        args.extend_from_slice(SMALL_BUILD);
        let o = gsdeform(&args);
        assert_ok(&o);
        let out = stdout(&o);
        assert!(out.contains("components=1\n"), "{out}");
        assert!(out.contains("self_intersections=0\n"), "{out}");
        assert!(out.contains("closed=true\n"), "{out}");
        let cage_mesh = gsdeform::load_mesh(&cage).unwrap();
        assert!(cage_mesh.vertices.len() <= 60);
        let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
        assert_eq!(report["quality"]["components"], 1);
        outputs.push((std::fs::read(&cage).unwrap(), std::fs::read(&json).unwrap(), out));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn build_cage_debug_dumps() {
    let fx = Fixture::new();
    let scene = fx.sphere_scene();
    let dumps = fx.path("dumps");
    let cage = fx.path("cage.ply");
    let mut args = vec!["build-cage", s(&scene), "-o", s(&cage), "--dump-dir", s(&dumps)];
    args.extend_from_slice(SMALL_BUILD);
    assert_ok(&gsdeform(&args));
    assert!(gsdeform::load_mesh(&cage).unwrap().is_closed());
    for name in ["depth_000.pfm", "tsdf_depth_000.pfm", "tsdf.bin", "surface.vox", "interior.vox", "closed.vox", "raw_mesh.obj"] {
        assert!(dumps.join(name).exists(), "{name} missing");
    }
    let pfm = std::fs::read(dumps.join("depth_000.pfm")).unwrap();
    assert!(pfm.starts_with(b"Pf\n96 96\n-1.0\n"));
    assert_eq!(pfm.len(), 14 + 96 * 96 * 4);
}

#[test]
fn build_cage_errors() {
    let fx = Fixture::new();
    let missing = fx.path("nope.ply");
    let out = fx.path("c.obj");
    assert_usage_error(&gsdeform(&["build-cage", s(&missing), "-o", s(&out)]), "nope.ply");

    let scene = fx.sphere_scene();
    assert_usage_error(&gsdeform(&["build-cage", s(&scene), "-o", s(&out), "--voxel-res", "8"]), "at least 16");
    assert_usage_error(&gsdeform(&["build-cage", s(&scene), "-o", s(&out), "--voxel-res", "lots"]), "voxel-res");

    let cfg = fx.path("run.cfg");
    std::fs::write(&cfg, "voxel-res=32\nwarp-factor=9\n").unwrap();
    assert_usage_error(&gsdeform(&["build-cage", s(&scene), "-o", s(&out), "--config", s(&cfg)]), "warp-factor");

    assert_usage_error(&gsdeform(&["build-cage", s(&scene), "-o", s(&out), "--no-such-flag"]), "no-such-flag");
    assert_usage_error(&gsdeform(&["build-cage", s(&scene)]), "--output");
    assert!(!out.exists());
}

#[test]
fn config_file_and_env_threads() {
    let fx = Fixture::new();
    let scene = fx.sphere_scene();
    let cfg = fx.path("run.cfg");
    std::fs::write(&cfg, "# small run\nvoxel_res = 8\n").unwrap();
    let out = fx.path("c.obj");
    // the file value is rejected unless a flag overrides it
    assert_usage_error(&gsdeform(&["build-cage", s(&scene), "-o", s(&out), "--config", s(&cfg)]), "at least 16");
    let bad_env = Command::new(env!("CARGO_BIN_EXE_gsdeform"))
        .args(["metrics", s(&fx.mesh("cube.obj", &CageMesh::cube()))])
        .env("GSD_THREADS", "several")
        .output()
        .unwrap();
    assert_usage_error(&bad_env, "GSD_THREADS");
}

fn small_scene(fx: &Fixture) -> PathBuf {
    let p = fx.path("box.ply");
    let scene = synthetic::random_box(400, Vec3::repeat(-0.6), Vec3::repeat(0.6), (-4.0, -2.5), 11);
    save_gaussian_ply(&scene, &p).unwrap();
    p
}

#[test]
fn deform_identity() {
    let fx = Fixture::new();
    let scene = small_scene(&fx);
    let cage = fx.mesh("cage.obj", &CageMesh::icosphere(1.5, 1));
    let out = fx.path("out.ply");
    assert_ok(&gsdeform(&["deform", s(&scene), "-cs", s(&cage), "-cd", s(&cage), "-o", s(&out)]));
    let a = load_gaussian_ply(&scene).unwrap();
    let b = load_gaussian_ply(&out).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.gaussians.iter().zip(&b.gaussians) {
        assert!((x.mean - y.mean).norm() < 1e-5);
        assert!(x.covariance().relative_distance(&y.covariance()) < 1e-4);
    }
}

#[test]
fn deform_report_and_cache() {
    let fx = Fixture::new();
    let scene = small_scene(&fx);
    let rest = CageMesh::icosphere(1.5, 1);
    let moved = rest.map_vertices(|v| Vec3::new(v.x * 1.3, v.y + 0.2 * v.x * v.x, v.z));
    let cs = fx.mesh("rest.obj", &rest);
    let cd = fx.mesh("moved.obj", &moved);
    let cache = fx.path("scene.cache");
    let mut bytes = Vec::new();
    for run in 0..3 {
        let out = fx.path(&format!("out{run}.ply"));
        let mut args = vec!["deform", s(&scene), "--cage-source", s(&cs), "--cage-target", s(&cd), "-o", s(&out), "--report"];
        if run > 0 {
            args.extend_from_slice(&["--cache", s(&cache)]);
        }
        let o = gsdeform(&args);
        assert_ok(&o);
        let rep = stdout(&o);
        for key in ["preprocess_ms=", "deform_ms=", "splits=", "output_gaussians="] {
            assert!(rep.contains(key), "{key} missing in {rep}");
        }
        if run > 0 {
            assert!(cache.exists());
        }
        bytes.push(std::fs::read(&out).unwrap());
    }
    // uncached, cache-creating and cache-reading runs agree bit for bit
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);

    // a cache for another scene is rebuilt rather than trusted
    let other = fx.path("other.ply");
    save_gaussian_ply(&synthetic::random_box(50, Vec3::repeat(-0.5), Vec3::repeat(0.5), (-4.0, -3.0), 2), &other).unwrap();
    let out = fx.path("other_out.ply");
    assert_ok(&gsdeform(&["deform", s(&other), "-cs", s(&cs), "-cd", s(&cd), "-o", s(&out), "--cache", s(&cache)]));
    assert_eq!(load_gaussian_ply(&out).unwrap().len() >= 50, true);
}

#[test]
fn deform_errors() {
    let fx = Fixture::new();
    let scene = small_scene(&fx);
    let a = fx.mesh("a.obj", &CageMesh::icosphere(1.5, 1));
    let b = fx.mesh("b.obj", &CageMesh::icosphere(1.5, 2));
    let out = fx.path("o.ply");
    assert_usage_error(&gsdeform(&["deform", s(&scene), "-cs", s(&a), "-cd", s(&b), "-o", s(&out)]), "cage topology mismatch");
    let missing = fx.path("missing.obj");
    assert_usage_error(&gsdeform(&["deform", s(&scene), "-cs", s(&a), "-cd", s(&missing), "-o", s(&out)]), "missing.obj");
    assert_usage_error(&gsdeform(&["deform", s(&scene), "-cs", s(&a), "-cd", s(&a), "-o", s(&out), "--split-factor", "2"]), "split factor");
}

#[test]
fn metrics_command() {
    let fx = Fixture::new();
    let cube = fx.mesh("cube.obj", &CageMesh::cube());
    let o = gsdeform(&["metrics", s(&cube)]);
    assert_ok(&o);
    assert!(stdout(&o).contains("components=1\n"));
    assert!(stdout(&o).contains("self_intersections=0\n"));

    let two = CageMesh::cube().merged(&CageMesh::cube().translated(&Vec3::new(4.0, 0.0, 0.0)));
    let two = fx.mesh("two.obj", &two);
    let o = gsdeform(&["metrics", s(&two)]);
    assert_ok(&o);
    assert!(stdout(&o).contains("components=2\n"));

    let l = fx.mesh("l.obj", &synthetic::l_solid());
    let scene = fx.path("l.ply");
    save_gaussian_ply(&synthetic::mesh_surface(&synthetic::l_solid(), 300, 4), &scene).unwrap();
    let json = fx.path("m.json");
    let o = gsdeform(&["metrics", s(&l), "--scene", s(&scene), "--json", s(&json)]);
    assert_ok(&o);
    let out = stdout(&o);
    assert!(out.contains("negative_entry_fraction="), "{out}");
    assert!(out.contains("worst_negative="), "{out}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["mvc"]["sample_count"], 300);

    assert_usage_error(&gsdeform(&["metrics", s(&fx.path("gone.obj"))]), "gone.obj");
}

/// Binary little-endian surfel PLY with degree-0 colour.
fn surfel_ply(rows: &[[f32; 13]]) -> Vec<u8> {
    let names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "rot_0", "rot_1", "rot_2", "rot_3"];
    let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", rows.len());
    for n in names {
        out.push_str(&format!("property float {n}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for r in rows {
        for v in r {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

#[test]
fn convert_command() {
    let fx = Fixture::new();
    let input = fx.path("surfels.ply");
    let rows = [
        [0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 1.0, -2.0, -3.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 3.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0],
    ];
    std::fs::write(&input, surfel_ply(&rows)).unwrap();
    let out = fx.path("gaussians.ply");
    let o = gsdeform(&["convert", s(&input), "-o", s(&out)]);
    assert_ok(&o);
    assert!(stdout(&o).contains("gaussians=2"));
    let scene = load_gaussian_ply(&out).unwrap();
    assert_eq!(scene.len(), 2);
    let sc = scene.gaussians[0].scales();
    assert!((sc.x - (-2.0f64).exp()).abs() < 1e-6 && (sc.y - (-3.0f64).exp()).abs() < 1e-6);
    assert!(sc.z < sc.y);
    assert!((scene.gaussians[1].mean - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-6);
}

#[test]
fn help_and_version_succeed() {
    assert_ok(&gsdeform(&["--help"]));
    assert_ok(&gsdeform(&["--version"]));
    let o = gsdeform(&[]);
    assert_ne!(o.status.code(), Some(0));
}
