use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::ArgMatches;
use gsdeform::cage::{build_cage_with, opaque_means, Intermediates};
use gsdeform::deform::{deform_cached, precompute_cache, DeformCache};
use gsdeform::metrics::MetricsReport;
use gsdeform::model::dump::{encode_pfm, encode_tsdf, encode_voxels, write_bytes};
use gsdeform::model::mesh_io::encode_obj;
use gsdeform::{convert_2dgs_scene, load_gaussian_ply, load_mesh, load_surfel_ply, save_gaussian_ply, save_mesh, Error};

use crate::config::RunConfig;
use crate::CliError;

fn path<'a>(m: &'a ArgMatches, id: &str) -> Option<&'a Path> {
    m.get_one::<String>(id).map(Path::new)
}

fn required<'a>(m: &'a ArgMatches, id: &str) -> &'a Path {
    path(m, id).expect("required by the parser")
}

fn write_text(p: &Path, text: &str) -> Result<(), CliError> {
    write_bytes(p, text.as_bytes()).map_err(CliError::from)
}

fn dump(dir: &Path, it: &Intermediates) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    for (k, (raw, clean)) in it.depths.iter().zip(&it.clean_depths).enumerate() {
        write_bytes(dir.join(format!("depth_{k:03}.pfm")), &encode_pfm(raw))?;
        write_bytes(dir.join(format!("tsdf_depth_{k:03}.pfm")), &encode_pfm(clean))?;
    }
    write_bytes(dir.join("tsdf.bin"), &encode_tsdf(&it.tsdf))?;
    write_bytes(dir.join("surface.vox"), &encode_voxels(&it.surface))?;
    write_bytes(dir.join("interior.vox"), &encode_voxels(&it.interior))?;
    write_bytes(dir.join("closed.vox"), &encode_voxels(&it.closed))?;
    write_text(&dir.join("raw_mesh.obj"), &encode_obj(&it.raw_mesh))
}

pub fn build_cage(m: &ArgMatches, cfg: &RunConfig) -> Result<(), CliError> {
    let scene = load_gaussian_ply(required(m, "input"))?;
    let dump_dir = path(m, "dump-dir");
    let build = build_cage_with(&scene, &cfg.cage, dump_dir.is_some())?;
    save_mesh(&build.cage, required(m, "output"))?;
    if let (Some(dir), Some(it)) = (dump_dir, &build.intermediates) {
        dump(dir, it)?;
    }
    for (stage, ms) in &build.report.timings {
        log::info!("{stage}: {ms:.1} ms");
    }

    let points = opaque_means(&scene, cfg.cage.alpha_min);
    let metrics = MetricsReport::new(&build.cage, &points, true)?;
    let r = &build.report;
    let d = &r.decimation;
    let mut out = metrics.to_key_value();
    let _ = writeln!(out, "cameras={}", r.cameras);
    let _ = writeln!(out, "grid={}x{}x{}", r.grid_dims[0], r.grid_dims[1], r.grid_dims[2]);
    let _ = writeln!(out, "voxel_size={}", r.voxel_size);
    let _ = writeln!(out, "surface_voxels={}", r.surface_voxels);
    let _ = writeln!(out, "solid_voxels={}", r.solid_voxels);
    let _ = writeln!(out, "raw_vertices={}", r.raw_vertices);
    let _ = writeln!(out, "collapses={}", d.collapses);
    let _ = writeln!(out, "gradient_cycles={}", d.stage2_cycles);
    let _ = writeln!(out, "reached_target={}", d.reached_target);
    let _ = writeln!(out, "seed={}", cfg.seed);
    print!("{out}");
    if let Some(p) = path(m, "json") {
        write_text(p, &metrics.to_json())?;
    }
    Ok(())
}

/// Loads the cache at `p` when it matches the scene and source cage;
/// otherwise computes it and writes it back.
fn cached(
    p: &Path,
    scene: &gsdeform::GaussianScene,
    cage_s: &gsdeform::CageMesh,
    cfg: &RunConfig,
) -> Result<DeformCache, CliError> {
    let key = gsdeform::deform::cache_key(scene, cage_s, cfg.deform.hull_gate);
    if p.exists() {
        match DeformCache::load(p) {
            Ok(c) if c.key() == key => return Ok(c),
            Ok(_) => log::warn!("{}: cache belongs to another scene or cage, rebuilding", p.display()),
            Err(e) => log::warn!("{}: unreadable cache ({e}), rebuilding", p.display()),
        }
    }
    let c = precompute_cache(scene, cage_s, &cfg.deform)?;
    c.save(p)?;
    Ok(c)
}

pub fn deform(m: &ArgMatches, cfg: &RunConfig) -> Result<(), CliError> {
    let scene = load_gaussian_ply(required(m, "input"))?;
    let cage_s = load_mesh(required(m, "cage-source"))?;
    let cage_d = load_mesh(required(m, "cage-target"))?;
    if cage_s.vertices.len() != cage_d.vertices.len() || cage_s.faces != cage_d.faces {
        // checked before the (possibly long) precompute
        return Err(Error::TopologyMismatch(format!(
            "source cage has {} vertices and {} faces, target has {} and {}",
            cage_s.vertices.len(),
            cage_s.faces.len(),
            cage_d.vertices.len(),
            cage_d.faces.len()
        ))
        .into());
    }
    let start = Instant::now();
    let cache = match path(m, "cache") {
        Some(p) => cached(p, &scene, &cage_s, cfg)?,
        None => precompute_cache(&scene, &cage_s, &cfg.deform)?,
    };
    let preprocess_ms = start.elapsed().as_secs_f64() * 1e3;
    let (out, stats) = deform_cached(&scene, &cage_d, &cfg.deform, &cache)?;
    save_gaussian_ply(&out, required(m, "output"))?;
    if m.get_flag("report") {
        println!("preprocess_ms={preprocess_ms:.3}");
        println!("deform_ms={:.3}", stats.deform_ms);
        println!("splits={}", stats.splits);
        println!("input_gaussians={}", stats.input_gaussians);
        println!("admitted={}", stats.admitted);
        println!("output_gaussians={}", stats.output_gaussians);
    }
    Ok(())
}

pub fn metrics(m: &ArgMatches) -> Result<(), CliError> {
    let mesh = load_mesh(required(m, "input"))?;
    let points = match path(m, "scene") {
        Some(p) => load_gaussian_ply(p)?.means(),
        None => Vec::new(),
    };
    let with_mvc = !points.is_empty() && mesh.is_closed();
    if !points.is_empty() && !with_mvc {
        log::warn!("mesh is not closed; MVC statistics skipped");
    }
    let report = MetricsReport::new(&mesh, &points, with_mvc)?;
    print!("{}", report.to_key_value());
    if let Some(p) = path(m, "json") {
        write_text(p, &report.to_json())?;
    }
    Ok(())
}

pub fn convert(m: &ArgMatches) -> Result<(), CliError> {
    let surfels = load_surfel_ply(required(m, "input"))?;
    let scene = convert_2dgs_scene(&surfels)?;
    save_gaussian_ply(&scene, required(m, "output"))?;
    println!("gaussians={}", scene.len());
    Ok(())
}
