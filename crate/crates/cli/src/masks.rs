//! Per-view PNG dumps of the detector's candidate masks.

use std::path::Path;

use image::{Rgb, RgbImage};
use meshfim_core::detect::{backface_candidates, confirm_candidate, rasterize, DetectConfig, EMPTY};
use meshfim_core::mesh::{normalize_jointly, Mesh};
use meshfim_core::spatial::TriangleBvh;

use crate::error::CliError;

const BACKGROUND: Rgb<u8> = Rgb([0, 0, 0]);
const SURFACE: Rgb<u8> = Rgb([70, 70, 70]);
const CANDIDATE: Rgb<u8> = Rgb([200, 40, 40]);
const CONFIRMED: Rgb<u8> = Rgb([255, 255, 255]);

/// Writes `view_NNN.png` for every camera: covered pixels grey, back-face
/// candidates red, confirmed ones white. Returns the number of files.
pub fn write_masks(dir: &Path, mesh: &Mesh, reference: &Mesh, cfg: &DetectConfig) -> Result<usize, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    let (m, r, _) = normalize_jointly(mesh, reference)?;
    let bvh = TriangleBvh::new(&r);
    let side = cfg.resolution as u32;
    let cameras = cfg.cameras();
    for (k, cam) in cameras.iter().enumerate() {
        let g = rasterize(&m, cam);
        let mut img = RgbImage::from_pixel(side, side, BACKGROUND);
        for i in 0..g.face.len() {
            if g.face[i] != EMPTY {
                let (x, y) = g.pixel(i);
                img.put_pixel(x as u32, y as u32, SURFACE);
            }
        }
        for i in backface_candidates(&g, cam, cfg.eps_dot) {
            let (x, y) = g.pixel(i);
            let confirmed = confirm_candidate(&bvh, &r, cam, (x, y), cfg.eps_dot).is_some();
            img.put_pixel(x as u32, y as u32, if confirmed { CONFIRMED } else { CANDIDATE });
        }
        let path = dir.join(format!("view_{k:03}.png"));
        img.save(&path).map_err(|source| CliError::Image { path, source })?;
    }
    Ok(cameras.len())
}
