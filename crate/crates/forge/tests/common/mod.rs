//! Synthetic fundus photos and dataset trees.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fundus_core::raster::{BinaryMask, Grid, RasterImage};
use fundus_forge::datasets::DatasetKind;
use fundus_forge::io::{write_mask, write_raster, Raster, RasterFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A photo with its vessel label and field of view.
pub struct Fundus {
    pub photo: RasterImage,
    pub vessels: BinaryMask,
    pub fov: BinaryMask,
}

#[derive(Debug, Clone, Copy)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (dx, dy) = (x as f64 - self.cx, y as f64 - self.cy);
        dx * dx + dy * dy <= self.r * self.r
    }

    /// Extent of the disk's pixels clipped to the frame: (x0, y0, width, height).
    pub fn clipped_extent(&self, w: usize, h: usize) -> (usize, usize, usize, usize) {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..h {
            for x in 0..w {
                if self.contains(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0, y0, x1 - x0 + 1, y1 - y0 + 1)
    }
}

/// Distance from `p` to segment `a`-`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * vx - p.0, a.1 + t * vy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Draws a reddish retina disk on a dark frame, with dark vessels radiating
/// from an off-centre disc and Gaussian noise of standard deviation `noise`.
pub fn fundus(w: usize, h: usize, disk: Disk, noise: f64, seed: u64) -> Fundus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = (disk.cx + disk.r * 0.3, disk.cy);
    type Segment = ((f64, f64), (f64, f64), f64);
    let segments: Vec<Segment> = (0..8)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 8.0 + rng.gen_range(-0.3..0.3);
            let len = disk.r * rng.gen_range(0.6..1.1);
            let end = (origin.0 + a.cos() * len, origin.1 + a.sin() * len);
            (origin, end, rng.gen_range(1.2..3.0))
        })
        .collect();
    let normal = Normal::new(0.0, noise.max(1e-9)).unwrap();
    let fov = Grid::from_fn(w, h, |x, y| disk.contains(x, y)).unwrap();
    let vessels = Grid::from_fn(w, h, |x, y| {
        fov[(x, y)]
            && segments
                .iter()
                .any(|&(a, b, width)| segment_distance((x as f64, y as f64), a, b) <= width)
    })
    .unwrap();
    let mut noisy = |v: f64| -> u8 {
        let n = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        (v + n).round().clamp(0.0, 255.0) as u8
    };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let px = if vessels[(x, y)] {
                [noisy(90.0), noisy(30.0), noisy(15.0)]
            } else if fov[(x, y)] {
                let (dx, dy) = (x as f64 - disk.cx, y as f64 - disk.cy);
                let shade = 1.0 - 0.35 * ((dx * dx + dy * dy).sqrt() / disk.r);
                [noisy(200.0 * shade), noisy(95.0 * shade), noisy(40.0 * shade)]
            } else {
                [noisy(4.0), noisy(3.0), noisy(3.0)]
            };
            data.push(px);
        }
    }
    Fundus {
        photo: Grid::from_vec(w, h, data).unwrap(),
        vessels,
        fov,
    }
}

/// A uniform disk of intensity `level` on a black canvas with Gaussian noise
/// (the same draw on all three channels), clamped to the byte range.
pub fn disk_photo(w: usize, h: usize, disk: Disk, level: f64, noise: f64, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    Grid::from_fn(w, h, |x, y| {
        let base = if disk.contains(x, y) { level } else { 0.0 };
        let v = (base + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
        [v, v, v]
    })
    .unwrap()
}

/// A centred fundus photo sized like the dataset's originals, scaled by `scale`.
pub fn dataset_photo(kind: DatasetKind, index: usize, scale: f64) -> Fundus {
    let (w, h, r) = match kind {
        DatasetKind::Drive => (565.0, 584.0, 270.0),
        DatasetKind::Stare => (700.0, 605.0, 310.0),
        DatasetKind::ChaseDb1 => (999.0, 960.0, 470.0),
    };
    let (w, h) = ((w * scale).round() as usize, (h * scale).round() as usize);
    let disk = Disk {
        cx: w as f64 / 2.0 + (index % 5) as f64 - 2.0,
        cy: h as f64 / 2.0 + (index % 3) as f64 - 1.0,
        r: r * scale,
    };
    fundus(w, h, disk, 3.0, 1000 + index as u64)
}

fn save_photo(path: &Path, photo: &RasterImage) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_raster(&Raster::Rgb(photo.clone()), path, RasterFormat::Png).unwrap();
}

fn save_mask(path: &Path, mask: &BinaryMask) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_mask(mask, path, RasterFormat::Png).unwrap();
}

/// Second observer: the first label with a few pixels dropped.
fn second_observer(label: &BinaryMask) -> BinaryMask {
    Grid::from_fn(label.width(), label.height(), |x, y| label[(x, y)] && (x * 7 + y * 3) % 11 != 0).unwrap()
}

/// Writes a complete, already converted dataset tree. `scale` shrinks the
/// photos for faster tests (1.0 = original sizes).
pub fn write_dataset(root: &Path, kind: DatasetKind, scale: f64) {
    for (i, (id, split)) in kind.expected_ids().into_iter().enumerate() {
        let f = dataset_photo(kind, i, scale);
        let second = second_observer(&f.vessels);
        match kind {
            DatasetKind::Drive => {
                let (dir, suffix) = match split {
                    fundus_forge::datasets::Split::Train => ("training", "training"),
                    fundus_forge::datasets::Split::Test => ("test", "test"),
                };
                save_photo(&root.join(format!("{dir}/images/{id}_{suffix}.png")), &f.photo);
                save_mask(&root.join(format!("{dir}/1st_manual/{id}_manual1.png")), &f.vessels);
                save_mask(&root.join(format!("{dir}/mask/{id}_{suffix}_mask.png")), &f.fov);
                if dir == "test" {
                    save_mask(&root.join(format!("{dir}/2nd_manual/{id}_manual2.png")), &second);
                }
            }
            DatasetKind::Stare => {
                save_photo(&root.join(format!("stare-images/{id}.png")), &f.photo);
                save_mask(&root.join(format!("labels-ah/{id}.ah.png")), &f.vessels);
                save_mask(&root.join(format!("labels-vk/{id}.vk.png")), &second);
            }
            DatasetKind::ChaseDb1 => {
                save_photo(&root.join(format!("{id}.png")), &f.photo);
                save_mask(&root.join(format!("{id}_1stHO.png")), &f.vessels);
                save_mask(&root.join(format!("{id}_2ndHO.png")), &second);
            }
        }
    }
}

/// Runs the CLI binary.
pub fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fundus-forge"))
        .args(args)
        .env_remove("FUNDUS_FORGE_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file below `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
