use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{BinaryImage, CameraIntrinsics, GrayImage};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kinematics::{
    bend_angle_from_triangle, law_of_cosines_angle, render_silhouette, BackbonePose,
    ModuleGeometry, TrianglePoints,
};

pub const DEFAULT_THRESHOLD: u8 = 128;
pub const FOREGROUND_LEVEL: u8 = 220;
pub const BACKGROUND_LEVEL: u8 = 30;
/// Components smaller than this are not taken to be the module.
pub const MIN_COMPONENT_PIXELS: usize = 50;
/// Triangles whose angle at the base is below this report a straight module.
pub const DEGENERATE_BASE_ANGLE_DEG: f64 = 0.5;

/// One bend-angle reading produced from a camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleMeasurement {
    pub angle_deg: f64,
    pub timestamp_s: f64,
    pub degenerate: bool,
    pub triangle: TrianglePoints,
}

/// Foreground iff intensity ≥ `level`.
pub fn threshold(img: &GrayImage, level: u8) -> BinaryImage {
    let pixels = img.pixels().iter().map(|&v| v >= level).collect();
    BinaryImage::new(img.width(), img.height(), pixels).expect("dimensions come from a valid image")
}

const NEIGHBOURS: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Keeps only the largest 8-connected foreground component. Ties go to the
/// component whose first pixel comes first in row-major order.
pub fn largest_component(img: &BinaryImage) -> Result<BinaryImage> {
    let (w, h) = (img.width(), img.height());
    let mut label = vec![0u32; w * h];
    let mut best = (0u32, 0usize);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !img.pixels()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if img.pixels()[j] && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    if best.1 == 0 {
        return Err(Error::NoModuleDetected("frame has no foreground pixels".into()));
    }
    let pixels = label.iter().map(|&l| l == best.0).collect();
    BinaryImage::new(w, h, pixels)
}

/// Foreground pixels of a single-component mask, cropped to their bounding
/// box plus a one-pixel background border.
struct Blob {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    mask: Vec<bool>,
}

impl Blob {
    fn from_image(img: &BinaryImage) -> Option<Self> {
        let width = img.width();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for (y, row) in img.pixels().chunks_exact(width).enumerate() {
            let Some(first) = row.iter().position(|&p| p) else { continue };
            let last = row.iter().rposition(|&p| p).unwrap_or(first);
            x0 = x0.min(first);
            x1 = x1.max(last);
            y0 = y0.min(y);
            y1 = y;
        }
        if x0 == usize::MAX {
            return None;
        }
        // Padding is virtual: the crop origin may sit one pixel off-frame.
        let (w, h) = (x1 - x0 + 3, y1 - y0 + 3);
        let mut mask = vec![false; w * h];
        for y in y0..=y1 {
            let src = &img.pixels()[y * width + x0..=y * width + x1];
            let dst = (y - y0 + 1) * w + 1;
            mask[dst..dst + src.len()].copy_from_slice(src);
        }
        Some(Self { x0, y0, w, h, mask })
    }

    /// Frame pixel coordinates of local index `i`.
    fn frame_point(&self, i: usize) -> Vec2 {
        Vec2::new(
            (i % self.w) as f64 + self.x0 as f64 - 1.0,
            (i / self.w) as f64 + self.y0 as f64 - 1.0,
        )
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest
/// background pixel (separable lower-envelope transform).
fn squared_distance_to_background(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    const FAR: f64 = 1e20;
    let mut grid: Vec<f64> = mask.iter().map(|&fg| if fg { FAR } else { 0.0 }).collect();
    let mut column = vec![0.0; h];
    let mut out = vec![0.0; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            column[y] = grid[y * w + x];
        }
        lower_envelope(&column, &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        row.copy_from_slice(&grid[y * w..(y + 1) * w]);
        lower_envelope(&row, &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

/// out[q] = min_p (f[p] + (q - p)^2)
fn lower_envelope(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let crossing = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = crossing(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = crossing(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Chamfer weights for axial and diagonal steps (7/5 ≈ √2).
const AXIAL_STEP: u32 = 5;
const DIAGONAL_STEP: u32 = 7;

/// Shortest in-mask path length from `source` in pixels, using 5-7 chamfer
/// steps and a bucket queue. Unreachable pixels are infinite.
fn geodesic_distances(mask: &[bool], w: usize, source: usize) -> Vec<f64> {
    let mut dist = vec![u32::MAX; mask.len()];
    let mut buckets: Vec<Vec<usize>> = vec![vec![source]];
    dist[source] = 0;
    let mut level = 0usize;
    while level < buckets.len() {
        let mut current = std::mem::take(&mut buckets[level]);
        for &index in &current {
            if dist[index] as usize != level {
                continue;
            }
            let (x, y) = ((index % w) as isize, (index / w) as isize);
            for (dx, dy) in NEIGHBOURS {
                // The crop always carries a background border, so neighbours
                // of foreground pixels are in range.
                let j = (y + dy) as usize * w + (x + dx) as usize;
                if !mask[j] {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { DIAGONAL_STEP } else { AXIAL_STEP };
                let nd = level as u32 + step;
                if nd < dist[j] {
                    dist[j] = nd;
                    let slot = nd as usize;
                    if slot >= buckets.len() {
                        buckets.resize_with(slot + 1, Vec::new);
                    }
                    buckets[slot].push(j);
                }
            }
        }
        current.clear();
        buckets[level] = current;
        level += 1;
    }
    dist.into_iter()
        .map(|d| if d == u32::MAX { f64::INFINITY } else { d as f64 / AXIAL_STEP as f64 })
        .collect()
}

/// Reduces a single-component module silhouette to base, tip and auxiliary
/// points (returned in millimeters).
///
/// * `B` is the foreground pixel nearest `base_hint`.
/// * `T` is found from the pixel geodesically farthest from `B`, pulled back
///   onto the medial ridge of the body.
/// * `P` lies on the base tangent of a circle fitted through `B` to the
///   medial ridge.
pub fn extract_corners(
    img: &BinaryImage,
    base_hint: Vec2,
    cam: &CameraIntrinsics,
) -> Result<TrianglePoints> {
    let blob = Blob::from_image(img)
        .ok_or_else(|| Error::NoModuleDetected("empty component".into()))?;
    let count = blob.mask.iter().filter(|&&p| p).count();
    if count < MIN_COMPONENT_PIXELS {
        return Err(Error::NoModuleDetected(format!(
            "component has {count} pixels, need at least {MIN_COMPONENT_PIXELS}"
        )));
    }
    let (w, h) = (blob.w, blob.h);
    let fg: Vec<usize> = (0..w * h).filter(|&i| blob.mask[i]).collect();

    let nearest = |target: Vec2, set: &mut dyn Iterator<Item = usize>| {
        set.min_by(|&i, &j| {
            let di = blob.frame_point(i).distance(target);
            let dj = blob.frame_point(j).distance(target);
            di.partial_cmp(&dj).unwrap_or(Ordering::Equal).then(i.cmp(&j))
        })
    };
    let base_idx = nearest(base_hint, &mut fg.iter().copied()).expect("blob is not empty");
    let base = blob.frame_point(base_idx);

    let edt: Vec<f64> = squared_distance_to_background(&blob.mask, w, h)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let half_width = fg.iter().map(|&i| edt[i]).fold(0.0, f64::max);
    let ridge_level = half_width - RIDGE_MARGIN_PX;
    let ridge: Vec<usize> = fg.iter().copied().filter(|&i| edt[i] >= ridge_level).collect();

    let backbone = fit_backbone(&blob, &ridge, base, half_width);

    // Tip: farthest pixel along the body, pulled back onto the ridge by the
    // depth of the inscribed end disk, then refined on the end cap.
    let geo = geodesic_distances(&blob.mask, w, base_idx);
    let far_idx = fg
        .iter()
        .copied()
        .filter(|&i| geo[i].is_finite())
        .max_by(|&i, &j| geo[i].partial_cmp(&geo[j]).unwrap_or(Ordering::Equal).then(j.cmp(&i)))
        .expect("base pixel is reachable from itself");
    let far = blob.frame_point(far_idx);
    let ridge_end = blob.frame_point(
        nearest(far, &mut ridge.iter().copied()).expect("ridge contains the widest pixel"),
    );
    let mut tip = match (far - ridge_end).normalized() {
        Some(outward) => far - outward * (half_width - edt[far_idx]).max(0.0),
        None => far,
    };
    for _ in 0..2 {
        let outward = backbone.travel_at(tip, base);
        match fit_end_cap(&blob, tip, outward, half_width) {
            Some(next) => tip = next,
            None => break,
        }
    }

    let aux = base + backbone.tangent * (AUX_DISTANCE_HALF_WIDTHS * half_width);

    Ok(TrianglePoints::new(cam.px_to_mm(base), cam.px_to_mm(tip), cam.px_to_mm(aux)))
}

/// Sub-pixel centre of the rounded end cap near `coarse`.
///
/// Boundary crossings are taken halfway between each foreground pixel and its
/// 4-connected background neighbours; those on the outer side of the cap are
/// fitted with an algebraic least-squares circle.
fn fit_end_cap(blob: &Blob, coarse: Vec2, outward: Vec2, half_width: f64) -> Option<Vec2> {
    let reach = half_width + 3.0;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sz, mut sxz, mut syz, mut n) = (0.0, 0.0, 0.0, 0usize);
    let w = blob.w;
    let local = coarse - blob.frame_point(0);
    let span = |c: f64, len: usize| {
        let lo = (c - reach).floor().max(1.0) as usize;
        let hi = ((c + reach).ceil().max(0.0) as usize).min(len - 2);
        lo..=hi
    };
    for y in span(local.y, blob.h) {
        for x in span(local.x, w) {
            let i = y * w + x;
            if !blob.mask[i] {
                continue;
            }
            let p = blob.frame_point(i);
            let rel = p - coarse;
            if rel.norm() > reach || rel.dot(outward) < 0.5 * half_width {
                continue;
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                if blob.mask[j] {
                    continue;
                }
                // Centre the sums on the coarse estimate for conditioning.
                let q = rel + Vec2::new(dx as f64, dy as f64) * 0.5;
                let z = q.x * q.x + q.y * q.y;
                sx += q.x;
                sy += q.y;
                sxx += q.x * q.x;
                syy += q.y * q.y;
                sxy += q.x * q.y;
                sz += z;
                sxz += q.x * z;
                syz += q.y * z;
                n += 1;
            }
        }
    }
    if n < 8 {
        return None;
    }
    // Solve for (D, E, F) in x² + y² + D x + E y + F = 0.
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n as f64]];
    let rhs = [-sxz, -syz, -sz];
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let det = det3(m);
    if det.abs() < 1e-9 {
        return None;
    }
    let column = |c: usize| {
        let mut a = m;
        for r in 0..3 {
            a[r][c] = rhs[r];
        }
        det3(a) / det
    };
    let centre = Vec2::new(-column(0) / 2.0, -column(1) / 2.0);
    // Reject fits that wander off the coarse estimate.
    (centre.norm() <= 0.5 * half_width).then(|| coarse + centre)
}

/// Ridge = pixels within this many pixels of the widest inscribed radius.
const RIDGE_MARGIN_PX: f64 = 1.5;
/// Distance (in body half-widths) of the auxiliary point from the base.
const AUX_DISTANCE_HALF_WIDTHS: f64 = 4.0;

/// Unit tangent of the backbone at `base` in frame pixel coordinates.
///
/// The ridge traces the backbone, a circular arc through `base`. Relative to
/// the base every such arc satisfies `A·|q|² + n·q = 0` with `|n| = 1`, and
/// the straight body is the limit `A = 0`; `n` is the normal at the base. For
/// fixed `n` the best `A` is closed-form, which leaves a 2×2 eigenproblem.
fn fit_backbone(blob: &Blob, ridge: &[usize], base: Vec2, half_width: f64) -> BackboneFit {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut vx, mut vy, mut s4) = (0.0, 0.0, 0.0);
    let mut mean = Vec2::ZERO;
    for &i in ridge {
        let q = blob.frame_point(i) - base;
        let r2 = q.dot(q);
        if r2 < half_width * half_width {
            continue;
        }
        sxx += q.x * q.x;
        sxy += q.x * q.y;
        syy += q.y * q.y;
        vx += r2 * q.x;
        vy += r2 * q.y;
        s4 += r2 * r2;
        mean = mean + q;
    }
    if s4 == 0.0 {
        return BackboneFit { tangent: Vec2::new(1.0, 0.0), centre: None };
    }
    let (a, b, c) = (sxx - vx * vx / s4, sxy - vx * vy / s4, syy - vy * vy / s4);
    // Eigenvector of [[a, b], [b, c]] for the smaller eigenvalue.
    let smaller = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
    let normal = if b.abs() > 1e-12 * (a.abs() + c.abs()) {
        Vec2::new(b, smaller - a)
    } else if a <= c {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(0.0, 1.0)
    };
    let normal = normal.normalized().unwrap_or(Vec2::new(0.0, 1.0));
    let tangent = if normal.perp().dot(mean) < 0.0 { -normal.perp() } else { normal.perp() };
    let curvature_term = -(vx * normal.x + vy * normal.y) / s4;
    let centre = (curvature_term.abs() > 1e-9).then(|| base - normal * (0.5 / curvature_term));
    BackboneFit { tangent, centre }
}

/// Base tangent and, for a visibly curved body, the centre of the backbone
/// circle (frame pixels).
struct BackboneFit {
    tangent: Vec2,
    centre: Option<Vec2>,
}

impl BackboneFit {
    /// Direction of travel along the backbone at a point near the arc.
    fn travel_at(&self, p: Vec2, base: Vec2) -> Vec2 {
        let Some(c) = self.centre else { return self.tangent };
        let at_base = (base - c).perp();
        let sign = if at_base.dot(self.tangent) >= 0.0 { 1.0 } else { -1.0 };
        ((p - c).perp() * sign).normalized().unwrap_or(self.tangent)
    }
}

/// threshold → largest component → corners → bend angle.
pub fn estimate_angle(
    frame: &GrayImage,
    cam: &CameraIntrinsics,
    level: u8,
    base_hint: Vec2,
    timestamp_s: f64,
) -> Result<AngleMeasurement> {
    let binary = threshold(frame, level);
    let module = largest_component(&binary)?;
    let triangle = extract_corners(&module, base_hint, cam)?;
    let bend = bend_angle_from_triangle(&triangle);
    let at_base = if bend.degenerate {
        0.0
    } else {
        law_of_cosines_angle(triangle.a, triangle.b, triangle.c).unwrap_or(0.0)
    };
    let degenerate = bend.degenerate || at_base < DEGENERATE_BASE_ANGLE_DEG;
    Ok(AngleMeasurement {
        angle_deg: if degenerate { 0.0 } else { bend.degrees.clamp(0.0, 180.0) },
        timestamp_s,
        degenerate,
        triangle,
    })
}

/// Synthetic camera frame: the rendered silhouette painted on a dark
/// background.
pub fn render_frame(
    pose: &BackbonePose,
    geom: &ModuleGeometry,
    cam: &CameraIntrinsics,
) -> Result<GrayImage> {
    Ok(render_silhouette(pose, geom, cam)?.to_gray(FOREGROUND_LEVEL, BACKGROUND_LEVEL))
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma` to every
/// pixel, saturating at 0 and 255.
pub fn add_gaussian_noise<R: Rng + ?Sized>(img: &mut GrayImage, sigma: f64, rng: &mut R) {
    if !(sigma > 0.0) {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for p in img.pixels_mut() {
        let v = *p as f64 + normal.sample(rng);
        *p = v.round().clamp(0.0, 255.0) as u8;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::backbone_from_angle;

    fn blob_image(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> BinaryImage {
        let mut img = BinaryImage::empty(w, h).unwrap();
        for &(x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    #[test]
    fn threshold_uniform_and_split() {
        let bright = GrayImage::filled(20, 20, 200).unwrap();
        assert_eq!(threshold(&bright, 128).count(), 400);
        let dark = GrayImage::filled(20, 20, 0).unwrap();
        assert_eq!(threshold(&dark, 1).count(), 0);

        let mut half = GrayImage::filled(20, 20, 40).unwrap();
        for y in 0..20 {
            for x in 10..20 {
                half.set(x, y, 180);
            }
        }
        let bin = threshold(&half, 100);
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(bin.get(x, y), x >= 10);
            }
        }
    }

    #[test]
    fn largest_component_selection() {
        let single = blob_image(32, 32, &[(2, 2, 12, 12)]);
        assert_eq!(largest_component(&single).unwrap(), single);

        let two = blob_image(40, 40, &[(2, 2, 12, 12), (30, 30, 35, 31)]);
        let kept = largest_component(&two).unwrap();
        assert_eq!(kept.count(), 100);
        assert!(!kept.get(31, 30));

        let empty = BinaryImage::empty(16, 16).unwrap();
        assert!(matches!(largest_component(&empty), Err(Error::NoModuleDetected(_))));
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let mut img = BinaryImage::empty(16, 16).unwrap();
        for i in 0..10 {
            img.set(i, i, true);
        }
        img.set(14, 1, true);
        assert_eq!(largest_component(&img).unwrap().count(), 10);
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let img = blob_image(24, 20, &[(3, 3, 15, 10), (8, 9, 20, 17)]);
        let blob = Blob::from_image(&img).unwrap();
        let fast = squared_distance_to_background(&blob.mask, blob.w, blob.h);
        for i in 0..blob.mask.len() {
            let (x, y) = ((i % blob.w) as f64, (i / blob.w) as f64);
            let brute = (0..blob.mask.len())
                .filter(|&j| !blob.mask[j])
                .map(|j| {
                    let (bx, by) = ((j % blob.w) as f64, (j / blob.w) as f64);
                    (x - bx).powi(2) + (y - by).powi(2)
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(fast[i], brute, "pixel {i}");
        }
    }

    #[test]
    fn tiny_component_rejected() {
        let img = blob_image(32, 32, &[(4, 4, 10, 10)]);
        let cam = CameraIntrinsics::default();
        assert!(matches!(
            extract_corners(&img, Vec2::new(4.0, 4.0), &cam),
            Err(Error::NoModuleDetected(_))
        ));
    }

    #[test]
    fn straight_module_is_collinear() {
        let geom = ModuleGeometry::default();
        let cam = CameraIntrinsics::default();
        let img = render_silhouette(&backbone_from_angle(&geom, 0.0, 100).unwrap(), &geom, &cam)
            .unwrap();
        let tri = extract_corners(&img, cam.origin_px, &cam).unwrap();
        // Distance of T from the line BP, in pixels.
        let dir = (tri.aux - tri.base).normalized().unwrap();
        let off = (tri.tip - tri.base).cross(dir).abs() / cam.mm_per_px;
        assert!(off <= 1.0, "tip is {off} px off the base line");
    }

    #[test]
    fn noise_saturates() {
        let mut img = GrayImage::filled(16, 16, 250).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        add_gaussian_noise(&mut img, 50.0, &mut rng);
        assert!(img.pixels().iter().any(|&p| p == 255));
    }

    use rand::SeedableRng;
}
