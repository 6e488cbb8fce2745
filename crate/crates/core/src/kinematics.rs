//! Constant-curvature backbone of the bending module, the law-of-cosines
//! angle recovery, and rasterisation of the module silhouette.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::vision::{BinaryImage, CameraIntrinsics};

/// Slack allowed on the arccos argument before a triangle is rejected.
pub const COSINE_CLAMP_TOLERANCE: f64 = 1e-9;

/// Dimensions of the soft bending module (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleGeometry {
    pub length_mm: f64,
    pub width_mm: f64,
    pub cap_thickness_mm: f64,
    pub upper_thickness_mm: f64,
    pub bottom_thickness_mm: f64,
    pub inner_radius_mm: f64,
}

impl Default for ModuleGeometry {
    fn default() -> Self {
        Self {
            length_mm: 175.1,
            width_mm: 20.5,
            cap_thickness_mm: 2.0,
            upper_thickness_mm: 3.25,
            bottom_thickness_mm: 4.1,
            inner_radius_mm: 7.0,
        }
    }
}

impl ModuleGeometry {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("length_mm", self.length_mm),
            ("width_mm", self.width_mm),
            ("cap_thickness_mm", self.cap_thickness_mm),
            ("upper_thickness_mm", self.upper_thickness_mm),
            ("bottom_thickness_mm", self.bottom_thickness_mm),
            ("inner_radius_mm", self.inner_radius_mm),
        ];
        for (name, v) in dims {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "geometry.{name} must be positive, got {v}"
                )));
            }
        }
        if self.upper_thickness_mm + self.inner_radius_mm > self.width_mm {
            return Err(Error::InvalidParameter(format!(
                "cross-section does not fit: upper_thickness_mm + inner_radius_mm = {} > width_mm = {}",
                self.upper_thickness_mm + self.inner_radius_mm,
                self.width_mm
            )));
        }
        Ok(())
    }
}

/// Backbone of the module sampled in the XZ plane.
///
/// The module bends toward the counter-clockwise normal of `base_tangent`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackbonePose {
    pub bend_angle_deg: f64,
    pub base_point: Vec2,
    pub base_tangent: Vec2,
    pub arc_points: Vec<Vec2>,
}

impl BackbonePose {
    pub fn tip(&self) -> Vec2 {
        *self.arc_points.last().expect("pose always has at least two samples")
    }

    /// Length of the sampled polyline.
    pub fn polyline_length(&self) -> f64 {
        self.arc_points
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .sum()
    }
}

/// Base `B`, tip `T` and auxiliary point `P` on the base tangent, with
/// `a = |PT|`, `b = |BP|`, `c = |BT|` in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrianglePoints {
    pub base: Vec2,
    pub tip: Vec2,
    pub aux: Vec2,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Set when the three points are (numerically) collinear or coincident.
    pub degenerate: bool,
}

impl TrianglePoints {
    pub fn new(base: Vec2, tip: Vec2, aux: Vec2) -> Self {
        let a = aux.distance(tip);
        let b = base.distance(aux);
        let c = base.distance(tip);
        let scale = a.max(b).max(c);
        let twice_area = (aux - base).cross(tip - base).abs();
        let degenerate = b <= 0.0 || c <= 0.0 || twice_area <= 1e-12 * scale * scale;
        Self { base, tip, aux, a, b, c, degenerate }
    }
}

/// Result of reducing a triangle to a module bend angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BendAngle {
    pub degrees: f64,
    pub degenerate: bool,
}

/// Angle opposite side `a` in a triangle with sides `a`, `b`, `c`, in degrees.
pub fn law_of_cosines_angle(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(b > 0.0) || !(c > 0.0) || !b.is_finite() || !c.is_finite() {
        return Err(Error::Domain(format!(
            "sides adjacent to the angle must be positive, got b={b}, c={c}"
        )));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("opposite side must be non-negative, got a={a}")));
    }
    let cosine = (b * b + c * c - a * a) / (2.0 * b * c);
    if cosine.abs() > 1.0 + COSINE_CLAMP_TOLERANCE {
        return Err(Error::DegenerateTriangle(format!(
            "sides ({a}, {b}, {c}) violate the triangle inequality (cos = {cosine})"
        )));
    }
    // Half-angle form: tan(A/2)² = (a−b+c)(a+b−c) / ((a+b+c)(b+c−a)), which
    // stays accurate near 0° and 180° where acos loses half its digits.
    let num = ((a - b + c).max(0.0) * (a + b - c).max(0.0)).sqrt();
    let den = ((a + b + c) * (b + c - a).max(0.0)).sqrt();
    Ok((2.0 * num.atan2(den)).to_degrees())
}

/// Samples a constant-curvature arc of length `geom.length_mm` starting at the
/// origin along +X and bending toward +Z.
pub fn backbone_from_angle(
    geom: &ModuleGeometry,
    bend_angle_deg: f64,
    samples: usize,
) -> Result<BackbonePose> {
    backbone_in_frame(geom, bend_angle_deg, samples, Vec2::ZERO, Vec2::new(1.0, 0.0))
}

/// Same as [`backbone_from_angle`] with an arbitrary base point and tangent.
pub fn backbone_in_frame(
    geom: &ModuleGeometry,
    bend_angle_deg: f64,
    samples: usize,
    base_point: Vec2,
    base_tangent: Vec2,
) -> Result<BackbonePose> {
    if !(0.0..=180.0).contains(&bend_angle_deg) {
        return Err(Error::Domain(format!(
            "bend angle must lie in [0, 180] degrees, got {bend_angle_deg}"
        )));
    }
    if samples < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {samples}")));
    }
    let tangent = base_tangent
        .normalized()
        .ok_or_else(|| Error::Domain("base tangent must be non-zero".into()))?;
    let normal = tangent.perp();
    let length = geom.length_mm;
    let theta = bend_angle_deg.to_radians();

    let arc_points = (0..samples)
        .map(|i| {
            let s = length * i as f64 / (samples - 1) as f64;
            let (along, across) = arc_offset(length, theta, s);
            base_point + tangent * along + normal * across
        })
        .collect();

    Ok(BackbonePose { bend_angle_deg, base_point, base_tangent: tangent, arc_points })
}

/// Tangential and normal offset of the point at arc length `s` on an arc of
/// total length `length` and total turning `theta` radians.
fn arc_offset(length: f64, theta: f64, s: f64) -> (f64, f64) {
    if theta == 0.0 {
        return (s, 0.0);
    }
    let radius = length / theta;
    let phi = s / radius;
    (radius * phi.sin(), radius * (1.0 - phi.cos()))
}

/// Chord half-angle triangle: `B` at the base, `T` at the tip and `P` on the
/// base tangent at `aux_distance` from `B`.
pub fn triangle_from_backbone(pose: &BackbonePose, aux_distance: f64) -> Result<TrianglePoints> {
    if !(aux_distance > 0.0) || !aux_distance.is_finite() {
        return Err(Error::Domain(format!(
            "auxiliary distance must be positive, got {aux_distance}"
        )));
    }
    let base = pose.base_point;
    let tip = pose.tip();
    let span = pose.polyline_length().max(aux_distance);
    if base.distance(tip) <= 1e-12 * span {
        return Err(Error::DegenerateTriangle("tip coincides with base".into()));
    }
    let aux = base + pose.base_tangent * aux_distance;
    Ok(TrianglePoints::new(base, tip, aux))
}

/// Bend angle is twice the triangle angle at `B`: the chord of a circular arc
/// makes half the total turning angle with the tangent at its start.
pub fn bend_angle_from_triangle(tri: &TrianglePoints) -> BendAngle {
    let straight = BendAngle { degrees: 0.0, degenerate: true };
    if tri.degenerate {
        return straight;
    }
    match law_of_cosines_angle(tri.a, tri.b, tri.c) {
        Ok(at_base) => BendAngle { degrees: (2.0 * at_base).min(180.0), degenerate: false },
        Err(_) => straight,
    }
}

/// Whether `q` lies within `half_width` of the backbone arc of `pose`.
fn inside_body(q: Vec2, pose: &BackbonePose, length: f64, half_width: f64) -> bool {
    let theta = pose.bend_angle_deg.to_radians();
    let t = pose.base_tangent;
    let rel = q - pose.base_point;
    let along = rel.dot(t);
    let across = rel.dot(t.perp());
    let hw2 = half_width * half_width;
    if theta == 0.0 {
        let s = along.clamp(0.0, length);
        return (along - s).powi(2) + across * across <= hw2;
    }
    let radius = length / theta;
    let (ea, en) = arc_offset(length, theta, length);
    let near_ends = along * along + across * across <= hw2
        || (along - ea).powi(2) + (across - en).powi(2) <= hw2;
    if near_ends {
        return true;
    }
    let d2 = along * along + (across - radius).powi(2);
    let (inner, outer) = ((radius - half_width).max(0.0), radius + half_width);
    if d2 < inner * inner || d2 > outer * outer {
        return false;
    }
    // Polar angle of q about the arc centre, measured from the base point.
    let phi = along.atan2(radius - across);
    (0.0..=theta).contains(&phi)
}

/// Rasterises the module body (backbone dilated by half the module width) as
/// seen by `cam`. A pixel is foreground when its centre lies inside the body.
pub fn render_silhouette(
    pose: &BackbonePose,
    geom: &ModuleGeometry,
    cam: &CameraIntrinsics,
) -> Result<BinaryImage> {
    cam.validate()?;
    let half_width = geom.width_mm / 2.0;
    let length = geom.length_mm;

    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for p in arc_extent_points(pose, length) {
        let px = cam.mm_to_px(p);
        lo = Vec2::new(lo.x.min(px.x), lo.y.min(px.y));
        hi = Vec2::new(hi.x.max(px.x), hi.y.max(px.y));
    }
    let margin = half_width / cam.mm_per_px;
    let (x0, y0) = ((lo.x - margin).floor(), (lo.y - margin).floor());
    let (x1, y1) = ((hi.x + margin).ceil(), (hi.y + margin).ceil());
    if x0 < 0.0 || y0 < 0.0 || x1 > (cam.width_px - 1) as f64 || y1 > (cam.height_px - 1) as f64 {
        return Err(Error::OutOfView(format!(
            "module spans pixels x∈[{x0}, {x1}], y∈[{y0}, {y1}] but frame is {}x{}",
            cam.width_px, cam.height_px
        )));
    }

    let mut img = BinaryImage::empty(cam.width_px, cam.height_px)?;
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let q = cam.px_to_mm(Vec2::new(x as f64, y as f64));
            if inside_body(q, pose, length, half_width) {
                img.set(x, y, true);
            }
        }
    }
    Ok(img)
}

/// Points whose bounding box contains the whole backbone arc.
fn arc_extent_points(pose: &BackbonePose, length: f64) -> Vec<Vec2> {
    let theta = pose.bend_angle_deg.to_radians();
    let t = pose.base_tangent;
    let n = t.perp();
    let at = |s: f64| {
        let (a, c) = arc_offset(length, theta, s);
        pose.base_point + t * a + n * c
    };
    let mut pts = vec![at(0.0), at(length)];
    if theta > 0.0 {
        // Axis-aligned extremes of the circle that fall on the arc.
        let radius = length / theta;
        let centre = pose.base_point + n * radius;
        let start = (pose.base_point - centre).angle();
        for k in 0..4 {
            let target = k as f64 * PI / 2.0;
            let mut sweep = (target - start).rem_euclid(2.0 * PI);
            if sweep <= theta {
                sweep = sweep.max(0.0);
                pts.push(centre + Vec2::from_angle(start + sweep) * radius);
            }
        }
    }
    pts
}
