//! Parametric sprite faces. Emotion drives eyebrow raise/angle and mouth
//! curvature; speech content drives the mouth-openness trajectory; identity
//! drives colors and proportions. Landmarks are the analytic positions of the
//! rendered features, so there is no detection step and stored landmarks are
//! exact.

use ndarray::Array3;

use crate::error::Result;
use crate::synth::EMOTION_COUNT;
use crate::vq::types::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpriteParams {
    /// Mouth-shape trajectory index m.
    pub content_id: u16,
    /// Emotion index p in 0..8.
    pub emotion_id: u8,
    pub identity_id: u8,
}

/// Derived render controls for one frame. Deterministic in
/// (content, emotion, identity, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderControls {
    /// Mouth openness in [0.05, 0.95], the speech-content channel.
    pub mouth_open: f32,
    /// Mouth corner curvature in [-1, 1], part of the emotion channel.
    pub mouth_curve: f32,
    /// Eyebrow slope in radians, emotion channel.
    pub brow_angle: f32,
    /// Eyebrow raise in pixels (32-scale), emotion channel. Large raises push
    /// the brows into the top token row of the 8x8 grid.
    pub brow_raise: f32,
    /// Eye openness multiplier.
    pub eye_open: f32,
}

/// Per-emotion control table: (brow_raise, brow_angle, mouth_curve,
/// eye_open). Three emotions (4, 5, 7) raise the brows far enough to cross
/// into pixel rows 0..4.
const EMOTIONS: [(f32, f32, f32, f32); EMOTION_COUNT] = [
    (0.0, 0.00, 0.05, 1.00),   // neutral
    (0.6, 0.18, 0.90, 1.00),   // happy
    (-0.6, -0.25, -0.70, 0.90), // sad
    (-1.6, -0.45, -0.50, 0.95), // angry
    (4.5, 0.10, 0.30, 1.25),   // surprised
    (3.8, -0.20, -0.35, 1.20), // fearful
    (-1.0, -0.35, -0.25, 0.85), // disgusted
    (2.8, 0.35, 0.45, 0.90),   // contempt
];

/// Identity table: (skin rgb, background rgb, face rx, face ry, eye spacing).
const IDENTITIES: [([f32; 3], [f32; 3], f32, f32, f32); 4] = [
    ([0.84, 0.68, 0.54], [0.13, 0.16, 0.24], 11.0, 12.5, 5.0),
    ([0.58, 0.44, 0.35], [0.10, 0.21, 0.13], 10.2, 13.0, 5.6),
    ([0.90, 0.76, 0.62], [0.22, 0.13, 0.18], 10.8, 12.0, 4.6),
    ([0.70, 0.52, 0.40], [0.16, 0.16, 0.16], 11.4, 12.8, 5.2),
];

/// Mouth-openness trajectory for content m at frame t of a T-frame clip.
/// Each m gets a distinct (frequency, phase) pair.
pub fn mouth_openness(content_id: u16, t: usize, t_total: usize) -> f32 {
    let freq = 1.0 + (content_id % 4) as f32;
    let phase = std::f32::consts::FRAC_PI_2 * ((content_id / 4) % 4) as f32;
    let arg = std::f32::consts::TAU * freq * t as f32 / t_total.max(1) as f32 + phase;
    0.5 + 0.45 * arg.sin()
}

pub fn render_controls(params: SpriteParams, t: usize, t_total: usize) -> RenderControls {
    let (brow_raise, brow_angle, mouth_curve, eye_open) =
        EMOTIONS[params.emotion_id as usize % EMOTION_COUNT];
    RenderControls {
        mouth_open: mouth_openness(params.content_id, t, t_total),
        mouth_curve,
        brow_angle,
        brow_raise,
        eye_open,
    }
}

struct FaceGeometry {
    s: f32, // scale relative to the 32x32 reference
    cx: f32,
    face_cy: f32,
    rx: f32,
    ry: f32,
    eye_dx: f32,
    eye_y: f32,
    brow_y: f32,
    mouth_y: f32,
    mouth_w: f32,
    skin: [f32; 3],
    bg: [f32; 3],
}

fn geometry(params: SpriteParams, size: usize) -> FaceGeometry {
    let (skin, bg, rx, ry, eye_dx) = IDENTITIES[params.identity_id as usize % IDENTITIES.len()];
    let s = size as f32 / 32.0;
    FaceGeometry {
        s,
        cx: 16.0 * s,
        face_cy: 17.0 * s,
        rx: rx * s,
        ry: ry * s,
        eye_dx: eye_dx * s,
        eye_y: 12.0 * s,
        brow_y: 8.0 * s,
        mouth_y: 21.5 * s,
        mouth_w: 4.6 * s,
        skin,
        bg,
    }
}

fn smoothstep(edge0: f32, edge1: f32, x: f32) -> f32 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Coverage of an ellipse at pixel (x, y): 1 inside, 0 outside, soft edge.
fn ellipse_cov(x: f32, y: f32, cx: f32, cy: f32, rx: f32, ry: f32) -> f32 {
    if rx <= 0.0 || ry <= 0.0 {
        return 0.0;
    }
    let u = (x - cx) / rx;
    let v = (y - cy) / ry;
    let r = (u * u + v * v).sqrt();
    // soften over roughly one pixel
    let edge = 0.8 / rx.min(ry);
    1.0 - smoothstep(1.0 - edge, 1.0 + edge, r)
}

/// Coverage of a thick segment from (x0,y0) to (x1,y1) with half-width hw.
fn segment_cov(x: f32, y: f32, x0: f32, y0: f32, x1: f32, y1: f32, hw: f32) -> f32 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0)
    };
    let (px, py) = (x0 + t * dx, y0 + t * dy);
    let dist = ((x - px) * (x - px) + (y - py) * (y - py)).sqrt();
    1.0 - smoothstep(hw - 0.5, hw + 0.5, dist)
}

fn blend(dst: &mut [f32; 3], src: [f32; 3], alpha: f32) {
    for c in 0..3 {
        dst[c] = dst[c] * (1.0 - alpha) + src[c] * alpha;
    }
}

/// Mouth coverage: an ellipse whose vertical center bends with curvature, so
/// positive curvature lifts the corners (a smile).
fn mouth_cov(x: f32, y: f32, g: &FaceGeometry, open: f32, curve: f32, scale: f32) -> f32 {
    let w = g.mouth_w * scale;
    let h = (0.6 + 3.2 * open) * g.s * scale;
    let u = (x - g.cx) / w;
    if u.abs() > 1.4 {
        return 0.0;
    }
    let bend = -curve * 2.2 * g.s * u * u;
    let cy = g.mouth_y + bend;
    ellipse_cov(x, y, g.cx, cy, w, h)
}

/// Render one frame and its 68 analytic landmarks.
pub fn render_frame(
    params: SpriteParams,
    t: usize,
    t_total: usize,
    size: usize,
) -> Result<(Frame, Vec<[f32; 2]>)> {
    let ctl = render_controls(params, t, t_total);
    let g = geometry(params, size);
    let brow_y = g.brow_y - ctl.brow_raise * g.s;

    let mut px = Array3::<f32>::zeros((size, size, 3));
    let lip = [0.62, 0.24, 0.26];
    let mouth_inner = [0.25, 0.08, 0.10];
    let eye_color = [0.08, 0.07, 0.10];
    let brow_color = [0.16, 0.11, 0.07];
    let nose_color = [
        g.skin[0] * 0.85,
        g.skin[1] * 0.82,
        g.skin[2] * 0.80,
    ];

    for i in 0..size {
        for j in 0..size {
            let (x, y) = (j as f32 + 0.5, i as f32 + 0.5);
            let mut color = g.bg;

            let face = ellipse_cov(x, y, g.cx, g.face_cy, g.rx, g.ry);
            blend(&mut color, g.skin, face);

            // eyes
            for side in [-1.0f32, 1.0] {
                let ex = g.cx + side * g.eye_dx;
                let cov = ellipse_cov(x, y, ex, g.eye_y, 1.9 * g.s, 1.1 * g.s * ctl.eye_open);
                blend(&mut color, eye_color, cov);
            }

            // brows: angled thick segments, mirrored so both inner ends share
            // the same height
            for side in [-1.0f32, 1.0] {
                let ex = g.cx + side * g.eye_dx;
                let half = 1.9 * g.s;
                let dy = half * ctl.brow_angle.tan();
                let (x0, y0) = (ex - half, brow_y + dy * side);
                let (x1, y1) = (ex + half, brow_y - dy * side);
                let cov = segment_cov(x, y, x0, y0, x1, y1, 0.7 * g.s);
                blend(&mut color, brow_color, cov);
            }

            // nose
            let cov = ellipse_cov(x, y, g.cx, 17.0 * g.s, 1.1 * g.s, 1.9 * g.s);
            blend(&mut color, nose_color, cov);

            // mouth: lips, then darker interior
            let cov = mouth_cov(x, y, &g, ctl.mouth_open, ctl.mouth_curve, 1.0);
            blend(&mut color, lip, cov);
            let cov = mouth_cov(x, y, &g, ctl.mouth_open, ctl.mouth_curve, 0.55);
            blend(&mut color, mouth_inner, cov);

            px[[i, j, 0]] = color[0];
            px[[i, j, 1]] = color[1];
            px[[i, j, 2]] = color[2];
        }
    }

    let landmarks = landmarks_for(&g, &ctl, brow_y);
    let frame = Frame::from_raw_clamped(px)?;
    Ok((frame, landmarks))
}

/// Analytic 68-point landmarks in the conventional grouping: 0..17 jaw,
/// 17..27 brows, 27..36 nose, 36..48 eyes, 48..68 mouth (48..60 outer,
/// 60..68 inner).
fn landmarks_for(g: &FaceGeometry, ctl: &RenderControls, brow_y: f32) -> Vec<[f32; 2]> {
    let mut pts = Vec::with_capacity(68);

    // jaw: 17 points along the lower face ellipse, left temple to right
    for i in 0..17 {
        let theta = std::f32::consts::PI * (0.95 - 0.90 * i as f32 / 16.0);
        let x = g.cx + g.rx * theta.cos();
        let y = g.face_cy + g.ry * theta.sin() * 0.8;
        pts.push([x, y]);
    }

    // brows: 5 points each, sloped by the brow angle
    for side in [-1.0f32, 1.0] {
        let ex = g.cx + side * g.eye_dx;
        let half = 1.9 * g.s;
        let dy = half * ctl.brow_angle.tan();
        for i in 0..5 {
            let u = -1.0 + 0.5 * i as f32; // -1..1
            let x = ex + u * half;
            let y = brow_y - dy * side * u;
            pts.push([x, y]);
        }
    }

    // nose bridge (4) and base (5)
    for i in 0..4 {
        pts.push([g.cx, (13.5 + 1.4 * i as f32) * g.s]);
    }
    for i in 0..5 {
        pts.push([g.cx + (-1.6 + 0.8 * i as f32) * g.s, 18.4 * g.s]);
    }

    // eyes: 6 points each, hexagon around the eye center
    for side in [-1.0f32, 1.0] {
        let ex = g.cx + side * g.eye_dx;
        let rx = 1.9 * g.s;
        let ry = 1.1 * g.s * ctl.eye_open;
        let angles = [180.0f32, 135.0, 45.0, 0.0, 315.0, 225.0];
        for a in angles {
            let r = a.to_radians();
            pts.push([ex + rx * r.cos(), g.eye_y - ry * r.sin()]);
        }
    }

    // mouth: 12 outer + 8 inner on the bent ellipse
    let mouth_pts = |scale: f32, count: usize| -> Vec<[f32; 2]> {
        let w = g.mouth_w * scale;
        let h = (0.6 + 3.2 * ctl.mouth_open) * g.s * scale;
        (0..count)
            .map(|i| {
                let a = std::f32::consts::TAU * i as f32 / count as f32;
                // start at the left corner (angle pi) and go over the top
                let ang = std::f32::consts::PI - a;
                let u = ang.cos();
                let bend = -ctl.mouth_curve * 2.2 * g.s * u * u;
                [g.cx + w * u, g.mouth_y + bend - h * ang.sin()]
            })
            .collect()
    };
    pts.extend(mouth_pts(1.0, 12));
    pts.extend(mouth_pts(0.55, 8));

    debug_assert_eq!(pts.len(), 68);
    pts
}

/// Render all frames and landmarks of a clip. Pixels and landmarks are pure
/// functions of (params, t); only the audio half of a clip consumes seeds.
pub fn render_clip_visuals(
    params: SpriteParams,
    t_total: usize,
    size: usize,
) -> Result<(Vec<Frame>, Vec<Vec<[f32; 2]>>)> {
    let mut frames = Vec::with_capacity(t_total);
    let mut landmarks = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let (f, l) = render_frame(params, t, t_total, size)?;
        frames.push(f);
        landmarks.push(l);
    }
    Ok((frames, landmarks))
}
