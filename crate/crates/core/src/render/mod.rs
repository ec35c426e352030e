//! Headless software raycaster.
//!
//! One DDA ray per column finds the nearest solid cell; walls are drawn as
//! vertical spans whose height falls off with the perpendicular distance, so
//! flat walls never bow. Floors and ceilings are flat-shaded planes with
//! distance fog. Entities are depth-tested billboards. Pitch is a vertical
//! shear of the view centre.
//!
//! Depth is written per pixel, in cell units: the perpendicular distance to
//! the wall, floor, ceiling, or sprite that produced the colour.

pub mod palette;
pub mod raycast;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::CellKind;
use crate::sim::{EntityKind, PickupKind, WorldState, CELL_SIZE, WALL_HEIGHT};

pub use raycast::{cast_ray, cast_ray_with, Face, RayHit};

use palette::Rgb;

/// Depth encoding saturates at this distance, in cells.
pub const DEPTH_MAX_CELLS: f32 = 30.0;
pub const MIN_DIMENSION: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("frame must be at least {MIN_DIMENSION}x{MIN_DIMENSION}, got {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("ray left the grid")]
    EscapedGrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov_h: f64,
}

impl Camera {
    pub const DEFAULT_FOV: f64 = std::f64::consts::FRAC_PI_2;

    /// The player's eye. Eye height is kept strictly between floor and
    /// ceiling so the plane projections stay defined while falling.
    pub fn for_player(world: &WorldState) -> Camera {
        let body = &world.player.body;
        let mut position = body.eye(&world.physics);
        position.z = position.z.clamp(1.0, WALL_HEIGHT - 1.0);
        Camera {
            position,
            yaw: body.yaw,
            pitch: body.pitch,
            fov_h: Self::DEFAULT_FOV,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
    depth: Vec<f32>,
}

impl FrameBuffer {
    pub fn new(width: usize, height: usize) -> Result<FrameBuffer, RenderError> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(RenderError::BadDimensions(width, height));
        }
        Ok(FrameBuffer {
            width,
            height,
            rgb: vec![0; width * height * 3],
            depth: vec![f32::INFINITY; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major, top row first, 3 bytes per pixel.
    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    /// Row-major perpendicular distance in cell units.
    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn depth_at(&self, x: usize, y: usize) -> f32 {
        self.depth[y * self.width + x]
    }

    #[inline]
    fn put(&mut self, idx: usize, c: Rgb, depth: f32) {
        self.rgb[idx * 3..idx * 3 + 3].copy_from_slice(&c);
        self.depth[idx] = depth;
    }
}

/// Geometry shared by the wall pass and the sprite pass.
struct View {
    width: usize,
    height: usize,
    focal: f64,
    tan_half: f64,
    horizon: f64,
    origin: DVec2,
    z_eye: f64,
    fwd: DVec2,
    right: DVec2,
}

impl View {
    fn new(camera: &Camera, width: usize, height: usize) -> View {
        let tan_half = (camera.fov_h * 0.5).tan();
        let focal = (width as f64 * 0.5) / tan_half;
        View {
            width,
            height,
            focal,
            tan_half,
            horizon: height as f64 * 0.5 + camera.pitch.tan() * focal,
            origin: camera.position.truncate(),
            z_eye: camera.position.z,
            fwd: DVec2::new(camera.yaw.cos(), camera.yaw.sin()),
            right: DVec2::new(-camera.yaw.sin(), camera.yaw.cos()),
        }
    }

    /// Un-normalised ray direction for column `x`; its forward component is 1,
    /// so ray parameters are perpendicular distances.
    fn column_dir(&self, x: usize) -> DVec2 {
        let cam_x = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * self.tan_half;
        self.fwd + self.right * cam_x
    }

    /// Screen offset above the horizon of the centre of row `y`.
    fn row_offset(&self, y: usize) -> f64 {
        self.horizon - (y as f64 + 0.5)
    }
}

struct ColumnHit {
    dir: DVec2,
    dist: f64,
    s_top: f64,
    s_bottom: f64,
    face: Face,
    u: f64,
    kind: CellKind,
    variant: u8,
}

/// Render the world from `camera` into a new frame.
pub fn render_frame(world: &WorldState, camera: &Camera, width: usize, height: usize) -> Result<FrameBuffer, RenderError> {
    let mut frame = FrameBuffer::new(width, height)?;
    render_into(world, camera, &mut frame);
    Ok(frame)
}

/// Render into an existing frame, reusing its buffers.
pub fn render_into(world: &WorldState, camera: &Camera, frame: &mut FrameBuffer) {
    let view = View::new(camera, frame.width, frame.height);
    let level = world.level();

    let columns: Vec<ColumnHit> = (0..view.width)
        .map(|x| {
            let dir = view.column_dir(x);
            let (dist, face, u, cell) = match cast_ray_with(level, view.origin, dir, |r, c| world.is_solid(r, c)) {
                Ok(hit) => (hit.distance.max(1e-3), hit.face, hit.u, Some(hit.cell)),
                Err(_) => (1e6, Face::West, 0.0, None),
            };
            let (kind, variant) = cell
                .map(|(r, c)| {
                    let cell = level.cell(r, c);
                    (cell.kind, cell.variant)
                })
                .unwrap_or((CellKind::Wall, 0));
            ColumnHit {
                dir,
                dist,
                s_top: (WALL_HEIGHT - view.z_eye) * view.focal / dist,
                s_bottom: -view.z_eye * view.focal / dist,
                face,
                u,
                kind,
                variant,
            }
        })
        .collect();

    for y in 0..view.height {
        let s = view.row_offset(y);
        // Plane distances for this row; only one of the two is used per pixel.
        let floor_d = if s < 0.0 { view.z_eye * view.focal / -s } else { f64::INFINITY };
        let ceil_d = if s > 0.0 { (WALL_HEIGHT - view.z_eye) * view.focal / s } else { f64::INFINITY };
        for (x, col) in columns.iter().enumerate() {
            let idx = y * view.width + x;
            if s <= col.s_top && s >= col.s_bottom {
                let z = view.z_eye + s * col.dist / view.focal;
                let c = wall_color(col, z);
                frame.put(idx, palette::fog(c, col.dist), (col.dist / CELL_SIZE) as f32);
            } else if s > col.s_top {
                frame.put(idx, palette::fog(palette::CEILING, ceil_d), (ceil_d / CELL_SIZE) as f32);
            } else {
                let p = view.origin + col.dir * floor_d;
                let c = floor_color(world, p);
                frame.put(idx, palette::fog(c, floor_d), (floor_d / CELL_SIZE) as f32);
            }
        }
    }

    draw_sprites(world, &view, frame);
}

fn wall_color(col: &ColumnHit, z: f64) -> Rgb {
    let seam = col.u < 0.03 || col.u > 0.97 || z.rem_euclid(100.0) < 3.0;
    let mut c = if col.kind.is_door() {
        if ((col.u * 8.0) as i32) % 2 == 0 {
            palette::DOOR
        } else {
            palette::DOOR_STRIPE
        }
    } else {
        palette::WALLS[(col.variant % 4) as usize]
    };
    if col.face.is_north_south() {
        c = palette::scale(c, palette::NS_FACE_SHADE);
    }
    if seam {
        c = palette::scale(c, palette::SEAM_SHADE);
    }
    c
}

fn floor_color(world: &WorldState, p: DVec2) -> Rgb {
    let level = world.level();
    let col = (p.x / CELL_SIZE).floor() as isize;
    let row = (p.y / CELL_SIZE).floor() as isize;
    match level.kind_at(row, col) {
        CellKind::Pit => palette::PIT,
        CellKind::LaunchPad => palette::LAUNCH_PAD,
        CellKind::Goal => palette::FLOOR_GOAL,
        CellKind::Spawn => palette::FLOOR_SPAWN,
        _ => palette::FLOOR,
    }
}

#[derive(Clone, Copy)]
enum SpriteStyle {
    Round(Rgb),
    Bot { color: Rgb, pattern: u8 },
    Tracer,
}

struct Sprite {
    base: DVec3,
    radius: f64,
    height: f64,
    style: SpriteStyle,
}

fn collect_sprites(world: &WorldState) -> Vec<Sprite> {
    let cfg = &world.physics;
    world
        .entities()
        .filter_map(|e| match &e.kind {
            EntityKind::Pickup(p) if p.active => {
                let color = match p.kind {
                    PickupKind::Apple => palette::APPLE,
                    PickupKind::Melon => palette::MELON,
                    PickupKind::Lemon => palette::LEMON,
                    PickupKind::Goal => palette::GOAL,
                };
                let height = if p.kind == PickupKind::Goal { 60.0 } else { 2.0 * e.radius };
                Some(Sprite {
                    base: p.position,
                    radius: e.radius,
                    height,
                    style: SpriteStyle::Round(color),
                })
            }
            EntityKind::Bot(b) if b.state.alive => Some(Sprite {
                base: b.body.position,
                radius: e.radius,
                height: b.body.height(cfg),
                style: SpriteStyle::Bot {
                    color: b.persona.color,
                    pattern: b.persona.texture_variant % 4,
                },
            }),
            EntityKind::Projectile(p) => Some(Sprite {
                base: p.position - DVec3::Z * 4.0,
                radius: 4.0,
                height: 8.0,
                style: SpriteStyle::Tracer,
            }),
            _ => None,
        })
        .collect()
}

fn draw_sprites(world: &WorldState, view: &View, frame: &mut FrameBuffer) {
    let mut sprites: Vec<(f64, Sprite)> = collect_sprites(world)
        .into_iter()
        .filter_map(|s| {
            let rel = s.base.truncate() - view.origin;
            let depth = rel.dot(view.fwd);
            (depth > 1.0).then_some((depth, s))
        })
        .collect();
    // Far to near; the depth test still decides each pixel.
    sprites.sort_by(|a, b| b.0.total_cmp(&a.0));

    let w = view.width as f64;
    let h = view.height as f64;
    for (depth, s) in sprites {
        let rel = s.base.truncate() - view.origin;
        let lateral = rel.dot(view.right);
        let sx = w * 0.5 + lateral * view.focal / depth;
        let half = s.radius * view.focal / depth;
        let s_top = (s.base.z + s.height - view.z_eye) * view.focal / depth;
        let s_bottom = (s.base.z - view.z_eye) * view.focal / depth;
        let y_top = view.horizon - s_top;
        let y_bottom = view.horizon - s_bottom;
        let x0 = (sx - half).floor().max(0.0) as usize;
        let x1 = ((sx + half).ceil().min(w)).max(0.0) as usize;
        let y0 = y_top.floor().max(0.0) as usize;
        let y1 = (y_bottom.ceil().min(h)).max(0.0) as usize;
        let depth_cells = (depth / CELL_SIZE) as f32;
        for y in y0..y1 {
            let cy = y as f64 + 0.5;
            if cy < y_top || cy > y_bottom {
                continue;
            }
            let fy = (cy - y_top) / (y_bottom - y_top);
            for x in x0..x1 {
                let cx = x as f64 + 0.5;
                let fx = (cx - (sx - half)) / (2.0 * half);
                if !(0.0..=1.0).contains(&fx) {
                    continue;
                }
                let idx = y * view.width + x;
                if depth_cells >= frame.depth[idx] {
                    continue;
                }
                if let Some(c) = sprite_texel(s.style, fx, fy) {
                    let c = match s.style {
                        SpriteStyle::Tracer => c,
                        _ => palette::fog(c, depth),
                    };
                    frame.put(idx, c, depth_cells);
                }
            }
        }
    }
}

/// Colour of a sprite at normalised coordinates (`fy` = 0 at the top), or
/// `None` where the sprite is transparent.
fn sprite_texel(style: SpriteStyle, fx: f64, fy: f64) -> Option<Rgb> {
    match style {
        SpriteStyle::Tracer => Some(palette::TRACER),
        SpriteStyle::Round(c) => {
            let dx = fx - 0.5;
            let dy = fy - 0.5;
            (dx * dx + dy * dy <= 0.25).then(|| if dx + dy < -0.25 { palette::scale(c, 1.3) } else { c })
        }
        SpriteStyle::Bot { color, pattern } => {
            let dx = (fx - 0.5).abs();
            // Rounded head on a straight torso.
            if fy < 0.2 && dx > 0.3 {
                return None;
            }
            if (0.1..0.2).contains(&fy) && (0.15..0.85).contains(&fx) {
                return Some(palette::VISOR);
            }
            let band = match pattern {
                0 => ((fy * 10.0) as i32) % 2 == 0,
                1 => ((fx * 6.0) as i32) % 2 == 0,
                2 => (((fx * 4.0) as i32) + ((fy * 6.0) as i32)) % 2 == 0,
                _ => true,
            };
            Some(if band { color } else { palette::scale(color, 0.6) })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelFormat {
    #[serde(rename = "rgb")]
    RgbInterlaced,
    #[serde(rename = "rgbd")]
    RgbdInterlaced,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::RgbInterlaced => 3,
            PixelFormat::RgbdInterlaced => 4,
        }
    }

    /// Short name used on the command line and in reports.
    pub fn short_name(self) -> &'static str {
        match self {
            PixelFormat::RgbInterlaced => "rgb",
            PixelFormat::RgbdInterlaced => "rgbd",
        }
    }

    pub fn from_short_name(s: &str) -> Option<PixelFormat> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Some(PixelFormat::RgbInterlaced),
            "rgbd" => Some(PixelFormat::RgbdInterlaced),
            _ => None,
        }
    }
}

/// Depth byte for a distance in cells: `round(255 * min(d, 30) / 30)`,
/// rounding halves up.
#[inline]
pub fn depth_byte(distance_cells: f32) -> u8 {
    let d = distance_cells.clamp(0.0, DEPTH_MAX_CELLS) as f64;
    // Non-negative, so truncation is floor.
    (255.0 * d / DEPTH_MAX_CELLS as f64 + 0.5) as u8
}

/// Pixel-interleaved bytes, `height x width x channels`.
pub fn encode_observation(frame: &FrameBuffer, format: PixelFormat) -> Vec<u8> {
    let mut out = Vec::new();
    encode_observation_into(frame, format, &mut out);
    out
}

pub fn encode_observation_into(frame: &FrameBuffer, format: PixelFormat, out: &mut Vec<u8>) {
    out.clear();
    match format {
        PixelFormat::RgbInterlaced => out.extend_from_slice(&frame.rgb),
        PixelFormat::RgbdInterlaced => {
            out.resize(frame.depth.len() * 4, 0);
            for ((dst, px), &d) in out.chunks_exact_mut(4).zip(frame.rgb.chunks_exact(3)).zip(&frame.depth) {
                dst[..3].copy_from_slice(px);
                dst[3] = depth_byte(d);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_text_level;
    use std::sync::Arc;

    fn room_world() -> WorldState {
        let mut level = parse_text_level(
            "*********\n\
             *       *\n\
             *       *\n\
             *   P   *\n\
             *       *\n\
             *       *\n\
             *********",
        )
        .unwrap();
        level.set_variants(|_, _| 0);
        let mut w = WorldState::new(Arc::new(level), (3, 4), 0);
        w.player.body.yaw = 0.0;
        w
    }

    #[test]
    fn rejects_tiny_frames() {
        let w = room_world();
        let cam = Camera::for_player(&w);
        assert_eq!(render_frame(&w, &cam, 7, 40), Err(RenderError::BadDimensions(7, 40)));
    }

    #[test]
    fn buffer_lengths() {
        let w = room_world();
        let f = render_frame(&w, &Camera::for_player(&w), 84, 84).unwrap();
        assert_eq!(f.rgb().len(), 21_168);
        assert_eq!(f.depth().len(), 7_056);
        assert!(f.depth().iter().all(|&d| d > 0.0 && d.is_finite()));
    }

    #[test]
    fn symmetric_room_renders_mirror_symmetric() {
        let w = room_world();
        let f = render_frame(&w, &Camera::for_player(&w), 64, 48).unwrap();
        for y in 0..48 {
            for x in 0..32 {
                assert_eq!(f.pixel(x, y), f.pixel(63 - x, y), "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn head_on_wall_columns_have_equal_height() {
        let w = room_world();
        let f = render_frame(&w, &Camera::for_player(&w), 64, 48).unwrap();
        // Centre columns all hit the east wall 350 units away.
        let horizon = 24;
        for x in 20..44 {
            assert_eq!(f.depth_at(x, horizon), 3.5);
        }
    }

    #[test]
    fn depth_byte_formula() {
        assert_eq!(depth_byte(30.0), 255);
        assert_eq!(depth_byte(45.0), 255);
        assert_eq!(depth_byte(15.0), 128);
        assert_eq!(depth_byte(0.0), 0);
    }

    #[test]
    fn rgbd_extends_rgb() {
        let w = room_world();
        let f = render_frame(&w, &Camera::for_player(&w), 32, 24).unwrap();
        let rgb = encode_observation(&f, PixelFormat::RgbInterlaced);
        let rgbd = encode_observation(&f, PixelFormat::RgbdInterlaced);
        assert_eq!(rgbd.len(), 32 * 24 * 4);
        let stripped: Vec<u8> = rgbd.chunks_exact(4).flat_map(|p| &p[..3]).copied().collect();
        assert_eq!(stripped, rgb);
    }

    #[test]
    fn full_size_rgb_buffer() {
        let w = room_world();
        let f = render_frame(&w, &Camera::for_player(&w), 320, 240).unwrap();
        assert_eq!(encode_observation(&f, PixelFormat::RgbInterlaced).len(), 230_400);
    }

    #[test]
    fn nearer_sprite_overwrites_depth() {
        let mut w = room_world();
        w.add_pickup(PickupKind::Melon, (3, 5));
        let f = render_frame(&w, &Camera::for_player(&w), 64, 48).unwrap();
        let d = f.depth_at(32, 47 - 14);
        // Sprite sits 100 units ahead; the wall is 350.
        assert!(d < 3.5);
    }
}
