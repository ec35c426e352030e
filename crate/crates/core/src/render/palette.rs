//! Procedural colour table. Mirrors `docs/palette.md`.

pub type Rgb = [u8; 3];

/// Wall base colours, indexed by `Cell::variant`.
pub const WALLS: [Rgb; 4] = [[70, 78, 128], [52, 104, 120], [104, 72, 132], [78, 92, 106]];
pub const DOOR: Rgb = [212, 128, 40];
pub const DOOR_STRIPE: Rgb = [120, 64, 24];
pub const FLOOR: Rgb = [50, 54, 64];
pub const FLOOR_GOAL: Rgb = [40, 104, 64];
pub const FLOOR_SPAWN: Rgb = [58, 58, 84];
pub const LAUNCH_PAD: Rgb = [40, 200, 224];
pub const PIT: Rgb = [6, 6, 10];
pub const CEILING: Rgb = [22, 24, 38];
pub const FOG: Rgb = [12, 14, 26];

pub const APPLE: Rgb = [224, 44, 44];
pub const MELON: Rgb = [64, 204, 92];
pub const LEMON: Rgb = [244, 224, 48];
pub const GOAL: Rgb = [128, 255, 232];
pub const TRACER: Rgb = [255, 250, 184];
pub const VISOR: Rgb = [232, 240, 255];

/// Brightness multiplier for faces whose normal points north or south.
pub const NS_FACE_SHADE: f32 = 0.78;
/// Brightness multiplier for panel seams.
pub const SEAM_SHADE: f32 = 0.55;
/// Distance (world units) at which fog reaches its maximum.
pub const FOG_DISTANCE: f64 = 2500.0;
pub const FOG_MAX: f64 = 0.85;

#[inline]
pub fn scale(c: Rgb, k: f32) -> Rgb {
    [
        (c[0] as f32 * k).min(255.0) as u8,
        (c[1] as f32 * k).min(255.0) as u8,
        (c[2] as f32 * k).min(255.0) as u8,
    ]
}

/// Blend toward the fog colour by distance.
#[inline]
pub fn fog(c: Rgb, distance: f64) -> Rgb {
    let f = ((distance / FOG_DISTANCE).min(1.0) * FOG_MAX) as f32;
    let g = 1.0 - f;
    [
        (c[0] as f32 * g + FOG[0] as f32 * f) as u8,
        (c[1] as f32 * g + FOG[1] as f32 * f) as u8,
        (c[2] as f32 * g + FOG[2] as f32 * f) as u8,
    ]
}
