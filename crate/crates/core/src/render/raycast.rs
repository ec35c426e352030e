//! Grid DDA ray traversal.

use glam::DVec2;

use crate::level::{CellPos, LevelGrid};
use crate::sim::CELL_SIZE;

use super::RenderError;

/// Which side of the hit cell the ray struck.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    North,
    East,
    South,
    West,
}

impl Face {
    /// Faces whose normal points along the y axis.
    pub fn is_north_south(self) -> bool {
        matches!(self, Face::North | Face::South)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub cell: CellPos,
    /// Distance along the ray parameter, in world units of `|dir|`. For a unit
    /// direction this is the Euclidean distance to the hit point.
    pub distance: f64,
    pub face: Face,
    /// Fractional coordinate of the hit point along the face, in `[0, 1)`.
    pub u: f64,
}

impl RayHit {
    /// Fisheye-corrected distance for a ray cast at `angle` seen from a
    /// camera looking along `view_yaw`. Assumes a unit-direction cast.
    pub fn perpendicular(&self, angle: f64, view_yaw: f64) -> f64 {
        self.distance * (angle - view_yaw).cos()
    }
}

/// Cast a ray from `origin` (world units) at `angle`, treating every wall
/// and every door as solid.
pub fn cast_ray(level: &LevelGrid, origin: DVec2, angle: f64) -> Result<RayHit, RenderError> {
    cast_ray_with(level, origin, DVec2::new(angle.cos(), angle.sin()), |r, c| {
        let k = level.kind(r, c);
        k.is_wall() || k.is_door()
    })
}

/// Cast along an arbitrary (not necessarily unit) direction with a caller
/// supplied solidity test. The returned distance is the ray parameter `t`
/// scaled to world units, so the hit point is `origin + dir * distance`.
pub fn cast_ray_with(
    level: &LevelGrid,
    origin: DVec2,
    dir: DVec2,
    is_solid: impl Fn(usize, usize) -> bool,
) -> Result<RayHit, RenderError> {
    let pos = origin / CELL_SIZE;
    let mut map_x = pos.x.floor() as isize;
    let mut map_y = pos.y.floor() as isize;
    if !level.in_bounds(map_y, map_x) {
        return Err(RenderError::EscapedGrid);
    }
    if is_solid(map_y as usize, map_x as usize) {
        return Ok(RayHit {
            cell: (map_y as usize, map_x as usize),
            distance: 0.0,
            face: Face::West,
            u: 0.0,
        });
    }

    let delta_x = if dir.x == 0.0 { f64::INFINITY } else { (1.0 / dir.x).abs() };
    let delta_y = if dir.y == 0.0 { f64::INFINITY } else { (1.0 / dir.y).abs() };
    let (step_x, mut side_x) = if dir.x < 0.0 {
        (-1, (pos.x - map_x as f64) * delta_x)
    } else {
        (1, (map_x as f64 + 1.0 - pos.x) * delta_x)
    };
    let (step_y, mut side_y) = if dir.y < 0.0 {
        (-1, (pos.y - map_y as f64) * delta_y)
    } else {
        (1, (map_y as f64 + 1.0 - pos.y) * delta_y)
    };

    loop {
        let x_side = side_x < side_y;
        if x_side {
            map_x += step_x;
            side_x += delta_x;
        } else {
            map_y += step_y;
            side_y += delta_y;
        }
        if !level.in_bounds(map_y, map_x) {
            return Err(RenderError::EscapedGrid);
        }
        let (r, c) = (map_y as usize, map_x as usize);
        if is_solid(r, c) {
            let t = if x_side { side_x - delta_x } else { side_y - delta_y };
            let (face, along) = if x_side {
                let f = if step_x > 0 { Face::West } else { Face::East };
                (f, pos.y + t * dir.y)
            } else {
                let f = if step_y > 0 { Face::North } else { Face::South };
                (f, pos.x + t * dir.x)
            };
            return Ok(RayHit {
                cell: (r, c),
                distance: t * CELL_SIZE,
                face,
                u: along - along.floor(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_text_level;
    use std::f64::consts::FRAC_PI_4;

    fn room3() -> LevelGrid {
        parse_text_level("***\n*P*\n***").unwrap()
    }

    #[test]
    fn axis_aligned_half_cell() {
        let hit = cast_ray(&room3(), DVec2::new(150.0, 150.0), 0.0).unwrap();
        assert!((hit.distance - 50.0).abs() < 1e-9);
        assert_eq!(hit.cell, (1, 2));
        assert_eq!(hit.face, Face::West);
        assert!((hit.u - 0.5).abs() < 1e-9);
    }

    #[test]
    fn diagonal_perpendicular_distance() {
        let hit = cast_ray(&room3(), DVec2::new(150.0, 150.0), FRAC_PI_4).unwrap();
        assert!((hit.perpendicular(FRAC_PI_4, 0.0) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn faces_by_direction() {
        let level = room3();
        let o = DVec2::new(150.0, 150.0);
        let face = |a: f64| cast_ray(&level, o, a).unwrap().face;
        use std::f64::consts::PI;
        assert_eq!(face(0.0), Face::West);
        assert_eq!(face(PI), Face::East);
        assert_eq!(face(PI / 2.0), Face::North);
        assert_eq!(face(-PI / 2.0), Face::South);
    }

    #[test]
    fn doors_block_by_default_but_can_be_open() {
        let level = parse_text_level("*****\n*PI *\n*****").unwrap();
        let o = DVec2::new(150.0, 150.0);
        let closed = cast_ray(&level, o, 0.0).unwrap();
        assert!((closed.distance - 50.0).abs() < 1e-9);
        let open = cast_ray_with(&level, o, DVec2::X, |r, c| level.kind(r, c).is_wall()).unwrap();
        assert!((open.distance - 250.0).abs() < 1e-9);
    }
}
