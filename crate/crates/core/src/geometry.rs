//! T-junction layout, ego paths and oriented-rectangle overlap.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kinematics::{heading_dir, normalize_angle, VehicleState};

/// Vehicle body dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self { length: 4.5, width: 1.8 }
    }
}

/// Rectangle centered on a vehicle pose, long side along the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub theta: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, theta: f64, length: f64, width: f64) -> Self {
        Self {
            cx,
            cy,
            theta,
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    pub fn of_vehicle(state: &VehicleState, footprint: &Footprint) -> Self {
        Self::new(state.x, state.y, state.theta, footprint.length, footprint.width)
    }

    /// Axis-aligned rectangle from bounds.
    pub fn axis_aligned(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        // heading pi/2 puts the long axis along +x
        Self {
            cx: 0.5 * (min_x + max_x),
            cy: 0.5 * (min_y + max_y),
            theta: FRAC_PI_2,
            half_length: 0.5 * (max_x - min_x),
            half_width: 0.5 * (max_y - min_y),
        }
    }

    /// Unit vectors along the long and short axes.
    fn axes(&self) -> [(f64, f64); 2] {
        let (fx, fy) = heading_dir(self.theta);
        [(fx, fy), (fy, -fx)]
    }

    /// Corners in counter-clockwise order (front-left first).
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(fx, fy), (rx, ry)] = self.axes();
        let (l, w) = (self.half_length, self.half_width);
        let c = |sl: f64, sw: f64| (self.cx + sl * l * fx + sw * w * rx, self.cy + sl * l * fy + sw * w * ry);
        [c(1.0, -1.0), c(-1.0, -1.0), c(-1.0, 1.0), c(1.0, 1.0)]
    }

    /// Projection interval of the box, whose axes are `own`, onto a unit axis.
    fn project(&self, own: &[(f64, f64); 2], axis: (f64, f64)) -> (f64, f64) {
        let [(fx, fy), (rx, ry)] = *own;
        let center = self.cx * axis.0 + self.cy * axis.1;
        let radius = self.half_length * (fx * axis.0 + fy * axis.1).abs() + self.half_width * (rx * axis.0 + ry * axis.1).abs();
        (center - radius, center + radius)
    }

    /// Closed-set overlap test by the separating axis theorem: boxes that
    /// merely touch count as intersecting.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let dx = self.cx - other.cx;
        let dy = self.cy - other.cy;
        let radius = |b: &OrientedBox| libm::sqrt(b.half_length * b.half_length + b.half_width * b.half_width);
        let reach = radius(self) + radius(other);
        if dx * dx + dy * dy > reach * reach * (1.0 + 1e-12) {
            return false;
        }
        let (mine, theirs) = (self.axes(), other.axes());
        for axis in mine.into_iter().chain(theirs) {
            let (a0, a1) = self.project(&mine, axis);
            let (b0, b1) = other.project(&theirs, axis);
            if a1 < b0 - 1e-12 || b1 < a0 - 1e-12 {
                return false;
            }
        }
        true
    }
}

/// Ego maneuver at the junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Turn {
    Left,
    Right,
}

impl core::fmt::Display for Turn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Turn::Left => "left",
            Turn::Right => "right",
        })
    }
}

/// One of the two main-road lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Lane {
    /// Near lane (adjacent to the stem), flowing towards `+x`.
    Eastbound,
    /// Far lane, flowing towards `-x`.
    Westbound,
}

impl Lane {
    pub const ALL: [Lane; 2] = [Lane::Eastbound, Lane::Westbound];

    pub fn heading(self) -> f64 {
        match self {
            Lane::Eastbound => FRAC_PI_2,
            Lane::Westbound => -FRAC_PI_2,
        }
    }

    /// Sign of the travel direction along `x`.
    pub fn direction(self) -> f64 {
        match self {
            Lane::Eastbound => 1.0,
            Lane::Westbound => -1.0,
        }
    }
}

/// Geometry of the T-junction.
///
/// The main road runs along `x` and occupies `0 <= y <= 2 * lane_width`; the
/// eastbound lane is the near one. The stem comes from `-y`, the ego drives
/// north in its right lane (centered on `x = lane_width / 2`) and waits with
/// its center on the stop line.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntersectionLayout {
    pub lane_width: f64,
    /// Main road extends from `-road_half_length` to `+road_half_length`.
    pub road_half_length: f64,
    /// Distance from the stop line to the main-road edge.
    pub stop_line_offset: f64,
    pub right_turn_radius: f64,
    pub left_turn_radius: f64,
    /// Straight run on the target lane after the arc, before the goal.
    pub exit_length: f64,
    /// Waypoint spacing of the sampled paths.
    pub waypoint_spacing: f64,
}

impl Default for IntersectionLayout {
    fn default() -> Self {
        Self {
            lane_width: 4.0,
            road_half_length: 60.0,
            stop_line_offset: 4.0,
            right_turn_radius: 6.0,
            left_turn_radius: 10.0,
            exit_length: 4.0,
            waypoint_spacing: 1.0,
        }
    }
}

impl IntersectionLayout {
    pub fn lane_center_y(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Eastbound => 0.5 * self.lane_width,
            Lane::Westbound => 1.5 * self.lane_width,
        }
    }

    /// Lateral bounds `(min_y, max_y)` of a lane strip.
    pub fn lane_bounds(&self, lane: Lane) -> (f64, f64) {
        let c = self.lane_center_y(lane);
        (c - 0.5 * self.lane_width, c + 0.5 * self.lane_width)
    }

    pub fn lane_strip(&self, lane: Lane) -> OrientedBox {
        let (y0, y1) = self.lane_bounds(lane);
        OrientedBox::axis_aligned(-self.road_half_length, y0, self.road_half_length, y1)
    }

    /// The junction box where the stem meets the main road.
    pub fn conflict_zone(&self) -> OrientedBox {
        OrientedBox::axis_aligned(-self.lane_width, 0.0, self.lane_width, 2.0 * self.lane_width)
    }

    /// The part of a lane inside the junction box.
    pub fn lane_conflict_zone(&self, lane: Lane) -> OrientedBox {
        let (y0, y1) = self.lane_bounds(lane);
        OrientedBox::axis_aligned(-self.lane_width, y0, self.lane_width, y1)
    }

    pub fn main_road_edge_y(&self) -> f64 {
        0.0
    }

    pub fn ego_lane_x(&self) -> f64 {
        0.5 * self.lane_width
    }

    pub fn stop_line_y(&self) -> f64 {
        -self.stop_line_offset
    }

    /// Position along the lane (0 at the lane entry) for a world `x`.
    pub fn lane_coordinate(&self, lane: Lane, x: f64) -> f64 {
        lane.direction() * x + self.road_half_length
    }

    /// Pose of a vehicle at lane coordinate `s`.
    pub fn lane_pose(&self, lane: Lane, s: f64) -> (f64, f64, f64) {
        let x = lane.direction() * (s - self.road_half_length);
        (x, self.lane_center_y(lane), lane.heading())
    }

    pub fn target_lane(turn: Turn) -> Lane {
        match turn {
            Turn::Right => Lane::Eastbound,
            Turn::Left => Lane::Westbound,
        }
    }

    /// Which lane a point lies on, if any.
    pub fn lane_at(&self, x: f64, y: f64) -> Option<Lane> {
        if x.abs() > self.road_half_length {
            return None;
        }
        Lane::ALL.into_iter().find(|&lane| {
            let (y0, y1) = self.lane_bounds(lane);
            y >= y0 && y < y1
        })
    }

    pub fn path(&self, turn: Turn) -> PathSpec {
        PathSpec::turn(self, turn)
    }
}

/// Ego reference path: a polyline with cumulative arclength and the exact
/// tangent heading sampled at each waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub turn: Turn,
    points: Vec<(f64, f64)>,
    headings: Vec<f64>,
    arclength: Vec<f64>,
}

impl PathSpec {
    /// Quarter-circle from the stop line into the target lane, then a short
    /// straight run along the lane.
    pub fn turn(layout: &IntersectionLayout, turn: Turn) -> Self {
        let x0 = layout.ego_lane_x();
        let y0 = layout.stop_line_y();
        let (radius, side, target_lane) = match turn {
            Turn::Right => (layout.right_turn_radius, 1.0, Lane::Eastbound),
            Turn::Left => (layout.left_turn_radius, -1.0, Lane::Westbound),
        };
        debug_assert!((y0 + radius - layout.lane_center_y(target_lane)).abs() < 1e-9);
        let spacing = layout.waypoint_spacing.max(1e-3);

        let mut samples: Vec<(f64, f64, f64)> = Vec::new();
        let arc_len = 0.5 * PI * radius;
        let n_arc = libm::ceil(arc_len / spacing).max(1.0) as usize;
        let cx = x0 + side * radius;
        for i in 0..=n_arc {
            let phi = 0.5 * PI * i as f64 / n_arc as f64;
            let px = cx - side * radius * libm::cos(phi);
            let py = y0 + radius * libm::sin(phi);
            samples.push((px, py, side * phi));
        }
        let (ex, ey, eh) = *samples.last().unwrap();
        let n_exit = libm::ceil(layout.exit_length / spacing) as usize;
        for i in 1..=n_exit {
            let d = layout.exit_length * i as f64 / n_exit as f64;
            samples.push((ex + side * d, ey, eh));
        }
        Self::from_samples(turn, &samples)
    }

    /// Straight path; mostly for tests.
    pub fn straight(turn: Turn, start: (f64, f64), heading: f64, length: f64) -> Self {
        let (dx, dy) = heading_dir(heading);
        let samples = [(start.0, start.1, heading), (start.0 + dx * length, start.1 + dy * length, heading)];
        Self::from_samples(turn, &samples)
    }

    fn from_samples(turn: Turn, samples: &[(f64, f64, f64)]) -> Self {
        let mut points = Vec::with_capacity(samples.len());
        let mut headings = Vec::with_capacity(samples.len());
        let mut arclength = Vec::with_capacity(samples.len());
        let mut s = 0.0;
        for (i, &(x, y, h)) in samples.iter().enumerate() {
            if i > 0 {
                let (px, py) = points[i - 1];
                s += libm::hypot(x - px, y - py);
            }
            points.push((x, y));
            headings.push(normalize_angle(h));
            arclength.push(s);
        }
        Self {
            turn,
            points,
            headings,
            arclength,
        }
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap()
    }

    pub fn waypoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Position and heading at arclength `s`. Beyond the ends the path is
    /// extended along the terminal headings.
    pub fn pose_at(&self, s: f64) -> (f64, f64, f64) {
        let n = self.points.len();
        if s <= 0.0 {
            let (x, y) = self.points[0];
            let h = self.headings[0];
            let (dx, dy) = heading_dir(h);
            return (x + dx * s, y + dy * s, h);
        }
        let total = self.length();
        if s >= total {
            let (x, y) = self.points[n - 1];
            let h = self.headings[n - 1];
            let (dx, dy) = heading_dir(h);
            let extra = s - total;
            return (x + dx * extra, y + dy * extra, h);
        }
        let i = match self.arclength.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
            Ok(i) => return (self.points[i].0, self.points[i].1, self.headings[i]),
            Err(i) => i - 1,
        };
        let (s0, s1) = (self.arclength[i], self.arclength[i + 1]);
        let t = (s - s0) / (s1 - s0);
        let (x0, y0) = self.points[i];
        let (x1, y1) = self.points[i + 1];
        let h0 = self.headings[i];
        let dh = normalize_angle(self.headings[i + 1] - h0);
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0), normalize_angle(h0 + t * dh))
    }

    /// Ego vehicle state placed on the path.
    pub fn state_at(&self, s: f64, v: f64, a: f64) -> VehicleState {
        let (x, y, h) = self.pose_at(s);
        VehicleState::new(x, y, h, v, a)
    }
}
