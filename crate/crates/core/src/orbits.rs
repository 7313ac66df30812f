//! Walker-Delta constellation generation, circular two-body propagation in
//! the Earth-fixed frame, serving-set selection, and per-frame link geometry.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// WGS-esque spherical-Earth constants used throughout the simulator.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const EARTH_ROTATION_RATE_RAD_S: f64 = 7.292_115_9e-5;
pub const GRAVITATIONAL_PARAMETER_M3_S2: f64 = 3.986_004_418e14;

/// Walker-Delta shell description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub planes: usize,
    pub sats_per_plane: usize,
    /// Common inclination, radians.
    pub inclination: f64,
    /// Orbital altitude above the spherical Earth, meters.
    pub altitude: f64,
    /// Walker phasing factor, 0 <= f < planes.
    pub phasing_factor: usize,
    pub earth_radius: f64,
    pub earth_rotation_rate: f64,
    pub gravitational_parameter: f64,
}

impl ConstellationSpec {
    pub fn walker(planes: usize, sats_per_plane: usize, inclination: f64, altitude: f64) -> Self {
        Self {
            planes,
            sats_per_plane,
            inclination,
            altitude,
            phasing_factor: 1.min(planes.saturating_sub(1)),
            earth_radius: EARTH_RADIUS_M,
            earth_rotation_rate: EARTH_ROTATION_RATE_RAD_S,
            gravitational_parameter: GRAVITATIONAL_PARAMETER_M3_S2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.planes < 1 || self.sats_per_plane < 1 {
            return Err(Error::Parameter(
                "constellation needs at least one plane and one satellite per plane".into(),
            ));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.inclination) {
            return Err(Error::Parameter("inclination must be in [0, pi]".into()));
        }
        if self.altitude <= 0.0 {
            return Err(Error::Parameter("altitude must be positive".into()));
        }
        if self.phasing_factor >= self.planes {
            return Err(Error::Parameter(
                "phasing factor must satisfy 0 <= f < planes".into(),
            ));
        }
        Ok(())
    }

    /// Circular orbital radius, meters.
    pub fn orbital_radius(&self) -> f64 {
        self.earth_radius + self.altitude
    }

    /// Mean motion of the circular orbit, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.gravitational_parameter / self.orbital_radius().powi(3)).sqrt()
    }
}

/// A static user on the spherical Earth surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    /// Latitude, radians.
    pub latitude: f64,
    /// Longitude, radians (Earth-fixed).
    pub longitude: f64,
}

impl GroundUser {
    pub fn new(id: usize, latitude: f64, longitude: f64) -> Result<Self> {
        if latitude.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::Parameter("latitude out of range".into()));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&longitude) {
            return Err(Error::Parameter("longitude out of range".into()));
        }
        Ok(Self {
            id,
            latitude,
            longitude,
        })
    }

    /// Earth-fixed position on the sphere of radius `earth_radius`.
    pub fn ecef(&self, earth_radius: f64) -> Vector3<f64> {
        lat_lon_to_ecef(self.latitude, self.longitude, earth_radius)
    }
}

pub fn lat_lon_to_ecef(latitude: f64, longitude: f64, radius: f64) -> Vector3<f64> {
    Vector3::new(
        radius * latitude.cos() * longitude.cos(),
        radius * latitude.cos() * longitude.sin(),
        radius * latitude.sin(),
    )
}

/// Orbital elements of one circular-orbit satellite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitalElements {
    /// Right ascension of the ascending node, radians.
    pub raan: f64,
    /// Argument of latitude at epoch, radians.
    pub phase0: f64,
    pub inclination: f64,
    pub radius: f64,
    pub mean_motion: f64,
}

/// Position and velocity in the Earth-fixed frame.
#[derive(Debug, Clone, Copy)]
pub struct SatState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Geometry of one satellite-user link at the frame midpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Slant range, meters.
    pub distance_m: f64,
    /// Azimuth angle of departure in the satellite array frame, radians.
    pub theta_az_rad: f64,
    /// Elevation angle of departure in the satellite array frame, radians
    /// (pi/2 at the array normal).
    pub theta_el_rad: f64,
    /// Angle between the array normal (nadir) and the satellite->user
    /// direction, radians.
    pub boresight_angle_rad: f64,
    /// False when the satellite is below the user's local horizon; the link
    /// gain is forced to zero downstream.
    pub visible: bool,
}

/// All geometry needed by the channel model for one frame.
///
/// `links[l][u]` refers to the `l`-th satellite of `serving_set` (local index)
/// and user `u`. Units are SI throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameSnapshot {
    /// 1-based frame index.
    pub frame_index: usize,
    /// Global satellite ids, sorted ascending by distance to the service
    /// center.
    pub serving_set: Vec<usize>,
    pub sat_positions_m: Vec<[f64; 3]>,
    pub sat_velocities_mps: Vec<[f64; 3]>,
    pub links: Vec<Vec<LinkGeometry>>,
}

impl FrameSnapshot {
    pub fn n_sats(&self) -> usize {
        self.serving_set.len()
    }

    pub fn n_users(&self) -> usize {
        self.links.first().map_or(0, |row| row.len())
    }

    /// JSON debug dump (documented field names, SI units).
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }
}

/// Lays out a Walker-Delta constellation.
///
/// Plane `p` has RAAN `2*pi*p/planes`; slot `s` of plane `p` starts at
/// argument of latitude `2*pi*s/sats_per_plane
/// + 2*pi*f*p/(planes*sats_per_plane)`.
pub fn build_walker_delta(spec: &ConstellationSpec) -> Result<Vec<OrbitalElements>> {
    spec.validate()?;
    let radius = spec.orbital_radius();
    let mean_motion = spec.mean_motion();
    let tau = std::f64::consts::TAU;
    let mut elements = Vec::with_capacity(spec.planes * spec.sats_per_plane);
    for p in 0..spec.planes {
        let raan = tau * p as f64 / spec.planes as f64;
        for s in 0..spec.sats_per_plane {
            let phase0 = tau * s as f64 / spec.sats_per_plane as f64
                + tau * spec.phasing_factor as f64 * p as f64
                    / (spec.planes as f64 * spec.sats_per_plane as f64);
            elements.push(OrbitalElements {
                raan,
                phase0,
                inclination: spec.inclination,
                radius,
                mean_motion,
            });
        }
    }
    Ok(elements)
}

/// Propagates circular orbits to time `t` (seconds since epoch) and rotates
/// the result into the Earth-fixed frame.
pub fn propagate(elements: &[OrbitalElements], t: f64, earth_rotation_rate: f64) -> Vec<SatState> {
    elements
        .iter()
        .map(|el| {
            let u = el.phase0 + el.mean_motion * t;
            // Perifocal plane -> inertial: Rz(raan) * Rx(incl).
            let (su, cu) = u.sin_cos();
            let (si, ci) = el.inclination.sin_cos();
            let (sr, cr) = el.raan.sin_cos();
            let in_plane_pos = Vector3::new(el.radius * cu, el.radius * su, 0.0);
            let speed = el.radius * el.mean_motion;
            let in_plane_vel = Vector3::new(-speed * su, speed * cu, 0.0);
            let rot = |v: Vector3<f64>| {
                let x1 = v.x;
                let y1 = ci * v.y - si * v.z;
                let z1 = si * v.y + ci * v.z;
                Vector3::new(cr * x1 - sr * y1, sr * x1 + cr * y1, z1)
            };
            let p_in = rot(in_plane_pos);
            let v_in = rot(in_plane_vel);
            // Earth-fixed frame rotates by earth_rotation_rate * t about +z.
            let ang = -earth_rotation_rate * t;
            let (sa, ca) = ang.sin_cos();
            let rz = |v: Vector3<f64>| Vector3::new(ca * v.x - sa * v.y, sa * v.x + ca * v.y, v.z);
            let omega_cross_p = Vector3::new(0.0, 0.0, earth_rotation_rate).cross(&p_in);
            SatState {
                position: rz(p_in),
                velocity: rz(v_in - omega_cross_p),
            }
        })
        .collect()
}

/// Elevation of `target` above the local horizon at surface point `site`.
pub fn elevation_angle(site: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let up = site.normalize();
    let dir = (target - site).normalize();
    up.dot(&dir).clamp(-1.0, 1.0).asin()
}

/// Selects the `count` visible satellites closest to the service center.
///
/// Returns global ids sorted ascending by distance; ties break by id.
pub fn select_serving_set(
    positions: &[SatState],
    service_center: &Vector3<f64>,
    count: usize,
    min_elevation: f64,
) -> Result<Vec<usize>> {
    let mut visible: Vec<(usize, f64)> = positions
        .iter()
        .enumerate()
        .filter(|(_, s)| elevation_angle(service_center, &s.position) >= min_elevation)
        .map(|(id, s)| (id, (s.position - service_center).norm()))
        .collect();
    if visible.len() < count {
        return Err(Error::Coverage {
            visible: visible.len(),
            required: count,
        });
    }
    visible.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(visible.into_iter().take(count).map(|(id, _)| id).collect())
}

/// Computes the per-link geometry of one frame.
///
/// The satellite array is nadir-pointing: the array normal points toward the
/// Earth center and the horizontal array axis is the velocity direction
/// projected orthogonal to nadir.
pub fn frame_geometry(
    frame_index: usize,
    serving_set: &[usize],
    states: &[SatState],
    users: &[GroundUser],
    earth_radius: f64,
    min_elevation: f64,
) -> Result<FrameSnapshot> {
    if serving_set.is_empty() {
        return Err(Error::Parameter("serving set is empty".into()));
    }
    if users.is_empty() {
        return Err(Error::Parameter("user set is empty".into()));
    }
    let user_pos: Vec<Vector3<f64>> = users.iter().map(|u| u.ecef(earth_radius)).collect();
    let mut links = Vec::with_capacity(serving_set.len());
    let mut sat_positions = Vec::with_capacity(serving_set.len());
    let mut sat_velocities = Vec::with_capacity(serving_set.len());
    for &sat_id in serving_set {
        let st = &states[sat_id];
        sat_positions.push([st.position.x, st.position.y, st.position.z]);
        sat_velocities.push([st.velocity.x, st.velocity.y, st.velocity.z]);
        // Array frame axes.
        let z_axis = (-st.position).normalize(); // nadir
        let v_perp = st.velocity - z_axis * st.velocity.dot(&z_axis);
        let x_axis = if v_perp.norm() > 1e-9 {
            v_perp.normalize()
        } else {
            // Degenerate attitude (radial velocity); pick any horizontal axis.
            let mut a = Vector3::new(1.0, 0.0, 0.0);
            a -= z_axis * a.dot(&z_axis);
            a.normalize()
        };
        let y_axis = z_axis.cross(&x_axis);

        let mut row = Vec::with_capacity(users.len());
        for pu in &user_pos {
            let diff = pu - st.position;
            let distance = diff.norm();
            let dir = diff / distance;
            let dx = dir.dot(&x_axis);
            let dy = dir.dot(&y_axis);
            let dz = dir.dot(&z_axis);
            let boresight = dz.clamp(-1.0, 1.0).acos();
            let theta_az = dy.atan2(dx);
            let theta_el = dz.clamp(-1.0, 1.0).asin();
            let visible = elevation_angle(pu, &st.position) >= min_elevation;
            row.push(LinkGeometry {
                distance_m: distance,
                theta_az_rad: theta_az,
                theta_el_rad: theta_el,
                boresight_angle_rad: boresight,
                visible,
            });
        }
        links.push(row);
    }
    Ok(FrameSnapshot {
        frame_index,
        serving_set: serving_set.to_vec(),
        sat_positions_m: sat_positions,
        sat_velocities_mps: sat_velocities,
        links,
    })
}
