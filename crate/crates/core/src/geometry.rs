//! Hexagonal seven-site deployment with toroidal wrap-around and
//! straight-line UE mobility.
//!
//! Site 0 sits at the origin and the six neighbours at distance `isd`.
//! The seven-site cluster tiles the plane through a super-lattice whose
//! generators have length `isd * sqrt(7)`; the simulation region is the
//! Voronoi cell of that lattice around the origin (a hexagon of seven
//! site areas), and every position is kept inside it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};

/// Sector boresight azimuths of the three cells of every site (degrees,
/// counter-clockwise from +x).
pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [30.0, 150.0, 270.0];

pub const NUM_SITES: usize = 7;
pub const CELLS_PER_SITE: usize = 3;
pub const NUM_CELLS: usize = NUM_SITES * CELLS_PER_SITE;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle_rad: f64) -> Self {
        Self::new(r * angle_rad.cos(), r * angle_rad.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Angle of the vector in radians, in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub site: usize,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkLayout {
    pub isd: f64,
    pub sites: Vec<Vec2>,
    pub cells: Vec<Cell>,
    /// Zero vector followed by the six mirror translations.
    pub replica_offsets: [Vec2; 7],
    /// Super-lattice basis used for wrapping.
    basis: [Vec2; 2],
    inv_basis: [[f64; 2]; 2],
}

/// Builds the seven-site, 21-cell hexagonal layout.
pub fn build_hex_layout(isd: f64) -> Result<NetworkLayout> {
    if !(isd.is_finite() && isd > 0.0) {
        return Err(Error::config("geometry.isd", format!("must be positive, got {isd}")));
    }

    let mut sites = vec![Vec2::ZERO];
    sites.extend((0..6).map(|k| Vec2::from_polar(isd, k as f64 * PI / 3.0)));

    let cells = (0..NUM_SITES)
        .flat_map(|site| {
            SECTOR_AZIMUTHS_DEG
                .iter()
                .enumerate()
                .map(move |(k, &az)| Cell {
                    id: site * CELLS_PER_SITE + k,
                    site,
                    azimuth_deg: az,
                })
        })
        .collect();

    // Cluster translation 2*a1 + a2 of the site lattice, and its rotations.
    let t_len = isd * 7f64.sqrt();
    let t_angle = (3f64.sqrt() / 2.0).atan2(2.5);
    let mut replica_offsets = [Vec2::ZERO; 7];
    for k in 0..6 {
        replica_offsets[k + 1] = Vec2::from_polar(t_len, t_angle + k as f64 * PI / 3.0);
    }

    let basis = [replica_offsets[1], replica_offsets[2]];
    let det = basis[0].x * basis[1].y - basis[1].x * basis[0].y;
    let inv_basis = [
        [basis[1].y / det, -basis[1].x / det],
        [-basis[0].y / det, basis[0].x / det],
    ];

    Ok(NetworkLayout {
        isd,
        sites,
        cells,
        replica_offsets,
        basis,
        inv_basis,
    })
}

impl NetworkLayout {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_site_position(&self, cell: usize) -> Vec2 {
        self.sites[self.cells[cell].site]
    }

    /// Super-lattice generators (two of the replica offsets).
    pub fn lattice_basis(&self) -> [Vec2; 2] {
        self.basis
    }

    /// Circumradius of the hexagonal simulation region.
    pub fn region_circumradius(&self) -> f64 {
        self.basis[0].norm() / 3f64.sqrt()
    }

    /// Area of the simulation region (seven site hexagons).
    pub fn region_area(&self) -> f64 {
        7.0 * 3f64.sqrt() / 2.0 * self.isd * self.isd
    }

    fn nearest_lattice_point(&self, p: Vec2) -> Vec2 {
        let a = self.inv_basis[0][0] * p.x + self.inv_basis[0][1] * p.y;
        let b = self.inv_basis[1][0] * p.x + self.inv_basis[1][1] * p.y;
        let (a0, b0) = (a.round(), b.round());
        let mut best = Vec2::ZERO;
        let mut best_d = f64::INFINITY;
        for da in -1..=1 {
            for db in -1..=1 {
                let n = self.basis[0] * (a0 + da as f64) + self.basis[1] * (b0 + db as f64);
                let d = (p - n).norm_sq();
                if d < best_d {
                    best_d = d;
                    best = n;
                }
            }
        }
        best
    }

    /// Maps any point of the plane into the simulation region.
    pub fn wrap_position(&self, p: Vec2) -> Vec2 {
        let n = self.nearest_lattice_point(p);
        if n == Vec2::ZERO {
            p
        } else {
            p - n
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.nearest_lattice_point(p) == Vec2::ZERO
    }
}

/// Shortest displacement from `a` to any of the seven images of `b`.
pub fn wrap_displacement(a: Vec2, b: Vec2, layout: &NetworkLayout) -> Vec2 {
    let mut best = b - a;
    let mut best_d = best.norm_sq();
    for o in &layout.replica_offsets[1..] {
        let d = b + *o - a;
        let n = d.norm_sq();
        if n < best_d {
            best_d = n;
            best = d;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UEKinematics {
    pub position: Vec2,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
    /// m/s
    pub speed: f64,
    /// m
    pub height: f64,
}

impl UEKinematics {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }
}

/// Draws one UE uniformly over the region with a uniform heading.
pub fn drop_ue<R: Rng + ?Sized>(layout: &NetworkLayout, speed: f64, height: f64, rng: &mut R) -> UEKinematics {
    let r = layout.region_circumradius();
    let position = loop {
        let p = Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
        if layout.contains(p) {
            break p;
        }
    };
    let heading = rng.random_range(0.0..2.0 * PI);
    UEKinematics {
        position,
        heading,
        speed,
        height,
    }
}

pub fn drop_ues<R: Rng + ?Sized>(
    n: usize,
    layout: &NetworkLayout,
    speed: f64,
    height: f64,
    rng: &mut R,
) -> Vec<UEKinematics> {
    (0..n).map(|_| drop_ue(layout, speed, height, rng)).collect()
}

/// Advances a UE by `dt` seconds along its heading, re-wrapping into the region.
pub fn step_ue(ue: &UEKinematics, dt: f64, layout: &NetworkLayout) -> UEKinematics {
    if dt == 0.0 {
        return *ue;
    }
    UEKinematics {
        position: layout.wrap_position(ue.position + ue.velocity() * dt),
        ..*ue
    }
}

/// CSV echo of the layout: `cell,site,x_m,y_m,azimuth_deg`.
pub fn layout_csv(layout: &NetworkLayout) -> String {
    let mut out = String::from("cell,site,x_m,y_m,azimuth_deg\n");
    for c in &layout.cells {
        let p = layout.sites[c.site];
        let _ = writeln!(out, "{},{},{:.3},{:.3},{:.1}", c.id, c.site, p.x, p.y, c.azimuth_deg);
    }
    out
}
