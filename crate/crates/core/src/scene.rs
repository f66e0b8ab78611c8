//! Deterministic scene geometry: UPA steering vectors, the SSB codebook,
//! the AP layout, the voxel grid and the symbol-to-voxel schedule.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{CMatrix, CVector, Error, Point3, Result};

/// Square uniform planar array with half-wavelength element spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayGeometry {
    m_v: usize,
    m_h: usize,
}

impl ArrayGeometry {
    pub fn new(m_v: usize, m_h: usize) -> Result<Self> {
        if m_v == 0 {
            return Err(Error::config("m_v", "must be at least 1"));
        }
        if m_h == 0 {
            return Err(Error::config("m_h", "must be at least 1"));
        }
        if m_v != m_h {
            return Err(Error::config(
                "m_h",
                format!("panels must be square (m_v = {m_v}, m_h = {m_h})"),
            ));
        }
        Ok(Self { m_v, m_h })
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    /// Antennas per column.
    pub fn m_v(&self) -> usize {
        self.m_v
    }

    /// Antennas per row.
    pub fn m_h(&self) -> usize {
        self.m_h
    }

    /// Total number of antennas.
    pub fn m(&self) -> usize {
        self.m_v * self.m_h
    }
}

/// UPA response `a(θ, φ) = a_V(φ) ⊗ a_H(θ, φ)`.
///
/// Entry `v·M_H + h` is `exp(-jπ(v·sinφ + h·sinθ·cosφ))`.
pub fn upa_steering(theta: f64, phi: f64, geom: &ArrayGeometry) -> Result<CVector> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::Geometry("steering angles must be finite".into()));
    }
    if !(-PI / 2.0..=PI / 2.0).contains(&phi) {
        return Err(Error::Geometry(format!(
            "elevation {phi} outside [-π/2, π/2]"
        )));
    }
    Ok(steering(theta, phi, geom))
}

/// Unchecked steering vector; callers guarantee a valid elevation.
pub(crate) fn steering(theta: f64, phi: f64, geom: &ArrayGeometry) -> CVector {
    let u_v = phi.sin();
    let u_h = theta.sin() * phi.cos();
    let m_h = geom.m_h;
    CVector::from_fn(geom.m(), |k, _| {
        let v = (k / m_h) as f64;
        let h = (k % m_h) as f64;
        Complex64::from_polar(1.0, -PI * (v * u_v + h * u_h))
    })
}

/// SSB beam directions, elevation-major: every azimuth for `i' = 0`, then
/// `i' = -1`, and so on. Azimuth indices run from `-⌊√M/2⌋` to `⌊√M/2⌋`.
pub fn ssb_angle_grid(geom: &ArrayGeometry) -> Result<Vec<(f64, f64)>> {
    ssb_angle_grid_with(geom, false)
}

/// As [`ssb_angle_grid`], optionally dropping the endfire azimuths
/// `arcsin(±1)`.
pub fn ssb_angle_grid_with(geom: &ArrayGeometry, exclude_endfire: bool) -> Result<Vec<(f64, f64)>> {
    let m = geom.m();
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        return Err(Error::config(
            "m_v",
            format!("M = {m} is not a perfect square"),
        ));
    }
    let half = (side / 2) as i64;
    let sqrt_m = side as f64;
    let angle = |i: i64| (2.0 * i as f64 / sqrt_m).clamp(-1.0, 1.0).asin();

    let azimuths: Vec<f64> = (-half..=half)
        .filter(|&i| !(exclude_endfire && (2 * i.abs()) as usize == side))
        .map(angle)
        .collect();
    let mut grid = Vec::with_capacity(azimuths.len() * (half as usize + 1));
    for ip in 0..=half {
        let phi = angle(-ip);
        grid.extend(azimuths.iter().map(|&theta| (theta, phi)));
    }
    Ok(grid)
}

/// Normalized SSB steering matrix: one column per symbol, four identical
/// columns per block.
#[derive(Debug, Clone)]
pub struct SsbCodebook {
    columns: CMatrix,
    angle_pairs: Vec<(f64, f64)>,
}

pub const SYMBOLS_PER_BLOCK: usize = 4;

impl SsbCodebook {
    /// Total symbols `R`.
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    /// Number of blocks `R'`.
    pub fn block_count(&self) -> usize {
        self.angle_pairs.len()
    }

    pub fn angle_pairs(&self) -> &[(f64, f64)] {
        &self.angle_pairs
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    /// Column `f_r` (0-based symbol index).
    pub fn column(&self, r: usize) -> CVector {
        self.columns.column(r).into_owned()
    }
}

pub fn build_codebook(geom: &ArrayGeometry) -> Result<SsbCodebook> {
    build_codebook_with(geom, false)
}

pub fn build_codebook_with(geom: &ArrayGeometry, exclude_endfire: bool) -> Result<SsbCodebook> {
    let angle_pairs = ssb_angle_grid_with(geom, exclude_endfire)?;
    let m = geom.m();
    let scale = 1.0 / (m as f64).sqrt();
    let mut columns = CMatrix::zeros(m, SYMBOLS_PER_BLOCK * angle_pairs.len());
    for (b, &(theta, phi)) in angle_pairs.iter().enumerate() {
        let col = steering(theta, phi, geom) * Complex64::new(scale, 0.0);
        for k in 0..SYMBOLS_PER_BLOCK {
            columns.set_column(SYMBOLS_PER_BLOCK * b + k, &col);
        }
    }
    Ok(SsbCodebook {
        columns,
        angle_pairs,
    })
}

/// Which way a panel faces along the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boresight {
    PositiveX,
    NegativeX,
}

impl Boresight {
    pub fn sign(self) -> i8 {
        match self {
            Boresight::PositiveX => 1,
            Boresight::NegativeX => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApRole {
    /// Illuminator with 0-based index `j`.
    Illuminator(usize),
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApNode {
    pub position: Point3,
    pub boresight: Boresight,
    pub role: ApRole,
}

/// AP placement: `J` illuminators plus one sensing receiver, all sharing one
/// array geometry.
#[derive(Debug, Clone)]
pub struct Layout {
    pub geometry: ArrayGeometry,
    pub receiver: ApNode,
    pub illuminators: Vec<ApNode>,
    /// False when the layout departs from the three-illuminator setup.
    pub baseline_configuration: bool,
}

impl Layout {
    pub fn j(&self) -> usize {
        self.illuminators.len()
    }

    /// Builds a layout from explicit positions. Boresight faces the receiver
    /// along x (ties face +x).
    pub fn from_positions(
        geometry: ArrayGeometry,
        receiver: Point3,
        illuminators: &[Point3],
    ) -> Result<Self> {
        if illuminators.is_empty() {
            return Err(Error::config(
                "ap_positions",
                "need at least one illuminator",
            ));
        }
        for (j, p) in illuminators.iter().enumerate() {
            if (p - receiver).norm() == 0.0 {
                return Err(Error::Geometry(format!(
                    "illuminator {} coincides with the receiver",
                    j + 1
                )));
            }
        }
        let facing = |p: &Point3| {
            if p.x <= receiver.x {
                Boresight::PositiveX
            } else {
                Boresight::NegativeX
            }
        };
        Ok(Self {
            geometry,
            receiver: ApNode {
                position: receiver,
                boresight: Boresight::NegativeX,
                role: ApRole::Receiver,
            },
            illuminators: illuminators
                .iter()
                .enumerate()
                .map(|(j, p)| ApNode {
                    position: *p,
                    boresight: facing(p),
                    role: ApRole::Illuminator(j),
                })
                .collect(),
            baseline_configuration: illuminators.len() == 3,
        })
    }
}

/// Hexagonal placement with inner radius `r`: the receiver at the origin and
/// illuminators on the first ring of neighbouring cells (centers `2r` away).
///
/// Ring order: AP_1 at (-2r, 0), AP_2 at (-r, -r√3), AP_3 at (2r, 0), then
/// the remaining neighbours counter-clockwise from 120°.
pub fn hex_layout(r: f64, j: usize, ap_height: f64, geometry: ArrayGeometry) -> Result<Layout> {
    if !(r > 0.0) {
        return Err(Error::config("r_m", "inner radius must be positive"));
    }
    if j == 0 || j > 6 {
        return Err(Error::config(
            "illuminators",
            format!("hexagonal ring holds 1..=6 illuminators, got {j}"),
        ));
    }
    let ring_deg = [180.0_f64, 240.0, 0.0, 120.0, 60.0, 300.0];
    let positions: Vec<Point3> = ring_deg[..j]
        .iter()
        .map(|deg| {
            let a = deg.to_radians();
            let (x, y) = (2.0 * r * a.cos(), 2.0 * r * a.sin());
            // Snap round-off so collinear placements stay exactly collinear.
            let snap = |v: f64| if v.abs() < 1e-9 * r { 0.0 } else { v };
            Point3::new(snap(x), snap(y), ap_height)
        })
        .collect();
    let mut layout =
        Layout::from_positions(geometry, Point3::new(0.0, 0.0, ap_height), &positions)?;
    layout.baseline_configuration = j == 3;
    Ok(layout)
}

/// Regular lattice of voxel centers.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    centers: Vec<Point3>,
    spacing: f64,
    counts: [usize; 3],
}

impl VoxelGrid {
    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Voxels per axis (x, y, z).
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Tessellates a box of size `dims` centered at `center` into cubic cells of
/// edge `d`; voxel centers sit at cell midpoints, x varying fastest.
pub fn voxel_grid(center: Point3, dims: [f64; 3], d: f64) -> Result<VoxelGrid> {
    if !(d > 0.0) {
        return Err(Error::config("d_m", "voxel spacing must be positive"));
    }
    for (axis, l) in ["x", "y", "z"].iter().zip(dims) {
        if !(l > 0.0) {
            return Err(Error::config(
                "volume_m",
                format!("{axis} extent must be positive"),
            ));
        }
    }
    let counts = dims.map(|l| ((l / d).round() as usize).max(1));
    let offset = |i: usize, n: usize| (i as f64 - (n as f64 - 1.0) / 2.0) * d;
    let mut centers = Vec::with_capacity(counts.iter().product());
    for iz in 0..counts[2] {
        for iy in 0..counts[1] {
            for ix in 0..counts[0] {
                centers.push(
                    center
                        + Point3::new(
                            offset(ix, counts[0]),
                            offset(iy, counts[1]),
                            offset(iz, counts[2]),
                        ),
                );
            }
        }
    }
    if let Some(p) = centers.iter().find(|p| p.z < 0.0) {
        return Err(Error::Geometry(format!(
            "voxel center below ground (z = {})",
            p.z
        )));
    }
    Ok(VoxelGrid {
        centers,
        spacing: d,
        counts,
    })
}

/// Departure/arrival angles and path lengths of one bistatic link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticAngles {
    pub theta_tx: f64,
    pub phi_tx: f64,
    pub theta_rx: f64,
    pub phi_rx: f64,
    /// AP_j to voxel distance.
    pub l_tx: f64,
    /// Voxel to receiver distance.
    pub l_rx: f64,
}

pub fn bistatic_angles(b_j: &Point3, p_q: &Point3, b_rx: &Point3) -> Result<BistaticAngles> {
    let tx = p_q - b_j;
    let rx = b_rx - p_q;
    let l_tx = tx.norm();
    let l_rx = rx.norm();
    if l_tx == 0.0 {
        return Err(Error::Geometry(
            "voxel coincides with an illuminator".into(),
        ));
    }
    if l_rx == 0.0 {
        return Err(Error::Geometry("voxel coincides with the receiver".into()));
    }
    Ok(BistaticAngles {
        theta_tx: tx.y.atan2(tx.x),
        phi_tx: (tx.z / l_tx).clamp(-1.0, 1.0).asin(),
        theta_rx: rx.y.atan2(rx.x),
        phi_rx: (rx.z / l_rx).clamp(-1.0, 1.0).asin(),
        l_tx,
        l_rx,
    })
}

/// One symbol of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    /// 0-based voxel index.
    pub voxel: usize,
    /// 0-based SSB codebook column.
    pub column: usize,
}

#[derive(Debug, Clone)]
pub struct SymbolSchedule {
    entries: Vec<ScheduleEntry>,
}

impl SymbolSchedule {
    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Symbol `q` senses voxel `q` while the SSB uses codebook column `q`.
pub fn symbol_schedule(grid: &VoxelGrid, book: &SsbCodebook) -> Result<SymbolSchedule> {
    let q = grid.len();
    if q >= book.len() {
        return Err(Error::config(
            "volume_m",
            format!(
                "sweep cannot cover volume within one burst set ({q} voxels, {} SSB symbols)",
                book.len()
            ),
        ));
    }
    Ok(SymbolSchedule {
        entries: (0..q)
            .map(|i| ScheduleEntry {
                voxel: i,
                column: i,
            })
            .collect(),
    })
}

/// Everything geometric about one experiment.
#[derive(Debug, Clone)]
pub struct Scene {
    pub layout: Layout,
    pub grid: VoxelGrid,
    pub codebook: SsbCodebook,
    pub schedule: SymbolSchedule,
}

impl Scene {
    pub fn new(layout: Layout, grid: VoxelGrid, codebook: SsbCodebook) -> Result<Self> {
        let schedule = symbol_schedule(&grid, &codebook)?;
        Ok(Self {
            layout,
            grid,
            codebook,
            schedule,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.layout.geometry
    }

    pub fn m(&self) -> usize {
        self.layout.geometry.m()
    }

    pub fn j(&self) -> usize {
        self.layout.j()
    }

    pub fn voxel_count(&self) -> usize {
        self.grid.len()
    }

    /// SSB column `f_q` used while sensing voxel `q`.
    pub fn ssb_column(&self, q: usize) -> CVector {
        self.codebook.column(self.schedule.entries()[q].column)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom(n: usize) -> ArrayGeometry {
        ArrayGeometry::square(n).unwrap()
    }

    #[test]
    fn boresight_steering_is_all_ones() {
        let a = upa_steering(0.0, 0.0, &geom(2)).unwrap();
        for z in a.iter() {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn thirty_degree_azimuth() {
        let a = upa_steering(PI / 6.0, 0.0, &geom(2)).unwrap();
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (z, e) in a.iter().zip(expect) {
            assert!((z - e).norm() < 1e-12);
        }
    }

    #[test]
    fn elevation_out_of_range_rejected() {
        assert!(upa_steering(0.0, 1.6, &geom(2)).is_err());
        assert!(upa_steering(0.0, -1.6, &geom(2)).is_err());
    }

    #[test]
    fn rejects_bad_geometry() {
        match ArrayGeometry::new(0, 0) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "m_v"),
            other => panic!("{other:?}"),
        }
        assert!(ArrayGeometry::new(2, 3).is_err());
    }

    #[test]
    fn angle_grid_sizes() {
        let g = ssb_angle_grid(&geom(12)).unwrap();
        assert_eq!(g.len(), 91);
        assert_eq!(build_codebook(&geom(12)).unwrap().len(), 364);
        // i = 6 is the endfire azimuth.
        assert!(g.iter().any(|&(t, _)| (t - PI / 2.0).abs() < 1e-15));

        let g4 = ssb_angle_grid(&geom(2)).unwrap();
        assert_eq!(g4.len(), 6);
        let thetas: Vec<f64> = g4[..3].iter().map(|p| p.0).collect();
        assert_abs_diff_eq!(thetas[0], -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thetas[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thetas[2], PI / 2.0, epsilon = 1e-15);
        assert_eq!(g4[0].1, 0.0);
        assert_abs_diff_eq!(g4[3].1, -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn endfire_exclusion_drops_two_azimuths() {
        let g = ssb_angle_grid_with(&geom(12), true).unwrap();
        assert_eq!(g.len(), 11 * 7);
        assert!(g.iter().all(|&(t, _)| t.abs() < PI / 2.0 - 1e-9));
    }

    #[test]
    fn codebook_block_structure() {
        let book = build_codebook(&geom(12)).unwrap();
        for r in 0..book.len() {
            assert_abs_diff_eq!(book.column(r).norm(), 1.0, epsilon = 1e-12);
        }
        let c0 = book.column(0);
        for k in 1..4 {
            assert_eq!(book.column(k), c0);
        }
        assert_ne!(book.column(4), c0);

        let small = build_codebook(&geom(2)).unwrap();
        // Block 1 of the M = 4 grid is (θ = 0, φ = 0).
        for z in small.column(4).iter() {
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn default_hex_layout() {
        let l = hex_layout(250.0, 3, 10.0, geom(12)).unwrap();
        assert!(l.baseline_configuration);
        assert_eq!(l.receiver.position, Point3::new(0.0, 0.0, 10.0));
        let p: Vec<Point3> = l.illuminators.iter().map(|n| n.position).collect();
        assert_abs_diff_eq!(
            (p[0] - Point3::new(-500.0, 0.0, 10.0)).norm(),
            0.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            (p[1] - Point3::new(-250.0, -250.0 * 3f64.sqrt(), 10.0)).norm(),
            0.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            (p[2] - Point3::new(500.0, 0.0, 10.0)).norm(),
            0.0,
            epsilon = 1e-9
        );
        // Adjacent cell centers are 2r apart.
        let rx = l.receiver.position;
        for q in &p {
            assert_abs_diff_eq!((q - rx).norm(), 500.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!((p[0] - p[1]).norm(), 500.0, epsilon = 1e-9);
        assert_eq!(l.illuminators[0].boresight, Boresight::PositiveX);
        assert_eq!(l.illuminators[1].boresight, Boresight::PositiveX);
        assert_eq!(l.illuminators[2].boresight, Boresight::NegativeX);
        assert_eq!(l.receiver.boresight, Boresight::NegativeX);
    }

    #[test]
    fn single_illuminator_layout_is_flagged() {
        let l = hex_layout(250.0, 1, 10.0, geom(2)).unwrap();
        assert_eq!(l.j(), 1);
        assert!(!l.baseline_configuration);
    }

    #[test]
    fn voxel_grids() {
        let c = Point3::new(-250.0, 0.0, 10.0);
        let g = voxel_grid(c, [6.0, 2.0, 2.0], 2.0).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.counts(), [3, 1, 1]);
        assert_eq!(g.centers()[0], Point3::new(-252.0, 0.0, 10.0));
        assert_eq!(g.centers()[2], Point3::new(-248.0, 0.0, 10.0));
        for w in g.centers().windows(2) {
            assert_abs_diff_eq!((w[1] - w[0]).norm(), 2.0, epsilon = 1e-12);
        }

        let one = voxel_grid(c, [2.0, 2.0, 2.0], 2.0).unwrap();
        assert_eq!(one.centers(), &[c]);

        assert_eq!(voxel_grid(c, [6.0, 2.0, 2.0], 1.0).unwrap().len(), 24);
        // Spacing coarser than the box: one voxel per axis.
        assert_eq!(voxel_grid(c, [6.0, 2.0, 2.0], 20.0).unwrap().len(), 1);
        assert!(voxel_grid(c, [6.0, 0.0, 2.0], 2.0).is_err());
        assert!(voxel_grid(c, [6.0, 2.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn bistatic_angle_examples() {
        let b = Point3::new(0.0, 0.0, 10.0);
        let a = bistatic_angles(
            &b,
            &Point3::new(100.0, 100.0, 10.0),
            &Point3::new(0.0, 50.0, 10.0),
        )
        .unwrap();
        assert_abs_diff_eq!(a.theta_tx, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.phi_tx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.l_tx, 100.0 * 2f64.sqrt(), epsilon = 1e-12);

        let up = bistatic_angles(
            &b,
            &Point3::new(0.0, 0.0, 60.0),
            &Point3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(up.phi_tx, PI / 2.0, epsilon = 1e-15);

        let rx = bistatic_angles(
            &Point3::new(-500.0, 0.0, 10.0),
            &Point3::new(-100.0, 0.0, 10.0),
            &b,
        )
        .unwrap();
        assert_abs_diff_eq!(rx.theta_rx, 0.0, epsilon = 1e-15);

        assert!(bistatic_angles(&b, &b, &Point3::new(1.0, 0.0, 0.0)).is_err());
        assert!(bistatic_angles(&Point3::new(1.0, 0.0, 0.0), &b, &b).is_err());
    }

    #[test]
    fn schedule_is_identity_and_bounded() {
        let book = build_codebook(&geom(12)).unwrap();
        let c = Point3::new(0.0, 0.0, 10.0);
        let grid = voxel_grid(c, [6.0, 2.0, 2.0], 2.0).unwrap();
        let s = symbol_schedule(&grid, &book).unwrap();
        let e: Vec<(usize, usize)> = s.entries().iter().map(|e| (e.voxel, e.column)).collect();
        assert_eq!(e, vec![(0, 0), (1, 1), (2, 2)]);

        let single = voxel_grid(c, [1.0, 1.0, 1.0], 2.0).unwrap();
        assert_eq!(symbol_schedule(&single, &book).unwrap().len(), 1);

        // 364 voxels against 364 SSB symbols: 14 x 13 x 2 lattice.
        let full = voxel_grid(c, [14.0, 13.0, 2.0], 1.0).unwrap();
        assert_eq!(full.len(), 364);
        assert!(symbol_schedule(&full, &book).is_err());
    }

    proptest! {
        #[test]
        fn steering_norm_and_kronecker(theta in -PI..PI, phi in -PI / 2.0..PI / 2.0, n in 1usize..13) {
            let g = geom(n);
            let a = upa_steering(theta, phi, &g).unwrap();
            prop_assert!((a.norm() - (g.m() as f64).sqrt()).abs() < 1e-12);
            prop_assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            let av = steering(0.0, phi, &ArrayGeometry { m_v: n, m_h: 1 });
            let ah = steering(theta, phi, &ArrayGeometry { m_v: 1, m_h: n });
            for v in 0..n {
                for h in 0..n {
                    prop_assert!((a[v * n + h] - av[v] * ah[h]).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn bistatic_round_trip(
            bx in -600.0..600.0f64, by in -600.0..600.0f64, bz in 0.0..30.0f64,
            px in -600.0..600.0f64, py in -600.0..600.0f64, pz in 0.5..100.0f64,
        ) {
            let b = Point3::new(bx, by, bz);
            let p = Point3::new(px, py, pz);
            prop_assume!((p - b).norm() > 1e-3);
            let rx = Point3::new(0.0, 0.0, 10.0);
            prop_assume!((p - rx).norm() > 1e-3);
            let a = bistatic_angles(&b, &p, &rx).unwrap();
            prop_assert!(a.phi_tx.abs() <= PI / 2.0 && a.phi_rx.abs() <= PI / 2.0);
            let back = b + a.l_tx * Point3::new(
                a.phi_tx.cos() * a.theta_tx.cos(),
                a.phi_tx.cos() * a.theta_tx.sin(),
                a.phi_tx.sin(),
            );
            prop_assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn angle_grid_symmetry() {
        let g = ssb_angle_grid(&geom(12)).unwrap();
        for &(t, p) in &g {
            assert!(p <= 0.0);
            assert!(g.iter().any(|&(t2, p2)| p2 == p && (t2 + t).abs() < 1e-15));
        }
    }
}
