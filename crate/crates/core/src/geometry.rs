//! Lambertian line-of-sight channel geometry for regular device/AP grids.
//!
//! This module computes:
//! - the Lambertian order of a source from its half-power semiangle
//!   ([`lambertian_order`])
//! - the optical concentrator gain inside a field of view
//!   ([`concentrator_gain`])
//! - the LOS channel gain of a single device-to-AP link ([`lambertian_gain`])
//! - device and AP grid placement for a rectangular room ([`grid_positions`])
//! - the full gain matrix with per-AP coverage sets ([`Coverage`])
//!
//! Angles are degrees at every public interface and radians internally.
//! All results are pure functions of the [`Scenario`] and safe to share
//! across concurrent Monte Carlo workers.

use thiserror::Error;

/// Tolerance applied to FOV boundary comparisons (radians). Regime
/// boundaries in regular grids sit exactly on device incidence angles;
/// without a tolerance those devices would flip coverage on rounding.
pub const FOV_TOLERANCE_RAD: f64 = 1e-9;

/// Tolerance for grid placement checks (meters).
const PLACEMENT_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    /// Half-power semiangle outside (0°, 90°).
    #[error("half-power semiangle must lie in (0, 90) degrees, got {0}")]
    InvalidHalfPowerAngle(f64),
    /// FOV outside (0°, 90°).
    #[error("field of view must lie in (0, 90) degrees, got {0}")]
    InvalidFov(f64),
    /// Incidence angle below zero.
    #[error("incidence angle must be nonnegative, got {0}")]
    NegativeAngle(f64),
    /// Transmitter and receiver at the same point.
    #[error("transmitter and receiver positions coincide")]
    CoincidentPositions,
    /// Scenario parameters violate an invariant.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// The AP grid cannot be placed at device-square centers.
    #[error("AP grid placement: {0}")]
    ApPlacement(String),
}

/// Transmitter optics, receiver optics and emitted power of one link end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertianParams {
    /// Physical detector area A_r (m²).
    pub detector_area_m2: f64,
    /// Half-power semiangle of the source (degrees), in (0, 90).
    pub half_power_semiangle_deg: f64,
    /// Optical filter gain T_s, taken constant over incidence.
    pub optical_filter_gain: f64,
    /// Refractive index n_r of the concentrator, >= 1.
    pub refractive_index: f64,
    /// Transmit power (W); only the preamble power estimator uses it.
    pub tx_power_w: f64,
}

impl Default for LambertianParams {
    fn default() -> Self {
        Self {
            detector_area_m2: 1e-4,
            half_power_semiangle_deg: 60.0,
            optical_filter_gain: 1.0,
            refractive_index: 1.5,
            tx_power_w: 1.0,
        }
    }
}

/// Static world description: room, device grid, AP grid, optics, FOV.
///
/// Both grids are square, regular and centered on the room plan. Devices
/// sit at height 0, APs at `height_m`. AP grid points must fall on centers
/// of device-grid squares; the AP pitch is derived from the room width as
/// `2 * floor(W / (2 * rx_per_side))` meters, the only even-pitch choice
/// near `W / sqrt(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub room_width_m: f64,
    pub room_depth_m: f64,
    pub height_m: f64,
    pub tx_per_side: usize,
    pub tx_pitch_m: f64,
    pub rx_per_side: usize,
    pub lambertian: LambertianParams,
    pub fov_deg: f64,
}

impl Scenario {
    /// 50 m x 50 m open-plan hall: 26x26 devices at 2 m pitch on the floor,
    /// a square AP grid on the ceiling 3 m above, default optics.
    pub fn open_hall(rx_per_side: usize, fov_deg: f64) -> Self {
        Self {
            room_width_m: 50.0,
            room_depth_m: 50.0,
            height_m: 3.0,
            tx_per_side: 26,
            tx_pitch_m: 2.0,
            rx_per_side,
            lambertian: LambertianParams::default(),
            fov_deg,
        }
    }

    /// Same scenario with a different receiver FOV.
    pub fn with_fov(&self, fov_deg: f64) -> Self {
        Self {
            fov_deg,
            ..self.clone()
        }
    }

    /// Number of devices N.
    pub fn device_count(&self) -> usize {
        self.tx_per_side * self.tx_per_side
    }

    /// Number of APs M.
    pub fn receiver_count(&self) -> usize {
        self.rx_per_side * self.rx_per_side
    }

    /// Derived AP grid pitch (meters).
    pub fn rx_pitch_m(&self) -> f64 {
        2.0 * (self.room_width_m / (2.0 * self.rx_per_side as f64)).floor()
    }

    /// Check every scenario invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let err = |msg: String| Err(GeometryError::InvalidScenario(msg));
        if !(self.room_width_m > 0.0 && self.room_width_m.is_finite()) {
            return err(format!("room width must be positive, got {}", self.room_width_m));
        }
        if !(self.room_depth_m > 0.0 && self.room_depth_m.is_finite()) {
            return err(format!("room depth must be positive, got {}", self.room_depth_m));
        }
        if !(self.height_m > 0.0 && self.height_m.is_finite()) {
            return err(format!("height must be positive, got {}", self.height_m));
        }
        if self.tx_per_side == 0 {
            return err("device grid needs at least one point per side".into());
        }
        if self.rx_per_side == 0 {
            return err("AP grid needs at least one point per side".into());
        }
        if !(self.tx_pitch_m > 0.0 && self.tx_pitch_m.is_finite()) {
            return err(format!("device pitch must be positive, got {}", self.tx_pitch_m));
        }
        let span = (self.tx_per_side - 1) as f64 * self.tx_pitch_m;
        if span > self.room_width_m + PLACEMENT_TOLERANCE_M
            || span > self.room_depth_m + PLACEMENT_TOLERANCE_M
        {
            return err(format!(
                "device grid span {span} m exceeds the room plan ({} x {} m)",
                self.room_width_m, self.room_depth_m
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 90.0) {
            return Err(GeometryError::InvalidFov(self.fov_deg));
        }
        let lp = &self.lambertian;
        if !(lp.half_power_semiangle_deg > 0.0 && lp.half_power_semiangle_deg < 90.0) {
            return Err(GeometryError::InvalidHalfPowerAngle(lp.half_power_semiangle_deg));
        }
        if !(lp.detector_area_m2 > 0.0 && lp.detector_area_m2.is_finite()) {
            return err(format!("detector area must be positive, got {}", lp.detector_area_m2));
        }
        if !(lp.optical_filter_gain >= 0.0 && lp.optical_filter_gain.is_finite()) {
            return err(format!(
                "optical filter gain must be nonnegative, got {}",
                lp.optical_filter_gain
            ));
        }
        if !(lp.refractive_index >= 1.0 && lp.refractive_index.is_finite()) {
            return err(format!("refractive index must be >= 1, got {}", lp.refractive_index));
        }
        if !(lp.tx_power_w > 0.0 && lp.tx_power_w.is_finite()) {
            return err(format!("tx power must be positive, got {}", lp.tx_power_w));
        }
        // The AP placement rule has its own error variant.
        grid_positions(self).map(|_| ())
    }
}

/// N x M matrix of nonnegative LOS channel gains, device-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    tx_count: usize,
    rx_count: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    /// Build from explicit rows (one row per device). Intended for tests
    /// and synthetic topologies.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let tx_count = rows.len();
        let rx_count = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(tx_count * rx_count);
        for row in rows {
            assert_eq!(row.len(), rx_count, "ragged gain rows");
            data.extend_from_slice(row);
        }
        Self { tx_count, rx_count, data }
    }

    pub fn tx_count(&self) -> usize {
        self.tx_count
    }

    pub fn rx_count(&self) -> usize {
        self.rx_count
    }

    /// Gain of the link from device `tx` to AP `rx`.
    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.data[tx * self.rx_count + rx]
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Gain matrix plus the coverage structure derived from its support.
///
/// `rx_devices[j]` is the set U_j of devices with positive gain towards
/// AP j; `tx_rxs[i]` is the inverse adjacency; `uncovered` lists devices
/// in no U_j. Decoding depends only on this support.
#[derive(Debug, Clone)]
pub struct Coverage {
    gains: GainMatrix,
    rx_devices: Vec<Vec<u32>>,
    tx_rxs: Vec<Vec<u32>>,
    uncovered: Vec<u32>,
}

impl Coverage {
    /// Compute gains and coverage sets for a scenario.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, GeometryError> {
        scenario.validate()?;
        let (tx_pos, rx_pos) = grid_positions(scenario)?;
        let n = tx_pos.len();
        let m = rx_pos.len();
        let mut data = vec![0.0; n * m];
        for (i, tx) in tx_pos.iter().enumerate() {
            for (j, rx) in rx_pos.iter().enumerate() {
                data[i * m + j] =
                    lambertian_gain(*tx, *rx, &scenario.lambertian, scenario.fov_deg)?;
            }
        }
        Ok(Self::from_gains(GainMatrix { tx_count: n, rx_count: m, data }))
    }

    /// Derive the coverage structure from an explicit gain matrix.
    pub fn from_gains(gains: GainMatrix) -> Self {
        let n = gains.tx_count();
        let m = gains.rx_count();
        let mut rx_devices = vec![Vec::new(); m];
        let mut tx_rxs = vec![Vec::new(); n];
        let mut uncovered = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if gains.get(i, j) > 0.0 {
                    rx_devices[j].push(i as u32);
                    tx_rxs[i].push(j as u32);
                }
            }
            if tx_rxs[i].is_empty() {
                uncovered.push(i as u32);
            }
        }
        Self { gains, rx_devices, tx_rxs, uncovered }
    }

    pub fn gains(&self) -> &GainMatrix {
        &self.gains
    }

    /// Coverage set U_j of one AP.
    pub fn rx_devices(&self, rx: usize) -> &[u32] {
        &self.rx_devices[rx]
    }

    /// APs covering one device.
    pub fn tx_rxs(&self, tx: usize) -> &[u32] {
        &self.tx_rxs[tx]
    }

    /// Devices outside every U_j.
    pub fn uncovered(&self) -> &[u32] {
        &self.uncovered
    }

    pub fn tx_count(&self) -> usize {
        self.gains.tx_count()
    }

    pub fn rx_count(&self) -> usize {
        self.gains.rx_count()
    }

    /// Coverage support (device -> AP adjacency). Two scenarios with equal
    /// support produce identical frame graphs and decoding outcomes.
    pub fn support(&self) -> &Vec<Vec<u32>> {
        &self.tx_rxs
    }
}

/// Lambertian order `m = -ln 2 / ln cos(phi_1/2)` of a source with
/// half-power semiangle `phi_1/2`.
pub fn lambertian_order(half_power_semiangle_deg: f64) -> Result<f64, GeometryError> {
    if !(half_power_semiangle_deg > 0.0 && half_power_semiangle_deg < 90.0) {
        return Err(GeometryError::InvalidHalfPowerAngle(half_power_semiangle_deg));
    }
    Ok(-std::f64::consts::LN_2 / half_power_semiangle_deg.to_radians().cos().ln())
}

/// Concentrator gain `g(psi) = n_r^2 / sin^2(psi_c)` inside the FOV,
/// zero outside.
pub fn concentrator_gain(psi_deg: f64, fov_deg: f64, refractive_index: f64) -> Result<f64, GeometryError> {
    if !(fov_deg > 0.0 && fov_deg < 90.0) {
        return Err(GeometryError::InvalidFov(fov_deg));
    }
    if psi_deg < 0.0 {
        return Err(GeometryError::NegativeAngle(psi_deg));
    }
    let psi = psi_deg.to_radians();
    let fov = fov_deg.to_radians();
    if psi <= fov + FOV_TOLERANCE_RAD {
        Ok(refractive_index * refractive_index / fov.sin().powi(2))
    } else {
        Ok(0.0)
    }
}

/// Incidence angle (degrees) at a downward-facing receiver for a ray from
/// `tx` to `rx`. With vertical axes on parallel planes this equals the
/// radiation angle at the transmitter.
pub fn incidence_angle_deg(tx: [f64; 3], rx: [f64; 3]) -> Result<f64, GeometryError> {
    let d = distance(tx, rx);
    if d == 0.0 {
        return Err(GeometryError::CoincidentPositions);
    }
    let cos_psi = ((rx[2] - tx[2]) / d).clamp(-1.0, 1.0);
    Ok(cos_psi.acos().to_degrees())
}

/// LOS channel gain of one link:
/// `h = A_r (m+1) / (2 pi d^2) * cos^m(phi) * g(psi) * T_s * cos(psi)`
/// inside the FOV, zero outside. Axes are vertical (device up, AP down),
/// so the radiation and incidence angles coincide.
pub fn lambertian_gain(
    tx: [f64; 3],
    rx: [f64; 3],
    params: &LambertianParams,
    fov_deg: f64,
) -> Result<f64, GeometryError> {
    let d = distance(tx, rx);
    if d == 0.0 {
        return Err(GeometryError::CoincidentPositions);
    }
    let m = lambertian_order(params.half_power_semiangle_deg)?;
    if !(fov_deg > 0.0 && fov_deg < 90.0) {
        return Err(GeometryError::InvalidFov(fov_deg));
    }
    let cos_psi = ((rx[2] - tx[2]) / d).clamp(-1.0, 1.0);
    let psi = cos_psi.acos();
    let fov = fov_deg.to_radians();
    if psi > fov + FOV_TOLERANCE_RAD {
        return Ok(0.0);
    }
    let g = params.refractive_index * params.refractive_index / fov.sin().powi(2);
    Ok(params.detector_area_m2 * (m + 1.0) / (2.0 * std::f64::consts::PI * d * d)
        * cos_psi.powf(m)
        * g
        * params.optical_filter_gain
        * cos_psi)
}

/// Device and AP positions for a scenario.
///
/// Devices lie at height 0 on a centered square grid, index `iy * n + ix`
/// with x varying fastest. APs lie at `height_m` on a centered square grid
/// with the derived pitch; each AP must fall on the center of a device-grid
/// square (checked whenever the device grid has at least 2 points per side).
pub fn grid_positions(scenario: &Scenario) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>), GeometryError> {
    let n = scenario.tx_per_side;
    let m = scenario.rx_per_side;
    let tx_pitch = scenario.tx_pitch_m;
    let rx_pitch = scenario.rx_pitch_m();
    if m >= 2 && rx_pitch <= 0.0 {
        return Err(GeometryError::ApPlacement(format!(
            "derived AP pitch is {rx_pitch} m for {m} APs per side in a {} m room",
            scenario.room_width_m
        )));
    }

    let tx_coords = centered_coords(n, tx_pitch);
    let rx_coords = centered_coords(m, rx_pitch);

    if n >= 2 {
        // Device-square centers sit halfway between adjacent device rows.
        let origin = tx_coords[0];
        for &a in &rx_coords {
            let t = (a - origin) / tx_pitch - 0.5;
            let nearest = t.round();
            if (t - nearest).abs() * tx_pitch > PLACEMENT_TOLERANCE_M
                || nearest < 0.0
                || nearest > (n - 2) as f64
            {
                return Err(GeometryError::ApPlacement(format!(
                    "AP coordinate {a} m does not sit at a device-square center \
                     (device pitch {tx_pitch} m, derived AP pitch {rx_pitch} m)"
                )));
            }
        }
    }

    let mut tx_pos = Vec::with_capacity(n * n);
    for &y in &tx_coords {
        for &x in &tx_coords {
            tx_pos.push([x, y, 0.0]);
        }
    }
    let mut rx_pos = Vec::with_capacity(m * m);
    for &y in &rx_coords {
        for &x in &rx_coords {
            rx_pos.push([x, y, scenario.height_m]);
        }
    }
    Ok((tx_pos, rx_pos))
}

fn centered_coords(count: usize, pitch: f64) -> Vec<f64> {
    let half = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| (i as f64 - half) * pitch).collect()
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let dz = b[2] - a[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
