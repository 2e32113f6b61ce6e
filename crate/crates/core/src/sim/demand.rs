use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::layout::{Approach, IntersectionLayout, LaneId, Movement, WalkDirection};
use super::SimError;

/// Hourly volumes of one approach split by movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachVolume {
    pub approach: Approach,
    pub left: f64,
    pub through: f64,
    pub right: f64,
}

/// Oversaturated morning-peak volumes in veh/h.
pub const OVERSATURATED_VOLUMES: [ApproachVolume; 4] = [
    ApproachVolume { approach: Approach::East, left: 413.0, through: 900.0, right: 187.0 },
    ApproachVolume { approach: Approach::West, left: 495.0, through: 1080.0, right: 225.0 },
    ApproachVolume { approach: Approach::North, left: 298.0, through: 1191.0, right: 213.0 },
    ApproachVolume { approach: Approach::South, left: 251.0, through: 1005.0, right: 179.0 },
];

/// Moderate demand is this fraction of the oversaturated volumes.
pub const MODERATE_SCALE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PedestrianClass {
    Normal,
    Elderly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianFlow {
    pub direction: WalkDirection,
    pub class: PedestrianClass,
    pub rate_per_hour: f64,
    pub speed_mps: f64,
}

/// Normal and elderly pedestrian flows used with the elderly-crossing incident.
pub fn elderly_crossing_pedestrians() -> Vec<PedestrianFlow> {
    use PedestrianClass::*;
    use WalkDirection::*;
    let mut flows = Vec::new();
    for dir in [EastWest, WestEast, NorthSouth, SouthNorth] {
        flows.push(PedestrianFlow { direction: dir, class: Normal, rate_per_hour: 300.0, speed_mps: 1.3 });
    }
    for dir in [NorthSouth, SouthNorth] {
        flows.push(PedestrianFlow { direction: dir, class: Elderly, rate_per_hour: 15.0, speed_mps: 0.7 });
    }
    flows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbulanceArrival {
    pub time_s: f64,
    pub lane: LaneId,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Mean vehicle arrival rate per incoming lane, veh/h.
    pub lane_rates_vph: Vec<f64>,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianFlow>,
    #[serde(default)]
    pub ambulances: Vec<AmbulanceArrival>,
}

impl DemandProfile {
    /// Spreads each approach's movement volume evenly over the lanes carrying
    /// that movement, then scales everything by `scale`.
    pub fn from_volumes(
        layout: &IntersectionLayout,
        volumes: &[ApproachVolume],
        scale: f64,
    ) -> Result<Self, SimError> {
        let lanes = layout.lanes();
        let mut rates = vec![0.0; lanes.len()];
        for vol in volumes {
            for (movement, total) in
                [(Movement::Left, vol.left), (Movement::Through, vol.through), (Movement::Right, vol.right)]
            {
                let ids: Vec<LaneId> = lanes
                    .iter()
                    .filter(|l| l.approach == vol.approach && l.movement == movement)
                    .map(|l| l.id)
                    .collect();
                if ids.is_empty() {
                    if total > 0.0 {
                        return Err(SimError::Demand(format!(
                            "{} approach has {} volume but no such lane",
                            vol.approach.name(),
                            movement.name()
                        )));
                    }
                    continue;
                }
                let per_lane = total * scale / ids.len() as f64;
                for id in ids {
                    rates[id] = per_lane;
                }
            }
        }
        let profile = DemandProfile { lane_rates_vph: rates, pedestrians: vec![], ambulances: vec![] };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let Some((lane, r)) =
            self.lane_rates_vph.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(SimError::Demand(format!("lane {lane} has invalid arrival rate {r}")));
        }
        for flow in &self.pedestrians {
            if !(flow.rate_per_hour.is_finite() && flow.rate_per_hour >= 0.0) {
                return Err(SimError::Demand(format!("pedestrian rate {} is invalid", flow.rate_per_hour)));
            }
            if !(flow.speed_mps.is_finite() && flow.speed_mps > 0.0) {
                return Err(SimError::Demand(format!("walking speed {} must be positive", flow.speed_mps)));
            }
        }
        Ok(())
    }

    /// Mean arrivals per second on each lane.
    pub fn mean_per_second(&self) -> Vec<f64> {
        self.lane_rates_vph.iter().map(|r| r / 3600.0).collect()
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<f64, SimError> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(SimError::Demand(format!("negative or non-finite Poisson mean {mean}")));
    }
    if mean == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean).map_err(|e| SimError::Demand(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Draws one step of vehicle arrivals: lane `k` receives Poisson(rate_k · dt / 3600).
pub fn generate_arrivals<R: Rng + ?Sized>(
    profile: &DemandProfile,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(SimError::Demand(format!("dt must be positive, got {dt}")));
    }
    profile
        .lane_rates_vph
        .iter()
        .map(|rate| poisson_draw(rate * dt / 3600.0, rng))
        .collect()
}

/// Draws pedestrian arrivals for one step, one count per configured flow.
pub fn generate_pedestrian_arrivals<R: Rng + ?Sized>(
    profile: &DemandProfile,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<u64>, SimError> {
    profile
        .pedestrians
        .iter()
        .map(|f| poisson_draw(f.rate_per_hour * dt / 3600.0, rng).map(|c| c as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile_with(rates: Vec<f64>) -> DemandProfile {
        DemandProfile { lane_rates_vph: rates, ..Default::default() }
    }

    #[test]
    fn zero_rates_give_zero_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = profile_with(vec![0.0; 16]);
        for _ in 0..100 {
            assert!(generate_arrivals(&p, 1.0, &mut rng).unwrap().iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn east_approach_uses_table_volumes() {
        let layout = IntersectionLayout::four_phase();
        let p = DemandProfile::from_volumes(&layout, &OVERSATURATED_VOLUMES, 1.0).unwrap();
        // left, two through lanes sharing 900, right
        assert_eq!(&p.lane_rates_vph[0..4], &[413.0, 450.0, 450.0, 187.0]);
        let east_total: f64 = p.lane_rates_vph[0..4].iter().sum();
        assert_eq!(east_total, 1500.0);
    }

    #[test]
    fn moderate_is_sixty_percent() {
        let layout = IntersectionLayout::four_phase();
        let over = DemandProfile::from_volumes(&layout, &OVERSATURATED_VOLUMES, 1.0).unwrap();
        let moderate = DemandProfile::from_volumes(&layout, &OVERSATURATED_VOLUMES, MODERATE_SCALE).unwrap();
        for (m, o) in moderate.lane_rates_vph.iter().zip(&over.lane_rates_vph) {
            assert!((m - 0.6 * o).abs() < 1e-9);
        }
    }

    #[test]
    fn empirical_mean_matches_rate() {
        // 1800 veh/h at dt = 1 s has mean 0.5 per step.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = profile_with(vec![1800.0]);
        let n = 100_000;
        let total: f64 = (0..n).map(|_| generate_arrivals(&p, 1.0, &mut rng).unwrap()[0]).sum();
        let mean = total / n as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    #[test]
    fn same_seed_same_draws() {
        let p = profile_with(vec![900.0, 300.0, 1200.0]);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            assert_eq!(generate_arrivals(&p, 1.0, &mut a).unwrap(), generate_arrivals(&p, 1.0, &mut b).unwrap());
        }
    }

    #[test]
    fn negative_rate_is_a_configuration_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = profile_with(vec![100.0, -5.0]);
        assert!(generate_arrivals(&p, 1.0, &mut rng).is_err());
        assert!(p.validate().is_err());
    }

    #[test]
    fn nonpositive_dt_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_arrivals(&profile_with(vec![1.0]), 0.0, &mut rng).is_err());
    }
}
