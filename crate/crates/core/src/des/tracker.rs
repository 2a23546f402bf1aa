use crate::error::{Error, Result};

/// Integrates one source's AoI sawtooth exactly.
///
/// Between deliveries the age grows with slope 1 from `t - U`, where `U`
/// is the generation time of the freshest delivered packet; at a delivery
/// it drops to `t - g`. Areas are closed-form trapezoids, so no time
/// discretization is involved.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiTracker {
    integrated_to: f64,
    freshest_generation: f64,
    area: f64,
    deliveries: u64,
    delivered_any: bool,
}

impl Default for AoiTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl AoiTracker {
    /// Age zero at time zero (`U(0) = 0`).
    pub fn new() -> Self {
        Self { integrated_to: 0.0, freshest_generation: 0.0, area: 0.0, deliveries: 0, delivered_any: false }
    }

    pub fn age_at(&self, t: f64) -> f64 {
        t - self.freshest_generation
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn deliveries(&self) -> u64 {
        self.deliveries
    }

    pub fn freshest_generation(&self) -> f64 {
        self.freshest_generation
    }

    fn piece(&self, t: f64) -> f64 {
        let t0 = self.integrated_to;
        (t - t0) * (self.age_at(t) + self.age_at(t0)) * 0.5
    }

    /// Adds the area up to `t` without a delivery and returns that piece.
    pub fn advance(&mut self, t: f64) -> Result<f64> {
        if t < self.integrated_to {
            return Err(Error::Invariant(format!("AoI integration moved backwards from {} to {t}", self.integrated_to)));
        }
        let piece = self.piece(t);
        self.area += piece;
        self.integrated_to = t;
        Ok(piece)
    }

    /// Delivery at time `t` of a packet generated at `g`. Returns the area
    /// added since the last integration point.
    pub fn record_delivery(&mut self, t: f64, g: f64) -> Result<f64> {
        if g > t {
            return Err(Error::Invariant(format!("packet generated at {g} delivered earlier, at {t}")));
        }
        if g < self.freshest_generation || (self.delivered_any && g == self.freshest_generation) {
            return Err(Error::Invariant(format!("stale delivery: generation {g} after freshest {}", self.freshest_generation)));
        }
        let piece = self.advance(t)?;
        self.freshest_generation = g;
        self.deliveries += 1;
        self.delivered_any = true;
        Ok(piece)
    }

    /// Discards everything integrated so far and starts a measurement
    /// window at `t`. The age process itself carries over.
    pub fn start_window(&mut self, t: f64) -> Result<()> {
        self.advance(t)?;
        self.area = 0.0;
        self.deliveries = 0;
        Ok(())
    }
}

/// Which of the two arrival events a new packet falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrivalClass {
    /// The previous packet of the same source is still in the system.
    PreviousInSystem,
    /// The previous packet of the same source has already been delivered.
    PreviousDelivered,
}

/// Classifies an arrival from the number of same-source packets currently
/// in the system. The first packet of a source has no predecessor and is
/// left unclassified.
pub fn classify_arrival(same_source_in_system: usize, has_predecessor: bool) -> Option<ArrivalClass> {
    if !has_predecessor {
        None
    } else if same_source_in_system > 0 {
        Some(ArrivalClass::PreviousInSystem)
    } else {
        Some(ArrivalClass::PreviousDelivered)
    }
}
