//! Gray-coded square QAM mapping and slicing.

use num_complex::Complex64;
use polsnr_core::QamOrder;

fn gray_encode(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn gray_decode(mut g: u32) -> u32 {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Square QAM constellation with average symbol energy `sigma2`.
///
/// A label's upper half of bits selects the in-phase level and the lower
/// half the quadrature level, each Gray coded, so nearest neighbours differ
/// in one bit.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: QamOrder,
    scale: f64,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(order: QamOrder, sigma2: f64) -> Self {
        let m = order.order() as f64;
        let scale = (sigma2 / (2.0 * (m - 1.0) / 3.0)).sqrt();
        let mut c = Self {
            order,
            scale,
            points: Vec::new(),
        };
        c.points = (0..order.order()).map(|l| c.map_uncached(l)).collect();
        c
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.bits_per_symbol()
    }

    /// Unscaled axis level for a Gray-coded axis label.
    fn level(&self, axis_label: u32) -> f64 {
        let side = self.order.side();
        2.0 * gray_decode(axis_label) as f64 - (side as f64 - 1.0)
    }

    fn map_uncached(&self, label: u32) -> Complex64 {
        let half = self.order.bits_per_symbol() / 2;
        let mask = (1 << half) - 1;
        Complex64::new(self.level(label >> half), self.level(label & mask)) * self.scale
    }

    pub fn map(&self, label: u32) -> Complex64 {
        self.points[label as usize]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    fn slice_axis(&self, v: f64) -> u32 {
        let side = self.order.side() as f64;
        let idx = ((v / self.scale + side - 1.0) / 2.0).round().clamp(0.0, side - 1.0);
        gray_encode(idx as u32)
    }

    /// Label of the nearest constellation point.
    pub fn slice(&self, z: Complex64) -> u32 {
        let half = self.order.bits_per_symbol() / 2;
        (self.slice_axis(z.re) << half) | self.slice_axis(z.im)
    }

    pub fn decide(&self, z: Complex64) -> Complex64 {
        self.map(self.slice(z))
    }
}
