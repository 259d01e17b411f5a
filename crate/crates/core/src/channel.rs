//! Scenario geometry, path loss, fading and cascaded backscatter channels.
//!
//! The BS transmit and receive arrays are half-wavelength ULAs laid along
//! the y-axis with broadside toward +x, so the angle of a tag is the
//! azimuth `atan2(dy, dx)` seen from the BS. BS–tag links are deterministic
//! LoS steering vectors; BS–user and tag–user links are Rayleigh (or
//! Rician) fading.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, complex_normal, complex_normal_vec, CMat, CVec};
use crate::{Error, Result};

pub type Point = [f64; 2];

pub const TABLE2_BS: Point = [0.0, 0.0];
pub const TABLE2_USER: Point = [12.0, 0.0];
pub const TABLE2_TAG_CENTER: Point = [6.0, -4.0];
pub const TABLE2_TAG_RADIUS: f64 = 3.0;
pub const TABLE2_CARRIER_HZ: f64 = 3.0e9;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_position: Point,
    pub user_position: Point,
    pub tag_positions: Vec<Point>,
    pub carrier_freq_hz: f64,
    pub num_tx: usize,
    pub num_rx: usize,
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Scenario {
    pub fn new(
        bs_position: Point,
        user_position: Point,
        tag_positions: Vec<Point>,
        carrier_freq_hz: f64,
        num_tx: usize,
        num_rx: usize,
    ) -> Result<Self> {
        let s = Self { bs_position, user_position, tag_positions, carrier_freq_hz, num_tx, num_rx };
        s.validate()?;
        Ok(s)
    }

    /// Reference layout: BS at the origin, user at (12, 0), `num_tags` tags
    /// uniform over the disc of radius 3 m centred at (6, -4).
    pub fn table2<R: Rng + ?Sized>(num_tx: usize, num_rx: usize, num_tags: usize, rng: &mut R) -> Result<Self> {
        let tags = (0..num_tags)
            .map(|_| {
                let r = TABLE2_TAG_RADIUS * rng.random::<f64>().sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                [TABLE2_TAG_CENTER[0] + r * phi.cos(), TABLE2_TAG_CENTER[1] + r * phi.sin()]
            })
            .collect();
        Self::new(TABLE2_BS, TABLE2_USER, tags, TABLE2_CARRIER_HZ, num_tx, num_rx)
    }

    pub fn num_tags(&self) -> usize {
        self.tag_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx == 0 || self.num_rx == 0 {
            return Err(Error::Domain("antenna counts must be at least 1".into()));
        }
        if self.tag_positions.is_empty() {
            return Err(Error::Domain("at least one tag is required".into()));
        }
        if !(self.carrier_freq_hz > 0.0) {
            return Err(Error::Domain("carrier frequency must be positive".into()));
        }
        if distance(self.bs_position, self.user_position) <= 0.0 {
            return Err(Error::Domain("user co-located with the BS".into()));
        }
        for (k, &t) in self.tag_positions.iter().enumerate() {
            if distance(self.bs_position, t) <= 0.0 || distance(t, self.user_position) <= 0.0 {
                return Err(Error::Domain(format!("tag {k} co-located with the BS or the user")));
            }
        }
        Ok(())
    }

    /// Angle of tag `k` off the array broadside, in radians.
    pub fn tag_angle(&self, k: usize) -> f64 {
        let t = self.tag_positions[k];
        (t[1] - self.bs_position[1]).atan2(t[0] - self.bs_position[0])
    }

    pub fn user_angle(&self) -> f64 {
        let u = self.user_position;
        (u[1] - self.bs_position[1]).atan2(u[0] - self.bs_position[0])
    }
}

/// Link classes of the UMi path-loss model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    /// BS–tag links, line of sight.
    BsTag,
    /// BS–user and tag–user links, non line of sight.
    Comm,
}

/// UMi path loss as a linear power gain.
pub fn path_loss(distance_m: f64, class: LinkClass, carrier_freq_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!("path loss needs a positive distance, got {distance_m}")));
    }
    let f_ghz = carrier_freq_hz / 1e9;
    let pl_db = match class {
        LinkClass::BsTag => 22.0 * distance_m.log10() + 28.0 + 20.0 * f_ghz.log10(),
        LinkClass::Comm => 36.7 * distance_m.log10() + 22.7 + 26.0 * f_ghz.log10(),
    };
    Ok(10f64.powf(-pl_db / 10.0))
}

/// ULA response `sqrt(gain / B) [1, e^{j pi sin t}, ..., e^{j pi (B-1) sin t}]^T`.
pub fn steering_vector(theta: f64, num_elements: usize, gain: f64) -> CVec {
    assert!(num_elements >= 1, "steering vector needs at least one element");
    let amp = (gain / num_elements as f64).sqrt();
    let phase = PI * theta.sin();
    CVec::from_fn(num_elements, |b, _| Complex64::from_polar(amp, phase * b as f64))
}

/// `sqrt(gain) * a`, `a ~ CN(0, I)`.
pub fn rayleigh_sample<R: Rng + ?Sized>(gain: f64, dim: usize, rng: &mut R) -> CVec {
    complex_normal_vec(dim, rng) * c(gain.sqrt(), 0.0)
}

/// Rician mixture of a deterministic LoS vector and a Rayleigh draw.
/// `kappa = 0` consumes the generator exactly like [`rayleigh_sample`] and
/// returns the same vector.
pub fn rician_sample<R: Rng + ?Sized>(gain: f64, kappa: f64, los: &CVec, rng: &mut R) -> Result<CVec> {
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("Rician factor must be non-negative, got {kappa}")));
    }
    let nlos = complex_normal_vec(los.len(), rng);
    let w_los = (kappa / (kappa + 1.0)).sqrt();
    let w_nlos = (1.0 / (kappa + 1.0)).sqrt();
    let root = gain.sqrt();
    Ok(CVec::from_fn(los.len(), |i, _| (los[i] * w_los + nlos[i] * w_nlos) * root))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    Rayleigh,
    Rician,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    pub model: FadingModel,
    pub rician_kappa: f64,
}

impl FadingSpec {
    pub const RAYLEIGH: FadingSpec = FadingSpec { model: FadingModel::Rayleigh, rician_kappa: 0.0 };

    pub fn rician(kappa: f64) -> Self {
        Self { model: FadingModel::Rician, rician_kappa: kappa }
    }
}

impl Default for FadingSpec {
    fn default() -> Self {
        Self::RAYLEIGH
    }
}

/// One realization of every link in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → user, length M.
    pub f: CVec,
    /// BS → tag k, length M.
    pub g_f: Vec<CVec>,
    /// Tag k → BS receive array, length N.
    pub g_b: Vec<CVec>,
    /// Tag k → user.
    pub v: Vec<Complex64>,
    /// Cascaded BS → tag k → user channel, `g_f[k] * v[k]`.
    pub h: Vec<CVec>,
    /// Round-trip reflection matrices `g_b[k] g_f[k]^H`, N × M.
    pub g: Vec<CMat>,
    pub theta: Vec<f64>,
    /// BS–tag path-loss gains, one per tag.
    pub zeta_bs_tag: Vec<f64>,
}

impl ChannelSet {
    /// Assembles the cascaded channels from the individual links.
    pub fn from_links(f: CVec, g_f: Vec<CVec>, g_b: Vec<CVec>, v: Vec<Complex64>, theta: Vec<f64>) -> Result<Self> {
        let k = g_f.len();
        if g_b.len() != k || v.len() != k || theta.len() != k {
            return Err(Error::Dimension("per-tag link lists differ in length".into()));
        }
        let m = f.len();
        if g_f.iter().any(|x| x.len() != m) {
            return Err(Error::Dimension("forward tag channel length differs from M".into()));
        }
        let n = g_b.first().map_or(0, |x| x.len());
        if g_b.iter().any(|x| x.len() != n) {
            return Err(Error::Dimension("backward tag channels differ in length".into()));
        }
        let zeta_bs_tag = g_f.iter().map(|x| x.norm_squared()).collect();
        let mut set = Self { f, g_f, g_b, v, h: Vec::new(), g: Vec::new(), theta, zeta_bs_tag };
        set.assemble();
        Ok(set)
    }

    fn assemble(&mut self) {
        self.h = self.g_f.iter().zip(&self.v).map(|(gf, &v)| gf * v).collect();
        self.g = self.g_b.iter().zip(&self.g_f).map(|(gb, gf)| gb * gf.adjoint()).collect();
    }

    pub fn num_tx(&self) -> usize {
        self.f.len()
    }

    pub fn num_rx(&self) -> usize {
        self.g_b.first().map_or(0, |x| x.len())
    }

    pub fn num_tags(&self) -> usize {
        self.g_f.len()
    }

    /// The same channels with every tag removed.
    pub fn without_tags(&self) -> Self {
        Self {
            f: self.f.clone(),
            g_f: Vec::new(),
            g_b: Vec::new(),
            v: Vec::new(),
            h: Vec::new(),
            g: Vec::new(),
            theta: Vec::new(),
            zeta_bs_tag: Vec::new(),
        }
    }
}

/// Draws the fading links and assembles a [`ChannelSet`] for `scenario`.
///
/// The generator is consumed in a fixed order (f, then v_1..v_K) so that
/// Rayleigh and Rician runs with the same seed share their NLoS draws.
pub fn build_channel_set<R: Rng + ?Sized>(scenario: &Scenario, fading: FadingSpec, rng: &mut R) -> Result<ChannelSet> {
    scenario.validate()?;
    let m = scenario.num_tx;
    let n = scenario.num_rx;
    let fc = scenario.carrier_freq_hz;
    let zeta_f = path_loss(distance(scenario.bs_position, scenario.user_position), LinkClass::Comm, fc)?;

    let f = match fading.model {
        FadingModel::Rayleigh => rayleigh_sample(zeta_f, m, rng),
        FadingModel::Rician => {
            // Unit-modulus LoS entries keep E|f_m|^2 equal to the path loss.
            let los = steering_vector(scenario.user_angle(), m, m as f64);
            rician_sample(zeta_f, fading.rician_kappa, &los, rng)?
        }
    };

    let k_tags = scenario.num_tags();
    let mut g_f = Vec::with_capacity(k_tags);
    let mut g_b = Vec::with_capacity(k_tags);
    let mut v = Vec::with_capacity(k_tags);
    let mut theta = Vec::with_capacity(k_tags);
    for k in 0..k_tags {
        let tag = scenario.tag_positions[k];
        let th = scenario.tag_angle(k);
        if th.abs() > PI / 2.0 {
            return Err(Error::Domain(format!("tag {k} lies behind the BS array (angle {th:.3} rad)")));
        }
        let zeta_bt = path_loss(distance(scenario.bs_position, tag), LinkClass::BsTag, fc)?;
        let zeta_v = path_loss(distance(tag, scenario.user_position), LinkClass::Comm, fc)?;
        g_f.push(steering_vector(th, m, zeta_bt));
        g_b.push(steering_vector(th, n, zeta_bt));
        theta.push(th);
        let vk = match fading.model {
            FadingModel::Rayleigh => complex_normal(rng) * zeta_v.sqrt(),
            FadingModel::Rician => {
                let los = CVec::from_element(1, c(1.0, 0.0));
                rician_sample(zeta_v, fading.rician_kappa, &los, rng)?[0]
            }
        };
        v.push(vk);
    }
    ChannelSet::from_links(f, g_f, g_b, v, theta)
}

/// Perturbs `f` and every `v_k` with `CN(0, eta |x|^2)` estimation error and
/// recomputes the cascaded channels. Steering channels are left untouched.
pub fn apply_csi_error<R: Rng + ?Sized>(ch: &ChannelSet, eta: f64, rng: &mut R) -> Result<ChannelSet> {
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("CSI error coefficient must be non-negative, got {eta}")));
    }
    let perturb = |x: Complex64, rng: &mut R| x + complex_normal(rng) * (eta * x.norm_sqr()).sqrt();
    let f = CVec::from_iterator(ch.f.len(), ch.f.iter().map(|&x| perturb(x, rng)).collect::<Vec<_>>());
    let v = ch.v.iter().map(|&x| perturb(x, rng)).collect();
    let mut out = ChannelSet { f, v, ..ch.clone() };
    out.assemble();
    Ok(out)
}

/// Counter-based seed for trial `index` of a run seeded with `base_seed`.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Independent generator for (`seed`, `stream`).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
