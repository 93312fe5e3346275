//! Run configuration: one TOML document with dotted sections, overridable
//! key by key.
//!
//! ```toml
//! [scene]
//! model = "b"        # a | b | c | wall | none
//! eps = 4.0
//! wall = false
//! domain = "target"  # standard (3.2 m cube) | target (cube around the target)
//! domain_side = 1.0
//!
//! [geometry]
//! length = 1.8333
//! count = 21
//!
//! [convexify]
//! lambda = 2.0
//! ```
//!
//! Missing keys take their defaults. Lengths are in meters, times in
//! seconds, frequencies in rad/s. Overrides use `section.key=value`, the
//! value being a TOML literal (a bare word is read as a string).

use crate::convexify::{CarlemanParams, DescentMetric, DescentOptions, GridSpec, InversionSetup, SlantWindow, StartKind};
use crate::error::{Error, Result};
use crate::forward::{FrequencyBand, LsOptions};
use crate::postprocess::{Amplitude, FilterParams, EPS_FLOOR};
use crate::preprocess::{CalibrationOptions, DelaySumParams};
use crate::scene::{Body, Phantom3D, Pulse, ScanGeometry};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub geometry: ScanGeometry,
    pub pulse: Pulse,
    pub band: BandConfig,
    pub forward: ForwardConfig,
    pub preprocess: PreprocessConfig,
    pub convexify: ConvexifyConfig,
    pub postprocess: PostprocessConfig,
    pub calibration: CalibrationConfig,
    pub born: BornConfig,
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    A,
    B,
    C,
    /// Wall alone.
    Wall,
    /// Empty domain.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// The 3.2 m cube of the reference models.
    Standard,
    /// A cube of `domain_side` centred on the target.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub model: Model,
    /// Target ε of models B and C (model A is fixed at 2.5).
    pub eps: f64,
    pub wall: bool,
    pub domain: DomainKind,
    pub domain_side: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            model: Model::B,
            eps: 4.0,
            wall: true,
            domain: DomainKind::Standard,
            domain_side: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    /// Explicit bounds in rad/m; both zero selects the chirp's sweep.
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            k_min: 0.0,
            k_max: 0.0,
            n_k: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub voxel_pitch: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub radial: usize,
    pub angular: usize,
    /// Trace sampling step and record length as path lengths `c0 t` (m).
    pub trace_step: f64,
    pub trace_length: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        let ls = LsOptions::default();
        ForwardConfig {
            voxel_pitch: ls.voxel_pitch,
            tol: ls.tol,
            max_iter: ls.max_iter,
            restart: ls.restart,
            radial: ls.radial,
            angular: ls.angular,
            trace_step: 0.02,
            trace_length: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Shortest wavelength entering the beamwidth `θ0 = 1.02 l_min / D`.
    pub l_min: f64,
    pub count_normalize: bool,
    /// Subtract a wall-only run from the raw traces.
    pub subtract_wall: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            l_min: 0.33,
            count_normalize: false,
            subtract_wall: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexifyConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub b_bar: f64,
    pub d_xi: f64,
    pub d_t: f64,
    pub max_iter: usize,
    pub smoothing: f64,
    pub radius: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for ConvexifyConfig {
    fn default() -> Self {
        let p = CarlemanParams::default();
        ConvexifyConfig {
            lambda: p.lambda,
            alpha: p.alpha,
            gamma: p.gamma,
            b_bar: 10.0,
            d_xi: 0.01,
            d_t: 0.02,
            max_iter: DescentOptions::default().max_iter,
            smoothing: 0.01,
            radius: 1e3,
            rho_min: 5.47,
            rho_max: 9.83,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub n0: usize,
    pub sigma: f64,
    pub eps_floor: f64,
    pub eps_cap: f64,
    pub amplitude: Amplitude,
    /// Restrict peak candidates to one pulse length after the echo onset.
    pub onset_gate: bool,
    /// Onset level relative to the largest sample over all antennas.
    pub onset_level: f64,
    pub refine: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            n0: 1,
            sigma: 0.15,
            eps_floor: EPS_FLOOR,
            eps_cap: 10.0,
            amplitude: Amplitude::Model,
            onset_gate: true,
            onset_level: 0.05,
            refine: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Fixed calibration factor; 0 searches for it on model A.
    pub cf: f64,
    pub target_eps: f64,
    pub tol: f64,
    pub log_lo: f64,
    pub log_hi: f64,
    pub iterations: usize,
    pub scan: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            cf: 0.0,
            target_eps: 2.5,
            tol: 0.05,
            log_lo: 0.0,
            log_hi: 12.0,
            iterations: 40,
            scan: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornConfig {
    pub enabled: bool,
    pub beta: f64,
    /// Search β on model A so that its maximum ε matches `target_max`.
    pub calibrate: bool,
    pub target_max: f64,
    pub tol: f64,
    pub voxel_pitch: f64,
}

impl Default for BornConfig {
    fn default() -> Self {
        BornConfig {
            enabled: false,
            beta: 1e-4,
            calibrate: true,
            target_max: 2.5,
            tol: 0.05,
            voxel_pitch: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub rng_seed: u64,
    /// Standard deviation of additive trace noise relative to the largest
    /// raw sample; 0 adds none.
    pub noise: f64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            rng_seed: 1,
            noise: 0.0,
            threads: 0,
            out_dir: "out".into(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: SceneConfig::default(),
            geometry: ScanGeometry::standard(),
            pulse: Pulse::standard(),
            band: BandConfig::default(),
            forward: ForwardConfig::default(),
            preprocess: PreprocessConfig::default(),
            convexify: ConvexifyConfig::default(),
            postprocess: PostprocessConfig::default(),
            calibration: CalibrationConfig::default(),
            born: BornConfig::default(),
            run: RunSection::default(),
        }
    }
}

impl RunConfig {
    /// Reduced scale that runs on a desk in minutes: 21 antennas at the
    /// reference spacing and a wall-free 1 m domain around the target. The
    /// inversion grid stays at the defaults; a coarser one makes
    /// neighbouring antennas disagree by a factor of several.
    pub fn desk() -> Self {
        let mut c = RunConfig::default();
        c.geometry.count = 21;
        c.geometry.length = 20.0 * 5.5 / 60.0;
        c.scene.wall = false;
        c.scene.domain = DomainKind::Target;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `section.key=value` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(&self, sets: &[S]) -> Result<Self> {
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for s in sets {
            let s = s.as_ref();
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            let keys: Vec<&str> = path.trim().split('.').collect();
            let mut node = &mut doc;
            for (i, k) in keys.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{path}` does not name a key")))?;
                if i + 1 == keys.len() {
                    if !table.contains_key(*k) {
                        return Err(Error::Config(format!("unknown key `{path}`")));
                    }
                    table.insert(k.to_string(), value.clone());
                    break;
                }
                node = table
                    .get_mut(*k)
                    .ok_or_else(|| Error::Config(format!("unknown section in `{path}`")))?;
            }
        }
        let c: RunConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        Pulse::new(self.pulse.omega0, self.pulse.chirp_rate, self.pulse.tau)?;
        self.band()?;
        self.carleman().validate()?;
        self.grid()?;
        if !(self.convexify.rho_max > self.convexify.rho_min && self.convexify.rho_min >= 0.0) {
            return Err(Error::param("convexify.rho_max", "need 0 ≤ rho_min < rho_max"));
        }
        if self.postprocess.n0 == 0 {
            return Err(Error::param("postprocess.n0", "need at least one object"));
        }
        if !(self.postprocess.sigma > 0.0) {
            return Err(Error::param("postprocess.sigma", "must be positive"));
        }
        if self.postprocess.refine == 0 {
            return Err(Error::param("postprocess.refine", "must be at least 1"));
        }
        if !(self.born.beta > 0.0 && self.born.voxel_pitch > 0.0) {
            return Err(Error::param("born.beta", "beta and voxel pitch must be positive"));
        }
        if !(self.forward.trace_step > 0.0 && self.forward.trace_length > 0.0) {
            return Err(Error::param("forward.trace_step", "step and length must be positive"));
        }
        if !(self.scene.eps >= 1.0) {
            return Err(Error::param("scene.eps", "must be at least 1"));
        }
        self.phantom()?;
        Ok(())
    }

    pub fn band(&self) -> Result<FrequencyBand> {
        if self.band.k_min == 0.0 && self.band.k_max == 0.0 {
            FrequencyBand::swept(&self.pulse, self.geometry.c0, self.band.n_k)
        } else {
            FrequencyBand::new(self.band.k_min, self.band.k_max, self.band.n_k)
        }
    }

    pub fn ls_options(&self) -> LsOptions {
        let f = &self.forward;
        LsOptions {
            voxel_pitch: f.voxel_pitch,
            tol: f.tol,
            max_iter: f.max_iter,
            restart: f.restart,
            radial: f.radial,
            angular: f.angular,
        }
    }

    pub fn delay_sum(&self) -> Result<DelaySumParams> {
        let mut p = DelaySumParams::from_wavelength(self.preprocess.l_min, self.geometry.dish, self.geometry.c0)?;
        p.count_normalize = self.preprocess.count_normalize;
        Ok(p)
    }

    pub fn carleman(&self) -> CarlemanParams {
        CarlemanParams {
            lambda: self.convexify.lambda,
            alpha: self.convexify.alpha,
            gamma: self.convexify.gamma,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::from_bound(self.convexify.b_bar, self.convexify.d_xi, self.convexify.d_t)
    }

    pub fn window(&self) -> SlantWindow {
        SlantWindow {
            rho_min: self.convexify.rho_min,
            rho_max: self.convexify.rho_max,
        }
    }

    pub fn inversion(&self) -> Result<InversionSetup> {
        let c = &self.convexify;
        Ok(InversionSetup {
            grid: self.grid()?,
            params: self.carleman(),
            window: self.window(),
            smoothing: c.smoothing,
            baseline: 0.0,
            descent: DescentOptions {
                max_iter: c.max_iter,
                ..DescentOptions::default()
            },
            metric: DescentMetric::GaussNewton,
            start: StartKind::Linearized,
            radius: c.radius,
        })
    }

    pub fn filter(&self) -> FilterParams {
        let p = &self.postprocess;
        // 2 c0 τ |cos θ| / ρ_max is already dimensionless: scaled ξ units.
        let rho = FilterParams::sr_resolution(&self.pulse, &self.geometry, self.convexify.rho_max);
        FilterParams {
            eps_cap: p.eps_cap,
            amplitude: p.amplitude,
            ..FilterParams::new(p.n0, rho)
        }
    }

    pub fn calibration_options(&self) -> CalibrationOptions {
        let c = &self.calibration;
        CalibrationOptions {
            log_lo: c.log_lo,
            log_hi: c.log_hi,
            iterations: c.iterations,
            tol: c.tol,
            scan: c.scan,
        }
    }

    /// Phantom of `scene`, in the configured domain.
    pub fn phantom(&self) -> Result<Phantom3D> {
        self.phantom_of(self.scene.model)
    }

    /// Phantom of another model under the same scene settings.
    pub fn phantom_of(&self, model: Model) -> Result<Phantom3D> {
        let s = &self.scene;
        let base = match model {
            Model::A => Phantom3D::model_a(s.wall),
            Model::B => Phantom3D::model_b(s.eps, s.wall),
            Model::C => Phantom3D::model_c(s.eps, s.wall),
            Model::Wall => Phantom3D::wall_only(),
            Model::None => {
                let (c, side) = Phantom3D::standard_domain();
                Phantom3D::new(c, side, None, vec![])?
            }
        };
        match (s.domain, base.targets.first()) {
            (DomainKind::Target, Some(t)) => {
                let keep: Vec<Body> = base.targets.clone();
                Phantom3D::new(t.shape.center(), s.domain_side, base.wall.filter(|_| s.wall), keep)
            }
            _ => {
                base.validate()?;
                Ok(base)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
        assert_eq!(c.convexify.gamma, 1e-8);
        assert_eq!((c.convexify.d_xi, c.convexify.d_t), (0.01, 0.02));
        assert_eq!((c.postprocess.sigma, c.born.beta), (0.15, 1e-4));
    }

    #[test]
    fn overrides() {
        let c = RunConfig::desk()
            .with_overrides(&["convexify.lambda=1.0", "scene.model=c", "run.out_dir=tmp/x"])
            .unwrap();
        assert_eq!(c.convexify.lambda, 1.0);
        assert_eq!(c.scene.model, Model::C);
        assert_eq!(c.run.out_dir, "tmp/x");
        assert!(RunConfig::default().with_overrides(&["convexify.nope=1"]).is_err());
        assert!(RunConfig::default().with_overrides(&["convexify.alpha=0.7"]).is_err());
        assert!(RunConfig::default().with_overrides(&["lambda"]).is_err());
        assert!(RunConfig::from_toml("[convexify]\nlamda = 2").is_err());
    }

    #[test]
    fn target_domain_is_centred() {
        let p = RunConfig::desk().phantom().unwrap();
        assert_eq!(p.domain_center, [0.0, 6.0, 4.61]);
        assert!(p.wall.is_none());
        assert_eq!(p.eval_eps(&[0.0, 6.0, 4.61]), 4.0);
    }
}
