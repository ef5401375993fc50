//! The two-stage denoiser.
//!
//! The synthesis network maps the normalized parallax features of a noisy
//! light field to all of its views in one pass. The compensation network then
//! runs once per view on `{smoothed view - x_avg, synthesized view}` and
//! predicts that view's offset from `x_avg`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{
    build_syn_input, build_view_input, compute_isotropic, gaussian_smooth_sai, ApaFeatures,
    GaussianParams, GuidedFilterParams,
};
use crate::lf::{Image, LightField, PatchSet, Stack};
use crate::nn::adam::TrainHyper;
use crate::nn::checkpoint::{Checkpoint, Metadata};
use crate::nn::init::xavier_layer;
use crate::nn::network::{Network, NetworkDef};
use crate::nn::train::{train_network, LogRecord, TrainSummary};
use crate::noise::{add_awgn, NoiseConfig};
use crate::seed::derive_seed;

/// Kernel sizes of the four layers of both networks.
pub const KERNELS: [usize; 4] = [11, 5, 3, 1];

/// Noise levels a network pair is normally trained for.
pub const SIGMA_LEVELS: [f64; 3] = [10.0, 20.0, 50.0];

/// How the synthesis network's output becomes the synthesized light field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynMode {
    /// The output is the light field itself; every layer ends in a ReLU.
    Absolute,
    /// The output is added to `x_avg`; the last layer is linear.
    Residual,
}

impl fmt::Display for SynMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynMode::Absolute => "absolute",
            SynMode::Residual => "residual",
        })
    }
}

impl FromStr for SynMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(SynMode::Absolute),
            "residual" => Ok(SynMode::Residual),
            _ => Err(Error::Config(format!(
                "syn mode must be 'absolute' or 'residual', got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynNetConfig {
    pub hidden: [usize; 3],
    pub mode: SynMode,
}

impl Default for SynNetConfig {
    fn default() -> Self {
        SynNetConfig {
            hidden: [64, 64, 64],
            mode: SynMode::Residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewNetConfig {
    pub hidden: [usize; 3],
    /// One network per view instead of one shared network.
    pub per_sai: bool,
}

impl Default for ViewNetConfig {
    fn default() -> Self {
        ViewNetConfig {
            hidden: [32, 32, 16],
            per_sai: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `hyper.seed` is the root seed of the whole run.
    pub hyper: TrainHyper,
    pub sigma_255: f64,
    pub patch_size: usize,
    pub stride: usize,
    pub guided: GuidedFilterParams,
    pub gaussian: GaussianParams,
    pub syn_net: SynNetConfig,
    pub view_net: ViewNetConfig,
    /// Caps the view-stage patches drawn per view and scene; every view gets
    /// the same count.
    pub view_patches_per_sai: Option<usize>,
}

impl TrainConfig {
    pub fn for_sigma(sigma_255: f64) -> Self {
        TrainConfig {
            hyper: TrainHyper::default(),
            sigma_255,
            patch_size: 32,
            stride: 16,
            guided: GuidedFilterParams::default(),
            gaussian: GaussianParams::for_sigma(sigma_255),
            syn_net: SynNetConfig::default(),
            view_net: ViewNetConfig::default(),
            view_patches_per_sai: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_255 > 0.0 && self.sigma_255 <= 255.0) {
            return Err(Error::InvalidParam(format!(
                "training sigma must be in (0, 255], got {}",
                self.sigma_255
            )));
        }
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::InvalidParam(
                "patch size and stride must be positive".into(),
            ));
        }
        if self.syn_net.hidden.contains(&0) || self.view_net.hidden.contains(&0) {
            return Err(Error::InvalidParam("hidden widths must be positive".into()));
        }
        if self.view_patches_per_sai == Some(0) {
            return Err(Error::InvalidParam(
                "view_patches_per_sai must be positive".into(),
            ));
        }
        self.hyper.validate()?;
        self.guided.validate()
    }
}

fn four_layers<R: rand::Rng>(
    chain: [usize; 5],
    last_relu: bool,
    rng: &mut R,
) -> Result<NetworkDef> {
    let layers = (0..4)
        .map(|i| xavier_layer(chain[i], chain[i + 1], KERNELS[i], i < 3 || last_relu, rng))
        .collect();
    Network::new(layers)
}

/// `(n_h + n_v) → c1 → c2 → c3 → n_h·n_v`, Xavier-initialized.
pub fn build_syn_net<R: rand::Rng>(
    n_h: usize,
    n_v: usize,
    cfg: &SynNetConfig,
    rng: &mut R,
) -> Result<NetworkDef> {
    let [c1, c2, c3] = cfg.hidden;
    four_layers(
        [n_h + n_v, c1, c2, c3, n_h * n_v],
        cfg.mode == SynMode::Absolute,
        rng,
    )
}

/// `2 → c1 → c2 → c3 → 1` with a linear last layer.
pub fn build_view_net<R: rand::Rng>(cfg: &ViewNetConfig, rng: &mut R) -> Result<NetworkDef> {
    let [c1, c2, c3] = cfg.hidden;
    four_layers([2, c1, c2, c3, 1], false, rng)
}

fn hidden_of(net: &NetworkDef) -> [usize; 3] {
    [
        net.layers[0].out_ch,
        net.layers[1].out_ch,
        net.layers[2].out_ch,
    ]
}

fn meta_get<'a>(meta: &'a Metadata, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Checkpoint(format!("missing metadata key '{key}'")))
}

fn meta_parse<T: FromStr>(meta: &Metadata, key: &str) -> Result<T> {
    let raw = meta_get(meta, key)?;
    raw.parse()
        .map_err(|_| Error::Checkpoint(format!("bad metadata value {key}={raw}")))
}

fn check_role(meta: &Metadata, want: &str) -> Result<()> {
    let role = meta_get(meta, "role")?;
    if role != want {
        return Err(Error::Checkpoint(format!(
            "expected a {want} checkpoint, got role '{role}'"
        )));
    }
    Ok(())
}

fn check_four_layers(net: &NetworkDef, what: &str) -> Result<()> {
    let kernels: Vec<usize> = net.layers.iter().map(|l| l.kernel).collect();
    if kernels != KERNELS {
        return Err(Error::Checkpoint(format!(
            "{what} kernels {kernels:?}, expected {KERNELS:?}"
        )));
    }
    Ok(())
}

/// Trained synthesis network plus everything inference needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct SynModel {
    pub net: NetworkDef,
    pub n_h: usize,
    pub n_v: usize,
    pub sigma_255: f64,
    pub mode: SynMode,
    pub guided: GuidedFilterParams,
    pub seed: u64,
}

/// Output of the synthesis stage on one light field.
#[derive(Debug, Clone, PartialEq)]
pub struct SynPrediction {
    pub features: ApaFeatures,
    /// Network output, one channel per view.
    pub raw: Stack,
    /// Synthesized light field, not clamped.
    pub lf_syn: LightField,
}

impl SynModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = Metadata::new();
        meta.insert("role".into(), "syn".into());
        meta.insert("sigma_255".into(), self.sigma_255.to_string());
        meta.insert("mode".into(), self.mode.to_string());
        meta.insert("n_h".into(), self.n_h.to_string());
        meta.insert("n_v".into(), self.n_v.to_string());
        meta.insert("guided.radius".into(), self.guided.radius.to_string());
        meta.insert("guided.epsilon".into(), self.guided.epsilon.to_string());
        let [a, b, c] = hidden_of(&self.net);
        meta.insert("hidden".into(), format!("{a},{b},{c}"));
        meta.insert("seed".into(), self.seed.to_string());
        Checkpoint {
            layers: self.net.layers.clone(),
            meta,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        check_role(&ck.meta, "syn")?;
        let m = &ck.meta;
        let model = SynModel {
            n_h: meta_parse(m, "n_h")?,
            n_v: meta_parse(m, "n_v")?,
            sigma_255: meta_parse(m, "sigma_255")?,
            mode: meta_get(m, "mode")?.parse()?,
            guided: GuidedFilterParams {
                radius: meta_parse(m, "guided.radius")?,
                epsilon: meta_parse(m, "guided.epsilon")?,
            },
            seed: meta_parse(m, "seed")?,
            net: Network::new(ck.layers)?,
        };
        check_four_layers(&model.net, "syn")?;
        let views = model.n_h * model.n_v;
        if model.net.in_channels() != model.n_h + model.n_v || model.net.out_channels() != views {
            return Err(Error::Checkpoint(format!(
                "syn network is {}->{} channels but metadata says {}x{} views",
                model.net.in_channels(),
                model.net.out_channels(),
                model.n_h,
                model.n_v
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    fn check_lf(&self, lf: &LightField) -> Result<()> {
        if (lf.n_h(), lf.n_v()) != (self.n_h, self.n_v) {
            return Err(Error::Dimension(format!(
                "light field has {}x{} views, syn checkpoint expects {}x{}",
                lf.n_h(),
                lf.n_v(),
                self.n_h,
                self.n_v
            )));
        }
        Ok(())
    }

    /// Full-image synthesis stage.
    pub fn predict(&self, noisy: &LightField) -> Result<SynPrediction> {
        self.check_lf(noisy)?;
        let features = ApaFeatures::compute(noisy, &self.guided)?;
        let input = build_syn_input(&features);
        let out = self.net.infer_item(&input.data, input.h, input.w);
        let raw = Stack {
            w: input.w,
            h: input.h,
            channels: self.net.out_channels(),
            data: out,
        };
        let mut syn = raw.clone();
        if self.mode == SynMode::Residual {
            add_to_channels(&mut syn, &features.x_avg);
        }
        let lf_syn = LightField::from_stack(self.n_h, self.n_v, syn)?;
        Ok(SynPrediction {
            features,
            raw,
            lf_syn,
        })
    }
}

fn add_to_channels(stack: &mut Stack, img: &Image) {
    for c in 0..stack.channels {
        for (v, a) in stack.channel_mut(c).iter_mut().zip(&img.data) {
            *v += a;
        }
    }
}

fn sub_from_channels(stack: &mut Stack, img: &Image) {
    for c in 0..stack.channels {
        for (v, a) in stack.channel_mut(c).iter_mut().zip(&img.data) {
            *v -= a;
        }
    }
}

/// Trained compensation network(s): one shared, or one per view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewModel {
    pub nets: Vec<NetworkDef>,
    pub sigma_255: f64,
    pub gaussian: GaussianParams,
    pub seed: u64,
}

impl ViewModel {
    pub fn per_sai(&self) -> bool {
        self.nets.len() > 1
    }

    pub fn net_for(&self, view: usize) -> &NetworkDef {
        if self.per_sai() {
            &self.nets[view]
        } else {
            &self.nets[0]
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = Metadata::new();
        meta.insert("role".into(), "view".into());
        meta.insert("sigma_255".into(), self.sigma_255.to_string());
        meta.insert("gaussian.sigma".into(), self.gaussian.sigma_g.to_string());
        meta.insert("gaussian.radius".into(), self.gaussian.radius.to_string());
        let [a, b, c] = hidden_of(&self.nets[0]);
        meta.insert("hidden".into(), format!("{a},{b},{c}"));
        meta.insert("net_count".into(), self.nets.len().to_string());
        meta.insert("seed".into(), self.seed.to_string());
        Checkpoint {
            layers: self
                .nets
                .iter()
                .flat_map(|n| n.layers.iter().cloned())
                .collect(),
            meta,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        check_role(&ck.meta, "view")?;
        let m = &ck.meta;
        let count: usize = meta_parse(m, "net_count")?;
        if count == 0 || ck.layers.len() != 4 * count {
            return Err(Error::Checkpoint(format!(
                "{} layers cannot hold {count} four-layer view networks",
                ck.layers.len()
            )));
        }
        let nets = ck
            .layers
            .chunks(4)
            .map(|c| {
                let net = Network::new(c.to_vec())?;
                check_four_layers(&net, "view")?;
                if net.in_channels() != 2 || net.out_channels() != 1 {
                    return Err(Error::Checkpoint(
                        "view network must be 2->1 channels".into(),
                    ));
                }
                Ok(net)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ViewModel {
            nets,
            sigma_255: meta_parse(m, "sigma_255")?,
            gaussian: GaussianParams {
                sigma_g: meta_parse(m, "gaussian.sigma")?,
                radius: meta_parse(m, "gaussian.radius")?,
            },
            seed: meta_parse(m, "seed")?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    /// Compensation-network input for view `n`.
    pub fn input_for(&self, noisy: &LightField, pred: &SynPrediction, n: usize) -> Result<Stack> {
        let z = gaussian_smooth_sai(&noisy.view_image(n), &self.gaussian);
        build_view_input(&z, &pred.features.x_avg, &pred.raw.plane(n))
    }
}

/// Refuses a syn/view pair trained for different noise levels or grids.
pub fn check_pair(syn: &SynModel, view: &ViewModel) -> Result<()> {
    if syn.sigma_255 != view.sigma_255 {
        return Err(Error::Checkpoint(format!(
            "sigma mismatch: syn checkpoint has sigma {}, view checkpoint has sigma {}",
            syn.sigma_255, view.sigma_255
        )));
    }
    if view.per_sai() && view.nets.len() != syn.n_h * syn.n_v {
        return Err(Error::Checkpoint(format!(
            "view checkpoint holds {} per-view networks, syn grid has {} views",
            view.nets.len(),
            syn.n_h * syn.n_v
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    /// `clamp01(x_parallax + x_avg)`.
    pub lf_denoised: LightField,
    /// Synthesis-stage light field, clamped.
    pub lf_syn: LightField,
    pub x_avg: Image,
    /// Compensation-network output of every view, not clamped.
    pub x_parallax: LightField,
}

/// Full-image two-stage inference.
pub fn denoise_lf(noisy: &LightField, syn: &SynModel, view: &ViewModel) -> Result<DenoiseResult> {
    check_pair(syn, view)?;
    let pred = syn.predict(noisy)?;
    let (w, h) = (noisy.w(), noisy.h());
    let parallax: Vec<Vec<f32>> = (0..noisy.n_views())
        .into_par_iter()
        .map(|n| {
            let input = view.input_for(noisy, &pred, n)?;
            Ok(view.net_for(n).infer_item(&input.data, h, w))
        })
        .collect::<Result<_>>()?;
    let x_parallax = LightField::new(w, h, noisy.n_h(), noisy.n_v(), parallax.concat())?;
    let x_avg = pred.features.x_avg.clone();
    let mut out = x_parallax.clone();
    for n in 0..out.n_views() {
        for (v, a) in out.view_mut(n).iter_mut().zip(&x_avg.data) {
            *v += a;
        }
    }
    Ok(DenoiseResult {
        lf_denoised: out.clamp01(),
        lf_syn: pred.lf_syn.clamp01(),
        x_avg,
        x_parallax,
    })
}

/// Every view replaced by `x_avg`, clamped.
pub fn baseline_avg_all(noisy: &LightField) -> LightField {
    let x_avg = compute_isotropic(noisy).map(|v| v.clamp(0.0, 1.0));
    let views = vec![x_avg; noisy.n_views()];
    LightField::from_views(noisy.n_h(), noisy.n_v(), &views).expect("dims come from the input")
}

/// Synthesis stage alone, clamped.
pub fn baseline_apa_syn(noisy: &LightField, syn: &SynModel) -> Result<LightField> {
    Ok(syn.predict(noisy)?.lf_syn.clamp01())
}

/// Noise level on the [0,255] scale: per view, the median absolute value of
/// the finest diagonal Haar detail `(a - b - c + d) / 2` over non-overlapping
/// 2x2 blocks, divided by 0.6745; averaged over views.
pub fn estimate_sigma(lf: &LightField) -> f64 {
    let (w, h) = (lf.w(), lf.h());
    if w < 2 || h < 2 {
        return 0.0;
    }
    let per_view: Vec<f64> = lf
        .views()
        .map(|view| {
            let mut d = Vec::with_capacity((w / 2) * (h / 2));
            for by in 0..h / 2 {
                for bx in 0..w / 2 {
                    let i = 2 * by * w + 2 * bx;
                    let (a, b, c, e) = (view[i], view[i + 1], view[i + w], view[i + w + 1]);
                    d.push(((a as f64 - b as f64 - c as f64 + e as f64) / 2.0).abs());
                }
            }
            median(&mut d) / 0.6745
        })
        .collect();
    255.0 * per_view.iter().sum::<f64>() / per_view.len() as f64
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closest trained level; ties go to the lower level.
pub fn nearest_level(sigma_255: f64) -> f64 {
    SIGMA_LEVELS
        .iter()
        .copied()
        .min_by(|a, b| (a - sigma_255).abs().total_cmp(&(b - sigma_255).abs()))
        .unwrap()
}

fn check_scenes(scenes: &[LightField]) -> Result<(usize, usize)> {
    let first = scenes
        .first()
        .ok_or_else(|| Error::InvalidParam("no training scenes".into()))?;
    for (i, s) in scenes.iter().enumerate() {
        if (s.n_h(), s.n_v()) != (first.n_h(), first.n_v()) {
            return Err(Error::Dimension(format!(
                "scene {i} has {}x{} views, scene 0 has {}x{}",
                s.n_h(),
                s.n_v(),
                first.n_h(),
                first.n_v()
            )));
        }
    }
    Ok((first.n_h(), first.n_v()))
}

/// The noisy copy of training scene `i`; both stages see the same one.
pub fn training_noisy(scene: &LightField, i: usize, cfg: &TrainConfig) -> Result<LightField> {
    let seed = derive_seed(cfg.hyper.seed, &format!("train-noise/{i}"));
    Ok(add_awgn(scene, &NoiseConfig::new(cfg.sigma_255, seed)?))
}

fn into_samples(set: PatchSet) -> (Vec<Stack>, Vec<Stack>) {
    set.patches.into_iter().map(|p| (p.input, p.target)).unzip()
}

/// Synthesis-stage patches: 16-channel feature input, all clean views (or
/// their offsets from `x_avg` in residual mode) as target.
pub fn syn_samples(scenes: &[LightField], cfg: &TrainConfig) -> Result<(Vec<Stack>, Vec<Stack>)> {
    check_scenes(scenes)?;
    let mut set = PatchSet::new(cfg.patch_size, cfg.stride);
    for (i, scene) in scenes.iter().enumerate() {
        let noisy = training_noisy(scene, i, cfg)?;
        let f = ApaFeatures::compute(&noisy, &cfg.guided)?;
        let input = build_syn_input(&f);
        let mut target = scene.to_stack();
        if cfg.syn_net.mode == SynMode::Residual {
            sub_from_channels(&mut target, &f.x_avg);
        }
        set.push_grid(&format!("scene{i}"), &input, &target)?;
    }
    if set.is_empty() {
        return Err(Error::InvalidParam("empty patch set".into()));
    }
    Ok(into_samples(set))
}

pub fn train_syn(
    scenes: &[LightField],
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(&LogRecord),
) -> Result<(SynModel, TrainSummary)> {
    cfg.validate()?;
    let (n_h, n_v) = check_scenes(scenes)?;
    let (inputs, targets) = syn_samples(scenes, cfg)?;
    let root = cfg.hyper.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(root, "syn/init"));
    let mut net = build_syn_net(n_h, n_v, &cfg.syn_net, &mut rng)?;
    let hyper = TrainHyper {
        seed: derive_seed(root, "syn/shuffle"),
        ..cfg.hyper.clone()
    };
    let summary = train_network(&mut net, &inputs, &targets, &hyper, on_step)?;
    let model = SynModel {
        net,
        n_h,
        n_v,
        sigma_255: cfg.sigma_255,
        mode: cfg.syn_net.mode,
        guided: cfg.guided,
        seed: root,
    };
    Ok((model, summary))
}

/// Compensation-stage patches grouped by view: input
/// `{smoothed noisy view - x_avg, syn output}`, target `clean view - x_avg`.
/// Every view contributes the same number of patches.
pub fn view_samples(
    scenes: &[LightField],
    syn: &SynModel,
    cfg: &TrainConfig,
) -> Result<Vec<(Vec<Stack>, Vec<Stack>)>> {
    check_scenes(scenes)?;
    if syn.sigma_255 != cfg.sigma_255 {
        return Err(Error::Checkpoint(format!(
            "syn checkpoint has sigma {}, view training uses {}",
            syn.sigma_255, cfg.sigma_255
        )));
    }
    let probe = ViewModel {
        nets: Vec::new(),
        sigma_255: cfg.sigma_255,
        gaussian: cfg.gaussian,
        seed: 0,
    };
    let n_views = syn.n_h * syn.n_v;
    let mut per_view: Vec<(Vec<Stack>, Vec<Stack>)> = vec![(Vec::new(), Vec::new()); n_views];
    for (i, scene) in scenes.iter().enumerate() {
        let noisy = training_noisy(scene, i, cfg)?;
        let pred = syn.predict(&noisy)?;
        let x_avg = &pred.features.x_avg;
        for (n, slot) in per_view.iter_mut().enumerate() {
            let input = probe.input_for(&noisy, &pred, n)?;
            let target_img = Image {
                w: scene.w(),
                h: scene.h(),
                data: scene
                    .view(n)
                    .iter()
                    .zip(&x_avg.data)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            let target = Stack::from_planes(&[target_img])?;
            let mut set = PatchSet::new(cfg.patch_size, cfg.stride);
            set.push_grid(&format!("scene{i}/view{n}"), &input, &target)?;
            if let Some(cap) = cfg.view_patches_per_sai {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.hyper.seed,
                    &format!("view/pick/{i}/{n}"),
                ));
                set.patches.shuffle(&mut rng);
                set.patches.truncate(cap);
            }
            let (xs, ts) = into_samples(set);
            slot.0.extend(xs);
            slot.1.extend(ts);
        }
    }
    if per_view[0].0.is_empty() {
        return Err(Error::InvalidParam("empty patch set".into()));
    }
    Ok(per_view)
}

/// Trains the compensation stage with `syn` frozen. Returns one training
/// summary per network.
pub fn train_view(
    scenes: &[LightField],
    syn: &SynModel,
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(&LogRecord),
) -> Result<(ViewModel, Vec<TrainSummary>)> {
    cfg.validate()?;
    let per_view = view_samples(scenes, syn, cfg)?;
    let root = cfg.hyper.seed;
    let groups: Vec<(String, Vec<Stack>, Vec<Stack>)> = if cfg.view_net.per_sai {
        per_view
            .into_iter()
            .enumerate()
            .map(|(n, (x, t))| (format!("view/{n}"), x, t))
            .collect()
    } else {
        let (x, t) = per_view
            .into_iter()
            .fold((Vec::new(), Vec::new()), |mut acc, (x, t)| {
                acc.0.extend(x);
                acc.1.extend(t);
                acc
            });
        vec![("view".to_string(), x, t)]
    };
    let mut nets = Vec::with_capacity(groups.len());
    let mut summaries = Vec::with_capacity(groups.len());
    for (label, inputs, targets) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(root, &format!("{label}/init")));
        let mut net = build_view_net(&cfg.view_net, &mut rng)?;
        let hyper = TrainHyper {
            seed: derive_seed(root, &format!("{label}/shuffle")),
            ..cfg.hyper.clone()
        };
        summaries.push(train_network(&mut net, &inputs, &targets, &hyper, on_step)?);
        nets.push(net);
    }
    let model = ViewModel {
        nets,
        sigma_255: cfg.sigma_255,
        gaussian: cfg.gaussian,
        seed: root,
    };
    Ok((model, summaries))
}
