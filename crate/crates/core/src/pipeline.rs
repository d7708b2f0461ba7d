//! End-to-end synthesis: load inputs, render, composite, build masks and
//! write per-sample artifacts plus a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::BitDepth;
use crate::compositing::{build_masks, composite, detect_dataset_highlights, MaskSet, PatchGrid};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{positive_depth_mask, CameraIntrinsics, GeometryBuffers, VectorField};
use crate::image::{LinearImage, ScalarMap};
use crate::io::{read_bytes, read_pfm, read_png, read_tensor, write_bytes, write_mask_png, write_png, write_tensor, Tensor};
use crate::shading::{render_highlight, sample_params, ShadingParams};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

/// One input view. Relative paths resolve against the job file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub id: String,
    pub rgb: PathBuf,
    /// PFM depth in metres.
    pub depth: PathBuf,
    /// Optional `H×W×3` raw tensor of normals; depth-gradient normals otherwise.
    #[serde(default)]
    pub normals: Option<PathBuf>,
    #[serde(default)]
    pub intrinsics: Option<CameraIntrinsics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisJob {
    pub inputs: Vec<InputSpec>,
    #[serde(default = "one")]
    pub draws_per_image: usize,
    pub output_dir: PathBuf,
    /// Overrides `config.sampling.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Config,
}

fn one() -> usize {
    1
}

impl SynthesisJob {
    /// Parses a job file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let mut job: SynthesisJob =
            serde_json::from_slice(&bytes).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        job.resolve_paths(base);
        job.validate()?;
        Ok(job)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for input in &mut self.inputs {
            fix(&mut input.rgb);
            fix(&mut input.depth);
            if let Some(n) = &mut input.normals {
                fix(n);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws_per_image == 0 {
            return Err(Error::InvalidArgument("draws_per_image must be ≥ 1".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for input in &self.inputs {
            if !ids.insert(&input.id) || input.id.is_empty() || input.id.contains(['/', '\\']) {
                return Err(Error::InvalidArgument(format!("input ids must be unique plain names, got {:?}", input.id)));
            }
            for p in [Some(&input.rgb), Some(&input.depth), input.normals.as_ref()].into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::InvalidArgument(format!("input file {} does not exist", p.display())));
                }
            }
        }
        self.config.validate()
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.config.sampling.seed)
    }
}

/// Reads RGB, depth and optional normals for one input.
pub fn load_input(spec: &InputSpec, config: &Config) -> Result<(LinearImage, GeometryBuffers)> {
    let (rgb, _) = read_png(&spec.rgb)?;
    let depth = read_pfm(&spec.depth)?;
    rgb.ensure_same_dims(depth.dims())?;
    let k = spec
        .intrinsics
        .or(config.intrinsics)
        .ok_or_else(|| Error::InvalidArgument(format!("no intrinsics for input {:?}", spec.id)))?;
    k.validate_for(depth.width(), depth.height())?;
    let geometry = match &spec.normals {
        Some(path) => {
            let t = read_tensor(path)?;
            let (w, h) = depth.dims();
            if t.dims != [h, w, 3] {
                return Err(Error::ShapeMismatch { expected: format!("[{h}, {w}, 3]"), actual: format!("{:?}", t.dims) });
            }
            let normals = VectorField::from_interleaved(w, h, &t.data)?;
            let valid = positive_depth_mask(&depth);
            GeometryBuffers::with_normals(depth, k, valid, normals)?
        }
        None => GeometryBuffers::from_depth(depth, k)?,
    };
    Ok((rgb, geometry))
}

#[derive(Debug, Clone)]
pub struct SynthesisPair {
    pub clean: LinearImage,
    pub highlighted: LinearImage,
    pub highlight: ScalarMap,
    pub masks: MaskSet,
    pub params: ShadingParams,
}

/// direction field → lobe → composite → dataset highlights → masks.
pub fn synthesize_one(rgb: &LinearImage, geom: &GeometryBuffers, params: &ShadingParams, config: &Config) -> Result<SynthesisPair> {
    rgb.ensure_same_dims(geom.dims())?;
    params.validate()?;
    if geom.valid.is_empty() {
        return Err(Error::NoValidGeometry);
    }
    let highlight = render_highlight(geom, params, config.view_convention);
    let highlighted = composite(rgb, &highlight, params.k_h)?;
    let dataset_hl = detect_dataset_highlights(rgb, config.tau_l, config.luminance);
    let masks = build_masks(&highlight, &dataset_hl, &config.masks)?;
    Ok(SynthesisPair { clean: rgb.clone(), highlighted, highlight, masks, params: *params })
}

/// Pixel and patch counts recorded per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskStats {
    pub pixels: usize,
    pub dataset_hl_pixels: usize,
    pub synthetic_hl_pixels: usize,
    pub hole_pixels: usize,
    pub sup_pixels: usize,
    pub patches: usize,
    pub patch_hole: usize,
    pub patch_sup: usize,
    pub patch_train: usize,
}

impl MaskStats {
    pub fn of(m: &MaskSet) -> Self {
        Self {
            pixels: m.m_sup.as_slice().len(),
            dataset_hl_pixels: m.dataset_hl.count(),
            synthetic_hl_pixels: m.synthetic_hl.count(),
            hole_pixels: m.m_hole.count(),
            sup_pixels: m.m_sup.count(),
            patches: m.patch_train.rows * m.patch_train.cols,
            patch_hole: m.patch_hole.count(),
            patch_sup: m.patch_sup.count(),
            patch_train: m.patch_train.count(),
        }
    }
}

fn patch_tensor(g: &PatchGrid) -> Tensor {
    Tensor { dims: vec![g.rows, g.cols], data: g.as_f32() }
}

/// Writes the mask PNGs and patch-grid tensors into `dir`; returns
/// name → file name.
pub fn write_masks(dir: &Path, masks: &MaskSet) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    for (name, mask) in [
        ("mask_dataset_hl", &masks.dataset_hl),
        ("mask_synthetic_hl", &masks.synthetic_hl),
        ("mask_sup", &masks.m_sup),
        ("mask_hole", &masks.m_hole),
    ] {
        let file = format!("{name}.png");
        write_mask_png(&dir.join(&file), mask)?;
        files.insert(name.to_string(), file);
    }
    for (name, grid) in [("patch_sup", &masks.patch_sup), ("patch_hole", &masks.patch_hole), ("patch_train", &masks.patch_train)] {
        let file = format!("{name}.urtd");
        write_tensor(&dir.join(&file), &patch_tensor(grid))?;
        files.insert(name.to_string(), file);
    }
    Ok(files)
}

/// Writes every artifact of one pair into `dir`; returns name → file name.
pub fn write_pair(dir: &Path, pair: &SynthesisPair, depth: BitDepth) -> Result<BTreeMap<String, String>> {
    let (w, h) = pair.highlighted.dims();
    let mut files = write_masks(dir, &pair.masks)?;
    write_png(&dir.join("highlighted.png"), &pair.highlighted, depth)?;
    files.insert("highlighted_png".into(), "highlighted.png".into());
    write_tensor(&dir.join("highlighted.urtd"), &Tensor { dims: vec![h, w, 3], data: pair.highlighted.as_slice().to_vec() })?;
    files.insert("highlighted".into(), "highlighted.urtd".into());
    write_tensor(&dir.join("highlight.urtd"), &Tensor { dims: vec![h, w], data: pair.highlight.as_slice().to_vec() })?;
    files.insert("highlight".into(), "highlight.urtd".into());
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub input_id: String,
    pub image_index: usize,
    pub draw_index: usize,
    pub global_draw: u64,
    pub params: Option<ShadingParams>,
    /// Artifact name → path relative to the manifest.
    pub files: BTreeMap<String, String>,
    pub stats: Option<MaskStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub draws_per_image: usize,
    pub config: Config,
    pub samples: Vec<SampleRecord>,
    pub failures: usize,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&read_bytes(path)?)?)
    }
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    wall_seconds: f64,
    samples: usize,
    workers: usize,
}

fn sample_dir(id: &str, draw: usize) -> String {
    format!("{id}/draw_{draw:03}")
}

/// Global draw counter; keeps sampling independent of scheduling.
pub fn global_draw(image_index: usize, draws_per_image: usize, draw_index: usize) -> u64 {
    (image_index * draws_per_image + draw_index) as u64
}

fn run_image(job: &SynthesisJob, image_index: usize, seed: u64, depth: BitDepth) -> Vec<SampleRecord> {
    let spec = &job.inputs[image_index];
    let draws = job.draws_per_image;
    let record = |draw_index: usize| SampleRecord {
        input_id: spec.id.clone(),
        image_index,
        draw_index,
        global_draw: global_draw(image_index, draws, draw_index),
        params: None,
        files: BTreeMap::new(),
        stats: None,
        error: None,
    };
    let loaded = load_input(spec, &job.config).and_then(|(rgb, geom)| {
        if geom.valid.is_empty() {
            Err(Error::NoValidGeometry)
        } else {
            Ok((rgb, geom))
        }
    });
    let (rgb, geom) = match loaded {
        Ok(v) => v,
        Err(e) => {
            return (0..draws).map(|d| SampleRecord { error: Some(e.to_string()), ..record(d) }).collect();
        }
    };
    let mut ranges = job.config.sampling;
    ranges.seed = seed;
    (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rec = record(d);
            let params = sample_params(&ranges, rec.global_draw);
            rec.params = Some(params);
            let rel = sample_dir(&spec.id, d);
            let outcome = synthesize_one(&rgb, &geom, &params, &job.config)
                .and_then(|pair| write_pair(&job.output_dir.join(&rel), &pair, depth).map(|f| (f, MaskStats::of(&pair.masks))));
            match outcome {
                Ok((files, stats)) => {
                    rec.files = files.into_iter().map(|(k, v)| (k, format!("{rel}/{v}"))).collect();
                    rec.stats = Some(stats);
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

/// Renders every (input, draw) pair with `workers` threads and writes the
/// manifest. Per-sample failures are recorded, not raised.
pub fn run_dataset(job: &SynthesisJob, workers: usize) -> Result<Manifest> {
    job.validate()?;
    let start = Instant::now();
    let seed = job.effective_seed();
    let depth = job.config.bit_depth()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let samples: Vec<SampleRecord> = pool.install(|| {
        (0..job.inputs.len())
            .into_par_iter()
            .flat_map_iter(|i| run_image(job, i, seed, depth))
            .collect()
    });
    let failures = samples.iter().filter(|s| s.error.is_some()).count();
    let manifest = Manifest {
        tool: "glint".into(),
        version: TOOL_VERSION.into(),
        seed,
        draws_per_image: job.draws_per_image,
        config: Config { sampling: crate::shading::SamplingRanges { seed, ..job.config.sampling }, ..job.config.clone() },
        samples,
        failures,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_bytes(&job.output_dir.join(MANIFEST_FILE), &bytes)?;
    let timing = Timing { wall_seconds: start.elapsed().as_secs_f64(), samples: manifest.samples.len(), workers: workers.max(1) };
    write_bytes(&job.output_dir.join(TIMING_FILE), &serde_json::to_vec_pretty(&timing)?)?;
    log::info!("wrote {} samples ({} failed) in {:.2}s", manifest.samples.len(), failures, timing.wall_seconds);
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::BitDepth;
    use crate::io::{write_pfm, write_png};
    use crate::testkit::make_plane_scene;

    fn plane_inputs(dir: &Path, n: usize, size: usize) -> SynthesisJob {
        let k = CameraIntrinsics::centered(size, size, size as f32);
        let mut inputs = Vec::new();
        for i in 0..n {
            let scene = make_plane_scene([0.0, 0.0, 1.0 + 0.1 * i as f64], [0.1 * i as f64, 0.0, -1.0], k, size, size).unwrap();
            let rgb = LinearImage::from_fn(size, size, |x, y| {
                let g = 0.2 + 0.5 * ((x + y + i) % 7) as f32 / 7.0;
                if x < 3 && y < 3 {
                    [1.0, 1.0, 1.0]
                } else {
                    [g, 0.8 * g, 0.6 * g]
                }
            });
            let id = format!("img{i}");
            write_png(&dir.join(format!("{id}.png")), &rgb, BitDepth::Sixteen).unwrap();
            write_pfm(&dir.join(format!("{id}.pfm")), &scene.geometry.depth).unwrap();
            inputs.push(InputSpec {
                id: id.clone(),
                rgb: dir.join(format!("{id}.png")),
                depth: dir.join(format!("{id}.pfm")),
                normals: None,
                intrinsics: Some(k),
            });
        }
        SynthesisJob { inputs, draws_per_image: 2, output_dir: dir.join("out"), seed: Some(7), config: Config::default() }
    }

    #[test]
    fn vanishing_intensity_is_identity() {
        let k = CameraIntrinsics::centered(32, 32, 32.0);
        let scene = make_plane_scene([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], k, 32, 32).unwrap();
        let rgb = LinearImage::from_fn(32, 32, |x, y| [x as f32 / 40.0, y as f32 / 40.0, 0.3]);
        let params = ShadingParams { r0: 0.04, k_h: 1e-9, shininess: 50.0, light: [0.0, 0.0, 0.0] };
        let pair = synthesize_one(&rgb, &scene.geometry, &params, &Config::default()).unwrap();
        for (a, b) in pair.highlighted.as_slice().iter().zip(rgb.as_slice()) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn on_axis_plane_is_point_symmetric() {
        let n = 64;
        let k = CameraIntrinsics::centered(n, n, 64.0);
        let scene = make_plane_scene([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], k, n, n).unwrap();
        let rgb = LinearImage::filled(n, n, [0.5; 3]);
        let params = ShadingParams { r0: 0.04, k_h: 1.0, shininess: 30.0, light: [0.0, 0.0, 0.0] };
        let pair = synthesize_one(&rgb, &scene.geometry, &params, &Config::default()).unwrap();
        let h = &pair.highlight;
        assert!(h.max_value() > 0.0);
        let mut worst = 0.0f32;
        for y in 0..n {
            for x in 0..n {
                worst = worst.max((h.get(x, y) - h.get(n - 1 - x, n - 1 - y)).abs());
            }
        }
        assert!(worst < 1e-5, "asymmetry {worst}");
    }

    #[test]
    fn all_invalid_geometry_errors() {
        let k = CameraIntrinsics::centered(8, 8, 8.0);
        let depth = ScalarMap::filled(8, 8, 0.0);
        let geom = GeometryBuffers::from_depth(depth, k).unwrap();
        let rgb = LinearImage::filled(8, 8, [0.5; 3]);
        let params = ShadingParams { r0: 0.04, k_h: 1.0, shininess: 30.0, light: [0.0, 0.0, 0.0] };
        assert!(matches!(synthesize_one(&rgb, &geom, &params, &Config::default()), Err(Error::NoValidGeometry)));
    }

    #[test]
    fn dataset_is_deterministic_across_workers() {
        let tmp = tempfile::tempdir().unwrap();
        let mut job = plane_inputs(tmp.path(), 2, 24);
        job.config.masks.patch_size = 8;
        let a = run_dataset(&job, 1).unwrap();
        assert_eq!(a.failures, 0);
        assert_eq!(a.samples.len(), 4);
        let params: Vec<_> = a.samples.iter().map(|s| s.params.unwrap()).collect();
        for i in 0..params.len() {
            for j in i + 1..params.len() {
                assert_ne!(params[i], params[j]);
            }
        }
        let first = snapshot(&job.output_dir);
        job.output_dir = tmp.path().join("out4");
        let b = run_dataset(&job, 4).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(first, snapshot(&job.output_dir));
    }

    fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.file_name().unwrap() != TIMING_FILE {
                    out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn missing_input_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut job = plane_inputs(tmp.path(), 1, 16);
        job.inputs[0].rgb = tmp.path().join("nope.png");
        assert!(run_dataset(&job, 1).is_err());
    }
}
