use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use glint_core::compositing::{build_masks, detect_dataset_highlights};
use glint_core::io::{read_mask_png, read_png, read_tensor, write_tensor, Tensor};
use glint_core::losses::{reconstruction_loss, seam_loss, seam_ring, spec_penalty};
use glint_core::metrics::{evaluate, MetricReport};
use glint_core::pipeline::{load_input, synthesize_one, write_masks, write_pair, InputSpec, MaskStats, SynthesisJob};
use glint_core::selfcheck::run_selfcheck;
use glint_core::tokens::{inpaint, inpainting_loss, InpainterWeights, TokenField, TokenGrid};
use glint_core::{CameraIntrinsics, Config, ScalarMap, ShadingParams};

#[derive(Parser)]
#[command(name = "glint", version, about = "Synthetic specular highlights, supervision masks and evaluation")]
struct Cli {
    /// JSON config file; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampling / weight-init seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch commands.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Render one highlight with explicit parameters.
    Render(RenderArgs),
    /// Render a batch described by a job file and write a manifest.
    Dataset(DatasetArgs),
    /// Build supervision masks from an image and a highlight map.
    Masks(MasksArgs),
    /// Run prior → seed → transformer → merge on a token grid.
    InpaintDemo(InpaintArgs),
    /// Score predictions against references.
    Eval(EvalArgs),
    /// Run the built-in oracle, gradient and determinism checks.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Input image (PNG, sRGB).
    #[arg(long)]
    rgb: PathBuf,
    /// Depth map (PFM, metres).
    #[arg(long)]
    depth: PathBuf,
    /// Normals as an H×W×3 raw tensor; derived from depth when absent.
    #[arg(long)]
    normals: Option<PathBuf>,
    /// Intrinsics as fx,fy,cx,cy; falls back to the config.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    intrinsics: Option<Vec<f32>>,
    #[arg(long)]
    k_h: f32,
    #[arg(long)]
    shininess: f32,
    /// Light position x,y,z in metres, camera frame.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    light: Vec<f32>,
    /// Fresnel reflectance at normal incidence; defaults to the config value.
    #[arg(long)]
    r0: Option<f32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetArgs {
    /// Job file listing inputs, draws per image and output directory.
    #[arg(long)]
    job: PathBuf,
    /// Overrides the job's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MasksArgs {
    #[arg(long)]
    rgb: PathBuf,
    /// Highlight map as an H×W raw tensor.
    #[arg(long)]
    highlight: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InpaintArgs {
    /// Token grid as an hp×wp×C raw tensor; a random grid is used when absent.
    #[arg(long)]
    tokens: Option<PathBuf>,
    /// Patch mask as an hp×wp raw tensor (non-zero = inpaint).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Loss targets (hp×wp×C); defaults to the input tokens.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted PNGs.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of reference PNGs with matching file names.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Directory of highlight-mask PNGs with matching file names.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Directory of highlighted inputs; enables LSR and the mask fallback.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Where to write the JSON summary; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    ensure!(cli.workers >= 1, "--workers must be at least 1");
    match cli.command {
        Command::Render(a) => render(a, &config),
        Command::Dataset(a) => dataset(a, config, cli.config.is_some(), cli.seed, cli.workers),
        Command::Masks(a) => masks(a, &config),
        Command::InpaintDemo(a) => inpaint_demo(a, &config, cli.seed),
        Command::Eval(a) => eval(a, &config),
        Command::Selfcheck(a) => selfcheck(a, cli.seed.unwrap_or(0)),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn render(a: RenderArgs, config: &Config) -> Result<()> {
    ensure!(a.light.len() == 3, "--light takes x,y,z");
    ensure!(a.intrinsics.as_ref().is_none_or(|v| v.len() == 4), "--intrinsics takes fx,fy,cx,cy");
    let intrinsics = a
        .intrinsics
        .map(|v| CameraIntrinsics::new(v[0], v[1], v[2], v[3]))
        .transpose()?;
    let spec = InputSpec { id: "render".into(), rgb: a.rgb, depth: a.depth, normals: a.normals, intrinsics };
    let (rgb, geom) = load_input(&spec, config)?;
    let params = ShadingParams {
        r0: a.r0.unwrap_or(config.sampling.r0),
        k_h: a.k_h,
        shininess: a.shininess,
        light: [a.light[0], a.light[1], a.light[2]],
    };
    let pair = synthesize_one(&rgb, &geom, &params, config)?;
    let files = write_pair(&a.out, &pair, config.bit_depth()?)?;
    write_json(&a.out.join("sample.json"), &json!({ "params": params, "files": files, "stats": MaskStats::of(&pair.masks) }))?;
    log::info!("peak H {:.4}, wrote {}", pair.highlight.max_value(), a.out.display());
    Ok(())
}

fn dataset(a: DatasetArgs, config: Config, config_given: bool, seed: Option<u64>, workers: usize) -> Result<()> {
    let mut job = SynthesisJob::load(&a.job).with_context(|| format!("loading job {}", a.job.display()))?;
    if config_given {
        job.config = config;
    }
    if let Some(s) = seed {
        job.seed = Some(s);
    }
    if let Some(out) = a.out {
        job.output_dir = out;
    }
    let manifest = glint_core::pipeline::run_dataset(&job, workers)?;
    if manifest.failures > 0 {
        for s in manifest.samples.iter().filter(|s| s.error.is_some()) {
            log::error!("{} draw {}: {}", s.input_id, s.draw_index, s.error.as_deref().unwrap_or_default());
        }
        bail!("{} of {} samples failed", manifest.failures, manifest.samples.len());
    }
    println!("{}", job.output_dir.join(glint_core::pipeline::MANIFEST_FILE).display());
    Ok(())
}

fn masks(a: MasksArgs, config: &Config) -> Result<()> {
    let (rgb, _) = read_png(&a.rgb)?;
    let t = read_tensor(&a.highlight)?;
    ensure!(t.dims.len() == 2, "highlight tensor must be H×W, got {:?}", t.dims);
    let h = ScalarMap::new(t.dims[1], t.dims[0], t.data)?;
    let dataset_hl = detect_dataset_highlights(&rgb, config.tau_l, config.luminance);
    let set = build_masks(&h, &dataset_hl, &config.masks)?;
    let files = write_masks(&a.out, &set)?;
    write_json(&a.out.join("masks.json"), &json!({ "masks": config.masks, "tau_l": config.tau_l, "files": files, "stats": MaskStats::of(&set) }))?;
    Ok(())
}

fn inpaint_demo(a: InpaintArgs, config: &Config, seed: Option<u64>) -> Result<()> {
    let mut cfg = config.inpainter;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let tokens = match &a.tokens {
        Some(p) => {
            let t = read_tensor(p)?;
            ensure!(t.dims.len() == 3, "token tensor must be hp×wp×C, got {:?}", t.dims);
            TokenField::new(t.dims[0], t.dims[1], t.dims[2], t.data)?
        }
        None => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
            TokenField::new(8, 8, cfg.dim, (0..64 * cfg.dim).map(|_| rng.random_range(-1.0..1.0)).collect())?
        }
    };
    cfg.dim = tokens.dim;
    let mask = match &a.mask {
        Some(p) => {
            let t = read_tensor(p)?;
            ensure!(t.dims == [tokens.hp, tokens.wp], "mask tensor must be {}×{}", tokens.hp, tokens.wp);
            t.data.iter().map(|&v| v != 0.0).collect()
        }
        None => (0..tokens.len()).map(|i| (i / tokens.wp + i % tokens.wp) % 3 == 0).collect(),
    };
    let grid = TokenGrid::new(tokens, mask)?;
    let weights = InpainterWeights::init(&cfg)?;
    let out = inpaint(&grid, &cfg, &weights)?;
    let target = match &a.target {
        Some(p) => {
            let t = read_tensor(p)?;
            TokenField::new(t.dims.first().copied().unwrap_or(0), t.dims.get(1).copied().unwrap_or(0), t.dims.get(2).copied().unwrap_or(0), t.data)?
        }
        None => grid.tokens.clone(),
    };
    let loss = inpainting_loss(&out.completed, &target, &grid.mask, cfg.alpha as f64)?;
    let shape = |f: &TokenField| vec![f.hp, f.wp, f.dim];
    write_tensor(&a.out.join("seed.urtd"), &Tensor::new(shape(&out.seed), out.seed.data.clone())?)?;
    write_tensor(&a.out.join("completed.urtd"), &Tensor::new(shape(&out.completed), out.completed.data.clone())?)?;
    write_json(
        &a.out.join("loss.json"),
        &json!({ "inpainting_loss": loss.value, "alpha": cfg.alpha, "lambda": cfg.lambda, "masked_tokens": grid.mask.iter().filter(|&&m| m).count(), "config": cfg }),
    )?;
    println!("{:.6}", loss.value);
    Ok(())
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    names.sort();
    Ok(names)
}

fn eval(a: EvalArgs, config: &Config) -> Result<()> {
    let names = png_names(&a.pred)?;
    ensure!(!names.is_empty(), "no PNG files in {}", a.pred.display());
    let mut per_image = BTreeMap::new();
    let mut reports: Vec<MetricReport> = Vec::new();
    for name in &names {
        let (pred, _) = read_png(&a.pred.join(name))?;
        let (reference, _) = read_png(&a.reference.join(name)).with_context(|| format!("reference for {name}"))?;
        let input = a.input.as_ref().map(|d| read_png(&d.join(name)).map(|(i, _)| i)).transpose()?;
        let mask = match (&a.mask, &input) {
            (Some(d), _) => Some(read_mask_png(&d.join(name))?),
            (None, Some(inp)) => Some(detect_dataset_highlights(inp, config.tau_l, config.luminance)),
            _ => None,
        };
        let report = evaluate(&pred, &reference, mask.as_ref(), input.as_ref(), config.luminance)?;
        let w = &config.losses;
        let mut losses = BTreeMap::new();
        losses.insert("reconstruction", reconstruction_loss(&pred, &reference, None)?);
        losses.insert("spec", spec_penalty(&pred, w.tau_m, w.eps)?);
        if let (Some(inp), Some(m)) = (&input, &mask) {
            let ring = seam_ring(m, config.seam_radius)?;
            losses.insert("seam", seam_loss(&pred, inp, &ring, w.lambda_g)?);
        }
        per_image.insert(name.clone(), json!({ "metrics": report, "losses": losses }));
        reports.push(report);
    }
    let mean = |f: &dyn Fn(&MetricReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).filter(|x| x.is_finite()).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let infinite_psnr = reports.iter().filter(|r| r.psnr.value().is_infinite()).count();
    let aggregate = json!({
        "images": reports.len(),
        "mse_m": mean(&|r| r.mse_m),
        "psnr": mean(&|r| Some(r.psnr.value())),
        "psnr_infinite_count": infinite_psnr,
        "ssim": mean(&|r| Some(r.ssim)),
        "lsr": mean(&|r| r.lsr),
        "lsr_definition": glint_core::metrics::LSR_DEFINITION,
    });
    write_json(&a.out, &json!({ "per_image": per_image, "aggregate": aggregate }))?;
    Ok(())
}

fn selfcheck(a: SelfcheckArgs, seed: u64) -> Result<()> {
    let scratch = std::env::temp_dir().join(format!("glint-selfcheck-{}", std::process::id()));
    let result = run_selfcheck(seed, &scratch);
    let _ = fs::remove_dir_all(&scratch);
    let report = result?;
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    for c in &report.checks {
        log::info!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if !report.passed {
        bail!("selfcheck failed");
    }
    Ok(())
}
