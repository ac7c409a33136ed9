//! Command-line front end. Each subcommand loads its inputs, calls one
//! library pipeline and writes the results.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::appearance_sr::{model_sr_solve, upsample_interp, write_trace_csv, InterpKernel, ModelSrConfig, SrError};
use crate::dataset::{
    build_operators, generate_lr_scene, load_scale_inputs, read_manifest, retrieve_scale, scene_root,
    validate_manifest, write_manifest, DatasetError, SceneManifest, Subset,
};
use crate::formation::{apply_forward, FormationError, SplatConfig};
use crate::geometry::{bake_normal_map, load_mesh, rasterize_atlas, AtlasError, MeshError};
use crate::io::{read_mask, read_texture, write_texture, write_view_image, ImageIoError, TextureDepth};
use crate::metrics::{evaluate_pair, format_db, format_row, parse_metrics_csv, summarize, MetricRow, MetricsError, CSV_HEADER};
use crate::retrieval::{RetrievalConfig, RetrievalError, RetrievalMode, TextureAtlas};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    /// Human-readable output, one summary line per artifact.
    pub lines: Vec<String>,
    /// Files written, in order.
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "texsr", version, about = "Texture retrieval, appearance super-resolution and evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for stochastic steps. The current pipelines are deterministic
    /// and only record it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Retrieve a texture map from the views of one scale.
    Retrieve(RetrieveArgs),
    /// Render a texture map into the views of one scale.
    Render(RenderArgs),
    /// Bake the normal map of an atlas.
    BakeNormals(BakeNormalsArgs),
    /// Generate down-scaled levels of a scene.
    GenLr(GenLrArgs),
    /// Upsample a texture map with an interpolation kernel.
    Upsample(UpsampleArgs),
    /// Super-resolve a texture map against the low-resolution views.
    ModelSr(ModelSrArgs),
    /// Score a texture map against ground truth, or tabulate a metrics CSV.
    Evaluate(EvaluateArgs),
    /// Check a manifest against the files it references.
    ValidateManifest(ValidateArgs),
}

#[derive(Debug, Args)]
struct SplatArgs {
    #[arg(long, default_value_t = SplatConfig::default().sigma)]
    sigma: f64,
    #[arg(long, default_value_t = SplatConfig::default().radius)]
    radius: u32,
    #[arg(long, default_value_t = SplatConfig::default().depth_epsilon)]
    depth_epsilon: f64,
}

impl SplatArgs {
    fn config(&self) -> SplatConfig {
        SplatConfig {
            sigma: self.sigma,
            radius: self.radius,
            depth_epsilon: self.depth_epsilon,
        }
    }
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    scale: u32,
    #[arg(long, default_value_t = RetrievalMode::Backprojection)]
    mode: RetrievalMode,
    #[arg(long, default_value_t = RetrievalConfig::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = RetrievalConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = RetrievalConfig::default().tol)]
    tol: f64,
    #[command(flatten)]
    splat: SplatArgs,
    /// Output texture (default: x<scale>/texture.png next to the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output mask (default: mask.png next to the texture).
    #[arg(long)]
    out_mask: Option<PathBuf>,
    /// Write an 8-bit texture instead of 16-bit.
    #[arg(long)]
    eight_bit: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    scale: u32,
    #[arg(long)]
    texture: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    splat: SplatArgs,
}

#[derive(Debug, Args)]
struct BakeNormalsArgs {
    /// Bake for the atlas of this manifest's scale entry.
    #[arg(long, conflicts_with = "mesh")]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    scale: u32,
    /// Bake for a mesh file directly; needs --width and --height.
    #[arg(long, requires_all = ["width", "height"])]
    mesh: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Output PNG (default with --manifest: x<scale>/normals.png, recorded
    /// in the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenLrArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "factor", num_args = 1.., default_values_t = [2u32, 3, 4])]
    factors: Vec<u32>,
    #[command(flatten)]
    splat: SplatArgs,
}

#[derive(Debug, Args)]
struct UpsampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    input_mask: Option<PathBuf>,
    /// HR mask; its size is the output size.
    #[arg(long)]
    hr_mask: PathBuf,
    #[arg(long)]
    scale: u32,
    #[arg(long, default_value_t = InterpKernel::Bicubic)]
    kernel: InterpKernel,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_mask: Option<PathBuf>,
    #[arg(long)]
    eight_bit: bool,
}

#[derive(Debug, Args)]
struct ModelSrArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    scale: u32,
    #[arg(long, default_value_t = ModelSrConfig::default().lambda_tv)]
    lambda_tv: f64,
    #[arg(long, default_value_t = ModelSrConfig::default().step)]
    step: f64,
    #[arg(long, default_value_t = ModelSrConfig::default().max_iters)]
    max_iters: usize,
    /// Take fixed steps instead of backtracking.
    #[arg(long)]
    no_backtracking: bool,
    /// Initial HR texture (default: the stored LR texture upsampled with
    /// --init-kernel).
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = InterpKernel::Bicubic)]
    init_kernel: InterpKernel,
    #[command(flatten)]
    splat: SplatArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_mask: Option<PathBuf>,
    /// Objective trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, requires = "test", conflicts_with = "summarize")]
    gt: Option<PathBuf>,
    #[arg(long, requires = "gt")]
    test: Option<PathBuf>,
    /// Ground-truth mask.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Mask of the tested map (default: --mask).
    #[arg(long)]
    test_mask: Option<PathBuf>,
    #[arg(long, default_value = "scene")]
    scene: String,
    #[arg(long, default_value = "custom")]
    subset: String,
    #[arg(long, default_value = "method")]
    method: String,
    #[arg(long, default_value_t = 1)]
    scale: u32,
    /// Append the result row to this metrics CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Metrics CSV to tabulate per subset instead of scoring a pair.
    #[arg(long, requires = "table")]
    summarize: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// Tabulate SSIM instead of PSNR.
    #[arg(long)]
    ssim: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Numerical(m) => m,
        }
    }
}

macro_rules! data_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Self::Data(e.to_string())
            }
        }
    )*};
}

data_failure!(
    DatasetError,
    ImageIoError,
    MeshError,
    AtlasError,
    FormationError,
    RetrievalError,
    MetricsError,
    std::io::Error
);

impl From<SrError> for Failure {
    fn from(e: SrError) -> Self {
        match e {
            SrError::DivergenceDetected { .. } => Self::Numerical(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

#[derive(Default)]
struct Output {
    lines: Vec<String>,
    artifacts: Vec<PathBuf>,
}

impl Output {
    fn artifact(&mut self, path: &Path, summary: String) {
        self.lines.push(format!("{}: {summary}", path.display()));
        self.artifacts.push(path.to_path_buf());
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_command<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return CommandResult {
                exit_code: code,
                lines: e.render().to_string().lines().map(String::from).collect(),
                artifacts: Vec::new(),
            };
        }
    };
    log::debug!("seed {}", cli.seed);

    let mut out = Output::default();
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &mut out)),
            Err(e) => Err(Failure::Data(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command, &mut out),
    };
    match result {
        Ok(()) => CommandResult {
            exit_code: EXIT_OK,
            lines: out.lines,
            artifacts: out.artifacts,
        },
        Err(f) => {
            log::error!("{}", f.message());
            let mut lines = out.lines;
            lines.push(format!("error: {}", f.message()));
            CommandResult {
                exit_code: f.code(),
                lines,
                artifacts: out.artifacts,
            }
        }
    }
}

fn dispatch(cmd: &Command, out: &mut Output) -> Result<(), Failure> {
    match cmd {
        Command::Retrieve(a) => retrieve(a, out),
        Command::Render(a) => render(a, out),
        Command::BakeNormals(a) => bake_normals(a, out),
        Command::GenLr(a) => gen_lr(a, out),
        Command::Upsample(a) => upsample(a, out),
        Command::ModelSr(a) => model_sr(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::ValidateManifest(a) => validate(a, out),
    }
}

fn load_manifest(path: &Path) -> Result<(SceneManifest, PathBuf), Failure> {
    let m = read_manifest(path)?;
    Ok((m, scene_root(path)))
}

fn depth(eight_bit: bool) -> TextureDepth {
    if eight_bit {
        TextureDepth::Eight
    } else {
        TextureDepth::Sixteen
    }
}

/// Mask written next to a texture: `<stem>_mask.png`.
fn sibling_mask(texture: &Path) -> PathBuf {
    let stem = texture.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    texture.with_file_name(format!("{stem}_mask.png"))
}

fn load_texture(path: &Path, mask: Option<&Path>) -> Result<TextureAtlas, Failure> {
    Ok(read_texture(path, mask)?)
}

fn retrieve(a: &RetrieveArgs, out: &mut Output) -> Result<(), Failure> {
    let (m, root) = load_manifest(&a.manifest)?;
    let cfg = RetrievalConfig {
        mode: a.mode,
        lambda: a.lambda,
        max_iters: a.max_iters,
        tol: a.tol,
    };
    cfg.validate()?;
    let r = retrieve_scale(&root, &m, a.scale, &cfg, &a.splat.config())?;
    if r.converged == Some(false) {
        log::warn!("least squares stopped before reaching tol {}", a.tol);
    }
    let dir = root.join(format!("x{}", a.scale));
    let (tex_path, mask_path) = match (&a.out, &a.out_mask) {
        (None, mask) => (dir.join("texture.png"), mask.clone().unwrap_or_else(|| dir.join("mask.png"))),
        (Some(t), mask) => (t.clone(), mask.clone().unwrap_or_else(|| sibling_mask(t))),
    };
    write_texture(&tex_path, Some(&mask_path), &r.texture, depth(a.eight_bit))?;
    out.artifact(
        &tex_path,
        format!("texture {} active={} unseen={}", a.mode, r.texture.active_count(), r.unseen),
    );
    out.artifact(&mask_path, "mask".into());
    Ok(())
}

fn render(a: &RenderArgs, out: &mut Output) -> Result<(), Failure> {
    let (m, root) = load_manifest(&a.manifest)?;
    let tex = load_texture(&a.texture, a.mask.as_deref())?;
    let inputs = load_scale_inputs(&root, &m, a.scale, [tex.width, tex.height])?;
    let ops = build_operators(&inputs.mesh, &inputs.atlas, &inputs.cameras, &a.splat.config())?;
    let entry = m.entry(a.scale).ok_or(DatasetError::MissingScale(a.scale))?;
    for (v, op) in ops.iter().enumerate() {
        let img = apply_forward(op, &tex)?;
        let name = Path::new(&entry.images[v])
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(format!("view_{v:03}.png")));
        let path = a.out_dir.join(name);
        write_view_image(&path, &img)?;
        let covered = img.coverage.iter().filter(|&&c| c).count();
        out.artifact(&path, format!("render {}x{} covered={covered}", img.width, img.height));
    }
    Ok(())
}

fn bake_normals(a: &BakeNormalsArgs, out: &mut Output) -> Result<(), Failure> {
    match (&a.manifest, &a.mesh) {
        (Some(mpath), None) => {
            let (mut m, root) = load_manifest(mpath)?;
            let entry = m.entry(a.scale).ok_or(DatasetError::MissingScale(a.scale))?;
            let mesh = load_mesh(root.join(&m.mesh))?;
            let atlas = rasterize_atlas(&mesh, entry.atlas_size[0], entry.atlas_size[1])?;
            let nm = bake_normal_map(&atlas);
            let rel = format!("x{}/normals.png", a.scale);
            let path = a.out.clone().unwrap_or_else(|| root.join(&rel));
            nm.write_png(&path)?;
            out.artifact(&path, format!("normals {}x{} active={}", nm.width, nm.height, atlas.active_count()));
            if a.out.is_none() {
                m.entry_mut(a.scale).expect("entry checked above").normals = Some(rel);
                write_manifest(mpath, &m)?;
                out.artifact(mpath, "manifest".into());
            }
            Ok(())
        }
        (None, Some(mesh_path)) => {
            let path = a
                .out
                .clone()
                .ok_or_else(|| Failure::Usage("--mesh needs --out".into()))?;
            let mesh = load_mesh(mesh_path)?;
            let (w, h) = (a.width.unwrap_or(0), a.height.unwrap_or(0));
            let atlas = rasterize_atlas(&mesh, w, h)?;
            let nm = bake_normal_map(&atlas);
            nm.write_png(&path)?;
            out.artifact(&path, format!("normals {w}x{h} active={}", atlas.active_count()));
            Ok(())
        }
        _ => Err(Failure::Usage("bake-normals needs --manifest or --mesh".into())),
    }
}

fn gen_lr(a: &GenLrArgs, out: &mut Output) -> Result<(), Failure> {
    let (mut m, root) = load_manifest(&a.manifest)?;
    let splat = a.splat.config();
    splat.validate()?;
    for &f in &a.factors {
        m = generate_lr_scene(&root, &m, f, &splat)?;
        write_manifest(&a.manifest, &m)?;
        let e = m.entry(f).expect("entry was just generated");
        out.artifact(
            &root.join(format!("x{f}")),
            format!("x{f} views={} atlas={}x{}", e.images.len(), e.atlas_size[0], e.atlas_size[1]),
        );
    }
    out.artifact(&a.manifest, "manifest".into());
    Ok(())
}

fn upsample(a: &UpsampleArgs, out: &mut Output) -> Result<(), Failure> {
    let lr = load_texture(&a.input, a.input_mask.as_deref())?;
    let (hw, hh, hr_mask) = read_mask(&a.hr_mask)?;
    let r = upsample_interp(&lr, a.scale, a.kernel, &hr_mask, (hw, hh))?;
    let mask_path = a.out_mask.clone().unwrap_or_else(|| sibling_mask(&a.out));
    write_texture(&a.out, Some(&mask_path), &r.texture, depth(a.eight_bit))?;
    let unseen = r.unseen.iter().filter(|&&u| u).count();
    out.artifact(&a.out, format!("{} x{} {hw}x{hh} unseen={unseen}", a.kernel, a.scale));
    out.artifact(&mask_path, "mask".into());
    Ok(())
}

fn model_sr(a: &ModelSrArgs, out: &mut Output) -> Result<(), Failure> {
    let cfg = ModelSrConfig {
        scale: a.scale,
        lambda_tv: a.lambda_tv,
        step: a.step,
        max_iters: a.max_iters,
        backtracking: !a.no_backtracking,
    };
    cfg.validate()?;
    let (m, root) = load_manifest(&a.manifest)?;
    let inputs = load_scale_inputs(&root, &m, a.scale, m.atlas_size)?;
    let ops = build_operators(&inputs.mesh, &inputs.atlas, &inputs.cameras, &a.splat.config())?;
    let hr_mask = inputs.atlas.mask().to_vec();
    let (aw, ah) = (inputs.atlas.width(), inputs.atlas.height());
    let init = match &a.init {
        Some(p) => {
            let t = load_texture(p, None)?;
            if (t.width, t.height) != (aw, ah) {
                return Err(Failure::Data(format!(
                    "{}: {}x{}, atlas is {aw}x{ah}",
                    p.display(),
                    t.width,
                    t.height
                )));
            }
            TextureAtlas::new(aw, ah, t.rgb, hr_mask.clone())
        }
        None => {
            let e = m.entry(a.scale).ok_or(DatasetError::MissingScale(a.scale))?;
            let (tp, mp) = match (&e.texture, &e.mask) {
                (Some(t), Some(mk)) => (root.join(t), root.join(mk)),
                _ => return Err(Failure::Data(format!("scale {} has no stored texture", a.scale))),
            };
            let lr = load_texture(&tp, Some(&mp))?;
            upsample_interp(&lr, a.scale, a.init_kernel, &hr_mask, (aw, ah))?.texture
        }
    };
    let r = model_sr_solve(&inputs.images, &ops, &init, &cfg)?;
    let mask_path = a.out_mask.clone().unwrap_or_else(|| sibling_mask(&a.out));
    write_texture(&a.out, Some(&mask_path), &r.texture, TextureDepth::Sixteen)?;
    let (first, last) = (r.trace.first().map(|t| t.total), r.trace.last().map(|t| t.total));
    out.artifact(
        &a.out,
        format!(
            "model-sr x{} steps={} objective={:.6e}->{:.6e}{}",
            a.scale,
            r.trace.len().saturating_sub(1),
            first.unwrap_or(f64::NAN),
            last.unwrap_or(f64::NAN),
            if r.stalled { " stalled" } else { "" }
        ),
    );
    out.artifact(&mask_path, "mask".into());
    if let Some(t) = &a.trace {
        write_trace_csv(t, &r.trace)?;
        out.artifact(t, format!("trace rows={}", r.trace.len()));
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, out: &mut Output) -> Result<(), Failure> {
    if let Some(rows_path) = &a.summarize {
        let text = fs::read_to_string(rows_path)?;
        let rows = parse_metrics_csv(&text).map_err(|e| Failure::Data(format!("{}: {e}", rows_path.display())))?;
        let table = summarize(&rows, &Subset::BENCHMARK, a.ssim);
        let path = a.table.as_ref().expect("clap requires --table");
        fs::write(path, table.to_csv())?;
        out.artifact(path, format!("table methods={} scales={:?}", table.methods.len(), table.scales));
        return Ok(());
    }
    let (Some(gt), Some(test)) = (&a.gt, &a.test) else {
        return Err(Failure::Usage("evaluate needs --gt and --test, or --summarize".into()));
    };
    let gt = load_texture(gt, a.mask.as_deref())?;
    let test = load_texture(test, a.test_mask.as_deref().or(a.mask.as_deref()))?;
    let report = evaluate_pair(&gt, &test)?;
    let row = MetricRow {
        scene: a.scene.clone(),
        subset: a.subset.clone(),
        method: a.method.clone(),
        scale: a.scale,
        psnr_db: report.psnr,
        ssim: report.ssim,
        active_texels: report.active_texel_count,
    };
    out.lines.push(format!("psnr={} ssim={:.6}", format_db(report.psnr), report.ssim));
    out.lines.push(CSV_HEADER.to_string());
    out.lines.push(format_row(&row));
    if let Some(csv) = &a.csv {
        let fresh = !csv.exists() || fs::metadata(csv)?.len() == 0;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(csv)?;
        if fresh {
            writeln!(f, "{CSV_HEADER}")?;
        }
        writeln!(f, "{}", format_row(&row))?;
        out.artifact(csv, "metrics row".into());
    }
    Ok(())
}

fn validate(a: &ValidateArgs, out: &mut Output) -> Result<(), Failure> {
    let (m, root) = load_manifest(&a.manifest)?;
    let report = validate_manifest(&m, &root)?;
    for (s, views, (w, h)) in report.scales {
        out.lines.push(format!("x{s}: {views} views, {w}x{h}"));
    }
    out.lines.push(format!("{}: valid ({})", a.manifest.display(), m.scene));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let best = Box::new(TextureAtlas::zeros(1, 1, vec![true]));
        assert_eq!(Failure::from(SrError::DivergenceDetected { iteration: 3, best }).code(), EXIT_NUMERICAL);
        assert_eq!(Failure::from(SrError::InvalidScale(5)).code(), EXIT_DATA);
        assert_eq!(Failure::from(DatasetError::MissingScale(2)).code(), EXIT_DATA);
        assert_eq!(Failure::Usage(String::new()).code(), EXIT_USAGE);
    }
}
