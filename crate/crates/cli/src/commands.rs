use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use amorph::amm::dense::for_each_dense_row;
use amorph::amm::{attentive_matrix, RowStatus};
use amorph::engine::TransferRequest;
use amorph::face::FaceBundle;
use amorph::histmatch::histogram_match;
use amorph::io::{encode_png_gray, encode_png_rgb, load_bundle_dir, save_bundle_dir};
use amorph::synth::synth_face;
use amorph::{Engine, Error, FieldMode, PreparedFace, SynthParams, TransferSpec, WorkingGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    AttentionArgs, BatchArgs, BenchArgs, Cli, CliError, Command, HistmatchArgs, SynthArgs, TransferArgs, EXIT_DATA,
    EXIT_INTERNAL,
};

type Out<'a> = &'a mut (dyn Write + Send);

pub fn execute(cli: Cli, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("threads", "--threads: must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError { exit: EXIT_INTERNAL, code: "threads".into(), message: e.to_string() })?;
    pool.install(|| match cli.command {
        Command::Transfer(a) => transfer(a, out, err),
        Command::Batch(a) => batch(a, out, err),
        Command::Attention(a) => attention(a, out, err),
        Command::Histmatch(a) => histmatch(a, out, err),
        Command::Bench(a) => bench(a, out),
        Command::Synth(a) => synth(a, out),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source }.into())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source }.into())
}

fn load(path: &Path) -> Result<FaceBundle<f64>, CliError> {
    load_bundle_dir(path).map_err(|e| {
        let named = matches!(e, Error::Io { .. });
        let mut e = CliError::from(e);
        if !named {
            e.message = format!("{}: {}", path.display(), e.message);
        }
        e
    })
}

fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text.into_bytes()
}

fn transfer(args: TransferArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let (mut source, mut references, raw_params) = match &args.request {
        Some(path) => {
            let spec = TransferSpec::load(path)?;
            let raw: serde_json::Value = serde_json::from_str(&read_to_string(path)?).map_err(Error::from)?;
            (Some(spec.source), spec.references, raw.get("params").cloned())
        }
        None => (None, Vec::new(), None),
    };
    if let Some(s) = args.source {
        source = Some(s);
    }
    if args.reference.is_some() || args.ref2.is_some() {
        let first = args.reference.or_else(|| references.first().cloned());
        references = first.into_iter().chain(args.ref2).collect();
    }
    let source = source.ok_or_else(|| CliError::usage("usage", "--source (or --request) is required"))?;
    if references.is_empty() {
        return Err(CliError::usage("usage", "--ref (or --request) is required"));
    }
    let params = args.params.resolve(raw_params.as_ref(), references.len())?;

    let source = load(&source)?;
    let references = references.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let request = TransferRequest::new(source, references, params)?;
    let result = Engine::default().transfer(&request)?;

    write_file(&args.output, &encode_png_rgb(&result.output)?)?;
    let diagnostics = args.diagnostics.unwrap_or_else(|| args.output.with_extension("json"));
    write_file(&diagnostics, &to_json(&result.diagnostics))?;
    if result.coverage < 1.0 {
        let _ = writeln!(err, "warning: coverage {:.4}: some source regions are missing in a reference and were left unchanged", result.coverage);
    }
    let _ = writeln!(out, "wrote {} (coverage {:.4})", args.output.display(), result.coverage);
    Ok(())
}

fn frame_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(amorph::io::IMAGE_FILE).is_file())
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(CliError { exit: EXIT_DATA, code: "empty_batch".into(), message: format!("{}: no frame bundles found", dir.display()) });
    }
    Ok(frames)
}

fn batch(args: BatchArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let refs: Vec<PathBuf> = std::iter::once(args.reference).chain(args.ref2).collect();
    let params = args.params.resolve(None, refs.len())?;
    let frames = frame_dirs(&args.frames)?;
    let engine = Engine::default();
    let grid = params.working_grid()?;
    let prepared: Vec<PreparedFace> = refs
        .iter()
        .map(|p| Ok(engine.prepare(&load(p)?, grid, params.mode)?))
        .collect::<Result<_, CliError>>()?;
    let prepared: Vec<&PreparedFace> = prepared.iter().collect();
    std::fs::create_dir_all(&args.output).map_err(|source| Error::Io { path: args.output.clone(), source })?;

    let results: Vec<Result<(PathBuf, f64), CliError>> = frames
        .par_iter()
        .map(|frame| {
            let bundle = load(frame)?;
            let source = engine.prepare(&bundle, grid, params.mode)?;
            let result = engine.transfer_prepared(&bundle, &source, &prepared, &params)?;
            let name = frame.file_name().expect("frame directories have names");
            let path = args.output.join(name).with_extension("png");
            write_file(&path, &encode_png_rgb(&result.output)?)?;
            Ok((path, result.coverage))
        })
        .collect();
    let mut first_error = None;
    for (frame, r) in frames.iter().zip(results) {
        match r {
            Ok((path, coverage)) => {
                let _ = writeln!(out, "wrote {} (coverage {coverage:.4})", path.display());
            }
            Err(e) => {
                let _ = writeln!(err, "warning: frame {} failed: {}", frame.display(), e.message);
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct AttentionReport<'a> {
    w: f64,
    zero_features: bool,
    #[serde(flatten)]
    row: &'a amorph::amm::SparseRow,
}

fn attention(args: AttentionArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let params = args.params.resolve(None, 1)?;
    if let Some(ws) = &args.w_sweep {
        if let Some(bad) = ws.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(CliError::flag("--w-sweep", Error::InvalidWeight(*bad)));
        }
    }
    let engine = Engine::default();
    let grid = params.working_grid()?;
    let source = engine.prepare(&load(&args.source)?, grid, params.mode)?;
    let reference = engine.prepare(&load(&args.reference)?, grid, params.mode)?;
    let sweep = args.w_sweep.clone();
    let weights = sweep.clone().unwrap_or_else(|| vec![params.w]);
    for w in weights {
        let (row, heat) = engine.inspect_attention(&source, &reference, args.pixel, w, args.zero_features)?;
        let png = match &sweep {
            Some(_) => {
                let stem = args.output.file_stem().and_then(|s| s.to_str()).unwrap_or("attention");
                args.output.with_file_name(format!("{stem}_w{w}.png"))
            }
            None => args.output.clone(),
        };
        write_file(&png, &encode_png_gray(heat.width, heat.height, &heat.to_gray8())?)?;
        let report = AttentionReport { w, zero_features: args.zero_features, row: &row };
        write_file(&png.with_extension("json"), &to_json(&report))?;
        match row.status {
            RowStatus::Background => {
                let _ = writeln!(err, "warning: pixel {:?} is background; the attention map is empty", args.pixel);
            }
            RowStatus::Unmatched => {
                let _ = writeln!(err, "warning: region {} is absent from the reference; the attention map is empty", row.region);
            }
            RowStatus::Attended => {}
        }
        let peak = heat.argmax().map_or("none".to_string(), |(r, c)| format!("{r},{c}"));
        let _ = writeln!(out, "w={w}: {} entries, argmax {peak}, wrote {}", row.entries.len(), png.display());
    }
    Ok(())
}

fn histmatch(args: HistmatchArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let (x, y) = (load(&args.source)?, load(&args.reference)?);
    let hm = histogram_match(&x, &y)?;
    write_file(&args.output, &encode_png_rgb(&hm.image)?)?;
    for r in &hm.fallback_regions {
        let _ = writeln!(err, "warning: region {r} is absent from the reference; copied from the source");
    }
    let _ = writeln!(out, "wrote {}", args.output.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchRow {
    grid: usize,
    sparse_seconds: f64,
    sparse_pairs: u64,
    sparse_pairs_per_second: f64,
    dense_seconds: f64,
    dense_pairs: u64,
    dense_pairs_per_second: f64,
    speedup: f64,
    max_abs_diff: f64,
    background_fraction: f64,
}

fn bench(args: BenchArgs, out: Out<'_>) -> Result<(), CliError> {
    if !args.w.is_finite() || args.w < 0.0 {
        return Err(CliError::flag("--w", Error::InvalidWeight(args.w)));
    }
    let engine = Engine::default();
    let mut rows = Vec::new();
    for &side in &args.sizes {
        let grid = WorkingGrid::square(side).map_err(|e| CliError::flag("--sizes", e))?;
        let synth = SynthParams { size: (4 * side).max(256), ..Default::default() };
        let x: FaceBundle<f64> = synth_face(args.seed, &synth)?;
        let y: FaceBundle<f64> = synth_face(args.seed.wrapping_add(1), &synth)?;
        let (px, py) = (engine.prepare(&x, grid, FieldMode::PerChannel)?, engine.prepare(&y, grid, FieldMode::PerChannel)?);
        let (sx, sy) = (px.attention_side(), py.attention_side());

        let t = Instant::now();
        let sparse = attentive_matrix(&sx, &sy, args.w)?;
        let sparse_seconds = t.elapsed().as_secs_f64();

        // the dense pass doubles as the agreement check
        let max_diff = Mutex::new(0.0f64);
        let t = Instant::now();
        for_each_dense_row(&sx, &sy, args.w, |i, dense| {
            let mut expected = vec![0.0; dense.len()];
            for (j, v) in sparse.row(i).entries() {
                expected[j] = v;
            }
            let d = dense.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let mut m = max_diff.lock().expect("no panics while holding the lock");
            *m = m.max(d);
        })?;
        let dense_seconds = t.elapsed().as_secs_f64();
        let max_abs_diff = max_diff.into_inner().expect("no panics while holding the lock");
        if max_abs_diff > 1e-6 {
            return Err(CliError {
                exit: EXIT_INTERNAL,
                code: "bench_mismatch".into(),
                message: format!("grid {side}: dense and bucketed attention differ by {max_abs_diff:e}"),
            });
        }
        let n = grid.len() as u64;
        let sparse_pairs = sparse.stored_entries() as u64;
        let background = px.labels().labels().iter().filter(|r| !r.is_face()).count() as f64 / n as f64;
        let row = BenchRow {
            grid: side,
            sparse_seconds,
            sparse_pairs,
            sparse_pairs_per_second: sparse_pairs as f64 / sparse_seconds.max(1e-9),
            dense_seconds,
            dense_pairs: n * n,
            dense_pairs_per_second: (n * n) as f64 / dense_seconds.max(1e-9),
            speedup: dense_seconds / sparse_seconds.max(1e-9),
            max_abs_diff,
            background_fraction: background,
        };
        let _ = writeln!(
            out,
            "grid {:>3}: bucketed {:.4}s ({:.3e} pairs/s), dense {:.4}s ({:.3e} pairs/s), speedup {:.1}x, max diff {:.1e}, background {:.0}%",
            row.grid,
            row.sparse_seconds,
            row.sparse_pairs_per_second,
            row.dense_seconds,
            row.dense_pairs_per_second,
            row.speedup,
            row.max_abs_diff,
            100.0 * row.background_fraction
        );
        rows.push(row);
    }
    if let Some(path) = &args.json {
        write_file(path, &to_json(&rows))?;
    }
    Ok(())
}

fn synth(args: SynthArgs, out: Out<'_>) -> Result<(), CliError> {
    let mut params = match &args.params {
        Some(path) => serde_json::from_str::<SynthParams>(&read_to_string(path)?)
            .map_err(|e| CliError::usage("params", format!("{}: {e}", path.display())))?,
        None => SynthParams::default(),
    };
    if let Some(s) = args.size {
        params.size = s;
    }
    if let Some(r) = args.rotation {
        params.rotation_deg = r;
    }
    if let Some(l) = args.lip {
        params.lip = l;
    }
    if args.eye_shadow.is_some() {
        params.eye_shadow = args.eye_shadow;
    }
    let bundle: FaceBundle<f64> = synth_face(args.seed, &params).map_err(|e| CliError::flag("synth parameters", e))?;
    save_bundle_dir(&bundle, &args.output)?;
    let _ = writeln!(out, "wrote {}", args.output.display());
    Ok(())
}
