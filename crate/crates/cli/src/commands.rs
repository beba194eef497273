use std::cell::Cell;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fullflow::bench::{bench_kernels, bench_threads};
use fullflow::grid::{run_grid, GridPair, GridRanges};
use fullflow::pipeline::{estimate_memory, run_pipeline, PipelineEvent};
use fullflow::{flo, imageio, metrics, postprocess, viz};

use crate::manifest::{IterationLogs, Manifest};
use crate::{BenchArgs, CliError, FlowArgs, GridArgs};

fn gib(bytes: u64) -> f64 {
    bytes as f64 / (1u64 << 30) as f64
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn run_flow(args: FlowArgs) -> Result<(), CliError> {
    let cfg = args.model.solver_config();
    cfg.validate().map_err(CliError::from)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out.display())))?;

    let first = imageio::read_image(&args.image1)?;
    let second = imageio::read_image(&args.image2)?;
    let gt = args.gt.as_ref().map(flo::read_flo).transpose()?;

    let estimate = estimate_memory(first.width(), first.height(), &cfg);
    println!(
        "memory estimate: cost volume {} bytes ({:.3} GiB), messages {} bytes ({:.3} GiB)",
        estimate.cost_volume_bytes,
        gib(estimate.cost_volume_bytes),
        estimate.message_bytes,
        gib(estimate.message_bytes),
    );

    let stage = Cell::new("setup");
    let result = run_pipeline(
        &first,
        &second,
        &cfg,
        Some(args.model.memory_cap_bytes()),
        |event| match event {
            PipelineEvent::Stage(name) => {
                stage.set(name);
                println!("[{name}]");
            }
            PipelineEvent::Iteration { backward, stat } => {
                println!(
                    "  {} iteration {}: lower bound {:.6}, {:.3}s",
                    if backward { "backward" } else { "forward" },
                    stat.iteration,
                    stat.lower_bound,
                    stat.elapsed.as_secs_f64()
                );
            }
        },
    )
    .map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("during {}: {}", stage.get(), err.message);
        err
    })?;

    let out = &args.out;
    flo::write_flo(&result.flow, out.join("out.flo"))?;
    imageio::write_image(&viz::flow_to_color(&result.flow, None), out.join("flow.png"))?;

    let mut match_text = String::new();
    for row in postprocess::match_list(&result.consistent_flow, cfg.scale) {
        writeln!(match_text, "{} {} {} {}", row[0], row[1], row[2], row[3]).unwrap();
    }
    write_text(&out.join("matches.txt"), &match_text)?;

    let mut outputs = vec!["out.flo".to_string(), "flow.png".into(), "matches.txt".into()];
    if let Some(gt) = &gt {
        let m = metrics::compute_metrics(&result.flow, gt, None)?;
        let csv = format!(
            "epe_all,outlier_rate,evaluated\n{},{},{}\n",
            m.epe_all, m.outlier_rate, m.evaluated
        );
        write_text(&out.join("metrics.csv"), &csv)?;
        let emap = viz::error_map(
            &m.per_pixel_epe,
            result.flow.width(),
            result.flow.height(),
            viz::ERROR_MAP_TRUNCATION,
        );
        imageio::write_image(&emap, out.join("error.png"))?;
        outputs.push("metrics.csv".into());
        outputs.push("error.png".into());
        println!(
            "epe_all {:.6}, outlier rate {:.4} over {} pixels",
            m.epe_all, m.outlier_rate, m.evaluated
        );
    }
    outputs.push("manifest.json".into());

    let manifest = Manifest {
        inputs: crate::manifest::Inputs {
            first: args.image1.display().to_string(),
            second: args.image2.display().to_string(),
            ground_truth: args.gt.as_ref().map(|p| p.display().to_string()),
        },
        config: (&cfg).into(),
        memory: (&result.memory).into(),
        stage_seconds: (&result.stage_times).into(),
        iterations: IterationLogs {
            forward: result.forward_log.iter().map(Into::into).collect(),
            backward: result.backward_log.iter().map(Into::into).collect(),
        },
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join("manifest.json"), &json)?;
    println!("wrote artifacts to {}", out.display());
    Ok(())
}

fn parse_pair_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf, PathBuf)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |s: &str| {
        let p = PathBuf::from(s);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CliError::input(format!(
                "{}:{}: expected 'first second gt', got {} fields",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        pairs.push((resolve(fields[0]), resolve(fields[1]), resolve(fields[2])));
    }
    if pairs.is_empty() {
        return Err(CliError::input(format!("{}: no pairs listed", path.display())));
    }
    Ok(pairs)
}

#[derive(serde::Deserialize, Default)]
struct RangesFile {
    lambda: Option<Vec<f64>>,
    tau: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    zeta: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
}

fn load_ranges(path: Option<&Path>) -> Result<GridRanges, CliError> {
    let mut ranges = GridRanges::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let file: RangesFile = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if let Some(v) = file.lambda {
            ranges.lambda = v;
        }
        if let Some(v) = file.tau {
            ranges.tau = v;
        }
        if let Some(v) = file.beta {
            ranges.beta = v;
        }
        if let Some(v) = file.zeta {
            ranges.zeta = v;
        }
        if let Some(v) = file.delta {
            ranges.delta = v;
        }
    }
    Ok(ranges)
}

pub fn run_grid_cmd(args: GridArgs) -> Result<(), CliError> {
    let base = args.model.solver_config();
    base.validate().map_err(CliError::from)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out.display())))?;
    let ranges = load_ranges(args.ranges.as_deref())?;

    let mut pairs = Vec::new();
    for (first, second, gt) in parse_pair_manifest(&args.manifest)? {
        pairs.push(GridPair {
            first: imageio::read_image(&first)?,
            second: imageio::read_image(&second)?,
            gt: flo::read_flo(&gt)?,
        });
    }
    println!("{} pairs, 12 conditions", pairs.len());

    let cells = run_grid(&pairs, &base, &ranges, |msg| println!("{msg}"))?;

    let mut table = String::from(
        "condition,data_term,penalty,truncated,lambda,tau,beta,zeta,delta,mean_epe\n",
    );
    let mut series = String::from("condition,rank,epe\n");
    println!("{:<28} mean EPE", "condition");
    for cell in &cells {
        let label = cell.condition.label();
        println!("{label:<28} {:.4}", cell.mean_epe);
        let dt = if label.starts_with("ncc") { "ncc" } else { "hs" };
        let pen = label.split('+').nth(1).unwrap().split(' ').next().unwrap();
        writeln!(
            table,
            "{label},{dt},{pen},{},{},{},{},{},{},{}",
            cell.condition.truncated,
            cell.best.lambda,
            if cell.best.tau.is_finite() { cell.best.tau.to_string() } else { "inf".into() },
            cell.best.beta,
            cell.best.zeta,
            cell.best.delta,
            cell.mean_epe
        )
        .unwrap();
        for (rank, epe) in cell.per_image_epe.iter().enumerate() {
            writeln!(series, "{label},{rank},{epe}").unwrap();
        }
    }
    write_text(&args.out.join("grid_table.csv"), &table)?;
    write_text(&args.out.join("grid_series.csv"), &series)?;
    println!("wrote grid_table.csv and grid_series.csv to {}", args.out.display());
    Ok(())
}

pub fn run_bench(args: BenchArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out.display())))?;

    println!("kernel scaling over radii {:?}", args.radii);
    let kernels = bench_kernels(&args.radii, args.seed);
    let mut kernel_csv = String::from("kernel,label_count,seconds_per_update\n");
    for scaling in &kernels {
        println!("  {:<8} fitted exponent {:.3}", scaling.kernel, scaling.exponent);
        for s in &scaling.samples {
            writeln!(kernel_csv, "{},{},{}", scaling.kernel, s.label_count, s.seconds_per_update)
                .unwrap();
        }
    }
    write_text(&args.out.join("bench_kernels.csv"), &kernel_csv)?;

    let max_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = Vec::new();
    for spec in &args.threads_list {
        let n = if spec.eq_ignore_ascii_case("max") {
            max_threads
        } else {
            spec.parse::<usize>()
                .map_err(|e| CliError::usage(format!("bad thread count '{spec}': {e}")))?
        };
        if n >= 1 && !counts.contains(&n) {
            counts.push(n);
        }
    }
    println!(
        "thread scaling on a {}x{} instance, radius {}, threads {:?}",
        args.width, args.height, args.radius, counts
    );
    let points = bench_threads(
        args.width,
        args.height,
        args.radius,
        args.iterations,
        &counts,
        args.seed,
    );
    let base_time = points[0].seconds_per_iteration;
    let mut thread_csv =
        String::from("threads,seconds_per_iteration,speedup,max_message_diff,max_flow_diff\n");
    for p in &points {
        let speedup = base_time / p.seconds_per_iteration;
        println!(
            "  threads {:>2}: {:.3}s per iteration, speedup {:.2}x, max diff {:.2e}",
            p.threads, p.seconds_per_iteration, speedup, p.max_message_diff
        );
        writeln!(
            thread_csv,
            "{},{},{},{},{}",
            p.threads, p.seconds_per_iteration, speedup, p.max_message_diff, p.max_flow_diff
        )
        .unwrap();
    }
    write_text(&args.out.join("bench_threads.csv"), &thread_csv)?;
    println!("wrote bench_kernels.csv and bench_threads.csv to {}", args.out.display());
    Ok(())
}
