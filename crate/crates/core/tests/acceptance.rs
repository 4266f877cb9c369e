//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantity and its runtime; the process exits nonzero if any fail.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use batchscale::augsearch::{
    frechet_distance, group_search_space, group_tuples, GaussianSummary, ImageShape, SearchOptions,
    Transform, TransformTuple,
};
use batchscale::cli::{self, RunConfig};
use batchscale::data::{make_batches, make_blobs, make_images, shuffle_epoch, BlobSpec};
use batchscale::gns::{eps_opt, paired_batch_stats, GnsAccumulator, PairedBatchConfig};
use batchscale::models::{Activation, Mlp, MlpSpec, QuadraticSpec};
use batchscale::numcore::{finite_diff_gradient, relative_l2_error, sqrtm_psd, Matrix};
use batchscale::rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_matrix(r: &mut rng::Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * rng::standard_normal(r)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Dense `A·Aᵀ + shift·I` with explicit loops.
fn gram_plus(a: &Matrix, shift: f64) -> Matrix {
    let n = a.rows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * a.get(j, k);
            }
            out[i * n + j] = s + if i == j { shift } else { 0.0 };
        }
    }
    Matrix::new(n, n, out).unwrap()
}

// Criterion 1

fn gradient_correctness() -> Outcome {
    let mut r = rng::seeded(101);
    let mut worst: f64 = 0.0;
    let trials = 8;
    for trial in 0..trials {
        let layers = r.random_range(1..=3usize);
        let mut widths = vec![r.random_range(1..=6usize)];
        for _ in 1..layers {
            widths.push(r.random_range(1..=64usize));
        }
        widths.push(r.random_range(2..=5usize));
        let act = if trial % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let classes = *widths.last().unwrap();
        let mlp = Mlp::new(MlpSpec::new(widths.clone(), act, trial as u64).map_err(err)?);
        let batch = 4;
        let x = random_matrix(&mut r, batch, widths[0], 1.0);
        let y: Vec<usize> = (0..batch).map(|_| r.random_range(0..classes)).collect();
        let theta = mlp.init();
        let analytic = mlp.loss_and_grads(&theta, &x, &y, false).map_err(err)?.batch_grad;
        let numeric = finite_diff_gradient(|p| mlp.loss(p, &x, &y).unwrap(), &theta, 1e-5).map_err(err)?;
        let e = relative_l2_error(&analytic, &numeric);
        if e > worst {
            worst = e;
        }
    }
    check(worst <= 1e-5, format!("worst relative L2 error {worst:.2e} over {trials} random MLPs (limit 1e-5)"))
}

// Criterion 2

/// `d = 50`, `Σ = I`, `H = I`, `|G|² = 1`.
fn isotropic_quadratic() -> (QuadraticSpec, Vec<f64>) {
    let d = 50;
    let spec = QuadraticSpec::new(Matrix::identity(d), Matrix::identity(d), vec![0.0; d], 0).unwrap();
    let theta = vec![1.0 / (d as f64).sqrt(); d];
    (spec, theta)
}

fn estimator_unbiasedness() -> Outcome {
    let (spec, theta) = isotropic_quadratic();
    let g_sq: f64 = spec.true_gradient(&theta).map_err(err)?.iter().map(|v| v * v).sum();
    let tr = spec.noise_cov().trace();
    let pair = PairedBatchConfig::new(8, 64).map_err(err)?;
    let mut r = rng::seeded(202);
    let draws = 10_000;
    let (mut rho, mut s) = (0.0, 0.0);
    for _ in 0..draws {
        let small = spec.sample_grads(&theta, 8, &mut r, false).map_err(err)?;
        let rest = spec.sample_grads(&theta, 56, &mut r, false).map_err(err)?;
        let st = paired_batch_stats(&small, &small.combine(&rest).map_err(err)?, pair).map_err(err)?;
        rho += st.rho_sq;
        s += st.s;
    }
    let (rho, s) = (rho / draws as f64, s / draws as f64);
    let (e_rho, e_s) = ((rho - g_sq).abs() / g_sq, (s - tr).abs() / tr);
    check(
        e_rho <= 0.02 && e_s <= 0.02,
        format!("mean rho_sq {rho:.4} vs |G|^2 {g_sq} ({:.2}%), mean S {s:.3} vs tr {tr} ({:.2}%) (limit 2%)", 100.0 * e_rho, 100.0 * e_s),
    )
}

// Criterion 3

fn oracle_equivalence() -> Outcome {
    let mut r = rng::seeded(303);
    let d = 6;
    let sigma = gram_plus(&random_matrix(&mut r, d, d, 1.0), 0.1);
    let center = vec![0.0; d];
    let theta: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();

    let iso = QuadraticSpec::new(Matrix::identity(d).scale(2.5).map_err(err)?, sigma.clone(), center.clone(), 0)
        .map_err(err)?;
    let ns = iso.true_noise_scale(&theta).map_err(err)?;
    let iso_err = (ns.b_noise - ns.b_simple).abs() / ns.b_simple;

    let h = gram_plus(&random_matrix(&mut r, d, d, 1.0), 0.5);
    let gen = QuadraticSpec::new(h.clone(), sigma.clone(), center, 0).map_err(err)?;
    let ns = gen.true_noise_scale(&theta).map_err(err)?;
    // G = Hθ, then tr(HΣ)/GᵀHG and tr(Σ)/|G|² with explicit loops
    let g: Vec<f64> = (0..d).map(|i| (0..d).map(|k| h.get(i, k) * theta[k]).sum()).collect();
    let mut tr_hs = 0.0;
    let mut ghg = 0.0;
    for i in 0..d {
        for k in 0..d {
            tr_hs += h.get(i, k) * sigma.get(k, i);
            ghg += g[i] * h.get(i, k) * g[k];
        }
    }
    let tr_s: f64 = (0..d).map(|i| sigma.get(i, i)).sum();
    let g_sq: f64 = g.iter().map(|v| v * v).sum();
    let e_noise = (ns.b_noise - tr_hs / ghg).abs() / (tr_hs / ghg);
    let e_simple = (ns.b_simple - tr_s / g_sq).abs() / (tr_s / g_sq);
    let differ = (ns.b_noise - ns.b_simple).abs() / ns.b_simple;
    check(
        iso_err <= 1e-12 && e_noise <= 1e-10 && e_simple <= 1e-10 && differ > 1e-3,
        format!(
            "H=cI: |b_noise-b_simple| rel {iso_err:.1e} (limit 1e-12); general H: b_noise {:.4} vs b_simple {:.4}, dense rel errors {e_noise:.1e} / {e_simple:.1e} (limit 1e-10)",
            ns.b_noise, ns.b_simple
        ),
    )
}

// Criterion 4

fn estimator_consistency() -> Outcome {
    let (spec, theta) = isotropic_quadratic();
    let b_simple = spec.true_noise_scale(&theta).map_err(err)?.b_simple;
    let pair = PairedBatchConfig::new(8, 64).map_err(err)?;
    let mut acc = GnsAccumulator::new(0.01).map_err(err)?;
    let mut r = rng::seeded(404);
    for _ in 0..2000 {
        let small = spec.sample_grads(&theta, 8, &mut r, false).map_err(err)?;
        let rest = spec.sample_grads(&theta, 56, &mut r, false).map_err(err)?;
        acc.update(paired_batch_stats(&small, &small.combine(&rest).map_err(err)?, pair).map_err(err)?);
    }
    let est = acc.noise_scale(50).map_err(err)?.b_noise_hat;
    let e = (est - b_simple).abs() / b_simple;
    check(e <= 0.10, format!("b_noise_hat {est:.3} vs b_simple {b_simple} after 2000 iterations ({:.2}%, limit 10%)", 100.0 * e))
}

// Criterion 5

fn eps_opt_validation() -> Outcome {
    let mut r = rng::seeded(505);
    let d = 10;
    let h = gram_plus(&random_matrix(&mut r, d, d, 0.5), 0.2);
    let sigma = gram_plus(&random_matrix(&mut r, d, d, 1.0), 0.1);
    let spec = QuadraticSpec::new(h, sigma, vec![0.0; d], 0).map_err(err)?;
    let theta: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();
    let batch = 4;
    let b_noise = spec.true_noise_scale(&theta).map_err(err)?.b_noise;
    let predicted = eps_opt(spec.eps_max(&theta).map_err(err)?, b_noise, batch);
    let grid: Vec<f64> = (-24..=24).map(|k| predicted * 2f64.powf(k as f64 / 8.0)).collect();
    let gains = cli::step_gain_curve(&spec, &theta, batch, &grid, 10_000, 505).map_err(err)?;
    let peak = (0..grid.len()).max_by(|&a, &b| gains[a].total_cmp(&gains[b])).unwrap();
    let ratio = grid[peak] / predicted;
    let half_exact = [(0.3, 16usize), (1.0, 1), (0.07, 256), (2.5e-3, 37)]
        .iter()
        .all(|&(m, b)| eps_opt(m, b as f64, b) == m / 2.0);
    check(
        (1.0 / 1.5..=1.5).contains(&ratio) && half_exact,
        format!(
            "empirical peak {:.4e} vs eps_opt {predicted:.4e} (ratio {ratio:.3}, limit x1.5, B_noise {b_noise:.2}); eps_opt(B = B_noise) = eps_max/2 exactly: {half_exact}",
            grid[peak]
        ),
    )
}

// Criterion 6

fn blob_config(out: &Path, extra: &str) -> Result<RunConfig, String> {
    let text = format!(
        "seed = 1\nout_dir = {}\nblobs_n = 2000\nblobs_classes = 3\nblobs_dim = 4\n\
         blobs_separation = 1.0\noptimizer = sgd\nlearning_rate = 0.02\n{extra}",
        out.display()
    );
    RunConfig::parse(&text).map_err(err)
}

fn speedup_analog() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    // target: the loss level the B = 8 baseline reaches within 3000 steps
    let base = cli::cmd_train(&blob_config(&dir.path().join("base"), "batch_size = 8\nsteps = 3000\n")?).map_err(err)?;
    let target = 1.05 * base.val_loss.ok_or("no validation split")? + 0.01;
    let gns = cli::cmd_estimate_gns(&blob_config(&dir.path().join("gns"), "steps = 500\n")?).map_err(err)?;
    let b_noise = gns.report.b_noise_hat;
    let sweep_cfg = blob_config(
        &dir.path().join("sweep"),
        &format!("steps = 6000\ngrid = 8 rec\nlr_rule = eps_opt_scaled\nb_noise = {b_noise}\ntarget_loss = {target}\n"),
    )?;
    let report = cli::cmd_sweep(&sweep_cfg).map_err(err)?;
    let (b, rec) = (&report.rows[0], &report.rows[1]);
    let (Some(bs), Some(rs)) = (b.steps, rec.steps) else {
        return Err(format!("a run did not reach target {target:.4}: {:?}", report.rows));
    };
    let ratio = rs as f64 / bs as f64;
    check(
        ratio <= 0.60,
        format!(
            "target val loss {target:.4}; B=8 needs {bs} steps, recommended B={} (b_noise_hat {b_noise:.1}, lr {:.4}) needs {rs} ({:.0}%, limit 60%)",
            rec.batch,
            rec.learning_rate,
            100.0 * ratio
        ),
    )
}

// Criterion 7

fn shuffle_quality() -> Outcome {
    let mut r = rng::seeded(707);
    let draws = 100_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(shuffle_epoch(4, &mut r)).or_default() += 1;
    }
    if counts.len() != 24 {
        return Err(format!("only {} of 24 permutations observed", counts.len()));
    }
    let expected = draws as f64 / 24.0;
    let stat: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(23.0).unwrap().inverse_cdf(0.999);

    let ds = make_blobs(&BlobSpec { n: 103, seed: 7, ..BlobSpec::default() }).map_err(err)?;
    let mut coverage_exact = true;
    for bs in [1, 7, 10, 103] {
        let perm = shuffle_epoch(ds.len(), &mut r);
        let mut seen = vec![0usize; ds.len()];
        for batch in make_batches(&ds, bs, &perm).map_err(err)? {
            for i in batch.indices {
                seen[i] += 1;
            }
        }
        coverage_exact &= seen.iter().all(|&c| c == 1);
    }
    check(
        stat < critical && coverage_exact,
        format!("chi-square {stat:.2} vs critical {critical:.2} (df 23, p = 0.001); every index once per epoch: {coverage_exact}"),
    )
}

// Criterion 8

fn frechet_properties() -> Outcome {
    let one_d = |mean: f64, var: f64| GaussianSummary {
        mean: vec![mean],
        cov: Matrix::new(1, 1, vec![var]).unwrap(),
        sample_count: 2,
    };
    let d1 = frechet_distance(&one_d(0.0, 1.0), &one_d(1.0, 1.0)).map_err(err)?;
    let d2 = frechet_distance(&one_d(0.0, 1.0), &one_d(1.0, 4.0)).map_err(err)?;
    let closed_ok = (d1 - 1.0).abs() <= 1e-9 && (d2 - 2.0).abs() <= 1e-9;

    let mut r = rng::seeded(808);
    let mut worst_sym: f64 = 0.0;
    let mut worst_self: f64 = 0.0;
    let summaries: Vec<GaussianSummary> = (0..100)
        .map(|i| {
            let k = 1 + i % 6;
            let scale = 0.2 + r.random::<f64>();
            GaussianSummary::fit(&random_matrix(&mut r, k + 2 + i % 5, k, scale)).unwrap()
        })
        .collect();
    for (i, a) in summaries.iter().enumerate() {
        let b = summaries.iter().skip(i + 1).find(|b| b.dim() == a.dim()).unwrap_or(a);
        let ab = frechet_distance(a, b).map_err(err)?;
        let ba = frechet_distance(b, a).map_err(err)?;
        worst_sym = worst_sym.max((ab - ba).abs());
        worst_self = worst_self.max(frechet_distance(a, a).map_err(err)?);
        // same distribution through the general formula
        let nudged = GaussianSummary { cov: a.cov.scale(1.0 + 1e-14).map_err(err)?, ..a.clone() };
        worst_self = worst_self.max(frechet_distance(a, &nudged).map_err(err)?);
    }

    let mut worst_sqrt: f64 = 0.0;
    for k in 1..=8usize {
        for rank in [k, k.div_ceil(2)] {
            let m = gram_plus(&random_matrix(&mut r, k, rank, 1.0), 0.0);
            let s = sqrtm_psd(&m, 1e-6).map_err(err)?;
            let mut res = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let ss: f64 = (0..k).map(|t| s.get(i, t) * s.get(t, j)).sum();
                    res += (ss - m.get(i, j)).powi(2);
                }
            }
            worst_sqrt = worst_sqrt.max(res.sqrt() / m.frobenius_norm());
        }
    }
    check(
        closed_ok && worst_sym <= 1e-9 && worst_self <= 1e-9 && worst_sqrt <= 1e-8,
        format!(
            "1-D cases {d1:.12} / {d2:.12}; worst asymmetry {worst_sym:.1e}, worst self-distance {worst_self:.1e} (limit 1e-9); worst sqrt residual {worst_sqrt:.1e} (limit 1e-8)"
        ),
    )
}

// Criterion 9

fn grouping() -> Outcome {
    let images = make_images(200, 8, 909).map_err(err)?;
    let magnitudes = [0.0, 0.25, 0.5, 0.75, 1.0];
    let tuples = TransformTuple::grid(&Transform::CATALOG, &magnitudes).map_err(err)?;
    let shape = ImageShape::square(images.dim()).map_err(err)?;
    let opts = SearchOptions { seed: 909, ..SearchOptions::default() };
    let report = group_search_space(images.features(), shape, &tuples, opts).map_err(err)?;
    let key = |t: &TransformTuple| (t.transform, (t.magnitude * 1e6).round() as i64);
    let all: BTreeSet<_> = tuples.iter().map(key).collect();
    let mut detail = Vec::new();
    let mut ok = tuples.len() == 30;
    for k in 1..=5 {
        let g = group_tuples(&tuples, &report.distances, k).map_err(err)?;
        let members: Vec<_> = g.groups.iter().flat_map(|grp| grp.members.iter().map(key)).collect();
        let unique: BTreeSet<_> = members.iter().copied().collect();
        let partition = members.len() == 30 && unique == all;
        let zero_group = g.groups.iter().find(|grp| grp.band.0 == 0.0);
        let identity_in_zero = zero_group.is_some_and(|grp| {
            tuples
                .iter()
                .zip(&report.distances)
                .filter(|(t, _)| t.magnitude == 0.0)
                .all(|(t, &dist)| dist == 0.0 && grp.members.iter().any(|m| key(m) == key(t)))
        });
        ok &= g.groups.len() == k && !g.fewer_groups && partition && identity_in_zero;
        detail.push(format!("k={k}: {} groups", g.groups.len()));
    }
    check(ok, format!("{}; 30 tuples each placed once; magnitude-0 tuples in the zero-distance group", detail.join(", ")))
}

// Criterion 10

fn same_reports(a: &Path, b: &Path, json: &str, csv: &str) -> Result<bool, String> {
    let ja = cli::strip_wall_clock(&fs::read_to_string(a.join(json)).map_err(err)?).map_err(err)?;
    let jb = cli::strip_wall_clock(&fs::read_to_string(b.join(json)).map_err(err)?).map_err(err)?;
    let ca = fs::read(a.join(csv)).map_err(err)?;
    let cb = fs::read(b.join(csv)).map_err(err)?;
    let text = |v: &serde_json::Value| serde_json::to_string(v).unwrap();
    Ok(text(&ja) == text(&jb) && ca == cb)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |name: &str| -> Result<(), String> {
        let cfg = blob_config(&dir.path().join(name), "batch_size = 16\nsteps = 300\n")?;
        cli::cmd_train(&cfg).map_err(err)?;
        cli::cmd_estimate_gns(&cfg).map_err(err)?;
        Ok(())
    };
    run("a")?;
    run("b")?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let train_same = same_reports(&a, &b, "summary.json", "metrics.csv")?;
    let gns_same = same_reports(&a, &b, "gns.json", "tradeoff.csv")?;
    check(
        train_same && gns_same,
        format!("train summary/metrics identical: {train_same}; gns report/tradeoff identical: {gns_same}"),
    )
}

fn main() {
    type Criterion = (usize, &'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 10] = [
        (1, "gradient correctness", gradient_correctness, 10),
        (2, "estimator unbiasedness", estimator_unbiasedness, 30),
        (3, "oracle equivalence", oracle_equivalence, 0),
        (4, "estimator consistency", estimator_consistency, 60),
        (5, "eps_opt validation", eps_opt_validation, 0),
        (6, "speedup analog", speedup_analog, 300),
        (7, "shuffle quality", shuffle_quality, 0),
        (8, "frechet distance", frechet_properties, 0),
        (9, "grouping", grouping, 0),
        (10, "determinism", determinism, 0),
    ];
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let over = limit > 0 && elapsed > Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) => (!over, d),
            Err(d) => (false, d),
        };
        let timing = if limit > 0 {
            format!("{:.1} s, limit {limit} s", elapsed.as_secs_f64())
        } else {
            format!("{:.1} s", elapsed.as_secs_f64())
        };
        println!("[{}] {id:>2} {name}: {detail} ({timing})", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
