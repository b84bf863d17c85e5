//! Subcommand implementations. Every check writes one self-describing JSON
//! report whose verdict maps onto the process exit code.

use crate::config::ResolvedRun;
use anyhow::{bail, Context, Result};
use spinlab::{
    compat_suite, dlr_invariance_suite, kms_mcmc_suite, mcmc_sample_stream, kms_kernel_suite,
    tilted_annihilation_suite, Boundary, CheckReport, CheckSettings, Configuration, GibbsKernel,
    ManifoldKind, Observable, ReportMeta, SiteIndex, SiteManifold, SiteSet, Verdict, Window,
};
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

fn meta_for(run: &ResolvedRun, name: &str) -> ReportMeta {
    ReportMeta {
        name: format!("{name}/{}", run.model.name),
        model_hash: run.hash.clone(),
        seed: run.seed,
    }
}

fn emit_report(run: &ResolvedRun, report: &CheckReport) -> Result<ExitCode> {
    let json = report.to_json_pretty()?;
    match &run.out {
        Some(path) => {
            std::fs::write(path, &json).with_context(|| format!("cannot write {path}"))?;
            eprintln!("report written to {path}");
        }
        None => println!("{json}"),
    }
    if let Some(path) = &run.csv {
        std::fs::write(path, report.csv())
            .with_context(|| format!("cannot write {path}"))?;
    }
    let worst = report
        .pairs
        .iter()
        .map(|p| p.z.abs())
        .fold(0.0f64, f64::max);
    eprintln!(
        "{}: verdict {:?} over {} rows (max |z| = {:.2})",
        report.name,
        report.verdict,
        report.pairs.len(),
        worst
    );
    Ok(match report.verdict {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(2),
        Verdict::Inconclusive => ExitCode::from(3),
    })
}

pub fn sample(run: &ResolvedRun) -> Result<ExitCode> {
    let proto = run.window_configuration()?;
    let lambda: SiteSet = proto.window().iter().collect();
    let manifold = run.manifold()?;
    let kernel = GibbsKernel::mcmc(
        run.model.potential.clone(),
        manifold,
        lambda,
        run.beta_sample,
        run.mcmc,
    )?;

    let mut sink: Box<dyn Write> = match &run.out {
        Some(path) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("cannot create {path}"))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    #[derive(serde::Serialize)]
    struct SampleRecord {
        sweep: usize,
        config: serde_json::Value,
        #[serde(rename = "H")]
        h: f64,
    }
    let mut count = 0usize;
    let stats = mcmc_sample_stream(&kernel, &proto, |sweep, cfg, h| {
        let record = SampleRecord {
            sweep,
            config: cfg.to_json(),
            h,
        };
        let line = serde_json::to_string(&record)?;
        writeln!(sink, "{line}").map_err(spinlab::Error::Io)?;
        count += 1;
        Ok(())
    })?;
    sink.flush()?;
    eprintln!(
        "wrote {count} samples (acceptance rate {:.3})",
        stats.acceptance_rate
    );
    Ok(ExitCode::SUCCESS)
}

pub fn kms_check(run: &ResolvedRun) -> Result<ExitCode> {
    let corpus = run.corpus()?;
    let settings = CheckSettings::default();
    let report = match run.engine.as_str() {
        "quadrature" => {
            let lambda = run
                .lambda
                .clone()
                .ok_or_else(|| anyhow::anyhow!("quadrature kms-check needs --lambda"))?;
            let eta = run.region_configuration(&lambda)?;
            let kernel = GibbsKernel::quadrature(
                run.model.potential.clone(),
                run.manifold()?,
                lambda,
                run.beta_sample,
            )?;
            kms_kernel_suite(
                &kernel,
                &eta,
                &corpus.pairs,
                &settings,
                &meta_for(run, "kms-check"),
            )?
        }
        "mcmc" => {
            let proto = run.window_configuration()?;
            kms_mcmc_suite(
                &run.model.potential,
                &run.manifold()?,
                &proto,
                run.beta_sample,
                &run.mcmc,
                &corpus.pairs,
                &settings,
                &meta_for(run, "kms-check"),
            )?
        }
        other => bail!("unknown engine `{other}` (quadrature | mcmc)"),
    };
    emit_report(run, &report)
}

pub fn dlr_check(run: &ResolvedRun) -> Result<ExitCode> {
    let corpus = run.corpus()?;
    if run.boundary_spec != "periodic" {
        bail!("dlr-check needs --boundary periodic");
    }
    let proto = run.window_configuration()?;
    let lambda_spec = run
        .lambda
        .clone()
        .ok_or_else(|| anyhow::anyhow!("dlr-check needs --lambda"))?;
    // Corpus observables are written near the origin; anchor them at the
    // first region site.
    let anchor = *lambda_spec
        .iter()
        .next()
        .ok_or_else(|| anyhow::anyhow!("empty --lambda"))?;
    let observables: Vec<Observable> = corpus.observables_at(anchor);
    let report = dlr_invariance_suite(
        &run.model.potential,
        &run.manifold()?,
        &proto,
        run.beta_sample,
        run.beta,
        &run.mcmc,
        std::slice::from_ref(&lambda_spec),
        &observables,
        run.inner_order,
        &CheckSettings::default(),
        &meta_for(run, "dlr-check"),
    )?;
    emit_report(run, &report)
}

pub fn compat_check(run: &ResolvedRun) -> Result<ExitCode> {
    let corpus = run.corpus()?;
    let inner_lambda = run
        .lambda
        .clone()
        .ok_or_else(|| anyhow::anyhow!("compat-check needs --lambda (inner region)"))?;
    let outer_lambda = run
        .lambda_outer
        .clone()
        .ok_or_else(|| anyhow::anyhow!("compat-check needs --lambda-outer"))?;
    let eta = run.region_configuration(&outer_lambda)?;
    let manifold = run.manifold()?;
    let outer = GibbsKernel::quadrature(
        run.model.potential.clone(),
        manifold.clone(),
        outer_lambda,
        run.beta,
    )?;
    let inner = GibbsKernel::quadrature(
        run.model.potential.clone(),
        SiteManifold::new(manifold.kind(), run.inner_order)?,
        inner_lambda,
        run.beta,
    )?;
    let report = compat_suite(
        &outer,
        &inner,
        &eta,
        &corpus.observables,
        &CheckSettings::default(),
        &meta_for(run, "compat-check"),
    )?;
    emit_report(run, &report)
}

pub fn tilt_check(run: &ResolvedRun) -> Result<ExitCode> {
    let corpus = run.corpus()?;
    let lambda = run
        .lambda
        .clone()
        .ok_or_else(|| anyhow::anyhow!("tilt-check needs --lambda"))?;
    let eta = run.region_configuration(&lambda)?;
    let kernel = GibbsKernel::quadrature(
        run.model.potential.clone(),
        run.manifold()?,
        lambda,
        run.beta,
    )?;
    let report = tilted_annihilation_suite(
        &kernel,
        &eta,
        &corpus.pairs,
        &CheckSettings::default(),
        &meta_for(run, "tilt-check"),
    )?;
    emit_report(run, &report)
}

pub fn bench() -> Result<ExitCode> {
    println!("{:<44} {:>12}", "operation", "time");
    let time = |label: &str, mut f: Box<dyn FnMut()>| {
        let start = Instant::now();
        f();
        println!("{label:<44} {:>9.1} ms", start.elapsed().as_secs_f64() * 1e3);
    };

    time(
        "gauss-legendre nodes, order 64",
        Box::new(|| {
            let _ = spinlab::gauss_legendre(64);
        }),
    );

    let m24 = SiteManifold::new(ManifoldKind::Sphere2, 24)?;
    let model = spinlab::load_model("field")?;
    let lambda: SiteSet = [SiteIndex::d1(0)].into_iter().collect();
    let kernel = GibbsKernel::quadrature(model.potential, m24, lambda, 1.0)?;
    let eta = Configuration::filled(
        Window::from_shape(&[1])?,
        Boundary::Free,
        spinlab::SitePoint::north(),
    );
    let f = Observable::parse("sz(0)", ManifoldKind::Sphere2)?;
    time(
        "single-site field expectation, order 24",
        Box::new(|| {
            let _ = kernel.expectation(&f, &eta).unwrap();
        }),
    );

    let chain = spinlab::load_model("heisenberg1d")?;
    let m8 = SiteManifold::new(ManifoldKind::Sphere2, 8)?;
    let proto = Configuration::filled(
        Window::from_shape(&[16])?,
        Boundary::Periodic,
        spinlab::SitePoint::north(),
    );
    let window_sites: SiteSet = proto.window().iter().collect();
    let params = spinlab::McmcParams {
        sweeps: 2_000,
        burn_in: 1_000,
        chains: 1,
        ..Default::default()
    };
    let mc = GibbsKernel::mcmc(chain.potential.clone(), m8, window_sites, 1.0, params)?;
    let dot = Observable::parse(
        "sx(0)*sx(1)+sy(0)*sy(1)+sz(0)*sz(1)",
        ManifoldKind::Sphere2,
    )?;
    time(
        "1000 metropolis sweeps, periodic 16-chain",
        Box::new(|| {
            let _ = mc.expectation(&dot, &proto).unwrap();
        }),
    );

    let g = Observable::parse("sz(0)*sy(1)", ManifoldKind::Sphere2)?;
    time(
        "10^5 product bracket evaluations",
        Box::new(|| {
            let mut acc = 0.0;
            for _ in 0..100_000 {
                acc += spinlab::product_bracket(&dot, &g, &proto).unwrap();
            }
            std::hint::black_box(acc);
        }),
    );

    time(
        "10^4 observable parses",
        Box::new(|| {
            for _ in 0..10_000 {
                let _ = Observable::parse(
                    "-1.0*(sx(0)*sx(1)+sy(0)*sy(1)+sz(0)*sz(1))",
                    ManifoldKind::Sphere2,
                )
                .unwrap();
            }
        }),
    );

    Ok(ExitCode::SUCCESS)
}

pub fn list_models(name: Option<&str>) -> Result<ExitCode> {
    match name {
        Some(n) => {
            let text = spinlab::describe_model(n)?;
            println!("{text}");
        }
        None => {
            for info in spinlab::list_models() {
                println!("{:<14} {}", info.name, info.summary);
            }
            println!("\nuse `spinlab list-models NAME` for terms and reference values");
        }
    }
    Ok(ExitCode::SUCCESS)
}
