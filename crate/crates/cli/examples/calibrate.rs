//! Measures the reproductive-run errors and timings that the acceptance
//! thresholds are frozen from. Run with `cargo run --release --example calibrate`.

use std::time::Instant;

use romkit_cli::config::{BasisSource, HyperMode, Method, RunConfig, SampleSpec, Stepper, WeightingSpec};
use romkit_cli::pipeline::{bench, compare_states, random_orthonormal_basis, run_fom, run_rom};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = [32, 64, 128, 256];
    let only_bench = std::env::var_os("ONLY_BENCH").is_some();

    if !only_bench {
        let t = Instant::now();
        let mut cfg = RunConfig::new(1024, Method::Fom, Some(Stepper::Rk4));
        cfg.num_steps = 4096;
        let fom = run_fom(&cfg)?;
        let pod = romkit::compute_pod_basis_with(
            &fom.snapshots,
            &cfg.params.initial_condition(),
            256,
            romkit::RankPolicy::CompleteWithNullModes,
        )?;
        println!("numerical rank {}", pod.numerical_rank);
        println!("galerkin training: {:.1}s", t.elapsed().as_secs_f64());
        for p in sizes {
            let mut c = cfg.clone();
            c.method = Method::Galerkin;
            c.basis = Some(BasisSource::Given(p));
            let rom = run_rom(&c, Some(&pod.basis))?;
            let m = compare_states(&fom.final_state, &rom.final_state)?;
            println!(
                "galerkin p={p:4} rel_l2={:.3e} rel_linf={:.3e} ({:.0} ms)",
                m.rel_l2, m.rel_linf, rom.wall_ms
            );
        }
        println!("galerkin total: {:.1}s", t.elapsed().as_secs_f64());

        let t = Instant::now();
        let mut cfg = RunConfig::new(1024, Method::Fom, Some(Stepper::Bdf1));
        cfg.num_steps = 1024;
        let fom = run_fom(&cfg)?;
        let pod = romkit::compute_pod_basis_with(
            &fom.snapshots,
            &cfg.params.initial_condition(),
            256,
            romkit::RankPolicy::CompleteWithNullModes,
        )?;
        println!("lspg numerical rank {}", pod.numerical_rank);
        for p in sizes {
            let mut c = cfg.clone();
            c.method = Method::Lspg;
            c.basis = Some(BasisSource::Given(p));
            let rom = run_rom(&c, Some(&pod.basis))?;
            let m = compare_states(&fom.final_state, &rom.final_state)?;
            println!(
                "lspg p={p:4} rel_l2={:.10e} rel_linf={:.3e} gn={} unconverged={} ({:.0} ms)",
                m.rel_l2, m.rel_linf, rom.gn_iterations, rom.unconverged_steps, rom.wall_ms
            );
            if p == 32 {
                for seed in 0..5 {
                    c.weighting = WeightingSpec::Collocation(SampleSpec::Fraction(0.1));
                    c.seed = seed;
                    match run_rom(&c, Some(&pod.basis)) {
                        Ok(hr) => {
                            let mh = compare_states(&fom.final_state, &hr.final_state)?;
                            println!(
                                "  hyper z={} seed={seed} rel_l2={:.3e} gn={} unconverged={}",
                                hr.z, mh.rel_l2, hr.gn_iterations, hr.unconverged_steps
                            );
                        }
                        Err(e) => println!("  hyper seed={seed} failed: {e}"),
                    }
                }
            }
        }
        println!("lspg total: {:.1}s", t.elapsed().as_secs_f64());
    }

    for n in [1024, 8192] {
        let mut c = RunConfig::new(n, Method::Lspg, Some(Stepper::Bdf1));
        c.num_steps = 100;
        let basis = random_orthonormal_basis(n, 32, 0)?;
        c.basis = Some(BasisSource::Given(32));
        for w in [
            WeightingSpec::Identity,
            WeightingSpec::Collocation(SampleSpec::Count(103)),
        ] {
            let mut cw = c.clone();
            cw.weighting = w;
            cw.hyper_mode = HyperMode::SampleMesh;
            match bench(&cw, Some(&basis), 10, None) {
                Ok(row) => println!(
                    "bench N={n} {w}: {:.4} ms/step, gn={}",
                    row.ms_per_iteration, row.gn_iters_total
                ),
                Err(e) => println!("bench N={n} {w} failed: {e}"),
            }
        }
    }
    Ok(())
}
