//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contrakit::measures::{mu_inf, mu_limit_estimate, mu_one, mu_two, sup_measure_over_region};
use contrakit::models::{
    bio_circuit, bio_contraction_eps, bio_equilibrium, bio_omega_r, bio_weight, counterexample_system, erf_system,
    forced_linear_system, linear_decay_system, periodic_bio_circuit, shifted_system, PeriodicForcing, SineForcing,
};
use contrakit::simulate::{integrate_with_stops, IntegratorConfig};
use contrakit::verify::{
    certify_sost_via_nc, check_br, check_entrainment, check_ic, check_property, default_region_grid, reproduce_witness,
    so_via_swe, EntrainPlan, IcConfig, NcConfig, NormFamily, Property, PropertyQuery, SamplePlan, Status,
};
use contrakit::{BaseNorm, BioParams, Matrix, MeasureSpec, SystemModel};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("{e:#}")
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Matrix::from_row_slice(n, &data).expect("square")
}

fn measures() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_limit: f64 = 0.0;
    let mut worst_law: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let mut p = Matrix::identity(n).add(&random_matrix(&mut rng, n).scale(0.3 / n as f64)).map_err(err)?;
        p = p.mul(&Matrix::from_diag(&(0..n).map(|_| rng.gen_range(0.5..2.0)).collect::<Vec<_>>())).map_err(err)?;
        let specs = [
            MeasureSpec::l1(),
            MeasureSpec::linf(),
            MeasureSpec::l2(),
            MeasureSpec::weighted(BaseNorm::L1, p).map_err(err)?,
        ];
        for spec in &specs {
            let mu = |m: &Matrix| spec.mu(m).map_err(err);
            let exact = mu(&a)?;
            let est = mu_limit_estimate(&a, spec, 1e-6).map_err(err)?;
            worst_limit = worst_limit.max((exact - est).abs());
            let sum = mu(&a.add(&b).map_err(err)?)?;
            worst_law = worst_law.max(sum - mu(&a)? - mu(&b)?);
            let c = rng.gen_range(0.0..5.0);
            worst_law = worst_law.max((mu(&a.scale(c))? - c * mu(&a)?).abs());
        }
        ensure((mu_one(&a) - specs[0].mu(&a).map_err(err)?).abs() < 1e-15, || "mu_one disagrees".into())?;
        ensure((mu_inf(&a) - specs[1].mu(&a).map_err(err)?).abs() < 1e-15, || "mu_inf disagrees".into())?;
        ensure((mu_two(&a).map_err(err)? - specs[2].mu(&a).map_err(err)?).abs() < 1e-15, || "mu_two disagrees".into())?;
    }
    ensure(worst_limit < 1e-4, || format!("limit estimate off by {worst_limit:e}"))?;
    ensure(worst_law <= 1e-9, || format!("subadditivity/homogeneity violated by {worst_law:e}"))?;
    Ok(format!("max |μ − estimate| = {worst_limit:.2e}, max law violation = {worst_law:.2e}"))
}

fn closed_forms() -> Outcome {
    let cfg = IntegratorConfig::with_tol(1e-11);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut parts = Vec::new();
    for model in [erf_system(), counterexample_system(), shifted_system()] {
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let t1 = rng.gen_range(0.0..20.0);
            let a = model.domain().sample_initial(&mut rng, 1e-6, t1);
            let stops: Vec<f64> = (0..=40).map(|k| t1 + (20.0 - t1) * k as f64 / 40.0).collect();
            let tr = integrate_with_stops(&model, t1, &a, &stops, &cfg).map_err(err)?;
            for &t in &stops {
                let x = tr.state_at(t).map_err(err)?;
                let exact = model.closed_form(t, t1, &a).expect("closed form");
                worst = worst.max((x[0] - exact[0]).abs());
            }
        }
        ensure(worst < 1e-7, || format!("{}: max error {worst:e}", model.name()))?;
        parts.push(format!("{} {worst:.1e}", model.name()));
    }
    Ok(format!("max errors: {}", parts.join(", ")))
}

fn ell_example1(tau: f64) -> f64 {
    (1.0 - (-tau * tau).exp()) / 2.0
}

fn query(p: Property, norm: MeasureSpec) -> PropertyQuery {
    PropertyQuery::new(p, norm)
}

fn example1() -> Outcome {
    let m = erf_system();
    let mut parts = Vec::new();
    for tau in [0.25, 1.0, 2.0] {
        let ell = ell_example1(tau);
        let v = check_property(&m, &query(Property::St { tau, ell: Some(ell) }, MeasureSpec::l1())).map_err(err)?;
        ensure(v.is_certified(), || format!("ST(τ = {tau}, ℓ = {ell}) falsified: {:?}", v.witness))?;
        let est = check_property(&m, &query(Property::St { tau, ell: None }, MeasureSpec::l1())).map_err(err)?;
        let got = est.rate.unwrap_or(f64::NAN);
        ensure(est.is_certified() && got >= ell, || format!("estimate for τ = {tau}: {got} < {ell}"))?;
        parts.push(format!("τ={tau}: ℓ={ell:.4} ℓ̂={got:.4}"));
    }
    Ok(parts.join(", "))
}

fn example8() -> Outcome {
    let m = counterexample_system();
    let mut parts = Vec::new();
    for ell in [0.01, 0.1, 1.0] {
        let q = query(Property::Sost { tau: 1.0, eps: 1.0, ell: Some(ell) }, MeasureSpec::l1());
        let v = check_property(&m, &q).map_err(err)?;
        let w = v.witness.clone().ok_or_else(|| format!("ℓ = {ell}: not falsified"))?;
        ensure(w.margin > v.slack, || format!("ℓ = {ell}: witness margin {} ≤ slack", w.margin))?;
        let again = reproduce_witness(&m, &q, &w).map_err(err)?;
        ensure((again - w.margin).abs() <= 0.1 * w.margin.abs(), || {
            format!("ℓ = {ell}: re-simulated margin {again} vs {}", w.margin)
        })?;
        parts.push(format!("ℓ={ell}: t₂={:.0}, margin {:.3}", w.t2, w.margin));
    }
    Ok(parts.join(", "))
}

fn example9() -> Outcome {
    let m = shifted_system();
    let mut parts = Vec::new();
    for eps in [0.1, std::f64::consts::E - 1.0, 5.0] {
        let ell = (1.0 + eps).ln().min(1.0);
        let v = check_property(&m, &query(Property::So { eps, ell: Some(ell) }, MeasureSpec::l1())).map_err(err)?;
        ensure(v.is_certified(), || format!("SO(ε = {eps}, ℓ = {ell}) falsified: {:?}", v.witness))?;
        parts.push(format!("SO ε={eps:.3} ℓ={ell:.4}"));
    }
    let plan = SamplePlan { horizon: Some(1.0), ..SamplePlan::default() };
    let wc = check_property(&m, &query(Property::Wc, MeasureSpec::l1()).with_plan(plan)).map_err(err)?;
    let w = wc.witness.clone().ok_or("WC on [0, 1] certified")?;
    ensure(w.margin.abs() <= wc.slack, || format!("WC witness margin {} is not 0", w.margin))?;
    parts.push(format!("WC on [0,1] falsified with margin {:.1e}", w.margin));
    Ok(parts.join(", "))
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bio_contractive() -> Outcome {
    let p = BioParams::new(vec![1.0, 1.0], 2.0).map_err(err)?;
    let m = bio_circuit(p.clone()).map_err(err)?;
    let eps = bio_contraction_eps(&p, 0.0).map_err(err)?;
    let norm = MeasureSpec::weighted(BaseNorm::L1, bio_weight(&p, eps).map_err(err)?).map_err(err)?;
    let omega2 = bio_omega_r(&p, 2.0).map_err(err)?;
    let sup = sup_measure_over_region(&m, &omega2, &norm, &default_region_grid(&m)).map_err(err)?.sup_measure;
    ensure(sup <= -eps / 2.0, || format!("sup μ = {sup} > −ε/2 = {}", -eps / 2.0))?;
    let v = check_property(&m, &query(Property::Contraction { c: Some(eps / 2.0) }, norm)).map_err(err)?;
    ensure(v.is_certified(), || format!("contraction falsified: {:?}", v.witness))?;
    let e = bio_equilibrium(&p).map_err(err)?;
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    ensure(max_dist(&e, &[golden, golden]) <= 1e-10, || format!("equilibrium {e:?}"))?;
    let mut starts = omega2.corners(0.0, 0.0);
    starts.extend(omega2.grid(&[7, 7], 0.0).map_err(err)?);
    let cfg = IntegratorConfig::with_tol(1e-10);
    let mut worst: f64 = 0.0;
    for x in &starts {
        let tr = integrate_with_stops(&m, 0.0, x, &[40.0], &cfg).map_err(err)?;
        worst = worst.max(max_dist(tr.final_state(), &e));
    }
    ensure(worst <= 1e-6, || format!("trajectory ends {worst:e} from the equilibrium"))?;
    Ok(format!("ε = {eps}, sup μ = {sup:.4}, {} starts within {worst:.1e} at t = 40", starts.len()))
}

fn bio_boundary() -> Outcome {
    let p = BioParams::new(vec![0.5, 0.5], 2.0).map_err(err)?;
    let m = bio_circuit(p.clone()).map_err(err)?;
    let limit = MeasureSpec::weighted(BaseNorm::L1, bio_weight(&p, 0.0).map_err(err)?).map_err(err)?;
    for norm in [MeasureSpec::l1(), MeasureSpec::l2(), MeasureSpec::linf(), limit.clone()] {
        let label = norm.label();
        let v = check_property(&m, &query(Property::Contraction { c: None }, norm)).map_err(err)?;
        ensure(!v.is_certified(), || format!("contraction certified under {label}"))?;
    }
    let mut worst_det: f64 = 0.0;
    for k in 0..=100 {
        let x = [k as f64 / 50.0, 0.0];
        worst_det = worst_det.max(m.jacobian(0.0, &x).determinant().abs());
    }
    ensure(worst_det <= 1e-12, || format!("|det J| = {worst_det:e} at x₂ = 0"))?;

    let fam = NormFamily::bio(p.clone());
    let nc = certify_sost_via_nc(&m, &fam, &SamplePlan::default(), &NcConfig::default()).map_err(err)?;
    ensure(nc.nc.is_certified(), || format!("NC falsified: {:?} {:?}", nc.nc.witness, nc.nc.notes))?;
    ensure(nc.sost_certified(), || "SOST not confirmed after NC".into())?;
    let bridge = so_via_swe(&m, 1.0, &limit, &SamplePlan::default(), None).map_err(err)?;
    ensure(bridge.so_certified(), || format!("SO upgrade failed: {:?}", bridge.so.as_ref().map(|v| &v.witness)))?;
    let omega1 = bio_omega_r(&p, 1.0).map_err(err)?;
    let ic = check_ic(&m, Some(&omega1), &fam, &IcConfig::default()).map_err(err)?;
    ensure(ic.is_certified() && ic.details.contains_key("st"), || format!("IC falsified: {:?}", ic.witness))?;
    Ok(format!(
        "contraction falsified in 4 norms, |det J| ≤ {worst_det:.0e}, NC ⇒ SOST, SWE ⇒ SO (ℓ = {:.4}), IC ⇒ ST (ℓ = {:.4})",
        bridge.so.as_ref().and_then(|v| v.rate).unwrap_or(f64::NAN),
        ic.rate.unwrap_or(f64::NAN)
    ))
}

fn boundary_repelling() -> Outcome {
    let big_delta = 0.05;
    let mut parts = Vec::new();
    for alphas in [vec![1.0, 1.0], vec![0.5, 0.5]] {
        let p = BioParams::new(alphas.clone(), 2.0).map_err(err)?;
        let m = bio_circuit(p.clone()).map_err(err)?;
        let v = check_br(&m, 0.5, big_delta, None, &[]).map_err(err)?;
        let bound = 1.0 / p.k - alphas[0] * big_delta - 1e-9;
        let k_hat = v.rate.unwrap_or(f64::NAN);
        ensure(v.is_certified() && k_hat >= bound, || format!("α = {alphas:?}: K̂ = {k_hat} < {bound}"))?;
        parts.push(format!("α={alphas:?}: K̂={k_hat:.4}"));
    }
    let decay: SystemModel = linear_decay_system();
    let v = check_br(&decay, 0.5, big_delta, None, &[]).map_err(err)?;
    ensure(v.status == Status::Falsified, || "ẋ = −x certified as BR".into())?;
    parts.push("ẋ=−x falsified".into());
    Ok(parts.join(", "))
}

fn entrainment() -> Outcome {
    let f = SineForcing { offset: 0.0, amplitude: 1.0, omega: 1.0 };
    let m = forced_linear_system(f).map_err(err)?;
    let v = check_entrainment(&m, &MeasureSpec::l1(), &EntrainPlan::default()).map_err(err)?;
    ensure(v.is_certified() && v.samples == 5, || format!("forced linear: {:?}", v.notes))?;
    let periods = v.details["periods"].as_u64().unwrap_or(u64::MAX);
    ensure(periods <= 15, || format!("needed {periods} periods"))?;
    let t0 = v.details["orbit_start"].as_f64().unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for s in v.details["orbit"].as_array().into_iter().flatten() {
        let t = s[0].as_f64().unwrap_or(f64::NAN) + t0;
        worst = worst.max((s[1][0].as_f64().unwrap_or(f64::NAN) - (t.sin() - t.cos()) / 2.0).abs());
    }
    // Direct check: five starts, fifteen periods.
    let end = 15.0 * f.period();
    let cfg = IntegratorConfig::with_tol(1e-10);
    for x0 in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let tr = integrate_with_stops(&m, 0.0, &[x0], &[end], &cfg).map_err(err)?;
        worst = worst.max((tr.final_state()[0] - f.periodic_orbit(end)).abs());
    }
    ensure(worst < 1e-6, || format!("distance to (sin t − cos t)/2 is {worst:e}"))?;

    let p = BioParams::new(vec![1.0, 1.0], 2.0).map_err(err)?;
    let bio = periodic_bio_circuit(p, PeriodicForcing { amplitude: 0.5, period: 1.0 }).map_err(err)?;
    let vb = check_entrainment(&bio, &MeasureSpec::l1(), &EntrainPlan::default()).map_err(err)?;
    let residual = vb.details.get("residual").and_then(|r| r.as_f64()).unwrap_or(f64::NAN);
    ensure(vb.is_certified() && residual < 1e-6, || format!("periodic bio: residual {residual:e}"))?;
    Ok(format!("linear: {periods} periods, error {worst:.1e}; bio: residual {residual:.1e}"))
}

fn audit() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("bundle.json");
    let (_, _, code) = contrakit_cli::cmd_reproduce("all", Some(&path)).map_err(err)?;
    let bundle: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).map_err(err)?).map_err(err)?;
    let n = bundle["audit"]["inconsistencies"].as_array().map_or(usize::MAX, Vec::len);
    ensure(n == 0, || format!("{n} inconsistencies: {}", bundle["audit"]["inconsistencies"]))?;
    ensure(code == 0, || "scenario expectations not met".into())?;
    let shifted = bundle["scenarios"]
        .as_array()
        .into_iter()
        .flatten()
        .find(|s| s["name"] == "example9")
        .ok_or("example9 missing from bundle")?;
    let verdicts: Vec<&serde_json::Value> =
        shifted["checks"].as_array().into_iter().flatten().flat_map(|c| c["verdicts"].as_array().into_iter().flatten()).collect();
    let has = |prop: &str, status: &str| verdicts.iter().any(|v| v["property"] == prop && v["status"] == status);
    ensure(has("so", "CERTIFIED") && has("wc", "FALSIFIED"), || "shifted: SO certified with WC falsified not both present".into())?;
    Ok(format!("{} verdicts, 0 inconsistencies; shifted: SO certified and WC falsified", bundle["audit"]["verdicts"]))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("measure correctness", measures),
        ("closed-form agreement", closed_forms),
        ("example 1 (erf, ST)", example1),
        ("example 8 (not SOST)", example8),
        ("example 9 (SO, not WC)", example9),
        ("bio circuit, contractive side", bio_contractive),
        ("bio circuit, boundary side", bio_boundary),
        ("boundary repelling", boundary_repelling),
        ("entrainment", entrainment),
        ("implication audit", audit),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS {:>2} {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
