//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Thresholds are fixed; nothing here adapts to results.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use qds_cli::schema::{read_form, read_matrix, write_json, MatrixJson, StandardFormJson};
use qds_core::decompose::{
    decompose_detailed, expander, graph_norm_check, kraus_decomposition, schwarz_bound_check,
    spectral_kraus_oracle, trace_domination_check,
};
use qds_core::evolve::{finite_difference_generator, halving_ratios, semigroup_property_check, trajectory, trajectory_with};
use qds_core::linalg::{eig_hermitian, relative_distance, CMatrix, Tolerances, C64, ZERO};
use qds_core::models::{
    dropout_parts, dropout_refinement, dropout_sink_oracle, evolve_packet, sticking_parts,
    sticking_refinement, DropoutModel, DropoutVariant, Packet, StickingModel,
};
use qds_core::random::{random_density_matrix, random_gksl, random_kraus, random_matrix, random_unit_vector, seeded, QdsRng};
use qds_core::stdform::StandardForm;
use qds_core::superop::{check_pointwise_positivity_with, is_conditionally_cp, to_choi, MatrixUnit, SuperOperator};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn list(xs: &[f64], prec: usize) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.prec$e}")).collect();
    format!("[{}]", items.join(", "))
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// The shared sample: 200 random generators, seed 0.
struct Sample {
    generators: Vec<SuperOperator>,
    dims: Vec<usize>,
}

fn sample() -> Sample {
    let mut rng = seeded(0);
    let mut generators = Vec::with_capacity(200);
    let mut dims = Vec::with_capacity(200);
    for _ in 0..200 {
        let d = [2, 3, 4, 6][rng.random_range(0..4)];
        let jumps = rng.random_range(0..d * d);
        let gen = random_gksl(d, jumps, &mut rng)
            .build_generator(&tol())
            .expect("random GKSL data satisfies form equality");
        generators.push(gen);
        dims.push(d);
    }
    Sample { generators, dims }
}

fn e0(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[0] = C64::new(1.0, 0.0);
    v
}

fn form_checks(sf: &StandardForm) -> (bool, f64, f64) {
    let residual = sf.verify_form_equality();
    let bound = 1e-10 * sf.dissipative_part().frobenius_norm().max(1.0);
    let accretive = eig_hermitian(&sf.dissipative_part()).expect("Hermitian").min_value();
    (residual <= bound && accretive >= -1e-10, residual / bound, accretive)
}

fn round_trip(s: &Sample, forms: &mut Vec<StandardForm>) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for (k, gen) in s.generators.iter().enumerate() {
        match decompose_detailed(gen, &e0(gen.dim()), &tol()) {
            Ok(dec) => {
                let rebuilt = dec.form.generator_unchecked();
                worst = worst.max(relative_distance(rebuilt.matrix(), gen.matrix()));
                forms.push(dec.form);
            }
            Err(e) => errors.push(format!("#{k} (d={}): {e}", s.dims[k])),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        errors.is_empty() && worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!(
            "{} generators, max relative residual {worst:.2e} (limit 1e-9), {} errors, {:.1} s (limit 60 s){}",
            s.generators.len(),
            errors.len(),
            elapsed.as_secs_f64(),
            errors.first().map(|e| format!("; first: {e}")).unwrap_or_default()
        ),
    )
}

fn chi_invariance(s: &Sample, forms: &mut Vec<StandardForm>) -> Outcome {
    let mut rng = seeded(2);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for gen in s.generators.iter().take(50) {
        let mut rebuilt = Vec::new();
        for _ in 0..3 {
            let chi = random_unit_vector(gen.dim(), &mut rng);
            match decompose_detailed(gen, &chi, &tol()) {
                Ok(dec) => {
                    rebuilt.push(dec.form.generator_unchecked());
                    forms.push(dec.form);
                }
                Err(_) => errors += 1,
            }
        }
        for a in 0..rebuilt.len() {
            for b in a + 1..rebuilt.len() {
                worst = worst.max(relative_distance(rebuilt[a].matrix(), rebuilt[b].matrix()));
            }
        }
    }
    outcome(
        errors == 0 && worst <= 1e-9,
        format!("50 generators x 3 random reference vectors, max pairwise distance {worst:.2e} (limit 1e-9), {errors} errors"),
    )
}

fn kraus_equivalence() -> Outcome {
    let mut rng = seeded(3);
    let mut worst = 0.0f64;
    let mut count_mismatches = 0;
    let mut errors = 0;
    for k in 0..100 {
        let d = [2, 3, 4][k % 3];
        let r = [1, 2, d * d][(k / 3) % 3];
        let q = SuperOperator::from_kraus(d, &random_kraus(d, r, &mut rng)).expect("square Kraus operators");
        let (chol, spectral) = match (
            kraus_decomposition(&q, &tol()),
            spectral_kraus_oracle(&to_choi(&q), &tol()),
        ) {
            (Ok((_, c)), Ok(s)) => (c, s),
            _ => {
                errors += 1;
                continue;
            }
        };
        if chol.len() != r || spectral.len() != r {
            count_mismatches += 1;
        }
        for unit in MatrixUnit::all(d) {
            let e = unit.to_matrix();
            let a = chol.apply(&e);
            let b = spectral.apply(&e);
            worst = worst.max((&a - &b).frobenius_norm() / q.apply_unit(unit).frobenius_norm().max(1.0));
        }
    }
    outcome(
        errors == 0 && count_mismatches == 0 && worst <= 1e-10,
        format!("100 CP maps, max action difference {worst:.2e} (limit 1e-10), {count_mismatches} rank mismatches, {errors} errors"),
    )
}

fn form_equality(forms: &[StandardForm]) -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_accretive = f64::INFINITY;
    let mut failures = 0;
    for sf in forms {
        let (ok, ratio, accretive) = form_checks(sf);
        worst_ratio = worst_ratio.max(ratio);
        worst_accretive = worst_accretive.min(accretive);
        if !ok {
            failures += 1;
        }
    }
    outcome(
        failures == 0 && !forms.is_empty(),
        format!(
            "{} decompositions, max residual/bound {worst_ratio:.2e}, min eigenvalue of M+M^dagger {worst_accretive:.2e} (limit -1e-10), {failures} failures",
            forms.len()
        ),
    )
}

fn pointwise_positivity(s: &Sample) -> Outcome {
    let mut rng = seeded(5);
    let mut pointwise_failures = 0;
    let mut ccp_failures = 0;
    let mut diag_max = f64::NEG_INFINITY;
    let mut off_min = f64::INFINITY;
    let mut ccp_min = f64::INFINITY;
    for gen in &s.generators {
        let r = check_pointwise_positivity_with(gen, 1000, &mut rng, &tol());
        diag_max = diag_max.max(r.diagonal_max);
        off_min = off_min.min(r.off_diagonal_min);
        if !r.passes() {
            pointwise_failures += 1;
        }
        let c = is_conditionally_cp(gen, &tol());
        ccp_min = ccp_min.min(c.min_eigenvalue);
        if !c.passes {
            ccp_failures += 1;
        }
    }
    outcome(
        pointwise_failures == 0 && ccp_failures == 0,
        format!(
            "200 generators x 1000 samples: max diagonal {diag_max:.2e}, min off-diagonal {off_min:.2e}, min compressed Choi eigenvalue {ccp_min:.2e}; {pointwise_failures}+{ccp_failures} failures"
        ),
    )
}

fn expander_bounds(s: &Sample, forms: &[StandardForm]) -> Outcome {
    let mut rng = seeded(6);
    let mut worst = f64::NEG_INFINITY;
    let mut families = 0;
    // one generator per dimension plus the damping and commutator families
    let mut picked: Vec<(SuperOperator, StandardForm)> = Vec::new();
    for d in [2, 3, 4, 6] {
        if let Some(k) = s.dims.iter().position(|&x| x == d) {
            picked.push((s.generators[k].clone(), forms[k].clone()));
        }
    }
    let damping = StandardForm::from_hamiltonian_jumps(&CMatrix::zeros(2, 2), vec![CMatrix::unit(2, 0, 1)], &tol())
        .expect("valid damping data");
    let h = CMatrix::from_diag(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
    let commutator = StandardForm::from_hamiltonian_jumps(&h, vec![], &tol()).expect("valid Hamiltonian");
    for sf in [damping, commutator] {
        picked.push((sf.build_generator(&tol()).expect("form equality holds"), sf));
    }
    for (gen, sf) in &picked {
        let plus = expander(gen, sf.m()).expect("matching dimensions");
        let schwarz = schwarz_bound_check(&plus, 1000, &mut rng).expect("valid dimensions");
        let graph = graph_norm_check(sf.m(), &plus, 1000, &mut rng).expect("valid dimensions");
        let dom = trace_domination_check(sf.m(), &plus, 1000, &mut rng).expect("valid dimensions");
        worst = worst
            .max(schwarz.max_excess)
            .max(graph.contraction_part.max_excess)
            .max(graph.expander_part.max_excess)
            .max(dom.max_excess);
        families += 1;
    }
    outcome(
        worst <= 1e-9,
        format!("{families} generator families x 1000 samples per bound, max excess over right-hand side {worst:.2e} (limit 1e-9)"),
    )
}

fn semigroup_conservation(s: &Sample) -> Outcome {
    let mut rng = seeded(7);
    let times: Vec<f64> = (0..50).map(|k| 5.0 * k as f64 / 49.0).collect();
    let mut worst_semigroup = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut errors = 0;
    for gen in &s.generators {
        let d = gen.dim();
        let rho0 = random_density_matrix(d, rng.random_range(1..=d), &mut rng);
        match (
            semigroup_property_check(gen, &rho0, 0.7, 0.7),
            trajectory(gen, &rho0, &times),
        ) {
            (Ok(r), Ok(traj)) => {
                worst_semigroup = worst_semigroup.max(r);
                worst_drift = worst_drift.max(traj.max_trace_drift());
                min_eig = min_eig.min(traj.min_eigenvalue());
            }
            _ => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst_semigroup <= 1e-9 && worst_drift <= 1e-9 && min_eig >= -1e-8,
        format!(
            "semigroup residual {worst_semigroup:.2e} (limit 1e-9), trace drift {worst_drift:.2e} (limit 1e-9), min eigenvalue {min_eig:.2e} (limit -1e-8)"
        ),
    )
}

fn finite_differences(s: &Sample) -> Outcome {
    let mut rng = seeded(8);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for gen in s.generators.iter().take(20) {
        let d = gen.dim();
        let rho = random_density_matrix(d, d, &mut rng);
        let residuals = finite_difference_generator(gen, &rho, &[1e-2, 5e-3, 2.5e-3]).expect("valid deltas");
        for r in halving_ratios(&residuals) {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    outcome(
        lo >= 0.35 && hi <= 0.65,
        format!("20 generators, halving ratios in [{lo:.4}, {hi:.4}] (required within [0.35, 0.65])"),
    )
}

fn dropout_anchor() -> Outcome {
    let start = Instant::now();
    let (sites, h, t) = (1000, 0.02, 3.0);
    let packet = Packet { x0: 5.0, sigma: 1.0, k0: 0.0 };
    let parts = dropout_parts(&DropoutModel {
        sites,
        h,
        variant: DropoutVariant::Hopping,
    })
    .expect("valid model");
    let (sink, deficit) = evolve_packet(&parts, &packet, h, t).expect("evolution succeeds");
    let oracle = dropout_sink_oracle(&packet.samples(sites, h), h, t).expect("valid oracle input");
    let rel = (sink - oracle).abs() / oracle;
    let elapsed = start.elapsed();
    outcome(
        rel <= 0.02 && elapsed < Duration::from_secs(300),
        format!(
            "sink population {sink:.6} vs quadrature {oracle:.6}: relative difference {rel:.4} (limit 0.02), trace deficit {deficit:.1e}, {:.1} s (limit 300 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn upwind_consistency() -> Outcome {
    let base = DropoutModel {
        sites: 150,
        h: 0.08,
        variant: DropoutVariant::Upwind,
    };
    let packet = Packet { x0: 5.0, sigma: 1.0, k0: 0.0 };
    let table = dropout_refinement(&base, &packet, 3.0, 2).expect("valid models");
    let deficits: Vec<f64> = table.iter().map(|l| l.trace_deficit).collect();
    let ratios: Vec<f64> = deficits.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        ratios.iter().all(|r| (1.5..=2.5).contains(r)),
        format!(
            "trace deficits {} at h = 0.08, 0.04, 0.02; ratios {} (required within [1.5, 2.5])",
            list(&deficits, 4),
            list(&ratios, 4)
        ),
    )
}

fn sticking() -> Outcome {
    let packet = Packet { x0: 5.0, sigma: 1.0, k0: -1.0 };
    let times: Vec<f64> = (0..31).map(|k| 0.1 * k as f64).collect();
    let model = StickingModel {
        sites: 200,
        h: 0.1,
        w: C64::new(0.0, 1.0),
    };
    let rho0 = packet.density(model.sites, model.h);
    let mut prop = sticking_parts(&model).and_then(|p| p.propagator()).expect("valid model");
    let traj = trajectory_with(&mut prop, &rho0, &times, &tol()).expect("evolution succeeds");
    let drift = traj.max_trace_drift();
    let sink = traj.population(model.sink());
    let monotone = sink.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let bounded = sink.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p));

    let real_w = StickingModel { w: C64::new(0.5, 0.0), ..model };
    let mut prop = sticking_parts(&real_w).and_then(|p| p.propagator()).expect("valid model");
    let traj = trajectory_with(&mut prop, &rho0, &times, &tol()).expect("evolution succeeds");
    let leaked = traj.population(real_w.sink()).into_iter().fold(0.0f64, |a, p| a.max(p.abs()));

    let base = StickingModel {
        sites: 60,
        h: 0.2,
        w: C64::new(0.0, 1.0),
    };
    let table = sticking_refinement(&base, &packet, 3.0, 2).expect("valid models");
    let values: Vec<f64> = table.iter().map(|l| l.sink_population).collect();
    let changes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let cauchy = changes.windows(2).all(|c| c[1] < c[0]);

    outcome(
        drift <= 1e-9 && monotone && bounded && leaked <= 1e-10 && cauchy,
        format!(
            "trace drift {drift:.1e}, sink nondecreasing {monotone}, in [0,1] {bounded}, final sink {:.4}; Im(w)=0 max sink {leaked:.1e}; refinement values {}, changes {}",
            sink.last().copied().unwrap_or(0.0),
            list(&values, 6),
            list(&changes, 2)
        ),
    )
}

fn cli_contract() -> Outcome {
    let dir = tempfile::TempDir::new().expect("temporary directory");
    let path = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_qds"))
            .args(args)
            .output()
            .expect("binary runs")
    };
    let mut problems = Vec::new();

    let mut rng: QdsRng = seeded(12);
    let m = random_matrix(6, &mut rng);
    write_json(&path("m.json"), &MatrixJson::from_matrix(&m)).expect("writable");
    let back = read_matrix(&path("m.json")).and_then(|j| j.to_matrix()).expect("readable");
    let exact = m
        .as_slice()
        .iter()
        .zip(back.as_slice())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    if !exact {
        problems.push("matrix round trip not bit-exact".to_string());
    }
    let sf = random_gksl(3, 2, &mut rng);
    let json = StandardFormJson::from_form(&sf, Some(tol()));
    write_json(&path("f.json"), &json).expect("writable");
    if read_form(&path("f.json")).ok().as_ref() != Some(&json) {
        problems.push("standard form round trip not bit-exact".to_string());
    }

    let bad = StandardForm::new(CMatrix::zeros(2, 2), vec![CMatrix::unit(2, 0, 1)]).expect("shapes agree");
    write_json(&path("bad.json"), &StandardFormJson::from_form(&bad, None)).expect("writable");
    let out = run(&["build", path("bad.json").to_str().unwrap(), path("g.json").to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    if out.status.code() != Some(2) || !stderr.contains("residual") {
        problems.push(format!("form-equality rejection gave {:?}", out.status.code()));
    }

    write_json(&path("t.json"), &MatrixJson::from_matrix(SuperOperator::transpose_map(2).matrix())).expect("writable");
    let out = run(&["decompose", path("t.json").to_str().unwrap(), path("o.json").to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    if out.status.code() != Some(2) || !stderr.contains("witness") {
        problems.push(format!("CCP rejection gave {:?}", out.status.code()));
    }

    let gen = sf.build_generator(&tol()).expect("valid form");
    write_json(&path("gen.json"), &MatrixJson::from_matrix(gen.matrix())).expect("writable");
    write_json(&path("rho.json"), &MatrixJson::from_matrix(&CMatrix::unit(3, 0, 0))).expect("writable");
    let out = run(&[
        "evolve",
        path("gen.json").to_str().unwrap(),
        "--rho0",
        path("rho.json").to_str().unwrap(),
        "--times",
        "-1:2:5",
        path("o.csv").to_str().unwrap(),
    ]);
    if out.status.code() != Some(2) {
        problems.push(format!("negative-time rejection gave {:?}", out.status.code()));
    }
    let out = run(&["verify", path("missing.json").to_str().unwrap()]);
    if out.status.code() != Some(1) {
        problems.push(format!("missing file gave {:?}", out.status.code()));
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "bit-exact JSON round trips; exits 2/2/2 for form-equality, CCP and negative-time rejections, 1 for I/O".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let sample = sample();
    let mut forms = Vec::new();
    let mut chi_forms = Vec::new();
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        println!(
            "criterion {n:>2} {:<4} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        results.push((n, name, o, elapsed));
    };
    record(1, "round-trip decomposition", &mut || round_trip(&sample, &mut forms));
    record(2, "reference-vector invariance", &mut || chi_invariance(&sample, &mut chi_forms));
    record(3, "Kraus oracle equivalence", &mut kraus_equivalence);
    let all_forms: Vec<StandardForm> = forms.iter().chain(&chi_forms).cloned().collect();
    record(4, "form equality and accretivity", &mut || form_equality(&all_forms));
    record(5, "pointwise and conditional positivity", &mut || pointwise_positivity(&sample));
    record(6, "Schwarz and graph-norm bounds", &mut || expander_bounds(&sample, &forms));
    record(7, "semigroup and conservation", &mut || semigroup_conservation(&sample));
    record(8, "finite-difference generator recovery", &mut || finite_differences(&sample));
    record(9, "dropout sink population vs continuum", &mut dropout_anchor);
    record(10, "upwind first-order trace deficit", &mut upwind_consistency);
    record(11, "sticking model", &mut sticking);
    record(12, "CLI contract", &mut cli_contract);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
