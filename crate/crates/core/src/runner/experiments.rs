use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::Stages;
use crate::classical::{sample_couplings_stream, ClassicalHamiltonian};
use crate::dynamics::{
    false_vacuum_lifetime, lifetimes_monotone, linear_grid, local_simulatability_error, observable_drift, restricted_vs_full, EvolutionJob,
    Observable, FALSE_VACUUM_WELL,
};
use crate::error::{Error, Result};
use crate::gibbs::{almost_steady_norm, bottleneck_mass, exact_gibbs, mc_escape_time, EscapeOptions, MarkovKernel};
use crate::lattice::{build_torus, TorusLattice};
use crate::linalg::LanczosOptions;
use crate::peierls::{
    barrier_from_couplings, build_bottleneck_structure_with, certificates_jsonl, chernoff_parameters, realization_violates,
    verify_barrier_with, wilson_interval, BottleneckStructure, Overrides, StructureOptions,
};
use crate::quantum::{
    apply_mask, build_quantum_hamiltonian, eb_decomposition, eps_window, lowest_eigenpairs, qpc_check, restricted_ground, sector_mask,
    ssb_report, tilted_ground_overlap, QuantumModel, Sector,
};

/// Files beyond `results.csv` and `report.json`, keyed by name.
pub struct Output {
    pub csv: String,
    pub report: Value,
    pub extras: Vec<(String, String)>,
    pub pass: Option<bool>,
}

pub fn dispatch(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    match cfg.experiment.as_str() {
        "pc-certify" => pc_certify(cfg, st),
        "gibbs-bottleneck" => gibbs_bottleneck(cfg, st),
        "markov-steady" => markov_steady(cfg, st),
        "ed-ssb" => ed_ssb(cfg, st),
        "an-decay" => an_decay(cfg, st),
        "disorder-sweep" => disorder_sweep(cfg, st),
        "tilt-select" => tilt_select(cfg, st),
        "false-vacuum" => false_vacuum(cfg, st),
        "lr-sim" => lr_sim(cfg, st),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

fn lattice(cfg: &ExperimentConfig) -> Result<TorusLattice> {
    match cfg.ly {
        Some(ly) => TorusLattice::rect(cfg.l0, ly),
        None => build_torus(cfg.l0),
    }
}

fn structure_options(cfg: &ExperimentConfig) -> StructureOptions {
    StructureOptions { budget: cfg.loop_budget, n_samples: cfg.n_samples, sample_seed: cfg.seed, delta: delta_classical(cfg) }
}

fn overrides(cfg: &ExperimentConfig) -> Option<Overrides> {
    cfg.l.zip(cfg.cap).map(|(l, cap)| Overrides { l, cap })
}

fn structure(cfg: &ExperimentConfig, lat: &TorusLattice) -> Result<BottleneckStructure> {
    build_bottleneck_structure_with(lat, cfg.r, overrides(cfg), &structure_options(cfg))
}

/// `H₀` for realization `r`; uniform couplings ignore `r`.
fn classical(cfg: &ExperimentConfig, lat: &TorusLattice, r: u64) -> Result<ClassicalHamiltonian> {
    let h = if cfg.is_disordered() {
        ClassicalHamiltonian::on_torus(lat, sample_couplings_stream(&cfg.distribution(), lat.n_edges(), r)?)
    } else {
        ClassicalHamiltonian::uniform(lat, cfg.j)
    };
    Ok(h.with_fields(-cfg.h, cfg.h_stag))
}

fn delta_classical(cfg: &ExperimentConfig) -> f64 {
    cfg.delta_classical.unwrap_or(cfg.j)
}

fn delta_qpc(cfg: &ExperimentConfig) -> f64 {
    cfg.delta.unwrap_or(0.6 * cfg.j)
}

fn lanczos(cfg: &ExperimentConfig) -> LanczosOptions {
    LanczosOptions { tol: cfg.lanczos_tol, seed: cfg.seed, ..LanczosOptions::default() }
}

fn betas(cfg: &ExperimentConfig, bs: &BottleneckStructure) -> Vec<f64> {
    if cfg.betas.is_empty() {
        let beta_c = bs.theta / bs.delta;
        [1.05, 1.25, 1.5, 2.0, 3.0, 5.0].iter().map(|f| f * beta_c).collect()
    } else {
        cfg.betas.clone()
    }
}

fn pc_certify(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let mut fallback = false;
    let bs = st.time("structure", || match structure(cfg, &lat) {
        Err(Error::ScaleTooSmall { .. }) if cfg.l.is_none() => {
            fallback = true;
            let o = Overrides { l: 4, cap: 16 * cfg.r };
            build_bottleneck_structure_with(&lat, cfg.r, Some(o), &structure_options(cfg))
        }
        other => other,
    })?;
    let h = classical(cfg, &lat, 0)?;
    let levels = [(1.0, delta_classical(cfg)), (0.8, delta_qpc(cfg))];
    let certs: Vec<_> = st.time("certify", || {
        levels
            .iter()
            .flat_map(|&(occ, d)| bs.indicators.iter().enumerate().map(move |(i, b)| (occ, d, i, b)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(occ, d, i, b)| verify_barrier_with(&h, b, i, occ, d))
            .collect()
    });
    let mut csv = String::from("indicator,length,occupancy,barrier,threshold,pass\n");
    for c in &certs {
        csv.push_str(&format!("{},{},{},{},{},{}\n", c.indicator, c.length, c.occupancy, c.barrier_value, c.threshold, c.pass));
    }
    let pass_at = |occ: f64| certs.iter().filter(|c| c.occupancy == occ).all(|c| c.pass);
    let failures = certs.iter().filter(|c| !c.pass).count();
    let all_pass = failures == 0;
    let report = json!({
        "lattice": [lat.lx(), lat.ly()],
        "L": bs.l,
        "cap": bs.cap,
        "desk_scale": bs.desk_scale,
        "desk_scale_fallback": fallback,
        "sampled": bs.sampled,
        "audit": bs.audit(),
        "theta": bs.theta,
        "n_indicators": bs.indicators.len(),
        "delta_occupancy_1": levels[0].1,
        "delta_occupancy_4_5": levels[1].1,
        "pass_occupancy_1": pass_at(1.0),
        "pass_occupancy_4_5": pass_at(0.8),
        "failures": failures,
    });
    Ok(Output { csv, report, extras: vec![("certificates.jsonl".into(), certificates_jsonl(&certs))], pass: Some(all_pass) })
}

fn gibbs_bottleneck(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let h = classical(cfg, &lat, 0)?;
    let mut csv = String::from("beta,k,p_phi,p_w,exponent,bound,holds\n");
    let mut rows = Vec::new();
    st.time("gibbs", || -> Result<()> {
        for beta in betas(cfg, &bs) {
            let table = exact_gibbs(&h, beta)?;
            for k in [1, 2] {
                let m = bottleneck_mass(&table, &bs, k)?;
                csv.push_str(&format!("{},{},{},{},{},{},{}\n", beta, k, m.p_phi, m.p_w, m.exponent, opt(m.bound), m.holds));
                rows.push(json!({"beta": beta, "mass": m}));
            }
        }
        Ok(())
    })?;
    let all = rows.iter().all(|r| r["mass"]["holds"] == json!(true));
    let report = json!({
        "L": bs.l, "cap": bs.cap, "delta": bs.delta, "theta": bs.theta, "audit": bs.audit(),
        "beta_threshold": bs.theta / bs.delta,
        "closure_defects": [bs.closure_defects(1)?, bs.closure_defects(2)?],
        "rows": rows,
    });
    Ok(Output { csv, report, extras: vec![], pass: Some(all) })
}

fn markov_steady(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let h = classical(cfg, &lat, 0)?;
    let mut csv = String::from("beta,k,norm,flow_to_bottleneck,flow_elsewhere,bound,holds\n");
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    let mut pass = true;
    for (i, beta) in betas(cfg, &bs).into_iter().enumerate() {
        let kernel = MarkovKernel::metropolis(&h, beta);
        let table = st.time("gibbs", || exact_gibbs(&h, beta))?;
        for k in [1, 2] {
            let r = st.time("steady", || almost_steady_norm(&kernel, &table, &bs, k))?;
            pass &= r.holds;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                beta,
                k,
                r.norm,
                r.flow_to_bottleneck,
                r.flow_elsewhere,
                opt(r.bound),
                r.holds
            ));
            rows.push(json!({"beta": beta, "steady": r}));
        }
        if cfg.n_chains > 0 {
            let opts = EscapeOptions { n_chains: cfg.n_chains, t_max: cfg.sweeps, seed: cfg.seed.wrapping_add(i as u64), burn_in: 100 };
            let hist = st.time("escape", || mc_escape_time(&kernel, &bs, 1, &opts))?;
            rows.push(json!({"beta": beta, "escape_median": hist.median, "censored": hist.censored, "chains": hist.times.len()}));
            extras.push((format!("escape_{i}.csv"), hist.to_csv()));
        }
    }
    let report = json!({"L": bs.l, "cap": bs.cap, "delta": bs.delta, "theta": bs.theta, "rows": rows});
    Ok(Output { csv, report, extras, pass: Some(pass) })
}

fn ed_ssb(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let opts = lanczos(cfg);
    let mut csv = String::from("realization,e0,e1,delta_e0,out_weight,m1,m2,lro,c,verdict\n");
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    let mut pass = true;
    for r in 0..cfg.n_realizations as u64 {
        let model = QuantumModel::tfim(classical(cfg, &lat, r)?, cfg.eps);
        let h = build_quantum_hamiltonian(&model)?;
        let eig = st.time("diagonalize", || lowest_eigenpairs(&h, 2, Sector::Global, &opts))?;
        let idx = eig.parities.iter().position(|p| *p == Some(1)).unwrap_or(0);
        let psi = &eig.vectors[idx];
        let rep = ssb_report(psi, &bs, &h, cfg.out_threshold)?;
        pass &= rep.verdict;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r,
            eig.values[0],
            eig.values[1],
            opt(eig.delta_e0),
            rep.out_weight,
            rep.sector_magnetization[0],
            rep.sector_magnetization[1],
            rep.lro,
            rep.c,
            rep.verdict
        ));
        let mut row = json!({"realization": r, "energies": eig.values, "parities": eig.parities, "delta_e0": eig.delta_e0, "ssb": rep});
        if r == 0 && cfg.drift_t_max > 0.0 {
            let mut proj = psi.clone();
            apply_mask(&mut proj, &sector_mask(&bs, 1)?);
            let curve =
                st.time("drift", || observable_drift(&proj, &h, &Observable::Site { site: 0 }, &linear_grid(cfg.drift_t_max, 99)))?;
            pass &= curve.holds_strict;
            row["drift"] = json!({
                "delta": curve.delta, "holds": curve.holds_strict, "holds_with_integrator_error": curve.holds,
                "max_drift": curve.points.iter().map(|p| p.drift).fold(0.0, f64::max),
                "max_norm_error": curve.max_norm_error, "max_energy_error": curve.max_energy_error,
            });
            extras.push(("drift.csv".into(), curve.to_csv()));
        }
        rows.push(row);
    }
    let report = json!({"eps": cfg.eps, "disordered": cfg.is_disordered(), "rows": rows});
    Ok(Output { csv, report, extras, pass: Some(pass) })
}

/// Smallest certified barrier density `min_B barrier(B)/L_B` over the family.
fn certified_density(h: &ClassicalHamiltonian, bs: &BottleneckStructure, occupancy: f64) -> f64 {
    bs.indicators
        .iter()
        .map(|b| {
            let js: Vec<f64> = b.links().iter().map(|&e| h.couplings.j[e]).collect();
            barrier_from_couplings(&js, 0, occupancy, 0.0).barrier_value / b.len() as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn an_decay(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let hc = classical(cfg, &lat, 0)?;
    let delta = cfg.delta.unwrap_or_else(|| certified_density(&hc, &bs, 0.8));
    let (bi, b) = bs
        .indicators
        .iter()
        .enumerate()
        .find(|(_, b)| b.len() == cfg.indicator_len)
        .ok_or_else(|| Error::Config(format!("indicator_len: no audited loop of length {}", cfg.indicator_len)))?;
    let opts = lanczos(cfg);
    let eps_list = if cfg.eps_list.is_empty() { vec![cfg.eps] } else { cfg.eps_list.clone() };
    let mut csv = String::from("eps,n,eb_lo,eb_hi,amplitude\n");
    let mut rows = Vec::new();
    let mut pass = true;
    for eps in eps_list {
        let model = QuantumModel::tfim(hc.clone(), eps);
        let h = build_quantum_hamiltonian(&model)?;
        let g = st.time("restricted-ground", || restricted_ground(&h, &sector_mask(&bs, 1)?, &opts))?;
        let d = eb_decomposition(&g.vector, b, &lat, &model, Some(bs.l))?;
        let win = eps_window(&model, delta, bs.theta);
        let qpc = st.time("qpc", || qpc_check(&h, &bs, 1, b, delta, &opts))?;
        for (n, (a, w)) in d.amplitudes.iter().zip(&d.windows).enumerate() {
            csv.push_str(&format!("{},{},{},{},{}\n", eps, n + 1, w.0, w.1, a));
        }
        let step = d.step_decay_holds(delta);
        let head = d.head_bound_holds(delta);
        pass &= step && head;
        rows.push(json!({
            "eps": eps, "indicator": bi, "ceiling": d.ceiling(delta), "step_decay_holds": step, "head_bound_holds": head,
            "decomposition": d, "eps_window": win, "qpc": qpc, "restricted_energy": g.energy, "restricted_residual": g.residual,
        }));
    }
    let report = json!({"delta": delta, "theta": bs.theta, "L": bs.l, "cap": bs.cap, "rows": rows});
    Ok(Output { csv, report, extras: vec![], pass: Some(pass) })
}

fn disorder_sweep(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    let delta = delta_qpc(cfg);
    let spec = cfg.distribution().with_threshold(cfg.delta_prime);
    let p = spec.prob_at_most(cfg.delta_prime);
    let chernoff = chernoff_parameters(p, delta, cfg.delta_prime, spec.j1, spec.j2, bs.theta, bs.l)?;
    let flags: Vec<bool> = st.time("realizations", || {
        (0..cfg.n_realizations as u64).into_par_iter().map(|r| realization_violates(&spec, &bs, delta, r)).collect::<Result<_>>()
    })?;
    let violations = flags.iter().filter(|&&f| f).count();
    let rate = violations as f64 / flags.len() as f64;
    let mut csv = String::from("realization,violates\n");
    for (r, f) in flags.iter().enumerate() {
        csv.push_str(&format!("{r},{f}\n"));
    }
    let holds = rate <= chernoff.bound;
    let report = json!({
        "lattice": [lat.lx(), lat.ly()], "L": bs.l, "cap": bs.cap, "audit": bs.audit(), "delta": delta,
        "delta_prime": cfg.delta_prime, "chernoff": chernoff, "violations": violations, "samples": flags.len(),
        "rate": rate, "wilson": wilson_interval(violations, flags.len()), "rate_within_bound": holds,
    });
    Ok(Output { csv, report, extras: vec![], pass: Some(holds) })
}

fn tilt_select(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let model = QuantumModel::tfim(classical(cfg, &lat, 0)?, cfg.eps);
    let opts = lanczos(cfg);
    let mut csv = String::from("hhat,energy,overlap_1,overlap_2,overlap_favored,residual\n");
    let mut rows = Vec::new();
    let mut pass = true;
    for &hhat in &cfg.hhat {
        let t = st.time("tilted-ground", || tilted_ground_overlap(&model, hhat, &bs, &opts))?;
        csv.push_str(&format!("{},{},{},{},{},{}\n", hhat, t.energy, t.overlaps[0], t.overlaps[1], t.overlap_favored, t.residual));
        let ok = if hhat == 0.0 {
            t.overlaps.iter().all(|o| (o - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-6)
        } else {
            t.overlap_favored > 0.99
        };
        pass &= ok;
        rows.push(json!({"tilt": t, "criterion_holds": ok}));
    }
    Ok(Output { csv, report: json!({"eps": cfg.eps, "rows": rows}), extras: vec![], pass: Some(pass) })
}

fn false_vacuum(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let base = QuantumModel::tfim(classical(cfg, &lat, 0)?, cfg.eps);
    let obs = Observable::Block { sites: (0..lat.n_sites()).collect() };
    let grid = linear_grid(cfg.t_max, cfg.n_times);
    let reports = st.time("quench", || false_vacuum_lifetime(&base, &cfg.h_sweep, &bs, &obs, &grid, &lanczos(cfg)))?;
    let mut csv = String::from("h,t,observable,bound\n");
    for r in &reports {
        for &(t, v) in &r.trajectory {
            csv.push_str(&format!("{},{},{},{}\n", r.h, t, v, 2.0 * r.delta * t));
        }
    }
    let (pairs, monotone) = lifetimes_monotone(&reports);
    let zero_ok = reports.iter().filter(|r| r.h == 0.0).all(|r| r.within_drift_bound);
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "h": r.h, "lifetime": r.lifetime, "censored": r.censored, "t_max": r.t_max, "initial_value": r.initial_value,
                "delta": r.delta, "max_drift": r.max_drift, "within_drift_bound": r.within_drift_bound,
                "out_of_sector_weight": r.out_of_sector_weight,
            })
        })
        .collect();
    let report = json!({
        "lattice": [lat.lx(), lat.ly()], "eps": cfg.eps, "well": FALSE_VACUUM_WELL, "threshold": crate::dynamics::LIFETIME_THRESHOLD,
        "runs": summary, "halving_pairs": pairs, "monotone": monotone, "zero_field_within_bound": zero_ok,
    });
    Ok(Output { csv, report, extras: vec![], pass: Some(monotone && zero_ok) })
}

fn lr_sim(cfg: &ExperimentConfig, st: &mut Stages) -> Result<Output> {
    let chain = QuantumModel::tfim(ClassicalHamiltonian::chain(cfg.chain_len, cfg.j), cfg.chain_eps);
    let mid = Observable::Site { site: cfg.chain_len / 2 };
    let lr: Vec<f64> = st.time("local-simulatability", || {
        cfg.r_b.iter().map(|&r| local_simulatability_error(&chain, &mid, r, cfg.lr_time)).collect::<Result<_>>()
    })?;
    let mut csv = String::from("r_b,delta_lr\n");
    for (r, d) in cfg.r_b.iter().zip(&lr) {
        csv.push_str(&format!("{r},{d}\n"));
    }
    let decreasing = lr.windows(2).all(|w| w[1] < w[0]);
    let lat = lattice(cfg)?;
    let bs = st.time("structure", || structure(cfg, &lat))?;
    st.time("classify", || bs.classes().map(|_| ()))?;
    let job = EvolutionJob {
        model: QuantumModel::tfim(classical(cfg, &lat, 0)?, cfg.eps),
        region: None,
        observable: Observable::Block { sites: (0..lat.n_sites()).collect() },
        t_grid: linear_grid(cfg.t_max, cfg.n_times),
        m: 1,
        initial: None,
    };
    let twin = st.time("twin", || restricted_vs_full(&job, &bs, 1, &lanczos(cfg)))?;
    let mut twin_csv = String::from("t,full,restricted,deviation,bound\n");
    for p in &twin.points {
        twin_csv.push_str(&format!("{},{},{},{},{}\n", p.t, p.full, p.restricted, p.deviation, p.bound));
    }
    let report = json!({
        "chain_len": cfg.chain_len, "chain_eps": cfg.chain_eps, "time": cfg.lr_time, "r_b": cfg.r_b, "delta_lr": lr,
        "strictly_decreasing": decreasing,
        "twin": {"lattice": [lat.lx(), lat.ly()], "eps": cfg.eps, "m": twin.m, "delta": twin.delta,
                 "delta_prime": twin.delta_prime, "max_deviation": twin.max_deviation, "holds": twin.holds_strict},
    });
    Ok(Output { csv, report, extras: vec![("twin.csv".into(), twin_csv)], pass: Some(decreasing && twin.holds_strict) })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}
