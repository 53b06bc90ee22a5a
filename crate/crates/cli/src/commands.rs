use std::path::Path;

use statepoll_core::ergodicity::{classify_with, transience_sweep, ClassifyOptions, FaceStatus};
use statepoll_core::model::traffic_summary;
use statepoll_core::server::{flow_residuals, necessary_conditions, solve_server_distribution};
use statepoll_core::sim::{simulate, SimConfig, SimulationEstimate, TravelChoice};
use statepoll_core::symmetric::{
    check_assumptions, circulant_eigenvalues, distance_distribution, eigen_sum, empty_probability,
    mean_queue_arbitrary, mean_queue_at_polling, AssumptionCheck, SymmetricProfile,
};
use statepoll_core::waiting::{
    mean_wait, mean_wait_bernoulli, mean_wait_exhaustive, mean_wait_state_independent, strategy_compare,
    Candidate, CompoundPoissonSpec, ServiceMoments,
};
use statepoll_core::{Error, ModelDocument, PollingModel};

use crate::report::{Cell, Report, Section};

/// A core error tagged with the analysis that raised it.
#[derive(Debug)]
pub struct CommandError {
    pub module: &'static str,
    pub error: Error,
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_input_error() {
            2
        } else {
            3
        }
    }
}

pub type CmdResult<T> = std::result::Result<T, CommandError>;

trait Tag<T> {
    fn tag(self, module: &'static str) -> CmdResult<T>;
}

impl<T> Tag<T> for statepoll_core::Result<T> {
    fn tag(self, module: &'static str) -> CmdResult<T> {
        self.map_err(|error| CommandError { module, error })
    }
}

pub fn load(path: &Path) -> CmdResult<(ModelDocument, PollingModel)> {
    let doc = ModelDocument::load(path).tag("model-core")?;
    let model = doc.to_model().tag("model-core")?;
    statepoll_core::model::ensure_valid(&model).tag("model-core")?;
    Ok((doc, model))
}

fn station(i: usize) -> Cell {
    Cell::Text((i + 1).to_string())
}

fn pair(name: &str, x: f64) -> Vec<Cell> {
    vec![name.into(), x.into()]
}

pub fn solve(model: &PollingModel) -> CmdResult<Report> {
    let d = solve_server_distribution(model).tag("server-distribution")?;
    let nc = necessary_conditions(model, &d);
    let res = flow_residuals(model, &d);
    let t = traffic_summary(model);

    let mut st = Section::new(
        "stations",
        &["station", "F", "F~", "P(empty | polled)", "return time", "F - lambda*tau_bar"],
    );
    let empty = d.empty_given_polled();
    for i in 0..model.n() {
        st.row(vec![
            station(i),
            d.f[i].into(),
            d.f_tilde[i].into(),
            empty[i].into(),
            d.cycle[i].into(),
            nc.flux_margins[i].into(),
        ]);
    }
    st.row(vec![
        "sum".into(),
        d.f.iter().sum::<f64>().into(),
        d.f_tilde.iter().sum::<f64>().into(),
        Cell::Blank,
        Cell::Blank,
        Cell::Blank,
    ]);

    let mut sc = Section::new("summary", &["quantity", "value"]);
    sc.row(pair("tau_bar", d.tau_bar))
        .row(pair("rho_hat", d.rho_hat))
        .row(pair("1 - rho_hat", nc.rho_margin))
        .row(pair("sum lambda*tau", t.load_sum))
        .row(pair("1 - sum lambda*tau", nc.load_margin))
        .row(pair("condition number", d.condition))
        .row(pair("routing residual", res.routing))
        .row(pair("flux residual", res.flux));

    let mut r = Report {
        sections: vec![st, sc],
        notes: d.warnings.clone(),
        ..Report::default()
    };
    r.headline.push(format!(
        "necessary conditions for ergodicity: {}",
        if nc.all_hold() { "hold" } else { "violated" }
    ));
    Ok(r)
}

pub fn classify(model: &PollingModel, max_faces: Option<usize>) -> CmdResult<Report> {
    let mut opts = ClassifyOptions::default();
    if let Some(m) = max_faces {
        opts.max_faces = m;
    }
    let c = classify_with(model, opts).tag("ergodicity")?;
    let n = model.n();
    let tag = if c.conjecture_based { " [conjecture]" } else { "" };
    let mut r = Report::default();
    r.headline.push(format!("verdict: {}{tag}", c.verdict));

    let mut sc = Section::new("summary", &["quantity", "value"]);
    sc.row(vec!["verdict".into(), format!("{}{tag}", c.verdict).into()]);
    sc.row(pair("rho_hat", c.rho_hat));
    if let Some(nc) = &c.necessary {
        sc.row(pair("1 - rho_hat", nc.rho_margin));
        for (i, m) in nc.flux_margins.iter().enumerate() {
            sc.row(pair(&format!("F_{0} - lambda_{0}*tau_bar", i + 1), *m));
        }
    }
    r.sections.push(sc);

    if !c.faces.is_empty() {
        let mut fs = Section::new("faces", &["face", "status", "rho_hat^L", "tau_bar^L", "margin"]);
        for s in &c.faces {
            let status = match s.ergodic_flag {
                FaceStatus::Ergodic => "ergodic",
                FaceStatus::NonErgodic => "not ergodic",
                FaceStatus::ConjecturedErgodic => "ergodic [conjecture]",
            };
            fs.row(vec![
                s.face.to_string().into(),
                status.into(),
                s.rho_hat_l.into(),
                s.tau_bar_l.into(),
                s.margin.into(),
            ]);
        }
        r.sections.push(fs);
    }

    if let Some(cert) = &c.certificate {
        r.headline.push(format!("certificate: f = sum u_i f_i with epsilon = {:e}", cert.epsilon));
        let mut cs = Section::new("certificate weights", &["station", "u", "f(e_i)"]);
        for i in 0..n {
            cs.row(vec![station(i), cert.u[i].into(), cert.basis_values[i].into()]);
        }
        r.sections.push(cs);
        let mut fv = Section::new("certificate on faces", &["face", "f(v^L)"]);
        for f in &cert.face_values {
            fv.row(vec![f.face.to_string().into(), f.value.into()]);
        }
        r.sections.push(fv);
    }

    if c.necessary.is_some() && model.routing_is_state_independent(0.0) {
        match transience_sweep(model) {
            Ok(sw) => {
                let mut ss = Section::new(
                    "face trajectory",
                    &["step", "face", "station", "drift v^L", "comparison defect"],
                );
                for (k, s) in sw.steps.iter().enumerate() {
                    ss.row(vec![
                        (k + 1).to_string().into(),
                        s.face.to_string().into(),
                        station(s.station),
                        s.drift.into(),
                        s.compare_defect.into(),
                    ]);
                }
                r.sections.push(ss);
                if !sw.ties.is_empty() {
                    r.notes.push("stations with equal lambda/F were ordered by index".into());
                }
            }
            Err(e) => r.notes.push(format!("face trajectory unavailable: {e}")),
        }
    }
    r.notes.extend(c.notes);
    Ok(r)
}

fn check_row(name: &str, c: &AssumptionCheck) -> Vec<Cell> {
    vec![
        name.into(),
        if c.pass { "pass" } else { "fail" }.into(),
        c.defect.into(),
        c.detail.clone().unwrap_or_default().into(),
    ]
}

pub fn symmetric(model: &PollingModel) -> CmdResult<Report> {
    let rep = check_assumptions(model);
    let mut r = Report::default();
    let mut a = Section::new("assumptions", &["assumption", "status", "defect", "detail"]);
    a.row(check_row("A1 rotational symmetry", &rep.a1))
        .row(check_row("A2 mu~_l != 1 for l < N", &rep.a2))
        .row(check_row("A3 routing commutation", &rep.a3));
    r.sections.push(a);

    let pd = distance_distribution(&model.p);
    let ptd = distance_distribution(&model.p_tilde);
    let mu = circulant_eigenvalues(&pd);
    let mu_t = circulant_eigenvalues(&ptd);
    let mut e = Section::new(
        "eigenvalues",
        &["l", "p_l", "p~_l", "Re mu_l", "Im mu_l", "Re mu~_l", "Im mu~_l"],
    );
    for l in 0..model.n() {
        e.row(vec![
            (l + 1).to_string().into(),
            pd[l].into(),
            ptd[l].into(),
            mu[l].re.into(),
            mu[l].im.into(),
            mu_t[l].re.into(),
            mu_t[l].im.into(),
        ]);
    }
    r.sections.push(e);

    if !rep.a1.pass {
        r.headline.push("model is not rotationally symmetric; closed forms do not apply".into());
        return Ok(r);
    }
    let prof = SymmetricProfile::from_model(model).tag("symmetric-analysis")?;
    let mut q = Section::new("queue lengths at polling instants", &["quantity", "value"]);
    q.row(pair("sum 1/(1 - mu~_l)", eigen_sum(&prof.mu_tilde).tag("symmetric-analysis")?))
        .row(pair("P(polled station empty)", empty_probability(&prof).tag("symmetric-analysis")?));
    if rep.a2.pass && rep.a3.pass {
        q.row(pair("E[X_m | S = m]", mean_queue_at_polling(&prof).tag("symmetric-analysis")?))
            .row(pair("E[X_m]", mean_queue_arbitrary(&prof).tag("symmetric-analysis")?));
    } else {
        r.notes.push("queue-length closed forms need A2 and A3".into());
    }
    r.sections.push(q);
    r.notes.extend(prof.warnings);
    Ok(r)
}

fn model_spec(model: &PollingModel) -> CmdResult<CompoundPoissonSpec> {
    let b = model.batch_or_poisson();
    Ok(CompoundPoissonSpec {
        lambda_hat: model.lambda[0] / b.mean,
        b: b.mean,
        b2: b.second_moment,
        tau: model.tau[0],
        tau2: model.tau2().tag("waiting-time")?[0],
        tau_tilde: model.tau_tilde[0],
        tau_tilde2: model.tau_tilde2().tag("waiting-time")?[0],
        service: None,
    })
}

/// Exit probability `pi` when `P = (1 - pi) I + pi P~` on distance
/// distributions.
pub fn bernoulli_exit_probability(p_dist: &[f64], p_tilde_dist: &[f64]) -> Option<f64> {
    let n = p_dist.len();
    let moved: f64 = p_tilde_dist[..n - 1].iter().sum();
    if moved <= 1e-12 {
        return None;
    }
    let pi = p_dist[..n - 1].iter().sum::<f64>() / moved;
    let fits = (0..n - 1).all(|d| (p_dist[d] - pi * p_tilde_dist[d]).abs() <= 1e-12);
    (fits && (0.0..=1.0 + 1e-12).contains(&pi)).then_some(pi.min(1.0))
}

fn require_symmetric(model: &PollingModel, module: &'static str) -> CmdResult<()> {
    let rep = check_assumptions(model);
    if !rep.a1.pass {
        return Err(CommandError {
            module,
            error: Error::Precondition(format!(
                "model is not rotationally symmetric: {}",
                rep.a1.detail.unwrap_or_default()
            )),
        });
    }
    Ok(())
}

pub fn wait(model: &PollingModel, service: Option<ServiceMoments>) -> CmdResult<Report> {
    require_symmetric(model, "waiting-time")?;
    let spec = model_spec(model)?;
    let pd = distance_distribution(&model.p);
    let ptd = distance_distribution(&model.p_tilde);
    let mu = circulant_eigenvalues(&pd);
    let mu_t = circulant_eigenvalues(&ptd);
    let ew = mean_wait(&spec, &mu, &mu_t).tag("waiting-time")?;

    let mut r = Report::default();
    let mut t = Section::new("mean waiting time", &["schedule", "E[W]"]);
    t.row(vec!["model (1-limited, P and P~)".into(), ew.into()]);

    if let Some(s) = service {
        let sspec = CompoundPoissonSpec::from_service(spec.lambda_hat, spec.b, spec.b2, s);
        let poisson = sspec.is_poisson();
        if (pd.iter().zip(&ptd)).all(|(a, b)| (a - b).abs() <= 1e-12) {
            t.row(vec![
                "1-limited, state-independent".into(),
                mean_wait_state_independent(&sspec, &mu).tag("waiting-time")?.into(),
            ]);
            if (spec.tau - sspec.tau).abs() > 1e-9 || (spec.tau_tilde - sspec.tau_tilde).abs() > 1e-9 {
                r.notes.push("tau and tau_tilde differ from w + sigma and w".into());
            }
        }
        match bernoulli_exit_probability(&pd, &ptd) {
            Some(pi) if pi < 1.0 && poisson => {
                t.row(vec![
                    format!("Bernoulli, pi = {}", crate::report::sig6(pi)).into(),
                    mean_wait_bernoulli(&sspec, &ptd, pi).tag("waiting-time")?.into(),
                ]);
            }
            _ => {}
        }
        if poisson {
            t.row(vec![
                "exhaustive, same P~".into(),
                mean_wait_exhaustive(&sspec, &ptd).tag("waiting-time")?.into(),
            ]);
        } else {
            r.notes.push("Bernoulli and exhaustive forms need single arrivals".into());
        }
    }
    r.sections.push(t);

    // head-of-line identity: E[X | S, X > 0] = 1 + lambda E[W] + (b2 - b)/(2b)
    let rep = check_assumptions(model);
    if rep.a2.pass && rep.a3.pass {
        let prof = SymmetricProfile::from_model(model).tag("symmetric-analysis")?;
        let p0 = empty_probability(&prof).tag("symmetric-analysis")?;
        let lhs = mean_queue_at_polling(&prof).tag("symmetric-analysis")? / (1.0 - p0);
        let rhs = 1.0 + spec.lambda() * ew + (spec.b2 - spec.b) / (2.0 * spec.b);
        let mut h = Section::new("head-of-line check", &["quantity", "value"]);
        h.row(pair("E[X_m | S = m, X_m > 0]", lhs))
            .row(pair("1 + lambda E[W] + (b2 - b)/2b", rhs))
            .row(pair("difference", lhs - rhs));
        r.sections.push(h);
    }
    Ok(r)
}

/// Distance distribution for a named strategy on `n` stations.
pub fn strategy(name: &str, n: usize, model: &PollingModel) -> std::result::Result<Vec<f64>, String> {
    let shift = |k: usize| {
        let mut p = vec![0.0; n];
        p[(k + n - 1) % n] = 1.0;
        p
    };
    match name {
        "cyclic" => Ok(shift(1)),
        "random" => Ok(vec![1.0 / n as f64; n]),
        "model" => Ok(distance_distribution(&model.p)),
        _ => {
            if let Some(k) = name.strip_prefix("shift:") {
                let k: usize = k.parse().map_err(|_| format!("bad shift in `{name}`"))?;
                if k == 0 || k >= n {
                    return Err(format!("shift {k} outside 1..{}", n - 1));
                }
                Ok(shift(k))
            } else if let Some(list) = name.strip_prefix("dist:") {
                let p: Vec<f64> = list
                    .split('/')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| format!("bad number in `{name}`"))?;
                if p.len() != n {
                    return Err(format!("`{name}` has {} entries but n = {n}", p.len()));
                }
                Ok(p)
            } else {
                Err(format!(
                    "unknown strategy `{name}` (expected cyclic, random, model, shift:K or dist:p1/../pN)"
                ))
            }
        }
    }
}

pub fn compare(model: &PollingModel, names: &[String]) -> CmdResult<Report> {
    require_symmetric(model, "waiting-time")?;
    let spec = model_spec(model)?;
    let n = model.n();
    let mut candidates = Vec::with_capacity(names.len());
    for name in names {
        let p_dist = strategy(name, n, model).map_err(|m| CommandError {
            module: "waiting-time",
            error: Error::InvalidConfig(m),
        })?;
        candidates.push(Candidate {
            name: name.clone(),
            p_dist,
        });
    }
    let table = strategy_compare(&spec, &candidates).tag("waiting-time")?;
    let mut r = Report::default();
    let mut t = Section::new("strategies", &["rank", "strategy", "E[W]", "sum 1/(1 - mu_l)"]);
    for (k, row) in table.rows.iter().enumerate() {
        t.row(vec![
            (k + 1).to_string().into(),
            row.name.clone().into(),
            row.mean_wait.into(),
            row.eigen_sum.into(),
        ]);
    }
    r.sections.push(t);
    match table.cyclic_is_minimal {
        Some(true) => r.headline.push("a cyclic (co-prime shift) strategy attains the minimum".into()),
        Some(false) => r
            .headline
            .push("WARNING: a cyclic strategy does not attain the minimum".into()),
        None => {}
    }
    r.notes.push("P = P~ = candidate routing; scalars taken from the model file".into());
    Ok(r)
}

pub struct SimulateOptions {
    pub events: u64,
    pub reps: usize,
    pub seed: u64,
    pub warmup: f64,
    pub travel: TravelChoice,
}

fn est_cells(e: &statepoll_core::sim::Estimate) -> [Cell; 2] {
    [e.mean.into(), e.se.into()]
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Blank, Cell::Num)
}

pub fn simulate_cmd(model: &PollingModel, o: &SimulateOptions) -> CmdResult<Report> {
    let cfg = SimConfig {
        horizon: o.events,
        warmup_fraction: o.warmup,
        seed: o.seed,
        replications: o.reps,
        travel_law: o.travel.clone(),
        batch_law: None,
    };
    let est = simulate(model, &cfg).tag("simulator")?;
    let d = solve_server_distribution(model).ok();
    let prof = check_assumptions(model)
        .all_pass()
        .then(|| SymmetricProfile::from_model(model).ok())
        .flatten();
    let sym = |f: fn(&SymmetricProfile) -> statepoll_core::Result<f64>| prof.as_ref().and_then(|p| f(p).ok());
    let ew = prof.as_ref().and_then(|_| {
        let spec = model_spec(model).ok()?;
        let mu = circulant_eigenvalues(&distance_distribution(&model.p));
        let mu_t = circulant_eigenvalues(&distance_distribution(&model.p_tilde));
        mean_wait(&spec, &mu, &mu_t).ok()
    });

    let mut r = Report::default();
    let mut st = Section::new(
        "stations",
        &[
            "station",
            "quantity",
            "estimate",
            "se",
            "analytic",
        ],
    );
    let n = model.n();
    let empty = d.as_ref().map(|d| d.empty_given_polled());
    for i in 0..n {
        let rows: [(&str, &statepoll_core::sim::Estimate, Option<f64>); 6] = [
            ("F", &est.f[i], d.as_ref().map(|d| d.f[i])),
            ("F~", &est.f_tilde[i], d.as_ref().map(|d| d.f_tilde[i])),
            ("P(empty | polled)", &est.empty_given_polled[i], empty.as_ref().map(|e| e[i])),
            ("E[X_i | S = i]", &est.queue_at_poll[i], sym(mean_queue_at_polling)),
            ("E[X_i]", &est.queue[i], sym(mean_queue_arbitrary)),
            ("return time", &est.return_time[i], d.as_ref().map(|d| d.cycle[i])),
        ];
        for (name, e, a) in rows {
            let [m, s] = est_cells(e);
            st.row(vec![station(i), name.into(), m, s, opt(a)]);
        }
    }
    let mut sc = Section::new("summary", &["quantity", "estimate", "se", "analytic"]);
    let [m, s] = est_cells(&est.tau_bar);
    sc.row(vec!["tau_bar".into(), m, s, opt(d.as_ref().map(|d| d.tau_bar))]);
    let [m, s] = est_cells(&est.mean_wait);
    sc.row(vec!["E[W]".into(), m, s, opt(ew)]);
    r.sections.push(st);
    r.sections.push(sc);

    if let Some(bad) = &est.instability {
        r.headline.push(format!(
            "UNSTABLE: replication {} shows growing queues (block means {:?}); estimates are not stationary",
            bad.replication + 1,
            bad.block_means.map(crate::report::sig6)
        ));
    }
    r.csv_override = Some((SimulationEstimate::csv_header(n), est.csv_records()));
    Ok(r)
}
