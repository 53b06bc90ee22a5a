//! Functions behind the browser demo page.
//!
//! The exported functions exchange JSON strings so the page needs no
//! generated type bindings.

use serde::{Deserialize, Serialize};
use statepoll_core::ergodicity::{classify, Verdict};
use statepoll_core::server::{necessary_conditions, solve_server_distribution};
use statepoll_core::symmetric::circulant_eigenvalues;
use statepoll_core::waiting::{
    mean_wait, mean_wait_bernoulli, mean_wait_exhaustive, CompoundPoissonSpec, ServiceMoments,
};
use statepoll_core::{ModelDocument, PollingModel};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct CurveParams {
    pub n: usize,
    pub w: f64,
    pub w2: f64,
    pub sigma: f64,
    pub sigma2: f64,
    /// Exit probability of the Bernoulli curve.
    pub pi: f64,
    pub points: usize,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Curves {
    pub lambda: Vec<f64>,
    pub cyclic: Vec<Option<f64>>,
    pub random: Vec<Option<f64>>,
    pub bernoulli: Vec<Option<f64>>,
    pub exhaustive: Vec<Option<f64>>,
}

fn one_limited(spec: &CompoundPoissonSpec, p_dist: &[f64]) -> Option<f64> {
    let mu = circulant_eigenvalues(p_dist);
    mean_wait(spec, &mu, &mu).ok()
}

/// Mean waiting time against the per-station arrival rate, up to the
/// saturation point of 1-limited service `N lambda (w + sigma) = 1`.
/// Points where a schedule is unstable are `null`.
pub fn wait_curves(p: &CurveParams) -> Result<Curves, String> {
    if p.n < 2 || p.points < 2 {
        return Err("need n >= 2 and at least 2 points".into());
    }
    let s = ServiceMoments {
        w: p.w,
        w2: p.w2,
        sigma: p.sigma,
        sigma2: p.sigma2,
    };
    let n = p.n;
    let mut cyclic_dist = vec![0.0; n];
    cyclic_dist[0] = 1.0;
    let random_dist = vec![1.0 / n as f64; n];
    let top = 1.0 / (n as f64 * (p.w + p.sigma));
    let mut c = Curves {
        lambda: Vec::new(),
        cyclic: Vec::new(),
        random: Vec::new(),
        bernoulli: Vec::new(),
        exhaustive: Vec::new(),
    };
    for k in 1..=p.points {
        let lambda = top * k as f64 / (p.points + 1) as f64;
        let spec = CompoundPoissonSpec::from_service(lambda, 1.0, 1.0, s);
        spec.validate().map_err(|e| e.to_string())?;
        c.lambda.push(lambda);
        c.cyclic.push(one_limited(&spec, &cyclic_dist));
        c.random.push(one_limited(&spec, &random_dist));
        c.bernoulli.push(mean_wait_bernoulli(&spec, &cyclic_dist, p.pi).ok());
        c.exhaustive.push(mean_wait_exhaustive(&spec, &cyclic_dist).ok());
    }
    Ok(c)
}

#[derive(Debug, Deserialize)]
pub struct MapParams {
    pub tau: [f64; 2],
    pub tau_tilde: [f64; 2],
    /// Probability of staying put after finding a station empty.
    pub stay: f64,
    pub lambda_max: f64,
    pub resolution: usize,
}

/// Cell codes of [`stability_map`].
pub const ERGODIC: u8 = 1;
pub const NOT_ERGODIC: u8 = 2;
pub const INCONCLUSIVE: u8 = 0;
pub const FAILED: u8 = 3;

/// Classifies the two-station taxicab model (swap after a service) on a
/// `resolution x resolution` grid of `(lambda_1, lambda_2)`; row-major with
/// `lambda_2` increasing by row.
pub fn stability_map(p: &MapParams) -> Result<Vec<u8>, String> {
    if p.resolution == 0 || p.resolution > 400 {
        return Err("resolution must be in 1..=400".into());
    }
    let r = p.resolution;
    let step = p.lambda_max / r as f64;
    let q = p.stay;
    let mut out = Vec::with_capacity(r * r);
    for row in 0..r {
        for col in 0..r {
            let l1 = (col as f64 + 0.5) * step;
            let l2 = (row as f64 + 0.5) * step;
            let m = PollingModel::new(
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                vec![vec![q, 1.0 - q], vec![1.0 - q, q]],
                vec![l1, l2],
                p.tau.to_vec(),
                p.tau_tilde.to_vec(),
            );
            let code = match classify(&m) {
                Ok(c) => match c.verdict {
                    Verdict::Ergodic => ERGODIC,
                    Verdict::Transient | Verdict::NotErgodic => NOT_ERGODIC,
                    Verdict::Inconclusive => INCONCLUSIVE,
                },
                Err(e) if e.is_input_error() => return Err(e.to_string()),
                Err(_) => FAILED,
            };
            out.push(code);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Solution {
    pub f: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub tau_bar: f64,
    pub rho_hat: f64,
    pub cycle: Vec<f64>,
    pub flux_margins: Vec<f64>,
    pub necessary_hold: bool,
    pub warnings: Vec<String>,
}

/// Server distribution of a model given as TOML or JSON text.
pub fn solve_text(text: &str) -> Result<Solution, String> {
    let doc = if text.trim_start().starts_with('{') {
        ModelDocument::from_json_str(text)
    } else {
        ModelDocument::from_toml_str(text)
    }
    .map_err(|e| e.to_string())?;
    let m = doc.to_model().map_err(|e| e.to_string())?;
    let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
    let nc = necessary_conditions(&m, &d);
    Ok(Solution {
        necessary_hold: nc.all_hold(),
        flux_margins: nc.flux_margins,
        f: d.f,
        f_tilde: d.f_tilde,
        tau_bar: d.tau_bar,
        rho_hat: d.rho_hat,
        cycle: d.cycle,
        warnings: d.warnings,
    })
}

fn parse<T: for<'a> Deserialize<'a>>(json: &str) -> Result<T, JsValue> {
    serde_json::from_str(json).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn to_json<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("plain data serializes")
}

#[wasm_bindgen(js_name = waitCurves)]
pub fn wait_curves_js(params: &str) -> Result<String, JsValue> {
    wait_curves(&parse(params)?).map(|c| to_json(&c)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = stabilityMap)]
pub fn stability_map_js(params: &str) -> Result<Vec<u8>, JsValue> {
    stability_map(&parse(params)?).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solveModel)]
pub fn solve_model_js(text: &str) -> Result<String, JsValue> {
    solve_text(text).map(|s| to_json(&s)).map_err(|e| JsValue::from_str(&e))
}
