use std::collections::BTreeMap;
use std::time::Instant;

use super::config::invalid;
use super::report::{CheckVerdict, RunReport, Table};
use super::{ExperimentConfig, ExperimentError, Result};
use crate::coupling::{
    build_contracting_coupling_kernel, envelope_probability, excursion_traces, rate_bound_check,
    sample_coupled_paths, uniqueness_cross_check, CouplingError, RateFunction, Verdict,
};
use crate::harris::{contraction_check, weak_harris_certify};
use crate::markov::io::{read_matrix, read_vector};
use crate::markov::{lyapunov_check, make_finite_kernel, DistanceLike, FiniteKernel};
use crate::rng::derive_seed;
use crate::sdde::{
    apriori_separation_test, contraction_moment_test, default_probes, girsanov_coupling_batch,
    integrate, integrate_pair_binding, sdde_dsmall_estimate, stochastic_convolution_test,
    support_probe, Regime, SddeError, SddeSystem, Segment,
};
use crate::stats::{variance_se, MeanSe};

/// Names accepted by [`run`].
pub const EXPERIMENTS: [&str; 8] = [
    "harris-certify",
    "couple",
    "binding",
    "girsanov",
    "convolution",
    "support",
    "apriori",
    "dsmall",
];

struct Params<'a>(&'a BTreeMap<String, String>);

impl Params<'_> {
    fn str(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| invalid(key, "required".into()))
    }

    fn str_or<'b>(&'b self, key: &str, default: &'b str) -> &'b str {
        self.0.get(key).map_or(default, |s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.0.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| invalid(key, format!("cannot parse {s:?}"))),
            None => default.ok_or_else(|| invalid(key, "required".into())),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.parse(key, Some(default))
    }

    fn list(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        self.str_or(key, default)
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| invalid(key, format!("bad number {t:?}")))
            })
            .collect()
    }

    fn system(&self) -> Result<SddeSystem> {
        let name = self.str_or("system", "linear");
        let bad = std::cell::RefCell::new(None);
        let sys = SddeSystem::builtin(name, |k, d| match self.0.get(k) {
            Some(s) => s.parse().unwrap_or_else(|_| {
                *bad.borrow_mut() = Some(k.to_string());
                d
            }),
            None => d,
        });
        if let Some(k) = bad.into_inner() {
            return Err(invalid(&k, "not a number".into()));
        }
        sys.map_err(|e| invalid("system", e.to_string()))
    }

    /// Constant segment from a comma-separated point.
    fn segment(&self, key: &str, default: &str) -> Result<Segment> {
        let dt = self.f64("dt", 0.01)?;
        let r = self.f64("r", 0.0)?;
        let h = self.f64("h", dt)?;
        Segment::constant(r, h, &self.list(key, default)?).map_err(|e| invalid(key, e.to_string()))
    }
}

/// Run the named experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(config.clone());
    let p = Params(&config.params);
    match config.experiment.as_str() {
        "harris-certify" => harris_certify(config, &p, &mut report)?,
        "couple" => couple(config, &p, &mut report)?,
        "binding" => binding(config, &p, &mut report)?,
        "girsanov" => girsanov(config, &p, &mut report)?,
        "convolution" => convolution(config, &p, &mut report)?,
        "support" => support(config, &p, &mut report)?,
        "apriori" => apriori(config, &p, &mut report)?,
        "dsmall" => dsmall(config, &p, &mut report)?,
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    }
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn load_kernel(p: &Params) -> Result<(FiniteKernel, DistanceLike)> {
    let k = make_finite_kernel(&read_matrix(p.str("kernel")?)?)?;
    let d = DistanceLike::new(&read_matrix(p.str("distance")?)?)?;
    Ok((k, d))
}

fn harris_certify(_c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let (k, d) = load_kernel(p)?;
    let v = read_vector(p.str("lyapunov")?)?;
    let t_star: usize = p.parse("t_star", None)?;
    let horizon: usize = p.parse("horizon", Some(4 * t_star))?;
    let cert = match lyapunov_check(&k, &v, horizon) {
        Ok(c) => c,
        Err(e) => {
            r.check("lyapunov", CheckVerdict::Fail, e.to_string());
            return Ok(());
        }
    };
    r.check("lyapunov", CheckVerdict::Pass, "");
    r.stat("C_V", cert.c_v, None);
    r.stat("gamma", cert.gamma, None);
    r.stat("K_V", cert.k_v, None);
    r.detail("lyapunov", cert);
    match weak_harris_certify(&k, &d, &v, &cert, t_star) {
        Ok(w) => {
            for (name, x) in [
                ("epsilon", w.epsilon),
                ("alpha", w.alpha),
                ("beta", w.beta),
                ("factor", w.factor),
                ("max_ratio", w.max_ratio),
            ] {
                r.stat(name, x, None);
            }
            r.pass_if(
                "weak_harris",
                w.verified && w.factor < 1.0,
                format!("factor {}", w.factor),
            );
            r.detail("weak_harris", &w);
        }
        Err(e) => r.check("weak_harris", CheckVerdict::Fail, e.to_string()),
    }
    Ok(())
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split([';', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (a, b) = t
                .split_once(':')
                .ok_or_else(|| invalid("pairs", format!("{t:?} is not x:y")))?;
            let x = a
                .parse()
                .map_err(|_| invalid("pairs", format!("bad state {a:?}")))?;
            let y = b
                .parse()
                .map_err(|_| invalid("pairs", format!("bad state {b:?}")))?;
            Ok((x, y))
        })
        .collect()
}

fn couple(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let (k, d) = load_kernel(p)?;
    let n = k.n();
    let alpha = match contraction_check(&k, &d, 1) {
        Ok(cert) => cert.alpha,
        Err(e) => {
            r.check("contraction", CheckVerdict::Fail, e.to_string());
            return Ok(());
        }
    };
    let alpha_tilde = p.f64("alpha_tilde", 0.5 * (1.0 + alpha))?;
    let ck = build_contracting_coupling_kernel(&k, &d, alpha_tilde)?;
    r.stat("alpha", alpha, None);
    r.stat("alpha_tilde", alpha_tilde, None);
    let pairs = parse_pairs(p.str_or("pairs", "0:1"))?;
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= n || y >= n) {
        return Err(invalid("pairs", format!("({x}, {y}) out of range")));
    }
    let steps: usize = p.parse("steps", Some(200))?;
    let envelope_steps: usize = p.parse("envelope_steps", Some(50))?;
    let rho = RateFunction::parse(p.str_or("rho", "0.9*0.8^n"))
        .map_err(|e| invalid("rho", e.to_string()))?;
    let dump: usize = p.parse("dump_traces", Some(0))?;
    let all: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let tag = format!("{x}_{y}");
        let seed = derive_seed(c.seed, i as u64);
        let u = uniqueness_cross_check(&k, &ck, &d, x, y, steps, c.samples, seed)?;
        let verdict = match u.verdict {
            Verdict::Consistent => CheckVerdict::Pass,
            Verdict::Inconsistent => CheckVerdict::Fail,
            Verdict::Inconclusive => CheckVerdict::Inconclusive,
        };
        r.check(
            &format!("uniqueness_{tag}"),
            verdict,
            format!("{} invariant measures", u.invariant_count),
        );
        r.stat(
            &format!("coupled_mass_{tag}"),
            u.asymptotic.estimate,
            Some(u.asymptotic.se),
        );
        let e = envelope_probability(
            &ck,
            &d,
            x,
            y,
            alpha_tilde,
            envelope_steps,
            c.samples,
            derive_seed(seed, 1),
        )?;
        r.pass_if(
            &format!("envelope_{tag}"),
            e.pass,
            format!("fraction {} vs bound {}", e.fraction, e.bound),
        );
        r.stat(&format!("envelope_{tag}"), e.fraction, Some(e.se));
        let traces = excursion_traces(
            &ck,
            &d,
            &all,
            &rho,
            (x, y),
            1000,
            10 * steps,
            c.samples,
            derive_seed(seed, 2),
        )?;
        let grid: Vec<usize> = (2..=steps).collect();
        match rate_bound_check(&traces, &rho, &k, &d, (x, y), &grid) {
            Ok(rep) => {
                r.check(&format!("rate_bound_{tag}"), CheckVerdict::Pass, "");
                r.stat(&format!("phi_hat_{tag}"), rep.phi_hat, None);
                let mut t = Table::new(
                    &format!("rate_bound_{tag}"),
                    &["n", "lhs", "tail", "tail_se", "rho_half"],
                );
                t.rows = rep
                    .rows
                    .iter()
                    .map(|w| vec![w.n as f64, w.lhs, w.tail, w.tail_se, w.rho_half])
                    .collect();
                r.tables.push(t);
            }
            Err(CouplingError::BoundViolated { n, lhs, rhs }) => r.check(
                &format!("rate_bound_{tag}"),
                CheckVerdict::Fail,
                format!("n = {n}: {lhs} > {rhs}"),
            ),
            Err(e) => return Err(e.into()),
        }
        if dump > 0 {
            let mut t = Table::new(&format!("traces_{tag}"), &["sample", "n", "x", "y", "d"]);
            for (s, path) in sample_coupled_paths(&ck, &d, x, y, steps, dump, derive_seed(seed, 3))
                .iter()
                .enumerate()
            {
                for j in 0..path.len() {
                    t.rows.push(vec![
                        s as f64,
                        j as f64,
                        path.left[j] as f64,
                        path.right[j] as f64,
                        path.distances[j],
                    ]);
                }
            }
            r.tables.push(t);
        }
    }
    Ok(())
}

fn binding(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let sys = p.system()?;
    let lambda = p.f64("lambda", 9.0)?;
    let gamma0 = p.f64("gamma0", 1.0)?;
    let (t_end, dt) = (p.f64("T", 1.0)?, p.f64("dt", 0.01)?);
    let eta = p.segment("eta", "1")?;
    let eta_tilde = p.segment("eta_tilde", "0")?;
    let rows: usize = p.parse("rows", Some(100))?;
    let paths = (0..c.samples)
        .map(|i| {
            integrate_pair_binding(
                &sys,
                lambda,
                &eta,
                &eta_tilde,
                t_end,
                dt,
                derive_seed(c.seed, i as u64),
            )
        })
        .collect::<std::result::Result<Vec<_>, SddeError>>()?;
    let steps = paths.first().map_or(0, |(x, _)| x.steps());
    let mut t = Table::new("decay", &["t", "mean_Z", "se"]);
    let stride = (steps / rows.max(1)).max(1);
    for n in (0..=steps).step_by(stride) {
        let z: Vec<f64> = paths.iter().map(|(x, y)| x.distance_at(y, n)).collect();
        let s = MeanSe::of(&z);
        t.rows.push(vec![n as f64 * dt, s.mean, s.se]);
    }
    if let Some(last) = t.rows.last() {
        r.stat("mean_Z_T", last[1], Some(last[2]));
    }
    r.tables.push(t);
    let pairs = [(eta, eta_tilde)];
    let rep = contraction_moment_test(
        &sys,
        lambda,
        gamma0,
        &pairs,
        t_end,
        dt,
        c.samples,
        derive_seed(c.seed, u64::MAX),
    )?;
    let row = &rep.rows[0];
    r.stat("moment_ratio", row.ratio, Some(row.se));
    r.stat(
        "moment_ratio_doubled",
        row.ratio_doubled,
        Some(row.se_doubled),
    );
    r.pass_if(
        "contraction_moment",
        rep.pass,
        format!("growth {} (se {})", row.growth, row.growth_se),
    );
    Ok(())
}

fn girsanov(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let sys = p.system()?;
    let lambda = p.f64("lambda", 5.0)?;
    let eps = p.f64("eps", 0.1)?;
    let (t_end, dt) = (p.f64("T", 1.0)?, p.f64("dt", 0.01)?);
    let eta = p.segment("eta", "0.2")?;
    let eta_tilde = p.segment("eta_tilde", "0")?;
    let sigmas = c.tolerance("sigmas", 3.0);
    let batch = girsanov_coupling_batch(
        &sys, lambda, eps, &eta, &eta_tilde, t_end, dt, c.samples, c.seed,
    )?;
    let m = batch.len();
    for (name, regime) in [
        ("p_bound_forever", Regime::BoundForever),
        ("p_shift_exhausted", Regime::ShiftExhausted),
        ("p_residual", Regime::IndependentResidual),
    ] {
        let (q, se) =
            crate::stats::proportion(batch.iter().filter(|s| s.regime == regime).count(), m);
        r.stat(name, q, Some(se));
        if regime == Regime::IndependentResidual {
            let flag = q > 0.0 && se > 0.05 * q;
            let verdict = if flag {
                CheckVerdict::Inconclusive
            } else {
                CheckVerdict::Pass
            };
            r.check(
                "residual_mass_precision",
                verdict,
                format!("normalisation {q} with se {se}"),
            );
        }
    }
    let sq = MeanSe::of(
        &batch
            .iter()
            .map(|s| (1.0 - (-s.log_density).exp()).powi(2))
            .collect::<Vec<_>>(),
    );
    r.stat("mean_sq_one_minus_inverse_density", sq.mean, Some(sq.se));
    let coupled: Vec<f64> = batch.iter().map(|s| s.x_tilde_end[0]).collect();
    let direct: Vec<f64> = (0..m)
        .map(|i| {
            integrate(
                &sys,
                &eta_tilde,
                t_end,
                dt,
                derive_seed(derive_seed(c.seed, 1), i as u64),
            )
            .map(|x| x.terminal()[0])
        })
        .collect::<std::result::Result<_, _>>()?;
    let (a, b) = (MeanSe::of(&coupled), MeanSe::of(&direct));
    let (va, vb) = (variance_se(&coupled), variance_se(&direct));
    r.stat("coupled_mean", a.mean, Some(a.se));
    r.stat("direct_mean", b.mean, Some(b.se));
    r.stat("coupled_var", a.var, Some(va));
    r.stat("direct_var", b.var, Some(vb));
    r.pass_if(
        "marginal_mean",
        (a.mean - b.mean).abs() <= sigmas * a.se.hypot(b.se),
        "",
    );
    r.pass_if(
        "marginal_var",
        (a.var - b.var).abs() <= sigmas * va.hypot(vb),
        "",
    );
    Ok(())
}

fn convolution(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let lambdas = p.list("lambdas", "1,4,16,64")?;
    let h = p.f64("h_const", 1.0)?;
    let power = p.f64("p", 4.0)?;
    let (t_end, dt) = (p.f64("T", 1.0)?, p.f64("dt", 1e-3)?);
    let sigmas = c.tolerance("sigmas", 3.0);
    let rep = stochastic_convolution_test(&lambdas, &|_| h, power, t_end, dt, c.samples, c.seed)?;
    let mut t = Table::new(
        "convolution",
        &["lambda", "ratio", "se", "var_end", "var_end_se"],
    );
    t.rows = rep
        .rows
        .iter()
        .map(|w| vec![w.lambda, w.ratio, w.se, w.var_end, w.var_end_se])
        .collect();
    r.tables.push(t);
    r.pass_if("ratio_decreasing", rep.pass, "");
    let first = rep.rows[0];
    let oracle = if first.lambda > 0.0 {
        h * h * (1.0 - (-2.0 * first.lambda * t_end).exp()) / (2.0 * first.lambda)
    } else {
        h * h * t_end
    };
    r.stat(
        "var_end_first_lambda",
        first.var_end,
        Some(first.var_end_se),
    );
    r.stat("var_oracle", oracle, None);
    r.pass_if(
        "variance_oracle",
        (first.var_end - oracle).abs() <= sigmas * first.var_end_se,
        "",
    );
    r.detail("convolution", &rep);
    Ok(())
}

fn support(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let sys = p.system()?;
    let eta = p.segment("eta", "0")?;
    let t_star = p.f64("t_star", (2.0 * eta.r()).max(1.0))?;
    let delta = p.f64("delta", 0.5)?;
    let dt = p.f64("dt", 0.01)?;
    let rep = support_probe(&sys, &eta, t_star, delta, dt, c.samples, c.seed)?;
    r.stat("fraction", rep.fraction, Some(rep.se));
    r.stat("lower_99", rep.lower, None);
    let verdict = if rep.inconclusive {
        CheckVerdict::Inconclusive
    } else {
        CheckVerdict::Pass
    };
    r.check(
        "support_positive",
        verdict,
        format!("{} hits in {}", rep.hits, rep.samples),
    );
    r.detail("support", rep);
    Ok(())
}

fn apriori(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let sys = p.system()?;
    let eta = p.segment("eta", "1")?;
    let eta_tilde = p.segment("eta_tilde", "0")?;
    let (t_end, dt) = (p.f64("T", 2.0)?, p.f64("dt", 1e-3)?);
    let grid: usize = p.parse("grid", Some(20))?;
    let rep = apriori_separation_test(
        &sys,
        &[(eta, eta_tilde)],
        t_end,
        dt,
        grid,
        c.samples,
        c.seed,
    )?;
    r.stat("kappa", rep.kappa, Some(rep.kappa_se));
    r.stat("kappa_halved", rep.kappa_halved, Some(rep.kappa_halved_se));
    r.pass_if("kappa_stable", rep.pass, "");
    let mut t = Table::new("apriori", &["t", "ratio", "se"]);
    t.rows = rep.rows.iter().map(|w| vec![w.t, w.ratio, w.se]).collect();
    r.tables.push(t);
    Ok(())
}

fn dsmall(c: &ExperimentConfig, p: &Params, r: &mut RunReport) -> Result<()> {
    let sys = p.system()?;
    let (dt, rr) = (p.f64("dt", 0.01)?, p.f64("r", 0.0)?);
    let h = p.f64("h", dt)?;
    let radius = p.f64("R", 2.0)?;
    let delta = p.f64("delta", 1.0)?;
    let t = p.f64("t", (2.0 * rr).max(1.0))?;
    let probes = default_probes(sys.d, rr, h, radius)?;
    match sdde_dsmall_estimate(&sys, &probes, delta, t, dt, c.samples, c.seed) {
        Ok(rep) => {
            r.stat("p_hat", rep.p_hat, None);
            r.stat("bound", rep.bound, None);
            r.pass_if("d_small", rep.bound < 1.0, "");
            r.detail("dsmall", &rep);
        }
        Err(SddeError::Inconclusive(msg)) => r.check("d_small", CheckVerdict::Inconclusive, msg),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment() {
        let e = run(&ExperimentConfig::new("nope", 1, 1)).unwrap_err();
        assert_eq!(e, ExperimentError::UnknownExperiment("nope".into()));
    }

    #[test]
    fn missing_key_is_named() {
        let e = run(&ExperimentConfig::new("harris-certify", 1, 1)).unwrap_err();
        assert!(matches!(e, ExperimentError::InvalidConfig { key, .. } if key == "kernel"));
    }

    #[test]
    fn binding_report_is_deterministic() {
        let c = ExperimentConfig::new("binding", 3, 20)
            .with_param("T", 0.5)
            .with_param("dt", 0.01);
        let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
        assert_eq!(a.reproducible_json(), b.reproducible_json());
        assert_eq!(a.tables[0].columns, ["t", "mean_Z", "se"]);
        assert_eq!(a.exit_code(), 0);
    }

    #[test]
    fn pair_lists() {
        assert_eq!(parse_pairs("0:1;2:3").unwrap(), vec![(0, 1), (2, 3)]);
        assert!(parse_pairs("0-1").is_err());
    }
}
