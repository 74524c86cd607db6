use std::f64::consts::PI;

use friedrichs_core::hardy::{
    dirac_pairing_check, eigenrelation_defect, gamov, hardy_extension, pole_sum_check, project_plus, semigroup_apply,
    Grid, GridFunction, RationalTest,
};
use friedrichs_core::linalg::{inner, vnorm};
use friedrichs_core::livsic::{bound_states, density_forms, spectral_moment};
use friedrichs_core::oracle::phi_quadrature;
use friedrichs_core::quadrature::QuadOptions;
use friedrichs_core::resonances::{
    search_resonances, trace_trajectory, Rect, Resonance, SearchRegion, TrajectoryEvent,
};
use friedrichs_core::scattering::{
    all_residues, holomorphic_part_contour, kernel_residue_angle, laurent_split, negative_axis_scan, reflection_defect,
    s_k, unitarity_defect, PoleSource, Side,
};
use friedrichs_core::stieltjes::phi;
use friedrichs_core::{validate_model, CMat, Complex64, Error, ModelSpec, SheetTag};
use rayon::prelude::*;

use crate::config::{c, Config};
use crate::error::CliError;
use crate::output::{csv_row, fmt_f64, Record, Sink};

/// Command-line overrides shared by all commands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub region: Option<[f64; 4]>,
    pub eps_grid: Option<Vec<f64>>,
    pub lambda: Option<(f64, f64, usize)>,
    pub tol: Option<f64>,
}

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub over: &'a Overrides,
    pub sink: &'a Sink,
}

impl Context<'_> {
    fn spec(&self) -> &ModelSpec {
        &self.cfg.spec
    }

    fn hash(&self) -> &str {
        &self.cfg.hash
    }

    fn region(&self) -> Result<SearchRegion, CliError> {
        let r = self.over.region.unwrap_or(self.cfg.search.region);
        let mut region = SearchRegion::new(Rect::new(r[0], r[1], r[2], r[3]));
        region.max_depth = self.cfg.search.max_depth;
        region.newton_tol = self.over.tol.unwrap_or(self.cfg.search.newton_tol);
        region.validate()?;
        Ok(region)
    }

    fn resonances(&self) -> Result<Vec<Resonance>, CliError> {
        let report = search_resonances(self.spec(), &self.region()?)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        Ok(report.resonances)
    }
}

/// Fractional parts of `k·α` for an irrational `α`: a fixed, evenly spread
/// sample sequence in `[0, 1)`.
fn weyl(k: usize, stream: usize) -> f64 {
    const ALPHAS: [f64; 6] = [
        0.618_033_988_749_894_9,
        0.414_213_562_373_095_1,
        0.732_050_807_568_877_2,
        0.236_067_977_499_789_7,
        0.645_751_311_064_590_6,
        0.162_277_660_168_379_5,
    ];
    ((k + 1) as f64 * ALPHAS[stream % ALPHAS.len()]).fract()
}

fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
    lo + (hi - lo) * u
}

pub fn validation_records(ctx: &Context) -> (Vec<String>, bool) {
    let report = validate_model(ctx.spec());
    let mut lines: Vec<String> = report
        .items
        .iter()
        .map(|i| {
            Record::new("validation", ctx.hash())
                .str("item", i.name)
                .str("assumption", i.assumption)
                .bool("hard", i.hard)
                .bool("passed", i.passed)
                .str("detail", &i.detail)
                .finish()
        })
        .collect();
    let passed = report.passed();
    lines.push(Record::new("validation_summary", ctx.hash()).bool("passed", passed).finish());
    (lines, passed)
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let (lines, passed) = validation_records(ctx);
    ctx.sink.write_lines("validate.jsonl", &lines)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Validation(failed_items(ctx.spec())))
    }
}

pub fn failed_items(spec: &ModelSpec) -> String {
    validate_model(spec).failures().map(|i| format!("{}: {}", i.name, i.detail)).collect::<Vec<_>>().join("; ")
}

pub fn resonances(ctx: &Context) -> Result<(), CliError> {
    let region = ctx.region()?;
    let report = search_resonances(ctx.spec(), &region)?;
    let mut lines: Vec<String> = report
        .resonances
        .iter()
        .map(|r| {
            Record::new("resonance", ctx.hash())
                .complex("zeta", r.zeta)
                .int("d", r.geometric_multiplicity as i64)
                .int("winding", r.winding_multiplicity)
                .num("residue_norm", r.residue_linv.op_norm())
                .num("residue_radius", r.residue_radius)
                .num("newton_residual", r.newton_residual)
                .finish()
        })
        .collect();
    for w in &report.warnings {
        lines.push(Record::new("warning", ctx.hash()).str("message", w).finish());
    }
    let rect = report.rect.unwrap_or(region.rect);
    lines.push(
        Record::new("search_summary", ctx.hash())
            .int("count", report.resonances.len() as i64)
            .cvec("rect", &[Complex64::new(rect.re_min, rect.im_min), Complex64::new(rect.re_max, rect.im_max)])
            .finish(),
    );
    ctx.sink.write_lines("resonances.jsonl", &lines)?;
    Ok(())
}

pub fn trajectory(ctx: &Context) -> Result<(), CliError> {
    let eps_grid = match ctx.over.eps_grid.clone().or_else(|| ctx.cfg.search.eps_grid.clone()) {
        Some(g) => g,
        None => {
            let e = ctx.spec().epsilon();
            (0..20).map(|k| e * 0.01_f64.powf(k as f64 / 19.0)).collect()
        }
    };
    let traj = trace_trajectory(ctx.spec(), &eps_grid, &ctx.region()?)?;
    let mut lines = vec!["config_hash,eps,index,re,im".to_string()];
    for p in &traj.points {
        for (i, r) in p.resonances.iter().enumerate() {
            lines.push(csv_row(&[
                ctx.hash().to_string(),
                fmt_f64(p.eps),
                i.to_string(),
                fmt_f64(r.zeta.re),
                fmt_f64(r.zeta.im),
            ]));
        }
    }
    ctx.sink.write_lines("trajectory.csv", &lines)?;
    for e in &traj.events {
        let TrajectoryEvent::Merge { eps, zeta } = e;
        eprintln!("merge at eps = {eps}: {zeta}");
    }
    for (i, (level, cst)) in traj.limits.iter().enumerate() {
        eprintln!("root {i}: approaches level {level}, |zeta - a| <= {cst:.6e} eps^2");
    }
    Ok(())
}

pub fn smatrix(ctx: &Context) -> Result<(), CliError> {
    let (start, stop, count) = ctx.over.lambda.unwrap_or((0.05, 50.0, 200));
    let spec = ctx.spec();
    let n = spec.n();
    let lambdas: Vec<f64> =
        (0..count).map(|k| if count == 1 { start } else { lerp(start, stop, k as f64 / (count - 1) as f64) }).collect();
    let rows: Vec<Result<(CMat, f64), Error>> = lambdas
        .par_iter()
        .map(|&l| Ok((s_k(spec, Complex64::new(l, 0.0), Side::OnAxis)?, unitarity_defect(spec, l)?)))
        .collect();
    let mut header = vec!["config_hash".to_string(), "lambda".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("s{i}{j}_re"));
            header.push(format!("s{i}{j}_im"));
        }
    }
    header.push("unitarity_defect".to_string());
    let mut lines = vec![csv_row(&header)];
    let mut worst = 0.0_f64;
    for (l, row) in lambdas.iter().zip(rows) {
        let (s, d) = row?;
        worst = worst.max(d);
        let mut f = vec![ctx.hash().to_string(), fmt_f64(*l)];
        for z in s.as_slice() {
            f.push(fmt_f64(z.re));
            f.push(fmt_f64(z.im));
        }
        f.push(fmt_f64(d));
        lines.push(csv_row(&f));
    }
    ctx.sink.write_lines("smatrix.csv", &lines)?;
    eprintln!("max unitarity defect {worst:.3e}");
    Ok(())
}

fn line_inner(grid: &Grid, dim: usize, u: &[Complex64], v: &[Complex64]) -> Complex64 {
    grid.weights()
        .iter()
        .enumerate()
        .map(|(i, w)| inner(&u[i * dim..(i + 1) * dim], &v[i * dim..(i + 1) * dim]) * *w)
        .sum()
}

pub fn gamov_cmd(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.spec();
    let mut lines = Vec::new();
    for r in ctx.resonances()? {
        for col in 0..r.geometric_multiplicity {
            let g = gamov(spec, &r, col)?;
            lines.push(
                Record::new("gamov", ctx.hash())
                    .complex("zeta", g.zeta)
                    .int("column", col as i64)
                    .cvec("e0", &g.e0)
                    .cvec("k0", &g.k0)
                    .finish(),
            );
            let grid = Grid::for_poles(ctx.cfg.grid.cutoff, &[g.zeta], ctx.cfg.grid.points)?;
            let f = GridFunction::gamov(&grid, &g);
            let ext = hardy_extension(&f)?;
            let norm2 = line_inner(&grid, f.dim, &ext, &ext).re;
            let rows: Vec<Result<(f64, f64), Error>> = ctx
                .cfg
                .grid
                .times
                .par_iter()
                .map(|&t| {
                    let tf = semigroup_apply(&f, t)?;
                    let tf_ext = if t == 0.0 { ext.clone() } else { tf.values };
                    Ok((t, line_inner(&grid, f.dim, &tf_ext, &ext).norm() / norm2))
                })
                .collect();
            for row in rows {
                let (t, ratio) = row?;
                lines.push(
                    Record::new("decay", ctx.hash())
                        .complex("zeta", g.zeta)
                        .int("column", col as i64)
                        .num("t", t)
                        .num("ratio", ratio)
                        .num("expected", (g.zeta.im * t).exp())
                        .finish(),
                );
            }
        }
    }
    ctx.sink.write_lines("gamov.jsonl", &lines)?;
    Ok(())
}

pub fn laurent(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.spec();
    let rs = ctx.resonances()?;
    let residues = all_residues(spec, &rs)?;
    let mut lines = Vec::new();
    for r in &residues {
        let source = match r.source {
            PoleSource::Resonance => "resonance",
            PoleSource::FormFactorPole => "form_factor_pole",
        };
        let holo = holomorphic_part_contour(spec, &residues, r.zeta, r.radius)?;
        lines.push(
            Record::new("residue", ctx.hash())
                .complex("zeta", r.zeta)
                .str("source", source)
                .cmat("s_minus1", &r.s_minus1)
                .num("norm", r.s_minus1.op_norm())
                .num("order_two_ratio", r.order_two_ratio())
                .num("radius", r.radius)
                .num("holo_contour", holo.max_abs())
                .finish(),
        );
        for k in 0..8 {
            let z = r.zeta + Complex64::from_polar(0.5 * r.radius, 2.0 * PI * k as f64 / 8.0);
            let (_, h) = laurent_split(spec, &residues, z)?;
            lines.push(
                Record::new("holo_sample", ctx.hash()).complex("zeta", r.zeta).complex("z", z).cmat("h", &h).finish(),
            );
        }
    }
    ctx.sink.write_lines("laurent.jsonl", &lines)?;
    Ok(())
}

pub fn project(ctx: &Context) -> Result<(), CliError> {
    let n = ctx.spec().n();
    let (terms, zs) = match &ctx.cfg.project {
        Some(p) => {
            let terms: Vec<RationalTest> = p
                .terms
                .iter()
                .map(|t| RationalTest { w: c(t.pole), k: t.k.iter().copied().map(c).collect() })
                .collect();
            if terms.iter().any(|t| t.k.len() != n) {
                return Err(CliError::Usage(format!("project.terms[].k must have {n} entries")));
            }
            (terms, p.z.iter().copied().map(c).collect::<Vec<_>>())
        }
        None => {
            let mut k = vec![Complex64::new(0.0, 0.0); n];
            k[0] = Complex64::new(1.0, 0.0);
            (vec![RationalTest { w: Complex64::new(0.0, -1.0), k }], vec![Complex64::new(0.0, 1.0)])
        }
    };
    if terms.is_empty() {
        return Err(CliError::Usage("project.terms must not be empty".into()));
    }
    let poles: Vec<Complex64> = terms.iter().map(|t| t.w).collect();
    let grid = Grid::for_poles(ctx.cfg.grid.cutoff, &poles, ctx.cfg.grid.points)?;
    let f = GridFunction::rational(&grid, terms.clone())?;
    let mut lines = Vec::new();
    for z in zs {
        let v = project_plus(&f, z)?;
        // Q₊ keeps the terms with lower poles and removes the others
        let mut exact = vec![Complex64::new(0.0, 0.0); n];
        for t in terms.iter().filter(|t| t.w.im < 0.0) {
            for (e, k) in exact.iter_mut().zip(t.eval(z)) {
                *e += k;
            }
        }
        let diff: Vec<Complex64> = v.iter().zip(&exact).map(|(a, b)| a - b).collect();
        lines.push(
            Record::new("projection", ctx.hash())
                .complex("z", z)
                .cvec("value", &v)
                .cvec("exact", &exact)
                .num("error", vnorm(&diff))
                .finish(),
        );
    }
    ctx.sink.write_lines("project.jsonl", &lines)?;
    Ok(())
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
    error: Option<String>,
}

fn check_max(name: &'static str, tolerance: f64, value: Result<f64, Error>) -> Check {
    match value {
        Ok(v) => Check { name, value: v, tolerance, passed: v <= tolerance, error: None },
        Err(e) => Check { name, value: f64::NAN, tolerance, passed: false, error: Some(e.to_string()) },
    }
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn max_over<T>(items: impl IntoIterator<Item = T>, mut f: impl FnMut(T) -> Result<f64, Error>) -> Result<f64, Error> {
    let mut worst = 0.0_f64;
    for x in items {
        worst = worst.max(f(x)?);
    }
    Ok(worst)
}

fn cut_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

/// Runs the invariant suite; the model must have a non-empty pole set.
pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.spec();
    let tol = &ctx.cfg.tolerances;
    let n = spec.n();
    let mut checks = Vec::new();
    let cz = |re: f64, im: f64| Complex64::new(re, im);

    checks.push(check_max(
        "jump",
        tol.jump,
        max_over(0..50, |k| {
            let z = cz(0.1 * 500.0_f64.powf(k as f64 / 49.0), 0.0);
            let j = phi(spec, z, SheetTag::MinusContinued)?.sub(&phi(spec, z, SheetTag::PlusContinued)?);
            Ok(j.sub(&spec.eval_g(z)?.scale(cz(0.0, 2.0 * PI))).max_abs())
        }),
    ));
    checks.push(check_max(
        "density_forms",
        tol.density,
        max_over(0..50, |k| Ok(density_forms(spec, 0.05 * 1000.0_f64.powf(k as f64 / 49.0))?.defect())),
    ));
    // sum rules including point masses below the continuum
    let opts = QuadOptions::new(1e-13, 1e-11);
    checks.push(check_max("sum_rules", tol.moments, {
        (|| {
            let bs = bound_states(spec)?;
            let mut m0 = spectral_moment(spec, 0, opts)?;
            let mut m1 = spectral_moment(spec, 1, opts)?;
            for b in &bs {
                m0 = m0.add(&b.weight);
                m1 = m1.add(&b.weight.scale_real(b.energy));
            }
            Ok(m0.sub(&CMat::identity(n)).max_abs().max(m1.sub(&CMat::from_real_diag(spec.a())).max_abs()))
        })()
    }));
    checks.push(check_max(
        "phi_oracle",
        tol.oracle,
        max_over(0..20, |k| {
            let z = cz(lerp(-6.0, 6.0, weyl(k, 0)), lerp(-6.0, 6.0, weyl(k, 1)));
            if cut_distance(z) < 1e-2 || spec.distance_to_poles(z) < 1e-2 {
                return Ok(0.0);
            }
            Ok(rel(&phi_quadrature(spec, z)?, &phi(spec, z, SheetTag::FirstSheet)?))
        }),
    ));
    checks.push(check_max(
        "unitarity",
        tol.unitarity,
        max_over(0..200, |k| unitarity_defect(spec, lerp(0.05, 50.0, k as f64 / 199.0))),
    ));
    checks.push(check_max(
        "reflection",
        tol.unitarity,
        max_over(0..20, |k| {
            let z = cz(lerp(0.1, 5.0, weyl(k, 2)), lerp(-3.0, -0.05, weyl(k, 3)));
            if spec.distance_to_poles(z) < 5e-2 {
                return Ok(0.0);
            }
            match reflection_defect(spec, z) {
                Err(Error::NearSingular { .. }) => Ok(0.0),
                other => other,
            }
        }),
    ));
    // lower bound on the smallest singular value, not an upper bound
    checks.push(match negative_axis_scan(spec, -50.0, -0.01, 2000) {
        Ok(s) => Check {
            name: "negative_axis",
            value: s.min_sigma_lower,
            tolerance: tol.negative_axis_sigma,
            passed: s.min_sigma_lower >= tol.negative_axis_sigma,
            error: None,
        },
        Err(e) => check_max("negative_axis", tol.negative_axis_sigma, Err(e)),
    });

    match search_resonances(spec, &ctx.region()?) {
        Err(e) => checks.push(check_max("resonance_search", 0.0, Err(e))),
        Ok(report) => {
            let rs = report.resonances;
            let residues = all_residues(spec, &rs);
            match residues {
                Err(e) => checks.push(check_max("residues", 0.0, Err(e))),
                Ok(residues) => {
                    checks.push(check_max(
                        "simple_poles",
                        tol.simple_pole,
                        Ok(residues.iter().map(|r| r.order_two_ratio()).fold(0.0, f64::max)),
                    ));
                    checks.push(check_max(
                        "holomorphic_remainder",
                        tol.simple_pole,
                        max_over(&residues, |r| {
                            Ok(holomorphic_part_contour(spec, &residues, r.zeta, r.radius)?.max_abs()
                                / r.s_minus1.max_abs().max(1.0))
                        }),
                    ));
                    checks.push(check_max(
                        "pole_sum",
                        tol.pole_sum,
                        max_over(0..3, |k| {
                            let w = cz(lerp(-2.0, 2.0, weyl(k, 0)), lerp(0.3, 2.0, weyl(k, 1)));
                            let z = cz(lerp(-3.0, 3.0, weyl(k, 2)), lerp(0.3, 3.0, weyl(k, 3)));
                            let kv: Vec<Complex64> = (0..n)
                                .map(|i| cz(lerp(-1.0, 1.0, weyl(k + i, 4)), lerp(-1.0, 1.0, weyl(k + i, 5))))
                                .collect();
                            let (lhs, rhs) =
                                pole_sum_check(spec, &residues, w, &kv, z, QuadOptions::new(1e-13, 1e-10))?;
                            let d: Vec<Complex64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                            let scale = vnorm(&rhs);
                            Ok(if scale == 0.0 { vnorm(&d) } else { vnorm(&d) / scale })
                        }),
                    ));
                }
            }
            checks.push(check_max("kernel_residue_angle", tol.angle, max_over(&rs, |r| kernel_residue_angle(spec, r))));
            let mut signs = Vec::new();
            checks.push(check_max(
                "dirac_pairing",
                tol.pairing,
                max_over(&rs, |r| {
                    let g = gamov(spec, r, 0)?;
                    max_over(0..3, |k| {
                        let w = cz(lerp(-3.0, 3.0, weyl(k, 0)), lerp(-3.0, -0.2, weyl(k, 1)));
                        let kv: Vec<Complex64> = (0..n).map(|i| cz(1.0, weyl(k + i, 2))).collect();
                        let p = dirac_pairing_check(&g, &RationalTest { w, k: kv }, 1e4)?;
                        signs.push(p.sign);
                        Ok(p.relative_error)
                    })
                }),
            ));
            let consistent = signs.iter().all(|s| *s == -1);
            checks.push(Check {
                name: "dirac_sign",
                value: signs.first().copied().unwrap_or(-1) as f64,
                tolerance: 0.0,
                passed: consistent,
                error: None,
            });
            checks.push(check_max(
                "eigenrelation",
                tol.eigenrelation,
                max_over(&rs, |r| {
                    let g = gamov(spec, r, 0)?;
                    let grid = Grid::for_poles(ctx.cfg.grid.cutoff, &[r.zeta], ctx.cfg.grid.points)?;
                    eigenrelation_defect(&GridFunction::gamov(&grid, &g), r.zeta, 1.0)
                }),
            ));
        }
    }

    let lines: Vec<String> = checks
        .iter()
        .map(|ch| {
            let r = Record::new("check", ctx.hash())
                .str("name", ch.name)
                .bool("passed", ch.passed)
                .num("value", ch.value)
                .num("tolerance", ch.tolerance);
            match &ch.error {
                Some(e) => r.str("error", e).finish(),
                None => r.finish(),
            }
        })
        .collect();
    ctx.sink.write_lines("verify.jsonl", &lines)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for ch in checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "FAIL {}: {} (tolerance {:e}){}",
            ch.name,
            ch.value,
            ch.tolerance,
            ch.error.as_deref().map(|e| format!(" {e}")).unwrap_or_default()
        );
    }
    if failed > 0 {
        Err(CliError::Verify(failed))
    } else {
        Ok(())
    }
}
