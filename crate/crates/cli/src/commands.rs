//! One runner per command; each turns a validated config into a [`Study`].

use std::sync::Arc;

use zrange_core::birman_schwinger::{
    bs_count_above_one, find_resonance_coupling_with, resonance_grid, TwoChannelSetup, TWO_CHANNEL_BOX,
    TWO_CHANNEL_NODES, Z_MIN,
};
use zrange_core::efimov::{
    efimov_study, find_thresholds, hyperradial_reduce, kernel22, mass_sweep_2d, AngularQuadrature,
    EffectiveKind, EfimovSettings, KernelValue, ThresholdSettings,
};
use zrange_core::free_resolvent::discretize_h0;
use zrange_core::grid::{RadialGrid, Spacing};
use zrange_core::konno_kuroda::{
    additivity_defect, assemble_resolvent_diff, cross_term_norm, direct_resolvent_diff, fit_power_law,
    independence_spectrum_check,
};
use zrange_core::potential::{
    cell_averages, scale_potential, sphere_area, BasePotential, PotentialFamily, Profile, RadialPotential, ScalingLaw,
};
use zrange_core::resolvent_limit::{
    convergence_study, discrete_resonance, limit_grid, limit_w, random_test_functions, verify_limit_identity,
    LIMIT_RMAX,
};
use zrange_core::spectrum::eig_spectrum;

use crate::config::{Command, MomentumPair, PartnerSpec, RunConfig};
use crate::report::{format_real, Cell, ReportRow, Study};

/// Relative distance above which a resolvent reconstruction is flagged.
pub const KK_TOL: f64 = 1e-8;
/// Successive-ratio spread above which an Efimov row is flagged.
pub const RATIO_TOL: f64 = 0.03;
/// Identity residual above which the limit study is flagged.
pub const IDENTITY_TOL: f64 = 1e-6;

const CONTACT_EPSILONS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

pub fn run(config: &RunConfig) -> Study {
    match config.command() {
        Command::ScaleNorms => scale_norms(config),
        Command::Resonance => resonance(config),
        Command::KkVerify => kk_verify(config),
        Command::CrossTerm => cross_term(config),
        Command::Additivity => additivity(config),
        Command::Independence => independence(config),
        Command::LimitResolvent => limit_resolvent(config),
        Command::Efimov => efimov(config),
        Command::Thresholds => thresholds(config),
        Command::Kernel22 => kernel(config),
        Command::MassSweep => mass_sweep(config),
    }
}

fn potential(c: &RunConfig) -> BasePotential {
    c.potential.expect("validated")
}

fn dim(c: &RunConfig, default: u32) -> u32 {
    c.law.map(|l| l.dim).unwrap_or(default)
}

fn family(base: BasePotential, exponent: Option<u32>, dim: u32) -> PotentialFamily {
    PotentialFamily { base, exponent, dim }
}

fn partner(c: &RunConfig, default: PartnerSpec) -> PartnerSpec {
    c.partner.unwrap_or(default)
}

fn gaussian(strength: f64, range: f64) -> BasePotential {
    BasePotential { profile: Profile::Gaussian, strength, range }
}

fn epsilons(c: &RunConfig, default: &[f64]) -> Vec<f64> {
    c.sweep.epsilons.clone().unwrap_or_else(|| default.to_vec())
}

fn scale_norms(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let base = potential(c);
    let law = c.law.expect("validated");
    let eps = epsilons(c, &[law.epsilon]);
    let mut l1s = Vec::new();
    let mut l2s = Vec::new();
    for &e in &eps {
        let row = ReportRow::new().param("epsilon", e);
        let scaled = match ScalingLaw::new(law.exponent, e, law.dim).and_then(|l| scale_potential(&base, &l)) {
            Ok(s) => s,
            Err(err) => {
                study.push(row.error(err));
                continue;
            }
        };
        let norms = scaled.norms();
        l1s.push(norms.l1);
        l2s.push(norms.l2);
        let grid = c.grid().build(scaled.support_cutoff(), Spacing::Linear);
        let row = row
            .metric("l1", norms.l1)
            .metric("l2", norms.l2)
            .metric("rollnik", norms.rollnik.map(Cell::Real).unwrap_or_else(|| Cell::from("undefined")));
        match grid {
            Ok(g) => {
                let g = Arc::new(g);
                let grid_l1 = sphere_area(law.dim) * cell_averages(&scaled, &g, law.dim).integrate(law.dim);
                study.push(row.metric("grid_l1", grid_l1).flag_if((grid_l1 / norms.l1 - 1.0).abs() > 1e-2));
            }
            Err(err) => study.push(row.error(err)),
        }
    }
    if eps.len() >= 2 && l1s.len() == eps.len() {
        study.aggregate("l1_exponent", fit_power_law(&eps, &l1s));
        study.aggregate("l2_exponent", fit_power_law(&eps, &l2s));
    }
    study
}

fn resonance(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let base = potential(c);
    let m = c.mass();
    let law = c.law.unwrap_or(ScalingLaw { exponent: None, epsilon: 1.0, dim: 3 });
    let bracket = c.sweep.bracket.unwrap_or((1e-6, 1e6));
    let n = c.grid().nodes();
    for &e in &epsilons(c, &[law.epsilon]) {
        let row = ReportRow::new().param("study", "critical").param("epsilon", e);
        let result = ScalingLaw::new(law.exponent, e, law.dim)
            .and_then(|l| find_resonance_coupling_with(&base, &l, bracket, n, m));
        study.push(match result {
            Ok(rep) => row
                .metric("lambda_critical", rep.lambda_critical)
                .metric("bs_top", rep.bs_top_eigenvalue)
                .metric("top_gap", rep.top_gap)
                .metric("boundary_c", rep.boundary_c)
                .metric("boundary_d", rep.boundary_d)
                .metric("fit_residual", rep.fit.residual)
                .flag_if(!rep.fit.asymptotic),
            Err(err) => row.error(err),
        });
    }
    if let Some(lambdas) = &c.sweep.lambdas {
        let mut matched = 0;
        for &lambda in lambdas {
            let row = ReportRow::new().param("study", "count").param("lambda", lambda);
            let counts = (|| {
                let scaled = scale_potential(&base.with_strength(lambda), &ScalingLaw::unscaled(law.dim)?)?;
                let grid = resonance_grid(n, scaled.support_cutoff())?;
                let v = scaled.on_grid(&grid);
                let h = discretize_h0(&grid, law.dim, m)?.minus_diagonal(v.values(), "H")?;
                let bound = eig_spectrum(&h)?.count_below(-Z_MIN);
                Ok::<_, zrange_core::Error>((bs_count_above_one(&v, Z_MIN, law.dim, m)?, bound))
            })();
            study.push(match counts {
                Ok((bs, bound)) => {
                    matched += usize::from(bs == bound);
                    row.metric("bs_count", bs).metric("bound_states", bound).flag_if(bs != bound)
                }
                Err(err) => row.error(err),
            });
        }
        study.aggregate("count_matches", matched);
    }
    if let Some(zs) = &c.sweep.z {
        match TwoChannelSetup::new(&base, TWO_CHANNEL_NODES, TWO_CHANNEL_BOX, m) {
            Ok(setup) => {
                let mut diag = Vec::new();
                for &z in zs {
                    let row = ReportRow::new().param("study", "two_resonance").param("z", z);
                    study.push(match setup.matrix(z) {
                        Ok(t) => {
                            let d = t.diagonal()[0];
                            let off = t.off_diagonal()[0];
                            diag.push(d.abs());
                            row.metric("diagonal", d)
                                .metric("off_diagonal", off)
                                .metric("determinant", t.determinant())
                                .metric("off_over_diagonal", off.abs() / d.abs())
                                .flag_if(t.determinant() == 0.0)
                        }
                        Err(err) => row.error(err),
                    });
                }
                if diag.len() == zs.len() && zs.len() >= 2 {
                    study.aggregate("diagonal_slope", fit_power_law(zs, &diag));
                }
                study.aggregate("two_channel_lambda", setup.lambda_critical);
            }
            Err(err) => study.push(ReportRow::new().param("study", "two_resonance").error(err)),
        }
    }
    study
}

fn unscaled_or_law(c: &RunConfig) -> zrange_core::Result<(Arc<RadialGrid>, ScalingLaw)> {
    let law = c.law.unwrap_or(ScalingLaw { exponent: None, epsilon: 1.0, dim: 3 });
    law.regime()?;
    Ok((Arc::new(c.grid().build(10.0, Spacing::Linear)?), law))
}

fn kk_verify(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let m = c.mass();
    let zs = c.sweep.z.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let setup = unscaled_or_law(c).and_then(|(g, law)| Ok(scale_potential(&potential(c), &law)?.on_grid(&g)));
    let v = match setup {
        Ok(v) => v,
        Err(err) => {
            study.push(ReportRow::new().error(err));
            return study;
        }
    };
    let d = dim(c, 3);
    let mut worst = 0.0f64;
    for &z in &zs {
        let row = ReportRow::new().param("z", z);
        let dist = assemble_resolvent_diff(&v, z, d, m)
            .and_then(|kk| kk.relative_distance(&direct_resolvent_diff(&v, z, d, m)?));
        study.push(match dist {
            Ok(x) => {
                worst = worst.max(x);
                row.metric("relative_distance", x).flag_if(x >= KK_TOL)
            }
            Err(err) => row.error(err),
        });
    }
    study.aggregate("max_relative_distance", worst);
    study
}

fn defect_rows(study: &mut Study, rep: &zrange_core::konno_kuroda::DefectReport, name: &str) {
    let first = rep.values[0] / rep.epsilons[0];
    for (k, (&e, &v)) in rep.epsilons.iter().zip(&rep.values).enumerate() {
        study.push(
            ReportRow::new()
                .param("epsilon", e)
                .metric(name, v)
                .metric("over_epsilon", v / e)
                .metric("relative_to_first", v / e / first)
                .flag_if(rep.flagged[k]),
        );
    }
    study.aggregate("fitted_exponent", rep.fitted_exponent);
    study.aggregate("strictly_decreasing", rep.strictly_decreasing());
}

fn cross_term(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let d = dim(c, 3);
    let v1 = PotentialFamily::contact(potential(c), d);
    let p = partner(c, PartnerSpec { potential: gaussian(1.0, 1.0), exponent: Some(d - 1) });
    match cross_term_norm(&v1, &[family(p.potential, p.exponent, d)], &epsilons(c, &CONTACT_EPSILONS)) {
        Ok(rep) => defect_rows(&mut study, &rep, "norm"),
        Err(err) => study.push(ReportRow::new().error(err)),
    }
    study
}

fn additivity(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let d = dim(c, 3);
    let v2 = PotentialFamily::weak_contact(potential(c), d);
    let p = partner(c, PartnerSpec { potential: gaussian(2.0, 1.5), exponent: None });
    match additivity_defect(&v2, &family(p.potential, p.exponent, d), &epsilons(c, &CONTACT_EPSILONS)) {
        Ok(rep) => {
            let bound = rep.values.iter().zip(&rep.epsilons).map(|(v, e)| v / e).fold(0.0, f64::max)
                / (rep.values[0] / rep.epsilons[0]);
            defect_rows(&mut study, &rep, "defect");
            study.aggregate("max_relative_to_first", bound);
        }
        Err(err) => study.push(ReportRow::new().error(err)),
    }
    study
}

fn independence(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let d = dim(c, 3);
    let p = partner(c, PartnerSpec { potential: gaussian(1.0, 1.0), exponent: Some(d - 1) });
    let families = [PotentialFamily::contact(potential(c), d), family(p.potential, p.exponent, d)];
    let z = c.sweep.z.as_ref().map(|z| z[0]).unwrap_or(1.0);
    for &e in &epsilons(c, &CONTACT_EPSILONS[..4]) {
        let row = ReportRow::new().param("epsilon", e).param("z", z);
        study.push(match independence_spectrum_check(&families, e, z, c.grid().nodes(), c.mass()) {
            Ok(rep) => row
                .metric("discrepancy", rep.discrepancy)
                .metric("actual_top", rep.actual[0])
                .metric("predicted_top", rep.predicted[0]),
            Err(err) => row.error(err),
        });
    }
    study
}

fn limit_resolvent(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let base = c.potential.unwrap_or(gaussian(1.0, 1.0));
    let m = c.mass();
    let eps = epsilons(c, &CONTACT_EPSILONS);
    let z = c.sweep.z.as_ref().map(|z| z[0]).unwrap_or(1.0);
    let count = c.sweep.test_functions.unwrap_or(5);
    let seed = c.sweep.seed.unwrap_or(1);
    let result = (|| {
        let grid = limit_grid(c.grid().nodes(), c.grid().r_max_or(LIMIT_RMAX))?;
        let fs = random_test_functions(&grid, &grid, count, seed);
        let conv = convergence_study(&base, &eps, z, &grid, &fs, m)?;
        let res = discrete_resonance(&base, eps[0], &grid, m)?;
        let w = limit_w(z, &res.profile, &res.potential, &grid, &grid, m)?;
        let id = verify_limit_identity(Some(&w), w.free_hamiltonian(), w.hamiltonian(), z, &fs);
        Ok::<_, zrange_core::Error>((conv, id))
    })();
    match result {
        Ok((conv, id)) => {
            for (k, &e) in conv.epsilons.iter().enumerate() {
                let ds = &conv.discrepancies[k];
                let max = ds.iter().copied().fold(0.0, f64::max);
                let mean = ds.iter().sum::<f64>() / ds.len() as f64;
                study.push(
                    ReportRow::new()
                        .param("epsilon", e)
                        .param("z", z)
                        .metric("lambda_critical", conv.lambdas[k])
                        .metric("mean_discrepancy", mean)
                        .metric("max_discrepancy", max)
                        .flag_if(!conv.monotone),
                );
            }
            let min_reduction = conv.reductions.iter().copied().fold(f64::INFINITY, f64::min);
            study.aggregate("monotone", conv.monotone);
            study.aggregate("min_reduction", min_reduction);
            study.aggregate("identity_residual", id.max_residual);
            study.aggregate("identity_ok", id.max_residual < IDENTITY_TOL);
        }
        Err(err) => study.push(ReportRow::new().param("z", z).error(err)),
    }
    study
}

fn threshold_settings(c: &RunConfig) -> ThresholdSettings {
    let g = c.grid();
    let r_max = g.r_max_or(1e2);
    let r_min = g.r_min().unwrap_or(1e-5);
    let decades = (r_max / r_min).log10().round().max(1.0);
    let per_decade = ((g.nodes().saturating_sub(1)) as f64 / decades).round().max(1.0) as usize;
    ThresholdSettings { r_max, decades: decades as u32, nodes_per_decade: per_decade }
}

fn efimov(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let d = dim(c, 3);
    let g = c.grid();
    let defaults = EfimovSettings::default();
    let settings = EfimovSettings {
        n: g.nodes(),
        r_min: g.r_min().unwrap_or(defaults.r_min),
        r_max: g.r_max_or(defaults.r_max),
        window: c.sweep.window.unwrap_or(defaults.window),
    };
    let mut couplings = c.sweep.couplings.clone().unwrap_or_default();
    let multiples = match (&c.sweep.couplings, &c.sweep.c1_multiples) {
        (Some(_), None) => Vec::new(),
        (_, m) => m.clone().unwrap_or_else(|| vec![2.0]),
    };
    if !multiples.is_empty() {
        let bracket = c.sweep.bracket.unwrap_or((0.05, 5.0));
        match find_thresholds(EffectiveKind::ContactImage, d, bracket, &ThresholdSettings::default()) {
            Ok(th) => {
                study.aggregate("c1", th.c1);
                couplings.extend(multiples.iter().map(|k| k * th.c1));
            }
            Err(err) => {
                study.push(ReportRow::new().error(err));
                return study;
            }
        }
    }
    for &coupling in &couplings {
        let row = ReportRow::new().param("C", coupling);
        let result = efimov_study(coupling, d, &settings);
        if let Ok(rep) = &result {
            study.aggregate(&format!("added_states@{}", format_real(coupling)), rep.added_states);
            study.aggregate(&format!("added_consistent@{}", format_real(coupling)), rep.added_consistent);
        }
        study.push(match result {
            Ok(rep) => row
                .metric("n_negative", rep.n_negative)
                .metric("ratio", rep.ratio)
                .metric("deviation", rep.deviation)
                .metric("classification", serde_json::to_value(rep.classification).unwrap().as_str().unwrap())
                .metric("grid_n", rep.grid_n)
                .metric("r_min", rep.r_min)
                .metric("r_max", rep.r_max)
                .flag_if(rep.deviation >= RATIO_TOL || !rep.added_consistent),
            Err(err) => row
                .metric("grid_n", settings.n)
                .metric("r_min", settings.r_min)
                .metric("r_max", settings.r_max)
                .error(err),
        });
    }
    study
}

fn thresholds(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let settings = threshold_settings(c);
    let bracket = c.sweep.bracket.unwrap_or((0.05, 5.0));
    for &d in c.sweep.dims.as_deref().unwrap_or(&[2, 3]) {
        let row = ReportRow::new().param("d", d);
        study.push(match find_thresholds(EffectiveKind::ContactImage, d, bracket, &settings) {
            Ok(rep) => row
                .metric("c0", rep.c0)
                .metric("c1", rep.c1)
                .metric("drift", rep.grid_refinement_drift)
                .metric("c0_coarse", rep.levels[0].c0)
                .metric("c1_coarse", rep.levels[0].c1)
                .metric("ordered", rep.c0 <= rep.c1)
                .flag_if(rep.flagged),
            Err(err) => row.error(err),
        });
    }
    study.aggregate("nodes_per_decade", settings.nodes_per_decade);
    study.aggregate("decades", settings.decades);
    study
}

fn kernel(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let unit = MomentumPair { q1: [1.0, 0.0], q2: [1.0, 0.0] };
    for p in c.sweep.points.as_deref().unwrap_or(&[unit]) {
        let row = ReportRow::new()
            .param("study", "kernel")
            .param("q1x", p.q1[0])
            .param("q1y", p.q1[1])
            .param("q2x", p.q2[0])
            .param("q2y", p.q2[1]);
        study.push(match kernel22(p.q1, p.q2) {
            KernelValue::Value(v) => row.metric("kernel", v),
            KernelValue::Pole => row.metric("kernel", "pole").flag_if(true),
        });
    }
    if let Some(radii) = &c.sweep.radii {
        let quad = AngularQuadrature {
            regularization: c.sweep.regularization.unwrap_or(AngularQuadrature::default().regularization),
            ..AngularQuadrature::default()
        };
        match hyperradial_reduce(&quad, radii) {
            Ok(rep) => {
                for (&r, &p) in rep.radii.iter().zip(&rep.profile) {
                    study.push(ReportRow::new().param("study", "hyperradial").param("r", r).metric("profile", p).flag_if(rep.flagged));
                }
                study.aggregate("exponent", rep.exponent);
                study.aggregate("prefactor", rep.prefactor);
                study.aggregate("refinement_change", rep.refinement_change);
            }
            Err(err) => study.push(ReportRow::new().param("study", "hyperradial").error(err)),
        }
    }
    study
}

fn mass_sweep(c: &RunConfig) -> Study {
    let mut study = Study::default();
    let masses = c.sweep.masses.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    let coupling = c.sweep.couplings.as_ref().map(|v| v[0]).unwrap_or(1.0);
    let g = c.grid();
    let grid = RadialGrid::build(g.nodes(), g.r_max_or(1e2), Spacing::Logarithmic { r_min: g.r_min().unwrap_or(1e-4) })
        .map(Arc::new);
    let result = grid.and_then(|grid| mass_sweep_2d(&masses, coupling, &grid));
    match result {
        Ok(rep) => {
            for p in &rep.points {
                study.push(
                    ReportRow::new()
                        .param("m", p.mass)
                        .param("c", coupling)
                        .metric("count_negative", p.count_negative)
                        .metric("resolved", p.resolved)
                        .metric("max_abs_energy", p.max_abs_energy)
                        .metric("ground", p.energies.first().copied().unwrap_or(f64::NAN))
                        .metric("similarity_deviation", p.similarity_deviation)
                        .flag_if(p.flagged),
                );
            }
            study.aggregate("count_nondecreasing", rep.count_nondecreasing);
            study.aggregate("max_energy_nonincreasing", rep.max_energy_nonincreasing);
            study.aggregate("max_similarity_deviation", rep.max_similarity_deviation);
        }
        Err(err) => study.push(ReportRow::new().param("c", coupling).error(err)),
    }
    study
}
