//! Acceptance suite: one test per criterion, each printing a single
//! `criterion NN [PASS|FAIL] ...` line. Criteria run one at a time so that
//! the wall-clock budgets measure the criterion alone.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use zrange_core::birman_schwinger::{
    bs_count_above_one, find_resonance_coupling, resonance_grid, TwoChannelSetup, TWO_CHANNEL_BOX,
    TWO_CHANNEL_NODES, Z_MIN,
};
use zrange_core::efimov::{
    effective_operator, efimov_study, find_thresholds, hyperradial_reduce, log_grid, mass_sweep_2d,
    AngularQuadrature, EffectiveKind, EfimovSettings, ThresholdSettings,
};
use zrange_core::free_resolvent::{discretize_h0, DEFAULT_MASS};
use zrange_core::grid::RadialGrid;
use zrange_core::konno_kuroda::{additivity_defect, assemble_resolvent_diff, cross_term_norm, direct_resolvent_diff};
use zrange_core::potential::{scale_potential, BasePotential, PotentialFamily, Profile, RadialPotential, ScalingLaw};
use zrange_core::resolvent_limit::{
    convergence_study, discrete_resonance, limit_grid, limit_w, random_test_functions, verify_limit_identity,
    LIMIT_NODES, LIMIT_RMAX,
};

static SERIAL: Mutex<()> = Mutex::new(());

struct Verdict {
    id: u32,
    name: &'static str,
    checks: Vec<(String, bool)>,
    start: Instant,
    budget: Option<Duration>,
}

impl Verdict {
    fn new(id: u32, name: &'static str, budget_secs: Option<u64>) -> Self {
        Self { id, name, checks: Vec::new(), start: Instant::now(), budget: budget_secs.map(Duration::from_secs) }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        if let Some(b) = self.budget {
            self.check(format!("{:.1}s < {}s", elapsed.as_secs_f64(), b.as_secs()), elapsed < b);
        }
        let pass = self.checks.iter().all(|c| c.1);
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let detail: Vec<&str> = self.checks.iter().map(|c| c.0.as_str()).collect();
        println!(
            "criterion {:02} [{}] {}: {}",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            self.name,
            detail.join("; ")
        );
        assert!(pass, "criterion {} failed: {}", self.id, failed.join("; "));
    }
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn base(profile: Profile, strength: f64) -> BasePotential {
    BasePotential::new(profile, strength, 1.0).unwrap()
}

/// Negative pivots of the LDL^T factorization of a symmetric tridiagonal
/// matrix shifted by `shift`: the number of eigenvalues below `-shift`.
fn sturm_count(diag: &[f64], off: &[f64], shift: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = diag[i] + shift - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

#[test]
fn criterion_01_birman_schwinger_counting() {
    let _g = serial();
    let mut v = Verdict::new(1, "Birman-Schwinger counting", Some(30));
    let law = ScalingLaw::unscaled(3).unwrap();
    let lambdas: Vec<f64> = (0..10).map(|k| 0.5 + 9.5 * k as f64 / 9.0).collect();
    let mut mismatches = Vec::new();
    for profile in [Profile::SquareWell, Profile::Gaussian] {
        for &lambda in &lambdas {
            let pot = scale_potential(&base(profile, lambda), &law).unwrap();
            let grid = resonance_grid(400, pot.support_cutoff()).unwrap();
            let vg = pot.on_grid(&grid);
            let h = discretize_h0(&grid, 3, DEFAULT_MASS).unwrap().minus_diagonal(vg.values(), "H").unwrap();
            let e = h.entries();
            let n = e.nrows();
            let diag: Vec<f64> = (0..n).map(|i| e[(i, i)]).collect();
            let off: Vec<f64> = (1..n).map(|i| e[(i, i - 1)]).collect();
            let bound = sturm_count(&diag, &off, Z_MIN);
            let bs = bs_count_above_one(&vg, Z_MIN, 3, DEFAULT_MASS).unwrap();
            if bs != bound {
                mismatches.push(format!("{profile:?} lambda={lambda}: {bs} vs {bound}"));
            }
        }
    }
    v.check(format!("20 couplings, mismatches {mismatches:?}"), mismatches.is_empty());
    v.finish();
}

#[test]
fn criterion_02_konno_kuroda_identity() {
    let _g = serial();
    let mut v = Verdict::new(2, "Konno-Kuroda identity", Some(10));
    let grid = Arc::new(RadialGrid::build(100, 10.0, zrange_core::grid::Spacing::Linear).unwrap());
    let pot = scale_potential(&base(Profile::SquareWell, 1.0), &ScalingLaw::unscaled(3).unwrap()).unwrap();
    let vg = pot.on_grid(&grid);
    for z in [0.5, 1.0, 2.0] {
        let kk = assemble_resolvent_diff(&vg, z, 3, DEFAULT_MASS).unwrap();
        let direct = direct_resolvent_diff(&vg, z, 3, DEFAULT_MASS).unwrap();
        let dist = kk.relative_distance(&direct).unwrap();
        v.check(format!("z={z}: {dist:.2e} < 1e-8"), dist < 1e-8);
    }
    v.finish();
}

/// RK4 for `u'' = -2 m lambda V(r) u`, `u(0) = 0`, `u'(0) = 1`; returns `u'(r_end)`.
fn shoot_slope(v: impl Fn(f64) -> f64, lambda: f64, r_end: f64, steps: usize) -> f64 {
    let h = r_end / steps as f64;
    let k = 2.0 * DEFAULT_MASS * lambda;
    let f = |r: f64, y: [f64; 2]| [y[1], -k * v(r) * y[0]];
    let mut y = [0.0, 1.0];
    for i in 0..steps {
        let r = i as f64 * h;
        let a = f(r, y);
        let b = f(r + 0.5 * h, [y[0] + 0.5 * h * a[0], y[1] + 0.5 * h * a[1]]);
        let c = f(r + 0.5 * h, [y[0] + 0.5 * h * b[0], y[1] + 0.5 * h * b[1]]);
        let d = f(r + h, [y[0] + h * c[0], y[1] + h * c[1]]);
        y[0] += h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]);
        y[1] += h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]);
    }
    y[1]
}

#[test]
fn criterion_03_critical_coupling() {
    let _g = serial();
    let mut v = Verdict::new(3, "critical coupling of the unit square well", Some(5));
    let rep =
        find_resonance_coupling(&base(Profile::SquareWell, 1.0), &ScalingLaw::unscaled(3).unwrap(), (1.0, 5.0)).unwrap();
    let exact = PI * PI / 4.0;
    // zero-energy resonance: the exterior solution is flat, u'(1) = 0
    let well = |r: f64| if r <= 1.0 { 1.0 } else { 0.0 };
    let (mut lo, mut hi) = (1.0, 4.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shoot_slope(well, mid, 1.0, 4000) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shooting = 0.5 * (lo + hi);
    let rel = (rep.lambda_critical / exact - 1.0).abs();
    v.check(format!("lambda_c={:.8} vs pi^2/4 rel {rel:.1e} < 1e-4", rep.lambda_critical), rel < 1e-4);
    let rel_shoot = (rep.lambda_critical / shooting - 1.0).abs();
    v.check(format!("shooting oracle {shooting:.8} rel {rel_shoot:.1e}"), rel_shoot < 1e-4);
    v.finish();
}

const EPSILONS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

#[test]
fn criterion_04_cross_term_decay() {
    let _g = serial();
    let mut v = Verdict::new(4, "cross-term decay", Some(10));
    let v1 = PotentialFamily::contact(base(Profile::Gaussian, 1.0), 3);
    let u = PotentialFamily::weak_contact(base(Profile::Gaussian, 1.0), 3);
    let rep = cross_term_norm(&v1, &[u], &EPSILONS).unwrap();
    v.check(format!("strictly decreasing {:?}", rep.values), rep.strictly_decreasing());
    // for these profiles the norm equals eps^(1/2) times its eps = 1 value
    let oracle = rep.values[0] * (EPSILONS[4] / EPSILONS[0]).sqrt();
    v.check(
        format!("scaling oracle eps^(1/2): last {:.6e} vs {oracle:.6e}", rep.values[4]),
        (rep.values[4] / oracle - 1.0).abs() < 1e-6,
    );
    v.check(format!("fitted exponent {:.4} >= 0.9", rep.fitted_exponent), rep.fitted_exponent >= 0.9);
    v.finish();
}

#[test]
fn criterion_05_additivity_defect() {
    let _g = serial();
    let mut v = Verdict::new(5, "additivity defect", Some(10));
    let v2 = PotentialFamily::weak_contact(base(Profile::Gaussian, 1.0), 3);
    let v3 = PotentialFamily::unscaled(BasePotential::new(Profile::Gaussian, 2.0, 1.5).unwrap(), 3);
    let rep = additivity_defect(&v2, &v3, &EPSILONS).unwrap();
    let first = rep.values[0] / EPSILONS[0];
    let worst = rep.values.iter().zip(&EPSILONS).map(|(d, e)| d / e / first).fold(0.0, f64::max);
    v.check(format!("max (defect/eps)/(defect/eps at 0.2) = {worst:.4} <= 2"), worst <= 2.0);
    v.finish();
}

#[test]
fn criterion_06_two_resonance_matrix() {
    let _g = serial();
    let mut v = Verdict::new(6, "two-resonance matrix", Some(20));
    let setup =
        TwoChannelSetup::new(&base(Profile::Gaussian, 1.0), TWO_CHANNEL_NODES, TWO_CHANNEL_BOX, DEFAULT_MASS).unwrap();
    let ladder = [8.0 * Z_MIN, 4.0 * Z_MIN, 2.0 * Z_MIN, Z_MIN];
    let mats: Vec<_> = ladder.iter().map(|&z| setup.matrix(z).unwrap()).collect();
    let diag: Vec<f64> = mats.iter().map(|m| m.diagonal()[0].abs()).collect();
    let shrinking = diag.windows(2).all(|w| w[1] < w[0]);
    let (xs, ys): (Vec<f64>, Vec<f64>) = ladder.iter().zip(&diag).map(|(z, d)| (z.ln(), d.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    v.check(format!("|diagonal| decreasing along z ladder, log slope {slope:.3} > 0"), shrinking && slope > 0.0);
    let last = mats.last().unwrap();
    let ratio = last.off_diagonal()[0].abs() / last.diagonal()[0].abs();
    v.check(format!("off/diagonal at z_min {ratio:.3e} >= 100"), ratio >= 100.0);
    v.check(format!("determinant {:.3e} != 0", last.determinant()), last.determinant() != 0.0);
    v.finish();
}

#[test]
fn criterion_07_limit_resolvent() {
    let _g = serial();
    let mut v = Verdict::new(7, "limit resolvent at 64x64", Some(60));
    let g = limit_grid(LIMIT_NODES, LIMIT_RMAX).unwrap();
    let base = base(Profile::Gaussian, 1.0);
    let fs = random_test_functions(&g, &g, 5, 2024);
    let rep = convergence_study(&base, &EPSILONS, 1.0, &g, &fs, DEFAULT_MASS).unwrap();
    v.check("monotone decrease over 4 halvings, 5 functions", rep.monotone);
    let min_red = rep.reductions.iter().copied().fold(f64::INFINITY, f64::min);
    v.check(format!("min reduction {min_red:.2} >= 4"), min_red >= 4.0);
    let res = discrete_resonance(&base, EPSILONS[0], &g, DEFAULT_MASS).unwrap();
    let w = limit_w(1.0, &res.profile, &res.potential, &g, &g, DEFAULT_MASS).unwrap();
    let id = verify_limit_identity(Some(&w), w.free_hamiltonian(), w.hamiltonian(), 1.0, &fs);
    v.check(format!("identity residual {:.2e} < 1e-6", id.max_residual), id.max_residual < 1e-6);
    v.finish();
}

/// Root of `t coth(pi t / 2) = c`, the imaginary Mellin exponent of the
/// three-dimensional contact image at coupling `c`.
fn mellin_root_3d(c: f64) -> f64 {
    let (mut lo, mut hi) = (1e-9, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid / (0.5 * PI * mid).tanh() < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_08_efimov_ratio() {
    let _g = serial();
    let mut v = Verdict::new(8, "Efimov geometric ratio at 2 C1", Some(60));
    let th = find_thresholds(EffectiveKind::ContactImage, 3, (0.05, 5.0), &ThresholdSettings::default()).unwrap();
    let c = 2.0 * th.c1;
    let rep = efimov_study(c, 3, &EfimovSettings::default()).unwrap();
    v.check(
        format!("n=2000, deviation over eigenvalues 3-6 {:.3}% < 3%", 100.0 * rep.deviation),
        rep.deviation < 0.03,
    );
    let oracle = (-PI / mellin_root_3d(c)).exp();
    v.check(
        format!("ratio {:.5} vs Mellin oracle {oracle:.5}", rep.ratio),
        (rep.ratio / oracle - 1.0).abs() < 0.03,
    );
    v.check(
        format!("r_max x10 adds {} states, new ratio {:.5} consistent", rep.added_states, rep.added_ratio),
        rep.added_states >= 1 && rep.added_consistent,
    );
    v.finish();
}

#[test]
fn criterion_09_thresholds() {
    let _g = serial();
    let mut v = Verdict::new(9, "thresholds C0 and C1", Some(120));
    for d in [2, 3] {
        let rep = find_thresholds(EffectiveKind::ContactImage, d, (0.05, 5.0), &ThresholdSettings::default()).unwrap();
        v.check(
            format!("d={d}: C0={:.5} C1={:.5} drift {:.3}% < 1%", rep.c0, rep.c1, 100.0 * rep.grid_refinement_drift),
            rep.grid_refinement_drift < 0.01,
        );
        let count = |c: f64, r_min: f64| {
            let g = log_grid(r_min, 1e2, 20).unwrap();
            effective_operator(EffectiveKind::ContactImage, c, d, &g, 0.5).unwrap().spectrum().unwrap().count_negative
        };
        let below = count(0.9 * rep.c0, 1e-7);
        let between = (count(0.5 * (rep.c0 + rep.c1), 1e-6), count(0.5 * (rep.c0 + rep.c1), 1e-7));
        let above = (count(1.5 * rep.c1, 1e-6), count(1.5 * rep.c1, 1e-7));
        v.check(
            format!(
                "d={d}: counts below C0 {below}, between {between:?}, above C1 {above:?} per decade of cutoff"
            ),
            rep.c0 <= rep.c1 && below == 0 && between.1 - between.0 <= 1 && above.1 > above.0 && above.1 > between.1,
        );
    }
    v.finish();
}

#[test]
fn criterion_10_mass_sweep() {
    let _g = serial();
    let mut v = Verdict::new(10, "planar mass sweep", Some(30));
    let grid = log_grid(1e-6, 1e2, 40).unwrap();
    let masses = [1.0, 2.0, 4.0, 8.0, 16.0];
    let rep = mass_sweep_2d(&masses, 1.0, &grid).unwrap();
    let counts: Vec<usize> = rep.points.iter().map(|p| p.resolved).collect();
    v.check(format!("resolved counts {counts:?} nondecreasing"), rep.count_nondecreasing);
    let max_e: Vec<String> = rep.points.iter().map(|p| format!("{:.4}", p.max_abs_energy)).collect();
    v.check(format!("max|E| {max_e:?} nonincreasing"), rep.max_energy_nonincreasing);
    // r -> r/m turns (1/m)(-Laplacian) - c/r into m ((-Laplacian) - c/r) on the dilated grid
    let mut worst = 0.0f64;
    for p in &rep.points {
        let dilated = Arc::new(grid.dilate(p.mass).unwrap());
        let unit = effective_operator(EffectiveKind::ThreeBody2d, 1.0, 2, &dilated, 1.0).unwrap().spectrum().unwrap();
        for (k, e) in p.energies.iter().enumerate() {
            worst = worst.max((e / (p.mass * unit.eigenvalues[k]) - 1.0).abs());
        }
    }
    v.check(format!("dilation oracle deviation {worst:.2e} < 1%"), worst < 0.01);
    v.check(
        format!("similarity to m=1 spectrum {:.2e} < 1%", rep.max_similarity_deviation),
        rep.max_similarity_deviation < 0.01,
    );
    v.finish();
}

#[test]
fn criterion_11_hyperradial_exponent() {
    let _g = serial();
    let mut v = Verdict::new(11, "hyperradial reduction", Some(10));
    let quad = AngularQuadrature::default();
    let rep = hyperradial_reduce(&quad, &[0.01, 0.1, 1.0, 10.0]).unwrap();
    v.check(format!("exponent {:.6} within -1 +- 0.05", rep.exponent), (rep.exponent + 1.0).abs() <= 0.05);
    v.check(format!("prefactor {:.4} < 0", rep.prefactor), rep.prefactor < 0.0);
    v.check(format!("angular refinement change {:.1e}", rep.refinement_change), !rep.flagged);
    v.finish();
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_cli(command: &str, config: &Path, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_zrange"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{command}: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join(format!("{command}.csv"))).unwrap()
}

const COMMANDS: [&str; 11] = [
    "scale-norms",
    "resonance",
    "kk-verify",
    "cross-term",
    "additivity",
    "independence",
    "limit-resolvent",
    "efimov",
    "thresholds",
    "kernel22",
    "mass-sweep",
];

#[test]
fn criterion_12_cli_determinism() {
    let _g = serial();
    let mut v = Verdict::new(12, "CLI determinism", None);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in COMMANDS {
        let config = workspace_root().join("configs").join(format!("{cmd}.json"));
        let first = run_cli(cmd, &config, a.path());
        let second = run_cli(cmd, &config, b.path());
        v.check(format!("{cmd} {} bytes", first.len()), !first.is_empty() && first == second);
    }
    v.finish();
}
