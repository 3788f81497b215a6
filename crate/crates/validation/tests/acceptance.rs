//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use mesoeig::fixtures;
use mesoeig::geometry::{Cluster, Domain, Inclusion, Vec3};
use mesoeig::homogenize::{homogenized_residuals, HomogenizedBallSolution, Stencil};
use mesoeig::kernels::{BallKernel, NeumannKernel, QuadratureSpec};
use mesoeig::oracle::{
    annulus_first_eigenvalue, dilute_field, dilute_lambda, loglog_slope, mc_volume_integral,
    AnnulusProblem, Integrand,
};
use mesoeig::spectral::{eigenfield_leading, lambda_leading, solve, SolveOptions};
use mesoeig_validation::{peak_rss_mb, round_sig, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Max inclusion-boundary |u| for the eight-sphere geometry. The oracle run
/// gave 1.19e-3 against a bound shape eps^2 d^-3 of about 6.3e-3.
const TABLE1_RESIDUAL_THRESHOLD: f64 = 1e-2;

fn centered(a: f64, big_r: f64) -> Cluster {
    Cluster::build(
        vec![Inclusion::new(Vec3::zeros(), a).unwrap()],
        Domain::ball(big_r).unwrap(),
    )
    .unwrap()
}

fn table1() -> Outcome {
    let start = Instant::now();
    let mut values = Vec::new();
    for row in 1..=3 {
        let cl = fixtures::table1(row).unwrap();
        let k = BallKernel::new(*cl.domain());
        let s = solve(cl, k, &SolveOptions::default()).unwrap();
        values.push(s.spectral.lambda1);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let digits_ok = values
        .iter()
        .zip(fixtures::TABLE1_LAMBDA)
        .all(|(v, p)| round_sig(*v, 5) == round_sig(p, 5));
    let ordered = values[0] < values[1] && values[1] < values[2];
    Outcome {
        pass: digits_ok && elapsed < 1.0,
        detail: format!(
            "computed {:.6e} {:.6e} {:.6e}; published {:.5e} {:.5e} {:.5e}; ordered {}; {:.3} s",
            values[0],
            values[1],
            values[2],
            fixtures::TABLE1_LAMBDA[0],
            fixtures::TABLE1_LAMBDA[1],
            fixtures::TABLE1_LAMBDA[2],
            ordered,
            elapsed
        ),
    }
}

fn annulus() -> Outcome {
    let start = Instant::now();
    let big_r = 7.0;
    let radii = [0.04, 0.02, 0.01];
    let quad = QuadratureSpec {
        tolerance: 1e-4,
        ..QuadratureSpec::product(48)
    };
    let mut lead = Vec::new();
    let mut high = Vec::new();
    for &a in &radii {
        let exact =
            annulus_first_eigenvalue(&AnnulusProblem::new(a, big_r).unwrap(), 1e-12).unwrap();
        let cl = centered(a, big_r);
        let k = BallKernel::new(*cl.domain());
        let s = solve(
            cl,
            k,
            &SolveOptions {
                c_threshold: 1.0,
                higher: Some(quad),
            },
        )
        .unwrap();
        lead.push((s.spectral.lambda1 - exact).abs());
        high.push((s.spectral.lambda - exact).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let sl = loglog_slope(&radii, &lead);
    let improves = lead.iter().zip(&high).all(|(l, h)| h <= l);
    Outcome {
        pass: sl >= 1.9 && improves && elapsed < 60.0,
        detail: format!(
            "leading errors {:.3e} {:.3e} {:.3e} (slope {:.3}); higher {:.3e} {:.3e} {:.3e}; {:.2} s",
            lead[0], lead[1], lead[2], sl, high[0], high[1], high[2], elapsed
        ),
    }
}

fn lattice() -> Outcome {
    let start = Instant::now();
    let cl = fixtures::lattice_1728().unwrap();
    let (eps, d) = (cl.eps(), cl.d_norm());
    let k = BallKernel::new(*cl.domain());
    let s = solve(cl, k, &SolveOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let c = &s.coefficients.c;
    let (lo, hi) = c.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    let rss = peak_rss_mb();
    let residual = s.coefficients.diagnostics.residual;
    Outcome {
        pass: residual < 1e-10 && lo > 0.5 && hi < 1.5 && elapsed < 120.0 && rss.is_none_or(|m| m < 1024.0),
        detail: format!(
            "N={} eps={:.4e} d={:.4} residual {:.2e}; |C| in [{:.6}, {:.6}]; {:.2} s; peak RSS {} MB",
            c.len(),
            eps,
            d,
            residual,
            lo,
            hi,
            elapsed,
            rss.map_or("n/a".into(), |m| format!("{m:.0}"))
        ),
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    loop {
        let p = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if p.norm() < 1.0 {
            return p * r;
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    random_in_ball(rng, 1.0).normalize()
}

fn kernel_suite() -> Outcome {
    let big_r = 7.0;
    let k = BallKernel::new(Domain::ball(big_r).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut sym: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_in_ball(&mut rng, big_r);
        let y = random_in_ball(&mut rng, big_r);
        let g = k.neumann(&x, &y).unwrap();
        sym = sym.max((g - k.neumann(&y, &x).unwrap()).abs() / g.abs());
    }

    let h = 1e-4 * big_r;
    let mut flux: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for _ in 0..200 {
        let n = random_unit(&mut rng);
        let y = random_in_ball(&mut rng, 0.9 * big_r);
        let out = k.neumann_raw(&(n * (big_r + h)), &y);
        let inn = k.neumann_raw(&(n * (big_r - h)), &y);
        flux = flux.max(((out - inn) / (2.0 * h)).abs());
        sup = sup.max(k.neumann_raw(&(n * big_r), &y).abs());
    }
    let flux_rel = flux / sup;

    // The seven-point stencil carries a truncation error of order
    // h^2/12 * sum d^4/dx_i^4 of 1/(4 pi |x - y|), which near |x - y| = R/4
    // exceeds 1e-4 of the target by itself. The thirteen-point stencil at
    // the same step is the pass criterion; both are reported.
    let target = 3.0 / (4.0 * PI * big_r.powi(3));
    let step = 1e-3 * big_r;
    let mut pde2: f64 = 0.0;
    let mut pde4: f64 = 0.0;
    let mut count = 0;
    while count < 200 {
        let x = random_in_ball(&mut rng, big_r - 3.0 * step);
        let y = random_in_ball(&mut rng, big_r);
        if (x - y).norm() <= big_r / 4.0 {
            continue;
        }
        count += 1;
        let g = |p: Vec3| k.neumann_raw(&p, &y);
        let g0 = g(x);
        let (mut lap2, mut lap4) = (0.0, 0.0);
        for e in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let (p1, m1) = (g(x + e * step), g(x - e * step));
            let (p2, m2) = (g(x + e * (2.0 * step)), g(x - e * (2.0 * step)));
            lap2 += (p1 + m1 - 2.0 * g0) / (step * step);
            lap4 += (-p2 + 16.0 * p1 - 30.0 * g0 + 16.0 * m1 - m2) / (12.0 * step * step);
        }
        pde2 = pde2.max((lap2 - target).abs() / target);
        pde4 = pde4.max((lap4 - target).abs() / target);
    }
    Outcome {
        pass: sym < 1e-12 && flux_rel < 1e-5 && pde4 < 1e-4,
        detail: format!(
            "symmetry {sym:.2e}; Neumann FD {flux_rel:.2e} of sup|G|; PDE relative {pde4:.2e} (13-point), {pde2:.2e} (7-point)"
        ),
    }
}

fn volume_integrals() -> Outcome {
    let big_r = 7.0;
    let k = BallKernel::new(Domain::ball(big_r).unwrap());
    let samples = 1_000_000;
    let mut worst: f64 = 0.0;
    for (i, o) in [
        Vec3::zeros(),
        Vec3::new(1.0, 2.0, -1.5),
        Vec3::new(-4.0, 0.5, 3.0),
    ]
    .iter()
    .enumerate()
    {
        let est = mc_volume_integral(
            &k,
            Integrand::InversePotential { center: *o },
            10 + i as u64,
            samples,
        )
        .unwrap();
        let exact = 0.5 * (big_r * big_r - o.norm_squared() / 3.0);
        let z = (est.value - exact).abs() / est.error;
        worst = worst.max(z);
        for axis in 0..3 {
            let est = mc_volume_integral(
                &k,
                Integrand::PotentialGradient { center: *o, axis },
                100 + 3 * i as u64 + axis as u64,
                samples,
            )
            .unwrap();
            let exact = o[axis] / 3.0;
            let z = if est.error > 0.0 {
                (est.value - exact).abs() / est.error
            } else {
                0.0
            };
            worst = worst.max(z);
        }
    }
    Outcome {
        pass: worst < 3.0,
        detail: format!(
            "{} samples per integral; worst deviation {worst:.2} standard errors",
            samples
        ),
    }
}

fn boundary_residuals() -> Outcome {
    let big_r = 7.0;
    let radii = [0.04, 0.02, 0.01];
    let mut res = Vec::new();
    for &a in &radii {
        let cl = centered(a, big_r);
        let k = BallKernel::new(*cl.domain());
        let s = solve(cl, k, &SolveOptions::default()).unwrap();
        res.push(s.boundary_residuals(100, 50).unwrap().max_inclusion);
    }
    let sl = loglog_slope(&radii, &res);
    let cl = fixtures::table1(1).unwrap();
    let k = BallKernel::new(*cl.domain());
    let s = solve(cl, k, &SolveOptions::default()).unwrap();
    let t1 = s.boundary_residuals(200, 50).unwrap().max_inclusion;
    Outcome {
        pass: sl >= 2.0 && t1 < TABLE1_RESIDUAL_THRESHOLD,
        detail: format!(
            "dilute max|u| {:.3e} {:.3e} {:.3e} (slope {sl:.3}); eight-sphere max|u| {t1:.3e} (threshold {TABLE1_RESIDUAL_THRESHOLD:e})",
            res[0], res[1], res[2]
        ),
    }
}

fn homogenized() -> Outcome {
    let sol = HomogenizedBallSolution::new(7.0, 1.0, 0.09).unwrap();
    let rep = homogenized_residuals(&sol, 200, 1e-2, Stencil::Fourth);
    let norm_err = (rep.normalization - 1.0).abs();
    Outcome {
        pass: rep.value_jump < 1e-10
            && rep.flux_jump < 1e-10
            && rep.inner_pde < 1e-6
            && rep.outer_pde < 1e-6
            && rep.neumann < 1e-6
            && norm_err < 1e-6,
        detail: format!(
            "jumps {:.1e}/{:.1e}; PDE inner {:.1e} outer {:.1e}; Neumann {:.1e}; normalization error {:.1e}",
            rep.value_jump, rep.flux_jump, rep.inner_pde, rep.outer_pde, rep.neumann, norm_err
        ),
    }
}

fn dilute_identity() -> Outcome {
    let cl = fixtures::table1(1).unwrap();
    let k = BallKernel::new(*cl.domain());
    let pinned = vec![-1.0; cl.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let x = random_in_ball(&mut rng, 3.0);
        if cl.inclusion_containing(&x).is_some() {
            continue;
        }
        count += 1;
        let a = eigenfield_leading(&cl, &k, &pinned, &x).unwrap();
        let b = dilute_field(&cl, &k, &x).unwrap();
        worst = worst.max((a - b).abs());
    }
    let lam = dilute_lambda(&cl);
    let by_hand = 3.0 * cl.inclusions().iter().map(|i| i.radius).sum::<f64>() / 343.0;
    let pinned_lambda = lambda_leading(&cl, &pinned);
    let lam_ok = (lam - by_hand).abs() <= 4.0 * f64::EPSILON * lam && lam == pinned_lambda;
    Outcome {
        pass: worst < 1e-12 && lam_ok,
        detail: format!("field difference {worst:.2e}; dilute lambda {lam:.12e} vs 3 sum r / R^3 {by_hand:.12e}"),
    }
}

fn main() {
    // a filter argument from `cargo test <name>` only selects criteria whose
    // label contains it
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 table1_reproduction", table1),
        ("2 annulus_convergence", annulus),
        ("3 lattice_1728_coefficients", lattice),
        ("4 kernel_identities", kernel_suite),
        ("5 volume_integral_oracle", volume_integrals),
        ("6 boundary_residual_scaling", boundary_residuals),
        ("7 homogenized_closed_form", homogenized),
        ("8 dilute_identity", dilute_identity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
