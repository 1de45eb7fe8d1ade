//! The five pipelines. Each returns a report, the process exit code and a few
//! human-readable summary lines.

use cgdare::geometry::{
    is_friend, is_output_nulling, kernel_identity, kernel_of_solution, largest_output_nulling, r0, reachability_on,
    Quadruple,
};
use cgdare::numerics::{ensure_symmetric, spectral_norm, Matrix, TolerancePolicy};
use cgdare::popov::{classify_from, drlmi_holds, kernel_condition_from, x_quantities};
use cgdare::riccati::{optimal_control_set, optimal_cost, solve_min_psd, SolveReport, SolveStatus};
use cgdare::spectral::{
    factorized_identity_residual, normal_rank_phi, phi_pix_identity_residual, rank_rx_vs_normal_rank, sample_points,
    spectral_factor_residual, t_inverse_identity_residual, C64,
};
use cgdare::stabilize::{cost_invariance_residual, fixed_spectrum, off_r0_spectrum, place_on_r0};
use cgdare::stein::{is_unmixed, stein_kernel_report, stein_residual, stein_solve};
use cgdare::{Error, PopovTriple, SolutionClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poles::parse_poles;
use crate::problem::{FieldError, ProblemFile};
use crate::report::{
    complex_list, rows, CandidateReport, CostReport, Report, SolutionAnalysis, SolveSection, SpectralSection,
    SpectralSolution, StabilizeSection, SteinMember, SteinSection, SubspaceReport,
};
use crate::CliError;

/// Largest principal-angle gap accepted between two computations of `R₀`.
const SUBSPACE_GAP: f64 = 1e-8;

/// Random family members sampled by `stein`.
const STEIN_SAMPLES: usize = 3;

#[derive(Debug, Clone)]
pub struct Flags {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub samples: usize,
    pub poles: Option<String>,
    pub seed: u64,
}

pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    pub summary: Vec<String>,
}

fn module(e: Error) -> CliError {
    CliError::Module(e)
}

fn status_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::Diverged => 2,
        SolveStatus::MaxIterReached => 3,
    }
}

/// Structural identities that hold exactly for an exact solution are judged
/// at `√rank_rel` relative to the size of the solution.
fn structurally_zero(value: f64, scale: f64, tol: &TolerancePolicy) -> bool {
    value <= tol.angle_tol() * (1.0 + scale)
}

fn solve_section(report: &SolveReport) -> SolveSection {
    SolveSection {
        status: report.status.as_str().into(),
        iterations: report.iterations,
        kernel_stationary_at: report.kernel_stationary_at,
        monotone: report.monotone,
        kernel_chain_monotone: report.kernel_chain_monotone,
        x_bar: rows(&report.x_bar),
        classification: report.classification.map(|c| c.as_str().into()),
        analysis: None,
    }
}

fn analyze(
    triple: &PopovTriple,
    x: &Matrix,
    x0: Option<&nalgebra::DVector<f64>>,
    tol: &TolerancePolicy,
    out: &mut Report,
) -> Result<SolutionAnalysis, CliError> {
    let xq = x_quantities(triple, x, tol).map_err(module)?;
    let (k_x, g_x) = optimal_control_set(triple, x, tol).map_err(module)?;
    let quad = Quadruple::from_triple(triple);
    let ker_x = kernel_of_solution(x, tol);
    let v_star = largest_output_nulling(&quad, tol).map_err(module)?;
    let reach = r0(triple, x, tol).map_err(module)?;
    let fixed = fixed_spectrum(triple, x, tol).map_err(module)?;
    let off = off_r0_spectrum(triple, x, tol).map_err(module)?;
    let cost = x0.map(|v| optimal_cost(x, v)).transpose().map_err(module)?;

    let x_norm = spectral_norm(x);
    out.check(
        "ker_x_bar_output_nulling",
        is_output_nulling(&quad, &ker_x, tol).map_err(module)?,
        None,
    );
    out.check(
        "k_x_friend_of_ker_x_bar",
        is_friend(&quad, &ker_x, &k_x, tol).map_err(module)?,
        None,
    );
    out.check(
        "ker_x_bar_equals_v_star",
        ker_x.equals(&v_star, tol),
        Some(ker_x.gap(&v_star)),
    );
    let annihilation = (x * reach.basis()).norm();
    out.check(
        "x_bar_annihilates_r0",
        structurally_zero(annihilation, x_norm, tol),
        Some(annihilation),
    );
    let gap = reachability_on(&quad, &ker_x, &k_x, tol).map_err(module)?.gap(&reach);
    out.check("reachability_on_ker_x_bar_equals_r0", gap <= SUBSPACE_GAP, Some(gap));
    out.check(
        "kernel_identity",
        kernel_identity(triple, x, tol).map_err(module)?.holds,
        None,
    );

    Ok(SolutionAnalysis {
        residual_norm: xq.residual().norm(),
        k_x: rows(&k_x),
        g_x: rows(&g_x),
        r_x: rows(&xq.r_x),
        a_x: rows(&xq.a_x),
        ker_x_bar: SubspaceReport::from(&ker_x),
        v_star: SubspaceReport::from(&v_star),
        r0: SubspaceReport::from(&reach),
        fixed_spectrum: complex_list(&fixed),
        off_r0_spectrum: complex_list(&off),
        optimal_cost: cost,
    })
}

fn setup(
    problem: &ProblemFile,
    command: &str,
    flags: &Flags,
) -> Result<(TolerancePolicy, PopovTriple, Report), CliError> {
    let tol = problem.tolerance(flags.tol, flags.max_iter)?;
    let triple = problem.triple(command, &tol)?;
    let report = Report::new(command, problem.n, problem.m, &tol);
    Ok((tol, triple, report))
}

pub fn solve(problem: &ProblemFile, flags: &Flags) -> Result<Outcome, CliError> {
    let (tol, triple, mut report) = setup(problem, "solve", flags)?;
    let solved = solve_min_psd(&triple, &tol).map_err(module)?;
    let mut section = solve_section(&solved);
    report.check("iterates_monotone", solved.monotone, None);
    report.check("kernel_chain_monotone", solved.kernel_chain_monotone, None);
    let mut summary = vec![format!(
        "status {} after {} iterations",
        solved.status.as_str(),
        solved.iterations
    )];
    if solved.status == SolveStatus::Converged {
        let analysis = analyze(&triple, &solved.x_bar, problem.x0.as_ref(), &tol, &mut report)?;
        summary.push(format!(
            "classification {}, dim ker X = {}, dim R0 = {}",
            section.classification.as_deref().unwrap_or("-"),
            analysis.ker_x_bar.dim,
            analysis.r0.dim
        ));
        if let Some(j) = analysis.optimal_cost {
            summary.push(format!("optimal cost {j}"));
        }
        section.analysis = Some(analysis);
    }
    report.solve = Some(section);
    Ok(Outcome {
        report,
        exit_code: status_code(solved.status),
        summary,
    })
}

fn candidate_report(
    triple: &PopovTriple,
    index: usize,
    x: &Matrix,
    tol: &TolerancePolicy,
) -> Result<CandidateReport, CliError> {
    let xq = x_quantities(triple, x, tol).map_err(module)?;
    let quad = Quadruple::from_triple(triple);
    let identity = kernel_identity(triple, x, tol).map_err(module)?;
    let ker_x = kernel_of_solution(x, tol);
    let reach = r0(triple, x, tol).map_err(module)?;
    Ok(CandidateReport {
        index,
        x: rows(x),
        classification: classify_from(triple, &xq, tol).as_str().into(),
        residual_norm: xq.residual().norm(),
        drlmi_holds: drlmi_holds(triple, x, tol).map_err(module)?,
        kernel_condition: kernel_condition_from(triple, &xq, tol),
        kernel_identity: identity.holds,
        ker_r_x_dim: identity.ker_r_x.dim(),
        ker_xb_and_r_dim: identity.ker_xb_and_r.dim(),
        ker_x_output_nulling: is_output_nulling(&quad, &ker_x, tol).map_err(module)?,
        k_x_is_friend: is_friend(&quad, &ker_x, &xq.k_x, tol).map_err(module)?,
        ker_x: SubspaceReport::from(&ker_x),
        r0_dim: reach.dim(),
        x_r0_residual: (x * reach.basis()).norm(),
    })
}

pub fn verify(problem: &ProblemFile, flags: &Flags) -> Result<Outcome, CliError> {
    let (tol, triple, mut report) = setup(problem, "verify", flags)?;
    let candidates = problem.candidates(&tol)?;
    if candidates.is_empty() {
        return Err(CliError::Field(FieldError {
            field: "X_candidates".into(),
            message: "`verify` needs at least one candidate".into(),
        }));
    }
    let mut reports = Vec::with_capacity(candidates.len());
    let mut summary = Vec::new();
    for (i, x) in candidates.iter().enumerate() {
        let c = candidate_report(&triple, i, x, &tol)?;
        let cgdare =
            c.classification == SolutionClass::Dare.as_str() || c.classification == SolutionClass::Cgdare.as_str();
        if cgdare {
            let scale = spectral_norm(x);
            report.check(
                &format!("candidate_{i}_ker_x_output_nulling"),
                c.ker_x_output_nulling,
                None,
            );
            report.check(&format!("candidate_{i}_k_x_friend_of_ker_x"), c.k_x_is_friend, None);
            report.check(
                &format!("candidate_{i}_x_annihilates_r0"),
                structurally_zero(c.x_r0_residual, scale, &tol),
                Some(c.x_r0_residual),
            );
        }
        summary.push(format!(
            "candidate {i}: {} (kernel condition {}, kernel identity {})",
            c.classification, c.kernel_condition, c.kernel_identity
        ));
        reports.push(c);
    }
    report.candidates = Some(reports);
    Ok(Outcome {
        report,
        exit_code: 0,
        summary,
    })
}

pub fn stein(problem: &ProblemFile, flags: &Flags) -> Result<Outcome, CliError> {
    let tol = problem.tolerance(flags.tol, flags.max_iter)?;
    ensure_symmetric(&problem.q, "Q", &tol).map_err(|e| {
        CliError::Field(FieldError {
            field: "Q".into(),
            message: e.to_string(),
        })
    })?;
    let (a, q) = (&problem.a, &problem.q);
    let mut report = Report::new("stein", problem.n, problem.m, &tol);
    let set = stein_solve(a, q, &tol).map_err(module)?;
    let dim = set.homogeneous_basis.len();
    let mut members = Vec::new();
    if set.particular.is_some() {
        let mut rng = ChaCha8Rng::seed_from_u64(flags.seed);
        let mut coefficient_sets = vec![vec![0.0; dim]];
        if dim > 0 {
            for _ in 0..STEIN_SAMPLES {
                coefficient_sets.push((0..dim).map(|_| rng.random_range(-10.0..10.0)).collect());
            }
        }
        for coefficients in coefficient_sets {
            let x = set.member(&coefficients).map_err(module)?;
            let kernels = stein_kernel_report(a, q, &x, &tol).map_err(module)?;
            let residual = stein_residual(a, q, &x);
            report.check(
                &format!("member_{}_solves", members.len()),
                residual <= tol.angle_tol() * (1.0 + q.norm()),
                Some(residual),
            );
            members.push(SteinMember {
                coefficients,
                x: rows(&x),
                residual,
                ker_x_dim: kernels.ker_x.dim(),
                a_invariant: kernels.a_invariant,
                contained_in_ker_q: kernels.contained_in_ker_q,
                equals_unobservable: kernels.equals_unobservable,
            });
        }
    }
    let summary = vec![match &set.particular {
        None => format!("inconsistent (residual {:e})", set.residual),
        Some(_) if dim == 0 => "unique solution".to_string(),
        Some(_) => format!("{dim}-dimensional family of solutions"),
    }];
    report.stein = Some(SteinSection {
        unmixed: is_unmixed(a, &tol),
        consistent: set.particular.is_some(),
        unique: set.is_unique(),
        residual: set.residual,
        particular: set.particular.as_ref().map(rows),
        homogeneous_basis: set.homogeneous_basis.iter().map(rows).collect(),
        members,
    });
    Ok(Outcome {
        report,
        exit_code: 0,
        summary,
    })
}

/// Maximum of `f` over the points, counting points that sit near a pole.
fn max_over(
    points: &[C64],
    skipped: &mut usize,
    f: impl Fn(C64) -> cgdare::Result<f64>,
) -> Result<Option<f64>, CliError> {
    let mut best: Option<f64> = None;
    let mut missed = 0;
    for &z in points {
        match f(z) {
            Ok(v) => best = Some(best.map_or(v, |b| b.max(v))),
            Err(Error::PoleTooClose { .. }) => missed += 1,
            Err(e) => return Err(module(e)),
        }
    }
    *skipped = (*skipped).max(missed);
    Ok(best)
}

fn spectral_solution(
    triple: &PopovTriple,
    source: String,
    x: &Matrix,
    points: &[C64],
    flags: &Flags,
    tol: &TolerancePolicy,
) -> Result<SpectralSolution, CliError> {
    let xq = x_quantities(triple, x, tol).map_err(module)?;
    let class = classify_from(triple, &xq, tol);
    let consistent = match class {
        SolutionClass::Dare | SolutionClass::Cgdare | SolutionClass::DrlmiOnly => Some(
            rank_rx_vs_normal_rank(triple, x, tol, flags.samples, flags.seed)
                .map_err(module)?
                .consistent,
        ),
        _ => None,
    };
    let mut skipped = 0;
    let pi_x = max_over(points, &mut skipped, |z| phi_pix_identity_residual(triple, x, z, tol))?;
    let (factor, t_inv, factorized) = if class.solves_cgdare() {
        (
            max_over(points, &mut skipped, |z| spectral_factor_residual(triple, x, z, tol))?,
            max_over(points, &mut skipped, |z| t_inverse_identity_residual(triple, x, z, tol))?,
            max_over(points, &mut skipped, |z| {
                factorized_identity_residual(triple, x, z, tol)
            })?,
        )
    } else {
        (None, None, None)
    };
    Ok(SpectralSolution {
        source,
        classification: class.as_str().into(),
        rank_r_x: xq.r_x_rank,
        consistent,
        max_pi_x_identity_residual: pi_x,
        max_spectral_factor_residual: factor,
        max_t_inverse_residual: t_inv,
        max_factorized_residual: factorized,
        skipped_points: skipped,
    })
}

pub fn spectral(problem: &ProblemFile, flags: &Flags) -> Result<Outcome, CliError> {
    let (tol, triple, mut report) = setup(problem, "spectral", flags)?;
    let candidates = problem.candidates(&tol)?;
    let points = sample_points(triple.a(), flags.samples, flags.seed).map_err(module)?;
    let normal_rank = normal_rank_phi(&triple, &tol, flags.samples, flags.seed).map_err(module)?;
    let doubled = normal_rank_phi(&triple, &tol, 2 * flags.samples, flags.seed).map_err(module)?;
    report.check("normal_rank_stable_under_doubling", normal_rank == doubled, None);

    let mut sources: Vec<(String, Matrix)> = Vec::new();
    let solved = solve_min_psd(&triple, &tol).map_err(module)?;
    if solved.status == SolveStatus::Converged {
        sources.push(("x_bar".into(), solved.x_bar));
    }
    for (i, x) in candidates.iter().enumerate() {
        sources.push((format!("candidate {i}"), x.clone()));
    }
    let mut solutions = Vec::new();
    let mut summary = vec![format!(
        "normal rank {normal_rank} ({} samples), {doubled} with twice as many",
        flags.samples
    )];
    for (source, x) in sources {
        let s = spectral_solution(&triple, source, &x, &points, flags, &tol)?;
        if let Some(c) = s.consistent {
            report.check(
                &format!("{}_rank_matches_normal_rank", s.source.replace(' ', "_")),
                c,
                None,
            );
        }
        summary.push(format!(
            "{}: {} with rank R_X = {}",
            s.source, s.classification, s.rank_r_x
        ));
        solutions.push(s);
    }
    report.spectral = Some(SpectralSection {
        samples: flags.samples,
        seed: flags.seed,
        points: complex_list(&points),
        normal_rank,
        normal_rank_doubled: doubled,
        solutions,
    });
    Ok(Outcome {
        report,
        exit_code: 0,
        summary,
    })
}

pub fn stabilize(problem: &ProblemFile, flags: &Flags) -> Result<Outcome, CliError> {
    let (tol, triple, mut report) = setup(problem, "stabilize", flags)?;
    let requested = match &flags.poles {
        Some(list) => Some(parse_poles(list).map_err(CliError::Usage)?),
        None => None,
    };
    let solved = solve_min_psd(&triple, &tol).map_err(module)?;
    if solved.status != SolveStatus::Converged {
        let summary = vec![format!("solve stopped with status {}", solved.status.as_str())];
        report.solve = Some(solve_section(&solved));
        return Ok(Outcome {
            report,
            exit_code: status_code(solved.status),
            summary,
        });
    }
    let x = &solved.x_bar;
    let desired = match requested {
        Some(p) => p,
        None => vec![C64::new(0.0, 0.0); r0(&triple, x, &tol).map_err(module)?.dim()],
    };
    let placed = place_on_r0(&triple, x, &desired, flags.seed, &tol).map_err(module)?;
    let g_x = x_quantities(&triple, x, &tol).map_err(module)?.g_x;
    let b_g_l = triple.b() * g_x * &placed.l;
    let (cost, cost_error) = match &problem.x0 {
        None => (None, None),
        Some(x0) => match cost_invariance_residual(&triple, x, &placed.l, x0, None, &tol) {
            Ok(c) => (
                Some(CostReport {
                    x0: x0.iter().copied().collect(),
                    simulated: c.simulated,
                    optimal: c.optimal,
                    residual: c.residual,
                    horizon: c.horizon,
                }),
                None,
            ),
            Err(e @ Error::DivergentTrajectory { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(module(e)),
        },
    };
    report.check("fixed_poles_removed", placed.fixed_poles_removed, None);
    let mut summary = vec![format!(
        "placed {} poles on R0; fixed poles removed: {}",
        placed.r0_dim, placed.fixed_poles_removed
    )];
    if let Some(c) = &cost {
        report.check(
            "cost_invariance",
            c.residual <= tol.angle_tol() * (1.0 + c.optimal.abs()),
            Some(c.residual),
        );
        summary.push(format!("simulated cost {} against optimal {}", c.simulated, c.optimal));
    }
    report.stabilize = Some(StabilizeSection {
        requested_poles: complex_list(&desired),
        r0_dim: placed.r0_dim,
        l: rows(&placed.l),
        a_cl: rows(&placed.a_cl),
        b_g_l: rows(&b_g_l),
        placed_poles: complex_list(&placed.placed_poles),
        fixed_poles: complex_list(&placed.fixed_poles),
        fixed_poles_removed: placed.fixed_poles_removed,
        off_r0_spectrum: complex_list(&placed.off_r0_spectrum),
        cost,
        cost_error,
    });
    Ok(Outcome {
        report,
        exit_code: 0,
        summary,
    })
}
