//! Task runners: each turns a validated configuration into a
//! [`RunReport`] whose check lines cite the library assertions they reflect.

use serde_json::json;

use hhlab_core::cone::{
    coulomb_lower_bound_check, duhamel_expansion_check, grid_hamiltonian,
    grid_hamiltonian_tensor_route, ground_state_strict_positivity, semigroup_positivity_check,
};
use hhlab_core::fock::QGrid;
use hhlab_core::lattice::FermionicGraph;
use hhlab_core::linalg::herm_eig;
use hhlab_core::model::{effective_coulomb, SectorSpec};
use hhlab_core::pathintegral::fk_kernel_estimate;
use hhlab_core::spectral::{gap_ladder, sign_pattern_violation, SectorReportOptions};
use hhlab_core::thermal::{
    gaussian_domination_check, susceptibility_bound_check, ThermalError,
};

use crate::config::{ConfigInvalid, ExperimentConfig};
use crate::report::{RunReport, Table};

/// Headline quantities for sweep summaries.
#[derive(Default, Clone)]
pub struct Headline {
    pub e0_min: Option<f64>,
    pub gap_min: Option<f64>,
    pub chi_u_max: Option<f64>,
    pub z_ratio_max: Option<f64>,
}

pub enum TaskError {
    Config(ConfigInvalid),
    Runtime(String),
}

impl From<ConfigInvalid> for TaskError {
    fn from(e: ConfigInvalid) -> Self {
        TaskError::Config(e)
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> TaskError {
    TaskError::Runtime(e.to_string())
}

fn budget_exceeded(what: &str, dim: usize, cap: usize) -> TaskError {
    TaskError::Config(ConfigInvalid {
        field: "budget".into(),
        message: format!("{what} needs dimension {dim}, budget allows {cap}"),
    })
}

pub fn run_task(
    cfg: &ExperimentConfig,
    echo: serde_json::Value,
) -> Result<(RunReport, Headline), TaskError> {
    let mut report = RunReport::new(&cfg.run.task, cfg.seed(), echo);
    let mut headline = Headline::default();
    match cfg.run.task.as_str() {
        "graph-check" => graph_check(cfg, &mut report)?,
        "ground-state" => ground_state(cfg, &mut report, &mut headline, false)?,
        "correlations" => ground_state(cfg, &mut report, &mut headline, true)?,
        "susceptibility" => susceptibility(cfg, &mut report, &mut headline)?,
        "gaussian-domination" => gaussian_domination(cfg, &mut report, &mut headline)?,
        "cone-check" => cone_check(cfg, &mut report)?,
        "fk-check" => fk_check(cfg, &mut report)?,
        other => {
            return Err(TaskError::Config(ConfigInvalid {
                field: "run.task".into(),
                message: format!("unknown task `{other}`"),
            }))
        }
    }
    Ok((report, headline))
}

fn graph_check(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), TaskError> {
    let max_vertices = cfg.run.max_vertices.unwrap_or(6).min(7);
    let mut table = Table::new(&["vertices", "connected_graphs", "all_fermionic_connected"]);
    let mut all_ok = true;
    for n_vertices in 2..=max_vertices {
        let pairs: Vec<(usize, usize)> = (0..n_vertices)
            .flat_map(|i| ((i + 1)..n_vertices).map(move |j| (i, j)))
            .collect();
        let mut count = 0usize;
        let mut ok = true;
        for mask in 0u64..(1u64 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let mut adj = vec![0u64; n_vertices];
            for &(a, b) in &edges {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
            let mut reach: u64 = 1;
            loop {
                let mut next = reach;
                for v in 0..n_vertices {
                    if reach >> v & 1 == 1 {
                        next |= adj[v];
                    }
                }
                if next == reach {
                    break;
                }
                reach = next;
            }
            if reach != (1u64 << n_vertices) - 1 {
                continue;
            }
            count += 1;
            for n in 1..n_vertices {
                let fg = FermionicGraph::build(n_vertices, &edges, n).map_err(runtime)?;
                ok &= fg.is_connected();
            }
        }
        all_ok &= ok;
        table.push(vec![json!(n_vertices), json!(count), json!(ok)]);
    }
    report.table("connectivity", table);
    report.check(
        "fermionic-graph-connectivity",
        "lattice::FermionicGraph::is_connected for every connected base graph, 0 < n < |Λ|",
        all_ok,
        if all_ok { 1.0 } else { 0.0 },
        1.0,
    );
    Ok(())
}

fn ground_state(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    headline: &mut Headline,
    with_correlations: bool,
) -> Result<(), TaskError> {
    let graph = cfg.graph()?;
    let couplings = cfg.coupling_spec()?;
    if graph.vertex_count() % 2 != 0 {
        return Err(TaskError::Config(ConfigInvalid {
            field: "lattice".into(),
            message: "half-filling sectors need an even vertex count".into(),
        }));
    }
    let sectors = cfg.sectors(&graph);
    let ladder = cfg.ladder();
    let sites = graph.vertex_count();
    for &n_max in &ladder {
        for &m in &sectors {
            let sector = SectorSpec::new(&graph, m).map_err(runtime)?;
            let dim = hhlab_core::fock::sector_dim(sites, sector.n_up(), sector.n_down())
                * (n_max + 1).pow(sites as u32);
            if dim > cfg.budget.max_sparse_dim {
                return Err(budget_exceeded("sector Hamiltonian", dim, cfg.budget.max_sparse_dim));
            }
        }
    }

    let mut table = Table::new(&[
        "m", "n_max", "e0", "e1", "gap", "gap_tol", "degenerate", "total_spin",
        "spin_residual", "pseudospin_overlap",
    ]);
    let mut reports = Vec::new();
    let mut studies = Vec::new();
    for &m in &sectors {
        let (sector_reports, study) = gap_ladder(
            &graph,
            &couplings,
            m,
            &ladder,
            SectorReportOptions {
                n_max: ladder[0],
                tol: 1e-9,
                gap_tol_factor: 1e-8,
            },
        )
        .map_err(runtime)?;
        for (&n_max, rep) in ladder.iter().zip(sector_reports) {
            table.push(vec![
                json!(m),
                json!(n_max),
                json!(rep.e0),
                json!(rep.e1),
                json!(rep.gap),
                json!(rep.gap_tol),
                json!(rep.degenerate),
                json!(rep.total_spin),
                json!(rep.spin_residual),
                json!(rep.pseudospin_overlap),
            ]);
            headline.e0_min = Some(headline.e0_min.map_or(rep.e0, |v| v.min(rep.e0)));
            headline.gap_min = Some(headline.gap_min.map_or(rep.gap, |v| v.min(rep.gap)));
            reports.push((m, n_max, rep));
        }
        studies.push((m, study));
    }
    report.table("sectors", table);

    for (m, n_max, rep) in &reports {
        if *n_max == *ladder.last().unwrap() {
            report.check(
                &format!("gap-positive[m={m}]"),
                "spectral::sector_report: gap > 1e-8·max(1,|E0|)",
                rep.gap > rep.gap_tol,
                rep.gap_tol,
                rep.gap,
            );
            report.check(
                &format!("total-spin-floor[m={m}]"),
                "spectral::sector_report: S ≥ |M|",
                rep.total_spin >= m.abs() as f64,
                m.abs() as f64,
                rep.total_spin,
            );
            report.check(
                &format!("pseudospin-overlap[m={m}]"),
                "spectral::pseudospin_singlet_overlap: ‖P̃φ‖² > 1e-8",
                rep.pseudospin_overlap > 1e-8,
                1e-8,
                rep.pseudospin_overlap,
            );
            if *m == 0 {
                let violation = sign_pattern_violation(&graph, &rep.correlations, 1e-10);
                report.check(
                    "sign-pattern[m=0]",
                    "spectral::sign_pattern_violation: sign⟨S_{x+}S_{y−}⟩ = γ(x)γ(y)",
                    violation <= 0.0,
                    violation,
                    0.0,
                );
            }
        }
    }
    // gap stability along the cutoff ladder (Cauchy differences of the study)
    if ladder.len() >= 2 {
        for (m, study) in &studies {
            let worst = study
                .values
                .windows(2)
                .zip(&study.cauchy)
                .map(|(w, d)| d / w[0].1.abs().max(1e-300))
                .fold(0.0f64, f64::max);
            report.check(
                &format!("gap-ladder-stable[m={m}]"),
                "spectral::gap_ladder: |Δgap|/gap < 10% per cutoff rung",
                worst < 0.10,
                worst,
                0.10,
            );
        }
    }
    // spin-flip symmetry of sector energies
    for &m in &sectors {
        if m > 0 && sectors.contains(&-m) {
            let top = *ladder.last().unwrap();
            let plus = reports.iter().find(|(mm, nn, _)| *mm == m && *nn == top);
            let minus = reports.iter().find(|(mm, nn, _)| *mm == -m && *nn == top);
            if let (Some((_, _, p)), Some((_, _, q))) = (plus, minus) {
                let dev = (p.e0 - q.e0).abs();
                report.check(
                    &format!("spin-flip-symmetry[m={m}]"),
                    "spectral::sector_report: E0(M) = E0(−M) within 1e-10",
                    dev <= 1e-10 * p.e0.abs().max(1.0),
                    dev,
                    1e-10 * p.e0.abs().max(1.0),
                );
            }
        }
    }

    if with_correlations {
        let mut corr = Table::new(&["m", "n_max", "x", "y", "value", "gamma_product"]);
        for (m, n_max, rep) in &reports {
            for x in 0..sites {
                for y in 0..sites {
                    corr.push(vec![
                        json!(m),
                        json!(n_max),
                        json!(x),
                        json!(y),
                        json!(rep.correlations[(x, y)]),
                        json!(graph.gamma(x) * graph.gamma(y)),
                    ]);
                }
            }
        }
        report.table("correlations", corr);
    }
    Ok(())
}

fn susceptibility(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    headline: &mut Headline,
) -> Result<(), TaskError> {
    let graph = cfg.graph()?;
    if graph.is_torus().is_none() {
        return Err(TaskError::Config(ConfigInvalid {
            field: "lattice.kind".into(),
            message: "susceptibility needs the periodic hypercubic torus".into(),
        }));
    }
    let couplings = cfg.coupling_spec()?;
    let n_max = cfg.n_max();
    let sites = graph.vertex_count();
    let biggest_block = hhlab_core::fock::sector_dim(sites, sites / 2, sites / 2)
        * (n_max + 1).pow(sites as u32);
    if biggest_block > cfg.budget.max_dense_dim {
        return Err(budget_exceeded("thermal block", biggest_block, cfg.budget.max_dense_dim));
    }
    let n_fields = cfg.run.samples.unwrap_or(8).min(64);
    let wanted = cfg.momenta()?;
    let keep = |p: &[f64]| -> bool {
        match &wanted {
            None => true,
            Some(list) => list
                .iter()
                .any(|w| w.len() == p.len() && w.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-9)),
        }
    };
    let mut rows = Table::new(&["beta", "p", "chi", "u_hat", "product", "checked", "satisfied"]);
    let mut duhamel = Table::new(&["beta", "lhs", "rhs", "satisfied"]);
    for &beta in &cfg.run.beta {
        let rep = match susceptibility_bound_check(
            &graph, &couplings, n_max, beta, 1e-8, n_fields, cfg.seed(),
        ) {
            Ok(rep) => rep,
            Err(ThermalError::B2Violated { p, value }) => {
                report.check(
                    "momentum-space-positivity",
                    "thermal::u_eff_hat: Û_eff(p) ≥ 0 at every reciprocal momentum",
                    false,
                    value,
                    0.0,
                );
                report.table(
                    "violations",
                    {
                        let mut t = Table::new(&["p", "u_hat"]);
                        t.push(vec![json!(p), json!(value)]);
                        t
                    },
                );
                return Ok(());
            }
            Err(e) => return Err(runtime(e)),
        };
        for row in &rep.rows {
            if !keep(&row.p) {
                continue;
            }
            rows.push(vec![
                json!(beta),
                json!(row.p),
                json!(row.chi),
                json!(row.u_hat),
                json!(row.product),
                json!(row.checked),
                json!(row.satisfied),
            ]);
            if row.checked {
                headline.chi_u_max = Some(
                    headline
                        .chi_u_max
                        .map_or(row.product, |v: f64| v.max(row.product)),
                );
            }
        }
        for row in &rep.duhamel_rows {
            duhamel.push(vec![
                json!(beta),
                json!(row.lhs),
                json!(row.rhs),
                json!(row.satisfied),
            ]);
        }
        let bound_ok = rep.rows.iter().all(|r| r.satisfied);
        report.check(
            &format!("susceptibility-bound[beta={beta}]"),
            "thermal::susceptibility_bound_check: χ_Λ(p)·Û_eff(p) ≤ 1 + 1e-8 where Û_eff > 0",
            bound_ok,
            rep.rows
                .iter()
                .filter(|r| r.checked)
                .map(|r| r.product)
                .fold(f64::NEG_INFINITY, f64::max),
            1.0 + 1e-8,
        );
        report.check(
            &format!("half-filling[beta={beta}]"),
            "thermal::ThermalState::average: max |⟨n_x⟩ − 1| < 1e-6",
            rep.half_filling_deviation < 1e-6,
            rep.half_filling_deviation,
            1e-6,
        );
        let duh_ok = rep.duhamel_rows.iter().all(|r| r.satisfied);
        report.check(
            &format!("duhamel-bound[beta={beta}]"),
            "thermal::susceptibility_bound_check: ((⟨σ,U_eff h⟩*, ⟨σ,U_eff h⟩)) ≤ β⁻¹⟨h,U_eff h⟩",
            duh_ok,
            if duh_ok { 0.0 } else { 1.0 },
            0.5,
        );
    }
    report.table("susceptibility", rows);
    report.table("duhamel_bounds", duhamel);
    Ok(())
}

fn gaussian_domination(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    headline: &mut Headline,
) -> Result<(), TaskError> {
    let graph = cfg.graph()?;
    let couplings = cfg.coupling_spec()?;
    let n_max = cfg.n_max();
    let sites = graph.vertex_count();
    let dim = (1usize << (2 * sites)) * (n_max + 1).pow(sites as u32);
    if dim > cfg.budget.max_dense_dim {
        return Err(budget_exceeded("full-space Hamiltonian", dim, cfg.budget.max_dense_dim));
    }
    let epsilon = cfg.run.epsilon.unwrap_or(0.1);
    let mut ratios = Table::new(&["beta", "sample", "z_ratio"]);
    for &beta in &cfg.run.beta {
        let rep = gaussian_domination_check(
            &graph,
            &couplings,
            n_max,
            beta,
            epsilon,
            cfg.samples(),
            1e-10,
            cfg.seed(),
        )
        .map_err(runtime)?;
        for (i, r) in rep.ratios.iter().enumerate() {
            ratios.push(vec![json!(beta), json!(i), json!(r)]);
            headline.z_ratio_max =
                Some(headline.z_ratio_max.map_or(*r, |v: f64| v.max(*r)));
        }
        report.check(
            &format!("domination[beta={beta}]"),
            "thermal::gaussian_domination_check: Z(h) ≤ Z(0)·(1+1e-10)",
            rep.all_dominated,
            rep.ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            1.0 + 1e-10,
        );
        report.check(
            &format!("stationary-linear[beta={beta}]"),
            "thermal::gaussian_domination_check: |linear fit coefficient| < 1e-8",
            rep.fit_linear.abs() < 1e-8,
            rep.fit_linear.abs(),
            1e-8,
        );
        report.check(
            &format!("concave-curvature[beta={beta}]"),
            "thermal::gaussian_domination_check: quadratic fit coefficient ≤ 0",
            rep.fit_curvature <= 0.0,
            rep.fit_curvature,
            0.0,
        );
        report.check(
            &format!("evenness[beta={beta}]"),
            "thermal::gaussian_domination_check: Z(h) = Z(−h) within 1e-10·Z(0)",
            rep.evenness_deviation < 1e-10,
            rep.evenness_deviation,
            1e-10,
        );
    }
    report.table("ratios", ratios);
    Ok(())
}

fn cone_check(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), TaskError> {
    let graph = cfg.graph()?;
    let couplings = cfg.coupling_spec()?;
    if graph.vertex_count() % 2 != 0 {
        return Err(TaskError::Config(ConfigInvalid {
            field: "lattice".into(),
            message: "cone checks need an even vertex count".into(),
        }));
    }
    let m = cfg.sectors(&graph).first().copied().unwrap_or(0);
    let sector = SectorSpec::new(&graph, m).map_err(runtime)?;
    let sites = graph.vertex_count();
    let grid = QGrid::new(sites, cfg.n_q(), cfg.q_max());
    let d = hhlab_core::fock::sector_dim(sites, sector.m_hat(), 0).max(1);
    let flat_dim = d * d * grid.dim();
    if flat_dim > cfg.budget.max_dense_dim {
        return Err(budget_exceeded("flattened cone space", flat_dim, cfg.budget.max_dense_dim));
    }

    let gh = grid_hamiltonian(&graph, &couplings, sector, &grid).map_err(runtime)?;

    // assembly-route agreement
    let tensor = grid_hamiltonian_tensor_route(&graph, &couplings, sector, &grid).map_err(runtime)?;
    let direct = gh.full.to_dense();
    let mut route_diff = 0.0f64;
    for i in 0..gh.full.dim() {
        for j in 0..gh.full.dim() {
            route_diff = route_diff.max((direct[(i, j)] - tensor[(i, j)]).norm());
        }
    }
    report.check(
        "assembly-route-agreement",
        "cone::grid_hamiltonian vs tensor route: entrywise ≤ 1e-12",
        route_diff <= 1e-12,
        route_diff,
        1e-12,
    );

    let betas = if cfg.run.beta.is_empty() {
        vec![0.1, 0.5, 1.0]
    } else {
        cfg.run.beta.clone()
    };
    let n_members = cfg.run.samples.unwrap_or(100);
    let rows = semigroup_positivity_check(&gh, &betas, n_members, 1e-10, cfg.seed())
        .map_err(runtime)?;
    let mut table = Table::new(&["beta", "worst_relative_eigenvalue", "satisfied"]);
    for row in &rows {
        table.push(vec![
            json!(row.beta),
            json!(row.worst_relative_eigenvalue),
            json!(row.satisfied),
        ]);
        report.check(
            &format!("semigroup-preserves-cone[beta={}]", row.beta),
            "cone::semigroup_positivity_check: min output eigenvalue ≥ −1e-10·field norm",
            row.satisfied,
            row.worst_relative_eigenvalue,
            1e-10,
        );
    }
    report.table("semigroup", table);

    let ue = effective_coulomb(&graph, &couplings).map_err(runtime)?;
    if ue.pd {
        let strict = ground_state_strict_positivity(&gh, 1e-8).map_err(runtime)?;
        report.check(
            "ground-state-unique",
            "cone::ground_state_strict_positivity: gap > 1e-8·max(1,|E0|)",
            strict.unique,
            strict.gap_tol,
            strict.gap,
        );
        report.check(
            "ground-state-strictly-positive",
            "cone::ground_state_strict_positivity: interior fiber min eigenvalue > 0",
            strict.strictly_positive,
            0.0,
            strict.min_interior_eigenvalue,
        );
        let mut profile = Table::new(&["grid_point", "min_eigenvalue", "fiber_norm"]);
        for (g, lo, hi) in &strict.profile {
            profile.push(vec![json!(g), json!(lo), json!(hi)]);
        }
        report.table("positivity_profile", profile);

        let floor = coulomb_lower_bound_check(&ue, sector.m_hat().max(1), 50, 1e-10, cfg.seed())
            .map_err(runtime)?;
        report.check(
            "coulomb-floor",
            "cone::coulomb_lower_bound_check: ΣU_eff ℒ(n)ℛ(n) − U0Σℒ(n)ℛ(n) preserves the cone",
            floor.satisfied && floor.psd_route_satisfied,
            floor.worst_relative_eigenvalue.max(floor.psd_route_worst),
            1e-10,
        );

        // iterated-convolution expansion on a reduced grid
        let small_grid = QGrid::new(sites, cfg.n_q().min(9), cfg.q_max());
        let gh_small = grid_hamiltonian(&graph, &couplings, sector, &small_grid).map_err(runtime)?;
        let exp = duhamel_expansion_check(&gh_small, &[0.1, 0.2, 0.4], 2, 10, 3, cfg.seed())
            .map_err(runtime)?;
        let mut slopes_ok = true;
        for (n, slope) in exp.slopes.iter().enumerate() {
            slopes_ok &= (slope - (n as f64 + 1.0)).abs() <= 0.3;
        }
        report.check(
            "expansion-remainder-scaling",
            "cone::duhamel_expansion_check: log-log slope of remainder N within (N+1) ± 0.3",
            slopes_ok && exp.remainders_monotone,
            exp.slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            3.3,
        );
        report.check(
            "expansion-preserves-cone",
            "cone::duhamel_expansion_check: partial sums map members into the cone",
            exp.cone_worst <= 1e-10,
            exp.cone_worst,
            1e-10,
        );
    } else {
        report.check(
            "effective-coulomb-definite",
            "model::effective_coulomb: strict positivity analysis needs a pd U_eff",
            false,
            ue.eigenvalues.first().copied().unwrap_or(0.0),
            0.0,
        );
    }
    Ok(())
}

fn fk_check(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), TaskError> {
    let graph = cfg.graph()?;
    let couplings = cfg.coupling_spec()?;
    let sites = graph.vertex_count();
    if sites > 2 {
        return Err(budget_exceeded("bridge-sampled kernel", sites, 2));
    }
    let sector = if sites % 2 == 0 {
        let m = cfg.run.sectors.as_ref().and_then(|s| s.first().copied()).unwrap_or(0);
        SectorSpec::new(&graph, m).map_err(runtime)?
    } else {
        SectorSpec::from_doubled(sites, -1).map_err(runtime)?
    };
    let beta = cfg.run.beta.first().copied().unwrap_or(0.5);
    let samples = cfg.run.samples.unwrap_or(20_000);
    // the grid-exact reference: fine for one coordinate, modest for two
    let n_q = cfg
        .truncation
        .n_q
        .unwrap_or(if sites == 1 { 161 } else { 25 });
    let d_f = hhlab_core::fock::sector_dim(sites, sector.m_hat(), 0).max(1);
    let flat_dim = d_f * d_f * n_q.pow(sites as u32);
    if flat_dim > cfg.budget.max_dense_dim {
        return Err(budget_exceeded("grid-exact reference", flat_dim, cfg.budget.max_dense_dim));
    }
    let grid = QGrid::new(sites, n_q, cfg.q_max());
    let gh = grid_hamiltonian(&graph, &couplings, sector, &grid).map_err(runtime)?;
    let k_eig = herm_eig(&gh.hopping_part.to_dense()).map_err(runtime)?;
    let h = grid.spacing();
    let vals = grid.coordinate_values();

    // endpoints on the grid, one central and one offset pair per coordinate
    let pick = |frac: f64| -> usize { ((n_q as f64 - 1.0) * frac).round() as usize };
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = if sites == 1 {
        vec![
            (vec![pick(0.5)], vec![pick(0.5)]),
            (vec![pick(0.55)], vec![pick(0.47)]),
        ]
    } else {
        vec![
            (vec![pick(0.5), pick(0.5)], vec![pick(0.5), pick(0.5)]),
            (vec![pick(0.55), pick(0.45)], vec![pick(0.47), pick(0.53)]),
        ]
    };

    let mut table = Table::new(&["pair", "entry", "mc_re", "mc_im", "std_err", "exact", "sigmas"]);
    let mut all_ok = true;
    let mut worst_sigma = 0.0f64;
    for (pair_idx, (gi, gj)) in pairs.iter().enumerate() {
        let phi: Vec<f64> = gi.iter().map(|&i| vals[i]).collect();
        let phip: Vec<f64> = gj.iter().map(|&i| vals[i]).collect();
        let est = fk_kernel_estimate(
            &graph, &couplings, sector, &phi, &phip, beta, samples, 64, cfg.seed(),
        )
        .map_err(runtime)?;
        // grid index of the endpoints
        let flatten = |idx: &[usize]| -> usize { idx.iter().fold(0, |acc, &i| acc * n_q + i) };
        let exact =
            hhlab_core::cone::semigroup_kernel_block(&gh, &k_eig, beta, flatten(gi), flatten(gj));
        let dd = est.mean.nrows();
        for r in 0..dd {
            for c in 0..dd {
                let se = est.std_err[(r, c)].max(1e-12);
                let diff = (est.mean[(r, c)] - exact[(r, c)]).norm();
                // grid bias allowance O(h²) on top of the MC error
                let sigmas = (diff - h * h).max(0.0) / se;
                worst_sigma = worst_sigma.max(sigmas);
                all_ok &= sigmas <= 3.0;
                table.push(vec![
                    json!(pair_idx),
                    json!(format!("{r},{c}")),
                    json!(est.mean[(r, c)].re),
                    json!(est.mean[(r, c)].im),
                    json!(est.std_err[(r, c)]),
                    json!(exact[(r, c)].re),
                    json!(sigmas),
                ]);
            }
        }
    }
    report.table("kernel", table);
    report.check(
        "kernel-matches-grid-exact",
        "pathintegral::fk_kernel_estimate: entrywise within 3σ of the grid semigroup kernel",
        all_ok,
        worst_sigma,
        3.0,
    );
    Ok(())
}
