//! Command-line front end: every computation of the library behind one
//! executable with reproducible, diffable output.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{
    Config, ConfigError, DmodConstructor, LocalModelAction, RaynaudAction,
};
use jlstrata::diagram;
use jlstrata::dmod;
use jlstrata::embeddings::{Embedding, FieldShape, InfinityType, Lift};
use jlstrata::fq::FqField;
use jlstrata::jl;
use jlstrata::local_model::{self, LatticeSubmodule, TPMat, TruncPoly, TruncPolyRing};
use jlstrata::raynaud::{self, CharacterGroup, Monomial, RaynaudDatum};

#[derive(Parser)]
#[command(name = "jlstrata", version, about = "strata transfer-data calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Md,
    Txt,
}

#[derive(Subcommand)]
enum Command {
    /// Transfer data of the Iwahori stratum attached to (I, J)
    Jl {
        #[arg(long)]
        config: String,
    },
    /// Transfer data of the closed Goren-Oort stratum attached to T
    Go {
        #[arg(long)]
        config: String,
    },
    /// Full enumeration of the strata of a shape
    Tables {
        #[arg(long)]
        config: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// keep one representative per simultaneous-rotation orbit
        #[arg(long)]
        collapse_rotations: bool,
    },
    /// Completion table and recovery recipe for a stratum
    Diagram {
        #[arg(long)]
        config: String,
    },
    /// Raynaud datum toolbox
    Raynaud {
        #[arg(long)]
        config: String,
    },
    /// Dieudonné module simulator report
    Dmod {
        #[arg(long)]
        config: String,
    },
    /// Local model: lattice strata, Smith normal form, obstruction
    Localmodel {
        #[arg(long)]
        config: String,
    },
}

type Runner = fn(&Config) -> Result<String, RunError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, run): (&str, Runner) = match &cli.command {
        Command::Jl { config } => (config, run_jl),
        Command::Go { config } => (config, run_go),
        Command::Diagram { config } => (config, run_diagram),
        Command::Raynaud { config } => (config, run_raynaud),
        Command::Dmod { config } => (config, run_dmod),
        Command::Localmodel { config } => (config, run_localmodel),
        Command::Tables {
            config,
            format,
            collapse_rotations,
        } => {
            return dispatch(config, |cfg| run_tables(cfg, *format, *collapse_rotations));
        }
    };
    dispatch(path, run)
}

/// Failure modes mapped to exit codes: config problems exit 2, semantic
/// errors from the library exit 3.
enum RunError {
    Config(String),
    Semantic(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<jlstrata::Error> for RunError {
    fn from(e: jlstrata::Error) -> Self {
        RunError::Semantic(e.to_string())
    }
}

fn dispatch<F: FnOnce(&Config) -> Result<String, RunError>>(path: &str, run: F) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg: Config = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!(
                "error: {path}:{}:{}: {e}",
                e.line(),
                e.column()
            );
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Semantic(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn join_set<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(" ")
    }
}

fn lift_list(map: &std::collections::BTreeMap<Embedding, Lift>) -> String {
    join_set(map.iter().map(|(b, l)| format!("{b}:{l}")))
}

fn shape_line(shape: &FieldShape) -> String {
    join_set(
        shape
            .primes()
            .iter()
            .enumerate()
            .map(|(k, p)| format!("p{k}(e={},f={})", p.e, p.f)),
    )
}

fn target_report(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    target: &jl::JlTarget,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "shape: {}", shape_line(shape));
    let _ = writeln!(
        out,
        "sigma_infty: {}",
        lift_list(&sigma.members().map(|(b, l)| (*b, *l)).collect())
    );
    let _ = writeln!(out, "sigma_finite_count: {}", sigma.finite_count());
    let _ = writeln!(out, "I: {}", join_set(i_set.iter()));
    let _ = writeln!(out, "J: {}", join_set(j_set.iter()));
    let _ = writeln!(
        out,
        "per_prime: {}",
        join_set(
            target
                .per_prime
                .iter()
                .enumerate()
                .map(|(k, c)| format!("p{k}={c}"))
        )
    );
    let _ = writeln!(out, "T: {}", join_set(target.t.iter()));
    let _ = writeln!(out, "T_prime: {}", join_set(target.t_prime.iter()));
    let _ = writeln!(
        out,
        "T1: {}",
        join_set(target.t1.iter().map(|(k, j)| format!("p{k}.t{j}")))
    );
    let _ = writeln!(out, "sigma_plus: {}", lift_list(&target.sigma_plus));
    let _ = writeln!(
        out,
        "sigma_IJ_infty: {}",
        lift_list(&target.sigma_ij.members().map(|(b, l)| (*b, *l)).collect())
    );
    let _ = writeln!(
        out,
        "sigma_IJ_finite_count: {}",
        target.sigma_ij.finite_count()
    );
    let _ = writeln!(out, "R: {}", join_set(target.r.iter()));
    let _ = writeln!(out, "stratum_dim: {}", target.stratum_dim);
    let _ = writeln!(out, "target_base_dim: {}", target.target_base_dim);
    out
}

fn run_jl(cfg: &Config) -> Result<String, RunError> {
    let shape = config::parse_shape(cfg)?;
    let sigma = config::parse_sigma(cfg, &shape)?;
    let i_set = config::parse_set("I", &cfg.i, &shape)?;
    let j_set = config::parse_set("J", &cfg.j, &shape)?;
    let target = jl::jl_target(&shape, &sigma, &i_set, &j_set)?;
    Ok(target_report(&shape, &sigma, &i_set, &j_set, &target))
}

fn run_go(cfg: &Config) -> Result<String, RunError> {
    let shape = config::parse_shape(cfg)?;
    let sigma = config::parse_sigma(cfg, &shape)?;
    let t_go = config::parse_set("T", &cfg.t, &shape)?;
    let target = jl::goren_oort_target(&shape, &sigma, &t_go)?;
    let i_set: BTreeSet<Embedding> = shape
        .embeddings()
        .into_iter()
        .filter(|b| !sigma.contains(*b))
        .collect();
    Ok(target_report(&shape, &sigma, &i_set, &t_go, &target))
}

/// The simultaneous rotation by the shift, when it preserves the
/// ramification set; used for orbit collapsing.
fn rotate_set(
    shape: &FieldShape,
    set: &BTreeSet<Embedding>,
    steps: usize,
) -> BTreeSet<Embedding> {
    set.iter()
        .map(|&b| shape.phi_pow(b, steps as i64).unwrap())
        .collect()
}

fn rotation_fixes_sigma(shape: &FieldShape, sigma: &InfinityType, steps: usize) -> bool {
    sigma.members().all(|(b, l)| {
        let img = shape.phi_pow(*b, steps as i64).unwrap();
        sigma.lift(img) == Some(*l)
    })
}

fn run_tables(cfg: &Config, format: Format, collapse: bool) -> Result<String, RunError> {
    if format == Format::Txt {
        return Err(RunError::Config(
            "tables supports only csv or md output".into(),
        ));
    }
    let shape = config::parse_shape(cfg)?;
    let sigma = config::parse_sigma(cfg, &shape)?;
    let strata = jl::enumerate_strata(&shape, &sigma);
    let period = shape
        .primes()
        .iter()
        .map(|p| p.size())
        .fold(1usize, lcm);
    let header = [
        "I",
        "J",
        "classes",
        "T",
        "sigma_plus",
        "R",
        "stratum_dim",
        "target_base_dim",
        "finite_count",
        "orbit_size",
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i_set, j_set) in strata {
        if collapse {
            let mut orbit: Vec<(BTreeSet<Embedding>, BTreeSet<Embedding>)> = Vec::new();
            for k in 0..period {
                if rotation_fixes_sigma(&shape, &sigma, k) {
                    orbit.push((rotate_set(&shape, &i_set, k), rotate_set(&shape, &j_set, k)));
                }
            }
            let rep = orbit.iter().min().unwrap().clone();
            if rep != (i_set.clone(), j_set.clone()) {
                continue;
            }
            let orbit_size = {
                let distinct: BTreeSet<_> = orbit.into_iter().collect();
                distinct.len()
            };
            rows.push(table_row(&shape, &sigma, &i_set, &j_set, orbit_size)?);
        } else {
            rows.push(table_row(&shape, &sigma, &i_set, &j_set, 1)?);
        }
    }
    let mut out = String::new();
    match format {
        Format::Csv => {
            let _ = writeln!(out, "{}", header.join(","));
            for row in rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        Format::Md => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
        Format::Txt => unreachable!(),
    }
    Ok(out)
}

fn table_row(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    orbit_size: usize,
) -> Result<Vec<String>, RunError> {
    let target = jl::jl_target(shape, sigma, i_set, j_set)?;
    Ok(vec![
        join_set(i_set.iter()),
        join_set(j_set.iter()),
        join_set(target.per_prime.iter()),
        join_set(target.t.iter()),
        join_set(target.sigma_plus.keys()),
        join_set(target.r.iter()),
        target.stratum_dim.to_string(),
        target.target_base_dim.to_string(),
        target.sigma_ij.finite_count().to_string(),
        orbit_size.to_string(),
    ])
}

fn lcm(a: usize, b: usize) -> usize {
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    };
    a / gcd(a, b) * b
}

fn run_diagram(cfg: &Config) -> Result<String, RunError> {
    let shape = config::parse_shape(cfg)?;
    let sigma = config::parse_sigma(cfg, &shape)?;
    let i_set = config::parse_set("I", &cfg.i, &shape)?;
    let j_set = config::parse_set("J", &cfg.j, &shape)?;
    // T and R default to the canonical recipe
    let (t, r, canonical) = if cfg.t.is_some() {
        let t = config::parse_set("T", &cfg.t, &shape)?;
        let r = if cfg.r.is_some() {
            config::parse_set("R", &cfg.r, &shape)?
        } else {
            let inter = i_set.intersection(&j_set).copied().collect();
            jl::compute_sigma(&shape, &sigma, &t, &inter)?.r
        };
        (t, r, false)
    } else {
        let target = jl::jl_target(&shape, &sigma, &i_set, &j_set)?;
        (target.t, target.r, true)
    };
    let inter: BTreeSet<Embedding> = i_set.intersection(&j_set).copied().collect();
    let sr = jl::compute_sigma(&shape, &sigma, &t, &inter)?;
    let initial = diagram::init_diagram(&shape, &sigma, &t)?;
    let propagated = diagram::propagate(&initial, &i_set, &j_set)?;
    let with_bundles = diagram::apply_bundles(&initial, &r)?;
    let final_state = diagram::propagate(&with_bundles, &i_set, &j_set)?;
    let report = diagram::report_of(&final_state);

    let mut out = String::new();
    let _ = writeln!(out, "shape: {}", shape_line(&shape));
    let _ = writeln!(out, "I: {}", join_set(i_set.iter()));
    let _ = writeln!(out, "J: {}", join_set(j_set.iter()));
    let _ = writeln!(out, "T: {} ({})", join_set(t.iter()), if canonical { "canonical" } else { "supplied" });
    let _ = writeln!(out, "R: {}", join_set(r.iter()));
    let _ = writeln!(out, "admissible: {}", sr.admissible);
    for (name, state) in [
        ("initial", &initial),
        ("propagated", &propagated),
        ("completed", &final_state),
    ] {
        let _ = writeln!(
            out,
            "{name}_row1: {}",
            join_set(state.filled_row(1).iter())
        );
        let _ = writeln!(
            out,
            "{name}_row2: {}",
            join_set(state.filled_row(2).iter())
        );
    }
    let _ = writeln!(out, "complete: {}", report.complete);
    let _ = writeln!(
        out,
        "unfilled: {}",
        join_set(report.unfilled.iter().map(|(r, b)| format!("({r},{b})")))
    );
    let _ = writeln!(out, "recipe:");
    out.push_str(&diagram::render_recipe(&shape, &sigma, &report));
    Ok(out)
}

fn run_raynaud(cfg: &Config) -> Result<String, RunError> {
    let rc = cfg
        .raynaud
        .as_ref()
        .ok_or_else(|| RunError::Config("missing field `raynaud`".into()))?;
    let group = CharacterGroup::new(rc.p, rc.f)?;
    let mut out = String::new();
    if let RaynaudAction::Expand { residue } = rc.action {
        let _ = writeln!(out, "q: {}", group.modulus() + 1);
        match raynaud::padic_expansion(&group, group.character(residue)) {
            raynaud::Expansion::Trivial => {
                let _ = writeln!(out, "expansion: trivial");
            }
            raynaud::Expansion::Digits(d) => {
                let _ = writeln!(out, "expansion: {}", join_set(d.iter()));
            }
        }
        return Ok(out);
    }
    let field = FqField::new(rc.p as u32, rc.scalar_m);
    let datum = RaynaudDatum::new(
        field,
        rc.f,
        rc.support.iter().copied().collect(),
        rc.s.clone(),
        rc.t.clone(),
    )?;
    let dump = |d: &RaynaudDatum, out: &mut String| {
        let _ = writeln!(out, "support: {}", join_set(d.support.iter()));
        let _ = writeln!(out, "s: {}", join_set(d.s.iter()));
        let _ = writeln!(out, "t: {}", join_set(d.t.iter()));
    };
    match &rc.action {
        RaynaudAction::Validate => {
            let violations = datum.validate();
            let _ = writeln!(out, "valid: {}", violations.is_empty());
            for v in violations {
                let _ = writeln!(out, "violation: {v:?}");
            }
        }
        RaynaudAction::Dual => {
            dump(&datum.dual()?, &mut out);
        }
        RaynaudAction::Order => {
            let _ = writeln!(out, "order_exponent: {}", datum.order()?);
        }
        RaynaudAction::Dieudonne => {
            let c = raynaud::dieudonne_of(&datum)?;
            let _ = writeln!(out, "dims: {}", join_set(c.dims.iter()));
            let _ = writeln!(out, "phi: {}", join_set(c.phi.iter()));
            let _ = writeln!(out, "v: {}", join_set(c.v.iter()));
        }
        RaynaudAction::Basis => {
            let basis = datum.basis();
            let _ = writeln!(out, "basis_size: {}", basis.len());
            for mono in basis {
                let _ = writeln!(out, "monomial: {}", join_set(mono.iter()));
            }
        }
        RaynaudAction::Sub { support } => {
            let sub = datum.sub_datum(&support.iter().copied().collect())?;
            dump(&sub, &mut out);
        }
        RaynaudAction::Multiply { a, b } => {
            let ma = Monomial {
                coeff: 1,
                digits: a.clone(),
            };
            let mb = Monomial {
                coeff: 1,
                digits: b.clone(),
            };
            let prod = raynaud::algebra_multiply(&datum, &ma, &mb)?;
            let _ = writeln!(out, "coeff: {}", prod.coeff);
            let _ = writeln!(out, "digits: {}", join_set(prod.digits.iter()));
        }
        RaynaudAction::Expand { .. } => unreachable!(),
    }
    Ok(out)
}

fn run_dmod(cfg: &Config) -> Result<String, RunError> {
    let dc = cfg
        .dmod
        .as_ref()
        .ok_or_else(|| RunError::Config("missing field `dmod`".into()))?;
    let (d, filt) = match &dc.constructor {
        DmodConstructor::Ordinary { p, m, e, f } => {
            let field = FqField::new(*p, *m);
            dmod::ordinary(&field, *e, *f)?
        }
        DmodConstructor::Supersingular { p, m } => {
            let field = FqField::new(*p, *m);
            dmod::supersingular(&field)?
        }
        DmodConstructor::Dump { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("cannot read {path}: {e}")))?;
            let d = dmod::DModule::parse(&text)?;
            let types = vec![vec![1u8; d.ring.e]; d.f];
            let filt = dmod::forced_pr_filtration(&d, types)?;
            (d, filt)
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "field: p={} m={}  e={} f={}",
        d.ring.field.p(),
        d.ring.field.m(),
        d.ring.e,
        d.f
    );
    let violations = d.validate();
    let _ = writeln!(out, "valid: {}", violations.is_empty());
    for v in &violations {
        let _ = writeln!(out, "violation: {v:?}");
    }
    if violations.is_empty() {
        dmod::validate_filtration(&d, &filt)?;
        for t in 0..d.f {
            let _ = writeln!(
                out,
                "omega_dim slot {t}: {}",
                d.omega(t).dim()
            );
        }
        for t in 0..d.f {
            for i in 1..=d.ring.e {
                let h = dmod::h1_at(&d, &filt, (t, i))?;
                let s = filt.s_at((t, i));
                if s == 1 {
                    let (_, flag) = dmod::partial_hasse(&d, &filt, (t, i))?;
                    let _ = writeln!(
                        out,
                        "pos ({t},{i}): h1_dim={} s={s} hasse_vanishes={flag}",
                        h.dim()
                    );
                } else {
                    let _ = writeln!(out, "pos ({t},{i}): h1_dim={} s={s}", h.dim());
                }
            }
        }
        let go = dmod::go_type(&d, &filt)?;
        let _ = writeln!(
            out,
            "go_type: {}",
            join_set(go.iter().map(|(t, i)| format!("({t},{i})")))
        );
    }
    if dc.emit_dump {
        out.push_str(&d.dump());
    }
    Ok(out)
}

fn run_localmodel(cfg: &Config) -> Result<String, RunError> {
    let lc = cfg
        .localmodel
        .as_ref()
        .ok_or_else(|| RunError::Config("missing field `localmodel`".into()))?;
    let field = FqField::new(lc.p, lc.m);
    let mut out = String::new();
    match &lc.action {
        LocalModelAction::Obstruction { d, i, j } => {
            let r = local_model::obstruction_witness(&field, *d, *i, *j)?;
            let _ = writeln!(out, "d: {} i: {} j: {}", r.d, r.i, r.j);
            let _ = writeln!(out, "snf: {}", diag_string(&r.diag));
            let _ = writeln!(out, "projective: {}", r.projective);
        }
        LocalModelAction::Snf { n, matrix } => {
            let ring = TruncPolyRing::new(field, *n)?;
            let rows = matrix.len();
            let cols = matrix.first().map_or(0, |r| r.len());
            if rows == 0 || cols == 0 || matrix.iter().any(|r| r.len() != cols) {
                return Err(RunError::Config("snf matrix must be rectangular".into()));
            }
            let mut m = TPMat::zero(&ring, rows, cols);
            for (i, row) in matrix.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    if entry.len() > *n {
                        return Err(RunError::Config(
                            "entry has more coefficients than the truncation order".into(),
                        ));
                    }
                    let mut coeffs = entry.clone();
                    coeffs.resize(*n, 0);
                    if coeffs.iter().any(|&c| c as u32 >= ring.field.q()) {
                        return Err(RunError::Config("coefficient outside the field".into()));
                    }
                    m.set(i, j, TruncPoly(coeffs));
                }
            }
            let r = local_model::snf(&ring, &m);
            let _ = writeln!(out, "snf: {}", diag_string(&r.diag));
            let _ = writeln!(
                out,
                "projective: {}",
                r.diag.iter().all(|v| matches!(v, None | Some(0)))
            );
        }
        LocalModelAction::Pair { d, basis } => {
            let f = LatticeSubmodule::new(field, *d, basis.clone())?;
            let (i, j) = f.elementary_pair()?;
            let _ = writeln!(out, "pair: ({i}, {j})");
            let _ = writeln!(out, "stratum_index: {}", f.stratum_index()?);
        }
    }
    Ok(out)
}

fn diag_string(diag: &[Option<usize>]) -> String {
    join_set(diag.iter().map(|v| match v {
        None => "0".to_string(),
        Some(0) => "1".to_string(),
        Some(k) => format!("y^{k}"),
    }))
}
