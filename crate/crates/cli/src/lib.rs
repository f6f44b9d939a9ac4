//! Command-line front end for `mismatch-core`.

pub mod error;
pub mod problem;
pub mod trace;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mismatch_core::cc_bound::{cc_bound_desk, gamma_cc_membership, gamma_star_membership, CcMembership};
use mismatch_core::lower_bounds::{gmi_rate, gmi_rate_max, lm_rate, lm_rate_max};
use mismatch_core::metric::{
    gamma_membership, gamma_nonempty_given_marginal, MarginalCertificate, SupportPattern,
};
use mismatch_core::optim::SolverConfig;
use mismatch_core::prob::{
    channel_capacity, correct_decoding_exponent, BroadcastChannel, ExponentConfig, ProbVector, RateUnit, RateValue,
    StochasticMatrix,
};
use mismatch_core::relations::{
    isomorphic, scan_matched_candidates, superior, superior_cc, Superiority, Tightness,
};
use mismatch_core::sd_bound::{sd_bound, sd_bound_k, BoundConfig, BoundResult};
use mismatch_core::simulate::{simulate_containment, simulate_joint, CodebookMode, SimConfig};
use serde_json::{json, Value};

use error::{CliError, EXIT_INFEASIBLE, EXIT_OK};
use problem::{Problem, ProblemFile};

#[derive(Debug, Parser)]
#[command(name = "mismatch", version, about = "Capacity bounds for mismatched decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Report rates in bits (default).
    #[arg(long, global = true, conflicts_with = "nats")]
    pub bits: bool,
    /// Report rates in nats.
    #[arg(long, global = true)]
    pub nats: bool,
    /// Optimality tolerance in nats.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the per-iteration trace of a bound computation as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print a JSON record instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FileArg {
    /// Problem file (TOML).
    pub file: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RhoArg {
    /// Name of the rho metric in the problem file.
    #[arg(long)]
    pub rho: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Iid,
    Cc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Matched capacity of W.
    Capacity(FileArg),
    /// Generalized mutual information, maximized over inputs unless --fixed.
    Gmi {
        #[command(flatten)]
        file: FileArg,
        /// Evaluate at the file's composition instead of maximizing.
        #[arg(long)]
        fixed: bool,
    },
    /// LM rate, maximized over inputs unless --fixed.
    Lm {
        #[command(flatten)]
        file: FileArg,
        #[arg(long)]
        fixed: bool,
    },
    /// Upper bound with rho = q.
    BoundKg {
        #[command(flatten)]
        file: FileArg,
        /// Run exactly this many outer iterations.
        #[arg(long)]
        iters: Option<usize>,
        /// Letters per super-symbol.
        #[arg(long, default_value_t = 1)]
        letters: usize,
    },
    /// Upper bound for a candidate rho; with no --rho every candidate is tried.
    BoundSd {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
        /// Run exactly this many outer iterations.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 1)]
        letters: usize,
    },
    /// Upper bound over the composition-dependent set.
    BoundCc {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
        /// Use the rho-free set instead.
        #[arg(long)]
        star: bool,
    },
    /// Support table of (q, rho) and nonemptiness of the channel set with Y-marginal W.
    GammaCheck {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
    },
    /// Composition-dependent membership of the coupling (or the z = y splice).
    GammaCcCheck {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
        #[arg(long)]
        star: bool,
    },
    /// Whether (W, q) is superior to (W2, rho).
    Superior {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
        /// Require the coupling only in the composition-dependent set.
        #[arg(long)]
        cc: bool,
    },
    /// Superiority in both directions.
    Isomorphic {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
    },
    /// Tightness through the candidate channel.
    Tightness {
        #[command(flatten)]
        file: FileArg,
        /// Scan binary candidates on a grid with this many steps.
        #[arg(long)]
        scan: Option<usize>,
    },
    /// Monte-Carlo run of the q and rho decoders on a shared codebook.
    Simulate {
        #[command(flatten)]
        file: FileArg,
        #[command(flatten)]
        rho: RhoArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = Mode::Iid)]
        mode: Mode,
        /// Skip the membership precondition.
        #[arg(long)]
        unchecked: bool,
    },
    /// Correct-decoding exponent of W at a rate above capacity.
    Exponent {
        #[command(flatten)]
        file: FileArg,
        /// Rate in the selected unit.
        #[arg(long)]
        rate: f64,
    },
}

/// What a command produced.
pub struct Outcome {
    pub exit: i32,
    pub text: String,
    pub json: Value,
}

struct Ctx {
    unit: RateUnit,
    solver: SolverConfig,
    bound: BoundConfig,
    cap_tol: f64,
    flags: Flags,
}

impl Ctx {
    fn new(flags: &Flags) -> Result<Self, CliError> {
        let mut solver = SolverConfig::default();
        let mut bound = BoundConfig::default();
        let mut cap_tol = 1e-9;
        if let Some(t) = flags.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Malformed(format!("tolerance {t} must be positive")));
            }
            solver.opt_tol = t;
            bound.opt_tol = t;
            cap_tol = t;
        }
        Ok(Self {
            unit: if flags.nats { RateUnit::Nats } else { RateUnit::Bits },
            solver,
            bound,
            cap_tol,
            flags: flags.clone(),
        })
    }

    fn unit_name(&self) -> &'static str {
        match self.unit {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        }
    }

    fn rate(&self, r: RateValue) -> f64 {
        r.to(self.unit).value()
    }

    fn nats(&self, v: f64) -> f64 {
        self.rate(RateValue::from_nats(v.max(0.0)))
    }

    fn show(&self, r: RateValue) -> String {
        r.to(self.unit).to_string()
    }
}

/// Parses arguments and runs; returns the exit code and the text to print.
pub fn run_args<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => {
            let json = cli.flags.json;
            match run(&cli) {
                Ok(o) => (o.exit, if json { format!("{:#}\n", o.json) } else { o.text }),
                Err(e) => (e.exit_code(), if json { format!("{:#}\n", e.to_json()) } else { format!("error: {e}\n") }),
            }
        }
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_MALFORMED } else { EXIT_OK };
            (code, e.render().to_string())
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Ctx::new(&cli.flags)?;
    let load = |f: &FileArg| ProblemFile::read(&f.file)?.validate();
    let traced = matches!(cli.command, Command::BoundKg { .. } | Command::BoundSd { .. });
    if ctx.flags.trace.is_some() && !traced {
        return Err(CliError::Malformed("--trace applies to bound-kg and bound-sd only".into()));
    }
    match &cli.command {
        Command::Capacity(f) => capacity(&ctx, &load(f)?),
        Command::Gmi { file, fixed } => lower(&ctx, &load(file)?, "gmi", *fixed),
        Command::Lm { file, fixed } => lower(&ctx, &load(file)?, "lm", *fixed),
        Command::BoundKg { file, iters, letters } => {
            let p = load(file)?;
            let q = p.q.clone();
            bound_single(&ctx, &p, "q", &q, *iters, *letters, "bound-kg")
        }
        Command::BoundSd { file, rho, iters, letters } => bound_sd(&ctx, &load(file)?, rho.rho.as_deref(), *iters, *letters),
        Command::BoundCc { file, rho, star } => bound_cc(&ctx, &load(file)?, rho.rho.as_deref(), *star),
        Command::GammaCheck { file, rho } => gamma_check(&ctx, &load(file)?, rho.rho.as_deref()),
        Command::GammaCcCheck { file, rho, star } => gamma_cc_check(&ctx, &load(file)?, rho.rho.as_deref(), *star),
        Command::Superior { file, rho, cc } => relation(&ctx, &load(file)?, rho.rho.as_deref(), *cc, false),
        Command::Isomorphic { file, rho } => relation(&ctx, &load(file)?, rho.rho.as_deref(), false, true),
        Command::Tightness { file, scan } => tightness(&ctx, &load(file)?, *scan),
        Command::Simulate { file, rho, n, m, trials, mode, unchecked } => {
            let seed = ctx
                .flags
                .seed
                .ok_or_else(|| CliError::Malformed("simulate needs an explicit --seed".into()))?;
            let sim = SimArgs { n: *n, m: *m, trials: *trials, mode: *mode, unchecked: *unchecked, seed };
            simulate(&ctx, &load(file)?, rho.rho.as_deref(), &sim)
        }
        Command::Exponent { file, rate } => exponent(&ctx, &load(file)?, *rate),
    }
}

fn rows(m: &StochasticMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for r in m {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(s, "  [{}]", cells.join(", "));
    }
    s
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", cells.join(", "))
}

fn ok(text: String, json: Value) -> Result<Outcome, CliError> {
    Ok(Outcome { exit: EXIT_OK, text, json })
}

fn capacity(ctx: &Ctx, p: &Problem) -> Result<Outcome, CliError> {
    let c = channel_capacity(&p.w, ctx.cap_tol)?;
    let text = format!("capacity: {}\ninput: {}\n", ctx.show(c.rate), fmt_vec(c.input.as_slice()));
    let json = json!({
        "command": "capacity",
        "unit": ctx.unit_name(),
        "rate": ctx.rate(c.rate),
        "bracket": [ctx.nats(c.lower), ctx.nats(c.upper)],
        "input": c.input.as_slice(),
        "iterations": c.iterations,
    });
    ok(text, json)
}

fn lower(ctx: &Ctx, p: &Problem, which: &str, fixed: bool) -> Result<Outcome, CliError> {
    let (rate, input) = if fixed {
        let input = p
            .composition
            .clone()
            .ok_or_else(|| CliError::Malformed("--fixed needs a composition in the file".into()))?;
        let r = match which {
            "gmi" => gmi_rate(&p.w, &p.q, &input, &ctx.solver)?,
            _ => lm_rate(&p.w, &p.q, &input, &ctx.solver)?,
        };
        (r, input)
    } else {
        match which {
            "gmi" => gmi_rate_max(&p.w, &p.q, &ctx.solver)?,
            _ => lm_rate_max(&p.w, &p.q, &ctx.solver)?,
        }
    };
    let text = format!("{which}: {}\ninput: {}\n", ctx.show(rate), fmt_vec(input.as_slice()));
    let json = json!({
        "command": which,
        "unit": ctx.unit_name(),
        "rate": ctx.rate(rate),
        "input": input.as_slice(),
        "maximized": !fixed,
    });
    ok(text, json)
}

fn bound_json(ctx: &Ctx, r: &BoundResult) -> Value {
    json!({
        "rate": ctx.rate(r.rate),
        "bracket": [ctx.nats(r.lower), ctx.nats(r.upper)],
        "iterations": r.iterations(),
        "argmax_input": r.argmax_input.as_slice(),
        "argmin_z_marginal": rows(&r.argmin_z_marginal),
        "argmin_channel": r.argmin_channel.to_nested(),
    })
}

fn bound_text(ctx: &Ctx, label: &str, r: &BoundResult) -> String {
    format!(
        "{label}: {}\nbracket: [{:.6}, {:.6}] {}\niterations: {}\nargmax input: {}\nargmin Z-marginal:\n{}",
        ctx.show(r.rate),
        ctx.nats(r.lower),
        ctx.nats(r.upper),
        ctx.unit_name(),
        r.iterations(),
        fmt_vec(r.argmax_input.as_slice()),
        fmt_matrix(&rows(&r.argmin_z_marginal)),
    )
}

fn compute_bound(
    ctx: &Ctx,
    p: &Problem,
    rho: &mismatch_core::metric::AdditiveMetric,
    iters: Option<usize>,
    letters: usize,
) -> Result<BoundResult, CliError> {
    let mut cfg = ctx.bound;
    if let Some(t) = iters {
        cfg.fixed_iters = Some(t);
    }
    Ok(match letters {
        0 => return Err(CliError::Malformed("--letters must be at least 1".into())),
        1 => sd_bound(&p.w, &p.q, rho, &cfg)?,
        k => sd_bound_k(&p.w, &p.q, rho, k, &cfg)?,
    })
}

fn bound_single(
    ctx: &Ctx,
    p: &Problem,
    rho_name: &str,
    rho: &mismatch_core::metric::AdditiveMetric,
    iters: Option<usize>,
    letters: usize,
    command: &str,
) -> Result<Outcome, CliError> {
    let r = compute_bound(ctx, p, rho, iters, letters)?;
    if let Some(path) = &ctx.flags.trace {
        trace::write(path, &r)?;
    }
    let mut json = bound_json(ctx, &r);
    json["command"] = json!(command);
    json["unit"] = json!(ctx.unit_name());
    json["rho"] = json!(rho_name);
    json["letters"] = json!(letters);
    ok(bound_text(ctx, command, &r), json)
}

fn bound_sd(ctx: &Ctx, p: &Problem, name: Option<&str>, iters: Option<usize>, letters: usize) -> Result<Outcome, CliError> {
    if p.rhos.is_empty() {
        return Err(CliError::Malformed("bound-sd needs at least one [rho] metric".into()));
    }
    if name.is_some() || p.rhos.len() == 1 {
        let (n, rho) = p.rho(name)?;
        return bound_single(ctx, p, &n, &rho, iters, letters, "bound-sd");
    }
    // Every candidate; the bound is the smallest value.
    let mut per = Vec::new();
    let mut best: Option<(String, BoundResult)> = None;
    let mut last_err = None;
    let mut text = String::new();
    for (n, rho) in &p.rhos {
        match compute_bound(ctx, p, rho, iters, letters) {
            Ok(r) => {
                let _ = writeln!(text, "rho {n}: {}", ctx.show(r.rate));
                let mut j = bound_json(ctx, &r);
                j["rho"] = json!(n);
                per.push(j);
                if best.as_ref().is_none_or(|(_, b)| r.rate.nats() < b.rate.nats()) {
                    best = Some((n.clone(), r));
                }
            }
            Err(e @ CliError::Core(_)) if e.exit_code() == EXIT_INFEASIBLE => {
                let _ = writeln!(text, "rho {n}: {e}");
                let mut j = e.to_json();
                j["rho"] = json!(n);
                per.push(j);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((n, r)) = best else {
        return Err(last_err.expect("at least one candidate"));
    };
    if let Some(path) = &ctx.flags.trace {
        trace::write(path, &r)?;
    }
    text.push_str(&bound_text(ctx, &format!("bound-sd (rho {n})"), &r));
    let mut json = bound_json(ctx, &r);
    json["command"] = json!("bound-sd");
    json["unit"] = json!(ctx.unit_name());
    json["rho"] = json!(n);
    json["letters"] = json!(letters);
    json["candidates"] = Value::Array(per);
    ok(text, json)
}

fn bound_cc(ctx: &Ctx, p: &Problem, name: Option<&str>, star: bool) -> Result<Outcome, CliError> {
    let (label, rho) = if star {
        ("star".to_string(), None)
    } else {
        let (n, r) = p.rho_or_q(name)?;
        (n, Some(r))
    };
    let nz = rho.as_ref().map_or(p.nz, |r| r.outputs());
    let r = cc_bound_desk(&p.w, &p.q, rho.as_ref(), nz, &ctx.solver, &ctx.bound)?;
    let text = format!(
        "bound-cc ({label}): {}\nargmax input: {}\nargmin Z-marginal:\n{}",
        ctx.show(r.rate),
        fmt_vec(r.argmax_input.as_slice()),
        fmt_matrix(&rows(&r.argmin_z_marginal)),
    );
    let json = json!({
        "command": "bound-cc",
        "unit": ctx.unit_name(),
        "set": if star { "star" } else { "rho" },
        "rho": label,
        "rate": ctx.rate(r.rate),
        "argmax_input": r.argmax_input.as_slice(),
        "argmin_z_marginal": rows(&r.argmin_z_marginal),
        "argmin_channel": r.argmin_channel.to_nested(),
        "pattern": r.pattern,
        "grid_step": r.grid_step,
        "empty_points": r.empty_points,
    });
    ok(text, json)
}

fn gamma_check(ctx: &Ctx, p: &Problem, name: Option<&str>) -> Result<Outcome, CliError> {
    let (n, rho) = p.rho_or_q(name)?;
    let tie = ctx.bound.tie_tol;
    let pattern = SupportPattern::from_metrics(&p.q, &rho, tie)?;
    let (_, ny, nz) = pattern.dims();
    let mut table = Vec::new();
    let mut text = format!("support sets S(y,z) for (q, {n}):\n");
    for y in 0..ny {
        for z in 0..nz {
            let s = pattern.support_set(y, z);
            let _ = writeln!(text, "  S({y},{z}) = {:?}", s.members);
            table.push(json!({ "y": y, "z": z, "members": s.members }));
        }
    }
    let feas = gamma_nonempty_given_marginal(&p.w, &p.q, &rho, tie)?;
    let mut exit = EXIT_OK;
    let mut json = json!({ "command": "gamma-check", "rho": n, "support_sets": table, "nonempty": feas.feasible });
    match &feas.certificate {
        MarginalCertificate::Blocking { x, y } => {
            exit = EXIT_INFEASIBLE;
            let _ = writeln!(text, "empty: W({y}|{x}) > 0 but no z admits x={x} at y={y}");
            json["blocking_pair"] = json!({ "x": x, "y": y });
        }
        MarginalCertificate::Coupling { channel } => {
            let _ = writeln!(text, "nonempty: a member with Y-marginal W exists");
            json["member"] = json!(channel.to_nested());
        }
    }
    if let Some(c) = &p.coupling {
        let m = gamma_membership(c, &p.q, &rho, tie)?;
        json["coupling_member"] = json!(m.member);
        match &m.violation {
            Some(v) => {
                exit = EXIT_INFEASIBLE;
                let _ = writeln!(text, "coupling violates the support at (x={}, y={}, z={}) with mass {:.3e}", v.x, v.y, v.z, v.mass);
                json["coupling_violation"] = json!({ "x": v.x, "y": v.y, "z": v.z, "mass": v.mass });
            }
            None => {
                let _ = writeln!(text, "coupling is a member");
            }
        }
    }
    Ok(Outcome { exit, text, json })
}

fn cc_json(m: &CcMembership) -> Value {
    json!({
        "member": m.member,
        "lp_value": m.lp_value,
        "witness": m.witness.as_ref().map(|v| json!({ "dims": v.dims(), "mass": v.mass() })),
    })
}

fn gamma_cc_check(_ctx: &Ctx, p: &Problem, name: Option<&str>, star: bool) -> Result<Outcome, CliError> {
    let channel = p.coupling_or_splice()?;
    let comp = p.composition_or_uniform();
    let cfg = SolverConfig::default();
    let (label, m) = if star {
        ("star".to_string(), gamma_star_membership(&channel, &p.q, &comp, &cfg)?)
    } else {
        let (n, rho) = p.rho_or_q(name)?;
        let m = gamma_cc_membership(&channel, &p.q, &rho, &comp, &cfg)?;
        (n, m)
    };
    let verdict = if m.member { "member" } else { "not a member" };
    let text = format!(
        "gamma-cc-check ({label}) at P = {}: {verdict} (LP value {:.3e})\n",
        fmt_vec(comp.as_slice()),
        m.lp_value
    );
    let mut json = cc_json(&m);
    json["command"] = json!("gamma-cc-check");
    json["set"] = json!(label);
    json["composition"] = json!(comp.as_slice());
    Ok(Outcome { exit: if m.member { EXIT_OK } else { EXIT_INFEASIBLE }, text, json })
}

fn superiority_json(s: &Superiority) -> Value {
    json!({
        "holds": s.holds,
        "blocking_x": s.blocking_x,
        "coupling": s.certificate.as_ref().map(|c| c.coupling.to_nested()),
        "residuals": s.certificate.as_ref().map(|c| c.residuals.clone()),
    })
}

fn superiority_text(label: &str, s: &Superiority) -> String {
    match (s.holds, &s.certificate, s.blocking_x) {
        (true, Some(c), _) => {
            let worst = c.residuals.iter().cloned().fold(0.0, f64::max);
            format!("{label}: holds (coupling residual {worst:.2e})\n")
        }
        (_, _, Some(x)) => format!("{label}: fails, no admissible coupling for x = {x}\n"),
        _ => format!("{label}: fails\n"),
    }
}

fn relation(ctx: &Ctx, p: &Problem, name: Option<&str>, cc: bool, both: bool) -> Result<Outcome, CliError> {
    let w2 = p
        .w2
        .clone()
        .or_else(|| p.candidate.clone())
        .ok_or_else(|| CliError::Malformed("needs a second channel (w2 or candidate)".into()))?;
    let (n, rho) = p.rho_or_q(name)?;
    let tie = ctx.bound.tie_tol;
    if both {
        let iso = isomorphic(&p.w, &p.q, &w2, &rho, tie, &ctx.solver)?;
        let text = format!(
            "{}{}isomorphic: {}\n",
            superiority_text("forward", &iso.forward),
            superiority_text("backward", &iso.backward),
            iso.holds
        );
        let json = json!({
            "command": "isomorphic",
            "rho": n,
            "holds": iso.holds,
            "forward": superiority_json(&iso.forward),
            "backward": superiority_json(&iso.backward),
        });
        return Ok(Outcome { exit: if iso.holds { EXIT_OK } else { EXIT_INFEASIBLE }, text, json });
    }
    let s = if cc {
        let comp = p.composition_or_uniform();
        superior_cc(&comp, &p.w, &p.q, &w2, &rho, &ctx.solver)?
    } else {
        superior(&p.w, &p.q, &w2, &rho, tie, &ctx.solver)?
    };
    let mut json = superiority_json(&s);
    json["command"] = json!("superior");
    json["rho"] = json!(n);
    json["composition_dependent"] = json!(cc);
    Ok(Outcome {
        exit: if s.holds { EXIT_OK } else { EXIT_INFEASIBLE },
        text: superiority_text("superior", &s),
        json,
    })
}

fn tightness(ctx: &Ctx, p: &Problem, scan: Option<usize>) -> Result<Outcome, CliError> {
    let tie = ctx.bound.tie_tol;
    let found: Option<(StochasticMatrix, Tightness)> = match (scan, &p.candidate) {
        (Some(steps), _) => scan_matched_candidates(&p.w, &p.q, steps, tie, &ctx.solver)?,
        (None, Some(c)) => {
            let t = mismatch_core::relations::tightness_certificate(&p.w, &p.q, c, tie, &ctx.solver)?;
            Some((c.clone(), t))
        }
        (None, None) => return Err(CliError::Malformed("tightness needs a candidate or --scan".into())),
    };
    let Some((cand, t)) = found else {
        let text = "tightness: no certified candidate on the grid\n".to_string();
        let json = json!({ "command": "tightness", "certified": false, "candidate": Value::Null });
        return Ok(Outcome { exit: EXIT_INFEASIBLE, text, json });
    };
    let mut text = String::new();
    text.push_str(&superiority_text("(W,q) -> (V,q)", &t.to_candidate.forward));
    text.push_str(&superiority_text("(V,q) -> (W,q)", &t.to_candidate.backward));
    text.push_str(&superiority_text("(V,q) -> (V,log V)", &t.to_matched.forward));
    text.push_str(&superiority_text("(V,log V) -> (V,q)", &t.to_matched.backward));
    let _ = writeln!(text, "candidate capacity: {}", ctx.show(t.capacity));
    let _ = writeln!(text, "tightness: {}", t.certified);
    let json = json!({
        "command": "tightness",
        "certified": t.certified,
        "unit": ctx.unit_name(),
        "capacity": ctx.rate(t.capacity),
        "candidate": rows(&cand),
        "to_candidate": { "forward": superiority_json(&t.to_candidate.forward), "backward": superiority_json(&t.to_candidate.backward) },
        "to_matched": { "forward": superiority_json(&t.to_matched.forward), "backward": superiority_json(&t.to_matched.backward) },
    });
    Ok(Outcome { exit: if t.certified { EXIT_OK } else { EXIT_INFEASIBLE }, text, json })
}

struct SimArgs {
    n: usize,
    m: usize,
    trials: u64,
    mode: Mode,
    unchecked: bool,
    seed: u64,
}

fn simulate(_ctx: &Ctx, p: &Problem, name: Option<&str>, a: &SimArgs) -> Result<Outcome, CliError> {
    let channel: BroadcastChannel = p.coupling_or_splice()?;
    let (n, rho) = p.rho_or_q(name)?;
    let sim = SimConfig {
        blocklength: a.n,
        codebook_size: a.m,
        composition: p.composition_or_uniform(),
        mode: match a.mode {
            Mode::Iid => CodebookMode::Iid,
            Mode::Cc => CodebookMode::ConstantComposition,
        },
        trials: a.trials,
        seed: a.seed,
    };
    let r = if a.unchecked {
        simulate_joint(&channel, &p.q, &rho, &sim)?
    } else {
        simulate_containment(&channel, &p.q, &rho, &sim)?
    };
    let text = format!(
        "trials: {}\nboth correct: {}\nq correct, rho wrong: {}\nq wrong, rho correct: {}\nboth wrong: {}\nq errors: {}\nrho errors: {}\n",
        r.trials,
        r.both_correct,
        r.q_correct_rho_wrong,
        r.q_wrong_rho_correct,
        r.both_wrong,
        r.q_errors(),
        r.rho_errors()
    );
    let json = json!({
        "command": "simulate",
        "rho": n,
        "seed": a.seed,
        "blocklength": a.n,
        "codebook_size": a.m,
        "mode": match a.mode { Mode::Iid => "iid", Mode::Cc => "cc" },
        "checked": !a.unchecked,
        "report": r,
        "q_errors": r.q_errors(),
        "rho_errors": r.rho_errors(),
    });
    ok(text, json)
}

fn exponent(ctx: &Ctx, p: &Problem, rate: f64) -> Result<Outcome, CliError> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(CliError::Malformed(format!("rate {rate} must be finite and nonnegative")));
    }
    let comp: ProbVector = p.composition_or_uniform();
    let r = RateValue::new(rate, ctx.unit);
    let e = correct_decoding_exponent(&comp, &p.w, r, &ExponentConfig::default())?;
    let text = format!("exponent: {}\n", ctx.show(RateValue::from_nats(e)));
    let json = json!({
        "command": "exponent",
        "unit": ctx.unit_name(),
        "rate": rate,
        "composition": comp.as_slice(),
        "exponent": ctx.nats(e),
    });
    ok(text, json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_command_is_malformed() {
        let (code, _) = run_args(["mismatch", "frobnicate", "x.toml"]);
        assert_eq!(code, error::EXIT_MALFORMED);
    }

    #[test]
    fn missing_file_is_malformed() {
        let (code, out) = run_args(["mismatch", "capacity", "/nonexistent/problem.toml"]);
        assert_eq!(code, error::EXIT_MALFORMED);
        assert!(out.contains("cannot read"));
    }
}
