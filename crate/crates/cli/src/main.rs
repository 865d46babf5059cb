mod report;

use std::fmt::Display;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use arcforge::arcs::{
    arc_metric, is_delta_distributed, phi, recover_arc, scale_distance, segment_masses, ArcFile,
    StandardArc, DEFAULT_ARC_TOL,
};
use arcforge::canon1d::{classify, to_three_layer, Pwl1D};
use arcforge::families::{decode_network, gamma, walk_measure, walk_shift};
use arcforge::fixtures::{delta_pair, perturb_arc, random_arc, rng};
use arcforge::measures::{
    prokhorov_exact, prokhorov_upper, DiscreteMeasure, MeasureFile, DEFAULT_PROKHOROV_TOL,
    MAX_EXACT_SUPPORT,
};
use arcforge::relu_net::{NetworkFile, ReluNetwork};
use arcforge::synthesis::{synthesize_arc_transport, Transport};

use report::{Check, Inputs, Relation, RunReport};

#[derive(Parser)]
#[command(
    name = "arcforge",
    version,
    about = "ReLU transport onto polygonal arcs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a network pushing a measure onto an arc.
    Synth {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        arc: PathBuf,
        /// Where to write the network; without it the network goes into the report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Atom positions after each stage, as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check that a network (synthesized if omitted) transports a measure onto an arc.
    Verify {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        arc: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonical form of a one-dimensional network.
    Canon {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        verify_grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid values of the network, its form and the three-layer network.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Prokhorov distance between two measures.
    Prokhorov {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PROKHOROV_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Space-filling-curve sequence at `t`, optionally decoded into a network.
    Gamma {
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        /// Decode the sequence as a network on R^d.
        #[arg(long)]
        decode: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Walk-family measure at `t` with invariance checks.
    Walk {
        #[arg(long)]
        t: f64,
        #[arg(long, num_args = 2, value_names = ["F0", "F1"])]
        nets: Vec<PathBuf>,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random δ-distributed pairs against the arc Lipschitz constants.
    Lipschitz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 500)]
        arcs: usize,
        #[arg(long, default_value_t = 10)]
        max_atoms: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scatter rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Malformed input; exits with status 2.
struct InputError(String);

trait Context<T> {
    fn ctx(self, context: impl Display) -> Result<T, InputError>;
}

impl<T, E: Display> Context<T> for Result<T, E> {
    fn ctx(self, context: impl Display) -> Result<T, InputError> {
        self.map_err(|e| InputError(format!("{context}: {e}")))
    }
}

fn load<F: DeserializeOwned>(path: &Path, inputs: &mut Inputs) -> Result<F, InputError> {
    let bytes = fs::read(path).ctx(path.display())?;
    inputs.add(&path.display().to_string(), &bytes);
    serde_json::from_slice(&bytes).ctx(path.display())
}

fn load_measure(path: &Path, inputs: &mut Inputs) -> Result<DiscreteMeasure, InputError> {
    DiscreteMeasure::try_from(load::<MeasureFile>(path, inputs)?).ctx(path.display())
}

fn load_arc(path: &Path, inputs: &mut Inputs) -> Result<StandardArc, InputError> {
    StandardArc::try_from(load::<ArcFile>(path, inputs)?).ctx(path.display())
}

fn load_net(path: &Path, inputs: &mut Inputs) -> Result<ReluNetwork, InputError> {
    ReluNetwork::try_from(load::<NetworkFile>(path, inputs)?).ctx(path.display())
}

fn write(path: &Path, text: &str) -> Result<(), InputError> {
    fs::write(path, text).ctx(path.display())
}

struct Run {
    report: RunReport,
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match execute(cli.command) {
        Ok(run) => run,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let text = serde_json::to_string_pretty(&run.report).expect("report serialises");
    match &run.out {
        Some(path) => {
            if let Err(InputError(msg)) = write(path, &text) {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        }
        // A closed pipe is not an error worth reporting.
        None => drop(writeln!(std::io::stdout(), "{text}")),
    }
    if run.report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(command: Command) -> Result<Run, InputError> {
    let mut inputs = Inputs::default();
    match command {
        Command::Synth {
            measure,
            arc,
            out,
            csv,
        } => {
            let mu = load_measure(&measure, &mut inputs)?;
            let target = load_arc(&arc, &mut inputs)?;
            let transport = synthesize_arc_transport(&mu, &target).ctx("synthesis")?;
            let (mut outputs, checks) =
                transport_checks(&mu, &target, &transport.network, Some(transport.delta))?;
            outputs["axis"] = json!(transport.axis);
            outputs["sign"] = json!(transport.sign);
            outputs["breakpoints"] = json!(transport.plan.breakpoints());
            outputs["knots"] = json!(transport.plan.knots());
            outputs["depth"] = json!(transport.network.depth());
            let net_json = serde_json::to_string_pretty(&transport.network.to_file())
                .expect("network serialises");
            match &out {
                Some(path) => write(path, &net_json)?,
                None => {
                    outputs["network"] = serde_json::to_value(transport.network.to_file())
                        .expect("network serialises")
                }
            }
            if let Some(path) = csv {
                write(
                    &path,
                    &stage_csv(&mu, &target, &transport).ctx("stage dump")?,
                )?;
            }
            Ok(Run {
                report: RunReport::new("synth", &inputs, outputs, checks),
                out: None,
            })
        }
        Command::Verify {
            measure,
            arc,
            net,
            out,
        } => {
            let mu = load_measure(&measure, &mut inputs)?;
            let target = load_arc(&arc, &mut inputs)?;
            let (network, delta) = match net {
                Some(path) => (load_net(&path, &mut inputs)?, None),
                None => {
                    let t = synthesize_arc_transport(&mu, &target).ctx("synthesis")?;
                    (t.network, Some(t.delta))
                }
            };
            let (outputs, checks) = transport_checks(&mu, &target, &network, delta)?;
            Ok(Run {
                report: RunReport::new("verify", &inputs, outputs, checks),
                out,
            })
        }
        Command::Canon {
            net,
            verify_grid,
            out,
            csv,
        } => {
            let network = load_net(&net, &mut inputs)?;
            inputs.param("verify_grid", verify_grid);
            let (outputs, checks, rows) = canon(&network, verify_grid)?;
            if let Some(path) = csv {
                write(&path, &rows)?;
            }
            Ok(Run {
                report: RunReport::new("canon", &inputs, outputs, checks),
                out,
            })
        }
        Command::Prokhorov { mu, nu, tol, out } => {
            let a = load_measure(&mu, &mut inputs)?;
            let b = load_measure(&nu, &mut inputs)?;
            inputs.param("tol", tol);
            let upper = prokhorov_upper(&a, &b).ctx("prokhorov")?;
            let mut checks = Vec::new();
            let exact = if a.len() + b.len() <= MAX_EXACT_SUPPORT {
                let exact = prokhorov_exact(&a, &b, tol).ctx("prokhorov")?;
                checks.push(Check::new(
                    "upper_dominates_exact",
                    exact - upper,
                    Relation::Le,
                    tol,
                ));
                Some(exact)
            } else {
                None
            };
            let outputs = json!({ "d_p": exact, "d_p_upper": upper });
            Ok(Run {
                report: RunReport::new("prokhorov", &inputs, outputs, checks),
                out,
            })
        }
        Command::Gamma {
            t,
            depth,
            decode,
            out,
        } => {
            inputs.param("t", t);
            inputs.param("depth", depth);
            let seq = gamma(t, depth).ctx("gamma")?;
            let mut outputs = json!({ "t": t, "depth": depth, "sequence": seq });
            let nonfinite = seq.iter().filter(|x| !x.is_finite()).count();
            if let Some(d) = decode {
                inputs.param("decode", d);
                let net = decode_network(&seq, d).ctx("decode")?;
                outputs["network"] =
                    serde_json::to_value(net.to_file()).expect("network serialises");
            }
            Ok(Run {
                report: RunReport::new(
                    "gamma",
                    &inputs,
                    outputs,
                    vec![Check::count("nonfinite_entries", nonfinite)],
                ),
                out,
            })
        }
        Command::Walk {
            t,
            nets,
            measure,
            out,
        } => {
            let f0 = load_net(&nets[0], &mut inputs)?;
            let f1 = load_net(&nets[1], &mut inputs)?;
            let mu = load_measure(&measure, &mut inputs)?;
            inputs.param("t", t);
            let mt = walk_measure(t, &f0, &f1, &mu).ctx("walk")?;
            let mut checks = Vec::new();
            let mut shifts = Vec::new();
            for (i, f) in [&f0, &f1].into_iter().enumerate() {
                let s = walk_shift(t, i as u8).ctx("walk")?;
                let lhs = mt.pushforward(f).ctx("walk")?;
                let rhs = walk_measure(s, &f0, &f1, &mu).ctx("walk")?;
                checks.push(Check::new(
                    format!("f{i}_invariance_d_p"),
                    distance(&lhs, &rhs)?,
                    Relation::Le,
                    0.0,
                ));
                shifts.push(s);
            }
            let outputs = json!({ "t": t, "measure": mt.to_file(), "shifts": shifts });
            Ok(Run {
                report: RunReport::new("walk", &inputs, outputs, checks),
                out,
            })
        }
        Command::Lipschitz {
            seed,
            pairs,
            arcs,
            max_atoms,
            eps,
            out,
            csv,
        } => {
            for (name, value) in [
                ("seed", seed as f64),
                ("pairs", pairs as f64),
                ("arcs", arcs as f64),
                ("max_atoms", max_atoms as f64),
                ("eps", eps),
            ] {
                inputs.param(name, value);
            }
            if !(2..=MAX_EXACT_SUPPORT / 2).contains(&max_atoms) || eps.is_nan() || eps <= 0.0 {
                return Err(InputError(format!(
                    "need 2 <= max_atoms <= {} and eps > 0",
                    MAX_EXACT_SUPPORT / 2
                )));
            }
            let (outputs, checks, rows) = lipschitz(seed, pairs, arcs, max_atoms, eps)?;
            if let Some(path) = csv {
                write(&path, &rows)?;
            }
            Ok(Run {
                report: RunReport::new("lipschitz", &inputs, outputs, checks),
                out,
            })
        }
    }
}

/// Exact Prokhorov distance when the supports are small enough, else the
/// greedy upper bound. Equal measures give zero either way.
fn distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, InputError> {
    if a.same_as(b) {
        return Ok(0.0);
    }
    if a.len() + b.len() <= MAX_EXACT_SUPPORT {
        prokhorov_exact(a, b, DEFAULT_PROKHOROV_TOL).ctx("prokhorov")
    } else {
        prokhorov_upper(a, b).ctx("prokhorov")
    }
}

fn transport_checks(
    mu: &DiscreteMeasure,
    target: &StandardArc,
    network: &ReluNetwork,
    delta: Option<f64>,
) -> Result<(Value, Vec<Check>), InputError> {
    let tol = DEFAULT_ARC_TOL;
    let image = mu.pushforward(network).ctx("pushforward")?;
    let deviation = image
        .points()
        .iter()
        .map(|p| target.distance(p))
        .fold(0.0, f64::max);
    let masses = segment_masses(&image, target, tol);
    let delta = delta.unwrap_or_else(|| masses.iter().copied().fold(f64::INFINITY, f64::min));
    let mut checks = vec![
        Check::new("delta", delta, Relation::Gt, 0.0),
        Check::new("max_support_deviation", deviation, Relation::Lt, tol),
        Check::count(
            "not_delta_distributed",
            usize::from(!is_delta_distributed(&image, target, delta, tol)),
        ),
        Check::new(
            "mass_defect",
            (image.total_mass() - mu.total_mass()).abs(),
            Relation::Le,
            1e-12,
        ),
    ];
    let mut outputs = json!({
        "m": target.m(),
        "delta": delta,
        "segment_masses": masses,
        "max_support_deviation": deviation,
    });
    match recover_arc(&image, target.m(), delta, tol) {
        Ok(recovered) => {
            let err = scale_distance(&recovered, target).expect("same order");
            outputs["recovered_scales"] = json!(recovered.scale_map());
            outputs["scale_error"] = json!(err);
            outputs["arc_metric"] = json!(arc_metric(&recovered, target).expect("same order"));
            checks.push(Check::new("recovered_scale_error", err, Relation::Lt, tol));
        }
        Err(e) => {
            outputs["recovery_error"] = json!(e.to_string());
            checks.push(Check::count("recovery_failed", 1));
        }
    }
    Ok((outputs, checks))
}

/// Rows `stage,index,x,y,weight`: arc vertices, then the atoms after the
/// projection, each clip, resize and bend layer.
fn stage_csv(
    mu: &DiscreteMeasure,
    target: &StandardArc,
    t: &Transport,
) -> Result<String, arcforge::NetError> {
    let mut out = String::from("stage,index,x,y,weight\n");
    for (i, v) in target.vertices().iter().enumerate() {
        writeln!(out, "arc,{i},{},{},", v[0], v[1]).unwrap();
    }
    let mut points: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|p| t.projection.eval(p).map(|q| q[..2].to_vec()))
        .collect::<Result<_, _>>()?;
    let mut dump = |stage: &str, points: &[Vec<f64>]| {
        for (i, (p, w)) in points.iter().zip(mu.weights()).enumerate() {
            writeln!(out, "{stage},{i},{},{},{w}", p[0], p[1]).unwrap();
        }
    };
    dump("project", &points);
    let stages = [("clip", &t.clip), ("resize", &t.resize), ("bend", &t.bend)];
    for (name, net) in stages {
        for (k, layer) in net.layers().iter().enumerate() {
            points = points
                .iter()
                .map(|p| layer.eval(p))
                .collect::<Result<_, _>>()?;
            dump(&format!("{name}{k}"), &points);
        }
    }
    Ok(out)
}

fn canon(net: &ReluNetwork, grid: usize) -> Result<(Value, Vec<Check>, String), InputError> {
    let pwl = Pwl1D::from_network(net).ctx("canon")?;
    let form = classify(net).ctx("canon")?;
    let params = to_three_layer(&form);
    let emitted = params.to_network();
    let eval = |n: &ReluNetwork, x: f64| n.eval(&[x]).expect("scalar network")[0];

    let mut marks: Vec<f64> = pwl.breakpoints().to_vec();
    marks.extend(form.breakpoints());
    let lo = marks.iter().copied().fold(0.0f64, f64::min) - 10.0;
    let hi = marks.iter().copied().fold(0.0f64, f64::max) + 10.0;
    let steps = grid.max(2) - 1;
    let xs = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64);

    let mut rows = String::from("x,network,form,three_layer\n");
    let (mut form_err, mut emit_err) = (0.0f64, 0.0f64);
    for x in xs.chain(marks.iter().copied()) {
        let (want, canon, three) = (eval(net, x), form.eval(x), eval(&emitted, x));
        form_err = form_err.max((canon - want).abs());
        emit_err = emit_err.max((three - canon).abs());
        writeln!(rows, "{x},{want},{canon},{three}").unwrap();
    }
    let outputs = json!({ "form": form, "params": params, "grid": [lo, hi, grid] });
    let checks = vec![
        Check::new("form_vs_network", form_err, Relation::Le, 1e-9),
        Check::new("three_layer_vs_form", emit_err, Relation::Le, 1e-9),
    ];
    Ok((outputs, checks, rows))
}

fn lipschitz(
    seed: u64,
    pairs: usize,
    arcs: usize,
    max_atoms: usize,
    eps: f64,
) -> Result<(Value, Vec<Check>, String), InputError> {
    let mut r = rng(seed);
    let mut rows = String::from("kind,m,d_p,d_ca,bound,scale_diff\n");
    let mut pair_rows = Vec::new();
    let mut vertex_violations = 0;
    for _ in 0..pairs {
        let pair = delta_pair(&mut r, max_atoms, eps);
        let dp = prokhorov_exact(&pair.mu1, &pair.mu2, DEFAULT_PROKHOROV_TOL).ctx("prokhorov")?;
        if dp > pair.delta {
            continue;
        }
        let m = pair.arc1.m();
        let dca = arc_metric(&pair.arc1, &pair.arc2).expect("same order");
        let bound = 2.0 * std::f64::consts::SQRT_2 / phi(m).sin() * dp;
        vertex_violations += usize::from(dca > bound);
        writeln!(rows, "vertex,{m},{dp},{dca},{bound},").unwrap();
        pair_rows.push(json!({ "m": m, "d_p": dp, "d_ca": dca, "bound": bound }));
    }
    let mut scale_rows = Vec::new();
    let mut scale_violations = 0;
    for k in 0..arcs {
        let m = r.random_range(2..=12);
        let a = random_arc(&mut r, m, 0.05, 4.0);
        let b = if k % 2 == 0 {
            random_arc(&mut r, m, 0.05, 4.0)
        } else {
            perturb_arc(&mut r, &a, eps)
        };
        let dca = arc_metric(&a, &b).expect("same order");
        let diff = scale_distance(&a, &b).expect("same order");
        scale_violations += usize::from(diff > 2.0 * dca);
        writeln!(rows, "scale,{m},,{dca},{},{diff}", 2.0 * dca).unwrap();
        scale_rows.push(json!({ "m": m, "d_ca": dca, "scale_diff": diff }));
    }
    let outputs = json!({
        "pairs_used": pair_rows.len(),
        "vertex_rows": pair_rows,
        "scale_rows": scale_rows,
    });
    let checks = vec![
        Check::count("vertex_bound_violations", vertex_violations),
        Check::count("scale_bound_violations", scale_violations),
    ];
    Ok((outputs, checks, rows))
}
