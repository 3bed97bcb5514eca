//! Command-line front end: generate example measures, analyze a measure
//! file, run verification suites, and sweep generator families. All stdout
//! output is deterministic for a fixed config and seed; timings go to
//! stderr.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use multiscale::coeffs::beta_cube;
use multiscale::energy::{carleson_sweep, integer_s, jones_exact, wolff_exact, EnergyKind};
use multiscale::filters::{d_m_set, up_filter, FilterConfig, UpsilonKind};
use multiscale::lattice::{charged_cubes, DyadicCube, DyadicLattice};
use multiscale::sqfn::constituent;
use multiscale::suites::{run_suite, Verdict};
use multiscale::{generate, DiscreteMeasure, GeneratorSpec};

#[derive(Parser)]
#[command(name = "multiscale", version, about = "Multiscale geometry of discrete measures")]
struct Cli {
    /// Worker threads for parallel per-cube work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a measure file from a JSON generator spec.
    Generate {
        /// Generator spec as JSON, e.g. {"family":"cantor_four_corner","generation":3}.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output measure file path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-cube coefficient, energy, and constituent tables for a measure.
    Analyze {
        #[arg(long)]
        measure: PathBuf,
        /// Lattice origin, comma-separated (default: zeros).
        #[arg(long, allow_hyphen_values = true)]
        origin: Option<String>,
        /// Dyadic level range k0:k1 (default: derived from the measure).
        #[arg(long, allow_hyphen_values = true)]
        levels: Option<String>,
        /// Constituent dilation parameter.
        #[arg(long = "A", default_value_t = 2.0)]
        a: f64,
        /// Filter density-gain parameter; enables the filter columns.
        #[arg(long)]
        eps: Option<f64>,
        /// Low-density filter exponent offset.
        #[arg(long)]
        delta: Option<f64>,
        /// Ancestor depth for the low-density filter.
        #[arg(long = "M")]
        m: Option<u32>,
        #[arg(long, default_value_t = 6)]
        nodes_per_octave: usize,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named verification suite; nonzero exit on any failed check.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a generator family over a parameter range.
    Sweep {
        /// One of: cantor_four_corner, cantor_self_similar, lipschitz_graph.
        #[arg(long)]
        family: String,
        /// Inclusive integer parameter range a:b.
        #[arg(long)]
        range: String,
        /// Dyadic level range for the per-cube sweep (default -2:0).
        #[arg(long, allow_hyphen_values = true)]
        levels: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_levels(text: &str) -> Result<(i32, i32)> {
    let (a, b) = text
        .split_once(':')
        .context("level range must look like k0:k1")?;
    let lo: i32 = a.trim().parse().context("bad k0")?;
    let hi: i32 = b.trim().parse().context("bad k1")?;
    if lo > hi {
        bail!("empty level range {lo}:{hi}");
    }
    Ok((lo, hi))
}

fn parse_origin(text: &str, dim: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().context("bad origin coordinate"))
        .collect::<Result<_>>()?;
    if v.len() != dim {
        bail!("origin has {} coordinates, measure has dimension {dim}", v.len());
    }
    Ok(v)
}

fn index_key(q: &DyadicCube) -> String {
    q.index
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Filter parameters from the optional flags; defaults fill the gaps.
fn filter_config(s: f64, eps: Option<f64>, delta: Option<f64>, m: Option<u32>) -> Result<FilterConfig> {
    let eps = eps.unwrap_or(0.05);
    let n = s.ceil() - 1.0;
    let delta = delta.unwrap_or(0.4 * (s - n - eps));
    let m = m.unwrap_or(6);
    let upsilon = if (s - s.round()).abs() < 1e-12 {
        UpsilonKind::BetaTimesDensity
    } else {
        UpsilonKind::Density
    };
    Ok(FilterConfig::new(s, eps, delta, m, upsilon)?)
}

fn emit(buf: &str, out: &Option<PathBuf>) -> Result<()> {
    print!("{buf}");
    if let Some(path) = out {
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_generate(spec_text: &str, seed: u64, out: &PathBuf) -> Result<()> {
    let spec: GeneratorSpec =
        serde_json::from_str(spec_text).context("parsing generator spec JSON")?;
    let mu = generate(&spec, seed)?;
    std::fs::write(out, mu.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "n={} mass={} min_sep={} diam={}",
        mu.len(),
        mu.total_mass(),
        mu.min_sep(),
        mu.diam()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    measure: &PathBuf,
    origin: &Option<String>,
    levels: &Option<String>,
    a: f64,
    eps: Option<f64>,
    delta: Option<f64>,
    m: Option<u32>,
    npo: usize,
    out: &Option<PathBuf>,
) -> Result<()> {
    let text = std::fs::read_to_string(measure)
        .with_context(|| format!("reading {}", measure.display()))?;
    let mu = DiscreteMeasure::from_json(&text)?;
    let d = mu.dim();
    let lat = match origin {
        Some(o) => DyadicLattice::new(parse_origin(o, d)?),
        None => DyadicLattice::standard(d),
    };
    let (lo, hi) = match levels {
        Some(text) => parse_levels(text)?,
        None => multiscale::lattice::default_levels(&mu)?,
    };
    let with_filters = eps.is_some() || delta.is_some() || m.is_some();
    let cfg = if with_filters {
        Some(filter_config(mu.s(), eps, delta, m)?)
    } else {
        None
    };

    let mut buf = String::new();
    let n_beta = mu.s().ceil().max(1.0) as usize;
    let beta_n = n_beta.min(d.saturating_sub(1)).max(1);

    let (dm, up): (Vec<DyadicCube>, Vec<(DyadicCube, bool)>) = match &cfg {
        Some(cfg) => {
            let dm = d_m_set(&mu, &lat, cfg, lo, hi)?;
            let up = up_filter(&mu, &lat, cfg, lo, hi)?
                .into_iter()
                .map(|r| (r.cube, r.in_up))
                .collect();
            (dm, up)
        }
        None => (Vec::new(), Vec::new()),
    };

    if with_filters {
        writeln!(buf, "# schema: level index i_mass density beta constituent in_dm in_up")?;
    } else {
        writeln!(buf, "# schema: level index i_mass density beta constituent")?;
    }
    for (q, i_mass) in charged_cubes(&mu, &lat, lo, hi)? {
        let dens = i_mass / q.side().powf(mu.s());
        let beta = beta_cube(&mu, &lat, &q, beta_n)?.value;
        let cst = constituent(&mu, &lat, &q, a, npo.max(4))?.value;
        write!(
            buf,
            "{}\t{}\t{}\t{}\t{}\t{}",
            q.level,
            index_key(&q),
            i_mass,
            dens,
            beta,
            cst
        )?;
        if with_filters {
            let in_dm = dm.contains(&q);
            let in_up = up
                .iter()
                .find(|(c, _)| c == &q)
                .map(|&(_, s)| s)
                .unwrap_or(false);
            write!(buf, "\t{in_dm}\t{in_up}")?;
        }
        writeln!(buf)?;
    }

    writeln!(buf, "# schema: energy_kind total per_unit_mass r_min r_max")?;
    if mu.len() >= 2 && mu.min_sep().is_finite() && mu.min_sep() > 0.0 {
        let r_max = 2.0 * mu.diam();
        let w = wolff_exact(&mu, None, 2.0 * mu.min_sep(), r_max)?;
        writeln!(
            buf,
            "wolff\t{}\t{}\t{}\t{}",
            w.total,
            w.total / mu.total_mass(),
            w.r_min,
            w.r_max
        )?;
        if integer_s(&mu).is_ok() && (1..d).contains(&(mu.s() as usize)) {
            let j = jones_exact(&mu, None, 0.5 * mu.min_sep(), r_max)?;
            writeln!(
                buf,
                "jones\t{}\t{}\t{}\t{}",
                j.total,
                j.total / mu.total_mass(),
                j.r_min,
                j.r_max
            )?;
        }
    }

    let summary = serde_json::json!({
        "command": "analyze",
        "measure": measure.display().to_string(),
        "dim": d,
        "s": mu.s(),
        "n_points": mu.len(),
        "levels": [lo, hi],
        "A": a,
        "nodes_per_octave": npo,
        "filters": cfg.as_ref().map(|c| serde_json::json!({
            "eps": c.eps, "delta": c.delta, "M": c.m,
        })),
    });
    writeln!(buf, "# summary")?;
    writeln!(buf, "{summary}")?;
    emit(&buf, out)
}

fn cmd_verify(suite: &str, seed: u64, out: &Option<PathBuf>) -> Result<bool> {
    let rep = run_suite(suite, seed)?;
    let mut buf = String::new();
    writeln!(buf, "# schema: verdict check measured threshold provenance")?;
    for r in &rep.rows {
        writeln!(
            buf,
            "{}\t{}\t{:e}\t{:e}\t{}",
            match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Vacuous => "vacuous",
            },
            r.name,
            r.measured,
            r.threshold,
            format!("{:?}", r.provenance).to_lowercase(),
        )?;
    }
    writeln!(buf, "# summary")?;
    let summary = serde_json::json!({
        "command": "verify",
        "suite": rep.suite,
        "seed": rep.seed,
        "passed": rep.passed(),
        "rows": rep.rows,
    });
    writeln!(buf, "{summary}")?;
    emit(&buf, out)?;
    Ok(rep.passed())
}

fn cmd_sweep(
    family: &str,
    range: &str,
    levels: &Option<String>,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<()> {
    let (p0, p1) = {
        let (a, b) = range.split_once(':').context("range must look like a:b")?;
        let lo: i64 = a.trim().parse().context("bad range start")?;
        let hi: i64 = b.trim().parse().context("bad range end")?;
        if lo > hi {
            bail!("empty parameter range {lo}:{hi}");
        }
        (lo, hi)
    };
    let (lo, hi) = match levels {
        Some(text) => parse_levels(text)?,
        None => (-2, 0),
    };
    let mut buf = String::new();
    writeln!(buf, "# schema: parameter n_points energy_kind carleson_sup constituent_sum")?;
    for p in p0..=p1 {
        let t0 = Instant::now();
        let (mu, kind) = match family {
            "cantor_four_corner" => {
                if !(0..=8).contains(&p) {
                    bail!("generation {p} out of range 0..=8");
                }
                (
                    generate(&GeneratorSpec::CantorFourCorner { generation: p as u32 }, seed)?,
                    EnergyKind::Jones,
                )
            }
            "cantor_self_similar" => {
                if !(0..=8).contains(&p) {
                    bail!("generation {p} out of range 0..=8");
                }
                (
                    generate(
                        &GeneratorSpec::CantorSelfSimilar {
                            dim: 2,
                            contraction_ratio: 0.3,
                            generation: p as u32,
                        },
                        seed,
                    )?,
                    EnergyKind::Wolff,
                )
            }
            "lipschitz_graph" => {
                if !(1..=10).contains(&p) {
                    bail!("refinement exponent {p} out of range 1..=10");
                }
                (
                    generate(
                        &GeneratorSpec::LipschitzGraph {
                            dim: 2,
                            n: 1,
                            lip_const: 0.3,
                            extent: 2.0,
                            grid_step: 2f64.powi(-(p as i32)),
                        },
                        seed,
                    )?,
                    EnergyKind::Jones,
                )
            }
            _ => bail!(
                "unknown family {family:?}; known: cantor_four_corner, cantor_self_similar, lipschitz_graph"
            ),
        };
        let lat = DyadicLattice::standard(mu.dim());
        let sup = carleson_sweep(&mu, &lat, kind, lo, hi)?.sup_ratio;
        let mut cst_sum = 0.0;
        for (q, _) in charged_cubes(&mu, &lat, hi, hi)? {
            cst_sum += constituent(&mu, &lat, &q, 2.0, 6)?.value;
        }
        let kind_name = match kind {
            EnergyKind::Wolff => "wolff",
            EnergyKind::Jones => "jones",
        };
        writeln!(buf, "{p}\t{}\t{kind_name}\t{sup}\t{cst_sum}", mu.len())?;
        eprintln!("# runtime: parameter {p} took {:.3}s", t0.elapsed().as_secs_f64());
    }
    writeln!(buf, "# summary")?;
    let summary = serde_json::json!({
        "command": "sweep",
        "family": family,
        "range": [p0, p1],
        "levels": [lo, hi],
        "seed": seed,
    });
    writeln!(buf, "{summary}")?;
    emit(&buf, out)
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: configuring thread pool: {e}");
            std::process::exit(1);
        }
    }
    let outcome = match &cli.cmd {
        Cmd::Generate { spec, seed, out } => cmd_generate(spec, *seed, out).map(|_| true),
        Cmd::Analyze {
            measure,
            origin,
            levels,
            a,
            eps,
            delta,
            m,
            nodes_per_octave,
            out,
        } => cmd_analyze(
            measure,
            origin,
            levels,
            *a,
            *eps,
            *delta,
            *m,
            *nodes_per_octave,
            out,
        )
        .map(|_| true),
        Cmd::Verify { suite, seed, out } => cmd_verify(suite, *seed, out),
        Cmd::Sweep {
            family,
            range,
            levels,
            seed,
            out,
        } => cmd_sweep(family, range, levels, *seed, out).map(|_| true),
    };
    match outcome {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
