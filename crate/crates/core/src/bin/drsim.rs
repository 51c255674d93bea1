use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use doubling_routing::harness::experiments::{cdf, regime_means};
use doubling_routing::harness::output::{self, Summary};
use doubling_routing::harness::{
    experiment_doubling_regimes, experiment_overhead_scaling, overhead_log_fit, wall_demo, Regime, SimConfig,
    Simulation,
};
use doubling_routing::Result;

#[derive(Parser)]
#[command(name = "drsim", about = "Hierarchical beacon routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run: per-step overhead, delivery and stretch.
    Run(Common),
    /// Control overhead per node across the sizes in `n_list`.
    Overhead(Common),
    /// Empirical stretch distribution of one run.
    Stretch(Common),
    /// Doubling estimates at super- and subcritical radii.
    Regimes(Common),
    /// Wall topology: protocol against greedy geographic forwarding.
    Baseline(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; replaces every seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write CSV outputs.
    #[arg(long)]
    csv: bool,
    /// Write summary.txt.
    #[arg(long)]
    summary: bool,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let cfg = match &self.config {
            Some(p) => SimConfig::from_file(p)?,
            None => SimConfig::default(),
        };
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn finish(&self, summary: &Summary) -> Result<ExitCode> {
        let text = summary.render();
        print!("{text}");
        if self.summary {
            self.write("summary.txt", &text)?;
        }
        Ok(if summary.all_pass() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        })
    }
}

fn run(c: &Common) -> Result<ExitCode> {
    let mut sim = Simulation::new(c.load()?)?;
    let series = sim.run()?;
    if c.csv {
        c.write("metrics.csv", &output::metrics_csv(&series))?;
        c.write("samples.csv", &output::samples_csv(&series))?;
        c.write("graph.txt", &sim.graph().to_edge_list())?;
        c.write("positions.csv", &output::positions_csv(sim.positions()))?;
        c.write("snapshot.csv", &sim.protocol().snapshot_csv())?;
    }
    c.finish(&output::run_summary(&series))
}

fn overhead(c: &Common) -> Result<ExitCode> {
    let cfg = c.load()?;
    let rows = experiment_overhead_scaling(&cfg.n_list, cfg.trials, &cfg)?;
    if c.csv {
        c.write("overhead.csv", &output::overhead_csv(&rows))?;
    }
    let mut s = Summary::new("overhead");
    for r in &rows {
        s.check(
            &format!("envelope n={}", r.n),
            format!("mean <= {:.1}", r.benchmark),
            format!("{:.3} (p5 {:.3}, p95 {:.3})", r.mean, r.p5, r.p95),
            r.within_benchmark(),
        );
    }
    if let Some(fit) = overhead_log_fit(&rows) {
        s.note(format!("fit mean = {:.3} log2 n + {:.3}", fit.slope, fit.intercept));
        s.check("log fit", "R^2 >= 0.9", format!("{:.4}", fit.r_squared), fit.r_squared >= 0.9);
    }
    c.finish(&s)
}

fn stretch(c: &Common) -> Result<ExitCode> {
    let mut sim = Simulation::new(c.load()?)?;
    let series = sim.run()?;
    let table = cdf(&series.stretches());
    if c.csv {
        c.write("cdf.csv", &output::cdf_csv(&table))?;
    }
    let mut s = output::run_summary(&series);
    s.title = "stretch".into();
    if let Some(p95) = series.stretch_quantile(0.95) {
        s.check("p95 stretch", "<= 1.5", format!("{p95:.3}"), p95 <= 1.5);
    }
    c.finish(&s)
}

fn regimes(c: &Common) -> Result<ExitCode> {
    let cfg = c.load()?;
    let rows = experiment_doubling_regimes(&cfg.n_list, cfg.theta, cfg.eps, cfg.trials, cfg.seed)?;
    if c.csv {
        c.write("regimes.csv", &output::regimes_csv(&rows))?;
    }
    let mut s = Summary::new("regimes");
    let means = regime_means(&rows);
    for (n, g, m) in &means {
        s.note(format!("n={n} {g} mean alpha_hat {m:.2}"));
    }
    for regime in [Regime::Supercritical, Regime::Subcritical] {
        let series: Vec<(usize, f64)> = means.iter().filter(|r| r.1 == regime).map(|r| (r.0, r.2)).collect();
        let (Some(first), Some(last)) = (series.first(), series.last()) else {
            continue;
        };
        if first.0 == last.0 {
            continue;
        }
        match regime {
            Regime::Supercritical => s.check(
                "supercritical band",
                "largest / smallest n ratio <= 1.5",
                format!("{:.3}", last.1 / first.1),
                last.1 / first.1 <= 1.5,
            ),
            Regime::Subcritical => s.check(
                "subcritical growth",
                "strictly increasing in n",
                format!("{:?}", series.iter().map(|p| p.1).collect::<Vec<_>>()),
                series.windows(2).all(|w| w[1].1 > w[0].1),
            ),
        }
    }
    c.finish(&s)
}

fn baseline(c: &Common) -> Result<ExitCode> {
    let cfg = c.load()?;
    let report = wall_demo(&cfg, cfg.pair_samples.max(1))?;
    if c.csv {
        let text = format!(
            "nodes,pairs,protocol_delivered,greedy_delivered,stretch_violations,max_stretch\n{},{},{},{},{},{:.6}\n",
            report.nodes,
            report.pairs,
            report.protocol_delivered,
            report.greedy_delivered,
            report.stretch_violations,
            report.max_stretch
        );
        c.write("baseline.csv", &text)?;
    }
    let mut s = Summary::new("baseline");
    s.note(format!("nodes={} r_n={:.3} cross-wall pairs={}", report.nodes, report.r_n, report.pairs));
    s.check(
        "protocol delivery",
        "100%",
        format!("{}/{}", report.protocol_delivered, report.pairs),
        report.protocol_delivered == report.pairs,
    );
    s.check(
        "stretch bound",
        "0 violations",
        format!("{} (max {:.3})", report.stretch_violations, report.max_stretch),
        report.stretch_violations == 0,
    );
    s.note(format!("greedy failure fraction {:.3}", report.greedy_failure_fraction()));
    c.finish(&s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Overhead(c) => overhead(c),
        Command::Stretch(c) => stretch(c),
        Command::Regimes(c) => regimes(c),
        Command::Baseline(c) => baseline(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("drsim: {e}");
            ExitCode::FAILURE
        }
    }
}
