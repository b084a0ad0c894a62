//! `searchlab` subcommands.

use std::path::{Path, PathBuf};

use acgrade_core::searchlab::{
    classify_answer, default_bindings, parse_answer, run_search, run_variant, Algorithm, Detector, DetectorBinding,
    Graph, GraphDoc, SearchRun, SearchTask, TieBreak, Variant,
};
use acgrade_core::{Exam, TaskId};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand};

#[derive(Subcommand)]
pub enum LabCmd {
    /// Print the model expansion order, and the output of each --variant.
    Run {
        #[command(flatten)]
        task: TaskArgs,
        /// Misapplication to simulate, e.g. greedy_local or reverse_edge:I,G.
        #[arg(long = "variant")]
        variants: Vec<Variant>,
    },
    /// Print the answer classes an answer falls into.
    Classify {
        #[command(flatten)]
        task: TaskArgs,
        /// Transcribed answer such as "B,E,C,G".
        #[arg(long)]
        answer: String,
        /// Extra binding AC=DETECTOR, e.g. AC30=greedy_local.
        #[arg(long = "bind")]
        bindings: Vec<String>,
    },
}

/// The exercise comes either from a graph file or from a task of an exam.
#[derive(Args)]
pub struct TaskArgs {
    #[arg(long, required_unless_present = "exam", conflicts_with = "exam")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    algorithm: Option<Algorithm>,
    #[arg(long, requires = "graph")]
    start: Option<String>,
    #[arg(long, default_value_t = 4)]
    length: usize,
    /// Break ties in reverse alphabetical order.
    #[arg(long)]
    descending: bool,
    #[arg(long, requires = "task")]
    exam: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
}

pub fn run(cmd: LabCmd) -> Result<String> {
    match cmd {
        LabCmd::Run { task, variants } => {
            let (task, _) = resolve(&task)?;
            if variants.is_empty() {
                return Ok(format_run(&run_search(&task)) + "\n");
            }
            let mut out = format!("model: {}\n", format_run(&run_search(&task)));
            for v in &variants {
                out.push_str(&format!("{v}: {}\n", format_run(&run_variant(&task, v)?)));
            }
            Ok(out)
        }
        LabCmd::Classify { task, answer, bindings } => {
            let (task, mut all) = resolve(&task)?;
            for b in &bindings {
                let (ac, detector) = b.split_once('=').ok_or_else(|| anyhow!("binding {b:?} is not AC=DETECTOR"))?;
                let detector: Detector = detector.parse()?;
                all.retain(|existing| existing.ac.as_str() != ac.trim());
                all.push(DetectorBinding { ac: ac.trim().parse()?, detector });
            }
            let classes = classify_answer(&parse_answer(&answer), &task, &all);
            Ok(classes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",") + "\n")
        }
    }
}

fn format_run(run: &SearchRun) -> String {
    let nodes: Vec<&str> = run.nodes.iter().map(|n| n.as_str()).collect();
    let mut line = nodes.join(",");
    if run.exhausted {
        line.push_str(" (frontier exhausted)");
    }
    line
}

fn resolve(args: &TaskArgs) -> Result<(SearchTask, Vec<DetectorBinding>)> {
    let tie_break = if args.descending { TieBreak::Descending } else { TieBreak::Ascending };
    if let Some(path) = &args.exam {
        let text = read(path)?;
        let exam = Exam::from_json(&text).map_err(|e| anyhow!("{} is not a valid exam:\n{e}", path.display()))?;
        let id = TaskId::new(args.task.clone().unwrap_or_default());
        let task = exam.task(&id).ok_or_else(|| anyhow!("exam has no task {id}"))?;
        let Some(oracle) = &task.oracle else {
            bail!("task {id} has no search oracle");
        };
        return Ok((oracle.clone().with_tie_break(tie_break), task.detector_bindings()));
    }
    let path = args.graph.as_ref().expect("clap enforces --graph or --exam");
    let doc: GraphDoc = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let graph = Graph::from_doc(&doc).with_context(|| format!("invalid graph in {}", path.display()))?;
    let Some(algorithm) = args.algorithm else {
        bail!("--graph needs --algorithm");
    };
    let Some(start) = &args.start else {
        bail!("--graph needs --start");
    };
    let task = SearchTask::new(graph, start.as_str().into(), algorithm, args.length)?.with_tie_break(tie_break);
    Ok((task, default_bindings(algorithm)))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
