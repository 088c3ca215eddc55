use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use leafdbar::deck_sum::DeckSumSolver;
use leafdbar::error::{Error, Result};
use leafdbar::fuchsian::{group_report, Word};
use leafdbar::grid::{DiskGrid, GridField};
use leafdbar::lemmas::verify_disk_lemmas;
use leafdbar::partition::partition_invariants;
use leafdbar::perturbation::family_continuity;
use leafdbar::weight::WeightFamily;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Command;

/// Bound on |Σα̃ − 1| and on the overlap count for the partition command.
const PARTITION_SUM_TOL: f64 = 1e-10;
const PARTITION_MAX_OVERLAP: usize = 4;

#[derive(Serialize)]
struct ArtifactEntry {
    file: String,
    module: &'static str,
    operation: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'static str,
    config_hash: &'a str,
    config: &'a RunConfig,
    artifacts: Vec<ArtifactEntry>,
    values: Value,
}

struct Writer {
    dir: PathBuf,
    hash: String,
    artifacts: Vec<ArtifactEntry>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Check(format!("cannot write {}: {e}", path.display()))
}

impl Writer {
    fn new(dir: &Path, hash: String) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), hash, artifacts: Vec::new() })
    }

    fn record(&mut self, file: &str, module: &'static str, operation: &'static str) -> PathBuf {
        self.artifacts.push(ArtifactEntry { file: file.into(), module, operation });
        self.dir.join(file)
    }

    fn json(&mut self, file: &str, module: &'static str, operation: &'static str, value: Value) -> Result<()> {
        let path = self.record(file, module, operation);
        let mut body = json!({ "config_hash": self.hash });
        body["data"] = value;
        let text = serde_json::to_string_pretty(&body).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    fn csv(
        &mut self,
        file: &str,
        module: &'static str,
        operation: &'static str,
        header: &[&str],
        rows: Vec<Vec<String>>,
    ) -> Result<()> {
        let path = self.record(file, module, operation);
        let mut out = format!("# config_hash {}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(|e| io_err(&path, e))?;
            for r in rows {
                w.write_record(&r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        fs::write(&path, out).map_err(|e| io_err(&path, e))
    }

    fn grid(&mut self, file: &str, module: &'static str, operation: &'static str, field: &GridField) -> Result<()> {
        let path = self.record(file, module, operation);
        let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        field.write_table(BufWriter::new(f))
    }

    fn finish(self, command: &str, cfg: &RunConfig, values: Value) -> Result<()> {
        let path = self.dir.join(format!("manifest_{command}.json"));
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &self.hash,
            config: cfg,
            artifacts: self.artifacts,
            values,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<String> {
    let mut w = Writer::new(out, cfg.hash())?;
    let (name, values, failure) = match command {
        Command::Lemmas => lemmas(cfg, &mut w)?,
        Command::Partition => partition(cfg, &mut w)?,
        Command::Group => group(cfg, &mut w)?,
        Command::Solve => solve(cfg, &mut w)?,
        Command::Sweep => sweep(cfg, &mut w)?,
        Command::Constants => constants(cfg, &mut w)?,
        Command::Report => report(out, &mut w)?,
    };
    let summary = format!("{name}: config {} -> {}", &w.hash[..12], out.display());
    w.finish(name, cfg, values)?;
    match failure {
        Some(msg) => Err(Error::Check(msg)),
        None => Ok(summary),
    }
}

type Outcome = (&'static str, Value, Option<String>);

fn lemmas(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let c = &cfg.lemmas;
    let r = verify_disk_lemmas(c.samples, cfg.problem.seed, c.n_max)?;
    w.json("lemmas.json", "hyperbolic_disk", "verify_disk_lemmas", to_value(&r))?;
    let rows = r
        .checks
        .iter()
        .map(|k| vec![k.name.clone(), k.samples.to_string(), k.violations.to_string(), num(k.worst_ratio)])
        .collect();
    w.csv("lemmas.csv", "hyperbolic_disk", "verify_disk_lemmas", &["check", "samples", "violations", "worst_ratio"], rows)?;
    let failure = r.ensure().err().map(|e| e.to_string());
    Ok(("lemmas", json!({ "violations": r.total_violations() }), failure))
}

fn partition(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let c = &cfg.partition;
    let r = partition_invariants(c.samples_per_annulus, c.composed_samples, c.n_max, cfg.problem.seed)?;
    w.json("partition.json", "partition", "partition_invariants", to_value(&r))?;
    let rows = r.gradient_ratios.iter().map(|(n, g)| vec![n.to_string(), num(*g)]).collect();
    w.csv("partition_gradients.csv", "partition", "tilde_alpha", &["n", "max_gradient_over_2n"], rows)?;
    let rows = r.composed.iter().map(|(n, a, x)| vec![n.to_string(), num(*a), num(*x)]).collect();
    w.csv("partition_composed.csv", "partition", "composed_regularity_check", &["n", "alpha_c1", "chi_c1"], rows)?;
    let failure = if r.sum_defect >= PARTITION_SUM_TOL || r.max_overlap > PARTITION_MAX_OVERLAP {
        Some(format!("partition sum defect {:e}, max overlap {}", r.sum_defect, r.max_overlap))
    } else {
        None
    };
    Ok(("partition", json!({ "sum_defect": r.sum_defect, "max_overlap": r.max_overlap, "gradient_band": r.gradient_band }), failure))
}

fn group(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let r = group_report(cfg.problem.word_cap, cfg.problem.n_max);
    w.json("group.json", "fuchsian_suspension", "enumerate_deck", to_value(&r))?;
    let rows = r
        .counts
        .iter()
        .zip(&r.normalized_counts)
        .enumerate()
        .map(|(n, (c, q))| vec![n.to_string(), c.to_string(), num(*q)])
        .collect();
    w.csv("group_counts.csv", "fuchsian_suspension", "enumerate_deck", &["n", "count", "count_over_2n"], rows)?;
    Ok((
        "group",
        json!({ "relation_residual": r.relation_residual, "count_band": r.count_band, "counts": r.counts }),
        None,
    ))
}

fn solve(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let word: Word = cfg.solve.word.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let d = DeckSumSolver::new(cfg.problem.clone())?;
    let element = d
        .enumeration
        .find(&word)
        .ok_or_else(|| Error::Config(format!("word {} is not among the enumerated deck elements", cfg.solve.word)))?
        .clone();
    let t = cfg.solve.t;
    let leaf = d.solve_leaf(t)?;
    let defects: Vec<(u32, f64)> =
        (1..=cfg.problem.n_max).map(|n| d.equivariance_check(t, &element, n).map(|x| (n, x))).collect::<Result<_>>()?;
    let summary = json!({
        "t": t,
        "n_max": leaf.n_max,
        "elements": leaf.elements,
        "residual": leaf.residual,
        "fitted_ratio": leaf.fitted_ratio,
        "tail_estimate": leaf.tail_estimate,
        "annulus_norms": leaf.annulus_norms,
        "partial_norms": leaf.partial_norms,
        "equivariance_word": cfg.solve.word,
        "equivariance_defects": defects,
    });
    w.json("solve.json", "deck_sum_solver", "solve_leaf", summary.clone())?;
    let rows = leaf
        .annulus_norms
        .iter()
        .zip(&leaf.partial_norms)
        .enumerate()
        .map(|(n, (a, p))| vec![n.to_string(), num(*a), num(*p)])
        .collect();
    w.csv("annulus_norms.csv", "deck_sum_solver", "solve_leaf", &["n", "annulus_norm", "partial_norm"], rows)?;
    let rows = defects.iter().map(|(n, x)| vec![n.to_string(), num(*x)]).collect();
    w.csv("equivariance.csv", "deck_sum_solver", "equivariance_check", &["n_max", "defect"], rows)?;
    w.grid("u_t.grid", "deck_sum_solver", "solve_leaf", &leaf.field)?;
    Ok(("solve", json!({ "residual": leaf.residual, "equivariance_defects": defects }), None))
}

fn sweep(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let p = &cfg.problem;
    let k = p.model().distortion_exponent();
    if p.weight.s <= 2 * (k + 1) {
        return Err(Error::Config(format!(
            "s = {} must exceed 2(k+1) = {} for the {} action",
            p.weight.s,
            2 * (k + 1),
            p.action.name()
        )));
    }
    let s = &cfg.sweep;
    let c = &s.continuity;
    let family = WeightFamily::new(p.weight, c.delta, c.center, c.radius)?;
    let d = DeckSumSolver::new(p.clone())?;
    let lip = d.lipschitz_sweep(s.t0, &s.radii)?;
    let annuli = d.transversal_lipschitz(s.t0, s.t0 + s.radii[0])?;
    let fd = d.transversal_derivative_fd(s.t0, &s.deltas)?;
    drop(d);
    let grid = DiskGrid::new(c.n_grid, c.h)?;
    let ts: Vec<f64> = c.radii.iter().map(|r| c.t0 + r).collect();
    let cont = family_continuity(continuity_form, grid, &family, c.t0, &ts, c.degree)?;

    w.csv("lipschitz.csv", "deck_sum_solver", "transversal_lipschitz", &["radius", "constant"], lip.iter().map(|(r, x)| vec![num(*r), num(*x)]).collect())?;
    let rows = annuli
        .per_annulus
        .iter()
        .map(|a| vec![a.n.to_string(), a.elements.to_string(), num(a.envelope), num(a.bound)])
        .collect();
    w.csv("lipschitz_annuli.csv", "deck_sum_solver", "transversal_lipschitz", &["n", "elements", "envelope", "bound"], rows)?;
    let rows = fd.deltas.iter().zip(&fd.defects).map(|(a, b)| vec![num(*a), num(*b)]).collect();
    w.csv("derivative.csv", "deck_sum_solver", "transversal_derivative_fd", &["delta", "defect"], rows)?;
    let rows = cont.modulus.iter().map(|(r, m)| vec![num(*r), num(*m)]).collect();
    w.csv("continuity.csv", "weighted_dbar", "family_continuity", &["radius", "modulus"], rows)?;
    let values = json!({
        "lipschitz": lip,
        "lipschitz_fitted_constant": annuli.fitted_constant,
        "lipschitz_total": annuli.total,
        "derivative_order": fd.order,
        "derivative_norm": fd.derivative_norm,
        "continuity_modulus": cont.modulus,
        "continuity_lipschitz": cont.lipschitz,
    });
    w.json("sweep.json", "deck_sum_solver", "sweep", values.clone())?;
    Ok(("sweep", values, None))
}

/// Fixed bump data for the continuity sweep; only the weight varies with t.
fn continuity_form(_t: f64, z: Complex64) -> Complex64 {
    let c = Complex64::new(-0.1, 0.1);
    let r = 0.3;
    let d = z - c;
    let q = d.norm_sqr() / (r * r);
    if q >= 1.0 {
        Complex64::new(0.0, 0.0)
    } else {
        d * (-3.0 * (1.0 - q).powi(2) / (r * r))
    }
}

fn constants(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome> {
    let c = &cfg.constants;
    let d = DeckSumSolver::new(cfg.problem.clone())?;
    let r = d.measure_constants(c.t, c.tail_from, c.samples)?;
    w.json("constants.json", "deck_sum_solver", "measure_constants", to_value(&r))?;
    let named = [("c1", r.c1), ("c2", r.c2), ("c3", r.c3), ("c4", r.c4)];
    let failure = named
        .iter()
        .find(|(_, x)| !(x.is_finite() && *x > 0.0))
        .map(|(n, x)| format!("constant {n} = {x} is not positive and finite"));
    let values = json!({
        "c1": r.c1, "c2": r.c2, "c3": r.c3, "c4": r.c4, "k": r.k,
        "tail_coefficient": r.tail_coefficient,
        "predicted_tail": r.predicted_tail,
        "measured_tail": r.measured_tail,
    });
    Ok(("constants", values, failure))
}

const REPORT_SOURCES: [&str; 6] = ["lemmas", "partition", "group", "solve", "sweep", "constants"];

/// Flattens numbers and arrays of numbers (or of [index, number] pairs) into (quantity, index, value) rows.
fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String, f64)>) {
    match v {
        Value::Number(n) => rows.push((prefix.into(), String::new(), n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                match item {
                    Value::Number(n) => rows.push((prefix.into(), i.to_string(), n.as_f64().unwrap_or(f64::NAN))),
                    Value::Array(pair) if pair.len() == 2 => {
                        if let (Some(a), Some(b)) = (pair[0].as_f64(), pair[1].as_f64()) {
                            rows.push((prefix.into(), a.to_string(), b));
                        }
                    }
                    _ => {}
                }
            }
        }
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, rows);
            }
        }
        _ => {}
    }
}

fn report(out: &Path, w: &mut Writer) -> Result<Outcome> {
    let mut tables = serde_json::Map::new();
    let mut rows = Vec::new();
    for source in REPORT_SOURCES {
        let path = out.join(format!("manifest_{source}.json"));
        let Ok(text) = fs::read_to_string(&path) else { continue };
        let m: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let values = m.get("values").cloned().unwrap_or(Value::Null);
        let hash = m.get("config_hash").and_then(Value::as_str).unwrap_or("").to_string();
        let mut flat = Vec::new();
        flatten("", &values, &mut flat);
        for (q, i, x) in flat {
            rows.push(vec![source.to_string(), hash.clone(), q, i, num(x)]);
        }
        tables.insert(source.into(), json!({ "config_hash": hash, "values": values }));
    }
    if tables.is_empty() {
        return Err(Error::Config(format!(
            "no command manifests in {}; run another command first",
            out.display()
        )));
    }
    w.csv("report.csv", "cli", "report", &["source", "config_hash", "quantity", "index", "value"], rows)?;
    let value = Value::Object(tables);
    w.json("report.json", "cli", "report", value.clone())?;
    Ok(("report", json!({ "sources": value.as_object().map(|m| m.keys().cloned().collect::<Vec<_>>()) }), None))
}
