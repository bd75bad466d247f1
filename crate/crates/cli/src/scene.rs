use std::path::Path;

use clap::Args;
use csa_core::world::{
    default7, generate_heap, generate_scene, preset, save_scene, CrimeSceneSpec, CrimeType, EvidenceKind, KindName,
    Scene,
};
use serde_json::json;

use crate::{table, to_json, write_file, CliError, CliResult, Format, Global, Output};

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    #[arg(long)]
    pub crime: CrimeType,
    /// Floor plan preset.
    #[arg(long)]
    pub plan: String,
    /// Override an inclusion probability, `kind=p`; repeatable.
    #[arg(long = "prob", value_parser = parse_prob)]
    pub probs: Vec<(KindName, f64)>,
}

#[derive(Debug, Args)]
pub struct HeapArgs {
    /// `default7` or a comma list of kind names.
    #[arg(long, default_value = "default7")]
    pub items: String,
    /// Grid size, `COLSxROWS`.
    #[arg(long, default_value = "6x6", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long, default_value_t = 0.15)]
    pub cell: f64,
}

fn parse_prob(s: &str) -> Result<(KindName, f64), String> {
    let (k, p) = s.split_once('=').ok_or("expected kind=p")?;
    let kind: KindName = k.parse()?;
    let p: f64 = p.parse().map_err(|_| format!("bad probability `{p}`"))?;
    Ok((kind, p))
}

pub(crate) fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (c, r) = s.split_once('x').ok_or("expected COLSxROWS")?;
    let c = c.parse().map_err(|_| format!("bad column count `{c}`"))?;
    let r = r.parse().map_err(|_| format!("bad row count `{r}`"))?;
    Ok((c, r))
}

pub fn gen(g: &Global, a: &SceneGenArgs) -> CliResult<Output> {
    let plan = preset(&a.plan).map_err(|e| CliError::Usage(e.to_string()))?;
    let (seed, defaulted) = g.seed_or_default();
    let mut spec = CrimeSceneSpec::with_defaults(a.crime, plan, seed);
    for (k, p) in &a.probs {
        spec.probability_table.insert(k.clone(), *p);
    }
    let scene = generate_scene(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(g, &scene, seed, defaulted)
}

pub fn heap(g: &Global, a: &HeapArgs) -> CliResult<Output> {
    let items: Vec<EvidenceKind> = if a.items == "default7" {
        default7()
    } else {
        a.items
            .split(',')
            .map(|k| k.trim().parse::<KindName>().map(EvidenceKind::standard))
            .collect::<Result<_, _>>()
            .map_err(CliError::Usage)?
    };
    let scene = generate_heap(&items, a.grid, a.cell).map_err(|e| CliError::Usage(e.to_string()))?;
    // the heap layout is deterministic, the seed plays no part
    emit(g, &scene, scene.seed, false)
}

fn emit(g: &Global, scene: &Scene, seed: u64, defaulted: bool) -> CliResult<Output> {
    let doc = save_scene(scene);
    let mut out = Output::default();
    if defaulted {
        out.notes.push(format!("no --seed given, using seed {seed}"));
    }
    let Some(path) = &g.out else {
        // without --out the scene itself is the output
        out.stdout = doc;
        out.stdout.push('\n');
        return Ok(out);
    };
    write_file(path, doc.as_bytes())?;
    out.stdout = manifest(g.format, scene, seed, defaulted, path)?;
    Ok(out)
}

fn manifest(format: Format, scene: &Scene, seed: u64, defaulted: bool, path: &Path) -> CliResult<String> {
    match format {
        Format::Json => {
            let items: Vec<_> = scene
                .evidence
                .iter()
                .map(|e| {
                    json!({
                        "id": e.id,
                        "kind": e.kind.name.to_string(),
                        "x_m": e.position_m.x,
                        "y_m": e.position_m.y,
                        "orientation_rad": e.orientation_rad,
                        "touched": e.touched_at_s.is_some(),
                    })
                })
                .collect();
            to_json(&json!({
                "file": path.display().to_string(),
                "plan": scene.floor_plan.name,
                "seed": seed,
                "seed_defaulted": defaulted,
                "evidence": items,
            }))
        }
        Format::Table => {
            let mut rows = vec![vec!["id", "kind", "x_m", "y_m", "heading_deg", "touched"]
                .into_iter()
                .map(String::from)
                .collect::<Vec<_>>()];
            for e in &scene.evidence {
                rows.push(vec![
                    e.id.to_string(),
                    e.kind.name.to_string(),
                    format!("{:.2}", e.position_m.x),
                    format!("{:.2}", e.position_m.y),
                    format!("{:.0}", e.orientation_rad.to_degrees()),
                    if e.touched_at_s.is_some() { "yes".into() } else { "no".into() },
                ]);
            }
            let seed_note = if defaulted { " (default)" } else { "" };
            Ok(format!(
                "scene {} on {}, seed {seed}{seed_note}, {} items\n{}",
                path.display(),
                scene.floor_plan.name,
                scene.evidence.len(),
                table(&rows)
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_grid("6x4").unwrap(), (6, 4));
        assert!(parse_grid("6").is_err());
        let (k, p) = parse_prob("shoes=0.25").unwrap();
        assert_eq!((k, p), (KindName::Shoes, 0.25));
        assert!(parse_prob("shoes").is_err());
        assert!(parse_prob("hat=1").is_err());
    }
}
