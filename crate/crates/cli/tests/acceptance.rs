//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use capweave_core::fixtures::{self, FORUM_CAPABILITY, ANNOUNCEMENT_DIRECTIVE, FORUM_NEED, FACULTY_WRITE_REQUIREMENT};
use capweave_core::gen::{random_graph, random_project, GraphShape};
use capweave_core::store::{write_project, FILE_SUFFIX};
use capweave_core::trace::{all_links, forward_requirements};
use capweave_core::{
    abstraction_imbalance, cohesion, coupling, critical_traces, enumerate_candidates, impact_of_node_change, optimize,
    rank_candidates, trace_backward, trace_matrix, Direction, EdgeKind, EnumerationLimits, FdGraph, NodeId, NodeKind,
    Project, ProjectStore, ScoreWeights,
};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn names(set: &BTreeSet<NodeId>) -> BTreeSet<String> {
    set.iter().map(|n| n.to_string()).collect()
}

fn graph(seed: u64, max_internal: usize) -> FdGraph {
    let shape = GraphShape {
        max_internal,
        ..GraphShape::default()
    };
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), &shape)
}

/// Reachability and directive sets computed from the raw edge list.
struct Oracle {
    kinds: BTreeMap<String, NodeKind>,
    children: BTreeMap<String, Vec<String>>,
}

impl Oracle {
    fn new(g: &FdGraph) -> Self {
        let kinds: BTreeMap<_, _> = g.nodes().iter().map(|n| (n.id.to_string(), n.kind)).collect();
        let mut children: BTreeMap<String, Vec<String>> = kinds.keys().map(|k| (k.clone(), Vec::new())).collect();
        for e in g.edges() {
            children.get_mut(e.source.as_str()).unwrap().push(e.target.to_string());
        }
        Self { kinds, children }
    }

    fn descendants(&self, id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.to_owned()];
        while let Some(v) = stack.pop() {
            for w in &self.children[&v] {
                if out.insert(w.clone()) {
                    stack.push(w.clone());
                }
            }
        }
        out
    }

    fn directive_set(&self, id: &str) -> BTreeSet<String> {
        if self.kinds[id] == NodeKind::Directive {
            return BTreeSet::from([id.to_owned()]);
        }
        self.descendants(id)
            .into_iter()
            .filter(|d| self.kinds[d] == NodeKind::Directive)
            .collect()
    }

    fn candidates(&self) -> BTreeSet<BTreeSet<String>> {
        let f: Vec<&String> = self.kinds.iter().filter(|(_, k)| **k == NodeKind::Functional).map(|(id, _)| id).collect();
        let all: BTreeSet<String> = self.kinds.iter().filter(|(_, k)| **k == NodeKind::Directive).map(|(id, _)| id.clone()).collect();
        let desc: Vec<_> = f.iter().map(|v| self.descendants(v)).collect();
        let dsets: Vec<_> = f.iter().map(|v| self.directive_set(v)).collect();
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << f.len()) {
            let picked: Vec<usize> = (0..f.len()).filter(|i| mask & (1 << i) != 0).collect();
            if picked.iter().any(|&a| picked.iter().any(|&b| a != b && desc[a].contains(f[b]))) {
                continue;
            }
            let covered: BTreeSet<&String> = picked.iter().flat_map(|&i| dsets[i].iter()).collect();
            if covered.len() == all.len() {
                out.insert(picked.iter().map(|&i| f[i].clone()).collect());
            }
        }
        out
    }
}

fn reference_candidates() -> Outcome {
    let start = Instant::now();
    let g = fixtures::r1_graph();
    let found = enumerate_candidates(&g, &EnumerationLimits::exact(), &ScoreWeights::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let sets: BTreeSet<_> = found.iter().map(|c| names(&c.members)).collect();
    ensure(found.len() == 4 && sets.len() == 4, || format!("{} candidates", found.len()))?;
    ensure(sets == Oracle::new(&g).candidates(), || "candidates differ from brute force".into())?;
    let target = found
        .iter()
        .find(|c| names(&c.members) == ids(&["n1", "n7", "n3"]))
        .ok_or("{n1,n7,n3} missing")?;
    let expected: BTreeMap<String, BTreeSet<String>> = [
        ("n1", (1..=5).collect::<Vec<_>>()),
        ("n7", (6..=9).collect()),
        ("n3", (10..=14).collect()),
    ]
    .into_iter()
    .map(|(m, ds)| (m.to_owned(), ds.into_iter().map(|i| format!("d{i}")).collect()))
    .collect();
    let actual: BTreeMap<String, BTreeSet<String>> =
        target.assignment.iter().map(|(m, ds)| (m.to_string(), names(ds))).collect();
    ensure(actual == expected, || format!("assignment {actual:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("4 candidates in {elapsed:?}"))
}

fn impact_scenario() -> Outcome {
    let report = impact_of_node_change(&fixtures::r1_project(), "n3", Direction::Down).map_err(|e| e.to_string())?;
    let nodes: BTreeSet<String> = report.affected_nodes.iter().map(|i| i.id.to_string()).collect();
    ensure(nodes.contains("n8") && nodes.contains("n9"), || format!("affected nodes {nodes:?}"))?;
    Ok(format!("affected nodes {nodes:?}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut multi = 0;
    for seed in 0..100u64 {
        let g = graph(seed, 12);
        let internal = g.internal_ids().count();
        ensure(internal <= 12, || format!("seed {seed}: {internal} internal nodes"))?;
        let exact: BTreeSet<_> = enumerate_candidates(&g, &EnumerationLimits::exact(), &ScoreWeights::default())
            .map_err(|e| format!("seed {seed}: {e}"))?
            .iter()
            .map(|c| names(&c.members))
            .collect();
        let brute = Oracle::new(&g).candidates();
        ensure(exact == brute, || format!("seed {seed}: {} exact vs {} brute force", exact.len(), brute.len()))?;
        multi += usize::from(brute.len() > 1);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("100 graphs ({multi} with several candidates) in {elapsed:?}"))
}

fn metric_laws() -> Outcome {
    const CASES: u64 = 500;
    let mut checks = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..CASES {
        let g = graph(1000 + seed, 8);
        let o = Oracle::new(&g);
        let internal: Vec<String> = g.internal_ids().map(|n| n.to_string()).collect();
        for a in &internal {
            let c = cohesion(&g, a).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&c), || format!("seed {seed}: cohesion({a}) = {c}"))?;
            for b in &internal {
                let related = a == b || o.descendants(a).contains(b) || o.descendants(b).contains(a);
                if related {
                    continue;
                }
                let ab = coupling(&g, a, b).map_err(|e| e.to_string())?;
                let ba = coupling(&g, b, a).map_err(|e| e.to_string())?;
                ensure((0.0..=1.0).contains(&ab), || format!("seed {seed}: coupling({a},{b}) = {ab}"))?;
                ensure(ab == ba, || format!("seed {seed}: coupling asymmetric for {a},{b}"))?;
                let disjoint = o.directive_set(a).is_disjoint(&o.directive_set(b));
                ensure((ab == 0.0) == disjoint, || format!("seed {seed}: coupling({a},{b}) = {ab}, disjoint {disjoint}"))?;
                checks += 1;
            }
        }

        let w = ScoreWeights::new(rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..3.0)).unwrap();
        let k: f64 = rng.gen_range(0.01..100.0);
        let cands = enumerate_candidates(&g, &EnumerationLimits::exact(), &w).map_err(|e| e.to_string())?;
        let composite = |coh: f64, coup: f64, imb: f64, w: &ScoreWeights| w.cohesion * coh - w.coupling * coup - w.abstraction * imb;
        let scaled = w.scaled(k);
        for c in &cands {
            let imb = abstraction_imbalance(&g, &c.members).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&imb), || format!("seed {seed}: imbalance {imb}"))?;
            ensure((0.0..=1.0).contains(&c.score.coupling), || format!("seed {seed}: set coupling {}", c.score.coupling))?;
        }
        // Argsort invariance: pairwise order of composites is unchanged by
        // scaling, except for pairs within rounding distance.
        let base: Vec<f64> = cands.iter().map(|c| composite(c.score.cohesion, c.score.coupling, c.score.abstraction_imbalance, &w)).collect();
        let rescored = rank_candidates(cands.clone(), &scaled).map_err(|e| e.to_string())?;
        let pos: BTreeMap<BTreeSet<NodeId>, usize> = rescored.iter().enumerate().map(|(i, c)| (c.members.clone(), i)).collect();
        let base_rank = rank_candidates(cands.clone(), &w).map_err(|e| e.to_string())?;
        for pair in base_rank.windows(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let i = cands.iter().position(|c| c.members == x.members).unwrap();
            let j = cands.iter().position(|c| c.members == y.members).unwrap();
            if base[i] - base[j] > 1e-9 {
                ensure(pos[&x.members] < pos[&y.members], || format!("seed {seed}: scaling by {k} reordered candidates"))?;
            }
        }
        checks += cands.len();
    }
    Ok(format!("{CASES} random graphs, {checks} checks"))
}

fn union_semantics() -> Outcome {
    let mut parents = 0usize;
    for seed in 0..500u64 {
        let g = graph(5000 + seed, 12);
        let o = Oracle::new(&g);
        let decomposers: BTreeSet<&NodeId> =
            g.edges().iter().filter(|e| e.kind == EdgeKind::Decomposition).map(|e| &e.source).collect();
        for p in decomposers {
            let own = g.directive_set(p.as_str()).map_err(|e| e.to_string())?;
            let mut union = BTreeSet::new();
            for c in &o.children[p.as_str()] {
                union.extend(g.directive_set(c).map_err(|e| e.to_string())?);
            }
            ensure(own == union, || format!("seed {seed}: directiveSet({p}) is not the union of its children"))?;
            ensure(names(&own) == o.directive_set(p.as_str()), || format!("seed {seed}: directiveSet({p}) differs from oracle"))?;
            parents += 1;
        }
    }
    Ok(format!("{parents} decomposition parents over 500 graphs"))
}

fn round_trip(p: &Project) -> Result<usize, String> {
    for r in p.requirements().keys() {
        let back = trace_backward(p, r.as_str()).map_err(|e| format!("{r}: {e}"))?;
        ensure(!back.needs.is_empty(), || format!("{r} traces to no need"))?;
        for n in &back.needs {
            let fwd = forward_requirements(p, n.as_str()).map_err(|e| e.to_string())?;
            ensure(fwd.contains(r), || format!("{r} not in traceForward({n})"))?;
        }
    }
    let thresholds = [0.0, 0.3, 0.6, 0.85, 1.0];
    let mut sets = Vec::new();
    for t in thresholds {
        sets.push(critical_traces(p, t).map_err(|e| e.to_string())?.into_iter().collect::<BTreeSet<_>>());
    }
    ensure(sets.windows(2).all(|w| w[1].is_subset(&w[0])), || "criticalTraces is not antitone".into())?;
    ensure(sets[0].len() == all_links(p).len(), || "threshold 0 drops links".into())?;
    Ok(p.requirements().len())
}

fn trace_round_trip() -> Outcome {
    let r1 = fixtures::r1_project();
    let ranked = rank_candidates(
        enumerate_candidates(r1.graph(), &EnumerationLimits::exact(), r1.weights()).map_err(|e| e.to_string())?,
        r1.weights(),
    )
    .map_err(|e| e.to_string())?;
    let chosen = optimize(r1.graph(), &ranked, r1.constraints()).map_err(|e| e.to_string())?;
    let top: Vec<String> = chosen.chosen_set.members.iter().map(|m| m.to_string()).collect();
    let top: Vec<&str> = top.iter().map(String::as_str).collect();
    let mut total = 0;
    for members in [&top[..], &["n1", "n7", "n3"][..]] {
        let p = fixtures::r1_transformed(members, 2);
        ensure(p.requirements().len() == 28, || format!("{members:?}: {} requirements", p.requirements().len()))?;
        total += round_trip(&p)?;
    }
    Ok(format!("{total} requirements across two chosen sets"))
}

fn samples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn course_matrix_row() -> Outcome {
    let path = samples_dir().join(format!("course-management{FILE_SUFFIX}"));
    let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let p = Project::load(&bytes).map_err(|e| e.to_string())?;
    let g = p.graph();
    let row = trace_matrix(&p).into_iter().find(|r| {
        p.needs().get(r.need_id.as_str()).is_some_and(|n| n.text == FORUM_NEED)
            && g.node(r.capability_id.as_str()).is_some_and(|n| n.label == FORUM_CAPABILITY)
            && g.node(r.directive_id.as_str()).is_some_and(|n| n.label == ANNOUNCEMENT_DIRECTIVE)
            && p.requirements().get(r.requirement_id.as_str()).is_some_and(|q| q.text == FACULTY_WRITE_REQUIREMENT)
    });
    let row = row.ok_or("no matrix row links the need, capability, directive and requirement")?;
    Ok(format!("{},{},{},{},{}", row.need_id, row.node_id, row.directive_id, row.capability_id, row.requirement_id))
}

fn persistence_laws() -> Outcome {
    let mut projects = vec![fixtures::r1_project(), fixtures::r2_project()];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    projects.extend((0..50).map(|_| random_project(&mut rng, &GraphShape::default())));
    for (i, p) in projects.iter().enumerate() {
        let bytes = p.save();
        let loaded = Project::load(&bytes).map_err(|e| format!("project {i}: {e}"))?;
        ensure(&loaded == p, || format!("project {i}: load(save(p)) != p"))?;
        ensure(p.save() == bytes, || format!("project {i}: repeated saves differ"))?;
        ensure(loaded.save() == bytes, || format!("project {i}: save(load(save(p))) differs"))?;
    }
    Ok(format!("{} projects", projects.len()))
}

async fn api(project: &Project, method: &str, uri: &str, body: Option<&str>) -> Result<String, String> {
    let store = std::sync::Arc::new(ProjectStore::in_memory(project.clone()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.map(|b| Body::from(b.to_owned())).unwrap_or_else(Body::empty))
        .map_err(|e| e.to_string())?;
    let resp = capweave_cli::api::router(store).oneshot(req).await.map_err(|e| e.to_string())?;
    ensure(resp.status().is_success(), || format!("{uri}: status {}", resp.status()))?;
    let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
    String::from_utf8(bytes.to_vec()).map_err(|e| e.to_string())
}

fn cli_api_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (label, project) in [
        ("R1", fixtures::r1_project()),
        ("R1 transformed", fixtures::r1_transformed(&["n1", "n7", "n3"], 1)),
    ] {
        let path = dir.path().join(format!("p{compared}{FILE_SUFFIX}"));
        write_project(&path, &project).map_err(|e| e.to_string())?;
        let file = path.display().to_string();
        let mut cases: Vec<(Vec<&str>, &str, String, Option<String>)> = vec![
            (vec!["formulate"], "GET", "/candidates".into(), None),
            (vec!["formulate", "--exact"], "GET", "/candidates?strategy=exact".into(), None),
            (vec!["impact", "--entity", "n3", "--direction", "down"], "POST", "/impact".into(), Some(r#"{"entity":"n3","direction":"down"}"#.into())),
            (vec!["impact", "--entity", "d9"], "POST", "/impact".into(), Some(r#"{"entity":"d9"}"#.into())),
            (vec!["trace", "--from", "need-1"], "GET", "/trace/need-1".into(), None),
        ];
        if let Some(r) = project.requirements().keys().next() {
            cases.push((vec!["trace", "--from", r.as_str(), "--backward"], "GET", format!("/trace/{r}"), None));
        }
        for (args, method, uri, body) in cases {
            let mut argv = vec!["capweave", args[0], "--project", &file];
            argv.extend(&args[1..]);
            let out = capweave_cli::run(argv);
            ensure(out.exit_code == 0, || format!("{label} {args:?}: {}", out.stderr))?;
            let served = runtime.block_on(api(&project, method, &uri, body.as_deref()))?;
            ensure(out.stdout == served, || format!("{label} {args:?} differs from {method} {uri}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} byte-identical outputs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("reference example: four candidates on R1", reference_candidates),
        ("impact scenario: n3 down reaches n8 and n9", impact_scenario),
        ("exact enumeration equals brute force", oracle_equivalence),
        ("metric bounds and laws", metric_laws),
        ("directive-set union semantics", union_semantics),
        ("trace round trip and antitone thresholds", trace_round_trip),
        ("course-management matrix row", course_matrix_row),
        ("persistence laws", persistence_laws),
        ("CLI/API parity", cli_api_parity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
