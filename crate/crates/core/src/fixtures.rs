//! Reference graphs and projects used by tests, benchmarks and the CLI's
//! sample files.

use std::collections::BTreeSet;

use crate::formulation::CapabilitySet;
use crate::graph::{Directive, Edge, EdgeKind, FdGraph, FdNode, Need, RiskCategory};
use crate::ids::{NodeId, RequirementId};
use crate::optimization::Constraints;
use crate::store::{Mutation, Project};
use crate::transformation::Drafts;

/// Fixed audit timestamp so fixture projects serialize identically.
pub const FIXTURE_TIME: &str = "2026-01-01T00:00:00Z";

pub const FORUM_NEED: &str = "Need a facility for students and faculty to share ideas, discuss questions";
pub const FORUM_CAPABILITY: &str = "Discussion Forum";
pub const ANNOUNCEMENT_DIRECTIVE: &str = "Provide a separate section for faculty to post important announcements";
pub const FACULTY_WRITE_REQUIREMENT: &str =
    "For the announcement section, the write permission must be enabled only for users designated as faculty";

fn d(id: &str) -> FdNode {
    FdNode::directive(id, format!("directive {id}"), Directive::from_category(RiskCategory::Catastrophic, 10.0, 9))
}

fn decompose(edges: &mut Vec<Edge>, parent: &str, children: &[&str]) {
    edges.extend(children.iter().map(|c| Edge::new(parent, *c, EdgeKind::Decomposition)));
}

fn r1_parts() -> (Vec<FdNode>, Vec<Edge>) {
    let mut nodes = vec![FdNode::mission("m", "mission").with_needs(["need-1"])];
    for n in ["n1", "n2", "n3", "n7", "n8", "n9"] {
        nodes.push(FdNode::functional(n, format!("function {n}")));
    }
    nodes.extend((1..=14).map(|i| d(&format!("d{i}"))));

    let mut edges = Vec::new();
    decompose(&mut edges, "m", &["n1", "n2", "n3"]);
    decompose(&mut edges, "n1", &["d1", "d2", "d3", "d4", "d5"]);
    edges.push(Edge::new("n2", "n7", EdgeKind::Refinement));
    decompose(&mut edges, "n7", &["d6", "d7", "d8", "d9"]);
    decompose(&mut edges, "n3", &["n8", "n9"]);
    decompose(&mut edges, "n8", &["d10", "d11", "d12"]);
    decompose(&mut edges, "n9", &["d13", "d14"]);
    (nodes, edges)
}

/// Mission `m` over three functional subtrees and fourteen directives, all
/// at full relevance with effort 10 and readiness 9.
pub fn r1_graph() -> FdGraph {
    let (nodes, edges) = r1_parts();
    FdGraph::build(nodes, edges).expect("reference graph is valid")
}

/// [`r1_graph`] plus an intersection edge `n8 -> d9`, so `d9` is shared.
pub fn r2_graph() -> FdGraph {
    let (nodes, mut edges) = r1_parts();
    edges.push(Edge::new("n8", "d9", EdgeKind::Intersection));
    FdGraph::build(nodes, edges).expect("reference graph is valid")
}

/// Mission with `n` directive children and no functional node.
pub fn flat_graph(n: usize) -> FdGraph {
    let mut nodes = vec![FdNode::mission("m", "mission").with_needs(["need-1"])];
    let mut edges = Vec::new();
    for i in 1..=n {
        let id = format!("d{i}");
        nodes.push(d(&id));
        edges.push(Edge::new("m", id, EdgeKind::Decomposition));
    }
    FdGraph::build(nodes, edges).expect("flat graph is valid")
}

/// Copy of `graph` with the directive `id` modified by `f`.
pub fn with_directive(graph: &FdGraph, id: &str, f: impl FnOnce(&mut Directive)) -> FdGraph {
    let mut nodes = graph.nodes().to_vec();
    let node = nodes.iter_mut().find(|n| n.id.as_str() == id).expect("directive exists");
    f(node.directive.as_mut().expect("node is a directive"));
    FdGraph::build(nodes, graph.edges().to_vec()).expect("modified graph is valid")
}

/// Copy of `graph` with new relevances; categories follow the bands.
pub fn with_relevance(graph: &FdGraph, values: &[(&str, f64)]) -> FdGraph {
    values.iter().fold(graph.clone(), |g, &(id, r)| {
        with_directive(&g, id, |d| {
            d.relevance = r;
            d.risk_category = RiskCategory::for_relevance(r).expect("relevance in [0,1]");
        })
    })
}

fn project_from(graph: FdGraph, name: &str) -> Project {
    Project::new(
        name,
        "mission-critical operations",
        "software-intensive system",
        vec![Need::new("need-1", "Mission need", "operator")],
        graph,
    )
    .expect("fixture project is valid")
}

pub fn r1_project() -> Project {
    project_from(r1_graph(), "r1")
}

pub fn r2_project() -> Project {
    project_from(r2_graph(), "r2")
}

fn members(ids: &[&str]) -> BTreeSet<NodeId> {
    ids.iter().map(|s| NodeId::from(*s)).collect()
}

fn select(project: Project, ids: &[&str]) -> Project {
    project
        .apply_at(
            Mutation::RecordSelection {
                members: members(ids),
                constraints: None,
            },
            FIXTURE_TIME,
        )
        .expect("fixture selection is valid")
}

pub fn r1_selected(ids: &[&str]) -> Project {
    select(r1_project(), ids)
}

pub fn r2_selected(ids: &[&str]) -> Project {
    select(r2_project(), ids)
}

/// R1 with `{n1, n7, n3}` chosen where only `n7` is feasible: `d1` and
/// `d10` sit below the readiness threshold.
pub fn r1_only_n7_feasible() -> Project {
    let mut g = r1_graph();
    for id in ["d1", "d10"] {
        g = with_directive(&g, id, |d| d.tech_readiness = 2);
    }
    project_from(g, "r1")
        .apply_at(
            Mutation::RecordSelection {
                members: members(&["n1", "n7", "n3"]),
                constraints: Some(Constraints::new(0.0, 5).expect("valid constraints")),
            },
            FIXTURE_TIME,
        )
        .expect("fixture selection is valid")
}

/// Transforms every directive of every feasible chosen member with
/// `per_directive` texts each.
pub fn transform_all(project: Project, per_directive: usize) -> Project {
    let selection = project.selection().expect("project has a selection").clone();
    selection.chosen_set.assignment.iter().fold(project, |p, (member, owned)| {
        if !selection.is_feasible(member.as_str()) {
            return p;
        }
        let drafts: Drafts = owned
            .iter()
            .filter(|d| !p.requirements().values().any(|r| &r.source_directive_id == *d))
            .map(|d| {
                let texts = (1..=per_directive).map(|i| format!("The system shall satisfy {d} ({i})")).collect();
                (d.clone(), texts)
            })
            .collect();
        p.apply_at(
            Mutation::Transform {
                capability: member.clone(),
                drafts,
            },
            FIXTURE_TIME,
        )
        .expect("transformation of a feasible member")
    })
}

pub fn r1_transformed(ids: &[&str], per_directive: usize) -> Project {
    transform_all(r1_selected(ids), per_directive)
}

/// R1 with extra needs, each attached to the given node.
pub fn r1_with_needs(attachments: &[(&str, &str)]) -> Project {
    attachments.iter().fold(r1_project(), |p, &(need, node)| {
        let p = p
            .apply_at(
                Mutation::AddNeed {
                    need: Need::new(need, format!("need {need}"), "operator"),
                },
                FIXTURE_TIME,
            )
            .expect("new need");
        let mut refs = p.graph().node(node).expect("node exists").need_refs.clone();
        refs.insert(need.into());
        p.apply_at(
            Mutation::SetNeedRefs {
                node: node.into(),
                needs: refs,
            },
            FIXTURE_TIME,
        )
        .expect("need reference")
    })
}

/// Fully transformed R1 with an additional `need-9` attached to `node`.
pub fn r1_transformed_with_need_on(ids: &[&str], node: &str) -> Project {
    let p = r1_with_needs(&[("need-9", node)]);
    transform_all(select(p, ids), 1)
}

/// A two-capability course-management project whose forum branch carries
/// one need, one directive and one transformed requirement.
pub fn course_management_project() -> Project {
    let announcements = Directive::from_category(RiskCategory::Critical, 5.0, 8);
    let grades = Directive::from_category(RiskCategory::Marginal, 8.0, 7);
    let nodes = vec![
        FdNode::mission("m", "Course management system"),
        FdNode::functional("forum", FORUM_CAPABILITY).with_needs(["need-forum"]),
        FdNode::functional("grades", "Grade Book").with_needs(["need-grades"]),
        FdNode::directive("dir-announcements", ANNOUNCEMENT_DIRECTIVE, announcements),
        FdNode::directive("dir-grades", "Let students view their grades online", grades),
    ];
    let edges = vec![
        Edge::new("m", "forum", EdgeKind::Decomposition),
        Edge::new("m", "grades", EdgeKind::Decomposition),
        Edge::new("forum", "dir-announcements", EdgeKind::Refinement),
        Edge::new("grades", "dir-grades", EdgeKind::Refinement),
    ];
    let graph = FdGraph::build(nodes, edges).expect("course graph is valid");
    let project = Project::new(
        "course-management",
        "university teaching",
        "web application",
        vec![
            Need::new("need-forum", FORUM_NEED, "students and faculty"),
            Need::new("need-grades", "Need students to see their grades without asking", "students"),
        ],
        graph,
    )
    .expect("course project is valid");
    let project = select(project, &["forum", "grades"]);
    let drafts = Drafts::from([(NodeId::from("dir-announcements"), vec![FACULTY_WRITE_REQUIREMENT.to_owned()])]);
    let project = project
        .apply_at(
            Mutation::Transform {
                capability: "forum".into(),
                drafts,
            },
            FIXTURE_TIME,
        )
        .expect("forum transformation");

    let mut doc = project.to_document();
    for r in &mut doc.requirements {
        r.id = RequirementId::from("req-faculty-write");
    }
    for entry in &mut doc.audit_log {
        for e in &mut entry.entities {
            if e == "dir-announcements-r1" {
                *e = "req-faculty-write".into();
            }
        }
    }
    Project::from_document(doc).expect("renamed requirement")
}

/// Sample candidate set for benchmarks and doc examples.
pub fn r1_chosen_set() -> CapabilitySet {
    let g = r1_graph();
    CapabilitySet::new(&g, members(&["n1", "n7", "n3"]), &Default::default()).expect("valid candidate")
}
